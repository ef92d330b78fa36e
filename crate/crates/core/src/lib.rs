//! Placement of remote antenna units by input-output clustering.
//!
//! A scenario fixes the area, channel model and demanded-capacity field.
//! Demand samples drawn from it are clustered either on location alone
//! ([`Criterion::Sdc`]) or on joint location and demanded-SNR vectors
//! ([`Criterion::Iocc`]); RAU powers are then fitted under a sum-power budget
//! and the result is evaluated by Monte Carlo ergodic capacity.

pub mod bounds;
pub mod cluster;
pub mod error;
pub mod experiment;
pub mod fading;
pub mod geometry;
pub mod placement;
pub mod power;
pub mod sweep;

pub use bounds::{EvalReport, UbTerms};
pub use cluster::{ClusterParams, Codebook, ErrorMode};
pub use error::{Error, Result};
pub use experiment::{ExperimentSpec, PowerMode, Sampling};
pub use fading::{CapacityEstimate, McConfig};
pub use geometry::{Area, DemandField, DemandSample, Placement, Point, Scenario};
pub use placement::{Criterion, IoccWeights, RauLayout};
pub use power::PowerSolution;
pub use sweep::{run_sweep, SweepResult};
