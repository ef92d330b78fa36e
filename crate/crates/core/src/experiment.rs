//! Experiment definitions, their TOML file format and the built-in examples.
//!
//! The file format is documented in `docs/spec-file.md`.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::cluster::ErrorMode;
use crate::error::{Error, Result};
use crate::geometry::{Area, DemandField, Point, Scenario};
use crate::placement::Criterion;

/// Spec-file schema version understood by this build.
pub const SCHEMA_VERSION: u32 = 1;

/// Scenario parameters that do not depend on the number of RAUs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub area: Area,
    pub demand: DemandField,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default = "default_d_min")]
    pub d_min: f64,
    /// Omitted: calibrated so that one RAU at full power reaches the peak
    /// demanded SNR on average at `10·d_min`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise_power: Option<f64>,
    #[serde(default = "default_sigma")]
    pub shadow_sigma_db: f64,
    #[serde(default = "default_antennas")]
    pub antennas_per_rau: usize,
    #[serde(default = "default_sum_power")]
    pub sum_power: f64,
    #[serde(default)]
    pub delta: f64,
}

fn default_alpha() -> f64 {
    4.0
}
fn default_d_min() -> f64 {
    5.0
}
fn default_sigma() -> f64 {
    6.0
}
fn default_antennas() -> usize {
    1
}
fn default_sum_power() -> f64 {
    1.0
}

impl ScenarioConfig {
    /// The scenario with `k` RAUs and the noise power resolved.
    pub fn scenario(&self, k: usize) -> Result<Scenario> {
        let mut s = Scenario {
            area: self.area,
            alpha: self.alpha,
            d_min: self.d_min,
            noise_power: 1.0,
            shadow_sigma_db: self.shadow_sigma_db,
            antennas_per_rau: self.antennas_per_rau,
            num_raus: k,
            sum_power: self.sum_power,
            delta: self.delta,
            demand: self.demand.clone(),
        };
        s.noise_power = match self.noise_power {
            Some(n) => n,
            None => s.calibrated_noise_power()?,
        };
        s.validate()?;
        Ok(s)
    }
}

/// How user locations are drawn.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Sampling {
    /// Cell-midpoint grid, `n` points per axis.
    Grid { n: usize },
    /// `count` i.i.d. uniform points.
    UniformRandom { count: usize },
    /// Poisson point process with `density` points per unit area.
    Ppp { density: f64 },
}

impl Sampling {
    /// Points for sampling seed `seed`, plus the number of empty PPP draws
    /// that were discarded.
    pub fn draw(&self, area: &Area, seed: u64) -> Result<(Vec<Point>, usize)> {
        match *self {
            Sampling::Grid { n } => Ok((area.grid(n), 0)),
            Sampling::UniformRandom { count } => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                Ok(((0..count).map(|_| area.sample_uniform(&mut rng)).collect(), 0))
            }
            Sampling::Ppp { density } => sample_ppp(area, density, seed),
        }
    }

    /// Whether points violating the minimum distance are replaced rather than dropped.
    pub fn redraws(&self) -> bool {
        !matches!(self, Sampling::Grid { .. })
    }
}

/// Number of points of one PPP realisation.
pub fn ppp_count<R: Rng + ?Sized>(area: &Area, density: f64, rng: &mut R) -> Result<usize> {
    let mean = density * area.measure();
    if !(density > 0.0 && mean.is_finite()) {
        return Err(Error::InvalidExperiment(format!("PPP density must be positive, got {density}")));
    }
    let poisson = Poisson::new(mean).map_err(|e| Error::InvalidExperiment(e.to_string()))?;
    Ok(poisson.sample(rng) as usize)
}

/// One nonempty PPP realisation; empty draws are repeated and counted.
pub fn sample_ppp(area: &Area, density: f64, seed: u64) -> Result<(Vec<Point>, usize)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut empty = 0;
    loop {
        let n = ppp_count(area, density, &mut rng)?;
        if n > 0 {
            if empty > 0 {
                log::info!("PPP draw was empty {empty} time(s); redrawn");
            }
            return Ok(((0..n).map(|_| area.sample_uniform(&mut rng)).collect(), empty));
        }
        empty += 1;
    }
}

/// Power allocation policy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PowerMode {
    /// Fitted to the demanded SNR under the sum-power budget.
    #[default]
    Optimized,
    /// `p_k = p_sum / K`.
    EqualSplit,
}

/// Which per-location tables are written.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PerLocationOutput {
    None,
    #[default]
    FirstSeed,
    All,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub k_sweep: Vec<usize>,
    #[serde(default = "default_criteria")]
    pub criteria: Vec<Criterion>,
    #[serde(default)]
    pub power_mode: PowerMode,
    #[serde(default)]
    pub error_mode: ErrorMode,
    /// Number of seeds; seed indices are `0..seeds`.
    #[serde(default = "default_seeds")]
    pub seeds: usize,
    #[serde(default)]
    pub base_seed: u64,
    #[serde(default)]
    pub per_location: PerLocationOutput,
}

fn default_criteria() -> Vec<Criterion> {
    vec![Criterion::Sdc, Criterion::Iocc]
}
fn default_seeds() -> usize {
    20
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McSettings {
    #[serde(default = "default_draws")]
    pub num_draws: usize,
    /// Evaluate at most this many locations (evenly strided); 0 means all.
    #[serde(default)]
    pub eval_locations: usize,
}

fn default_draws() -> usize {
    20_000
}

impl Default for McSettings {
    fn default() -> Self {
        Self {
            num_draws: default_draws(),
            eval_locations: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClusteringSettings {
    #[serde(default = "default_restarts")]
    pub restarts: usize,
    #[serde(default = "default_max_iters")]
    pub max_iters: usize,
}

fn default_restarts() -> usize {
    10
}
fn default_max_iters() -> usize {
    300
}

impl Default for ClusteringSettings {
    fn default() -> Self {
        Self {
            restarts: default_restarts(),
            max_iters: default_max_iters(),
        }
    }
}

/// A complete, file-loadable experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub schema_version: u32,
    pub name: String,
    pub scenario: ScenarioConfig,
    pub sampling: Sampling,
    pub run: RunConfig,
    #[serde(default)]
    pub mc: McSettings,
    #[serde(default)]
    pub clustering: ClusteringSettings,
}

impl ExperimentSpec {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let spec: Self = toml::from_str(text)?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("spec serialises")
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidExperiment(msg));
        if self.schema_version != SCHEMA_VERSION {
            return bad(format!(
                "unsupported schema_version {} (expected {SCHEMA_VERSION})",
                self.schema_version
            ));
        }
        let max_k = self.run.k_sweep.iter().copied().max().unwrap_or(0);
        if self.run.k_sweep.is_empty() || self.run.k_sweep.contains(&0) {
            return bad("k_sweep must list positive RAU counts".into());
        }
        self.scenario.scenario(max_k)?;
        if self.run.criteria.is_empty() {
            return bad("at least one criterion is required".into());
        }
        if self.run.seeds == 0 {
            return bad("seeds must be >= 1".into());
        }
        if self.mc.num_draws < 2 {
            return bad("mc.num_draws must be >= 2".into());
        }
        if self.clustering.restarts == 0 || self.clustering.max_iters == 0 {
            return bad("clustering restarts and max_iters must be >= 1".into());
        }
        match self.sampling {
            Sampling::Grid { n: 0 } => return bad("grid needs n >= 1".into()),
            Sampling::UniformRandom { count: 0 } => {
                return bad("uniform_random needs count >= 1".into())
            }
            Sampling::Ppp { density } if !(density > 0.0 && density.is_finite()) => {
                return bad(format!("ppp density must be positive, got {density}"))
            }
            _ => {}
        }
        if matches!(self.sampling, Sampling::Grid { .. }) && self.scenario.area.dim() == 2 {
            log::debug!("2-D grid sampling uses n points per axis");
        }
        Ok(())
    }
}

fn ramp(from: Point, to: Point) -> DemandField {
    DemandField::LinearRamp {
        from,
        to,
        from_value: 5.35,
        to_value: 3.45,
    }
}

/// 2 km line, demand falling linearly from 5.35 to 3.45 bits/s/Hz, 100 grid
/// samples, optimized power.
pub fn make_example1() -> ExperimentSpec {
    ExperimentSpec {
        schema_version: SCHEMA_VERSION,
        name: "example1".into(),
        scenario: ScenarioConfig {
            area: Area::Segment { length: 2000.0 },
            demand: ramp(Point::on_line(0.0), Point::on_line(2000.0)),
            alpha: 4.0,
            d_min: default_d_min(),
            noise_power: None,
            shadow_sigma_db: default_sigma(),
            antennas_per_rau: 1,
            sum_power: 1.0,
            delta: 0.0,
        },
        sampling: Sampling::Grid { n: 100 },
        run: RunConfig {
            k_sweep: (1..=10).collect(),
            criteria: default_criteria(),
            power_mode: PowerMode::Optimized,
            error_mode: ErrorMode::Squared,
            seeds: 20,
            base_seed: 0,
            per_location: PerLocationOutput::FirstSeed,
        },
        mc: McSettings::default(),
        clustering: ClusteringSettings::default(),
    }
}

/// 500×500 m area, PPP users at 0.003 per m², demand linear along the
/// diagonal from 5.35 at the origin to 3.45 at the far corner, optimized power.
pub fn make_example2() -> ExperimentSpec {
    ExperimentSpec {
        name: "example2".into(),
        scenario: ScenarioConfig {
            area: Area::Rectangle {
                width: 500.0,
                height: 500.0,
            },
            demand: ramp(Point::new(0.0, 0.0), Point::new(500.0, 500.0)),
            ..make_example1().scenario
        },
        sampling: Sampling::Ppp { density: 0.003 },
        mc: McSettings {
            eval_locations: 200,
            ..McSettings::default()
        },
        ..make_example1()
    }
}

/// 500×500 m area, PPP users at 0.02 per m², demand 9.65 at the centre
/// falling to 3.45 at 250 m, equal power split, no margin.
pub fn make_example3(alpha: f64) -> ExperimentSpec {
    let base = make_example2();
    ExperimentSpec {
        name: format!("example3_alpha{alpha}"),
        scenario: ScenarioConfig {
            demand: DemandField::RadialRamp {
                center: Point::new(250.0, 250.0),
                center_value: 9.65,
                border_value: 3.45,
                radius: 250.0,
            },
            alpha,
            delta: 0.0,
            ..base.scenario
        },
        sampling: Sampling::Ppp { density: 0.02 },
        run: RunConfig {
            k_sweep: (2..=10).collect(),
            power_mode: PowerMode::EqualSplit,
            ..base.run
        },
        ..base
    }
}
