//! RAU placement by clustering in joint location-SNR space.
//!
//! Each demand sample becomes an augmented vector `[a₁·x, a₂·(θ̄_d + δ/ν)]`.
//! The coordinate scales `a₁, a₂` are chosen so that the clusterer's
//! per-sample distortion equals `ω₁‖x − μˣ‖ + ω₂|θ − μᶿ|` (absolute mode) or
//! `ω₁‖x − μˣ‖² + ω₂(θ − μᶿ)²` (squared mode), i.e. `a = ω` and `a = √ω`
//! respectively. With the bound weights below, the resulting quantization
//! error is exactly the location and SNR terms of the capacity-error bound.
//!
//! The location-only criterion (SDC) clusters `a₁·x` alone.

use std::f64::consts::LN_2;

use serde::{Deserialize, Serialize};

use crate::cluster::{self, ClusterParams, Codebook, ErrorMode};
use crate::error::{Error, Result};
use crate::geometry::{DemandSample, Point, Scenario};

/// Placement criterion.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Criterion {
    /// Squared distance criterion: clusters user locations only.
    Sdc,
    /// Input-output clustering criterion.
    Iocc,
}

impl Criterion {
    pub fn as_str(&self) -> &'static str {
        match self {
            Criterion::Sdc => "sdc",
            Criterion::Iocc => "iocc",
        }
    }
}

impl std::fmt::Display for Criterion {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Criterion {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "sdc" => Ok(Criterion::Sdc),
            "iocc" => Ok(Criterion::Iocc),
            other => Err(format!("unknown criterion `{other}` (expected sdc or iocc)")),
        }
    }
}

/// Weights of the augmented samples and the constants they derive from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IoccWeights {
    /// Lipschitz constant of log₂(1 + θ) above the smallest demanded SNR.
    pub nu: f64,
    /// Lipschitz constant of the average-SNR field, SNR per meter.
    pub nu_glob: f64,
    /// Small-scale fading factor γ (= M).
    pub gamma_fading: f64,
    pub omega1: f64,
    pub omega2: f64,
    /// Spatial dimension.
    pub q: usize,
    pub mode: ErrorMode,
}

impl IoccWeights {
    /// `ω₁ = (q+1)ν²ν_glob², ω₂ = (q+1)ν²` (squared) or
    /// `ω₁ = ν·ν_glob, ω₂ = ν` (absolute).
    pub fn new(nu: f64, nu_glob: f64, gamma_fading: f64, q: usize, mode: ErrorMode) -> Self {
        let (omega1, omega2) = match mode {
            ErrorMode::Squared => {
                let c = (q + 1) as f64 * nu * nu;
                (c * nu_glob * nu_glob, c)
            }
            ErrorMode::Absolute => (nu * nu_glob, nu),
        };
        Self {
            nu,
            nu_glob,
            gamma_fading,
            omega1,
            omega2,
            q,
            mode,
        }
    }

    /// Weights for `samples`, with ν_glob evaluated at the equal power split.
    pub fn for_scenario(scenario: &Scenario, samples: &[DemandSample], mode: ErrorMode) -> Result<Self> {
        let nu = compute_nu(samples)?;
        let k = scenario.num_raus;
        let powers = vec![scenario.sum_power / k as f64; k];
        let nu_glob = compute_nu_glob(scenario, &powers);
        Ok(Self::new(nu, nu_glob, scenario.mean_small_scale(), scenario.dim(), mode))
    }

    /// Same weights with the SNR coordinate switched off.
    pub fn without_snr(&self) -> Self {
        Self {
            omega2: 0.0,
            ..*self
        }
    }

    /// Coordinate scale applied to locations.
    pub fn loc_scale(&self) -> f64 {
        match self.mode {
            ErrorMode::Squared => self.omega1.sqrt(),
            ErrorMode::Absolute => self.omega1,
        }
    }

    /// Coordinate scale applied to the SNR component.
    pub fn snr_scale(&self) -> f64 {
        match self.mode {
            ErrorMode::Squared => self.omega2.sqrt(),
            ErrorMode::Absolute => self.omega2,
        }
    }

    /// δ/ν, the margin expressed in SNR units.
    pub fn snr_margin(&self, delta: f64) -> f64 {
        delta / self.nu
    }
}

/// ν = 1 / ((1 + θ_min)·ln 2), θ_min the smallest demanded SNR. Never exceeds 1/ln 2.
pub fn compute_nu(samples: &[DemandSample]) -> Result<f64> {
    let theta_min = samples
        .iter()
        .map(|s| s.theta_d)
        .fold(f64::INFINITY, f64::min);
    if !theta_min.is_finite() {
        return Err(Error::EmptySamples);
    }
    Ok((1.0 / ((1.0 + theta_min.max(0.0)) * LN_2)).min(1.0 / LN_2))
}

/// ν_glob = α·γ·Σ_k p_k s̄_k / (σ² d_min^(α+1)) with γ = M.
pub fn compute_nu_glob(scenario: &Scenario, powers: &[f64]) -> f64 {
    let gamma = scenario.mean_small_scale();
    let sbar = scenario.mean_shadow();
    let weighted: f64 = powers.iter().map(|p| p * sbar).sum();
    scenario.alpha * gamma * weighted / (scenario.noise_power * scenario.d_min.powf(scenario.alpha + 1.0))
}

/// A weighted input-output vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AugmentedSample {
    /// Scaled location, q components.
    pub loc_part: Vec<f64>,
    /// Scaled θ̄_d + δ/ν.
    pub snr_part: f64,
    pub source_index: usize,
}

impl AugmentedSample {
    /// The full augmented row `[loc_part..., snr_part]`.
    pub fn row(&self) -> Vec<f64> {
        let mut r = self.loc_part.clone();
        r.push(self.snr_part);
        r
    }

    /// Recovers `(x, θ̄_d + δ/ν)`. The SNR part is lost when its weight is zero.
    pub fn unweighted(&self, weights: &IoccWeights) -> (Point, Option<f64>) {
        let s1 = weights.loc_scale();
        let coords: Vec<f64> = self.loc_part.iter().map(|v| v / s1).collect();
        let s2 = weights.snr_scale();
        let snr = (s2 != 0.0).then(|| self.snr_part / s2);
        (Point::from_coords(&coords), snr)
    }
}

/// Builds augmented samples in input order.
pub fn build_augmented(samples: &[DemandSample], weights: &IoccWeights, delta: f64) -> Vec<AugmentedSample> {
    let s1 = weights.loc_scale();
    let s2 = weights.snr_scale();
    let margin = weights.snr_margin(delta);
    samples
        .iter()
        .enumerate()
        .map(|(i, s)| AugmentedSample {
            loc_part: s.x.coords(weights.q).iter().map(|v| s1 * v).collect(),
            snr_part: s2 * (s.theta_d + margin),
            source_index: i,
        })
        .collect()
}

/// Lloyd clustering of augmented samples in the full input-output space.
pub fn lloyd_cluster(samples: &[AugmentedSample], params: &ClusterParams) -> Result<Codebook> {
    let rows: Vec<Vec<f64>> = samples.iter().map(AugmentedSample::row).collect();
    cluster::lloyd(&rows, params)
}

/// Q: mean per-sample distortion of the augmented samples against the codebook.
pub fn quantization_error(samples: &[AugmentedSample], codebook: &Codebook) -> Result<f64> {
    if codebook.assignment.len() != samples.len()
        || codebook.centroids.iter().any(|c| c.len() != samples.first().map_or(0, |s| s.loc_part.len() + 1))
    {
        return Err(Error::MissingCodebook);
    }
    let rows: Vec<Vec<f64>> = samples.iter().map(AugmentedSample::row).collect();
    Ok(cluster::mean_distortion(
        &rows,
        &codebook.centroids,
        &codebook.assignment,
        codebook.mode,
    ))
}

/// RAU sites produced by a placement criterion.
#[derive(Debug, Clone, PartialEq)]
pub struct RauLayout {
    pub criterion: Criterion,
    /// c_k = μˣ_k.
    pub locations: Vec<Point>,
    /// μᶿ_k in SNR units; includes the δ/ν margin.
    pub snr_targets: Vec<f64>,
    /// Codebook in the weighted input-output space of `weights`.
    pub codebook: Codebook,
    pub weights: IoccWeights,
}

impl RauLayout {
    pub fn len(&self) -> usize {
        self.locations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.locations.is_empty()
    }
}

/// Places `params.k` RAUs.
///
/// For [`Criterion::Iocc`] the codebook is designed on the augmented samples.
/// For [`Criterion::Sdc`] only the scaled locations are clustered; the SNR
/// targets are then the mode's prototype of each cluster's `θ̄_d + δ/ν`, and the
/// returned codebook expresses that partition in the same weighted space so its
/// quantization error is comparable with the IOCC one.
pub fn place_raus(
    scenario: &Scenario,
    samples: &[DemandSample],
    criterion: Criterion,
    weights: &IoccWeights,
    params: &ClusterParams,
) -> Result<RauLayout> {
    if samples.is_empty() {
        return Err(Error::EmptySamples);
    }
    if weights.q != scenario.dim() {
        return Err(Error::DimensionMismatch {
            expected: scenario.dim(),
            got: weights.q,
        });
    }
    let params = ClusterParams {
        mode: weights.mode,
        ..*params
    };
    let augmented = build_augmented(samples, weights, scenario.delta);
    let s1 = weights.loc_scale();
    let s2 = weights.snr_scale();
    let margin = weights.snr_margin(scenario.delta);
    let q = weights.q;

    let (location_centroids, assignment) = match criterion {
        Criterion::Iocc => {
            let cb = lloyd_cluster(&augmented, &params)?;
            let locs = cb.centroids.iter().map(|c| c[..q].to_vec()).collect::<Vec<_>>();
            if s2 != 0.0 {
                let targets = cb.centroids.iter().map(|c| c[q] / s2).collect();
                let locations = locs.iter().map(|c| unscale(c, s1)).collect();
                return Ok(RauLayout {
                    criterion,
                    locations,
                    snr_targets: targets,
                    codebook: cb,
                    weights: *weights,
                });
            }
            (locs, cb.assignment)
        }
        Criterion::Sdc => {
            let rows: Vec<Vec<f64>> = augmented.iter().map(|a| a.loc_part.clone()).collect();
            let cb = cluster::lloyd(&rows, &params)?;
            (cb.centroids, cb.assignment)
        }
    };

    // Zero SNR weight: targets are prototypes of each cluster's demanded SNR.
    let k = location_centroids.len();
    let mut groups = vec![Vec::new(); k];
    for (i, &a) in assignment.iter().enumerate() {
        groups[a].push(samples[i].theta_d + margin);
    }
    let fallback = {
        let mut all: Vec<f64> = samples.iter().map(|s| s.theta_d + margin).collect();
        params.mode.prototype(&mut all)
    };
    let snr_targets: Vec<f64> = groups
        .iter_mut()
        .map(|g| if g.is_empty() { fallback } else { params.mode.prototype(g) })
        .collect();

    let centroids: Vec<Vec<f64>> = location_centroids
        .iter()
        .zip(&snr_targets)
        .map(|(c, t)| {
            let mut row = c.clone();
            row.push(s2 * t);
            row
        })
        .collect();
    let rows: Vec<Vec<f64>> = augmented.iter().map(AugmentedSample::row).collect();
    let distortion = cluster::mean_distortion(&rows, &centroids, &assignment, params.mode);
    let codebook = Codebook {
        centroids,
        assignment,
        distortion,
        mode: params.mode,
        history: vec![distortion],
    };
    Ok(RauLayout {
        criterion,
        locations: location_centroids.iter().map(|c| unscale(c, s1)).collect(),
        snr_targets,
        codebook,
        weights: *weights,
    })
}

fn unscale(c: &[f64], scale: f64) -> Point {
    let coords: Vec<f64> = c.iter().map(|v| v / scale).collect();
    Point::from_coords(&coords)
}
