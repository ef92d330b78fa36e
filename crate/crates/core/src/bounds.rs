//! Capacity-error objectives, quantization errors, their upper bounds and the
//! effective/wasted capacity metrics.
//!
//! All cell averages are sample means over the supplied demand samples.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::cluster::ErrorMode;
use crate::error::{Error, Result};
use crate::fading::{ergodic_capacity, CapacityEstimate, McConfig};
use crate::geometry::{DemandSample, Placement, Point, Scenario};
use crate::placement::{IoccWeights, RauLayout};

pub use crate::placement::quantization_error;

/// Sample-averaged capacity errors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CapacityErrors {
    /// mean |Γ_d + δ − Γ̂_a|.
    pub j_e1: f64,
    /// mean (Γ_d + δ − Γ̂_a)².
    pub j2: f64,
}

/// Capacity errors from precomputed capacity estimates.
pub fn capacity_errors_from(samples: &[DemandSample], estimates: &[f64], delta: f64) -> CapacityErrors {
    assert_eq!(samples.len(), estimates.len());
    if samples.is_empty() {
        return CapacityErrors { j_e1: 0.0, j2: 0.0 };
    }
    let n = samples.len() as f64;
    let (mut abs, mut sq) = (0.0, 0.0);
    for (s, g) in samples.iter().zip(estimates) {
        let e = s.gamma_d + delta - g;
        abs += e.abs();
        sq += e * e;
    }
    CapacityErrors {
        j_e1: abs / n,
        j2: sq / n,
    }
}

/// Estimates Γ̂_a at every sample (sample `i` on MC substream `i`) and returns
/// the capacity errors.
pub fn capacity_errors(
    samples: &[DemandSample],
    placement: &Placement,
    scenario: &Scenario,
    mc: &McConfig,
) -> CapacityErrors {
    let xs: Vec<Point> = samples.iter().map(|s| s.x).collect();
    let est: Vec<f64> = crate::fading::ergodic_capacities(&xs, placement, scenario, mc)
        .iter()
        .map(|e| e.estimate)
        .collect();
    capacity_errors_from(samples, &est, scenario.delta)
}

/// Noiseless SNR-level counterpart of the capacity error:
/// `mean ρ(ν·(θ̄_d + δ/ν − θ̄_a(x)))`.
pub fn snr_surrogate_j(
    samples: &[DemandSample],
    placement: &Placement,
    scenario: &Scenario,
    weights: &IoccWeights,
) -> f64 {
    if samples.is_empty() {
        return 0.0;
    }
    let margin = weights.snr_margin(scenario.delta);
    let total: f64 = samples
        .iter()
        .map(|s| {
            let e = weights.nu * (s.theta_d + margin - scenario.avg_snr(&s.x, placement));
            match weights.mode {
                ErrorMode::Squared => e * e,
                ErrorMode::Absolute => e.abs(),
            }
        })
        .sum();
    total / samples.len() as f64
}

/// The three upper bounds, each split into its location and SNR parts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UbTerms {
    pub ub_e1_location: f64,
    pub ub_e1_snr: f64,
    pub ub_2_location: f64,
    pub ub_2_snr: f64,
    pub ub_opt: f64,
    /// Per-sample tightened Lipschitz factor of θ̄_a between `x` and its RAU.
    pub v_kx: Vec<f64>,
}

impl UbTerms {
    pub fn ub_e1(&self) -> f64 {
        self.ub_e1_location + self.ub_e1_snr
    }

    pub fn ub_2(&self) -> f64 {
        self.ub_2_location + self.ub_2_snr
    }
}

/// Distance from `p` to the segment `[a, b]`.
fn segment_distance(p: &Point, a: &Point, b: &Point) -> f64 {
    let ab = [b.x() - a.x(), b.y() - a.y()];
    let len2 = ab[0] * ab[0] + ab[1] * ab[1];
    if len2 == 0.0 {
        return p.distance(a);
    }
    let t = (((p.x() - a.x()) * ab[0] + (p.y() - a.y()) * ab[1]) / len2).clamp(0.0, 1.0);
    p.distance(&Point::new(a.x() + t * ab[0], a.y() + t * ab[1]))
}

/// Lipschitz factor of θ̄_a on the segment from `x` to `c_k`:
/// `(ḡ s̄/σ²) Σ_n p_n α / max(d_min, dist(c_n, [x, c_k]))^(α+1)`.
pub fn tightened_lipschitz(x: &Point, k: usize, placement: &Placement, scenario: &Scenario) -> f64 {
    let ck = placement.locations[k];
    let scale = scenario.mean_small_scale() * scenario.mean_shadow() / scenario.noise_power;
    let sum: f64 = placement
        .locations
        .iter()
        .zip(&placement.powers)
        .map(|(c, p)| {
            let d = segment_distance(c, x, &ck).max(scenario.d_min);
            p * scenario.alpha / d.powf(scenario.alpha + 1.0)
        })
        .sum();
    scale * sum
}

/// Sample forms of UB_E1, UB_2 and UB_opt for a layout powered by
/// `placement.powers` (the site-fitted powers). Sample `l` belongs to RAU
/// `codebook.assignment[l]`.
pub fn upper_bounds(
    samples: &[DemandSample],
    placement: &Placement,
    layout: &RauLayout,
    scenario: &Scenario,
) -> Result<UbTerms> {
    let assignment = &layout.codebook.assignment;
    if assignment.len() != samples.len() || placement.len() != layout.len() {
        return Err(Error::MissingCodebook);
    }
    if samples.is_empty() {
        return Err(Error::EmptySamples);
    }
    let w = &layout.weights;
    let margin = w.snr_margin(scenario.delta);
    let q1 = (w.q + 1) as f64;
    let site_snr: Vec<f64> = placement
        .locations
        .iter()
        .map(|c| scenario.avg_snr(c, placement))
        .collect();
    let n = samples.len() as f64;
    let (mut loc1, mut snr1, mut loc2, mut snr2, mut opt) = (0.0, 0.0, 0.0, 0.0, 0.0);
    let mut v_kx = Vec::with_capacity(samples.len());
    for (s, &k) in samples.iter().zip(assignment) {
        let c = &placement.locations[k];
        let e = s.theta_d + margin - site_snr[k];
        loc1 += s.x.l1_distance(c);
        snr1 += e.abs();
        loc2 += s.x.squared_distance(c);
        snr2 += e * e;
        let v = tightened_lipschitz(&s.x, k, placement, scenario);
        let t = v * s.x.distance(c) + e.abs();
        opt += t * t;
        v_kx.push(v);
    }
    let nu = w.nu;
    Ok(UbTerms {
        ub_e1_location: nu * w.nu_glob * loc1 / n,
        ub_e1_snr: nu * snr1 / n,
        ub_2_location: q1 * nu * nu * w.nu_glob * w.nu_glob * loc2 / n,
        ub_2_snr: q1 * nu * nu * snr2 / n,
        ub_opt: nu * nu * opt / n,
        v_kx,
    })
}

/// One evaluated location.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LocationReport {
    pub x: Point,
    pub gamma_d: f64,
    /// Γ̂_a.
    pub gamma_a: f64,
    pub std_error: f64,
    pub effective: f64,
    pub wasted: f64,
    pub theta_d: f64,
    /// θ̄_a.
    pub theta_a: f64,
}

impl LocationReport {
    pub fn new(sample: &DemandSample, estimate: CapacityEstimate, theta_a: f64) -> Self {
        let (effective, wasted) = effective_and_wasted(sample.gamma_d, estimate.estimate);
        Self {
            x: sample.x,
            gamma_d: sample.gamma_d,
            gamma_a: estimate.estimate,
            std_error: estimate.std_error,
            effective,
            wasted,
            theta_d: sample.theta_d,
            theta_a,
        }
    }
}

/// `(min(Γ_d, Γ_a), max(Γ_a − Γ_d, 0))`.
pub fn effective_and_wasted(gamma_d: f64, gamma_a: f64) -> (f64, f64) {
    (gamma_d.min(gamma_a), (gamma_a - gamma_d).max(0.0))
}

/// Everything measured for one placement.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub j_e1: f64,
    pub j2: f64,
    /// Standard error of `j2` from the per-location MC errors (first order).
    pub j2_std_error: f64,
    /// Noiseless SNR-level objective at the evaluated powers.
    pub j_snr: f64,
    /// Distortion of the codebook in its clustering mode.
    pub q: f64,
    pub ub_e1: f64,
    pub ub_2: f64,
    pub ub_opt: f64,
    pub cell_avg_capacity: f64,
    pub cell_avg_effective: f64,
    pub cell_avg_wasted: f64,
    pub feasible_exact: bool,
    pub per_location: Vec<LocationReport>,
}

/// Estimates capacity at every sample and fills the capacity fields of an
/// [`EvalReport`]; bound and quantization fields are left at zero.
///
/// `streams[i]` is the MC substream of sample `i`; pass `None` to use the
/// sample index.
pub fn effective_capacity_report(
    samples: &[DemandSample],
    placement: &Placement,
    scenario: &Scenario,
    mc: &McConfig,
    streams: Option<&[u64]>,
) -> EvalReport {
    use rayon::prelude::*;
    let per_location: Vec<LocationReport> = samples
        .par_iter()
        .enumerate()
        .map(|(i, s)| {
            let stream = streams.map_or(i as u64, |st| st[i]);
            let est = ergodic_capacity(&s.x, placement, scenario, mc, stream);
            LocationReport::new(s, est, scenario.avg_snr(&s.x, placement))
        })
        .collect();
    let estimates: Vec<f64> = per_location.iter().map(|r| r.gamma_a).collect();
    let errors = capacity_errors_from(samples, &estimates, scenario.delta);
    let n = per_location.len().max(1) as f64;
    let mean = |f: fn(&LocationReport) -> f64| per_location.iter().map(f).sum::<f64>() / n;
    // d(e²) = 2e·dΓ̂ per location, independent across locations.
    let j2_var: f64 = per_location
        .iter()
        .map(|r| {
            let e = r.gamma_d + scenario.delta - r.gamma_a;
            (2.0 * e * r.std_error).powi(2)
        })
        .sum::<f64>()
        / (n * n);
    EvalReport {
        j_e1: errors.j_e1,
        j2: errors.j2,
        j2_std_error: j2_var.sqrt(),
        j_snr: 0.0,
        q: 0.0,
        ub_e1: 0.0,
        ub_2: 0.0,
        ub_opt: 0.0,
        cell_avg_capacity: mean(|r| r.gamma_a),
        cell_avg_effective: mean(|r| r.effective),
        cell_avg_wasted: mean(|r| r.wasted),
        feasible_exact: false,
        per_location,
    }
}

/// Header of the per-location CSV.
pub const PER_LOCATION_HEADER: [&str; 9] = [
    "x", "y", "gamma_d", "gamma_a", "std_error", "effective", "wasted", "theta_d", "theta_a",
];

/// Formats a float with 12 significant digits.
pub fn fmt_float(v: f64) -> String {
    format!("{v:.11e}")
}

impl EvalReport {
    /// Writes one row per location.
    pub fn write_per_location<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(PER_LOCATION_HEADER)?;
        for r in &self.per_location {
            w.write_record(
                [
                    r.x.x(),
                    r.x.y(),
                    r.gamma_d,
                    r.gamma_a,
                    r.std_error,
                    r.effective,
                    r.wasted,
                    r.theta_d,
                    r.theta_a,
                ]
                .map(fmt_float),
            )?;
        }
        w.flush()?;
        Ok(())
    }
}
