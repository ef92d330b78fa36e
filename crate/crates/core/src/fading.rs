//! Seeded composite-fading draws and Monte Carlo ergodic capacity.
//!
//! Each location owns an RNG substream derived from `(seed, stream)`, so a
//! batch gives identical numbers whether it is evaluated serially or in
//! parallel, and two placements evaluated with the same seed see the same
//! fading realisations at every location (common random numbers).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Exp1, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::geometry::{Placement, Point, Scenario};

/// Monte Carlo settings.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct McConfig {
    pub seed: u64,
    pub num_draws: usize,
}

impl Default for McConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            num_draws: 20_000,
        }
    }
}

impl McConfig {
    /// RNG for the substream `stream` of this configuration.
    pub fn rng(&self, stream: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(stream);
        rng
    }
}

/// One joint realisation of shadowing and small-scale fading for K RAUs.
#[derive(Debug, Clone, PartialEq)]
pub struct FadingDraw {
    /// s_k = 10^(z/10), z ~ N(0, σ_s²).
    pub shadow: Vec<f64>,
    /// g_k = Σ_m |h_{k,m}|² ~ Gamma(M, 1).
    pub small_scale: Vec<f64>,
}

impl FadingDraw {
    /// Draws `num_raus` independent composite gains. Gamma(M, 1) is sampled as
    /// a sum of M unit exponentials.
    pub fn sample<R: Rng + ?Sized>(
        num_raus: usize,
        antennas: usize,
        shadow_sigma_db: f64,
        rng: &mut R,
    ) -> Self {
        let mut shadow = Vec::with_capacity(num_raus);
        let mut small_scale = Vec::with_capacity(num_raus);
        for _ in 0..num_raus {
            let (s, g) = draw_link(antennas, shadow_sigma_db, rng);
            shadow.push(s);
            small_scale.push(g);
        }
        Self {
            shadow,
            small_scale,
        }
    }
}

#[inline]
fn draw_link<R: Rng + ?Sized>(antennas: usize, shadow_sigma_db: f64, rng: &mut R) -> (f64, f64) {
    let z: f64 = rng.sample(StandardNormal);
    let s = 10f64.powf(shadow_sigma_db * z / 10.0);
    let g: f64 = (0..antennas).map(|_| rng.sample::<f64, _>(Exp1)).sum();
    (s, g)
}

/// One composite draw per RAU of the scenario.
pub fn sample_fading<R: Rng + ?Sized>(scenario: &Scenario, rng: &mut R) -> FadingDraw {
    FadingDraw::sample(
        scenario.num_raus,
        scenario.antennas_per_rau,
        scenario.shadow_sigma_db,
        rng,
    )
}

/// Instantaneous SNR `(1/σ²) Σ_k p_k s_k g_k φ(‖x − c_k‖)`.
pub fn instantaneous_snr(
    x: &Point,
    placement: &Placement,
    draw: &FadingDraw,
    scenario: &Scenario,
) -> f64 {
    let sum: f64 = placement
        .locations
        .iter()
        .zip(&placement.powers)
        .zip(draw.shadow.iter().zip(&draw.small_scale))
        .map(|((c, p), (s, g))| p * s * g * scenario.path_loss(x.distance(c)))
        .sum();
    sum / scenario.noise_power
}

/// Sample mean and its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CapacityEstimate {
    /// bits/s/Hz.
    pub estimate: f64,
    /// bits/s/Hz.
    pub std_error: f64,
}

/// Estimates Γ_a(x) = E[log₂(1 + θ)] from `mc.num_draws` draws on substream
/// `stream`.
///
/// # Panics
/// If `mc.num_draws < 2`.
pub fn ergodic_capacity(
    x: &Point,
    placement: &Placement,
    scenario: &Scenario,
    mc: &McConfig,
    stream: u64,
) -> CapacityEstimate {
    assert!(mc.num_draws >= 2, "need at least two draws for a standard error");
    let gains: Vec<f64> = placement
        .locations
        .iter()
        .zip(&placement.powers)
        .map(|(c, p)| p * scenario.path_loss(x.distance(c)) / scenario.noise_power)
        .collect();
    let mut rng = mc.rng(stream);
    // Welford
    let mut mean = 0.0;
    let mut m2 = 0.0;
    for n in 1..=mc.num_draws {
        let mut snr = 0.0;
        for gain in &gains {
            let (s, g) = draw_link(scenario.antennas_per_rau, scenario.shadow_sigma_db, &mut rng);
            snr += gain * s * g;
        }
        let v = snr.ln_1p() / std::f64::consts::LN_2;
        let d = v - mean;
        mean += d / n as f64;
        m2 += d * (v - mean);
    }
    let n = mc.num_draws as f64;
    let var = m2 / (n - 1.0);
    CapacityEstimate {
        estimate: mean,
        std_error: (var / n).sqrt(),
    }
}

/// [`ergodic_capacity`] at every location, location `i` on substream `i`.
pub fn ergodic_capacities(
    xs: &[Point],
    placement: &Placement,
    scenario: &Scenario,
    mc: &McConfig,
) -> Vec<CapacityEstimate> {
    xs.par_iter()
        .enumerate()
        .map(|(i, x)| ergodic_capacity(x, placement, scenario, mc, i as u64))
        .collect()
}
