//! Transmit power allocation under the sum-power constraint.
//!
//! Everything here works at the fading-averaged SNR level, where the SNR
//! delivered to a point is linear in the power vector: `θ̄ = B·p`. Fitting a
//! set of SNR targets `t` is then a small convex problem
//!
//! ```text
//! minimise Σ_r ρ((B·p − t)_r)  subject to  p_k ≥ ε_p,  Σ_k p_k ≤ p_sum
//! ```
//!
//! with ρ = (·)² or |·|. The squared case is solved exactly by a primal
//! active-set method; the absolute case by iteratively reweighted least
//! squares on a smoothed objective, using the same active-set solver for
//! each reweighted step.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::cluster::ErrorMode;
use crate::error::{Error, Result};
use crate::geometry::{DemandSample, Point, Scenario};

/// Relative positivity floor: `ε_p = POWER_FLOOR · p_sum`.
pub const POWER_FLOOR: f64 = 1e-12;

/// Stationarity tolerance reported by the solvers.
pub const STATIONARITY_TOL: f64 = 1e-8;

/// The K×K system `A·(s̄ ⊙ p) = μᶿ` tying RAU powers to the SNR targets at
/// the RAU sites.
#[derive(Debug, Clone, PartialEq)]
pub struct SnrSystem {
    /// `A[i][k] = ḡ·φ(‖c_i − c_k‖)/σ²`, diagonal `ḡ·φ(d_min)/σ²`.
    pub a_matrix: DMatrix<f64>,
    /// SNR each RAU should deliver at its own site.
    pub target: Vec<f64>,
    /// Mean shadowing gain per RAU.
    pub sbar: Vec<f64>,
}

impl SnrSystem {
    pub fn len(&self) -> usize {
        self.target.len()
    }

    pub fn is_empty(&self) -> bool {
        self.target.is_empty()
    }

    /// Strict row diagonal dominance.
    pub fn is_diagonally_dominant(&self) -> bool {
        let a = &self.a_matrix;
        (0..a.nrows()).all(|i| {
            let off: f64 = (0..a.ncols()).filter(|&j| j != i).map(|j| a[(i, j)].abs()).sum();
            a[(i, i)].abs() > off
        })
    }

    /// Maps powers to SNR at the sites: `A·diag(s̄)`.
    pub fn power_to_snr(&self) -> DMatrix<f64> {
        let mut b = self.a_matrix.clone();
        for (k, s) in self.sbar.iter().enumerate() {
            b.column_mut(k).scale_mut(*s);
        }
        b
    }
}

/// Builds the site system for RAUs at `locations` with SNR `targets`.
pub fn build_system(locations: &[Point], targets: &[f64], scenario: &Scenario) -> SnrSystem {
    let k = locations.len();
    assert_eq!(k, targets.len(), "one target per RAU");
    let gbar = scenario.mean_small_scale();
    let a = DMatrix::from_fn(k, k, |i, j| {
        let d = if i == j { scenario.d_min } else { locations[i].distance(&locations[j]) };
        gbar * scenario.path_loss(d) / scenario.noise_power
    });
    SnrSystem {
        a_matrix: a,
        target: targets.to_vec(),
        sbar: vec![scenario.mean_shadow(); k],
    }
}

/// A power vector together with how it was obtained.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerSolution {
    pub powers: Vec<f64>,
    /// The unconstrained site solve was positive and within budget.
    pub feasible_exact: bool,
    /// Objective value at `powers`.
    pub residual: f64,
    /// The solver met its stopping criterion.
    pub converged: bool,
}

/// Outcome of [`solve_exact`].
#[derive(Debug, Clone, PartialEq)]
pub enum ExactSolve {
    Feasible(PowerSolution),
    /// The linear solve violated positivity or the budget; `powers` is the raw solution.
    Infeasible { powers: Vec<f64> },
}

impl ExactSolve {
    pub fn is_feasible(&self) -> bool {
        matches!(self, ExactSolve::Feasible(_))
    }
}

/// Solves `A·y = μᶿ` and recovers `p_k = y_k / s̄_k`.
pub fn solve_exact(system: &SnrSystem, p_sum: f64) -> Result<ExactSolve> {
    if !system.is_diagonally_dominant() {
        log::warn!("SNR system of {} RAUs is not diagonally dominant", system.len());
    }
    let lu = system.a_matrix.clone().lu();
    let rhs = DVector::from_column_slice(&system.target);
    let y = lu.solve(&rhs).ok_or(Error::SingularSystem)?;
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::SingularSystem);
    }
    let powers: Vec<f64> = y.iter().zip(&system.sbar).map(|(y, s)| y / s).collect();
    let total: f64 = powers.iter().sum();
    if powers.iter().all(|p| *p > 0.0) && total <= p_sum {
        let b = system.power_to_snr();
        let residual = objective(&b, &system.target, &powers, ErrorMode::Squared);
        Ok(ExactSolve::Feasible(PowerSolution {
            powers,
            feasible_exact: true,
            residual,
            converged: true,
        }))
    } else {
        Ok(ExactSolve::Infeasible { powers })
    }
}

/// Best site fit within the budget: the exact solution when it is feasible,
/// otherwise the constrained minimiser.
pub fn solve_sites(system: &SnrSystem, p_sum: f64, mode: ErrorMode) -> Result<PowerSolution> {
    match solve_exact(system, p_sum)? {
        ExactSolve::Feasible(sol) => Ok(sol),
        ExactSolve::Infeasible { .. } => Ok(solve_constrained(system, p_sum, mode)),
    }
}

/// Minimises `Σ_k ρ((A·(s̄⊙p) − μᶿ)_k)` over the feasible power set.
pub fn solve_constrained(system: &SnrSystem, p_sum: f64, mode: ErrorMode) -> PowerSolution {
    let b = system.power_to_snr();
    fit_powers(&b, &system.target, p_sum, mode)
}

/// Power vector fitting the demanded SNR plus `snr_margin` at every sample,
/// for RAUs fixed at `locations`.
pub fn optimize_global_power(
    locations: &[Point],
    samples: &[DemandSample],
    scenario: &Scenario,
    snr_margin: f64,
    mode: ErrorMode,
) -> PowerSolution {
    let (b, t) = sample_system(locations, samples, scenario, snr_margin);
    fit_powers(&b, &t, scenario.sum_power, mode)
}

/// Gain matrix `B[l][k] = ḡ s̄ φ(‖x_l − c_k‖)/σ²` and targets `θ̄_d(x_l) + margin`.
pub fn sample_system(
    locations: &[Point],
    samples: &[DemandSample],
    scenario: &Scenario,
    snr_margin: f64,
) -> (DMatrix<f64>, Vec<f64>) {
    let scale = scenario.mean_small_scale() * scenario.mean_shadow() / scenario.noise_power;
    let b = DMatrix::from_fn(samples.len(), locations.len(), |l, k| {
        scale * scenario.path_loss(samples[l].x.distance(&locations[k]))
    });
    let t = samples.iter().map(|s| s.theta_d + snr_margin).collect();
    (b, t)
}

/// `Σ_r ρ((B·p − t)_r)`.
pub fn objective(b: &DMatrix<f64>, t: &[f64], p: &[f64], mode: ErrorMode) -> f64 {
    let p = DVector::from_column_slice(p);
    let r = b * p;
    r.iter()
        .zip(t)
        .map(|(v, t)| match mode {
            ErrorMode::Squared => (v - t) * (v - t),
            ErrorMode::Absolute => (v - t).abs(),
        })
        .sum()
}

/// Euclidean projection onto `{p ≥ floor, Σp ≤ p_sum}`.
pub fn project_feasible(v: &[f64], floor: f64, p_sum: f64) -> Vec<f64> {
    let clamped: Vec<f64> = v.iter().map(|x| x.max(floor)).collect();
    if clamped.iter().sum::<f64>() <= p_sum {
        return clamped;
    }
    // p_i = max(v_i − τ, floor) with Σ p_i = p_sum; the sum is monotone in τ.
    let shifted = |tau: f64| v.iter().map(|x| (x - tau).max(floor)).sum::<f64>();
    let mut lo = v.iter().cloned().fold(f64::INFINITY, f64::min) - p_sum;
    let mut hi = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if shifted(mid) > p_sum {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    v.iter().map(|x| (x - hi).max(floor)).collect()
}

/// Relative projected-gradient residual of the squared objective at `p`.
pub fn squared_stationarity(b: &DMatrix<f64>, t: &[f64], p: &[f64], p_sum: f64) -> f64 {
    let pv = DVector::from_column_slice(p);
    let tv = DVector::from_column_slice(t);
    let grad = 2.0 * b.transpose() * (b * &pv - tv);
    // Step scaled by the Hessian diagonal so the test is unit-free.
    let h_diag: Vec<f64> = (0..b.ncols()).map(|k| 2.0 * b.column(k).norm_squared()).collect();
    let h_max = h_diag.iter().cloned().fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    let stepped: Vec<f64> = p.iter().zip(grad.iter()).map(|(p, g)| p - g / h_max).collect();
    let proj = project_feasible(&stepped, POWER_FLOOR * p_sum, p_sum);
    let diff: f64 = proj.iter().zip(p).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
    diff / p_sum
}

fn fit_powers(b: &DMatrix<f64>, t: &[f64], p_sum: f64, mode: ErrorMode) -> PowerSolution {
    let l2 = fit_squared(b, t, &vec![1.0; t.len()], p_sum);
    match mode {
        ErrorMode::Squared => {
            let residual = objective(b, t, &l2.0, ErrorMode::Squared);
            PowerSolution {
                powers: l2.0,
                feasible_exact: false,
                residual,
                converged: l2.1,
            }
        }
        ErrorMode::Absolute => fit_absolute(b, t, p_sum, l2.0),
    }
}

/// Weighted least squares over the feasible set. Returns the minimiser and
/// whether the active-set iteration reached a KKT point.
fn fit_squared(b: &DMatrix<f64>, t: &[f64], row_weights: &[f64], p_sum: f64) -> (Vec<f64>, bool) {
    let k = b.ncols();
    let mut bw = b.clone();
    for (r, w) in row_weights.iter().enumerate() {
        bw.row_mut(r).scale_mut(w.sqrt());
    }
    let tw = DVector::from_iterator(t.len(), t.iter().zip(row_weights).map(|(t, w)| t * w.sqrt()));
    // Column scaling: p = D u with unit-diagonal Hessian in u.
    let scale: Vec<f64> = (0..k)
        .map(|j| {
            let n = bw.column(j).norm();
            if n > 0.0 {
                1.0 / n
            } else {
                1.0
            }
        })
        .collect();
    let d = DMatrix::from_diagonal(&DVector::from_column_slice(&scale));
    let bs = &bw * &d;
    let h0 = bs.transpose() * &bs;
    let f = bs.transpose() * tw;
    let lo: Vec<f64> = scale.iter().map(|s| POWER_FLOOR * p_sum / s).collect();
    let start: Vec<f64> = scale.iter().map(|s| p_sum / k as f64 / s).collect();

    // A ridge is only added when (near-)collinear columns stall the solve.
    let mut last = (start.clone(), false);
    for ridge in [0.0, 1e-13, 1e-10] {
        let mut h = h0.clone();
        for i in 0..k {
            h[(i, i)] += ridge;
        }
        let (p, ok) = solve_scaled(&h, &f, &lo, &scale, &start, p_sum);
        if ok && p.iter().all(|v| v.is_finite()) {
            return (p, true);
        }
        if p.iter().all(|v| v.is_finite()) {
            last = (p, false);
        }
    }
    last
}

fn solve_scaled(
    h: &DMatrix<f64>,
    f: &DVector<f64>,
    lo: &[f64],
    scale: &[f64],
    start: &[f64],
    p_sum: f64,
) -> (Vec<f64>, bool) {
    let floor = POWER_FLOOR * p_sum;
    let (u, ok) = active_set_qp(h, f, lo, None, start);
    let p: Vec<f64> = u.iter().zip(scale).map(|(u, s)| u * s).collect();
    if p.iter().sum::<f64>() <= p_sum * (1.0 + 1e-12) {
        return (p, ok);
    }
    let (u, ok) = active_set_qp(h, f, lo, Some((scale, p_sum)), start);
    let mut p: Vec<f64> = u.iter().zip(scale).map(|(u, s)| (u * s).max(floor)).collect();
    // Absorb rounding so the budget holds exactly.
    let total: f64 = p.iter().sum();
    if total > p_sum {
        let excess = total - p_sum;
        if let Some(big) = p.iter_mut().max_by(|a, b| a.total_cmp(b)) {
            *big -= excess;
        }
    }
    (p, ok)
}

/// IRLS on `Σ sqrt(r² + η²)` with η driven towards zero.
fn fit_absolute(b: &DMatrix<f64>, t: &[f64], p_sum: f64, start: Vec<f64>) -> PowerSolution {
    let mode = ErrorMode::Absolute;
    let mut p = start;
    let mut best_obj = objective(b, t, &p, mode);
    let mut best = p.clone();
    let residuals = |p: &[f64]| -> Vec<f64> {
        let r = b * DVector::from_column_slice(p);
        r.iter().zip(t).map(|(v, t)| v - t).collect()
    };
    let t_scale = t.iter().map(|v| v.abs()).fold(0.0, f64::max).max(1e-300);
    let r0 = residuals(&p);
    let mut eta = (r0.iter().map(|v| v.abs()).sum::<f64>() / r0.len() as f64).max(t_scale * 1e-6);
    let eta_floor = t_scale * 1e-13;
    let mut converged = false;
    let mut last_outer = best_obj;
    for _ in 0..60 {
        for _ in 0..8 {
            let r = residuals(&p);
            let wts: Vec<f64> = r.iter().map(|r| 1.0 / (r * r + eta * eta).sqrt()).collect();
            p = fit_squared(b, t, &wts, p_sum).0;
            let obj = objective(b, t, &p, mode);
            if obj < best_obj {
                best_obj = obj;
                best.clone_from(&p);
            }
        }
        if eta <= eta_floor {
            converged = (last_outer - best_obj).abs() <= STATIONARITY_TOL * best_obj.max(t_scale * 1e-12);
            if converged {
                break;
            }
        }
        last_outer = best_obj;
        eta = (eta * 0.1).max(eta_floor);
    }
    PowerSolution {
        powers: best,
        feasible_exact: false,
        residual: best_obj,
        converged,
    }
}

/// Primal active-set method for
/// `min ½uᵀHu − fᵀu  s.t.  u ≥ lo  [and wᵀu = total]`, started from a
/// feasible `start`. `H` must be positive definite.
fn active_set_qp(
    h: &DMatrix<f64>,
    f: &DVector<f64>,
    lo: &[f64],
    equality: Option<(&[f64], f64)>,
    start: &[f64],
) -> (Vec<f64>, bool) {
    let n = lo.len();
    let mut u: Vec<f64> = start.iter().zip(lo).map(|(s, l)| s.max(*l)).collect();
    if let Some((w, total)) = equality {
        // Rescale the start onto the equality plane; it stays above the bounds
        // because the bounds are tiny relative to an even split.
        let cur: f64 = u.iter().zip(w).map(|(u, w)| u * w).sum();
        for v in u.iter_mut() {
            *v *= total / cur;
        }
    }
    let mut at_bound = vec![false; n];
    let tol = 1e-12;
    for _ in 0..(20 * n + 100) {
        let free: Vec<usize> = (0..n).filter(|&i| !at_bound[i]).collect();
        let uv = DVector::from_column_slice(&u);
        let g = h * &uv - f;
        let m = free.len();
        let eq_w = equality.map(|(w, _)| w);
        let dim = m + usize::from(eq_w.is_some() && m > 0);
        let mut step = vec![0.0; n];
        let mut eta = 0.0;
        if m > 0 {
            let mut kkt = DMatrix::zeros(dim, dim);
            let mut rhs = DVector::zeros(dim);
            for (a, &i) in free.iter().enumerate() {
                for (bb, &j) in free.iter().enumerate() {
                    kkt[(a, bb)] = h[(i, j)];
                }
                rhs[a] = -g[i];
            }
            if let Some(w) = eq_w {
                for (a, &i) in free.iter().enumerate() {
                    kkt[(a, m)] = w[i];
                    kkt[(m, a)] = w[i];
                }
            }
            let Some(sol) = kkt.lu().solve(&rhs) else {
                return (u, false);
            };
            for (a, &i) in free.iter().enumerate() {
                step[i] = sol[a];
            }
            if eq_w.is_some() {
                // H s + w λ = −g  ⇒  at s = 0, g = −λ w.
                eta = -sol[m];
            }
        }
        let step_norm: f64 = step.iter().zip(&u).map(|(s, u)| (s / u.abs().max(1e-300)).abs()).fold(0.0, f64::max);
        if step_norm <= tol {
            // Multipliers of the active bounds: g_i − η w_i ≥ 0.
            let mut worst: Option<(usize, f64)> = None;
            let g_scale = g.iter().map(|v| v.abs()).fold(0.0, f64::max).max(1e-300);
            for i in 0..n {
                if at_bound[i] {
                    let mult = g[i] - eq_w.map_or(0.0, |w| eta * w[i]);
                    if mult < -tol * g_scale && worst.is_none_or(|(_, m)| mult < m) {
                        worst = Some((i, mult));
                    }
                }
            }
            match worst {
                None => return (u, true),
                Some((i, _)) => {
                    at_bound[i] = false;
                    continue;
                }
            }
        }
        // Longest feasible step along `step`.
        let mut alpha = 1.0;
        let mut blocking = None;
        for &i in &free {
            if step[i] < 0.0 {
                let ratio = (lo[i] - u[i]) / step[i];
                if ratio < alpha {
                    alpha = ratio.max(0.0);
                    blocking = Some(i);
                }
            }
        }
        for i in 0..n {
            u[i] += alpha * step[i];
        }
        if let Some(i) = blocking {
            u[i] = lo[i];
            at_bound[i] = true;
        }
    }
    (u, false)
}
