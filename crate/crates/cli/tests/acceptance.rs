//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit if any fails.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::Command;
use std::time::Instant;

use iocc::bounds::{snr_surrogate_j, upper_bounds};
use iocc::cluster::{lloyd, ClusterParams, ErrorMode};
use iocc::experiment::{make_example1, make_example2, make_example3, ExperimentSpec};
use iocc::geometry::{path_loss, path_loss_lipschitz, Area, DemandField, DemandSample, Placement, Point, Scenario};
use iocc::placement::{build_augmented, compute_nu_glob, place_raus, quantization_error, Criterion, IoccWeights};
use iocc::power::{self, build_system, solve_exact, ExactSolve, POWER_FLOOR};
use iocc::sweep::{draw_samples, median, plan_powers, run_sweep, CellSeeds};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

fn check(ok: bool, pass: String, fail: String) -> Outcome {
    if ok {
        Ok(pass)
    } else {
        Err(fail)
    }
}

fn random_scenario(rng: &mut ChaCha8Rng, q: usize, k: usize) -> Scenario {
    let area = if q == 1 {
        Area::Segment {
            length: rng.random_range(300.0..2000.0),
        }
    } else {
        Area::Rectangle {
            width: rng.random_range(200.0..600.0),
            height: rng.random_range(200.0..600.0),
        }
    };
    let far = match area {
        Area::Segment { length } => Point::on_line(length),
        Area::Rectangle { width, height } => Point::new(width, height),
    };
    let mut s = Scenario {
        area,
        alpha: rng.random_range(2.5..5.0),
        d_min: rng.random_range(2.0..10.0),
        noise_power: 1.0,
        shadow_sigma_db: 6.0,
        antennas_per_rau: rng.random_range(1..=3),
        num_raus: k,
        sum_power: 1.0,
        delta: if rng.random_bool(0.5) { rng.random_range(0.0..0.5) } else { 0.0 },
        demand: DemandField::LinearRamp {
            from: Point::new(0.0, 0.0),
            to: far,
            from_value: rng.random_range(2.0..6.0),
            to_value: rng.random_range(2.0..6.0),
        },
    };
    s.noise_power = s.calibrated_noise_power().unwrap();
    s
}

fn random_samples(rng: &mut ChaCha8Rng, s: &Scenario, l: usize) -> Vec<DemandSample> {
    (0..l)
        .map(|_| s.demand_sample(s.area.sample_uniform(rng)).unwrap())
        .collect()
}

fn rel_le(a: f64, b: f64, tol: f64) -> bool {
    a <= b + tol * b.abs().max(a.abs())
}

/// 1. j ≤ UB_opt ≤ UB_2 on random feasible instances, and UB_2 = Q₂.
fn criterion1() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let mut found = 0;
    let mut attempts = 0;
    let mut worst_eq = 0.0f64;
    while found < 50 {
        attempts += 1;
        if attempts > 2000 {
            return Err(format!("only {found} feasible instances in {attempts} attempts"));
        }
        let q = rng.random_range(1..=2);
        let k = rng.random_range(2..=6);
        let l = rng.random_range(20..=60);
        let s = random_scenario(&mut rng, q, k);
        let samples = random_samples(&mut rng, &s, l);
        let w = IoccWeights::for_scenario(&s, &samples, ErrorMode::Squared).unwrap();
        let params = ClusterParams::new(k, ErrorMode::Squared, rng.random());
        let layout = place_raus(&s, &samples, Criterion::Iocc, &w, &params).unwrap();
        let system = build_system(&layout.locations, &layout.snr_targets, &s);
        let ExactSolve::Feasible(cls) = solve_exact(&system, s.sum_power).unwrap() else {
            continue;
        };
        found += 1;
        let cls_placement = Placement::new(layout.locations.clone(), cls.powers.clone());
        let margin = w.snr_margin(s.delta);
        let glob = power::optimize_global_power(&layout.locations, &samples, &s, margin, ErrorMode::Squared);
        let glob_placement = Placement::new(layout.locations.clone(), glob.powers);
        let j = snr_surrogate_j(&samples, &glob_placement, &s, &w);
        let ub = upper_bounds(&samples, &cls_placement, &layout, &s).unwrap();
        let q2 = quantization_error(&build_augmented(&samples, &w, s.delta), &layout.codebook).unwrap();
        let eq = (ub.ub_2() - q2).abs() / q2;
        worst_eq = worst_eq.max(eq);
        if !rel_le(j, ub.ub_opt, 1e-9) || !rel_le(ub.ub_opt, ub.ub_2(), 1e-9) || eq > 1e-9 {
            return Err(format!(
                "instance {found}: j={j:.6e} ub_opt={:.6e} ub_2={:.6e} q2={q2:.6e}",
                ub.ub_opt,
                ub.ub_2()
            ));
        }
    }
    Ok(format!("50 feasible instances, max |UB_2-Q_2|/Q_2 = {worst_eq:.1e}"))
}

/// 2. K = L on Example 1 gives Q₂ = 0 and UB_2 = 0.
fn criterion2() -> Outcome {
    let spec = make_example1();
    let s = spec.scenario.scenario(100).unwrap();
    let samples = draw_samples(&spec, &s, 0).unwrap();
    let w = IoccWeights::for_scenario(&s, &samples, ErrorMode::Squared).unwrap();
    let layout = place_raus(&s, &samples, Criterion::Iocc, &w, &ClusterParams::new(100, ErrorMode::Squared, 7)).unwrap();
    let ExactSolve::Feasible(cls) = solve_exact(&build_system(&layout.locations, &layout.snr_targets, &s), s.sum_power).unwrap()
    else {
        return Err("K = L instance is not feasible".into());
    };
    let placement = Placement::new(layout.locations.clone(), cls.powers);
    let ub = upper_bounds(&samples, &placement, &layout, &s).unwrap();
    let q2 = quantization_error(&build_augmented(&samples, &w, s.delta), &layout.codebook).unwrap();
    // Scale of UB_2 with a single codeword, for a relative zero test.
    let snr_scale: f64 = samples.iter().map(|x| x.theta_d * x.theta_d).sum::<f64>() / samples.len() as f64
        * 2.0
        * w.nu
        * w.nu;
    let ok = q2 == 0.0 && ub.ub_2() <= 1e-12 * snr_scale;
    check(
        ok,
        format!("L = K = 100: Q_2 = {q2:e}, UB_2 = {:.3e}", ub.ub_2()),
        format!("Q_2 = {q2:e}, UB_2 = {:e} (scale {snr_scale:e})", ub.ub_2()),
    )
}

/// Median over seeds of IOCC UB_2 and UB_opt per K.
fn bound_medians(spec: &ExperimentSpec, ks: &[usize]) -> Result<Vec<(usize, f64, f64, bool)>, String> {
    use rayon::prelude::*;
    let base = spec.scenario.scenario(1).map_err(|e| e.to_string())?;
    let samples: Vec<Vec<DemandSample>> = (0..spec.run.seeds)
        .map(|seed| draw_samples(spec, &base, seed).unwrap())
        .collect();
    ks.par_iter()
        .map(|&k| {
            let s = spec.scenario.scenario(k).unwrap();
            let mut ub2 = Vec::new();
            let mut ubo = Vec::new();
            let mut pointwise = true;
            for (seed, smp) in samples.iter().enumerate() {
                let w = IoccWeights::for_scenario(&s, smp, ErrorMode::Squared).unwrap();
                let params = ClusterParams::new(k, ErrorMode::Squared, CellSeeds::new(spec.run.base_seed, seed, k).clustering);
                let layout = place_raus(&s, smp, Criterion::Iocc, &w, &params).unwrap();
                let plan = plan_powers(&layout, smp, &s, spec.run.power_mode).unwrap();
                let placement = Placement::new(layout.locations.clone(), plan.cluster);
                let ub = upper_bounds(smp, &placement, &layout, &s).unwrap();
                pointwise &= ub.ub_opt <= ub.ub_2();
                ub2.push(ub.ub_2());
                ubo.push(ub.ub_opt);
            }
            Ok((k, median(&ub2), median(&ubo), pointwise))
        })
        .collect()
}

/// 3. Median UB_2 and UB_opt non-increasing in K = 1..10 on Examples 1 and 2.
fn criterion3() -> Outcome {
    let ks: Vec<usize> = (1..=10).collect();
    let mut notes = Vec::new();
    for spec in [make_example1(), make_example2()] {
        let rows = bound_medians(&spec, &ks)?;
        for pair in rows.windows(2) {
            let (k0, a2, ao, _) = pair[0];
            let (k1, b2, bo, _) = pair[1];
            if b2 > a2 || bo > ao {
                return Err(format!(
                    "{}: K={k0}->{k1} UB_2 {a2:.4e}->{b2:.4e}, UB_opt {ao:.4e}->{bo:.4e}",
                    spec.name
                ));
            }
        }
        if let Some((k, ..)) = rows.iter().find(|r| !r.3) {
            return Err(format!("{}: UB_opt > UB_2 at K={k}", spec.name));
        }
        let (first, last) = (rows[0], rows[rows.len() - 1]);
        notes.push(format!("{} UB_2 {:.3e}->{:.3e}", spec.name, first.1, last.1));
    }
    Ok(notes.join("; "))
}

/// 4. Mean J over 20 seeds: IOCC ≤ SDC (+3 MC standard errors) for K = 2..8.
fn criterion4() -> Outcome {
    let mut notes = Vec::new();
    let mut failures = Vec::new();
    for mut spec in [make_example1(), make_example2()] {
        spec.run.k_sweep = (2..=8).collect();
        spec.run.seeds = 20;
        spec.mc.num_draws = 5000;
        let r = run_sweep(&spec).map_err(|e| e.to_string())?;
        if !r.failures.is_empty() {
            return Err(format!("{}: {} cells failed", spec.name, r.failures.len()));
        }
        let mut worst = f64::NEG_INFINITY;
        for k in 2..=8 {
            let stats = |c: Criterion| {
                let cells: Vec<_> = r.cells.iter().filter(|x| x.criterion == c && x.k == k).collect();
                let n = cells.len() as f64;
                let mean = cells.iter().map(|x| x.report.j2).sum::<f64>() / n;
                let se = cells.iter().map(|x| x.report.j2_std_error.powi(2)).sum::<f64>().sqrt() / n;
                (mean, se)
            };
            let (ji, si) = stats(Criterion::Iocc);
            let (js, ss) = stats(Criterion::Sdc);
            let slack = 3.0 * (si * si + ss * ss).sqrt();
            worst = worst.max(ji - js - slack);
            if ji > js + slack {
                failures.push(format!(
                    "{} K={k}: J_IOCC={ji:.6e} > J_SDC={js:.6e} + 3se={slack:.2e}",
                    spec.name
                ));
            }
        }
        notes.push(format!("{} max(J_IOCC-J_SDC-3se) = {worst:.2e}", spec.name));
    }
    if failures.is_empty() {
        Ok(notes.join("; "))
    } else {
        Err(failures.join("; "))
    }
}

/// 5. Example 3: IOCC effective-capacity gain ≥ 0.05 and SDC capacity ≥ IOCC − 0.1.
fn criterion5() -> Outcome {
    let mut failures = Vec::new();
    let mut notes = Vec::new();
    for alpha in [3.0, 4.0] {
        let mut spec = make_example3(alpha);
        spec.run.k_sweep = vec![4, 6, 8];
        spec.run.seeds = 20;
        spec.mc.num_draws = 2000;
        let r = run_sweep(&spec).map_err(|e| e.to_string())?;
        for k in [4, 6, 8] {
            let mut gain = Vec::new();
            let mut cap_gap = Vec::new();
            for seed in 0..20 {
                let (Some(i), Some(s)) = (r.cell(Criterion::Iocc, k, seed), r.cell(Criterion::Sdc, k, seed)) else {
                    return Err(format!("alpha={alpha} K={k} seed={seed}: missing cell"));
                };
                gain.push(i.report.cell_avg_effective - s.report.cell_avg_effective);
                cap_gap.push(s.report.cell_avg_capacity - i.report.cell_avg_capacity);
            }
            let (g, c) = (median(&gain), median(&cap_gap));
            notes.push(format!("a{alpha}K{k} gain={g:.3}"));
            if g < 0.05 || c < -0.1 {
                failures.push(format!("alpha={alpha} K={k}: gain {g:.4} bps/Hz, SDC-IOCC capacity {c:.4}"));
            }
        }
    }
    if failures.is_empty() {
        Ok(notes.join(" "))
    } else {
        Err(failures.join("; "))
    }
}

/// 6. IOCC with ω₂ = 0 reproduces SDC locations bit for bit.
fn criterion6() -> Outcome {
    let spec = make_example2();
    for i in 0..10u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(600 + i);
        let k = rng.random_range(2..=8);
        let mode = if i % 2 == 0 { ErrorMode::Squared } else { ErrorMode::Absolute };
        let s = spec.scenario.scenario(k).unwrap();
        let samples = draw_samples(&spec, &s, i as usize).unwrap();
        let w = IoccWeights::for_scenario(&s, &samples, mode).unwrap();
        let params = ClusterParams::new(k, mode, rng.random());
        let sdc = place_raus(&s, &samples, Criterion::Sdc, &w, &params).unwrap();
        let iocc0 = place_raus(&s, &samples, Criterion::Iocc, &w.without_snr(), &params).unwrap();
        let same = sdc
            .locations
            .iter()
            .zip(&iocc0.locations)
            .all(|(a, b)| a.0.map(f64::to_bits) == b.0.map(f64::to_bits));
        if !same || sdc.codebook.assignment != iocc0.codebook.assignment {
            return Err(format!("instance {i}: locations differ"));
        }
    }
    Ok("10 instances bit-identical".into())
}

/// 7. Sampled Lipschitz certificates for θ̄_a and φ.
fn criterion7() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(707);
    let mut checked = 0usize;
    for inst in 0..5 {
        let q = 1 + inst % 2;
        let k = rng.random_range(1..=6);
        let s = random_scenario(&mut rng, q, k);
        let locs: Vec<Point> = (0..k).map(|_| s.area.sample_uniform(&mut rng)).collect();
        let mut powers: Vec<f64> = (0..k).map(|_| rng.random_range(0.01..1.0)).collect();
        let total: f64 = powers.iter().sum();
        powers.iter_mut().for_each(|p| *p *= s.sum_power / total);
        let placement = Placement::new(locs, powers);
        let nu_glob = compute_nu_glob(&s, &placement.powers);
        let draw_valid = |rng: &mut ChaCha8Rng| loop {
            let x = s.area.sample_uniform(rng);
            if placement.nearest_distance(&x) >= s.d_min {
                return x;
            }
        };
        for _ in 0..10_000 {
            let (a, b) = (draw_valid(&mut rng), draw_valid(&mut rng));
            let lhs = (s.avg_snr(&a, &placement) - s.avg_snr(&b, &placement)).abs();
            if lhs > nu_glob * a.distance(&b) {
                return Err(format!("instance {inst}: |dθ| = {lhs:e} > ν_glob·d at {a:?}, {b:?}"));
            }
            checked += 1;
        }
        let lip = path_loss_lipschitz(s.alpha, s.d_min);
        for _ in 0..10_000 {
            let d1 = s.d_min + rng.random_range(0.0..10.0f64).powi(3);
            let d2 = s.d_min + rng.random_range(0.0..10.0f64).powi(3);
            let lhs = (path_loss(d1, s.alpha, s.d_min) - path_loss(d2, s.alpha, s.d_min)).abs();
            if lhs > lip * (d1 - d2).abs() {
                return Err(format!("path loss: d1={d1}, d2={d2}"));
            }
            checked += 1;
        }
    }
    Ok(format!("{checked} pairs, zero violations"))
}

/// Optimal distortion over every assignment of `rows` to `k` labels.
fn exhaustive_distortion(rows: &[Vec<f64>], k: usize, mode: ErrorMode) -> f64 {
    let l = rows.len();
    let dim = rows[0].len();
    let mut labels = vec![0usize; l];
    let mut best = f64::INFINITY;
    loop {
        let mut total = 0.0;
        for c in 0..k {
            let members: Vec<&Vec<f64>> = rows.iter().zip(&labels).filter(|(_, &lab)| lab == c).map(|(r, _)| r).collect();
            if members.is_empty() {
                continue;
            }
            let proto: Vec<f64> = (0..dim)
                .map(|d| {
                    let mut v: Vec<f64> = members.iter().map(|r| r[d]).collect();
                    v.sort_by(f64::total_cmp);
                    match mode {
                        ErrorMode::Squared => v.iter().sum::<f64>() / v.len() as f64,
                        ErrorMode::Absolute => {
                            let n = v.len();
                            if n % 2 == 1 {
                                v[n / 2]
                            } else {
                                0.5 * (v[n / 2 - 1] + v[n / 2])
                            }
                        }
                    }
                })
                .collect();
            for r in members {
                total += r
                    .iter()
                    .zip(&proto)
                    .map(|(a, b)| match mode {
                        ErrorMode::Squared => (a - b) * (a - b),
                        ErrorMode::Absolute => (a - b).abs(),
                    })
                    .sum::<f64>();
            }
        }
        best = best.min(total / l as f64);
        let mut i = 0;
        while i < l {
            labels[i] += 1;
            if labels[i] < k {
                break;
            }
            labels[i] = 0;
            i += 1;
        }
        if i == l {
            return best;
        }
    }
}

/// 8. Restarted Lloyd reaches the exhaustive optimum on small instances.
fn criterion8() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(808);
    for inst in 0..100 {
        let l = rng.random_range(3..=8);
        let k = rng.random_range(1..=3usize).min(l);
        let dim = rng.random_range(1..=3);
        let mode = if inst % 2 == 0 { ErrorMode::Squared } else { ErrorMode::Absolute };
        let rows: Vec<Vec<f64>> = (0..l).map(|_| (0..dim).map(|_| rng.random_range(-10.0..10.0)).collect()).collect();
        let params = ClusterParams {
            restarts: 20,
            ..ClusterParams::new(k, mode, rng.random())
        };
        let got = lloyd(&rows, &params).unwrap().distortion;
        let best = exhaustive_distortion(&rows, k, mode);
        if (got - best).abs() > 1e-9 * best.max(1e-300) {
            return Err(format!("instance {inst} ({mode:?}, L={l}, K={k}): Lloyd {got:.12e} vs optimum {best:.12e}"));
        }
    }
    Ok("100 instances match the exhaustive optimum".into())
}

/// Gaussian elimination with partial pivoting.
fn gauss_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs())).unwrap();
        a.swap(col, piv);
        b.swap(col, piv);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            for c in col..n {
                a[row][c] -= f * a[col][c];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let s: f64 = (i + 1..n).map(|j| a[i][j] * x[j]).sum();
        x[i] = (b[i] - s) / a[i][i];
    }
    x
}

fn l2_objective(b: &[[f64; 2]], t: &[f64], p: [f64; 2]) -> f64 {
    b.iter().zip(t).map(|(r, t)| (r[0] * p[0] + r[1] * p[1] - t).powi(2)).sum()
}

/// 9. Exact solve vs elimination; constrained l2 vs grid search; feasibility.
fn criterion9() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(909);
    let mut worst = 0.0f64;
    for inst in 0..100 {
        let k = rng.random_range(2..=8);
        let mut s = random_scenario(&mut rng, 2, k);
        s.area = Area::Rectangle {
            width: 2000.0,
            height: 2000.0,
        };
        let locs: Vec<Point> = (0..k).map(|i| Point::new(200.0 * i as f64 + rng.random_range(0.0..50.0), rng.random_range(0.0..2000.0))).collect();
        let targets: Vec<f64> = (0..k).map(|_| rng.random_range(1.0..100.0)).collect();
        let system = build_system(&locs, &targets, &s);
        if !system.is_diagonally_dominant() {
            return Err(format!("instance {inst}: generated system not dominant"));
        }
        let powers = match solve_exact(&system, s.sum_power).unwrap() {
            ExactSolve::Feasible(sol) => sol.powers,
            ExactSolve::Infeasible { powers } => powers,
        };
        let a: Vec<Vec<f64>> = (0..k).map(|i| (0..k).map(|j| system.a_matrix[(i, j)]).collect()).collect();
        let y_oracle = gauss_solve(a.clone(), targets.clone());
        let y: Vec<f64> = powers.iter().zip(&system.sbar).map(|(p, s)| p * s).collect();
        let tmax = targets.iter().cloned().fold(0.0, f64::max);
        for i in 0..k {
            let r: f64 = (0..k).map(|j| a[i][j] * y[j]).sum::<f64>() - targets[i];
            worst = worst.max((r / tmax).abs());
            if (r / tmax).abs() >= 1e-10 || (y[i] - y_oracle[i]).abs() > 1e-10 * y_oracle[i].abs().max(1e-300) {
                return Err(format!("instance {inst}: residual {r:e}, y {} vs oracle {}", y[i], y_oracle[i]));
            }
        }
    }

    let mut grid_note = 0.0f64;
    for inst in 0..20 {
        let p_sum = 1.0;
        let mut s = random_scenario(&mut rng, 1, 2);
        s.noise_power = 1.0;
        s.d_min = 1.0;
        s.alpha = 2.0;
        s.shadow_sigma_db = 0.0;
        s.antennas_per_rau = 1;
        let locs = vec![Point::on_line(0.0), Point::on_line(rng.random_range(1.2..3.0))];
        let p_true = [rng.random_range(0.0..1.2), rng.random_range(0.0..1.2)];
        let probe = build_system(&locs, &[0.0, 0.0], &s).power_to_snr();
        let targets: Vec<f64> = (0..2)
            .map(|i| probe[(i, 0)] * p_true[0] + probe[(i, 1)] * p_true[1] + rng.random_range(-0.3..0.3))
            .collect();
        let system = build_system(&locs, &targets, &s);
        let sol = power::solve_constrained(&system, p_sum, ErrorMode::Squared);
        let b = system.power_to_snr();
        let rows = [[b[(0, 0)], b[(0, 1)]], [b[(1, 0)], b[(1, 1)]]];
        let floor = POWER_FLOOR * p_sum;
        let n = 200;
        let h = p_sum / n as f64;
        let mut best = (f64::INFINITY, [0.0, 0.0]);
        for i in 0..=n {
            for j in 0..=(n - i) {
                let p = [(i as f64 * h).max(floor), (j as f64 * h).max(floor)];
                if p[0] + p[1] > p_sum {
                    continue;
                }
                let f = l2_objective(&rows, &targets, p);
                if f < best.0 {
                    best = (f, p);
                }
            }
        }
        let f_sol = l2_objective(&rows, &targets, [sol.powers[0], sol.powers[1]]);
        let dist = ((sol.powers[0] - best.1[0]).powi(2) + (sol.powers[1] - best.1[1]).powi(2)).sqrt();
        // Some grid point lies within one cell diagonal of the solver point, so the grid
        // minimum exceeds f_sol by at most a first-order step plus the curvature term.
        let resid: Vec<f64> = (0..2)
            .map(|i| rows[i][0] * sol.powers[0] + rows[i][1] * sol.powers[1] - targets[i])
            .collect();
        let grad = [
            2.0 * (rows[0][0] * resid[0] + rows[1][0] * resid[1]),
            2.0 * (rows[0][1] * resid[0] + rows[1][1] * resid[1]),
        ];
        let frob2: f64 = rows.iter().map(|r| r[0] * r[0] + r[1] * r[1]).sum();
        let diag = 2.0_f64.sqrt() * h;
        let cell_slack = grad[0].hypot(grad[1]) * diag + frob2 * diag * diag;
        grid_note = grid_note.max(dist / h);
        if f_sol > best.0 * (1.0 + 1e-12) + 1e-15 || f_sol < best.0 - cell_slack - 1e-12 {
            return Err(format!("grid instance {inst}: solver {f_sol:e} at {:?} vs grid {:e} at {:?}", sol.powers, best.0, best.1));
        }
        if sol.powers.iter().any(|p| *p < floor) || sol.powers.iter().sum::<f64>() > p_sum * (1.0 + 1e-9) {
            return Err(format!("grid instance {inst}: infeasible output {:?}", sol.powers));
        }
    }
    Ok(format!(
        "max exact residual {worst:.1e}; l2 within {grid_note:.2} grid steps of the grid argmin"
    ))
}

/// 10. Two CLI runs produce byte-identical CSVs.
fn criterion10() -> Outcome {
    let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
    for d in &dirs {
        let status = Command::new(env!("CARGO_BIN_EXE_iocc"))
            .args(["example1", "--k-sweep", "1..6", "--seeds", "3", "--out"])
            .arg(d.path())
            .env("RUST_LOG", "warn")
            .status()
            .map_err(|e| e.to_string())?;
        if !status.success() {
            return Err(format!("iocc exited with {status}"));
        }
    }
    let list = |p: &Path| {
        let mut v: Vec<_> = std::fs::read_dir(p).unwrap().map(|e| e.unwrap().file_name()).collect();
        v.sort();
        v
    };
    let (a, b) = (list(dirs[0].path()), list(dirs[1].path()));
    if a != b {
        return Err("different file sets".into());
    }
    for name in &a {
        let x = std::fs::read(dirs[0].path().join(name)).unwrap();
        let y = std::fs::read(dirs[1].path().join(name)).unwrap();
        if x != y {
            return Err(format!("{} differs", name.to_string_lossy()));
        }
    }
    Ok(format!("{} files byte-identical", a.len()))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("bound-chain soundness", criterion1),
        ("K = L limit", criterion2),
        ("UB curves non-increasing in K", criterion3),
        ("J_IOCC <= J_SDC", criterion4),
        ("Example 3 effective-capacity gain", criterion5),
        ("SDC reduction at omega2 = 0", criterion6),
        ("Lipschitz certificates", criterion7),
        ("clustering optimality oracle", criterion8),
        ("power solver oracles", criterion9),
        ("determinism", criterion10),
    ];
    let filter: Option<usize> = std::env::args().skip(1).find_map(|a| a.parse().ok());
    let mut failed = Vec::new();
    for (i, (name, f)) in criteria.iter().enumerate() {
        let n = i + 1;
        if filter.is_some_and(|only| only != n) {
            continue;
        }
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panic".into());
            Err(format!("panicked: {msg}"))
        });
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("criterion {n:>2} PASS ({secs:.1}s) {name}: {detail}"),
            Err(detail) => {
                println!("criterion {n:>2} FAIL ({secs:.1}s) {name}: {detail}");
                failed.push(n);
            }
        }
    }
    if !failed.is_empty() {
        println!("acceptance: failed criteria {failed:?}");
        std::process::exit(1);
    }
    println!("acceptance: all criteria passed");
}
