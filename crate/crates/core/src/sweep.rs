//! Sweep orchestration: sample → place → allocate power → evaluate, for every
//! (criterion, K, seed) cell, plus CSV output.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bounds::{self, fmt_float, EvalReport};
use crate::cluster::{ClusterParams, ErrorMode};
use crate::error::{Error, Result};
use crate::experiment::{ExperimentSpec, PerLocationOutput, PowerMode};
use crate::fading::McConfig;
use crate::geometry::{DemandSample, Placement, Point, Scenario};
use crate::placement::{place_raus, quantization_error, Criterion, IoccWeights, RauLayout};
use crate::power::{self, build_system, solve_exact, ExactSolve};

/// SplitMix64 finaliser.
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives a child seed from a parent and a tag.
pub fn mix_seed(parent: u64, tag: u64) -> u64 {
    splitmix64(parent ^ splitmix64(tag))
}

const TAG_SAMPLING: u64 = 1;
const TAG_CLUSTER: u64 = 2;
const TAG_MC: u64 = 3;
const TAG_REDRAW: u64 = 4;

/// Seeds of one sweep cell. Sampling and MC seeds depend on the seed index
/// only, so both criteria and every K see the same users and fading.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CellSeeds {
    pub sampling: u64,
    pub clustering: u64,
    pub mc: u64,
    pub redraw: u64,
}

impl CellSeeds {
    pub fn new(base: u64, seed_index: usize, k: usize) -> Self {
        let s = mix_seed(base, seed_index as u64);
        Self {
            sampling: mix_seed(s, TAG_SAMPLING),
            clustering: mix_seed(mix_seed(s, TAG_CLUSTER), k as u64),
            mc: mix_seed(s, TAG_MC),
            redraw: mix_seed(s, TAG_REDRAW),
        }
    }
}

/// Evaluation locations of one placement after enforcing the minimum
/// RAU distance.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalSamples {
    pub samples: Vec<DemandSample>,
    /// MC substream per sample; the index in the unfiltered list.
    pub streams: Vec<u64>,
    pub dropped: usize,
    pub redrawn: usize,
}

/// Evenly strided subset of at most `max` indices (all when `max == 0`).
pub fn strided_indices(n: usize, max: usize) -> Vec<usize> {
    if max == 0 || max >= n {
        return (0..n).collect();
    }
    (0..max).map(|i| i * n / max).collect()
}

/// Keeps samples at least `d_min` from every RAU. Offending samples are
/// dropped, or replaced by fresh uniform points when `redraw` is set.
pub fn filter_min_distance(
    samples: &[DemandSample],
    indices: &[usize],
    placement: &Placement,
    scenario: &Scenario,
    redraw: bool,
    redraw_seed: u64,
) -> Result<EvalSamples> {
    let mut out = EvalSamples {
        samples: Vec::with_capacity(indices.len()),
        streams: Vec::with_capacity(indices.len()),
        dropped: 0,
        redrawn: 0,
    };
    let ok = |x: &Point| placement.nearest_distance(x) >= scenario.d_min;
    for &i in indices {
        let s = samples[i];
        if ok(&s.x) {
            out.samples.push(s);
            out.streams.push(i as u64);
        } else if redraw {
            let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(redraw_seed, i as u64));
            let x = loop {
                let x = scenario.area.sample_uniform(&mut rng);
                if ok(&x) {
                    break x;
                }
            };
            out.samples.push(scenario.demand_sample(x)?);
            out.streams.push(i as u64);
            out.redrawn += 1;
        } else {
            out.dropped += 1;
        }
    }
    if out.dropped + out.redrawn > 0 {
        log::debug!(
            "minimum-distance filter: {} dropped, {} redrawn",
            out.dropped,
            out.redrawn
        );
    }
    Ok(out)
}

/// Powers of one layout.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerPlan {
    /// Powers fitted to the codebook's site targets.
    pub cluster: Vec<f64>,
    /// Powers fitted to every sample.
    pub global: Vec<f64>,
    pub feasible_exact: bool,
}

/// Power allocation for `layout` according to `mode`.
pub fn plan_powers(
    layout: &RauLayout,
    samples: &[DemandSample],
    scenario: &Scenario,
    mode: PowerMode,
) -> Result<PowerPlan> {
    let system = build_system(&layout.locations, &layout.snr_targets, scenario);
    let exact = solve_exact(&system, scenario.sum_power)?;
    let feasible_exact = exact.is_feasible();
    let k = layout.len();
    match mode {
        PowerMode::EqualSplit => {
            let p = vec![scenario.sum_power / k as f64; k];
            Ok(PowerPlan {
                cluster: p.clone(),
                global: p,
                feasible_exact,
            })
        }
        PowerMode::Optimized => {
            let err_mode = layout.weights.mode;
            let cluster = match exact {
                ExactSolve::Feasible(sol) => sol.powers,
                ExactSolve::Infeasible { .. } => {
                    power::solve_constrained(&system, scenario.sum_power, err_mode).powers
                }
            };
            let margin = layout.weights.snr_margin(scenario.delta);
            let global =
                power::optimize_global_power(&layout.locations, samples, scenario, margin, err_mode).powers;
            Ok(PowerPlan {
                cluster,
                global,
                feasible_exact,
            })
        }
    }
}

/// Everything produced for one (criterion, K, seed).
#[derive(Debug, Clone, PartialEq)]
pub struct CellResult {
    pub criterion: Criterion,
    pub k: usize,
    pub seed: usize,
    pub layout: RauLayout,
    /// The evaluated placement (global powers).
    pub placement: Placement,
    pub cluster_powers: Vec<f64>,
    pub report: EvalReport,
    pub dropped: usize,
    pub redrawn: usize,
}

/// A cell that could not be computed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CellFailure {
    pub criterion: Criterion,
    pub k: usize,
    pub seed: usize,
    pub message: String,
}

/// Median, mean and normalised median of one metric over seeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub criterion: Criterion,
    pub k: usize,
    pub metric: String,
    pub median: f64,
    pub mean: f64,
    /// Median divided by the largest SDC median of the same metric.
    pub normalized: f64,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    /// Sorted by (criterion, K, seed).
    pub cells: Vec<CellResult>,
    pub failures: Vec<CellFailure>,
    pub curves: Vec<CurvePoint>,
}

impl SweepResult {
    pub fn cell(&self, criterion: Criterion, k: usize, seed: usize) -> Option<&CellResult> {
        self.cells
            .iter()
            .find(|c| c.criterion == criterion && c.k == k && c.seed == seed)
    }

    pub fn curve(&self, criterion: Criterion, k: usize, metric: &str) -> Option<&CurvePoint> {
        self.curves
            .iter()
            .find(|c| c.criterion == criterion && c.k == k && c.metric == metric)
    }
}

/// Metrics aggregated into curves, in output order.
pub const CURVE_METRICS: [&str; 11] = [
    "j_e1",
    "j2",
    "j_snr",
    "q",
    "ub_e1",
    "ub_2",
    "ub_opt",
    "cell_avg_capacity",
    "cell_avg_effective",
    "cell_avg_wasted",
    "feasible_exact",
];

fn metric(report: &EvalReport, name: &str) -> f64 {
    match name {
        "j_e1" => report.j_e1,
        "j2" => report.j2,
        "j_snr" => report.j_snr,
        "q" => report.q,
        "ub_e1" => report.ub_e1,
        "ub_2" => report.ub_2,
        "ub_opt" => report.ub_opt,
        "cell_avg_capacity" => report.cell_avg_capacity,
        "cell_avg_effective" => report.cell_avg_effective,
        "cell_avg_wasted" => report.cell_avg_wasted,
        "feasible_exact" => f64::from(u8::from(report.feasible_exact)),
        _ => unreachable!("unknown metric {name}"),
    }
}

/// Median of a nonempty slice (average of the middle pair for even lengths).
pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    ErrorMode::Absolute.prototype(&mut v)
}

/// Samples of one seed index.
pub fn draw_samples(spec: &ExperimentSpec, scenario: &Scenario, seed: usize) -> Result<Vec<DemandSample>> {
    let seeds = CellSeeds::new(spec.run.base_seed, seed, 0);
    let (points, _) = spec.sampling.draw(&scenario.area, seeds.sampling)?;
    points.into_iter().map(|x| scenario.demand_sample(x)).collect()
}

/// Runs one cell.
pub fn run_cell(
    spec: &ExperimentSpec,
    scenario: &Scenario,
    samples: &[DemandSample],
    criterion: Criterion,
    seed: usize,
) -> Result<CellResult> {
    let k = scenario.num_raus;
    let seeds = CellSeeds::new(spec.run.base_seed, seed, k);
    let weights = IoccWeights::for_scenario(scenario, samples, spec.run.error_mode)?;
    let params = ClusterParams {
        max_iters: spec.clustering.max_iters,
        restarts: spec.clustering.restarts,
        ..ClusterParams::new(k, spec.run.error_mode, seeds.clustering)
    };
    let layout = place_raus(scenario, samples, criterion, &weights, &params)?;
    let plan = plan_powers(&layout, samples, scenario, spec.run.power_mode)?;
    let cluster_placement = Placement::new(layout.locations.clone(), plan.cluster.clone());
    let placement = Placement::new(layout.locations.clone(), plan.global.clone());

    let ub = bounds::upper_bounds(samples, &cluster_placement, &layout, scenario)?;
    let augmented = crate::placement::build_augmented(samples, &layout.weights, scenario.delta);
    let q = quantization_error(&augmented, &layout.codebook)?;
    let j_snr = bounds::snr_surrogate_j(samples, &placement, scenario, &layout.weights);

    let idx = strided_indices(samples.len(), spec.mc.eval_locations);
    let eval = filter_min_distance(
        samples,
        &idx,
        &placement,
        scenario,
        spec.sampling.redraws(),
        seeds.redraw,
    )?;
    if eval.samples.is_empty() {
        return Err(Error::EmptySamples);
    }
    let mc = McConfig {
        seed: seeds.mc,
        num_draws: spec.mc.num_draws,
    };
    let mut report = bounds::effective_capacity_report(&eval.samples, &placement, scenario, &mc, Some(&eval.streams));
    report.j_snr = j_snr;
    report.q = q;
    report.ub_e1 = ub.ub_e1();
    report.ub_2 = ub.ub_2();
    report.ub_opt = ub.ub_opt;
    report.feasible_exact = plan.feasible_exact;
    Ok(CellResult {
        criterion,
        k,
        seed,
        layout,
        placement,
        cluster_powers: plan.cluster,
        report,
        dropped: eval.dropped,
        redrawn: eval.redrawn,
    })
}

/// Runs every (criterion, K, seed) cell of `spec`. Cells run in parallel;
/// results are sorted by key so the output does not depend on scheduling.
pub fn run_sweep(spec: &ExperimentSpec) -> Result<SweepResult> {
    spec.validate()?;
    let base = spec.scenario.scenario(1)?;
    let samples: Vec<Vec<DemandSample>> = (0..spec.run.seeds)
        .into_par_iter()
        .map(|seed| draw_samples(spec, &base, seed))
        .collect::<Result<_>>()?;

    let mut keys = Vec::new();
    for &criterion in &spec.run.criteria {
        for &k in &spec.run.k_sweep {
            for seed in 0..spec.run.seeds {
                keys.push((criterion, k, seed));
            }
        }
    }
    keys.sort_unstable();
    keys.dedup();

    let outcomes: Vec<std::result::Result<CellResult, CellFailure>> = keys
        .par_iter()
        .map(|&(criterion, k, seed)| {
            let fail = |e: Error| CellFailure {
                criterion,
                k,
                seed,
                message: e.to_string(),
            };
            let scenario = spec.scenario.scenario(k).map_err(fail)?;
            run_cell(spec, &scenario, &samples[seed], criterion, seed).map_err(fail)
        })
        .collect();

    let mut cells = Vec::new();
    let mut failures = Vec::new();
    for o in outcomes {
        match o {
            Ok(c) => cells.push(c),
            Err(f) => {
                log::warn!("cell {} K={} seed={} failed: {}", f.criterion, f.k, f.seed, f.message);
                failures.push(f);
            }
        }
    }
    let curves = aggregate(&cells);
    Ok(SweepResult {
        cells,
        failures,
        curves,
    })
}

/// Medians and means over seeds, normalised by the SDC maximum.
pub fn aggregate(cells: &[CellResult]) -> Vec<CurvePoint> {
    let mut groups: BTreeMap<(Criterion, usize), Vec<&EvalReport>> = BTreeMap::new();
    for c in cells {
        groups.entry((c.criterion, c.k)).or_default().push(&c.report);
    }
    let mut points = Vec::new();
    for ((criterion, k), reports) in &groups {
        for name in CURVE_METRICS {
            let values: Vec<f64> = reports.iter().map(|r| metric(r, name)).collect();
            points.push(CurvePoint {
                criterion: *criterion,
                k: *k,
                metric: name.to_string(),
                median: median(&values),
                mean: values.iter().sum::<f64>() / values.len() as f64,
                normalized: f64::NAN,
                count: values.len(),
            });
        }
    }
    for name in CURVE_METRICS {
        let max_of = |crit: Criterion| {
            points
                .iter()
                .filter(|p| p.criterion == crit && p.metric == name)
                .map(|p| p.median)
                .fold(f64::NEG_INFINITY, f64::max)
        };
        let sdc_max = max_of(Criterion::Sdc);
        let iocc_max = max_of(Criterion::Iocc);
        for p in points.iter_mut().filter(|p| p.metric == name) {
            let scale = if sdc_max.is_finite() {
                sdc_max
            } else if p.criterion == Criterion::Iocc {
                iocc_max
            } else {
                f64::NAN
            };
            p.normalized = if scale != 0.0 { p.median / scale } else { f64::NAN };
        }
    }
    points
}

/// Header of `sweep_summary.csv`.
pub const SUMMARY_HEADER: [&str; 16] = [
    "criterion",
    "K",
    "seed",
    "j_e1",
    "j2",
    "q2",
    "ub_e1",
    "ub_2",
    "ub_opt",
    "cell_avg_capacity",
    "cell_avg_effective",
    "cell_avg_wasted",
    "feasible_exact",
    "j_snr",
    "j2_std_error",
    "eval_locations",
];

fn writer(dir: &Path, name: &str) -> Result<csv::Writer<BufWriter<File>>> {
    Ok(csv::Writer::from_writer(BufWriter::new(File::create(dir.join(name))?)))
}

/// Placement CSV of one cell: one row per RAU.
pub fn write_placement(cell: &CellResult, dir: &Path) -> Result<()> {
    let mut w = writer(dir, &format!("placement_{}_{}_{}.csv", cell.criterion, cell.k, cell.seed))?;
    w.write_record(["rau", "x", "y", "power", "cluster_power", "snr_target"])?;
    for (i, c) in cell.placement.locations.iter().enumerate() {
        w.write_record([
            i.to_string(),
            fmt_float(c.x()),
            fmt_float(c.y()),
            fmt_float(cell.placement.powers[i]),
            fmt_float(cell.cluster_powers[i]),
            fmt_float(cell.layout.snr_targets[i]),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Writes every output of `result` under `dir` (created if missing).
pub fn write_outputs(result: &SweepResult, spec: &ExperimentSpec, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let mut w = writer(dir, "sweep_summary.csv")?;
    w.write_record(SUMMARY_HEADER)?;
    for c in &result.cells {
        let r = &c.report;
        let mut row = vec![c.criterion.to_string(), c.k.to_string(), c.seed.to_string()];
        row.extend(
            [
                r.j_e1,
                r.j2,
                r.q,
                r.ub_e1,
                r.ub_2,
                r.ub_opt,
                r.cell_avg_capacity,
                r.cell_avg_effective,
                r.cell_avg_wasted,
            ]
            .map(fmt_float),
        );
        row.push(r.feasible_exact.to_string());
        row.push(fmt_float(r.j_snr));
        row.push(fmt_float(r.j2_std_error));
        row.push(r.per_location.len().to_string());
        w.write_record(&row)?;
    }
    w.flush()?;

    let mut w = writer(dir, "sweep_curves.csv")?;
    w.write_record(["criterion", "K", "metric", "median", "mean", "normalized", "count"])?;
    for p in &result.curves {
        w.write_record([
            p.criterion.to_string(),
            p.k.to_string(),
            p.metric.clone(),
            fmt_float(p.median),
            fmt_float(p.mean),
            fmt_float(p.normalized),
            p.count.to_string(),
        ])?;
    }
    w.flush()?;

    if !result.failures.is_empty() {
        let mut w = writer(dir, "failures.csv")?;
        w.write_record(["criterion", "K", "seed", "message"])?;
        for f in &result.failures {
            w.write_record([f.criterion.to_string(), f.k.to_string(), f.seed.to_string(), f.message.clone()])?;
        }
        w.flush()?;
    }

    for c in &result.cells {
        write_placement(c, dir)?;
        let keep = match spec.run.per_location {
            PerLocationOutput::None => false,
            PerLocationOutput::FirstSeed => c.seed == 0,
            PerLocationOutput::All => true,
        };
        if keep {
            let name = format!("per_location_{}_{}_{}.csv", c.criterion, c.k, c.seed);
            c.report
                .write_per_location(BufWriter::new(File::create(dir.join(name))?))?;
        }
    }
    Ok(())
}
