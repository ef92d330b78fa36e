//! Lloyd iteration for codebook design under squared-Euclidean or L1 distortion.
//!
//! Rows are plain coordinate vectors; callers do their own weighting. The
//! squared mode is ordinary k-means (mean prototypes), the absolute mode is
//! k-medians (component-wise median prototypes). Both report the mean
//! per-sample distortion.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Which error norm the codebook minimises.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ErrorMode {
    /// Squared Euclidean error, mean prototypes.
    #[default]
    Squared,
    /// L1 error, component-wise median prototypes.
    Absolute,
}

impl ErrorMode {
    /// Per-sample distortion between `a` and `b`.
    #[inline]
    pub fn distance(self, a: &[f64], b: &[f64]) -> f64 {
        let mut acc = 0.0;
        match self {
            ErrorMode::Squared => {
                for (x, y) in a.iter().zip(b) {
                    let d = x - y;
                    acc += d * d;
                }
            }
            ErrorMode::Absolute => {
                for (x, y) in a.iter().zip(b) {
                    acc += (x - y).abs();
                }
            }
        }
        acc
    }

    /// The distortion-minimising prototype of a set of scalars.
    pub fn prototype(self, values: &mut [f64]) -> f64 {
        debug_assert!(!values.is_empty());
        match self {
            ErrorMode::Squared => values.iter().sum::<f64>() / values.len() as f64,
            ErrorMode::Absolute => {
                values.sort_unstable_by(f64::total_cmp);
                let n = values.len();
                if n % 2 == 1 {
                    values[n / 2]
                } else {
                    0.5 * (values[n / 2 - 1] + values[n / 2])
                }
            }
        }
    }
}

/// Lloyd parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClusterParams {
    pub k: usize,
    pub mode: ErrorMode,
    pub seed: u64,
    pub max_iters: usize,
    /// Relative distortion improvement below which iteration stops.
    pub tol: f64,
    pub restarts: usize,
}

impl ClusterParams {
    pub fn new(k: usize, mode: ErrorMode, seed: u64) -> Self {
        Self {
            k,
            mode,
            seed,
            ..Self::default()
        }
    }
}

impl Default for ClusterParams {
    fn default() -> Self {
        Self {
            k: 1,
            mode: ErrorMode::Squared,
            seed: 0,
            max_iters: 300,
            tol: 1e-12,
            restarts: 10,
        }
    }
}

/// Result of a Lloyd run.
#[derive(Debug, Clone, PartialEq)]
pub struct Codebook {
    pub centroids: Vec<Vec<f64>>,
    /// Cluster index of each row.
    pub assignment: Vec<usize>,
    /// Mean per-row distortion of `assignment` against `centroids`.
    pub distortion: f64,
    pub mode: ErrorMode,
    /// Distortion after every assignment step of the winning restart.
    pub history: Vec<f64>,
}

impl Codebook {
    pub fn len(&self) -> usize {
        self.centroids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.centroids.is_empty()
    }

    /// Row indices grouped by cluster.
    pub fn members(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.centroids.len()];
        for (i, &k) in self.assignment.iter().enumerate() {
            out[k].push(i);
        }
        out
    }
}

/// Mean distortion of `rows` against their assigned centroids.
pub fn mean_distortion(
    rows: &[Vec<f64>],
    centroids: &[Vec<f64>],
    assignment: &[usize],
    mode: ErrorMode,
) -> f64 {
    if rows.is_empty() {
        return 0.0;
    }
    let total: f64 = rows
        .iter()
        .zip(assignment)
        .map(|(r, &k)| mode.distance(r, &centroids[k]))
        .sum();
    total / rows.len() as f64
}

/// Index of the nearest centroid; ties go to the lowest index.
pub fn nearest(row: &[f64], centroids: &[Vec<f64>], mode: ErrorMode) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (k, c) in centroids.iter().enumerate() {
        let d = mode.distance(row, c);
        if d < best.1 {
            best = (k, d);
        }
    }
    best
}

/// Runs `params.restarts` seeded Lloyd runs and keeps the lowest distortion
/// (lowest restart index on ties).
pub fn lloyd(rows: &[Vec<f64>], params: &ClusterParams) -> Result<Codebook> {
    if rows.is_empty() {
        return Err(Error::EmptySamples);
    }
    let dim = rows[0].len();
    if let Some(bad) = rows.iter().find(|r| r.len() != dim) {
        return Err(Error::DimensionMismatch {
            expected: dim,
            got: bad.len(),
        });
    }
    if params.k == 0 || params.k > rows.len() {
        return Err(Error::TooFewSamples {
            k: params.k,
            distinct: rows.len(),
        });
    }
    let restarts = params.restarts.max(1);
    let runs: Vec<Codebook> = (0..restarts)
        .into_par_iter()
        .map(|r| {
            let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
            rng.set_stream(r as u64);
            single_run(rows, params, &mut rng)
        })
        .collect();
    let mut best = 0;
    for (i, run) in runs.iter().enumerate() {
        if run.distortion < runs[best].distortion {
            best = i;
        }
    }
    Ok(runs.into_iter().nth(best).expect("at least one restart"))
}

fn single_run<R: Rng>(rows: &[Vec<f64>], params: &ClusterParams, rng: &mut R) -> Codebook {
    let mode = params.mode;
    let mut centroids = seed_centroids(rows, params.k, mode, rng);
    let mut assignment = assign(rows, &centroids, mode);
    let mut distortion = mean_distortion(rows, &centroids, &assignment, mode);
    let mut history = vec![distortion];
    for _ in 0..params.max_iters {
        let next = update(rows, &centroids, &assignment, mode);
        let next_assignment = assign(rows, &next, mode);
        let next_distortion = mean_distortion(rows, &next, &next_assignment, mode);
        let changed = next_assignment != assignment;
        let improvement = distortion - next_distortion;
        let previous = distortion;
        centroids = next;
        assignment = next_assignment;
        distortion = next_distortion;
        history.push(distortion);
        if !changed || improvement <= params.tol * previous {
            break;
        }
    }
    Codebook {
        centroids,
        assignment,
        distortion,
        mode,
        history,
    }
}

/// k-means++ style seeding: first centroid uniform, the rest drawn with
/// probability proportional to the current per-row distortion.
fn seed_centroids<R: Rng>(rows: &[Vec<f64>], k: usize, mode: ErrorMode, rng: &mut R) -> Vec<Vec<f64>> {
    let first = rng.random_range(0..rows.len());
    let mut centroids = vec![rows[first].clone()];
    let mut cost: Vec<f64> = rows.iter().map(|r| mode.distance(r, &rows[first])).collect();
    while centroids.len() < k {
        let total: f64 = cost.iter().sum();
        let pick = if total > 0.0 {
            let target = rng.random::<f64>() * total;
            let mut acc = 0.0;
            let mut chosen = None;
            for (i, c) in cost.iter().enumerate() {
                if *c <= 0.0 {
                    continue;
                }
                acc += c;
                chosen = Some(i);
                if acc > target {
                    break;
                }
            }
            chosen.expect("positive total cost has a positive entry")
        } else {
            // Every row coincides with a chosen centroid.
            rng.random_range(0..rows.len())
        };
        let c = rows[pick].clone();
        for (i, r) in rows.iter().enumerate() {
            cost[i] = cost[i].min(mode.distance(r, &c));
        }
        centroids.push(c);
    }
    centroids
}

fn assign(rows: &[Vec<f64>], centroids: &[Vec<f64>], mode: ErrorMode) -> Vec<usize> {
    rows.iter().map(|r| nearest(r, centroids, mode).0).collect()
}

/// Prototype update. An empty cluster is reseeded at the row that currently
/// contributes the most distortion.
fn update(rows: &[Vec<f64>], centroids: &[Vec<f64>], assignment: &[usize], mode: ErrorMode) -> Vec<Vec<f64>> {
    let k = centroids.len();
    let dim = rows[0].len();
    let mut members = vec![Vec::new(); k];
    for (i, &a) in assignment.iter().enumerate() {
        members[a].push(i);
    }
    let mut next = Vec::with_capacity(k);
    let mut buf = Vec::new();
    for m in &members {
        if m.is_empty() {
            next.push(Vec::new());
            continue;
        }
        let mut c = Vec::with_capacity(dim);
        for d in 0..dim {
            buf.clear();
            buf.extend(m.iter().map(|&i| rows[i][d]));
            c.push(mode.prototype(&mut buf));
        }
        next.push(c);
    }
    if members.iter().any(Vec::is_empty) {
        let mut contrib: Vec<(usize, f64)> = rows
            .iter()
            .zip(assignment)
            .enumerate()
            .map(|(i, (r, &a))| (i, mode.distance(r, &next[a])))
            .collect();
        // Largest contribution first, lowest index on ties.
        contrib.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        let mut donors = contrib.into_iter();
        for (kk, m) in members.iter().enumerate() {
            if m.is_empty() {
                next[kk] = match donors.next() {
                    Some((i, _)) => rows[i].clone(),
                    None => centroids[kk].clone(),
                };
            }
        }
    }
    next
}
