//! Multiplier sweeps, trade-off frontiers and random Gaussian test models.

use std::io::Write;

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution as _, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::discrete::{solve, LagrangeParams, SolveOptions};
use crate::error::{DpflError, Result};
use crate::gaussian::{solve_gaussian, GaussianModel};
use crate::prob::JointSource;
use crate::report::{InfoField, InfoReport};
use crate::seed::derive_seed;

/// Environment variable capping the number of sweep worker threads.
pub const THREADS_ENV: &str = "DPFL_THREADS";

/// Default number of x-bins used by [`frontier`].
pub const FRONTIER_BINS: usize = 50;

/// Cartesian grid of Lagrange multipliers plus the solver settings shared by
/// every point. `options.seed` is the base seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepGrid {
    pub betas: Vec<f64>,
    pub lambdas: Vec<f64>,
    pub gammas: Vec<f64>,
    pub options: SolveOptions,
    /// Keep one record per restart instead of only the best one.
    #[serde(default)]
    pub keep_all: bool,
}

impl SweepGrid {
    pub fn new(betas: Vec<f64>, lambdas: Vec<f64>, gammas: Vec<f64>, options: SolveOptions) -> Result<Self> {
        let grid = Self {
            betas,
            lambdas,
            gammas,
            options,
            keep_all: false,
        };
        grid.validate()?;
        Ok(grid)
    }

    pub fn validate(&self) -> Result<()> {
        for (axis, name) in [(&self.betas, "betas"), (&self.lambdas, "lambdas"), (&self.gammas, "gammas")] {
            if axis.is_empty() {
                return Err(DpflError::EmptyGrid(name));
            }
        }
        for &beta in &self.betas {
            for &lambda in &self.lambdas {
                for &gamma in &self.gammas {
                    LagrangeParams::new(beta, lambda, gamma)?;
                }
            }
        }
        self.options.validate()
    }

    pub fn len(&self) -> usize {
        self.betas.len() * self.lambdas.len() * self.gammas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Grid indices `(ib, il, ig)` in lexicographic order.
    fn points(&self) -> Vec<(usize, usize, usize)> {
        let mut out = Vec::with_capacity(self.len());
        for ib in 0..self.betas.len() {
            for il in 0..self.lambdas.len() {
                for ig in 0..self.gammas.len() {
                    out.push((ib, il, ig));
                }
            }
        }
        out
    }
}

/// What a sweep solves at each grid point.
#[derive(Debug, Clone)]
pub enum Problem {
    Discrete {
        source: JointSource,
        card_t1: usize,
        card_t2: usize,
    },
    Gaussian {
        model: GaussianModel,
        d1: usize,
        d2: usize,
    },
}

impl Problem {
    /// `I(X;Y)` of the underlying source.
    pub fn mutual_information(&self) -> Result<f64> {
        match self {
            Problem::Discrete { source, .. } => Ok(source.mutual_information()),
            Problem::Gaussian { model, .. } => model.mutual_information(),
        }
    }

    fn solve_once(&self, params: &LagrangeParams, options: &SolveOptions) -> Result<(InfoReport, usize, bool)> {
        match self {
            Problem::Discrete {
                source,
                card_t1,
                card_t2,
            } => {
                let s = solve(source, *card_t1, *card_t2, params, options)?;
                Ok((s.report, s.iterations, s.converged))
            }
            Problem::Gaussian { model, d1, d2 } => {
                let s = solve_gaussian(model, *d1, *d2, params, options)?;
                Ok((s.report, s.iterations, s.converged))
            }
        }
    }
}

/// Outcome of one grid point (or one restart when all restarts are kept).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TradeoffRecord {
    pub beta: f64,
    pub lambda: f64,
    pub gamma: f64,
    /// Seed of the run that produced this record.
    pub seed: u64,
    pub restart: usize,
    /// `None` when the solver failed; see `error`.
    pub report: Option<InfoReport>,
    pub iterations: usize,
    pub converged: bool,
    pub error: Option<String>,
}

impl TradeoffRecord {
    pub fn value(&self, field: InfoField) -> f64 {
        self.report.map_or(f64::NAN, |r| r.field(field))
    }
}

fn run_point(problem: &Problem, grid: &SweepGrid, (ib, il, ig): (usize, usize, usize)) -> Vec<TradeoffRecord> {
    let (beta, lambda, gamma) = (grid.betas[ib], grid.lambdas[il], grid.gammas[ig]);
    let params = LagrangeParams::new(beta, lambda, gamma).expect("grid validated");
    let runs: Vec<TradeoffRecord> = (0..grid.options.restarts)
        .map(|restart| {
            let seed = derive_seed(grid.options.seed, &[ib as u64, il as u64, ig as u64, restart as u64]);
            let options = SolveOptions {
                seed,
                restarts: 1,
                ..grid.options
            };
            let (report, iterations, converged, error) = match problem.solve_once(&params, &options) {
                Ok((r, it, c)) => (Some(r), it, c, None),
                Err(e) => (None, 0, false, Some(e.to_string())),
            };
            TradeoffRecord {
                beta,
                lambda,
                gamma,
                seed,
                restart,
                report,
                iterations,
                converged,
                error,
            }
        })
        .collect();
    if grid.keep_all {
        return runs;
    }
    // Lowest functional wins; failed restarts only survive if every restart failed.
    let mut best: Option<TradeoffRecord> = None;
    for run in runs {
        let better = match (&best, &run.report) {
            (None, _) => true,
            (Some(b), Some(r)) => b
                .report
                .is_none_or(|br| r.functional_value < br.functional_value),
            (Some(_), None) => false,
        };
        if better {
            best = Some(run);
        }
    }
    vec![best.expect("at least one restart")]
}

fn thread_cap() -> Option<usize> {
    std::env::var(THREADS_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&n| n > 0)
}

/// Solves every grid point and returns the records in lexicographic
/// `(beta, lambda, gamma)` order. Point failures are stored in the record.
///
/// Points run in parallel (capped by `DPFL_THREADS`); the output does not
/// depend on the schedule because every point derives its own seed.
pub fn run_sweep(grid: &SweepGrid, problem: &Problem) -> Result<Vec<TradeoffRecord>> {
    grid.validate()?;
    let points = grid.points();
    let work = || -> Vec<TradeoffRecord> {
        points
            .par_iter()
            .map(|&p| run_point(problem, grid, p))
            .collect::<Vec<_>>()
            .into_iter()
            .flatten()
            .collect()
    };
    match thread_cap() {
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| DpflError::InvalidParams(format!("thread pool: {e}")))?;
            Ok(pool.install(work))
        }
        None => Ok(work()),
    }
}

/// Upper-envelope Pareto filter of `y` against `x`.
///
/// Records are binned on `x` (`bins` equal-width bins over the observed
/// range), the largest `y` of each bin is kept, and bins are then scanned in
/// increasing `x`, keeping a point only when its `y` beats every point to its
/// left. The result is strictly increasing in `y`. Failed or non-finite
/// records are ignored.
pub fn frontier(records: &[TradeoffRecord], x: InfoField, y: InfoField, bins: usize) -> Vec<(f64, f64)> {
    let points: Vec<(f64, f64)> = records
        .iter()
        .map(|r| (r.value(x), r.value(y)))
        .filter(|(a, b)| a.is_finite() && b.is_finite())
        .collect();
    if points.is_empty() {
        return Vec::new();
    }
    let bins = bins.max(1);
    let lo = points.iter().map(|p| p.0).fold(f64::INFINITY, f64::min);
    let hi = points.iter().map(|p| p.0).fold(f64::NEG_INFINITY, f64::max);
    let width = (hi - lo) / bins as f64;
    let mut best: Vec<Option<(f64, f64)>> = vec![None; bins];
    for &(px, py) in &points {
        let k = if width > 0.0 {
            (((px - lo) / width) as usize).min(bins - 1)
        } else {
            0
        };
        if best[k].is_none_or(|(_, by)| py > by) {
            best[k] = Some((px, py));
        }
    }
    let mut out: Vec<(f64, f64)> = Vec::new();
    for (px, py) in best.into_iter().flatten() {
        if out.last().is_none_or(|&(_, top)| py > top) {
            out.push((px, py));
        }
    }
    out
}

fn ranks(v: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut out = vec![0.0; v.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
            j += 1;
        }
        // Ties share the average of their 1-based ranks.
        let rank = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            out[k] = rank;
        }
        i = j + 1;
    }
    out
}

/// Spearman rank correlation with average ranks for ties. `None` when fewer
/// than two pairs are given or either side is constant.
pub fn spearman(x: &[f64], y: &[f64]) -> Option<f64> {
    if x.len() != y.len() || x.len() < 2 {
        return None;
    }
    let (rx, ry) = (ranks(x), ranks(y));
    let n = rx.len() as f64;
    let (mx, my) = (rx.iter().sum::<f64>() / n, ry.iter().sum::<f64>() / n);
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in rx.iter().zip(&ry) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx).powi(2);
        syy += (b - my).powi(2);
    }
    if sxx == 0.0 || syy == 0.0 {
        None
    } else {
        Some(sxy / (sxx * syy).sqrt())
    }
}

/// Random model with joint covariance `G Gᵀ / (n_x + n_y) + 0.1 I`, where `G`
/// has standard normal entries and the `Σ_YX` block is scaled by `coupling`.
///
/// Scaling the cross block by `c ∈ [0, 1]` keeps the joint matrix above
/// `0.1 I`: it is the convex combination `c·S + (1 - c)·diag(S_X, S_Y)`.
pub fn gen_gaussian_model(n_x: usize, n_y: usize, coupling: f64, seed: u64) -> Result<GaussianModel> {
    if n_x == 0 || n_y == 0 {
        return Err(DpflError::InvalidParams("model dimensions must be at least 1".into()));
    }
    if !(0.0..=1.0).contains(&coupling) {
        return Err(DpflError::InvalidParams(format!(
            "coupling strength must lie in [0, 1], got {coupling}"
        )));
    }
    let n = n_x + n_y;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let g = DMatrix::<f64>::from_fn(n, n, |_, _| StandardNormal.sample(&mut rng));
    let s = &g * g.transpose() / n as f64 + DMatrix::identity(n, n) * 0.1;
    let sigma_x = s.view((0, 0), (n_x, n_x)).into_owned();
    let sigma_y = s.view((n_x, n_x), (n_y, n_y)).into_owned();
    let sigma_yx = s.view((n_x, 0), (n_y, n_x)).into_owned() * coupling;
    GaussianModel::new(sigma_x, sigma_y, sigma_yx)
}

pub const CSV_HEADER: &str =
    "beta,lambda,gamma,seed,i_x_t1,i_x_t2,i_t1_t2,i_y_t1t2,functional,iterations,converged";

/// 12 significant digits, locale independent.
fn num(v: f64) -> String {
    format!("{v:.11e}")
}

/// Writes records as CSV; failed points have `NaN` information columns.
pub fn write_csv<W: Write>(records: &[TradeoffRecord], mut out: W) -> std::io::Result<()> {
    writeln!(out, "{CSV_HEADER}")?;
    for r in records {
        let info: Vec<String> = InfoField::ALL.iter().map(|&f| num(r.value(f))).collect();
        writeln!(
            out,
            "{},{},{},{},{},{},{}",
            num(r.beta),
            num(r.lambda),
            num(r.gamma),
            r.seed,
            info.join(","),
            r.iterations,
            r.converged
        )?;
    }
    Ok(())
}

pub fn to_csv(records: &[TradeoffRecord]) -> String {
    let mut buf = Vec::new();
    write_csv(records, &mut buf).expect("writing to memory");
    String::from_utf8(buf).expect("ASCII output")
}
