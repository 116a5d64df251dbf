//! Monte Carlo strong-error studies with common random numbers.
//!
//! Every path index draws its increments once; the reference solution and
//! every scheme run (each delay `n`, each scheme kind) reuse them. Paths
//! are processed in parallel and reduced in path order with compensated
//! summation, so results do not depend on the worker count.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::driver::{generate_increments, lag_map, resolves, GridError, SimGrid, MIN_STEPS_PER_DELAY};
use crate::models::CoefficientModel;
use crate::params::PerturbationParams;
use crate::reference::solve_reference;
use crate::scheme::{simulate, SchemeError, SchemeKind};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StudyError {
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Scheme(#[from] SchemeError),
    #[error("grid step {h} does not resolve delay 1/{n} with {MIN_STEPS_PER_DELAY} steps")]
    Unresolved { n: usize, h: f64 },
    #[error("n_list is empty")]
    EmptyDelayList,
    #[error("moment exponent p={0} must be >= 1")]
    InvalidExponent(f64),
    #[error("at least one path is required")]
    NoPaths,
    #[error("params horizon {params} differs from grid horizon {grid}")]
    HorizonMismatch { params: f64, grid: f64 },
    #[error("the new scheme needs x0 = 0 (got {0}); use general-x0")]
    NonZeroStart(f64),
    #[error("degenerate fit: {0}")]
    DegenerateFit(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct StudySpec {
    pub model: CoefficientModel,
    pub params: PerturbationParams,
    pub n_list: Vec<usize>,
    pub p_list: Vec<f64>,
    pub paths: usize,
    pub grid: SimGrid,
    pub master_seed: u64,
    pub scheme: SchemeKind,
}

impl StudySpec {
    /// Default study: `T = 1`, `L = 4096`, `n in {8,16,32,64}`,
    /// `p in {2,4}`, 2000 paths, seed 42, new scheme.
    pub fn default_for(model: CoefficientModel, params: PerturbationParams) -> Result<Self, StudyError> {
        let grid = SimGrid::new(4096, params.horizon())?;
        Ok(Self {
            model,
            params,
            n_list: vec![8, 16, 32, 64],
            p_list: vec![2.0, 4.0],
            paths: 2000,
            grid,
            master_seed: 42,
            scheme: SchemeKind::New,
        })
    }

    pub fn validate(&self) -> Result<(), StudyError> {
        if self.params.horizon() != self.grid.horizon() {
            return Err(StudyError::HorizonMismatch {
                params: self.params.horizon(),
                grid: self.grid.horizon(),
            });
        }
        if self.n_list.is_empty() {
            return Err(StudyError::EmptyDelayList);
        }
        for &n in &self.n_list {
            lag_map(&self.grid, n)?;
            if !resolves(&self.grid, n) {
                return Err(StudyError::Unresolved { n, h: self.grid.step_size() });
            }
        }
        if let Some(&p) = self.p_list.iter().find(|p| !(**p >= 1.0)) {
            return Err(StudyError::InvalidExponent(p));
        }
        if self.paths == 0 {
            return Err(StudyError::NoPaths);
        }
        if self.scheme == SchemeKind::New && self.params.x0() != 0.0 {
            return Err(StudyError::NonZeroStart(self.params.x0()));
        }
        Ok(())
    }
}

/// What a scheme path is measured against.
pub enum Target<'a> {
    /// Grid solution of the limit equation on the same increments.
    Reference,
    /// Another scheme run on the same increments.
    Scheme { kind: SchemeKind, n: usize },
    /// Any path-valued function of the grid and increments.
    Exact(&'a (dyn Fn(&SimGrid, &[f64]) -> Vec<f64> + Sync)),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    pub std_err: f64,
}

/// Neumaier-compensated sum in slice order.
pub fn compensated_sum(values: &[f64]) -> f64 {
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for &v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

/// Sample mean and its standard error.
pub fn mean_and_std_err(values: &[f64]) -> Estimate {
    let n = values.len() as f64;
    let mean = compensated_sum(values) / n;
    if values.len() < 2 {
        return Estimate { mean, std_err: 0.0 };
    }
    let sq: Vec<f64> = values.iter().map(|v| (v - mean) * (v - mean)).collect();
    let var = compensated_sum(&sq) / (n - 1.0);
    Estimate { mean, std_err: (var / n).sqrt() }
}

fn sup_gap(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(u, v)| (u - v).abs()).fold(0.0, f64::max)
}

/// Per path, `sup_k |X^{kind,n}_k - target_k|` for every `(kind, n)` pair
/// in `runs`, in path order.
fn sup_gaps(spec: &StudySpec, runs: &[(SchemeKind, usize)], target: &Target<'_>) -> Result<Vec<Vec<f64>>, StudyError> {
    let per_path = |i: usize| -> Result<Vec<f64>, StudyError> {
        let dw = generate_increments(spec.master_seed, i as u64, &spec.grid);
        let target_x = match target {
            Target::Reference => solve_reference(&spec.model, &spec.params, &spec.grid, &dw)?.x,
            Target::Scheme { kind, n } => simulate(*kind, &spec.model, &spec.params, &spec.grid, *n, &dw)?.x,
            Target::Exact(f) => f(&spec.grid, &dw),
        };
        runs.iter()
            .map(|&(kind, n)| {
                let path = simulate(kind, &spec.model, &spec.params, &spec.grid, n, &dw)?;
                Ok(sup_gap(&path.x, &target_x))
            })
            .collect()
    };
    (0..spec.paths).into_par_iter().map(per_path).collect()
}

fn moment(gaps: &[Vec<f64>], column: usize, p: f64) -> Estimate {
    let values: Vec<f64> = gaps.iter().map(|g| g[column].powf(p)).collect();
    mean_and_std_err(&values)
}

/// `E[sup_k |X^n_k - target_k|^p]` for the study's scheme.
pub fn strong_error_against(spec: &StudySpec, n: usize, p: f64, target: &Target<'_>) -> Result<Estimate, StudyError> {
    spec.validate()?;
    if !(p >= 1.0) {
        return Err(StudyError::InvalidExponent(p));
    }
    let gaps = sup_gaps(spec, &[(spec.scheme, n)], target)?;
    Ok(moment(&gaps, 0, p))
}

/// `E[sup_k |X^n_k - X_k|^p]` against the reference solution.
pub fn strong_error(spec: &StudySpec, n: usize, p: f64) -> Result<Estimate, StudyError> {
    strong_error_against(spec, n, p, &Target::Reference)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub p: f64,
    pub slope: f64,
    pub intercept: f64,
}

/// Least squares of `log2(estimate)` on `log2(n)`.
pub fn rate_fit(points: &[(f64, f64)]) -> Result<(f64, f64), StudyError> {
    if points.len() < 3 {
        return Err(StudyError::DegenerateFit(format!("{} points, need 3", points.len())));
    }
    if let Some((n, e)) = points.iter().find(|(n, e)| !(*e > 0.0) || !(*n > 0.0)) {
        return Err(StudyError::DegenerateFit(format!("non-positive point ({n}, {e})")));
    }
    let xs: Vec<f64> = points.iter().map(|(n, _)| n.log2()).collect();
    let ys: Vec<f64> = points.iter().map(|(_, e)| e.log2()).collect();
    let len = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / len;
    let my = ys.iter().sum::<f64>() / len;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    if sxx == 0.0 {
        return Err(StudyError::DegenerateFit("all n identical".into()));
    }
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    Ok((slope, my - slope * mx))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorRow {
    pub n: usize,
    pub p: f64,
    pub error: f64,
    pub std_err: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyMeta {
    pub scheme: SchemeKind,
    pub model: String,
    pub alpha: f64,
    pub beta: f64,
    pub x0: f64,
    pub horizon: f64,
    pub steps: usize,
    pub paths: usize,
    pub master_seed: u64,
    pub rho: f64,
    pub beyond_mao: bool,
}

impl StudyMeta {
    fn new(spec: &StudySpec, scheme: SchemeKind) -> Self {
        Self {
            scheme,
            model: spec.model.id.clone(),
            alpha: spec.params.alpha(),
            beta: spec.params.beta(),
            x0: spec.params.x0(),
            horizon: spec.grid.horizon(),
            steps: spec.grid.steps(),
            paths: spec.paths,
            master_seed: spec.master_seed,
            rho: spec.params.rho(),
            beyond_mao: spec.params.beyond_mao(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub meta: StudyMeta,
    /// One row per `(n, p)`, `n` outer.
    pub rows: Vec<ErrorRow>,
    /// One fit per `p` when at least three positive estimates exist.
    pub fits: Vec<RateFit>,
}

impl ConvergenceReport {
    pub fn errors_for(&self, p: f64) -> Vec<(usize, f64)> {
        self.rows.iter().filter(|r| r.p == p).map(|r| (r.n, r.error)).collect()
    }

    pub fn fit_for(&self, p: f64) -> Option<RateFit> {
        self.fits.iter().copied().find(|f| f.p == p)
    }
}

fn build_report(spec: &StudySpec, scheme: SchemeKind, gaps: &[Vec<f64>], offset: usize) -> ConvergenceReport {
    let mut rows = Vec::new();
    for (j, &n) in spec.n_list.iter().enumerate() {
        for &p in &spec.p_list {
            let e = moment(gaps, offset + j, p);
            rows.push(ErrorRow { n, p, error: e.mean, std_err: e.std_err });
        }
    }
    let fits = spec
        .p_list
        .iter()
        .filter_map(|&p| {
            let pts: Vec<(f64, f64)> =
                rows.iter().filter(|r| r.p == p).map(|r| (r.n as f64, r.error)).collect();
            rate_fit(&pts).ok().map(|(slope, intercept)| RateFit { p, slope, intercept })
        })
        .collect();
    ConvergenceReport { meta: StudyMeta::new(spec, scheme), rows, fits }
}

/// Errors for every `(n, p)` of the study plus fitted rates, from one pass
/// over the paths.
pub fn convergence_study(spec: &StudySpec) -> Result<ConvergenceReport, StudyError> {
    spec.validate()?;
    let runs: Vec<_> = spec.n_list.iter().map(|&n| (spec.scheme, n)).collect();
    let gaps = sup_gaps(spec, &runs, &Target::Reference)?;
    Ok(build_report(spec, spec.scheme, &gaps, 0))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub new: ConvergenceReport,
    pub old: ConvergenceReport,
}

/// New (or general-x0 when `x0 != 0`) and old schemes against the same
/// reference paths on the same increments. No verdict on the old scheme.
pub fn compare_schemes(spec: &StudySpec) -> Result<Comparison, StudyError> {
    let primary = if spec.params.x0() == 0.0 { SchemeKind::New } else { SchemeKind::GeneralX0 };
    let spec = StudySpec { scheme: primary, ..spec.clone() };
    spec.validate()?;
    let k = spec.n_list.len();
    let runs: Vec<_> = spec
        .n_list
        .iter()
        .map(|&n| (primary, n))
        .chain(spec.n_list.iter().map(|&n| (SchemeKind::Old, n)))
        .collect();
    let gaps = sup_gaps(&spec, &runs, &Target::Reference)?;
    Ok(Comparison {
        new: build_report(&spec, primary, &gaps, 0),
        old: build_report(&spec, SchemeKind::Old, &gaps, k),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentRow {
    pub n: usize,
    pub p: f64,
    pub estimate: f64,
    pub std_err: f64,
}

/// `E[sup_k |X^n_k|^p]` of the study's scheme for every `(n, p)`.
pub fn moment_scan(spec: &StudySpec) -> Result<Vec<MomentRow>, StudyError> {
    spec.validate()?;
    let per_path = |i: usize| -> Result<Vec<f64>, StudyError> {
        let dw = generate_increments(spec.master_seed, i as u64, &spec.grid);
        spec.n_list
            .iter()
            .map(|&n| {
                let path = simulate(spec.scheme, &spec.model, &spec.params, &spec.grid, n, &dw)?;
                Ok(path.x.iter().fold(0.0f64, |m, v| m.max(v.abs())))
            })
            .collect()
    };
    let sups: Vec<Vec<f64>> = (0..spec.paths).into_par_iter().map(per_path).collect::<Result<_, _>>()?;
    let mut out = Vec::new();
    for (j, &n) in spec.n_list.iter().enumerate() {
        for &p in &spec.p_list {
            let e = moment(&sups, j, p);
            out.push(MomentRow { n, p, estimate: e.mean, std_err: e.std_err });
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CrossCheckRow {
    pub n: usize,
    pub p: f64,
    pub vs_reference: f64,
    pub vs_fine_scheme: f64,
}

/// Errors measured against the reference and, as a diagnostic, against the
/// same scheme at the finest delay the grid resolves.
pub fn reference_cross_check(spec: &StudySpec) -> Result<Vec<CrossCheckRow>, StudyError> {
    spec.validate()?;
    let fine_n = ((spec.grid.steps() / MIN_STEPS_PER_DELAY) as f64 / spec.grid.horizon()).floor() as usize;
    let fine_n = (1..=fine_n.max(1))
        .rev()
        .find(|&n| lag_map(&spec.grid, n).is_ok() && resolves(&spec.grid, n))
        .ok_or(StudyError::EmptyDelayList)?;
    let runs: Vec<_> = spec.n_list.iter().map(|&n| (spec.scheme, n)).collect();
    let vs_ref = sup_gaps(spec, &runs, &Target::Reference)?;
    let vs_fine = sup_gaps(spec, &runs, &Target::Scheme { kind: spec.scheme, n: fine_n })?;
    let mut out = Vec::new();
    for (j, &n) in spec.n_list.iter().enumerate() {
        for &p in &spec.p_list {
            out.push(CrossCheckRow {
                n,
                p,
                vs_reference: moment(&vs_ref, j, p).mean,
                vs_fine_scheme: moment(&vs_fine, j, p).mean,
            });
        }
    }
    Ok(out)
}
