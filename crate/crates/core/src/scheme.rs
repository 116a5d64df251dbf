//! Carathéodory approximations of the doubly perturbed equation.
//!
//! All three variants share the delayed integral
//! `Phi_k = sum_{j<k} b(t_j, X_lag(j)) h + s(t_j, X_lag(j)) dW_j`, where
//! `X_lag(j)` is the state one delay window `1/n` earlier, or the pre-time
//! history value when that time is negative. They differ in how the
//! perturbation terms are built:
//!
//! * [`simulate_new`]: `(X, M, I)` scheme for `x0 = 0`. `M` and `I` are
//!   running maxima of `Phi + beta I` and `-Phi - alpha M`, each evaluated
//!   with the *other* process lagged by one window (clamped at time 0), so
//!   every step only reads values that are already known.
//! * [`simulate_old`]: the earlier scheme, perturbing by the running max/min
//!   of the lagged state itself.
//! * [`simulate_general_x0`]: the `x0 != 0` form, with history
//!   `x0 / (1 - alpha - beta)` and no positive parts.

use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;
use thiserror::Error;

use crate::driver::{lag_map, GridError, LagMap, SimGrid};
use crate::models::Coefficients;
use crate::params::PerturbationParams;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SchemeError {
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error("the x0 = 0 scheme was given x0 = {0}; use the general-x0 variant")]
    NonZeroInitialValue(f64),
    #[error("expected {expected} increments, got {got}")]
    IncrementLength { expected: usize, got: usize },
    #[error("horizon mismatch: params T = {params}, grid T = {grid}")]
    HorizonMismatch { params: f64, grid: f64 },
    #[error("1 - alpha - beta = 0: the initial segment is undefined")]
    DegenerateInitialSegment,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SchemeKind {
    New,
    Old,
    GeneralX0,
}

impl SchemeKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            SchemeKind::New => "new",
            SchemeKind::Old => "old",
            SchemeKind::GeneralX0 => "general-x0",
        }
    }
}

impl fmt::Display for SchemeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SchemeKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "new" => Ok(SchemeKind::New),
            "old" => Ok(SchemeKind::Old),
            "general-x0" | "general" => Ok(SchemeKind::GeneralX0),
            other => Err(format!("unknown scheme `{other}` (expected new, old, general-x0)")),
        }
    }
}

/// Column access shared by scheme and reference paths.
pub trait PathColumns {
    fn phi(&self) -> &[f64];
    fn big_m(&self) -> &[f64];
    fn big_i(&self) -> &[f64];
    fn x(&self) -> &[f64];
}

#[derive(Debug, Clone, PartialEq)]
pub struct SchemePath {
    pub phi: Vec<f64>,
    pub big_m: Vec<f64>,
    pub big_i: Vec<f64>,
    pub x: Vec<f64>,
    pub n: usize,
    pub lag: LagMap,
    pub kind: SchemeKind,
}

impl PathColumns for SchemePath {
    fn phi(&self) -> &[f64] {
        &self.phi
    }
    fn big_m(&self) -> &[f64] {
        &self.big_m
    }
    fn big_i(&self) -> &[f64] {
        &self.big_i
    }
    fn x(&self) -> &[f64] {
        &self.x
    }
}

/// Increment `Phi_k - Phi_{k-1}` with left-point coefficients evaluated at
/// the state one delay window before `t_{k-1}`.
#[allow(clippy::too_many_arguments)]
pub fn phi_step<C: Coefficients + ?Sized>(
    model: &C,
    grid: &SimGrid,
    lag: &LagMap,
    history: f64,
    x: &[f64],
    increments: &[f64],
    k: usize,
) -> f64 {
    debug_assert!(k >= 1);
    let j = k - 1;
    let t = grid.time(j);
    let delayed = lag.unclamped(j).map_or(history, |i| x[i]);
    model.drift(t, delayed) * grid.step_size() + model.diffusion(t, delayed) * increments[j]
}

fn prepare(
    params: &PerturbationParams,
    grid: &SimGrid,
    n: usize,
    increments: &[f64],
) -> Result<LagMap, SchemeError> {
    if increments.len() != grid.steps() {
        return Err(SchemeError::IncrementLength { expected: grid.steps(), got: increments.len() });
    }
    if params.horizon() != grid.horizon() {
        return Err(SchemeError::HorizonMismatch { params: params.horizon(), grid: grid.horizon() });
    }
    Ok(lag_map(grid, n)?)
}

struct Columns {
    phi: Vec<f64>,
    big_m: Vec<f64>,
    big_i: Vec<f64>,
    x: Vec<f64>,
}

impl Columns {
    fn with_capacity(len: usize) -> Self {
        Self {
            phi: Vec::with_capacity(len),
            big_m: Vec::with_capacity(len),
            big_i: Vec::with_capacity(len),
            x: Vec::with_capacity(len),
        }
    }

    fn push(&mut self, phi: f64, m: f64, i: f64, x: f64) {
        self.phi.push(phi);
        self.big_m.push(m);
        self.big_i.push(i);
        self.x.push(x);
    }

    fn finish(self, n: usize, lag: LagMap, kind: SchemeKind) -> SchemePath {
        SchemePath { phi: self.phi, big_m: self.big_m, big_i: self.big_i, x: self.x, n, lag, kind }
    }
}

/// The `(X, M, I)` scheme for `x0 = 0`.
///
/// With `g_j = Phi_j + beta I_{lag+(j)}` and `q_j = -Phi_j - alpha M_{lag+(j)}`:
/// `M_k = (max_{j<=k} g_j)^+ / (1 - alpha)`, `I_k = (max_{j<=k} q_j)^+ / (beta - 1)`,
/// `X_k = Phi_k + alpha M_k + beta I_k`. The positive part is applied once to
/// the running maximum, which equals the maximum of the positive parts.
pub fn simulate_new<C: Coefficients + ?Sized>(
    model: &C,
    params: &PerturbationParams,
    grid: &SimGrid,
    n: usize,
    increments: &[f64],
) -> Result<SchemePath, SchemeError> {
    if params.x0() != 0.0 {
        return Err(SchemeError::NonZeroInitialValue(params.x0()));
    }
    let lag = prepare(params, grid, n, increments)?;
    let (alpha, beta) = (params.alpha(), params.beta());
    let steps = grid.steps();

    let mut c = Columns::with_capacity(steps + 1);
    c.push(0.0, 0.0, 0.0, 0.0);
    // g_0 = q_0 = 0
    let mut g_max = 0.0f64;
    let mut q_max = 0.0f64;
    let mut phi = 0.0;
    for k in 1..=steps {
        phi += phi_step(model, grid, &lag, 0.0, &c.x, increments, k);
        let back = lag.clamped(k);
        g_max = g_max.max(phi + beta * c.big_i[back]);
        q_max = q_max.max(-phi - alpha * c.big_m[back]);
        let m = g_max.max(0.0) / (1.0 - alpha);
        let i = q_max.max(0.0) / (beta - 1.0);
        c.push(phi, m, i, phi + alpha * m + beta * i);
    }
    Ok(c.finish(n, lag, SchemeKind::New))
}

/// The earlier scheme:
/// `X_k = x0 + Phi_k + alpha max_{j<=k} X_{lag(j)} + beta min_{j<=k} X_{lag(j)}`,
/// with lagged values at negative times equal to `x0`. `big_m`/`big_i` hold
/// the lagged running max/min.
pub fn simulate_old<C: Coefficients + ?Sized>(
    model: &C,
    params: &PerturbationParams,
    grid: &SimGrid,
    n: usize,
    increments: &[f64],
) -> Result<SchemePath, SchemeError> {
    let lag = prepare(params, grid, n, increments)?;
    let (alpha, beta, x0) = (params.alpha(), params.beta(), params.x0());
    let steps = grid.steps();

    let mut c = Columns::with_capacity(steps + 1);
    let mut hi = x0;
    let mut lo = x0;
    c.push(0.0, hi, lo, x0 + alpha * hi + beta * lo);
    let mut phi = 0.0;
    for k in 1..=steps {
        phi += phi_step(model, grid, &lag, x0, &c.x, increments, k);
        let delayed = lag.unclamped(k).map_or(x0, |i| c.x[i]);
        hi = hi.max(delayed);
        lo = lo.min(delayed);
        c.push(phi, hi, lo, x0 + phi + alpha * hi + beta * lo);
    }
    Ok(c.finish(n, lag, SchemeKind::Old))
}

/// Scheme for arbitrary `x0`: history `c = x0 / (1 - alpha - beta)` for
/// `X`, `M` and `I`, then
/// `M_k = max_{j<=k}(x0 + Phi_j + beta I_{lag+(j)}) / (1 - alpha)`,
/// `I_k = max_{j<=k}(-x0 - Phi_j - alpha M_{lag+(j)}) / (beta - 1)`,
/// `X_k = x0 + Phi_k + alpha M_k + beta I_k`, without positive parts.
pub fn simulate_general_x0<C: Coefficients + ?Sized>(
    model: &C,
    params: &PerturbationParams,
    grid: &SimGrid,
    n: usize,
    increments: &[f64],
) -> Result<SchemePath, SchemeError> {
    let lag = prepare(params, grid, n, increments)?;
    let (alpha, beta, x0) = (params.alpha(), params.beta(), params.x0());
    let denom = 1.0 - alpha - beta;
    // unreachable for validated params
    if denom == 0.0 {
        return Err(SchemeError::DegenerateInitialSegment);
    }
    let history = x0 / denom;
    let steps = grid.steps();

    let mut c = Columns::with_capacity(steps + 1);
    let mut g_max = x0 + beta * history;
    let mut q_max = -x0 - alpha * history;
    // equal to `history` up to rounding; computing them like every later
    // row keeps M and I exactly monotone
    let (m0, i0) = (g_max / (1.0 - alpha), q_max / (beta - 1.0));
    c.push(0.0, m0, i0, x0 + alpha * m0 + beta * i0);
    let mut phi = 0.0;
    for k in 1..=steps {
        phi += phi_step(model, grid, &lag, history, &c.x, increments, k);
        let back = lag.clamped(k);
        g_max = g_max.max(x0 + phi + beta * c.big_i[back]);
        q_max = q_max.max(-x0 - phi - alpha * c.big_m[back]);
        let m = g_max / (1.0 - alpha);
        let i = q_max / (beta - 1.0);
        c.push(phi, m, i, x0 + phi + alpha * m + beta * i);
    }
    Ok(c.finish(n, lag, SchemeKind::GeneralX0))
}

pub fn simulate<C: Coefficients + ?Sized>(
    kind: SchemeKind,
    model: &C,
    params: &PerturbationParams,
    grid: &SimGrid,
    n: usize,
    increments: &[f64],
) -> Result<SchemePath, SchemeError> {
    match kind {
        SchemeKind::New => simulate_new(model, params, grid, n, increments),
        SchemeKind::Old => simulate_old(model, params, grid, n, increments),
        SchemeKind::GeneralX0 => simulate_general_x0(model, params, grid, n, increments),
    }
}

/// `max_k |X_k - x0 - Phi_k - alpha M_k - beta I_k|` for a path whose
/// identity carries the `x0` offset (`old`, `general-x0`, reference) or not
/// (`new`, pass `x0 = 0`).
pub fn identity_residual<P: PathColumns + ?Sized>(path: &P, x0: f64, alpha: f64, beta: f64) -> f64 {
    path.x()
        .iter()
        .zip(path.phi())
        .zip(path.big_m().iter().zip(path.big_i()))
        .map(|((x, phi), (m, i))| (x - x0 - phi - alpha * m - beta * i).abs())
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::driver::{brownian_path, generate_increments, make_grid};
    use crate::models::CoefficientModel;

    fn params(a: f64, b: f64, x0: f64) -> PerturbationParams {
        PerturbationParams::validate(a, b, x0, 1.0).unwrap()
    }

    #[test]
    fn constant_drift_phi_is_time() {
        let g = make_grid(64, 1.0).unwrap();
        let dw = generate_increments(1, 0, &g);
        let p = simulate_new(&CoefficientModel::constant(1.0, 0.0), &params(0.0, 0.0, 0.0), &g, 8, &dw)
            .unwrap();
        for k in 0..=64 {
            assert!((p.phi[k] - g.time(k)).abs() < 1e-14);
        }
    }

    #[test]
    fn unit_diffusion_phi_is_brownian() {
        let g = make_grid(64, 1.0).unwrap();
        let dw = generate_increments(1, 0, &g);
        let w = brownian_path(&dw);
        let p = simulate_new(&CoefficientModel::zero_drift_unit_diffusion(), &params(0.0, 0.0, 0.0), &g, 8, &dw)
            .unwrap();
        assert_eq!(p.phi, w);
        assert_eq!(p.x, w);
    }

    #[test]
    fn linear_diffusion_from_zero_stays_zero() {
        let g = make_grid(64, 1.0).unwrap();
        let dw = generate_increments(1, 0, &g);
        let p = simulate_new(&CoefficientModel::affine(0.0, 0.0, 0.0, 1.0), &params(0.4, -2.0, 0.0), &g, 8, &dw)
            .unwrap();
        assert!(p.phi.iter().chain(&p.x).chain(&p.big_m).chain(&p.big_i).all(|v| *v == 0.0));
    }

    #[test]
    fn zero_coefficients_give_zero_paths() {
        let g = make_grid(64, 1.0).unwrap();
        let dw = generate_increments(1, 0, &g);
        let zero = CoefficientModel::constant(0.0, 0.0);
        for (a, b) in [(0.6, -1.0), (-3.0, -3.0), (0.3, 0.3)] {
            for kind in [SchemeKind::New, SchemeKind::GeneralX0, SchemeKind::Old] {
                let p = simulate(kind, &zero, &params(a, b, 0.0), &g, 8, &dw).unwrap();
                assert!(p.x.iter().chain(&p.big_m).chain(&p.big_i).all(|v| *v == 0.0), "{kind}");
            }
        }
    }

    #[test]
    fn new_scheme_rejects_nonzero_start() {
        let g = make_grid(64, 1.0).unwrap();
        let dw = vec![0.0; 64];
        let err = simulate_new(&CoefficientModel::constant(0.0, 0.0), &params(0.0, 0.0, 1.0), &g, 8, &dw);
        assert_eq!(err.unwrap_err(), SchemeError::NonZeroInitialValue(1.0));
    }

    #[test]
    fn alignment_and_length_errors_propagate() {
        let g = make_grid(64, 1.0).unwrap();
        let m = CoefficientModel::constant(0.0, 0.0);
        let p = params(0.0, 0.0, 0.0);
        assert!(matches!(
            simulate_new(&m, &p, &g, 3, &[0.0; 64]),
            Err(SchemeError::Grid(GridError::DelayNotAligned { .. }))
        ));
        assert!(matches!(
            simulate_old(&m, &p, &g, 128, &[0.0; 64]),
            Err(SchemeError::Grid(GridError::DelayTooFine { .. }))
        ));
        assert!(matches!(
            simulate_general_x0(&m, &p, &g, 8, &[0.0; 10]),
            Err(SchemeError::IncrementLength { expected: 64, got: 10 })
        ));
    }

    #[test]
    fn old_scheme_fixed_point_iteration() {
        // b = s = 0, x0 = 1, alpha = 0.5: each delay window applies X <- 1 + X/2
        let g = make_grid(64, 1.0).unwrap();
        let p = simulate_old(&CoefficientModel::constant(0.0, 0.0), &params(0.5, 0.0, 1.0), &g, 8, &[0.0; 64])
            .unwrap();
        let m = 8;
        let mut expected = 1.0;
        for window in 0..8 {
            expected = 1.0 + 0.5 * expected;
            for k in window * m..(window + 1) * m {
                assert_eq!(p.x[k], expected, "k={k}");
            }
        }
        assert_eq!(p.x[0], 1.5);
        assert_eq!(p.x[8], 1.75);
        assert!((p.x[64] - 2.0).abs() < 1e-2);
    }

    #[test]
    fn old_scheme_deterministic_drift() {
        let g = make_grid(64, 1.0).unwrap();
        let p = simulate_old(&CoefficientModel::constant(1.0, 0.0), &params(0.0, 0.0, 0.7), &g, 8, &[0.0; 64])
            .unwrap();
        for k in 0..=64 {
            assert!((p.x[k] - 0.7 - g.time(k)).abs() < 1e-14);
        }
    }

    #[test]
    fn old_and_new_agree_without_perturbation() {
        let g = make_grid(256, 1.0).unwrap();
        let dw = generate_increments(3, 9, &g);
        let model = CoefficientModel::affine(1.0, 2.0, 0.0, 1.0);
        let p = params(0.0, 0.0, 0.0);
        let a = simulate_new(&model, &p, &g, 16, &dw).unwrap();
        let b = simulate_old(&model, &p, &g, 16, &dw).unwrap();
        assert_eq!(a.x, b.x);
    }

    #[test]
    fn general_x0_fixed_point() {
        let g = make_grid(64, 1.0).unwrap();
        let p = simulate_general_x0(&CoefficientModel::constant(0.0, 0.0), &params(0.25, 0.25, 1.0), &g, 8, &[0.0; 64])
            .unwrap();
        for k in 0..=64 {
            assert!((p.x[k] - 2.0).abs() < 1e-14);
            assert!((p.big_m[k] - 2.0).abs() < 1e-14);
            assert!((p.big_i[k] - 2.0).abs() < 1e-14);
        }
    }

    #[test]
    fn general_x0_deterministic_drift() {
        let g = make_grid(64, 1.0).unwrap();
        let p = simulate_general_x0(&CoefficientModel::constant(1.0, 0.0), &params(0.0, 0.0, 1.0), &g, 8, &[0.0; 64])
            .unwrap();
        for k in 0..=64 {
            assert!((p.x[k] - 1.0 - g.time(k)).abs() < 1e-14);
        }
    }

    #[test]
    fn general_x0_with_zero_start_matches_new() {
        let g = make_grid(512, 1.0).unwrap();
        let model = CoefficientModel::bounded_trig();
        for (a, b) in [(0.6, -1.0), (-3.0, -3.0), (0.3, 0.2)] {
            let dw = generate_increments(11, 2, &g);
            let p = params(a, b, 0.0);
            let x = simulate_new(&model, &p, &g, 16, &dw).unwrap();
            let y = simulate_general_x0(&model, &p, &g, 16, &dw).unwrap();
            assert_eq!(x.x, y.x);
            assert_eq!(x.big_m, y.big_m);
        }
    }

    #[test]
    fn scheme_kind_parses() {
        assert_eq!("general-x0".parse::<SchemeKind>().unwrap(), SchemeKind::GeneralX0);
        assert_eq!("old".parse::<SchemeKind>().unwrap().to_string(), "old");
        assert!("fast".parse::<SchemeKind>().is_err());
    }
}
