//! Grid solver for the limit equation and closed-form singly perturbed
//! paths.
//!
//! The solver advances `Phi` with left-point Euler increments evaluated at
//! the current state, then solves
//! `X_{k+1} = x0 + Phi_{k+1} + alpha max(M_k, X_{k+1}) + beta min(I_k, X_{k+1})`
//! exactly. Writing `D = x0 + Phi_{k+1} + alpha M_k + beta I_k`:
//!
//! * `I_k <= D <= M_k`: `X_{k+1} = D`, extrema unchanged;
//! * `D > M_k`: new maximum, `X_{k+1} = (x0 + Phi_{k+1} + beta I_k) / (1 - alpha)`;
//! * `D < I_k`: new minimum, `X_{k+1} = (x0 + Phi_{k+1} + alpha M_k) / (1 - beta)`.
//!
//! Ties go to the first case; all three formulas agree there.

use crate::driver::{brownian_path, SimGrid};
use crate::models::Coefficients;
use crate::params::PerturbationParams;
use crate::reflect::{running_max, running_min};
use crate::scheme::{PathColumns, SchemeError};

#[derive(Debug, Clone, PartialEq)]
pub struct ReferencePath {
    pub phi: Vec<f64>,
    pub big_m: Vec<f64>,
    pub big_i: Vec<f64>,
    pub x: Vec<f64>,
}

impl PathColumns for ReferencePath {
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

/// One implicit step from extrema `(max, min)` given `x0 + Phi_{k+1}`.
/// Returns the new state.
pub fn reference_step(alpha: f64, beta: f64, drive: f64, max: f64, min: f64) -> f64 {
    let d = drive + alpha * max + beta * min;
    if d > max {
        (drive + beta * min) / (1.0 - alpha)
    } else if d < min {
        (drive + alpha * max) / (1.0 - beta)
    } else {
        d
    }
}

pub fn solve_reference<C: Coefficients + ?Sized>(
    model: &C,
    params: &PerturbationParams,
    grid: &SimGrid,
    increments: &[f64],
) -> Result<ReferencePath, SchemeError> {
    if increments.len() != grid.steps() {
        return Err(SchemeError::IncrementLength { expected: grid.steps(), got: increments.len() });
    }
    let (alpha, beta, x0) = (params.alpha(), params.beta(), params.x0());
    let h = grid.step_size();
    let len = grid.steps() + 1;
    let start = params.initial_state();

    let mut out = ReferencePath {
        phi: Vec::with_capacity(len),
        big_m: Vec::with_capacity(len),
        big_i: Vec::with_capacity(len),
        x: Vec::with_capacity(len),
    };
    let (mut phi, mut x, mut hi, mut lo) = (0.0, start, start, start);
    out.phi.push(phi);
    out.x.push(x);
    out.big_m.push(hi);
    out.big_i.push(lo);
    for (k, dw) in increments.iter().enumerate() {
        let t = grid.time(k);
        phi += model.drift(t, x) * h + model.diffusion(t, x) * dw;
        x = reference_step(alpha, beta, x0 + phi, hi, lo);
        // max/min rather than assignment: rounding in the new-extremum
        // branches must not break monotone extrema
        hi = hi.max(x);
        lo = lo.min(x);
        out.phi.push(phi);
        out.x.push(x);
        out.big_m.push(hi);
        out.big_i.push(lo);
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PerturbedSide {
    /// Only the running maximum perturbs (`beta = 0`).
    Max(f64),
    /// Only the running minimum perturbs (`alpha = 0`).
    Min(f64),
}

/// Closed form for `b = 0`, `s = 1`, `x0 = 0` with one vanishing parameter:
/// `X = W + alpha/(1-alpha) max W` or `X = W + beta/(1-beta) min W`.
pub fn exact_singly_perturbed(increments: &[f64], grid: &SimGrid, side: PerturbedSide) -> Result<ReferencePath, SchemeError> {
    if increments.len() != grid.steps() {
        return Err(SchemeError::IncrementLength { expected: grid.steps(), got: increments.len() });
    }
    let w = brownian_path(increments);
    let x: Vec<f64> = match side {
        PerturbedSide::Max(alpha) => {
            let c = alpha / (1.0 - alpha);
            let s = running_max(&w).expect("non-empty");
            w.iter().zip(&s).map(|(w, s)| w + c * s).collect()
        }
        PerturbedSide::Min(beta) => {
            let c = beta / (1.0 - beta);
            let s = running_min(&w).expect("non-empty");
            w.iter().zip(&s).map(|(w, s)| w + c * s).collect()
        }
    };
    let big_m = running_max(&x).expect("non-empty");
    let big_i = running_min(&x).expect("non-empty");
    Ok(ReferencePath { phi: w, big_m, big_i, x })
}
