//! One-sided Skorohod reflection and running extrema on sampled paths.

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ReflectError {
    #[error("path starts at {0} < 0")]
    NegativeStart(f64),
    #[error("empty input")]
    EmptyInput,
}

/// Solution `(z, k)` of the discrete Skorohod problem for a path `y`.
#[derive(Debug, Clone, PartialEq)]
pub struct Reflection {
    /// Reflected path `z = y + k >= 0`.
    pub z: Vec<f64>,
    /// Regulator `k_j = max_{i <= j} (-y_i)^+`, non-decreasing from 0.
    pub k: Vec<f64>,
}

pub fn skorohod_map(y: &[f64]) -> Result<Reflection, ReflectError> {
    let first = *y.first().ok_or(ReflectError::EmptyInput)?;
    if first < 0.0 {
        return Err(ReflectError::NegativeStart(first));
    }
    let mut z = Vec::with_capacity(y.len());
    let mut k = Vec::with_capacity(y.len());
    let mut reg = 0.0f64;
    for &v in y {
        reg = reg.max(-v);
        k.push(reg);
        z.push(v + reg);
    }
    Ok(Reflection { z, k })
}

pub fn running_max(values: &[f64]) -> Result<Vec<f64>, ReflectError> {
    running_by(values, f64::max)
}

pub fn running_min(values: &[f64]) -> Result<Vec<f64>, ReflectError> {
    running_by(values, f64::min)
}

fn running_by(values: &[f64], pick: fn(f64, f64) -> f64) -> Result<Vec<f64>, ReflectError> {
    let (&first, _) = values.split_first().ok_or(ReflectError::EmptyInput)?;
    let mut acc = first;
    Ok(values
        .iter()
        .map(|&v| {
            acc = pick(acc, v);
            acc
        })
        .collect())
}
