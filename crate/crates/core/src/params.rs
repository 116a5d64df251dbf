//! Perturbation parameters and the well-posedness gate.
//!
//! A doubly perturbed equation is well posed when `alpha < 1`, `beta < 1`
//! and `|rho| < 1` with `rho = alpha*beta / ((1 - alpha)(1 - beta))`.
//! Every comparison is strict and exact: no epsilon slack is applied.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParamsError {
    #[error("alpha={0} must be < 1")]
    AlphaOutOfRange(f64),
    #[error("beta={0} must be < 1")]
    BetaOutOfRange(f64),
    #[error("rho={rho} violates |rho| < 1 (alpha={alpha}, beta={beta})")]
    RhoTooLarge { alpha: f64, beta: f64, rho: f64 },
    #[error("horizon={0} must be > 0")]
    NonPositiveHorizon(f64),
    #[error("{name}={value} is not finite")]
    NonFinite { name: &'static str, value: f64 },
}

/// Validated `(alpha, beta, x0, T)` together with the derived `rho`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PerturbationParams {
    alpha: f64,
    beta: f64,
    x0: f64,
    horizon: f64,
    rho: f64,
}

/// `alpha*beta / ((1 - alpha)(1 - beta))`, no validation.
pub fn rho(alpha: f64, beta: f64) -> f64 {
    (alpha * beta) / ((1.0 - alpha) * (1.0 - beta))
}

impl PerturbationParams {
    pub fn validate(alpha: f64, beta: f64, x0: f64, horizon: f64) -> Result<Self, ParamsError> {
        for (name, value) in [("alpha", alpha), ("beta", beta), ("x0", x0), ("horizon", horizon)] {
            if !value.is_finite() {
                return Err(ParamsError::NonFinite { name, value });
            }
        }
        if alpha >= 1.0 {
            return Err(ParamsError::AlphaOutOfRange(alpha));
        }
        if beta >= 1.0 {
            return Err(ParamsError::BetaOutOfRange(beta));
        }
        let rho = rho(alpha, beta);
        if rho.abs() >= 1.0 {
            return Err(ParamsError::RhoTooLarge { alpha, beta, rho });
        }
        if horizon <= 0.0 {
            return Err(ParamsError::NonPositiveHorizon(horizon));
        }
        Ok(Self { alpha, beta, x0, horizon, rho })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn x0(&self) -> f64 {
        self.x0
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    /// Same parameters with a different starting point.
    pub fn with_x0(&self, x0: f64) -> Result<Self, ParamsError> {
        Self::validate(self.alpha, self.beta, x0, self.horizon)
    }

    /// True when `|alpha| + |beta| >= 1`, the regime the earlier
    /// Carathéodory analysis did not cover.
    pub fn beyond_mao(&self) -> bool {
        self.alpha.abs() + self.beta.abs() >= 1.0
    }

    /// Initial value of the solution, `x0 / (1 - alpha - beta)`.
    ///
    /// `1 - alpha - beta > 0` for every accepted pair.
    pub fn initial_state(&self) -> f64 {
        self.x0 / (1.0 - self.alpha - self.beta)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn boundary_rho_is_rejected() {
        match PerturbationParams::validate(0.5, 0.5, 0.0, 1.0) {
            Err(ParamsError::RhoTooLarge { rho, .. }) => assert_eq!(rho, 1.0),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn accepted_examples() {
        let p = PerturbationParams::validate(0.6, -1.0, 0.0, 1.0).unwrap();
        assert!((p.rho() + 0.75).abs() < 1e-15);
        assert!(p.beyond_mao());

        let p = PerturbationParams::validate(-3.0, -3.0, 0.0, 1.0).unwrap();
        assert_eq!(p.rho(), 9.0 / 16.0);
        assert!(p.beyond_mao());

        let p = PerturbationParams::validate(0.3, 0.3, 0.0, 1.0).unwrap();
        assert!(!p.beyond_mao());
    }

    #[test]
    fn rejection_kinds() {
        assert_eq!(
            PerturbationParams::validate(1.0, 0.0, 0.0, 1.0),
            Err(ParamsError::AlphaOutOfRange(1.0))
        );
        assert_eq!(
            PerturbationParams::validate(0.0, 1.5, 0.0, 1.0),
            Err(ParamsError::BetaOutOfRange(1.5))
        );
        assert_eq!(
            PerturbationParams::validate(0.0, 0.0, 0.0, 0.0),
            Err(ParamsError::NonPositiveHorizon(0.0))
        );
        assert!(matches!(
            PerturbationParams::validate(f64::NAN, 0.0, 0.0, 1.0),
            Err(ParamsError::NonFinite { name: "alpha", .. })
        ));
    }

    #[test]
    fn accepted_params_have_safe_denominators() {
        for i in 0..=60 {
            for j in 0..=60 {
                let a = -5.0 + i as f64 * 0.1;
                let b = -5.0 + j as f64 * 0.1;
                if let Ok(p) = PerturbationParams::validate(a, b, 1.0, 1.0) {
                    assert!(1.0 - p.rho().abs() > 0.0);
                    assert!(1.0 - p.alpha() > 0.0 && 1.0 - p.beta() > 0.0);
                    assert!(1.0 - p.alpha() - p.beta() > 0.0, "a={a} b={b}");
                }
            }
        }
    }
}
