//! Carathéodory approximations for one-dimensional α,β-doubly perturbed
//! SDEs
//!
//! `X_t = x0 + ∫ b(s, X_s) ds + ∫ σ(s, X_s) dW_s + α max_{s<=t} X_s + β min_{s<=t} X_s`,
//!
//! together with an implicit grid solver for the limit equation and a
//! Monte Carlo harness for strong-error studies.

pub mod checks;
pub mod driver;
pub mod experiments;
pub mod export;
pub mod models;
pub mod params;
pub mod reference;
pub mod reflect;
pub mod scheme;

pub use driver::{make_grid, BrownianDriver, SimGrid};
pub use experiments::{convergence_study, strong_error, ConvergenceReport, StudySpec};
pub use models::{lookup, CoefficientModel, Coefficients};
pub use params::PerturbationParams;
pub use reference::solve_reference;
pub use scheme::{simulate, SchemeKind, SchemePath};
