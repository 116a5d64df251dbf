//! Drift/diffusion pairs with declared regularity, and the concave moduli
//! used to describe non-Lipschitz coefficients.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("modulus argument {0} is negative")]
    NegativeInput(f64),
    #[error("rho2 epsilon {0} must lie in (0, 1/e]")]
    InvalidEpsilon(f64),
    #[error("unknown model id `{0}`")]
    UnknownModel(String),
}

/// Default cut-off for the `-u log u` modulus.
pub const DEFAULT_RHO2_EPSILON: f64 = 0.1;

/// Concave moduli of continuity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ModulusKind {
    /// `rho(u) = u`.
    Rho1,
    /// `-u log u` on `(0, epsilon]`, tangent line above `epsilon`.
    Rho2 { epsilon: f64 },
}

impl ModulusKind {
    pub fn rho2(epsilon: f64) -> Result<Self, ModelError> {
        if !(epsilon > 0.0 && epsilon <= (-1.0f64).exp()) {
            return Err(ModelError::InvalidEpsilon(epsilon));
        }
        Ok(ModulusKind::Rho2 { epsilon })
    }
}

pub fn eval_modulus(kind: ModulusKind, u: f64) -> Result<f64, ModelError> {
    if u < 0.0 || u.is_nan() {
        return Err(ModelError::NegativeInput(u));
    }
    Ok(match kind {
        ModulusKind::Rho1 => u,
        ModulusKind::Rho2 { epsilon } => {
            if u == 0.0 {
                0.0
            } else if u <= epsilon {
                -u * u.ln()
            } else {
                let at_eps = -epsilon * epsilon.ln();
                let slope = -epsilon.ln() - 1.0;
                at_eps + slope * (u - epsilon)
            }
        }
    })
}

/// Declared regularity of a coefficient pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Regularity {
    /// `|s(x)-s(y)| + |b(x)-b(y)| <= K|x-y|` and `|s(0)| + |b(0)| <= K`.
    Lipschitz { k: f64 },
    /// `|s(x)-s(y)|^p + |b(x)-b(y)|^p <= C rho(|x-y|^p)`.
    Modulus(ModulusKind),
}

/// Anything that can serve as the drift and diffusion of a scalar SDE.
pub trait Coefficients: Sync {
    fn drift(&self, t: f64, x: f64) -> f64;
    fn diffusion(&self, t: f64, x: f64) -> f64;
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelKind {
    /// `b = a0 + a1 x`, `s = s0 + s1 x`.
    Affine { a0: f64, a1: f64, s0: f64, s1: f64 },
    /// `b = mu x`, `s = sigma x`.
    Gbm { mu: f64, sigma: f64 },
    /// `b = sin x`, `s = cos x`.
    BoundedTrig,
    /// `b = drift`, `s(x) = sign(x) g(|x|)` with
    /// `g(u) = u (1 - log u)^log_power` on `(0, epsilon]`, tangent line above.
    ///
    /// The modulus of `g` is of `rho2` type in the p-th power form for every
    /// `p <= 1 / log_power`.
    LogLipschitz { drift: f64, epsilon: f64, log_power: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoefficientModel {
    pub id: String,
    pub kind: ModelKind,
    pub regularity: Regularity,
}

impl CoefficientModel {
    pub fn affine(a0: f64, a1: f64, s0: f64, s1: f64) -> Self {
        let k = (a1.abs() + s1.abs()).max(a0.abs() + s0.abs());
        Self {
            id: "affine".into(),
            kind: ModelKind::Affine { a0, a1, s0, s1 },
            regularity: Regularity::Lipschitz { k },
        }
    }

    /// Constant coefficients `b`, `s`.
    pub fn constant(b: f64, s: f64) -> Self {
        Self { id: "constant".into(), ..Self::affine(b, 0.0, s, 0.0) }
    }

    pub fn zero_drift_unit_diffusion() -> Self {
        Self { id: "zero-drift-unit-diffusion".into(), ..Self::affine(0.0, 0.0, 1.0, 0.0) }
    }

    pub fn gbm(mu: f64, sigma: f64) -> Self {
        Self {
            id: "gbm".into(),
            kind: ModelKind::Gbm { mu, sigma },
            regularity: Regularity::Lipschitz { k: mu.abs() + sigma.abs() },
        }
    }

    pub fn bounded_trig() -> Self {
        // |sin x - sin y| + |cos x - cos y| <= sqrt(2) * chord <= sqrt(2)|x - y|
        Self {
            id: "bounded-trig".into(),
            kind: ModelKind::BoundedTrig,
            regularity: Regularity::Lipschitz { k: std::f64::consts::SQRT_2 },
        }
    }

    pub fn log_lipschitz(drift: f64, epsilon: f64, log_power: f64) -> Result<Self, ModelError> {
        let modulus = ModulusKind::rho2(epsilon)?;
        Ok(Self {
            id: "log-lipschitz".into(),
            kind: ModelKind::LogLipschitz { drift, epsilon, log_power },
            regularity: Regularity::Modulus(modulus),
        })
    }

    pub fn with_id(mut self, id: impl Into<String>) -> Self {
        self.id = id.into();
        self
    }
}

fn log_lipschitz_profile(u: f64, epsilon: f64, power: f64) -> f64 {
    let g = |v: f64| v * (1.0 - v.ln()).powf(power);
    if u == 0.0 {
        0.0
    } else if u <= epsilon {
        g(u)
    } else {
        let l = 1.0 - epsilon.ln();
        let slope = l.powf(power) - power * l.powf(power - 1.0);
        g(epsilon) + slope * (u - epsilon)
    }
}

impl Coefficients for CoefficientModel {
    fn drift(&self, _t: f64, x: f64) -> f64 {
        match self.kind {
            ModelKind::Affine { a0, a1, .. } => a0 + a1 * x,
            ModelKind::Gbm { mu, .. } => mu * x,
            ModelKind::BoundedTrig => x.sin(),
            ModelKind::LogLipschitz { drift, .. } => drift,
        }
    }

    fn diffusion(&self, _t: f64, x: f64) -> f64 {
        match self.kind {
            ModelKind::Affine { s0, s1, .. } => s0 + s1 * x,
            ModelKind::Gbm { sigma, .. } => sigma * x,
            ModelKind::BoundedTrig => x.cos(),
            ModelKind::LogLipschitz { epsilon, log_power, .. } => {
                let g = log_lipschitz_profile(x.abs(), epsilon, log_power);
                if x < 0.0 {
                    -g
                } else {
                    g
                }
            }
        }
    }
}

/// Built-in models addressable by id. The `affine` entry is mean-reverting,
/// `b = 1 - x/2`, `s = 1/2 + x/5`.
pub fn builtin_catalog() -> Vec<CoefficientModel> {
    let log_lip = CoefficientModel::log_lipschitz(0.0, DEFAULT_RHO2_EPSILON, 0.25)
        .expect("default epsilon is valid");
    let log_lip_drift = CoefficientModel::log_lipschitz(1.0, DEFAULT_RHO2_EPSILON, 0.25)
        .expect("default epsilon is valid")
        .with_id("log-lipschitz-drift");
    vec![
        CoefficientModel::zero_drift_unit_diffusion(),
        CoefficientModel::affine(1.0, -0.5, 0.5, 0.2),
        CoefficientModel::gbm(0.05, 0.2),
        CoefficientModel::bounded_trig(),
        log_lip,
        log_lip_drift,
    ]
}

pub fn lookup(id: &str) -> Result<CoefficientModel, ModelError> {
    builtin_catalog()
        .into_iter()
        .find(|m| m.id == id)
        .ok_or_else(|| ModelError::UnknownModel(id.to_string()))
}

/// Sampling setup for [`verify_regularity_with`].
#[derive(Debug, Clone, Copy)]
pub struct RegularityProbe {
    pub samples: usize,
    pub seed: u64,
    pub horizon: f64,
    /// States are drawn from `[-radius, radius]`.
    pub radius: f64,
    /// Moment exponent in the modulus condition.
    pub p: f64,
    /// Smallest gap `|x - y|` (as `10^min_log10_gap`) probed near the
    /// diagonal and near the origin.
    pub min_log10_gap: f64,
}

impl Default for RegularityProbe {
    fn default() -> Self {
        Self { samples: 1000, seed: 7, horizon: 1.0, radius: 10.0, p: 4.0, min_log10_gap: -8.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RegularityReport {
    /// Worst relative excess over the declared bound (0 when satisfied).
    pub max_violation: f64,
    /// Smallest constant `C` making the modulus condition hold on the
    /// sample; `None` for Lipschitz models.
    pub fitted_constant: Option<f64>,
}

pub fn verify_regularity(model: &CoefficientModel, samples: usize, seed: u64) -> RegularityReport {
    verify_regularity_with(model, &RegularityProbe { samples, seed, ..Default::default() })
}

pub fn verify_regularity_with(model: &CoefficientModel, probe: &RegularityProbe) -> RegularityReport {
    let mut rng = ChaCha8Rng::seed_from_u64(probe.seed);
    let mut triples = Vec::with_capacity(probe.samples);
    for i in 0..probe.samples.max(1) {
        let t = rng.random_range(0.0..=probe.horizon);
        let gap = |rng: &mut ChaCha8Rng| {
            let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
            sign * 10f64.powf(rng.random_range(probe.min_log10_gap..=0.0))
        };
        let (x, y) = match i % 3 {
            0 => (
                rng.random_range(-probe.radius..=probe.radius),
                rng.random_range(-probe.radius..=probe.radius),
            ),
            1 => {
                let x = rng.random_range(-probe.radius..=probe.radius);
                (x, x + gap(&mut rng))
            }
            _ => (gap(&mut rng), gap(&mut rng)),
        };
        triples.push((t, x, y));
    }

    match model.regularity {
        Regularity::Lipschitz { k } => {
            let mut worst = 0.0f64;
            for &(t, x, y) in &triples {
                let lhs = (model.diffusion(t, x) - model.diffusion(t, y)).abs()
                    + (model.drift(t, x) - model.drift(t, y)).abs();
                // the differences carry absolute rounding error of a few
                // ulps of the evaluated coefficients
                let mag = model.diffusion(t, x).abs()
                    + model.diffusion(t, y).abs()
                    + model.drift(t, x).abs()
                    + model.drift(t, y).abs()
                    + k * (x.abs() + y.abs());
                let rhs = k * (x - y).abs() + 8.0 * f64::EPSILON * mag;
                if lhs > rhs {
                    worst = worst.max((lhs - rhs) / rhs.max(f64::MIN_POSITIVE));
                }
                let anchor = model.diffusion(t, 0.0).abs() + model.drift(t, 0.0).abs();
                if anchor > k {
                    worst = worst.max((anchor - k) / k.max(f64::MIN_POSITIVE));
                }
            }
            RegularityReport { max_violation: worst, fitted_constant: None }
        }
        Regularity::Modulus(kind) => {
            let p = probe.p;
            let terms: Vec<(f64, f64)> = triples
                .iter()
                .filter(|(_, x, y)| x != y)
                .map(|&(t, x, y)| {
                    let lhs = (model.diffusion(t, x) - model.diffusion(t, y)).abs().powf(p)
                        + (model.drift(t, x) - model.drift(t, y)).abs().powf(p);
                    let rhs = eval_modulus(kind, (x - y).abs().powf(p)).unwrap_or(0.0);
                    (lhs, rhs)
                })
                .filter(|&(_, rhs)| rhs > 0.0)
                .collect();
            let c = terms.iter().map(|&(l, r)| l / r).fold(0.0f64, f64::max);
            let worst = terms
                .iter()
                .map(|&(l, r)| ((l - c * r) / (c * r).max(f64::MIN_POSITIVE)).max(0.0))
                .fold(0.0f64, f64::max);
            RegularityReport { max_violation: worst, fitted_constant: Some(c) }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn modulus_examples() {
        assert_eq!(eval_modulus(ModulusKind::Rho1, 0.3).unwrap(), 0.3);
        let r2 = ModulusKind::rho2(0.1).unwrap();
        assert_eq!(eval_modulus(r2, 0.0).unwrap(), 0.0);
        let v = eval_modulus(r2, 0.05).unwrap();
        assert!((v - 0.149_786_613_677_699_55).abs() < 1e-12, "{v}");
        assert_eq!(eval_modulus(r2, -1.0), Err(ModelError::NegativeInput(-1.0)));
        assert!(ModulusKind::rho2(0.5).is_err());
        assert!(ModulusKind::rho2(0.0).is_err());
    }

    #[test]
    fn rho2_is_continuous_at_epsilon() {
        let r2 = ModulusKind::rho2(0.1).unwrap();
        let below = eval_modulus(r2, 0.1).unwrap();
        let above = eval_modulus(r2, 0.1 + 1e-12).unwrap();
        assert!((below - above).abs() < 1e-11);
    }

    #[test]
    fn rho2_concavity_scan() {
        // second differences must be non-positive on a fine grid
        let r2 = ModulusKind::rho2(0.1).unwrap();
        let h = 1e-4;
        for i in 1..3000 {
            let u = i as f64 * h;
            let d2 = eval_modulus(r2, u + h).unwrap() - 2.0 * eval_modulus(r2, u).unwrap()
                + eval_modulus(r2, u - h).unwrap();
            assert!(d2 <= 1e-15, "u={u} d2={d2}");
        }
    }

    #[test]
    fn catalog_examples() {
        let z = lookup("zero-drift-unit-diffusion").unwrap();
        assert_eq!(z.diffusion(0.0, 17.0), 1.0);
        assert_eq!(z.drift(0.0, 17.0), 0.0);
        let g = lookup("gbm").unwrap();
        assert!((g.drift(0.3, 2.0) - 0.1).abs() < 1e-15);
        let l = lookup("log-lipschitz").unwrap();
        assert_eq!(l.diffusion(0.0, 0.0), 0.0);
        assert_eq!(l.drift(0.0, 1.0), 0.0);
        assert!(matches!(l.regularity, Regularity::Modulus(ModulusKind::Rho2 { .. })));
        assert!(lookup("nope").is_err());
    }

    #[test]
    fn log_lipschitz_profile_is_odd_and_continuous() {
        let l = lookup("log-lipschitz").unwrap();
        for x in [1e-9, 0.01, 0.0999, 0.1, 0.2, 3.0] {
            assert_eq!(l.diffusion(0.0, -x), -l.diffusion(0.0, x));
        }
        let a = l.diffusion(0.0, 0.1);
        let b = l.diffusion(0.0, 0.1 + 1e-12);
        assert!((a - b).abs() < 1e-11);
    }

    #[test]
    fn regularity_examples() {
        let z = lookup("zero-drift-unit-diffusion").unwrap();
        assert_eq!(verify_regularity(&z, 1000, 7).max_violation, 0.0);

        let a = CoefficientModel::affine(1.0, 2.0, 0.0, 1.0);
        assert_eq!(a.regularity, Regularity::Lipschitz { k: 3.0 });
        assert!(verify_regularity(&a, 1000, 7).max_violation <= 1e-12);

        let l = lookup("log-lipschitz").unwrap();
        let r = verify_regularity(&l, 1000, 7);
        assert_eq!(r.max_violation, 0.0);
        assert!(r.fitted_constant.unwrap().is_finite());
    }

    #[test]
    fn wrong_lipschitz_constant_is_reported() {
        let mut a = CoefficientModel::affine(1.0, 2.0, 0.0, 1.0);
        a.regularity = Regularity::Lipschitz { k: 2.0 };
        assert!(verify_regularity(&a, 1000, 7).max_violation > 0.4);
    }

    fn fitted(model: &CoefficientModel, min_log10_gap: f64) -> f64 {
        let probe = RegularityProbe { samples: 20_000, min_log10_gap, ..Default::default() };
        verify_regularity_with(model, &probe).fitted_constant.unwrap()
    }

    #[test]
    fn quartic_root_log_profile_keeps_bounded_constant() {
        let tuned = lookup("log-lipschitz").unwrap();
        let coarse = fitted(&tuned, -3.0);
        let fine = fitted(&tuned, -14.0);
        assert!(fine / coarse < 1.5, "coarse={coarse} fine={fine}");

        // u(1 - log u) is only rho2-type without the p-th power; its fitted
        // constant keeps growing as the probe approaches the origin.
        let plain = CoefficientModel::log_lipschitz(0.0, 0.1, 1.0).unwrap();
        let coarse = fitted(&plain, -3.0);
        let fine = fitted(&plain, -14.0);
        assert!(fine / coarse > 10.0, "coarse={coarse} fine={fine}");
    }
}
