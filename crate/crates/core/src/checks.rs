//! Quick built-in invariant suite run by the `check` command.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::driver::{generate_increments, SimGrid};
use crate::models::builtin_catalog;
use crate::params::{rho, PerturbationParams};
use crate::reference::{exact_singly_perturbed, solve_reference, PerturbedSide};
use crate::reflect::skorohod_map;
use crate::scheme::{identity_residual, simulate_new, SchemeKind, simulate};

#[derive(Debug, Clone, PartialEq)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn outcome(name: &'static str, violations: usize, trials: usize) -> CheckOutcome {
    CheckOutcome { name, passed: violations == 0, detail: format!("{violations} violations in {trials} trials") }
}

pub fn parameter_gate() -> CheckOutcome {
    let mut bad = 0;
    let mut total = 0;
    for i in 0..=100 {
        for j in 0..=100 {
            let a = -4.0 + 4.99 * i as f64 / 100.0;
            let b = -4.0 + 4.99 * j as f64 / 100.0;
            let direct = a < 1.0 && b < 1.0 && rho(a, b).abs() < 1.0;
            if PerturbationParams::validate(a, b, 0.0, 1.0).is_ok() != direct {
                bad += 1;
            }
            total += 1;
        }
    }
    outcome("parameter-gate", bad, total)
}

pub fn skorohod_properties(seed: u64) -> CheckOutcome {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let trials = 500;
    let mut bad = 0;
    for _ in 0..trials {
        let mut y = vec![rng.random_range(0.0..1.0)];
        for _ in 0..128 {
            let last = *y.last().unwrap();
            y.push(last + rng.random_range(-0.3..0.3));
        }
        let r = skorohod_map(&y).expect("starts non-negative");
        let mut ok = r.k[0] == 0.0;
        for j in 0..y.len() {
            ok &= r.z[j] >= 0.0 && r.z[j] == y[j] + r.k[j];
            if j > 0 {
                ok &= r.k[j] >= r.k[j - 1];
                ok &= r.k[j] == r.k[j - 1] || r.z[j] == 0.0;
            }
        }
        bad += usize::from(!ok);
    }
    outcome("skorohod", bad, trials)
}

fn valid_params(rng: &mut ChaCha8Rng) -> PerturbationParams {
    loop {
        let a = rng.random_range(-3.0..0.95);
        let b = rng.random_range(-3.0..0.95);
        if let Ok(p) = PerturbationParams::validate(a, b, 0.0, 1.0) {
            return p;
        }
    }
}

pub fn scheme_identity(seed: u64) -> CheckOutcome {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let catalog = builtin_catalog();
    let grid = SimGrid::new(256, 1.0).expect("valid grid");
    let trials = 100;
    let mut bad = 0;
    for t in 0..trials {
        let model = &catalog[rng.random_range(0..catalog.len())];
        let p = valid_params(&mut rng);
        let n = [8, 16, 32][rng.random_range(0..3)];
        let dw = generate_increments(seed, t, &grid);
        let path = simulate_new(model, &p, &grid, n, &dw).expect("aligned");
        let scale = 1.0 + path.x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let mut ok = identity_residual(&path, 0.0, p.alpha(), p.beta()) <= 1e-12 * scale;
        ok &= path.big_m.windows(2).all(|w| w[1] >= w[0]) && path.big_m.iter().all(|v| *v >= 0.0);
        ok &= path.big_i.windows(2).all(|w| w[1] <= w[0]) && path.big_i.iter().all(|v| *v <= 0.0);
        bad += usize::from(!ok);
    }
    outcome("scheme-identity", bad, trials as usize)
}

/// Reference solver against the closed form for one-sided perturbation.
pub fn closed_form_agreement(seed: u64) -> CheckOutcome {
    let grid = SimGrid::new(1024, 1.0).expect("valid grid");
    let model = crate::models::CoefficientModel::zero_drift_unit_diffusion();
    let p = PerturbationParams::validate(0.5, 0.0, 0.0, 1.0).expect("valid");
    let trials = 50;
    let mut bad = 0;
    for i in 0..trials {
        let dw = generate_increments(seed, i, &grid);
        let r = solve_reference(&model, &p, &grid, &dw).expect("lengths match");
        let e = exact_singly_perturbed(&dw, &grid, PerturbedSide::Max(0.5)).expect("lengths match");
        let gap = r.x.iter().zip(&e.x).map(|(u, v)| (u - v).abs()).fold(0.0, f64::max);
        bad += usize::from(gap > 1e-12);
    }
    outcome("closed-form", bad, trials as usize)
}

/// Without perturbation the old and new schemes coincide.
pub fn unperturbed_schemes_agree(seed: u64) -> CheckOutcome {
    let grid = SimGrid::new(512, 1.0).expect("valid grid");
    let p = PerturbationParams::validate(0.0, 0.0, 0.0, 1.0).expect("valid");
    let trials = 20;
    let mut bad = 0;
    for (i, model) in builtin_catalog().iter().enumerate() {
        for j in 0..trials / 5 {
            let dw = generate_increments(seed, (i * 100 + j) as u64, &grid);
            let a = simulate(SchemeKind::New, model, &p, &grid, 16, &dw).expect("aligned");
            let b = simulate(SchemeKind::Old, model, &p, &grid, 16, &dw).expect("aligned");
            bad += usize::from(a.x != b.x);
        }
    }
    outcome("old-new-unperturbed", bad, builtin_catalog().len() * (trials / 5))
}

pub fn run_all(seed: u64) -> Vec<CheckOutcome> {
    vec![
        parameter_gate(),
        skorohod_properties(seed),
        scheme_identity(seed),
        closed_form_agreement(seed),
        unperturbed_schemes_agree(seed),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suite_passes() {
        for c in run_all(1) {
            assert!(c.passed, "{}: {}", c.name, c.detail);
        }
    }
}
