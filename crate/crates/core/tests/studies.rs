use dpsde::driver::{brownian_path, SimGrid};
use dpsde::experiments::{
    compare_schemes, convergence_study, strong_error, strong_error_against, StudySpec, Target,
};
use dpsde::models::{lookup, CoefficientModel};
use dpsde::params::PerturbationParams;
use dpsde::reference::{exact_singly_perturbed, PerturbedSide};
use dpsde::scheme::SchemeKind;

fn spec(model: CoefficientModel, a: f64, b: f64, x0: f64, scheme: SchemeKind) -> StudySpec {
    let params = PerturbationParams::validate(a, b, x0, 1.0).unwrap();
    StudySpec { scheme, ..StudySpec::default_for(model, params).unwrap() }
}

#[test]
fn gbm_delayed_euler_approaches_exact_solution() {
    let (mu, sigma, x0) = (0.05, 0.2, 1.0);
    let mut s = spec(CoefficientModel::gbm(mu, sigma), 0.0, 0.0, x0, SchemeKind::GeneralX0);
    s.paths = 500;
    let exact = move |grid: &SimGrid, dw: &[f64]| -> Vec<f64> {
        brownian_path(dw)
            .iter()
            .enumerate()
            .map(|(k, w)| x0 * ((mu - 0.5 * sigma * sigma) * grid.time(k) + sigma * w).exp())
            .collect()
    };
    let errors: Vec<f64> = s
        .n_list
        .iter()
        .map(|&n| strong_error_against(&s, n, 2.0, &Target::Exact(&exact)).unwrap().mean)
        .collect();
    assert!(errors.windows(2).all(|w| w[1] < w[0]), "{errors:?}");
}

#[test]
fn constant_coefficients_make_the_scheme_exact_for_one_sided_perturbation() {
    // with b = 0, s = 1 the increments of Phi do not see the delay, so every
    // n reproduces the closed form
    let s = spec(CoefficientModel::zero_drift_unit_diffusion(), 0.5, 0.0, 0.0, SchemeKind::New);
    let exact = |grid: &SimGrid, dw: &[f64]| exact_singly_perturbed(dw, grid, PerturbedSide::Max(0.5)).unwrap().x;
    for &n in &s.n_list {
        let e = strong_error_against(&s, n, 2.0, &Target::Exact(&exact)).unwrap();
        assert!(e.mean < 1e-24, "n={n} {e:?}");
    }
}

#[test]
fn std_err_scales_like_inverse_root_paths() {
    let mut s = spec(lookup("affine").unwrap(), 0.6, -1.0, 0.0, SchemeKind::New);
    s.grid = SimGrid::new(512, 1.0).unwrap();
    s.paths = 1000;
    let small = strong_error(&s, 8, 2.0).unwrap();
    s.paths = 4000;
    let large = strong_error(&s, 8, 2.0).unwrap();
    // quadrupling M halves the standard error
    let ratio = small.std_err / large.std_err;
    assert!((1.6..2.5).contains(&ratio), "ratio={ratio}");
}

#[test]
fn beyond_mao_comparisons_have_full_structure() {
    for (a, b) in [(0.6, -1.0), (-3.0, -3.0)] {
        let mut s = spec(lookup("affine").unwrap(), a, b, 0.0, SchemeKind::New);
        s.paths = 200;
        s.grid = SimGrid::new(1024, 1.0).unwrap();
        let c = compare_schemes(&s).unwrap();
        assert_eq!(c.new.rows.len(), 8);
        assert_eq!(c.old.rows.len(), 8);
        assert_eq!(c.new.fits.len(), 2);
        let e = c.new.errors_for(2.0);
        assert!(e.windows(2).all(|w| w[1].1 < w[0].1), "a={a} b={b} {e:?}");
        assert!(c.old.rows.iter().all(|r| r.error.is_finite() && r.error >= 0.0));
    }
}

#[test]
fn general_start_value_study_runs() {
    let mut s = spec(lookup("bounded-trig").unwrap(), 0.3, -0.5, 0.7, SchemeKind::GeneralX0);
    s.paths = 200;
    s.grid = SimGrid::new(1024, 1.0).unwrap();
    let r = convergence_study(&s).unwrap();
    let e = r.errors_for(2.0);
    assert!(e.windows(2).all(|w| w[1].1 < w[0].1), "{e:?}");
    assert_eq!(r.meta.x0, 0.7);
}

#[test]
fn fewer_than_three_delays_give_no_fit() {
    let mut s = spec(lookup("affine").unwrap(), 0.6, -1.0, 0.0, SchemeKind::New);
    s.paths = 16;
    s.n_list = vec![8, 16];
    let r = convergence_study(&s).unwrap();
    assert!(r.fits.is_empty());
    assert_eq!(r.rows.len(), 4);
}
