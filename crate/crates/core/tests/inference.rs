mod common;

use robcox::cox::{fit, fit_profile, FitOptions};
use robcox::inference::{
    eigen_weights, lrt_stat, one_sided_z, robust_lr_ci, robust_lr_pvalue, robust_lr_pvalue_joint, robust_wald_ci,
    wchisq_sf, wchisq_sf_with, EigenWeights, InferenceOptions, Method, Side, TailMethod,
};
use robcox::study::{build_rare_dataset, rare_bounds, RareTrialSpec};
use robcox::{CoxError, Dataset, Observation};

use common::*;

#[test]
fn lrt_on_two_vs_eight_matches_grid_maximum() {
    let ds = two_vs_eight();
    let full = fit(&ds, &FitOptions::default()).unwrap();
    let prof = fit_profile(&ds, 0, 0.0, &FitOptions::default()).unwrap();
    let l = |b: f64| naive_loglik(ds.observations(), &[b]);
    let bhat = golden_max(l, -6.0, 3.0, 1e-11);
    let oracle = 2.0 * (l(bhat) - l(0.0));
    assert!((lrt_stat(&full, &prof).unwrap() - oracle).abs() < 1e-6);
    assert_eq!(lrt_stat(&full, &full).unwrap(), 0.0);
}

#[test]
fn lrt_rejects_separated_full_fit() {
    let ds = Dataset::new(vec![
        Observation::new(1.0, 1, vec![1.0]),
        Observation::new(2.0, 0, vec![0.0]),
        Observation::new(3.0, 0, vec![1.0]),
    ])
    .unwrap();
    let full = fit(&ds, &FitOptions::default()).unwrap();
    assert!(full.is_separated() && !full.converged);
    let prof = fit_profile(&ds, 0, 0.0, &FitOptions::default()).unwrap();
    assert!(lrt_stat(&full, &prof).is_err());
    assert!(matches!(
        robust_lr_pvalue(&ds, 0, 0.0, &InferenceOptions::default()),
        Err(CoxError::Separated(0))
    ));
}

#[test]
fn pvalues_match_from_scratch_composition() {
    let ds = two_vs_eight();
    let obs = ds.observations();
    let l = |b: f64| naive_loglik(obs, &[b]);
    let bhat = golden_max(l, -6.0, 3.0, 1e-11);
    let a = naive_info(obs, &[bhat])[0][0];
    let b = naive_meat(obs, &[bhat])[0][0];
    let scale = b / a; // V / A^-1 for p = 1
    let two_delta = 2.0 * (l(bhat) - l(0.0));
    let z = bhat.signum() * (two_delta / scale).sqrt();
    let t = robust_lr_pvalue(&ds, 0, 0.0, &InferenceOptions::default()).unwrap();
    assert!((t.weights.as_slice()[0] - scale).abs() < 1e-6);
    assert!((t.z.unwrap() - z).abs() < 1e-5);
    assert!((t.p_less.unwrap() - phi(z)).abs() < 1e-5);
    assert!((t.p_greater.unwrap() - phi(-z)).abs() < 1e-5);
    assert!((t.p_two_sided - chi2_1_upper(two_delta / scale)).abs() < 1e-5);
}

#[test]
fn null_at_estimate_gives_trivial_pvalues() {
    let ds = random_dataset(5, 50, 2);
    let full = fit(&ds, &FitOptions::default()).unwrap();
    let t = robust_lr_pvalue(&ds, 1, full.beta_hat[1], &InferenceOptions::default()).unwrap();
    assert!(t.stat < 1e-8);
    assert!((t.p_two_sided - 1.0).abs() < 1e-4);
    assert!((t.p_less.unwrap() - 0.5).abs() < 1e-4);
}

#[test]
fn model_based_variance_gives_classical_chi_square() {
    for seed in 0..5 {
        let ds = random_dataset(40 + seed, 50, 2);
        let t = robust_lr_pvalue(&ds, 0, 0.1, &InferenceOptions::model_based()).unwrap();
        assert!((t.weights.as_slice()[0] - 1.0).abs() < 1e-12);
        assert!((t.p_two_sided - chi2_1_upper(t.stat)).abs() < 1e-10);
    }
}

/// Crossing of `p(phi) = target` located by a dense scan with linear interpolation.
fn scan_crossing<F: Fn(f64) -> f64>(p: F, from: f64, to: f64, step: f64, target: f64) -> f64 {
    let mut x = from;
    let mut px = p(x) - target;
    while (to - x) * (to - from).signum() > 0.0 {
        let y = x + step * (to - from).signum();
        let py = p(y) - target;
        if px.signum() != py.signum() {
            return x + (y - x) * px / (px - py);
        }
        x = y;
        px = py;
    }
    panic!("no crossing in scan");
}

#[test]
fn robust_lr_ci_matches_dense_scan() {
    let ds = two_vs_eight();
    let opts = InferenceOptions::default();
    let ci = robust_lr_ci(&ds, 0, 0.95, Side::TwoSided, &opts).unwrap();
    let bhat = fit(&ds, &FitOptions::default()).unwrap().beta_hat[0];
    let p_less = |x: f64| robust_lr_pvalue(&ds, 0, x, &opts).unwrap().p_less.unwrap();
    let p_greater = |x: f64| robust_lr_pvalue(&ds, 0, x, &opts).unwrap().p_greater.unwrap();
    let upper = scan_crossing(p_less, bhat, bhat + 6.0, 1e-3, 0.025);
    let lower = scan_crossing(p_greater, bhat, bhat - 6.0, 1e-3, 0.025);
    assert!((ci.upper - upper).abs() < 1e-4, "{} vs {}", ci.upper, upper);
    assert!((ci.lower - lower).abs() < 1e-4, "{} vs {}", ci.lower, lower);
    assert_eq!(ci.method, Method::RobustLr);
}

#[test]
fn model_based_ci_matches_profile_likelihood_grid_inversion() {
    let ds = two_vs_eight();
    let ci = robust_lr_ci(&ds, 0, 0.95, Side::TwoSided, &InferenceOptions::model_based()).unwrap();
    let l = |b: f64| naive_loglik(ds.observations(), &[b]);
    let bhat = golden_max(l, -6.0, 3.0, 1e-11);
    let crit = 3.841_458_820_694_124;
    let dev = |b: f64| 2.0 * (l(bhat) - l(b));
    let upper = scan_crossing(dev, bhat, bhat + 6.0, 1e-3, crit);
    let lower = scan_crossing(dev, bhat, bhat - 6.0, 1e-3, crit);
    assert!((ci.upper - upper).abs() < 1e-4);
    assert!((ci.lower - lower).abs() < 1e-4);
    assert_eq!(ci.method, Method::PlainLr);
}

#[test]
fn zero_treated_events_give_infinite_lower_bound() {
    let spec = RareTrialSpec::default();
    let ds = build_rare_dataset(&spec, 0).unwrap();
    let ci = robust_lr_ci(&ds, 0, 0.95, Side::TwoSided, &InferenceOptions::default()).unwrap();
    assert_eq!(ci.lower, f64::NEG_INFINITY);
    assert!(ci.upper.is_finite());
    let ci = robust_lr_ci(&ds, 0, 0.95, Side::Lower, &InferenceOptions::default()).unwrap();
    assert_eq!((ci.lower, ci.upper), (f64::NEG_INFINITY, f64::INFINITY));
}

#[test]
fn p_less_increases_with_treated_events() {
    let spec = RareTrialSpec::default();
    let mut prev = -1.0;
    for d in 1..20 {
        let ds = build_rare_dataset(&spec, d).unwrap();
        let p = robust_lr_pvalue(&ds, 0, 0.0, &InferenceOptions::default())
            .unwrap()
            .p_less
            .unwrap();
        assert!(p > prev, "d = {d}: {p} <= {prev}");
        prev = p;
    }
}

#[test]
fn lr_upper_bound_increases_with_treated_events() {
    let b = rare_bounds(&RareTrialSpec::default(), Method::RobustLr).unwrap();
    for w in b.windows(2) {
        assert!(w[1].upper >= w[0].upper);
    }
}

#[test]
fn ci_and_test_are_dual() {
    let ds = random_dataset(61, 50, 2);
    let opts = InferenceOptions::default();
    let ci = robust_lr_ci(&ds, 0, 0.9, Side::TwoSided, &opts).unwrap();
    let width = ci.width();
    for i in 0..=40 {
        let phi0 = ci.lower - 0.25 * width + 1.5 * width * i as f64 / 40.0;
        if (phi0 - ci.lower).abs() < 1e-4 || (phi0 - ci.upper).abs() < 1e-4 {
            continue;
        }
        let p = robust_lr_pvalue(&ds, 0, phi0, &opts).unwrap().p_two_sided;
        let inside = ci.lower < phi0 && phi0 < ci.upper;
        assert_eq!(inside, p > 0.1, "phi0 {phi0} p {p}");
    }
}

#[test]
fn wald_ci_uses_sandwich_se() {
    let ds = random_dataset(8, 50, 2);
    let f = fit(&ds, &FitOptions::default()).unwrap();
    let ci = robust_wald_ci(&f, 1, 0.95, Side::TwoSided).unwrap();
    let se = (f.v_hat[(1, 1)] / 50.0).sqrt();
    assert!((ci.upper - f.beta_hat[1] - 1.959_963_984_540_054 * se).abs() < 1e-10);
}

#[test]
fn one_sided_examples() {
    let (z, p) = one_sided_z(3.841459, 1.0, 1.0).unwrap();
    assert!((z - 1.96).abs() < 1e-4 && (p - 0.975).abs() < 1e-3);
    let (z, p) = one_sided_z(3.841459, 2.0, -1.0).unwrap();
    assert!((z + 1.386).abs() < 1e-3 && (p - 0.0829).abs() < 1e-3);
    assert_eq!(one_sided_z(0.0, 3.0, 1.0).unwrap(), (0.0, 0.5));
    assert!(one_sided_z(1.0, 0.0, 1.0).is_err());
}

#[test]
fn weighted_chi_square_matches_quadrature() {
    for w in [vec![0.5, 1.5], vec![1.0, 2.0, 3.0], vec![0.2, 4.0], vec![1.0, 1.0, 0.1]] {
        let ew = EigenWeights::new(w.clone()).unwrap();
        for x in [0.3, 1.0, 3.0, 6.0, 10.0, 25.0] {
            let p = wchisq_sf(x, &ew).unwrap();
            let q = wchisq_quadrature(x, &w);
            assert!((p - q).abs() < 1e-8, "w {w:?} x {x}: {p} vs {q}");
        }
    }
}

#[test]
fn weighted_chi_square_monte_carlo_route() {
    let ew = EigenWeights::new(vec![0.5, 1.5]).unwrap();
    let mc = wchisq_sf_with(3.0, &ew, TailMethod::MonteCarlo { draws: 200_000, seed: 3 }).unwrap();
    let exact = wchisq_sf(3.0, &ew).unwrap();
    let se = (exact * (1.0 - exact) / 200_000.0).sqrt();
    assert!((mc - exact).abs() < 4.0 * se);
}

#[test]
fn joint_test_uses_weighted_chi_square() {
    let ds = random_dataset(12, 50, 3);
    let opts = InferenceOptions::default();
    let t = robust_lr_pvalue_joint(&ds, &[0, 2], &[0.0, 0.0], &opts).unwrap();
    assert_eq!(t.weights.k(), 2);
    assert!(t.z.is_none() && t.p_less.is_none());
    assert!((t.p_two_sided - wchisq_sf(t.stat, &t.weights).unwrap()).abs() < 1e-15);
    // reduction: classical chi-square(2)
    let t = robust_lr_pvalue_joint(&ds, &[0, 2], &[0.0, 0.0], &InferenceOptions::model_based()).unwrap();
    assert!((t.p_two_sided - (-t.stat / 2.0).exp()).abs() < 1e-8);
}

#[test]
fn eigen_weights_invariant_to_nuisance_reparameterization() {
    let ds = random_dataset(31, 50, 3);
    let mixed: Vec<Observation> = ds
        .observations()
        .iter()
        .map(|o| {
            let z = &o.covariates;
            Observation::new(o.time, o.status, vec![z[0], 2.0 * z[1] + z[2], z[2] - 0.5 * z[1]])
        })
        .collect();
    let mixed = Dataset::new(mixed).unwrap();
    let a = fit(&ds, &FitOptions::default()).unwrap();
    let b = fit(&mixed, &FitOptions::default()).unwrap();
    let wa = eigen_weights(&a.v_hat, &a.a_hat, 1).unwrap();
    let wb = eigen_weights(&b.v_hat, &b.a_hat, 1).unwrap();
    assert!((wa.as_slice()[0] - wb.as_slice()[0]).abs() < 1e-10);
    // k = 1 weight is V_11 / (A^-1)_11
    let ainv = a.a_hat.clone().try_inverse().unwrap();
    assert!((wa.as_slice()[0] - a.v_hat[(0, 0)] / ainv[(0, 0)]).abs() < 1e-12);
}
