mod common;

use robcox::cox::{fit, partial_loglik, FitOptions};
use robcox::inference::{robust_wald_ci, InferenceOptions, Method, Side};
use robcox::study::table1::{draw_time, gen_exponential_ph, replicate_rng, run_replicates, summarize_replicates};
use robcox::study::*;

use common::golden_max;

#[test]
fn row5_times_are_exponential_given_covariates() {
    let mut rng = replicate_rng(17, 0);
    let z = [0.3, 0.7, 0.0];
    let rate = (1.0f64 + 0.5 * 0.7).exp();
    let n = 10_000;
    let mut t: Vec<f64> = (0..n).map(|_| draw_time(&mut rng, 5, z)).collect();
    t.sort_by(f64::total_cmp);
    let d = t
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = 1.0 - (-rate * x).exp();
            (f - i as f64 / n as f64).max((i + 1) as f64 / n as f64 - f)
        })
        .fold(0.0, f64::max);
    // asymptotic 1% critical value of the Kolmogorov distribution
    assert!(d < 1.628 / (n as f64).sqrt(), "KS statistic {d}");
}

#[test]
fn coverage_target_is_zero_in_every_row() {
    for row in 1..=12u8 {
        let s = ScenarioSpec::new(row, 100, 99).unwrap();
        let res = run_replicates(|r| gen_table1(&s, r), &[Method::RobustWald], 1000, s.seed, &Default::default());
        let rep = summarize_replicates(&s, &res, 0, Method::RobustWald, 0.0);
        let mc_se = rep.sd_estimate / ((rep.reps + rep.excluded) as f64).sqrt();
        assert!(rep.mean_estimate.abs() < 3.0 * mc_se, "row {row}: mean {} se {mc_se}", rep.mean_estimate);
    }
}

#[test]
fn model_based_wald_covers_under_correct_model() {
    let s = ScenarioSpec::new(1, 100, 5).unwrap();
    let res = run_replicates(
        |r| gen_exponential_ph(r, 100, &[0.5, -0.5], 5.0),
        &[Method::RobustWald],
        1000,
        5,
        &InferenceOptions::model_based(),
    );
    let rep = summarize_replicates(&s, &res, 0, Method::RobustWald, 0.5);
    assert!((rep.coverage - 0.95).abs() < 0.025, "coverage {}", rep.coverage);
}

#[test]
fn coverage_reports_are_deterministic() {
    let s = ScenarioSpec::new(10, 50, 123).unwrap();
    let a = mc_coverage_methods(&s, &[Method::RobustWald, Method::RobustLr], 40).unwrap();
    let b = mc_coverage_methods(&s, &[Method::RobustWald, Method::RobustLr], 40).unwrap();
    assert_eq!(a, b);
    for r in &a {
        assert_eq!(r.mc_se, (r.coverage * (1.0 - r.coverage) / r.reps as f64).sqrt());
        assert_eq!(r.reps + r.excluded, 40);
    }
    assert!(mc_coverage(&s, Method::RobustWald, 0).is_err());
}

#[test]
fn rare_dataset_fit_matches_profile_formula() {
    let spec = RareTrialSpec::default();
    let ds = build_rare_dataset(&spec, 4).unwrap();
    let f = fit(&ds, &FitOptions::default()).unwrap();
    let r = rare_risk_ratios(&spec, 4);
    let oracle = golden_max(|b| rare_profile_loglik(4, &r, b), -5.0, 2.0, 1e-11);
    assert!((f.beta_hat[0] - oracle).abs() < 1e-6);
    assert!((f.beta_hat[0] - (4.0f64 / 16.0).ln()).abs() < 0.02);
    let flat = vec![1.0; 20];
    let b = golden_max(|b| rare_profile_loglik(4, &flat, b), -5.0, 2.0, 1e-11);
    assert!((b - (4.0f64 / 16.0).ln()).abs() < 1e-6);
}

#[test]
fn rare_profile_agrees_with_partial_likelihood() {
    let spec = RareTrialSpec::default();
    for d in 1..20 {
        let ds = build_rare_dataset(&spec, d).unwrap();
        let r = rare_risk_ratios(&spec, d);
        let c = partial_loglik(&ds, &[0.0]).unwrap() - rare_profile_loglik(d, &r, 0.0);
        for b in [-4.0, -1.0, 0.5, 2.0] {
            let diff = partial_loglik(&ds, &[b]).unwrap() - rare_profile_loglik(d, &r, b) - c;
            assert!(diff.abs() < 1e-8);
        }
    }
}

#[test]
fn all_treated_or_no_treated_events_separate() {
    let spec = RareTrialSpec::default();
    for d in [0, 20] {
        let f = fit(&build_rare_dataset(&spec, d).unwrap(), &FitOptions::default()).unwrap();
        assert!(f.separation[0] && !f.converged);
    }
}

#[test]
fn enumeration_is_complete_and_handles_endpoints() {
    for m in [Method::RobustWald, Method::RobustLr, Method::PlainLr] {
        let spec = RareTrialSpec {
            log_hr: -0.9,
            ..Default::default()
        };
        let cov = rare_coverage(&spec, m).unwrap();
        assert_eq!(cov.per_d.len(), 21);
        assert!((cov.per_d.iter().map(|c| c.probability).sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(!cov.per_d[0].covered);
        assert!(cov.per_d[20].covered && cov.per_d[20].ci.upper == f64::INFINITY);
        assert!((0.0..=1.0).contains(&cov.coverage));
    }
}

#[test]
fn null_coverage_reduces_to_binomial_sum() {
    let spec = RareTrialSpec::default();
    for m in [Method::RobustWald, Method::RobustLr] {
        let cov = rare_coverage(&spec, m).unwrap();
        let mut expected = 0.0;
        let mut c = 1.0f64; // C(20, d)
        for (d, case) in cov.per_d.iter().enumerate() {
            if d > 0 {
                c = c * (21 - d) as f64 / d as f64;
            }
            if case.ci.upper >= 0.0 {
                expected += c / 1_048_576.0;
            }
        }
        assert!((cov.coverage - expected).abs() < 1e-14);
    }
}

#[test]
fn hptn_curves_have_the_expected_shape() {
    let recon = TrialReconstruction::default();
    let lr = hptn_curve(&recon, 1..=10, 0.00066, Method::RobustLr).unwrap();
    assert_eq!(lr.len(), 10);
    assert!(lr.windows(2).all(|w| w[1].upper_hr >= w[0].upper_hr));
    let wald = hptn_curve(&recon, 1..=10, 0.00066, Method::RobustWald).unwrap();
    let dips = wald.windows(2).any(|w| w[1].upper_hr < w[0].upper_hr);
    let rises = wald.windows(2).any(|w| w[1].upper_hr > w[0].upper_hr);
    assert!(dips && rises);
    let zero = hptn_curve(&recon, 0..=0, 0.05, Method::RobustWald).unwrap();
    assert_eq!(zero[0].upper_hr, 0.0);
}

#[test]
fn four_versus_thirty_six_events() {
    let ds = TrialReconstruction::default().dataset(4).unwrap();
    let f = fit(&ds, &FitOptions::default()).unwrap();
    let ci = robust_wald_ci(&f, 0, 0.95, Side::TwoSided).unwrap();
    assert!((f.beta_hat[0].exp() - 0.12).abs() < 0.015);
    assert!((ci.lower.exp() - 0.05).abs() < 0.02);
    assert!((ci.upper.exp() - 0.31).abs() < 0.02);
}

#[test]
fn configs_round_trip_through_text() {
    let s = ScenarioSpec::new(12, 50, 8).unwrap();
    assert_eq!(ScenarioSpec::from_kv(&s.to_kv()).unwrap(), s);
    let t = TrialReconstruction::from_kv("treated_event_weeks = 5, 13\ncontrol_events = 10\n").unwrap();
    assert_eq!(t.control_event_weeks.len(), 10);
    assert_eq!(t.treated_weeks(3).unwrap(), vec![5.0, 13.0, 21.0]);
}
