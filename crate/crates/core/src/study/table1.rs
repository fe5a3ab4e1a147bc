//! Monte Carlo coverage of intervals for `beta_1` under twelve misspecified models.
//!
//! Every replicate fits the working model `lambda_0(t) exp(b1 Z1 + b2 Z2)` to data from
//! one of the true models below (no censoring). Z1 enters each true model only through
//! `Z1^2` or not at all, and is independent of the other covariates, so the limiting
//! value of `b1` is 0 by the `Z1 -> -Z1` symmetry; 0 is the coverage target.
//!
//! | row | true model                          | covariates truncated at |
//! |-----|-------------------------------------|-------------------------|
//! | 1   | hazard exp(.2 Z2 + Z3)              | 5                       |
//! | 2   | hazard exp(.2 Z2 + Z1^2)            | 5                       |
//! | 3   | hazard exp(Z1^2)                    | 5                       |
//! | 4   | hazard exp(.2 Z2 + Z1^2 + Z3)       | 5                       |
//! | 5   | hazard exp(1 + .5 Z2)               | 1.96                    |
//! | 6   | hazard exp(1 + .5 Z2 + Z1^2)        | 1.96                    |
//! | 7   | hazard log(2 + .5 Z2)               | 1.96                    |
//! | 8   | hazard log(2 + .5 Z2 + Z1^2)        | 1.96                    |
//! | 9   | log T = -.5 Z2 + N(0, .5^2)         | 5                       |
//! | 10  | log T = -.5 Z2 - Z1^2 + N(0, .5^2)  | 5                       |
//! | 11  | T = exp(-.5 Z2) + Exp(1)            | 5                       |
//! | 12  | T = exp(-.5 Z2 - Z1^2) + Exp(1)     | 5                       |

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Exp1, StandardNormal};
use rayon::prelude::*;

use crate::cox::{fit, FitOptions};
use crate::data::{Dataset, Observation};
use crate::error::{CoxError, Result};
use crate::inference::{
    lr_ci_from_tester, robust_wald_ci, ConfInterval, InferenceOptions, Method, ProfileTester, Side, VarianceMode,
};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScenarioSpec {
    pub row_id: u8,
    pub n: usize,
    pub truncation: f64,
    pub seed: u64,
}

impl ScenarioSpec {
    pub fn new(row_id: u8, n: usize, seed: u64) -> Result<Self> {
        Ok(Self {
            row_id,
            n,
            truncation: truncation_for_row(row_id)?,
            seed,
        })
    }
}

pub fn truncation_for_row(row_id: u8) -> Result<f64> {
    match row_id {
        1..=4 | 9..=12 => Ok(5.0),
        5..=8 => Ok(1.96),
        _ => Err(CoxError::InvalidArgument(format!("table row must be 1..=12, got {row_id}"))),
    }
}

/// Standard normal truncated to `[-bound, bound]`, by rejection.
pub fn truncated_normal<R: Rng + ?Sized>(rng: &mut R, bound: f64) -> f64 {
    loop {
        let z: f64 = rng.sample(StandardNormal);
        if z.abs() <= bound {
            return z;
        }
    }
}

/// Constant hazard of rows 1-8 given `(Z1, Z2, Z3)`.
pub fn row_hazard(row_id: u8, z: [f64; 3]) -> Option<f64> {
    let [z1, z2, z3] = z;
    let rate = match row_id {
        1 => (0.2 * z2 + z3).exp(),
        2 => (0.2 * z2 + z1 * z1).exp(),
        3 => (z1 * z1).exp(),
        4 => (0.2 * z2 + z1 * z1 + z3).exp(),
        5 => (1.0 + 0.5 * z2).exp(),
        6 => (1.0 + 0.5 * z2 + z1 * z1).exp(),
        7 => (2.0 + 0.5 * z2).ln(),
        8 => (2.0 + 0.5 * z2 + z1 * z1).ln(),
        _ => return None,
    };
    Some(rate)
}

/// Draws a failure time for `row_id` given covariates `(Z1, Z2, Z3)`.
pub fn draw_time<R: Rng + ?Sized>(rng: &mut R, row_id: u8, z: [f64; 3]) -> f64 {
    let [z1, z2, _] = z;
    if let Some(rate) = row_hazard(row_id, z) {
        let e: f64 = rng.sample(Exp1);
        return e / rate;
    }
    match row_id {
        9 | 10 => {
            let phi = 0.5 * rng.sample::<f64, _>(StandardNormal);
            let shift = if row_id == 10 { z1 * z1 } else { 0.0 };
            (-0.5 * z2 - shift + phi).exp()
        }
        11 | 12 => {
            let shift = if row_id == 12 { z1 * z1 } else { 0.0 };
            let eps: f64 = rng.sample(Exp1);
            (-0.5 * z2 - shift).exp() + eps
        }
        _ => panic!("table row must be 1..=12, got {row_id}"),
    }
}

/// One uncensored replicate with covariates `(Z1, Z2)` for the working model.
pub fn gen_table1<R: Rng + ?Sized>(scenario: &ScenarioSpec, rng: &mut R) -> Dataset {
    let bound = scenario.truncation;
    let uses_z3 = matches!(scenario.row_id, 1..=4);
    let obs = (0..scenario.n)
        .map(|_| {
            let z1 = truncated_normal(rng, bound);
            let z2 = truncated_normal(rng, bound);
            let z3 = if uses_z3 { truncated_normal(rng, bound) } else { 0.0 };
            let t = draw_time(rng, scenario.row_id, [z1, z2, z3]);
            Observation::new(t, 1, vec![z1, z2])
        })
        .collect();
    Dataset::new(obs).expect("generated observations satisfy the dataset invariants")
}

/// Uncensored data from a correctly specified exponential PH model with
/// independent truncated-normal covariates.
pub fn gen_exponential_ph<R: Rng + ?Sized>(rng: &mut R, n: usize, beta: &[f64], bound: f64) -> Dataset {
    let obs = (0..n)
        .map(|_| {
            let z: Vec<f64> = beta.iter().map(|_| truncated_normal(rng, bound)).collect();
            let eta: f64 = z.iter().zip(beta).map(|(a, b)| a * b).sum();
            let e: f64 = rng.sample(Exp1);
            Observation::new(e / eta.exp(), 1, z)
        })
        .collect();
    Dataset::new(obs).expect("generated observations satisfy the dataset invariants")
}

/// Random stream for replicate `rep` of a study seeded with `seed`.
pub fn replicate_rng(seed: u64, rep: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(rep as u64);
    rng
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoverageReport {
    pub scenario: ScenarioSpec,
    pub method: Method,
    pub coverage: f64,
    pub mean_width: f64,
    /// Replications that produced an interval.
    pub reps: usize,
    /// Replications dropped because the fit or the interval failed.
    pub excluded: usize,
    pub mc_se: f64,
    pub mean_estimate: f64,
    pub sd_estimate: f64,
}

/// Outcome of one replicate: the point estimate and one interval per method.
#[derive(Debug, Clone)]
pub struct Replicate {
    pub estimate: f64,
    pub intervals: Vec<Option<ConfInterval>>,
}

fn interval_for(
    ds: &Dataset,
    method: Method,
    full: &crate::cox::FitResult,
    level: f64,
    opts: &InferenceOptions,
) -> Result<ConfInterval> {
    match method {
        Method::RobustWald => match opts.variance {
            VarianceMode::Robust => robust_wald_ci(full, 0, level, Side::TwoSided),
            VarianceMode::ModelBased => robust_wald_ci(&full.with_model_based_variance()?, 0, level, Side::TwoSided),
        },
        Method::RobustLr | Method::PlainLr => {
            let mut o = opts.clone();
            if method == Method::PlainLr {
                o.variance = VarianceMode::ModelBased;
            }
            let tester = ProfileTester::from_fit(ds, 0, full.clone(), &o)?;
            lr_ci_from_tester(&tester, level, Side::TwoSided)
        }
    }
}

/// Runs `reps` replicates in parallel; replicate `r` draws from
/// [`replicate_rng`]`(seed, r)` so results do not depend on scheduling.
pub fn run_replicates<G>(gen: G, methods: &[Method], reps: usize, seed: u64, opts: &InferenceOptions) -> Vec<Option<Replicate>>
where
    G: Fn(&mut ChaCha8Rng) -> Dataset + Sync,
{
    (0..reps)
        .into_par_iter()
        .map(|r| {
            let mut rng = replicate_rng(seed, r);
            let ds = gen(&mut rng);
            let full = fit(&ds, &FitOptions::default()).ok()?;
            if !full.converged || full.is_separated() {
                return None;
            }
            let intervals = methods
                .iter()
                .map(|&m| interval_for(&ds, m, &full, 0.95, opts).ok())
                .collect();
            Some(Replicate {
                estimate: full.beta_hat[0],
                intervals,
            })
        })
        .collect()
}

/// Reduces replicate outcomes to a report for `methods[k]`, scoring coverage of `target`.
pub fn summarize_replicates(
    scenario: &ScenarioSpec,
    results: &[Option<Replicate>],
    k: usize,
    method: Method,
    target: f64,
) -> CoverageReport {
    let mut covered = 0usize;
    let mut used = 0usize;
    let mut width = 0.0;
    let mut est = Vec::new();
    for rep in results.iter().flatten() {
        est.push(rep.estimate);
        if let Some(ci) = rep.intervals[k] {
            used += 1;
            width += ci.width();
            if ci.contains(target) {
                covered += 1;
            }
        }
    }
    let coverage = if used > 0 { covered as f64 / used as f64 } else { f64::NAN };
    let mean_estimate = est.iter().sum::<f64>() / est.len().max(1) as f64;
    let sd_estimate = if est.len() > 1 {
        (est.iter().map(|e| (e - mean_estimate).powi(2)).sum::<f64>() / (est.len() - 1) as f64).sqrt()
    } else {
        f64::NAN
    };
    CoverageReport {
        scenario: *scenario,
        method,
        coverage,
        mean_width: width / used.max(1) as f64,
        reps: used,
        excluded: results.len() - used,
        mc_se: (coverage * (1.0 - coverage) / used.max(1) as f64).sqrt(),
        mean_estimate,
        sd_estimate,
    }
}

/// Coverage of 95% intervals for `beta_1 = 0` under one table row, for several methods
/// evaluated on the same replicates.
pub fn mc_coverage_methods(scenario: &ScenarioSpec, methods: &[Method], reps: usize) -> Result<Vec<CoverageReport>> {
    if reps == 0 {
        return Err(CoxError::InvalidArgument("reps must be >= 1".into()));
    }
    truncation_for_row(scenario.row_id)?;
    let results = run_replicates(
        |rng| gen_table1(scenario, rng),
        methods,
        reps,
        scenario.seed,
        &InferenceOptions::default(),
    );
    Ok(methods
        .iter()
        .enumerate()
        .map(|(k, &m)| summarize_replicates(scenario, &results, k, m, 0.0))
        .collect())
}

pub fn mc_coverage(scenario: &ScenarioSpec, method: Method, reps: usize) -> Result<CoverageReport> {
    Ok(mc_coverage_methods(scenario, &[method], reps)?.remove(0))
}
