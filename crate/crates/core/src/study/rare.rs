//! Event-driven two-arm trial with few events: exact coverage by enumerating the
//! number of treated-arm events.
//!
//! With `E` events among thousands of subjects the at-risk ratios stay near one, so
//! the partial likelihood depends on the data essentially only through the count `D`
//! of treated events, and `D ~ Binomial(E, e^b / (1 + e^b))`.

use crate::cox::{fit, FitOptions};
use crate::data::{Dataset, Observation};
use crate::error::{CoxError, Result};
use crate::inference::{lr_ci_from_tester, robust_wald_ci, ConfInterval, InferenceOptions, Method, ProfileTester, Side};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RareTrialSpec {
    pub n_per_arm: usize,
    pub total_events: usize,
    /// True log hazard ratio (treated vs control).
    pub log_hr: f64,
    /// One-sided level of the upper bound is `1 - alpha`.
    pub alpha: f64,
    /// Only documents the setting; enumeration does not depend on it.
    pub baseline_rate: f64,
}

impl Default for RareTrialSpec {
    fn default() -> Self {
        Self {
            n_per_arm: 2500,
            total_events: 20,
            log_hr: 0.0,
            alpha: 0.025,
            baseline_rate: 0.004,
        }
    }
}

impl RareTrialSpec {
    pub fn check(&self) -> Result<()> {
        if self.total_events == 0 || self.total_events > 2 * self.n_per_arm {
            return Err(CoxError::InvalidArgument(format!(
                "total_events must lie in 1..={}, got {}",
                2 * self.n_per_arm,
                self.total_events
            )));
        }
        if !(self.baseline_rate > 0.0) {
            return Err(CoxError::InvalidArgument("baseline_rate must be > 0".into()));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(CoxError::InvalidArgument("alpha must lie in (0, 1)".into()));
        }
        if !self.log_hr.is_finite() {
            return Err(CoxError::InvalidArgument("log_hr must be finite".into()));
        }
        Ok(())
    }
}

/// `b d - sum_i log(r_i + e^b)`, with `r_i` the control/treated at-risk ratio at event `i`.
pub fn rare_profile_loglik(d: usize, risk_ratios: &[f64], beta: f64) -> f64 {
    let eb = beta.exp();
    beta * d as f64 - risk_ratios.iter().map(|r| (r + eb).ln()).sum::<f64>()
}

/// Whether event `k` (1-based, of `e`) falls in the treated arm when `d` of the `e`
/// events are treated; spreads treated events evenly over the event sequence.
pub fn is_treated_event(k: usize, d: usize, e: usize) -> bool {
    (k * d) / e > ((k - 1) * d) / e
}

/// Events at times `1..=E`, arms interleaved proportionally, everyone else censored at `E + 1`.
/// Covariate is the treatment indicator.
pub fn build_rare_dataset(spec: &RareTrialSpec, d: usize) -> Result<Dataset> {
    spec.check()?;
    let e = spec.total_events;
    if d > e {
        return Err(CoxError::InvalidArgument(format!("d must lie in 0..={e}, got {d}")));
    }
    if d > spec.n_per_arm || e - d > spec.n_per_arm {
        return Err(CoxError::InvalidArgument("more events than subjects in an arm".into()));
    }
    let mut obs = Vec::with_capacity(2 * spec.n_per_arm);
    let censor = (e + 1) as f64;
    for k in 1..=e {
        let z = if is_treated_event(k, d, e) { 1.0 } else { 0.0 };
        obs.push(Observation::new(k as f64, 1, vec![z]));
    }
    for _ in 0..spec.n_per_arm - d {
        obs.push(Observation::new(censor, 0, vec![1.0]));
    }
    for _ in 0..spec.n_per_arm - (e - d) {
        obs.push(Observation::new(censor, 0, vec![0.0]));
    }
    Dataset::new(obs)
}

/// Control/treated at-risk ratios `n_i / m_i` at each event of [`build_rare_dataset`].
pub fn rare_risk_ratios(spec: &RareTrialSpec, d: usize) -> Vec<f64> {
    let e = spec.total_events;
    let (mut treated, mut control) = (spec.n_per_arm as f64, spec.n_per_arm as f64);
    (1..=e)
        .map(|k| {
            let r = control / treated;
            if is_treated_event(k, d, e) {
                treated -= 1.0;
            } else {
                control -= 1.0;
            }
            r
        })
        .collect()
}

/// Binomial(E, pi) probabilities for `d = 0..=E`, computed in log space.
pub fn binomial_pmf(e: usize, pi: f64) -> Vec<f64> {
    let ln_fact: Vec<f64> = std::iter::once(0.0)
        .chain((1..=e).scan(0.0, |acc, k| {
            *acc += (k as f64).ln();
            Some(*acc)
        }))
        .collect();
    (0..=e)
        .map(|d| {
            let ln_c = ln_fact[e] - ln_fact[d] - ln_fact[e - d];
            let ln_p = if d == 0 { 0.0 } else { d as f64 * pi.ln() };
            let ln_q = if d == e { 0.0 } else { (e - d) as f64 * (-pi).ln_1p() };
            (ln_c + ln_p + ln_q).exp()
        })
        .collect()
}

/// Upper one-sided bound `(-inf, U(d)]` at level `1 - alpha` on the log-HR scale.
///
/// For the Wald method a separated fit has no finite estimate; its limiting interval is
/// used instead: `d = 0` sends the whole interval to `-inf`, `d = E` gives `U = +inf`.
pub fn rare_upper_bound(spec: &RareTrialSpec, d: usize, method: Method) -> Result<ConfInterval> {
    let ds = build_rare_dataset(spec, d)?;
    let level = 1.0 - spec.alpha;
    let full = fit(&ds, &FitOptions::default())?;
    match method {
        Method::RobustWald => {
            if full.is_separated() {
                let b = full.beta_hat[0];
                let edge = if b < 0.0 { f64::NEG_INFINITY } else { f64::INFINITY };
                return Ok(ConfInterval {
                    lower: f64::NEG_INFINITY,
                    upper: edge,
                    level,
                    side: Side::Upper,
                    method,
                });
            }
            robust_wald_ci(&full, 0, level, Side::Upper)
        }
        Method::RobustLr | Method::PlainLr => {
            let opts = if method == Method::PlainLr {
                InferenceOptions::model_based()
            } else {
                InferenceOptions::default()
            };
            let tester = ProfileTester::from_fit(&ds, 0, full, &opts)?;
            lr_ci_from_tester(&tester, level, Side::Upper)
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RareCase {
    pub d: usize,
    pub probability: f64,
    pub ci: ConfInterval,
    pub covered: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RareCoverage {
    pub coverage: f64,
    pub per_d: Vec<RareCase>,
}

/// Bounds for every `d in 0..=E`; they do not depend on the true effect.
pub fn rare_bounds(spec: &RareTrialSpec, method: Method) -> Result<Vec<ConfInterval>> {
    spec.check()?;
    (0..=spec.total_events).map(|d| rare_upper_bound(spec, d, method)).collect()
}

/// Coverage at `log_hr` given precomputed bounds from [`rare_bounds`].
pub fn coverage_from_bounds(bounds: &[ConfInterval], log_hr: f64) -> RareCoverage {
    let e = bounds.len() - 1;
    let pi = 1.0 / (1.0 + (-log_hr).exp());
    let probs = binomial_pmf(e, pi);
    let per_d: Vec<RareCase> = bounds
        .iter()
        .zip(&probs)
        .enumerate()
        .map(|(d, (ci, &p))| RareCase {
            d,
            probability: p,
            ci: *ci,
            covered: ci.contains(log_hr),
        })
        .collect();
    let coverage = per_d.iter().filter(|c| c.covered).map(|c| c.probability).sum();
    RareCoverage { coverage, per_d }
}

pub fn rare_coverage(spec: &RareTrialSpec, method: Method) -> Result<RareCoverage> {
    Ok(coverage_from_bounds(&rare_bounds(spec, method)?, spec.log_hr))
}

/// `points` hazard ratios spaced evenly on the log scale over `[lo, hi]`.
pub fn hr_grid(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    match points {
        0 => vec![],
        1 => vec![lo],
        _ => (0..points)
            .map(|i| (lo.ln() + (hi.ln() - lo.ln()) * i as f64 / (points - 1) as f64).exp())
            .collect(),
    }
}

/// Coverage of the upper bound across true hazard ratios, as `(hr, coverage)`.
pub fn rare_sweep(spec: &RareTrialSpec, method: Method, hrs: &[f64]) -> Result<Vec<(f64, f64)>> {
    let bounds = rare_bounds(spec, method)?;
    Ok(hrs
        .iter()
        .map(|&hr| (hr, coverage_from_bounds(&bounds, hr.ln()).coverage))
        .collect())
}
