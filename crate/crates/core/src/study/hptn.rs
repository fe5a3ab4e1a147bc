//! Synthetic two-arm prevention trial: how the upper hazard-ratio bound moves as
//! treated-arm events are added one scheduled visit at a time.

use std::ops::RangeInclusive;

use crate::cox::{fit, FitOptions};
use crate::data::{Dataset, Observation};
use crate::error::{CoxError, Result};
use crate::inference::{lr_ci_from_tester, robust_wald_ci, InferenceOptions, Method, ProfileTester, Side};

/// Spacing of the treated-arm visit schedule beyond the listed weeks.
pub const VISIT_INTERVAL_WEEKS: f64 = 8.0;

#[derive(Debug, Clone, PartialEq)]
pub struct TrialReconstruction {
    pub n_per_arm: usize,
    pub control_events: usize,
    pub treated_event_weeks: Vec<f64>,
    pub control_event_weeks: Vec<f64>,
    pub followup_weeks: f64,
}

impl Default for TrialReconstruction {
    /// 1612 per arm over 110 weeks; 36 control infections spread evenly, treated
    /// infections at the injection visits (weeks 9, 17, 25, 33, ...).
    fn default() -> Self {
        let followup = 110.0;
        let control_events = 36;
        Self {
            n_per_arm: 1612,
            control_events,
            treated_event_weeks: vec![9.0, 17.0, 25.0, 33.0],
            control_event_weeks: (1..=control_events)
                .map(|k| followup * k as f64 / (control_events + 1) as f64)
                .collect(),
            followup_weeks: followup,
        }
    }
}

fn strictly_ascending(v: &[f64]) -> bool {
    v.windows(2).all(|w| w[0] < w[1])
}

impl TrialReconstruction {
    pub fn check(&self) -> Result<()> {
        let bad = |m: &str| Err(CoxError::InvalidArgument(m.to_string()));
        if !(self.followup_weeks > 0.0) {
            return bad("followup_weeks must be > 0");
        }
        if self.control_event_weeks.len() != self.control_events {
            return bad("control_event_weeks must list control_events entries");
        }
        if self.control_events > self.n_per_arm {
            return bad("more control events than control subjects");
        }
        for v in [&self.treated_event_weeks, &self.control_event_weeks] {
            if !strictly_ascending(v) || v.iter().any(|&w| !(w > 0.0 && w < self.followup_weeks)) {
                return bad("event weeks must be strictly ascending within (0, followup_weeks)");
            }
        }
        Ok(())
    }

    /// Weeks of the first `d` treated events, extending the listed schedule by
    /// [`VISIT_INTERVAL_WEEKS`].
    pub fn treated_weeks(&self, d: usize) -> Result<Vec<f64>> {
        let mut weeks: Vec<f64> = self.treated_event_weeks.iter().take(d).cloned().collect();
        let mut last = weeks.last().cloned().unwrap_or(0.0);
        if weeks.is_empty() && d > 0 {
            last = 1.0 - VISIT_INTERVAL_WEEKS;
        }
        while weeks.len() < d {
            last += VISIT_INTERVAL_WEEKS;
            weeks.push(last);
        }
        if weeks.iter().any(|&w| w >= self.followup_weeks) || d > self.n_per_arm {
            return Err(CoxError::InvalidArgument(format!(
                "{d} treated events do not fit in {} weeks of follow-up",
                self.followup_weeks
            )));
        }
        Ok(weeks)
    }

    /// `d` treated events, the control events, everyone else censored at end of follow-up.
    /// Covariate is the treatment indicator.
    pub fn dataset(&self, d: usize) -> Result<Dataset> {
        self.check()?;
        let treated = self.treated_weeks(d)?;
        let end = self.followup_weeks;
        let mut obs = Vec::with_capacity(2 * self.n_per_arm);
        obs.extend(treated.iter().map(|&w| Observation::new(w, 1, vec![1.0])));
        obs.extend((d..self.n_per_arm).map(|_| Observation::new(end, 0, vec![1.0])));
        obs.extend(self.control_event_weeks.iter().map(|&w| Observation::new(w, 1, vec![0.0])));
        obs.extend((self.control_events..self.n_per_arm).map(|_| Observation::new(end, 0, vec![0.0])));
        Dataset::new(obs)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HptnPoint {
    pub d: usize,
    /// `exp` of the upper one-sided `1 - alpha/2` bound; 0 when the Wald interval
    /// degenerates at `d = 0`.
    pub upper_hr: f64,
}

/// Upper hazard-ratio bound for each treated-event count in `d_range`, at two-sided `alpha`.
pub fn hptn_curve(
    recon: &TrialReconstruction,
    d_range: RangeInclusive<usize>,
    alpha: f64,
    method: Method,
) -> Result<Vec<HptnPoint>> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(CoxError::InvalidArgument(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    let level = 1.0 - alpha / 2.0;
    d_range
        .map(|d| {
            let ds = recon.dataset(d)?;
            let full = fit(&ds, &FitOptions::default())?;
            let upper = match method {
                Method::RobustWald if full.is_separated() => {
                    if full.beta_hat[0] < 0.0 {
                        f64::NEG_INFINITY
                    } else {
                        f64::INFINITY
                    }
                }
                Method::RobustWald => robust_wald_ci(&full, 0, level, Side::Upper)?.upper,
                Method::RobustLr | Method::PlainLr => {
                    let opts = if method == Method::PlainLr {
                        InferenceOptions::model_based()
                    } else {
                        InferenceOptions::default()
                    };
                    let tester = ProfileTester::from_fit(&ds, 0, full, &opts)?;
                    lr_ci_from_tester(&tester, level, Side::Upper)?.upper
                }
            };
            Ok(HptnPoint {
                d,
                upper_hr: upper.exp(),
            })
        })
        .collect()
}
