//! Plain-text `key = value` records for study settings.
//!
//! One entry per line, `#` starts a comment, lists are comma separated. Unknown keys
//! are rejected so typos do not silently fall back to defaults; missing keys keep
//! the default value.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::str::FromStr;

use super::hptn::TrialReconstruction;
use super::rare::RareTrialSpec;
use super::table1::ScenarioSpec;
use crate::error::{CoxError, Result};

pub trait KeyValue: Sized {
    fn to_kv(&self) -> String;
    fn from_kv(text: &str) -> Result<Self>;
}

/// Parses `key = value` lines into a map (later keys override earlier ones).
pub fn parse_kv(text: &str) -> Result<BTreeMap<String, String>> {
    let mut map = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| CoxError::Parse {
            row: i + 1,
            message: format!("expected `key = value`, got `{line}`"),
        })?;
        map.insert(k.trim().to_string(), v.trim().to_string());
    }
    Ok(map)
}

struct Fields {
    map: BTreeMap<String, String>,
}

impl Fields {
    fn new(text: &str, allowed: &[&str]) -> Result<Self> {
        let map = parse_kv(text)?;
        if let Some(k) = map.keys().find(|k| !allowed.contains(&k.as_str())) {
            return Err(CoxError::InvalidArgument(format!("unknown config key `{k}`")));
        }
        Ok(Self { map })
    }

    fn get<T: FromStr>(&self, key: &str, default: T) -> Result<T> {
        match self.map.get(key) {
            None => Ok(default),
            Some(v) => v
                .parse()
                .map_err(|_| CoxError::InvalidArgument(format!("config key `{key}`: cannot parse `{v}`"))),
        }
    }

    fn list(&self, key: &str, default: Vec<f64>) -> Result<Vec<f64>> {
        match self.map.get(key) {
            None => Ok(default),
            Some(v) if v.is_empty() => Ok(vec![]),
            Some(v) => v
                .split(',')
                .map(|s| {
                    s.trim()
                        .parse()
                        .map_err(|_| CoxError::InvalidArgument(format!("config key `{key}`: cannot parse `{s}`")))
                })
                .collect(),
        }
    }
}

fn join(v: &[f64]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(", ")
}

impl KeyValue for ScenarioSpec {
    fn to_kv(&self) -> String {
        format!("row = {}\nn = {}\ntruncation = {}\nseed = {}\n", self.row_id, self.n, self.truncation, self.seed)
    }

    /// `truncation`, if present, must agree with the row.
    fn from_kv(text: &str) -> Result<Self> {
        let f = Fields::new(text, &["row", "n", "truncation", "seed"])?;
        let spec = ScenarioSpec::new(f.get("row", 1u8)?, f.get("n", 100usize)?, f.get("seed", 1u64)?)?;
        let t: f64 = f.get("truncation", spec.truncation)?;
        if t != spec.truncation {
            return Err(CoxError::InvalidArgument(format!(
                "truncation {t} does not match row {} (expected {})",
                spec.row_id, spec.truncation
            )));
        }
        Ok(spec)
    }
}

impl KeyValue for RareTrialSpec {
    fn to_kv(&self) -> String {
        format!(
            "n_per_arm = {}\ntotal_events = {}\nlog_hr = {}\nalpha = {}\nbaseline_rate = {}\n",
            self.n_per_arm, self.total_events, self.log_hr, self.alpha, self.baseline_rate
        )
    }

    fn from_kv(text: &str) -> Result<Self> {
        let f = Fields::new(text, &["n_per_arm", "total_events", "log_hr", "alpha", "baseline_rate"])?;
        let d = RareTrialSpec::default();
        let spec = RareTrialSpec {
            n_per_arm: f.get("n_per_arm", d.n_per_arm)?,
            total_events: f.get("total_events", d.total_events)?,
            log_hr: f.get("log_hr", d.log_hr)?,
            alpha: f.get("alpha", d.alpha)?,
            baseline_rate: f.get("baseline_rate", d.baseline_rate)?,
        };
        spec.check()?;
        Ok(spec)
    }
}

impl KeyValue for TrialReconstruction {
    fn to_kv(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "n_per_arm = {}", self.n_per_arm);
        let _ = writeln!(s, "control_events = {}", self.control_events);
        let _ = writeln!(s, "followup_weeks = {}", self.followup_weeks);
        let _ = writeln!(s, "treated_event_weeks = {}", join(&self.treated_event_weeks));
        let _ = writeln!(s, "control_event_weeks = {}", join(&self.control_event_weeks));
        s
    }

    /// Changing `control_events` or `followup_weeks` without listing the control
    /// weeks re-spreads them evenly over follow-up.
    fn from_kv(text: &str) -> Result<Self> {
        let f = Fields::new(
            text,
            &["n_per_arm", "control_events", "followup_weeks", "treated_event_weeks", "control_event_weeks"],
        )?;
        let d = TrialReconstruction::default();
        let control_events = f.get("control_events", d.control_events)?;
        let followup_weeks = f.get("followup_weeks", d.followup_weeks)?;
        let even: Vec<f64> = (1..=control_events)
            .map(|k| followup_weeks * k as f64 / (control_events + 1) as f64)
            .collect();
        let recon = TrialReconstruction {
            n_per_arm: f.get("n_per_arm", d.n_per_arm)?,
            control_events,
            treated_event_weeks: f.list("treated_event_weeks", d.treated_event_weeks)?,
            control_event_weeks: f.list("control_event_weeks", even)?,
            followup_weeks,
        };
        recon.check()?;
        Ok(recon)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trips() {
        let s = ScenarioSpec::new(6, 50, 42).unwrap();
        assert_eq!(ScenarioSpec::from_kv(&s.to_kv()).unwrap(), s);
        let r = RareTrialSpec {
            log_hr: -0.7,
            ..Default::default()
        };
        assert_eq!(RareTrialSpec::from_kv(&r.to_kv()).unwrap(), r);
        let t = TrialReconstruction::default();
        assert_eq!(TrialReconstruction::from_kv(&t.to_kv()).unwrap(), t);
    }

    #[test]
    fn comments_defaults_and_errors() {
        let s = ScenarioSpec::from_kv("# table row\nrow = 9  # log-normal\n").unwrap();
        assert_eq!((s.row_id, s.n, s.truncation), (9, 100, 5.0));
        assert!(ScenarioSpec::from_kv("row = 5\ntruncation = 5").is_err());
        assert!(ScenarioSpec::from_kv("rows = 5").is_err());
        assert!(RareTrialSpec::from_kv("alpha 0.1").is_err());
        assert!(RareTrialSpec::from_kv("total_events = 0").is_err());
    }
}
