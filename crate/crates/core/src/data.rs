//! Right-censored survival data: observations, validation, CSV ingestion and risk sets.
//!
//! A [`Dataset`] is immutable once built. It caches the ascending time order of its
//! observations so the likelihood code can sweep risk sets without re-sorting.

use std::io::{Read, Write};

use crate::error::{CoxError, Result};

/// One subject: follow-up time, event indicator, fixed covariates and a sampling weight.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub time: f64,
    /// 1 = observed failure, 0 = censored.
    pub status: u8,
    pub covariates: Vec<f64>,
    pub weight: f64,
}

impl Observation {
    pub fn new(time: f64, status: u8, covariates: Vec<f64>) -> Self {
        Self {
            time,
            status,
            covariates,
            weight: 1.0,
        }
    }

    pub fn weighted(time: f64, status: u8, covariates: Vec<f64>, weight: f64) -> Self {
        Self {
            time,
            status,
            covariates,
            weight,
        }
    }

    pub fn is_event(&self) -> bool {
        self.status == 1
    }
}

/// A single invariant violation: 1-based row and the offending field.
#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub row: usize,
    pub field: &'static str,
    pub message: String,
}

impl Violation {
    fn into_error(self) -> CoxError {
        CoxError::Validation {
            field: self.field,
            row: self.row,
            message: self.message,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Dataset {
    observations: Vec<Observation>,
    p: usize,
    /// Indices sorted by ascending time (stable, so ties keep file order).
    order: Vec<usize>,
}

impl Dataset {
    /// Builds a dataset and rejects it on the first invariant violation.
    pub fn new(observations: Vec<Observation>) -> Result<Self> {
        let ds = Self::new_unchecked(observations)?;
        if let Some(v) = ds.validate().into_iter().next() {
            return Err(v.into_error());
        }
        Ok(ds)
    }

    /// Builds a dataset without checking value invariants, for inspection with
    /// [`Dataset::validate`]. Only the structural requirements (n >= 1, equal
    /// covariate lengths, p >= 1) are enforced.
    pub fn new_unchecked(observations: Vec<Observation>) -> Result<Self> {
        let first = observations
            .first()
            .ok_or_else(|| CoxError::InvalidArgument("dataset must contain at least one observation".into()))?;
        let p = first.covariates.len();
        if p == 0 {
            return Err(CoxError::InvalidArgument("at least one covariate is required".into()));
        }
        for (i, o) in observations.iter().enumerate() {
            if o.covariates.len() != p {
                return Err(CoxError::Validation {
                    field: "covariates",
                    row: i + 1,
                    message: format!("has length {} but p = {}", o.covariates.len(), p),
                });
            }
        }
        let mut order: Vec<usize> = (0..observations.len()).collect();
        order.sort_by(|&a, &b| observations[a].time.total_cmp(&observations[b].time));
        Ok(Self {
            observations,
            p,
            order,
        })
    }

    pub fn observations(&self) -> &[Observation] {
        &self.observations
    }

    pub fn n(&self) -> usize {
        self.observations.len()
    }

    pub fn p(&self) -> usize {
        self.p
    }

    /// Indices of observations in ascending time order.
    pub fn time_order(&self) -> &[usize] {
        &self.order
    }

    pub fn event_count(&self) -> usize {
        self.observations.iter().filter(|o| o.is_event()).count()
    }

    pub fn has_unit_weights(&self) -> bool {
        self.observations.iter().all(|o| o.weight == 1.0)
    }

    pub(crate) fn require_events(&self) -> Result<()> {
        if self.event_count() == 0 {
            Err(CoxError::NoEvents)
        } else {
            Ok(())
        }
    }

    /// Every invariant violation, in row order. Empty iff the dataset is valid.
    pub fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        for (i, o) in self.observations.iter().enumerate() {
            let row = i + 1;
            if !(o.time.is_finite() && o.time > 0.0) {
                out.push(Violation {
                    row,
                    field: "time",
                    message: "must be > 0".into(),
                });
            }
            if o.status > 1 {
                out.push(Violation {
                    row,
                    field: "status",
                    message: "must be 0 or 1".into(),
                });
            }
            if !(o.weight.is_finite() && o.weight > 0.0) {
                out.push(Violation {
                    row,
                    field: "weight",
                    message: "must be > 0 and finite".into(),
                });
            }
            if o.covariates.iter().any(|z| !z.is_finite()) {
                out.push(Violation {
                    row,
                    field: "covariates",
                    message: "must be finite".into(),
                });
            }
        }
        out
    }

    /// Indices `{ j : X_j >= t }`, in input order.
    pub fn risk_set(&self, t: f64) -> Vec<usize> {
        self.observations
            .iter()
            .enumerate()
            .filter(|(_, o)| o.time >= t)
            .map(|(j, _)| j)
            .collect()
    }

    /// Returns a copy with every row repeated `weight` times and unit weights.
    /// Only defined for integer weights.
    pub fn expand_integer_weights(&self) -> Result<Dataset> {
        let mut rows = Vec::new();
        for (i, o) in self.observations.iter().enumerate() {
            if o.weight.fract() != 0.0 || o.weight < 1.0 {
                return Err(CoxError::InvalidArgument(format!(
                    "row {} has non-integer weight {}",
                    i + 1,
                    o.weight
                )));
            }
            for _ in 0..o.weight as usize {
                rows.push(Observation::new(o.time, o.status, o.covariates.clone()));
            }
        }
        Dataset::new(rows)
    }

    /// Serializes as `time,status[,weight],z1..zp` with shortest round-trip decimal text.
    pub fn write_csv<W: Write>(&self, sink: W, include_weight: bool) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(sink);
        let mut header = vec!["time".to_string(), "status".to_string()];
        if include_weight {
            header.push("weight".into());
        }
        header.extend((1..=self.p).map(|j| format!("z{j}")));
        let io_err = |e: csv::Error| CoxError::Io {
            path: "<csv sink>".into(),
            source: std::io::Error::other(e.to_string()),
        };
        wtr.write_record(&header).map_err(io_err)?;
        for o in &self.observations {
            let mut rec = vec![o.time.to_string(), o.status.to_string()];
            if include_weight {
                rec.push(o.weight.to_string());
            }
            rec.extend(o.covariates.iter().map(|z| z.to_string()));
            wtr.write_record(&rec).map_err(io_err)?;
        }
        wtr.flush().map_err(|e| CoxError::Io {
            path: "<csv sink>".into(),
            source: e,
        })?;
        Ok(())
    }
}

/// Reads a `time,status[,weight],z1..zp` CSV. Rows are numbered from 1 (header excluded).
pub fn load_csv<R: Read>(source: R, has_weight_column: bool) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(source);

    let header = rdr
        .headers()
        .map_err(|e| CoxError::Parse {
            row: 0,
            message: e.to_string(),
        })?
        .clone();
    let lead = if has_weight_column { 3 } else { 2 };
    let expected_lead: &[&str] = if has_weight_column {
        &["time", "status", "weight"]
    } else {
        &["time", "status"]
    };
    for (k, name) in expected_lead.iter().enumerate() {
        match header.get(k) {
            Some(h) if h.eq_ignore_ascii_case(name) => {}
            other => {
                return Err(CoxError::Parse {
                    row: 0,
                    message: format!("header column {} must be `{}`, found `{}`", k + 1, name, other.unwrap_or("")),
                })
            }
        }
    }
    if header.len() <= lead {
        return Err(CoxError::Parse {
            row: 0,
            message: "header must name at least one covariate column".into(),
        });
    }
    let arity = header.len();

    let mut observations = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let row = i + 1;
        let rec = rec.map_err(|e| CoxError::Parse {
            row,
            message: e.to_string(),
        })?;
        if rec.len() == 1 && rec.get(0).is_some_and(str::is_empty) {
            continue;
        }
        if rec.len() != arity {
            return Err(CoxError::Parse {
                row,
                message: format!("expected {} fields, found {}", arity, rec.len()),
            });
        }
        let num = |k: usize| -> Result<f64> {
            let cell = rec.get(k).unwrap_or("");
            cell.parse::<f64>().map_err(|_| CoxError::Parse {
                row,
                message: format!("column {} (`{}`) is not numeric: `{}`", k + 1, &header[k], cell),
            })
        };
        let time = num(0)?;
        let status_raw = num(1)?;
        let status = if status_raw == 0.0 {
            0
        } else if status_raw == 1.0 {
            1
        } else {
            return Err(CoxError::Validation {
                field: "status",
                row,
                message: "must be 0 or 1".into(),
            });
        };
        let weight = if has_weight_column { num(2)? } else { 1.0 };
        let covariates = (lead..arity).map(num).collect::<Result<Vec<_>>>()?;
        observations.push(Observation::weighted(time, status, covariates, weight));
    }
    if observations.is_empty() {
        return Err(CoxError::Parse {
            row: 0,
            message: "no data rows".into(),
        });
    }
    Dataset::new(observations)
}
