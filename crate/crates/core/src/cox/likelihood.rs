//! Partial likelihood, score, information and score residuals (Breslow ties, case weights).
//!
//! Every quantity is computed in one backward sweep over the time-ordered subjects.
//! Risk-set sums are carried relative to a running maximum of the linear predictor so
//! that `exp` never overflows, whatever the scale of the covariates.

use nalgebra::{DMatrix, DVector};

use crate::data::Dataset;
use crate::error::{CoxError, Result};
use crate::linalg::{spd_inverse, symmetrize};

/// Weighted risk-set moments `(S0, S1, S2)` at one time point, each scaled by `1/n`.
#[derive(Debug, Clone)]
pub struct Moments {
    pub s0: f64,
    pub s1: DVector<f64>,
    pub s2: DMatrix<f64>,
}

/// Summary of one distinct event time, used by the residual computation.
#[derive(Debug, Clone)]
struct EventGroup {
    time: f64,
    /// Sum of weights of events at this time.
    weighted_events: f64,
    /// log of the raw weighted risk-set sum `n * S0`.
    log_risk: f64,
    /// `S1 / S0`.
    zbar: DVector<f64>,
}

#[derive(Debug, Clone)]
pub(crate) struct Sweep {
    pub loglik: f64,
    pub score: DVector<f64>,
    /// Raw observed information `-d2 l / d beta2` (not divided by n).
    pub information: Option<DMatrix<f64>>,
    groups: Vec<EventGroup>,
}

fn check_beta(ds: &Dataset, beta: &[f64]) -> Result<()> {
    if beta.len() != ds.p() {
        return Err(CoxError::InvalidArgument(format!(
            "beta has length {} but the dataset has p = {}",
            beta.len(),
            ds.p()
        )));
    }
    if beta.iter().any(|b| !b.is_finite()) {
        return Err(CoxError::InvalidArgument("beta must be finite".into()));
    }
    Ok(())
}

fn linear_predictor(ds: &Dataset, beta: &[f64]) -> Vec<f64> {
    ds.observations()
        .iter()
        .map(|o| o.covariates.iter().zip(beta).map(|(z, b)| z * b).sum())
        .collect()
}

pub(crate) fn sweep(ds: &Dataset, beta: &[f64], with_information: bool) -> Result<Sweep> {
    check_beta(ds, beta)?;
    ds.require_events()?;
    let p = ds.p();
    let obs = ds.observations();
    let eta = linear_predictor(ds, beta);
    let order = ds.time_order();

    let mut shift = f64::NEG_INFINITY;
    let mut s0 = 0.0;
    let mut s1 = DVector::<f64>::zeros(p);
    let mut s2 = DMatrix::<f64>::zeros(p, p);

    let mut loglik = 0.0;
    let mut score = DVector::<f64>::zeros(p);
    let mut information = with_information.then(|| DMatrix::<f64>::zeros(p, p));
    let mut groups = Vec::new();

    let mut end = order.len();
    while end > 0 {
        let t = obs[order[end - 1]].time;
        let mut start = end - 1;
        while start > 0 && obs[order[start - 1]].time == t {
            start -= 1;
        }
        let tied = &order[start..end];

        for &i in tied {
            let o = &obs[i];
            if eta[i] > shift {
                let rescale = (shift - eta[i]).exp();
                s0 *= rescale;
                s1 *= rescale;
                s2 *= rescale;
                shift = eta[i];
            }
            let w = o.weight * (eta[i] - shift).exp();
            let z = DVector::from_column_slice(&o.covariates);
            s0 += w;
            s1.axpy(w, &z, 1.0);
            if with_information {
                s2.ger(w, &z, &z, 1.0);
            }
        }

        let weighted_events: f64 = tied
            .iter()
            .filter(|&&i| obs[i].is_event())
            .map(|&i| obs[i].weight)
            .sum();
        if weighted_events > 0.0 {
            let log_risk = shift + s0.ln();
            let zbar = &s1 / s0;
            for &i in tied.iter().filter(|&&i| obs[i].is_event()) {
                let o = &obs[i];
                loglik += o.weight * (eta[i] - log_risk);
                for j in 0..p {
                    score[j] += o.weight * (o.covariates[j] - zbar[j]);
                }
            }
            if let Some(info) = information.as_mut() {
                let cov = &s2 / s0 - &zbar * zbar.transpose();
                *info += cov * weighted_events;
            }
            groups.push(EventGroup {
                time: t,
                weighted_events,
                log_risk,
                zbar,
            });
        }
        end = start;
    }
    groups.reverse();

    if !loglik.is_finite() || score.iter().any(|x| !x.is_finite()) {
        return Err(CoxError::Overflow);
    }
    if let Some(info) = information.as_ref() {
        if info.iter().any(|x| !x.is_finite()) {
            return Err(CoxError::Overflow);
        }
    }
    Ok(Sweep {
        loglik,
        score,
        information: information.map(|m| symmetrize(&m)),
        groups,
    })
}

/// Risk-set moments `S(r)(beta, t) = n^-1 sum v_i Y_i(t) exp(beta'Z_i) Z_i^{(x)r}`.
pub fn s_moments(ds: &Dataset, beta: &[f64], t: f64) -> Result<Moments> {
    check_beta(ds, beta)?;
    let p = ds.p();
    let n = ds.n() as f64;
    let mut s0 = 0.0;
    let mut s1 = DVector::zeros(p);
    let mut s2 = DMatrix::zeros(p, p);
    let mut at_risk = 0usize;
    for o in ds.observations().iter().filter(|o| o.time >= t) {
        at_risk += 1;
        let z = DVector::from_column_slice(&o.covariates);
        let w = o.weight * z.dot(&DVector::from_column_slice(beta)).exp();
        s0 += w;
        s1.axpy(w, &z, 1.0);
        s2.ger(w, &z, &z, 1.0);
    }
    if at_risk == 0 {
        return Err(CoxError::EmptyRiskSet(t));
    }
    Ok(Moments {
        s0: s0 / n,
        s1: s1 / n,
        s2: s2 / n,
    })
}

/// Weighted Breslow partial log-likelihood `sum v_i d_i [beta'Z_i - log sum_{R_i} v_j exp(beta'Z_j)]`.
pub fn partial_loglik(ds: &Dataset, beta: &[f64]) -> Result<f64> {
    Ok(sweep(ds, beta, false)?.loglik)
}

/// Score vector `U(beta)`, the gradient of [`partial_loglik`].
pub fn score(ds: &Dataset, beta: &[f64]) -> Result<DVector<f64>> {
    Ok(sweep(ds, beta, false)?.score)
}

/// `A(beta)`: the observed information divided by n.
pub fn info(ds: &Dataset, beta: &[f64]) -> Result<DMatrix<f64>> {
    let sw = sweep(ds, beta, true)?;
    Ok(sw.information.expect("requested") / ds.n() as f64)
}

/// Score residuals `W_i(beta)`, one row per subject in input order.
///
/// The compensator sum carries the event weights `v_j`; the subject's own weight
/// enters only through [`meat`]. At the maximum, `sum_i v_i W_i = 0`.
pub fn score_residuals(ds: &Dataset, beta: &[f64]) -> Result<DMatrix<f64>> {
    let sw = sweep(ds, beta, false)?;
    residuals_from_sweep(ds, beta, &sw)
}

fn residuals_from_sweep(ds: &Dataset, beta: &[f64], sw: &Sweep) -> Result<DMatrix<f64>> {
    let p = ds.p();
    let obs = ds.observations();
    let eta = linear_predictor(ds, beta);
    let offset = eta.iter().cloned().fold(f64::NEG_INFINITY, f64::max);

    // Cumulative hazard increments, scaled by exp(offset), in ascending time.
    let mut cum_hazard = Vec::with_capacity(sw.groups.len());
    let mut cum_weighted_zbar = Vec::with_capacity(sw.groups.len());
    let mut h = 0.0;
    let mut hz = DVector::<f64>::zeros(p);
    for g in &sw.groups {
        let inc = g.weighted_events * (offset - g.log_risk).exp();
        h += inc;
        hz.axpy(inc, &g.zbar, 1.0);
        cum_hazard.push(h);
        cum_weighted_zbar.push(hz.clone());
    }

    let mut out = DMatrix::<f64>::zeros(obs.len(), p);
    for (i, o) in obs.iter().enumerate() {
        // number of event groups with time <= X_i
        let k = sw.groups.partition_point(|g| g.time <= o.time);
        let risk = (eta[i] - offset).exp();
        for j in 0..p {
            let mut w = 0.0;
            if k > 0 {
                w -= risk * (o.covariates[j] * cum_hazard[k - 1] - cum_weighted_zbar[k - 1][j]);
            }
            if o.is_event() {
                // the subject's own event time is the last group at or before X_i
                w += o.covariates[j] - sw.groups[k - 1].zbar[j];
            }
            out[(i, j)] = w;
        }
    }
    if out.iter().any(|x| !x.is_finite()) {
        return Err(CoxError::Overflow);
    }
    Ok(out)
}

/// `B(beta) = n^-1 sum v_i W_i W_i'`.
pub fn meat(ds: &Dataset, beta: &[f64]) -> Result<DMatrix<f64>> {
    let resid = score_residuals(ds, beta)?;
    Ok(meat_from_residuals(ds, &resid))
}

pub(crate) fn meat_from_residuals(ds: &Dataset, resid: &DMatrix<f64>) -> DMatrix<f64> {
    let p = ds.p();
    let mut b = DMatrix::<f64>::zeros(p, p);
    for (i, o) in ds.observations().iter().enumerate() {
        let w = resid.row(i).transpose();
        b.ger(o.weight, &w, &w, 1.0);
    }
    symmetrize(&(b / ds.n() as f64))
}

/// Sandwich covariance `A^-1 B A^-1`, symmetrized.
pub fn sandwich(a_hat: &DMatrix<f64>, b_hat: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let a_inv = spd_inverse(a_hat)?;
    Ok(symmetrize(&(&a_inv * b_hat * &a_inv)))
}

/// Everything the fitter needs at one point: loglik, score, A, B.
pub(crate) struct PointSummary {
    pub loglik: f64,
    pub score: DVector<f64>,
    pub a_hat: DMatrix<f64>,
    pub b_hat: DMatrix<f64>,
}

pub(crate) fn summarize(ds: &Dataset, beta: &[f64]) -> Result<PointSummary> {
    let sw = sweep(ds, beta, true)?;
    let resid = residuals_from_sweep(ds, beta, &sw)?;
    let b_hat = meat_from_residuals(ds, &resid);
    let a_hat = sw.information.clone().expect("requested") / ds.n() as f64;
    Ok(PointSummary {
        loglik: sw.loglik,
        score: sw.score,
        a_hat,
        b_hat,
    })
}
