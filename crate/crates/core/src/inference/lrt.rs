//! Likelihood-ratio tests whose reference law is corrected for model misspecification.
//!
//! Under a misspecified Cox model, `2 * (l(beta_hat) - l(phi0, eta_hat(phi0)))` is
//! asymptotically `sum_j d_j chi2_j(1)`, where the `d_j` are the eigenvalues of
//! `V_11 [(A^-1)_11]^-1` for the `k` tested coordinates. For one coordinate the law is
//! a scaled chi-square and a signed root gives a one-sided standard-normal test.

use nalgebra::DMatrix;
use statrs::function::erf::erfc;

use super::wchisq::{wchisq_sf_with, EigenWeights, TailMethod};
use crate::cox::{fit, fit_constrained, FitOptions, FitResult};
use crate::data::Dataset;
use crate::error::{CoxError, Result};
use crate::linalg::{permute_to_front, spd_inverse, symmetrize};

/// 2*Delta values this far below zero are treated as roundoff.
pub const LRT_ROUNDOFF: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum VarianceMode {
    /// Sandwich `A^-1 B A^-1`.
    #[default]
    Robust,
    /// `B` forced to `A`: classical model-based inference.
    ModelBased,
}

#[derive(Debug, Clone)]
pub struct InferenceOptions {
    pub fit: FitOptions,
    pub variance: VarianceMode,
    pub tail: TailMethod,
}

impl Default for InferenceOptions {
    fn default() -> Self {
        Self {
            fit: FitOptions::default(),
            variance: VarianceMode::Robust,
            tail: TailMethod::Imhof,
        }
    }
}

impl InferenceOptions {
    pub fn model_based() -> Self {
        Self {
            variance: VarianceMode::ModelBased,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone)]
pub struct TestResult {
    /// The likelihood-ratio statistic 2*Delta.
    pub stat: f64,
    pub weights: EigenWeights,
    /// Signed, rescaled root of the statistic (single-coordinate tests only).
    pub z: Option<f64>,
    pub p_two_sided: f64,
    /// Evidence for `phi < phi0`: small when the estimate lies well below `phi0`.
    pub p_less: Option<f64>,
    /// Evidence for `phi > phi0`.
    pub p_greater: Option<f64>,
}

/// `2 * (full.loglik - constrained.loglik)`, clamped at zero within roundoff.
pub fn lrt_stat(full: &FitResult, constrained: &FitResult) -> Result<f64> {
    if !full.converged || full.is_separated() {
        return Err(CoxError::InvalidArgument("full fit did not converge".into()));
    }
    if !constrained.converged {
        return Err(CoxError::InvalidArgument("constrained fit did not converge".into()));
    }
    clamp_stat(2.0 * (full.loglik - constrained.loglik))
}

fn clamp_stat(two_delta: f64) -> Result<f64> {
    if two_delta < -LRT_ROUNDOFF {
        return Err(CoxError::Inconsistent(format!(
            "negative likelihood-ratio statistic {two_delta:e}: profile fit exceeded the full maximum"
        )));
    }
    Ok(two_delta.max(0.0))
}

/// Eigenvalues of `V_11 [(A^-1)_11]^-1` for the leading `k` coordinates.
///
/// Computed as the spectrum of `L' V_11 L` with `L L' = [(A^-1)_11]^-1`, which is
/// similar to the raw product and symmetric, so the weights come out real.
pub fn eigen_weights(v_hat: &DMatrix<f64>, a_hat: &DMatrix<f64>, k: usize) -> Result<EigenWeights> {
    let p = a_hat.nrows();
    if k == 0 || k > p || v_hat.nrows() != p {
        return Err(CoxError::InvalidArgument(format!("cannot test {k} of {p} coordinates")));
    }
    let a_inv = spd_inverse(a_hat)?;
    let c11 = a_inv.view((0, 0), (k, k)).into_owned();
    let m = spd_inverse(&c11)?;
    let l = m.cholesky().ok_or(CoxError::SingularInformation)?.l();
    let v11 = v_hat.view((0, 0), (k, k)).into_owned();
    let s = symmetrize(&(l.transpose() * v11 * &l));
    let mut w: Vec<f64> = s.symmetric_eigenvalues().iter().cloned().collect();
    w.sort_by(|a, b| b.total_cmp(a));
    EigenWeights::new(w)
}

/// Sign of `x` with `sign(0) = 0`.
pub fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

pub fn normal_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / std::f64::consts::SQRT_2)
}

/// One-sided statistic `z = sign * sqrt(2Delta / scale)` and `p_less = Phi(z)`.
pub fn one_sided_z(two_delta: f64, scale: f64, sign: f64) -> Result<(f64, f64)> {
    if !(scale > 0.0) || !scale.is_finite() {
        return Err(CoxError::InvalidArgument(format!("scale must be > 0, got {scale}")));
    }
    if !(two_delta >= 0.0) {
        return Err(CoxError::InvalidArgument(format!("2*Delta must be >= 0, got {two_delta}")));
    }
    if ![-1.0, 0.0, 1.0].contains(&sign) {
        return Err(CoxError::InvalidArgument(format!("sign must be -1, 0 or 1, got {sign}")));
    }
    let z = sign * (two_delta / scale).sqrt();
    Ok((z, normal_cdf(z)))
}

/// Which infinite end, if any, the full fit of the tested coordinate ran off to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Divergence {
    None,
    ToMinusInfinity,
    ToPlusInfinity,
}

/// Full fit plus the reference scale for repeated single-coordinate tests.
#[derive(Debug, Clone)]
pub struct ProfileTester<'a> {
    ds: &'a Dataset,
    index: usize,
    opts: InferenceOptions,
    full: FitResult,
    scale: f64,
    divergence: Divergence,
}

impl<'a> ProfileTester<'a> {
    /// Fits the full model. A fit separated in the tested coordinate is accepted
    /// (the CI machinery maps it to an infinite bound); its sup is approximated by
    /// the loglik at the point where divergence was declared and the reference
    /// scale falls back to 1, because the sandwich degenerates along the divergent
    /// direction.
    pub fn new(ds: &'a Dataset, index: usize, opts: &InferenceOptions) -> Result<Self> {
        if index >= ds.p() {
            return Err(CoxError::InvalidArgument(format!(
                "coordinate {} out of range for p = {}",
                index,
                ds.p()
            )));
        }
        let full = fit(ds, &opts.fit)?;
        Self::from_fit(ds, index, full, opts)
    }

    pub fn from_fit(ds: &'a Dataset, index: usize, full: FitResult, opts: &InferenceOptions) -> Result<Self> {
        if let Some(j) = (0..full.p()).find(|&j| j != index && full.separation[j]) {
            return Err(CoxError::Separated(j));
        }
        let divergence = if full.separation[index] {
            if full.beta_hat[index] > 0.0 {
                Divergence::ToPlusInfinity
            } else {
                Divergence::ToMinusInfinity
            }
        } else if !full.converged {
            return Err(CoxError::NotConverged(full.iterations));
        } else {
            Divergence::None
        };

        let full = match (opts.variance, divergence) {
            (VarianceMode::ModelBased, Divergence::None) => full.with_model_based_variance()?,
            _ => full,
        };
        let scale = match divergence {
            Divergence::None => {
                let front = [index];
                let w = eigen_weights(
                    &permute_to_front(&full.v_hat, &front),
                    &permute_to_front(&full.a_hat, &front),
                    1,
                )?;
                w.as_slice()[0]
            }
            _ => 1.0,
        };
        Ok(Self {
            ds,
            index,
            opts: opts.clone(),
            full,
            scale,
            divergence,
        })
    }

    pub fn full(&self) -> &FitResult {
        &self.full
    }

    pub fn index(&self) -> usize {
        self.index
    }

    pub fn estimate(&self) -> f64 {
        self.full.beta_hat[self.index]
    }

    /// The single eigen-weight used as the chi-square scale.
    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn divergence(&self) -> Divergence {
        self.divergence
    }

    pub(crate) fn options(&self) -> &InferenceOptions {
        &self.opts
    }

    /// 2*Delta at `phi0`.
    pub fn statistic(&self, phi0: f64) -> Result<f64> {
        let mut fopts = self.opts.fit.clone();
        let mut init: Vec<f64> = self.full.beta_hat.iter().cloned().collect();
        init[self.index] = phi0;
        fopts.init = Some(init);
        let constrained = fit_constrained(self.ds, &[(self.index, phi0)], &fopts)?;
        if !constrained.converged {
            return Err(CoxError::NotConverged(constrained.iterations));
        }
        if constrained.is_separated() {
            return Err(CoxError::Separated(
                constrained.separation.iter().position(|&s| s).unwrap_or(0),
            ));
        }
        match self.divergence {
            Divergence::None => lrt_stat(&self.full, &constrained),
            // the sup is only approached; points beyond the stopping value can score higher
            _ => Ok((2.0 * (self.full.loglik - constrained.loglik)).max(0.0)),
        }
    }

    pub fn test(&self, phi0: f64) -> Result<TestResult> {
        let stat = self.statistic(phi0)?;
        let weights = EigenWeights::new(vec![self.scale])?;
        let (z, p_less) = one_sided_z(stat, self.scale, sign(self.estimate() - phi0))?;
        let p_two_sided = wchisq_sf_with(stat, &weights, self.opts.tail)?;
        Ok(TestResult {
            stat,
            weights,
            z: Some(z),
            p_two_sided,
            p_less: Some(p_less),
            p_greater: Some(normal_cdf(-z)),
        })
    }
}

/// Robust likelihood-ratio test of `beta[index] = phi0` (0-based index).
pub fn robust_lr_pvalue(ds: &Dataset, index: usize, phi0: f64, opts: &InferenceOptions) -> Result<TestResult> {
    let tester = ProfileTester::new(ds, index, opts)?;
    if tester.divergence() != Divergence::None {
        return Err(CoxError::Separated(index));
    }
    tester.test(phi0)
}

/// Joint robust likelihood-ratio test of `beta[indices[j]] = values[j]`.
/// Only the two-sided p-value is defined for more than one coordinate.
pub fn robust_lr_pvalue_joint(
    ds: &Dataset,
    indices: &[usize],
    values: &[f64],
    opts: &InferenceOptions,
) -> Result<TestResult> {
    if indices.len() != values.len() || indices.is_empty() {
        return Err(CoxError::InvalidArgument("indices and values must be non-empty and of equal length".into()));
    }
    if indices.len() == 1 {
        return robust_lr_pvalue(ds, indices[0], values[0], opts);
    }
    let mut full = fit(ds, &opts.fit)?;
    if full.is_separated() {
        return Err(CoxError::Separated(full.separation.iter().position(|&s| s).unwrap_or(0)));
    }
    if !full.converged {
        return Err(CoxError::NotConverged(full.iterations));
    }
    if opts.variance == VarianceMode::ModelBased {
        full = full.with_model_based_variance()?;
    }
    let fixed: Vec<(usize, f64)> = indices.iter().cloned().zip(values.iter().cloned()).collect();
    let mut fopts = opts.fit.clone();
    let mut init: Vec<f64> = full.beta_hat.iter().cloned().collect();
    for &(j, v) in &fixed {
        init[j] = v;
    }
    fopts.init = Some(init);
    let constrained = fit_constrained(ds, &fixed, &fopts)?;
    let stat = lrt_stat(&full, &constrained)?;
    let weights = eigen_weights(
        &permute_to_front(&full.v_hat, indices),
        &permute_to_front(&full.a_hat, indices),
        indices.len(),
    )?;
    let p_two_sided = wchisq_sf_with(stat, &weights, opts.tail)?;
    Ok(TestResult {
        stat,
        weights,
        z: None,
        p_two_sided,
        p_less: None,
        p_greater: None,
    })
}
