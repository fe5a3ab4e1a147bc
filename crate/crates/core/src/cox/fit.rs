//! Maximum partial likelihood by Newton-Raphson with step halving, unconstrained
//! or with one coordinate held fixed (profile fits).

use nalgebra::{DMatrix, DVector};

use super::likelihood::{partial_loglik, sandwich, summarize, PointSummary};
use crate::data::Dataset;
use crate::error::{CoxError, Result};
use crate::linalg::{max_abs, spd_inverse};

/// |beta_j| beyond which a still-improving iteration is declared separated.
pub const DIVERGENCE_BOUND: f64 = 15.0;
const MAX_HALVINGS: usize = 20;

#[derive(Debug, Clone)]
pub struct FitOptions {
    pub init: Option<Vec<f64>>,
    /// Convergence tolerance on the max-norm of the score.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            init: None,
            tol: 1e-8,
            max_iter: 50,
        }
    }
}

#[derive(Debug, Clone)]
pub struct FitResult {
    pub beta_hat: DVector<f64>,
    pub loglik: f64,
    pub a_hat: DMatrix<f64>,
    pub b_hat: DMatrix<f64>,
    /// `A^-1 B A^-1`. Filled with NaN when A is singular at a separated or
    /// non-converged point.
    pub v_hat: DMatrix<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub separation: Vec<bool>,
    /// Coordinates held fixed (empty for an unconstrained fit).
    pub fixed: Vec<usize>,
    pub n: usize,
}

impl FitResult {
    pub fn p(&self) -> usize {
        self.beta_hat.len()
    }

    pub fn is_separated(&self) -> bool {
        self.separation.iter().any(|&s| s)
    }

    /// Robust standard errors `sqrt(V_jj / n)`.
    pub fn robust_se(&self) -> Vec<f64> {
        (0..self.p())
            .map(|j| (self.v_hat[(j, j)] / self.n as f64).sqrt())
            .collect()
    }

    /// The same fit with `B` replaced by `A`, so that `V = A^-1` and every robust
    /// procedure reduces to its classical model-based counterpart.
    pub fn with_model_based_variance(&self) -> Result<FitResult> {
        let v_hat = spd_inverse(&self.a_hat)?;
        Ok(FitResult {
            b_hat: self.a_hat.clone(),
            v_hat,
            ..self.clone()
        })
    }
}

/// Unconstrained maximum partial likelihood fit.
pub fn fit(ds: &Dataset, opts: &FitOptions) -> Result<FitResult> {
    let init = initial(ds, opts)?;
    let free: Vec<usize> = (0..ds.p()).collect();
    newton(ds, init, &free, Vec::new(), opts)
}

/// Maximizes over all coordinates except `fixed_index` (0-based), which is held at `phi0`.
pub fn fit_profile(ds: &Dataset, fixed_index: usize, phi0: f64, opts: &FitOptions) -> Result<FitResult> {
    fit_constrained(ds, &[(fixed_index, phi0)], opts)
}

/// Maximizes over the coordinates not listed in `fixed`, each listed one held at its value.
pub fn fit_constrained(ds: &Dataset, fixed: &[(usize, f64)], opts: &FitOptions) -> Result<FitResult> {
    let mut init = initial(ds, opts)?;
    for (k, &(j, value)) in fixed.iter().enumerate() {
        if j >= ds.p() {
            return Err(CoxError::InvalidArgument(format!(
                "coordinate {} out of range for p = {}",
                j,
                ds.p()
            )));
        }
        if fixed[..k].iter().any(|&(i, _)| i == j) {
            return Err(CoxError::InvalidArgument(format!("coordinate {j} fixed twice")));
        }
        if !value.is_finite() {
            return Err(CoxError::InvalidArgument("fixed values must be finite".into()));
        }
        init[j] = value;
    }
    let fixed_idx: Vec<usize> = fixed.iter().map(|&(j, _)| j).collect();
    let free: Vec<usize> = (0..ds.p()).filter(|j| !fixed_idx.contains(j)).collect();
    newton(ds, init, &free, fixed_idx, opts)
}

fn initial(ds: &Dataset, opts: &FitOptions) -> Result<Vec<f64>> {
    if !(opts.tol > 0.0) {
        return Err(CoxError::InvalidArgument("tol must be > 0".into()));
    }
    match &opts.init {
        Some(v) if v.len() != ds.p() => Err(CoxError::InvalidArgument(format!(
            "init has length {} but p = {}",
            v.len(),
            ds.p()
        ))),
        Some(v) => Ok(v.clone()),
        None => Ok(vec![0.0; ds.p()]),
    }
}

fn free_score(s: &PointSummary, free: &[usize]) -> DVector<f64> {
    DVector::from_iterator(free.len(), free.iter().map(|&j| s.score[j]))
}

fn newton(
    ds: &Dataset,
    mut beta: Vec<f64>,
    free: &[usize],
    fixed: Vec<usize>,
    opts: &FitOptions,
) -> Result<FitResult> {
    let n = ds.n() as f64;
    let mut point = summarize(ds, &beta)?;
    let mut separation = vec![false; ds.p()];
    let mut converged = false;
    let mut iterations = 0;

    while iterations < opts.max_iter {
        let u = free_score(&point, free);
        if max_abs(u.iter().cloned()) < opts.tol {
            converged = true;
            break;
        }
        let info_ff = DMatrix::from_fn(free.len(), free.len(), |a, b| point.a_hat[(free[a], free[b])] * n);
        let step = match info_ff.clone().cholesky() {
            Some(ch) => ch.solve(&u),
            None => return Err(CoxError::SingularInformation),
        };

        let mut scale = 1.0;
        let mut accepted = None;
        for _ in 0..=MAX_HALVINGS {
            let mut cand = beta.clone();
            for (a, &j) in free.iter().enumerate() {
                cand[j] += scale * step[a];
            }
            if let Ok(l) = partial_loglik(ds, &cand) {
                // tolerate roundoff-level decreases so the last quadratic step is not rejected
                if l >= point.loglik - 1e-12 * (1.0 + point.loglik.abs()) {
                    accepted = Some((cand, l));
                    break;
                }
            }
            scale *= 0.5;
        }
        iterations += 1;
        let Some((cand, l)) = accepted else {
            // no ascent possible at machine precision
            break;
        };
        let improved = l > point.loglik;
        beta = cand;
        point = summarize(ds, &beta)?;

        let mut diverging = false;
        for &j in free {
            if improved && beta[j].abs() > DIVERGENCE_BOUND {
                separation[j] = true;
                diverging = true;
            }
        }
        if diverging {
            break;
        }
    }
    if !converged && !separation.iter().any(|&s| s) {
        let u = free_score(&point, free);
        converged = max_abs(u.iter().cloned()) < opts.tol;
    }

    let v_hat = match sandwich(&point.a_hat, &point.b_hat) {
        Ok(v) => v,
        // an unconstrained fit that claims convergence must have a usable variance
        Err(e) if converged && fixed.is_empty() => return Err(e),
        Err(_) => DMatrix::from_element(ds.p(), ds.p(), f64::NAN),
    };

    Ok(FitResult {
        beta_hat: DVector::from_vec(beta),
        loglik: point.loglik,
        a_hat: point.a_hat,
        b_hat: point.b_hat,
        v_hat,
        iterations,
        converged,
        separation,
        fixed,
        n: ds.n(),
    })
}
