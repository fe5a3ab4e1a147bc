//! Confidence intervals for one coefficient: robust Wald and inverted robust LR tests.

use std::fmt;
use std::str::FromStr;

use statrs::distribution::{ContinuousCDF, Normal};

use super::lrt::{Divergence, InferenceOptions, ProfileTester, VarianceMode};
use super::roots::brent;
use crate::cox::FitResult;
use crate::data::Dataset;
use crate::error::{CoxError, Result};

/// Root-finding tolerance on the CI bound.
pub const BOUND_TOL: f64 = 1e-6;
/// Maximum number of bracket doublings before giving up.
pub const MAX_DOUBLINGS: usize = 60;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    RobustWald,
    RobustLr,
    PlainLr,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::RobustWald, Method::RobustLr, Method::PlainLr];

    pub fn as_str(&self) -> &'static str {
        match self {
            Method::RobustWald => "robust-wald",
            Method::RobustLr => "robust-lr",
            Method::PlainLr => "plain-lr",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = CoxError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "robust-wald" => Ok(Method::RobustWald),
            "robust-lr" => Ok(Method::RobustLr),
            "plain-lr" => Ok(Method::PlainLr),
            other => Err(CoxError::InvalidArgument(format!("unknown method `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    /// `[L, inf)`.
    Lower,
    /// `(-inf, U]`.
    Upper,
    /// Equal-tail two-sided interval.
    TwoSided,
}

impl Side {
    pub fn as_str(&self) -> &'static str {
        match self {
            Side::Lower => "lower",
            Side::Upper => "upper",
            Side::TwoSided => "two",
        }
    }

    /// Probability left outside the interval in each bounded tail.
    fn tail_alpha(&self, level: f64) -> f64 {
        match self {
            Side::TwoSided => (1.0 - level) / 2.0,
            _ => 1.0 - level,
        }
    }
}

impl fmt::Display for Side {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Side {
    type Err = CoxError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "lower" => Ok(Side::Lower),
            "upper" => Ok(Side::Upper),
            "two" | "two-sided" => Ok(Side::TwoSided),
            other => Err(CoxError::InvalidArgument(format!("unknown side `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConfInterval {
    pub lower: f64,
    pub upper: f64,
    pub level: f64,
    pub side: Side,
    pub method: Method,
}

impl ConfInterval {
    pub fn contains(&self, value: f64) -> bool {
        self.lower <= value && value <= self.upper
    }

    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }
}

fn check_level(level: f64) -> Result<()> {
    if level > 0.0 && level < 1.0 {
        Ok(())
    } else {
        Err(CoxError::InvalidArgument(format!("level must lie in (0, 1), got {level}")))
    }
}

pub fn normal_quantile(p: f64) -> f64 {
    Normal::standard().inverse_cdf(p)
}

/// `beta_i -/+ z * sqrt(V_ii / n)` from a converged fit (0-based index).
pub fn robust_wald_ci(fit: &FitResult, index: usize, level: f64, side: Side) -> Result<ConfInterval> {
    check_level(level)?;
    if index >= fit.p() {
        return Err(CoxError::InvalidArgument(format!("coordinate {index} out of range")));
    }
    if fit.separation[index] {
        return Err(CoxError::Separated(index));
    }
    if !fit.converged {
        return Err(CoxError::NotConverged(fit.iterations));
    }
    let se = fit.robust_se()[index];
    if !se.is_finite() {
        return Err(CoxError::SingularInformation);
    }
    let half = normal_quantile(1.0 - side.tail_alpha(level)) * se;
    let est = fit.beta_hat[index];
    let (lower, upper) = match side {
        Side::Lower => (est - half, f64::INFINITY),
        Side::Upper => (f64::NEG_INFINITY, est + half),
        Side::TwoSided => (est - half, est + half),
    };
    Ok(ConfInterval {
        lower,
        upper,
        level,
        side,
        method: Method::RobustWald,
    })
}

/// CI by inverting the one-sided robust LR test (0-based index). With
/// [`VarianceMode::ModelBased`] this is the classical profile-likelihood interval.
pub fn robust_lr_ci(
    ds: &Dataset,
    index: usize,
    level: f64,
    side: Side,
    opts: &InferenceOptions,
) -> Result<ConfInterval> {
    check_level(level)?;
    let tester = ProfileTester::new(ds, index, opts)?;
    lr_ci_from_tester(&tester, level, side)
}

pub fn lr_ci_from_tester(tester: &ProfileTester<'_>, level: f64, side: Side) -> Result<ConfInterval> {
    check_level(level)?;
    let alpha = side.tail_alpha(level);
    let lower = match side {
        Side::Upper => f64::NEG_INFINITY,
        _ if tester.divergence() == Divergence::ToMinusInfinity => f64::NEG_INFINITY,
        _ => invert(tester, alpha, -1.0)?,
    };
    let upper = match side {
        Side::Lower => f64::INFINITY,
        _ if tester.divergence() == Divergence::ToPlusInfinity => f64::INFINITY,
        _ => invert(tester, alpha, 1.0)?,
    };
    let method = match tester.options().variance {
        VarianceMode::Robust => Method::RobustLr,
        VarianceMode::ModelBased => Method::PlainLr,
    };
    Ok(ConfInterval {
        lower,
        upper,
        level,
        side,
        method,
    })
}

/// Solves `p_less(phi) = alpha` above the estimate (`direction = 1`) or
/// `p_greater(phi) = alpha` below it (`direction = -1`).
fn invert(tester: &ProfileTester<'_>, alpha: f64, direction: f64) -> Result<f64> {
    let est = tester.estimate();
    let g = |phi: f64| -> Result<f64> {
        let t = tester.test(phi)?;
        let p = if direction > 0.0 { t.p_less } else { t.p_greater };
        Ok(p.expect("single-coordinate test") - alpha)
    };

    let se = tester.full().robust_se()[tester.index()];
    let mut step = if tester.divergence() == Divergence::None && se.is_finite() && se > 0.0 {
        4.0 * normal_quantile(1.0 - alpha) * se
    } else {
        1.0
    };
    let mut inner = est;
    let mut g_inner = 0.5 - alpha;
    for _ in 0..=MAX_DOUBLINGS {
        let outer = est + direction * step;
        let g_outer = g(outer)?;
        if g_outer <= 0.0 {
            let (a, b, fa, fb) = if direction > 0.0 {
                (inner, outer, g_inner, g_outer)
            } else {
                (outer, inner, g_outer, g_inner)
            };
            return brent(g, a, b, fa, fb, BOUND_TOL);
        }
        inner = outer;
        g_inner = g_outer;
        step *= 2.0;
    }
    Err(CoxError::NotBracketable)
}
