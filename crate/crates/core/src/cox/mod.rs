//! Cox partial likelihood engine.

mod fit;
mod likelihood;

pub use fit::{fit, fit_constrained, fit_profile, FitOptions, FitResult, DIVERGENCE_BOUND};
pub use likelihood::{info, meat, partial_loglik, s_moments, sandwich, score, score_residuals, Moments};
