//! Misspecification-robust inference for the Cox proportional hazards model.
//!
//! * [`data`]: survival observations, validation, CSV ingestion and risk sets.
//! * [`cox`]: weighted Breslow partial likelihood, score, information, score
//!   residuals, sandwich covariance and Newton-Raphson fits (full and profile).
//! * [`inference`]: the weighted chi-square law of the likelihood-ratio statistic,
//!   robust LR tests, robust Wald intervals and LR intervals by test inversion.
//! * [`study`]: simulation and enumeration studies of interval coverage.

pub mod cox;
pub mod data;
pub mod error;
pub mod inference;
pub mod linalg;
pub mod study;

pub use cox::{fit, fit_profile, FitOptions, FitResult};
pub use data::{load_csv, Dataset, Observation};
pub use error::{CoxError, Result};
pub use inference::{robust_lr_ci, robust_lr_pvalue, robust_wald_ci, ConfInterval, InferenceOptions, Method, Side};
