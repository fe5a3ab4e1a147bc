//! Robust likelihood-ratio inference: reference distribution, tests and intervals.

mod ci;
mod lrt;
mod roots;
mod wchisq;

pub use ci::{lr_ci_from_tester, normal_quantile, robust_lr_ci, robust_wald_ci, ConfInterval, Method, Side, BOUND_TOL};
pub use lrt::{
    eigen_weights, lrt_stat, normal_cdf, one_sided_z, robust_lr_pvalue, robust_lr_pvalue_joint, sign, Divergence,
    InferenceOptions, ProfileTester, TestResult, VarianceMode,
};
pub use roots::brent;
pub use wchisq::{chi2_1_sf, wchisq_sf, wchisq_sf_with, EigenWeights, TailMethod, IMHOF_ABS_TOL};
