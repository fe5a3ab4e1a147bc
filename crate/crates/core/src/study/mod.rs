//! Simulation studies: coverage under misspecified models, exact rare-event
//! coverage, and the upper-bound curve of a reconstructed prevention trial.

pub mod config;
pub mod hptn;
pub mod rare;
pub mod table1;

pub use config::{parse_kv, KeyValue};
pub use hptn::{hptn_curve, HptnPoint, TrialReconstruction};
pub use rare::{
    build_rare_dataset, coverage_from_bounds, hr_grid, rare_bounds, rare_coverage, rare_profile_loglik,
    rare_risk_ratios, rare_sweep, RareCase, RareCoverage, RareTrialSpec,
};
pub use table1::{gen_table1, mc_coverage, mc_coverage_methods, CoverageReport, ScenarioSpec};
