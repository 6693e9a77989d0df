//! Experiment driver: config loading, the α-sweeps, the stability study,
//! the oracle battery and report emission.

mod config;
pub mod presets;
mod report;
mod studies;

pub use config::{load_config, parse_config, LatticeConfig, RunConfig, SamplingConfig, StabilityConfig, Tolerances};
pub use report::{num, write_reports, Manifest, Report, Table, SCHEMA_VERSION};
pub use studies::{
    a_priori_bound, brute_force_battery, closed_form_battery, degenerate_battery, exact_refinement, generator_distance, loglog_slope, oracle_report,
    picard_battery, refinement_for_tolerance, run_convergence, run_generator_distance, run_norm_audit, run_oracle_battery, run_stability,
    stability_bound, worst_case_occupation, BatteryOptions, ConvergenceRow, ConvergenceStudy, DistanceRow, DistanceStudy, NormAudit, NormAuditRow,
    NormVerdicts, StabilityRow, StabilityStudy,
};
