//! Metrics, stability diagnostics and policy comparison.

mod compare;
mod drift;
mod log;
mod metrics;
mod probe;
mod sandwich;

pub use compare::{compare_policies, Comparison, ComparisonRow, ComparisonRun};
pub use drift::{default_k_cap, fit_drift_certificate, sample_states, DriftCertificate};
pub use log::{network_hash, simulate, simulate_profile, LogMeta, StepRecord, TrajectoryLog};
pub use metrics::{
    compute_metrics, l1, l2_squared, linf, read_metrics_csv, write_metrics_csv, write_metrics_csv_many, MetricRow,
};
pub use probe::{boundedness_probe, classify, ProbeReport, ProbeSettings, Verdict};
pub use sandwich::{lyapunov_bounds_check, sandwich_constant, SandwichReport};
