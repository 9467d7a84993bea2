//! Finite-time identification of saturation rates and turn ratios.

mod bounds;
mod estimators;
mod explore;
mod plant;
mod run;
mod terminal;

pub use bounds::{BoundsFile, BoundsViolation, DemandBounds, MovementBounds, ParameterBounds};
pub use estimators::{
    estimate_c_entry_exit, estimate_c_entry_internal, estimate_c_internal, estimate_r_internal, upstream_mass,
};
pub use explore::{augmented_mpc_step, plan_exploration, AugmentedStep, ExplorationConfig, ExplorationPlan};
pub use plant::{Plant, SimulatedPlant};
pub use run::{
    run_identification, EventKind, IdentificationConfig, IdentificationOutcome, IdentificationTelemetry, RunStatus,
    TargetTelemetry, TelemetryEvent,
};
pub use terminal::{find_terminal_u, terminal_membership, TargetKind, TerminalSetSpec, DEFAULT_MIN_SIGNAL};
