//! Scenario files, built-in presets and the experiment runner.

mod config;
mod presets;
mod run;

pub use config::{
    load_config, parse_config, BoundsSource, ControllerSettings, DemandSegment, DemandSpec, Experiment, InitialState,
    NetworkSource, ResolvedScenario, ScenarioConfig,
};
pub use presets::Preset;
pub use run::{run_scenario, run_scenario_to, OutputPaths, ScenarioReport};
