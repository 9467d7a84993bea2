use std::path::{Path, PathBuf};

use log::warn;
use serde::{Deserialize, Serialize};

use crate::controllers::{ControllerId, EpsilonConstant, OneStepConfig};
use crate::dynamics::{DemandVector, QueueState};
use crate::error::{Error, Result};
use crate::identification::{BoundsFile, IdentificationConfig, ParameterBounds};
use crate::network::generators::{make_grid, GridParams};
use crate::network::{LinkId, Network, NetworkConfig};

/// What a scenario runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    #[default]
    Simulate,
    Compare,
    Identify,
    /// Identification followed by one-step MPC on the identified model.
    IdentifyThenControl,
}

impl Experiment {
    pub fn as_str(self) -> &'static str {
        match self {
            Experiment::Simulate => "simulate",
            Experiment::Compare => "compare",
            Experiment::Identify => "identify",
            Experiment::IdentifyThenControl => "identify-then-control",
        }
    }
}

/// Where the network comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "kebab-case", deny_unknown_fields)]
pub enum NetworkSource {
    /// A grid of four-way intersections. Omitted fields take the values of
    /// the 2×2 experiment grid.
    Grid {
        #[serde(default = "two")]
        rows: usize,
        #[serde(default = "two")]
        cols: usize,
        #[serde(default)]
        internal_turn_ratios: Option<[f64; 3]>,
        #[serde(default)]
        entry_turn_ratios: Option<[f64; 3]>,
        #[serde(default)]
        lane_saturation: Option<[f64; 3]>,
    },
    /// A network configuration file, resolved relative to the scenario file.
    File { path: PathBuf },
}

fn two() -> usize {
    2
}

/// External demand on the entry links.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub enum DemandSpec {
    /// The same rate on every entry link.
    Constant(f64),
    /// One rate per entry link, in entry-link order.
    Rates(Vec<f64>),
    /// Piecewise-constant rates. Experimental.
    Profile(Vec<DemandSegment>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DemandSegment {
    /// First step at which `rates` apply.
    pub from_step: usize,
    pub rates: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum InitialState {
    Uniform(f64),
    Queues(Vec<f64>),
}

impl Default for InitialState {
    fn default() -> Self {
        InitialState::Uniform(1.0)
    }
}

/// Controller choice and the one-step MPC hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControllerSettings {
    pub id: ControllerId,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    #[serde(default = "default_restarts")]
    pub restarts: usize,
    #[serde(default = "default_grid_resolution")]
    pub grid_resolution: f64,
    #[serde(default = "default_max_grid_points")]
    pub max_grid_points: usize,
    #[serde(default = "default_max_sweeps")]
    pub max_sweeps: usize,
}

fn default_epsilon() -> f64 {
    EpsilonConstant::DEFAULT
}
fn default_restarts() -> usize {
    OneStepConfig::default().restarts
}
fn default_grid_resolution() -> f64 {
    OneStepConfig::default().grid_resolution
}
fn default_max_grid_points() -> usize {
    OneStepConfig::default().max_grid_points
}
fn default_max_sweeps() -> usize {
    OneStepConfig::default().max_sweeps
}

impl ControllerSettings {
    pub fn new(id: ControllerId) -> Self {
        Self {
            id,
            epsilon: default_epsilon(),
            restarts: default_restarts(),
            grid_resolution: default_grid_resolution(),
            max_grid_points: default_max_grid_points(),
            max_sweeps: default_max_sweeps(),
        }
    }

    pub fn solver(&self, seed: u64) -> OneStepConfig {
        OneStepConfig {
            restarts: self.restarts,
            grid_resolution: self.grid_resolution,
            max_grid_points: self.max_grid_points,
            max_sweeps: self.max_sweeps,
            seed,
            ..OneStepConfig::default()
        }
    }
}

/// Prior parameter knowledge for identification.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub enum BoundsSource {
    /// True values widened by this margin on both sides.
    Margin(f64),
    /// A bounds file, resolved relative to the scenario file.
    File(PathBuf),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(default)]
    pub name: Option<String>,
    #[serde(default)]
    pub experiment: Experiment,
    pub network: NetworkSource,
    pub demand: DemandSpec,
    #[serde(default)]
    pub initial_state: InitialState,
    pub controller: ControllerSettings,
    /// Controllers run by the compare experiment.
    #[serde(default = "all_controllers")]
    pub compare: Vec<ControllerId>,
    /// Closed-loop steps; after identification when the experiment
    /// continues with control.
    pub horizon: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub output: Option<PathBuf>,
    #[serde(default)]
    pub bounds: Option<BoundsSource>,
    #[serde(default)]
    pub identification: IdentificationConfig,
    /// Link whose movement queues get their own CSV.
    #[serde(default)]
    pub focus_link: Option<LinkId>,
    /// Directory that relative paths resolve against. Set by the loader.
    #[serde(skip)]
    pub base_dir: Option<PathBuf>,
}

fn all_controllers() -> Vec<ControllerId> {
    ControllerId::ALL.to_vec()
}

/// Built objects a scenario runs on.
#[derive(Debug, Clone)]
pub struct ResolvedScenario {
    pub net: Network,
    /// Demand per step segment: `(from_step, demand)`, sorted, first at 0.
    pub demand: Vec<(usize, DemandVector)>,
    pub x0: QueueState,
}

impl ResolvedScenario {
    /// Demand in force during step `t → t + 1`.
    pub fn demand_at(&self, t: usize) -> &DemandVector {
        let pos = self.demand.partition_point(|(from, _)| *from <= t);
        &self.demand[pos.saturating_sub(1)].1
    }

    pub fn is_constant(&self) -> bool {
        self.demand.len() == 1
    }
}

/// Parses and validates a scenario. Serde diagnostics carry the line, column
/// and offending field.
pub fn parse_config(text: &str) -> Result<ScenarioConfig> {
    let cfg: ScenarioConfig = serde_json::from_str(text)?;
    cfg.validate()?;
    Ok(cfg)
}

/// Reads a scenario file; relative paths inside it resolve against its directory.
pub fn load_config(path: &Path) -> Result<ScenarioConfig> {
    let text = std::fs::read_to_string(path)?;
    let mut cfg: ScenarioConfig = serde_json::from_str(&text)?;
    cfg.base_dir = path.parent().map(Path::to_path_buf);
    cfg.validate()?;
    Ok(cfg)
}

fn check_rates(field: &str, rates: &[f64]) -> Result<()> {
    if let Some(r) = rates.iter().find(|r| !(r.is_finite() && **r >= 0.0)) {
        return Err(Error::config(field, format!("demand must be nonnegative and finite, got {r}")));
    }
    Ok(())
}

impl ScenarioConfig {
    pub fn resolve_path(&self, p: &Path) -> PathBuf {
        match &self.base_dir {
            Some(base) if p.is_relative() => base.join(p),
            _ => p.to_path_buf(),
        }
    }

    /// Checks every invariant that does not need the built network.
    pub fn validate(&self) -> Result<()> {
        if self.horizon < 1 {
            return Err(Error::config("horizon", "must be at least 1"));
        }
        match &self.demand {
            DemandSpec::Constant(r) => check_rates("demand.constant", std::slice::from_ref(r))?,
            DemandSpec::Rates(r) => check_rates("demand.rates", r)?,
            DemandSpec::Profile(segments) => {
                if segments.first().map(|s| s.from_step) != Some(0) {
                    return Err(Error::config("demand.profile", "the first segment must start at step 0"));
                }
                if segments.windows(2).any(|w| w[0].from_step >= w[1].from_step) {
                    return Err(Error::config("demand.profile", "segments must start at increasing steps"));
                }
                for s in segments {
                    check_rates("demand.profile.rates", &s.rates)?;
                }
            }
        }
        match &self.initial_state {
            InitialState::Uniform(v) if !(v.is_finite() && *v >= 0.0) => {
                return Err(Error::config("initial_state", format!("queues must be nonnegative, got {v}")));
            }
            InitialState::Queues(q) if q.iter().any(|v| !(v.is_finite() && *v >= 0.0)) => {
                return Err(Error::config("initial_state", "queues must be nonnegative"));
            }
            _ => {}
        }
        EpsilonConstant::new(self.controller.epsilon)
            .map_err(|_| Error::config("controller.epsilon", "must be positive and finite"))?;
        self.controller.solver(self.seed).validate()?;
        if self.experiment == Experiment::Compare && self.compare.is_empty() {
            return Err(Error::config("compare", "needs at least one controller"));
        }
        if let Some(dup) = self.compare.iter().enumerate().find(|(i, c)| self.compare[..*i].contains(c)) {
            return Err(Error::config("compare", format!("{} is listed twice", dup.1)));
        }
        if matches!(self.experiment, Experiment::Identify | Experiment::IdentifyThenControl) {
            if self.bounds.is_none() {
                return Err(Error::config("bounds", "identification needs prior bounds"));
            }
            self.identification.validate().map_err(|e| Error::config("identification", e.to_string()))?;
        }
        if let Some(BoundsSource::Margin(m)) = &self.bounds {
            if !(m.is_finite() && *m >= 0.0) {
                return Err(Error::config("bounds.margin", "must be nonnegative"));
            }
        }
        if let NetworkSource::File { path } = &self.network {
            let p = self.resolve_path(path);
            if !p.is_file() {
                return Err(Error::config("network.path", format!("{} does not exist", p.display())));
            }
        }
        if let Some(BoundsSource::File(path)) = &self.bounds {
            let p = self.resolve_path(path);
            if !p.is_file() {
                return Err(Error::config("bounds.file", format!("{} does not exist", p.display())));
            }
        }
        Ok(())
    }

    pub fn network_config(&self) -> Result<NetworkConfig> {
        match &self.network {
            NetworkSource::Grid { rows, cols, internal_turn_ratios, entry_turn_ratios, lane_saturation } => {
                if *rows == 0 || *cols == 0 {
                    return Err(Error::config("network.rows", "grid needs at least one row and column"));
                }
                let d = GridParams::default();
                let net = make_grid(&GridParams {
                    rows: *rows,
                    cols: *cols,
                    internal_turn_ratios: internal_turn_ratios.unwrap_or(d.internal_turn_ratios),
                    entry_turn_ratios: entry_turn_ratios.unwrap_or(d.entry_turn_ratios),
                    lane_saturation: lane_saturation.unwrap_or(d.lane_saturation),
                })?;
                Ok(NetworkConfig::from_network(&net, None))
            }
            NetworkSource::File { path } => {
                let text = std::fs::read_to_string(self.resolve_path(path))?;
                NetworkConfig::from_json(&text)
            }
        }
    }

    /// Builds the network, demand and initial state, checking the
    /// dimension-dependent invariants.
    pub fn resolve(&self) -> Result<ResolvedScenario> {
        let net = self.network_config()?.build()?;
        let n_entry = net.entry_links().len();
        let vector = |field: &str, rates: &[f64]| -> Result<DemandVector> {
            if rates.len() != n_entry {
                return Err(Error::config(
                    field,
                    format!("expected {n_entry} rates, one per entry link, got {}", rates.len()),
                ));
            }
            DemandVector::new(&net, rates.to_vec())
        };
        let demand = match &self.demand {
            DemandSpec::Constant(r) => vec![(0, DemandVector::constant(&net, *r))],
            DemandSpec::Rates(r) => vec![(0, vector("demand.rates", r)?)],
            DemandSpec::Profile(segments) => {
                warn!("time-varying demand profiles are experimental");
                segments
                    .iter()
                    .map(|s| Ok((s.from_step, vector("demand.profile.rates", &s.rates)?)))
                    .collect::<Result<_>>()?
            }
        };
        let x0 = match &self.initial_state {
            InitialState::Uniform(v) => QueueState::filled(&net, *v),
            InitialState::Queues(q) => {
                if q.len() != net.num_movements() {
                    return Err(Error::config(
                        "initial_state",
                        format!("expected {} queues, got {}", net.num_movements(), q.len()),
                    ));
                }
                QueueState::new(&net, q.clone())?
            }
        };
        if let Some(link) = self.focus_link {
            if net.topology().link(link).is_none() {
                return Err(Error::config("focus_link", format!("link {link} is not in the network")));
            }
        }
        Ok(ResolvedScenario { net, demand, x0 })
    }

    /// Prior bounds for identification against the true network.
    pub fn prior_bounds(&self, resolved: &ResolvedScenario) -> Result<ParameterBounds> {
        let net = &resolved.net;
        match &self.bounds {
            None => Err(Error::config("bounds", "identification needs prior bounds")),
            Some(BoundsSource::Margin(m)) => {
                Ok(ParameterBounds::from_truth_margin(net, resolved.demand[0].1.as_slice(), *m))
            }
            Some(BoundsSource::File(path)) => {
                let text = std::fs::read_to_string(self.resolve_path(path))?;
                BoundsFile::from_json(&text)?.to_bounds(net.topology())
            }
        }
    }
}
