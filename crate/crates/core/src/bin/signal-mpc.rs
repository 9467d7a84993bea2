use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use signal_mpc::controllers::ControllerId;
use signal_mpc::network::NetworkConfig;
use signal_mpc::scenario::{
    load_config, run_scenario_to, BoundsSource, ControllerSettings, DemandSpec, Experiment, InitialState,
    NetworkSource, OutputPaths, Preset, ScenarioConfig,
};
use signal_mpc::{check_demand_feasible, solve_flow, Error, FeasibilityCertificate, FlowVector};

/// Simulation, identification and one-step MPC for signalized traffic networks.
#[derive(Parser)]
#[command(name = "signal-mpc", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Closed-loop simulation with one controller.
    Simulate {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum)]
        controller: Option<ControllerArg>,
        #[arg(long)]
        horizon: Option<usize>,
    },
    /// Identify saturation rates and turn ratios from prior bounds.
    Identify {
        #[command(flatten)]
        common: Common,
        /// Prior bounds file; overrides the scenario's bounds.
        #[arg(long)]
        bounds: Option<PathBuf>,
        /// Control steps after identification; 0 stops when identification ends.
        #[arg(long)]
        horizon: Option<usize>,
    },
    /// Run several controllers from the same initial state.
    Compare {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum, value_delimiter = ',')]
        controllers: Vec<ControllerArg>,
        #[arg(long)]
        horizon: Option<usize>,
    },
    /// Steady flows and the demand feasibility certificate.
    Feasibility {
        #[command(flatten)]
        common: Common,
        /// Constant demand on every entry link; overrides the configured demand.
        #[arg(long)]
        lambda: Option<f64>,
    },
    /// Check a scenario or network file without running it.
    Validate {
        #[command(flatten)]
        common: Common,
        /// Write the resolved network, with its demand, to this file.
        #[arg(long)]
        emit_network: Option<PathBuf>,
    },
}

#[derive(Args)]
struct Common {
    /// Scenario file, or a network file.
    #[arg(long, conflicts_with = "preset")]
    config: Option<PathBuf>,
    #[arg(long, value_enum)]
    preset: Option<PresetArg>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory. `identify` also accepts a `.csv` path for the telemetry.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum PresetArg {
    Fig3,
    Fig4,
    Grid,
}

impl From<PresetArg> for Preset {
    fn from(p: PresetArg) -> Self {
        match p {
            PresetArg::Fig3 => Preset::Fig3,
            PresetArg::Fig4 => Preset::Fig4,
            PresetArg::Grid => Preset::Grid,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum ControllerArg {
    OneStepMpc,
    MaxPressure,
    PropFair,
    FixedTime,
}

impl From<ControllerArg> for ControllerId {
    fn from(c: ControllerArg) -> Self {
        match c {
            ControllerArg::OneStepMpc => ControllerId::OneStepMpc,
            ControllerArg::MaxPressure => ControllerId::MaxPressure,
            ControllerArg::PropFair => ControllerId::PropFair,
            ControllerArg::FixedTime => ControllerId::FixedTime,
        }
    }
}

/// A scenario wrapped around a bare network file.
fn scenario_from_network(path: &Path, net_cfg: &NetworkConfig) -> anyhow::Result<ScenarioConfig> {
    let net = net_cfg.build()?;
    let rates = net_cfg.demand_rates(net.topology())?;
    Ok(ScenarioConfig {
        name: path.file_stem().map(|s| s.to_string_lossy().into_owned()),
        experiment: Experiment::Simulate,
        network: NetworkSource::File { path: std::path::absolute(path)? },
        demand: DemandSpec::Rates(rates),
        initial_state: InitialState::default(),
        controller: ControllerSettings::new(ControllerId::OneStepMpc),
        compare: ControllerId::ALL.to_vec(),
        horizon: 300,
        seed: 0,
        output: None,
        bounds: None,
        identification: Default::default(),
        focus_link: None,
        base_dir: None,
    })
}

fn load(common: &Common) -> anyhow::Result<ScenarioConfig> {
    let mut cfg = match (&common.config, common.preset) {
        (Some(path), _) => {
            let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            let value: serde_json::Value = serde_json::from_str(&text)
                .map_err(Error::from)
                .with_context(|| format!("parsing {}", path.display()))?;
            if value.get("links").is_some() {
                let net_cfg = NetworkConfig::from_json(&text).with_context(|| format!("parsing {}", path.display()))?;
                scenario_from_network(path, &net_cfg)?
            } else {
                load_config(path).with_context(|| format!("loading {}", path.display()))?
            }
        }
        (None, Some(p)) => Preset::from(p).config(),
        (None, None) => bail!(Error::config("--config", "one of --config or --preset is required")),
    };
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn output_paths(cfg: &ScenarioConfig, out: Option<&Path>, telemetry_file: bool) -> OutputPaths {
    match out {
        Some(p) if telemetry_file && p.extension().is_some_and(|e| e == "csv") => {
            OutputPaths { dir: p.parent().map(Path::to_path_buf).unwrap_or_default(), telemetry: Some(p.to_path_buf()) }
        }
        Some(p) => OutputPaths::in_dir(p),
        None => OutputPaths::in_dir(cfg.output.as_ref().map(|p| cfg.resolve_path(p)).unwrap_or_else(|| "out".into())),
    }
}

/// Writes to stdout; a reader that closed the pipe early is not an error.
fn emit(text: &str) -> anyhow::Result<()> {
    let mut out = std::io::stdout().lock();
    match out.write_all(text.as_bytes()).and_then(|()| out.flush()) {
        Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => Ok(()),
        r => Ok(r?),
    }
}

fn run(cfg: ScenarioConfig, out: OutputPaths) -> anyhow::Result<()> {
    let report = run_scenario_to(&cfg, &out)?;
    emit(&report.summary)?;
    for f in &report.files {
        log::info!("wrote {}", f.display());
    }
    Ok(())
}

#[derive(Serialize)]
struct FeasibilityReport {
    demand: Vec<f64>,
    flow: FlowVector,
    certificate: FeasibilityCertificate,
}

fn execute(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Simulate { common, controller, horizon } => {
            let mut cfg = load(&common)?;
            cfg.experiment = Experiment::Simulate;
            if let Some(c) = controller {
                cfg.controller.id = c.into();
            }
            if let Some(h) = horizon {
                cfg.horizon = h;
            }
            let out = output_paths(&cfg, common.out.as_deref(), false);
            run(cfg, out)
        }
        Command::Identify { common, bounds, horizon } => {
            let mut cfg = load(&common)?;
            if let Some(b) = bounds {
                cfg.bounds = Some(BoundsSource::File(std::path::absolute(b)?));
            }
            cfg.experiment = match (cfg.experiment, horizon) {
                (_, Some(0)) => Experiment::Identify,
                (Experiment::IdentifyThenControl, _) | (_, Some(_)) => Experiment::IdentifyThenControl,
                _ => Experiment::Identify,
            };
            if let Some(h) = horizon.filter(|&h| h > 0) {
                cfg.horizon = h;
            }
            let out = output_paths(&cfg, common.out.as_deref(), true);
            run(cfg, out)
        }
        Command::Compare { common, controllers, horizon } => {
            let mut cfg = load(&common)?;
            cfg.experiment = Experiment::Compare;
            if !controllers.is_empty() {
                cfg.compare = controllers.into_iter().map(ControllerId::from).collect();
            }
            if let Some(h) = horizon {
                cfg.horizon = h;
            }
            let out = output_paths(&cfg, common.out.as_deref(), false);
            run(cfg, out)
        }
        Command::Feasibility { common, lambda } => {
            let mut cfg = load(&common)?;
            if let Some(l) = lambda {
                cfg.demand = DemandSpec::Constant(l);
            }
            cfg.validate()?;
            let r = cfg.resolve()?;
            if !r.is_constant() {
                bail!(Error::config("demand", "feasibility needs constant demand"));
            }
            let demand = &r.demand[0].1;
            let report = FeasibilityReport {
                demand: demand.as_slice().to_vec(),
                flow: solve_flow(&r.net, demand)?,
                certificate: check_demand_feasible(&r.net, demand)?,
            };
            let json = serde_json::to_string_pretty(&report)?;
            emit(&format!("{json}\n"))?;
            if let Some(dir) = common.out {
                std::fs::create_dir_all(&dir)?;
                std::fs::write(dir.join("feasibility.json"), format!("{json}\n"))?;
            }
            Ok(())
        }
        Command::Validate { common, emit_network } => {
            let cfg = load(&common)?;
            cfg.validate()?;
            let r = cfg.resolve()?;
            if cfg.bounds.is_some() {
                let b = cfg.prior_bounds(&r)?;
                if let Some(v) = b.check(r.net.topology())?.first() {
                    bail!(Error::config("bounds", v.to_string()));
                }
            }
            emit(&format!(
                "ok: {} nodes, {} links, {} movements, {} phases, experiment {}\n",
                r.net.num_nodes(),
                r.net.links().len(),
                r.net.num_movements(),
                r.net.num_controls(),
                cfg.experiment.as_str()
            ))?;
            if let Some(path) = emit_network {
                let text = NetworkConfig::from_network(&r.net, Some(r.demand[0].1.as_slice())).to_json()?;
                std::fs::write(&path, format!("{text}\n")).with_context(|| format!("writing {}", path.display()))?;
            }
            Ok(())
        }
    }
}

/// 2 for configuration problems, 3 when identification aborts, 1 otherwise.
fn exit_code(err: &anyhow::Error) -> u8 {
    match err.chain().find_map(|e| e.downcast_ref::<Error>()) {
        Some(Error::Config { .. } | Error::Parse(_) | Error::Structure(_)) => 2,
        Some(Error::Identification(_)) => 3,
        _ => 1,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("SIGNAL_MPC_LOG", "warn")).init();
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
