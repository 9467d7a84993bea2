use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use log::info;

use crate::analysis::{
    classify, compare_policies, compute_metrics, lyapunov_bounds_check, network_hash, simulate_profile,
    write_metrics_csv, write_metrics_csv_many, LogMeta, MetricRow, ProbeSettings, StepRecord, TrajectoryLog,
};
use crate::controllers::{make_controller, one_step_objective, EpsilonConstant};
use crate::dynamics::QueueState;
use crate::error::{Error, Result};
use crate::flow::{check_demand_feasible, solve_flow};
use crate::identification::{
    run_identification, BoundsFile, IdentificationTelemetry, ParameterBounds, Plant, RunStatus, SimulatedPlant,
    TargetKind,
};
use crate::network::{ControlVector, LinkId, Network, Parameters};
use crate::scenario::config::{Experiment, ResolvedScenario, ScenarioConfig};

/// Where a run writes its files.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OutputPaths {
    pub dir: PathBuf,
    /// Telemetry CSV location; defaults to `telemetry.csv` in `dir`.
    pub telemetry: Option<PathBuf>,
}

impl OutputPaths {
    pub fn in_dir(dir: impl Into<PathBuf>) -> Self {
        Self { dir: dir.into(), telemetry: None }
    }

    fn telemetry_path(&self) -> PathBuf {
        self.telemetry.clone().unwrap_or_else(|| self.dir.join("telemetry.csv"))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioReport {
    pub experiment: Experiment,
    pub files: Vec<PathBuf>,
    pub summary: String,
}

struct Emitter {
    files: Vec<PathBuf>,
}

impl Emitter {
    fn write(&mut self, path: PathBuf, body: impl FnOnce(&mut dyn Write) -> Result<()>) -> Result<()> {
        if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
            std::fs::create_dir_all(parent)?;
        }
        let mut w = BufWriter::new(File::create(&path)?);
        body(&mut w)?;
        w.flush()?;
        self.files.push(path);
        Ok(())
    }
}

/// Runs the scenario and writes its outputs to `cfg.output` (default `out`).
pub fn run_scenario(cfg: &ScenarioConfig) -> Result<ScenarioReport> {
    let dir = cfg.output.clone().map(|p| cfg.resolve_path(&p)).unwrap_or_else(|| PathBuf::from("out"));
    run_scenario_to(cfg, &OutputPaths::in_dir(dir))
}

/// Runs the scenario with explicit output locations. Identical configs give
/// byte-identical files.
pub fn run_scenario_to(cfg: &ScenarioConfig, out: &OutputPaths) -> Result<ScenarioReport> {
    cfg.validate()?;
    let resolved = cfg.resolve()?;
    let mut emit = Emitter { files: Vec::new() };
    let mut summary = String::new();
    header(cfg, &resolved, &mut summary);
    let outcome = match cfg.experiment {
        Experiment::Simulate => run_simulate(cfg, &resolved, out, &mut emit, &mut summary),
        Experiment::Compare => run_compare(cfg, &resolved, out, &mut emit, &mut summary),
        Experiment::Identify | Experiment::IdentifyThenControl => {
            run_identify(cfg, &resolved, out, &mut emit, &mut summary)
        }
    };
    if let Err(e) = &outcome {
        let _ = writeln!(summary, "error = {e}");
    }
    emit.write(out.dir.join("summary.txt"), |w| Ok(w.write_all(summary.as_bytes())?))?;
    outcome?;
    info!("scenario finished; {} files written to {}", emit.files.len(), out.dir.display());
    Ok(ScenarioReport { experiment: cfg.experiment, files: emit.files, summary })
}

fn header(cfg: &ScenarioConfig, r: &ResolvedScenario, s: &mut String) {
    let _ = writeln!(s, "scenario = {}", cfg.name.as_deref().unwrap_or("unnamed"));
    let _ = writeln!(s, "experiment = {}", cfg.experiment.as_str());
    let _ = writeln!(s, "net_hash = {}", network_hash(&r.net));
    let _ = writeln!(s, "nodes = {}", r.net.num_nodes());
    let _ = writeln!(s, "movements = {}", r.net.num_movements());
    let _ = writeln!(s, "seed = {}", cfg.seed);
    let _ = writeln!(s, "horizon = {}", cfg.horizon);
    if r.is_constant() {
        let d = &r.demand[0].1;
        match (solve_flow(&r.net, d), check_demand_feasible(&r.net, d)) {
            (Ok(flow), Ok(cert)) => {
                let _ = writeln!(s, "flow_residual = {}", flow.residual);
                let _ = writeln!(s, "demand_feasible = {}", cert.feasible);
                let _ = writeln!(s, "feasibility_margin = {}", cert.margin);
            }
            (Err(e), _) | (_, Err(e)) => {
                let _ = writeln!(s, "feasibility_error = {e}");
            }
        }
    } else {
        let _ = writeln!(s, "demand = experimental time-varying profile with {} segments", r.demand.len());
    }
}

fn write_trajectory(emit: &mut Emitter, path: PathBuf, net: &Network, log: &TrajectoryLog) -> Result<()> {
    emit.write(path, |w| log.write_csv(net, w))
}

/// Queue series of every movement leaving `link`.
fn write_focus(emit: &mut Emitter, dir: &Path, net: &Network, link: LinkId, log: &TrajectoryLog) -> Result<()> {
    let moves: Vec<usize> = (0..net.num_movements()).filter(|&m| net.movements()[m].from == link).collect();
    emit.write(dir.join(format!("link_{link}_queues.csv")), |w| {
        let mut c = csv::Writer::from_writer(w);
        let mut head = vec!["step".to_string()];
        head.extend(moves.iter().map(|&m| format!("x_{}-{}", link, net.movements()[m].to)));
        c.write_record(&head)?;
        for r in &log.records {
            let mut row = vec![r.step.to_string()];
            row.extend(moves.iter().map(|&m| r.queues[m].to_string()));
            c.write_record(&row)?;
        }
        c.flush()?;
        Ok(())
    })
}

fn trajectory_summary(
    cfg: &ScenarioConfig,
    r: &ResolvedScenario,
    log: &TrajectoryLog,
    metrics: &[MetricRow],
    s: &mut String,
) -> Result<()> {
    let last = metrics.last().expect("metrics are nonempty");
    let n = metrics.len() as f64;
    let _ = writeln!(s, "final_l2_squared = {}", last.l2_squared);
    let _ = writeln!(s, "peak_l2_squared = {}", metrics.iter().map(|m| m.l2_squared).fold(0.0, f64::max));
    let _ = writeln!(s, "time_average_l2_squared = {}", metrics.iter().map(|m| m.l2_squared).sum::<f64>() / n);
    let _ = writeln!(s, "throughput = {}", last.throughput);
    if metrics.len() >= 4 {
        let series: Vec<f64> = metrics[1..].iter().map(|m| m.linf).collect();
        let p = classify(&series, &ProbeSettings::default())?;
        let _ = writeln!(s, "probe_verdict = {}", p.verdict);
        let _ = writeln!(s, "probe_middle_peak = {}", p.middle_peak);
        let _ = writeln!(s, "probe_last_peak = {}", p.last_peak);
        let _ = writeln!(s, "probe_slope = {}", p.slope);
    }
    if r.is_constant() {
        let samples: Vec<(QueueState, ControlVector)> = log
            .records
            .iter()
            .filter_map(|rec| {
                rec.control.clone().map(|u| (QueueState { queues: rec.queues.clone(), ..QueueState::zeros(&r.net) }, u))
            })
            .collect();
        let eps = EpsilonConstant::new(cfg.controller.epsilon)?;
        let sw = lyapunov_bounds_check(&r.net, &r.demand[0].1, eps, None, &samples)?;
        let _ = writeln!(s, "sandwich_max_violation = {}", sw.max_violation());
    }
    Ok(())
}

fn run_simulate(
    cfg: &ScenarioConfig,
    r: &ResolvedScenario,
    out: &OutputPaths,
    emit: &mut Emitter,
    s: &mut String,
) -> Result<()> {
    let mut controller = make_controller(cfg.controller.id, &r.net, &cfg.controller.solver(cfg.seed))?;
    let log = simulate_profile(&r.net, &|t| r.demand_at(t), &r.x0, controller.as_mut(), cfg.horizon, cfg.seed)?;
    let metrics = compute_metrics(&log)?;
    let _ = writeln!(s, "controller = {}", cfg.controller.id);
    write_trajectory(emit, out.dir.join("trajectory.csv"), &r.net, &log)?;
    emit.write(out.dir.join("metrics.csv"), |w| write_metrics_csv(&metrics, cfg.controller.id.as_str(), w))?;
    if let Some(link) = cfg.focus_link {
        write_focus(emit, &out.dir, &r.net, link, &log)?;
    }
    trajectory_summary(cfg, r, &log, &metrics, s)
}

fn run_compare(
    cfg: &ScenarioConfig,
    r: &ResolvedScenario,
    out: &OutputPaths,
    emit: &mut Emitter,
    s: &mut String,
) -> Result<()> {
    if !r.is_constant() {
        return Err(Error::config("demand", "the compare experiment needs constant demand"));
    }
    let cmp =
        compare_policies(&r.net, &r.demand[0].1, &r.x0, &cfg.compare, &cfg.controller.solver(cfg.seed), cfg.horizon)?;
    for run in &cmp.runs {
        write_trajectory(emit, out.dir.join(format!("trajectory_{}.csv", run.controller)), &r.net, &run.log)?;
        if let Some(link) = cfg.focus_link {
            write_focus(emit, &out.dir.join(run.controller.as_str()), &r.net, link, &run.log)?;
        }
    }
    let series: Vec<(&str, &[MetricRow])> =
        cmp.runs.iter().map(|run| (run.controller.as_str(), run.metrics.as_slice())).collect();
    emit.write(out.dir.join("metrics.csv"), |w| write_metrics_csv_many(&series, w))?;
    emit.write(out.dir.join("l2_series.csv"), |w| cmp.write_series_csv(w))?;
    emit.write(out.dir.join("comparison.csv"), |w| cmp.write_summary_csv(w))?;
    for row in &cmp.summary {
        let _ = writeln!(
            s,
            "{}: peak = {}, time_average = {}, final = {}, throughput = {}",
            row.controller, row.peak, row.time_average, row.final_l2_squared, row.throughput
        );
    }
    let best =
        cmp.summary.iter().min_by(|a, b| a.time_average.total_cmp(&b.time_average)).expect("at least one controller");
    let _ = writeln!(s, "lowest_time_average = {}", best.controller);
    Ok(())
}

/// Difference between an estimate and the true value of its target.
fn truth_gap(net: &Network, kind: TargetKind, movement: usize, estimate: f64) -> f64 {
    match kind {
        TargetKind::RInternal => estimate - net.turn_ratio()[movement],
        _ => estimate - net.saturation()[movement],
    }
}

fn write_telemetry(emit: &mut Emitter, path: PathBuf, net: &Network, t: &IdentificationTelemetry) -> Result<()> {
    emit.write(path, |w| {
        let mut c = csv::Writer::from_writer(w);
        c.write_record(["step", "target", "event", "estimate", "truth-gap"])?;
        for e in &t.events {
            let target = &t.targets[e.target];
            let (est, gap) = match e.estimate {
                Some(v) => (v.to_string(), truth_gap(net, target.kind, target.movement, v).to_string()),
                None => (String::new(), String::new()),
            };
            c.write_record([e.step.to_string(), target.label.clone(), e.event.to_string(), est, gap])?;
        }
        c.flush()?;
        Ok(())
    })
}

fn midpoint(lo: &[f64], hi: &[f64]) -> Vec<f64> {
    lo.iter().zip(hi).map(|(a, b)| 0.5 * (a + b)).collect()
}

/// The model a controller sees after identification. Entry turn ratios
/// stay at their interval midpoints; the one-step objective never reads them.
fn identified_network(net: &Network, bounds: &ParameterBounds) -> Result<Network> {
    net.with_params(Parameters {
        saturation: midpoint(&bounds.saturation_lower, &bounds.saturation_upper),
        turn_ratio: midpoint(&bounds.turn_lower, &bounds.turn_upper),
    })
}

fn run_identify(
    cfg: &ScenarioConfig,
    r: &ResolvedScenario,
    out: &OutputPaths,
    emit: &mut Emitter,
    s: &mut String,
) -> Result<()> {
    if !r.is_constant() {
        return Err(Error::config("demand", "identification needs constant demand"));
    }
    let net = &r.net;
    let prior = cfg.prior_bounds(r)?;
    let mut plant = SimulatedPlant::new(net.clone(), r.demand[0].1.clone(), r.x0.clone()).recording();
    let outcome = run_identification(&mut plant, &prior, &cfg.identification)?;
    let tel = &outcome.telemetry;
    write_telemetry(emit, out.telemetry_path(), net, tel)?;
    let _ = writeln!(s, "identification_targets = {}", tel.targets.len());
    let _ = writeln!(s, "identification_steps = {}", tel.total_steps);
    if let RunStatus::Aborted(reason) = &tel.status {
        let _ = writeln!(s, "identification_status = aborted");
        return Err(Error::Identification(reason.clone()));
    }
    let _ = writeln!(s, "identification_status = completed");
    let b = &outcome.bounds;
    let topo = net.topology();
    let mut c_err: f64 = 0.0;
    let mut r_err: f64 = 0.0;
    for m in 0..net.num_movements() {
        c_err = c_err.max((b.saturation_lower[m] - net.saturation()[m]).abs());
        c_err = c_err.max((b.saturation_upper[m] - net.saturation()[m]).abs());
        if net.movement_entry(m).is_none() {
            r_err = r_err.max((b.turn_lower[m] - net.turn_ratio()[m]).abs());
            r_err = r_err.max((b.turn_upper[m] - net.turn_ratio()[m]).abs());
        }
    }
    let _ = writeln!(s, "max_saturation_error = {c_err}");
    let _ = writeln!(s, "max_internal_turn_ratio_error = {r_err}");
    emit.write(out.dir.join("identified_bounds.json"), |w| {
        Ok(w.write_all(BoundsFile::from_bounds(topo, b).to_json()?.as_bytes())?)
    })?;

    let id_steps = plant.steps();
    let mut label = "identification".to_string();
    if cfg.experiment == Experiment::IdentifyThenControl {
        let model = identified_network(net, b)?;
        let mut controller = make_controller(cfg.controller.id, &model, &cfg.controller.solver(cfg.seed))?;
        for t in 0..cfg.horizon {
            let u = controller.control(&model, (id_steps + t) as u64, plant.state())?;
            plant.apply(&u)?;
        }
        label = format!("identification+{}", cfg.controller.id);
        let _ = writeln!(s, "controller = {}", cfg.controller.id);
        let _ = writeln!(s, "control_steps = {}", cfg.horizon);
    }

    let log = history_log(net, &r.x0, plant.history(), cfg.seed, label)?;
    let metrics = compute_metrics(&log)?;
    write_trajectory(emit, out.dir.join("trajectory.csv"), net, &log)?;
    emit.write(out.dir.join("metrics.csv"), |w| write_metrics_csv(&metrics, &log.meta.controller, w))?;
    if let Some(link) = cfg.focus_link {
        write_focus(emit, &out.dir, net, link, &log)?;
    }
    trajectory_summary(cfg, r, &log, &metrics, s)
}

/// Trajectory log of a recorded plant run.
fn history_log(
    net: &Network,
    x0: &QueueState,
    history: &[(ControlVector, QueueState)],
    seed: u64,
    controller: String,
) -> Result<TrajectoryLog> {
    let mut records = Vec::with_capacity(history.len() + 1);
    let mut x = x0;
    let mut exit = vec![0.0; net.exit_links().len()];
    for (t, (u, next)) in history.iter().enumerate() {
        records.push(StepRecord {
            step: t,
            queues: x.queues.clone(),
            control: Some(u.clone()),
            objective: Some(one_step_objective(net, x, u)?),
            exit_volume: exit,
            wall_clock: 0.0,
        });
        exit = next.exit_volume.clone();
        x = next;
    }
    records.push(StepRecord {
        step: history.len(),
        queues: x.queues.clone(),
        control: None,
        objective: None,
        exit_volume: exit,
        wall_clock: 0.0,
    });
    Ok(TrajectoryLog { meta: LogMeta { net_hash: network_hash(net), seed, controller }, records })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::read_metrics_csv;
    use crate::scenario::presets::Preset;

    fn read_dir(dir: &Path) -> Vec<(String, Vec<u8>)> {
        let mut files: Vec<_> = std::fs::read_dir(dir)
            .unwrap()
            .map(|e| e.unwrap().path())
            .filter(|p| p.is_file())
            .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p).unwrap()))
            .collect();
        files.sort();
        files
    }

    #[test]
    fn simulate_is_byte_deterministic_and_round_trips() {
        let mut cfg = Preset::Grid.config();
        cfg.horizon = 12;
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        run_scenario_to(&cfg, &OutputPaths::in_dir(a.path())).unwrap();
        run_scenario_to(&cfg, &OutputPaths::in_dir(b.path())).unwrap();
        assert_eq!(read_dir(a.path()), read_dir(b.path()));
        let net = cfg.resolve().unwrap().net;
        let text = std::fs::read(a.path().join("trajectory.csv")).unwrap();
        let log = TrajectoryLog::read_csv(&net, text.as_slice()).unwrap();
        assert_eq!(log.records.len(), 13);
        let m = read_metrics_csv(File::open(a.path().join("metrics.csv")).unwrap(), "one-step-mpc").unwrap();
        assert_eq!(m, compute_metrics(&log).unwrap());
    }

    #[test]
    fn fig3_identifies_then_controls() {
        let mut cfg = Preset::Fig3.config();
        cfg.horizon = 20;
        let dir = tempfile::tempdir().unwrap();
        let report = run_scenario_to(&cfg, &OutputPaths::in_dir(dir.path())).unwrap();
        assert!(report.summary.contains("identification_status = completed"));
        let tel = std::fs::read_to_string(dir.path().join("telemetry.csv")).unwrap();
        assert!(tel.starts_with("step,target,event,estimate,truth-gap"));
        let mut estimates = 0;
        for rec in csv::Reader::from_reader(tel.as_bytes()).records() {
            let rec = rec.unwrap();
            if !rec[4].is_empty() {
                estimates += 1;
                assert!(rec[4].parse::<f64>().unwrap().abs() <= 1e-9, "{rec:?}");
            }
        }
        let targets: usize =
            report.summary.lines().find_map(|l| l.strip_prefix("identification_targets = ")).unwrap().parse().unwrap();
        assert_eq!(estimates, targets);
        let focus = std::fs::read_to_string(dir.path().join("link_20_queues.csv")).unwrap();
        assert_eq!(focus.lines().next().unwrap().split(',').count(), 4);
        let net = cfg.resolve().unwrap().net;
        let text = std::fs::read(dir.path().join("trajectory.csv")).unwrap();
        let log = TrajectoryLog::read_csv(&net, text.as_slice()).unwrap();
        let id_steps: usize =
            report.summary.lines().find_map(|l| l.strip_prefix("identification_steps = ")).unwrap().parse().unwrap();
        assert_eq!(log.records.len(), id_steps + 20 + 1);
    }

    #[test]
    fn fig4_emits_every_controller() {
        let mut cfg = Preset::Fig4.config();
        cfg.horizon = 10;
        let dir = tempfile::tempdir().unwrap();
        run_scenario_to(&cfg, &OutputPaths::in_dir(dir.path())).unwrap();
        let series = std::fs::read_to_string(dir.path().join("l2_series.csv")).unwrap();
        assert_eq!(series.lines().count(), 1 + 4 * 11);
        for id in crate::controllers::ControllerId::ALL {
            assert!(dir.path().join(format!("trajectory_{id}.csv")).is_file());
            let m = read_metrics_csv(File::open(dir.path().join("metrics.csv")).unwrap(), id.as_str()).unwrap();
            assert_eq!(m.len(), 11);
        }
    }

    #[test]
    fn telemetry_path_override() {
        let mut cfg = Preset::Fig3.config();
        cfg.experiment = Experiment::Identify;
        let dir = tempfile::tempdir().unwrap();
        let out = OutputPaths { dir: dir.path().to_path_buf(), telemetry: Some(dir.path().join("t/ident.csv")) };
        run_scenario_to(&cfg, &out).unwrap();
        assert!(dir.path().join("t/ident.csv").is_file());
        assert!(!dir.path().join("telemetry.csv").exists());
    }
}
