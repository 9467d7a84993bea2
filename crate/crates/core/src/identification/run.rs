//! The identification loop: one terminal set per unknown parameter, visited
//! in a fixed order, each closed by an exact estimate.

use std::fmt;

use log::{debug, info, warn};
use serde::{Deserialize, Serialize};

use crate::controllers::{argmax, max_pressure_phases, phase_pressures, pressure_weights};
use crate::error::{Error, Result};
use crate::identification::estimators::{
    estimate_c_entry_exit, estimate_c_entry_internal, estimate_c_internal, estimate_r_internal, upstream_mass,
};
use crate::identification::explore::{augmented_mpc_step, plan_exploration, ExplorationConfig};
use crate::identification::plant::Plant;
use crate::identification::terminal::{find_terminal_u, TargetKind, TerminalSetSpec, DEFAULT_MIN_SIGNAL};
use crate::identification::ParameterBounds;
use crate::network::{build_signal, ControlVector, LinkClass, Topology};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IdentificationConfig {
    pub exploration: ExplorationConfig,
    /// Per-target step budget as a multiple of the initial plan length plus one.
    pub budget_factor: usize,
    pub min_signal: f64,
    /// Largest accepted distance of an estimate outside its prior interval.
    pub consistency_tolerance: f64,
}

impl Default for IdentificationConfig {
    fn default() -> Self {
        Self {
            exploration: ExplorationConfig::default(),
            budget_factor: 10,
            min_signal: DEFAULT_MIN_SIGNAL,
            consistency_tolerance: 1e-9,
        }
    }
}

impl IdentificationConfig {
    pub fn validate(&self) -> Result<()> {
        if self.budget_factor == 0 {
            return Err(Error::config("budget_factor", "must be positive"));
        }
        if !(self.min_signal > 0.0 && self.min_signal <= 1.0) {
            return Err(Error::config("min_signal", "must lie in (0, 1]"));
        }
        if !(self.consistency_tolerance >= 0.0) {
            return Err(Error::config("consistency_tolerance", "must be nonnegative"));
        }
        if self.exploration.max_horizon == 0 {
            return Err(Error::config("exploration.max_horizon", "must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EventKind {
    /// A control from the bounding-dynamics MPC was applied.
    Explore,
    /// The upstream queues were empty; inflow to them was let through.
    Fill,
    /// The measured state was in the terminal set and its control was applied.
    Terminal,
    /// The parameter was pinned to its estimate.
    Estimate,
    /// The estimate could not be formed and the target was retried.
    Defer,
}

impl EventKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EventKind::Explore => "explore",
            EventKind::Fill => "fill",
            EventKind::Terminal => "terminal",
            EventKind::Estimate => "estimate",
            EventKind::Defer => "defer",
        }
    }
}

impl fmt::Display for EventKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TelemetryEvent {
    /// Plant steps taken before the event.
    pub step: usize,
    /// Position of the target in [`IdentificationTelemetry::targets`].
    pub target: usize,
    pub event: EventKind,
    pub estimate: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetTelemetry {
    pub kind: TargetKind,
    pub movement: usize,
    pub witness: Option<usize>,
    pub label: String,
    /// Length of the constructive plan when the target was opened.
    pub planned_steps: usize,
    pub steps: usize,
    pub terminal_u: Option<ControlVector>,
    pub prior: (f64, f64),
    pub estimate: Option<f64>,
    pub deferrals: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "status", content = "reason")]
pub enum RunStatus {
    Completed,
    Aborted(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdentificationTelemetry {
    /// Targets in the order they were processed.
    pub targets: Vec<TargetTelemetry>,
    pub events: Vec<TelemetryEvent>,
    pub total_steps: usize,
    pub status: RunStatus,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IdentificationOutcome {
    pub bounds: ParameterBounds,
    pub telemetry: IdentificationTelemetry,
}

impl IdentificationOutcome {
    pub fn completed(&self) -> bool {
        self.telemetry.status == RunStatus::Completed
    }
}

/// Processing order: internal-origin movements by index, turn ratio before
/// saturation rate; then entry movements by index.
fn target_order(topo: &Topology) -> Vec<(TargetKind, usize)> {
    let mut order = Vec::new();
    for m in 0..topo.num_movements() {
        if topo.from_class(m) == LinkClass::Internal {
            order.push((TargetKind::RInternal, m));
            order.push((TargetKind::CInternal, m));
        }
    }
    for m in 0..topo.num_movements() {
        if topo.from_class(m) == LinkClass::Entry {
            let kind = match topo.to_class(m) {
                LinkClass::Exit => TargetKind::CEntryExit,
                _ => TargetKind::CEntryInternal,
            };
            order.push((kind, m));
        }
    }
    order
}

fn is_known(bounds: &ParameterBounds, kind: TargetKind, m: usize) -> bool {
    if kind == TargetKind::RInternal {
        bounds.turn_known(m)
    } else {
        bounds.saturation_known(m)
    }
}

/// Downstream movement with known saturation rate and the largest known
/// turn ratio; ties go to the lowest index.
fn choose_witness(topo: &Topology, bounds: &ParameterBounds, m: usize) -> Option<usize> {
    let to = topo.movements()[m].to;
    let mut best: Option<usize> = None;
    for &w in topo.movements_out_of(to) {
        if !(bounds.saturation_known(w) && bounds.turn_known(w) && bounds.turn_lower[w] > 0.0) {
            continue;
        }
        if best.is_none_or(|b| bounds.turn_lower[w] > bounds.turn_lower[b]) {
            best = Some(w);
        }
    }
    best
}

fn midpoint(lo: &[f64], hi: &[f64]) -> Vec<f64> {
    lo.iter().zip(hi).map(|(a, b)| 0.5 * (a + b)).collect()
}

/// Max-pressure under the midpoint parameters, except that node `start(i)`
/// holds a phase serving nothing into link `i`.
fn filling_control(topo: &Topology, bounds: &ParameterBounds, queues: &[f64], target: usize) -> Result<ControlVector> {
    let c = midpoint(&bounds.saturation_lower, &bounds.saturation_upper);
    let r = midpoint(&bounds.turn_lower, &bounds.turn_upper);
    let mut u = ControlVector::vertex(topo, &max_pressure_phases(topo, &c, &r, queues))?;
    let from = topo.movements()[target].from;
    let feeders = topo.movements_into(from);
    let Some(&first) = feeders.first() else {
        return Err(Error::Structure(format!("link {from} has no feeders")));
    };
    let node = topo.movement_node(first);
    let pressures = phase_pressures(topo, &c, &pressure_weights(topo, &r, queues), node);
    let blocking: Vec<usize> = (0..topo.num_phases(node))
        .filter(|&ph| !topo.phases(node)[ph].served.iter().any(|m| feeders.contains(m)))
        .collect();
    if blocking.is_empty() {
        return Err(Error::Structure(format!(
            "no phase at node {} holds back inflow to link {from}",
            topo.nodes()[node]
        )));
    }
    let scores: Vec<f64> = blocking.iter().map(|&ph| pressures[ph]).collect();
    let mut w = vec![0.0; topo.num_phases(node)];
    w[blocking[argmax(&scores)]] = 1.0;
    u.set_node(node, &w);
    Ok(u)
}

fn midpoint_max_pressure(topo: &Topology, bounds: &ParameterBounds, queues: &[f64]) -> Result<ControlVector> {
    let c = midpoint(&bounds.saturation_lower, &bounds.saturation_upper);
    let r = midpoint(&bounds.turn_lower, &bounds.turn_upper);
    ControlVector::vertex(topo, &max_pressure_phases(topo, &c, &r, queues))
}

struct Runner<'p> {
    plant: &'p mut dyn Plant,
    topo: Topology,
    bounds: ParameterBounds,
    config: IdentificationConfig,
    telemetry: IdentificationTelemetry,
}

enum TargetResult {
    Done,
    Abort(String),
}

impl Runner<'_> {
    fn event(&mut self, target: usize, event: EventKind, estimate: Option<f64>) {
        self.telemetry.events.push(TelemetryEvent { step: self.telemetry.total_steps, target, event, estimate });
    }

    fn apply(&mut self, slot: usize, u: &ControlVector) -> Result<()> {
        self.plant.apply(u)?;
        self.telemetry.total_steps += 1;
        self.telemetry.targets[slot].steps += 1;
        Ok(())
    }

    fn estimate(&self, spec: &TerminalSetSpec, prev: &[f64], u: &ControlVector) -> Result<Option<f64>> {
        let topo = &self.topo;
        let b = &self.bounds;
        let next = self.plant.state();
        let t = spec.target;
        let signal = build_signal(topo, u)?;
        Ok(match spec.kind {
            TargetKind::RInternal => estimate_r_internal(topo, prev, &next.queues, t),
            TargetKind::CInternal => Some(estimate_c_internal(topo, prev, &next.queues, &signal, b.turn_lower[t], t)?),
            TargetKind::CEntryExit => {
                let to = topo.movements()[t].to;
                let pos = topo
                    .exit_links()
                    .iter()
                    .position(|&l| l == to)
                    .ok_or_else(|| Error::Structure(format!("link {to} is not an exit link")))?;
                Some(estimate_c_entry_exit(topo, prev, next.exit_volume[pos], &signal, t)?)
            }
            TargetKind::CEntryInternal => {
                let w = spec.witness.expect("entry-to-internal specs carry a witness");
                Some(estimate_c_entry_internal(
                    topo,
                    prev,
                    &next.queues,
                    &signal,
                    b.saturation_lower[w],
                    b.turn_lower[w],
                    t,
                    w,
                )?)
            }
        })
    }

    fn target(&mut self, slot: usize, spec: &TerminalSetSpec) -> Result<TargetResult> {
        let t = spec.target;
        let kind = spec.kind;
        let x0 = self.plant.state().clone();
        let planned = match plan_exploration(&self.topo, &self.bounds, spec, &x0, &self.config.exploration) {
            Ok(plan) => plan.controls.len(),
            Err(Error::HorizonTooShort { horizon }) => {
                return Ok(TargetResult::Abort(format!(
                    "{}: no plan reaches the terminal set within {horizon} steps",
                    spec.label(&self.topo)
                )))
            }
            Err(e) => return Ok(TargetResult::Abort(format!("{}: {e}", spec.label(&self.topo)))),
        };
        self.telemetry.targets[slot].planned_steps = planned;
        let budget = self.config.budget_factor * (planned + 1);
        debug!("{}: planned {planned} steps, budget {budget}", spec.label(&self.topo));

        loop {
            if self.telemetry.targets[slot].steps >= budget {
                return Ok(TargetResult::Abort(format!("{}: step budget {budget} exhausted", spec.label(&self.topo))));
            }
            let x = self.plant.state().clone();
            let base = midpoint_max_pressure(&self.topo, &self.bounds, &x.queues)?;
            let terminal = find_terminal_u(&self.topo, &self.bounds, spec, &x.queues, &x.queues, &base);

            if let Some(u) = terminal {
                if kind == TargetKind::RInternal && upstream_mass(&self.topo, &x.queues, t) <= 0.0 {
                    self.telemetry.targets[slot].deferrals += 1;
                    self.event(slot, EventKind::Defer, None);
                    let fill = filling_control(&self.topo, &self.bounds, &x.queues, t)?;
                    self.event(slot, EventKind::Fill, None);
                    self.apply(slot, &fill)?;
                    continue;
                }
                self.event(slot, EventKind::Terminal, None);
                self.apply(slot, &u)?;
                self.telemetry.targets[slot].terminal_u = Some(u.clone());
                let Some(value) = self.estimate(spec, &x.queues, &u)? else {
                    self.telemetry.targets[slot].deferrals += 1;
                    self.event(slot, EventKind::Defer, None);
                    continue;
                };
                let (lo, hi) = self.telemetry.targets[slot].prior;
                let tol = self.config.consistency_tolerance;
                if !value.is_finite() || value < lo - tol || value > hi + tol {
                    self.telemetry.targets[slot].estimate = Some(value);
                    return Ok(TargetResult::Abort(format!(
                        "{}: estimate {value} lies outside the prior interval [{lo}, {hi}]",
                        spec.label(&self.topo)
                    )));
                }
                let pinned = value.clamp(lo, hi);
                if kind == TargetKind::RInternal {
                    self.bounds.pin_turn(t, pinned);
                } else {
                    self.bounds.pin_saturation(t, pinned);
                }
                self.telemetry.targets[slot].estimate = Some(pinned);
                self.event(slot, EventKind::Estimate, Some(pinned));
                debug!("{} = {pinned}", spec.label(&self.topo));
                return Ok(TargetResult::Done);
            }

            let mut horizon = self.config.exploration.max_horizon;
            let step = loop {
                match augmented_mpc_step(&self.topo, &self.bounds, &x, spec, horizon, &self.config.exploration) {
                    Err(Error::HorizonTooShort { .. }) if horizon < 4 * self.config.exploration.max_horizon => {
                        horizon *= 2;
                    }
                    other => break other,
                }
            };
            let step = match step {
                Ok(s) => s,
                Err(Error::HorizonTooShort { horizon }) => {
                    return Ok(TargetResult::Abort(format!(
                        "{}: no plan reaches the terminal set within {horizon} steps",
                        spec.label(&self.topo)
                    )))
                }
                Err(e) => return Ok(TargetResult::Abort(format!("{}: {e}", spec.label(&self.topo)))),
            };
            self.event(slot, EventKind::Explore, None);
            self.apply(slot, &step.u)?;
        }
    }
}

/// Identifies every saturation rate and every internal-origin turn ratio of
/// `plant`, starting from `bounds`. The plant's parameters are only observed
/// through its measured state. Running out of step budget, or an estimate
/// that contradicts the prior bounds, ends the run with
/// [`RunStatus::Aborted`] and returns the bounds collapsed so far.
pub fn run_identification(
    plant: &mut dyn Plant,
    bounds: &ParameterBounds,
    config: &IdentificationConfig,
) -> Result<IdentificationOutcome> {
    config.validate()?;
    let topo = plant.topology().clone();
    bounds.check_dims(&topo)?;
    let violations = bounds.check(&topo)?;
    if let Some(v) = violations.first() {
        return Err(Error::InvalidInput(format!("bounds violate their structural requirements: {v:?}")));
    }
    let mut runner = Runner {
        plant,
        topo,
        bounds: bounds.clone(),
        config: config.clone(),
        telemetry: IdentificationTelemetry {
            targets: Vec::new(),
            events: Vec::new(),
            total_steps: 0,
            status: RunStatus::Completed,
        },
    };

    for (kind, m) in target_order(&runner.topo) {
        if is_known(&runner.bounds, kind, m) {
            continue;
        }
        let witness = if kind == TargetKind::CEntryInternal {
            match choose_witness(&runner.topo, &runner.bounds, m) {
                Some(w) => Some(w),
                None => {
                    let mv = runner.topo.movements()[m];
                    runner.telemetry.status = RunStatus::Aborted(format!(
                        "movement ({},{}): no downstream movement with known saturation rate and positive turn ratio",
                        mv.from, mv.to
                    ));
                    break;
                }
            }
        } else {
            None
        };
        let mut spec = TerminalSetSpec::new(&runner.topo, kind, m, witness)?;
        spec.min_signal = runner.config.min_signal;
        let prior = if kind == TargetKind::RInternal {
            (runner.bounds.turn_lower[m], runner.bounds.turn_upper[m])
        } else {
            (runner.bounds.saturation_lower[m], runner.bounds.saturation_upper[m])
        };
        runner.telemetry.targets.push(TargetTelemetry {
            kind,
            movement: m,
            witness,
            label: spec.label(&runner.topo),
            planned_steps: 0,
            steps: 0,
            terminal_u: None,
            prior,
            estimate: None,
            deferrals: 0,
        });
        let slot = runner.telemetry.targets.len() - 1;
        match runner.target(slot, &spec)? {
            TargetResult::Done => {}
            TargetResult::Abort(reason) => {
                warn!("identification aborted: {reason}");
                runner.telemetry.status = RunStatus::Aborted(reason);
                break;
            }
        }
    }
    info!(
        "identification {} after {} steps over {} targets",
        match runner.telemetry.status {
            RunStatus::Completed => "completed",
            RunStatus::Aborted(_) => "aborted",
        },
        runner.telemetry.total_steps,
        runner.telemetry.targets.len()
    );
    Ok(IdentificationOutcome { bounds: runner.bounds, telemetry: runner.telemetry })
}
