use std::io::{BufRead, Write};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::controllers::{one_step_objective, Controller};
use crate::dynamics::{step, DemandVector, QueueState};
use crate::error::{Error, Result};
use crate::network::{ControlVector, Network, NetworkConfig};

/// Hex SHA-256 of the network's canonical JSON form.
pub fn network_hash(net: &Network) -> String {
    let json = NetworkConfig::from_network(net, None).to_json().expect("network configs always serialize");
    Sha256::digest(json.as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LogMeta {
    pub net_hash: String,
    pub seed: u64,
    pub controller: String,
}

/// State `x(t)` together with the control chosen there and the exit volume
/// of the step that produced it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub step: usize,
    pub queues: Vec<f64>,
    /// `None` on the last record.
    pub control: Option<ControlVector>,
    /// One-step MPC objective of `control` at `queues`.
    pub objective: Option<f64>,
    /// Volume that left through each exit link during step `t − 1 → t`.
    pub exit_volume: Vec<f64>,
    /// Seconds spent computing `control`. Not written to CSV.
    pub wall_clock: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryLog {
    pub meta: LogMeta,
    pub records: Vec<StepRecord>,
}

/// Runs `controller` in closed loop for `horizon` steps from `x0` under
/// constant demand. The log holds `horizon + 1` records.
pub fn simulate(
    net: &Network,
    demand: &DemandVector,
    x0: &QueueState,
    controller: &mut dyn Controller,
    horizon: usize,
    seed: u64,
) -> Result<TrajectoryLog> {
    simulate_profile(net, &|_| demand, x0, controller, horizon, seed)
}

/// As [`simulate`], with `demand_at(t)` applied during step `t → t + 1`.
pub fn simulate_profile<'d>(
    net: &Network,
    demand_at: &dyn Fn(usize) -> &'d DemandVector,
    x0: &QueueState,
    controller: &mut dyn Controller,
    horizon: usize,
    seed: u64,
) -> Result<TrajectoryLog> {
    if x0.queues.len() != net.num_movements() {
        return Err(Error::dim("initial state", net.num_movements(), x0.queues.len()));
    }
    let mut records = Vec::with_capacity(horizon + 1);
    let mut x = x0.clone();
    let mut exit = vec![0.0; net.exit_links().len()];
    for t in 0..=horizon {
        let (control, objective, wall_clock) = if t < horizon {
            let start = Instant::now();
            let u = controller
                .control(net, t as u64, &x)
                .map_err(|e| Error::Numerical(format!("controller {} failed at step {t}: {e}", controller.id())))?;
            let wall = start.elapsed().as_secs_f64();
            let j = one_step_objective(net, &x, &u)?;
            (Some(u), Some(j), wall)
        } else {
            (None, None, 0.0)
        };
        records.push(StepRecord {
            step: t,
            queues: x.queues.clone(),
            control: control.clone(),
            objective,
            exit_volume: exit.clone(),
            wall_clock,
        });
        if let Some(u) = control {
            x = step(net, &x, &u, demand_at(t))?;
            exit.clone_from(&x.exit_volume);
        }
    }
    Ok(TrajectoryLog {
        meta: LogMeta { net_hash: network_hash(net), seed, controller: controller.id().to_string() },
        records,
    })
}

fn movement_label(net: &Network, m: usize) -> String {
    let mv = net.movements()[m];
    format!("{}-{}", mv.from, mv.to)
}

impl TrajectoryLog {
    /// Wide CSV: one row per record with queues, controls, objective and exit
    /// volumes. Metadata goes into leading `#` comment lines.
    pub fn write_csv<W: Write>(&self, net: &Network, mut out: W) -> Result<()> {
        writeln!(out, "# net_hash={}", self.meta.net_hash)?;
        writeln!(out, "# seed={}", self.meta.seed)?;
        writeln!(out, "# controller={}", self.meta.controller)?;
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["step".to_string(), "objective".to_string()];
        header.extend((0..net.num_movements()).map(|m| format!("x_{}", movement_label(net, m))));
        for n in 0..net.num_nodes() {
            header.extend((0..net.num_phases(n)).map(|p| format!("u_{}_{}", net.nodes()[n], p + 1)));
        }
        header.extend(net.exit_links().iter().map(|l| format!("exit_{l}")));
        w.write_record(&header)?;
        for r in &self.records {
            let mut row = vec![r.step.to_string(), r.objective.map(|v| v.to_string()).unwrap_or_default()];
            row.extend(r.queues.iter().map(|v| v.to_string()));
            match &r.control {
                Some(u) => row.extend(u.to_flat().iter().map(|v| v.to_string())),
                None => row.extend(std::iter::repeat_n(String::new(), net.num_controls())),
            }
            row.extend(r.exit_volume.iter().map(|v| v.to_string()));
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Reads a log written by [`TrajectoryLog::write_csv`]. Wall-clock times
    /// are not stored and come back as zero.
    pub fn read_csv<R: BufRead>(net: &Network, input: R) -> Result<Self> {
        let mut meta = LogMeta { net_hash: String::new(), seed: 0, controller: String::new() };
        let mut body = String::new();
        for line in input.lines() {
            let line = line?;
            if let Some(rest) = line.strip_prefix("# ") {
                if let Some((key, value)) = rest.split_once('=') {
                    match key {
                        "net_hash" => meta.net_hash = value.to_string(),
                        "seed" => {
                            meta.seed = value.parse().map_err(|_| Error::InvalidInput(format!("bad seed `{value}`")))?
                        }
                        "controller" => meta.controller = value.to_string(),
                        _ => {}
                    }
                }
            } else {
                body.push_str(&line);
                body.push('\n');
            }
        }
        let nx = net.num_movements();
        let nu = net.num_controls();
        let ne = net.exit_links().len();
        let mut reader = csv::Reader::from_reader(body.as_bytes());
        let width = reader.headers()?.len();
        if width != 2 + nx + nu + ne {
            return Err(Error::dim("trajectory columns", 2 + nx + nu + ne, width));
        }
        let num = |s: &str| -> Result<f64> { s.parse().map_err(|_| Error::InvalidInput(format!("bad number `{s}`"))) };
        let mut records = Vec::new();
        for row in reader.records() {
            let row = row?;
            let step = row[0].parse().map_err(|_| Error::InvalidInput(format!("bad step `{}`", &row[0])))?;
            let objective = if row[1].is_empty() { None } else { Some(num(&row[1])?) };
            let queues = (0..nx).map(|k| num(&row[2 + k])).collect::<Result<Vec<_>>>()?;
            let control = if row[2 + nx].is_empty() {
                None
            } else {
                let flat = (0..nu).map(|k| num(&row[2 + nx + k])).collect::<Result<Vec<_>>>()?;
                Some(ControlVector::from_flat(net, &flat)?)
            };
            let exit_volume = (0..ne).map(|k| num(&row[2 + nx + nu + k])).collect::<Result<Vec<_>>>()?;
            records.push(StepRecord { step, queues, control, objective, exit_volume, wall_clock: 0.0 });
        }
        Ok(Self { meta, records })
    }
}
