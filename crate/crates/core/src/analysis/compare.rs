use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::analysis::metrics::{compute_metrics, MetricRow};
use crate::analysis::{simulate, TrajectoryLog};
use crate::controllers::{make_controller, ControllerId, OneStepConfig};
use crate::dynamics::{DemandVector, QueueState};
use crate::error::{Error, Result};
use crate::network::Network;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub controller: ControllerId,
    /// `max_t ‖x(t)‖₂²`
    pub peak: f64,
    /// Mean of `‖x(t)‖₂²` over `t = 0..=horizon`.
    pub time_average: f64,
    pub final_l2_squared: f64,
    pub throughput: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonRun {
    pub controller: ControllerId,
    pub log: TrajectoryLog,
    pub metrics: Vec<MetricRow>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    pub runs: Vec<ComparisonRun>,
    pub summary: Vec<ComparisonRow>,
}

fn summarize(controller: ControllerId, metrics: &[MetricRow]) -> ComparisonRow {
    let n = metrics.len() as f64;
    let last = metrics.last().expect("logs are nonempty");
    ComparisonRow {
        controller,
        peak: metrics.iter().map(|r| r.l2_squared).fold(0.0, f64::max),
        time_average: metrics.iter().map(|r| r.l2_squared).sum::<f64>() / n,
        final_l2_squared: last.l2_squared,
        throughput: last.throughput,
    }
}

/// Runs each controller from `x0` for `horizon` steps, one thread per
/// controller. The solver seed comes from `config.seed`.
pub fn compare_policies(
    net: &Network,
    demand: &DemandVector,
    x0: &QueueState,
    controllers: &[ControllerId],
    config: &OneStepConfig,
    horizon: usize,
) -> Result<Comparison> {
    if controllers.is_empty() {
        return Err(Error::InvalidInput("no controllers to compare".into()));
    }
    config.validate()?;
    let results: Vec<Result<ComparisonRun>> = std::thread::scope(|scope| {
        let handles: Vec<_> = controllers
            .iter()
            .map(|&id| {
                scope.spawn(move || -> Result<ComparisonRun> {
                    let mut controller = make_controller(id, net, config)?;
                    let log = simulate(net, demand, x0, controller.as_mut(), horizon, config.seed)
                        .map_err(|e| Error::Numerical(format!("{id}: {e}")))?;
                    let metrics = compute_metrics(&log)?;
                    Ok(ComparisonRun { controller: id, log, metrics })
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("comparison thread panicked")).collect()
    });
    let runs = results.into_iter().collect::<Result<Vec<_>>>()?;
    let summary = runs.iter().map(|r| summarize(r.controller, &r.metrics)).collect();
    Ok(Comparison { runs, summary })
}

impl Comparison {
    pub fn row(&self, id: ControllerId) -> Option<&ComparisonRow> {
        self.summary.iter().find(|r| r.controller == id)
    }

    /// `‖x‖₂²` of every run in long form: `step, metric, value, controller`.
    pub fn write_series_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["step", "metric", "value", "controller"])?;
        for run in &self.runs {
            for r in &run.metrics {
                w.write_record([
                    r.step.to_string(),
                    "l2_squared".to_string(),
                    r.l2_squared.to_string(),
                    run.controller.to_string(),
                ])?;
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_summary_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["controller", "peak", "time_average", "final_l2_squared", "throughput"])?;
        for r in &self.summary {
            w.write_record([
                r.controller.to_string(),
                r.peak.to_string(),
                r.time_average.to_string(),
                r.final_l2_squared.to_string(),
                r.throughput.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}
