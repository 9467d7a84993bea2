use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::analysis::TrajectoryLog;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub step: usize,
    /// `‖x‖₂²`
    pub l2_squared: f64,
    pub l1: f64,
    pub linf: f64,
    /// Total exit volume up to and including this step.
    pub throughput: f64,
}

pub fn l2_squared(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum()
}

pub fn l1(x: &[f64]) -> f64 {
    x.iter().map(|v| v.abs()).sum()
}

pub fn linf(x: &[f64]) -> f64 {
    x.iter().fold(0.0, |m, v| m.max(v.abs()))
}

/// Norm and throughput series aligned with the log's records.
pub fn compute_metrics(log: &TrajectoryLog) -> Result<Vec<MetricRow>> {
    if log.records.is_empty() {
        return Err(Error::InvalidInput("metrics need a nonempty log".into()));
    }
    let mut throughput = 0.0;
    Ok(log
        .records
        .iter()
        .map(|r| {
            throughput += r.exit_volume.iter().sum::<f64>();
            MetricRow {
                step: r.step,
                l2_squared: l2_squared(&r.queues),
                l1: l1(&r.queues),
                linf: linf(&r.queues),
                throughput,
            }
        })
        .collect())
}

/// Long CSV with columns `step, metric, value, controller`.
pub fn write_metrics_csv<W: Write>(rows: &[MetricRow], controller: &str, out: W) -> Result<()> {
    write_metrics_csv_many(&[(controller, rows)], out)
}

/// Several controllers' metrics in one long CSV.
pub fn write_metrics_csv_many<W: Write>(series: &[(&str, &[MetricRow])], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["step", "metric", "value", "controller"])?;
    for &(controller, rows) in series {
        for r in rows {
            for (name, value) in
                [("l2_squared", r.l2_squared), ("l1", r.l1), ("linf", r.linf), ("throughput", r.throughput)]
            {
                w.write_record([r.step.to_string(), name.to_string(), value.to_string(), controller.to_string()])?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

/// Reads the CSV written by [`write_metrics_csv`] back into rows, keeping
/// only those of `controller`.
pub fn read_metrics_csv<R: std::io::Read>(input: R, controller: &str) -> Result<Vec<MetricRow>> {
    let mut reader = csv::Reader::from_reader(input);
    let mut rows: Vec<MetricRow> = Vec::new();
    for rec in reader.records() {
        let rec = rec?;
        if rec.len() != 4 {
            return Err(Error::dim("metrics columns", 4, rec.len()));
        }
        if &rec[3] != controller {
            continue;
        }
        let step: usize = rec[0].parse().map_err(|_| Error::InvalidInput(format!("bad step `{}`", &rec[0])))?;
        let value: f64 = rec[2].parse().map_err(|_| Error::InvalidInput(format!("bad value `{}`", &rec[2])))?;
        if rows.last().is_none_or(|r| r.step != step) {
            rows.push(MetricRow { step, l2_squared: 0.0, l1: 0.0, linf: 0.0, throughput: 0.0 });
        }
        let row = rows.last_mut().expect("pushed above");
        match &rec[1] {
            "l2_squared" => row.l2_squared = value,
            "l1" => row.l1 = value,
            "linf" => row.linf = value,
            "throughput" => row.throughput = value,
            other => return Err(Error::InvalidInput(format!("unknown metric `{other}`"))),
        }
    }
    Ok(rows)
}
