use std::fmt;

use serde::{Deserialize, Serialize};

use crate::analysis::metrics::linf;
use crate::controllers::Controller;
use crate::dynamics::{step, DemandVector, QueueState};
use crate::error::{Error, Result};
use crate::network::Network;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Bounded,
    Growing,
    /// Neither test passed: the last third peaks above the middle third but
    /// the fitted trend is below the growth threshold.
    Inconclusive,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Bounded => "bounded",
            Verdict::Growing => "growing",
            Verdict::Inconclusive => "inconclusive",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProbeSettings {
    /// Relative slack when comparing the last third with the middle third.
    pub peak_tolerance: f64,
    /// Least-squares slope of `‖x‖_∞` over the last half, per step, above
    /// which the trajectory counts as growing.
    pub slope_threshold: f64,
}

impl Default for ProbeSettings {
    fn default() -> Self {
        Self { peak_tolerance: 1e-6, slope_threshold: 1e-4 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeReport {
    pub verdict: Verdict,
    pub horizon: usize,
    pub middle_peak: f64,
    pub last_peak: f64,
    pub slope: f64,
    pub final_linf: f64,
}

fn slope(ys: &[f64]) -> f64 {
    let n = ys.len() as f64;
    if ys.len() < 2 {
        return 0.0;
    }
    let mx = (n - 1.0) / 2.0;
    let my = ys.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (i, y) in ys.iter().enumerate() {
        let dx = i as f64 - mx;
        sxy += dx * (y - my);
        sxx += dx * dx;
    }
    sxy / sxx
}

/// Classifies the `‖x(t)‖_∞` series for `t = 1..=horizon`: growing when the
/// last half trends upward faster than the threshold, bounded when the last
/// third never exceeds the middle third's peak.
pub fn classify(series: &[f64], settings: &ProbeSettings) -> Result<ProbeReport> {
    let h = series.len();
    if h < 3 {
        return Err(Error::InvalidInput(format!("probe needs at least 3 steps, got {h}")));
    }
    let third = h / 3;
    let middle_peak = series[third..2 * third].iter().fold(0.0_f64, |m, &v| m.max(v));
    let last_peak = series[2 * third..].iter().fold(0.0_f64, |m, &v| m.max(v));
    let slope = slope(&series[h / 2..]);
    let verdict = if slope > settings.slope_threshold {
        Verdict::Growing
    } else if last_peak <= middle_peak * (1.0 + settings.peak_tolerance) {
        Verdict::Bounded
    } else {
        Verdict::Inconclusive
    };
    Ok(ProbeReport { verdict, horizon: h, middle_peak, last_peak, slope, final_linf: series[h - 1] })
}

/// Runs `controller` for `horizon` steps from `x0` and classifies the
/// trajectory. Only `‖x‖_∞` is kept per step.
pub fn boundedness_probe(
    net: &Network,
    demand: &DemandVector,
    controller: &mut dyn Controller,
    horizon: usize,
    x0: &QueueState,
    settings: &ProbeSettings,
) -> Result<ProbeReport> {
    let mut x = x0.clone();
    let mut series = Vec::with_capacity(horizon);
    for t in 0..horizon {
        let u = controller.control(net, t as u64, &x)?;
        x = step(net, &x, &u, demand)?;
        series.push(linf(&x.queues));
    }
    classify(&series, settings)
}
