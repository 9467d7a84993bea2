//! Pointwise check that the Lyapunov-form objective `V(x, u)` lies between
//! `ε‖x‖₁ + ‖f‖₂²` and that value plus `Σ_entry (C̄² + 2RλC̄)`.

use serde::{Deserialize, Serialize};

use crate::analysis::metrics::{l1, l2_squared};
use crate::controllers::{lyapunov_objective, EpsilonConstant};
use crate::dynamics::{step, DemandVector, QueueState};
use crate::error::{Error, Result};
use crate::network::{ControlVector, Network};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SandwichReport {
    pub samples: usize,
    /// `max (ε‖x‖₁ + ‖f‖² − V)`
    pub lower_violation: f64,
    /// `max (V − ε‖x‖₁ − ‖f‖² − Σ_entry (C̄² + 2RλC̄))`
    pub upper_violation: f64,
}

impl SandwichReport {
    pub fn max_violation(&self) -> f64 {
        self.lower_violation.max(self.upper_violation)
    }
}

/// `Σ_entry (C̄² + 2 R λ C̄)` over entry movements.
pub fn sandwich_constant(net: &Network, demand: &DemandVector, saturation_upper: &[f64]) -> f64 {
    (0..net.num_movements())
        .filter_map(|m| {
            net.movement_entry(m).map(|e| {
                let c = saturation_upper[m];
                c * c + 2.0 * net.turn_ratio()[m] * demand.as_slice()[e] * c
            })
        })
        .sum()
}

/// Largest violation of either side over `samples`. `saturation_upper`
/// defaults to the network's own rates.
pub fn lyapunov_bounds_check(
    net: &Network,
    demand: &DemandVector,
    eps: EpsilonConstant,
    saturation_upper: Option<&[f64]>,
    samples: &[(QueueState, ControlVector)],
) -> Result<SandwichReport> {
    let c_upper = saturation_upper.unwrap_or(net.saturation());
    if c_upper.len() != net.num_movements() {
        return Err(Error::dim("saturation upper bounds", net.num_movements(), c_upper.len()));
    }
    if c_upper.iter().zip(net.saturation()).any(|(u, c)| u < c) {
        return Err(Error::InvalidInput("saturation upper bounds must dominate the true rates".into()));
    }
    let constant = sandwich_constant(net, demand, c_upper);
    let mut report = SandwichReport {
        samples: samples.len(),
        lower_violation: f64::NEG_INFINITY,
        upper_violation: f64::NEG_INFINITY,
    };
    for (x, u) in samples {
        let v = lyapunov_objective(net, x, u, demand, eps)?;
        let f = step(net, x, u, demand)?;
        let base = eps.value() * l1(&x.queues) + l2_squared(&f.queues);
        report.lower_violation = report.lower_violation.max(base - v);
        report.upper_violation = report.upper_violation.max(v - base - constant);
    }
    Ok(report)
}
