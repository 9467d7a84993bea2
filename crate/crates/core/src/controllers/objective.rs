//! The one-step MPC cost and its Lyapunov form.

use serde::{Deserialize, Serialize};

use crate::dynamics::{DemandVector, QueueState};
use crate::error::{Error, Result};
use crate::network::{build_signal, ControlVector, LinkClass, Network};

/// Positive weight on `‖x‖₁` in the Lyapunov form.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct EpsilonConstant(f64);

impl EpsilonConstant {
    pub const DEFAULT: f64 = 0.05;

    pub fn new(value: f64) -> Result<Self> {
        if value > 0.0 && value.is_finite() {
            Ok(Self(value))
        } else {
            Err(Error::InvalidInput(format!("epsilon must be positive and finite, got {value}")))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

impl Default for EpsilonConstant {
    fn default() -> Self {
        Self(Self::DEFAULT)
    }
}

impl TryFrom<f64> for EpsilonConstant {
    type Error = Error;
    fn try_from(v: f64) -> Result<Self> {
        Self::new(v)
    }
}

impl From<EpsilonConstant> for f64 {
    fn from(e: EpsilonConstant) -> f64 {
        e.0
    }
}

pub(crate) fn check_state(net: &Network, x: &QueueState) -> Result<()> {
    if x.queues.len() != net.num_movements() {
        return Err(Error::dim("queue state", net.num_movements(), x.queues.len()));
    }
    Ok(())
}

/// Inflow `Σ_k min{C_ki S_ki, x_ki}` for every link, given a signal.
pub(crate) fn link_inflows(net: &Network, queues: &[f64], signal: &[f64]) -> Vec<f64> {
    let mut inflow = vec![0.0; net.links().len()];
    for (m, &x) in queues.iter().enumerate() {
        inflow[net.downstream_link_index(m)] += (net.saturation()[m] * signal[m]).min(x);
    }
    inflow
}

/// Cost of the one-step MPC at signal `signal`:
/// `Σ_entry [C²S² − 2CSx] + Σ_internal x⁺²`, where `x⁺` is the next queue of
/// an internal-origin movement. Demand does not enter.
pub(crate) fn one_step_cost_from_signal(net: &Network, queues: &[f64], signal: &[f64]) -> f64 {
    let inflow = link_inflows(net, queues, signal);
    let mut total = 0.0;
    for (m, &x) in queues.iter().enumerate() {
        let c = net.saturation()[m];
        let s = signal[m];
        match net.from_class(m) {
            LinkClass::Entry => total += c * c * s * s - 2.0 * c * s * x,
            LinkClass::Internal => {
                let next = (x - c * s).max(0.0) + net.turn_ratio()[m] * inflow[net.upstream_link_index(m)];
                total += next * next;
            }
            LinkClass::Exit => {}
        }
    }
    total
}

/// The one-step MPC objective at control `u`.
pub fn one_step_objective(net: &Network, x: &QueueState, u: &ControlVector) -> Result<f64> {
    check_state(net, x)?;
    let s = build_signal(net, u)?;
    Ok(one_step_cost_from_signal(net, &x.queues, &s))
}

/// The part of the Lyapunov form that does not depend on the control:
/// `ε‖x‖₁ + ‖λ‖₂² + Σ_entry [x² + 2Rλx]`.
pub fn lyapunov_offset(net: &Network, x: &QueueState, demand: &DemandVector, eps: EpsilonConstant) -> Result<f64> {
    check_state(net, x)?;
    let lambda = demand.as_slice();
    if lambda.len() != net.entry_links().len() {
        return Err(Error::dim("demand", net.entry_links().len(), lambda.len()));
    }
    let l1: f64 = x.queues.iter().sum();
    let lam2: f64 = lambda.iter().map(|v| v * v).sum();
    let entry: f64 = x
        .queues
        .iter()
        .enumerate()
        .filter_map(|(m, &q)| net.movement_entry(m).map(|e| q * q + 2.0 * net.turn_ratio()[m] * lambda[e] * q))
        .sum();
    Ok(eps.value() * l1 + lam2 + entry)
}

/// The Lyapunov form of the one-step objective: the one-step cost plus
/// [`lyapunov_offset`]. Both share the same minimizers.
pub fn lyapunov_objective(
    net: &Network,
    x: &QueueState,
    u: &ControlVector,
    demand: &DemandVector,
    eps: EpsilonConstant,
) -> Result<f64> {
    Ok(lyapunov_offset(net, x, demand, eps)? + one_step_objective(net, x, u)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::step;
    use crate::network::generators::make_paper_grid;

    #[test]
    fn epsilon_must_be_positive() {
        assert!(EpsilonConstant::new(0.0).is_err());
        assert!(EpsilonConstant::new(-1.0).is_err());
        assert!(EpsilonConstant::new(f64::NAN).is_err());
        assert_eq!(EpsilonConstant::default().value(), 0.05);
    }

    #[test]
    fn grid_value_matches_straight_line_evaluation() {
        let net = make_paper_grid();
        let x = QueueState::filled(&net, 1.0);
        let u = ControlVector::uniform(&net);
        let lambda = DemandVector(vec![0.93; 8]);
        let v = lyapunov_objective(&net, &x, &u, &lambda, EpsilonConstant::new(0.05).unwrap()).unwrap();

        // Independent evaluation: every phase has weight 1/4 and serves each
        // movement once, so S = 1/4 everywhere; each internal link has three
        // feeders with queue 1.
        let mut expected = 0.05 * 48.0 + 8.0 * 0.93 * 0.93;
        for mv in net.movements() {
            let c = net.saturation()[mv.index];
            let r = net.turn_ratio()[mv.index];
            let s = 0.25;
            if net.from_class(mv.index) == LinkClass::Entry {
                expected += 1.0 + 2.0 * r * 0.93 + c * c * s * s - 2.0 * c * s;
            } else {
                let inflow: f64 = net.movements_into(mv.from).iter().map(|&k| (net.saturation()[k] * s).min(1.0)).sum();
                let next = (1.0 - c * s).max(0.0) + r * inflow;
                expected += next * next;
            }
        }
        assert!((v - expected).abs() <= 1e-12 * expected.abs(), "{v} vs {expected}");
    }

    #[test]
    fn internal_terms_equal_next_state_squares() {
        let net = make_paper_grid();
        let x = QueueState::filled(&net, 2.5);
        let u = ControlVector::vertex(&net, &[0, 1, 2, 3]).unwrap();
        let next = step(&net, &x, &u, &DemandVector::zeros(&net)).unwrap();
        let s = build_signal(&net, &u).unwrap();
        let mut entry = 0.0;
        let mut internal = 0.0;
        for m in 0..net.num_movements() {
            let c = net.saturation()[m];
            if net.from_class(m) == LinkClass::Entry {
                entry += c * c * s[m] * s[m] - 2.0 * c * s[m] * 2.5;
            } else {
                internal += next.queues[m] * next.queues[m];
            }
        }
        let j = one_step_objective(&net, &x, &u).unwrap();
        assert!((j - entry - internal).abs() < 1e-12);
    }

    #[test]
    fn zero_demand_offset_is_entry_squares_plus_l1() {
        let net = make_paper_grid();
        let x = QueueState { queues: (0..48).map(|k| k as f64 * 0.1).collect(), ..QueueState::zeros(&net) };
        let eps = EpsilonConstant::new(0.3).unwrap();
        let off = lyapunov_offset(&net, &x, &DemandVector::zeros(&net), eps).unwrap();
        let l1: f64 = x.queues.iter().sum();
        let sq: f64 =
            (0..48).filter(|&m| net.from_class(m) == LinkClass::Entry).map(|m| x.queues[m] * x.queues[m]).sum();
        assert!((off - 0.3 * l1 - sq).abs() < 1e-12);
    }
}
