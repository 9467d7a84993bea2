//! Signal controllers: one-step MPC and the comparison baselines.

mod fixed_time;
mod max_pressure;
mod objective;
mod one_step;
mod prop_fair;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dynamics::QueueState;
use crate::error::{Error, Result};
use crate::network::{ControlVector, Network};

pub use fixed_time::{fixed_time, FixedTimeSchedule};
pub use max_pressure::max_pressure;
pub(crate) use max_pressure::{argmax, max_pressure_phases, phase_pressures, pressure_weights};
pub use objective::{lyapunov_objective, lyapunov_offset, one_step_objective, EpsilonConstant};
pub use one_step::{one_step_mpc, OneStepConfig, OneStepMpc, OneStepSolution, SolverStats};
pub use prop_fair::{proportional_fair, proportional_fair_solve, PropFairSolution};

/// Controller identifiers as used on the command line and in logs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ControllerId {
    OneStepMpc,
    MaxPressure,
    PropFair,
    FixedTime,
}

impl ControllerId {
    pub const ALL: [ControllerId; 4] =
        [ControllerId::OneStepMpc, ControllerId::MaxPressure, ControllerId::PropFair, ControllerId::FixedTime];

    pub fn as_str(self) -> &'static str {
        match self {
            ControllerId::OneStepMpc => "one-step-mpc",
            ControllerId::MaxPressure => "max-pressure",
            ControllerId::PropFair => "prop-fair",
            ControllerId::FixedTime => "fixed-time",
        }
    }
}

impl fmt::Display for ControllerId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ControllerId {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        ControllerId::ALL
            .into_iter()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| Error::InvalidInput(format!("unknown controller `{s}`")))
    }
}

/// A feedback policy `u(t) = κ(t, x(t))`.
pub trait Controller {
    fn id(&self) -> ControllerId;
    fn control(&mut self, net: &Network, t: u64, x: &QueueState) -> Result<ControlVector>;
}

pub struct OneStepController(pub OneStepMpc);

impl Controller for OneStepController {
    fn id(&self) -> ControllerId {
        ControllerId::OneStepMpc
    }
    fn control(&mut self, net: &Network, _t: u64, x: &QueueState) -> Result<ControlVector> {
        let sol = self.0.solve(net, x)?;
        if !sol.stats.converged {
            log::debug!("one-step MPC hit its sweep cap; returning the best point found");
        }
        Ok(sol.u)
    }
}

pub struct MaxPressureController;

impl Controller for MaxPressureController {
    fn id(&self) -> ControllerId {
        ControllerId::MaxPressure
    }
    fn control(&mut self, net: &Network, _t: u64, x: &QueueState) -> Result<ControlVector> {
        max_pressure(net, x)
    }
}

pub struct PropFairController;

impl Controller for PropFairController {
    fn id(&self) -> ControllerId {
        ControllerId::PropFair
    }
    fn control(&mut self, net: &Network, _t: u64, x: &QueueState) -> Result<ControlVector> {
        proportional_fair(net, x)
    }
}

pub struct FixedTimeController(pub FixedTimeSchedule);

impl Controller for FixedTimeController {
    fn id(&self) -> ControllerId {
        ControllerId::FixedTime
    }
    fn control(&mut self, net: &Network, t: u64, _x: &QueueState) -> Result<ControlVector> {
        fixed_time(net, t, &self.0)
    }
}

/// Builds a boxed controller with the given solver settings.
pub fn make_controller(id: ControllerId, net: &Network, config: &OneStepConfig) -> Result<Box<dyn Controller>> {
    Ok(match id {
        ControllerId::OneStepMpc => Box::new(OneStepController(OneStepMpc::new(config.clone())?)),
        ControllerId::MaxPressure => Box::new(MaxPressureController),
        ControllerId::PropFair => Box::new(PropFairController),
        ControllerId::FixedTime => Box::new(FixedTimeController(FixedTimeSchedule::uniform(net))),
    })
}
