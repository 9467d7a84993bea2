use crate::dynamics::{step, DemandVector, QueueState};
use crate::error::Result;
use crate::network::{ControlVector, Network, Topology};

/// The system being identified. Only the structure and the measured state
/// are visible; saturation rates and turn ratios stay hidden.
pub trait Plant {
    fn topology(&self) -> &Topology;
    fn state(&self) -> &QueueState;
    /// Applies `u` for one step and returns the new measured state.
    fn apply(&mut self, u: &ControlVector) -> Result<&QueueState>;
}

/// A plant simulated with the exact queue dynamics under constant demand.
#[derive(Debug, Clone)]
pub struct SimulatedPlant {
    net: Network,
    demand: DemandVector,
    state: QueueState,
    history: Vec<(ControlVector, QueueState)>,
    record: bool,
    steps: usize,
}

impl SimulatedPlant {
    pub fn new(net: Network, demand: DemandVector, x0: QueueState) -> Self {
        Self { net, demand, state: x0, history: Vec::new(), record: false, steps: 0 }
    }

    /// Keeps every applied control and resulting state.
    pub fn recording(mut self) -> Self {
        self.record = true;
        self
    }

    pub fn history(&self) -> &[(ControlVector, QueueState)] {
        &self.history
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn network(&self) -> &Network {
        &self.net
    }
}

impl Plant for SimulatedPlant {
    fn topology(&self) -> &Topology {
        self.net.topology()
    }

    fn state(&self) -> &QueueState {
        &self.state
    }

    fn apply(&mut self, u: &ControlVector) -> Result<&QueueState> {
        self.state = step(&self.net, &self.state, u, &self.demand)?;
        self.steps += 1;
        if self.record {
            self.history.push((u.clone(), self.state.clone()));
        }
        Ok(&self.state)
    }
}
