use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::{ControlVector, Topology};

/// A cyclic plan: entry `k` gives the active phase at every node.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FixedTimeSchedule {
    pub cycle: Vec<Vec<usize>>,
}

impl FixedTimeSchedule {
    /// Every node steps through its phases in order, one per step.
    pub fn uniform(topo: &Topology) -> Self {
        let len = (0..topo.num_nodes()).map(|n| topo.num_phases(n)).max().unwrap_or(0);
        let cycle = (0..len).map(|k| (0..topo.num_nodes()).map(|n| k % topo.num_phases(n).max(1)).collect()).collect();
        Self { cycle }
    }
}

/// The control scheduled at step `t`: `schedule[t mod cycle length]`.
pub fn fixed_time(topo: &Topology, t: u64, schedule: &FixedTimeSchedule) -> Result<ControlVector> {
    if schedule.cycle.is_empty() {
        return Err(Error::Structure("fixed-time schedule is empty".into()));
    }
    let k = (t % schedule.cycle.len() as u64) as usize;
    ControlVector::vertex(topo, &schedule.cycle[k])
}
