use serde::{Deserialize, Serialize};

use super::Topology;
use crate::error::{Error, Result};

/// Absolute tolerance on per-node weight sums.
pub const SIMPLEX_TOLERANCE: f64 = 1e-9;

/// Split ratios: one weight vector over `P(n)` per node, each on the simplex.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControlVector {
    weights: Vec<Vec<f64>>,
}

impl ControlVector {
    /// Validates and renormalizes per-node weights. Weights that are within
    /// [`SIMPLEX_TOLERANCE`] of the simplex are projected onto it exactly.
    pub fn new(topo: &Topology, weights: Vec<Vec<f64>>) -> Result<Self> {
        if weights.len() != topo.num_nodes() {
            return Err(Error::dim("control nodes", topo.num_nodes(), weights.len()));
        }
        let mut weights = weights;
        for (n, w) in weights.iter_mut().enumerate() {
            let p = topo.num_phases(n);
            if w.len() != p {
                return Err(Error::dim("control phases", p, w.len()));
            }
            if p == 0 {
                continue;
            }
            if let Some(bad) = w.iter().find(|v| !v.is_finite() || **v < -SIMPLEX_TOLERANCE) {
                return Err(Error::InvalidControl(format!("node {}: weight {bad} is outside [0, 1]", topo.nodes()[n])));
            }
            let sum: f64 = w.iter().sum();
            if (sum - 1.0).abs() > SIMPLEX_TOLERANCE {
                return Err(Error::InvalidControl(format!("node {}: weights sum to {sum}, not 1", topo.nodes()[n])));
            }
            for v in w.iter_mut() {
                *v = v.max(0.0);
            }
            let sum: f64 = w.iter().sum();
            for v in w.iter_mut() {
                *v /= sum;
            }
        }
        Ok(Self { weights })
    }

    /// Wraps weights that the caller guarantees are already on the simplex.
    pub(crate) fn from_raw(weights: Vec<Vec<f64>>) -> Self {
        Self { weights }
    }

    pub fn uniform(topo: &Topology) -> Self {
        let weights = (0..topo.num_nodes())
            .map(|n| {
                let p = topo.num_phases(n);
                vec![1.0 / p as f64; p]
            })
            .collect();
        Self { weights }
    }

    /// One active phase per node.
    pub fn vertex(topo: &Topology, phases: &[usize]) -> Result<Self> {
        if phases.len() != topo.num_nodes() {
            return Err(Error::dim("vertex control nodes", topo.num_nodes(), phases.len()));
        }
        let mut weights = Vec::with_capacity(phases.len());
        for (n, &ph) in phases.iter().enumerate() {
            let p = topo.num_phases(n);
            if ph >= p {
                return Err(Error::InvalidControl(format!(
                    "node {} has {p} phases, phase {ph} requested",
                    topo.nodes()[n]
                )));
            }
            let mut w = vec![0.0; p];
            w[ph] = 1.0;
            weights.push(w);
        }
        Ok(Self { weights })
    }

    /// Builds a control from one flat vector laid out node by node.
    pub fn from_flat(topo: &Topology, flat: &[f64]) -> Result<Self> {
        let total = topo.num_controls();
        if flat.len() != total {
            return Err(Error::dim("flat control", total, flat.len()));
        }
        let mut weights = Vec::with_capacity(topo.num_nodes());
        let mut at = 0;
        for n in 0..topo.num_nodes() {
            let p = topo.num_phases(n);
            weights.push(flat[at..at + p].to_vec());
            at += p;
        }
        Self::new(topo, weights)
    }

    pub fn to_flat(&self) -> Vec<f64> {
        self.weights.iter().flatten().copied().collect()
    }

    pub fn node(&self, n: usize) -> &[f64] {
        &self.weights[n]
    }

    pub fn num_nodes(&self) -> usize {
        self.weights.len()
    }

    pub(crate) fn set_node(&mut self, n: usize, w: &[f64]) {
        self.weights[n].copy_from_slice(w);
    }

    pub fn weights(&self) -> &[Vec<f64>] {
        &self.weights
    }

    /// True when the weights match the topology and every node is on the simplex.
    pub fn is_admissible(&self, topo: &Topology) -> bool {
        self.weights.len() == topo.num_nodes()
            && self.weights.iter().enumerate().all(|(n, w)| {
                w.len() == topo.num_phases(n)
                    && (w.is_empty()
                        || (w.iter().all(|v| v.is_finite() && *v >= 0.0)
                            && (w.iter().sum::<f64>() - 1.0).abs() <= SIMPLEX_TOLERANCE))
            })
    }

    pub(crate) fn check_dims(&self, topo: &Topology) -> Result<()> {
        if self.weights.len() != topo.num_nodes() {
            return Err(Error::dim("control nodes", topo.num_nodes(), self.weights.len()));
        }
        for (n, w) in self.weights.iter().enumerate() {
            if w.len() != topo.num_phases(n) {
                return Err(Error::dim("control phases", topo.num_phases(n), w.len()));
            }
        }
        Ok(())
    }
}

/// Green fraction `S_ij(u) = Σ_m u_m S^m_ij` for every movement.
pub fn build_signal(topo: &Topology, u: &ControlVector) -> Result<Vec<f64>> {
    u.check_dims(topo)?;
    let mut s = vec![0.0; topo.num_movements()];
    signal_into(topo, u, &mut s);
    Ok(s)
}

pub(crate) fn signal_into(topo: &Topology, u: &ControlVector, out: &mut [f64]) {
    for (m, s) in out.iter_mut().enumerate() {
        let w = u.node(topo.movement_node(m));
        *s = topo.movement_phases(m).iter().map(|&p| w[p]).sum::<f64>().min(1.0);
    }
}
