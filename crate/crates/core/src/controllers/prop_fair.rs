use crate::controllers::objective::check_state;
use crate::dynamics::QueueState;
use crate::error::Result;
use crate::network::{ControlVector, Network, Topology};

const SIGNAL_FLOOR: f64 = 1e-12;
const STATIONARITY: f64 = 1e-8;
const MAX_ITERATIONS: usize = 20_000;

/// Proportional-fair control and whether every node met the stationarity test.
#[derive(Debug, Clone, PartialEq)]
pub struct PropFairSolution {
    pub u: ControlVector,
    pub converged: bool,
    pub iterations: usize,
}

/// Euclidean projection onto the probability simplex.
pub(crate) fn project_simplex(v: &[f64]) -> Vec<f64> {
    let mut sorted = v.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut cumulative = 0.0;
    let mut theta = 0.0;
    for (k, &s) in sorted.iter().enumerate() {
        cumulative += s;
        let t = (cumulative - 1.0) / (k + 1) as f64;
        if s - t > 0.0 {
            theta = t;
        }
    }
    v.iter().map(|&x| (x - theta).max(0.0)).collect()
}

struct NodeUtility<'a> {
    /// `(queue, phases serving it)` for movements with a positive queue.
    terms: Vec<(f64, &'a [usize])>,
}

impl NodeUtility<'_> {
    fn signal(&self, u: &[f64], phases: &[usize]) -> f64 {
        phases.iter().map(|&p| u[p]).sum::<f64>().clamp(SIGNAL_FLOOR, 1.0)
    }

    fn value(&self, u: &[f64]) -> f64 {
        self.terms.iter().map(|&(x, ph)| x * self.signal(u, ph).ln()).sum()
    }

    fn gradient(&self, u: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; u.len()];
        for &(x, ph) in &self.terms {
            let d = x / self.signal(u, ph);
            for &p in ph {
                g[p] += d;
            }
        }
        g
    }
}

fn solve_node(topo: &Topology, queues: &[f64], node: usize) -> (Vec<f64>, bool, usize) {
    let p = topo.num_phases(node);
    let terms: Vec<_> = (0..topo.num_movements())
        .filter(|&m| topo.movement_node(m) == node && queues[m] > 0.0)
        .map(|m| (queues[m], topo.movement_phases(m)))
        .collect();
    let total: f64 = terms.iter().map(|t| t.0).sum();
    if terms.is_empty() || p == 1 {
        return (vec![1.0 / p as f64; p], true, 0);
    }
    let f = NodeUtility { terms };

    // Start from shares proportional to the queues each phase serves.
    let mut u = vec![0.0; p];
    for &(x, ph) in &f.terms {
        for &q in ph {
            u[q] += x;
        }
    }
    let s: f64 = u.iter().sum();
    u.iter_mut().for_each(|v| *v /= s);

    let mut step = 1.0 / total;
    let mut value = f.value(&u);
    for it in 0..MAX_ITERATIONS {
        let g = f.gradient(&u);
        // Scale-free stationarity: projected gradient step of length 1/‖x‖₁.
        let probe: Vec<f64> = u.iter().zip(&g).map(|(a, b)| a + b / total).collect();
        let mapped = project_simplex(&probe);
        let gap = mapped.iter().zip(&u).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        if gap <= STATIONARITY {
            return (u, true, it);
        }
        step *= 2.0;
        loop {
            let cand = project_simplex(&u.iter().zip(&g).map(|(a, b)| a + step * b).collect::<Vec<_>>());
            let cv = f.value(&cand);
            let ascent: f64 = g.iter().zip(cand.iter().zip(&u)).map(|(gi, (c, o))| gi * (c - o)).sum();
            if cv >= value + 1e-4 * ascent || step < 1e-18 {
                if cv >= value {
                    u = cand;
                    value = cv;
                }
                break;
            }
            step *= 0.5;
        }
        if step < 1e-18 {
            return (u, false, it);
        }
    }
    (u, false, MAX_ITERATIONS)
}

/// Per node, maximizes `Σ x_ij ln S_ij(u)` over the simplex by projected
/// gradient ascent. Nodes whose queues are all empty get the uniform split.
pub fn proportional_fair_solve(net: &Network, x: &QueueState) -> Result<PropFairSolution> {
    check_state(net, x)?;
    let mut weights = Vec::with_capacity(net.num_nodes());
    let mut converged = true;
    let mut iterations = 0;
    for n in 0..net.num_nodes() {
        let (u, ok, it) = solve_node(net, &x.queues, n);
        weights.push(u);
        converged &= ok;
        iterations += it;
    }
    Ok(PropFairSolution { u: ControlVector::new(net, weights)?, converged, iterations })
}

pub fn proportional_fair(net: &Network, x: &QueueState) -> Result<ControlVector> {
    Ok(proportional_fair_solve(net, x)?.u)
}
