use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::controllers::max_pressure::max_pressure_phases;
use crate::controllers::objective::{check_state, link_inflows, one_step_cost_from_signal};
use crate::dynamics::QueueState;
use crate::error::{Error, Result};
use crate::network::control::signal_into;
use crate::network::{ControlVector, LinkClass, Network};

/// Hyperparameters of the one-step MPC solver.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OneStepConfig {
    /// Random starting points in addition to the uniform split and the
    /// max-pressure vertex.
    pub restarts: usize,
    /// Spacing of the per-node simplex grid scanned in the first sweep.
    pub grid_resolution: f64,
    /// Per-node cap on grid points; the grid is coarsened to respect it.
    pub max_grid_points: usize,
    pub max_sweeps: usize,
    /// Instances with at most this many nodes are checked against a joint grid.
    pub oracle_max_nodes: usize,
    pub oracle_max_points: usize,
    pub seed: u64,
}

impl Default for OneStepConfig {
    fn default() -> Self {
        Self {
            restarts: 5,
            grid_resolution: 0.01,
            max_grid_points: 6000,
            max_sweeps: 50,
            oracle_max_nodes: 2,
            oracle_max_points: 250_000,
            seed: 0,
        }
    }
}

impl OneStepConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.grid_resolution > 0.0 && self.grid_resolution <= 1.0) {
            return Err(Error::config("controller.grid_resolution", "must lie in (0, 1]"));
        }
        if self.max_sweeps == 0 {
            return Err(Error::config("controller.max_sweeps", "must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SolverStats {
    /// Gauss–Seidel sweeps over all starts.
    pub iterations: usize,
    pub restarts: usize,
    /// The result was compared with (and is no worse than) a joint grid scan.
    pub oracle_verified: bool,
    /// Every start reached a sweep without improvement before the sweep cap.
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OneStepSolution {
    pub u: ControlVector,
    pub objective: f64,
    pub stats: SolverStats,
}

/// Stateful solver: remembers the previous solution as an extra warm start.
/// Restart points are drawn from a stream seeded by the configured seed and
/// the queue state, so equal states get equal restarts.
#[derive(Debug, Clone)]
pub struct OneStepMpc {
    config: OneStepConfig,
    warm: Option<ControlVector>,
    grids: HashMap<(usize, usize), Vec<Vec<f64>>>,
}

/// Solves the one-step MPC with default settings.
pub fn one_step_mpc(net: &Network, x: &QueueState) -> Result<OneStepSolution> {
    OneStepMpc::new(OneStepConfig::default())?.solve(net, x)
}

/// Movements whose cost terms change with one node's split.
struct NodeTerms {
    /// Movements controlled at the node with the phases serving them.
    moves: Vec<(usize, Vec<usize>)>,
    /// Internal links whose inflow is released by this node.
    links: Vec<usize>,
    /// Cost terms that depend on the node's split.
    terms: Vec<usize>,
}

struct Workspace<'a> {
    net: &'a Network,
    queues: &'a [f64],
    nodes: Vec<NodeTerms>,
    signal: Vec<f64>,
    inflow: Vec<f64>,
}

impl<'a> Workspace<'a> {
    fn new(net: &'a Network, queues: &'a [f64]) -> Self {
        let topo = net.topology();
        let mut nodes: Vec<NodeTerms> = (0..topo.num_nodes())
            .map(|_| NodeTerms { moves: Vec::new(), links: Vec::new(), terms: Vec::new() })
            .collect();
        for m in 0..topo.num_movements() {
            let n = topo.movement_node(m);
            nodes[n].moves.push((m, topo.movement_phases(m).to_vec()));
            if topo.from_class(m) != LinkClass::Exit {
                nodes[n].terms.push(m);
            }
            if topo.to_class(m) == LinkClass::Internal {
                let link = topo.downstream_link_index(m);
                if !nodes[n].links.contains(&link) {
                    nodes[n].links.push(link);
                }
            }
        }
        for node in &mut nodes {
            for &l in &node.links {
                for &m in topo.movements_out_of_index(l) {
                    node.terms.push(m);
                }
            }
            node.terms.sort_unstable();
            node.terms.dedup();
        }
        Self { net, queues, nodes, signal: vec![0.0; topo.num_movements()], inflow: vec![0.0; topo.links().len()] }
    }

    fn load(&mut self, u: &ControlVector) {
        signal_into(self.net, u, &mut self.signal);
        self.inflow = link_inflows(self.net, self.queues, &self.signal);
    }

    fn total(&self) -> f64 {
        one_step_cost_from_signal(self.net, self.queues, &self.signal)
    }

    /// Sets node `n`'s split to `w` and returns the sum of the terms it
    /// affects.
    fn eval_node(&mut self, n: usize, w: &[f64]) -> f64 {
        let net = self.net;
        let node = &self.nodes[n];
        for (m, phases) in &node.moves {
            self.signal[*m] = phases.iter().map(|&p| w[p]).sum::<f64>().min(1.0);
        }
        for &l in &node.links {
            self.inflow[l] = net
                .movements_into_index(l)
                .iter()
                .map(|&k| (net.saturation()[k] * self.signal[k]).min(self.queues[k]))
                .sum();
        }
        let mut total = 0.0;
        for &m in &node.terms {
            let c = net.saturation()[m];
            let s = self.signal[m];
            let x = self.queues[m];
            if net.from_class(m) == LinkClass::Entry {
                total += c * c * s * s - 2.0 * c * s * x;
            } else {
                let next = (x - c * s).max(0.0) + net.turn_ratio()[m] * self.inflow[net.upstream_link_index(m)];
                total += next * next;
            }
        }
        total
    }

    /// Exact minimization along `w + α(e_p − e_q)`. The restriction is
    /// piecewise quadratic with kinks where some `C S = x`, so each piece is
    /// fitted by three evaluations and minimized in closed form.
    fn line_search(&mut self, n: usize, w: &[f64], p: usize, q: usize, f0: f64) -> Option<(Vec<f64>, f64)> {
        let (lo, hi) = (-w[p], w[q]);
        if hi - lo <= 0.0 {
            return None;
        }
        let mut knots = vec![lo, hi];
        for (m, phases) in &self.nodes[n].moves {
            let slope = phases.contains(&p) as i32 as f64 - phases.contains(&q) as i32 as f64;
            if slope == 0.0 {
                continue;
            }
            let s0: f64 = phases.iter().map(|&r| w[r]).sum();
            let c = self.net.saturation()[*m];
            let a = (self.queues[*m] / c - s0) / slope;
            if a > lo && a < hi {
                knots.push(a);
            }
        }
        knots.sort_by(f64::total_cmp);
        knots.dedup();

        let point = |a: f64| {
            let mut v = w.to_vec();
            v[p] = (w[p] + a).max(0.0);
            v[q] = (w[q] - a).max(0.0);
            v
        };
        let mut best: Option<(Vec<f64>, f64)> = None;
        let mut consider = |this: &mut Self, a: f64| {
            let v = point(a);
            let f = this.eval_node(n, &v);
            if best.as_ref().is_none_or(|(_, bf)| f < *bf) {
                best = Some((v, f));
            }
            f
        };
        for win in knots.windows(2) {
            let (a, b) = (win[0], win[1]);
            if b - a <= 0.0 {
                continue;
            }
            let h = 0.5 * (b - a);
            let mid = a + h;
            let fa = consider(self, a);
            let fm = consider(self, mid);
            let fb = consider(self, b);
            let curv = (fa - 2.0 * fm + fb) / (h * h);
            if curv > 0.0 {
                let slope = (fb - fa) / (2.0 * h);
                let t = (-slope / curv).clamp(-h, h);
                consider(self, mid + t);
            }
        }
        let (v, f) = best?;
        let scale = f0.abs().max(1.0);
        (f < f0 - 1e-13 * scale).then_some((v, f))
    }

    /// Pairwise exact line searches until a full pass gives no improvement.
    fn descend_node(&mut self, n: usize, mut w: Vec<f64>, mut f: f64) -> (Vec<f64>, f64) {
        let p = w.len();
        for _ in 0..200 {
            let mut improved = false;
            for a in 0..p {
                for b in (a + 1)..p {
                    if let Some((v, fv)) = self.line_search(n, &w, a, b, f) {
                        w = v;
                        f = fv;
                        improved = true;
                    }
                }
            }
            if !improved {
                break;
            }
        }
        self.eval_node(n, &w);
        (w, f)
    }
}

fn simplex_grid(p: usize, k: usize) -> Vec<Vec<f64>> {
    fn rec(p: usize, left: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<f64>>) {
        if cur.len() + 1 == p {
            cur.push(left);
            out.push(cur.iter().map(|&c| c as f64 / k as f64).collect());
            cur.pop();
            return;
        }
        for c in (0..=left).rev() {
            cur.push(c);
            rec(p, left - c, k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    if p > 0 {
        rec(p, k, k, &mut Vec::with_capacity(p), &mut out);
    }
    out
}

/// Number of points of the `1/k` grid on a simplex with `p` vertices.
fn grid_size(p: usize, k: usize) -> f64 {
    // C(k + p − 1, p − 1)
    (1..p).fold(1.0, |acc, i| acc * (k + i) as f64 / i as f64)
}

/// SplitMix64 over the seed and the bit patterns of the queues.
fn state_seed(seed: u64, queues: &[f64]) -> u64 {
    let mix = |mut z: u64| {
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        z ^ (z >> 31)
    };
    queues.iter().fold(mix(seed.wrapping_add(0x9e37_79b9_7f4a_7c15)), |h, q| {
        mix(h ^ q.to_bits()).wrapping_add(0x9e37_79b9_7f4a_7c15)
    })
}

fn divisions(resolution: f64) -> usize {
    (1.0 / resolution).round().max(1.0) as usize
}

impl OneStepMpc {
    pub fn new(config: OneStepConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self { config, warm: None, grids: HashMap::new() })
    }

    pub fn config(&self) -> &OneStepConfig {
        &self.config
    }

    fn node_grid(&mut self, p: usize) -> Vec<Vec<f64>> {
        let mut k = divisions(self.config.grid_resolution);
        while k > 1 && grid_size(p, k) > self.config.max_grid_points as f64 {
            k -= 1;
        }
        self.grids.entry((p, k)).or_insert_with(|| simplex_grid(p, k)).clone()
    }

    fn random_start(net: &Network, rng: &mut ChaCha8Rng) -> ControlVector {
        let weights = (0..net.num_nodes())
            .map(|n| {
                let draws: Vec<f64> = (0..net.num_phases(n)).map(|_| -(1.0 - rng.gen::<f64>()).ln()).collect();
                let s: f64 = draws.iter().sum();
                draws.iter().map(|d| d / s).collect()
            })
            .collect();
        ControlVector::from_raw(weights)
    }

    pub fn solve(&mut self, net: &Network, x: &QueueState) -> Result<OneStepSolution> {
        check_state(net, x)?;
        let topo = net.topology();
        let mut ws = Workspace::new(net, &x.queues);

        let mut starts = vec![
            ControlVector::uniform(topo),
            ControlVector::vertex(topo, &max_pressure_phases(topo, net.saturation(), net.turn_ratio(), &x.queues))?,
        ];
        if let Some(w) = self.warm.take() {
            if w.check_dims(topo).is_ok() {
                starts.push(w);
            }
        }
        let mut rng = ChaCha8Rng::seed_from_u64(state_seed(self.config.seed, &x.queues));
        for _ in 0..self.config.restarts {
            starts.push(Self::random_start(net, &mut rng));
        }

        let mut stats = SolverStats { converged: true, restarts: starts.len(), ..SolverStats::default() };
        let mut best: Option<(ControlVector, f64)> = None;
        for (si, start) in starts.into_iter().enumerate() {
            let mut u = start;
            ws.load(&u);
            let mut total = ws.total();
            let mut settled = false;
            for sweep in 0..self.config.max_sweeps {
                stats.iterations += 1;
                let before = total;
                for n in 0..topo.num_nodes() {
                    let p = topo.num_phases(n);
                    if p <= 1 {
                        continue;
                    }
                    let cur = u.node(n).to_vec();
                    let mut bw = cur.clone();
                    let mut bf = ws.eval_node(n, &cur);
                    let mut candidates: Vec<Vec<f64>> = (0..p)
                        .map(|k| {
                            let mut v = vec![0.0; p];
                            v[k] = 1.0;
                            v
                        })
                        .collect();
                    if si == 0 && sweep == 0 {
                        candidates.extend(self.node_grid(p));
                    }
                    for c in &candidates {
                        let f = ws.eval_node(n, c);
                        if f < bf {
                            bf = f;
                            bw = c.clone();
                        }
                    }
                    let (w, _) = ws.descend_node(n, bw, bf);
                    u.set_node(n, &w);
                }
                ws.load(&u);
                total = ws.total();
                if before - total <= 1e-12 * before.abs().max(1.0) {
                    settled = true;
                    break;
                }
            }
            stats.converged &= settled;
            if best.as_ref().is_none_or(|(_, bf)| total < *bf) {
                best = Some((u, total));
            }
        }
        let (mut u, mut objective) = best.expect("at least two starts");

        if topo.num_nodes() <= self.config.oracle_max_nodes {
            let k = divisions(self.config.grid_resolution);
            let joint: f64 = (0..topo.num_nodes()).map(|n| grid_size(topo.num_phases(n), k)).product();
            if joint <= self.config.oracle_max_points as f64 {
                if let Some((gu, gf)) = joint_grid_minimum(net, &x.queues, k) {
                    if gf < objective {
                        log::debug!("joint grid improved the one-step solution by {}", objective - gf);
                        u = gu;
                        objective = gf;
                    }
                    stats.oracle_verified = true;
                }
            }
        }

        // Report the objective recomputed from scratch at the returned control.
        let mut s = vec![0.0; topo.num_movements()];
        signal_into(topo, &u, &mut s);
        let _ = objective;
        let objective = one_step_cost_from_signal(net, &x.queues, &s);
        self.warm = Some(u.clone());
        Ok(OneStepSolution { u, objective, stats })
    }
}

/// Exhaustive scan of the product of per-node `1/k` grids.
fn joint_grid_minimum(net: &Network, queues: &[f64], k: usize) -> Option<(ControlVector, f64)> {
    let topo = net.topology();
    let grids: Vec<Vec<Vec<f64>>> = (0..topo.num_nodes()).map(|n| simplex_grid(topo.num_phases(n), k)).collect();
    if grids.iter().any(Vec::is_empty) {
        return None;
    }
    let mut idx = vec![0usize; grids.len()];
    let mut signal = vec![0.0; topo.num_movements()];
    let mut best: Option<(Vec<usize>, f64)> = None;
    loop {
        let u = ControlVector::from_raw(idx.iter().zip(&grids).map(|(&i, g)| g[i].clone()).collect());
        signal_into(topo, &u, &mut signal);
        let f = one_step_cost_from_signal(net, queues, &signal);
        if best.as_ref().is_none_or(|(_, bf)| f < *bf) {
            best = Some((idx.clone(), f));
        }
        let mut d = 0;
        loop {
            if d == idx.len() {
                let (bi, bf) = best?;
                let u = ControlVector::from_raw(bi.iter().zip(&grids).map(|(&i, g)| g[i].clone()).collect());
                return Some((u, bf));
            }
            idx[d] += 1;
            if idx[d] < grids[d].len() {
                break;
            }
            idx[d] = 0;
            d += 1;
        }
    }
}
