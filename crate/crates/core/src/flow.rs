//! Steady link flows and membership of a demand in the throughput region.

use serde::{Deserialize, Serialize};

use crate::dynamics::DemandVector;
use crate::error::{Error, Result};
use crate::lp::{Constraint, LinearProgram, LP_TOLERANCE};
use crate::network::{ControlVector, LinkId, Network, Topology};

/// Largest conservation residual accepted from [`solve_flow`].
pub const FLOW_RESIDUAL_TOLERANCE: f64 = 1e-10;

/// Steady flow per link, in link order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowVector {
    pub links: Vec<LinkId>,
    pub q: Vec<f64>,
    /// Max-norm conservation residual of `q`.
    pub residual: f64,
}

impl FlowVector {
    pub fn get(&self, link: LinkId) -> Option<f64> {
        self.links.iter().position(|&l| l == link).map(|p| self.q[p])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeasibilityCertificate {
    pub feasible: bool,
    /// Per-node maximizers of the service slack; present when feasible.
    pub witness: Option<ControlVector>,
    /// Smallest per-node optimal slack `min C S(u) − q R`.
    pub margin: f64,
    pub node_margins: Vec<f64>,
}

/// Conservation residual `max_i |q_i − b_i − Σ_k R_ki q_k|`.
fn residual(net: &Network, lambda: &[f64], q: &[f64]) -> f64 {
    let topo = net.topology();
    let mut worst: f64 = 0.0;
    for l in 0..topo.links().len() {
        let source = match topo.entry_position(l) {
            Some(e) => lambda[e],
            None => {
                topo.movements_into_index(l).iter().map(|&m| net.turn_ratio()[m] * q[topo.upstream_link_index(m)]).sum()
            }
        };
        worst = worst.max((q[l] - source).abs());
    }
    worst
}

/// Solves `q_i = λ_i` on entry links and `q_i = Σ_k R_ki q_k` elsewhere.
pub fn solve_flow(net: &Network, demand: &DemandVector) -> Result<FlowVector> {
    let topo = net.topology();
    let lambda = demand.as_slice();
    if lambda.len() != topo.entry_links().len() {
        return Err(Error::dim("demand", topo.entry_links().len(), lambda.len()));
    }
    if lambda.iter().any(|v| !(*v >= 0.0)) {
        return Err(Error::InvalidInput("demand must be nonnegative".into()));
    }
    let n = topo.links().len();
    // (I − A) q = b, A[i][k] = R_ki for movements (k, i).
    let mut a = vec![vec![0.0; n + 1]; n];
    for (l, row) in a.iter_mut().enumerate() {
        row[l] = 1.0;
        match topo.entry_position(l) {
            Some(e) => row[n] = lambda[e],
            None => {
                for &m in topo.movements_into_index(l) {
                    row[topo.upstream_link_index(m)] -= net.turn_ratio()[m];
                }
            }
        }
    }
    let mut q = gaussian_solve(a.clone())?;
    // One refinement pass against the original system.
    let mut r = vec![vec![0.0; n + 1]; n];
    for i in 0..n {
        let ax: f64 = (0..n).map(|k| a[i][k] * q[k]).sum();
        r[i][..n].copy_from_slice(&a[i][..n]);
        r[i][n] = a[i][n] - ax;
    }
    let dq = gaussian_solve(r)?;
    for (v, d) in q.iter_mut().zip(dq) {
        *v += d;
    }
    for v in q.iter_mut() {
        if *v < 0.0 && *v > -FLOW_RESIDUAL_TOLERANCE {
            *v = 0.0;
        }
    }
    if let Some(p) = q.iter().position(|v| *v < 0.0) {
        return Err(Error::Numerical(format!("steady flow on link {} is negative ({})", topo.links()[p].id, q[p])));
    }
    let res = residual(net, lambda, &q);
    if !(res <= FLOW_RESIDUAL_TOLERANCE) {
        return Err(Error::Numerical(format!("flow conservation residual {res} exceeds tolerance")));
    }
    Ok(FlowVector { links: topo.links().iter().map(|l| l.id).collect(), q, residual: res })
}

/// Gaussian elimination with partial pivoting on an augmented matrix.
fn gaussian_solve(mut a: Vec<Vec<f64>>) -> Result<Vec<f64>> {
    let n = a.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&x, &y| a[x][col].abs().total_cmp(&a[y][col].abs())).expect("nonempty range");
        if a[piv][col].abs() < 1e-12 {
            return Err(Error::Numerical(
                "flow conservation system is singular; routing has a cycle that never exits".into(),
            ));
        }
        a.swap(col, piv);
        for r in col + 1..n {
            let f = a[r][col] / a[col][col];
            if f != 0.0 {
                for c in col..=n {
                    a[r][c] -= f * a[col][c];
                }
            }
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = (r + 1..n).map(|c| a[r][c] * x[c]).sum();
        x[r] = (a[r][n] - s) / a[r][r];
    }
    Ok(x)
}

/// Per node `n`: maximizes `t` subject to `Σ_m u_m C_ij S^m_ij ≥ q_i R_ij + t`
/// for every movement controlled at `n`, `u` on the simplex. Returns `(t*, u*)`.
pub(crate) fn node_slack(
    topo: &Topology,
    saturation: &[f64],
    required: &[f64],
    node: usize,
) -> Result<Option<(f64, Vec<f64>)>> {
    let p = topo.num_phases(node);
    let mut lp = LinearProgram::new({
        let mut c = vec![0.0; p + 1];
        c[p] = 1.0;
        c
    });
    lp.set_free(p);
    let mut simplex = vec![1.0; p + 1];
    simplex[p] = 0.0;
    lp.push(Constraint::eq(simplex, 1.0));
    let mut any = false;
    for m in 0..topo.num_movements() {
        if topo.movement_node(m) != node {
            continue;
        }
        any = true;
        let mut row = vec![0.0; p + 1];
        for &ph in topo.movement_phases(m) {
            row[ph] = saturation[m];
        }
        row[p] = -1.0;
        lp.push(Constraint::ge(row, required[m]));
    }
    if !any {
        return Ok(None);
    }
    match lp.solve()?.optimal() {
        Some((x, t)) => Ok(Some((t, x[..p].to_vec()))),
        None => Err(Error::Numerical(format!("service-slack program at node {} has no optimum", topo.nodes()[node]))),
    }
}

/// Certifies whether `demand` lies strictly inside the throughput region.
pub fn check_demand_feasible(net: &Network, demand: &DemandVector) -> Result<FeasibilityCertificate> {
    let flow = solve_flow(net, demand)?;
    let topo = net.topology();
    let required: Vec<f64> =
        (0..topo.num_movements()).map(|m| flow.q[topo.upstream_link_index(m)] * net.turn_ratio()[m]).collect();
    let mut weights = Vec::with_capacity(topo.num_nodes());
    let mut node_margins = Vec::with_capacity(topo.num_nodes());
    for n in 0..topo.num_nodes() {
        match node_slack(topo, net.saturation(), &required, n)? {
            Some((t, u)) => {
                node_margins.push(t);
                weights.push(u);
            }
            None => {
                node_margins.push(f64::INFINITY);
                let p = topo.num_phases(n);
                weights.push(vec![1.0 / p as f64; p]);
            }
        }
    }
    let margin = node_margins.iter().copied().fold(f64::INFINITY, f64::min);
    let feasible = margin > LP_TOLERANCE;
    let witness = if feasible { Some(ControlVector::new(topo, weights)?) } else { None };
    Ok(FeasibilityCertificate { feasible, witness, margin, node_margins })
}
