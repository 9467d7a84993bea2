use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::identification::ParameterBounds;
use crate::lp::{Constraint, LinearProgram};
use crate::network::control::signal_into;
use crate::network::{ControlVector, LinkClass, Topology};

/// Which parameter a terminal set makes identifiable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TargetKind {
    /// Turn ratio of an internal-origin movement.
    RInternal,
    /// Saturation rate of an internal-origin movement.
    CInternal,
    /// Saturation rate of an entry movement that discharges into an exit link.
    CEntryExit,
    /// Saturation rate of an entry movement that discharges into an internal link.
    CEntryInternal,
}

impl TargetKind {
    pub fn as_str(self) -> &'static str {
        match self {
            TargetKind::RInternal => "R-internal",
            TargetKind::CInternal => "C-internal",
            TargetKind::CEntryExit => "C-entry-exit",
            TargetKind::CEntryInternal => "C-entry-internal",
        }
    }

    /// True for the kinds that pin a saturation rate.
    pub fn is_saturation(self) -> bool {
        !matches!(self, TargetKind::RInternal)
    }
}

impl fmt::Display for TargetKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A terminal set: the target movement, its kind, and for
/// [`TargetKind::CEntryInternal`] the downstream witness movement `(j, l)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TerminalSetSpec {
    pub kind: TargetKind,
    pub target: usize,
    pub witness: Option<usize>,
    /// Smallest green fraction accepted on the target for saturation kinds,
    /// so that the estimate divides by a nonzero signal.
    pub min_signal: f64,
}

pub const DEFAULT_MIN_SIGNAL: f64 = 0.05;

/// Inequalities of a terminal set: queues that must be fully served
/// (`x̄_k ≤ C̲_k S_k`) and, for saturation kinds, the target that must stay
/// saturated (`x̲_t ≥ C̄_t S_t`).
#[derive(Debug, Clone)]
pub(crate) struct TerminalConstraints {
    pub drained: Vec<usize>,
    pub saturated: Option<usize>,
}

impl TerminalSetSpec {
    pub fn new(topo: &Topology, kind: TargetKind, target: usize, witness: Option<usize>) -> Result<Self> {
        if target >= topo.num_movements() {
            return Err(Error::InvalidInput(format!("movement index {target} out of range")));
        }
        let (from, to) = (topo.from_class(target), topo.to_class(target));
        let ok = match kind {
            TargetKind::RInternal | TargetKind::CInternal => from == LinkClass::Internal,
            TargetKind::CEntryExit => from == LinkClass::Entry && to == LinkClass::Exit,
            TargetKind::CEntryInternal => from == LinkClass::Entry && to == LinkClass::Internal,
        };
        if !ok {
            let mv = topo.movements()[target];
            return Err(Error::InvalidInput(format!("movement ({},{}) cannot be a {kind} target", mv.from, mv.to)));
        }
        match (kind, witness) {
            (TargetKind::CEntryInternal, Some(w)) => {
                if w >= topo.num_movements() || topo.movements()[w].from != topo.movements()[target].to {
                    return Err(Error::InvalidInput("witness must leave the target's downstream link".into()));
                }
            }
            (TargetKind::CEntryInternal, None) => {
                return Err(Error::InvalidInput("entry-to-internal target needs a witness movement".into()))
            }
            (_, Some(_)) => return Err(Error::InvalidInput("only entry-to-internal targets take a witness".into())),
            _ => {}
        }
        Ok(Self { kind, target, witness, min_signal: DEFAULT_MIN_SIGNAL })
    }

    pub(crate) fn constraints(&self, topo: &Topology) -> TerminalConstraints {
        let mv = topo.movements()[self.target];
        match self.kind {
            TargetKind::RInternal => {
                let mut drained = vec![self.target];
                drained.extend_from_slice(topo.movements_into(mv.from));
                TerminalConstraints { drained, saturated: None }
            }
            TargetKind::CInternal => {
                TerminalConstraints { drained: topo.movements_into(mv.from).to_vec(), saturated: Some(self.target) }
            }
            TargetKind::CEntryExit | TargetKind::CEntryInternal => TerminalConstraints {
                drained: topo.movements_into(mv.to).iter().copied().filter(|&k| k != self.target).collect(),
                saturated: Some(self.target),
            },
        }
    }

    /// Nodes whose split appears in the terminal inequalities, ascending.
    pub fn nodes(&self, topo: &Topology) -> Vec<usize> {
        let c = self.constraints(topo);
        let mut nodes: Vec<usize> =
            c.drained.iter().chain(c.saturated.iter()).map(|&m| topo.movement_node(m)).collect();
        nodes.sort_unstable();
        nodes.dedup();
        nodes
    }

    pub fn label(&self, topo: &Topology) -> String {
        let mv = topo.movements()[self.target];
        format!("{} ({},{})", self.kind, mv.from, mv.to)
    }
}

#[allow(clippy::too_many_arguments)]
fn node_holds(
    topo: &Topology,
    bounds: &ParameterBounds,
    c: &TerminalConstraints,
    min_signal: f64,
    node: usize,
    upper: &[f64],
    lower: &[f64],
    signal: &[f64],
) -> bool {
    c.drained
        .iter()
        .filter(|&&k| topo.movement_node(k) == node)
        .all(|&k| upper[k] <= bounds.saturation_lower[k] * signal[k])
        && c.saturated
            .iter()
            .filter(|&&t| topo.movement_node(t) == node)
            .all(|&t| signal[t] >= min_signal && lower[t] >= bounds.saturation_upper[t] * signal[t])
}

/// Exact check of `(x̄, x̲) ∈ X_u(u)`.
pub fn terminal_membership(
    topo: &Topology,
    bounds: &ParameterBounds,
    spec: &TerminalSetSpec,
    upper: &[f64],
    lower: &[f64],
    u: &ControlVector,
) -> bool {
    let mut signal = vec![0.0; topo.num_movements()];
    signal_into(topo, u, &mut signal);
    let c = spec.constraints(topo);
    spec.nodes(topo).into_iter().all(|n| node_holds(topo, bounds, &c, spec.min_signal, n, upper, lower, &signal))
}

/// Searches for `u` with `(x̄, x̲) ∈ X_u(u)`: per node, vertex controls in
/// phase order, then a linear program maximizing the smallest slack. Nodes
/// outside the terminal inequalities keep their split from `base`.
pub fn find_terminal_u(
    topo: &Topology,
    bounds: &ParameterBounds,
    spec: &TerminalSetSpec,
    upper: &[f64],
    lower: &[f64],
    base: &ControlVector,
) -> Option<ControlVector> {
    let c = spec.constraints(topo);
    let mut u = base.clone();
    let mut signal = vec![0.0; topo.num_movements()];
    for n in spec.nodes(topo) {
        let p = topo.num_phases(n);
        let mut found = false;
        for ph in 0..p {
            let mut w = vec![0.0; p];
            w[ph] = 1.0;
            u.set_node(n, &w);
            signal_into(topo, &u, &mut signal);
            if node_holds(topo, bounds, &c, spec.min_signal, n, upper, lower, &signal) {
                found = true;
                break;
            }
        }
        if !found {
            let w = node_lp(topo, bounds, &c, spec.min_signal, n, upper, lower)?;
            u.set_node(n, &w);
            signal_into(topo, &u, &mut signal);
            if !node_holds(topo, bounds, &c, spec.min_signal, n, upper, lower, &signal) {
                return None;
            }
        }
    }
    Some(u)
}

/// The inequalities at one node are linear in its split. Each is tightened
/// by a relative `1e-9` so the returned point passes the exact check.
pub(crate) fn node_lp(
    topo: &Topology,
    bounds: &ParameterBounds,
    c: &TerminalConstraints,
    min_signal: f64,
    node: usize,
    upper: &[f64],
    lower: &[f64],
) -> Option<Vec<f64>> {
    let p = topo.num_phases(node);
    let tighten = |v: f64| 1e-9 * v.abs().max(1.0);
    let mut objective = vec![0.0; p + 1];
    objective[p] = 1.0;
    let mut lp = LinearProgram::new(objective);
    lp.set_free(p);
    let mut simplex = vec![1.0; p + 1];
    simplex[p] = 0.0;
    lp.push(Constraint::eq(simplex, 1.0));
    let served = |m: usize, scale: f64| {
        let mut row = vec![0.0; p + 1];
        for &ph in topo.movement_phases(m) {
            row[ph] = scale;
        }
        row
    };
    let mut rows = 0;
    for &k in c.drained.iter().filter(|&&k| topo.movement_node(k) == node) {
        // C̲ S − t ≥ x̄
        let mut row = served(k, bounds.saturation_lower[k]);
        row[p] = -1.0;
        lp.push(Constraint::ge(row, upper[k] + tighten(upper[k])));
        rows += 1;
    }
    for &t in c.saturated.iter().filter(|&&t| topo.movement_node(t) == node) {
        // x̲ − C̄ S ≥ t and S ≥ s_min
        let mut row = served(t, bounds.saturation_upper[t]);
        row[p] = 1.0;
        lp.push(Constraint::le(row, lower[t] - tighten(lower[t])));
        lp.push(Constraint::ge(served(t, 1.0), min_signal * (1.0 + 1e-9)));
        rows += 1;
    }
    if rows == 0 {
        return None;
    }
    let mut cap = vec![0.0; p + 1];
    cap[p] = 1.0;
    lp.push(Constraint::le(cap, 1.0));
    let (x, t) = lp.solve().ok()?.optimal()?;
    if t < 0.0 {
        return None;
    }
    let mut w: Vec<f64> = x[..p].iter().map(|v| v.max(0.0)).collect();
    let s: f64 = w.iter().sum();
    w.iter_mut().for_each(|v| *v /= s);
    Some(w)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::generators::make_paper_grid;
    use crate::Network;

    fn setup() -> (Network, ParameterBounds) {
        let net = make_paper_grid();
        let b = ParameterBounds::from_truth_margin(&net, &[0.93; 8], 0.1);
        (net, b)
    }

    #[test]
    fn zero_state_is_in_every_drain_set() {
        let (net, b) = setup();
        let t = net.movement_index(17, 23).unwrap();
        let spec = TerminalSetSpec::new(&net, TargetKind::RInternal, t, None).unwrap();
        let zero = vec![0.0; 48];
        let base = ControlVector::vertex(&net, &[0, 0, 0, 0]).unwrap();
        for ph in 0..4 {
            let u = ControlVector::vertex(&net, &[ph; 4]).unwrap();
            assert!(terminal_membership(&net, &b, &spec, &zero, &zero, &u));
        }
        assert_eq!(find_terminal_u(&net, &b, &spec, &zero, &zero, &base).unwrap(), base);
    }

    #[test]
    fn saturation_violated_by_delta() {
        let (net, b) = setup();
        let t = net.movement_index(17, 23).unwrap();
        let spec = TerminalSetSpec::new(&net, TargetKind::CInternal, t, None).unwrap();
        let u = ControlVector::uniform(&net);
        let s = crate::network::build_signal(&net, &u).unwrap();
        let mut lower = vec![0.0; 48];
        let upper = vec![0.0; 48];
        lower[t] = b.saturation_upper[t] * s[t] - 1e-6;
        assert!(!terminal_membership(&net, &b, &spec, &upper, &lower, &u));
        lower[t] = b.saturation_upper[t] * s[t];
        assert!(terminal_membership(&net, &b, &spec, &upper, &lower, &u));
    }

    #[test]
    fn hand_built_drain_state_with_margin() {
        let (net, b) = setup();
        // Target (17, 23): link 17 runs east from node 1 to node 2; 23 runs
        // south from node 2 to node 4, a right turn for eastbound traffic.
        let t = net.movement_index(17, 23).unwrap();
        let spec = TerminalSetSpec::new(&net, TargetKind::RInternal, t, None).unwrap();
        let target_phase = net.movement_phases(t)[0];
        let n2 = net.movement_node(t);
        let mut phases = vec![0; 4];
        phases[n2] = target_phase;
        let feeders = net.movements_into(17);
        let n1 = net.movement_node(feeders[0]);
        // Feeders of 17 sit in different phases; serve one, leave the
        // others empty.
        phases[n1] = net.movement_phases(feeders[0])[0];
        let u = ControlVector::vertex(&net, &phases).unwrap();
        let mut upper = vec![5.0; 48];
        upper[t] = b.saturation_lower[t] - 0.1;
        for (i, &k) in feeders.iter().enumerate() {
            upper[k] = if i == 0 { b.saturation_lower[k] - 0.1 } else { 0.0 };
        }
        let lower = vec![0.0; 48];
        assert!(terminal_membership(&net, &b, &spec, &upper, &lower, &u));
        let found = find_terminal_u(&net, &b, &spec, &upper, &lower, &ControlVector::uniform(&net)).unwrap();
        assert!(terminal_membership(&net, &b, &spec, &upper, &lower, &found));
        assert_eq!(found.node(n2)[target_phase], 1.0);
        assert_eq!(found.node(n1), u.node(n1));
    }

    #[test]
    fn lp_finds_mixed_split_when_no_vertex_works() {
        let (net, b) = setup();
        let t = net.movement_index(17, 23).unwrap();
        let spec = TerminalSetSpec::new(&net, TargetKind::RInternal, t, None).unwrap();
        let feeders = net.movements_into(17);
        let mut upper = vec![0.0; 48];
        for &k in feeders {
            upper[k] = 0.3;
        }
        let lower = vec![0.0; 48];
        let base = ControlVector::uniform(&net);
        let u = find_terminal_u(&net, &b, &spec, &upper, &lower, &base).unwrap();
        assert!(terminal_membership(&net, &b, &spec, &upper, &lower, &u));
        let n1 = net.movement_node(feeders[0]);
        assert!(u.node(n1).iter().filter(|&&w| w > 0.0).count() >= 2);
    }

    #[test]
    fn no_witness_when_overloaded() {
        let (net, b) = setup();
        let t = net.movement_index(17, 23).unwrap();
        let spec = TerminalSetSpec::new(&net, TargetKind::RInternal, t, None).unwrap();
        let upper = vec![10.0; 48];
        let lower = vec![0.0; 48];
        assert!(find_terminal_u(&net, &b, &spec, &upper, &lower, &ControlVector::uniform(&net)).is_none());
    }

    #[test]
    fn kind_must_match_movement_class() {
        let (net, _) = setup();
        let entry = net.movement_index(1, 17).unwrap();
        assert!(TerminalSetSpec::new(&net, TargetKind::RInternal, entry, None).is_err());
        assert!(TerminalSetSpec::new(&net, TargetKind::CEntryInternal, entry, None).is_err());
        let w = net.movement_index(17, 23).unwrap();
        assert!(TerminalSetSpec::new(&net, TargetKind::CEntryInternal, entry, Some(w)).is_ok());
    }
}
