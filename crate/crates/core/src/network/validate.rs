use std::fmt;

use super::{LinkClass, LinkId, Network, NodeId};

const ROW_SUM_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    /// Turn ratios out of an entry or internal link do not sum to one.
    TurnRatioRowSum {
        link: LinkId,
        sum: f64,
    },
    TurnRatioRange {
        from: LinkId,
        to: LinkId,
        value: f64,
    },
    NonPositiveSaturation {
        from: LinkId,
        to: LinkId,
        value: f64,
    },
    /// A movement is not served by any phase of its node.
    UnservedMovement {
        from: LinkId,
        to: LinkId,
    },
    /// Every phase at the start node of `link` serves some movement into it,
    /// so inflow to the link can never be shut off.
    NoBlockingPhase {
        link: LinkId,
        node: NodeId,
    },
    NodeWithoutPhases {
        node: NodeId,
    },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::TurnRatioRowSum { link, sum } => {
                write!(f, "turn ratios out of link {link} sum to {sum}, expected 1")
            }
            Violation::TurnRatioRange { from, to, value } => {
                write!(f, "turn ratio of movement ({from},{to}) is {value}, outside [0, 1]")
            }
            Violation::NonPositiveSaturation { from, to, value } => {
                write!(f, "saturation rate of movement ({from},{to}) is {value}, must be positive")
            }
            Violation::UnservedMovement { from, to } => {
                write!(f, "movement ({from},{to}) is not served by any phase")
            }
            Violation::NoBlockingPhase { link, node } => {
                write!(f, "every phase at node {node} serves a movement into link {link}; none can block it")
            }
            Violation::NodeWithoutPhases { node } => write!(f, "node {node} has no phases"),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.violations.is_empty() {
            return writeln!(f, "network is valid");
        }
        for v in &self.violations {
            writeln!(f, "- {v}")?;
        }
        Ok(())
    }
}

/// Checks the parameter and phase invariants a network must satisfy for the
/// controllers and the identification procedure.
pub fn validate_network(net: &Network) -> ValidationReport {
    let topo = net.topology();
    let mut violations = Vec::new();

    for (n, &node) in topo.nodes().iter().enumerate() {
        if topo.num_phases(n) == 0 {
            violations.push(Violation::NodeWithoutPhases { node });
        }
    }

    for mv in topo.movements() {
        let m = mv.index;
        let c = net.saturation()[m];
        if !(c > 0.0) {
            violations.push(Violation::NonPositiveSaturation { from: mv.from, to: mv.to, value: c });
        }
        let r = net.turn_ratio()[m];
        if !(0.0..=1.0).contains(&r) {
            violations.push(Violation::TurnRatioRange { from: mv.from, to: mv.to, value: r });
        }
        if topo.movement_phases(m).is_empty() {
            violations.push(Violation::UnservedMovement { from: mv.from, to: mv.to });
        }
    }

    for link in topo.links() {
        if link.class == LinkClass::Exit {
            continue;
        }
        let out = topo.movements_out_of(link.id);
        if out.is_empty() {
            continue;
        }
        let sum: f64 = out.iter().map(|&m| net.turn_ratio()[m]).sum();
        if (sum - 1.0).abs() > ROW_SUM_TOLERANCE {
            violations.push(Violation::TurnRatioRowSum { link: link.id, sum });
        }
    }

    for link in topo.links() {
        let Some(start) = link.start else { continue };
        let n = topo.node_index(start).expect("validated at construction");
        let into = topo.movements_into(link.id);
        let blocks = topo.phases(n).iter().any(|ph| !ph.served.iter().any(|m| into.contains(m)));
        if !blocks && topo.num_phases(n) > 0 {
            violations.push(Violation::NoBlockingPhase { link: link.id, node: start });
        }
    }

    ValidationReport { violations }
}
