//! Network topology, phase architecture and the control set.
//!
//! A [`Topology`] holds everything the controller is allowed to know about the
//! road network: links, movements (queues), and the phases at every
//! intersection. A [`Network`] pairs a topology with the true saturation rates
//! and turn ratios, which only the simulated plant should read.

mod config;
pub(crate) mod control;
pub mod generators;
mod validate;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use config::{DemandEntry, LinkEntry, MovementEntry, NetworkConfig, PhaseEntry};
pub use control::{build_signal, ControlVector, SIMPLEX_TOLERANCE};
pub use validate::{validate_network, ValidationReport, Violation};

pub type LinkId = u32;
pub type NodeId = u32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LinkClass {
    Entry,
    Internal,
    Exit,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Link {
    pub id: LinkId,
    pub class: LinkClass,
    pub start: Option<NodeId>,
    pub end: Option<NodeId>,
}

/// A queue `(from, to)`; `index` is its position in the state vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Movement {
    pub from: LinkId,
    pub to: LinkId,
    pub index: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Phase {
    pub node: NodeId,
    /// Position of this phase within its node's phase list.
    pub index: usize,
    /// Movement indices served while the phase is green, ascending.
    pub served: Vec<usize>,
}

/// Immutable structure of a signalized network.
#[derive(Debug, Clone)]
pub struct Topology {
    nodes: Vec<NodeId>,
    node_pos: BTreeMap<NodeId, usize>,
    links: Vec<Link>,
    link_pos: BTreeMap<LinkId, usize>,
    movements: Vec<Movement>,
    movement_pos: BTreeMap<(LinkId, LinkId), usize>,
    phases: Vec<Vec<Phase>>,

    movement_node: Vec<usize>,
    movement_from: Vec<usize>,
    movement_to: Vec<usize>,
    movement_phases: Vec<Vec<usize>>,
    into_link: Vec<Vec<usize>>,
    out_of_link: Vec<Vec<usize>>,
    entry_links: Vec<LinkId>,
    exit_links: Vec<LinkId>,
    entry_pos: Vec<Option<usize>>,
    exit_pos: Vec<Option<usize>>,
}

impl Topology {
    /// Builds a topology. Movements are re-indexed lexicographically by
    /// `(from, to)`; phases keep the order given per node.
    pub fn new(
        nodes: Vec<NodeId>,
        links: Vec<Link>,
        movements: &[(LinkId, LinkId)],
        phases: &[(NodeId, Vec<(LinkId, LinkId)>)],
    ) -> Result<Self> {
        let mut nodes = nodes;
        nodes.sort_unstable();
        nodes.dedup();
        let node_pos: BTreeMap<_, _> = nodes.iter().enumerate().map(|(p, &n)| (n, p)).collect();

        let mut links = links;
        links.sort_by_key(|l| l.id);
        for pair in links.windows(2) {
            if pair[0].id == pair[1].id {
                return Err(Error::Structure(format!("duplicate link id {}", pair[0].id)));
            }
        }
        for link in &links {
            let ok = match link.class {
                LinkClass::Entry => link.start.is_none() && link.end.is_some(),
                LinkClass::Exit => link.start.is_some() && link.end.is_none(),
                LinkClass::Internal => link.start.is_some() && link.end.is_some(),
            };
            if !ok {
                return Err(Error::Structure(format!(
                    "link {} of class {:?} has inconsistent endpoints (start {:?}, end {:?})",
                    link.id, link.class, link.start, link.end
                )));
            }
            for n in [link.start, link.end].into_iter().flatten() {
                if !node_pos.contains_key(&n) {
                    return Err(Error::Structure(format!("link {} references unknown node {n}", link.id)));
                }
            }
        }
        let link_pos: BTreeMap<_, _> = links.iter().enumerate().map(|(p, l)| (l.id, p)).collect();

        let mut pairs: Vec<(LinkId, LinkId)> = movements.to_vec();
        pairs.sort_unstable();
        pairs.dedup();
        let mut movement_list = Vec::with_capacity(pairs.len());
        let mut movement_pos = BTreeMap::new();
        let mut movement_node = Vec::with_capacity(pairs.len());
        let mut movement_from = Vec::with_capacity(pairs.len());
        let mut movement_to = Vec::with_capacity(pairs.len());
        for (index, &(from, to)) in pairs.iter().enumerate() {
            let fp = *link_pos
                .get(&from)
                .ok_or_else(|| Error::Structure(format!("movement ({from},{to}): unknown link {from}")))?;
            let tp = *link_pos
                .get(&to)
                .ok_or_else(|| Error::Structure(format!("movement ({from},{to}): unknown link {to}")))?;
            let (fl, tl) = (&links[fp], &links[tp]);
            if fl.class == LinkClass::Exit {
                return Err(Error::Structure(format!("movement ({from},{to}) starts on exit link {from}")));
            }
            match (fl.end, tl.start) {
                (Some(a), Some(b)) if a == b => {}
                _ => {
                    return Err(Error::Structure(format!(
                        "movement ({from},{to}): link {to} does not leave the end node of link {from}"
                    )))
                }
            }
            let node = fl.end.expect("checked above");
            movement_list.push(Movement { from, to, index });
            movement_pos.insert((from, to), index);
            movement_node.push(node_pos[&node]);
            movement_from.push(fp);
            movement_to.push(tp);
        }

        let mut phase_lists: Vec<Vec<Phase>> = vec![Vec::new(); nodes.len()];
        for (node, served) in phases {
            let np = *node_pos.get(node).ok_or_else(|| Error::Structure(format!("phase at unknown node {node}")))?;
            let mut idx = Vec::with_capacity(served.len());
            for &(from, to) in served {
                let m = *movement_pos.get(&(from, to)).ok_or_else(|| {
                    Error::Structure(format!("phase at node {node} serves unknown movement ({from},{to})"))
                })?;
                if movement_node[m] != np {
                    return Err(Error::Structure(format!(
                        "phase at node {node} serves movement ({from},{to}) which does not pass through it"
                    )));
                }
                idx.push(m);
            }
            idx.sort_unstable();
            idx.dedup();
            let index = phase_lists[np].len();
            phase_lists[np].push(Phase { node: *node, index, served: idx });
        }

        let mut movement_phases = vec![Vec::new(); movement_list.len()];
        for list in &phase_lists {
            for phase in list {
                for &m in &phase.served {
                    movement_phases[m].push(phase.index);
                }
            }
        }

        let mut into_link = vec![Vec::new(); links.len()];
        let mut out_of_link = vec![Vec::new(); links.len()];
        for m in 0..movement_list.len() {
            into_link[movement_to[m]].push(m);
            out_of_link[movement_from[m]].push(m);
        }

        let entry_links: Vec<LinkId> = links.iter().filter(|l| l.class == LinkClass::Entry).map(|l| l.id).collect();
        let exit_links: Vec<LinkId> = links.iter().filter(|l| l.class == LinkClass::Exit).map(|l| l.id).collect();
        let mut entry_pos = vec![None; links.len()];
        let mut exit_pos = vec![None; links.len()];
        for (k, id) in entry_links.iter().enumerate() {
            entry_pos[link_pos[id]] = Some(k);
        }
        for (k, id) in exit_links.iter().enumerate() {
            exit_pos[link_pos[id]] = Some(k);
        }

        Ok(Self {
            nodes,
            node_pos,
            links,
            link_pos,
            movements: movement_list,
            movement_pos,
            phases: phase_lists,
            movement_node,
            movement_from,
            movement_to,
            movement_phases,
            into_link,
            out_of_link,
            entry_links,
            exit_links,
            entry_pos,
            exit_pos,
        })
    }

    pub fn nodes(&self) -> &[NodeId] {
        &self.nodes
    }

    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn node_index(&self, node: NodeId) -> Option<usize> {
        self.node_pos.get(&node).copied()
    }

    pub fn links(&self) -> &[Link] {
        &self.links
    }

    pub fn link(&self, id: LinkId) -> Option<&Link> {
        self.link_pos.get(&id).map(|&p| &self.links[p])
    }

    pub fn movements(&self) -> &[Movement] {
        &self.movements
    }

    pub fn num_movements(&self) -> usize {
        self.movements.len()
    }

    pub fn movement_index(&self, from: LinkId, to: LinkId) -> Option<usize> {
        self.movement_pos.get(&(from, to)).copied()
    }

    /// Phases of the node at position `node` (see [`Topology::nodes`]).
    pub fn phases(&self, node: usize) -> &[Phase] {
        &self.phases[node]
    }

    pub fn num_phases(&self, node: usize) -> usize {
        self.phases[node].len()
    }

    /// Total number of phases over all nodes.
    pub fn num_controls(&self) -> usize {
        self.phases.iter().map(Vec::len).sum()
    }

    /// Position of the node whose signal controls movement `m`.
    pub fn movement_node(&self, m: usize) -> usize {
        self.movement_node[m]
    }

    /// Phase indices (within the movement's node) that serve movement `m`.
    pub fn movement_phases(&self, m: usize) -> &[usize] {
        &self.movement_phases[m]
    }

    pub fn from_class(&self, m: usize) -> LinkClass {
        self.links[self.movement_from[m]].class
    }

    pub fn to_class(&self, m: usize) -> LinkClass {
        self.links[self.movement_to[m]].class
    }

    pub(crate) fn upstream_link_index(&self, m: usize) -> usize {
        self.movement_from[m]
    }

    pub(crate) fn downstream_link_index(&self, m: usize) -> usize {
        self.movement_to[m]
    }

    /// Movements whose downstream link is `link` (the queues `(k, link)`).
    pub fn movements_into(&self, link: LinkId) -> &[usize] {
        self.link_pos.get(&link).map(|&p| self.into_link[p].as_slice()).unwrap_or(&[])
    }

    /// Movements whose upstream link is `link` (the queues `(link, j)`).
    pub fn movements_out_of(&self, link: LinkId) -> &[usize] {
        self.link_pos.get(&link).map(|&p| self.out_of_link[p].as_slice()).unwrap_or(&[])
    }

    pub(crate) fn movements_into_index(&self, link: usize) -> &[usize] {
        &self.into_link[link]
    }

    pub(crate) fn movements_out_of_index(&self, link: usize) -> &[usize] {
        &self.out_of_link[link]
    }

    /// Entry links in ascending id order; this is the layout of demand vectors.
    pub fn entry_links(&self) -> &[LinkId] {
        &self.entry_links
    }

    /// Exit links in ascending id order; this is the layout of exit volumes.
    pub fn exit_links(&self) -> &[LinkId] {
        &self.exit_links
    }

    pub(crate) fn entry_position(&self, link: usize) -> Option<usize> {
        self.entry_pos[link]
    }

    pub(crate) fn exit_position(&self, link: usize) -> Option<usize> {
        self.exit_pos[link]
    }

    /// Position of the entry link feeding movement `m`, if it starts on one.
    pub fn movement_entry(&self, m: usize) -> Option<usize> {
        self.entry_pos[self.movement_from[m]]
    }
}

/// Per-movement saturation rates `C` and turn ratios `R`.
#[derive(Debug, Clone, PartialEq)]
pub struct Parameters {
    pub saturation: Vec<f64>,
    pub turn_ratio: Vec<f64>,
}

/// A topology together with its true parameters.
#[derive(Debug, Clone)]
pub struct Network {
    topology: Topology,
    params: Parameters,
}

impl Network {
    pub fn new(topology: Topology, params: Parameters) -> Result<Self> {
        let n = topology.num_movements();
        if params.saturation.len() != n {
            return Err(Error::dim("saturation rates", n, params.saturation.len()));
        }
        if params.turn_ratio.len() != n {
            return Err(Error::dim("turn ratios", n, params.turn_ratio.len()));
        }
        Ok(Self { topology, params })
    }

    pub fn topology(&self) -> &Topology {
        &self.topology
    }

    pub fn params(&self) -> &Parameters {
        &self.params
    }

    pub fn saturation(&self) -> &[f64] {
        &self.params.saturation
    }

    pub fn turn_ratio(&self) -> &[f64] {
        &self.params.turn_ratio
    }

    /// Same topology, different parameters (e.g. identified estimates).
    pub fn with_params(&self, params: Parameters) -> Result<Self> {
        Network::new(self.topology.clone(), params)
    }
}

impl std::ops::Deref for Network {
    type Target = Topology;

    fn deref(&self) -> &Topology {
        &self.topology
    }
}
