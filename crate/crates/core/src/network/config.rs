use serde::{Deserialize, Serialize};

use super::{Link, LinkClass, LinkId, Network, NodeId, Parameters, Topology};
use crate::error::{Error, Result};

/// JSON document describing a network, its true parameters and, optionally,
/// the demand on its entry links.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkConfig {
    pub nodes: Vec<NodeId>,
    pub links: Vec<LinkEntry>,
    pub movements: Vec<MovementEntry>,
    pub phases: Vec<PhaseEntry>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub demand: Vec<DemandEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinkEntry {
    pub id: LinkId,
    pub class: LinkClass,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub start: Option<NodeId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub end: Option<NodeId>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MovementEntry {
    pub from: LinkId,
    pub to: LinkId,
    pub saturation: f64,
    pub turn_ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhaseEntry {
    pub node: NodeId,
    /// Served movements as `[from, to]` pairs.
    pub movements: Vec<(LinkId, LinkId)>,
}

/// Demand on one entry link: the nominal rate and the bounds known to the
/// controller.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DemandEntry {
    pub link: LinkId,
    pub rate: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lower: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub upper: Option<f64>,
}

impl NetworkConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn build(&self) -> Result<Network> {
        let links = self.links.iter().map(|l| Link { id: l.id, class: l.class, start: l.start, end: l.end }).collect();
        let pairs: Vec<_> = self.movements.iter().map(|m| (m.from, m.to)).collect();
        let phases: Vec<_> = self.phases.iter().map(|p| (p.node, p.movements.clone())).collect();
        let topology = Topology::new(self.nodes.clone(), links, &pairs, &phases)?;
        let n = topology.num_movements();
        if n != self.movements.len() {
            return Err(Error::Structure("duplicate movements in configuration".into()));
        }
        let mut saturation = vec![0.0; n];
        let mut turn_ratio = vec![0.0; n];
        for m in &self.movements {
            let idx = topology.movement_index(m.from, m.to).expect("movement was registered");
            saturation[idx] = m.saturation;
            turn_ratio[idx] = m.turn_ratio;
        }
        Network::new(topology, Parameters { saturation, turn_ratio })
    }

    /// Demand rates in entry-link order. Entry links missing from the
    /// `demand` list get zero.
    pub fn demand_rates(&self, topo: &Topology) -> Result<Vec<f64>> {
        let mut rates = vec![0.0; topo.entry_links().len()];
        for d in &self.demand {
            let pos = topo
                .entry_links()
                .iter()
                .position(|&l| l == d.link)
                .ok_or_else(|| Error::config("demand", format!("link {} is not an entry link", d.link)))?;
            rates[pos] = d.rate;
        }
        Ok(rates)
    }

    pub fn from_network(net: &Network, demand: Option<&[f64]>) -> Self {
        let topo = net.topology();
        let links =
            topo.links().iter().map(|l| LinkEntry { id: l.id, class: l.class, start: l.start, end: l.end }).collect();
        let movements = topo
            .movements()
            .iter()
            .map(|m| MovementEntry {
                from: m.from,
                to: m.to,
                saturation: net.saturation()[m.index],
                turn_ratio: net.turn_ratio()[m.index],
            })
            .collect();
        let mut phases = Vec::new();
        for n in 0..topo.num_nodes() {
            for ph in topo.phases(n) {
                phases.push(PhaseEntry {
                    node: ph.node,
                    movements: ph.served.iter().map(|&m| (topo.movements()[m].from, topo.movements()[m].to)).collect(),
                });
            }
        }
        let demand = demand
            .map(|rates| {
                topo.entry_links()
                    .iter()
                    .zip(rates)
                    .map(|(&link, &rate)| DemandEntry { link, rate, lower: None, upper: None })
                    .collect()
            })
            .unwrap_or_default();
        Self { nodes: topo.nodes().to_vec(), links, movements, phases, demand }
    }
}
