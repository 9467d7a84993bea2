//! Network generators: the rectangular grid used in the experiments, and a
//! small corridor family used for randomized testing.

use rand::Rng;

use super::{Link, LinkClass, LinkId, Network, NodeId, Parameters, Topology};
use crate::error::Result;

/// Grid parameters. Ratios and lane rates are ordered (left, through, right).
#[derive(Debug, Clone, PartialEq)]
pub struct GridParams {
    pub rows: usize,
    pub cols: usize,
    pub internal_turn_ratios: [f64; 3],
    pub entry_turn_ratios: [f64; 3],
    /// Saturation rate of the left, middle and right lane.
    pub lane_saturation: [f64; 3],
}

impl Default for GridParams {
    fn default() -> Self {
        Self {
            rows: 2,
            cols: 2,
            internal_turn_ratios: [0.17, 0.33, 0.5],
            entry_turn_ratios: [1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0],
            lane_saturation: [1.5, 1.6, 1.7],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Side {
    North = 0,
    East = 1,
    South = 2,
    West = 3,
}

impl Side {
    const ALL: [Side; 4] = [Side::North, Side::East, Side::South, Side::West];

    fn rotate(self, k: usize) -> Side {
        Side::ALL[(self as usize + k) % 4]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Turn {
    Left = 0,
    Through = 1,
    Right = 2,
}

/// The turn made by a vehicle arriving from side `from` and leaving by side `to`.
fn turn(from: Side, to: Side) -> Option<Turn> {
    let heading = from.rotate(2);
    if to == heading {
        Some(Turn::Through)
    } else if to == heading.rotate(1) {
        Some(Turn::Right)
    } else if to == heading.rotate(3) {
        Some(Turn::Left)
    } else {
        None
    }
}

/// The grid network used in the experiments: 2×2 intersections, 8 entry,
/// 8 internal and 8 exit links, four phases per intersection.
pub fn make_paper_grid() -> Network {
    make_grid(&GridParams::default()).expect("default grid parameters are valid")
}

/// A single four-way intersection (the 1×1 grid).
pub fn make_single_intersection() -> Network {
    make_grid(&GridParams { rows: 1, cols: 1, ..GridParams::default() })
        .expect("single intersection parameters are valid")
}

/// Builds a `rows × cols` grid of four-way intersections.
///
/// Boundary ports are numbered clockwise from the north-west corner; port
/// `p` carries entry link `2p - 1` and exit link `2p`. Internal links follow,
/// eastbound/westbound pairs row by row and then southbound/northbound pairs
/// column by column. Each intersection runs the four-phase scheme: north-south
/// through and right, north-south left, east-west through and right, east-west
/// left.
pub fn make_grid(params: &GridParams) -> Result<Network> {
    let (rows, cols) = (params.rows, params.cols);
    assert!(rows >= 1 && cols >= 1, "grid needs at least one intersection");
    let node_id = |r: usize, c: usize| (r * cols + c + 1) as NodeId;

    // incoming[node][side] / outgoing[node][side] = link id
    let mut incoming = vec![[0 as LinkId; 4]; rows * cols];
    let mut outgoing = vec![[0 as LinkId; 4]; rows * cols];
    let mut links = Vec::new();

    let mut ports = Vec::new();
    ports.extend((0..cols).map(|c| (0, c, Side::North)));
    ports.extend((0..rows).map(|r| (r, cols - 1, Side::East)));
    ports.extend((0..cols).rev().map(|c| (rows - 1, c, Side::South)));
    ports.extend((0..rows).rev().map(|r| (r, 0, Side::West)));
    for (p, &(r, c, side)) in ports.iter().enumerate() {
        let entry = (2 * p + 1) as LinkId;
        let exit = (2 * p + 2) as LinkId;
        let n = node_id(r, c);
        links.push(Link { id: entry, class: LinkClass::Entry, start: None, end: Some(n) });
        links.push(Link { id: exit, class: LinkClass::Exit, start: Some(n), end: None });
        incoming[r * cols + c][side as usize] = entry;
        outgoing[r * cols + c][side as usize] = exit;
    }

    let mut next = (2 * ports.len() + 1) as LinkId;
    let mut internal = |a: (usize, usize), b: (usize, usize), leave: Side, links: &mut Vec<Link>| {
        let id = next;
        next += 1;
        links.push(Link {
            id,
            class: LinkClass::Internal,
            start: Some(node_id(a.0, a.1)),
            end: Some(node_id(b.0, b.1)),
        });
        outgoing[a.0 * cols + a.1][leave as usize] = id;
        incoming[b.0 * cols + b.1][leave.rotate(2) as usize] = id;
    };
    for r in 0..rows {
        for c in 0..cols.saturating_sub(1) {
            internal((r, c), (r, c + 1), Side::East, &mut links);
            internal((r, c + 1), (r, c), Side::West, &mut links);
        }
    }
    for c in 0..cols {
        for r in 0..rows.saturating_sub(1) {
            internal((r, c), (r + 1, c), Side::South, &mut links);
            internal((r + 1, c), (r, c), Side::North, &mut links);
        }
    }

    let entry_ids: Vec<LinkId> = links.iter().filter(|l| l.class == LinkClass::Entry).map(|l| l.id).collect();

    // (from, to, turn, from_is_entry) at each node
    let mut specs = Vec::new();
    let mut phases = Vec::new();
    for r in 0..rows {
        for c in 0..cols {
            let k = r * cols + c;
            let mut phase_movements: [Vec<(LinkId, LinkId)>; 4] = Default::default();
            for from_side in Side::ALL {
                for to_side in Side::ALL {
                    let Some(t) = turn(from_side, to_side) else { continue };
                    let (from, to) = (incoming[k][from_side as usize], outgoing[k][to_side as usize]);
                    specs.push((from, to, t, entry_ids.contains(&from)));
                    let ns = matches!(from_side, Side::North | Side::South);
                    let phase = match (ns, t) {
                        (true, Turn::Through | Turn::Right) => 0,
                        (true, Turn::Left) => 1,
                        (false, Turn::Through | Turn::Right) => 2,
                        (false, Turn::Left) => 3,
                    };
                    phase_movements[phase].push((from, to));
                }
            }
            for pm in phase_movements {
                phases.push((node_id(r, c), pm));
            }
        }
    }

    let nodes: Vec<NodeId> = (0..rows * cols).map(|k| (k + 1) as NodeId).collect();
    let pairs: Vec<_> = specs.iter().map(|s| (s.0, s.1)).collect();
    let topology = Topology::new(nodes, links, &pairs, &phases)?;

    let n = topology.num_movements();
    let mut saturation = vec![0.0; n];
    let mut turn_ratio = vec![0.0; n];
    for &(from, to, t, from_entry) in &specs {
        let m = topology.movement_index(from, to).expect("registered");
        saturation[m] = params.lane_saturation[t as usize];
        let ratios = if from_entry { &params.entry_turn_ratios } else { &params.internal_turn_ratios };
        turn_ratio[m] = ratios[t as usize];
    }
    normalize_rows(&topology, &mut turn_ratio);

    Network::new(topology, Parameters { saturation, turn_ratio })
}

/// Rescales each link's outgoing turn ratios to sum to one.
fn normalize_rows(topo: &Topology, turn_ratio: &mut [f64]) {
    for link in topo.links() {
        let out = topo.movements_out_of(link.id);
        let sum: f64 = out.iter().map(|&m| turn_ratio[m]).sum();
        if out.is_empty() || sum <= 0.0 || (sum - 1.0).abs() <= 1e-12 {
            continue;
        }
        log::info!("renormalizing turn ratios out of link {} (sum was {sum})", link.id);
        for &m in out {
            turn_ratio[m] /= sum;
        }
    }
}

/// Phase layouts for corridor intersections.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CorridorPhases {
    /// Phase 1 serves everything heading east, phase 2 everything heading south.
    ByDestination,
    /// West-east through, north-south through, and both turns together.
    ThreePhase,
}

/// A one-way corridor of `nodes` intersections, west to east.
///
/// Every intersection has a north entry and a south exit. The westmost node has
/// a west entry, the eastmost an east exit, and consecutive nodes are joined by
/// an internal eastbound link. Per node the movements are, in order,
/// west→east, west→south, north→east, north→south.
#[derive(Debug, Clone, PartialEq)]
pub struct CorridorParams {
    pub phases: CorridorPhases,
    /// Saturation rate per node and movement.
    pub saturation: Vec<[f64; 4]>,
    /// Per node: share of the west approach and of the north approach turning east.
    pub east_share: Vec<[f64; 2]>,
}

impl CorridorParams {
    pub fn nodes(&self) -> usize {
        self.saturation.len()
    }

    pub fn random<R: Rng + ?Sized>(rng: &mut R, nodes: usize, phases: CorridorPhases) -> Self {
        Self {
            phases,
            saturation: (0..nodes).map(|_| std::array::from_fn(|_| rng.gen_range(1.0..2.0))).collect(),
            east_share: (0..nodes).map(|_| std::array::from_fn(|_| rng.gen_range(0.2..0.8))).collect(),
        }
    }
}

pub fn make_corridor(params: &CorridorParams) -> Result<Network> {
    let n = params.nodes();
    assert!(n >= 1, "corridor needs at least one node");
    assert_eq!(params.east_share.len(), n);
    let west_entry: LinkId = 1;
    let east_exit: LinkId = 2;
    let north = |k: usize| (10 + k) as LinkId;
    let south = |k: usize| (100 + k) as LinkId;
    let between = |k: usize| (1000 + k) as LinkId;

    let mut links = vec![
        Link { id: west_entry, class: LinkClass::Entry, start: None, end: Some(1) },
        Link { id: east_exit, class: LinkClass::Exit, start: Some(n as NodeId), end: None },
    ];
    for k in 1..=n {
        links.push(Link { id: north(k), class: LinkClass::Entry, start: None, end: Some(k as NodeId) });
        links.push(Link { id: south(k), class: LinkClass::Exit, start: Some(k as NodeId), end: None });
        if k < n {
            links.push(Link {
                id: between(k),
                class: LinkClass::Internal,
                start: Some(k as NodeId),
                end: Some(k as NodeId + 1),
            });
        }
    }

    let mut specs = Vec::new();
    let mut phases = Vec::new();
    for k in 1..=n {
        let west_in = if k == 1 { west_entry } else { between(k - 1) };
        let east_out = if k == n { east_exit } else { between(k) };
        let we = (west_in, east_out);
        let ws = (west_in, south(k));
        let ne = (north(k), east_out);
        let ns = (north(k), south(k));
        let share = params.east_share[k - 1];
        let sat = params.saturation[k - 1];
        specs.push((we, sat[0], share[0]));
        specs.push((ws, sat[1], 1.0 - share[0]));
        specs.push((ne, sat[2], share[1]));
        specs.push((ns, sat[3], 1.0 - share[1]));
        let node = k as NodeId;
        match params.phases {
            CorridorPhases::ByDestination => {
                phases.push((node, vec![we, ne]));
                phases.push((node, vec![ws, ns]));
            }
            CorridorPhases::ThreePhase => {
                phases.push((node, vec![we]));
                phases.push((node, vec![ns]));
                phases.push((node, vec![ws, ne]));
            }
        }
    }

    let nodes: Vec<NodeId> = (1..=n as NodeId).collect();
    let pairs: Vec<_> = specs.iter().map(|s| s.0).collect();
    let topology = Topology::new(nodes, links, &pairs, &phases)?;
    let mut saturation = vec![0.0; topology.num_movements()];
    let mut turn_ratio = vec![0.0; topology.num_movements()];
    for &((from, to), c, r) in &specs {
        let m = topology.movement_index(from, to).expect("registered");
        saturation[m] = c;
        turn_ratio[m] = r;
    }
    Network::new(topology, Parameters { saturation, turn_ratio })
}
