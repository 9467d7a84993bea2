use crate::controllers::objective::check_state;
use crate::dynamics::QueueState;
use crate::error::Result;
use crate::network::{ControlVector, LinkClass, Network, Topology};

/// Pressure weight `w_ij = x_ij − Σ_l R_jl x_jl`; the downstream term is zero
/// when `j` is an exit link.
pub(crate) fn pressure_weights(topo: &Topology, turn: &[f64], queues: &[f64]) -> Vec<f64> {
    (0..topo.num_movements())
        .map(|m| {
            let down = if topo.to_class(m) == LinkClass::Exit {
                0.0
            } else {
                topo.movements_out_of(topo.movements()[m].to).iter().map(|&l| turn[l] * queues[l]).sum()
            };
            queues[m] - down
        })
        .collect()
}

/// Pressure `Σ_{served} C w` of every phase at `node`.
pub(crate) fn phase_pressures(topo: &Topology, saturation: &[f64], weights: &[f64], node: usize) -> Vec<f64> {
    topo.phases(node).iter().map(|ph| ph.served.iter().map(|&m| saturation[m] * weights[m]).sum()).collect()
}

/// Index of the largest value; ties go to the lowest index.
pub(crate) fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (k, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = k;
        }
    }
    best
}

pub(crate) fn max_pressure_phases(topo: &Topology, saturation: &[f64], turn: &[f64], queues: &[f64]) -> Vec<usize> {
    let w = pressure_weights(topo, turn, queues);
    (0..topo.num_nodes()).map(|n| argmax(&phase_pressures(topo, saturation, &w, n))).collect()
}

/// Max-pressure control: at each node, full green for the phase with the
/// largest service-weighted pressure.
pub fn max_pressure(net: &Network, x: &QueueState) -> Result<ControlVector> {
    check_state(net, x)?;
    let phases = max_pressure_phases(net, net.saturation(), net.turn_ratio(), &x.queues);
    ControlVector::vertex(net, &phases)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::generators::make_paper_grid;
    use crate::network::{Link, Parameters};

    #[test]
    fn zero_state_picks_first_phase() {
        let net = make_paper_grid();
        let u = max_pressure(&net, &QueueState::zeros(&net)).unwrap();
        assert_eq!(u, ControlVector::vertex(&net, &[0, 0, 0, 0]).unwrap());
    }

    #[test]
    fn hand_computed_pressures() {
        // Two entry movements to exits, each served by its own phase.
        let topo = Topology::new(
            vec![1],
            vec![
                Link { id: 1, class: LinkClass::Entry, start: None, end: Some(1) },
                Link { id: 2, class: LinkClass::Entry, start: None, end: Some(1) },
                Link { id: 3, class: LinkClass::Exit, start: Some(1), end: None },
                Link { id: 4, class: LinkClass::Exit, start: Some(1), end: None },
            ],
            &[(1, 3), (2, 4)],
            &[(1, vec![(1, 3)]), (1, vec![(2, 4)])],
        )
        .unwrap();
        let net = Network::new(topo, Parameters { saturation: vec![2.0, 1.6], turn_ratio: vec![1.0, 1.0] }).unwrap();
        let x = QueueState::new(&net, vec![5.0, 3.0]).unwrap();
        let w = pressure_weights(&net, net.turn_ratio(), &x.queues);
        let p = phase_pressures(&net, net.saturation(), &w, 0);
        assert_eq!(p, vec![10.0, 1.6 * 3.0]);
        assert_eq!(max_pressure(&net, &x).unwrap().node(0), &[1.0, 0.0]);
    }

    #[test]
    fn downstream_queues_reduce_pressure() {
        let net = make_paper_grid();
        let mut x = QueueState::zeros(&net);
        let m = net.movement_index(17, 4).unwrap();
        x.queues[m] = 10.0;
        let w = pressure_weights(&net, net.turn_ratio(), &x.queues);
        let up = net.movements_into(17);
        for &k in up {
            assert!((w[k] + net.turn_ratio()[m] * 10.0).abs() < 1e-12);
        }
    }
}
