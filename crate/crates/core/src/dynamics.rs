//! Piecewise-affine queue dynamics and the bounding (augmented) dynamics.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::identification::ParameterBounds;
use crate::network::{control::signal_into, ControlVector, Network, Topology};

/// Queue lengths per movement plus what reached each exit link.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueueState {
    /// Queue length per movement, in movement-index order.
    pub queues: Vec<f64>,
    /// Volume that arrived at each exit link during the last step.
    pub exit_volume: Vec<f64>,
    /// Running total of `exit_volume` per exit link.
    pub cumulative_exit: Vec<f64>,
}

impl QueueState {
    pub fn new(topo: &Topology, queues: Vec<f64>) -> Result<Self> {
        if queues.len() != topo.num_movements() {
            return Err(Error::dim("queue state", topo.num_movements(), queues.len()));
        }
        if let Some(q) = queues.iter().find(|q| !(**q >= 0.0) || !q.is_finite()) {
            return Err(Error::InvalidInput(format!("queue length {q} is not a nonnegative number")));
        }
        let exits = topo.exit_links().len();
        Ok(Self { queues, exit_volume: vec![0.0; exits], cumulative_exit: vec![0.0; exits] })
    }

    pub fn zeros(topo: &Topology) -> Self {
        Self::filled(topo, 0.0)
    }

    pub fn filled(topo: &Topology, value: f64) -> Self {
        let exits = topo.exit_links().len();
        Self {
            queues: vec![value; topo.num_movements()],
            exit_volume: vec![0.0; exits],
            cumulative_exit: vec![0.0; exits],
        }
    }

    pub fn total(&self) -> f64 {
        self.queues.iter().sum()
    }

    fn check(&self, topo: &Topology) -> Result<()> {
        if self.queues.len() != topo.num_movements() {
            return Err(Error::dim("queue state", topo.num_movements(), self.queues.len()));
        }
        if self.exit_volume.len() != topo.exit_links().len() || self.cumulative_exit.len() != topo.exit_links().len() {
            return Err(Error::dim("exit volumes", topo.exit_links().len(), self.exit_volume.len()));
        }
        Ok(())
    }
}

/// Exogenous demand per entry link (entry-link order).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DemandVector(pub Vec<f64>);

impl DemandVector {
    pub fn new(topo: &Topology, rates: Vec<f64>) -> Result<Self> {
        if rates.len() != topo.entry_links().len() {
            return Err(Error::dim("demand", topo.entry_links().len(), rates.len()));
        }
        if let Some(r) = rates.iter().find(|r| !(**r >= 0.0) || !r.is_finite()) {
            return Err(Error::InvalidInput(format!("demand {r} is not a nonnegative number")));
        }
        Ok(Self(rates))
    }

    pub fn constant(topo: &Topology, rate: f64) -> Self {
        Self(vec![rate; topo.entry_links().len()])
    }

    pub fn zeros(topo: &Topology) -> Self {
        Self::constant(topo, 0.0)
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self(self.0.iter().map(|v| v * factor).collect())
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

/// Rates used by one evaluation of the (possibly augmented) dynamics.
#[derive(Clone, Copy)]
pub(crate) struct Rates<'a> {
    /// Saturation rate inside `min{C S, x}` (what leaves upstream queues).
    pub inflow: &'a [f64],
    /// Saturation rate inside `max{x - C S, 0}` (what a queue keeps).
    pub outflow: &'a [f64],
    pub turn: &'a [f64],
    pub demand: &'a [f64],
}

/// One step of
/// `x⁺_ij = max{x_ij − C̃_ij S_ij, 0} + R_ij · (Σ_k min{C_ki S_ki, x_ki} or λ_i)`,
/// writing next queues and per-exit arrivals. `served` is scratch of length
/// `num_links`.
pub(crate) fn propagate(
    topo: &Topology,
    queues: &[f64],
    signal: &[f64],
    rates: Rates<'_>,
    served: &mut [f64],
    next: &mut [f64],
    exit_volume: &mut [f64],
) {
    served.iter_mut().for_each(|v| *v = 0.0);
    for (m, &x) in queues.iter().enumerate() {
        served[topo.downstream_link_index(m)] += (rates.inflow[m] * signal[m]).min(x);
    }
    for (m, &x) in queues.iter().enumerate() {
        let kept = (x - rates.outflow[m] * signal[m]).max(0.0);
        let from = topo.upstream_link_index(m);
        let arriving = match topo.entry_position(from) {
            Some(e) => rates.demand[e],
            None => served[from],
        };
        next[m] = kept + rates.turn[m] * arriving;
    }
    for (l, link) in topo.links().iter().enumerate() {
        if let Some(e) = topo.exit_position(l) {
            debug_assert_eq!(link.class, crate::network::LinkClass::Exit);
            exit_volume[e] = served[l];
        }
    }
}

fn advance(topo: &Topology, x: &QueueState, u: &ControlVector, rates: Rates<'_>) -> Result<QueueState> {
    x.check(topo)?;
    u.check_dims(topo)?;
    let mut signal = vec![0.0; topo.num_movements()];
    signal_into(topo, u, &mut signal);
    let mut served = vec![0.0; topo.links().len()];
    let mut next = QueueState {
        queues: vec![0.0; topo.num_movements()],
        exit_volume: vec![0.0; topo.exit_links().len()],
        cumulative_exit: x.cumulative_exit.clone(),
    };
    propagate(topo, &x.queues, &signal, rates, &mut served, &mut next.queues, &mut next.exit_volume);
    for (c, v) in next.cumulative_exit.iter_mut().zip(&next.exit_volume) {
        *c += v;
    }
    Ok(next)
}

/// The plant dynamics `x(t+1) = f(x(t), u(t), λ; C, R)`.
pub fn step(net: &Network, x: &QueueState, u: &ControlVector, demand: &DemandVector) -> Result<QueueState> {
    if demand.0.len() != net.entry_links().len() {
        return Err(Error::dim("demand", net.entry_links().len(), demand.0.len()));
    }
    advance(
        net.topology(),
        x,
        u,
        Rates { inflow: net.saturation(), outflow: net.saturation(), turn: net.turn_ratio(), demand: &demand.0 },
    )
}

/// Upper bounding dynamics `F(x̄, u, λ̄; C̄, C̲, R̄)`: queues keep as much as
/// possible (`C̲` in the outflow term) and receive as much as possible (`C̄`,
/// `R̄`, `λ̄`).
pub fn augmented_step_upper(
    topo: &Topology,
    bounds: &ParameterBounds,
    x: &QueueState,
    u: &ControlVector,
) -> Result<QueueState> {
    bounds.check_dims(topo)?;
    advance(
        topo,
        x,
        u,
        Rates {
            inflow: &bounds.saturation_upper,
            outflow: &bounds.saturation_lower,
            turn: &bounds.turn_upper,
            demand: &bounds.demand_upper,
        },
    )
}

/// Lower bounding dynamics `F(x̲, u, λ̲; C̲, C̄, R̲)`.
pub fn augmented_step_lower(
    topo: &Topology,
    bounds: &ParameterBounds,
    x: &QueueState,
    u: &ControlVector,
) -> Result<QueueState> {
    bounds.check_dims(topo)?;
    advance(
        topo,
        x,
        u,
        Rates {
            inflow: &bounds.saturation_lower,
            outflow: &bounds.saturation_upper,
            turn: &bounds.turn_lower,
            demand: &bounds.demand_lower,
        },
    )
}

/// Allocation-free stepping for inner loops that simulate many steps.
pub(crate) struct Stepper<'a> {
    topo: &'a Topology,
    signal: Vec<f64>,
    served: Vec<f64>,
    exit: Vec<f64>,
}

impl<'a> Stepper<'a> {
    pub fn new(topo: &'a Topology) -> Self {
        Self {
            topo,
            signal: vec![0.0; topo.num_movements()],
            served: vec![0.0; topo.links().len()],
            exit: vec![0.0; topo.exit_links().len()],
        }
    }

    /// Advances `queues` in place.
    pub fn advance(&mut self, queues: &mut Vec<f64>, u: &ControlVector, rates: Rates<'_>) {
        signal_into(self.topo, u, &mut self.signal);
        let mut next = vec![0.0; queues.len()];
        propagate(self.topo, queues, &self.signal, rates, &mut self.served, &mut next, &mut self.exit);
        *queues = next;
    }
}

pub(crate) fn upper_rates(bounds: &ParameterBounds) -> Rates<'_> {
    Rates {
        inflow: &bounds.saturation_upper,
        outflow: &bounds.saturation_lower,
        turn: &bounds.turn_upper,
        demand: &bounds.demand_upper,
    }
}

pub(crate) fn lower_rates(bounds: &ParameterBounds) -> Rates<'_> {
    Rates {
        inflow: &bounds.saturation_lower,
        outflow: &bounds.saturation_upper,
        turn: &bounds.turn_lower,
        demand: &bounds.demand_lower,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::generators::{make_corridor, make_paper_grid, CorridorParams, CorridorPhases};
    use crate::network::{Link, LinkClass, Parameters};

    /// entry 1 -> node 1 -> exit 2, one phase.
    fn single_movement(c: f64) -> Network {
        let topo = Topology::new(
            vec![1],
            vec![
                Link { id: 1, class: LinkClass::Entry, start: None, end: Some(1) },
                Link { id: 2, class: LinkClass::Exit, start: Some(1), end: None },
            ],
            &[(1, 2)],
            &[(1, vec![(1, 2)])],
        )
        .unwrap();
        Network::new(topo, Parameters { saturation: vec![c], turn_ratio: vec![1.0] }).unwrap()
    }

    #[test]
    fn zero_is_a_fixed_point_without_demand() {
        let net = make_paper_grid();
        let x = QueueState::zeros(&net);
        for u in [ControlVector::uniform(&net), ControlVector::vertex(&net, &[2, 1, 0, 3]).unwrap()] {
            let next = step(&net, &x, &u, &DemandVector::zeros(&net)).unwrap();
            assert!(next.queues.iter().all(|&q| q == 0.0));
            assert!(next.exit_volume.iter().all(|&q| q == 0.0));
        }
    }

    #[test]
    fn entry_movement_by_hand() {
        let net = single_movement(2.0);
        let x = QueueState::new(&net, vec![5.0]).unwrap();
        let u = ControlVector::vertex(&net, &[0]).unwrap();
        let next = step(&net, &x, &u, &DemandVector(vec![0.5])).unwrap();
        assert_eq!(next.queues, vec![3.5]);
        assert_eq!(next.exit_volume, vec![2.0]);
        assert_eq!(next.cumulative_exit, vec![2.0]);
    }

    #[test]
    fn augmented_steps_by_hand() {
        let net = single_movement(2.0);
        let mut bounds = ParameterBounds::collapsed(&net, &[1.0]);
        bounds.saturation_lower = vec![1.9];
        bounds.saturation_upper = vec![2.1];
        bounds.demand_upper = vec![1.03];
        bounds.demand_lower = vec![0.83];
        let x = QueueState::new(&net, vec![5.0]).unwrap();
        let u = ControlVector::vertex(&net, &[0]).unwrap();
        let up = augmented_step_upper(&net, &bounds, &x, &u).unwrap();
        assert!((up.queues[0] - 4.13).abs() < 1e-12);
        let lo = augmented_step_lower(&net, &bounds, &x, &u).unwrap();
        assert!((lo.queues[0] - 3.73).abs() < 1e-12);
    }

    #[test]
    fn collapsed_bounds_reduce_to_plant() {
        let net = make_paper_grid();
        let demand = DemandVector::constant(&net, 0.93);
        let bounds = ParameterBounds::collapsed(&net, &demand.0);
        let x = QueueState::filled(&net, 1.7);
        let u = ControlVector::uniform(&net);
        let f = step(&net, &x, &u, &demand).unwrap();
        assert_eq!(augmented_step_upper(&net, &bounds, &x, &u).unwrap(), f);
        assert_eq!(augmented_step_lower(&net, &bounds, &x, &u).unwrap(), f);
    }

    #[test]
    fn dimension_mismatch_is_structural() {
        let net = make_paper_grid();
        let bad = QueueState { queues: vec![0.0; 3], exit_volume: vec![], cumulative_exit: vec![] };
        let err = step(&net, &bad, &ControlVector::uniform(&net), &DemandVector::zeros(&net));
        assert!(matches!(err, Err(Error::Dimension { .. })));
        let err = step(&net, &QueueState::zeros(&net), &ControlVector::uniform(&net), &DemandVector(vec![1.0]));
        assert!(matches!(err, Err(Error::Dimension { .. })));
    }

    #[test]
    fn conservation_through_internal_link() {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let net = make_corridor(&CorridorParams::random(&mut rng, 2, CorridorPhases::ThreePhase)).unwrap();
        let x = QueueState::filled(&net, 3.0);
        let u = ControlVector::uniform(&net);
        let s = build_signal_for(&net, &u);
        let next = step(&net, &x, &u, &DemandVector::zeros(&net)).unwrap();
        let link = 1001;
        let into: f64 = net.movements_into(link).iter().map(|&m| (net.saturation()[m] * s[m]).min(x.queues[m])).sum();
        let added: f64 = net
            .movements_out_of(link)
            .iter()
            .map(|&m| next.queues[m] - (x.queues[m] - net.saturation()[m] * s[m]).max(0.0))
            .sum();
        assert!((into - added).abs() < 1e-12);
    }

    fn build_signal_for(net: &Network, u: &ControlVector) -> Vec<f64> {
        crate::network::build_signal(net, u).unwrap()
    }
}
