//! Closed-form parameter estimates from one gated plant step.
//!
//! Each formula inverts the queue dynamics in the regime its terminal set
//! enforces, so it is exact (up to rounding) on noiseless data.

use crate::error::{Error, Result};
use crate::network::Topology;

fn other_feeders_sum(topo: &Topology, prev: &[f64], target: usize) -> f64 {
    let to = topo.movements()[target].to;
    topo.movements_into(to).iter().filter(|&&k| k != target).map(|&k| prev[k]).sum()
}

/// Total queue on the feeders of the target's upstream link, `Σ_k x_ki`.
pub fn upstream_mass(topo: &Topology, prev: &[f64], target: usize) -> f64 {
    let from = topo.movements()[target].from;
    topo.movements_into(from).iter().map(|&k| prev[k]).sum()
}

fn check_signal(signal: f64) -> Result<()> {
    if signal > 0.0 {
        Ok(())
    } else {
        Err(Error::Identification(format!("estimate needs a positive green fraction, got {signal}")))
    }
}

/// `R_ij = x_ij(t+1) / Σ_k x_ki(t)`, valid when the target and all feeders
/// of `i` were fully served at `t`. Returns `None` when the feeders were
/// empty, so nothing reached the target.
pub fn estimate_r_internal(topo: &Topology, prev: &[f64], next: &[f64], target: usize) -> Option<f64> {
    let mass = upstream_mass(topo, prev, target);
    (mass > 0.0).then(|| next[target] / mass)
}

/// `C_ij = [x_ij(t) − x_ij(t+1) + R_ij Σ_k x_ki(t)] / S_ij(u(t))`, valid when
/// the target stayed saturated and the feeders were fully served.
pub fn estimate_c_internal(
    topo: &Topology,
    prev: &[f64],
    next: &[f64],
    signal: &[f64],
    turn_ratio: f64,
    target: usize,
) -> Result<f64> {
    check_signal(signal[target])?;
    let inflow = upstream_mass(topo, prev, target);
    Ok((prev[target] - next[target] + turn_ratio * inflow) / signal[target])
}

/// `C_ij = [x_j(t+1) − Σ_{k≠i} x_kj(t)] / S_ij(u(t))` from the volume that
/// reached exit link `j`.
pub fn estimate_c_entry_exit(
    topo: &Topology,
    prev: &[f64],
    exit_volume: f64,
    signal: &[f64],
    target: usize,
) -> Result<f64> {
    check_signal(signal[target])?;
    Ok((exit_volume - other_feeders_sum(topo, prev, target)) / signal[target])
}

/// Saturation rate of entry movement `(i, j)` read off the downstream queue
/// `(j, l)` whose `C_jl` and `R_jl` are known:
/// `{[x_jl(t+1) − max{x_jl(t) − C_jl S_jl, 0}] / R_jl − Σ_{k≠i} x_kj(t)} / S_ij`.
#[allow(clippy::too_many_arguments)]
pub fn estimate_c_entry_internal(
    topo: &Topology,
    prev: &[f64],
    next: &[f64],
    signal: &[f64],
    witness_saturation: f64,
    witness_turn_ratio: f64,
    target: usize,
    witness: usize,
) -> Result<f64> {
    check_signal(signal[target])?;
    if !(witness_turn_ratio > 0.0) {
        return Err(Error::Identification("witness movement has no known positive turn ratio".into()));
    }
    let kept = (prev[witness] - witness_saturation * signal[witness]).max(0.0);
    let inflow = (next[witness] - kept) / witness_turn_ratio;
    Ok((inflow - other_feeders_sum(topo, prev, target)) / signal[target])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::generators::make_paper_grid;

    #[test]
    fn r_internal_by_hand() {
        let net = make_paper_grid();
        let t = net.movement_index(17, 4).unwrap();
        let mut prev = vec![0.0; 48];
        let feeders = net.movements_into(17);
        prev[feeders[0]] = 1.5;
        prev[feeders[1]] = 2.5;
        let mut next = vec![0.0; 48];
        next[t] = 1.32;
        assert!((estimate_r_internal(&net, &prev, &next, t).unwrap() - 0.33).abs() < 1e-15);
        assert_eq!(estimate_r_internal(&net, &vec![0.0; 48], &next, t), None);
    }

    #[test]
    fn c_internal_by_hand() {
        let net = make_paper_grid();
        let t = net.movement_index(17, 4).unwrap();
        let mut prev = vec![0.0; 48];
        let mut next = vec![0.0; 48];
        prev[t] = 5.0;
        next[t] = 3.5;
        let mut s = vec![0.0; 48];
        s[t] = 1.0;
        assert_eq!(estimate_c_internal(&net, &prev, &next, &s, 0.33, t).unwrap(), 1.5);
        s[t] = 0.0;
        assert!(estimate_c_internal(&net, &prev, &next, &s, 0.33, t).is_err());
    }

    #[test]
    fn c_entry_exit_by_hand() {
        let net = make_paper_grid();
        // Entry 1 arrives at node 1 from the north; exit 16 leaves on its west side.
        let t = net.movement_index(1, 16).unwrap();
        let mut prev = vec![0.0; 48];
        let others: Vec<usize> = net.movements_into(16).iter().copied().filter(|&k| k != t).collect();
        prev[others[0]] = 0.7;
        let mut s = vec![0.0; 48];
        s[t] = 1.0;
        assert!((estimate_c_entry_exit(&net, &prev, 2.3, &s, t).unwrap() - 1.6).abs() < 1e-15);
        let solo = estimate_c_entry_exit(&net, &vec![0.0; 48], 2.3, &s, t).unwrap();
        assert_eq!(solo, 2.3);
    }

    #[test]
    fn c_entry_internal_by_hand() {
        let net = make_paper_grid();
        let t = net.movement_index(1, 21).unwrap();
        let w = net.movements_out_of(21)[0];
        let prev = vec![0.0; 48];
        let mut next = vec![0.0; 48];
        next[w] = 0.561;
        let mut s = vec![0.0; 48];
        s[t] = 1.0;
        let c = estimate_c_entry_internal(&net, &prev, &next, &s, 1.5, 0.33, t, w).unwrap();
        assert!((c - 1.7).abs() < 1e-12);
    }

    #[test]
    fn c_entry_internal_with_emptied_witness() {
        let net = make_paper_grid();
        let t = net.movement_index(1, 21).unwrap();
        let w = net.movements_out_of(21)[0];
        let mut prev = vec![0.0; 48];
        prev[w] = 0.4;
        let mut s = vec![0.0; 48];
        s[t] = 0.5;
        s[w] = 1.0;
        // Witness served out: max{0.4 − 1.5, 0} = 0, so x⁺ = R · inflow.
        let mut next = vec![0.0; 48];
        next[w] = 0.33 * (1.7 * 0.5);
        let c = estimate_c_entry_internal(&net, &prev, &next, &s, 1.5, 0.33, t, w).unwrap();
        assert!((c - 1.7).abs() < 1e-12);
    }
}
