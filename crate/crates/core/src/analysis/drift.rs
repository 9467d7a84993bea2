//! Empirical certificates for `‖f(x, κ(x), λ)‖₂² − ‖x‖₂² ≤ −ε‖x‖₁ + k`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::analysis::metrics::{l1, l2_squared};
use crate::analysis::simulate;
use crate::controllers::Controller;
use crate::dynamics::{step, DemandVector, QueueState};
use crate::error::{Error, Result};
use crate::lp::{Constraint, LinearProgram, LpOutcome};
use crate::network::Network;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriftCertificate {
    pub epsilon: f64,
    pub k: f64,
    pub samples: usize,
    /// `max_i (Δ_i + ε‖x_i‖₁ − k)`; nonpositive for a valid certificate.
    pub max_violation: f64,
    pub valid: bool,
    /// Indices of the samples that bind hardest, worst first.
    pub worst: Vec<usize>,
}

/// Largest `k` the search may use: `4 n_x (C_max + λ_max)²`.
pub fn default_k_cap(net: &Network, demand: &DemandVector) -> f64 {
    let c = net.saturation().iter().fold(0.0_f64, |m, &v| m.max(v));
    let l = demand.as_slice().iter().fold(0.0_f64, |m, &v| m.max(v));
    4.0 * net.num_movements() as f64 * (c + l) * (c + l)
}

/// `(‖x‖₁, ‖f‖₂² − ‖x‖₂²)` for every sample under `policy`.
fn drift_terms(
    net: &Network,
    demand: &DemandVector,
    policy: &mut dyn Controller,
    samples: &[QueueState],
) -> Result<Vec<(f64, f64)>> {
    samples
        .iter()
        .map(|x| {
            let u = policy.control(net, 0, x)?;
            let f = step(net, x, &u, demand)?;
            Ok((l1(&x.queues), l2_squared(&f.queues) - l2_squared(&x.queues)))
        })
        .collect()
}

fn worst_samples(terms: &[(f64, f64)], epsilon: f64, k: f64) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..terms.len()).collect();
    let slack = |i: usize| terms[i].1 + epsilon * terms[i].0 - k;
    idx.sort_by(|&a, &b| slack(b).total_cmp(&slack(a)).then(a.cmp(&b)));
    idx.truncate(5);
    idx
}

/// Fits `(ε, k)` on `samples`: the linear program maximizes `ε` subject to
/// `ε‖x_i‖₁ − k ≤ −Δ_i` and `0 ≤ k ≤ k_cap`, then `k` is lowered to the
/// smallest value that keeps every sample satisfied at that `ε`. The
/// certificate is valid when `ε > 0`.
pub fn fit_drift_certificate(
    net: &Network,
    demand: &DemandVector,
    policy: &mut dyn Controller,
    samples: &[QueueState],
    k_cap: f64,
) -> Result<DriftCertificate> {
    if samples.is_empty() {
        return Err(Error::InvalidInput("drift certificate needs at least one sample".into()));
    }
    if !(k_cap > 0.0 && k_cap.is_finite()) {
        return Err(Error::InvalidInput(format!("k cap must be positive and finite, got {k_cap}")));
    }
    let terms = drift_terms(net, demand, policy, samples)?;
    // Variables (ε, k), both free; ε is capped so that all-zero samples keep
    // the program bounded.
    let eps_cap = 1.0;
    let mut lp = LinearProgram::new(vec![1.0, 0.0]);
    lp.set_free(0);
    for &(a, d) in &terms {
        lp.push(Constraint::le(vec![a, -1.0], -d));
    }
    lp.push(Constraint::le(vec![0.0, 1.0], k_cap));
    lp.push(Constraint::le(vec![1.0, 0.0], eps_cap));
    let epsilon = match lp.solve()? {
        LpOutcome::Optimal { x, .. } => x[0],
        LpOutcome::Infeasible => f64::NEG_INFINITY,
        LpOutcome::Unbounded => return Err(Error::Numerical("drift program reported unbounded".into())),
    };
    if !(epsilon > 0.0) {
        let eps = if epsilon.is_finite() { epsilon } else { 0.0 };
        let max_violation = terms.iter().map(|&(a, d)| d + eps * a - k_cap).fold(f64::NEG_INFINITY, f64::max);
        return Ok(DriftCertificate {
            epsilon: eps,
            k: k_cap,
            samples: samples.len(),
            max_violation,
            valid: false,
            worst: worst_samples(&terms, eps, k_cap),
        });
    }
    let k = terms.iter().map(|&(a, d)| d + epsilon * a).fold(0.0_f64, f64::max);
    let max_violation = terms.iter().map(|&(a, d)| d + epsilon * a - k).fold(f64::NEG_INFINITY, f64::max);
    Ok(DriftCertificate {
        epsilon,
        k,
        samples: samples.len(),
        max_violation,
        valid: k <= k_cap && max_violation <= 0.0,
        worst: worst_samples(&terms, epsilon, k),
    })
}

impl DriftCertificate {
    /// Number of `samples` on which the certified inequality fails.
    pub fn violations(
        &self,
        net: &Network,
        demand: &DemandVector,
        policy: &mut dyn Controller,
        samples: &[QueueState],
    ) -> Result<usize> {
        let terms = drift_terms(net, demand, policy, samples)?;
        Ok(terms.iter().filter(|&&(a, d)| d > -self.epsilon * a + self.k).count())
    }
}

/// `count` states: the first half (rounded up) from a closed-loop trajectory
/// of `policy` from `x0`, the rest uniform in `[0, 2·max observed]` per queue.
pub fn sample_states<R: Rng + ?Sized>(
    net: &Network,
    demand: &DemandVector,
    policy: &mut dyn Controller,
    x0: &QueueState,
    count: usize,
    rng: &mut R,
) -> Result<Vec<QueueState>> {
    let from_trajectory = count.div_ceil(2);
    let log = simulate(net, demand, x0, policy, from_trajectory.saturating_sub(1), 0)?;
    let mut out: Vec<QueueState> = log
        .records
        .iter()
        .take(from_trajectory)
        .map(|r| QueueState { queues: r.queues.clone(), ..QueueState::zeros(net) })
        .collect();
    let top = out.iter().flat_map(|x| x.queues.iter().copied()).fold(0.0_f64, f64::max);
    let hi = if top > 0.0 { 2.0 * top } else { 1.0 };
    while out.len() < count {
        let queues = (0..net.num_movements()).map(|_| rng.gen_range(0.0..=hi)).collect();
        out.push(QueueState { queues, ..QueueState::zeros(net) });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::controllers::MaxPressureController;
    use crate::network::generators::make_paper_grid;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_samples_give_a_trivial_certificate() {
        let net = make_paper_grid();
        let demand = DemandVector::constant(&net, 0.93);
        let zeros = vec![QueueState::zeros(&net); 10];
        let cap = default_k_cap(&net, &demand);
        let cert = fit_drift_certificate(&net, &demand, &mut MaxPressureController, &zeros, cap).unwrap();
        assert!(cert.valid);
        assert!(cert.epsilon > 0.0);
        assert!(cert.max_violation <= 0.0);
        // ‖f(0)‖² is the squared arrivals R λ.
        let f = step(&net, &zeros[0], &crate::controllers::max_pressure(&net, &zeros[0]).unwrap(), &demand).unwrap();
        assert!((cert.k - l2_squared(&f.queues)).abs() < 1e-12);
    }

    #[test]
    fn feasible_demand_certifies_and_generalizes() {
        let net = make_paper_grid();
        let demand = DemandVector::constant(&net, 0.93);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x0 = QueueState::filled(&net, 1.0);
        let train = sample_states(&net, &demand, &mut MaxPressureController, &x0, 400, &mut rng).unwrap();
        let test = sample_states(&net, &demand, &mut MaxPressureController, &x0, 400, &mut rng).unwrap();
        let cap = default_k_cap(&net, &demand);
        let cert = fit_drift_certificate(&net, &demand, &mut MaxPressureController, &train, cap).unwrap();
        assert!(cert.valid, "{cert:?}");
        assert_eq!(cert.violations(&net, &demand, &mut MaxPressureController, &train).unwrap(), 0);
        let held_out = cert.violations(&net, &demand, &mut MaxPressureController, &test).unwrap();
        assert!(held_out * 20 <= test.len(), "{held_out} held-out violations");
    }

    #[test]
    fn overload_has_no_certificate() {
        let net = make_paper_grid();
        let demand = DemandVector::constant(&net, 2.0);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let x0 = QueueState::filled(&net, 1.0);
        let samples = sample_states(&net, &demand, &mut MaxPressureController, &x0, 2000, &mut rng).unwrap();
        let cap = default_k_cap(&net, &demand);
        let cert = fit_drift_certificate(&net, &demand, &mut MaxPressureController, &samples, cap).unwrap();
        assert!(!cert.valid);
        assert!(!cert.worst.is_empty());
    }
}
