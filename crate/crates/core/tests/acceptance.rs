//! Acceptance suite: one PASS/FAIL line per criterion, run with
//! `cargo test --test acceptance`. Tolerances are pinned below.

#![allow(clippy::needless_range_loop)]

use std::process::ExitCode;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use signal_mpc::analysis::{
    boundedness_probe, compare_policies, default_k_cap, fit_drift_certificate, lyapunov_bounds_check, sample_states,
    ProbeSettings, Verdict,
};
use signal_mpc::controllers::{
    lyapunov_objective, one_step_objective, ControllerId, EpsilonConstant, MaxPressureController, OneStepConfig,
    OneStepController, OneStepMpc,
};
use signal_mpc::identification::{run_identification, IdentificationConfig, ParameterBounds, SimulatedPlant};
use signal_mpc::network::build_signal;
use signal_mpc::network::generators::{make_corridor, make_paper_grid, CorridorParams, CorridorPhases};
use signal_mpc::scenario::Preset;
use signal_mpc::{
    augmented_step_lower, augmented_step_upper, check_demand_feasible, solve_flow, step, ControlVector, DemandVector,
    Network, QueueState,
};

const RECOVERY_TOL: f64 = 1e-9;
const RECOVERY_MAX_STEPS: usize = 500;
const RECOVERY_MAX_SECONDS: f64 = 60.0;
const PROBE_HORIZON: usize = 10_000;
const TRANSIENT_HORIZON: usize = 300;
const TRANSIENT_SEEDS: [u64; 3] = [0, 1, 2];
const ARGMIN_INSTANCES: usize = 50;
const OFFSET_TOL: f64 = 1e-9;
const SANDWICH_SAMPLES: usize = 1000;
const SANDWICH_TOL: f64 = 1e-9;
const DRIFT_SAMPLES: usize = 2000;
const BOUNDING_SEEDS: u64 = 100;
const BOUNDING_STEPS: usize = 200;
const BOUNDING_TOL: f64 = 1e-12;
const ORACLE_INSTANCES: usize = 50;
const ORACLE_REL_TOL: f64 = 1e-6;
const FLOW_TOL: f64 = 1e-10;
const FEASIBILITY_DEMANDS: usize = 50;
const GRID_STEP_DIVISIONS: usize = 100;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

/// All points of the simplex in `p` dimensions with coordinates in multiples of `1/k`.
fn simplex_grid(p: usize, k: usize) -> Vec<Vec<f64>> {
    fn rec(p: usize, left: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<f64>>) {
        if cur.len() + 1 == p {
            cur.push(left);
            out.push(cur.iter().map(|&c| c as f64 / k as f64).collect());
            cur.pop();
            return;
        }
        for c in 0..=left {
            cur.push(c);
            rec(p, left - c, k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(p, k, k, &mut Vec::new(), &mut out);
    out
}

/// Every control on the joint 0.01 grid, in lexicographic node order.
fn joint_grid(net: &Network) -> Vec<ControlVector> {
    let per_node: Vec<Vec<Vec<f64>>> =
        (0..net.num_nodes()).map(|n| simplex_grid(net.num_phases(n), GRID_STEP_DIVISIONS)).collect();
    let mut out = vec![Vec::<Vec<f64>>::new()];
    for grid in &per_node {
        out = out
            .into_iter()
            .flat_map(|prefix| {
                grid.iter().map(move |w| {
                    let mut next = prefix.clone();
                    next.push(w.clone());
                    next
                })
            })
            .collect();
    }
    out.into_iter().map(|w| ControlVector::new(net, w).expect("grid points are admissible")).collect()
}

fn random_control(net: &Network, rng: &mut ChaCha8Rng) -> ControlVector {
    let w = (0..net.num_nodes())
        .map(|n| {
            let raw: Vec<f64> = (0..net.num_phases(n)).map(|_| rng.gen_range(0.0..1.0)).collect();
            let s: f64 = raw.iter().sum();
            raw.into_iter().map(|v| v / s).collect()
        })
        .collect();
    ControlVector::new(net, w).expect("normalized weights are admissible")
}

fn random_state(net: &Network, rng: &mut ChaCha8Rng, hi: f64) -> QueueState {
    QueueState::new(net, (0..net.num_movements()).map(|_| rng.gen_range(0.0..hi)).collect()).unwrap()
}

/// Small instances: single three-phase intersections and two-node corridors
/// with one phase per destination.
fn small_instance(i: usize, rng: &mut ChaCha8Rng) -> Network {
    let params = if i.is_multiple_of(2) {
        CorridorParams::random(rng, 1, CorridorPhases::ThreePhase)
    } else {
        CorridorParams::random(rng, 2, CorridorPhases::ByDestination)
    };
    make_corridor(&params).unwrap()
}

fn criterion_1() -> Outcome {
    let net = make_paper_grid();
    let demand = DemandVector::constant(&net, 0.93);
    let prior = ParameterBounds::from_truth_margin(&net, demand.as_slice(), 0.1);
    let mut plant = SimulatedPlant::new(net.clone(), demand, QueueState::filled(&net, 1.0));
    let start = Instant::now();
    let run = run_identification(&mut plant, &prior, &IdentificationConfig::default());
    let secs = start.elapsed().as_secs_f64();
    let run = match run {
        Ok(r) => r,
        Err(e) => return outcome(false, format!("identification failed: {e}")),
    };
    let b = &run.bounds;
    let mut c_err: f64 = 0.0;
    let mut r_err: f64 = 0.0;
    for m in 0..net.num_movements() {
        for v in [b.saturation_lower[m], b.saturation_upper[m]] {
            c_err = c_err.max((v - net.saturation()[m]).abs());
        }
        if net.movement_entry(m).is_none() {
            for v in [b.turn_lower[m], b.turn_upper[m]] {
                r_err = r_err.max((v - net.turn_ratio()[m]).abs());
            }
        }
    }
    let steps = run.telemetry.total_steps;
    let pass = run.completed()
        && c_err <= RECOVERY_TOL
        && r_err <= RECOVERY_TOL
        && steps <= RECOVERY_MAX_STEPS
        && secs <= RECOVERY_MAX_SECONDS;
    outcome(
        pass,
        format!(
            "max |C err| {c_err:.2e}, max |R err| {r_err:.2e} (tol {RECOVERY_TOL:e}); {steps} steps (max {RECOVERY_MAX_STEPS}); {secs:.2}s (max {RECOVERY_MAX_SECONDS}s)"
        ),
    )
}

fn probe(lambda: f64) -> signal_mpc::Result<signal_mpc::analysis::ProbeReport> {
    let net = make_paper_grid();
    let demand = DemandVector::constant(&net, lambda);
    let mut c = OneStepController(OneStepMpc::new(OneStepConfig::default())?);
    boundedness_probe(&net, &demand, &mut c, PROBE_HORIZON, &QueueState::filled(&net, 1.0), &ProbeSettings::default())
}

fn criterion_2() -> Outcome {
    let net = make_paper_grid();
    let (low, high) = std::thread::scope(|s| {
        let a = s.spawn(|| probe(0.93));
        let b = s.spawn(|| probe(2.0));
        (a.join().unwrap(), b.join().unwrap())
    });
    let cert = check_demand_feasible(&net, &DemandVector::constant(&net, 2.0));
    let (low, high, cert) = match (low, high, cert) {
        (Ok(l), Ok(h), Ok(c)) => (l, h, c),
        (Err(e), _, _) | (_, Err(e), _) | (_, _, Err(e)) => return outcome(false, format!("error: {e}")),
    };
    let pass = low.verdict == Verdict::Bounded && high.verdict == Verdict::Growing && !cert.feasible;
    outcome(
        pass,
        format!(
            "λ=0.93: {} (middle peak {:.9}, last peak {:.9}, rel excess {:.2e}, slope {:.2e}); λ=2.0: {} (slope {:.2e}), feasible={}",
            low.verdict,
            low.middle_peak,
            low.last_peak,
            low.last_peak / low.middle_peak - 1.0,
            low.slope,
            high.verdict,
            high.slope,
            cert.feasible
        ),
    )
}

fn criterion_3() -> Outcome {
    let net = make_paper_grid();
    let demand = DemandVector::constant(&net, 0.93);
    let x0 = QueueState::filled(&net, 1.0);
    let ids = [ControllerId::OneStepMpc, ControllerId::MaxPressure, ControllerId::PropFair];
    let mut pass = true;
    let mut parts = Vec::new();
    for seed in TRANSIENT_SEEDS {
        let config = OneStepConfig { seed, ..OneStepConfig::default() };
        let cmp = match compare_policies(&net, &demand, &x0, &ids, &config, TRANSIENT_HORIZON) {
            Ok(c) => c,
            Err(e) => return outcome(false, format!("seed {seed}: {e}")),
        };
        let avg = |id| cmp.row(id).expect("controller was run").time_average;
        let (mpc, mp, pf) =
            (avg(ControllerId::OneStepMpc), avg(ControllerId::MaxPressure), avg(ControllerId::PropFair));
        pass &= mpc < mp && mpc < pf;
        parts.push(format!("seed {seed}: mpc {mpc:.4} / mp {mp:.4} / pf {pf:.4}"));
    }
    outcome(pass, parts.join("; "))
}

/// The Lyapunov form evaluated from its definition: the offset terms plus
/// the entry service terms plus the squared next internal queues taken from
/// the dynamics.
fn lyapunov_reference(net: &Network, x: &QueueState, u: &ControlVector, demand: &DemandVector, eps: f64) -> f64 {
    let s = build_signal(net, u).unwrap();
    let next = step(net, x, u, demand).unwrap();
    let lambda = demand.as_slice();
    let mut v = eps * x.queues.iter().sum::<f64>() + lambda.iter().map(|l| l * l).sum::<f64>();
    for m in 0..net.num_movements() {
        let (q, c, r) = (x.queues[m], net.saturation()[m], net.turn_ratio()[m]);
        match net.movement_entry(m) {
            Some(e) => v += q * q + 2.0 * r * lambda[e] * q + c * c * s[m] * s[m] - 2.0 * c * s[m] * q,
            None => v += next.queues[m] * next.queues[m],
        }
    }
    v
}

fn criterion_4() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let eps = EpsilonConstant::default();
    let mut worst_spread: f64 = 0.0;
    let mut worst_library: f64 = 0.0;
    let mut mismatched = 0;
    for i in 0..ARGMIN_INSTANCES {
        let net = small_instance(i, &mut rng);
        let x = random_state(&net, &mut rng, 4.0);
        let demand =
            DemandVector::new(&net, (0..net.entry_links().len()).map(|_| rng.gen_range(0.0..1.0)).collect()).unwrap();
        let mut best7 = (f64::INFINITY, 0);
        let mut best8 = (f64::INFINITY, 0);
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for (k, u) in joint_grid(&net).iter().enumerate() {
            let j7 = one_step_objective(&net, &x, u).unwrap();
            let j8 = lyapunov_reference(&net, &x, u, &demand, eps.value());
            let lib = lyapunov_objective(&net, &x, u, &demand, eps).unwrap();
            worst_library = worst_library.max((lib - j8).abs() / j8.abs().max(1.0));
            if j7 < best7.0 {
                best7 = (j7, k);
            }
            if j8 < best8.0 {
                best8 = (j8, k);
            }
            lo = lo.min(j8 - j7);
            hi = hi.max(j8 - j7);
        }
        worst_spread = worst_spread.max(hi - lo);
        if best7.1 != best8.1 {
            mismatched += 1;
        }
    }
    let pass = mismatched == 0 && worst_spread <= OFFSET_TOL && worst_library <= OFFSET_TOL;
    outcome(
        pass,
        format!(
            "{ARGMIN_INSTANCES} instances, {mismatched} argmin mismatches; max spread of gap over u {worst_spread:.2e} (tol {OFFSET_TOL:e}); library vs reference {worst_library:.2e}"
        ),
    )
}

fn criterion_5() -> Outcome {
    let net = make_paper_grid();
    let demand = DemandVector::constant(&net, 0.93);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let samples: Vec<_> =
        (0..SANDWICH_SAMPLES).map(|_| (random_state(&net, &mut rng, 10.0), random_control(&net, &mut rng))).collect();
    match lyapunov_bounds_check(&net, &demand, EpsilonConstant::default(), None, &samples) {
        Ok(r) => outcome(
            r.max_violation() <= SANDWICH_TOL,
            format!(
                "{} samples, lower violation {:.3e}, upper violation {:.3e} (tol {SANDWICH_TOL:e})",
                r.samples, r.lower_violation, r.upper_violation
            ),
        ),
        Err(e) => outcome(false, format!("error: {e}")),
    }
}

fn criterion_6() -> Outcome {
    let net = make_paper_grid();
    let demand = DemandVector::constant(&net, 0.93);
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let x0 = QueueState::filled(&net, 1.0);
    let result = (|| -> signal_mpc::Result<_> {
        let samples = sample_states(&net, &demand, &mut MaxPressureController, &x0, DRIFT_SAMPLES, &mut rng)?;
        let cert =
            fit_drift_certificate(&net, &demand, &mut MaxPressureController, &samples, default_k_cap(&net, &demand))?;
        let violations = cert.violations(&net, &demand, &mut MaxPressureController, &samples)?;
        Ok((cert, violations))
    })();
    match result {
        Ok((cert, violations)) => outcome(
            cert.valid && cert.epsilon > 0.0 && cert.k.is_finite() && violations == 0,
            format!(
                "ε = {:.4e}, k = {:.4}, {} samples, {violations} training violations",
                cert.epsilon, cert.k, cert.samples
            ),
        ),
        Err(e) => outcome(false, format!("error: {e}")),
    }
}

fn criterion_7() -> Outcome {
    let net = make_paper_grid();
    let mut violations = 0usize;
    let mut worst: f64 = 0.0;
    for seed in 0..BOUNDING_SEEDS {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let widen = |v: f64, rng: &mut ChaCha8Rng| (v - rng.gen_range(0.0..0.1) * v, v + rng.gen_range(0.0..0.2));
        let lambda: Vec<f64> = (0..net.entry_links().len()).map(|_| rng.gen_range(0.3..1.0)).collect();
        let mut b = ParameterBounds::collapsed(&net, &lambda);
        for m in 0..net.num_movements() {
            (b.saturation_lower[m], b.saturation_upper[m]) = widen(net.saturation()[m], &mut rng);
            (b.turn_lower[m], b.turn_upper[m]) = widen(net.turn_ratio()[m], &mut rng);
        }
        for e in 0..lambda.len() {
            (b.demand_lower[e], b.demand_upper[e]) = widen(lambda[e], &mut rng);
        }
        let demand = DemandVector::new(&net, lambda).unwrap();
        let mut x = random_state(&net, &mut rng, 3.0);
        let (mut lo, mut hi) = (x.clone(), x.clone());
        for _ in 0..BOUNDING_STEPS {
            let u = random_control(&net, &mut rng);
            x = step(&net, &x, &u, &demand).unwrap();
            lo = augmented_step_lower(&net, &b, &lo, &u).unwrap();
            hi = augmented_step_upper(&net, &b, &hi, &u).unwrap();
            for m in 0..net.num_movements() {
                let gap = (lo.queues[m] - x.queues[m]).max(x.queues[m] - hi.queues[m]);
                if gap > BOUNDING_TOL {
                    violations += 1;
                }
                worst = worst.max(gap);
            }
        }
    }
    outcome(
        violations == 0,
        format!(
            "{BOUNDING_SEEDS} seeds × {BOUNDING_STEPS} steps, {violations} violations, worst gap {worst:.2e} (tol {BOUNDING_TOL:e})"
        ),
    )
}

fn criterion_8() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut worst: f64 = 0.0;
    let mut below = 0;
    let mut failures = 0;
    for i in 0..ORACLE_INSTANCES {
        let net = small_instance(i, &mut rng);
        let x = random_state(&net, &mut rng, 4.0);
        let oracle =
            joint_grid(&net).iter().map(|u| one_step_objective(&net, &x, u).unwrap()).fold(f64::INFINITY, f64::min);
        let sol = match OneStepMpc::new(OneStepConfig { seed: i as u64, ..OneStepConfig::default() })
            .and_then(|mut s| s.solve(&net, &x))
        {
            Ok(s) => s,
            Err(e) => return outcome(false, format!("instance {i}: {e}")),
        };
        let rel = (sol.objective - oracle) / oracle.abs().max(1.0);
        if rel < -ORACLE_REL_TOL {
            below += 1;
        }
        if rel > ORACLE_REL_TOL {
            failures += 1;
        }
        worst = worst.max(rel);
    }
    outcome(
        failures == 0,
        format!(
            "{ORACLE_INSTANCES} instances, worst (solver − oracle)/max(|oracle|,1) = {worst:.2e} (tol {ORACLE_REL_TOL:e}); {below} solver optima strictly below the grid"
        ),
    )
}

/// Grid-search feasibility margin: per node, the best 0.01-grid split of
/// `min (C S − q R)` over its movements; the network margin is the worst node.
fn grid_margin(net: &Network, demand: &DemandVector) -> f64 {
    let flow = solve_flow(net, demand).unwrap();
    let required: Vec<f64> =
        net.movements().iter().map(|mv| flow.get(mv.from).unwrap() * net.turn_ratio()[mv.index]).collect();
    let mut margin = f64::INFINITY;
    for n in 0..net.num_nodes() {
        let node = net.nodes()[n];
        let moves: Vec<usize> = net
            .movements()
            .iter()
            .filter(|mv| net.topology().link(mv.from).and_then(|l| l.end) == Some(node))
            .map(|mv| mv.index)
            .collect();
        let mut weights: Vec<Vec<f64>> = (0..net.num_nodes()).map(|k| vec![0.0; net.num_phases(k)]).collect();
        let mut best = f64::NEG_INFINITY;
        for w in simplex_grid(net.num_phases(n), GRID_STEP_DIVISIONS) {
            weights[n] = w;
            for (k, wk) in weights.iter_mut().enumerate() {
                if k != n {
                    wk[0] = 1.0;
                }
            }
            let s = build_signal(net, &ControlVector::new(net, weights.clone()).unwrap()).unwrap();
            let slack = moves.iter().map(|&m| net.saturation()[m] * s[m] - required[m]).fold(f64::INFINITY, f64::min);
            best = best.max(slack);
        }
        margin = margin.min(best);
    }
    margin
}

fn criterion_9() -> Outcome {
    let mut worst_residual: f64 = 0.0;
    for p in Preset::ALL {
        let r = p.config().resolve().unwrap();
        for (_, d) in &r.demand {
            match solve_flow(&r.net, d) {
                Ok(f) => worst_residual = worst_residual.max(f.residual),
                Err(e) => return outcome(false, format!("preset {p}: {e}")),
            }
        }
    }
    let net = make_paper_grid();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut disagreements = 0;
    let mut feasible = 0;
    for _ in 0..FEASIBILITY_DEMANDS {
        let scale = rng.gen_range(0.3..1.6);
        let rates: Vec<f64> = (0..net.entry_links().len()).map(|_| scale * rng.gen_range(0.7..1.0)).collect();
        let demand = DemandVector::new(&net, rates).unwrap();
        let cert = match check_demand_feasible(&net, &demand) {
            Ok(c) => c,
            Err(e) => return outcome(false, format!("feasibility: {e}")),
        };
        let oracle = grid_margin(&net, &demand) > 0.0;
        if cert.feasible != oracle {
            disagreements += 1;
        }
        feasible += usize::from(cert.feasible);
    }
    outcome(
        worst_residual <= FLOW_TOL && disagreements == 0,
        format!(
            "worst preset residual {worst_residual:.2e} (tol {FLOW_TOL:e}); {FEASIBILITY_DEMANDS} demands ({feasible} feasible), {disagreements} sign disagreements with the grid oracle"
        ),
    )
}

fn main() -> ExitCode {
    let criteria: [fn() -> Outcome; 9] = [
        criterion_1,
        criterion_2,
        criterion_3,
        criterion_4,
        criterion_5,
        criterion_6,
        criterion_7,
        criterion_8,
        criterion_9,
    ];
    let results: Vec<Outcome> = std::thread::scope(|s| {
        let handles: Vec<_> = criteria.iter().map(|c| s.spawn(c)).collect();
        handles.into_iter().map(|h| h.join().unwrap_or_else(|_| outcome(false, "panicked".into()))).collect()
    });
    for (i, r) in results.iter().enumerate() {
        let status = if r.pass { "PASS" } else { "FAIL" };
        println!("criterion {}: {status}: {}", i + 1, r.detail);
    }
    let passed = results.iter().filter(|r| r.pass).count();
    println!("acceptance: {passed}/9 criteria pass");
    if passed < results.len() {
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}
