//! Packaged instances and simulation scenarios.
//!
//! Random instances use `ChaCha8Rng` seeded through `seed_from_u64`, so the
//! same seed reproduces the same data on every platform.

use std::f64::consts::PI;

use kinetic_ot_core::dynamics::{force_norm_integral, vlasov_integrate, ForceField, PolyForce, SplineEnsemble, Trajectory};
use kinetic_ot_core::measures::validate_measure;
use kinetic_ot_core::phase::d_sq;
use kinetic_ot_core::{Coupling, DiscreteMeasure, PhaseState};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{CliError, CliResult};
use crate::io::{parse_ensemble_json, parse_measure_json, parse_poly_json};

pub const NONUNIQUE_MU: &str = include_str!("../data/nonunique_mu.json");
pub const NONUNIQUE_NU: &str = include_str!("../data/nonunique_nu.json");
pub const RANDOM5_MU: &str = include_str!("../data/random5_mu.json");
pub const RANDOM5_NU: &str = include_str!("../data/random5_nu.json");
pub const CROSSING_ENSEMBLE: &str = include_str!("../data/crossing_ensemble.json");
pub const POLY_FORCE: &str = include_str!("../data/poly_force.json");

/// Grid step of the packaged simulations.
pub const SIM_DT: f64 = 1e-3;
/// Simulated window `[0, SIM_END]`.
pub const SIM_END: f64 = 2.5;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn packaged_measure(name: &str, text: &str) -> DiscreteMeasure {
    let raw = parse_measure_json(text).unwrap_or_else(|e| panic!("packaged {name}: {e}"));
    validate_measure(&raw).unwrap_or_else(|e| panic!("packaged {name}: {e}"))
}

/// Two-atom pair with two optimal plans of different horizons.
pub fn nonunique_pair() -> (DiscreteMeasure, DiscreteMeasure) {
    (packaged_measure("nonunique_mu", NONUNIQUE_MU), packaged_measure("nonunique_nu", NONUNIQUE_NU))
}

/// Fixed five-atom planar instance.
pub fn random5_pair() -> (DiscreteMeasure, DiscreteMeasure) {
    (packaged_measure("random5_mu", RANDOM5_MU), packaged_measure("random5_nu", RANDOM5_NU))
}

/// Two splines built to meet in phase space at `t = T/2`.
pub fn crossing_ensemble() -> SplineEnsemble {
    parse_ensemble_json(CROSSING_ENSEMBLE).expect("packaged crossing ensemble")
}

pub fn poly_force() -> PolyForce {
    parse_poly_json(POLY_FORCE).expect("packaged poly force")
}

pub fn random_state(rng: &mut impl Rng, n: usize) -> PhaseState {
    let x = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    let v = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    PhaseState::new(x, v).expect("finite sample")
}

/// Uniform measure on `m` states with coordinates uniform in `[-1, 1)`.
pub fn random_uniform(rng: &mut impl Rng, m: usize, n: usize) -> DiscreteMeasure {
    DiscreteMeasure::uniform((0..m).map(|_| random_state(rng, n)).collect()).expect("nonempty")
}

/// Uniform measure on `m` standard Gaussian phase states.
pub fn gaussian_uniform(rng: &mut impl Rng, m: usize, n: usize) -> DiscreteMeasure {
    let states = (0..m)
        .map(|_| {
            let x = (0..n).map(|_| rng.sample(StandardNormal)).collect();
            let v = (0..n).map(|_| rng.sample(StandardNormal)).collect();
            PhaseState::new(x, v).expect("finite sample")
        })
        .collect();
    DiscreteMeasure::uniform(states).expect("nonempty")
}

/// Seeded uniform pairs with `2 ≤ m ≤ 6` atoms in dimension `1 ≤ n ≤ 3`.
pub fn oracle_instances(seed: u64, count: usize) -> Vec<(DiscreteMeasure, DiscreteMeasure)> {
    let mut rng = rng(seed);
    (0..count)
        .map(|_| {
            let m = rng.random_range(2..=6);
            let n = rng.random_range(1..=3);
            let mu = random_uniform(&mut rng, m, n);
            let nu = random_uniform(&mut rng, m, n);
            (mu, nu)
        })
        .collect()
}

/// Seeded uniform pairs with `1 ≤ m ≤ 16` atoms in dimension `1 ≤ n ≤ 3`.
pub fn action_instances(seed: u64, count: usize) -> Vec<(DiscreteMeasure, DiscreteMeasure)> {
    let mut rng = rng(seed);
    (0..count)
        .map(|_| {
            let m = rng.random_range(1..=16);
            let n = rng.random_range(1..=3);
            let mu = random_uniform(&mut rng, m, n);
            let nu = random_uniform(&mut rng, m, n);
            (mu, nu)
        })
        .collect()
}

/// A simulated curve of measures shipped with the tool.
#[derive(Debug)]
pub struct SimScenario {
    pub name: &'static str,
    pub traj: Trajectory,
}

pub const SCENARIO_NAMES: [&str; 5] = ["harmonic-single", "harmonic-cloud", "damped-cloud", "free-cloud", "poly-cloud"];

/// Builds a packaged simulation scenario by name.
pub fn scenario(name: &str, seed: u64) -> CliResult<SimScenario> {
    let mut r = rng(seed);
    let (name, mu, force) = match name {
        "harmonic-single" => ("harmonic-single", DiscreteMeasure::dirac(PhaseState::scalar(1.0, 0.0)), ForceField::Harmonic),
        "harmonic-cloud" => ("harmonic-cloud", gaussian_uniform(&mut r, 32, 2), ForceField::Harmonic),
        "damped-cloud" => ("damped-cloud", gaussian_uniform(&mut r, 16, 2), ForceField::Damped(0.5)),
        "free-cloud" => ("free-cloud", gaussian_uniform(&mut r, 16, 2), ForceField::Free),
        "poly-cloud" => ("poly-cloud", gaussian_uniform(&mut r, 8, 2), ForceField::Poly(poly_force())),
        other => {
            return Err(CliError::Usage(format!("unknown scenario {other:?}; expected one of {}", SCENARIO_NAMES.join(", "))))
        }
    };
    let traj = vlasov_integrate(&mu, &force, 0.0, SIM_END, SIM_DT)?;
    Ok(SimScenario { name, traj })
}

pub fn all_scenarios(seed: u64) -> CliResult<Vec<SimScenario>> {
    SCENARIO_NAMES.iter().map(|n| scenario(n, seed)).collect()
}

/// Endpoint discrepancy against total force along the two-piece curve
/// that accelerates gently for unit time and then brakes hard.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FactorTwo {
    pub eps: f64,
    pub d: f64,
    pub force_integral: f64,
    pub ratio: f64,
}

/// Simulates `α'' = 2ε` on `[0, 1]` then `α'' = −2` on `[1, 1 + √ε]` from rest.
pub fn factor_two(eps: f64) -> CliResult<FactorTwo> {
    if !(eps > 0.0) || !(eps < 1.0) {
        return Err(CliError::Usage(format!("epsilon {eps} must lie in (0, 1)")));
    }
    let start = DiscreteMeasure::dirac(PhaseState::scalar(0.0, 0.0));
    let push = ForceField::Poly(PolyForce::constant(&[2.0 * eps]));
    let first = vlasov_integrate(&start, &push, 0.0, 1.0, 1e-3)?;
    let mid = first.measure_at_index(first.len() - 1)?;
    let brake_end = 1.0 + eps.sqrt();
    let brake = ForceField::Poly(PolyForce::constant(&[-2.0]));
    let second = vlasov_integrate(&mid, &brake, 1.0, brake_end, eps.sqrt() * 1e-3)?;
    let last = &second.states[second.len() - 1][0];
    let force_integral = force_norm_integral(&first, 0, first.len() - 1) + force_norm_integral(&second, 0, second.len() - 1);
    let d = d_sq(&PhaseState::scalar(0.0, 0.0), last).sqrt();
    Ok(FactorTwo { eps, d, force_integral, ratio: d / force_integral })
}

/// `n` unit-speed atoms evenly spaced on the unit circle, moving tangentially.
pub fn circle(n: usize) -> DiscreteMeasure {
    let states = (0..n)
        .map(|k| {
            let th = 2.0 * PI * k as f64 / n as f64;
            PhaseState::new(vec![th.cos(), th.sin()], vec![-th.sin(), th.cos()]).expect("finite")
        })
        .collect();
    DiscreteMeasure::uniform(states).expect("nonempty")
}

/// Sends atom `k` to atom `k + 1 (mod n)`.
pub fn shift_coupling(n: usize) -> Coupling {
    let perm: Vec<usize> = (0..n).map(|k| (k + 1) % n).collect();
    Coupling::from_permutation(&perm).expect("permutation")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn packaged_data_loads() {
        let (mu, nu) = nonunique_pair();
        assert_eq!((mu.len(), nu.len()), (2, 2));
        assert_eq!(random5_pair().0.len(), 5);
        assert_eq!(crossing_ensemble().entries().len(), 2);
        assert_eq!(poly_force().pos.len(), 2);
    }

    #[test]
    fn seeds_reproduce() {
        assert_eq!(oracle_instances(42, 5), oracle_instances(42, 5));
        assert_ne!(oracle_instances(42, 5), oracle_instances(43, 5));
    }

    #[test]
    fn factor_two_matches_closed_form() {
        let f = factor_two(0.01).unwrap();
        assert!((f.force_integral - 0.22).abs() < 1e-12);
        assert!((f.d - 0.36).abs() < 1e-10);
    }

    #[test]
    fn unknown_scenario_is_a_usage_error() {
        assert_eq!(scenario("nope", 42).unwrap_err().exit_code(), 2);
    }
}
