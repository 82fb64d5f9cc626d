mod common;

use kinetic_ot_core::solver::{brute_force_oracle, solve_d};
use kinetic_ot_core::SolverOptions;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn local_search_never_beats_and_usually_matches_the_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let opts = SolverOptions::default();
    let mut matched = 0;
    let total = 200;
    for case in 0..total {
        let m = rng.random_range(2..=6);
        let n = rng.random_range(1..=3);
        let mu = common::random_uniform(&mut rng, m, n);
        let nu = common::random_uniform(&mut rng, m, n);
        let s = solve_d(&mu, &nu, &opts).unwrap();
        let o = brute_force_oracle(&mu, &nu, &opts).unwrap();
        assert!(s.cost_sq >= o.best.cost_sq - 1e-9, "case {case}: {} < {}", s.cost_sq, o.best.cost_sq);
        if (s.cost_sq - o.best.cost_sq).abs() <= 1e-8 * (1.0 + o.best.cost_sq) {
            matched += 1;
        } else {
            eprintln!("case {case} (m={m}, n={n}): local {} vs oracle {}", s.cost_sq, o.best.cost_sq);
        }
    }
    eprintln!("matched {matched}/{total}");
    assert!(matched * 100 >= 95 * total);
}

#[test]
fn weighted_vertex_enumeration_bounds_the_solver() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let opts = SolverOptions::default();
    for _ in 0..40 {
        let m = rng.random_range(1..=4);
        let k = rng.random_range(1..=4);
        let mu = common::random_weighted(&mut rng, m, 2);
        let nu = common::random_weighted(&mut rng, k, 2);
        let s = solve_d(&mu, &nu, &opts).unwrap();
        let o = brute_force_oracle(&mu, &nu, &opts).unwrap();
        assert!(s.cost_sq >= o.best.cost_sq - 1e-9);
        for _ in 0..10 {
            let p = common::random_coupling(&mut rng, &mu, &nu);
            let c = kinetic_ot_core::solver::cost_c(&kinetic_ot_core::measures::plan_moments(&mu, &nu, &p).unwrap());
            assert!(c >= o.best.cost_sq - 1e-9, "interior plan {c} below oracle {}", o.best.cost_sq);
        }
    }
}
