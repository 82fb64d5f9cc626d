mod common;

use kinetic_ot_core::measures::{plan_moments, w2_sq};
use kinetic_ot_core::{DiscreteMeasure, PhaseState};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn c_plus_d_is_coupling_independent() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..10 {
        let mu_size = rng.random_range(1..=6);
        let mu = common::random_weighted(&mut rng, mu_size, 2);
        let nu_size = rng.random_range(1..=6);
        let nu = common::random_weighted(&mut rng, nu_size, 2);
        let expected = 2.0 * (mu.velocity_second_moment() + nu.velocity_second_moment());
        for _ in 0..100 {
            let p = common::random_coupling(&mut rng, &mu, &nu);
            let m = plan_moments(&mu, &nu, &p).unwrap();
            assert!((m.c + m.d - expected).abs() <= 1e-10 * expected);
            assert!(m.b.abs() <= (m.a * m.c).sqrt() * (1.0 + 1e-12) + 1e-15);
            assert!(m.a >= 0.0 && m.c >= 0.0 && m.d >= 0.0);
        }
    }
}

#[test]
fn w2_is_symmetric_and_separates() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..30 {
        let mu_size = rng.random_range(1..=5);
        let mu = common::random_weighted(&mut rng, mu_size, 3);
        let nu_size = rng.random_range(1..=5);
        let nu = common::random_weighted(&mut rng, nu_size, 3);
        let ab = w2_sq(&mu, &nu).unwrap();
        let ba = w2_sq(&nu, &mu).unwrap();
        assert!((ab - ba).abs() <= 1e-12 * (1.0 + ab));
        assert!(ab > 1e-6);
        assert!(w2_sq(&mu, &mu).unwrap() <= 1e-14);
    }
    // Same point set, different atom order and splitting.
    let s = |x: f64, v: f64| PhaseState::scalar(x, v);
    let a = DiscreteMeasure::uniform(vec![s(0.0, 1.0), s(2.0, 0.0)]).unwrap();
    let b = DiscreteMeasure::uniform(vec![s(2.0, 0.0), s(0.0, 1.0), s(0.0, 1.0), s(2.0, 0.0)]).unwrap();
    assert!(w2_sq(&a, &b).unwrap() <= 1e-14);
    assert!(a.equals_as_point_set(&b, 1e-12));
}
