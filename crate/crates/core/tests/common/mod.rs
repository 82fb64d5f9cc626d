#![allow(dead_code)]

use kinetic_ot_core::measures::Coupling;
use kinetic_ot_core::{Atom, DiscreteMeasure, PhaseState};
use rand::seq::SliceRandom;
use rand::Rng;

pub fn random_state(rng: &mut impl Rng, n: usize, spread: f64) -> PhaseState {
    let x = (0..n).map(|_| rng.random_range(-spread..spread)).collect();
    let v = (0..n).map(|_| rng.random_range(-spread..spread)).collect();
    PhaseState::new(x, v).unwrap()
}

pub fn random_uniform(rng: &mut impl Rng, m: usize, n: usize) -> DiscreteMeasure {
    DiscreteMeasure::uniform((0..m).map(|_| random_state(rng, n, 1.0)).collect()).unwrap()
}

pub fn random_weighted(rng: &mut impl Rng, m: usize, n: usize) -> DiscreteMeasure {
    let w: Vec<f64> = (0..m).map(|_| rng.random_range(0.1..1.0)).collect();
    let s: f64 = w.iter().sum();
    let atoms = w.into_iter().map(|wi| Atom { state: random_state(rng, n, 1.0), weight: wi / s }).collect();
    DiscreteMeasure::new(n, atoms).unwrap()
}

/// Northwest-corner vertex after shuffling rows and columns.
fn random_vertex(rng: &mut impl Rng, a: &[f64], b: &[f64]) -> Vec<f64> {
    let (m, k) = (a.len(), b.len());
    let mut rows: Vec<usize> = (0..m).collect();
    let mut cols: Vec<usize> = (0..k).collect();
    rows.shuffle(rng);
    cols.shuffle(rng);
    let mut ra: Vec<f64> = a.to_vec();
    let mut rb: Vec<f64> = b.to_vec();
    let mut p = vec![0.0; m * k];
    let (mut i, mut j) = (0, 0);
    while i < m && j < k {
        let (r, c) = (rows[i], cols[j]);
        let q = ra[r].min(rb[c]);
        p[r * k + c] += q;
        ra[r] -= q;
        rb[c] -= q;
        if ra[r] <= rb[c] { i += 1 } else { j += 1 }
    }
    p
}

/// Random convex combination of a few shuffled northwest-corner vertices.
pub fn random_coupling(rng: &mut impl Rng, mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> Coupling {
    let (a, b) = (mu.weights(), nu.weights());
    let parts = rng.random_range(1..=4);
    let mut mix = vec![0.0; a.len() * b.len()];
    let lambdas: Vec<f64> = (0..parts).map(|_| rng.random_range(0.05..1.0)).collect();
    let total: f64 = lambdas.iter().sum();
    for l in lambdas {
        for (m, q) in mix.iter_mut().zip(random_vertex(rng, &a, &b)) {
            *m += l / total * q;
        }
    }
    Coupling::from_dense(a.len(), b.len(), mix).unwrap()
}
