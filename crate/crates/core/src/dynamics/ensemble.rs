use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{Error, Result};
use crate::measures::{check_coupling, Atom, Coupling, DiscreteMeasure};
use crate::phase::CubicSpline;

/// Mass below which a plan entry does not spawn a spline.
pub const MASS_FLOOR: f64 = 1e-15;

#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleEntry {
    pub spline: CubicSpline,
    pub mass: f64,
    /// Atom indices in the source and target measures, when known.
    pub source: usize,
    pub target: usize,
}

/// Dynamical plan concentrated on finitely many cubic splines of a common
/// horizon.
#[derive(Debug, Clone, PartialEq)]
pub struct SplineEnsemble {
    horizon: f64,
    entries: Vec<EnsembleEntry>,
}

impl SplineEnsemble {
    pub fn new(horizon: f64, entries: Vec<EnsembleEntry>) -> Result<Self> {
        if !(horizon > 0.0) || !horizon.is_finite() {
            return Err(Error::NonPositiveTime(horizon));
        }
        if entries.is_empty() {
            return Err(Error::EmptyMeasure);
        }
        for (index, e) in entries.iter().enumerate() {
            if e.spline.horizon() != horizon {
                return Err(Error::InvalidArgument(alloc::format!(
                    "spline {index} has horizon {}, expected {horizon}",
                    e.spline.horizon()
                )));
            }
            if !(e.mass > 0.0) {
                return Err(Error::NonPositiveWeight { index, weight: e.mass });
            }
        }
        let total: f64 = entries.iter().map(|e| e.mass).sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::WeightSum(total));
        }
        Ok(Self { horizon, entries })
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn entries(&self) -> &[EnsembleEntry] {
        &self.entries
    }

    /// `Σ mass · T ∫ |α''|²`
    pub fn action(&self) -> f64 {
        self.entries.iter().map(|e| e.mass * e.spline.action()).sum()
    }
}

/// One spline per positive-mass pair of `plan`.
pub fn build_dynamical_plan(mu: &DiscreteMeasure, nu: &DiscreteMeasure, plan: &Coupling, horizon: f64) -> Result<SplineEnsemble> {
    if mu.dim() != nu.dim() {
        return Err(Error::DimensionMismatch { expected: mu.dim(), found: nu.dim() });
    }
    let report = check_coupling(mu, nu, plan);
    if !report.is_valid() {
        return Err(Error::InvalidCoupling(alloc::format!(
            "marginal violation {:e}",
            report.max_marginal_violation
        )));
    }
    let mut entries = Vec::new();
    for (i, j, mass) in plan.support(MASS_FLOOR) {
        let spline = CubicSpline::connect(&mu.atoms()[i].state, &nu.atoms()[j].state, horizon)?;
        entries.push(EnsembleEntry { spline, mass, source: i, target: j });
    }
    // Dropping sub-floor entries can leave the total a hair below one.
    let total: f64 = entries.iter().map(|e| e.mass).sum();
    for e in &mut entries {
        e.mass /= total;
    }
    SplineEnsemble::new(horizon, entries)
}

/// `(e_t)_# m`: the measure of spline states at time `t`.
pub fn interpolate_at(e: &SplineEnsemble, t: f64) -> Result<DiscreteMeasure> {
    let atoms = e
        .entries
        .iter()
        .map(|en| Ok(Atom { state: en.spline.eval(t)?, weight: en.mass }))
        .collect::<Result<Vec<_>>>()?;
    let dim = atoms[0].state.dim();
    DiscreteMeasure::from_masses(dim, atoms)
}

/// Result of scanning an ensemble for phase-space collisions.
#[derive(Debug, Clone, PartialEq)]
pub struct MongeMatherReport {
    /// Smallest phase distance between two checked splines at an interior time.
    pub min_separation: f64,
    /// Where the minimum occurred: `(entry a, entry b, time)`.
    pub closest: Option<(usize, usize, f64)>,
    /// Set when `min_separation <= tol`.
    pub violation: Option<(usize, usize, f64)>,
    pub pairs_checked: usize,
    pub pairs_exempt: usize,
}

impl MongeMatherReport {
    pub fn passed(&self) -> bool {
        self.violation.is_none()
    }
}

fn separation(a: &CubicSpline, b: &CubicSpline, t: f64) -> f64 {
    a.eval_unchecked(t).phase_distance(&b.eval_unchecked(t))
}

/// Golden-section minimum of `f` on `[lo, hi]`.
fn golden_min(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> (f64, f64) {
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut x1 = hi - g * (hi - lo);
    let mut x2 = lo + g * (hi - lo);
    let (mut f1, mut f2) = (f(x1), f(x2));
    for _ in 0..120 {
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - g * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + g * (hi - lo);
            f2 = f(x2);
        }
        if hi - lo <= 1e-15 * (1.0 + hi.abs()) {
            break;
        }
    }
    if f1 <= f2 {
        (x1, f1)
    } else {
        (x2, f2)
    }
}

/// Checks that splines with distinct endpoint pairs never share a phase
/// state at an interior time.
///
/// Each pair is sampled at `t_k = kT/(grid_size+1)`, `k = 1..=grid_size`,
/// and the best sample is refined by golden section within half a grid
/// spacing. Pairs whose endpoint states coincide are exempt.
pub fn monge_mather_check(e: &SplineEnsemble, grid_size: usize, tol: f64) -> MongeMatherReport {
    let t_end = e.horizon;
    let step = t_end / (grid_size + 1) as f64;
    let mut report = MongeMatherReport {
        min_separation: f64::INFINITY,
        closest: None,
        violation: None,
        pairs_checked: 0,
        pairs_exempt: 0,
    };
    let n = e.entries.len();
    for a in 0..n {
        for b in a + 1..n {
            let (sa, sb) = (&e.entries[a].spline, &e.entries[b].spline);
            if sa.source() == sb.source() && sa.target() == sb.target() {
                report.pairs_exempt += 1;
                continue;
            }
            report.pairs_checked += 1;
            let mut best = (f64::INFINITY, 0.0);
            for k in 1..=grid_size {
                let t = step * k as f64;
                let s = separation(sa, sb, t);
                if s < best.0 {
                    best = (s, t);
                }
            }
            if grid_size == 0 {
                continue;
            }
            let (tr, sr) = golden_min(|t| separation(sa, sb, t), best.1 - 0.5 * step, best.1 + 0.5 * step);
            let (s, t) = if sr < best.0 { (sr, tr) } else { best };
            if s < report.min_separation {
                report.min_separation = s;
                report.closest = Some((a, b, t));
            }
        }
    }
    if report.min_separation <= tol {
        report.violation = report.closest;
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::{plan_moments, product_coupling};
    use crate::phase::{free_transport, tilde_dt_sq, PhaseState};
    use crate::solver::{cost_tilde_c_t, solve_fixed_t};
    use alloc::vec;

    fn st(x: f64, v: f64) -> PhaseState {
        PhaseState::scalar(x, v)
    }

    #[test]
    fn singleton_ensemble() {
        let a = DiscreteMeasure::dirac(st(0.0, 1.0));
        let b = DiscreteMeasure::dirac(st(2.0, -1.0));
        let p = product_coupling(&a, &b).unwrap();
        let e = build_dynamical_plan(&a, &b, &p, 1.5).unwrap();
        assert_eq!(e.entries().len(), 1);
        let want = tilde_dt_sq(&st(0.0, 1.0), &st(2.0, -1.0), 1.5).unwrap();
        assert!((e.action() - want).abs() < 1e-12 * want);
    }

    #[test]
    fn ensemble_action_matches_plan_cost() {
        let s5 = 5f64.sqrt();
        let p = |x: [f64; 2], v: [f64; 2]| PhaseState::new(x.to_vec(), v.to_vec()).unwrap();
        let mu = DiscreteMeasure::uniform(vec![p([0.0, 0.0], [2.0, 0.0]), p([0.0, 0.0], [0.0, s5])]).unwrap();
        let nu = DiscreteMeasure::uniform(vec![p([2.0, 0.0], [2.0, 0.0]), p([0.0, 0.0], [0.0, s5])]).unwrap();
        let r = solve_fixed_t(&mu, &nu, 1.0).unwrap();
        let e = build_dynamical_plan(&mu, &nu, &r.plan, 1.0).unwrap();
        assert!((e.action() - 30.0).abs() < 1e-10);
        let prod = product_coupling(&mu, &nu).unwrap();
        let e = build_dynamical_plan(&mu, &nu, &prod, 0.8).unwrap();
        let m = plan_moments(&mu, &nu, &prod).unwrap();
        assert!((e.action() - cost_tilde_c_t(&m, 0.8).unwrap()).abs() < 1e-10);
    }

    #[test]
    fn interpolation_endpoints_and_midpoint() {
        let mu = DiscreteMeasure::uniform(vec![st(0.0, 1.0), st(3.0, -2.0)]).unwrap();
        let nu = DiscreteMeasure::uniform(vec![st(1.0, 0.0), st(-1.0, 0.5)]).unwrap();
        let r = solve_fixed_t(&mu, &nu, 1.0).unwrap();
        let e = build_dynamical_plan(&mu, &nu, &r.plan, 1.0).unwrap();
        assert!(interpolate_at(&e, 0.0).unwrap().equals_as_point_set(&mu, 0.0));
        assert!(interpolate_at(&e, 1.0).unwrap().equals_as_point_set(&nu, 0.0));
        assert!(interpolate_at(&e, 1.1).is_err());

        let a = st(0.5, 2.0);
        let b = free_transport(&a, 2.0).unwrap();
        let e = build_dynamical_plan(
            &DiscreteMeasure::dirac(a.clone()),
            &DiscreteMeasure::dirac(b.clone()),
            &Coupling::from_dense(1, 1, vec![1.0]).unwrap(),
            2.0,
        )
        .unwrap();
        assert!(e.action().abs() < 1e-24);
        let mid = interpolate_at(&e, 1.0).unwrap();
        assert_eq!(mid.atoms()[0].state, free_transport(&a, 1.0).unwrap());
    }

    #[test]
    fn crossing_pair_is_flagged() {
        // α₂ = α₁ + c(t − T/2)² shares position and velocity with α₁ at T/2.
        let t = 1.0;
        let s1 = CubicSpline::connect(&st(0.0, 1.0), &st(1.0, 0.0), t).unwrap();
        let c = 2.0;
        let src2 = st(0.0 + c * t * t / 4.0, 1.0 - c * t);
        let dst2 = st(1.0 + c * t * t / 4.0, 0.0 + c * t);
        let s2 = CubicSpline::connect(&src2, &dst2, t).unwrap();
        let e = SplineEnsemble::new(
            t,
            vec![
                EnsembleEntry { spline: s1, mass: 0.5, source: 0, target: 0 },
                EnsembleEntry { spline: s2, mass: 0.5, source: 1, target: 1 },
            ],
        )
        .unwrap();
        let r = monge_mather_check(&e, 50, 1e-9);
        assert!(!r.passed());
        let (_, _, at) = r.violation.unwrap();
        assert!((at - 0.5).abs() < 1e-6);
    }

    #[test]
    fn identical_splines_are_exempt() {
        let s = CubicSpline::connect(&st(0.0, 1.0), &st(1.0, 0.0), 1.0).unwrap();
        let e = SplineEnsemble::new(
            1.0,
            vec![
                EnsembleEntry { spline: s.clone(), mass: 0.5, source: 0, target: 0 },
                EnsembleEntry { spline: s, mass: 0.5, source: 1, target: 1 },
            ],
        )
        .unwrap();
        let r = monge_mather_check(&e, 50, 1e-9);
        assert!(r.passed());
        assert_eq!((r.pairs_checked, r.pairs_exempt), (0, 1));
    }
}
