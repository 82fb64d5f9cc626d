//! Weighted point clouds on phase space and couplings between them.

use alloc::format;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::linalg::{add, dot, lex_cmp, max_abs, norm_sq, sub};
use crate::phase::{free_transport, PhaseState};

/// Tolerance on marginal sums of a coupling.
pub const MARGINAL_TOL: f64 = 1e-9;
/// Entries above `-ENTRY_CLIP` are clipped to zero, below it they are rejected.
pub const ENTRY_CLIP: f64 = 1e-12;
/// Maximum deviation of the raw weight sum from one that is rescaled instead of rejected.
pub const WEIGHT_SUM_TOL: f64 = 1e-6;

/// One parsed atom, before validation.
#[derive(Debug, Clone, PartialEq)]
pub struct RawAtom {
    pub x: Vec<f64>,
    pub v: Vec<f64>,
    pub w: f64,
}

/// Measure data as read from a file.
#[derive(Debug, Clone, PartialEq)]
pub struct RawMeasure {
    pub dim: usize,
    pub points: Vec<RawAtom>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Atom {
    pub state: PhaseState,
    pub weight: f64,
}

/// Probability measure with finitely many atoms. Weights are positive and
/// sum to one; coincident atoms are allowed.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteMeasure {
    dim: usize,
    atoms: Vec<Atom>,
}

impl DiscreteMeasure {
    /// Validates the atoms and rescales weights whose sum is within
    /// [`WEIGHT_SUM_TOL`] of one.
    pub fn new(dim: usize, atoms: Vec<Atom>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::ZeroDimension);
        }
        if atoms.is_empty() {
            return Err(Error::EmptyMeasure);
        }
        let mut total = 0.0;
        for (index, a) in atoms.iter().enumerate() {
            if a.state.dim() != dim {
                return Err(Error::DimensionMismatch { expected: dim, found: a.state.dim() });
            }
            if !(a.weight > 0.0) || !a.weight.is_finite() {
                return Err(Error::NonPositiveWeight { index, weight: a.weight });
            }
            total += a.weight;
        }
        if (total - 1.0).abs() > WEIGHT_SUM_TOL {
            return Err(Error::WeightSum(total));
        }
        let atoms = if total == 1.0 {
            atoms
        } else {
            atoms.into_iter().map(|a| Atom { weight: a.weight / total, ..a }).collect()
        };
        Ok(Self { dim, atoms })
    }

    /// Uniform weights over the given states.
    pub fn uniform(states: Vec<PhaseState>) -> Result<Self> {
        let dim = states.first().map(PhaseState::dim).ok_or(Error::EmptyMeasure)?;
        let w = 1.0 / states.len() as f64;
        Self::new(dim, states.into_iter().map(|state| Atom { state, weight: w }).collect())
    }

    /// A single unit mass.
    pub fn dirac(state: PhaseState) -> Self {
        Self { dim: state.dim(), atoms: alloc::vec![Atom { state, weight: 1.0 }] }
    }

    /// Normalises arbitrary positive masses; used internally for measures
    /// assembled from plan entries whose sum may drift by rounding.
    pub(crate) fn from_masses(dim: usize, atoms: Vec<Atom>) -> Result<Self> {
        let total: f64 = atoms.iter().map(|a| a.weight).sum();
        if !(total > 0.0) {
            return Err(Error::EmptyMeasure);
        }
        let atoms = atoms.into_iter().map(|a| Atom { weight: a.weight / total, ..a }).collect();
        Self::new(dim, atoms)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn weights(&self) -> Vec<f64> {
        self.atoms.iter().map(|a| a.weight).collect()
    }

    /// True when all weights agree with `1/len` to `1e-12`.
    pub fn is_uniform(&self) -> bool {
        let w = 1.0 / self.atoms.len() as f64;
        self.atoms.iter().all(|a| (a.weight - w).abs() <= 1e-12)
    }

    /// `‖v‖²_{L²(μ)}`
    pub fn velocity_second_moment(&self) -> f64 {
        self.atoms.iter().map(|a| a.weight * norm_sq(a.state.v())).sum()
    }

    /// `‖x‖²_{L²(μ)}`
    pub fn position_second_moment(&self) -> f64 {
        self.atoms.iter().map(|a| a.weight * norm_sq(a.state.x())).sum()
    }

    /// Mean velocity `⟨v⟩`.
    pub fn mean_velocity(&self) -> Vec<f64> {
        let mut m = alloc::vec![0.0; self.dim];
        for a in &self.atoms {
            for (mi, vi) in m.iter_mut().zip(a.state.v()) {
                *mi += a.weight * vi;
            }
        }
        m
    }

    /// Largest absolute coordinate over all atoms, positions and velocities.
    pub fn coordinate_scale(&self) -> f64 {
        self.atoms
            .iter()
            .map(|a| max_abs(a.state.x()).max(max_abs(a.state.v())))
            .fold(0.0, f64::max)
    }

    pub(crate) fn position_scale(&self) -> f64 {
        self.atoms.iter().map(|a| max_abs(a.state.x())).fold(0.0, f64::max)
    }

    /// Equality as weighted point sets, coordinates compared within `tol`.
    pub fn equals_as_point_set(&self, other: &DiscreteMeasure, tol: f64) -> bool {
        self.dim == other.dim && match_point_sets(&phase_keys(self), &phase_keys(other), tol).is_some()
    }
}

/// Turns validated-or-not raw data into a measure.
pub fn validate_measure(raw: &RawMeasure) -> Result<DiscreteMeasure> {
    if raw.points.is_empty() {
        return Err(Error::EmptyMeasure);
    }
    let mut atoms = Vec::with_capacity(raw.points.len());
    for p in &raw.points {
        if p.x.len() != raw.dim {
            return Err(Error::DimensionMismatch { expected: raw.dim, found: p.x.len() });
        }
        if p.v.len() != raw.dim {
            return Err(Error::DimensionMismatch { expected: raw.dim, found: p.v.len() });
        }
        atoms.push(Atom { state: PhaseState::new(p.x.clone(), p.v.clone())?, weight: p.w });
    }
    DiscreteMeasure::new(raw.dim, atoms)
}

/// Greedy matching of two weighted point sets.
///
/// Both sides are visited in lexicographic order; each left point draws mass
/// from the first right points whose coordinates all lie within `tol`.
/// Returns the transfer list `(i, j, mass)` when every atom is exhausted to
/// within [`MARGINAL_TOL`].
pub fn match_point_sets(left: &[(Vec<f64>, f64)], right: &[(Vec<f64>, f64)], tol: f64) -> Option<Vec<(usize, usize, f64)>> {
    let mut li: Vec<usize> = (0..left.len()).collect();
    let mut ri: Vec<usize> = (0..right.len()).collect();
    li.sort_by(|&a, &b| lex_cmp(&left[a].0, &left[b].0).then(a.cmp(&b)));
    ri.sort_by(|&a, &b| lex_cmp(&right[a].0, &right[b].0).then(a.cmp(&b)));
    let mut rem_r: Vec<f64> = right.iter().map(|r| r.1).collect();
    let mut out = Vec::new();
    for &i in &li {
        let mut rem = left[i].1;
        for &j in &ri {
            if rem <= MARGINAL_TOL {
                break;
            }
            if rem_r[j] <= 0.0 {
                continue;
            }
            let close = left[i].0.iter().zip(&right[j].0).all(|(a, b)| (a - b).abs() <= tol);
            if !close {
                continue;
            }
            let q = rem.min(rem_r[j]);
            rem -= q;
            rem_r[j] -= q;
            out.push((i, j, q));
        }
        if rem > MARGINAL_TOL {
            return None;
        }
    }
    if rem_r.iter().any(|r| *r > MARGINAL_TOL) {
        return None;
    }
    Some(out)
}

pub(crate) fn phase_keys(mu: &DiscreteMeasure) -> Vec<(Vec<f64>, f64)> {
    mu.atoms
        .iter()
        .map(|a| {
            let mut k = a.state.x().to_vec();
            k.extend_from_slice(a.state.v());
            (k, a.weight)
        })
        .collect()
}

/// Dense `m × k` transport plan, row major.
#[derive(Debug, Clone, PartialEq)]
pub struct Coupling {
    rows: usize,
    cols: usize,
    mass: Vec<f64>,
}

impl Coupling {
    /// Clips entries in `[-ENTRY_CLIP, 0)` to zero and rejects anything
    /// more negative or non-finite. Marginals are not checked here.
    pub fn from_dense(rows: usize, cols: usize, mut mass: Vec<f64>) -> Result<Self> {
        if mass.len() != rows * cols {
            return Err(Error::InvalidCoupling(format!("expected {} entries, got {}", rows * cols, mass.len())));
        }
        for (idx, m) in mass.iter_mut().enumerate() {
            if !m.is_finite() || *m < -ENTRY_CLIP {
                return Err(Error::InvalidCoupling(format!("entry {idx} is {m}")));
            }
            if *m < 0.0 {
                *m = 0.0;
            }
        }
        Ok(Self { rows, cols, mass })
    }

    /// Builds a plan from sparse `(i, j, mass)` triples, summing duplicates.
    pub fn from_triples(rows: usize, cols: usize, triples: &[(usize, usize, f64)]) -> Result<Self> {
        let mut mass = alloc::vec![0.0; rows * cols];
        for &(i, j, q) in triples {
            if i >= rows || j >= cols {
                return Err(Error::InvalidCoupling(format!("index ({i}, {j}) out of range")));
            }
            mass[i * cols + j] += q;
        }
        Self::from_dense(rows, cols, mass)
    }

    /// Plan `(1/m) Σ δ_{(i, perm[i])}` for a permutation.
    pub fn from_permutation(perm: &[usize]) -> Result<Self> {
        let m = perm.len();
        let w = 1.0 / m as f64;
        let triples: Vec<_> = perm.iter().enumerate().map(|(i, &j)| (i, j, w)).collect();
        Self::from_triples(m, m, &triples)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.mass[i * self.cols + j]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.mass
    }

    /// Entries with mass strictly above `floor`, row major.
    pub fn support(&self, floor: f64) -> Vec<(usize, usize, f64)> {
        let mut out = Vec::new();
        for i in 0..self.rows {
            for j in 0..self.cols {
                let q = self.get(i, j);
                if q > floor {
                    out.push((i, j, q));
                }
            }
        }
        out
    }

    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.rows).map(|i| self.mass[i * self.cols..(i + 1) * self.cols].iter().sum()).collect()
    }

    pub fn col_sums(&self) -> Vec<f64> {
        let mut s = alloc::vec![0.0; self.cols];
        for i in 0..self.rows {
            for (j, sj) in s.iter_mut().enumerate() {
                *sj += self.get(i, j);
            }
        }
        s
    }
}

/// Marginal diagnostics of a candidate plan.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CouplingReport {
    pub max_marginal_violation: f64,
    pub min_entry: f64,
}

impl CouplingReport {
    pub fn is_valid(&self) -> bool {
        self.max_marginal_violation <= MARGINAL_TOL && self.min_entry >= 0.0
    }
}

pub fn check_coupling(mu: &DiscreteMeasure, nu: &DiscreteMeasure, plan: &Coupling) -> CouplingReport {
    if plan.rows != mu.len() || plan.cols != nu.len() {
        return CouplingReport { max_marginal_violation: f64::INFINITY, min_entry: plan.mass.iter().copied().fold(f64::INFINITY, f64::min) };
    }
    let rows = plan.row_sums();
    let cols = plan.col_sums();
    let mut viol = 0.0_f64;
    for (s, a) in rows.iter().zip(mu.atoms()) {
        viol = viol.max((s - a.weight).abs());
    }
    for (s, a) in cols.iter().zip(nu.atoms()) {
        viol = viol.max((s - a.weight).abs());
    }
    CouplingReport {
        max_marginal_violation: viol,
        min_entry: plan.mass.iter().copied().fold(f64::INFINITY, f64::min),
    }
}

fn require_valid(mu: &DiscreteMeasure, nu: &DiscreteMeasure, plan: &Coupling) -> Result<()> {
    if mu.dim() != nu.dim() {
        return Err(Error::DimensionMismatch { expected: mu.dim(), found: nu.dim() });
    }
    let r = check_coupling(mu, nu, plan);
    if !r.is_valid() {
        return Err(Error::InvalidCoupling(format!(
            "marginal violation {:e}, minimum entry {:e}",
            r.max_marginal_violation, r.min_entry
        )));
    }
    Ok(())
}

/// The four scalars through which every plan cost factors:
/// `A = ‖y-x‖²`, `B = (y-x, v+w)`, `C = ‖v+w‖²`, `D = ‖w-v‖²`, all in `L²(π)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlanMoments {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
    /// Squared spatial scale of the underlying atoms; sets the threshold
    /// below which `A` counts as zero.
    pub scale_sq: f64,
}

impl PlanMoments {
    pub fn new(a: f64, b: f64, c: f64, d: f64) -> Self {
        Self { a, b, c, d, scale_sq: 0.0 }
    }

    /// `ε_A = 1e-14 (1 + scale²)`
    pub fn a_floor(&self) -> f64 {
        1e-14 * (1.0 + self.scale_sq)
    }
}

/// Exact weighted sums over the atom pairs of `plan`.
pub fn plan_moments(mu: &DiscreteMeasure, nu: &DiscreteMeasure, plan: &Coupling) -> Result<PlanMoments> {
    require_valid(mu, nu, plan)?;
    Ok(plan_moments_unchecked(mu, nu, plan))
}

pub(crate) fn plan_moments_unchecked(mu: &DiscreteMeasure, nu: &DiscreteMeasure, plan: &Coupling) -> PlanMoments {
    let (mut a, mut b, mut c, mut d) = (0.0, 0.0, 0.0, 0.0);
    for (i, src) in mu.atoms().iter().enumerate() {
        for (j, dst) in nu.atoms().iter().enumerate() {
            let q = plan.get(i, j);
            if q == 0.0 {
                continue;
            }
            let dx = sub(dst.state.x(), src.state.x());
            let s = add(src.state.v(), dst.state.v());
            let dv = sub(dst.state.v(), src.state.v());
            a += q * norm_sq(&dx);
            b += q * dot(&dx, &s);
            c += q * norm_sq(&s);
            d += q * norm_sq(&dv);
        }
    }
    let scale = mu.position_scale().max(nu.position_scale());
    PlanMoments { a, b, c, d, scale_sq: scale * scale }
}

/// `μ ⊗ ν`
pub fn product_coupling(mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> Result<Coupling> {
    if mu.dim() != nu.dim() {
        return Err(Error::DimensionMismatch { expected: mu.dim(), found: nu.dim() });
    }
    let mut mass = Vec::with_capacity(mu.len() * nu.len());
    for a in mu.atoms() {
        for b in nu.atoms() {
            mass.push(a.weight * b.weight);
        }
    }
    Coupling::from_dense(mu.len(), nu.len(), mass)
}

/// Squared 2-Wasserstein distance on phase space with cost `|x-y|² + |v-w|²`.
pub fn w2_sq(mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> Result<f64> {
    if mu.dim() != nu.dim() {
        return Err(Error::DimensionMismatch { expected: mu.dim(), found: nu.dim() });
    }
    let cost: Vec<f64> = mu
        .atoms()
        .iter()
        .flat_map(|a| {
            nu.atoms().iter().map(move |b| {
                crate::linalg::dist_sq(a.state.x(), b.state.x()) + crate::linalg::dist_sq(a.state.v(), b.state.v())
            })
        })
        .collect();
    let plan = crate::transport::solve_linear(mu, nu, &cost)?;
    Ok(plan.as_slice().iter().zip(&cost).map(|(p, c)| p * c).sum::<f64>().max(0.0))
}

/// `(G_T)_# μ`
pub fn pushforward_free_transport(mu: &DiscreteMeasure, horizon: f64) -> Result<DiscreteMeasure> {
    if !(horizon >= 0.0) {
        return Err(Error::NegativeTime(horizon));
    }
    let atoms = mu
        .atoms()
        .iter()
        .map(|a| Ok(Atom { state: free_transport(&a.state, horizon)?, weight: a.weight }))
        .collect::<Result<Vec<_>>>()?;
    Ok(DiscreteMeasure { dim: mu.dim, atoms })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn st(x: f64, v: f64) -> PhaseState {
        PhaseState::scalar(x, v)
    }

    fn raw(weights: &[f64]) -> RawMeasure {
        RawMeasure {
            dim: 1,
            points: weights.iter().enumerate().map(|(i, &w)| RawAtom { x: vec![i as f64], v: vec![0.0], w }).collect(),
        }
    }

    #[test]
    fn validate_accepts_and_rescales() {
        let m = validate_measure(&raw(&[0.5, 0.5])).unwrap();
        assert_eq!(m.weights(), vec![0.5, 0.5]);
        let m = validate_measure(&raw(&[0.5, 0.5000001])).unwrap();
        let s: f64 = m.weights().iter().sum();
        assert!((s - 1.0).abs() < 1e-15);
    }

    #[test]
    fn validate_rejects() {
        assert!(matches!(validate_measure(&raw(&[-0.1, 1.1])), Err(Error::NonPositiveWeight { index: 0, .. })));
        assert!(matches!(validate_measure(&raw(&[0.5, 0.6])), Err(Error::WeightSum(_))));
        assert!(matches!(validate_measure(&raw(&[])), Err(Error::EmptyMeasure)));
        let ragged = RawMeasure {
            dim: 2,
            points: vec![RawAtom { x: vec![0.0, 1.0], v: vec![0.0], w: 1.0 }],
        };
        assert!(matches!(validate_measure(&ragged), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn product_coupling_examples() {
        let a = DiscreteMeasure::dirac(st(0.0, 0.0));
        let b = DiscreteMeasure::dirac(st(1.0, 0.0));
        let p = product_coupling(&a, &b).unwrap();
        assert_eq!(p.as_slice(), &[1.0]);
        let u = DiscreteMeasure::uniform(vec![st(0.0, 0.0), st(1.0, 0.0)]).unwrap();
        let p = product_coupling(&u, &u).unwrap();
        assert!(p.as_slice().iter().all(|q| *q == 0.25));
        assert!(check_coupling(&u, &u, &p).is_valid());
    }

    #[test]
    fn moments_of_singletons_and_identity() {
        let a = DiscreteMeasure::dirac(st(0.0, 0.0));
        let b = DiscreteMeasure::dirac(st(1.0, 0.0));
        let m = plan_moments(&a, &b, &product_coupling(&a, &b).unwrap()).unwrap();
        assert_eq!((m.a, m.b, m.c, m.d), (1.0, 0.0, 0.0, 0.0));
        let u = DiscreteMeasure::uniform(vec![st(0.0, 1.0), st(2.0, -3.0)]).unwrap();
        let id = Coupling::from_permutation(&[0, 1]).unwrap();
        let m = plan_moments(&u, &u, &id).unwrap();
        assert_eq!((m.a, m.b, m.d), (0.0, 0.0, 0.0));
        assert!((m.c - 4.0 * u.velocity_second_moment()).abs() < 1e-12);
    }

    #[test]
    fn check_coupling_reports_corruption() {
        let u = DiscreteMeasure::uniform(vec![st(0.0, 1.0), st(2.0, -3.0)]).unwrap();
        let perm = Coupling::from_permutation(&[1, 0]).unwrap();
        assert_eq!(check_coupling(&u, &u, &perm).max_marginal_violation, 0.0);
        let bad = Coupling::from_dense(2, 2, vec![0.5, 0.1, 0.0, 0.5]).unwrap();
        let r = check_coupling(&u, &u, &bad);
        assert!(r.max_marginal_violation > 0.05);
        assert!(plan_moments(&u, &u, &bad).is_err());
        assert!(Coupling::from_dense(1, 1, vec![-0.5]).is_err());
        assert_eq!(Coupling::from_dense(1, 1, vec![-1e-14]).unwrap().get(0, 0), 0.0);
    }

    #[test]
    fn w2_examples() {
        let a = DiscreteMeasure::dirac(st(0.0, 0.0));
        let b = DiscreteMeasure::dirac(st(1.0, 0.0));
        assert!((w2_sq(&a, &b).unwrap() - 1.0).abs() < 1e-12);
        let u = DiscreteMeasure::uniform(vec![st(0.0, 0.0), st(1.0, 0.0)]).unwrap();
        let v = DiscreteMeasure::uniform(vec![st(1.0, 0.0), st(2.0, 0.0)]).unwrap();
        assert!(w2_sq(&u, &u).unwrap().abs() < 1e-14);
        // Matchings: monotone 0.5·1 + 0.5·1 = 1, crossed 0.5·4 + 0.5·0 = 2.
        assert!((w2_sq(&u, &v).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn pushforward_examples() {
        let u = DiscreteMeasure::uniform(vec![st(0.0, 1.0), st(2.0, -3.0)]).unwrap();
        assert_eq!(pushforward_free_transport(&u, 0.0).unwrap(), u);
        let p = pushforward_free_transport(&DiscreteMeasure::dirac(st(1.0, 2.0)), 0.5).unwrap();
        assert_eq!(p.atoms()[0].state, st(2.0, 2.0));
        let q = pushforward_free_transport(&u, 1.7).unwrap();
        assert_eq!(q.velocity_second_moment(), u.velocity_second_moment());
        assert!(pushforward_free_transport(&u, -1.0).is_err());
    }

    #[test]
    fn point_set_equality_handles_split_atoms() {
        let a = DiscreteMeasure::uniform(vec![st(0.0, 1.0), st(0.0, 1.0), st(3.0, 0.0)]).unwrap();
        let b = DiscreteMeasure::new(
            1,
            vec![Atom { state: st(3.0, 0.0), weight: 1.0 / 3.0 }, Atom { state: st(0.0, 1.0), weight: 2.0 / 3.0 }],
        )
        .unwrap();
        assert!(a.equals_as_point_set(&b, 1e-12));
        let c = DiscreteMeasure::uniform(vec![st(0.0, 1.0), st(3.0, 0.0)]).unwrap();
        assert!(!a.equals_as_point_set(&c, 1e-12));
    }
}
