use alloc::boxed::Box;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{Error, Result};
use crate::linalg::{norm, norm_sq};
use crate::measures::{Atom, DiscreteMeasure};
use crate::phase::{CubicSpline, PhaseState};

/// Force with polynomial time dependence and affine phase dependence:
/// `F_i = Σ_k time[i][k] t^k + Σ_j pos[i][j] x_j + Σ_j vel[i][j] v_j`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PolyForce {
    pub time: Vec<Vec<f64>>,
    pub pos: Vec<Vec<f64>>,
    pub vel: Vec<Vec<f64>>,
}

impl PolyForce {
    /// Constant force `c`.
    pub fn constant(c: &[f64]) -> Self {
        Self { time: c.iter().map(|&ci| vec![ci]).collect(), ..Self::default() }
    }

    fn eval(&self, t: f64, x: &[f64], v: &[f64]) -> Vec<f64> {
        let n = x.len();
        let row = |m: &Vec<Vec<f64>>, i: usize, z: &[f64]| -> f64 {
            m.get(i).map_or(0.0, |r| r.iter().zip(z).map(|(a, b)| a * b).sum())
        };
        (0..n)
            .map(|i| {
                let poly = self.time.get(i).map_or(0.0, |c| c.iter().rev().fold(0.0, |acc, ck| acc * t + ck));
                poly + row(&self.pos, i, x) + row(&self.vel, i, v)
            })
            .collect()
    }
}

pub type ForceFn = dyn Fn(f64, usize, &[f64], &[f64]) -> Vec<f64> + Send + Sync;

/// Acceleration field `F(t, x, v)` driving the characteristics.
pub enum ForceField {
    Free,
    /// `F = −x`
    Harmonic,
    /// `F = −γ v`
    Damped(f64),
    Poly(PolyForce),
    /// Particle `i` feels `α_i''(t − start)`; used to replay spline plans.
    Spline { splines: Vec<CubicSpline>, start: f64 },
    /// Arbitrary field; arguments are `(t, particle, x, v)`.
    Custom { tag: String, f: Box<ForceFn> },
}

impl fmt::Debug for ForceField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.tag())
    }
}

impl ForceField {
    pub fn tag(&self) -> String {
        match self {
            ForceField::Free => "free".into(),
            ForceField::Harmonic => "harmonic".into(),
            ForceField::Damped(g) => format!("damped:{g}"),
            ForceField::Poly(_) => "poly".into(),
            ForceField::Spline { .. } => "spline".into(),
            ForceField::Custom { tag, .. } => tag.clone(),
        }
    }

    pub fn eval(&self, t: f64, particle: usize, x: &[f64], v: &[f64]) -> Vec<f64> {
        match self {
            ForceField::Free => vec![0.0; x.len()],
            ForceField::Harmonic => x.iter().map(|c| -c).collect(),
            ForceField::Damped(g) => v.iter().map(|c| -g * c).collect(),
            ForceField::Poly(p) => p.eval(t, x, v),
            ForceField::Spline { splines, start } => splines
                .get(particle)
                .map_or_else(|| vec![f64::NAN; x.len()], |s| s.acceleration(t - start)),
            ForceField::Custom { f, .. } => f(t, particle, x, v),
        }
    }
}

/// Particle solution of the (possibly reparametrised) Vlasov equation
/// `ẋ = λ(t) v`, `v̇ = F`, sampled on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub weights: Vec<f64>,
    /// `states[k][i]`: particle `i` at `times[k]`.
    pub states: Vec<Vec<PhaseState>>,
    /// `forces[k][i]`: `v̇` of particle `i` at `times[k]`.
    pub forces: Vec<Vec<Vec<f64>>>,
    /// `λ` at each grid time; identically one for plain Vlasov flows.
    pub transport_speed: Vec<f64>,
    pub dim: usize,
    pub force_tag: String,
}

impl Trajectory {
    pub fn start(&self) -> f64 {
        self.times[0]
    }

    pub fn end(&self) -> f64 {
        self.times[self.times.len() - 1]
    }

    /// Mean grid spacing.
    pub fn dt(&self) -> f64 {
        (self.end() - self.start()) / (self.times.len() - 1) as f64
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    fn grid_index(&self, t: f64) -> Option<usize> {
        let tol = 1e-9 * (1.0 + t.abs());
        let k = self.times.partition_point(|&s| s < t - tol);
        (k < self.times.len() && (self.times[k] - t).abs() <= tol).then_some(k)
    }

    /// `μ_k` on the grid.
    pub fn measure_at_index(&self, k: usize) -> Result<DiscreteMeasure> {
        let atoms = self.states[k]
            .iter()
            .zip(&self.weights)
            .map(|(s, &w)| Atom { state: s.clone(), weight: w })
            .collect();
        DiscreteMeasure::new(self.dim, atoms)
    }

    /// `μ_t`; between grid points each particle is cubic Hermite
    /// interpolated using `ẋ = λ v` and `v̇ = F`.
    pub fn measure_at(&self, t: f64) -> Result<DiscreteMeasure> {
        if let Some(k) = self.grid_index(t) {
            return self.measure_at_index(k);
        }
        let states = self.states_at(t)?;
        let atoms = states.into_iter().zip(&self.weights).map(|(s, &w)| Atom { state: s, weight: w }).collect();
        DiscreteMeasure::new(self.dim, atoms)
    }

    pub(crate) fn states_at(&self, t: f64) -> Result<Vec<PhaseState>> {
        if !(t >= self.start() && t <= self.end()) {
            return Err(Error::TimeOutOfRange { t, start: self.start(), end: self.end() });
        }
        if let Some(k) = self.grid_index(t) {
            return Ok(self.states[k].clone());
        }
        let k = self.times.partition_point(|&s| s <= t).clamp(1, self.times.len() - 1) - 1;
        let (t0, t1) = (self.times[k], self.times[k + 1]);
        let h = t1 - t0;
        let s = (t - t0) / h;
        let (h00, h10, h01, h11) = (
            (1.0 + 2.0 * s) * (1.0 - s) * (1.0 - s),
            s * (1.0 - s) * (1.0 - s),
            s * s * (3.0 - 2.0 * s),
            s * s * (s - 1.0),
        );
        let (l0, l1) = (self.transport_speed[k], self.transport_speed[k + 1]);
        let out = (0..self.weights.len())
            .map(|i| {
                let (a, b) = (&self.states[k][i], &self.states[k + 1][i]);
                let (fa, fb) = (&self.forces[k][i], &self.forces[k + 1][i]);
                let x = (0..self.dim)
                    .map(|d| h00 * a.x()[d] + h10 * h * l0 * a.v()[d] + h01 * b.x()[d] + h11 * h * l1 * b.v()[d])
                    .collect();
                let v = (0..self.dim)
                    .map(|d| h00 * a.v()[d] + h10 * h * fa[d] + h01 * b.v()[d] + h11 * h * fb[d])
                    .collect();
                PhaseState::from_parts_unchecked(x, v)
            })
            .collect();
        Ok(out)
    }

    /// Per-particle `v̇` at `t`, linear between grid points.
    pub(crate) fn forces_at(&self, t: f64) -> Result<(Vec<Vec<f64>>, f64)> {
        if !(t >= self.start() && t <= self.end()) {
            return Err(Error::TimeOutOfRange { t, start: self.start(), end: self.end() });
        }
        if let Some(k) = self.grid_index(t) {
            return Ok((self.forces[k].clone(), self.transport_speed[k]));
        }
        let k = self.times.partition_point(|&s| s <= t).clamp(1, self.times.len() - 1) - 1;
        let s = (t - self.times[k]) / (self.times[k + 1] - self.times[k]);
        let f = self.forces[k]
            .iter()
            .zip(&self.forces[k + 1])
            .map(|(a, b)| a.iter().zip(b).map(|(p, q)| (1.0 - s) * p + s * q).collect())
            .collect();
        Ok((f, (1.0 - s) * self.transport_speed[k] + s * self.transport_speed[k + 1]))
    }

    /// `‖F_t‖_{L²(μ_t)}`, linearly interpolated between grid points.
    pub fn force_norm_at(&self, t: f64) -> Result<f64> {
        if !(t >= self.start() && t <= self.end()) {
            return Err(Error::TimeOutOfRange { t, start: self.start(), end: self.end() });
        }
        let norms = self.force_norms();
        if let Some(k) = self.grid_index(t) {
            return Ok(norms[k]);
        }
        let k = self.times.partition_point(|&s| s <= t).clamp(1, self.times.len() - 1) - 1;
        let s = (t - self.times[k]) / (self.times[k + 1] - self.times[k]);
        Ok((1.0 - s) * norms[k] + s * norms[k + 1])
    }

    /// `‖F_{t_k}‖_{L²(μ_{t_k})}` at every grid time.
    pub fn force_norms(&self) -> Vec<f64> {
        self.forces
            .iter()
            .map(|fk| fk.iter().zip(&self.weights).map(|(f, w)| w * norm_sq(f)).sum::<f64>().sqrt())
            .collect()
    }

    /// `‖v‖_{L²}` and `‖x‖_{L²}` at every grid time.
    pub fn second_moments(&self) -> (Vec<f64>, Vec<f64>) {
        let mut vs = Vec::with_capacity(self.len());
        let mut xs = Vec::with_capacity(self.len());
        for sk in &self.states {
            let mut v2 = 0.0;
            let mut x2 = 0.0;
            for (s, w) in sk.iter().zip(&self.weights) {
                v2 += w * norm_sq(s.v());
                x2 += w * norm_sq(s.x());
            }
            vs.push(v2.sqrt());
            xs.push(x2.sqrt());
        }
        (vs, xs)
    }
}

fn rk4_step(f: &ForceField, t: f64, h: f64, i: usize, x: &[f64], v: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let n = x.len();
    let shift = |base: &[f64], d: &[f64], c: f64| -> Vec<f64> { base.iter().zip(d).map(|(b, di)| b + c * di).collect() };
    let k1x = v.to_vec();
    let k1v = f.eval(t, i, x, v);
    let (x2, v2) = (shift(x, &k1x, 0.5 * h), shift(v, &k1v, 0.5 * h));
    let k2x = v2.clone();
    let k2v = f.eval(t + 0.5 * h, i, &x2, &v2);
    let (x3, v3) = (shift(x, &k2x, 0.5 * h), shift(v, &k2v, 0.5 * h));
    let k3x = v3.clone();
    let k3v = f.eval(t + 0.5 * h, i, &x3, &v3);
    let (x4, v4) = (shift(x, &k3x, h), shift(v, &k3v, h));
    let k4x = v4.clone();
    let k4v = f.eval(t + h, i, &x4, &v4);
    let xn = (0..n).map(|d| x[d] + h / 6.0 * (k1x[d] + 2.0 * k2x[d] + 2.0 * k3x[d] + k4x[d])).collect();
    let vn = (0..n).map(|d| v[d] + h / 6.0 * (k1v[d] + 2.0 * k2v[d] + 2.0 * k3v[d] + k4v[d])).collect();
    (xn, vn)
}

struct Particle {
    states: Vec<PhaseState>,
    forces: Vec<Vec<f64>>,
}

fn integrate_particle(f: &ForceField, i: usize, s0: &PhaseState, t0: f64, h: f64, steps: usize) -> Result<Particle> {
    let mut states = Vec::with_capacity(steps + 1);
    let mut forces = Vec::with_capacity(steps + 1);
    let (mut x, mut v) = (s0.x().to_vec(), s0.v().to_vec());
    for k in 0..=steps {
        let t = t0 + h * k as f64;
        let fk = f.eval(t, i, &x, &v);
        if fk.len() != x.len() {
            return Err(Error::DimensionMismatch { expected: x.len(), found: fk.len() });
        }
        if fk.iter().chain(&x).chain(&v).any(|c| !c.is_finite()) {
            return Err(Error::NonFinite("force or state during integration"));
        }
        states.push(PhaseState::from_parts_unchecked(x.clone(), v.clone()));
        forces.push(fk);
        if k < steps {
            (x, v) = rk4_step(f, t, h, i, &x, &v);
        }
    }
    Ok(Particle { states, forces })
}

/// Classical RK4 on `ẋ = v`, `v̇ = F(t, x, v)` for each atom of `mu0`.
///
/// The step is shrunk to `(t1 − t0)/⌈(t1 − t0)/dt⌉` so the grid ends at `t1`.
pub fn vlasov_integrate(mu0: &DiscreteMeasure, force: &ForceField, t0: f64, t1: f64, dt: f64) -> Result<Trajectory> {
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(Error::InvalidArgument(format!("step {dt} must be positive")));
    }
    if !(t1 > t0) || dt >= t1 - t0 {
        return Err(Error::InvalidArgument(format!("step {dt} must be smaller than the interval [{t0}, {t1}]")));
    }
    let span = t1 - t0;
    let steps = ((span / dt) * (1.0 - 1e-12)).ceil() as usize;
    let h = span / steps as f64;
    let atoms = mu0.atoms();

    #[cfg(feature = "parallel")]
    let particles: Vec<Particle> = {
        use rayon::prelude::*;
        atoms
            .par_iter()
            .enumerate()
            .map(|(i, a)| integrate_particle(force, i, &a.state, t0, h, steps))
            .collect::<Result<_>>()?
    };
    #[cfg(not(feature = "parallel"))]
    let particles: Vec<Particle> = atoms
        .iter()
        .enumerate()
        .map(|(i, a)| integrate_particle(force, i, &a.state, t0, h, steps))
        .collect::<Result<_>>()?;

    let mut times: Vec<f64> = (0..=steps).map(|k| t0 + h * k as f64).collect();
    times[steps] = t1;
    let mut states = vec![Vec::with_capacity(atoms.len()); steps + 1];
    let mut forces = vec![Vec::with_capacity(atoms.len()); steps + 1];
    for p in particles {
        for (k, (s, f)) in p.states.into_iter().zip(p.forces).enumerate() {
            states[k].push(s);
            forces[k].push(f);
        }
    }
    Ok(Trajectory {
        times,
        weights: mu0.weights(),
        states,
        forces,
        transport_speed: vec![1.0; steps + 1],
        dim: mu0.dim(),
        force_tag: force.tag(),
    })
}

/// Quadrature rule for [`path_action_with`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Quadrature {
    /// Composite Simpson; a 3/8 panel closes an odd interval count.
    Simpson,
    Trapezoid,
}

fn integrate(times: &[f64], f: &[f64], rule: Quadrature) -> f64 {
    let n = times.len() - 1;
    let trap = |a: usize, b: usize| -> f64 { (a..b).map(|k| 0.5 * (times[k + 1] - times[k]) * (f[k] + f[k + 1])).sum() };
    match rule {
        Quadrature::Trapezoid => trap(0, n),
        Quadrature::Simpson => {
            if n < 2 {
                return trap(0, n);
            }
            let simpson_end = if n % 2 == 0 { n } else { n - 3 };
            let mut s = 0.0;
            let mut k = 0;
            while k + 2 <= simpson_end {
                let h = 0.5 * (times[k + 2] - times[k]);
                s += h / 3.0 * (f[k] + 4.0 * f[k + 1] + f[k + 2]);
                k += 2;
            }
            if simpson_end < n {
                let h = (times[n] - times[n - 3]) / 3.0;
                s += 3.0 * h / 8.0 * (f[n - 3] + 3.0 * f[n - 2] + 3.0 * f[n - 1] + f[n]);
            }
            s
        }
    }
}

/// `(t1 − t0) ∫ ‖F_t‖²_{L²(μ_t)} dt` by Simpson's rule on the grid.
pub fn path_action(traj: &Trajectory) -> Result<f64> {
    path_action_with(traj, Quadrature::Simpson)
}

pub fn path_action_with(traj: &Trajectory, rule: Quadrature) -> Result<f64> {
    if traj.forces.len() != traj.times.len() || traj.times.len() < 2 {
        return Err(Error::InsufficientSamples("force samples missing".into()));
    }
    let sq: Vec<f64> = traj.force_norms().iter().map(|n| n * n).collect();
    Ok((traj.end() - traj.start()) * integrate(&traj.times, &sq, rule))
}

/// `∫ ‖F_r‖_{L²(μ_r)} dr` between grid indices `i0 ≤ i1`, trapezoidal.
pub fn force_norm_integral(traj: &Trajectory, i0: usize, i1: usize) -> f64 {
    let norms = traj.force_norms();
    integrate(&traj.times[i0..=i1], &norms[i0..=i1], Quadrature::Trapezoid)
}

/// Per-time check of the velocity and position moment bounds.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentRow {
    pub t: f64,
    pub v_norm: f64,
    pub v_bound: f64,
    pub x_norm: f64,
    pub x_bound: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MomentReport {
    pub rows: Vec<MomentRow>,
    pub slack: f64,
    /// Largest `norm − bound` over rows and both moments.
    pub worst_excess: f64,
}

impl MomentReport {
    pub fn holds(&self) -> bool {
        self.worst_excess <= self.slack
    }
}

/// Checks, from the first grid time `a`,
/// `‖v‖_t ≤ ‖v‖_a + ∫ₐᵗ ‖F‖` and
/// `‖x‖_t ≤ ‖x‖_a + ∫ₐᵗ λ_s (‖v‖_a + ∫ₐˢ ‖F‖) ds`,
/// which for `λ ≡ 1` is `‖x‖_a + (t − a)‖v‖_a + ∫ₐᵗ (t − s)‖F_s‖ ds`.
/// Violations up to `10 dt² (1 + scale)` are attributed to discretisation.
pub fn moment_report(traj: &Trajectory) -> MomentReport {
    let (vs, xs) = traj.second_moments();
    let norms = traj.force_norms();
    let n = traj.len();
    let mut force_int = vec![0.0; n];
    let mut x_int = vec![0.0; n];
    for k in 1..n {
        let h = traj.times[k] - traj.times[k - 1];
        force_int[k] = force_int[k - 1] + 0.5 * h * (norms[k - 1] + norms[k]);
        let g0 = traj.transport_speed[k - 1] * (vs[0] + force_int[k - 1]);
        let g1 = traj.transport_speed[k] * (vs[0] + force_int[k]);
        x_int[k] = x_int[k - 1] + 0.5 * h * (g0 + g1);
    }
    let mut rows = Vec::with_capacity(n);
    let mut worst = f64::NEG_INFINITY;
    let mut scale = 0.0_f64;
    for k in 0..n {
        let row = MomentRow {
            t: traj.times[k],
            v_norm: vs[k],
            v_bound: vs[0] + force_int[k],
            x_norm: xs[k],
            x_bound: xs[0] + x_int[k],
        };
        worst = worst.max(row.v_norm - row.v_bound).max(row.x_norm - row.x_bound);
        scale = scale.max(row.v_bound).max(row.x_bound);
        rows.push(row);
    }
    let dt = traj.dt();
    MomentReport { rows, slack: 10.0 * dt * dt * (1.0 + scale), worst_excess: worst }
}

/// `|⟨v⟩_t|` and `‖v‖_{L²(μ_t)}`.
pub fn velocity_summary(mu: &DiscreteMeasure) -> (f64, f64) {
    (norm(&mu.mean_velocity()), mu.velocity_second_moment().sqrt())
}
