//! Particle-level kinetic geometry.
//!
//! Everything here is closed form: the cubic connecting two phase states
//! with minimal mean squared acceleration, the fixed-horizon discrepancy
//! `d̃_T`, its horizon-free relaxation `d̃`, the lower-semicontinuous
//! envelope `d`, and free transport `G_T(x, v) = (x + T v, v)`.

use alloc::format;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{Error, Result};
use crate::linalg::{add, axpy, dot, norm, norm_sq, sub};

/// Relative factor used to decide whether two positions coincide.
pub const POSITION_EPS: f64 = 1e-12;

/// A point `(x, v)` of phase space.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseState {
    x: Vec<f64>,
    v: Vec<f64>,
}

impl PhaseState {
    pub fn new(x: Vec<f64>, v: Vec<f64>) -> Result<Self> {
        if x.len() != v.len() {
            return Err(Error::DimensionMismatch { expected: x.len(), found: v.len() });
        }
        if x.is_empty() {
            return Err(Error::ZeroDimension);
        }
        if x.iter().chain(v.iter()).any(|c| !c.is_finite()) {
            return Err(Error::NonFinite("phase state"));
        }
        Ok(Self { x, v })
    }

    /// One-dimensional state, mostly for tests and examples.
    pub fn scalar(x: f64, v: f64) -> Self {
        Self { x: alloc::vec![x], v: alloc::vec![v] }
    }

    pub(crate) fn from_parts_unchecked(x: Vec<f64>, v: Vec<f64>) -> Self {
        debug_assert_eq!(x.len(), v.len());
        Self { x, v }
    }

    pub fn x(&self) -> &[f64] {
        &self.x
    }

    pub fn v(&self) -> &[f64] {
        &self.v
    }

    pub fn dim(&self) -> usize {
        self.x.len()
    }

    /// Euclidean distance in `R^{2n}`.
    pub fn phase_distance(&self, other: &PhaseState) -> f64 {
        (crate::linalg::dist_sq(&self.x, &other.x) + crate::linalg::dist_sq(&self.v, &other.v)).sqrt()
    }

    fn check_dim(&self, other: &PhaseState) -> Result<()> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), found: other.dim() });
        }
        Ok(())
    }
}

/// Optimal horizon of a pair of states or of a coupling.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OptimalTime {
    /// Coincident positions; any horizon works and `0` is the convention.
    Zero,
    /// The infimum over horizons is attained at this strictly positive value.
    Finite(f64),
    /// The infimum is only approached as the horizon grows without bound.
    Infinite,
}

impl OptimalTime {
    pub fn finite(self) -> Option<f64> {
        match self {
            OptimalTime::Finite(t) => Some(t),
            _ => None,
        }
    }
}

/// Degree-three trajectory `α(t) = a3 t³ + a2 t² + a1 t + a0` on `[0, T]`.
///
/// The endpoint states are stored alongside the coefficients so evaluation
/// at `0` and `T` returns them bit for bit.
#[derive(Debug, Clone, PartialEq)]
pub struct CubicSpline {
    a3: Vec<f64>,
    a2: Vec<f64>,
    a1: Vec<f64>,
    a0: Vec<f64>,
    horizon: f64,
    src: PhaseState,
    dst: PhaseState,
}

impl CubicSpline {
    /// The unique minimiser of `T ∫ |α''|²` with `(α, α')(0) = src` and
    /// `(α, α')(T) = dst`.
    pub fn connect(src: &PhaseState, dst: &PhaseState, horizon: f64) -> Result<Self> {
        src.check_dim(dst)?;
        check_horizon(horizon)?;
        let t = horizon;
        let dx = sub(&dst.x, &src.x);
        let s = add(&src.v, &dst.v);
        let a3 = s.iter().zip(&dx).map(|(si, di)| si / (t * t) - 2.0 * di / (t * t * t)).collect();
        let a2 = dx
            .iter()
            .zip(src.v.iter().zip(&dst.v))
            .map(|(di, (vi, wi))| 3.0 * di / (t * t) - (2.0 * vi + wi) / t)
            .collect();
        Ok(Self {
            a3,
            a2,
            a1: src.v.clone(),
            a0: src.x.clone(),
            horizon,
            src: src.clone(),
            dst: dst.clone(),
        })
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn source(&self) -> &PhaseState {
        &self.src
    }

    pub fn target(&self) -> &PhaseState {
        &self.dst
    }

    /// Coefficients `[a3, a2, a1, a0]`.
    pub fn coefficients(&self) -> [&[f64]; 4] {
        [&self.a3, &self.a2, &self.a1, &self.a0]
    }

    /// `(α(t), α'(t))` for `t ∈ [0, T]`.
    pub fn eval(&self, t: f64) -> Result<PhaseState> {
        if !(0.0..=self.horizon).contains(&t) {
            return Err(Error::TimeOutOfRange { t, start: 0.0, end: self.horizon });
        }
        if t == 0.0 {
            return Ok(self.src.clone());
        }
        if t == self.horizon {
            return Ok(self.dst.clone());
        }
        Ok(self.eval_unchecked(t))
    }

    pub(crate) fn eval_unchecked(&self, t: f64) -> PhaseState {
        let n = self.a0.len();
        let mut x = Vec::with_capacity(n);
        let mut v = Vec::with_capacity(n);
        for i in 0..n {
            x.push(((self.a3[i] * t + self.a2[i]) * t + self.a1[i]) * t + self.a0[i]);
            v.push((3.0 * self.a3[i] * t + 2.0 * self.a2[i]) * t + self.a1[i]);
        }
        PhaseState { x, v }
    }

    /// `α''(t)`, affine in `t`. Not range checked.
    pub fn acceleration(&self, t: f64) -> Vec<f64> {
        self.a3.iter().zip(&self.a2).map(|(c3, c2)| 6.0 * c3 * t + 2.0 * c2).collect()
    }

    /// `T ∫_0^T |α''(t)|² dt`.
    ///
    /// With `p = α''(0)` and `q = α''(T)` the integrand is the squared norm
    /// of an affine function, so the integral is `T (|p|² + |q|² + |p+q|²) / 6`.
    pub fn action(&self) -> f64 {
        let p = self.acceleration(0.0);
        let q = self.acceleration(self.horizon);
        let pq = add(&p, &q);
        self.horizon * self.horizon * (norm_sq(&p) + norm_sq(&q) + norm_sq(&pq)) / 6.0
    }
}

fn check_horizon(t: f64) -> Result<()> {
    if !(t > 0.0) || !t.is_finite() {
        return Err(Error::NonPositiveTime(t));
    }
    Ok(())
}

/// Absolute tolerance below which `|y - x|` counts as zero.
pub fn position_tolerance(x: &[f64], y: &[f64]) -> f64 {
    POSITION_EPS * (1.0 + norm(x) + norm(y))
}

fn positions_coincide(x: &[f64], y: &[f64]) -> bool {
    norm(&sub(y, x)) <= position_tolerance(x, y)
}

/// `12 |(y - x)/T - (v + w)/2|² + |w - v|²`.
pub fn tilde_dt_sq(src: &PhaseState, dst: &PhaseState, horizon: f64) -> Result<f64> {
    src.check_dim(dst)?;
    check_horizon(horizon)?;
    let mut drift = 0.0;
    let mut jump = 0.0;
    for i in 0..src.dim() {
        let r = (dst.x[i] - src.x[i]) / horizon - 0.5 * (src.v[i] + dst.v[i]);
        let dv = dst.v[i] - src.v[i];
        drift += r * r;
        jump += dv * dv;
    }
    Ok(12.0 * drift + jump)
}

/// Minimising horizon of `T ↦ d̃_T(src, dst)`.
pub fn optimal_time_point(src: &PhaseState, dst: &PhaseState) -> OptimalTime {
    let dx = sub(&dst.x, &src.x);
    if positions_coincide(&src.x, &dst.x) {
        return OptimalTime::Zero;
    }
    let s = add(&src.v, &dst.v);
    let b = dot(&dx, &s);
    if b > 0.0 {
        OptimalTime::Finite(2.0 * norm_sq(&dx) / b)
    } else {
        OptimalTime::Infinite
    }
}

/// `d̃² = inf_T d̃_T²`; when positions differ the infimum uses the unit
/// direction of `y - x`, otherwise it is `3|v+w|² + |w-v|²`.
pub fn tilde_d_sq(src: &PhaseState, dst: &PhaseState) -> f64 {
    let dx = sub(&dst.x, &src.x);
    let s = add(&src.v, &dst.v);
    let jump = crate::linalg::dist_sq(&dst.v, &src.v);
    if positions_coincide(&src.x, &dst.x) {
        return 3.0 * norm_sq(&s) + jump;
    }
    let proj = dot(&dx, &s) / norm(&dx);
    let proj = proj.max(0.0);
    (3.0 * norm_sq(&s) - 3.0 * proj * proj + jump).max(0.0)
}

/// Second-order discrepancy `d²`: same as `d̃²` when positions differ,
/// `|w - v|²` when they coincide.
pub fn d_sq(src: &PhaseState, dst: &PhaseState) -> f64 {
    if positions_coincide(&src.x, &dst.x) {
        return crate::linalg::dist_sq(&dst.v, &src.v);
    }
    tilde_d_sq(src, dst)
}

/// `G_T(x, v) = (x + T v, v)`.
pub fn free_transport(state: &PhaseState, horizon: f64) -> Result<PhaseState> {
    if !(horizon >= 0.0) {
        return Err(Error::NegativeTime(horizon));
    }
    Ok(PhaseState { x: axpy(&state.x, horizon, &state.v), v: state.v.clone() })
}

/// Which of the zero-discrepancy cases a pair falls into.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ZeroClass {
    /// `dst = G_T(src)` for this `T ≥ 0`.
    FreeTransport(f64),
    /// Distinct positions, both velocities vanish.
    BothRest,
    /// Neither; carries `d²`.
    Positive(f64),
}

/// Classify a pair against the zero set of `d`, all comparisons within `tol`.
pub fn classify_zero(src: &PhaseState, dst: &PhaseState, tol: f64) -> ZeroClass {
    let close = |a: &[f64], b: &[f64]| a.iter().zip(b).all(|(p, q)| (p - q).abs() <= tol);
    let still = |a: &[f64]| a.iter().all(|c| c.abs() <= tol);
    let vn = norm_sq(&src.v);
    if still(&src.v) && still(&dst.v) {
        if close(&src.x, &dst.x) {
            return ZeroClass::FreeTransport(0.0);
        }
        return ZeroClass::BothRest;
    }
    if vn > 0.0 && close(&src.v, &dst.v) {
        // G_T(src) = dst is affine in T, least squares gives the only candidate.
        let t = dot(&sub(&dst.x, &src.x), &src.v) / vn;
        if t >= -tol {
            let t = t.max(0.0);
            let image = axpy(&src.x, t, &src.v);
            if close(&image, &dst.x) {
                return ZeroClass::FreeTransport(t);
            }
        }
    }
    ZeroClass::Positive(d_sq(src, dst))
}

/// Forward difference quotients `d(γ(t), γ(t+h)) / h` of a sampled curve.
///
/// Sample times must contain `t` and every `t + h` (matched to within
/// `1e-9 (1 + |t|)`).
pub fn curve_d_derivative(samples: &[(f64, PhaseState)], t: f64, h_list: &[f64]) -> Result<Vec<f64>> {
    let find = |time: f64| -> Result<&PhaseState> {
        let tol = 1e-9 * (1.0 + time.abs());
        samples
            .iter()
            .find(|(s, _)| (s - time).abs() <= tol)
            .map(|(_, st)| st)
            .ok_or_else(|| Error::InsufficientSamples(format!("no sample at time {time}")))
    };
    let base = find(t)?;
    let mut out = Vec::with_capacity(h_list.len());
    for &h in h_list {
        if !(h > 0.0) {
            return Err(Error::InvalidArgument(format!("step {h} must be positive")));
        }
        let next = find(t + h)?;
        base.check_dim(next)?;
        out.push(d_sq(base, next).sqrt() / h);
    }
    Ok(out)
}
