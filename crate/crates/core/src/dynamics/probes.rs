//! Finite-difference diagnostics on simulated curves.

use alloc::format;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{Error, Result};
use crate::phase::{OptimalTime, PhaseState};
use crate::solver::{solve_d, solve_fixed_t, SolverOptions};

use super::vlasov::{force_norm_integral, velocity_summary, Trajectory};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricProbe {
    pub h: f64,
    /// `d̃_h(μ_t, μ_{t+h}) / h` with the optimal plan at horizon `h`.
    pub ratio_tilde: f64,
    /// `d(μ_t, μ_{t+h}) / h`
    pub ratio_d: f64,
    /// `‖F_t‖_{L²(μ_t)}`
    pub force_norm: f64,
}

/// Difference quotients of the discrepancies along `traj` at time `t`.
pub fn metric_derivative_probe(traj: &Trajectory, t: f64, h_list: &[f64], opts: &SolverOptions) -> Result<Vec<MetricProbe>> {
    let here = traj.measure_at(t)?;
    let force_norm = traj.force_norm_at(t)?;
    h_list
        .iter()
        .map(|&h| {
            check_step(h)?;
            let there = traj.measure_at(t + h)?;
            let tilde = solve_fixed_t(&here, &there, h)?;
            let d = solve_d(&here, &there, opts)?;
            Ok(MetricProbe { h, ratio_tilde: tilde.cost_sq.sqrt() / h, ratio_d: d.cost_sq.sqrt() / h, force_norm })
        })
        .collect()
}

fn check_step(h: f64) -> Result<()> {
    if !(h > 0.0) || !h.is_finite() {
        return Err(Error::InvalidArgument(format!("step {h} must be positive")));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeRatioProbe {
    pub h: f64,
    /// Horizon tag of the `d`-optimal plan between `μ_t` and `μ_{t+h}`.
    pub optimal_time: OptimalTime,
    /// `T_{t,t+h} / h` when the horizon is finite.
    pub ratio: Option<f64>,
    /// `(T_{t,t+h} − h) / h²` when the horizon is finite.
    pub second_order: Option<f64>,
    /// `|⟨v⟩_t|`
    pub mean_velocity: f64,
    /// `‖v‖_{L²(μ_t)}`
    pub velocity_norm: f64,
}

/// Ratio of the optimal horizon between nearby times to their separation.
pub fn optimal_time_ratio_probe(traj: &Trajectory, t: f64, h_list: &[f64], opts: &SolverOptions) -> Result<Vec<TimeRatioProbe>> {
    let here = traj.measure_at(t)?;
    let (mean_velocity, velocity_norm) = velocity_summary(&here);
    h_list
        .iter()
        .map(|&h| {
            check_step(h)?;
            let there = traj.measure_at(t + h)?;
            let r = solve_d(&here, &there, opts)?;
            let tt = r.optimal_time.finite();
            Ok(TimeRatioProbe {
                h,
                optimal_time: r.optimal_time,
                ratio: tt.map(|x| x / h),
                second_order: tt.map(|x| (x - h) / (h * h)),
                mean_velocity,
                velocity_norm,
            })
        })
        .collect()
}

/// Time change `μ̃_s = μ_{τ(s)}` with `τ' = λ`, `τ(t₀) = t₀`.
///
/// The output grid keeps the input spacing and stops at the last `s` with
/// `τ(s)` inside the input interval. Forces become `F̃_s = λ(s) F_{τ(s)}`
/// and the transport speed is multiplied by `λ(s)`.
pub fn reparametrize(traj: &Trajectory, lambda: &dyn Fn(f64) -> f64) -> Result<Trajectory> {
    let ds = traj.dt();
    let t0 = traj.start();
    let end = traj.end();
    let tol = 1e-9 * (1.0 + end.abs());
    let lam = |s: f64| -> Result<f64> {
        let l = lambda(s);
        if !(l > 0.0) || !l.is_finite() {
            return Err(Error::InvalidArgument(format!("time change rate {l} at s = {s} must be positive")));
        }
        Ok(l)
    };
    let mut out = Trajectory {
        times: Vec::new(),
        weights: traj.weights.clone(),
        states: Vec::new(),
        forces: Vec::new(),
        transport_speed: Vec::new(),
        dim: traj.dim,
        force_tag: format!("{} reparametrised", traj.force_tag),
    };
    let mut s = t0;
    let mut tau = t0;
    loop {
        let tau_c = tau.min(end);
        let l = lam(s)?;
        let states: Vec<PhaseState> = traj.states_at(tau_c)?;
        let (f, speed) = traj.forces_at(tau_c)?;
        out.times.push(s);
        out.states.push(states);
        out.forces.push(f.into_iter().map(|fi| fi.into_iter().map(|c| l * c).collect()).collect());
        out.transport_speed.push(l * speed);
        // Simpson step of τ' = λ(s).
        let next = tau + ds / 6.0 * (l + 4.0 * lam(s + 0.5 * ds)? + lam(s + ds)?);
        if next > end + tol {
            break;
        }
        tau = next;
        s = t0 + ds * out.times.len() as f64;
    }
    if out.times.len() < 2 {
        return Err(Error::InsufficientSamples("time change leaves fewer than two grid points".into()));
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhysicalityRow {
    pub s: f64,
    pub t: f64,
    /// `d̃_{t−s}(μ_s, μ_t)`
    pub lhs: f64,
    /// `2 ∫ₛᵗ ‖F_r‖ dr`
    pub rhs: f64,
    pub slack: f64,
}

impl PhysicalityRow {
    pub fn holds(&self) -> bool {
        self.lhs <= self.rhs + self.slack
    }
}

/// Evaluates `d̃_{t−s}(μ_s, μ_t) ≤ 2 ∫ₛᵗ ‖F_r‖ dr` for grid index pairs `i < j`.
pub fn physicality_check(traj: &Trajectory, pairs: &[(usize, usize)]) -> Result<Vec<PhysicalityRow>> {
    let dt = traj.dt();
    pairs
        .iter()
        .map(|&(i, j)| {
            if !(i < j && j < traj.len()) {
                return Err(Error::InvalidArgument(format!("grid pair ({i}, {j}) out of order or range")));
            }
            let (s, t) = (traj.times[i], traj.times[j]);
            let a = traj.measure_at_index(i)?;
            let b = traj.measure_at_index(j)?;
            let lhs = solve_fixed_t(&a, &b, t - s)?.cost_sq.sqrt();
            let rhs = 2.0 * force_norm_integral(traj, i, j);
            Ok(PhysicalityRow { s, t, lhs, rhs, slack: 10.0 * dt * dt * (1.0 + rhs) })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::vlasov::{vlasov_integrate, ForceField};
    use crate::measures::DiscreteMeasure;
    use alloc::vec;

    fn st(x: f64, v: f64) -> PhaseState {
        PhaseState::scalar(x, v)
    }

    #[test]
    fn free_flow_probes() {
        let mu = DiscreteMeasure::uniform(vec![st(0.0, 1.0), st(1.0, 0.5)]).unwrap();
        let tr = vlasov_integrate(&mu, &ForceField::Free, 0.0, 1.0, 0.01).unwrap();
        let opts = SolverOptions::default();
        for p in metric_derivative_probe(&tr, 0.2, &[0.2, 0.1], &opts).unwrap() {
            assert!(p.ratio_tilde < 1e-6 && p.ratio_d < 1e-6 && p.force_norm == 0.0);
        }
        for p in optimal_time_ratio_probe(&tr, 0.2, &[0.2, 0.1], &opts).unwrap() {
            assert!((p.ratio.unwrap() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn harmonic_single_particle_ratio_converges() {
        let mu = DiscreteMeasure::dirac(st(1.0, 0.0));
        let tr = vlasov_integrate(&mu, &ForceField::Harmonic, 0.0, 1.0, 1e-3).unwrap();
        let p = metric_derivative_probe(&tr, 0.0, &[0.2, 0.1, 0.05], &SolverOptions::default()).unwrap();
        let errs: Vec<f64> = p.iter().map(|q| (q.ratio_tilde - q.force_norm).abs()).collect();
        assert!((p[0].force_norm - 1.0).abs() < 1e-12);
        assert!(errs[0] > errs[1] && errs[1] > errs[2], "{errs:?}");
        let r = optimal_time_ratio_probe(&tr, 0.3, &[0.2, 0.1, 0.05], &SolverOptions::default()).unwrap();
        let e: Vec<f64> = r.iter().map(|q| (q.ratio.unwrap() - 1.0).abs()).collect();
        assert!(e[0] > e[1] && e[1] > e[2], "{e:?}");
    }

    #[test]
    fn unit_rate_is_identity() {
        let mu = DiscreteMeasure::dirac(st(1.0, 0.0));
        let tr = vlasov_integrate(&mu, &ForceField::Harmonic, 0.0, 1.0, 0.01).unwrap();
        let same = reparametrize(&tr, &|_| 1.0).unwrap();
        assert_eq!(same.len(), tr.len());
        for (a, b) in same.states.iter().zip(&tr.states) {
            assert!(a[0].phase_distance(&b[0]) < 1e-12);
        }
        assert!(reparametrize(&tr, &|_| -1.0).is_err());
    }

    #[test]
    fn doubled_rate_halves_the_clock() {
        let mu = DiscreteMeasure::dirac(st(1.0, 0.0));
        let tr = vlasov_integrate(&mu, &ForceField::Harmonic, 0.0, 2.0, 0.01).unwrap();
        let fast = reparametrize(&tr, &|_| 2.0).unwrap();
        assert_eq!(fast.len(), 101);
        assert!((fast.end() - 1.0).abs() < 1e-12);
        let s = &fast.states[50][0];
        assert!((s.x()[0] - 1f64.cos()).abs() < 1e-9);
        assert!((fast.force_norm_at(0.5).unwrap() - 2.0 * 1f64.cos()).abs() < 1e-9);
    }

    #[test]
    fn physicality_on_harmonic_ensemble() {
        let mu = DiscreteMeasure::uniform(vec![st(1.0, 0.0), st(-0.5, 1.0), st(0.2, -0.3)]).unwrap();
        let tr = vlasov_integrate(&mu, &ForceField::Harmonic, 0.0, 3.0, 0.01).unwrap();
        let rows = physicality_check(&tr, &[(0, 100), (10, 250), (120, 121)]).unwrap();
        assert!(rows.iter().all(PhysicalityRow::holds), "{rows:?}");
        assert!(physicality_check(&tr, &[(5, 5)]).is_err());
    }
}
