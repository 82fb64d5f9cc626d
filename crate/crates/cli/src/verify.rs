//! Verification suites run by `kinetic-ot verify`.

use std::fmt;

use kinetic_ot_core::dynamics::{
    build_dynamical_plan, moment_report, monge_mather_check, path_action, path_action_with, physicality_check,
    vlasov_integrate, ForceField, Quadrature, SplineEnsemble,
};
use kinetic_ot_core::measures::{plan_moments, pushforward_free_transport};
use kinetic_ot_core::solver::{brute_force_oracle, cost_tilde_c, detect_free_transport, solve_d, solve_fixed_t};
use kinetic_ot_core::{Atom, DiscreteMeasure, FreeTransportMatch, OptimalTime, PhaseState, SolverOptions};
use rand::Rng;

use crate::error::CliResult;
use crate::scenarios;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Suite {
    #[value(name = "paper-examples")]
    WorkedExamples,
    MongeMather,
    Moments,
    BenamouBrenier,
    All,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    fn new(name: &str, passed: bool, detail: String) -> Self {
        Self { name: name.into(), passed, detail }
    }
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {}: {}", if self.passed { "PASS" } else { "FAIL" }, self.name, self.detail)
    }
}

pub fn run_suite(suite: Suite, seed: u64) -> CliResult<Vec<Check>> {
    Ok(match suite {
        Suite::WorkedExamples => worked_examples()?,
        Suite::MongeMather => monge_mather(seed, 200)?,
        Suite::Moments => moments(seed)?,
        Suite::BenamouBrenier => benamou_brenier(seed, 20)?,
        Suite::All => {
            let mut all = worked_examples()?;
            all.extend(monge_mather(seed, 200)?);
            all.extend(moments(seed)?);
            all.extend(benamou_brenier(seed, 20)?);
            all
        }
    })
}

fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * (1.0 + b.abs())
}

/// Closed-form examples: non-unique optima, zero discrepancy, the factor-two
/// curve and the circle shifts.
pub fn worked_examples() -> CliResult<Vec<Check>> {
    let opts = SolverOptions::default();
    let mut out = Vec::new();

    let (mu, nu) = scenarios::nonunique_pair();
    let d = solve_d(&mu, &nu, &opts)?;
    out.push(Check::new("nonunique-cost", (d.cost_sq - 30.0).abs() <= 1e-8, format!("cost_sq = {:.12}", d.cost_sq)));
    let o = brute_force_oracle(&mu, &nu, &opts)?;
    let mut times: Vec<f64> = o.optima.iter().filter_map(|(_, t)| t.finite()).collect();
    times.sort_by(f64::total_cmp);
    let ok = o.optima.len() == 2 && times.len() == 2 && rel_close(times[0], 1.0, 1e-9) && rel_close(times[1], 2.0, 1e-9);
    out.push(Check::new("nonunique-optima", ok, format!("{} optima, horizons {times:?}", o.optima.len())));

    let (p, q) = scenarios::random5_pair();
    let s = solve_d(&p, &q, &opts)?;
    let o = brute_force_oracle(&p, &q, &opts)?;
    out.push(Check::new(
        "random5-oracle",
        (s.cost_sq - o.best.cost_sq).abs() <= 1e-9,
        format!("solver {:.12} oracle {:.12}", s.cost_sq, o.best.cost_sq),
    ));
    out.push(Check::new("generic-positive", s.cost_sq > 1e-2, format!("cost_sq = {:.6}", s.cost_sq)));

    let pushed = pushforward_free_transport(&p, 0.7)?;
    let z = solve_d(&p, &pushed, &opts)?;
    let hit = matches!(detect_free_transport(&p, &pushed, 1e-9), Some(FreeTransportMatch::Time(t)) if (t - 0.7).abs() <= 1e-8);
    out.push(Check::new("free-transport-zero", z.cost_sq <= 1e-10 && hit, format!("cost_sq = {:.3e}", z.cost_sq)));

    let rest = |xs: &[f64]| {
        DiscreteMeasure::uniform(xs.iter().map(|&x| PhaseState::scalar(x, 0.0)).collect()).expect("nonempty")
    };
    let (a, b) = (rest(&[0.0, 1.0, 3.0]), rest(&[3.0, 0.0, 1.0]));
    let z = solve_d(&a, &b, &opts)?;
    let hit = matches!(detect_free_transport(&a, &b, 1e-9), Some(FreeTransportMatch::BothRest));
    out.push(Check::new("rest-pair-zero", z.cost_sq <= 1e-10 && hit, format!("cost_sq = {:.3e}", z.cost_sq)));

    let eps = [1e-2, 1e-3, 1e-4];
    let ratios = eps.iter().map(|&e| scenarios::factor_two(e).map(|f| f.ratio)).collect::<CliResult<Vec<f64>>>()?;
    let expected = 0.36 / 0.22;
    let ok = (ratios[0] - expected).abs() <= 1e-3 && ratios.windows(2).all(|w| w[1] > w[0]) && ratios[2] < 2.0;
    out.push(Check::new("factor-two", ok, format!("ratios {ratios:?}")));

    let mut shift = Vec::new();
    for n in [16, 64, 256] {
        let c = scenarios::circle(n);
        shift.push(cost_tilde_c(&plan_moments(&c, &c, &scenarios::shift_coupling(n))?));
    }
    let c16 = scenarios::circle(16);
    let ident = cost_tilde_c(&plan_moments(&c16, &c16, &kinetic_ot_core::Coupling::from_permutation(&(0..16).collect::<Vec<_>>())?)?);
    let ok = shift.windows(2).all(|w| w[1] < w[0]) && shift[2] < 0.02 && shift[2] > 0.0 && ident > 1.0;
    out.push(Check::new("circle-shifts", ok, format!("shift costs {shift:?}, identity {ident:.6}")));
    Ok(out)
}

/// Ensembles from oracle-optimal plans never collide; the packaged
/// crossing ensemble does.
pub fn monge_mather(seed: u64, count: usize) -> CliResult<Vec<Check>> {
    let opts = SolverOptions::default();
    let (mut checked, mut skipped, mut failures) = (0, 0, Vec::new());
    let mut min_sep = f64::INFINITY;
    for (k, (mu, nu)) in scenarios::oracle_instances(seed, count).into_iter().enumerate() {
        let o = brute_force_oracle(&mu, &nu, &opts)?;
        let OptimalTime::Finite(t) = o.best.optimal_time else {
            skipped += 1;
            continue;
        };
        let e = build_dynamical_plan(&mu, &nu, &o.best.plan, t)?;
        let rep = monge_mather_check(&e, 50, 0.0);
        checked += 1;
        min_sep = min_sep.min(rep.min_separation);
        if !rep.passed() || !(rep.min_separation > 0.0) {
            failures.push(k);
        }
    }
    let mut out = vec![Check::new(
        "optimal-ensembles",
        failures.is_empty(),
        format!("{checked} checked, {skipped} without finite horizon, min separation {min_sep:.3e}, failures {failures:?}"),
    )];
    let rep = monge_mather_check(&scenarios::crossing_ensemble(), 50, 1e-9);
    out.push(Check::new(
        "crossing-flagged",
        rep.violation.is_some(),
        format!("min separation {:.3e} at {:?}", rep.min_separation, rep.closest),
    ));
    Ok(out)
}

/// Moment bounds and the physicality bound on every packaged scenario.
pub fn moments(seed: u64) -> CliResult<Vec<Check>> {
    let mut rng = scenarios::rng(seed);
    let mut out = Vec::new();
    for sc in scenarios::all_scenarios(seed)? {
        let rep = moment_report(&sc.traj);
        out.push(Check::new(
            &format!("moments/{}", sc.name),
            rep.holds(),
            format!("worst excess {:.3e}, slack {:.3e}", rep.worst_excess, rep.slack),
        ));
        let n = sc.traj.len();
        let pairs: Vec<(usize, usize)> = (0..20)
            .map(|_| {
                let i = rng.random_range(0..n - 1);
                (i, rng.random_range(i + 1..n))
            })
            .collect();
        let rows = physicality_check(&sc.traj, &pairs)?;
        let bad = rows.iter().filter(|r| !r.holds()).count();
        let margin = rows.iter().map(|r| r.lhs - r.rhs).fold(f64::NEG_INFINITY, f64::max);
        out.push(Check::new(
            &format!("physicality/{}", sc.name),
            bad == 0,
            format!("{bad} of {} pairs violate, largest lhs - rhs {margin:.3e}", rows.len()),
        ));
    }
    Ok(out)
}

/// Initial atoms and replay force reproducing an ensemble under the Vlasov flow.
pub fn spline_replay(e: &SplineEnsemble) -> CliResult<(DiscreteMeasure, ForceField)> {
    let atoms: Vec<Atom> = e.entries().iter().map(|en| Atom { state: en.spline.source().clone(), weight: en.mass }).collect();
    let dim = atoms[0].state.dim();
    let starts = DiscreteMeasure::new(dim, atoms)?;
    let force = ForceField::Spline { splines: e.entries().iter().map(|en| en.spline.clone()).collect(), start: 0.0 };
    Ok((starts, force))
}

/// Time steps of the convergence study.
pub const ACTION_STEPS: [f64; 3] = [1e-2, 5e-3, 2.5e-3];

/// Errors of the trapezoidal and Simpson actions of the replayed ensemble.
pub fn action_errors(e: &SplineEnsemble) -> CliResult<(Vec<f64>, Vec<f64>)> {
    let (starts, force) = spline_replay(e)?;
    let exact = e.action();
    let mut trap = Vec::new();
    let mut simpson = Vec::new();
    for dt in ACTION_STEPS {
        let tr = vlasov_integrate(&starts, &force, 0.0, e.horizon(), dt)?;
        trap.push((path_action_with(&tr, Quadrature::Trapezoid)? - exact).abs());
        simpson.push((path_action(&tr)? - exact).abs());
    }
    Ok((trap, simpson))
}

/// Spline action against the fixed-horizon cost, and convergence of the
/// discretised action.
pub fn benamou_brenier(seed: u64, count: usize) -> CliResult<Vec<Check>> {
    let mut worst_identity = 0.0_f64;
    let mut min_order = f64::INFINITY;
    let mut worst_simpson = 0.0_f64;
    for (mu, nu) in scenarios::action_instances(seed, count) {
        let r = solve_fixed_t(&mu, &nu, 1.0)?;
        let e = build_dynamical_plan(&mu, &nu, &r.plan, 1.0)?;
        worst_identity = worst_identity.max((e.action() - r.cost_sq).abs() / r.cost_sq.max(1e-300));
        let (trap, simpson) = action_errors(&e)?;
        for w in trap.windows(2) {
            min_order = min_order.min((w[0] / w[1]).log2());
        }
        worst_simpson = worst_simpson.max(simpson.iter().fold(0.0, |a: f64, b| a.max(*b)) / r.cost_sq.max(1e-300));
    }
    Ok(vec![
        Check::new("action-identity", worst_identity <= 1e-10, format!("worst relative gap {worst_identity:.3e}")),
        Check::new("action-order", min_order >= 1.9, format!("smallest observed trapezoid order {min_order:.4}")),
        Check::new("action-simpson", worst_simpson <= 1e-10, format!("worst relative Simpson error {worst_simpson:.3e}")),
    ])
}
