//! Plan-level costs and the discrepancy solvers.
//!
//! A coupling `π` enters every cost only through its moments
//! `(A, B, C, D)`:
//!
//! * `c̃_T(π) = 12A/T² − 12B/T + 3C + D`
//! * `c̃(π) = inf_T c̃_T(π) = 3C − 3B₊²/A + D`, or `3C + D` when `A = 0`
//! * `c(π)`, the envelope, which replaces the `A = 0` branch by `D`.
//!
//! `c̃_T` is linear in `π` and is minimised exactly by linear programming.
//! `c` is concave, so its minimum over the transportation polytope sits at
//! a vertex. [`solve_d`] searches vertices by alternating between the plan
//! and the horizon from several starts, and compares against the two
//! degenerate regimes (coincident positions, infinite horizon).

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::linalg::{add, dist_sq, norm_sq};
use crate::measures::{
    match_point_sets, plan_moments_unchecked, product_coupling, Coupling, DiscreteMeasure, PlanMoments,
};
use crate::phase::{tilde_dt_sq, OptimalTime};
use crate::transport::{enumerate_vertices, solve_linear, transport_simplex};

/// `12A/T² − 12B/T + 3C + D`
pub fn cost_tilde_c_t(m: &PlanMoments, horizon: f64) -> Result<f64> {
    if !(horizon > 0.0) || !horizon.is_finite() {
        return Err(Error::NonPositiveTime(horizon));
    }
    let t = horizon;
    Ok((12.0 * m.a / (t * t) - 12.0 * m.b / t + 3.0 * m.c + m.d).max(0.0))
}

/// `inf_{T>0} c̃_T`
pub fn cost_tilde_c(m: &PlanMoments) -> f64 {
    if m.a <= m.a_floor() {
        return 3.0 * m.c + m.d;
    }
    let bp = m.b.max(0.0);
    (3.0 * m.c - 3.0 * bp * bp / m.a + m.d).max(0.0)
}

/// Lower-semicontinuous envelope of [`cost_tilde_c`].
pub fn cost_c(m: &PlanMoments) -> f64 {
    if m.a <= m.a_floor() {
        return m.d.max(0.0);
    }
    cost_tilde_c(m)
}

/// Horizon attaining [`cost_tilde_c`]: `2A/B` when `B > 0`.
pub fn optimal_time_plan(m: &PlanMoments) -> OptimalTime {
    if m.a <= m.a_floor() {
        OptimalTime::Zero
    } else if m.b > 0.0 {
        OptimalTime::Finite(2.0 * m.a / m.b)
    } else {
        OptimalTime::Infinite
    }
}

/// Which regime produced a result.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    EqualPositions,
    FiniteT,
    InfiniteT,
    FixedT,
}

impl Regime {
    pub fn as_str(self) -> &'static str {
        match self {
            Regime::EqualPositions => "equal_positions",
            Regime::FiniteT => "finite_T",
            Regime::InfiniteT => "infinite_T",
            Regime::FixedT => "fixed_T",
        }
    }

    fn of(t: OptimalTime) -> Self {
        match t {
            OptimalTime::Zero => Regime::EqualPositions,
            OptimalTime::Finite(_) => Regime::FiniteT,
            OptimalTime::Infinite => Regime::InfiniteT,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverOptions {
    /// Initial horizons of the alternating runs.
    pub t_grid: Vec<f64>,
    /// Also start from the optimal horizon of `μ ⊗ ν`.
    pub product_start: bool,
    pub max_alt_iters: usize,
    /// Relative decrease of `c̃` below which an alternating run stops.
    pub cost_tol: f64,
    /// Largest instance handled by [`brute_force_oracle`].
    pub oracle_cap: usize,
    /// Relative tolerance for coincident positions.
    pub position_tol: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            t_grid: log_grid(1e-2, 1e2, 15),
            product_start: true,
            max_alt_iters: 50,
            cost_tol: 1e-10,
            oracle_cap: 8,
            position_tol: 1e-12,
        }
    }
}

impl SolverOptions {
    fn validate(&self) -> Result<()> {
        if self.t_grid.is_empty() && !self.product_start {
            return Err(Error::InvalidArgument("empty horizon grid".into()));
        }
        if self.t_grid.iter().any(|t| !(*t > 0.0) || !t.is_finite()) {
            return Err(Error::InvalidArgument("horizon grid must be positive".into()));
        }
        if !(self.cost_tol > 0.0) || !(self.position_tol > 0.0) || self.max_alt_iters == 0 {
            return Err(Error::InvalidArgument("tolerances and budgets must be positive".into()));
        }
        Ok(())
    }
}

/// `n` points log-spaced over `[lo, hi]`.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    #[allow(unused_imports)]
    use num_traits::Float;
    if n == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..n).map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp()).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveResult {
    pub cost_sq: f64,
    pub optimal_time: OptimalTime,
    pub regime: Regime,
    pub plan: Coupling,
    pub moments: PlanMoments,
    /// Plan/horizon updates summed over all alternating runs.
    pub iterations: usize,
    pub restarts_used: usize,
    /// Some run hit `max_alt_iters` before converging.
    pub budget_exhausted: bool,
}

fn check_dims(mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> Result<()> {
    if mu.dim() != nu.dim() {
        return Err(Error::DimensionMismatch { expected: mu.dim(), found: nu.dim() });
    }
    Ok(())
}

fn pair_cost(mu: &DiscreteMeasure, nu: &DiscreteMeasure, f: impl Fn(usize, usize) -> f64) -> Vec<f64> {
    let mut c = Vec::with_capacity(mu.len() * nu.len());
    for i in 0..mu.len() {
        for j in 0..nu.len() {
            c.push(f(i, j));
        }
    }
    c
}

/// Exact minimiser of `c̃_T` over couplings.
pub fn solve_fixed_t(mu: &DiscreteMeasure, nu: &DiscreteMeasure, horizon: f64) -> Result<SolveResult> {
    check_dims(mu, nu)?;
    if !(horizon > 0.0) || !horizon.is_finite() {
        return Err(Error::NonPositiveTime(horizon));
    }
    let (a, b) = (mu.atoms(), nu.atoms());
    let cost = pair_cost(mu, nu, |i, j| tilde_dt_sq(&a[i].state, &b[j].state, horizon).unwrap_or(f64::INFINITY));
    let plan = solve_linear(mu, nu, &cost)?;
    let moments = plan_moments_unchecked(mu, nu, &plan);
    Ok(SolveResult {
        cost_sq: cost_tilde_c_t(&moments, horizon)?,
        optimal_time: OptimalTime::Finite(horizon),
        regime: Regime::FixedT,
        plan,
        moments,
        iterations: 1,
        restarts_used: 0,
        budget_exhausted: false,
    })
}

/// One plan/horizon update of an alternating run.
#[derive(Debug, Clone, PartialEq)]
pub struct AltStep {
    /// Horizon the plan was optimised for.
    pub horizon: f64,
    /// `c̃_T(P)` at that horizon.
    pub fixed_cost: f64,
    /// `c̃(P)` after re-optimising the horizon.
    pub relaxed_cost: f64,
    pub plan: Coupling,
    pub moments: PlanMoments,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AlternatingRun {
    pub steps: Vec<AltStep>,
    /// Horizon tag of the last plan; `Zero` or `Infinite` end the run.
    pub exit: OptimalTime,
    pub budget_exhausted: bool,
}

impl AlternatingRun {
    /// Step with the smallest `c̃`, earliest on ties.
    pub fn best(&self) -> &AltStep {
        let mut best = &self.steps[0];
        for s in &self.steps[1..] {
            if s.relaxed_cost < best.relaxed_cost {
                best = s;
            }
        }
        best
    }
}

/// Alternate `P ← argmin c̃_T`, `T ← 2A/B` from `horizon`. Each half step
/// minimises one block, so `c̃` never increases along the run.
pub fn alternating_run(mu: &DiscreteMeasure, nu: &DiscreteMeasure, horizon: f64, opts: &SolverOptions) -> Result<AlternatingRun> {
    let mut t = horizon;
    let mut steps: Vec<AltStep> = Vec::new();
    for _ in 0..opts.max_alt_iters {
        let r = solve_fixed_t(mu, nu, t)?;
        let relaxed = cost_tilde_c(&r.moments);
        let next = optimal_time_plan(&r.moments);
        let prev = steps.last().map(|s| s.relaxed_cost);
        steps.push(AltStep { horizon: t, fixed_cost: r.cost_sq, relaxed_cost: relaxed, plan: r.plan, moments: r.moments });
        let OptimalTime::Finite(nt) = next else {
            return Ok(AlternatingRun { steps, exit: next, budget_exhausted: false });
        };
        if let Some(p) = prev {
            if p - relaxed <= opts.cost_tol * (1.0 + p.abs()) {
                return Ok(AlternatingRun { steps, exit: next, budget_exhausted: false });
            }
        }
        t = nt;
    }
    let exit = optimal_time_plan(&steps[steps.len() - 1].moments);
    Ok(AlternatingRun { steps, exit, budget_exhausted: true })
}

/// Outcome of [`detect_free_transport`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FreeTransportMatch {
    /// `ν = (G_T)_# μ`
    Time(f64),
    /// Both velocity marginals are `δ_0`.
    BothRest,
}

/// Recognise the two zero-discrepancy configurations.
pub fn detect_free_transport(mu: &DiscreteMeasure, nu: &DiscreteMeasure, tol: f64) -> Option<FreeTransportMatch> {
    free_transport_plan(mu, nu, tol).map(|(m, _)| m)
}

fn free_transport_plan(mu: &DiscreteMeasure, nu: &DiscreteMeasure, tol: f64) -> Option<(FreeTransportMatch, Coupling)> {
    if mu.dim() != nu.dim() {
        return None;
    }
    let still = |m: &DiscreteMeasure| m.atoms().iter().all(|a| a.state.v().iter().all(|c| c.abs() <= tol));
    if still(mu) && still(nu) {
        // Any coupling is free of cost; the product is the canonical choice.
        let plan = product_coupling(mu, nu).ok()?;
        return Some((FreeTransportMatch::BothRest, plan));
    }
    // The fastest source atom pins T: its image must be some target atom
    // with the same velocity.
    let (i0, src) = mu
        .atoms()
        .iter()
        .enumerate()
        .max_by(|a, b| norm_sq(a.1.state.v()).total_cmp(&norm_sq(b.1.state.v())).then(b.0.cmp(&a.0)))?;
    let v0 = src.state.v();
    let vn = norm_sq(v0);
    if vn <= tol * tol {
        return None;
    }
    let mut candidates: Vec<f64> = nu
        .atoms()
        .iter()
        .filter(|b| b.state.v().iter().zip(v0).all(|(p, q)| (p - q).abs() <= tol))
        .map(|b| {
            let dx = crate::linalg::sub(b.state.x(), src.state.x());
            crate::linalg::dot(&dx, v0) / vn
        })
        .filter(|t| *t >= -tol)
        .map(|t| t.max(0.0))
        .collect();
    candidates.sort_by(f64::total_cmp);
    candidates.dedup();
    let _ = i0;
    let right = crate::measures::phase_keys(nu);
    for t in candidates {
        let left: Vec<(Vec<f64>, f64)> = mu
            .atoms()
            .iter()
            .map(|a| {
                let mut k = crate::linalg::axpy(a.state.x(), t, a.state.v());
                k.extend_from_slice(a.state.v());
                (k, a.weight)
            })
            .collect();
        if let Some(triples) = match_point_sets(&left, &right, tol) {
            let plan = Coupling::from_triples(mu.len(), nu.len(), &triples).ok()?;
            return Some((FreeTransportMatch::Time(t), plan));
        }
    }
    None
}

/// Plan supported on coincident positions that minimises `D`, if the
/// spatial marginals agree as weighted point sets.
fn equal_positions_plan(mu: &DiscreteMeasure, nu: &DiscreteMeasure, tol: f64) -> Result<Option<Coupling>> {
    let xs = |m: &DiscreteMeasure| -> Vec<(Vec<f64>, f64)> { m.atoms().iter().map(|a| (a.state.x().to_vec(), a.weight)).collect() };
    let (left, right) = (xs(mu), xs(nu));
    if match_point_sets(&left, &right, tol).is_none() {
        return Ok(None);
    }
    let close = |p: &[f64], q: &[f64]| p.iter().zip(q).all(|(a, b)| (a - b).abs() <= tol);
    // Sites are clusters of source positions; targets join the first site they match.
    let mut site_of_src: Vec<usize> = Vec::with_capacity(mu.len());
    let mut reps: Vec<&[f64]> = Vec::new();
    for a in mu.atoms() {
        match reps.iter().position(|r| close(r, a.state.x())) {
            Some(s) => site_of_src.push(s),
            None => {
                site_of_src.push(reps.len());
                reps.push(a.state.x());
            }
        }
    }
    let mut site_of_dst = Vec::with_capacity(nu.len());
    for b in nu.atoms() {
        match reps.iter().position(|r| close(r, b.state.x())) {
            Some(s) => site_of_dst.push(s),
            None => return Ok(None),
        }
    }
    let mut dense = vec![0.0; mu.len() * nu.len()];
    for s in 0..reps.len() {
        let rows: Vec<usize> = (0..mu.len()).filter(|&i| site_of_src[i] == s).collect();
        let cols: Vec<usize> = (0..nu.len()).filter(|&j| site_of_dst[j] == s).collect();
        if cols.is_empty() {
            return Ok(None);
        }
        let a: Vec<f64> = rows.iter().map(|&i| mu.atoms()[i].weight).collect();
        let b: Vec<f64> = cols.iter().map(|&j| nu.atoms()[j].weight).collect();
        let cost: Vec<f64> = rows
            .iter()
            .flat_map(|&i| cols.iter().map(move |&j| (i, j)))
            .map(|(i, j)| dist_sq(mu.atoms()[i].state.v(), nu.atoms()[j].state.v()))
            .collect();
        let flow = transport_simplex(&a, &b, &cost)?;
        for (r, &i) in rows.iter().enumerate() {
            for (c, &j) in cols.iter().enumerate() {
                dense[i * nu.len() + j] = flow[r * cols.len() + c];
            }
        }
    }
    Ok(Some(Coupling::from_dense(mu.len(), nu.len(), dense)?))
}

#[derive(Clone, Copy)]
enum Objective {
    Envelope,
    Relaxed,
}

impl Objective {
    fn eval(self, m: &PlanMoments) -> f64 {
        match self {
            Objective::Envelope => cost_c(m),
            Objective::Relaxed => cost_tilde_c(m),
        }
    }
}

struct Search {
    objective: Objective,
    best: Option<(f64, Coupling, PlanMoments)>,
    iterations: usize,
    restarts: usize,
    exhausted: bool,
}

impl Search {
    fn offer(&mut self, mu: &DiscreteMeasure, nu: &DiscreteMeasure, plan: Coupling) {
        let m = plan_moments_unchecked(mu, nu, &plan);
        self.offer_with(plan, m);
    }

    fn offer_with(&mut self, plan: Coupling, m: PlanMoments) {
        let v = self.objective.eval(&m);
        if self.best.as_ref().is_none_or(|(b, _, _)| v < *b) {
            self.best = Some((v, plan, m));
        }
    }

    fn absorb(&mut self, run: AlternatingRun) {
        self.iterations += run.steps.len();
        self.restarts += 1;
        self.exhausted |= run.budget_exhausted;
        for s in run.steps {
            self.offer_with(s.plan, s.moments);
        }
    }

    fn finish(self) -> Result<SolveResult> {
        let (cost_sq, plan, moments) = self.best.ok_or_else(|| Error::LpFailure("no candidate plan".into()))?;
        let optimal_time = optimal_time_plan(&moments);
        Ok(SolveResult {
            cost_sq: cost_sq.max(0.0),
            optimal_time,
            regime: Regime::of(optimal_time),
            plan,
            moments,
            iterations: self.iterations,
            restarts_used: self.restarts,
            budget_exhausted: self.exhausted,
        })
    }
}

fn run_starts(mu: &DiscreteMeasure, nu: &DiscreteMeasure, starts: &[f64], opts: &SolverOptions) -> Result<Vec<AlternatingRun>> {
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        starts.par_iter().map(|&t| alternating_run(mu, nu, t, opts)).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        starts.iter().map(|&t| alternating_run(mu, nu, t, opts)).collect()
    }
}

fn search(mu: &DiscreteMeasure, nu: &DiscreteMeasure, opts: &SolverOptions, objective: Objective) -> Result<SolveResult> {
    check_dims(mu, nu)?;
    opts.validate()?;
    let scale = mu.coordinate_scale().max(nu.coordinate_scale());
    let mut s = Search { objective, best: None, iterations: 0, restarts: 0, exhausted: false };

    if let Some((_, plan)) = free_transport_plan(mu, nu, 1e-9 * (1.0 + scale)) {
        s.offer(mu, nu, plan);
    }
    if let Some(plan) = equal_positions_plan(mu, nu, opts.position_tol * (1.0 + scale))? {
        s.offer(mu, nu, plan);
    }

    let mut starts = opts.t_grid.clone();
    if opts.product_start {
        let prod = product_coupling(mu, nu)?;
        if let OptimalTime::Finite(t) = optimal_time_plan(&plan_moments_unchecked(mu, nu, &prod)) {
            starts.push(t);
        }
    }
    for run in run_starts(mu, nu, &starts, opts)? {
        s.absorb(run);
    }

    // Horizon → ∞: c̃_T → 3C + D, linear in the plan.
    let (a, b) = (mu.atoms(), nu.atoms());
    let cost = pair_cost(mu, nu, |i, j| {
        3.0 * norm_sq(&add(a[i].state.v(), b[j].state.v())) + dist_sq(a[i].state.v(), b[j].state.v())
    });
    let plan = solve_linear(mu, nu, &cost)?;
    let m = plan_moments_unchecked(mu, nu, &plan);
    let restart = optimal_time_plan(&m).finite();
    s.offer_with(plan, m);
    if let Some(t) = restart {
        s.absorb(alternating_run(mu, nu, t, opts)?);
    }
    s.finish()
}

/// `d²(μ, ν)`: the minimum of `c` found over all regimes.
///
/// The problem is a concave minimisation, so this is a local search; the
/// returned value is an upper bound that [`brute_force_oracle`] confirms on
/// small instances.
pub fn solve_d(mu: &DiscreteMeasure, nu: &DiscreteMeasure, opts: &SolverOptions) -> Result<SolveResult> {
    search(mu, nu, opts, Objective::Envelope)
}

/// `d̃²(μ, ν)` through the same search, evaluated with `c̃`. The infimum
/// over couplings need not be attained, so the value is an upper bound.
pub fn solve_tilde_d(mu: &DiscreteMeasure, nu: &DiscreteMeasure, opts: &SolverOptions) -> Result<SolveResult> {
    search(mu, nu, opts, Objective::Relaxed)
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleResult {
    pub best: SolveResult,
    /// Every vertex attaining the minimum (to `1e-9` relative), with its horizon.
    pub optima: Vec<(Coupling, OptimalTime)>,
    pub vertices_examined: usize,
}

fn next_permutation(p: &mut [usize]) -> bool {
    let n = p.len();
    if n < 2 {
        return false;
    }
    let mut i = n - 1;
    while i > 0 && p[i - 1] >= p[i] {
        i -= 1;
    }
    if i == 0 {
        return false;
    }
    let mut j = n - 1;
    while p[j] <= p[i - 1] {
        j -= 1;
    }
    p.swap(i - 1, j);
    p[i..].reverse();
    true
}

/// Global minimum of `c` by exhaustive vertex enumeration.
pub fn brute_force_oracle(mu: &DiscreteMeasure, nu: &DiscreteMeasure, opts: &SolverOptions) -> Result<OracleResult> {
    check_dims(mu, nu)?;
    let (m, k) = (mu.len(), nu.len());
    let plans: Vec<Coupling> = if m == k && m <= opts.oracle_cap && mu.is_uniform() && nu.is_uniform() {
        let mut perm: Vec<usize> = (0..m).collect();
        let mut out = vec![Coupling::from_permutation(&perm)?];
        while next_permutation(&mut perm) {
            out.push(Coupling::from_permutation(&perm)?);
        }
        out
    } else if m + k <= opts.oracle_cap {
        enumerate_vertices(&mu.weights(), &nu.weights())
            .into_iter()
            .map(|p| Coupling::from_dense(m, k, p))
            .collect::<Result<_>>()?
    } else {
        return Err(Error::TooLarge(format!("{m}×{k} exceeds oracle cap {}", opts.oracle_cap)));
    };
    let scored: Vec<(f64, Coupling, PlanMoments)> = plans
        .into_iter()
        .map(|p| {
            let mom = plan_moments_unchecked(mu, nu, &p);
            (cost_c(&mom), p, mom)
        })
        .collect();
    let best_val = scored.iter().map(|s| s.0).fold(f64::INFINITY, f64::min);
    let tol = 1e-9 * (1.0 + best_val.abs());
    let optima: Vec<(Coupling, OptimalTime)> = scored
        .iter()
        .filter(|s| s.0 <= best_val + tol)
        .map(|s| (s.1.clone(), optimal_time_plan(&s.2)))
        .collect();
    let (val, plan, moments) = scored.iter().find(|s| s.0 == best_val).cloned().ok_or(Error::EmptyMeasure)?;
    let optimal_time = optimal_time_plan(&moments);
    Ok(OracleResult {
        best: SolveResult {
            cost_sq: val.max(0.0),
            optimal_time,
            regime: Regime::of(optimal_time),
            plan,
            moments,
            iterations: 0,
            restarts_used: 0,
            budget_exhausted: false,
        },
        vertices_examined: scored.len(),
        optima,
    })
}
