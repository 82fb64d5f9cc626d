//! Argument parsing and subcommand dispatch.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use kinetic_ot_core::dynamics::{
    build_dynamical_plan, interpolate_at, metric_derivative_probe, optimal_time_ratio_probe, path_action, vlasov_integrate,
    Trajectory,
};
use kinetic_ot_core::solver::{brute_force_oracle, solve_d, solve_fixed_t, solve_tilde_d};
use kinetic_ot_core::{OptimalTime, SolverOptions};
use log::info;

use crate::error::{CliError, CliResult};
use crate::force::parse_force;
use crate::io::{self, fmt_f64, MeasureFormat};
use crate::scenarios;
use crate::verify::{run_suite, Suite};

#[derive(Debug, Parser)]
#[command(name = "kinetic-ot", version, about = "Kinetic optimal transport on phase-space measures")]
pub struct Cli {
    /// Seed for ChaCha8 random streams.
    #[arg(long, global = true, default_value_t = 42)]
    pub seed: u64,
    /// Worker threads (default: available cores).
    #[arg(long, global = true, env = "OTIKIN_THREADS")]
    pub threads: Option<usize>,
    /// Measure file parser (default: from the extension).
    #[arg(long, global = true, value_enum)]
    pub format: Option<MeasureFormat>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Pair {
    #[arg(long)]
    pub mu: PathBuf,
    #[arg(long)]
    pub nu: PathBuf,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Discrepancy between two measures.
    #[command(group = clap::ArgGroup::new("mode").args(["horizon", "optimize_t", "tilde"]))]
    Discrepancy {
        #[command(flatten)]
        pair: Pair,
        /// Fixed horizon.
        #[arg(long = "T", value_name = "T")]
        horizon: Option<f64>,
        /// Optimise over the horizon (default).
        #[arg(long = "optimize-T")]
        optimize_t: bool,
        /// Relaxed discrepancy with positive part on the drift term.
        #[arg(long)]
        tilde: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Exhaustive search over coupling vertices.
    Oracle {
        #[command(flatten)]
        pair: Pair,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Spline interpolation along the optimal fixed-horizon plan.
    Interpolate {
        #[command(flatten)]
        pair: Pair,
        #[arg(long = "T", value_name = "T")]
        horizon: f64,
        #[arg(long, default_value_t = 10)]
        steps: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Particle simulation of the Vlasov flow.
    Simulate {
        #[arg(long)]
        mu: PathBuf,
        /// free, harmonic, damped:<gamma> or poly:<file.json>
        #[arg(long)]
        force: String,
        #[arg(long, default_value_t = 0.0)]
        t0: f64,
        #[arg(long)]
        t1: f64,
        #[arg(long)]
        dt: f64,
        /// Export every k-th grid time.
        #[arg(long, default_value_t = 1)]
        stride: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Difference quotients along a simulated curve.
    Probe {
        #[arg(long, value_enum)]
        suite: ProbeSuite,
        #[command(flatten)]
        source: ProbeSource,
        /// Probe time.
        #[arg(long, default_value_t = 0.3)]
        t: f64,
        #[arg(long, value_delimiter = ',', default_value = "0.2,0.1,0.05,0.025")]
        h: Vec<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Packaged verification scenarios; exits 5 if any check fails.
    Verify {
        #[arg(long, value_enum, default_value = "all")]
        suite: Suite,
        /// Also write the per-check report as JSON.
        #[arg(long)]
        report: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ProbeSuite {
    MetricDerivative,
    TRatio,
}

#[derive(Debug, Args)]
#[group(required = true, multiple = true)]
pub struct ProbeSource {
    /// Packaged scenario name.
    #[arg(long, conflicts_with_all = ["mu", "force"])]
    pub scenario: Option<String>,
    #[arg(long, requires = "force")]
    pub mu: Option<PathBuf>,
    #[arg(long, requires = "mu")]
    pub force: Option<String>,
    #[arg(long, default_value_t = 0.0)]
    pub t0: f64,
    #[arg(long, default_value_t = scenarios::SIM_END)]
    pub t1: f64,
    #[arg(long, default_value_t = scenarios::SIM_DT)]
    pub dt: f64,
}

/// Parses `args` and runs the command, returning the process exit code.
pub fn main_with<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn run(cli: Cli) -> CliResult<()> {
    if let Some(k) = cli.threads {
        if k == 0 {
            return Err(CliError::Usage("--threads must be positive".into()));
        }
        // A second call in the same process keeps the first pool.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(k).build_global();
    }
    let fmt = cli.format;
    let opts = SolverOptions::default();
    match cli.command {
        Command::Discrepancy { pair, horizon, optimize_t: _, tilde, out } => {
            let (mu, nu) = (io::read_measure(&pair.mu, fmt)?, io::read_measure(&pair.nu, fmt)?);
            let r = match horizon {
                Some(t) => solve_fixed_t(&mu, &nu, t)?,
                None if tilde => solve_tilde_d(&mu, &nu, &opts)?,
                None => solve_d(&mu, &nu, &opts)?,
            };
            info!("cost_sq {} regime {}", r.cost_sq, r.regime.as_str());
            io::emit(out.as_ref(), &io::result_to_json(&r))
        }
        Command::Oracle { pair, out } => {
            let (mu, nu) = (io::read_measure(&pair.mu, fmt)?, io::read_measure(&pair.nu, fmt)?);
            let o = brute_force_oracle(&mu, &nu, &opts)?;
            info!("{} vertices, {} optima", o.vertices_examined, o.optima.len());
            io::emit(out.as_ref(), &io::oracle_to_json(&o))
        }
        Command::Interpolate { pair, horizon, steps, out } => {
            if steps == 0 {
                return Err(CliError::Usage("--steps must be positive".into()));
            }
            let (mu, nu) = (io::read_measure(&pair.mu, fmt)?, io::read_measure(&pair.nu, fmt)?);
            let r = solve_fixed_t(&mu, &nu, horizon)?;
            let e = build_dynamical_plan(&mu, &nu, &r.plan, horizon)?;
            std::fs::create_dir_all(&out)?;
            for k in 0..=steps {
                let t = if k == steps { horizon } else { horizon * k as f64 / steps as f64 };
                let m = interpolate_at(&e, t)?;
                std::fs::write(out.join(format!("t_{k:06}.csv")), io::measure_to_csv(&m))?;
            }
            info!("wrote {} frames, action {}", steps + 1, e.action());
            Ok(())
        }
        Command::Simulate { mu, force, t0, t1, dt, stride, out } => {
            let mu = io::read_measure(&mu, fmt)?;
            let force = parse_force(&force)?;
            check_window(t0, t1, dt)?;
            let traj = vlasov_integrate(&mu, &force, t0, t1, dt)?;
            let action = path_action(&traj)?;
            io::export_trajectory(&out, &traj, action, stride)?;
            info!("{} steps, action {action}", traj.len() - 1);
            Ok(())
        }
        Command::Probe { suite, source, t, h, out } => {
            let traj = probe_trajectory(&source, cli.seed, fmt)?;
            let text = match suite {
                ProbeSuite::MetricDerivative => {
                    let mut s = String::from("h,ratio_tilde,ratio_d,force_norm\n");
                    for p in metric_derivative_probe(&traj, t, &h, &opts)? {
                        let _ = writeln!(s, "{},{},{},{}", fmt_f64(p.h), fmt_f64(p.ratio_tilde), fmt_f64(p.ratio_d), fmt_f64(p.force_norm));
                    }
                    s
                }
                ProbeSuite::TRatio => {
                    let mut s = String::from("h,T,T_ratio,second_order,mean_velocity,velocity_norm\n");
                    for p in optimal_time_ratio_probe(&traj, t, &h, &opts)? {
                        let tt = match p.optimal_time {
                            OptimalTime::Zero => "zero".to_string(),
                            OptimalTime::Finite(x) => fmt_f64(x),
                            OptimalTime::Infinite => "inf".to_string(),
                        };
                        let opt = |x: Option<f64>| x.map_or_else(String::new, fmt_f64);
                        let _ = writeln!(
                            s,
                            "{},{tt},{},{},{},{}",
                            fmt_f64(p.h),
                            opt(p.ratio),
                            opt(p.second_order),
                            fmt_f64(p.mean_velocity),
                            fmt_f64(p.velocity_norm)
                        );
                    }
                    s
                }
            };
            io::emit(out.as_ref(), &text)
        }
        Command::Verify { suite, report } => {
            let checks = run_suite(suite, cli.seed)?;
            for c in &checks {
                println!("{c}");
            }
            if let Some(path) = report {
                let rows: Vec<serde_json::Value> = checks
                    .iter()
                    .map(|c| serde_json::json!({"name": c.name, "passed": c.passed, "detail": c.detail}))
                    .collect();
                let text = serde_json::to_string_pretty(&rows).map_err(std::io::Error::other)?;
                io::emit(Some(&path), &(text + "\n"))?;
            }
            let failed = checks.iter().filter(|c| !c.passed).count();
            if failed > 0 {
                return Err(CliError::Verification { failed, total: checks.len() });
            }
            Ok(())
        }
    }
}

fn check_window(t0: f64, t1: f64, dt: f64) -> CliResult<()> {
    if !(t0.is_finite() && t1.is_finite() && t1 > t0) || !(dt > 0.0) || dt >= t1 - t0 {
        return Err(CliError::Usage(format!("need t0 < t1 and 0 < dt < t1 - t0, got t0={t0} t1={t1} dt={dt}")));
    }
    Ok(())
}

fn probe_trajectory(src: &ProbeSource, seed: u64, fmt: Option<MeasureFormat>) -> CliResult<Trajectory> {
    match (&src.scenario, &src.mu, &src.force) {
        (Some(name), _, _) => Ok(scenarios::scenario(name, seed)?.traj),
        (None, Some(mu), Some(force)) => {
            let mu = io::read_measure(mu, fmt)?;
            let force = parse_force(force)?;
            check_window(src.t0, src.t1, src.dt)?;
            Ok(vlasov_integrate(&mu, &force, src.t0, src.t1, src.dt)?)
        }
        _ => Err(CliError::Usage("probe needs --scenario or both --mu and --force".into())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn parses_documented_forms() {
        let c = Cli::try_parse_from(["kinetic-ot", "discrepancy", "--mu", "a.json", "--nu", "b.json", "--optimize-T", "--out", "r.json"]).unwrap();
        assert!(matches!(c.command, Command::Discrepancy { optimize_t: true, .. }));
        let c = Cli::try_parse_from([
            "kinetic-ot", "simulate", "--mu", "a.json", "--force", "harmonic", "--t0", "0", "--t1", "6.28", "--dt", "0.001", "--out", "dir/",
        ])
        .unwrap();
        assert!(matches!(c.command, Command::Simulate { dt, .. } if dt == 0.001));
        assert_eq!(c.seed, 42);
    }

    #[test]
    fn usage_errors_exit_two() {
        assert_eq!(main_with(["kinetic-ot", "discrepancy", "--mu", "a.json"]), 2);
        assert_eq!(main_with(["kinetic-ot", "discrepancy", "--mu", "a", "--nu", "b", "--T", "1", "--tilde"]), 2);
        assert_eq!(main_with(["kinetic-ot", "verify", "--bogus"]), 2);
        assert_eq!(main_with(["kinetic-ot", "discrepancy", "--mu", "/no/a.json", "--nu", "/no/b.json"]), 2);
    }
}
