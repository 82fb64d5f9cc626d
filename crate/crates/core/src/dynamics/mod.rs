//! Dynamical plans, particle Vlasov flows and probes on simulated curves.

mod ensemble;
mod probes;
mod vlasov;

pub use ensemble::{
    build_dynamical_plan, interpolate_at, monge_mather_check, EnsembleEntry, MongeMatherReport, SplineEnsemble,
    MASS_FLOOR,
};
pub use probes::{
    metric_derivative_probe, optimal_time_ratio_probe, physicality_check, reparametrize, MetricProbe, PhysicalityRow,
    TimeRatioProbe,
};
pub use vlasov::{
    force_norm_integral, moment_report, path_action, path_action_with, velocity_summary, vlasov_integrate, ForceField,
    ForceFn, MomentReport, MomentRow, PolyForce, Quadrature, Trajectory,
};
