//! File formats: measures (JSON and CSV), solver results, spline ensembles,
//! trajectory exports and polynomial force coefficients.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use kinetic_ot_core::dynamics::{PolyForce, SplineEnsemble, Trajectory};
use kinetic_ot_core::measures::validate_measure;
use kinetic_ot_core::solver::OracleResult;
use kinetic_ot_core::{
    Coupling, CubicSpline, DiscreteMeasure, OptimalTime, PhaseState, RawAtom, RawMeasure, SolveResult,
};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum MeasureFormat {
    Json,
    Csv,
}

impl MeasureFormat {
    /// `.csv` means CSV, anything else JSON.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(e) if e.eq_ignore_ascii_case("csv") => MeasureFormat::Csv,
            _ => MeasureFormat::Json,
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct JsonAtom {
    x: Vec<f64>,
    v: Vec<f64>,
    w: f64,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct JsonMeasure {
    dim: usize,
    points: Vec<JsonAtom>,
}

/// Parses measure JSON text without validating weights.
pub fn parse_measure_json(text: &str) -> Result<RawMeasure, String> {
    let m: JsonMeasure = serde_json::from_str(text).map_err(|e| e.to_string())?;
    Ok(RawMeasure { dim: m.dim, points: m.points.into_iter().map(|p| RawAtom { x: p.x, v: p.v, w: p.w }).collect() })
}

/// Parses measure CSV text: header `x1..xn,v1..vn,w`, one atom per row.
pub fn parse_measure_csv(text: &str) -> Result<RawMeasure, String> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
    let header = rdr.headers().map_err(|e| e.to_string())?.clone();
    let cols = header.len();
    if cols < 3 || cols % 2 == 0 {
        return Err(format!("expected 2n+1 columns, found {cols}"));
    }
    let dim = (cols - 1) / 2;
    let expected: Vec<String> =
        (1..=dim).map(|i| format!("x{i}")).chain((1..=dim).map(|i| format!("v{i}"))).chain(["w".to_string()]).collect();
    if header.iter().zip(&expected).any(|(h, e)| h != e) {
        return Err(format!("header must be {}", expected.join(",")));
    }
    let mut points = Vec::new();
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| e.to_string())?;
        let vals = rec
            .iter()
            .map(|s| s.parse::<f64>().map_err(|e| format!("row {}: {s:?}: {e}", row + 1)))
            .collect::<Result<Vec<f64>, _>>()?;
        points.push(RawAtom { x: vals[..dim].to_vec(), v: vals[dim..2 * dim].to_vec(), w: vals[2 * dim] });
    }
    Ok(RawMeasure { dim, points })
}

/// Reads and validates a measure file. Missing files map to exit code 2,
/// everything unparsable or invalid to exit code 3.
pub fn read_measure(path: &Path, format: Option<MeasureFormat>) -> CliResult<DiscreteMeasure> {
    if !path.is_file() {
        return Err(CliError::MissingFile(path.to_path_buf()));
    }
    let text = fs::read_to_string(path).map_err(|e| CliError::Malformed { path: path.into(), reason: e.to_string() })?;
    let raw = match format.unwrap_or_else(|| MeasureFormat::from_path(path)) {
        MeasureFormat::Json => parse_measure_json(&text),
        MeasureFormat::Csv => parse_measure_csv(&text),
    }
    .map_err(|reason| CliError::Malformed { path: path.into(), reason })?;
    validate_measure(&raw).map_err(|e| CliError::Malformed { path: path.into(), reason: e.to_string() })
}

/// Fixed 17-significant-digit rendering used in every output file.
pub fn fmt_f64(x: f64) -> String {
    if x == 0.0 {
        return "0.0000000000000000e0".into();
    }
    format!("{x:.16e}")
}

fn json_f64(x: f64) -> String {
    if x.is_finite() {
        fmt_f64(x)
    } else {
        "null".into()
    }
}

pub fn measure_to_csv(mu: &DiscreteMeasure) -> String {
    let n = mu.dim();
    let mut out = String::new();
    let header: Vec<String> =
        (1..=n).map(|i| format!("x{i}")).chain((1..=n).map(|i| format!("v{i}"))).chain(["w".into()]).collect();
    out.push_str(&header.join(","));
    out.push('\n');
    for a in mu.atoms() {
        let row: Vec<String> = a.state.x().iter().chain(a.state.v()).map(|c| fmt_f64(*c)).chain([fmt_f64(a.weight)]).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

pub fn measure_to_json(mu: &DiscreteMeasure) -> String {
    let mut out = format!("{{\"dim\": {}, \"points\": [", mu.dim());
    for (k, a) in mu.atoms().iter().enumerate() {
        if k > 0 {
            out.push_str(", ");
        }
        let list = |v: &[f64]| v.iter().map(|c| fmt_f64(*c)).collect::<Vec<_>>().join(", ");
        let _ = write!(out, "{{\"x\": [{}], \"v\": [{}], \"w\": {}}}", list(a.state.x()), list(a.state.v()), fmt_f64(a.weight));
    }
    out.push_str("]}\n");
    out
}

pub fn write_measure(path: &Path, mu: &DiscreteMeasure, format: MeasureFormat) -> CliResult<()> {
    let text = match format {
        MeasureFormat::Csv => measure_to_csv(mu),
        MeasureFormat::Json => measure_to_json(mu),
    };
    fs::write(path, text)?;
    Ok(())
}

fn time_json(t: OptimalTime) -> String {
    match t {
        OptimalTime::Zero => "null".into(),
        OptimalTime::Finite(x) => fmt_f64(x),
        OptimalTime::Infinite => "\"inf\"".into(),
    }
}

/// Plan entries `[i, j, mass]` in row-major order, masses below `1e-15` omitted.
fn plan_json(plan: &Coupling) -> String {
    let entries: Vec<String> =
        plan.support(1e-15).into_iter().map(|(i, j, q)| format!("[{i}, {j}, {}]", fmt_f64(q))).collect();
    format!("[{}]", entries.join(", "))
}

/// Result JSON: `cost_sq`, `regime`, `T` (number, `null` for zero, `"inf"`),
/// `plan`, `iterations`, plus restart and budget diagnostics.
pub fn result_to_json(r: &SolveResult) -> String {
    let mut out = String::from("{\n");
    let _ = writeln!(out, "  \"cost_sq\": {},", json_f64(r.cost_sq));
    let _ = writeln!(out, "  \"regime\": \"{}\",", r.regime.as_str());
    let _ = writeln!(out, "  \"T\": {},", time_json(r.optimal_time));
    let _ = writeln!(out, "  \"plan\": {},", plan_json(&r.plan));
    let _ = writeln!(out, "  \"iterations\": {},", r.iterations);
    let _ = writeln!(out, "  \"restarts_used\": {},", r.restarts_used);
    let _ = writeln!(out, "  \"budget_exhausted\": {}", r.budget_exhausted);
    out.push_str("}\n");
    out
}

pub fn oracle_to_json(o: &OracleResult) -> String {
    let r = &o.best;
    let mut out = String::from("{\n");
    let _ = writeln!(out, "  \"cost_sq\": {},", json_f64(r.cost_sq));
    let _ = writeln!(out, "  \"regime\": \"{}\",", r.regime.as_str());
    let _ = writeln!(out, "  \"T\": {},", time_json(r.optimal_time));
    let _ = writeln!(out, "  \"plan\": {},", plan_json(&r.plan));
    let _ = writeln!(out, "  \"iterations\": 0,");
    let _ = writeln!(out, "  \"vertices_examined\": {},", o.vertices_examined);
    let optima: Vec<String> = o
        .optima
        .iter()
        .map(|(p, t)| format!("    {{\"T\": {}, \"plan\": {}}}", time_json(*t), plan_json(p)))
        .collect();
    let _ = writeln!(out, "  \"optimal_plans\": [\n{}\n  ]", optima.join(",\n"));
    out.push_str("}\n");
    out
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct JsonState {
    x: Vec<f64>,
    v: Vec<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct JsonEntry {
    src: JsonState,
    dst: JsonState,
    mass: f64,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct JsonEnsemble {
    horizon: f64,
    entries: Vec<JsonEntry>,
}

/// Ensemble JSON: `{"horizon": T, "entries": [{"src": {"x", "v"}, "dst": {...}, "mass": m}]}`.
pub fn parse_ensemble_json(text: &str) -> Result<SplineEnsemble, String> {
    let e: JsonEnsemble = serde_json::from_str(text).map_err(|e| e.to_string())?;
    let entries = e
        .entries
        .into_iter()
        .enumerate()
        .map(|(k, en)| {
            let src = PhaseState::new(en.src.x, en.src.v).map_err(|e| e.to_string())?;
            let dst = PhaseState::new(en.dst.x, en.dst.v).map_err(|e| e.to_string())?;
            let spline = CubicSpline::connect(&src, &dst, e.horizon).map_err(|e| e.to_string())?;
            Ok(kinetic_ot_core::dynamics::EnsembleEntry { spline, mass: en.mass, source: k, target: k })
        })
        .collect::<Result<Vec<_>, String>>()?;
    SplineEnsemble::new(e.horizon, entries).map_err(|e| e.to_string())
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct JsonPoly {
    #[serde(default)]
    time: Vec<Vec<f64>>,
    #[serde(default)]
    pos: Vec<Vec<f64>>,
    #[serde(default)]
    vel: Vec<Vec<f64>>,
}

/// Polynomial force JSON: `{"time": [[c0, c1, ...] per component], "pos": n×n, "vel": n×n}`;
/// missing blocks are zero.
pub fn parse_poly_json(text: &str) -> Result<PolyForce, String> {
    let p: JsonPoly = serde_json::from_str(text).map_err(|e| e.to_string())?;
    let all = p.time.iter().chain(&p.pos).chain(&p.vel).flatten();
    if all.clone().any(|c| !c.is_finite()) {
        return Err("coefficients must be finite".into());
    }
    Ok(PolyForce { time: p.time, pos: p.pos, vel: p.vel })
}

#[derive(Debug, Serialize)]
pub struct Manifest {
    pub times: Vec<f64>,
    pub files: Vec<String>,
    pub dt: f64,
    pub force: String,
    pub action: f64,
    pub dim: usize,
    pub particles: usize,
}

/// One CSV per exported grid time (every `stride`-th, always including the
/// last) plus `manifest.json`.
pub fn export_trajectory(dir: &Path, traj: &Trajectory, action: f64, stride: usize) -> CliResult<Manifest> {
    fs::create_dir_all(dir)?;
    let stride = stride.max(1);
    let mut idx: Vec<usize> = (0..traj.len()).step_by(stride).collect();
    if idx.last() != Some(&(traj.len() - 1)) {
        idx.push(traj.len() - 1);
    }
    let mut manifest = Manifest {
        times: Vec::new(),
        files: Vec::new(),
        dt: traj.dt(),
        force: traj.force_tag.clone(),
        action,
        dim: traj.dim,
        particles: traj.weights.len(),
    };
    for k in idx {
        let name = format!("t_{k:06}.csv");
        fs::write(dir.join(&name), measure_to_csv(&traj.measure_at_index(k)?))?;
        manifest.times.push(traj.times[k]);
        manifest.files.push(name);
    }
    let text = serde_json::to_string_pretty(&manifest).map_err(std::io::Error::other)?;
    fs::write(dir.join("manifest.json"), text + "\n")?;
    Ok(manifest)
}

/// Writes `text` to `out`, or to stdout when `out` is `None`.
pub fn emit(out: Option<&PathBuf>, text: &str) -> CliResult<()> {
    match out {
        Some(p) => {
            if let Some(parent) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                fs::create_dir_all(parent)?;
            }
            fs::write(p, text)?;
        }
        None => print!("{text}"),
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn json_and_csv_round_trip() {
        let text = r#"{"dim": 2, "points": [{"x": [0.5, -1], "v": [2, 0.1], "w": 0.25}, {"x": [0, 0], "v": [0, 0], "w": 0.75}]}"#;
        let mu = validate_measure(&parse_measure_json(text).unwrap()).unwrap();
        let back = validate_measure(&parse_measure_csv(&measure_to_csv(&mu)).unwrap()).unwrap();
        assert_eq!(mu, back);
        let again = validate_measure(&parse_measure_json(&measure_to_json(&mu)).unwrap()).unwrap();
        assert_eq!(mu, again);
    }

    #[test]
    fn csv_header_is_checked() {
        assert!(parse_measure_csv("x1,v1,w\n0,1,1\n").is_ok());
        assert!(parse_measure_csv("a,b,c\n0,1,1\n").is_err());
        assert!(parse_measure_csv("x1,v1\n0,1\n").is_err());
        assert!(parse_measure_csv("x1,v1,w\n0,zz,1\n").is_err());
    }

    #[test]
    fn float_format_is_fixed() {
        assert_eq!(fmt_f64(30.0), "3.0000000000000000e1");
        assert_eq!(fmt_f64(0.0), "0.0000000000000000e0");
        assert_eq!(fmt_f64(0.1).parse::<f64>().unwrap(), 0.1);
    }

    #[test]
    fn poly_json_defaults() {
        let p = parse_poly_json(r#"{"time": [[1, 2]]}"#).unwrap();
        assert_eq!(p.time, vec![vec![1.0, 2.0]]);
        assert!(p.pos.is_empty());
        assert!(parse_poly_json(r#"{"tim": []}"#).is_err());
    }
}
