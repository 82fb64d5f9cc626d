use std::fs;
use std::path::Path;

use kinetic_ot_core::dynamics::ForceField;

use crate::error::{CliError, CliResult};
use crate::io::parse_poly_json;

/// Parses `free`, `harmonic`, `damped:<γ>` or `poly:<file.json>`.
pub fn parse_force(spec: &str) -> CliResult<ForceField> {
    let usage = || CliError::Usage(format!("unknown force {spec:?}; expected free, harmonic, damped:<gamma> or poly:<file>"));
    match spec.split_once(':') {
        None if spec == "free" => Ok(ForceField::Free),
        None if spec == "harmonic" => Ok(ForceField::Harmonic),
        Some(("damped", g)) => {
            let g: f64 = g.parse().map_err(|_| usage())?;
            if !g.is_finite() {
                return Err(usage());
            }
            Ok(ForceField::Damped(g))
        }
        Some(("poly", file)) => {
            let path = Path::new(file);
            if !path.is_file() {
                return Err(CliError::MissingFile(path.into()));
            }
            let text = fs::read_to_string(path)?;
            let poly = parse_poly_json(&text).map_err(|reason| CliError::Malformed { path: path.into(), reason })?;
            Ok(ForceField::Poly(poly))
        }
        _ => Err(usage()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_tags() {
        assert_eq!(parse_force("free").unwrap().tag(), "free");
        assert_eq!(parse_force("harmonic").unwrap().tag(), "harmonic");
        assert_eq!(parse_force("damped:0.5").unwrap().tag(), "damped:0.5");
        assert_eq!(parse_force("damped:x").unwrap_err().exit_code(), 2);
        assert_eq!(parse_force("gravity").unwrap_err().exit_code(), 2);
        assert_eq!(parse_force("poly:/nonexistent.json").unwrap_err().exit_code(), 2);
    }
}
