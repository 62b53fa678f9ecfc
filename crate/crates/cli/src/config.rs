//! Flat `key = value` run configuration.
//!
//! Blank lines and lines starting with `#` are ignored. Unknown keys and
//! repeated keys are errors.

use std::f64::consts::PI;
use std::path::PathBuf;
use std::str::FromStr;

use coefid::presets::{GammaProfile, PresetName};
use coefid::volterra::DEFAULT_FLOOR;
use coefid::Stepper;
use nalgebra::DMatrix;

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Forward,
    Invert,
    Roundtrip,
    Convergence,
}

impl FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "forward" => Ok(Mode::Forward),
            "invert" => Ok(Mode::Invert),
            "roundtrip" => Ok(Mode::Roundtrip),
            "convergence" => Ok(Mode::Convergence),
            other => Err(format!(
                "unknown mode '{other}' (expected forward, invert, roundtrip or convergence)"
            )),
        }
    }
}

/// Finite-dimensional problem given inline: constant `A`, `u0`, `f`, `w`.
#[derive(Debug, Clone, PartialEq)]
pub struct InlineMatrix {
    pub matrix: DMatrix<f64>,
    pub u0: Vec<f64>,
    pub source: Vec<f64>,
    pub weight: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Problem {
    Preset(PresetName),
    Inline(InlineMatrix),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub mode: Mode,
    pub problem: Problem,
    pub final_time: f64,
    pub steps: usize,
    pub length: f64,
    pub interior: usize,
    pub stepper: Stepper,
    /// Coefficient used to generate synthetic data; preset default if unset.
    pub gamma: Option<GammaProfile>,
    pub noise_level: f64,
    pub seed: u64,
    pub out: PathBuf,
    /// Significant digits in CSV output.
    pub precision: usize,
    /// Half-width of the moving average applied to `phi`.
    pub smoothing: usize,
    pub phi_file: Option<PathBuf>,
    /// Synthetic data are generated on a grid this many times finer.
    pub refinement: usize,
    /// Grid levels `N, 2N, 4N, ...` for convergence runs.
    pub levels: usize,
    pub floor: f64,
}

pub const KEYS: [&str; 21] = [
    "mode",
    "preset",
    "T",
    "N",
    "L",
    "M",
    "stepper",
    "gamma",
    "noise_level",
    "seed",
    "out",
    "precision",
    "smoothing",
    "phi_file",
    "refinement",
    "levels",
    "floor",
    "matrix",
    "u0",
    "source",
    "weight",
];

fn err(key: &str, msg: impl std::fmt::Display) -> CliError {
    CliError::Config(format!("{key}: {msg}"))
}

fn parse_as<T: FromStr>(key: &str, value: &str) -> Result<T, CliError>
where
    T::Err: std::fmt::Display,
{
    value
        .parse::<T>()
        .map_err(|e| err(key, format!("cannot parse '{value}': {e}")))
}

fn parse_finite(key: &str, value: &str) -> Result<f64, CliError> {
    let v: f64 = parse_as(key, value)?;
    if !v.is_finite() {
        return Err(err(key, "must be finite"));
    }
    Ok(v)
}

fn parse_list(key: &str, value: &str) -> Result<Vec<f64>, CliError> {
    value
        .split(',')
        .map(|x| parse_finite(key, x.trim()))
        .collect()
}

/// Rows separated by `;`, entries by `,`.
fn parse_matrix(key: &str, value: &str) -> Result<DMatrix<f64>, CliError> {
    let rows: Vec<Vec<f64>> = value
        .split(';')
        .map(|r| parse_list(key, r))
        .collect::<Result<_, _>>()?;
    let d = rows.len();
    if rows.iter().any(|r| r.len() != d) {
        return Err(err(
            key,
            format!("expected a square matrix with {d} columns per row"),
        ));
    }
    Ok(DMatrix::from_fn(d, d, |i, j| rows[i][j]))
}

impl RunConfig {
    /// Parse the text of a config file. `mode_override` replaces the `mode` key.
    pub fn parse(text: &str, mode_override: Option<Mode>) -> Result<Self, CliError> {
        let mut pairs: Vec<(String, String)> = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| {
                CliError::Config(format!("line {}: expected key = value", lineno + 1))
            })?;
            let (k, v) = (k.trim(), v.trim());
            if !KEYS.contains(&k) {
                return Err(CliError::Config(format!(
                    "line {}: unknown key '{k}'",
                    lineno + 1
                )));
            }
            if pairs.iter().any(|(p, _)| p == k) {
                return Err(CliError::Config(format!(
                    "line {}: duplicate key '{k}'",
                    lineno + 1
                )));
            }
            pairs.push((k.to_string(), v.to_string()));
        }
        let get = |key: &str| {
            pairs
                .iter()
                .find(|(k, _)| k == key)
                .map(|(_, v)| v.as_str())
        };

        let mode = match (mode_override, get("mode")) {
            (Some(m), _) => m,
            (None, Some(v)) => parse_as("mode", v)?,
            (None, None) => {
                return Err(err("mode", "missing (set it in the config or pass --mode)"))
            }
        };

        let inline_keys = ["matrix", "u0", "source", "weight"];
        let problem = match get("preset") {
            None => return Err(err("preset", "missing")),
            Some("matrix") => {
                let need = |k: &str| get(k).ok_or_else(|| err(k, "required when preset = matrix"));
                let matrix = parse_matrix("matrix", need("matrix")?)?;
                let d = matrix.nrows();
                let vector = |k: &str| -> Result<Vec<f64>, CliError> {
                    let v = parse_list(k, need(k)?)?;
                    if v.len() != d {
                        return Err(err(k, format!("length {}, expected {d}", v.len())));
                    }
                    Ok(v)
                };
                Problem::Inline(InlineMatrix {
                    u0: vector("u0")?,
                    source: vector("source")?,
                    weight: vector("weight")?,
                    matrix,
                })
            }
            Some(name) => {
                if let Some(k) = inline_keys.iter().find(|k| get(k).is_some()) {
                    return Err(err(k, "only allowed with preset = matrix"));
                }
                Problem::Preset(parse_as("preset", name)?)
            }
        };

        let final_time = get("T")
            .map(|v| parse_finite("T", v))
            .transpose()?
            .unwrap_or(1.0);
        if final_time <= 0.0 {
            return Err(err("T", "must be positive"));
        }
        let steps = get("N")
            .map(|v| parse_as::<usize>("N", v))
            .transpose()?
            .unwrap_or(200);
        if steps < 2 {
            return Err(err("N", format!("must be at least 2, got {steps}")));
        }
        let length = get("L")
            .map(|v| parse_finite("L", v))
            .transpose()?
            .unwrap_or(PI);
        if length <= 0.0 {
            return Err(err("L", "must be positive"));
        }
        let interior = get("M")
            .map(|v| parse_as::<usize>("M", v))
            .transpose()?
            .unwrap_or(64);
        if interior < 1 {
            return Err(err("M", "must be at least 1"));
        }
        let stepper = get("stepper")
            .map(|v| parse_as("stepper", v))
            .transpose()?
            .unwrap_or_default();
        let gamma = get("gamma").map(|v| parse_as("gamma", v)).transpose()?;
        let noise_level = get("noise_level")
            .map(|v| parse_finite("noise_level", v))
            .transpose()?
            .unwrap_or(0.0);
        if noise_level < 0.0 {
            return Err(err("noise_level", "must be nonnegative"));
        }
        let seed = get("seed")
            .map(|v| parse_as("seed", v))
            .transpose()?
            .unwrap_or(0);
        let out = PathBuf::from(get("out").unwrap_or("out"));
        let precision = get("precision")
            .map(|v| parse_as::<usize>("precision", v))
            .transpose()?
            .unwrap_or(17);
        if !(1..=17).contains(&precision) {
            return Err(err(
                "precision",
                format!("must be between 1 and 17, got {precision}"),
            ));
        }
        let smoothing = get("smoothing")
            .map(|v| parse_as("smoothing", v))
            .transpose()?
            .unwrap_or(0);
        let phi_file = get("phi_file").map(PathBuf::from);
        let refinement = get("refinement")
            .map(|v| parse_as::<usize>("refinement", v))
            .transpose()?
            .unwrap_or(4);
        if refinement < 1 {
            return Err(err("refinement", "must be at least 1"));
        }
        let levels = get("levels")
            .map(|v| parse_as::<usize>("levels", v))
            .transpose()?
            .unwrap_or(3);
        let floor = get("floor")
            .map(|v| parse_finite("floor", v))
            .transpose()?
            .unwrap_or(DEFAULT_FLOOR);
        if floor <= 0.0 {
            return Err(err("floor", "must be positive"));
        }

        match mode {
            Mode::Convergence => {
                if levels < 2 {
                    return Err(CliError::Config("convergence mode needs ≥ 2 levels".into()));
                }
                if phi_file.is_some() {
                    return Err(err("phi_file", "convergence runs generate their own data"));
                }
            }
            Mode::Forward | Mode::Roundtrip => {
                if phi_file.is_some() {
                    return Err(err("phi_file", "only used in invert mode"));
                }
            }
            Mode::Invert => {}
        }

        Ok(Self {
            mode,
            problem,
            final_time,
            steps,
            length,
            interior,
            stepper,
            gamma,
            noise_level,
            seed,
            out,
            precision,
            smoothing,
            phi_file,
            refinement,
            levels,
            floor,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config() {
        let cfg = RunConfig::parse("mode = forward\npreset = scalar_decay\n", None).unwrap();
        assert_eq!(cfg.mode, Mode::Forward);
        assert_eq!(cfg.problem, Problem::Preset(PresetName::ScalarDecay));
        assert_eq!(cfg.steps, 200);
        assert_eq!(cfg.precision, 17);
        assert_eq!(cfg.smoothing, 0);
    }

    #[test]
    fn comments_and_override() {
        let text = "# demo\n\nmode = forward\npreset = heat_sine\nN = 64\nM = 31\nstepper = implicit_euler\n";
        let cfg = RunConfig::parse(text, Some(Mode::Roundtrip)).unwrap();
        assert_eq!(cfg.mode, Mode::Roundtrip);
        assert_eq!(cfg.interior, 31);
        assert_eq!(cfg.stepper, Stepper::ImplicitEuler);
    }

    #[test]
    fn invalid_n_names_the_field() {
        let e =
            RunConfig::parse("mode = forward\npreset = scalar_decay\nN = 1\n", None).unwrap_err();
        assert!(e.to_string().contains("N:"), "{e}");
        assert_eq!(e.exit_code(), 4);
    }

    #[test]
    fn unknown_and_duplicate_keys() {
        let e = RunConfig::parse(
            "mode = forward\npreset = scalar_decay\ntolerance = 1\n",
            None,
        )
        .unwrap_err();
        assert!(e.to_string().contains("unknown key 'tolerance'"));
        let e = RunConfig::parse(
            "mode = forward\nmode = invert\npreset = scalar_decay\n",
            None,
        )
        .unwrap_err();
        assert!(e.to_string().contains("duplicate key 'mode'"));
    }

    #[test]
    fn convergence_needs_two_levels() {
        let e = RunConfig::parse(
            "mode = convergence\npreset = scalar_decay\nlevels = 1\n",
            None,
        )
        .unwrap_err();
        assert!(e.to_string().contains("convergence mode needs ≥ 2 levels"));
    }

    #[test]
    fn inline_matrix_problem() {
        let text = "mode = roundtrip\npreset = matrix\nmatrix = -1, 0.5; 0.2, -2\nu0 = 1, 2\nsource = 0, 0.1\nweight = 1, 1\n";
        let cfg = RunConfig::parse(text, None).unwrap();
        let Problem::Inline(m) = cfg.problem else {
            panic!()
        };
        assert_eq!(m.matrix[(0, 1)], 0.5);
        assert_eq!(m.source, vec![0.0, 0.1]);

        let e =
            RunConfig::parse("mode = forward\npreset = matrix\nmatrix = 1, 2\n", None).unwrap_err();
        assert!(e.to_string().starts_with("config error: matrix:"), "{e}");
        let e =
            RunConfig::parse("mode = forward\npreset = scalar_decay\nu0 = 1\n", None).unwrap_err();
        assert!(e.to_string().contains("only allowed with preset = matrix"));
    }
}
