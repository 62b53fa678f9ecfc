//! Run orchestration for the four modes.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use coefid::evolution::Propagator;
use coefid::forward::{forward_direct, synthesize_phi};
use coefid::model::{Backend, MatrixFamily, Pairing};
use coefid::pipeline::{invert, round_trip, synthetic_measurements, Inversion, InvertOptions};
use coefid::presets::{build_preset, GammaProfile, PresetParams};
use coefid::{MeasurementSeries, ProblemSpec, TimeGrid};

use crate::config::{Mode, Problem, RunConfig};
use crate::csv::{format_value, read_series, render_series};
use crate::error::CliError;

/// Files written by a run, plus one-line notes for the terminal.
#[derive(Debug, Default)]
pub struct RunOutcome {
    pub files: Vec<PathBuf>,
    pub notes: Vec<String>,
}

impl RunOutcome {
    fn write(&mut self, dir: &Path, name: &str, contents: &str) -> Result<(), CliError> {
        let path = dir.join(name);
        fs::write(&path, contents).map_err(|source| CliError::Write {
            path: path.clone(),
            source,
        })?;
        self.files.push(path);
        Ok(())
    }
}

/// The problem and the coefficient used to generate synthetic data.
fn build_problem(
    cfg: &RunConfig,
    steps: usize,
) -> Result<(ProblemSpec, GammaProfile, String), CliError> {
    match &cfg.problem {
        Problem::Preset(name) => {
            let preset = build_preset(
                *name,
                &PresetParams {
                    final_time: cfg.final_time,
                    steps,
                    length: cfg.length,
                    interior: cfg.interior,
                    stepper: cfg.stepper,
                },
            )?;
            Ok((
                preset.spec,
                cfg.gamma.unwrap_or(preset.gamma),
                name.name().to_string(),
            ))
        }
        Problem::Inline(m) => {
            let grid = TimeGrid::new(cfg.final_time, steps)?;
            let spec = ProblemSpec {
                grid,
                backend: Backend::MatrixFamily(MatrixFamily::constant(m.matrix.clone(), &grid)),
                u0: m.u0.clone().into(),
                source: vec![m.source.clone().into(); grid.len()],
                pairing: Pairing::new(m.weight.clone().into(), 1.0),
                stepper: cfg.stepper,
            };
            Ok((
                spec,
                cfg.gamma.unwrap_or(GammaProfile::Constant(0.0)),
                "matrix".to_string(),
            ))
        }
    }
}

fn header(cfg: &RunConfig, spec: &ProblemSpec, gamma: &GammaProfile, label: &str) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "problem = {label}");
    let _ = writeln!(s, "T = {}", spec.grid.final_time());
    let _ = writeln!(s, "N = {}", spec.grid.steps());
    if let Backend::Parabolic1D(p) = &spec.backend {
        let _ = writeln!(s, "L = {}", p.length);
        let _ = writeln!(s, "M = {}", p.interior);
    }
    let _ = writeln!(s, "stepper = {}", spec.stepper.name());
    let _ = writeln!(s, "gamma = {gamma:?}");
    let _ = writeln!(s, "noise_level = {}", cfg.noise_level);
    let _ = writeln!(s, "seed = {}", cfg.seed);
    s
}

fn invert_options(cfg: &RunConfig) -> InvertOptions {
    InvertOptions {
        floor: cfg.floor,
        smoothing: cfg.smoothing,
    }
}

fn create_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|source| CliError::Write {
        path: dir.to_path_buf(),
        source,
    })
}

/// Writes `phi.csv` and `summary.txt`.
pub fn run_forward(cfg: &RunConfig) -> Result<RunOutcome, CliError> {
    let (spec, gamma, label) = build_problem(cfg, cfg.steps)?;
    let traj = forward_direct(&gamma.sample(&spec.grid), &spec)?;
    let phi = synthesize_phi(&traj, cfg.noise_level, cfg.seed);

    let mut summary = String::from("mode = forward\n");
    summary.push_str(&header(cfg, &spec, &gamma, &label));
    let min_entry = traj
        .states
        .iter()
        .flat_map(|s| s.as_slice().iter().copied())
        .fold(f64::INFINITY, f64::min);
    let max_abs = traj.states.iter().map(|s| s.max_abs()).fold(0.0, f64::max);
    let _ = writeln!(
        summary,
        "phi(0) = {}",
        format_value(phi.phi[0], cfg.precision)
    );
    let _ = writeln!(
        summary,
        "phi(T) = {}",
        format_value(*phi.phi.last().unwrap(), cfg.precision)
    );
    let _ = writeln!(
        summary,
        "max |u| = {}",
        format_value(max_abs, cfg.precision)
    );
    let _ = writeln!(
        summary,
        "min u entry = {}",
        format_value(min_entry, cfg.precision)
    );

    let mut outcome = RunOutcome::default();
    if matches!(spec.backend, Backend::Parabolic1D(_)) {
        let report = Propagator::new(&spec)?.positivity_report();
        let scheme = match &report.first_violation {
            None => "holds".to_string(),
            Some(v) => format!("fails at step {} row {}: {}", v.step, v.row, v.reason),
        };
        let data_ok = spec.u0.as_slice().iter().all(|&x| x >= 0.0)
            && spec
                .source
                .iter()
                .all(|s| s.as_slice().iter().all(|&x| x >= 0.0));
        let _ = writeln!(
            summary,
            "discrete maximum principle (unperturbed scheme): {scheme}"
        );
        let _ = writeln!(
            summary,
            "u0 >= 0 and f >= 0: {}",
            if data_ok { "yes" } else { "no" }
        );
        let _ = writeln!(
            summary,
            "trajectory nonnegative: {}",
            if min_entry >= 0.0 { "yes" } else { "no" }
        );
        outcome.notes.push(format!(
            "positivity: scheme {scheme}, min u entry {min_entry:e}"
        ));
    }

    create_dir(&cfg.out)?;
    outcome.write(
        &cfg.out,
        "phi.csv",
        &render_series("t,value", &spec.grid, &phi.phi, cfg.precision),
    )?;
    outcome.write(&cfg.out, "summary.txt", &summary)?;
    Ok(outcome)
}

fn load_or_generate_phi(
    cfg: &RunConfig,
    spec: &ProblemSpec,
    gamma: &GammaProfile,
) -> Result<(MeasurementSeries, bool), CliError> {
    match &cfg.phi_file {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|source| CliError::Read {
                path: path.clone(),
                source,
            })?;
            Ok((
                MeasurementSeries::external(read_series(path, &text, &spec.grid)?),
                false,
            ))
        }
        None => Ok((
            synthetic_measurements(spec, gamma, cfg.refinement, cfg.noise_level, cfg.seed)?,
            true,
        )),
    }
}

fn write_inversion(
    cfg: &RunConfig,
    spec: &ProblemSpec,
    run: &Inversion,
    outcome: &mut RunOutcome,
) -> Result<(), CliError> {
    let grid = &spec.grid;
    let digits = cfg.precision;
    outcome.write(
        &cfg.out,
        "xi.csv",
        &render_series("t,value", grid, &run.xi.xi, digits),
    )?;
    outcome.write(
        &cfg.out,
        "gamma.csv",
        &render_series("t,gamma", grid, &run.gamma.gamma, digits),
    )?;
    outcome.write(&cfg.out, "hypotheses.txt", &run.report.to_string())?;

    let r = &run.residual;
    let mut residual = String::new();
    let _ = writeln!(residual, "valid_range = 0..={}", r.last);
    let _ = writeln!(
        residual,
        "positivity_horizon = {}",
        run.xi.positivity_horizon
    );
    let _ = writeln!(
        residual,
        "max_abs_residual = {}",
        format_value(r.max_abs, digits)
    );
    let _ = writeln!(
        residual,
        "max_rel_residual = {}",
        format_value(r.max_rel, digits)
    );
    outcome.write(&cfg.out, "residual.txt", &residual)?;

    if run.gamma.is_truncated(grid) {
        outcome.notes.push(format!(
            "warning: gamma truncated at node {} (positivity horizon)",
            run.gamma.last()
        ));
    }
    outcome.notes.push(format!(
        "forward-verification relative residual {:e}",
        r.max_rel
    ));
    Ok(())
}

/// Writes `xi.csv`, `gamma.csv`, `hypotheses.txt`, `residual.txt`, and
/// `phi.csv` when the measurements were generated rather than read.
pub fn run_invert(cfg: &RunConfig) -> Result<RunOutcome, CliError> {
    let (spec, gamma, _) = build_problem(cfg, cfg.steps)?;
    let (phi, generated) = load_or_generate_phi(cfg, &spec, &gamma)?;
    let run = invert(&spec, &phi, &invert_options(cfg))?;
    create_dir(&cfg.out)?;
    let mut outcome = RunOutcome::default();
    if generated {
        outcome.write(
            &cfg.out,
            "phi.csv",
            &render_series("t,value", &spec.grid, &phi.phi, cfg.precision),
        )?;
    }
    write_inversion(cfg, &spec, &run, &mut outcome)?;
    Ok(outcome)
}

/// Invert generated data and compare with the coefficient that produced it.
pub fn run_roundtrip(cfg: &RunConfig) -> Result<RunOutcome, CliError> {
    let (spec, gamma, label) = build_problem(cfg, cfg.steps)?;
    let rt = round_trip(
        &spec,
        &gamma,
        cfg.refinement,
        cfg.noise_level,
        cfg.seed,
        &invert_options(cfg),
    )?;
    create_dir(&cfg.out)?;
    let mut outcome = RunOutcome::default();
    outcome.write(
        &cfg.out,
        "phi.csv",
        &render_series("t,value", &spec.grid, &rt.measured.phi, cfg.precision),
    )?;
    write_inversion(cfg, &spec, &rt.inversion, &mut outcome)?;

    let mut text = String::from("mode = roundtrip\n");
    text.push_str(&header(cfg, &spec, &gamma, &label));
    let _ = writeln!(text, "refinement = {}", cfg.refinement);
    let _ = writeln!(
        text,
        "max_interior_error = {}",
        format_value(rt.max_interior_error, cfg.precision)
    );
    let _ = writeln!(
        text,
        "relative_error = {}",
        format_value(rt.relative_error(), cfg.precision)
    );
    outcome.write(&cfg.out, "roundtrip.txt", &text)?;
    outcome.notes.push(format!(
        "max interior gamma error {:e}",
        rt.max_interior_error
    ));
    Ok(outcome)
}

/// Round trips at `N, 2N, 4N, ...`, written to `convergence.csv` as
/// `steps,h,max_error,order` with `order = log2(e_h / e_{h/2})` (`nan` on the
/// first row).
pub fn run_convergence(cfg: &RunConfig) -> Result<RunOutcome, CliError> {
    let mut rows = Vec::with_capacity(cfg.levels);
    let mut prev: Option<f64> = None;
    for level in 0..cfg.levels {
        let steps = cfg.steps << level;
        let (spec, gamma, _) = build_problem(cfg, steps)?;
        let rt = round_trip(
            &spec,
            &gamma,
            cfg.refinement,
            cfg.noise_level,
            cfg.seed,
            &invert_options(cfg),
        )?;
        let e = rt.max_interior_error;
        let order = prev.map_or(f64::NAN, |p| (p / e).log2());
        rows.push(vec![steps as f64, spec.grid.step(), e, order]);
        prev = Some(e);
    }
    create_dir(&cfg.out)?;
    let mut outcome = RunOutcome::default();
    let mut csv = String::from("steps,h,max_error,order\n");
    for r in &rows {
        let floats: Vec<String> = r[1..]
            .iter()
            .map(|&x| format_value(x, cfg.precision))
            .collect();
        let _ = writeln!(csv, "{},{}", r[0], floats.join(","));
    }
    outcome.write(&cfg.out, "convergence.csv", &csv)?;
    for r in &rows {
        outcome.notes.push(format!(
            "N = {:>6}  error = {:.3e}  order = {:.3}",
            r[0], r[2], r[3]
        ));
    }
    Ok(outcome)
}

pub fn run(cfg: &RunConfig) -> Result<RunOutcome, CliError> {
    match cfg.mode {
        Mode::Forward => run_forward(cfg),
        Mode::Invert => run_invert(cfg),
        Mode::Roundtrip => run_roundtrip(cfg),
        Mode::Convergence => run_convergence(cfg),
    }
}
