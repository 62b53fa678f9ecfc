//! End-to-end runs: invert measurements, or generate data for a preset and
//! invert it again.

use crate::error::{Error, Result};
use crate::evolution::Propagator;
use crate::forward::{forward_direct, synthesize_phi};
use crate::inversion::{
    check_hypotheses, recover_gamma_until, smooth_moving_average, verify_by_forward, GammaSeries,
    HypothesisReport, ResidualReport,
};
use crate::model::{MeasurementSeries, ProblemSpec};
use crate::presets::GammaProfile;
use crate::volterra::{
    assemble_kernels, solve_stepwise, KernelSet, SolveOptions, XiSeries, DEFAULT_FLOOR,
};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InvertOptions {
    pub floor: f64,
    /// Half-width of the moving average applied to `phi`; 0 disables it.
    pub smoothing: usize,
}

impl Default for InvertOptions {
    fn default() -> Self {
        Self {
            floor: DEFAULT_FLOOR,
            smoothing: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Inversion {
    pub kernels: KernelSet,
    /// Measurements after optional smoothing.
    pub phi: MeasurementSeries,
    pub xi: XiSeries,
    pub gamma: GammaSeries,
    pub report: HypothesisReport,
    pub residual: ResidualReport,
}

/// Kernels, hypothesis report, `xi`, `gamma` up to the positivity horizon,
/// and the forward-verification residual.
pub fn invert(
    spec: &ProblemSpec,
    phi: &MeasurementSeries,
    opts: &InvertOptions,
) -> Result<Inversion> {
    let phi = smooth_moving_average(phi, opts.smoothing);
    let prop = Propagator::new(spec)?;
    let kernels = assemble_kernels(&prop, spec)?;
    let mut report = check_hypotheses(spec, &prop, &kernels, &phi, opts.floor);
    let xi = solve_stepwise(
        &kernels,
        &phi,
        &spec.grid,
        &SolveOptions { floor: opts.floor },
    )?;
    let gamma = recover_gamma_until(&xi, &spec.grid, xi.positivity_horizon)?;
    if gamma.is_truncated(&spec.grid) {
        report.notes.push(format!(
            "positivity horizon reached: xi > 0 only up to node {} (t = {}); gamma truncated there",
            xi.positivity_horizon,
            spec.grid.node(xi.positivity_horizon)
        ));
    }
    let residual = verify_by_forward(&gamma, spec, &phi)?;
    Ok(Inversion {
        kernels,
        phi,
        xi,
        gamma,
        report,
        residual,
    })
}

/// Synthetic measurements for `spec` with coefficient `gamma`, computed with
/// [`forward_direct`] on a grid `refinement` times finer than `spec.grid`
/// and sampled back at its nodes. `spec` must have time-independent data.
pub fn synthetic_measurements(
    spec: &ProblemSpec,
    gamma: &GammaProfile,
    refinement: usize,
    noise_level: f64,
    seed: u64,
) -> Result<MeasurementSeries> {
    assert!(refinement >= 1, "refinement must be at least 1");
    if refinement > 1 && !spec.is_time_independent() {
        return Err(Error::InvalidProblem(
            "refined synthetic data need time-independent problem data".into(),
        ));
    }
    let fine = spec.with_grid(spec.grid.refined(refinement)?);
    let gamma = gamma.sample(&fine.grid);
    let traj = forward_direct(&gamma, &fine)?;
    Ok(synthesize_phi(&traj, noise_level, seed).subsample(refinement))
}

/// `max_{0 < n < last} |gamma_n - exact(t_n)|`.
pub fn max_interior_error(gamma: &GammaSeries, exact: &[f64]) -> f64 {
    let last = gamma.last();
    (1..last)
        .map(|n| (gamma.gamma[n] - exact[n]).abs())
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone)]
pub struct RoundTrip {
    pub inversion: Inversion,
    /// Measurements as generated, before smoothing.
    pub measured: MeasurementSeries,
    pub exact_gamma: Vec<f64>,
    pub max_interior_error: f64,
}

impl RoundTrip {
    /// Error relative to `max |gamma_exact|`.
    pub fn relative_error(&self) -> f64 {
        let scale = self.exact_gamma.iter().fold(0.0f64, |m, g| m.max(g.abs()));
        if scale == 0.0 {
            self.max_interior_error
        } else {
            self.max_interior_error / scale
        }
    }
}

/// Generate data for `spec` with coefficient `gamma` and invert it on
/// `spec.grid`.
pub fn round_trip(
    spec: &ProblemSpec,
    gamma: &GammaProfile,
    refinement: usize,
    noise_level: f64,
    seed: u64,
    opts: &InvertOptions,
) -> Result<RoundTrip> {
    let measured = synthetic_measurements(spec, gamma, refinement, noise_level, seed)?;
    let inversion = invert(spec, &measured, opts)?;
    let exact_gamma = gamma.sample(&spec.grid);
    let max_interior_error = max_interior_error(&inversion.gamma, &exact_gamma);
    Ok(RoundTrip {
        inversion,
        measured,
        exact_gamma,
        max_interior_error,
    })
}
