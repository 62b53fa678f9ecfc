//! Coefficient recovery `gamma = -(ln xi)'`, the hypothesis checker, and
//! verification of a recovered coefficient by re-running the forward problem.

use std::fmt;
use std::ops::RangeInclusive;

use crate::error::{Error, Result};
use crate::evolution::Propagator;
use crate::forward::direct_states;
use crate::model::{Backend, MeasurementSeries, ProblemSpec, StateVector, TimeGrid};
use crate::volterra::{KernelSet, XiSeries};

/// Relative tolerance for `phi(0) = <u0, w>`.
pub const INITIAL_CONSISTENCY_RTOL: f64 = 1e-8;

/// Largest `n` with `xi_j > 0` for every `j <= n`.
pub fn positivity_horizon(xi: &[f64]) -> Result<usize> {
    match xi.first() {
        Some(&x0) if x0 > 0.0 => {}
        Some(&x0) => return Err(Error::NoPositivityAtOrigin { xi0: x0 }),
        None => {
            return Err(Error::LengthMismatch {
                expected: 1,
                found: 0,
            })
        }
    }
    Ok(xi
        .iter()
        .position(|&x| !(x > 0.0))
        .map_or(xi.len() - 1, |n| n - 1))
}

/// Recovered coefficient on `[0, t_last]`.
#[derive(Debug, Clone, PartialEq)]
pub struct GammaSeries {
    pub gamma: Vec<f64>,
}

impl GammaSeries {
    pub fn last(&self) -> usize {
        self.gamma.len() - 1
    }

    pub fn valid_range(&self) -> RangeInclusive<usize> {
        0..=self.last()
    }

    pub fn is_truncated(&self, grid: &TimeGrid) -> bool {
        self.last() < grid.steps()
    }
}

/// `gamma` on the whole grid; fails if `xi` is not positive everywhere.
pub fn recover_gamma(xi: &XiSeries, grid: &TimeGrid) -> Result<GammaSeries> {
    recover_gamma_until(xi, grid, grid.steps())
}

/// `gamma_n = -(ln xi)'(t_n)` for `n = 0..=last`: central differences inside,
/// second-order one-sided differences at both ends of the range.
pub fn recover_gamma_until(xi: &XiSeries, grid: &TimeGrid, last: usize) -> Result<GammaSeries> {
    if xi.xi.len() != grid.len() {
        return Err(Error::LengthMismatch {
            expected: grid.len(),
            found: xi.xi.len(),
        });
    }
    assert!(last <= grid.steps(), "range end {last} beyond the grid");
    if let Some(node) = xi.xi[..=last].iter().position(|&x| !(x > 0.0)) {
        return Err(Error::PositivityHorizonExceeded { node });
    }
    if last < 2 {
        // Too few positive samples for a second-order stencil.
        return Err(Error::PositivityHorizonExceeded { node: last + 1 });
    }
    let h = grid.step();
    let ln: Vec<f64> = xi.xi[..=last].iter().map(|x| x.ln()).collect();
    let mut gamma = Vec::with_capacity(last + 1);
    gamma.push(-(-3.0 * ln[0] + 4.0 * ln[1] - ln[2]) / (2.0 * h));
    for n in 1..last {
        gamma.push(-(ln[n + 1] - ln[n - 1]) / (2.0 * h));
    }
    gamma.push(-(3.0 * ln[last] - 4.0 * ln[last - 1] + ln[last - 2]) / (2.0 * h));
    Ok(GammaSeries { gamma })
}

/// Centered moving average with half-width `half_width`, shrinking the
/// window symmetrically near the ends so the end samples are kept as-is.
/// `half_width == 0` returns the input unchanged.
pub fn smooth_moving_average(phi: &MeasurementSeries, half_width: usize) -> MeasurementSeries {
    if half_width == 0 {
        return phi.clone();
    }
    let p = &phi.phi;
    let last = p.len().saturating_sub(1);
    let smoothed = (0..p.len())
        .map(|n| {
            let k = half_width.min(n).min(last - n);
            p[n - k..=n + k].iter().sum::<f64>() / (2 * k + 1) as f64
        })
        .collect();
    MeasurementSeries {
        phi: smoothed,
        ..phi.clone()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Pass,
    Warn,
    Fail,
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Status::Pass => "pass",
            Status::Warn => "warn",
            Status::Fail => "fail",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Hypothesis {
    /// `|phi_n| >= floor` on the whole grid.
    PhiSeparated,
    /// `phi` keeps one sign.
    PhiSignConstant,
    /// `phi(0) = <u0, w> != 0`.
    InitialConsistency,
    /// `alpha_n phi_n > 0`.
    SignAgreement,
    /// `alpha_n > 0`.
    AlphaPositive,
    /// `beta_{n,j} >= 0`.
    BetaNonnegative,
    /// `phi_n > 0`.
    PhiPositive,
    /// Parabolic backend: `u0 >= 0`.
    InitialNonnegative,
    /// Parabolic backend: `f >= 0`.
    SourceNonnegative,
    /// Parabolic backend: `w > 0` at interior nodes.
    WeightPositive,
    /// Parabolic backend: `u0 != 0`.
    InitialNonzero,
    /// Each step maps nonnegative states to nonnegative states.
    DiscreteMaximumPrinciple,
    /// Largest observed growth of `U(t_n, 0)` on probe vectors.
    PropagatorBound,
    /// Discrete `W^1_2` energy of `phi`; informational only.
    PhiRegularity,
}

impl Hypothesis {
    pub const ALL: [Hypothesis; 14] = [
        Hypothesis::PhiSeparated,
        Hypothesis::PhiSignConstant,
        Hypothesis::InitialConsistency,
        Hypothesis::SignAgreement,
        Hypothesis::AlphaPositive,
        Hypothesis::BetaNonnegative,
        Hypothesis::PhiPositive,
        Hypothesis::InitialNonnegative,
        Hypothesis::SourceNonnegative,
        Hypothesis::WeightPositive,
        Hypothesis::InitialNonzero,
        Hypothesis::DiscreteMaximumPrinciple,
        Hypothesis::PropagatorBound,
        Hypothesis::PhiRegularity,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Hypothesis::PhiSeparated => "phi_separated_from_zero",
            Hypothesis::PhiSignConstant => "phi_sign_constant",
            Hypothesis::InitialConsistency => "phi0_equals_u0_w",
            Hypothesis::SignAgreement => "alpha_phi_same_sign",
            Hypothesis::AlphaPositive => "global_alpha_positive",
            Hypothesis::BetaNonnegative => "global_beta_nonnegative",
            Hypothesis::PhiPositive => "global_phi_positive",
            Hypothesis::InitialNonnegative => "parabolic_u0_nonnegative",
            Hypothesis::SourceNonnegative => "parabolic_f_nonnegative",
            Hypothesis::WeightPositive => "parabolic_w_positive",
            Hypothesis::InitialNonzero => "parabolic_u0_nonzero",
            Hypothesis::DiscreteMaximumPrinciple => "discrete_maximum_principle",
            Hypothesis::PropagatorBound => "propagator_bound",
            Hypothesis::PhiRegularity => "phi_regularity_heuristic",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HypothesisEntry {
    pub hypothesis: Hypothesis,
    pub status: Status,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HypothesisReport {
    pub entries: Vec<HypothesisEntry>,
    /// Free-form warnings appended by the pipeline, e.g. truncation notices.
    pub notes: Vec<String>,
}

impl HypothesisReport {
    pub fn status(&self, h: Hypothesis) -> Status {
        self.entries
            .iter()
            .find(|e| e.hypothesis == h)
            .map(|e| e.status)
            .expect("every hypothesis has an entry")
    }

    pub fn entry(&self, h: Hypothesis) -> &HypothesisEntry {
        self.entries
            .iter()
            .find(|e| e.hypothesis == h)
            .expect("every hypothesis has an entry")
    }

    fn all_pass(&self, hs: &[Hypothesis]) -> bool {
        hs.iter().all(|&h| self.status(h) == Status::Pass)
    }

    /// Hypotheses guaranteeing a solution on some `[0, tau]`.
    pub fn local_solvability_expected(&self) -> bool {
        self.all_pass(&[Hypothesis::PhiSeparated, Hypothesis::InitialConsistency])
            && self.status(Hypothesis::SignAgreement) != Status::Fail
    }

    /// Hypotheses guaranteeing a solution on the whole interval.
    pub fn global_solvability_expected(&self) -> bool {
        self.local_solvability_expected()
            && self.all_pass(&[
                Hypothesis::AlphaPositive,
                Hypothesis::BetaNonnegative,
                Hypothesis::PhiPositive,
            ])
    }

    /// Sign conditions on the data of a parabolic problem under which the
    /// maximum principle yields global solvability.
    pub fn parabolic_global_expected(&self) -> bool {
        self.all_pass(&[
            Hypothesis::InitialNonnegative,
            Hypothesis::SourceNonnegative,
            Hypothesis::WeightPositive,
            Hypothesis::InitialNonzero,
            Hypothesis::PhiPositive,
        ])
    }

    pub fn has_failures(&self) -> bool {
        self.entries.iter().any(|e| e.status == Status::Fail)
    }
}

impl fmt::Display for HypothesisReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for e in &self.entries {
            writeln!(f, "[{}] {}: {}", e.status, e.hypothesis.name(), e.detail)?;
        }
        let yes_no = |b: bool| if b { "yes" } else { "no" };
        writeln!(
            f,
            "local solvability expected: {}",
            yes_no(self.local_solvability_expected())
        )?;
        writeln!(
            f,
            "global solvability expected: {}",
            yes_no(self.global_solvability_expected())
        )?;
        for note in &self.notes {
            writeln!(f, "warning: {note}")?;
        }
        Ok(())
    }
}

fn entry(hypothesis: Hypothesis, status: Status, detail: impl Into<String>) -> HypothesisEntry {
    HypothesisEntry {
        hypothesis,
        status,
        detail: detail.into(),
    }
}

fn pass_or(
    hypothesis: Hypothesis,
    failure: Option<String>,
    fail_status: Status,
    ok: &str,
) -> HypothesisEntry {
    match failure {
        None => entry(hypothesis, Status::Pass, ok),
        Some(d) => entry(hypothesis, fail_status, d),
    }
}

fn first_node(values: &[f64], bad: impl Fn(f64) -> bool) -> Option<(usize, f64)> {
    values.iter().position(|&v| bad(v)).map(|n| (n, values[n]))
}

/// Evaluates every hypothesis on the sampled data. Never fails: problems are
/// reported as statuses.
pub fn check_hypotheses(
    spec: &ProblemSpec,
    prop: &Propagator,
    k: &KernelSet,
    phi: &MeasurementSeries,
    floor: f64,
) -> HypothesisReport {
    use Hypothesis as H;
    let p = &phi.phi;
    let mut entries = Vec::with_capacity(H::ALL.len());

    entries.push(pass_or(
        H::PhiSeparated,
        first_node(p, |v| !(v.abs() >= floor))
            .map(|(n, v)| format!("|phi| = {:e} below floor {floor:e} at node {n}", v.abs())),
        Status::Fail,
        &format!(
            "min |phi| = {:e}",
            p.iter().fold(f64::INFINITY, |m, v| m.min(v.abs()))
        ),
    ));

    let sign_change = p.windows(2).position(|w| w[0].signum() != w[1].signum());
    entries.push(pass_or(
        H::PhiSignConstant,
        sign_change.map(|n| format!("phi changes sign between nodes {n} and {}", n + 1)),
        Status::Warn,
        "phi keeps one sign",
    ));

    let uw = spec.pairing.apply(spec.u0.as_slice()).unwrap_or(f64::NAN);
    let phi0 = p.first().copied().unwrap_or(f64::NAN);
    let mismatch = (phi0 - uw).abs() / phi0.abs().max(uw.abs());
    entries.push(if !(uw != 0.0 && uw.is_finite()) {
        entry(
            H::InitialConsistency,
            Status::Fail,
            format!("<u0, w> = {uw:e} vanishes"),
        )
    } else if !(mismatch <= INITIAL_CONSISTENCY_RTOL) {
        entry(
            H::InitialConsistency,
            Status::Fail,
            format!("phi(0) = {phi0:e} but <u0, w> = {uw:e} (relative mismatch {mismatch:e})"),
        )
    } else {
        entry(
            H::InitialConsistency,
            Status::Pass,
            format!("relative mismatch {mismatch:e}"),
        )
    });

    let products: Vec<f64> = k.alpha.iter().zip(p).map(|(a, f)| a * f).collect();
    entries.push(match first_node(&products, |v| !(v > 0.0)) {
        None => entry(
            H::SignAgreement,
            Status::Pass,
            "alpha * phi > 0 on the whole grid",
        ),
        Some((0, v)) => entry(
            H::SignAgreement,
            Status::Fail,
            format!("alpha(0) * phi(0) = {v:e}"),
        ),
        Some((n, v)) => entry(
            H::SignAgreement,
            Status::Warn,
            format!("alpha * phi = {v:e} at node {n}; only local solvability is covered"),
        ),
    });

    entries.push(pass_or(
        H::AlphaPositive,
        first_node(&k.alpha, |v| !(v > 0.0)).map(|(n, v)| format!("alpha = {v:e} at node {n}")),
        Status::Fail,
        "alpha > 0",
    ));
    entries.push(pass_or(
        H::BetaNonnegative,
        k.beta
            .iter()
            .find(|&(_, v)| !(v >= 0.0))
            .map(|((n, j), v)| format!("beta = {v:e} at (n, j) = ({n}, {j})")),
        Status::Fail,
        "beta >= 0",
    ));
    entries.push(pass_or(
        H::PhiPositive,
        first_node(p, |v| !(v > 0.0)).map(|(n, v)| format!("phi = {v:e} at node {n}")),
        Status::Fail,
        "phi > 0",
    ));

    match &spec.backend {
        Backend::Parabolic1D(_) => {
            entries.push(pass_or(
                H::InitialNonnegative,
                first_node(spec.u0.as_slice(), |v| !(v >= 0.0))
                    .map(|(i, v)| format!("u0 = {v:e} at interior node {}", i + 1)),
                Status::Fail,
                "u0 >= 0",
            ));
            let neg_source = spec.source.iter().enumerate().find_map(|(n, s)| {
                first_node(s.as_slice(), |v| !(v >= 0.0))
                    .map(|(i, v)| format!("f = {v:e} at time node {n}, interior node {}", i + 1))
            });
            entries.push(pass_or(
                H::SourceNonnegative,
                neg_source,
                Status::Fail,
                "f >= 0",
            ));
            entries.push(pass_or(
                H::WeightPositive,
                first_node(spec.pairing.weight.as_slice(), |v| !(v > 0.0))
                    .map(|(i, v)| format!("w = {v:e} at interior node {}", i + 1)),
                Status::Fail,
                "w > 0",
            ));
            entries.push(pass_or(
                H::InitialNonzero,
                (spec.u0.max_abs() == 0.0).then(|| "u0 vanishes identically".to_string()),
                Status::Fail,
                "u0 != 0",
            ));
        }
        Backend::MatrixFamily(_) => {
            for h in [
                H::InitialNonnegative,
                H::SourceNonnegative,
                H::WeightPositive,
                H::InitialNonzero,
            ] {
                entries.push(entry(
                    h,
                    Status::Warn,
                    "not applicable to the matrix backend",
                ));
            }
        }
    }

    let positivity = prop.positivity_report();
    entries.push(match positivity.first_violation {
        None => entry(
            H::DiscreteMaximumPrinciple,
            Status::Pass,
            "every step preserves nonnegativity",
        ),
        Some(v) => entry(
            H::DiscreteMaximumPrinciple,
            Status::Warn,
            format!(
                "{} (step {} -> {}, row {})",
                v.reason,
                v.step,
                v.step + 1,
                v.row
            ),
        ),
    });

    let mut probes = vec![spec.u0.clone(), StateVector::new(vec![1.0; spec.dim()])];
    if let Some(f0) = spec.source.first() {
        probes.push(f0.clone());
    }
    entries.push(match prop.observed_growth(&probes) {
        Ok(g) if g.is_finite() => entry(
            H::PropagatorBound,
            Status::Pass,
            format!("max observed |U(t_n, 0) v| / |v| = {g:.6e} (probe estimate, not a proof)"),
        ),
        Ok(g) => entry(H::PropagatorBound, Status::Fail, format!("growth {g}")),
        Err(e) => entry(H::PropagatorBound, Status::Fail, e.to_string()),
    });

    let h = spec.grid.step();
    let energy: f64 = h * p
        .windows(2)
        .map(|w| ((w[1] - w[0]) / h).powi(2))
        .sum::<f64>()
        + h * p.iter().map(|v| v * v).sum::<f64>();
    entries.push(entry(
        H::PhiRegularity,
        Status::Pass,
        format!("discrete W12 energy of phi = {energy:.6e} (heuristic only)"),
    ));

    HypothesisReport {
        entries,
        notes: Vec::new(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResidualReport {
    /// `max_n |<u(t_n), w> - phi_n|` over the valid range.
    pub max_abs: f64,
    /// `max_abs / max_n |phi_n|`.
    pub max_rel: f64,
    pub last: usize,
}

/// Re-runs the forward problem with the recovered coefficient and compares
/// its measurements with `phi` on the valid range.
pub fn verify_by_forward(
    gamma: &GammaSeries,
    spec: &ProblemSpec,
    phi: &MeasurementSeries,
) -> Result<ResidualReport> {
    let last = gamma.last();
    if last > spec.grid.steps() || phi.len() != spec.grid.len() {
        return Err(Error::LengthMismatch {
            expected: spec.grid.len(),
            found: phi.len().min(last + 1),
        });
    }
    let states = direct_states(&gamma.gamma, spec, last)?;
    let mut max_abs: f64 = 0.0;
    let mut scale: f64 = 0.0;
    for (s, &p) in states.iter().zip(&phi.phi) {
        let m = spec.pairing.apply(s.as_slice())?;
        max_abs = max_abs.max((m - p).abs());
        scale = scale.max(p.abs());
    }
    Ok(ResidualReport {
        max_abs,
        max_rel: max_abs / scale,
        last,
    })
}
