//! Grids, states, the measurement functional and the declarative problem
//! description shared by every other module.

use std::fmt;

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Uniform partition `0 = t_0 < t_1 < ... < t_N = T`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    final_time: f64,
    steps: usize,
    step: f64,
}

impl TimeGrid {
    pub fn new(final_time: f64, steps: usize) -> Result<Self> {
        if !(final_time.is_finite() && final_time > 0.0) {
            return Err(Error::InvalidGrid(format!(
                "T must be positive and finite, got {final_time}"
            )));
        }
        if steps < 2 {
            return Err(Error::InvalidGrid(format!(
                "N must be at least 2, got {steps}"
            )));
        }
        Ok(Self {
            final_time,
            steps,
            step: final_time / steps as f64,
        })
    }

    pub fn final_time(&self) -> f64 {
        self.final_time
    }

    /// Number of steps `N`.
    pub fn steps(&self) -> usize {
        self.steps
    }

    /// Step size `h = T / N`.
    pub fn step(&self) -> f64 {
        self.step
    }

    /// Number of nodes, `N + 1`.
    pub fn len(&self) -> usize {
        self.steps + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Node `t_n = n h`; the last node is exactly `T`.
    pub fn node(&self, n: usize) -> f64 {
        assert!(
            n <= self.steps,
            "node index {n} out of range 0..={}",
            self.steps
        );
        if n == self.steps {
            self.final_time
        } else {
            n as f64 * self.step
        }
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..=self.steps).map(|n| self.node(n)).collect()
    }

    /// Index pairs `(n, j)` with `0 <= j <= n <= N`, row by row.
    pub fn triangle(&self) -> impl Iterator<Item = (usize, usize)> {
        let steps = self.steps;
        (0..=steps).flat_map(|n| (0..=n).map(move |j| (n, j)))
    }

    /// The grid with `factor` times as many steps over the same interval.
    pub fn refined(&self, factor: usize) -> Result<Self> {
        Self::new(self.final_time, self.steps * factor)
    }
}

/// A discrete state: values at the interior spatial nodes, or the components
/// of a finite-dimensional system.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct StateVector(Vec<f64>);

impl StateVector {
    pub fn new(values: Vec<f64>) -> Self {
        Self(values)
    }

    pub fn zeros(dim: usize) -> Self {
        Self(vec![0.0; dim])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|x| x.is_finite())
    }

    pub fn max_abs(&self) -> f64 {
        self.0.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self(self.0.iter().map(|x| factor * x).collect())
    }
}

impl From<Vec<f64>> for StateVector {
    fn from(values: Vec<f64>) -> Self {
        Self(values)
    }
}

impl std::ops::Index<usize> for StateVector {
    type Output = f64;

    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

/// Discrete representative of the measurement functional `w`.
#[derive(Debug, Clone, PartialEq)]
pub struct Pairing {
    pub weight: StateVector,
    /// Quadrature weight: 1 for finite-dimensional systems, `dx` for the
    /// parabolic backend.
    pub scale: f64,
}

impl Pairing {
    pub fn new(weight: StateVector, scale: f64) -> Self {
        Self { weight, scale }
    }

    pub fn dim(&self) -> usize {
        self.weight.len()
    }

    pub fn apply(&self, u: &[f64]) -> Result<f64> {
        if u.len() != self.weight.len() {
            return Err(Error::DimensionMismatch {
                expected: self.weight.len(),
                found: u.len(),
            });
        }
        let sum: f64 = u
            .iter()
            .zip(self.weight.as_slice())
            .map(|(a, b)| a * b)
            .sum();
        Ok(self.scale * sum)
    }
}

/// Discrete pairing `scale * sum_i u_i w_i`.
pub fn pair(u: &StateVector, p: &Pairing) -> Result<f64> {
    p.apply(u.as_slice())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Stepper {
    #[default]
    CrankNicolson,
    ImplicitEuler,
}

impl Stepper {
    /// Implicitness weight of the theta scheme.
    pub fn theta(self) -> f64 {
        match self {
            Stepper::CrankNicolson => 0.5,
            Stepper::ImplicitEuler => 1.0,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Stepper::CrankNicolson => "crank_nicolson",
            Stepper::ImplicitEuler => "implicit_euler",
        }
    }
}

impl std::str::FromStr for Stepper {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "crank_nicolson" | "cn" => Ok(Stepper::CrankNicolson),
            "implicit_euler" | "ie" => Ok(Stepper::ImplicitEuler),
            other => Err(format!(
                "unknown stepper '{other}' (expected crank_nicolson or implicit_euler)"
            )),
        }
    }
}

/// `A(t)` sampled as one dense `d x d` matrix per time node.
#[derive(Debug, Clone, PartialEq)]
pub struct MatrixFamily {
    pub matrices: Vec<DMatrix<f64>>,
}

impl MatrixFamily {
    /// The same matrix at every node of `grid`.
    pub fn constant(matrix: DMatrix<f64>, grid: &TimeGrid) -> Self {
        Self {
            matrices: vec![matrix; grid.len()],
        }
    }
}

/// One-dimensional operator `(a u_x)_x + b u_x + c u` on `[0, L]` with
/// homogeneous Dirichlet conditions.
///
/// Coefficient tables are indexed `[time node][spatial node]` and cover all
/// `M + 2` spatial nodes including the two boundary nodes; the boundary
/// values of `a` enter the face averages of the first and last rows.
#[derive(Debug, Clone, PartialEq)]
pub struct Parabolic1D {
    pub length: f64,
    pub interior: usize,
    pub diffusion: Vec<Vec<f64>>,
    pub advection: Vec<Vec<f64>>,
    pub reaction: Vec<Vec<f64>>,
}

impl Parabolic1D {
    /// Time-independent coefficients given as functions of `x`.
    pub fn from_fns(
        length: f64,
        interior: usize,
        grid: &TimeGrid,
        a: impl Fn(f64) -> f64,
        b: impl Fn(f64) -> f64,
        c: impl Fn(f64) -> f64,
    ) -> Self {
        let dx = length / (interior + 1) as f64;
        let sample = |g: &dyn Fn(f64) -> f64| -> Vec<f64> {
            (0..interior + 2).map(|i| g(i as f64 * dx)).collect()
        };
        let (sa, sb, sc) = (sample(&a), sample(&b), sample(&c));
        Self {
            length,
            interior,
            diffusion: vec![sa; grid.len()],
            advection: vec![sb; grid.len()],
            reaction: vec![sc; grid.len()],
        }
    }

    pub fn dx(&self) -> f64 {
        self.length / (self.interior + 1) as f64
    }

    /// Coordinates of the interior nodes `x_1 .. x_M`.
    pub fn interior_points(&self) -> Vec<f64> {
        let dx = self.dx();
        (1..=self.interior).map(|i| i as f64 * dx).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Backend {
    MatrixFamily(MatrixFamily),
    Parabolic1D(Parabolic1D),
}

/// Everything needed to pose the forward and the inverse problem except the
/// unknown coefficient and the measurements.
#[derive(Debug, Clone, PartialEq)]
pub struct ProblemSpec {
    pub grid: TimeGrid,
    pub backend: Backend,
    pub u0: StateVector,
    /// `f(t_n)` for `n = 0..=N`.
    pub source: Vec<StateVector>,
    pub pairing: Pairing,
    pub stepper: Stepper,
}

impl ProblemSpec {
    pub fn dim(&self) -> usize {
        self.u0.len()
    }

    /// Resample onto a grid `factor` times finer. Only valid for problems whose
    /// data do not depend on time, which is what the presets produce; the
    /// per-node tables are repeated from node 0.
    pub fn with_grid(&self, grid: TimeGrid) -> Self {
        let mut out = self.clone();
        out.grid = grid;
        let len = grid.len();
        out.source = vec![self.source[0].clone(); len];
        match &mut out.backend {
            Backend::MatrixFamily(m) => m.matrices = vec![m.matrices[0].clone(); len],
            Backend::Parabolic1D(p) => {
                p.diffusion = vec![p.diffusion[0].clone(); len];
                p.advection = vec![p.advection[0].clone(); len];
                p.reaction = vec![p.reaction[0].clone(); len];
            }
        }
        out
    }

    pub fn is_time_independent(&self) -> bool {
        let same = |rows: &[Vec<f64>]| rows.iter().all(|r| r == &rows[0]);
        let source = self.source.iter().all(|s| s == &self.source[0]);
        source
            && match &self.backend {
                Backend::MatrixFamily(m) => m.matrices.iter().all(|a| a == &m.matrices[0]),
                Backend::Parabolic1D(p) => {
                    same(&p.diffusion) && same(&p.advection) && same(&p.reaction)
                }
            }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Provenance {
    Synthetic,
    External,
}

/// Samples `phi(t_n)` of the measured functional.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementSeries {
    pub phi: Vec<f64>,
    pub provenance: Provenance,
    pub noise_seed: Option<u64>,
}

impl MeasurementSeries {
    pub fn external(phi: Vec<f64>) -> Self {
        Self {
            phi,
            provenance: Provenance::External,
            noise_seed: None,
        }
    }

    pub fn synthetic(phi: Vec<f64>, noise_seed: Option<u64>) -> Self {
        Self {
            phi,
            provenance: Provenance::Synthetic,
            noise_seed,
        }
    }

    pub fn len(&self) -> usize {
        self.phi.len()
    }

    pub fn is_empty(&self) -> bool {
        self.phi.is_empty()
    }

    pub fn is_finite(&self) -> bool {
        self.phi.iter().all(|x| x.is_finite())
    }

    /// Every `stride`-th sample, for inverting fine-grid data on a coarser grid.
    pub fn subsample(&self, stride: usize) -> Self {
        Self {
            phi: self.phi.iter().copied().step_by(stride).collect(),
            ..self.clone()
        }
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            phi: self.phi.iter().map(|x| factor * x).collect(),
            ..self.clone()
        }
    }
}

/// One broken invariant of a [`ProblemSpec`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub field: String,
    pub detail: String,
}

impl Violation {
    fn new(field: impl Into<String>, detail: impl Into<String>) -> Self {
        Self {
            field: field.into(),
            detail: detail.into(),
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.detail)
    }
}

/// Lists every broken invariant of `spec`; empty when the spec is consistent.
pub fn validate_spec(spec: &ProblemSpec) -> Vec<Violation> {
    let mut out = Vec::new();
    let nodes = spec.grid.len();
    let d = spec.u0.len();

    if d == 0 {
        out.push(Violation::new("u0", "empty state"));
    }
    if !spec.u0.is_finite() {
        out.push(Violation::new("u0", "non-finite entry"));
    }
    if spec.pairing.dim() != d {
        out.push(Violation::new("u0/weight", "dimension mismatch"));
    }
    if !spec.pairing.weight.is_finite() {
        out.push(Violation::new("weight", "non-finite entry"));
    }
    if !(spec.pairing.scale.is_finite() && spec.pairing.scale > 0.0) {
        out.push(Violation::new(
            "pairing.scale",
            format!("must be positive and finite, got {}", spec.pairing.scale),
        ));
    }

    if spec.source.len() != nodes {
        out.push(Violation::new(
            "source",
            format!("length {}, expected {}", spec.source.len(), nodes),
        ));
    }
    if let Some(n) = spec.source.iter().position(|s| s.len() != d) {
        out.push(Violation::new(
            "source",
            format!(
                "entry {n} has dimension {}, expected {d}",
                spec.source[n].len()
            ),
        ));
    }
    if let Some(n) = spec.source.iter().position(|s| !s.is_finite()) {
        out.push(Violation::new(
            "source",
            format!("non-finite entry at node {n}"),
        ));
    }

    match &spec.backend {
        Backend::MatrixFamily(m) => {
            if m.matrices.len() != nodes {
                out.push(Violation::new(
                    "matrices",
                    format!("length {}, expected {}", m.matrices.len(), nodes),
                ));
            }
            if let Some(n) = m
                .matrices
                .iter()
                .position(|a| a.nrows() != d || a.ncols() != d)
            {
                out.push(Violation::new(
                    "matrices",
                    format!("entry {n} is not {d}x{d}"),
                ));
            }
            if let Some(n) = m
                .matrices
                .iter()
                .position(|a| a.iter().any(|x| !x.is_finite()))
            {
                out.push(Violation::new(
                    "matrices",
                    format!("non-finite entry at node {n}"),
                ));
            }
        }
        Backend::Parabolic1D(p) => {
            if !(p.length.is_finite() && p.length > 0.0) {
                out.push(Violation::new(
                    "L",
                    format!("must be positive, got {}", p.length),
                ));
            }
            if p.interior != d {
                out.push(Violation::new(
                    "M",
                    format!("{} interior nodes but state dimension {d}", p.interior),
                ));
            }
            for (name, table) in [
                ("diffusion", &p.diffusion),
                ("advection", &p.advection),
                ("reaction", &p.reaction),
            ] {
                if table.len() != nodes {
                    out.push(Violation::new(
                        name,
                        format!("length {}, expected {}", table.len(), nodes),
                    ));
                }
                if let Some(n) = table.iter().position(|row| row.len() != p.interior + 2) {
                    out.push(Violation::new(
                        name,
                        format!(
                            "row {n} has {} spatial samples, expected {}",
                            table[n].len(),
                            p.interior + 2
                        ),
                    ));
                }
                if let Some(n) = table
                    .iter()
                    .position(|row| row.iter().any(|x| !x.is_finite()))
                {
                    out.push(Violation::new(
                        name,
                        format!("non-finite entry at node {n}"),
                    ));
                }
            }
        }
    }
    out
}
