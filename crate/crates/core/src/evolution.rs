//! Discrete evolution family `U(t_n, t_m)` generated by `A(t)`.
//!
//! A step from `t_n` to `t_{n+1}` is the theta scheme
//! `(I - theta h A_{n+1}) z = (I + (1 - theta) h A_n) v`, with `theta = 1/2`
//! (Crank-Nicolson) or `theta = 1` (implicit Euler). Longer propagations are
//! sequential compositions of single steps, so the identity and composition
//! laws of an evolution family hold exactly, not just approximately.

use nalgebra::{DMatrix, DVector, LU};

use crate::error::{Error, Result};
use crate::model::{
    validate_spec, Backend, Parabolic1D, ProblemSpec, StateVector, Stepper, TimeGrid,
};

/// Tridiagonal matrix stored by diagonals. `lower[0]` and `upper[m - 1]` are
/// unused and kept at zero.
#[derive(Debug, Clone, PartialEq)]
pub struct Tridiagonal {
    pub lower: Vec<f64>,
    pub diag: Vec<f64>,
    pub upper: Vec<f64>,
}

impl Tridiagonal {
    pub fn dim(&self) -> usize {
        self.diag.len()
    }

    pub fn mul_vec(&self, v: &[f64]) -> Vec<f64> {
        let m = self.dim();
        (0..m)
            .map(|i| {
                let mut s = self.diag[i] * v[i];
                if i > 0 {
                    s += self.lower[i] * v[i - 1];
                }
                if i + 1 < m {
                    s += self.upper[i] * v[i + 1];
                }
                s
            })
            .collect()
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let m = self.dim();
        DMatrix::from_fn(m, m, |i, j| {
            if i == j {
                self.diag[i]
            } else if i == j + 1 {
                self.lower[i]
            } else if j == i + 1 {
                self.upper[i]
            } else {
                0.0
            }
        })
    }

    /// `I + coef (self + shift I)`.
    fn identity_plus(&self, coef: f64, shift: f64) -> Tridiagonal {
        Tridiagonal {
            lower: self.lower.iter().map(|x| coef * x).collect(),
            diag: self.diag.iter().map(|x| 1.0 + coef * (x + shift)).collect(),
            upper: self.upper.iter().map(|x| coef * x).collect(),
        }
    }
}

/// Thomas-algorithm factorization of a tridiagonal system.
#[derive(Debug, Clone)]
pub struct ThomasFactor {
    lower: Vec<f64>,
    /// Modified super-diagonal `c'_i`.
    upper: Vec<f64>,
    /// Pivots `d_i - l_i c'_{i-1}`.
    pivot: Vec<f64>,
}

impl ThomasFactor {
    pub fn new(t: &Tridiagonal) -> Option<Self> {
        let m = t.dim();
        let mut upper = vec![0.0; m];
        let mut pivot = vec![0.0; m];
        for i in 0..m {
            let carry = if i > 0 {
                t.lower[i] * upper[i - 1]
            } else {
                0.0
            };
            let p = t.diag[i] - carry;
            let scale = t.diag[i].abs() + t.lower[i].abs() + t.upper[i].abs();
            if !p.is_finite() || p.abs() <= f64::EPSILON * scale {
                return None;
            }
            pivot[i] = p;
            upper[i] = if i + 1 < m { t.upper[i] / p } else { 0.0 };
        }
        Some(Self {
            lower: t.lower.clone(),
            upper,
            pivot,
        })
    }

    pub fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        let m = self.pivot.len();
        let mut x = vec![0.0; m];
        for i in 0..m {
            let carry = if i > 0 { self.lower[i] * x[i - 1] } else { 0.0 };
            x[i] = (rhs[i] - carry) / self.pivot[i];
        }
        for i in (0..m.saturating_sub(1)).rev() {
            x[i] -= self.upper[i] * x[i + 1];
        }
        x
    }
}

/// The generator `A(t_n)` at one node.
#[derive(Debug, Clone)]
pub(crate) enum NodeOperator {
    Tridiagonal(Tridiagonal),
    Dense(DMatrix<f64>),
}

/// A factored system matrix `I - coef (A + shift I)`.
#[derive(Debug, Clone)]
pub(crate) enum SystemFactor {
    Tridiagonal(ThomasFactor),
    Dense(LU<f64, nalgebra::Dyn, nalgebra::Dyn>),
}

impl SystemFactor {
    pub(crate) fn solve(&self, rhs: &[f64]) -> Option<Vec<f64>> {
        match self {
            SystemFactor::Tridiagonal(f) => Some(f.solve(rhs)),
            SystemFactor::Dense(lu) => lu
                .solve(&DVector::from_column_slice(rhs))
                .map(|x| x.as_slice().to_vec()),
        }
    }
}

impl NodeOperator {
    /// `(I + coef (A + shift I)) v`.
    pub(crate) fn explicit(&self, coef: f64, shift: f64, v: &[f64]) -> Vec<f64> {
        let av = match self {
            NodeOperator::Tridiagonal(t) => t.mul_vec(v),
            NodeOperator::Dense(a) => (a * DVector::from_column_slice(v)).as_slice().to_vec(),
        };
        v.iter()
            .zip(av)
            .map(|(x, ax)| x + coef * (ax + shift * x))
            .collect()
    }

    /// Factor `I - coef (A + shift I)`; `None` when singular.
    pub(crate) fn factor_system(&self, coef: f64, shift: f64) -> Option<SystemFactor> {
        match self {
            NodeOperator::Tridiagonal(t) => {
                ThomasFactor::new(&t.identity_plus(-coef, shift)).map(SystemFactor::Tridiagonal)
            }
            NodeOperator::Dense(a) => {
                let d = a.nrows();
                let sys = DMatrix::identity(d, d) - (a + DMatrix::identity(d, d) * shift) * coef;
                let lu = sys.lu();
                let finite = lu.u().iter().all(|x| x.is_finite());
                (finite && lu.is_invertible()).then_some(SystemFactor::Dense(lu))
            }
        }
    }

    pub(crate) fn dense(&self) -> DMatrix<f64> {
        match self {
            NodeOperator::Tridiagonal(t) => t.to_dense(),
            NodeOperator::Dense(a) => a.clone(),
        }
    }
}

/// Assemble `(a u_x)_x + b u_x + c u` on the interior nodes with zero
/// Dirichlet data. `a`, `b`, `c` hold samples at all `M + 2` spatial nodes.
///
/// Diffusion uses face averages `a_{i+1/2} = (a_i + a_{i+1}) / 2`, advection
/// a centered difference.
pub fn assemble_parabolic_operator(
    a: &[f64],
    b: &[f64],
    c: &[f64],
    dx: f64,
    time_node: usize,
) -> Result<Tridiagonal> {
    let nodes = a.len();
    if nodes < 3 || b.len() != nodes || c.len() != nodes {
        return Err(Error::InvalidProblem(format!(
            "coefficient samples must cover M + 2 >= 3 nodes (got {}, {}, {})",
            a.len(),
            b.len(),
            c.len()
        )));
    }
    if let Some(i) = a.iter().position(|&v| !(v > 0.0)) {
        return Err(Error::Ellipticity {
            time_node,
            space_node: i,
            value: a[i],
        });
    }
    let m = nodes - 2;
    let dx2 = dx * dx;
    let mut lower = vec![0.0; m];
    let mut diag = vec![0.0; m];
    let mut upper = vec![0.0; m];
    for k in 0..m {
        let i = k + 1;
        let west = 0.5 * (a[i] + a[i - 1]);
        let east = 0.5 * (a[i] + a[i + 1]);
        let adv = b[i] / (2.0 * dx);
        diag[k] = -(east + west) / dx2 + c[i];
        if k > 0 {
            lower[k] = west / dx2 - adv;
        }
        if k + 1 < m {
            upper[k] = east / dx2 + adv;
        }
    }
    Ok(Tridiagonal { lower, diag, upper })
}

pub(crate) fn parabolic_operator_at(p: &Parabolic1D, n: usize) -> Result<Tridiagonal> {
    assemble_parabolic_operator(&p.diffusion[n], &p.advection[n], &p.reaction[n], p.dx(), n)
}

/// Generator samples `A(t_n)` for every node, after validating the spec.
pub(crate) fn generator_table(spec: &ProblemSpec) -> Result<Vec<NodeOperator>> {
    let violations = validate_spec(spec);
    if !violations.is_empty() {
        let text: Vec<String> = violations.iter().map(|v| v.to_string()).collect();
        return Err(Error::InvalidProblem(text.join("; ")));
    }
    match &spec.backend {
        Backend::MatrixFamily(m) => Ok(m
            .matrices
            .iter()
            .cloned()
            .map(NodeOperator::Dense)
            .collect()),
        Backend::Parabolic1D(p) => (0..spec.grid.len())
            .map(|n| parabolic_operator_at(p, n).map(NodeOperator::Tridiagonal))
            .collect(),
    }
}

/// Where the discrete maximum principle can fail.
#[derive(Debug, Clone, PartialEq)]
pub struct PositivityViolation {
    /// Index of the step `n -> n + 1`.
    pub step: usize,
    pub row: usize,
    pub reason: &'static str,
}

/// Outcome of checking that every step maps nonnegative states to
/// nonnegative states: the implicit matrix must be an M-matrix (positive
/// diagonal, nonpositive off-diagonal, strict row dominance) and, for
/// Crank-Nicolson, the explicit matrix must be entrywise nonnegative.
#[derive(Debug, Clone, PartialEq)]
pub struct PositivityReport {
    pub first_violation: Option<PositivityViolation>,
}

impl PositivityReport {
    pub fn holds(&self) -> bool {
        self.first_violation.is_none()
    }
}

/// Checks the sign pattern of `I - coef (A + shift I)` and, when
/// `explicit_coef > 0`, of `I + explicit_coef (A_prev + shift_prev I)`.
pub(crate) fn step_sign_pattern(
    implicit: &DMatrix<f64>,
    coef: f64,
    shift: f64,
    explicit: Option<(&DMatrix<f64>, f64, f64)>,
) -> Option<(usize, &'static str)> {
    let d = implicit.nrows();
    for i in 0..d {
        let diag = 1.0 - coef * (implicit[(i, i)] + shift);
        let mut off = 0.0;
        for j in 0..d {
            if i == j {
                continue;
            }
            let s = -coef * implicit[(i, j)];
            if s > 0.0 {
                return Some((i, "positive off-diagonal in implicit matrix"));
            }
            off += s.abs();
        }
        if !(diag > off) {
            return Some((i, "implicit matrix not strictly diagonally dominant"));
        }
        if let Some((a, ecoef, eshift)) = explicit {
            for j in 0..d {
                let e = if i == j {
                    1.0 + ecoef * (a[(i, j)] + eshift)
                } else {
                    ecoef * a[(i, j)]
                };
                if e < 0.0 {
                    return Some((i, "negative entry in explicit matrix"));
                }
            }
        }
    }
    None
}

/// Discrete evolution family for one problem, with one factored system
/// matrix per time node.
#[derive(Debug, Clone)]
pub struct Propagator {
    grid: TimeGrid,
    stepper: Stepper,
    dim: usize,
    operators: Vec<NodeOperator>,
    /// `factors[n]` solves the implicit half of step `n -> n + 1`.
    factors: Vec<SystemFactor>,
}

impl Propagator {
    pub fn new(spec: &ProblemSpec) -> Result<Self> {
        let operators = generator_table(spec)?;
        let h = spec.grid.step();
        let theta = spec.stepper.theta();
        let factors = (1..operators.len())
            .map(|n| {
                operators[n]
                    .factor_system(theta * h, 0.0)
                    .ok_or(Error::SingularSystem { node: n })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            grid: spec.grid,
            stepper: spec.stepper,
            dim: spec.dim(),
            operators,
            factors,
        })
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn stepper(&self) -> Stepper {
        self.stepper
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Dense copy of `A(t_n)`.
    pub fn generator(&self, n: usize) -> DMatrix<f64> {
        self.operators[n].dense()
    }

    pub(crate) fn step_slice(&self, v: &[f64], n: usize) -> Result<Vec<f64>> {
        if v.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: v.len(),
            });
        }
        let h = self.grid.step();
        let z = match self.stepper {
            Stepper::CrankNicolson => {
                let rhs = self.operators[n].explicit(0.5 * h, 0.0, v);
                self.factors[n].solve(&rhs)
            }
            Stepper::ImplicitEuler => self.factors[n].solve(v),
        }
        .ok_or(Error::SingularSystem { node: n + 1 })?;
        if z.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite { node: n + 1 });
        }
        Ok(z)
    }

    /// One step from `t_n` to `t_{n+1}`.
    pub fn step(&self, v: &StateVector, n: usize) -> Result<StateVector> {
        assert!(n < self.grid.steps(), "step index {n} out of range");
        self.step_slice(v.as_slice(), n).map(StateVector::new)
    }

    /// `U(t_to, t_from) v`; returns `v` unchanged when `from == to`.
    pub fn propagate(&self, v: &StateVector, from: usize, to: usize) -> Result<StateVector> {
        assert!(
            from <= to && to <= self.grid.steps(),
            "invalid propagation range {from}..{to}"
        );
        let mut state = v.as_slice().to_vec();
        for n in from..to {
            state = self.step_slice(&state, n)?;
        }
        Ok(StateVector::new(state))
    }

    /// Calls `visit(n, state)` for `n = from..=N` with `state = U(t_n, t_from) v`.
    pub fn sweep(
        &self,
        v: &[f64],
        from: usize,
        mut visit: impl FnMut(usize, &[f64]) -> Result<()>,
    ) -> Result<()> {
        let mut state = v.to_vec();
        visit(from, &state)?;
        for n in from..self.grid.steps() {
            state = self.step_slice(&state, n)?;
            visit(n + 1, &state)?;
        }
        Ok(())
    }

    /// Checks that every step preserves nonnegativity.
    pub fn positivity_report(&self) -> PositivityReport {
        self.positivity_report_shifted(|_| 0.0)
    }

    pub(crate) fn positivity_report_shifted(
        &self,
        shift: impl Fn(usize) -> f64,
    ) -> PositivityReport {
        let h = self.grid.step();
        let theta = self.stepper.theta();
        for n in 0..self.grid.steps() {
            let implicit = self.operators[n + 1].dense();
            let explicit_dense;
            let explicit = if theta < 1.0 {
                explicit_dense = self.operators[n].dense();
                Some((&explicit_dense, (1.0 - theta) * h, shift(n)))
            } else {
                None
            };
            if let Some((row, reason)) =
                step_sign_pattern(&implicit, theta * h, shift(n + 1), explicit)
            {
                return PositivityReport {
                    first_violation: Some(PositivityViolation {
                        step: n,
                        row,
                        reason,
                    }),
                };
            }
        }
        PositivityReport {
            first_violation: None,
        }
    }

    /// Largest observed `|U(t_n, 0) p|_inf / |p|_inf` over the given probes.
    /// This is a lower estimate of `sup |U(t, s)|`, not a bound.
    pub fn observed_growth(&self, probes: &[StateVector]) -> Result<f64> {
        let mut worst: f64 = 0.0;
        for p in probes {
            let norm = p.max_abs();
            if norm == 0.0 {
                continue;
            }
            self.sweep(p.as_slice(), 0, |_, s| {
                let g = s.iter().fold(0.0f64, |m, x| m.max(x.abs())) / norm;
                worst = worst.max(g);
                Ok(())
            })?;
        }
        Ok(worst)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{MatrixFamily, Pairing};
    use std::f64::consts::PI;

    fn scalar(a: f64, steps: usize, t: f64, stepper: Stepper) -> ProblemSpec {
        let grid = TimeGrid::new(t, steps).unwrap();
        ProblemSpec {
            grid,
            backend: Backend::MatrixFamily(MatrixFamily::constant(
                DMatrix::from_element(1, 1, a),
                &grid,
            )),
            u0: vec![1.0].into(),
            source: vec![vec![0.0].into(); grid.len()],
            pairing: Pairing::new(vec![1.0].into(), 1.0),
            stepper,
        }
    }

    #[test]
    fn zero_generator_is_identity() {
        let p = Propagator::new(&scalar(0.0, 10, 1.0, Stepper::CrankNicolson)).unwrap();
        assert_eq!(p.step(&vec![5.0].into(), 0).unwrap(), vec![5.0].into());
    }

    #[test]
    fn scalar_decay_single_step() {
        let ie = Propagator::new(&scalar(-1.0, 10, 1.0, Stepper::ImplicitEuler)).unwrap();
        let z = ie.step(&vec![1.0].into(), 0).unwrap();
        assert!((z[0] - 1.0 / 1.1).abs() < 1e-15);

        let cn = Propagator::new(&scalar(-1.0, 10, 1.0, Stepper::CrankNicolson)).unwrap();
        let z = cn.step(&vec![1.0].into(), 0).unwrap();
        assert!((z[0] - 0.95 / 1.05).abs() < 1e-15);
    }

    #[test]
    fn propagate_identity_and_two_steps() {
        let ie = Propagator::new(&scalar(-1.0, 10, 1.0, Stepper::ImplicitEuler)).unwrap();
        let v: StateVector = vec![0.3].into();
        assert_eq!(ie.propagate(&v, 3, 3).unwrap(), v);
        let z = ie.propagate(&vec![1.0].into(), 0, 2).unwrap();
        assert!((z[0] - 1.0 / 1.21).abs() < 1e-15);
    }

    #[test]
    fn diagonal_matrix_decouples() {
        let grid = TimeGrid::new(1.0, 20).unwrap();
        let a = DMatrix::from_diagonal(&DVector::from_vec(vec![-1.0, -2.0]));
        let spec = ProblemSpec {
            grid,
            backend: Backend::MatrixFamily(MatrixFamily::constant(a, &grid)),
            u0: vec![1.0, 2.0].into(),
            source: vec![vec![0.0, 0.0].into(); grid.len()],
            pairing: Pairing::new(vec![1.0, 1.0].into(), 1.0),
            stepper: Stepper::CrankNicolson,
        };
        let p = Propagator::new(&spec).unwrap();
        let z = p.propagate(&spec.u0, 0, 20).unwrap();
        for (k, (&rate, &init)) in [-1.0, -2.0].iter().zip(&[1.0, 2.0]).enumerate() {
            let s = Propagator::new(&scalar(rate, 20, 1.0, Stepper::CrankNicolson)).unwrap();
            let zs = s.propagate(&vec![init].into(), 0, 20).unwrap();
            assert!((z[k] - zs[0]).abs() < 1e-15);
        }
    }

    #[test]
    fn composition_is_bitwise() {
        let p = Propagator::new(&scalar(-0.7, 16, 2.0, Stepper::CrankNicolson)).unwrap();
        let v: StateVector = vec![1.3].into();
        let direct = p.propagate(&v, 2, 13).unwrap();
        let split = p.propagate(&p.propagate(&v, 2, 7).unwrap(), 7, 13).unwrap();
        assert_eq!(direct, split);
    }

    #[test]
    fn laplacian_stencil() {
        let dx = 0.25;
        let t = assemble_parabolic_operator(&[1.0; 5], &[0.0; 5], &[0.0; 5], dx, 0).unwrap();
        assert_eq!(t.diag, vec![-2.0 / (dx * dx); 3]);
        assert_eq!(t.upper[..2], [1.0 / (dx * dx); 2]);
        assert_eq!(t.lower[1..], [1.0 / (dx * dx); 2]);
        assert_eq!(t.lower[0], 0.0);
        assert_eq!(t.upper[2], 0.0);

        let r = assemble_parabolic_operator(&[1.0; 5], &[0.0; 5], &[1.0; 5], dx, 0).unwrap();
        for i in 0..3 {
            assert_eq!(r.diag[i], t.diag[i] + 1.0);
        }
    }

    #[test]
    fn laplacian_sine_eigenvector() {
        let m = 31;
        let dx = PI / (m + 1) as f64;
        let t = assemble_parabolic_operator(
            &vec![1.0; m + 2],
            &vec![0.0; m + 2],
            &vec![0.0; m + 2],
            dx,
            0,
        )
        .unwrap();
        let s: Vec<f64> = (1..=m).map(|i| (i as f64 * dx).sin()).collect();
        let lambda = -(2.0 / (dx * dx)) * (1.0 - dx.cos());
        for (ls, si) in t.mul_vec(&s).iter().zip(&s) {
            assert!((ls - lambda * si).abs() < 1e-12);
        }
    }

    #[test]
    fn ellipticity_violation_cites_node() {
        let err = assemble_parabolic_operator(&[1.0, 1.0, 0.0, 1.0], &[0.0; 4], &[0.0; 4], 0.1, 7)
            .unwrap_err();
        assert_eq!(
            err,
            Error::Ellipticity {
                time_node: 7,
                space_node: 2,
                value: 0.0
            }
        );
    }

    #[test]
    fn thomas_matches_dense() {
        let t = Tridiagonal {
            lower: vec![0.0, -1.0, 0.5, -0.3],
            diag: vec![4.0, 3.0, 5.0, 2.5],
            upper: vec![1.0, -0.7, 0.2, 0.0],
        };
        let rhs = [1.0, -2.0, 0.5, 3.0];
        let x = ThomasFactor::new(&t).unwrap().solve(&rhs);
        let dense = t
            .to_dense()
            .lu()
            .solve(&DVector::from_column_slice(&rhs))
            .unwrap();
        for (a, b) in x.iter().zip(dense.iter()) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn singular_system_reports_node() {
        // I - h A = 0 when h A = 1.
        let spec = scalar(10.0, 10, 1.0, Stepper::ImplicitEuler);
        assert_eq!(
            Propagator::new(&spec).unwrap_err(),
            Error::SingularSystem { node: 1 }
        );
    }

    fn scalar_error(stepper: Stepper, steps: usize) -> f64 {
        let p = Propagator::new(&scalar(-1.0, steps, 1.0, stepper)).unwrap();
        let z = p.propagate(&vec![1.0].into(), 0, steps).unwrap();
        (z[0] - (-1.0f64).exp()).abs()
    }

    #[test]
    fn convergence_orders() {
        for (stepper, min_order) in [(Stepper::CrankNicolson, 1.9), (Stepper::ImplicitEuler, 0.9)] {
            let e: Vec<f64> = [20, 40, 80]
                .iter()
                .map(|&n| scalar_error(stepper, n))
                .collect();
            for w in e.windows(2) {
                let order = (w[0] / w[1]).log2();
                assert!(order >= min_order, "{stepper:?}: order {order}");
            }
        }
    }

    #[test]
    fn m_matrix_report() {
        let grid = TimeGrid::new(1.0, 10).unwrap();
        let heat = |b: f64, stepper| ProblemSpec {
            grid,
            backend: Backend::Parabolic1D(Parabolic1D::from_fns(
                PI,
                9,
                &grid,
                |_| 1.0,
                move |_| b,
                |_| 0.0,
            )),
            u0: StateVector::zeros(9),
            source: vec![StateVector::zeros(9); grid.len()],
            pairing: Pairing::new(vec![1.0; 9].into(), PI / 10.0),
            stepper,
        };
        let p = Propagator::new(&heat(0.0, Stepper::ImplicitEuler)).unwrap();
        assert!(p.positivity_report().holds());
        // dx = pi/10: 1/dx^2 ~ 10.1 < |b|/(2 dx) = 50/pi ~ 15.9.
        let p = Propagator::new(&heat(100.0, Stepper::ImplicitEuler)).unwrap();
        let v = p.positivity_report().first_violation.unwrap();
        assert_eq!(v.step, 0);
        // Crank-Nicolson with h / dx^2 large loses the explicit-side sign.
        let p = Propagator::new(&heat(0.0, Stepper::CrankNicolson)).unwrap();
        assert_eq!(
            p.positivity_report().first_violation.unwrap().reason,
            "negative entry in explicit matrix"
        );
    }
}
