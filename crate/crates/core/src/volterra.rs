//! Discrete kernels of the second-kind Volterra equation
//!
//! ```text
//! phi(t) xi(t) = alpha(t) + int_0^t beta(t, s) xi(s) ds,
//! alpha(t) = <U(t, 0) u0, w>,   beta(t, s) = <U(t, s) f(s), w>,
//! ```
//!
//! and two solvers for it: a forward-marching recursion and an independent
//! dense triangular solve of the same trapezoid system.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::evolution::Propagator;
use crate::inversion::positivity_horizon;
use crate::model::{MeasurementSeries, ProblemSpec, TimeGrid};

/// Default lower bound on `|phi_n|` and on the recursion denominators.
pub const DEFAULT_FLOOR: f64 = 1e-12;

/// Lower-triangular table indexed by `(n, j)` with `0 <= j <= n < size`,
/// stored row by row.
#[derive(Debug, Clone, PartialEq)]
pub struct LowerTriangular {
    size: usize,
    data: Vec<f64>,
}

impl LowerTriangular {
    pub fn zeros(size: usize) -> Self {
        Self {
            size,
            data: vec![0.0; size * (size + 1) / 2],
        }
    }

    pub fn from_fn(size: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(size * (size + 1) / 2);
        for n in 0..size {
            for j in 0..=n {
                data.push(f(n, j));
            }
        }
        Self { size, data }
    }

    pub fn size(&self) -> usize {
        self.size
    }

    fn offset(n: usize) -> usize {
        n * (n + 1) / 2
    }

    pub fn get(&self, n: usize, j: usize) -> f64 {
        assert!(j <= n && n < self.size, "({n}, {j}) outside the triangle");
        self.data[Self::offset(n) + j]
    }

    pub fn set(&mut self, n: usize, j: usize, value: f64) {
        assert!(j <= n && n < self.size, "({n}, {j}) outside the triangle");
        self.data[Self::offset(n) + j] = value;
    }

    /// Entries `(n, 0..=n)`.
    pub fn row(&self, n: usize) -> &[f64] {
        &self.data[Self::offset(n)..Self::offset(n + 1)]
    }

    pub fn iter(&self) -> impl Iterator<Item = ((usize, usize), f64)> + '_ {
        (0..self.size).flat_map(move |n| {
            self.row(n)
                .iter()
                .enumerate()
                .map(move |(j, &v)| ((n, j), v))
        })
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            size: self.size,
            data: self.data.iter().map(|x| factor * x).collect(),
        }
    }
}

/// `alpha_n = <U(t_n, 0) u0, w>` and `beta_{n,j} = <U(t_n, t_j) f(t_j), w>`.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelSet {
    pub alpha: Vec<f64>,
    pub beta: LowerTriangular,
}

impl KernelSet {
    pub fn len(&self) -> usize {
        self.alpha.len()
    }

    pub fn is_empty(&self) -> bool {
        self.alpha.is_empty()
    }

    pub fn is_finite(&self) -> bool {
        self.alpha.iter().all(|x| x.is_finite()) && self.beta.iter().all(|(_, v)| v.is_finite())
    }
}

fn failing_node(e: &Error) -> Option<usize> {
    match e {
        Error::SingularSystem { node } | Error::NonFinite { node } => Some(*node),
        _ => None,
    }
}

fn kernel_error(j: usize, e: Error) -> Error {
    Error::Kernel {
        n: failing_node(&e).unwrap_or(j),
        j,
        source: Box::new(e),
    }
}

/// Build `alpha` by one sweep of `u0` and `beta` column by column.
///
/// Columns are independent and run on the current rayon pool; each writes a
/// fixed slot, so the result does not depend on the number of threads.
pub fn assemble_kernels(prop: &Propagator, spec: &ProblemSpec) -> Result<KernelSet> {
    let size = spec.grid.len();
    if prop.grid() != &spec.grid {
        return Err(Error::InvalidProblem(
            "propagator and spec use different grids".into(),
        ));
    }
    let pairing = &spec.pairing;

    let mut alpha = Vec::with_capacity(size);
    prop.sweep(spec.u0.as_slice(), 0, |_, s| {
        alpha.push(pairing.apply(s)?);
        Ok(())
    })
    .map_err(|e| kernel_error(0, e))?;

    let columns: Vec<Vec<f64>> = (0..size)
        .into_par_iter()
        .map(|j| {
            let mut col = Vec::with_capacity(size - j);
            prop.sweep(spec.source[j].as_slice(), j, |_, s| {
                col.push(pairing.apply(s)?);
                Ok(())
            })
            .map_err(|e| kernel_error(j, e))?;
            Ok(col)
        })
        .collect::<Result<_>>()?;

    let mut beta = LowerTriangular::zeros(size);
    for (j, col) in columns.iter().enumerate() {
        for (k, &v) in col.iter().enumerate() {
            beta.set(j + k, j, v);
        }
    }
    Ok(KernelSet { alpha, beta })
}

/// Solution of the discrete Volterra equation.
#[derive(Debug, Clone, PartialEq)]
pub struct XiSeries {
    pub xi: Vec<f64>,
    /// Largest index with `xi_j > 0` for all `j <= index`.
    pub positivity_horizon: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveOptions {
    /// Minimum admissible `|phi_n|` and `|phi_n - h beta_{n,n} / 2|`.
    pub floor: f64,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            floor: DEFAULT_FLOOR,
        }
    }
}

fn check_inputs(
    k: &KernelSet,
    phi: &MeasurementSeries,
    grid: &TimeGrid,
    opts: &SolveOptions,
) -> Result<()> {
    let size = grid.len();
    for found in [k.alpha.len(), k.beta.size(), phi.len()] {
        if found != size {
            return Err(Error::LengthMismatch {
                expected: size,
                found,
            });
        }
    }
    if let Some(node) = phi.phi.iter().position(|p| !(p.abs() >= opts.floor)) {
        return Err(Error::MeasurementNearZero {
            node,
            value: phi.phi[node].abs(),
        });
    }
    let (a0, p0) = (k.alpha[0], phi.phi[0]);
    if !(a0 * p0 > 0.0) {
        return Err(Error::SignAtOrigin {
            alpha0: a0,
            phi0: p0,
        });
    }
    Ok(())
}

fn denominator(
    k: &KernelSet,
    phi: &MeasurementSeries,
    h: f64,
    n: usize,
    floor: f64,
) -> Result<f64> {
    let d = phi.phi[n] - 0.5 * h * k.beta.get(n, n);
    if !(d.abs() >= floor) {
        return Err(Error::DegenerateDenominator { node: n, value: d });
    }
    Ok(d)
}

/// Forward-marching trapezoid recursion:
/// `xi_n = (alpha_n + h (beta_{n,0} xi_0 / 2 + sum_{0<j<n} beta_{n,j} xi_j)) / (phi_n - h beta_{n,n} / 2)`.
pub fn solve_stepwise(
    k: &KernelSet,
    phi: &MeasurementSeries,
    grid: &TimeGrid,
    opts: &SolveOptions,
) -> Result<XiSeries> {
    check_inputs(k, phi, grid, opts)?;
    let h = grid.step();
    let mut xi = Vec::with_capacity(grid.len());
    xi.push(k.alpha[0] / phi.phi[0]);
    for n in 1..grid.len() {
        let row = k.beta.row(n);
        let mut quad = 0.5 * row[0] * xi[0];
        for j in 1..n {
            quad += row[j] * xi[j];
        }
        let denom = denominator(k, phi, h, n, opts.floor)?;
        xi.push((k.alpha[n] + h * quad) / denom);
    }
    let positivity_horizon = positivity_horizon(&xi)?;
    Ok(XiSeries {
        xi,
        positivity_horizon,
    })
}

/// The trapezoid system `L xi = alpha` as a dense lower-triangular matrix.
pub fn trapezoid_system(k: &KernelSet, phi: &MeasurementSeries, grid: &TimeGrid) -> DMatrix<f64> {
    let size = grid.len();
    let h = grid.step();
    let mut l = DMatrix::zeros(size, size);
    l[(0, 0)] = phi.phi[0];
    for n in 1..size {
        l[(n, 0)] = -0.5 * h * k.beta.get(n, 0);
        for j in 1..n {
            l[(n, j)] = -h * k.beta.get(n, j);
        }
        l[(n, n)] = phi.phi[n] - 0.5 * h * k.beta.get(n, n);
    }
    l
}

/// Same discrete equation as [`solve_stepwise`], assembled as one
/// lower-triangular system and handed to a library triangular solver.
pub fn solve_dense_oracle(
    k: &KernelSet,
    phi: &MeasurementSeries,
    grid: &TimeGrid,
    opts: &SolveOptions,
) -> Result<XiSeries> {
    check_inputs(k, phi, grid, opts)?;
    let h = grid.step();
    for n in 1..grid.len() {
        denominator(k, phi, h, n, opts.floor)?;
    }
    let l = trapezoid_system(k, phi, grid);
    let rhs = DVector::from_column_slice(&k.alpha);
    let sol = l
        .solve_lower_triangular(&rhs)
        .ok_or(Error::DegenerateDenominator {
            node: 0,
            value: 0.0,
        })?;
    let xi = sol.as_slice().to_vec();
    let positivity_horizon = positivity_horizon(&xi)?;
    Ok(XiSeries {
        xi,
        positivity_horizon,
    })
}

/// `max_n |phi_n xi_n - alpha_n - Q_n(xi)|` with `Q_n` the trapezoid sum.
pub fn residual(k: &KernelSet, phi: &MeasurementSeries, grid: &TimeGrid, xi: &[f64]) -> f64 {
    let h = grid.step();
    (0..grid.len())
        .map(|n| {
            let quad = if n == 0 {
                0.0
            } else {
                let row = k.beta.row(n);
                let inner: f64 = (1..n).map(|j| row[j] * xi[j]).sum();
                h * (0.5 * row[0] * xi[0] + inner + 0.5 * row[n] * xi[n])
            };
            (phi.phi[n] * xi[n] - k.alpha[n] - quad).abs()
        })
        .fold(0.0, f64::max)
}
