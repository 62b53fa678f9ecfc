//! Recovery of a scalar time-dependent coefficient `gamma(t)` in
//!
//! ```text
//! u' = A(t) u + gamma(t) u + f(t),   u(0) = u0,
//! ```
//!
//! from one scalar measurement `phi(t) = <u(t), w>`.
//!
//! With `xi(t) = exp(-int_0^t gamma)` the measurement satisfies a linear
//! Volterra equation of the second kind,
//!
//! ```text
//! phi(t) xi(t) = <U(t, 0) u0, w> + int_0^t <U(t, s) f(s), w> xi(s) ds,
//! ```
//!
//! whose kernels only involve the evolution family `U` of the known part
//! `A(t)`. Solving it gives `xi`, and `gamma = -xi' / xi`.
//!
//! Module map:
//!
//! - [`model`]: grids, states, the pairing with `w`, problem description.
//! - [`evolution`]: discrete evolution family (matrix or 1D parabolic
//!   generator, Crank-Nicolson or implicit Euler).
//! - [`volterra`]: kernel assembly and the two Volterra solvers.
//! - [`inversion`]: `gamma` recovery, hypothesis checks, forward verification.
//! - [`forward`]: synthetic data from a known `gamma`.
//! - [`presets`], [`pipeline`]: ready-made problems and end-to-end runs.
//!
//! ```
//! use coefid::pipeline::{round_trip, InvertOptions};
//! use coefid::presets::{build_preset, PresetName, PresetParams};
//!
//! let preset = build_preset(PresetName::ScalarDecay, &PresetParams::default()).unwrap();
//! let run = round_trip(&preset.spec, &preset.gamma, 4, 0.0, 0, &InvertOptions::default()).unwrap();
//! assert!(run.max_interior_error < 1e-4);
//! ```

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod evolution;
pub mod forward;
pub mod inversion;
pub mod model;
pub mod pipeline;
pub mod presets;
pub mod volterra;

pub use error::{Error, ErrorClass, Result};
pub use model::{MeasurementSeries, Pairing, ProblemSpec, StateVector, Stepper, TimeGrid};
