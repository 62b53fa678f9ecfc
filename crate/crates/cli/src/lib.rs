//! Command-line front end for [`coefid`].
//!
//! A run is described by a flat `key = value` file (see [`config`]) and
//! writes CSV and text reports into an output directory (see [`run`]).

pub mod config;
pub mod csv;
pub mod error;
pub mod run;

pub use config::{Mode, RunConfig};
pub use error::CliError;
