//! Branched flow in time-dependent Gaussian-correlated random potentials.
//!
//! Potentials are sampled spectrally on periodic space-time grids. Classical
//! particles and quantum wave functions are propagated through them, and the
//! resulting kinetic-energy and spreading curves are compared with white-noise
//! closed forms.

// `!(x > 0.0)` style guards reject NaN along with the bad range.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod classical;
pub mod config;
pub mod error;
mod fft;
pub mod format;
pub mod grid;
pub mod potential;
pub mod quantum;
pub mod series;
pub mod sweep;
pub mod whitenoise;

pub use error::{Error, Result};
pub use grid::{CorrelationSpec, Envelope, SimulationGrid};
pub use potential::{sample_realization, PotentialRealization};
pub use config::{resolve_config, RunConfig};
pub use series::{Method, ObservableKind, ObservableSeries};
pub use sweep::{run_point, run_sweep, ParameterPoint};
