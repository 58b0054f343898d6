//! Chronocyclic Q-function simulation and maximum-likelihood reconstruction of
//! single-photon-level pulses.
//!
//! The crate covers the whole synthetic measurement chain:
//!
//! - [`grid`], [`state`], [`pulse`]: frequency grids, pure and mixed
//!   time-frequency states, and a library of test pulses;
//! - [`forward`]: projections onto shifted Gaussian modes, Q-function synthesis
//!   and photon-counting noise;
//! - [`mle`]: maximum-likelihood estimation of the two-point spectral
//!   correlation from a scan;
//! - [`metrics`]: similarity and fidelity;
//! - [`hermite`]: the Hermite-Gaussian expansion of the Q-function, used as an
//!   independent cross-check;
//! - [`dataset`], [`config`], [`cli`]: file formats and the command pipeline.

pub mod cli;
pub mod config;
pub mod dataset;
pub mod error;
pub mod forward;
pub mod grid;
pub mod hermite;
pub mod linalg;
pub mod metrics;
pub mod mle;
pub mod pulse;
pub mod state;

pub use error::{Error, Result};
pub use forward::{coherent_mode, project, q_function, simulate_counts, subtract_background, CountMap, QFunction, QpgModel};
pub use grid::{make_grid, to_dimensionless, to_physical, FrequencyGrid, PhaseSpaceGrid};
pub use hermite::{expand_state, hermite_function, q_via_expansion, HermiteExpansion};
pub use metrics::{fidelity, mode_weights, similarity};
pub use mle::{build_povm, extract_dominant_mode, fix_global_phase, log_likelihood, reconstruct, MleOptions, Povm, ReconstructionResult};
pub use pulse::{make_pulse, PulseShape, PulseSpec};
pub use state::{mixture, normalize, pure_correlation, SpectralAmplitude, SpectralCorrelation};
