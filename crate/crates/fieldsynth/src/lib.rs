//! Acoustic field control from a single compact source: pick a density on a
//! small fictitious sphere so that its radiated field matches prescribed
//! targets (plane waves, silence) on several disjoint control regions at
//! once.
//!
//! Pipeline: [`geometry`] describes and discretizes the source and the
//! control regions; [`propagator`] turns a density expanded in spherical
//! harmonics into exterior Helmholtz fields; [`solver`] assembles the
//! weighted least-squares system and picks the Tikhonov weight by
//! discrepancy; [`analysis`] computes error and contrast metrics, noise
//! stability, and parameter sweeps; [`synthesis`] solves a band of
//! wavenumbers and sums the results into a time-periodic pulse; [`config`]
//! reads all of it from TOML, and [`io`] writes the CSV/JSON artifacts the
//! `fieldsynth` binary exposes through [`cli`].
//!
//! The crate's `examples/` directory exercises each capability end to end
//! at desk scale.

pub mod analysis;
pub mod cli;
pub mod config;
pub mod error;
pub mod geometry;
pub mod io;
pub mod propagator;
pub mod solver;
pub mod specfun;
pub mod synthesis;

pub use error::{Error, Result};
