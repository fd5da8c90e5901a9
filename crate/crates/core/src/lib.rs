//! Characteristic mapping method for the 1D+1D Vlasov-Poisson system.
//!
//! The distribution function is never advected directly: the solver evolves
//! the backward characteristic map on a coarse grid and samples
//! `f = f0 o X` wherever it is needed. Long runs keep the map well resolved
//! by splitting it into submaps whose composition is evaluated on demand.

pub mod charmap;
pub mod config;
pub mod diagnostics;
pub mod error;
pub mod experiments;
pub mod fft;
pub mod fields;
pub mod grid;
pub mod hermite;
pub mod ic;
pub mod periodization;
pub mod output;
pub mod quadrature;
pub mod solver;
pub mod spectral;

pub use error::{CmmError, Result};
pub use fields::{ScalarProfile1D, StreamFunctionField, VelocityField};
pub use grid::{build_grid, Domain, Grid2D};
pub use hermite::{jet_from_stencil, HermiteField2D, HermiteLine, Jet};
pub use periodization::{optimize_extension, PeriodizedVelocity};
pub use config::SimulationConfig;
pub use solver::run_cmm;
pub use spectral::run_spectral;
