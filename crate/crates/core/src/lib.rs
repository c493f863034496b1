//! Numerical toolkit for the activity expansion of continuous classical
//! particle systems in a finite box with fixed exterior boundary particles.
//!
//! The crate builds finite-range stable pair potentials, certifies boundary
//! configurations by their per-cell density, evaluates connected-graph
//! (cumulant) sums two independent ways, estimates expansion coefficients
//! of the finite-volume pressure with and without boundary weights, and
//! assembles the interior/boundary pressure split together with every
//! closed-form bound that controls it. A separate oracle path cross-checks
//! the machinery against direct partition-function integrals and the exact
//! one-dimensional hard-rod series.
//!
//! Everything is deterministic under a master seed, including parallel
//! Monte Carlo (fixed chunking over keyed ChaCha8 streams).

pub mod boundary;
pub mod config;
pub mod error;
pub mod geometry;
pub mod mayer;
pub mod oracle;
pub mod potential;
pub mod report;
pub mod sampler;
pub mod ursell;
pub mod verify;

pub use boundary::{BoundaryConfig, DensityField, GeneratorSpec};
pub use config::{BuiltSystem, RunConfig};
pub use error::{Error, Result};
pub use geometry::{Cube, CubeGrid, Regions, ShellSpec};
pub use mayer::{
    EstimatorMethod, MajorantSeries, MayerEstimate, Model, PiSeries, PressureDecomposition,
    SamplerSpec,
};
pub use oracle::{FormalSeries, TruncatedXi};
pub use potential::{PairPotential, Piece, Profile, ThermoParams};
pub use sampler::McSpec;
pub use ursell::{Configuration, EdgeWeights, LabeledGraph};
