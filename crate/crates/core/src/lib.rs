//! Spectral Crank-Nicolson solver for weakly hyperbolic first-order systems
//! `u_t = sum_j A_j(t, x) d_j u + B(t, x) u + f` on a periodic box, with
//! Gevrey-weighted energy diagnostics and pointwise symmetrizer probes.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod cutoff;
pub mod data;
pub mod dump;
pub mod error;
pub mod gevrey;
pub mod grid;
pub mod harness;
pub mod linalg;
pub mod model;
pub mod operator;
pub mod problems;
pub mod sampling;
pub mod scheme;
pub mod symmetrizer;

pub use error::{Error, Result};
pub use grid::{make_grid, GridSpec, Multiplier, PhysicalField, SpectralField};
pub use problems::{preset, ProblemPreset};
pub use model::{Coefficients, SystemModel};
pub use scheme::{run, ConstraintKind, SchemeConfig, Trajectory};
