//! Density-based topology optimization of responsive structures.
//!
//! A design mixes a passive structural material with a stimulus-responsive
//! material that develops a spontaneous (eigen) strain when stimulated, and
//! optionally leaves voids. The pipeline is:
//!
//! 1. [`grid`]: structured quadrilateral mesh with boundary conditions.
//! 2. [`filter`]: renormalized density filter `W` applied to the design fields.
//! 3. [`elasticity`]: SIMP-interpolated plane-strain stiffness, eigenstrain
//!    load, banded Cholesky solve, compliance.
//! 4. [`objectives`]: actuation work, blocking load, and workpiece objectives
//!    with adjoint sensitivities.
//! 5. [`optimizer`]: method of moving asymptotes and the outer design loop.
//! 6. [`config`], [`export`], [`commands`]: JSON configuration, result files,
//!    and the `run` / `gradcheck` / `identities` drivers used by the CLI.

// `!(x > 0.0)` is used on purpose so NaN fails the check.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod commands;
pub mod config;
pub mod elasticity;
pub mod error;
pub mod export;
pub mod filter;
pub mod grid;
pub mod objectives;
pub mod optimizer;
mod par;

pub use elasticity::{
    assemble, DensityDesign, EquilibriumState, IsotropicHooke, MaterialPair, StiffnessSystem,
    SymStrain,
};
pub use error::{Error, Result};
pub use filter::FilterOperator;
pub use grid::Grid;
pub use objectives::{ObjectiveKind, ObjectiveReport};
pub use optimizer::{MmaState, RunHistory, VolumeBudget};
