//! Plane-strain linear elasticity with a SIMP-interpolated two-material law
//! and an optional void density.
//!
//! Per element `e` with filtered fields `fφ = (Wφ)_e`, `fρ = (Wρ)_e`:
//!
//! ```text
//! K_e = fρ^p [ (1 - fφ^p) K_s + fφ^p K_r ]
//! g_e = fρ^p fφ^p ∫ Bᵀ C_r ε*(S)
//! ```
//!
//! and the equilibrium displacement solves `K u = f + g(S)`.

mod assembly;
mod element;
mod material;
pub mod solver;

pub use assembly::{
    assemble, DensityDesign, DofMap, EquilibriumState, SolverKind, StiffnessSystem,
};
pub use element::{
    element_eigenload, element_stiffness, strain_displacement, ElemMatrix, ElemVector,
};
pub use material::{IsotropicHooke, MaterialPair, SymStrain};

/// Default SIMP penalty.
pub const DEFAULT_PENALTY: f64 = 3.0;
/// Default residual solid density of voids.
pub const DEFAULT_RHO_MIN: f64 = 1e-3;
