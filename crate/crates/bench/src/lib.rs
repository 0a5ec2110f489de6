//! Fixtures shared by the benchmarks.

use respotopt::elasticity::MaterialPair;
use respotopt::objectives::ResponsiveProblem;
use respotopt::{DensityDesign, FilterOperator, Grid, IsotropicHooke, SymStrain};

/// Cantilever of aspect `nx / ny` with a bimorph-style eigenstrain.
pub fn cantilever(nx: usize, ny: usize, e_ratio: f64) -> ResponsiveProblem {
    let grid = Grid::new(nx, ny, nx as f64 / ny as f64, 1.0)
        .expect("valid grid")
        .with_cantilever_bcs(1.0);
    let mats = MaterialPair::new(
        IsotropicHooke::plane_strain(1.0, 0.3).expect("valid material"),
        IsotropicHooke::plane_strain(e_ratio, 0.3).expect("valid material"),
        SymStrain::new(-0.1, 0.1, 0.0),
    );
    let filter = FilterOperator::with_radius_in_elements(&grid, 1.5).expect("valid radius");
    ResponsiveProblem::new(grid, mats, filter, 3.0)
}

/// Smoothly varying design with voids, reproducible without an RNG.
pub fn wavy_design(num_elems: usize) -> DensityDesign {
    let phi = (0..num_elems)
        .map(|e| 0.5 + 0.4 * (e as f64 * 0.37).sin())
        .collect();
    let rho = (0..num_elems)
        .map(|e| 0.6 + 0.35 * (e as f64 * 0.11).cos())
        .collect();
    DensityDesign::with_voids(phi, rho, 1e-3)
}
