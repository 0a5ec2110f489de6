#![allow(dead_code, clippy::needless_range_loop)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use respotopt::elasticity::MaterialPair;
use respotopt::objectives::ResponsiveProblem;
use respotopt::{DensityDesign, FilterOperator, Grid, IsotropicHooke, SymStrain};

pub const EPS_STAR: SymStrain = SymStrain {
    xx: -0.1,
    yy: 0.1,
    xy: 0.0,
};

pub fn materials(e_ratio: f64, eps: SymStrain) -> MaterialPair {
    MaterialPair::new(
        IsotropicHooke::plane_strain(1.0, 0.3).unwrap(),
        IsotropicHooke::plane_strain(e_ratio, 0.3).unwrap(),
        eps,
    )
}

pub fn cantilever(
    nx: usize,
    ny: usize,
    length: f64,
    height: f64,
    e_ratio: f64,
) -> ResponsiveProblem {
    let grid = Grid::new(nx, ny, length, height)
        .unwrap()
        .with_cantilever_bcs(1.0);
    let filter = FilterOperator::with_radius_in_elements(&grid, 1.5).unwrap();
    ResponsiveProblem::new(grid, materials(e_ratio, EPS_STAR), filter, 3.0)
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_solid(ne: usize, rng: &mut ChaCha8Rng) -> DensityDesign {
    let mut d = DensityDesign::uniform(ne, 0.0);
    d.phi = (0..ne).map(|_| rng.gen_range(0.05..0.95)).collect();
    d
}

pub fn random_voids(ne: usize, rng: &mut ChaCha8Rng) -> DensityDesign {
    let phi = (0..ne).map(|_| rng.gen_range(0.05..0.95)).collect();
    let rho = (0..ne).map(|_| rng.gen_range(0.2..0.95)).collect();
    DensityDesign::with_voids(phi, rho, 1e-3)
}

pub fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Dense Gaussian elimination with partial pivoting.
pub fn dense_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for c in 0..n {
        let p = (c..n)
            .max_by(|&i, &j| a[i][c].abs().total_cmp(&a[j][c].abs()))
            .unwrap();
        a.swap(c, p);
        b.swap(c, p);
        for r in c + 1..n {
            let f = a[r][c] / a[c][c];
            for k in c..n {
                a[r][k] -= f * a[c][k];
            }
            b[r] -= f * b[c];
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = (r + 1..n).map(|k| a[r][k] * x[k]).sum();
        x[r] = (b[r] - s) / a[r][r];
    }
    x
}
