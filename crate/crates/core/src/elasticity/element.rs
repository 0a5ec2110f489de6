//! Bilinear (Q1) rectangular element integrated with 2x2 Gauss quadrature.
//!
//! Local node order is counterclockwise from the lower-left corner; local dof
//! order is `(u_x, u_y)` per node.

use super::material::{IsotropicHooke, SymStrain};

pub type ElemMatrix = [[f64; 8]; 8];
pub type ElemVector = [f64; 8];

const NODE_XI: [f64; 4] = [-1.0, 1.0, 1.0, -1.0];
const NODE_ETA: [f64; 4] = [-1.0, -1.0, 1.0, 1.0];

fn gauss_points() -> [(f64, f64); 4] {
    let g = 1.0 / 3.0_f64.sqrt();
    [(-g, -g), (g, -g), (g, g), (-g, g)]
}

/// Strain-displacement matrix `B` (3x8) at reference point `(xi, eta)` of an
/// `ex` by `ey` rectangle.
pub fn strain_displacement(xi: f64, eta: f64, ex: f64, ey: f64) -> [[f64; 8]; 3] {
    let mut b = [[0.0; 8]; 3];
    for a in 0..4 {
        let dn_dx = NODE_XI[a] * (1.0 + eta * NODE_ETA[a]) / 4.0 * (2.0 / ex);
        let dn_dy = NODE_ETA[a] * (1.0 + xi * NODE_XI[a]) / 4.0 * (2.0 / ey);
        b[0][2 * a] = dn_dx;
        b[1][2 * a + 1] = dn_dy;
        b[2][2 * a] = dn_dy;
        b[2][2 * a + 1] = dn_dx;
    }
    b
}

/// Element stiffness `∫ Bᵀ D B dA`.
pub fn element_stiffness(hooke: &IsotropicHooke, ex: f64, ey: f64) -> ElemMatrix {
    let det_j = ex * ey / 4.0;
    let d = &hooke.voigt;
    let mut ke = [[0.0; 8]; 8];
    for (xi, eta) in gauss_points() {
        let b = strain_displacement(xi, eta, ex, ey);
        // db = D B
        let mut db = [[0.0; 8]; 3];
        for r in 0..3 {
            for c in 0..8 {
                db[r][c] = (0..3).map(|k| d[r][k] * b[k][c]).sum();
            }
        }
        for i in 0..8 {
            for j in 0..8 {
                let v: f64 = (0..3).map(|k| b[k][i] * db[k][j]).sum();
                ke[i][j] += v * det_j;
            }
        }
    }
    // Symmetrize exactly; the quadrature sum above is symmetric up to rounding.
    for i in 0..8 {
        for j in 0..i {
            let v = 0.5 * (ke[i][j] + ke[j][i]);
            ke[i][j] = v;
            ke[j][i] = v;
        }
    }
    ke
}

/// Equivalent nodal load of a spontaneous strain: `∫ Bᵀ C ε*(S) dA` with
/// `ε*(S) = S ε*(1)`.
pub fn element_eigenload(
    hooke: &IsotropicHooke,
    eps_star: SymStrain,
    stimulus: f64,
    ex: f64,
    ey: f64,
) -> ElemVector {
    let sigma = hooke.stress(eps_star.scale(stimulus).voigt());
    let det_j = ex * ey / 4.0;
    let mut g = [0.0; 8];
    for (xi, eta) in gauss_points() {
        let b = strain_displacement(xi, eta, ex, ey);
        for (i, gi) in g.iter_mut().enumerate() {
            *gi += (0..3).map(|k| b[k][i] * sigma[k]).sum::<f64>() * det_j;
        }
    }
    g
}

pub(crate) fn mat_vec(m: &ElemMatrix, v: &ElemVector) -> ElemVector {
    let mut out = [0.0; 8];
    for (o, row) in out.iter_mut().zip(m) {
        *o = row.iter().zip(v).map(|(a, b)| a * b).sum();
    }
    out
}

pub(crate) fn dot8(a: &ElemVector, b: &ElemVector) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn hooke() -> IsotropicHooke {
        IsotropicHooke::plane_strain(1.0, 0.3).unwrap()
    }

    fn rect_nodes(ex: f64, ey: f64) -> [[f64; 2]; 4] {
        [[0.0, 0.0], [ex, 0.0], [ex, ey], [0.0, ey]]
    }

    fn nodal(f: impl Fn([f64; 2]) -> [f64; 2], ex: f64, ey: f64) -> ElemVector {
        let mut v = [0.0; 8];
        for (a, p) in rect_nodes(ex, ey).iter().enumerate() {
            let u = f(*p);
            v[2 * a] = u[0];
            v[2 * a + 1] = u[1];
        }
        v
    }

    #[test]
    fn symmetric_with_rigid_kernel() {
        let (ex, ey) = (0.7, 0.3);
        let ke = element_stiffness(&hooke(), ex, ey);
        for i in 0..8 {
            for j in 0..8 {
                assert_eq!(ke[i][j], ke[j][i]);
            }
        }
        let tx = nodal(|_| [1.0, 0.0], ex, ey);
        let ty = nodal(|_| [0.0, 1.0], ex, ey);
        let rot = nodal(|p| [-(p[1] - 0.1), p[0] - 0.4], ex, ey);
        for mode in [tx, ty, rot] {
            for r in mat_vec(&ke, &mode) {
                assert_abs_diff_eq!(r, 0.0, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn rank_five() {
        // Gaussian elimination with partial pivoting on the 8x8 matrix.
        let mut m = element_stiffness(&hooke(), 1.0, 1.0);
        let mut rank = 0;
        let mut row = 0;
        for col in 0..8 {
            let piv = (row..8).max_by(|&a, &b| m[a][col].abs().total_cmp(&m[b][col].abs()));
            let Some(piv) = piv else { break };
            if m[piv][col].abs() < 1e-10 {
                continue;
            }
            m.swap(row, piv);
            for r in row + 1..8 {
                let f = m[r][col] / m[row][col];
                for c in col..8 {
                    m[r][c] -= f * m[row][c];
                }
            }
            row += 1;
            rank += 1;
            if row == 8 {
                break;
            }
        }
        assert_eq!(rank, 5);
    }

    /// Patch-test oracle: an affine field `u = A x` has constant strain and
    /// stress `σ = D ε`; the element's nodal forces must equal the boundary
    /// tractions `σ n` lumped to the nodes, which for a rectangle are
    /// `±σ·(ey/2, ex/2)` per node.
    #[test]
    fn uniform_strain_nodal_forces() {
        let (ex, ey) = (0.5, 0.25);
        let h = hooke();
        let ke = element_stiffness(&h, ex, ey);
        let a = [[0.013, -0.021], [0.007, 0.031]];
        let u = nodal(
            |p| {
                [
                    a[0][0] * p[0] + a[0][1] * p[1],
                    a[1][0] * p[0] + a[1][1] * p[1],
                ]
            },
            ex,
            ey,
        );
        let strain = [a[0][0], a[1][1], a[0][1] + a[1][0]];
        let s = h.stress(strain);
        let forces = mat_vec(&ke, &u);
        for k in 0..4 {
            let nx = NODE_XI[k] * ey / 2.0;
            let ny = NODE_ETA[k] * ex / 2.0;
            assert_abs_diff_eq!(forces[2 * k], s[0] * nx + s[2] * ny, epsilon = 1e-14);
            assert_abs_diff_eq!(forces[2 * k + 1], s[2] * nx + s[1] * ny, epsilon = 1e-14);
        }
        // Energy: uᵀKu = σ·ε · area
        let energy = dot8(&u, &forces);
        let exact = (s[0] * strain[0] + s[1] * strain[1] + s[2] * strain[2]) * ex * ey;
        assert_abs_diff_eq!(energy, exact, epsilon = 1e-16);
    }

    #[test]
    fn eigenload_zero_cases() {
        let h = hooke();
        let eps = SymStrain::new(-0.1, 0.1, 0.0);
        assert_eq!(
            element_eigenload(&h, SymStrain::default(), 1.0, 1.0, 1.0),
            [0.0; 8]
        );
        assert_eq!(element_eigenload(&h, eps, 0.0, 1.0, 1.0), [0.0; 8]);
    }

    /// Independent oracle: ∫ Bᵀσ* over a rectangle is the lumped boundary
    /// traction of the constant stress σ* = C ε*, i.e. ∫ ∂N_a/∂x dA = ±ey/2 and
    /// ∫ ∂N_a/∂y dA = ±ex/2.
    #[test]
    fn eigenload_matches_analytic_integral() {
        let h = hooke();
        let (ex, ey) = (0.3, 0.2);
        let eps = SymStrain::new(-0.1, 0.1, 0.0);
        let g = element_eigenload(&h, eps, 1.0, ex, ey);
        let s = h.stress([-0.1, 0.1, 0.0]);
        for k in 0..4 {
            let ix = NODE_XI[k] * ey / 2.0;
            let iy = NODE_ETA[k] * ex / 2.0;
            assert_abs_diff_eq!(g[2 * k], s[0] * ix + s[2] * iy, epsilon = 1e-15);
            assert_abs_diff_eq!(g[2 * k + 1], s[2] * ix + s[1] * iy, epsilon = 1e-15);
        }
        let g2 = element_eigenload(&h, eps.scale(2.0), 1.0, ex, ey);
        let g_half = element_eigenload(&h, eps, 0.5, ex, ey);
        for i in 0..8 {
            assert_abs_diff_eq!(g2[i], 2.0 * g[i], epsilon = 1e-15);
            assert_abs_diff_eq!(g_half[i], 0.5 * g[i], epsilon = 1e-15);
        }
    }
}
