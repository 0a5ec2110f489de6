//! Structured quadrilateral meshes over `(0, L) x (0, H)`.
//!
//! Nodes are numbered lexicographically with `x` fastest: node `(i, j)` has
//! index `j * (nx + 1) + i` and sits at `(i * L / nx, j * H / ny)`. Elements
//! follow the same rule (`e = j * nx + i`) and list their four nodes
//! counterclockwise starting at the lower-left corner. Each node carries two
//! degrees of freedom ordered `(u_x, u_y)`, so node `n` owns dofs `2n` and
//! `2n + 1`.

use std::collections::BTreeMap;

use crate::error::{invalid, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    pub nx: usize,
    pub ny: usize,
    pub length: f64,
    pub height: f64,
    pub node_coords: Vec<[f64; 2]>,
    pub elem_conn: Vec<[usize; 4]>,
    pub elem_centers: Vec<[f64; 2]>,
    /// Prescribed displacement values keyed by dof.
    pub dirichlet: BTreeMap<usize, f64>,
    /// Point loads `(node, force)`.
    pub traction: Vec<(usize, [f64; 2])>,
}

impl Grid {
    /// Builds an `nx` by `ny` grid with no boundary conditions.
    pub fn new(nx: usize, ny: usize, length: f64, height: f64) -> Result<Self> {
        if nx == 0 || ny == 0 {
            return Err(invalid(format!(
                "element counts must be positive, got {nx}x{ny}"
            )));
        }
        if !(length > 0.0 && length.is_finite() && height > 0.0 && height.is_finite()) {
            return Err(invalid(format!(
                "domain lengths must be positive and finite, got L={length}, H={height}"
            )));
        }
        let ex = length / nx as f64;
        let ey = height / ny as f64;
        let mut node_coords = Vec::with_capacity((nx + 1) * (ny + 1));
        for j in 0..=ny {
            for i in 0..=nx {
                node_coords.push([i as f64 * length / nx as f64, j as f64 * height / ny as f64]);
            }
        }
        let mut elem_conn = Vec::with_capacity(nx * ny);
        let mut elem_centers = Vec::with_capacity(nx * ny);
        for j in 0..ny {
            for i in 0..nx {
                let n0 = j * (nx + 1) + i;
                elem_conn.push([n0, n0 + 1, n0 + nx + 2, n0 + nx + 1]);
                elem_centers.push([(i as f64 + 0.5) * ex, (j as f64 + 0.5) * ey]);
            }
        }
        Ok(Self {
            nx,
            ny,
            length,
            height,
            node_coords,
            elem_conn,
            elem_centers,
            dirichlet: BTreeMap::new(),
            traction: Vec::new(),
        })
    }

    /// Clamps the left edge and applies a downward point load of
    /// `load_magnitude` at the bottom-right corner `(L, 0)`.
    pub fn with_cantilever_bcs(mut self, load_magnitude: f64) -> Self {
        for j in 0..=self.ny {
            let n = self.node_index(0, j);
            self.dirichlet.insert(2 * n, 0.0);
            self.dirichlet.insert(2 * n + 1, 0.0);
        }
        let corner = self.node_index(self.nx, 0);
        self.traction = vec![(corner, [0.0, -load_magnitude])];
        self
    }

    pub fn node_index(&self, i: usize, j: usize) -> usize {
        j * (self.nx + 1) + i
    }

    pub fn elem_index(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    pub fn num_nodes(&self) -> usize {
        self.node_coords.len()
    }

    pub fn num_elems(&self) -> usize {
        self.elem_conn.len()
    }

    pub fn num_dofs(&self) -> usize {
        2 * self.num_nodes()
    }

    /// Element side lengths `(L / nx, H / ny)`.
    pub fn elem_size(&self) -> (f64, f64) {
        (self.length / self.nx as f64, self.height / self.ny as f64)
    }

    pub fn elem_area(&self) -> f64 {
        let (ex, ey) = self.elem_size();
        ex * ey
    }

    pub fn elem_areas(&self) -> Vec<f64> {
        vec![self.elem_area(); self.num_elems()]
    }

    pub fn domain_area(&self) -> f64 {
        self.length * self.height
    }

    /// Global dofs of element `e` in local order `(u_x, u_y)` per node.
    pub fn elem_dofs(&self, e: usize) -> [usize; 8] {
        let c = self.elem_conn[e];
        [
            2 * c[0],
            2 * c[0] + 1,
            2 * c[1],
            2 * c[1] + 1,
            2 * c[2],
            2 * c[2] + 1,
            2 * c[3],
            2 * c[3] + 1,
        ]
    }

    /// Signed Jacobian determinant of element `e` (bilinear map, evaluated at its center).
    pub fn jacobian_det(&self, e: usize) -> f64 {
        let c = self.elem_conn[e];
        let p = |k: usize| self.node_coords[c[k]];
        // For a parallelogram the Jacobian is constant: J = (p1 - p0, p3 - p0) / 2 per unit reference.
        let a = [p(1)[0] - p(0)[0], p(1)[1] - p(0)[1]];
        let b = [p(3)[0] - p(0)[0], p(3)[1] - p(0)[1]];
        (a[0] * b[1] - a[1] * b[0]) / 4.0
    }

    /// Prescribes `value` on `dof`.
    pub fn fix_dof(&mut self, dof: usize, value: f64) -> Result<()> {
        if dof >= self.num_dofs() {
            return Err(invalid(format!(
                "dof {dof} out of range ({} dofs)",
                self.num_dofs()
            )));
        }
        self.dirichlet.insert(dof, value);
        Ok(())
    }

    /// Adds a point load on `node`.
    pub fn add_point_load(&mut self, node: usize, force: [f64; 2]) -> Result<()> {
        if node >= self.num_nodes() {
            return Err(invalid(format!("node {node} out of range")));
        }
        self.traction.push((node, force));
        Ok(())
    }

    /// Global traction load vector.
    pub fn load_vector(&self) -> Vec<f64> {
        let mut f = vec![0.0; self.num_dofs()];
        for &(n, force) in &self.traction {
            f[2 * n] += force[0];
            f[2 * n + 1] += force[1];
        }
        f
    }

    /// True when every prescribed displacement is zero.
    pub fn has_homogeneous_dirichlet(&self) -> bool {
        self.dirichlet.values().all(|&v| v == 0.0)
    }

    /// Nodes on the outer boundary of the rectangle.
    pub fn boundary_nodes(&self) -> Vec<usize> {
        (0..=self.ny)
            .flat_map(|j| (0..=self.nx).map(move |i| (i, j)))
            .filter(|&(i, j)| i == 0 || j == 0 || i == self.nx || j == self.ny)
            .map(|(i, j)| self.node_index(i, j))
            .collect()
    }

    /// Checks the structural invariants (Dirichlet set present, loads off the
    /// constrained dofs).
    pub fn validate_bcs(&self) -> Result<()> {
        if self.dirichlet.is_empty() {
            return Err(invalid(
                "no Dirichlet dofs: rigid-body modes are unconstrained",
            ));
        }
        for &(n, _) in &self.traction {
            if self.dirichlet.contains_key(&(2 * n)) && self.dirichlet.contains_key(&(2 * n + 1)) {
                return Err(invalid(format!("traction node {n} is fully constrained")));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn single_element() {
        let g = Grid::new(1, 1, 1.0, 1.0).unwrap();
        assert_eq!(g.num_nodes(), 4);
        assert_eq!(g.num_elems(), 1);
        assert_eq!(g.node_coords[3], [1.0, 1.0]);
        assert_eq!(g.elem_conn[0], [0, 1, 3, 2]);
    }

    #[test]
    fn paper_scale_counts() {
        let g = Grid::new(60, 120, 1.0, 2.0).unwrap();
        assert_eq!(g.num_nodes(), 7381);
        assert_eq!(g.num_elems(), 7200);
    }

    #[test]
    fn lexicographic_connectivity() {
        let g = Grid::new(2, 2, 2.0, 2.0).unwrap();
        assert_eq!(g.elem_conn[3], [4, 5, 8, 7]);
    }

    #[test]
    fn rejects_bad_dimensions() {
        assert!(Grid::new(0, 1, 1.0, 1.0).is_err());
        assert!(Grid::new(1, 0, 1.0, 1.0).is_err());
        assert!(Grid::new(1, 1, 0.0, 1.0).is_err());
        assert!(Grid::new(1, 1, 1.0, -2.0).is_err());
    }

    #[test]
    fn cantilever_bcs() {
        let g = Grid::new(1, 1, 1.0, 1.0).unwrap().with_cantilever_bcs(1.0);
        let fixed: Vec<usize> = g.dirichlet.keys().copied().collect();
        assert_eq!(fixed, vec![0, 1, 4, 5]);
        assert_eq!(g.traction, vec![(1, [0.0, -1.0])]);
        g.validate_bcs().unwrap();

        let g = Grid::new(180, 60, 3.0, 1.0)
            .unwrap()
            .with_cantilever_bcs(1.0);
        assert_eq!(g.dirichlet.len(), 2 * 61);
        assert!(g.has_homogeneous_dirichlet());
    }

    #[test]
    fn bare_grid_has_no_bcs() {
        let g = Grid::new(3, 2, 1.0, 1.0).unwrap();
        assert!(g.validate_bcs().is_err());
    }

    proptest! {
        #[test]
        fn geometry_invariants(nx in 1usize..20, ny in 1usize..20, l in 0.1f64..10.0, h in 0.1f64..10.0) {
            let g = Grid::new(nx, ny, l, h).unwrap().with_cantilever_bcs(1.0);
            prop_assert_eq!(g.num_nodes(), (nx + 1) * (ny + 1));
            prop_assert_eq!(g.num_elems(), nx * ny);
            prop_assert_eq!(g.dirichlet.len(), 2 * (ny + 1));
            let total: f64 = g.elem_areas().iter().sum();
            prop_assert!((total - l * h).abs() <= 1e-14 * l * h);
            for e in 0..g.num_elems() {
                prop_assert!(g.jacobian_det(e) > 0.0);
            }
            for j in 0..=ny {
                for i in 0..=nx {
                    let c = g.node_coords[g.node_index(i, j)];
                    prop_assert_eq!(c, [i as f64 * l / nx as f64, j as f64 * h / ny as f64]);
                }
            }
        }
    }
}
