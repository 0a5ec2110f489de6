//! Renormalized density filter.
//!
//! Row `k` of `W` averages the elements whose centers lie within `R_f` of
//! `c_k`, weighted by a linear hat kernel `max(0, 1 - |x - c_k| / R_f)`
//! integrated over each element with the midpoint rule. Each row is divided
//! by its own total weight, so constant fields pass through unchanged even
//! next to the boundary.

use crate::error::{invalid, Result};
use crate::grid::Grid;

/// Radius used when none is given: 1.5 element widths.
pub const DEFAULT_RADIUS_ELEMS: f64 = 1.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FilterKernel {
    LinearHat,
}

/// Sparse row-stochastic weight matrix in CSR layout.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterOperator {
    pub radius: f64,
    pub kernel: FilterKernel,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

impl FilterOperator {
    pub fn new(grid: &Grid, radius: f64) -> Result<Self> {
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(invalid(format!(
                "filter radius must be positive, got {radius}"
            )));
        }
        let (ex, ey) = grid.elem_size();
        let area = grid.elem_area();
        let reach_x = (radius / ex).ceil() as isize;
        let reach_y = (radius / ey).ceil() as isize;
        let (nx, ny) = (grid.nx as isize, grid.ny as isize);

        let mut row_ptr = Vec::with_capacity(grid.num_elems() + 1);
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        row_ptr.push(0);
        for j in 0..ny {
            for i in 0..nx {
                let ck = grid.elem_centers[grid.elem_index(i as usize, j as usize)];
                let start = vals.len();
                for jj in (j - reach_y).max(0)..=(j + reach_y).min(ny - 1) {
                    for ii in (i - reach_x).max(0)..=(i + reach_x).min(nx - 1) {
                        let col = grid.elem_index(ii as usize, jj as usize);
                        let c = grid.elem_centers[col];
                        let d = ((c[0] - ck[0]).powi(2) + (c[1] - ck[1]).powi(2)).sqrt();
                        let w = (1.0 - d / radius) * area;
                        if w > 0.0 {
                            cols.push(col);
                            vals.push(w);
                        }
                    }
                }
                let total: f64 = vals[start..].iter().sum();
                for v in &mut vals[start..] {
                    *v /= total;
                }
                row_ptr.push(vals.len());
            }
        }
        Ok(Self {
            radius,
            kernel: FilterKernel::LinearHat,
            row_ptr,
            cols,
            vals,
        })
    }

    /// Filter whose radius is `elems` times the element width `L / nx`.
    pub fn with_radius_in_elements(grid: &Grid, elems: f64) -> Result<Self> {
        Self::new(grid, elems * grid.elem_size().0)
    }

    pub fn num_elems(&self) -> usize {
        self.row_ptr.len() - 1
    }

    /// Nonzeros of row `k` as `(column, weight)`.
    pub fn row(&self, k: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.row_ptr[k]..self.row_ptr[k + 1];
        self.cols[r.clone()]
            .iter()
            .copied()
            .zip(self.vals[r].iter().copied())
    }

    pub fn weight(&self, k: usize, col: usize) -> f64 {
        self.row(k).find(|&(c, _)| c == col).map_or(0.0, |(_, w)| w)
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    fn check_len(&self, field: &[f64]) -> Result<()> {
        if field.len() != self.num_elems() {
            return Err(invalid(format!(
                "field has {} values, filter expects {}",
                field.len(),
                self.num_elems()
            )));
        }
        Ok(())
    }

    /// `W · field`.
    pub fn apply(&self, field: &[f64]) -> Result<Vec<f64>> {
        self.check_len(field)?;
        Ok((0..self.num_elems())
            .map(|k| self.row(k).map(|(c, w)| w * field[c]).sum())
            .collect())
    }

    /// `Wᵀ · field`, the chain rule through the filter.
    pub fn apply_transpose(&self, field: &[f64]) -> Result<Vec<f64>> {
        self.check_len(field)?;
        let mut out = vec![0.0; self.num_elems()];
        for (k, &fk) in field.iter().enumerate() {
            for (c, w) in self.row(k) {
                out[c] += w * fk;
            }
        }
        Ok(out)
    }
}
