//! Symmetric banded storage, banded Cholesky, and Jacobi-preconditioned CG.

use crate::error::{Error, Result};

/// Lower band of a symmetric matrix. Row `i` stores columns `i - bw ..= i`
/// contiguously, so row-row dot products in the factorization are unit stride.
#[derive(Debug, Clone, PartialEq)]
pub struct BandMatrix {
    n: usize,
    bw: usize,
    data: Vec<f64>,
}

impl BandMatrix {
    pub fn zeros(n: usize, bw: usize) -> Self {
        Self {
            n,
            bw,
            data: vec![0.0; n * (bw + 1)],
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn bandwidth(&self) -> usize {
        self.bw
    }

    #[inline]
    fn pos(&self, i: usize, j: usize) -> usize {
        debug_assert!(j <= i && i - j <= self.bw);
        i * (self.bw + 1) + j + self.bw - i
    }

    /// Entry `(i, j)` of the full symmetric matrix.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (i, j) = if i >= j { (i, j) } else { (j, i) };
        if i - j > self.bw {
            0.0
        } else {
            self.data[self.pos(i, j)]
        }
    }

    /// Adds `v` to entry `(i, j)` (and implicitly `(j, i)`); requires `i >= j`.
    #[inline]
    pub fn add_lower(&mut self, i: usize, j: usize, v: f64) {
        let p = self.pos(i, j);
        self.data[p] += v;
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.data[self.pos(i, i)]).collect()
    }

    /// `y = A x`.
    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        for i in 0..self.n {
            let lo = i.saturating_sub(self.bw);
            let row = &self.data[self.pos(i, lo)..=self.pos(i, i)];
            let mut acc = 0.0;
            for (k, &a) in row.iter().enumerate() {
                let j = lo + k;
                acc += a * x[j];
                if j != i {
                    y[j] += a * x[i];
                }
            }
            y[i] += acc;
        }
        y
    }
}

/// `A = L Lᵀ` in banded storage.
#[derive(Debug, Clone)]
pub struct BandCholesky {
    l: BandMatrix,
}

/// A pivot below this fraction of the original diagonal is treated as a
/// loss of positive definiteness.
const PIVOT_TOL: f64 = 1e-13;

impl BandCholesky {
    pub fn factor(a: &BandMatrix) -> Result<Self> {
        let n = a.n;
        let bw = a.bw;
        let w = bw + 1;
        let mut l = a.clone();
        let data = &mut l.data;
        for i in 0..n {
            let lo = i.saturating_sub(bw);
            for j in lo..=i {
                let ij = i * w + j + bw - i;
                let mut s = data[ij];
                if j > lo {
                    let ri = i * w + lo + bw - i;
                    let rj = j * w + lo + bw - j;
                    let len = j - lo;
                    s -= dot(&data[ri..ri + len], &data[rj..rj + len]);
                }
                if j == i {
                    let diag = a.data[ij];
                    if !(s > PIVOT_TOL * diag.abs()) || !s.is_finite() {
                        return Err(Error::SolverFailure(format!(
                            "matrix is not positive definite: pivot {s:e} at row {i} (diagonal {diag:e}); \
                             check Dirichlet constraints"
                        )));
                    }
                    data[ij] = s.sqrt();
                } else {
                    data[ij] = s / data[j * w + bw];
                }
            }
        }
        Ok(Self { l })
    }

    pub fn dim(&self) -> usize {
        self.l.n
    }

    /// Solves `A x = b` in place.
    pub fn solve_in_place(&self, b: &mut [f64]) {
        let n = self.l.n;
        let bw = self.l.bw;
        let w = bw + 1;
        let d = &self.l.data;
        for i in 0..n {
            let lo = i.saturating_sub(bw);
            let ri = i * w + lo + bw - i;
            let s = b[i] - dot(&d[ri..ri + (i - lo)], &b[lo..i]);
            b[i] = s / d[i * w + bw];
        }
        for i in (0..n).rev() {
            let xi = b[i] / d[i * w + bw];
            b[i] = xi;
            let lo = i.saturating_sub(bw);
            let ri = i * w + lo + bw - i;
            for (bk, lik) in b[lo..i].iter_mut().zip(&d[ri..ri + (i - lo)]) {
                *bk -= lik * xi;
            }
        }
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    // Four accumulators let the compiler vectorize without reassociation.
    let mut acc = [0.0; 4];
    let chunks = a.len() / 4;
    for c in 0..chunks {
        for k in 0..4 {
            acc[k] += a[4 * c + k] * b[4 * c + k];
        }
    }
    let mut s = (acc[0] + acc[1]) + (acc[2] + acc[3]);
    for k in 4 * chunks..a.len() {
        s += a[k] * b[k];
    }
    s
}

/// Jacobi-preconditioned conjugate gradients. Returns the solution and the
/// iteration count; fails if `‖r‖ / ‖b‖ > tol` after `max_iter` iterations.
pub fn pcg(a: &BandMatrix, b: &[f64], tol: f64, max_iter: usize) -> Result<(Vec<f64>, usize)> {
    let n = a.n;
    let bnorm = norm(b);
    let mut x = vec![0.0; n];
    if bnorm == 0.0 {
        return Ok((x, 0));
    }
    let inv_diag: Vec<f64> = a
        .diagonal()
        .iter()
        .map(|&d| {
            if d > 0.0 {
                Ok(1.0 / d)
            } else {
                Err(Error::SolverFailure(format!("non-positive diagonal {d:e}")))
            }
        })
        .collect::<Result<_>>()?;
    let mut r = b.to_vec();
    let mut z: Vec<f64> = r.iter().zip(&inv_diag).map(|(r, d)| r * d).collect();
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    for it in 1..=max_iter {
        let ap = a.mul_vec(&p);
        let pap = dot(&p, &ap);
        if !(pap > 0.0) {
            return Err(Error::SolverFailure(format!(
                "conjugate gradients hit non-positive curvature {pap:e}"
            )));
        }
        let step = rz / pap;
        for i in 0..n {
            x[i] += step * p[i];
            r[i] -= step * ap[i];
        }
        if norm(&r) <= tol * bnorm {
            return Ok((x, it));
        }
        for i in 0..n {
            z[i] = r[i] * inv_diag[i];
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    Err(Error::SolverFailure(format!(
        "conjugate gradients did not reach relative residual {tol:e} in {max_iter} iterations"
    )))
}

pub(crate) fn norm(v: &[f64]) -> f64 {
    dot(v, v).sqrt()
}
