//! Method of moving asymptotes with box bounds and inequality constraints
//! `g_i(x) <= 0`.
//!
//! Each update builds the separable convex approximation of the objective and
//! constraints around the current asymptotes and solves the resulting
//! subproblem through its dual. The dual is maximized one multiplier at a time
//! by bisection on `∂W/∂λ_i = g̃_i(x(λ))`, which is exact for a single
//! constraint.

use crate::error::{invalid, Result};

const RAA0: f64 = 1e-5;
const ALBEFA: f64 = 0.1;
const LAMBDA_CAP: f64 = 1e30;
const DUAL_SWEEPS: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MmaSettings {
    /// Largest step per update as a fraction of the box width.
    pub move_limit: f64,
    pub asymptote_init: f64,
    pub asymptote_incr: f64,
    pub asymptote_decr: f64,
}

impl Default for MmaSettings {
    fn default() -> Self {
        Self {
            move_limit: 0.2,
            asymptote_init: 0.5,
            asymptote_incr: 1.2,
            asymptote_decr: 0.7,
        }
    }
}

impl MmaSettings {
    pub fn validate(&self) -> Result<()> {
        if !(self.move_limit > 0.0 && self.move_limit <= 1.0) {
            return Err(invalid(format!(
                "move_limit must lie in (0, 1], got {}",
                self.move_limit
            )));
        }
        if !(self.asymptote_init > 0.0) {
            return Err(invalid("asymptote_init must be positive"));
        }
        if !(self.asymptote_decr > 0.0 && self.asymptote_decr < 1.0 && self.asymptote_incr > 1.0) {
            return Err(invalid(format!(
                "asymptote adaptation needs 0 < decr < 1 < incr, got decr={}, incr={}",
                self.asymptote_decr, self.asymptote_incr
            )));
        }
        Ok(())
    }
}

/// A constraint `g(x) <= 0` linearized at the current point.
#[derive(Debug, Clone, PartialEq)]
pub struct Constraint {
    pub value: f64,
    pub gradient: Vec<f64>,
}

/// Box `[lower, upper]` per variable.
#[derive(Debug, Clone, PartialEq)]
pub struct Bounds {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl Bounds {
    pub fn uniform(n: usize, lower: f64, upper: f64) -> Self {
        Self {
            lower: vec![lower; n],
            upper: vec![upper; n],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MmaStep {
    pub x: Vec<f64>,
    pub multipliers: Vec<f64>,
    /// The subproblem had no feasible point inside the move box; `x` is the
    /// point that reduces the constraint approximations as far as the box allows.
    pub infeasible: bool,
}

/// Asymptotes and iterate history of one MMA sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct MmaState {
    pub settings: MmaSettings,
    pub lower_asymptotes: Vec<f64>,
    pub upper_asymptotes: Vec<f64>,
    pub x_prev: Option<Vec<f64>>,
    pub x_prev2: Option<Vec<f64>>,
    pub iteration: usize,
}

struct Subproblem<'a> {
    low: &'a [f64],
    upp: &'a [f64],
    alpha: Vec<f64>,
    beta: Vec<f64>,
    p0: Vec<f64>,
    q0: Vec<f64>,
    p: Vec<Vec<f64>>,
    q: Vec<Vec<f64>>,
    b: Vec<f64>,
}

impl Subproblem<'_> {
    fn primal(&self, lambda: &[f64]) -> Vec<f64> {
        (0..self.p0.len())
            .map(|j| {
                let mut pj = self.p0[j];
                let mut qj = self.q0[j];
                for (i, &l) in lambda.iter().enumerate() {
                    pj += l * self.p[i][j];
                    qj += l * self.q[i][j];
                }
                let (sp, sq) = (pj.sqrt(), qj.sqrt());
                let y = (sp * self.low[j] + sq * self.upp[j]) / (sp + sq);
                y.clamp(self.alpha[j], self.beta[j])
            })
            .collect()
    }

    fn constraint(&self, i: usize, y: &[f64]) -> f64 {
        let mut s = -self.b[i];
        for j in 0..y.len() {
            s += self.p[i][j] / (self.upp[j] - y[j]) + self.q[i][j] / (y[j] - self.low[j]);
        }
        s
    }

    /// Maximizes the dual over `λ_i >= 0` for fixed other multipliers.
    /// Returns `false` when no finite multiplier satisfies constraint `i`.
    fn solve_coordinate(&self, lambda: &mut [f64], i: usize) -> bool {
        lambda[i] = 0.0;
        if self.constraint(i, &self.primal(lambda)) <= 0.0 {
            return true;
        }
        let mut lo = 0.0;
        let mut hi = 1.0;
        loop {
            lambda[i] = hi;
            if self.constraint(i, &self.primal(lambda)) <= 0.0 {
                break;
            }
            lo = hi;
            hi *= 4.0;
            if hi > LAMBDA_CAP {
                lambda[i] = LAMBDA_CAP;
                return false;
            }
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            lambda[i] = mid;
            if self.constraint(i, &self.primal(lambda)) <= 0.0 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        // Keep the feasible end of the bracket.
        lambda[i] = hi;
        true
    }
}

impl MmaState {
    pub fn new(n: usize, settings: MmaSettings) -> Self {
        Self {
            settings,
            lower_asymptotes: vec![0.0; n],
            upper_asymptotes: vec![0.0; n],
            x_prev: None,
            x_prev2: None,
            iteration: 0,
        }
    }

    /// One MMA update from `x` given the objective gradient and constraints.
    pub fn update(
        &mut self,
        x: &[f64],
        bounds: &Bounds,
        dobj: &[f64],
        constraints: &[Constraint],
    ) -> Result<MmaStep> {
        let n = x.len();
        if bounds.lower.len() != n || bounds.upper.len() != n || dobj.len() != n {
            return Err(invalid("MMA inputs have mismatched lengths"));
        }
        if self.lower_asymptotes.len() != n {
            return Err(invalid(format!(
                "MMA state sized for {} variables, got {n}",
                self.lower_asymptotes.len()
            )));
        }
        for (j, (&lo, &hi)) in bounds.lower.iter().zip(&bounds.upper).enumerate() {
            if !(lo < hi) {
                return Err(invalid(format!("empty box for variable {j}: [{lo}, {hi}]")));
            }
            if !(x[j] >= lo && x[j] <= hi) {
                return Err(invalid(format!("x[{j}] = {} outside [{lo}, {hi}]", x[j])));
            }
        }
        if dobj.iter().any(|v| !v.is_finite()) {
            return Err(invalid("objective gradient is not finite"));
        }
        for c in constraints {
            if c.gradient.len() != n
                || c.gradient.iter().any(|v| !v.is_finite())
                || !c.value.is_finite()
            {
                return Err(invalid(
                    "constraint gradient has wrong length or is not finite",
                ));
            }
        }

        let s = self.settings;
        let range: Vec<f64> = (0..n).map(|j| bounds.upper[j] - bounds.lower[j]).collect();

        // Asymptotes.
        match (&self.x_prev, &self.x_prev2) {
            (Some(x1), Some(x2)) => {
                for j in 0..n {
                    let trend = (x[j] - x1[j]) * (x1[j] - x2[j]);
                    let gamma = if trend < 0.0 {
                        s.asymptote_decr
                    } else if trend > 0.0 {
                        s.asymptote_incr
                    } else {
                        1.0
                    };
                    let lo = x[j] - gamma * (x1[j] - self.lower_asymptotes[j]);
                    let up = x[j] + gamma * (self.upper_asymptotes[j] - x1[j]);
                    self.lower_asymptotes[j] =
                        lo.clamp(x[j] - 10.0 * range[j], x[j] - 0.01 * range[j]);
                    self.upper_asymptotes[j] =
                        up.clamp(x[j] + 0.01 * range[j], x[j] + 10.0 * range[j]);
                }
            }
            _ => {
                for j in 0..n {
                    self.lower_asymptotes[j] = x[j] - s.asymptote_init * range[j];
                    self.upper_asymptotes[j] = x[j] + s.asymptote_init * range[j];
                }
            }
        }
        let low = &self.lower_asymptotes;
        let upp = &self.upper_asymptotes;

        let mut alpha = vec![0.0; n];
        let mut beta = vec![0.0; n];
        for j in 0..n {
            let step = s.move_limit * range[j];
            alpha[j] = bounds.lower[j]
                .max(low[j] + ALBEFA * (x[j] - low[j]))
                .max(x[j] - step);
            beta[j] = bounds.upper[j]
                .min(upp[j] - ALBEFA * (upp[j] - x[j]))
                .min(x[j] + step);
        }

        let approx = |grad: &[f64]| -> (Vec<f64>, Vec<f64>) {
            let mut p = vec![0.0; n];
            let mut q = vec![0.0; n];
            for j in 0..n {
                let ux = upp[j] - x[j];
                let xl = x[j] - low[j];
                let gp = grad[j].max(0.0);
                let gm = (-grad[j]).max(0.0);
                let reg = 0.001 * (gp + gm) + RAA0 / range[j];
                p[j] = (gp + reg) * ux * ux;
                q[j] = (gm + reg) * xl * xl;
            }
            (p, q)
        };
        let (p0, q0) = approx(dobj);
        let mut p = Vec::with_capacity(constraints.len());
        let mut q = Vec::with_capacity(constraints.len());
        let mut b = Vec::with_capacity(constraints.len());
        for c in constraints {
            let (pi, qi) = approx(&c.gradient);
            let at_x: f64 = (0..n)
                .map(|j| pi[j] / (upp[j] - x[j]) + qi[j] / (x[j] - low[j]))
                .sum();
            b.push(at_x - c.value);
            p.push(pi);
            q.push(qi);
        }
        let sub = Subproblem {
            low,
            upp,
            alpha,
            beta,
            p0,
            q0,
            p,
            q,
            b,
        };

        let m = constraints.len();
        let mut lambda = vec![0.0; m];
        let mut infeasible = false;
        if m > 0 {
            for _ in 0..if m == 1 { 1 } else { DUAL_SWEEPS } {
                let before = lambda.clone();
                infeasible = false;
                for i in 0..m {
                    if !sub.solve_coordinate(&mut lambda, i) {
                        infeasible = true;
                    }
                }
                let shift = lambda
                    .iter()
                    .zip(&before)
                    .map(|(a, b)| (a - b).abs() / a.abs().max(1.0))
                    .fold(0.0, f64::max);
                if shift < 1e-12 {
                    break;
                }
            }
        }
        let x_new = sub.primal(&lambda);

        self.x_prev2 = self.x_prev.take();
        self.x_prev = Some(x.to_vec());
        self.iteration += 1;
        Ok(MmaStep {
            x: x_new,
            multipliers: lambda,
            infeasible,
        })
    }
}
