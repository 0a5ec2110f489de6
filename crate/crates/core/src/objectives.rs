//! Compliance-based objectives of a responsive structure and their adjoint
//! sensitivities.
//!
//! All objectives depend on the design only through the two compliances
//! `C0 = C(S1)` and `C1 = C(S2)`. Because the responsive modulus does not
//! depend on the stimulus, both states share one stiffness factorization.
//!
//! Sign convention: [`ObjectiveReport::value`] is the quantity reported to the
//! user (for [`ObjectiveKind::ActuationWork`] the work `C0 - C1`, which is to
//! be maximized), while [`ObjectiveReport::minimized`] and the gradients
//! `dphi` / `drho` always refer to the quantity the optimizer minimizes.

use serde::{Deserialize, Serialize};

use crate::elasticity::{assemble, DensityDesign, MaterialPair, SolverKind, StiffnessSystem};
use crate::error::{invalid, Error, Result};
use crate::filter::FilterOperator;
use crate::grid::Grid;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ObjectiveKind {
    /// Work done against the load between the two states, `C0 - C1`.
    ActuationWork,
    /// Compliance ratio `C1 / C0`; the blocking load is `1 - C1 / C0`.
    BlockingLoad,
    /// `(κ C1 + 1) / (κ C0 + 1)`: a spring of stiffness `κ` at the load point.
    Workpiece { kappa: f64 },
}

impl ObjectiveKind {
    pub fn validate(&self) -> Result<()> {
        match *self {
            Self::Workpiece { kappa } if !(kappa > 0.0 && kappa.is_finite()) => Err(invalid(
                format!("workpiece stiffness kappa must be positive, got {kappa}"),
            )),
            _ => Ok(()),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::ActuationWork => "actuation_work",
            Self::BlockingLoad => "blocking_load",
            Self::Workpiece { .. } => "workpiece",
        }
    }

    /// Reported value.
    pub fn value(&self, c0: f64, c1: f64) -> f64 {
        match *self {
            Self::ActuationWork => c0 - c1,
            Self::BlockingLoad => c1 / c0,
            Self::Workpiece { kappa } => (kappa * c1 + 1.0) / (kappa * c0 + 1.0),
        }
    }

    /// Quantity minimized by the optimizer.
    pub fn minimized(&self, c0: f64, c1: f64) -> f64 {
        match self {
            Self::ActuationWork => c1 - c0,
            _ => self.value(c0, c1),
        }
    }

    /// [`Self::minimized`] less its design-independent part, written in terms
    /// of `C0` and the gap `d = C1 - C0` so that no cancellation occurs when
    /// the two compliances are close.
    pub fn excess(&self, c0: f64, gap: f64) -> f64 {
        match *self {
            Self::ActuationWork => gap,
            Self::BlockingLoad => gap / c0,
            Self::Workpiece { kappa } => kappa * gap / (kappa * c0 + 1.0),
        }
    }

    /// Partial derivatives of [`Self::minimized`] with respect to `(C0, C1)`.
    pub fn compliance_partials(&self, c0: f64, c1: f64) -> (f64, f64) {
        match *self {
            Self::ActuationWork => (-1.0, 1.0),
            Self::BlockingLoad => (-c1 / (c0 * c0), 1.0 / c0),
            Self::Workpiece { kappa } => {
                let den = kappa * c0 + 1.0;
                (-kappa * (kappa * c1 + 1.0) / (den * den), kappa / den)
            }
        }
    }
}

/// How the adjoint states are obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum AdjointMode {
    /// Both adjoints are multiples of `K⁻¹ f`, which equals the unstimulated
    /// displacement when `ε*(S1) = 0`; no extra solve is needed then.
    #[default]
    SelfAdjoint,
    /// Solve `K λ_i = -(∂O/∂C_i) f` for each state explicitly.
    ExplicitSolve,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ObjectiveReport {
    pub kind: ObjectiveKind,
    pub value: f64,
    pub minimized: f64,
    pub c0: f64,
    pub c1: f64,
    /// [`ObjectiveKind::excess`], with the gap `C1 - C0` obtained from one
    /// solve against the eigenload difference rather than by subtraction.
    pub excess: f64,
    /// Blocking load `1 - C1 / C0` (absent when `C0 = 0`).
    pub alpha: Option<f64>,
    /// Gradient of `minimized` with respect to `phi` (empty for value-only reports).
    pub dphi: Vec<f64>,
    /// Gradient of `minimized` with respect to `rho` (zeros when voids are disabled).
    pub drho: Vec<f64>,
    pub filtered_phi: Vec<f64>,
    pub filtered_rho: Vec<f64>,
}

/// Grid, materials and filter shared by every evaluation of one design problem.
#[derive(Debug, Clone)]
pub struct ResponsiveProblem {
    pub grid: Grid,
    pub mats: MaterialPair,
    pub filter: FilterOperator,
    pub penalty: f64,
    pub solver: SolverKind,
}

impl ResponsiveProblem {
    pub fn new(grid: Grid, mats: MaterialPair, filter: FilterOperator, penalty: f64) -> Self {
        Self {
            grid,
            mats,
            filter,
            penalty,
            solver: SolverKind::Auto,
        }
    }

    /// Filtered fields of a design.
    pub fn filtered(&self, design: &DensityDesign) -> Result<(Vec<f64>, Vec<f64>)> {
        let fphi = self.filter.apply(&design.phi)?;
        let frho = if design.voids_enabled {
            self.filter.apply(&design.rho)?
        } else {
            vec![1.0; design.rho.len()]
        };
        Ok((fphi, frho))
    }

    /// Assembles and factorizes the stiffness of `design`.
    pub fn system(&self, design: &DensityDesign) -> Result<StiffnessSystem> {
        let (fphi, frho) = self.filtered(design)?;
        let mut sys = assemble(
            &self.grid,
            design,
            &fphi,
            &frho,
            &self.mats,
            self.penalty,
            self.solver,
        )?;
        sys.factorize()?;
        Ok(sys)
    }

    /// Objective value and both compliances (no gradients).
    pub fn evaluate(&self, kind: ObjectiveKind, design: &DensityDesign) -> Result<ObjectiveReport> {
        kind.validate()?;
        let (fphi, frho) = self.filtered(design)?;
        let mut sys = assemble(
            &self.grid,
            design,
            &fphi,
            &frho,
            &self.mats,
            self.penalty,
            self.solver,
        )?;
        sys.factorize()?;
        let c0 = sys.solve_equilibrium(self.mats.s1)?.compliance;
        let c1 = sys.solve_equilibrium(self.mats.s2)?.compliance;
        let gap = self.compliance_gap(&sys)?;
        Ok(report(
            kind,
            c0,
            c1,
            gap,
            Vec::new(),
            Vec::new(),
            fphi,
            frho,
        ))
    }

    pub fn sensitivities(
        &self,
        kind: ObjectiveKind,
        design: &DensityDesign,
    ) -> Result<ObjectiveReport> {
        self.sensitivities_with(kind, design, AdjointMode::SelfAdjoint)
    }

    /// Objective, compliances and adjoint gradients with respect to the raw
    /// (unfiltered) design fields.
    pub fn sensitivities_with(
        &self,
        kind: ObjectiveKind,
        design: &DensityDesign,
        mode: AdjointMode,
    ) -> Result<ObjectiveReport> {
        kind.validate()?;
        let (fphi, frho) = self.filtered(design)?;
        let mut sys = assemble(
            &self.grid,
            design,
            &fphi,
            &frho,
            &self.mats,
            self.penalty,
            self.solver,
        )?;
        sys.factorize()?;
        let (s1, s2) = (self.mats.s1, self.mats.s2);
        let st1 = sys.solve_equilibrium(s1)?;
        let st2 = sys.solve_equilibrium(s2)?;
        let (c0, c1) = (st1.compliance, st2.compliance);
        let (a0, a1) = kind.compliance_partials(c0, c1);

        let ne = self.grid.num_elems();
        let mut dfphi = vec![0.0; ne];
        let mut dfrho = vec![0.0; ne];
        match mode {
            AdjointMode::SelfAdjoint => {
                // λ_i = -a_i K⁻¹f; with g(S1) = 0 and homogeneous data K⁻¹f = u1.
                let base = if self.mats.eps_star_at(s1).is_zero() && sys.has_homogeneous_dirichlet()
                {
                    st1.u.clone()
                } else {
                    sys.solve_homogeneous(sys.load())?
                };
                for (a, st) in [(a0, &st1), (a1, &st2)] {
                    if a == 0.0 {
                        continue;
                    }
                    let (p, r) = sys.element_partials_all(&base, &st.u, st.stimulus);
                    for e in 0..ne {
                        dfphi[e] += a * p[e];
                        dfrho[e] += a * r[e];
                    }
                }
            }
            AdjointMode::ExplicitSolve => {
                for (a, st) in [(a0, &st1), (a1, &st2)] {
                    let rhs: Vec<f64> = sys.load().iter().map(|f| -a * f).collect();
                    let lambda = sys.solve_homogeneous(&rhs)?;
                    let (p, r) = sys.element_partials_all(&lambda, &st.u, st.stimulus);
                    for e in 0..ne {
                        dfphi[e] -= p[e];
                        dfrho[e] -= r[e];
                    }
                }
            }
        }
        let dphi = self.filter.apply_transpose(&dfphi)?;
        let drho = if design.voids_enabled {
            self.filter.apply_transpose(&dfrho)?
        } else {
            vec![0.0; ne]
        };
        let gap = self.compliance_gap(&sys)?;
        Ok(report(kind, c0, c1, gap, dphi, drho, fphi, frho))
    }

    /// Load-point superposition: `u_load = K⁻¹ f̄` and `v = K⁻¹ (g(S2) - g(S1))`,
    /// both with zero Dirichlet data.
    pub fn superposition_fields(
        &self,
        sys: &StiffnessSystem,
        profile: &[f64],
    ) -> Result<(Vec<f64>, Vec<f64>)> {
        let g2 = sys.eigenload(self.mats.s2);
        let g1 = sys.eigenload(self.mats.s1);
        let dg: Vec<f64> = g2.iter().zip(&g1).map(|(a, b)| a - b).collect();
        Ok((sys.solve_homogeneous(profile)?, sys.solve_homogeneous(&dg)?))
    }

    /// `C1 - C0 = fᵀ K⁻¹ (g(S2) - g(S1))`.
    pub fn compliance_gap(&self, sys: &StiffnessSystem) -> Result<f64> {
        let dg: Vec<f64> = sys
            .eigenload(self.mats.s2)
            .iter()
            .zip(&sys.eigenload(self.mats.s1))
            .map(|(a, b)| a - b)
            .collect();
        Ok(dot(sys.load(), &sys.solve_homogeneous(&dg)?))
    }

    fn require_homogeneous(&self) -> Result<()> {
        match self.grid.dirichlet.iter().find(|(_, &v)| v != 0.0) {
            Some((&dof, &value)) => Err(Error::NonHomogeneousDirichlet { dof, value }),
            None => Ok(()),
        }
    }

    /// Blocking load amplitude `α = -f̄ᵀv / f̄ᵀu_load` for a load profile `f̄`
    /// (a full-length load vector), computed by superposition instead of from
    /// the compliance ratio.
    pub fn blocking_load_direct(&self, design: &DensityDesign, profile: &[f64]) -> Result<f64> {
        self.require_homogeneous()?;
        if profile.len() != self.grid.num_dofs() {
            return Err(invalid(format!(
                "load profile has {} entries, grid has {} dofs",
                profile.len(),
                self.grid.num_dofs()
            )));
        }
        let sys = self.system(design)?;
        let (u_load, v) = self.superposition_fields(&sys, profile)?;
        let work = dot(profile, &u_load);
        if work == 0.0 || !work.is_finite() {
            return Err(Error::DegenerateLoad(format!(
                "profile does no work on its own displacement (f̄ᵀu = {work:e})"
            )));
        }
        Ok(-dot(profile, &v) / work)
    }

    /// Force carried by a spring of stiffness `kappa` attached at `node` along
    /// `direction` when the structure is stimulated.
    pub fn workpiece_spring_force(
        &self,
        design: &DensityDesign,
        kappa: f64,
        node: usize,
        direction: [f64; 2],
    ) -> Result<f64> {
        self.require_homogeneous()?;
        if !(kappa > 0.0 && kappa.is_finite()) {
            return Err(invalid(format!(
                "spring stiffness must be positive, got {kappa}"
            )));
        }
        if node >= self.grid.num_nodes() {
            return Err(invalid(format!("node {node} out of range")));
        }
        let d = &self.grid.dirichlet;
        if d.contains_key(&(2 * node)) && d.contains_key(&(2 * node + 1)) {
            return Err(invalid(format!("node {node} is fully constrained")));
        }
        let len = (direction[0] * direction[0] + direction[1] * direction[1]).sqrt();
        if !(len > 0.0) {
            return Err(invalid("spring direction must be nonzero"));
        }
        let mut unit = vec![0.0; self.grid.num_dofs()];
        unit[2 * node] = direction[0] / len;
        unit[2 * node + 1] = direction[1] / len;
        let sys = self.system(design)?;
        let (u_n, v) = self.superposition_fields(&sys, &unit)?;
        let c0 = dot(&unit, &u_n);
        if c0 == 0.0 || !c0.is_finite() {
            return Err(Error::DegenerateLoad(format!(
                "unit load at node {node} does no work (compliance {c0:e})"
            )));
        }
        Ok(-kappa * dot(&unit, &v) / (kappa * c0 + 1.0))
    }
}

#[allow(clippy::too_many_arguments)]
fn report(
    kind: ObjectiveKind,
    c0: f64,
    c1: f64,
    gap: f64,
    dphi: Vec<f64>,
    drho: Vec<f64>,
    filtered_phi: Vec<f64>,
    filtered_rho: Vec<f64>,
) -> ObjectiveReport {
    ObjectiveReport {
        kind,
        value: kind.value(c0, c1),
        minimized: kind.minimized(c0, c1),
        c0,
        c1,
        excess: kind.excess(c0, gap),
        alpha: (c0 != 0.0).then(|| 1.0 - c1 / c0),
        dphi,
        drho,
        filtered_phi,
        filtered_rho,
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
