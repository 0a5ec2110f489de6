//! MMA updates, the sequential two-field update for designs with voids, and
//! the outer design loop.

mod mma;

pub use mma::{Bounds, Constraint, MmaSettings, MmaState, MmaStep};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::elasticity::DensityDesign;
use crate::error::{invalid, Error, Result};
use crate::objectives::{ObjectiveKind, ObjectiveReport, ResponsiveProblem};

/// Volume budgets in absolute units (same units as the element areas).
#[derive(Debug, Clone, PartialEq)]
pub struct VolumeBudget {
    /// Maximum responsive volume `Σ ρ φ a`.
    pub vr_bar: f64,
    /// Maximum material volume `Σ ρ a`.
    pub v0_bar: f64,
    pub element_areas: Vec<f64>,
}

impl VolumeBudget {
    pub fn new(vr_bar: f64, v0_bar: f64, element_areas: Vec<f64>) -> Result<Self> {
        let total: f64 = element_areas.iter().sum();
        if element_areas.iter().any(|&a| !(a > 0.0)) {
            return Err(invalid("element areas must be positive"));
        }
        if !(vr_bar > 0.0 && vr_bar <= v0_bar && v0_bar <= total * (1.0 + 1e-12)) {
            return Err(invalid(format!(
                "volume budgets need 0 < Vr ≤ V0 ≤ total area, got Vr={vr_bar}, V0={v0_bar}, total={total}"
            )));
        }
        Ok(Self {
            vr_bar,
            v0_bar: v0_bar.min(total),
            element_areas,
        })
    }

    /// Budgets given as fractions of the total area.
    pub fn from_fractions(vr_frac: f64, v0_frac: f64, element_areas: Vec<f64>) -> Result<Self> {
        let total: f64 = element_areas.iter().sum();
        Self::new(vr_frac * total, v0_frac * total, element_areas)
    }

    pub fn total_area(&self) -> f64 {
        self.element_areas.iter().sum()
    }

    /// `Σ ρ φ a`.
    pub fn responsive_volume(&self, phi: &[f64], rho: &[f64]) -> f64 {
        self.element_areas
            .iter()
            .zip(phi.iter().zip(rho))
            .map(|(a, (p, r))| a * p * r)
            .sum()
    }

    /// `Σ ρ a`.
    pub fn material_volume(&self, rho: &[f64]) -> f64 {
        self.element_areas.iter().zip(rho).map(|(a, r)| a * r).sum()
    }
}

/// MMA states of the two design fields.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoFieldStates {
    pub phi: MmaState,
    /// Present only when voids are enabled.
    pub rho: Option<MmaState>,
    phi_scale: Option<f64>,
    rho_scale: Option<f64>,
}

impl TwoFieldStates {
    pub fn new(num_elems: usize, voids: bool, settings: MmaSettings) -> Self {
        Self {
            phi: MmaState::new(num_elems, settings),
            rho: voids.then(|| MmaState::new(num_elems, settings)),
            phi_scale: None,
            rho_scale: None,
        }
    }
}

/// The objective is rescaled once, by the largest gradient entry seen on the
/// first update, so MMA's fixed regularization acts at a consistent level.
fn scaled(grad: &[f64], scale: &mut Option<f64>) -> Vec<f64> {
    let s = *scale.get_or_insert_with(|| {
        let m = grad.iter().fold(0.0_f64, |m, g| m.max(g.abs()));
        if m > 0.0 {
            1.0 / m
        } else {
            1.0
        }
    });
    grad.iter().map(|g| g * s).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct TwoFieldStep {
    pub phi: Vec<f64>,
    pub rho: Vec<f64>,
    pub infeasible: bool,
}

/// One design update. With voids, `rho` is updated first under
/// `Σ ρ a ≤ V0`, then `phi` under `Σ ρ_new φ a ≤ Vr`, which is linear in `phi`
/// once `rho` is fixed. Without voids only `phi` moves, under `Σ φ a ≤ Vr`.
pub fn step_two_field(
    design: &DensityDesign,
    report: &ObjectiveReport,
    budget: &VolumeBudget,
    states: &mut TwoFieldStates,
) -> Result<TwoFieldStep> {
    let n = design.len();
    if budget.element_areas.len() != n || report.dphi.len() != n {
        return Err(invalid("design, gradient and budget sizes differ"));
    }
    let mut infeasible = false;
    let rho_new = match (&mut states.rho, design.voids_enabled) {
        (Some(state), true) => {
            if report.drho.len() != n {
                return Err(invalid("missing rho gradient"));
            }
            let con = Constraint {
                value: budget.material_volume(&design.rho) / budget.v0_bar - 1.0,
                gradient: budget
                    .element_areas
                    .iter()
                    .map(|a| a / budget.v0_bar)
                    .collect(),
            };
            let step = state.update(
                &design.rho,
                &Bounds::uniform(n, design.rho_min, 1.0),
                &scaled(&report.drho, &mut states.rho_scale),
                &[con],
            )?;
            infeasible |= step.infeasible;
            step.x
        }
        (None, false) => design.rho.clone(),
        _ => {
            return Err(invalid(
                "MMA states do not match the voids setting of the design",
            ))
        }
    };
    let con = Constraint {
        value: budget.responsive_volume(&design.phi, &rho_new) / budget.vr_bar - 1.0,
        gradient: budget
            .element_areas
            .iter()
            .zip(&rho_new)
            .map(|(a, r)| a * r / budget.vr_bar)
            .collect(),
    };
    let step = states.phi.update(
        &design.phi,
        &Bounds::uniform(n, 0.0, 1.0),
        &scaled(&report.dphi, &mut states.phi_scale),
        &[con],
    )?;
    infeasible |= step.infeasible;
    Ok(TwoFieldStep {
        phi: step.x,
        rho: rho_new,
        infeasible,
    })
}

/// One row of the convergence history.
#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    pub iter: usize,
    /// Reported objective value of the iterate.
    pub objective: f64,
    pub c0: f64,
    pub c1: f64,
    /// Responsive volume fraction `Σ ρ φ a / V`.
    pub vol_r: f64,
    /// Material volume fraction `Σ ρ a / V`.
    pub vol_0: f64,
    /// Largest change of any design variable in the update from this iterate.
    pub max_change: f64,
    pub infeasible_subproblem: bool,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RunHistory {
    pub records: Vec<IterationRecord>,
}

impl RunHistory {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn last(&self) -> Option<&IterationRecord> {
        self.records.last()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSettings {
    pub objective: ObjectiveKind,
    pub vr_frac: f64,
    pub v0_frac: f64,
    pub voids: bool,
    pub rho_min: f64,
    pub mma: MmaSettings,
    pub max_iter: usize,
    pub tol_change: f64,
    pub seed: u64,
    /// Amplitude of a seeded zero-mean perturbation of the initial `phi`.
    pub perturbation: f64,
    /// Allow actuation work with voids, which tends to produce meaningless designs.
    pub allow_work_with_voids: bool,
}

impl Default for RunSettings {
    fn default() -> Self {
        Self {
            objective: ObjectiveKind::BlockingLoad,
            vr_frac: 0.5,
            v0_frac: 1.0,
            voids: false,
            rho_min: crate::elasticity::DEFAULT_RHO_MIN,
            mma: MmaSettings::default(),
            max_iter: 300,
            tol_change: 0.01,
            seed: 0,
            perturbation: 0.0,
            allow_work_with_voids: false,
        }
    }
}

impl RunSettings {
    pub fn validate(&self) -> Result<()> {
        self.objective.validate()?;
        self.mma.validate()?;
        if self.voids
            && matches!(self.objective, ObjectiveKind::ActuationWork)
            && !self.allow_work_with_voids
        {
            return Err(Error::UnsupportedObjective(
                "actuation work with voids does not converge to meaningful designs; \
                 set allow_work_with_voids to override"
                    .into(),
            ));
        }
        if !(self.v0_frac > 0.0 && self.v0_frac <= 1.0) {
            return Err(invalid(format!(
                "v0_frac must lie in (0, 1], got {}",
                self.v0_frac
            )));
        }
        if !self.voids && self.v0_frac != 1.0 {
            return Err(invalid("v0_frac below 1 requires voids"));
        }
        if !(self.vr_frac > 0.0 && self.vr_frac <= self.v0_frac) {
            return Err(invalid(format!(
                "vr_frac must lie in (0, v0_frac = {}], got {}",
                self.v0_frac, self.vr_frac
            )));
        }
        if !(self.tol_change > 0.0) {
            return Err(invalid("tol_change must be positive"));
        }
        if !(0.0..1.0).contains(&self.perturbation) {
            return Err(invalid("perturbation must lie in [0, 1)"));
        }
        Ok(())
    }

    /// Uniform start `phi = Vr/V0`, `rho = V0/V`, optionally perturbed.
    pub fn initial_design(&self, num_elems: usize) -> DensityDesign {
        let phi0 = self.vr_frac / self.v0_frac;
        let mut design = if self.voids {
            DensityDesign::with_voids(
                vec![phi0; num_elems],
                vec![self.v0_frac; num_elems],
                self.rho_min,
            )
        } else {
            let mut d = DensityDesign::uniform(num_elems, phi0);
            d.rho_min = self.rho_min;
            d
        };
        if self.perturbation > 0.0 && num_elems > 0 {
            let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
            let noise: Vec<f64> = (0..num_elems)
                .map(|_| rng.gen_range(-1.0..1.0) * self.perturbation)
                .collect();
            let mean = noise.iter().sum::<f64>() / num_elems as f64;
            for (p, z) in design.phi.iter_mut().zip(&noise) {
                *p = (*p + z - mean).clamp(0.0, 1.0);
            }
            // Clamping can shift the mean upward; keep the start feasible.
            let total: f64 = design.phi.iter().sum();
            let cap = phi0 * num_elems as f64;
            if total > cap {
                let f = cap / total;
                design.phi.iter_mut().for_each(|p| *p *= f);
            }
        }
        design
    }
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub design: DensityDesign,
    pub history: RunHistory,
    /// Value-only evaluation of the final design.
    pub report: ObjectiveReport,
    pub converged: bool,
}

/// A run that stopped on an error, with everything computed before it.
#[derive(Debug)]
pub struct RunFailure {
    pub error: Error,
    pub history: RunHistory,
    pub design: DensityDesign,
}

impl std::fmt::Display for RunFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "run aborted after {} iterations: {}",
            self.history.len(),
            self.error
        )
    }
}

impl std::error::Error for RunFailure {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        Some(&self.error)
    }
}

/// Outer loop: filter, solve both stimuli, adjoint sensitivities, MMA step,
/// until the largest design change drops below `tol_change` or `max_iter`
/// iterations have run. `observer` sees every history row as it is recorded.
pub fn run(
    problem: &ResponsiveProblem,
    settings: &RunSettings,
    observer: &mut dyn FnMut(&IterationRecord),
) -> std::result::Result<RunOutcome, Box<RunFailure>> {
    let ne = problem.grid.num_elems();
    let mut design = settings.initial_design(ne);
    let mut history = RunHistory::default();
    let fail = |error: Error, history: RunHistory, design: DensityDesign| {
        Box::new(RunFailure {
            error,
            history,
            design,
        })
    };
    if let Err(e) = settings.validate() {
        return Err(fail(e, history, design));
    }
    let budget = match VolumeBudget::from_fractions(
        settings.vr_frac,
        settings.v0_frac,
        problem.grid.elem_areas(),
    ) {
        Ok(b) => b,
        Err(e) => return Err(fail(e, history, design)),
    };
    let total = budget.total_area();
    let mut states = TwoFieldStates::new(ne, settings.voids, settings.mma);
    let mut converged = false;

    for iter in 1..=settings.max_iter {
        let report = match problem.sensitivities(settings.objective, &design) {
            Ok(r) => r,
            Err(e) => return Err(fail(e, history, design)),
        };
        let step = match step_two_field(&design, &report, &budget, &mut states) {
            Ok(s) => s,
            Err(e) => return Err(fail(e, history, design)),
        };
        let max_change = design
            .phi
            .iter()
            .zip(&step.phi)
            .chain(design.rho.iter().zip(&step.rho))
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        let rec = IterationRecord {
            iter,
            objective: report.value,
            c0: report.c0,
            c1: report.c1,
            vol_r: budget.responsive_volume(&design.phi, &design.rho) / total,
            vol_0: budget.material_volume(&design.rho) / total,
            max_change,
            infeasible_subproblem: step.infeasible,
        };
        observer(&rec);
        history.records.push(rec);
        design.phi = step.phi;
        design.rho = step.rho;
        if max_change < settings.tol_change {
            converged = true;
            break;
        }
    }
    match problem.evaluate(settings.objective, &design) {
        Ok(report) => Ok(RunOutcome {
            design,
            history,
            report,
            converged,
        }),
        Err(e) => Err(fail(e, history, design)),
    }
}
