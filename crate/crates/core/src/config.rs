//! JSON run configuration.
//!
//! Only `geometry` and `materials` are required; every other section falls
//! back to its documented default. Unknown keys are rejected. A parsed config
//! can be written back with every default filled in (the "resolved" config),
//! which reproduces the run exactly.
//!
//! ```json
//! {
//!   "geometry":  { "length": 3.0, "height": 1.0, "nx": 180, "ny": 60 },
//!   "materials": { "e_s": 1.0, "nu_s": 0.3, "e_r": 1.0, "nu_r": 0.3,
//!                  "eps_star": [[-0.1, 0.0], [0.0, 0.1]] },
//!   "objective": { "kind": "actuation_work" },
//!   "budget":    { "vr_frac": 0.5 }
//! }
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::elasticity::{
    IsotropicHooke, MaterialPair, SolverKind, SymStrain, DEFAULT_PENALTY, DEFAULT_RHO_MIN,
};
use crate::error::{Error, Result};
use crate::filter::{FilterOperator, DEFAULT_RADIUS_ELEMS};
use crate::grid::Grid;
use crate::objectives::{ObjectiveKind, ResponsiveProblem};
use crate::optimizer::{MmaSettings, RunSettings};

fn bad(key: &str, constraint: impl Into<String>) -> Error {
    Error::Config {
        key: key.to_string(),
        constraint: constraint.into(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometryConfig {
    pub length: f64,
    pub height: f64,
    pub nx: usize,
    pub ny: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MaterialsConfig {
    pub e_s: f64,
    pub nu_s: f64,
    pub e_r: f64,
    pub nu_r: f64,
    /// Spontaneous strain at full stimulus, as a symmetric 2×2 matrix.
    pub eps_star: [[f64; 2]; 2],
    #[serde(default)]
    pub s1: f64,
    #[serde(default = "one")]
    pub s2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LoadConfig {
    /// Downward point load at the bottom of the free end.
    #[serde(default = "one")]
    pub magnitude: f64,
}

impl Default for LoadConfig {
    fn default() -> Self {
        Self { magnitude: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimpConfig {
    #[serde(default = "default_penalty")]
    pub penalty: f64,
    #[serde(default = "default_rho_min")]
    pub rho_min: f64,
    #[serde(default)]
    pub voids: bool,
    #[serde(default)]
    pub allow_work_with_voids: bool,
}

impl Default for SimpConfig {
    fn default() -> Self {
        Self {
            penalty: DEFAULT_PENALTY,
            rho_min: DEFAULT_RHO_MIN,
            voids: false,
            allow_work_with_voids: false,
        }
    }
}

/// Filter radius, either in element widths (`L / nx`) or in domain units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FilterConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub radius_elements: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub radius: Option<f64>,
}

impl Default for FilterConfig {
    fn default() -> Self {
        Self {
            radius_elements: Some(DEFAULT_RADIUS_ELEMS),
            radius: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BudgetConfig {
    #[serde(default = "half")]
    pub vr_frac: f64,
    #[serde(default = "one")]
    pub v0_frac: f64,
}

impl Default for BudgetConfig {
    fn default() -> Self {
        Self {
            vr_frac: 0.5,
            v0_frac: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizerConfig {
    #[serde(default = "default_move")]
    pub move_limit: f64,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
    #[serde(default = "default_tol")]
    pub tol_change: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub perturbation: f64,
    #[serde(default = "default_asym_init")]
    pub asymptote_init: f64,
    #[serde(default = "default_asym_incr")]
    pub asymptote_incr: f64,
    #[serde(default = "default_asym_decr")]
    pub asymptote_decr: f64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        let m = MmaSettings::default();
        Self {
            move_limit: m.move_limit,
            max_iter: default_max_iter(),
            tol_change: default_tol(),
            seed: 0,
            perturbation: 0.0,
            asymptote_init: m.asymptote_init,
            asymptote_incr: m.asymptote_incr,
            asymptote_decr: m.asymptote_decr,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    Csv,
    Vtk,
    Pgm,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default = "default_dir")]
    pub directory: PathBuf,
    #[serde(default = "default_formats")]
    pub formats: Vec<OutputFormat>,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            directory: default_dir(),
            formats: default_formats(),
        }
    }
}

fn one() -> f64 {
    1.0
}
fn half() -> f64 {
    0.5
}
fn default_penalty() -> f64 {
    DEFAULT_PENALTY
}
fn default_rho_min() -> f64 {
    DEFAULT_RHO_MIN
}
fn default_move() -> f64 {
    MmaSettings::default().move_limit
}
fn default_max_iter() -> usize {
    300
}
fn default_tol() -> f64 {
    0.01
}
fn default_asym_init() -> f64 {
    MmaSettings::default().asymptote_init
}
fn default_asym_incr() -> f64 {
    MmaSettings::default().asymptote_incr
}
fn default_asym_decr() -> f64 {
    MmaSettings::default().asymptote_decr
}
fn default_dir() -> PathBuf {
    PathBuf::from("out")
}
fn default_formats() -> Vec<OutputFormat> {
    vec![OutputFormat::Csv, OutputFormat::Vtk, OutputFormat::Pgm]
}
fn default_objective() -> ObjectiveKind {
    ObjectiveKind::ActuationWork
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub geometry: GeometryConfig,
    pub materials: MaterialsConfig,
    #[serde(default)]
    pub load: LoadConfig,
    #[serde(default = "default_objective")]
    pub objective: ObjectiveKind,
    #[serde(default)]
    pub simp: SimpConfig,
    #[serde(default)]
    pub filter: FilterConfig,
    #[serde(default)]
    pub budget: BudgetConfig,
    #[serde(default)]
    pub optimizer: OptimizerConfig,
    #[serde(default)]
    pub solver: SolverKind,
    #[serde(default)]
    pub output: OutputConfig,
}

fn positive(key: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(bad(
            key,
            format!("must be a positive finite number, got {v}"),
        ))
    }
}

fn poisson(key: &str, v: f64) -> Result<()> {
    if (0.0..0.5).contains(&v) {
        Ok(())
    } else {
        Err(bad(
            key,
            format!("must satisfy 0 <= nu < 0.5 (plane strain), got {v}"),
        ))
    }
}

impl RunConfig {
    pub fn from_json_str(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        Self::from_json_str(&std::fs::read_to_string(path)?)
    }

    /// Pretty JSON with every default made explicit.
    pub fn to_resolved_json(&self) -> String {
        let mut resolved = self.clone();
        if resolved.filter.radius.is_none() && resolved.filter.radius_elements.is_none() {
            resolved.filter.radius_elements = Some(DEFAULT_RADIUS_ELEMS);
        }
        serde_json::to_string_pretty(&resolved).expect("config serializes") + "\n"
    }

    pub fn validate(&self) -> Result<()> {
        let g = &self.geometry;
        positive("geometry.length", g.length)?;
        positive("geometry.height", g.height)?;
        if g.nx == 0 {
            return Err(bad("geometry.nx", "must be at least 1"));
        }
        if g.ny == 0 {
            return Err(bad("geometry.ny", "must be at least 1"));
        }

        let m = &self.materials;
        positive("materials.e_s", m.e_s)?;
        positive("materials.e_r", m.e_r)?;
        poisson("materials.nu_s", m.nu_s)?;
        poisson("materials.nu_r", m.nu_r)?;
        let e = m.eps_star;
        if e.iter().flatten().any(|v| !v.is_finite()) {
            return Err(bad("materials.eps_star", "entries must be finite"));
        }
        if e[0][1] != e[1][0] {
            return Err(bad("materials.eps_star", "must be symmetric"));
        }
        if !m.s1.is_finite() || !m.s2.is_finite() || m.s1 == m.s2 {
            return Err(bad(
                "materials.s2",
                "stimulus levels must be finite and distinct",
            ));
        }

        if !self.load.magnitude.is_finite() || self.load.magnitude == 0.0 {
            return Err(bad("load.magnitude", "must be finite and nonzero"));
        }
        if let ObjectiveKind::Workpiece { kappa } = self.objective {
            positive("objective.kappa", kappa)?;
        }

        let s = &self.simp;
        if !(s.penalty >= 1.0 && s.penalty.is_finite()) {
            return Err(bad(
                "simp.penalty",
                format!("must be >= 1, got {}", s.penalty),
            ));
        }
        if !(s.rho_min > 0.0 && s.rho_min < 1.0) {
            return Err(bad(
                "simp.rho_min",
                format!("must lie in (0, 1), got {}", s.rho_min),
            ));
        }
        if s.voids
            && matches!(self.objective, ObjectiveKind::ActuationWork)
            && !s.allow_work_with_voids
        {
            return Err(bad(
                "objective.kind",
                "actuation_work with voids does not converge to meaningful designs; \
                 set simp.allow_work_with_voids to override",
            ));
        }

        match (self.filter.radius_elements, self.filter.radius) {
            (Some(_), Some(_)) => {
                return Err(bad(
                    "filter",
                    "give either radius_elements or radius, not both",
                ))
            }
            (Some(r), None) if !(r > 0.0 && r.is_finite()) => {
                return Err(bad(
                    "filter.radius_elements",
                    format!("must be positive, got {r}"),
                ))
            }
            (None, Some(r)) if !(r > 0.0 && r.is_finite()) => {
                return Err(bad("filter.radius", format!("must be positive, got {r}")))
            }
            _ => {}
        }

        let b = &self.budget;
        if !(b.v0_frac > 0.0 && b.v0_frac <= 1.0) {
            return Err(bad(
                "budget.v0_frac",
                format!("must lie in (0, 1], got {}", b.v0_frac),
            ));
        }
        if !s.voids && b.v0_frac != 1.0 {
            return Err(bad(
                "budget.v0_frac",
                "must be 1 unless simp.voids is enabled",
            ));
        }
        if !(b.vr_frac > 0.0 && b.vr_frac <= b.v0_frac) {
            return Err(bad(
                "budget.vr_frac",
                format!(
                    "must lie in (0, v0_frac = {}], got {}",
                    b.v0_frac, b.vr_frac
                ),
            ));
        }

        let o = &self.optimizer;
        if !(o.move_limit > 0.0 && o.move_limit <= 1.0) {
            return Err(bad(
                "optimizer.move_limit",
                format!("must lie in (0, 1], got {}", o.move_limit),
            ));
        }
        if o.max_iter == 0 {
            return Err(bad("optimizer.max_iter", "must be at least 1"));
        }
        positive("optimizer.tol_change", o.tol_change)?;
        if !(0.0..1.0).contains(&o.perturbation) {
            return Err(bad(
                "optimizer.perturbation",
                format!("must lie in [0, 1), got {}", o.perturbation),
            ));
        }
        positive("optimizer.asymptote_init", o.asymptote_init)?;
        if !(o.asymptote_decr > 0.0 && o.asymptote_decr < 1.0) {
            return Err(bad("optimizer.asymptote_decr", "must lie in (0, 1)"));
        }
        if !(o.asymptote_incr > 1.0 && o.asymptote_incr.is_finite()) {
            return Err(bad("optimizer.asymptote_incr", "must be > 1"));
        }
        if self.output.formats.is_empty() {
            return Err(bad(
                "output.formats",
                "must list at least one of csv, vtk, pgm",
            ));
        }
        Ok(())
    }

    pub fn grid(&self) -> Result<Grid> {
        let g = &self.geometry;
        Ok(Grid::new(g.nx, g.ny, g.length, g.height)?.with_cantilever_bcs(self.load.magnitude))
    }

    pub fn materials(&self) -> Result<MaterialPair> {
        let m = &self.materials;
        let mut pair = MaterialPair::new(
            IsotropicHooke::plane_strain(m.e_s, m.nu_s)?,
            IsotropicHooke::plane_strain(m.e_r, m.nu_r)?,
            SymStrain::from_matrix(m.eps_star)?,
        );
        pair.s1 = m.s1;
        pair.s2 = m.s2;
        Ok(pair)
    }

    /// Filter radius in domain units.
    pub fn filter_radius(&self) -> f64 {
        match (self.filter.radius, self.filter.radius_elements) {
            (Some(r), _) => r,
            (None, Some(k)) => k * self.geometry.length / self.geometry.nx as f64,
            (None, None) => DEFAULT_RADIUS_ELEMS * self.geometry.length / self.geometry.nx as f64,
        }
    }

    pub fn problem(&self) -> Result<ResponsiveProblem> {
        let grid = self.grid()?;
        let filter = FilterOperator::new(&grid, self.filter_radius())?;
        let mut p = ResponsiveProblem::new(grid, self.materials()?, filter, self.simp.penalty);
        p.solver = self.solver;
        Ok(p)
    }

    pub fn run_settings(&self) -> RunSettings {
        let o = &self.optimizer;
        RunSettings {
            objective: self.objective,
            vr_frac: self.budget.vr_frac,
            v0_frac: self.budget.v0_frac,
            voids: self.simp.voids,
            rho_min: self.simp.rho_min,
            mma: MmaSettings {
                move_limit: o.move_limit,
                asymptote_init: o.asymptote_init,
                asymptote_incr: o.asymptote_incr,
                asymptote_decr: o.asymptote_decr,
            },
            max_iter: o.max_iter,
            tol_change: o.tol_change,
            seed: o.seed,
            perturbation: o.perturbation,
            allow_work_with_voids: self.simp.allow_work_with_voids,
        }
    }
}
