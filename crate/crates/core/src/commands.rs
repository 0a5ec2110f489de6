//! Drivers behind the CLI subcommands: a full design run with exported
//! artifacts, an adjoint-versus-finite-difference gradient check, and a suite
//! of identity checks on the objectives.

use std::path::{Path, PathBuf};

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::{OutputFormat, RunConfig};
use crate::elasticity::{DensityDesign, IsotropicHooke};
use crate::error::{Error, Result};
use crate::export::{self, RunSummary};
use crate::objectives::{ObjectiveKind, ResponsiveProblem};
use crate::optimizer::{self, IterationRecord, RunOutcome};

pub const RESOLVED_CONFIG: &str = "config.resolved.json";
pub const DENSITY_CSV: &str = "density.csv";
pub const DENSITY_VTK: &str = "density.vtk";
pub const DENSITY_PGM: &str = "density.pgm";
pub const CONVERGENCE_LOG: &str = "convergence.csv";
pub const SUMMARY_JSON: &str = "summary.json";

/// Largest mesh the gradient check runs on; larger configs are coarsened.
pub const GRADCHECK_MESH_CAP: usize = 16;
pub const GRADCHECK_STEP: f64 = 1e-6;
pub const GRADCHECK_TOLERANCE: f64 = 1e-4;

#[derive(Debug)]
pub struct RunArtifacts {
    pub directory: PathBuf,
    pub files: Vec<PathBuf>,
    pub summary: RunSummary,
    pub outcome: RunOutcome,
}

/// Runs the optimization described by `cfg` and writes its artifacts into
/// `out_dir`. The resolved config is written before the run starts and the
/// convergence log is written even when the run aborts.
pub fn cmd_run(
    cfg: &RunConfig,
    out_dir: &Path,
    observer: &mut dyn FnMut(&IterationRecord),
) -> Result<RunArtifacts> {
    cfg.validate()?;
    std::fs::create_dir_all(out_dir)?;
    let mut resolved = cfg.clone();
    resolved.output.directory = out_dir.to_path_buf();
    let mut files = Vec::new();
    let mut put = |name: &str, contents: &str| -> Result<()> {
        let path = out_dir.join(name);
        export::write_atomic(&path, contents.as_bytes())?;
        files.push(path);
        Ok(())
    };
    put(RESOLVED_CONFIG, &resolved.to_resolved_json())?;

    let problem = cfg.problem()?;
    let outcome = match optimizer::run(&problem, &cfg.run_settings(), observer) {
        Ok(o) => o,
        Err(failure) => {
            put(CONVERGENCE_LOG, &export::convergence_log(&failure.history))?;
            return Err(failure.error);
        }
    };
    let grid = &problem.grid;
    let (fphi, frho) = (&outcome.report.filtered_phi, &outcome.report.filtered_rho);
    for format in &cfg.output.formats {
        match format {
            OutputFormat::Csv => put(
                DENSITY_CSV,
                &export::density_csv(grid, &outcome.design, fphi, frho)?,
            )?,
            OutputFormat::Vtk => put(
                DENSITY_VTK,
                &export::vtk(grid, &outcome.design, fphi, frho)?,
            )?,
            OutputFormat::Pgm => put(DENSITY_PGM, &export::pgm(grid, fphi, frho)?)?,
        }
    }
    put(CONVERGENCE_LOG, &export::convergence_log(&outcome.history))?;
    let summary = RunSummary::new(
        grid,
        &outcome.design,
        &outcome.report,
        &outcome.history,
        outcome.converged,
    );
    put(SUMMARY_JSON, &summary.to_json())?;
    Ok(RunArtifacts {
        directory: out_dir.to_path_buf(),
        files,
        summary,
        outcome,
    })
}

/// Random design with fields away from their bounds, so central differences
/// stay inside the box.
pub fn random_design(
    num_elems: usize,
    voids: bool,
    rho_min: f64,
    rng: &mut ChaCha8Rng,
) -> DensityDesign {
    let phi: Vec<f64> = (0..num_elems).map(|_| rng.gen_range(0.05..0.95)).collect();
    if voids {
        let rho = (0..num_elems).map(|_| rng.gen_range(0.2..0.95)).collect();
        DensityDesign::with_voids(phi, rho, rho_min)
    } else {
        let mut d = DensityDesign::uniform(num_elems, 0.0);
        d.phi = phi;
        d.rho_min = rho_min;
        d
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Field {
    Phi,
    Rho,
}

impl Field {
    pub fn name(self) -> &'static str {
        match self {
            Field::Phi => "phi",
            Field::Rho => "rho",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradcheckEntry {
    pub objective: ObjectiveKind,
    pub field: Field,
    pub probes: usize,
    /// `max |adjoint - fd| / ‖adjoint‖∞` over the probed entries.
    pub max_rel_err: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradcheckReport {
    pub nx: usize,
    pub ny: usize,
    pub tolerance: f64,
    pub entries: Vec<GradcheckEntry>,
}

impl GradcheckReport {
    pub fn passed(&self) -> bool {
        self.entries.iter().all(|e| e.max_rel_err <= self.tolerance)
    }

    pub fn worst(&self) -> f64 {
        self.entries
            .iter()
            .map(|e| e.max_rel_err)
            .fold(0.0, f64::max)
    }
}

/// Relative error of `adjoint` against central differences of the minimized
/// objective at the given entries of one field. The differences are taken of
/// [`ObjectiveReport::excess`](crate::objectives::ObjectiveReport::excess),
/// which has the same gradient without the rounding of a value near 1.
pub fn check_field(
    problem: &ResponsiveProblem,
    kind: ObjectiveKind,
    design: &DensityDesign,
    field: Field,
    entries: &[usize],
) -> Result<f64> {
    let report = problem.sensitivities(kind, design)?;
    let adjoint = match field {
        Field::Phi => &report.dphi,
        Field::Rho => &report.drho,
    };
    let scale = adjoint.iter().fold(0.0_f64, |m, g| m.max(g.abs()));
    let mut worst = 0.0_f64;
    let mut fd_scale = 0.0_f64;
    for &e in entries {
        let eval = |delta: f64| -> Result<f64> {
            let mut d = design.clone();
            match field {
                Field::Phi => d.phi[e] += delta,
                Field::Rho => d.rho[e] += delta,
            }
            Ok(problem.evaluate(kind, &d)?.excess)
        };
        let fd = (eval(GRADCHECK_STEP)? - eval(-GRADCHECK_STEP)?) / (2.0 * GRADCHECK_STEP);
        worst = worst.max((adjoint[e] - fd).abs());
        fd_scale = fd_scale.max(fd.abs());
    }
    Ok(if scale > 0.0 {
        worst / scale
    } else if fd_scale > 0.0 {
        f64::INFINITY
    } else {
        0.0
    })
}

/// Gradient check of every objective kind on a random design. Meshes larger
/// than [`GRADCHECK_MESH_CAP`] per side are coarsened to the cap.
pub fn cmd_gradcheck(cfg: &RunConfig, probes: usize, seed: u64) -> Result<GradcheckReport> {
    let mut cfg = cfg.clone();
    cfg.geometry.nx = cfg.geometry.nx.min(GRADCHECK_MESH_CAP);
    cfg.geometry.ny = cfg.geometry.ny.min(GRADCHECK_MESH_CAP);
    cfg.simp.allow_work_with_voids = true;
    cfg.validate()?;
    let problem = cfg.problem()?;
    let ne = problem.grid.num_elems();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let design = random_design(ne, cfg.simp.voids, cfg.simp.rho_min, &mut rng);
    let kappa = match cfg.objective {
        ObjectiveKind::Workpiece { kappa } => kappa,
        _ => 1.0,
    };
    let kinds = [
        ObjectiveKind::ActuationWork,
        ObjectiveKind::BlockingLoad,
        ObjectiveKind::Workpiece { kappa },
    ];
    let fields: &[Field] = if cfg.simp.voids {
        &[Field::Phi, Field::Rho]
    } else {
        &[Field::Phi]
    };
    let count = probes.clamp(1, ne);
    let mut entries = Vec::new();
    for kind in kinds {
        for &field in fields {
            let idx = sample(&mut rng, ne, count).into_vec();
            entries.push(GradcheckEntry {
                objective: kind,
                field,
                probes: count,
                max_rel_err: check_field(&problem, kind, &design, field, &idx)?,
            });
        }
    }
    Ok(GradcheckReport {
        nx: cfg.geometry.nx,
        ny: cfg.geometry.ny,
        tolerance: GRADCHECK_TOLERANCE,
        entries,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct IdentityCheck {
    pub name: &'static str,
    pub residual: f64,
    pub tolerance: f64,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct IdentityReport {
    pub checks: Vec<IdentityCheck>,
}

impl IdentityReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn get(&self, name: &str) -> Option<&IdentityCheck> {
        self.checks.iter().find(|c| c.name == name)
    }
}

pub const IDENTITY_DESIGNS: usize = 10;
pub const KAPPA_SWEEP: [f64; 3] = [1e-6, 1.0, 1e6];

fn ranking(values: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    idx
}

fn argmin(values: &[f64]) -> usize {
    ranking(values)[0]
}

/// Runs the identity suite on random designs drawn from `cfg.optimizer.seed`.
pub fn cmd_identities(cfg: &RunConfig) -> Result<IdentityReport> {
    cfg.validate()?;
    // Spring force and κ-limit checks compare against a unit load.
    let mut unit_cfg = cfg.clone();
    unit_cfg.load.magnitude = 1.0;
    let problem = unit_cfg.problem()?;
    let ne = problem.grid.num_elems();
    let voids = cfg.simp.voids;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.optimizer.seed);
    let designs: Vec<DensityDesign> = (0..IDENTITY_DESIGNS)
        .map(|_| random_design(ne, voids, cfg.simp.rho_min, &mut rng))
        .collect();
    let mut checks = Vec::new();

    // Blocking load by superposition against the compliance ratio.
    let profile = problem.grid.load_vector();
    let mut res = 0.0_f64;
    for d in &designs {
        let r = problem.evaluate(ObjectiveKind::BlockingLoad, d)?;
        let direct = problem.blocking_load_direct(d, &profile)?;
        res = res.max((direct - (1.0 - r.c1 / r.c0)).abs());
    }
    checks.push(IdentityCheck {
        name: "blocking_load",
        residual: res,
        tolerance: 1e-10,
        passed: res <= 1e-10,
        detail: "max |alpha_direct - (1 - C1/C0)|".into(),
    });

    // Workpiece limits in κ, and the spring force f0 = 1 - O.
    let (mut small_ratio, mut large_res, mut spring_res) = (0.0_f64, 0.0_f64, 0.0_f64);
    let load_node = problem.grid.node_index(problem.grid.nx, 0);
    for d in &designs {
        let r = problem.evaluate(ObjectiveKind::BlockingLoad, d)?;
        let (c0, c1) = (r.c0, r.c1);
        let k = KAPPA_SWEEP[0];
        let o_small = ObjectiveKind::Workpiece { kappa: k }.value(c0, c1);
        small_ratio = small_ratio
            .max((o_small - (1.0 + k * (c1 - c0))).abs() / (10.0 * k * k * (c0 * c1).abs()));
        let o_large = ObjectiveKind::Workpiece {
            kappa: KAPPA_SWEEP[2],
        }
        .value(c0, c1);
        large_res = large_res.max((o_large - c1 / c0).abs());
        let o_one = ObjectiveKind::Workpiece { kappa: 1.0 }.value(c0, c1);
        let f0 = problem.workpiece_spring_force(d, 1.0, load_node, [0.0, -1.0])?;
        spring_res = spring_res.max((f0 - (1.0 - o_one)).abs());
    }
    checks.push(IdentityCheck {
        name: "workpiece_small_kappa",
        residual: small_ratio,
        tolerance: 1.0,
        passed: small_ratio <= 1.0,
        detail: "max |O(1e-6) - (1 + k(C1 - C0))| / (10 k^2 |C0 C1|)".into(),
    });
    checks.push(IdentityCheck {
        name: "workpiece_large_kappa",
        residual: large_res,
        tolerance: 1e-4,
        passed: large_res <= 1e-4,
        detail: "max |O(1e6) - C1/C0|".into(),
    });
    let spring_tol = 1e-10;
    checks.push(IdentityCheck {
        name: "spring_force",
        residual: spring_res,
        tolerance: spring_tol,
        passed: spring_res <= spring_tol,
        detail: "max |f0 - (1 - O)| for a unit spring at the load point".into(),
    });

    // Equal moduli: C0 does not depend on phi.
    let mut eq = problem.clone();
    eq.mats.responsive = IsotropicHooke::plane_strain(cfg.materials.e_s, cfg.materials.nu_s)?;
    let solid: Vec<DensityDesign> = designs
        .iter()
        .map(|d| {
            let mut s = DensityDesign::uniform(ne, 0.0);
            s.phi = d.phi.clone();
            s
        })
        .collect();
    let mut c0s = Vec::new();
    let mut c1s = Vec::new();
    for d in &solid {
        let r = eq.evaluate(ObjectiveKind::BlockingLoad, d)?;
        c0s.push(r.c0);
        c1s.push(r.c1);
    }
    let mean = c0s.iter().sum::<f64>() / c0s.len() as f64;
    let spread = (c0s.iter().cloned().fold(f64::MIN, f64::max)
        - c0s.iter().cloned().fold(f64::MAX, f64::min))
        / mean.abs();
    checks.push(IdentityCheck {
        name: "equal_moduli_c0",
        residual: spread,
        tolerance: 1e-12,
        passed: spread <= 1e-12,
        detail: format!("relative spread of C0 over {} designs", solid.len()),
    });
    let work: Vec<f64> = c0s
        .iter()
        .zip(&c1s)
        .take(5)
        .map(|(a, b)| ObjectiveKind::ActuationWork.minimized(*a, *b))
        .collect();
    let block: Vec<f64> = c0s
        .iter()
        .zip(&c1s)
        .take(5)
        .map(|(a, b)| ObjectiveKind::BlockingLoad.minimized(*a, *b))
        .collect();
    let same = argmin(&work) == argmin(&block);
    checks.push(IdentityCheck {
        name: "equal_moduli_argmin",
        residual: if same { 0.0 } else { 1.0 },
        tolerance: 0.0,
        passed: same,
        detail: format!(
            "argmin work {} vs blocking load {}",
            argmin(&work),
            argmin(&block)
        ),
    });

    // Superposition: u(S2) - u(S1) = K⁻¹(g(S2) - g(S1)).
    let mut sup = 0.0_f64;
    for d in designs.iter().take(3) {
        let sys = problem.system(d)?;
        let u1 = sys.solve_equilibrium(problem.mats.s1)?.u;
        let u2 = sys.solve_equilibrium(problem.mats.s2)?.u;
        let (_, v) = problem.superposition_fields(&sys, &profile)?;
        let norm = u2.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
        let diff = u2
            .iter()
            .zip(&u1)
            .zip(&v)
            .map(|((a, b), c)| (a - b - c).abs())
            .fold(0.0, f64::max);
        sup = sup.max(diff / norm);
    }
    checks.push(IdentityCheck {
        name: "superposition",
        residual: sup,
        tolerance: 1e-10,
        passed: sup <= 1e-10,
        detail: "max |u(S2) - u(S1) - v| / |u(S2)|".into(),
    });

    // κ sweep: small κ ranks like the difference C1 - C0, large κ like C1/C0.
    let mut cc = Vec::new();
    for d in designs.iter().take(3) {
        let r = problem.evaluate(ObjectiveKind::BlockingLoad, d)?;
        cc.push((r.c0, r.c1));
    }
    let diff_rank = ranking(&cc.iter().map(|(a, b)| b - a).collect::<Vec<_>>());
    let ratio_rank = ranking(&cc.iter().map(|(a, b)| b / a).collect::<Vec<_>>());
    let ranks: Vec<Vec<usize>> = KAPPA_SWEEP
        .iter()
        .map(|&kappa| {
            ranking(
                &cc.iter()
                    .map(|&(a, b)| ObjectiveKind::Workpiece { kappa }.value(a, b))
                    .collect::<Vec<_>>(),
            )
        })
        .collect();
    let ok = ranks[0] == diff_rank && ranks[2] == ratio_rank;
    checks.push(IdentityCheck {
        name: "kappa_sweep",
        residual: if ok { 0.0 } else { 1.0 },
        tolerance: 0.0,
        passed: ok,
        detail: format!(
            "rankings k=1e-6 {:?} (difference {:?}), k=1 {:?}, k=1e6 {:?} (ratio {:?})",
            ranks[0], diff_rank, ranks[1], ranks[2], ratio_rank
        ),
    });

    Ok(IdentityReport { checks })
}

/// Maps a run failure or config problem to a process exit code.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Config { .. }
        | Error::ConfigParse(_)
        | Error::InvalidArgument(_)
        | Error::UnsupportedObjective(_) => 2,
        Error::Io(_) => 74,
        _ => 1,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(extra: &str) -> RunConfig {
        RunConfig::from_json_str(&format!(
            r#"{{
            "geometry": {{ "length": 2.0, "height": 1.0, "nx": 8, "ny": 4 }},
            "materials": {{ "e_s": 1.0, "nu_s": 0.3, "e_r": 0.5, "nu_r": 0.3,
                           "eps_star": [[-0.1, 0.0], [0.0, 0.1]] }}{extra}
        }}"#
        ))
        .unwrap()
    }

    #[test]
    fn identities_pass_on_small_cantilever() {
        let rep = cmd_identities(&cfg("")).unwrap();
        for c in &rep.checks {
            assert!(c.passed, "{c:?}");
        }
        assert_eq!(rep.checks.len(), 8);
    }

    #[test]
    fn gradcheck_passes() {
        let rep = cmd_gradcheck(&cfg(""), 10, 3).unwrap();
        assert!(rep.passed(), "{rep:?}");
        assert_eq!(rep.entries.len(), 3);
        let voids = cfg(
            r#", "simp": { "voids": true }, "objective": { "kind": "blocking_load" }, "budget": { "vr_frac": 0.25, "v0_frac": 0.5 }"#,
        );
        let rep = cmd_gradcheck(&voids, 10, 3).unwrap();
        assert!(rep.passed(), "{rep:?}");
        assert_eq!(rep.entries.len(), 6);
    }

    #[test]
    fn run_writes_artifacts() {
        let dir = tempfile::tempdir().unwrap();
        let c = cfg(r#", "optimizer": { "max_iter": 3 }"#);
        let art = cmd_run(&c, dir.path(), &mut |_| {}).unwrap();
        for name in [
            RESOLVED_CONFIG,
            DENSITY_CSV,
            DENSITY_VTK,
            DENSITY_PGM,
            CONVERGENCE_LOG,
            SUMMARY_JSON,
        ] {
            assert!(dir.path().join(name).is_file(), "{name}");
        }
        assert_eq!(art.summary.iterations, art.outcome.history.len());
        let again = RunConfig::from_path(&dir.path().join(RESOLVED_CONFIG)).unwrap();
        assert_eq!(again.geometry, c.geometry);
    }
}
