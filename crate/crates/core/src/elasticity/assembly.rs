use serde::{Deserialize, Serialize};

use super::element::{dot8, element_eigenload, element_stiffness, mat_vec, ElemMatrix, ElemVector};
use super::material::MaterialPair;
use super::solver::{norm, pcg, BandCholesky, BandMatrix};
use crate::error::{invalid, Error, Result};
use crate::grid::Grid;
use crate::par;

/// Per-element design fields: responsive fraction `phi` and solid fraction `rho`.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityDesign {
    pub phi: Vec<f64>,
    pub rho: Vec<f64>,
    pub rho_min: f64,
    pub voids_enabled: bool,
}

/// Filtered values may leave their box by a few ulps after averaging.
const FIELD_SLACK: f64 = 1e-12;

impl DensityDesign {
    /// Fully solid design (`rho ≡ 1`) with uniform responsive fraction.
    pub fn uniform(num_elems: usize, phi: f64) -> Self {
        Self {
            phi: vec![phi; num_elems],
            rho: vec![1.0; num_elems],
            rho_min: super::DEFAULT_RHO_MIN,
            voids_enabled: false,
        }
    }

    pub fn with_voids(phi: Vec<f64>, rho: Vec<f64>, rho_min: f64) -> Self {
        Self {
            phi,
            rho,
            rho_min,
            voids_enabled: true,
        }
    }

    pub fn len(&self) -> usize {
        self.phi.len()
    }

    pub fn is_empty(&self) -> bool {
        self.phi.is_empty()
    }

    pub fn validate(&self, num_elems: usize) -> Result<()> {
        if self.phi.len() != num_elems || self.rho.len() != num_elems {
            return Err(invalid(format!(
                "design has {} phi / {} rho values for {num_elems} elements",
                self.phi.len(),
                self.rho.len()
            )));
        }
        if !(self.rho_min > 0.0 && self.rho_min < 1.0) {
            return Err(invalid(format!(
                "rho_min must lie in (0, 1), got {}",
                self.rho_min
            )));
        }
        if let Some((e, v)) = self
            .phi
            .iter()
            .enumerate()
            .find(|(_, v)| !(0.0..=1.0).contains(*v))
        {
            return Err(Error::Contract(format!("phi[{e}] = {v} outside [0, 1]")));
        }
        if self.voids_enabled {
            if let Some((e, v)) = self
                .rho
                .iter()
                .enumerate()
                .find(|(_, v)| !(self.rho_min..=1.0).contains(*v))
            {
                return Err(Error::Contract(format!(
                    "rho[{e}] = {v} outside [{}, 1]",
                    self.rho_min
                )));
            }
        } else if let Some(e) = self.rho.iter().position(|&v| v != 1.0) {
            return Err(Error::Contract(format!(
                "rho[{e}] = {} but voids are disabled (rho must be 1)",
                self.rho[e]
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverKind {
    /// Banded Cholesky unless the band storage would exceed `AUTO_CG_ENTRIES`.
    #[default]
    Auto,
    Cholesky,
    Cg,
}

const AUTO_CG_ENTRIES: usize = 40_000_000;
pub const CG_TOLERANCE: f64 = 1e-10;

/// Numbering of the unconstrained dofs.
///
/// Nodes are visited along the longer axis of the grid, with the shorter axis
/// varying fastest, which keeps the bandwidth near `2 * (min(nx, ny) + 2)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DofMap {
    reduced: Vec<Option<usize>>,
    free: Vec<usize>,
    bandwidth: usize,
}

impl DofMap {
    pub fn new(grid: &Grid) -> Self {
        let mut reduced = vec![None; grid.num_dofs()];
        let mut free = Vec::with_capacity(grid.num_dofs() - grid.dirichlet.len());
        let mut visit = |n: usize| {
            for d in [2 * n, 2 * n + 1] {
                if !grid.dirichlet.contains_key(&d) {
                    reduced[d] = Some(free.len());
                    free.push(d);
                }
            }
        };
        if grid.nx >= grid.ny {
            for i in 0..=grid.nx {
                for j in 0..=grid.ny {
                    visit(grid.node_index(i, j));
                }
            }
        } else {
            for j in 0..=grid.ny {
                for i in 0..=grid.nx {
                    visit(grid.node_index(i, j));
                }
            }
        }
        let bandwidth = (0..grid.num_elems())
            .map(|e| {
                let r = grid.elem_dofs(e).map(|d| reduced[d]);
                let lo = r.iter().flatten().min();
                let hi = r.iter().flatten().max();
                match (lo, hi) {
                    (Some(lo), Some(hi)) => hi - lo,
                    _ => 0,
                }
            })
            .max()
            .unwrap_or(0);
        Self {
            reduced,
            free,
            bandwidth,
        }
    }

    pub fn num_free(&self) -> usize {
        self.free.len()
    }

    pub fn bandwidth(&self) -> usize {
        self.bandwidth
    }

    pub fn reduced_index(&self, dof: usize) -> Option<usize> {
        self.reduced[dof]
    }

    fn restrict(&self, full: &[f64]) -> Vec<f64> {
        self.free.iter().map(|&d| full[d]).collect()
    }
}

#[derive(Debug, Clone)]
enum Factor {
    Cholesky(BandCholesky),
    Cg,
}

/// Assembled stiffness (Dirichlet dofs eliminated) together with the
/// element data needed for eigenloads and sensitivities.
#[derive(Debug, Clone)]
pub struct StiffnessSystem {
    dofs: DofMap,
    k: BandMatrix,
    factor: Option<Factor>,
    solver: SolverKind,
    elem_dofs: Vec<[usize; 8]>,
    ke_structural: ElemMatrix,
    /// `K_r - K_s` for the reference element.
    ke_diff: ElemMatrix,
    /// Eigenload of a fully responsive element at `S = 1`.
    g_unit: ElemVector,
    penalty: f64,
    filtered_phi: Vec<f64>,
    filtered_rho: Vec<f64>,
    /// `(Wρ)_e^p`.
    solid_scale: Vec<f64>,
    /// `(Wφ)_e^p`.
    mix: Vec<f64>,
    load: Vec<f64>,
    prescribed: Vec<f64>,
    homogeneous: bool,
    /// `(K u_d)` restricted to free dofs.
    lift: Vec<f64>,
}

/// Displacement and loads for one stimulus.
#[derive(Debug, Clone, PartialEq)]
pub struct EquilibriumState {
    pub stimulus: f64,
    pub u: Vec<f64>,
    /// Eigenstrain load `g(S)`.
    pub g: Vec<f64>,
    /// Traction load.
    pub f: Vec<f64>,
    /// `fᵀu`.
    pub compliance: f64,
}

impl EquilibriumState {
    pub fn compliance(&self) -> f64 {
        self.compliance
    }
}

/// Builds the SIMP-interpolated stiffness for the given filtered fields.
///
/// `filtered_phi` must lie in `[0, 1]` and `filtered_rho` in `[rho_min, 1]`
/// (or be identically one when voids are disabled).
pub fn assemble(
    grid: &Grid,
    design: &DensityDesign,
    filtered_phi: &[f64],
    filtered_rho: &[f64],
    mats: &MaterialPair,
    penalty: f64,
    solver: SolverKind,
) -> Result<StiffnessSystem> {
    let ne = grid.num_elems();
    design.validate(ne)?;
    if !(penalty > 1.0 && penalty.is_finite()) {
        return Err(invalid(format!(
            "SIMP penalty must exceed 1, got {penalty}"
        )));
    }
    grid.validate_bcs()?;
    let filtered_phi = clamp_field(filtered_phi, 0.0, 1.0, "filtered phi", ne)?;
    let rho_lo = if design.voids_enabled {
        design.rho_min
    } else {
        1.0
    };
    let filtered_rho = clamp_field(filtered_rho, rho_lo, 1.0, "filtered rho", ne)?;

    let (ex, ey) = grid.elem_size();
    let ke_structural = element_stiffness(&mats.structural, ex, ey);
    let ke_responsive = element_stiffness(mats.responsive_at(mats.s2), ex, ey);
    let mut ke_diff = [[0.0; 8]; 8];
    for i in 0..8 {
        for j in 0..8 {
            ke_diff[i][j] = ke_responsive[i][j] - ke_structural[i][j];
        }
    }
    let g_unit = element_eigenload(mats.responsive_at(mats.s2), mats.eps_star, 1.0, ex, ey);

    let solid_scale = par::map_indexed(ne, |e| filtered_rho[e].powf(penalty));
    let mix = par::map_indexed(ne, |e| filtered_phi[e].powf(penalty));
    let elem_dofs: Vec<[usize; 8]> = (0..ne).map(|e| grid.elem_dofs(e)).collect();

    let dofs = DofMap::new(grid);
    let mut k = BandMatrix::zeros(dofs.num_free(), dofs.bandwidth());
    for e in 0..ne {
        let ke = scaled_elem(&ke_structural, &ke_diff, solid_scale[e], mix[e]);
        let r = elem_dofs[e].map(|d| dofs.reduced[d]);
        for a in 0..8 {
            let Some(ra) = r[a] else { continue };
            for b in 0..8 {
                let Some(rb) = r[b] else { continue };
                if rb <= ra {
                    k.add_lower(ra, rb, ke[a][b]);
                }
            }
        }
    }

    let mut prescribed = vec![0.0; grid.num_dofs()];
    for (&d, &v) in &grid.dirichlet {
        prescribed[d] = v;
    }
    let homogeneous = grid.has_homogeneous_dirichlet();
    let mut system = StiffnessSystem {
        dofs,
        k,
        factor: None,
        solver,
        elem_dofs,
        ke_structural,
        ke_diff,
        g_unit,
        penalty,
        filtered_phi,
        filtered_rho,
        solid_scale,
        mix,
        load: grid.load_vector(),
        prescribed,
        homogeneous,
        lift: Vec::new(),
    };
    system.lift = if homogeneous {
        vec![0.0; system.dofs.num_free()]
    } else {
        system.dofs.restrict(&system.apply_full(&system.prescribed))
    };
    Ok(system)
}

fn clamp_field(v: &[f64], lo: f64, hi: f64, name: &str, n: usize) -> Result<Vec<f64>> {
    if v.len() != n {
        return Err(invalid(format!(
            "{name} has {} values for {n} elements",
            v.len()
        )));
    }
    v.iter()
        .enumerate()
        .map(|(e, &x)| {
            if x >= lo - FIELD_SLACK && x <= hi + FIELD_SLACK {
                Ok(x.clamp(lo, hi))
            } else {
                Err(Error::Contract(format!(
                    "{name}[{e}] = {x} outside [{lo}, {hi}]"
                )))
            }
        })
        .collect()
}

fn scaled_elem(ks: &ElemMatrix, kd: &ElemMatrix, solid: f64, mix: f64) -> ElemMatrix {
    let mut out = [[0.0; 8]; 8];
    for i in 0..8 {
        for j in 0..8 {
            out[i][j] = solid * (ks[i][j] + mix * kd[i][j]);
        }
    }
    out
}

impl StiffnessSystem {
    pub fn dof_map(&self) -> &DofMap {
        &self.dofs
    }

    /// Reduced stiffness (free dofs only) in banded storage.
    pub fn matrix(&self) -> &BandMatrix {
        &self.k
    }

    pub fn penalty(&self) -> f64 {
        self.penalty
    }

    pub fn num_elems(&self) -> usize {
        self.elem_dofs.len()
    }

    pub fn load(&self) -> &[f64] {
        &self.load
    }

    pub fn has_homogeneous_dirichlet(&self) -> bool {
        self.homogeneous
    }

    pub fn is_factorized(&self) -> bool {
        self.factor.is_some()
    }

    /// Factorizes once; every later solve (both stimuli, adjoints) reuses it.
    pub fn factorize(&mut self) -> Result<()> {
        if self.factor.is_some() {
            return Ok(());
        }
        let use_cg = match self.solver {
            SolverKind::Cholesky => false,
            SolverKind::Cg => true,
            SolverKind::Auto => self.k.dim() * (self.k.bandwidth() + 1) > AUTO_CG_ENTRIES,
        };
        self.factor = Some(if use_cg {
            Factor::Cg
        } else {
            Factor::Cholesky(BandCholesky::factor(&self.k)?)
        });
        Ok(())
    }

    fn solve_reduced(&self, rhs: &mut Vec<f64>) -> Result<()> {
        match &self.factor {
            None => Err(Error::Contract(
                "stiffness system solved before factorize()".into(),
            )),
            Some(Factor::Cholesky(c)) => {
                c.solve_in_place(rhs);
                Ok(())
            }
            Some(Factor::Cg) => {
                let max_iter = 20 * rhs.len().max(10);
                let (x, _) = pcg(&self.k, rhs, CG_TOLERANCE, max_iter)?;
                *rhs = x;
                Ok(())
            }
        }
    }

    /// Solves `K u = rhs` with `u = 0` on every Dirichlet dof.
    pub fn solve_homogeneous(&self, rhs_full: &[f64]) -> Result<Vec<f64>> {
        let mut r = self.dofs.restrict(rhs_full);
        self.solve_reduced(&mut r)?;
        let mut u = vec![0.0; self.prescribed.len()];
        for (&d, v) in self.dofs.free.iter().zip(r) {
            u[d] = v;
        }
        Ok(u)
    }

    /// Solves `K u = rhs` with the grid's prescribed Dirichlet values.
    pub fn solve_with_dirichlet(&self, rhs_full: &[f64]) -> Result<Vec<f64>> {
        let mut r = self.dofs.restrict(rhs_full);
        for (ri, li) in r.iter_mut().zip(&self.lift) {
            *ri -= li;
        }
        self.solve_reduced(&mut r)?;
        let mut u = self.prescribed.clone();
        for (&d, v) in self.dofs.free.iter().zip(r) {
            u[d] = v;
        }
        Ok(u)
    }

    /// Global eigenstrain load `g(S)`.
    pub fn eigenload(&self, stimulus: f64) -> Vec<f64> {
        let mut g = vec![0.0; self.prescribed.len()];
        if stimulus == 0.0 {
            return g;
        }
        for (e, dofs) in self.elem_dofs.iter().enumerate() {
            let c = stimulus * self.solid_scale[e] * self.mix[e];
            if c == 0.0 {
                continue;
            }
            for (a, &d) in dofs.iter().enumerate() {
                g[d] += c * self.g_unit[a];
            }
        }
        g
    }

    /// Solves equilibrium `K u = f + g(S)` and records `fᵀu`.
    pub fn solve_equilibrium(&self, stimulus: f64) -> Result<EquilibriumState> {
        let g = self.eigenload(stimulus);
        let rhs: Vec<f64> = self.load.iter().zip(&g).map(|(f, g)| f + g).collect();
        let u = self.solve_with_dirichlet(&rhs)?;
        let compliance = self.load.iter().zip(&u).map(|(f, u)| f * u).sum();
        Ok(EquilibriumState {
            stimulus,
            u,
            g,
            f: self.load.clone(),
            compliance,
        })
    }

    /// Unconstrained global product `K u` (Dirichlet dofs included).
    pub fn apply_full(&self, u: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; u.len()];
        for (e, dofs) in self.elem_dofs.iter().enumerate() {
            let ke = scaled_elem(
                &self.ke_structural,
                &self.ke_diff,
                self.solid_scale[e],
                self.mix[e],
            );
            let ue = dofs.map(|d| u[d]);
            let fe = mat_vec(&ke, &ue);
            for (a, &d) in dofs.iter().enumerate() {
                out[d] += fe[a];
            }
        }
        out
    }

    /// `‖K u - rhs‖ / ‖rhs‖` over the free dofs.
    pub fn relative_residual(&self, u: &[f64], rhs_full: &[f64]) -> f64 {
        let ku = self.apply_full(u);
        let r: Vec<f64> = self
            .dofs
            .free
            .iter()
            .map(|&d| ku[d] - rhs_full[d])
            .collect();
        let b: Vec<f64> = self.dofs.free.iter().map(|&d| rhs_full[d]).collect();
        let bn = norm(&b);
        if bn == 0.0 {
            norm(&r)
        } else {
            norm(&r) / bn
        }
    }

    /// Element partials of `λᵀ (g(S) - K u)` with respect to the filtered
    /// fields `(Wφ)_e` and `(Wρ)_e`.
    pub fn element_partials(
        &self,
        e: usize,
        lambda: &[f64],
        u: &[f64],
        stimulus: f64,
    ) -> (f64, f64) {
        let dofs = &self.elem_dofs[e];
        let le = dofs.map(|d| lambda[d]);
        let ue = dofs.map(|d| u[d]);
        let p = self.penalty;
        let fphi = self.filtered_phi[e];
        let frho = self.filtered_rho[e];
        let solid = self.solid_scale[e];
        let mix = self.mix[e];
        let dmix = p * fphi.powf(p - 1.0);
        let dsolid = p * frho.powf(p - 1.0);

        let l_ks_u = dot8(&le, &mat_vec(&self.ke_structural, &ue));
        let l_kd_u = dot8(&le, &mat_vec(&self.ke_diff, &ue));
        let l_g = stimulus * dot8(&le, &self.g_unit);

        let d_phi = solid * dmix * (l_g - l_kd_u);
        let d_rho = dsolid * (mix * l_g - (l_ks_u + mix * l_kd_u));
        (d_phi, d_rho)
    }

    pub(crate) fn element_partials_all(
        &self,
        lambda: &[f64],
        u: &[f64],
        stimulus: f64,
    ) -> (Vec<f64>, Vec<f64>) {
        let pairs = par::map_indexed(self.num_elems(), |e| {
            self.element_partials(e, lambda, u, stimulus)
        });
        pairs.into_iter().unzip()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::elasticity::{IsotropicHooke, SymStrain};
    use approx::assert_relative_eq;

    fn mats(er: f64) -> MaterialPair {
        MaterialPair::new(
            IsotropicHooke::plane_strain(1.0, 0.3).unwrap(),
            IsotropicHooke::plane_strain(er, 0.3).unwrap(),
            SymStrain::new(-0.1, 0.1, 0.0),
        )
    }

    fn system(grid: &Grid, phi: &[f64], m: &MaterialPair) -> StiffnessSystem {
        let d = DensityDesign {
            phi: phi.to_vec(),
            ..DensityDesign::uniform(grid.num_elems(), 0.0)
        };
        let ones = vec![1.0; grid.num_elems()];
        assemble(grid, &d, phi, &ones, m, 3.0, SolverKind::Cholesky).unwrap()
    }

    #[test]
    fn pure_phases() {
        let g = Grid::new(3, 2, 1.5, 1.0).unwrap().with_cantilever_bcs(1.0);
        let m = mats(10.0);
        let s0 = system(&g, &[0.0; 6], &m);
        assert!(s0.eigenload(1.0).iter().all(|&v| v == 0.0));
        let pure_s = MaterialPair::new(m.structural, m.structural, m.eps_star);
        assert_eq!(s0.matrix(), system(&g, &[0.3; 6], &pure_s).matrix());
        let s1 = system(&g, &[1.0; 6], &m);
        let pure_r = MaterialPair::new(m.responsive, m.responsive, m.eps_star);
        let sr = system(&g, &[0.0; 6], &pure_r);
        let (a, b) = (s1.matrix(), sr.matrix());
        for i in 0..a.dim() {
            for j in 0..=i {
                assert_relative_eq!(
                    a.get(i, j),
                    b.get(i, j),
                    max_relative = 1e-14,
                    epsilon = 1e-14
                );
            }
        }
    }

    #[test]
    fn equal_moduli_independent_of_phi() {
        let g = Grid::new(4, 3, 1.0, 1.0).unwrap().with_cantilever_bcs(1.0);
        let m = mats(1.0);
        let a = system(
            &g,
            &(0..12).map(|i| (i as f64 * 0.37) % 1.0).collect::<Vec<_>>(),
            &m,
        );
        let b = system(
            &g,
            &(0..12).map(|i| (i as f64 * 0.71) % 1.0).collect::<Vec<_>>(),
            &m,
        );
        assert_eq!(a.matrix(), b.matrix());
    }

    #[test]
    fn out_of_bounds_filtered_field() {
        let g = Grid::new(2, 2, 1.0, 1.0).unwrap().with_cantilever_bcs(1.0);
        let d = DensityDesign::uniform(4, 0.5);
        let bad = vec![0.5, 1.2, 0.5, 0.5];
        let r = assemble(&g, &d, &bad, &[1.0; 4], &mats(1.0), 3.0, SolverKind::Auto);
        assert!(matches!(r, Err(Error::Contract(_))));
    }

    #[test]
    fn missing_constraints_rejected() {
        let g = Grid::new(2, 2, 1.0, 1.0).unwrap();
        let d = DensityDesign::uniform(4, 0.5);
        let r = assemble(
            &g,
            &d,
            &[0.5; 4],
            &[1.0; 4],
            &mats(1.0),
            3.0,
            SolverKind::Auto,
        );
        assert!(r.is_err());
    }

    #[test]
    fn insufficient_constraints_fail_in_factorization() {
        // Pinning a single dof leaves rigid-body modes: the factorization must fail.
        let mut g = Grid::new(2, 2, 1.0, 1.0).unwrap();
        g.fix_dof(0, 0.0).unwrap();
        let d = DensityDesign::uniform(4, 0.5);
        let mut s = assemble(
            &g,
            &d,
            &[0.5; 4],
            &[1.0; 4],
            &mats(1.0),
            3.0,
            SolverKind::Cholesky,
        )
        .unwrap();
        assert!(matches!(s.factorize(), Err(Error::SolverFailure(_))));
    }

    #[test]
    fn solve_before_factorize_is_contract_violation() {
        let g = Grid::new(2, 2, 1.0, 1.0).unwrap().with_cantilever_bcs(1.0);
        let s = system(&g, &[0.5; 4], &mats(1.0));
        assert!(matches!(s.solve_equilibrium(0.0), Err(Error::Contract(_))));
    }

    #[test]
    fn zero_load_zero_displacement() {
        let g = Grid::new(3, 3, 1.0, 1.0).unwrap().with_cantilever_bcs(0.0);
        let mut s = system(&g, &[0.5; 9], &mats(2.0));
        s.factorize().unwrap();
        let st = s.solve_equilibrium(0.0).unwrap();
        assert!(st.u.iter().all(|&v| v == 0.0));
        assert_eq!(st.compliance(), 0.0);
    }

    #[test]
    fn bandwidth_follows_short_axis() {
        let g = Grid::new(30, 4, 3.0, 1.0).unwrap().with_cantilever_bcs(1.0);
        assert!(DofMap::new(&g).bandwidth() <= 2 * (4 + 2) + 1);
        let g = Grid::new(4, 30, 1.0, 3.0).unwrap().with_cantilever_bcs(1.0);
        assert!(DofMap::new(&g).bandwidth() <= 2 * (4 + 2) + 1);
    }

    #[test]
    fn validate_design() {
        let mut d = DensityDesign::uniform(4, 0.5);
        d.validate(4).unwrap();
        assert!(d.validate(5).is_err());
        d.rho[1] = 0.5;
        assert!(d.validate(4).is_err());
        let d = DensityDesign::with_voids(vec![0.5; 4], vec![1e-4; 4], 1e-3);
        assert!(d.validate(4).is_err());
    }
}
