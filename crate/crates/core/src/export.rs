//! Result files: density CSV, VTK, PGM thumbnail, convergence log and JSON
//! summary. Every file is written to a temporary sibling and renamed into
//! place.
//!
//! Floating point values are printed with Rust's shortest round-trip
//! formatting, so reading a density CSV back gives the same bits.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::Serialize;

use crate::elasticity::DensityDesign;
use crate::error::{invalid, Result};
use crate::grid::Grid;
use crate::objectives::ObjectiveReport;
use crate::optimizer::RunHistory;

pub const DENSITY_HEADER: &str = "elem_index,cx,cy,phi,rho,filtered_phi,filtered_rho";
pub const LOG_HEADER: &str = "iter,objective,C0,C1,vol_r,vol_0,max_change";

/// PGM gray levels.
pub const GRAY_VOID: u8 = 0;
pub const GRAY_PASSIVE: u8 = 128;
pub const GRAY_RESPONSIVE: u8 = 255;

/// Writes `contents` to `path` through a temporary file in the same directory.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let name = path
        .file_name()
        .ok_or_else(|| invalid(format!("not a file path: {}", path.display())))?;
    let mut tmp_name = std::ffi::OsString::from(".");
    tmp_name.push(name);
    tmp_name.push(".tmp");
    let tmp = path.with_file_name(tmp_name);
    fs::write(&tmp, contents)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

fn check_lengths(grid: &Grid, fields: &[&[f64]]) -> Result<()> {
    let n = grid.num_elems();
    if fields.iter().any(|f| f.len() != n) {
        return Err(invalid(format!("field lengths do not match {n} elements")));
    }
    Ok(())
}

/// One row per element: index, center, raw and filtered fields.
pub fn density_csv(
    grid: &Grid,
    design: &DensityDesign,
    fphi: &[f64],
    frho: &[f64],
) -> Result<String> {
    check_lengths(grid, &[&design.phi, &design.rho, fphi, frho])?;
    let mut s = String::with_capacity(grid.num_elems() * 96);
    s.push_str(DENSITY_HEADER);
    s.push('\n');
    for e in 0..grid.num_elems() {
        let [cx, cy] = grid.elem_centers[e];
        writeln!(
            s,
            "{e},{cx},{cy},{},{},{},{}",
            design.phi[e], design.rho[e], fphi[e], frho[e]
        )
        .unwrap();
    }
    Ok(s)
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct DensityTable {
    pub elem_index: Vec<usize>,
    pub cx: Vec<f64>,
    pub cy: Vec<f64>,
    pub phi: Vec<f64>,
    pub rho: Vec<f64>,
    pub filtered_phi: Vec<f64>,
    pub filtered_rho: Vec<f64>,
}

pub fn read_density_csv(text: &str) -> Result<DensityTable> {
    let mut lines = text.lines();
    if lines.next() != Some(DENSITY_HEADER) {
        return Err(invalid("density CSV: unexpected header"));
    }
    let mut t = DensityTable::default();
    for (k, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != 7 {
            return Err(invalid(format!(
                "density CSV row {}: expected 7 columns",
                k + 1
            )));
        }
        let num = |i: usize| -> Result<f64> {
            cols[i].parse().map_err(|_| {
                invalid(format!(
                    "density CSV row {}: bad number {:?}",
                    k + 1,
                    cols[i]
                ))
            })
        };
        t.elem_index.push(
            cols[0]
                .parse()
                .map_err(|_| invalid(format!("density CSV row {}: bad index", k + 1)))?,
        );
        t.cx.push(num(1)?);
        t.cy.push(num(2)?);
        t.phi.push(num(3)?);
        t.rho.push(num(4)?);
        t.filtered_phi.push(num(5)?);
        t.filtered_rho.push(num(6)?);
    }
    Ok(t)
}

/// Legacy ASCII VTK structured grid with the design fields as cell data.
pub fn vtk(grid: &Grid, design: &DensityDesign, fphi: &[f64], frho: &[f64]) -> Result<String> {
    check_lengths(grid, &[&design.phi, &design.rho, fphi, frho])?;
    let mut s = String::new();
    s.push_str("# vtk DataFile Version 3.0\nrespotopt design\nASCII\nDATASET STRUCTURED_GRID\n");
    writeln!(s, "DIMENSIONS {} {} 1", grid.nx + 1, grid.ny + 1).unwrap();
    writeln!(s, "POINTS {} double", grid.num_nodes()).unwrap();
    for [x, y] in &grid.node_coords {
        writeln!(s, "{x} {y} 0").unwrap();
    }
    writeln!(s, "CELL_DATA {}", grid.num_elems()).unwrap();
    for (name, field) in [
        ("phi", design.phi.as_slice()),
        ("rho", design.rho.as_slice()),
        ("filtered_phi", fphi),
        ("filtered_rho", frho),
    ] {
        writeln!(s, "SCALARS {name} double 1\nLOOKUP_TABLE default").unwrap();
        for v in field {
            writeln!(s, "{v}").unwrap();
        }
    }
    Ok(s)
}

/// Gray level of one element after thresholding the filtered fields at 0.5.
pub fn gray_level(filtered_phi: f64, filtered_rho: f64) -> u8 {
    if filtered_rho < 0.5 {
        GRAY_VOID
    } else if filtered_phi >= 0.5 {
        GRAY_RESPONSIVE
    } else {
        GRAY_PASSIVE
    }
}

/// Plain PGM (P2), `nx` wide and `ny` high, top row of elements first.
pub fn pgm(grid: &Grid, fphi: &[f64], frho: &[f64]) -> Result<String> {
    check_lengths(grid, &[fphi, frho])?;
    let mut s = format!("P2\n{} {}\n255\n", grid.nx, grid.ny);
    for j in (0..grid.ny).rev() {
        let row: Vec<String> = (0..grid.nx)
            .map(|i| {
                let e = grid.elem_index(i, j);
                gray_level(fphi[e], frho[e]).to_string()
            })
            .collect();
        s.push_str(&row.join(" "));
        s.push('\n');
    }
    Ok(s)
}

pub fn convergence_log(history: &RunHistory) -> String {
    let mut s = String::from(LOG_HEADER);
    s.push('\n');
    for r in &history.records {
        writeln!(
            s,
            "{},{},{},{},{},{},{}",
            r.iter, r.objective, r.c0, r.c1, r.vol_r, r.vol_0, r.max_change
        )
        .unwrap();
    }
    s
}

/// Final objective report with the achieved volume fractions.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunSummary {
    pub objective: &'static str,
    pub value: f64,
    pub c0: f64,
    pub c1: f64,
    pub alpha: Option<f64>,
    /// Responsive volume fraction of the raw design.
    pub vol_r: f64,
    /// Material volume fraction of the raw design.
    pub vol_0: f64,
    pub vol_r_filtered: f64,
    pub vol_0_filtered: f64,
    pub iterations: usize,
    pub converged: bool,
    pub infeasible_subproblems: usize,
}

impl RunSummary {
    pub fn new(
        grid: &Grid,
        design: &DensityDesign,
        report: &ObjectiveReport,
        history: &RunHistory,
        converged: bool,
    ) -> Self {
        let areas = grid.elem_areas();
        let total: f64 = areas.iter().sum();
        let frac = |phi: Option<&[f64]>, rho: &[f64]| -> f64 {
            areas
                .iter()
                .enumerate()
                .map(|(e, a)| a * rho[e] * phi.map_or(1.0, |p| p[e]))
                .sum::<f64>()
                / total
        };
        Self {
            objective: report.kind.name(),
            value: report.value,
            c0: report.c0,
            c1: report.c1,
            alpha: report.alpha,
            vol_r: frac(Some(&design.phi), &design.rho),
            vol_0: frac(None, &design.rho),
            vol_r_filtered: frac(Some(&report.filtered_phi), &report.filtered_rho),
            vol_0_filtered: frac(None, &report.filtered_rho),
            iterations: history.len(),
            converged,
            infeasible_subproblems: history
                .records
                .iter()
                .filter(|r| r.infeasible_subproblem)
                .count(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("summary serializes") + "\n"
    }
}
