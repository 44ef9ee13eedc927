//! VTK, CSV and JSON output.

use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;

use platebend::dgspace::VectorField;
use platebend::flow::{DefectKind, FlowProblem, FlowReport, Objective};
use platebend::Discretization;

use crate::driver::StageReport;
use crate::AppError;

/// Reference points sampled per cell, row by row.
const SAMPLES: [f64; 3] = [0.0, 0.5, 1.0];
const VTK_QUAD: u32 = 9;

/// Deformed positions of the 3x3 sample points of every cell.
pub fn sample_points(disc: &Discretization, y: &VectorField) -> Vec<[f64; 3]> {
    let space = &disc.space;
    let mut out = Vec::with_capacity(space.n_cells * 9);
    for c in 0..space.n_cells {
        for &t in &SAMPLES {
            for &s in &SAMPLES {
                let val = space.eval_cell(c, [s, t]).val;
                let mut p = [0.0; 3];
                for (m, pm) in p.iter_mut().enumerate() {
                    *pm = val.iter().zip(space.local(y.component(m), c)).map(|(a, b)| a * b).sum();
                }
                out.push(p);
            }
        }
    }
    out
}

/// Per-cell metric defect and energy density of the flow objective.
pub fn cell_fields(problem: &FlowProblem, y: &VectorField) -> (Vec<f64>, Vec<f64>) {
    let e = &problem.energy;
    let defect = match problem.defect_kind {
        DefectKind::Aver => e.defect_aver_cells(y),
        DefectKind::Bary => e.defect_bary_cells(y),
    };
    let bending = e.bending_energy_cells(y);
    let energy: Vec<f64> = match problem.objective {
        Objective::Preasymptotic { s2 } => e.stretching_energy_cells(y).iter().zip(&bending).map(|(a, b)| a + s2 * b).collect(),
        Objective::SimplifiedStretching => e.stretching_energy_cells(y),
        _ => bending,
    };
    let mesh = problem.disc().mesh();
    let density = energy.iter().enumerate().map(|(c, v)| v / mesh.cell_area(c)).collect();
    (defect, density)
}

/// Legacy ASCII unstructured grid: every cell becomes four linear quads over
/// its own nine sample points.
pub fn format_vtk(disc: &Discretization, y: &VectorField, cell_data: &[(&str, &[f64])]) -> String {
    let pts = sample_points(disc, y);
    let n_cells = disc.space.n_cells;
    let mut s = String::new();
    writeln!(s, "# vtk DataFile Version 3.0\nplatebend deformation\nASCII\nDATASET UNSTRUCTURED_GRID").unwrap();
    writeln!(s, "POINTS {} double", pts.len()).unwrap();
    for p in &pts {
        writeln!(s, "{} {} {}", p[0], p[1], p[2]).unwrap();
    }
    writeln!(s, "CELLS {} {}", 4 * n_cells, 20 * n_cells).unwrap();
    for c in 0..n_cells {
        let o = 9 * c;
        for (i, j) in [(0, 0), (1, 0), (0, 1), (1, 1)] {
            let a = o + 3 * j + i;
            writeln!(s, "4 {} {} {} {}", a, a + 1, a + 4, a + 3).unwrap();
        }
    }
    writeln!(s, "CELL_TYPES {}", 4 * n_cells).unwrap();
    for _ in 0..4 * n_cells {
        writeln!(s, "{VTK_QUAD}").unwrap();
    }
    if !cell_data.is_empty() {
        writeln!(s, "CELL_DATA {}", 4 * n_cells).unwrap();
        for (name, values) in cell_data {
            writeln!(s, "SCALARS {name} double 1\nLOOKUP_TABLE default").unwrap();
            for v in values.iter() {
                for _ in 0..4 {
                    writeln!(s, "{v}").unwrap();
                }
            }
        }
    }
    s
}

pub fn write_state(path: &Path, problem: &FlowProblem, y: &VectorField) -> Result<(), AppError> {
    let (defect, density) = cell_fields(problem, y);
    if defect.iter().chain(&density).chain(&y.data).any(|v| !v.is_finite()) {
        return Err(AppError::Solver(format!("refusing to export non-finite values to {}", path.display())));
    }
    let text = format_vtk(problem.disc(), y, &[("defect", &defect), ("energy_density", &density)]);
    std::fs::write(path, text).map_err(|e| AppError::io(path, e))
}

/// Points and quad connectivity of a file written by [`format_vtk`].
pub fn read_vtk(text: &str) -> Result<(Vec<[f64; 3]>, Vec<[usize; 4]>), AppError> {
    let bad = |m: &str| AppError::Config(format!("vtk: {m}"));
    let mut lines = text.lines();
    let mut points = Vec::new();
    let mut cells = Vec::new();
    while let Some(line) = lines.next() {
        let words: Vec<&str> = line.split_whitespace().collect();
        match words.first() {
            Some(&"POINTS") => {
                let n: usize = words.get(1).and_then(|w| w.parse().ok()).ok_or_else(|| bad("bad POINTS header"))?;
                for _ in 0..n {
                    let l = lines.next().ok_or_else(|| bad("truncated POINTS"))?;
                    let v: Vec<f64> =
                        l.split_whitespace().map(str::parse).collect::<Result<_, _>>().map_err(|_| bad("bad point"))?;
                    points.push(v.try_into().map_err(|_| bad("point needs three coordinates"))?);
                }
            }
            Some(&"CELLS") => {
                let n: usize = words.get(1).and_then(|w| w.parse().ok()).ok_or_else(|| bad("bad CELLS header"))?;
                for _ in 0..n {
                    let l = lines.next().ok_or_else(|| bad("truncated CELLS"))?;
                    let v: Vec<usize> =
                        l.split_whitespace().map(str::parse).collect::<Result<_, _>>().map_err(|_| bad("bad cell"))?;
                    if v.first() != Some(&4) || v.len() != 5 {
                        return Err(bad("expected quads"));
                    }
                    cells.push([v[1], v[2], v[3], v[4]]);
                }
            }
            _ => {}
        }
    }
    Ok((points, cells))
}

pub fn write_log(path: &Path, report: &FlowReport) -> Result<(), AppError> {
    let file = std::fs::File::create(path).map_err(|e| AppError::io(path, e))?;
    report.log.write_csv(std::io::BufWriter::new(file)).map_err(|e| AppError::io(path, e))
}

#[derive(Serialize)]
pub struct Summary {
    pub final_energy: f64,
    pub defect: f64,
    pub iterations: usize,
    pub stopped_by: &'static str,
}

impl Summary {
    pub fn of(report: &FlowReport) -> Summary {
        Summary {
            final_energy: report.last.total,
            defect: report.last.defect,
            iterations: report.iterations,
            stopped_by: report.stopped_by.name(),
        }
    }
}

pub fn write_json(path: &Path, value: &impl Serialize) -> Result<(), AppError> {
    let text = serde_json::to_string_pretty(value).map_err(|e| AppError::Solver(e.to_string()))?;
    std::fs::write(path, text + "\n").map_err(|e| AppError::io(path, e))
}

/// One CSV row per stage: `step,t,stage,iterations,stopped_by,energy,defect`.
pub fn format_stages(rows: &[(usize, f64, &StageReport)]) -> String {
    let mut s = String::from("step,t,stage,iterations,stopped_by,energy,defect\n");
    for (step, t, r) in rows {
        let stop = r.stopped_by.map(|s| s.name()).unwrap_or("");
        writeln!(s, "{step},{t},{},{},{stop},{:e},{:e}", r.name, r.iterations, r.energy, r.defect).unwrap();
    }
    s
}
