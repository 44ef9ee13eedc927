//! Convergence table of the discrete Hessian for `sin(pi x1) sin(pi x2)` on the unit square.

use std::f64::consts::PI;

use nalgebra::Matrix2;

use platebend::mesh::{rectangle_mesh, MeshData, Vec2};
use platebend::Discretization;

use crate::AppError;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StudyRow {
    pub n: usize,
    pub h: f64,
    pub error: f64,
    /// Observed order against the previous row.
    pub rate: Option<f64>,
}

fn exact(p: Vec2) -> Matrix2<f64> {
    let (s, c) = ((PI * p.x).sin(), (PI * p.x).cos());
    let (t, d) = ((PI * p.y).sin(), (PI * p.y).cos());
    Matrix2::new(-s * t, c * d, c * d, -s * t) * (PI * PI)
}

/// `L^2` errors of `H_h(I_h v) - D^2 v` on `levels` uniform grids starting at 2x2.
pub fn hessian_study(levels: usize, degree: usize) -> Result<Vec<StudyRow>, AppError> {
    let mut rows: Vec<StudyRow> = Vec::new();
    for l in 0..levels {
        let n = 2usize << l;
        let disc = Discretization::new(MeshData::free(rectangle_mesh([0.0, 1.0], [0.0, 1.0], n, n)?), degree)?;
        let v = disc.space.interpolate(|p| (PI * p.x).sin() * (PI * p.y).sin());
        let h = disc.hessian.apply(&v);
        let nq = disc.space.n_quad();
        let mut err = 0.0;
        for (c, cq) in disc.space.cells.iter().enumerate() {
            for q in 0..nq {
                err += cq.w[q] * (h[c * nq + q] - exact(cq.x[q])).norm_squared();
            }
        }
        let error = err.sqrt();
        let rate = rows.last().map(|r| (r.error / error).log2());
        rows.push(StudyRow { n, h: 1.0 / n as f64, error, rate });
    }
    Ok(rows)
}

pub fn format_table(rows: &[StudyRow]) -> String {
    let mut s = format!("{:>6} {:>12} {:>14} {:>8}\n", "n", "h", "L2 error", "rate");
    for r in rows {
        let rate = r.rate.map(|x| format!("{x:.3}")).unwrap_or_else(|| "-".into());
        s.push_str(&format!("{:>6} {:>12.6} {:>14.6e} {:>8}\n", r.n, r.h, r.error, rate));
    }
    s
}

/// `y_m` along the boundary, sampled at three points per boundary edge and
/// ordered by polar angle.
pub fn boundary_trace(disc: &Discretization, y: &platebend::dgspace::VectorField, m: usize) -> Vec<(f64, f64)> {
    let space = &disc.space;
    let mut out = Vec::new();
    for edge in disc.topo.edges.iter().filter(|e| e.is_boundary()) {
        for t in [0.25, 0.5, 0.75] {
            let xi = edge.minus.reference_point(t);
            let (v, _, _) = space.eval_scalar(y.component(m), edge.minus.cell, xi);
            let p = space.map(edge.minus.cell, xi);
            out.push((p.y.atan2(p.x), v));
        }
    }
    out.sort_by(|a, b| a.0.total_cmp(&b.0));
    out
}

/// Sign changes around a closed trace; values with magnitude below `cutoff` count as zero.
pub fn cyclic_sign_changes(trace: &[(f64, f64)], cutoff: f64) -> usize {
    let signs: Vec<bool> = trace.iter().filter(|p| p.1.abs() > cutoff).map(|p| p.1 > 0.0).collect();
    if signs.is_empty() {
        return 0;
    }
    (0..signs.len()).filter(|&i| signs[i] != signs[(i + 1) % signs.len()]).count()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sign_changes_wrap_around() {
        let trace: Vec<(f64, f64)> = (0..120)
            .map(|i| {
                let th = -PI + 2.0 * PI * (i as f64 + 0.5) / 120.0;
                (th, (6.0 * th).sin())
            })
            .collect();
        assert_eq!(cyclic_sign_changes(&trace, 1e-2), 12);
        let flat: Vec<(f64, f64)> = trace.iter().map(|&(t, v)| (t, 1e-4 * v)).collect();
        assert_eq!(cyclic_sign_changes(&flat, 1e-2), 0);
    }
}
