//! Lifting operators and the reconstructed discrete Hessian.
//!
//! Liftings map data on one edge to a 2x2 tensor-valued broken polynomial
//! supported on the adjacent cells. Because the mass matrix of `V_h^k` is
//! block diagonal, each adjacent cell is solved for independently:
//!
//! ```text
//! r_e(phi)_ij |K = M_K^{-1} [ w_e * int_e psi n_j phi_i ]
//! b_e(phi)_ij |K = M_K^{-1} [ w_e * int_e d_j psi n_i phi ]
//! ```
//!
//! with `w_e = 1/2` on interior and `1` on boundary edges. The discrete Hessian
//! `H_h(v) = D_h^2 v - sum r_e([grad v]) + sum b_e([v])` is stored cell by cell
//! as a dense stencil from the coefficients of a cell and its edge neighbours
//! to values at the cell's quadrature points.

use nalgebra::{DMatrix, Matrix2, Matrix3x2};

use crate::dgspace::DgSpace;
use crate::mesh::{ActiveEdgeSets, EdgeKind, EdgeTopology};

/// Lifting weights of one adjacent cell of an edge.
#[derive(Clone, Debug)]
pub struct LiftingBlock {
    pub cell: usize,
    /// `M_K^{-1} Psi^T W`, `nb x nq_e`.
    pub r: DMatrix<f64>,
    /// `M_K^{-1} (d_j Psi)^T W` for `j = 0, 1`.
    pub b: [DMatrix<f64>; 2],
}

/// Coefficients of a tensor-valued lifting on one cell, `[entry 2i+j][basis a]`.
#[derive(Clone, Debug, PartialEq)]
pub struct LocalTensor {
    pub cell: usize,
    pub coeffs: [Vec<f64>; 4],
}

#[derive(Clone, Debug)]
pub struct Liftings {
    /// Per edge, one block per adjacent cell (minus first).
    pub blocks: Vec<Vec<LiftingBlock>>,
}

impl Liftings {
    pub fn new(space: &DgSpace, topo: &EdgeTopology) -> Liftings {
        let nb = space.nb;
        let nqe = space.n_edge_quad();
        let blocks = topo
            .edges
            .iter()
            .enumerate()
            .map(|(e, edge)| {
                let weight = if edge.is_boundary() { 1.0 } else { 0.5 };
                let eq = &space.edges[e];
                eq.sides()
                    .map(|side| {
                        let minv = &space.mass_inv[side.cell];
                        let mut psi = DMatrix::zeros(nb, nqe);
                        let mut dpsi = [DMatrix::zeros(nb, nqe), DMatrix::zeros(nb, nqe)];
                        for q in 0..nqe {
                            let w = weight * eq.w[q];
                            for a in 0..nb {
                                psi[(a, q)] = w * side.val[q * nb + a];
                                dpsi[0][(a, q)] = w * side.grad[q * nb + a].x;
                                dpsi[1][(a, q)] = w * side.grad[q * nb + a].y;
                            }
                        }
                        let [d0, d1] = dpsi;
                        LiftingBlock { cell: side.cell, r: minv * psi, b: [minv * d0, minv * d1] }
                    })
                    .collect()
            })
            .collect();
        Liftings { blocks }
    }

    /// `r_e(phi)` for vector data `phi` given at the edge quadrature points.
    pub fn lift_r(&self, topo: &EdgeTopology, e: usize, phi: &[[f64; 2]]) -> Vec<LocalTensor> {
        let n = topo.edges[e].normal;
        self.blocks[e]
            .iter()
            .map(|blk| {
                let mut coeffs: [Vec<f64>; 4] = Default::default();
                for i in 0..2 {
                    for j in 0..2 {
                        let data: Vec<f64> = phi.iter().map(|p| n[j] * p[i]).collect();
                        coeffs[2 * i + j] = mat_vec(&blk.r, &data);
                    }
                }
                LocalTensor { cell: blk.cell, coeffs }
            })
            .collect()
    }

    /// `b_e(phi)` for scalar data `phi` given at the edge quadrature points.
    pub fn lift_b(&self, topo: &EdgeTopology, e: usize, phi: &[f64]) -> Vec<LocalTensor> {
        let n = topo.edges[e].normal;
        self.blocks[e]
            .iter()
            .map(|blk| {
                let mut coeffs: [Vec<f64>; 4] = Default::default();
                for i in 0..2 {
                    for j in 0..2 {
                        let data: Vec<f64> = phi.iter().map(|p| n[i] * p).collect();
                        coeffs[2 * i + j] = mat_vec(&blk.b[j], &data);
                    }
                }
                LocalTensor { cell: blk.cell, coeffs }
            })
            .collect()
    }
}

fn mat_vec(m: &DMatrix<f64>, x: &[f64]) -> Vec<f64> {
    (0..m.nrows()).map(|a| (0..m.ncols()).map(|q| m[(a, q)] * x[q]).sum()).collect()
}

/// Boundary data sampled at the quadrature points of labelled edges and at point vertices.
#[derive(Clone, Debug, Default)]
pub struct BoundarySample {
    /// `phi` per edge at edge quadrature points, for Dirichlet and mixed edges.
    pub value: Vec<Option<Vec<[f64; 3]>>>,
    /// `Phi` per edge at edge quadrature points, for Dirichlet edges.
    pub gradient: Vec<Option<Vec<Matrix3x2<f64>>>>,
    /// Prescribed positions at the point-condition vertices.
    pub points: Vec<[f64; 3]>,
}

impl BoundarySample {
    pub fn sample(
        space: &DgSpace,
        active: &ActiveEdgeSets,
        value: &dyn Fn(crate::mesh::Vec2) -> [f64; 3],
        gradient: &dyn Fn(crate::mesh::Vec2) -> Matrix3x2<f64>,
        points: &[[f64; 3]],
    ) -> BoundarySample {
        let n = active.kind.len();
        let mut s = BoundarySample { value: vec![None; n], gradient: vec![None; n], points: points.to_vec() };
        for e in 0..n {
            let xs = &space.edges[e].x;
            match active.kind[e] {
                EdgeKind::Dirichlet => {
                    s.value[e] = Some(xs.iter().map(|&x| value(x)).collect());
                    s.gradient[e] = Some(xs.iter().map(|&x| gradient(x)).collect());
                }
                EdgeKind::Mixed => s.value[e] = Some(xs.iter().map(|&x| value(x)).collect()),
                _ => {}
            }
        }
        s
    }

    /// Homogeneous data on the same labels.
    pub fn zeros_like(&self) -> BoundarySample {
        BoundarySample {
            value: self.value.iter().map(|v| v.as_ref().map(|v| vec![[0.0; 3]; v.len()])).collect(),
            gradient: self.gradient.iter().map(|v| v.as_ref().map(|v| vec![Matrix3x2::zeros(); v.len()])).collect(),
            points: vec![[0.0; 3]; self.points.len()],
        }
    }

    /// Difference `self - other` of data on the same labels.
    pub fn difference(&self, other: &BoundarySample) -> BoundarySample {
        let sub3 = |a: &[f64; 3], b: &[f64; 3]| [a[0] - b[0], a[1] - b[1], a[2] - b[2]];
        BoundarySample {
            value: self
                .value
                .iter()
                .zip(&other.value)
                .map(|(a, b)| match (a, b) {
                    (Some(a), Some(b)) => Some(a.iter().zip(b).map(|(x, y)| sub3(x, y)).collect()),
                    (a, _) => a.clone(),
                })
                .collect(),
            gradient: self
                .gradient
                .iter()
                .zip(&other.gradient)
                .map(|(a, b)| match (a, b) {
                    (Some(a), Some(b)) => Some(a.iter().zip(b).map(|(x, y)| x - y).collect()),
                    (a, _) => a.clone(),
                })
                .collect(),
            points: self.points.iter().zip(&other.points).map(|(a, b)| sub3(a, b)).collect(),
        }
    }
}

/// The discrete Hessian as per-cell stencils.
#[derive(Clone, Debug)]
pub struct HessianOperator {
    /// Cells whose coefficients enter `H_h` on each cell; the cell itself first.
    pub stencils: Vec<Vec<usize>>,
    /// Per cell, rows `4 q + 2 i + j` (tensor entry `ij` at quadrature point `q`),
    /// columns `nb * p + a` (basis `a` of stencil cell `p`).
    pub blocks: Vec<DMatrix<f64>>,
    /// Per cell, `int_K H_h`: rows are the four tensor entries.
    pub integrated: Vec<DMatrix<f64>>,
    pub liftings: Liftings,
    nb: usize,
    nq: usize,
}

impl HessianOperator {
    pub fn new(space: &DgSpace, topo: &EdgeTopology, active: &ActiveEdgeSets) -> HessianOperator {
        let liftings = Liftings::new(space, topo);
        let nb = space.nb;
        let nq = space.n_quad();
        let nqe = space.n_edge_quad();
        let mut stencils = Vec::with_capacity(space.n_cells);
        let mut blocks = Vec::with_capacity(space.n_cells);
        let mut integrated = Vec::with_capacity(space.n_cells);
        for k in 0..space.n_cells {
            let mut stencil = vec![k];
            for &e in &topo.cell_edges[k] {
                if !(active.val[e] || active.grad[e]) {
                    continue;
                }
                for s in topo.edges[e].sides() {
                    if !stencil.contains(&s.cell) {
                        stencil.push(s.cell);
                    }
                }
            }
            let ns = nb * stencil.len();
            let cq = &space.cells[k];
            let mut h = DMatrix::zeros(4 * nq, ns);
            for q in 0..nq {
                for a in 0..nb {
                    let hess = cq.hess[q * nb + a];
                    for i in 0..2 {
                        for j in 0..2 {
                            h[(4 * q + 2 * i + j, a)] = hess[(i, j)];
                        }
                    }
                }
            }
            for &e in &topo.cell_edges[k] {
                let (val, grad) = (active.val[e], active.grad[e]);
                if !(val || grad) {
                    continue;
                }
                let edge = &topo.edges[e];
                let n = edge.normal;
                let eq = &space.edges[e];
                // jump operators [v] and [d_i v] on the edge, in stencil columns
                let mut jv = DMatrix::zeros(nqe, ns);
                let mut jg = [DMatrix::zeros(nqe, ns), DMatrix::zeros(nqe, ns)];
                for (sign, side) in [(1.0, Some(&eq.minus)), (-1.0, eq.plus.as_ref())] {
                    let Some(side) = side else { continue };
                    let p = stencil.iter().position(|&c| c == side.cell).unwrap();
                    for qe in 0..nqe {
                        for a in 0..nb {
                            jv[(qe, nb * p + a)] += sign * side.val[qe * nb + a];
                            jg[0][(qe, nb * p + a)] += sign * side.grad[qe * nb + a].x;
                            jg[1][(qe, nb * p + a)] += sign * side.grad[qe * nb + a].y;
                        }
                    }
                }
                let blk = liftings.blocks[e].iter().find(|b| b.cell == k).unwrap();
                for i in 0..2 {
                    for j in 0..2 {
                        // coefficients of the lifted entry ij, nb x ns
                        let mut coef = DMatrix::zeros(nb, ns);
                        if grad {
                            coef -= &blk.r * &jg[i] * n[j];
                        }
                        if val {
                            coef += &blk.b[j] * &jv * n[i];
                        }
                        for q in 0..nq {
                            let row = 4 * q + 2 * i + j;
                            for a in 0..nb {
                                let psi = cq.val[q * nb + a];
                                if psi == 0.0 {
                                    continue;
                                }
                                for col in 0..ns {
                                    h[(row, col)] += psi * coef[(a, col)];
                                }
                            }
                        }
                    }
                }
            }
            let mut int = DMatrix::zeros(4, ns);
            for q in 0..nq {
                for r in 0..4 {
                    for col in 0..ns {
                        int[(r, col)] += cq.w[q] * h[(4 * q + r, col)];
                    }
                }
            }
            stencils.push(stencil);
            blocks.push(h);
            integrated.push(int);
        }
        HessianOperator { stencils, blocks, integrated, liftings, nb, nq }
    }

    /// Gathers the stencil coefficients of cell `k` from a scalar field.
    pub fn gather(&self, v: &[f64], k: usize) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.nb * self.stencils[k].len());
        for &c in &self.stencils[k] {
            out.extend_from_slice(&v[c * self.nb..(c + 1) * self.nb]);
        }
        out
    }

    /// `H_h(v)` at the quadrature points of cell `k`.
    pub fn cell_values(&self, v: &[f64], k: usize) -> Vec<Matrix2<f64>> {
        let loc = self.gather(v, k);
        let h = &self.blocks[k];
        (0..self.nq)
            .map(|q| {
                let mut m = [0.0; 4];
                for (r, e) in m.iter_mut().enumerate() {
                    let row = h.row(4 * q + r);
                    *e = row.iter().zip(&loc).map(|(a, b)| a * b).sum();
                }
                Matrix2::new(m[0], m[1], m[2], m[3])
            })
            .collect()
    }

    /// `H_h(v)` at all quadrature points, indexed `k * nq + q`.
    pub fn apply(&self, v: &[f64]) -> Vec<Matrix2<f64>> {
        (0..self.stencils.len()).flat_map(|k| self.cell_values(v, k)).collect()
    }

    /// `int_K H_h(v)` for every cell `K`.
    pub fn integrals(&self, v: &[f64]) -> Vec<Matrix2<f64>> {
        (0..self.stencils.len())
            .map(|k| {
                let loc = self.gather(v, k);
                let int = &self.integrated[k];
                let m: Vec<f64> = (0..4).map(|r| int.row(r).iter().zip(&loc).map(|(a, b)| a * b).sum()).collect();
                Matrix2::new(m[0], m[1], m[2], m[3])
            })
            .collect()
    }

    /// Lifting of boundary data for component `m`, `-sum_D r_e(Phi_m) + sum_{D,M} b_e(phi_m)`,
    /// at all quadrature points.
    pub fn boundary_lifting(&self, space: &DgSpace, topo: &EdgeTopology, bc: &BoundarySample, m: usize) -> Vec<Matrix2<f64>> {
        let nb = self.nb;
        let nq = self.nq;
        let mut out = vec![Matrix2::zeros(); space.n_cells * nq];
        let mut add = |lt: &LocalTensor, sign: f64| {
            let cq = &space.cells[lt.cell];
            for q in 0..nq {
                let mut t = [0.0; 4];
                for (r, c) in lt.coeffs.iter().enumerate() {
                    t[r] = (0..nb).map(|a| cq.val[q * nb + a] * c[a]).sum();
                }
                out[lt.cell * nq + q] += Matrix2::new(t[0], t[1], t[2], t[3]) * sign;
            }
        };
        for e in 0..topo.n_edges() {
            if let Some(grad) = &bc.gradient[e] {
                let data: Vec<[f64; 2]> = grad.iter().map(|g| [g[(m, 0)], g[(m, 1)]]).collect();
                for lt in self.liftings.lift_r(topo, e, &data) {
                    add(&lt, -1.0);
                }
            }
            if let Some(val) = &bc.value[e] {
                let data: Vec<f64> = val.iter().map(|v| v[m]).collect();
                for lt in self.liftings.lift_b(topo, e, &data) {
                    add(&lt, 1.0);
                }
            }
        }
        out
    }
}

/// Cell averages of a tensor field given at quadrature points.
pub fn project_p0(space: &DgSpace, values: &[Matrix2<f64>]) -> Vec<Matrix2<f64>> {
    let nq = space.n_quad();
    (0..space.n_cells)
        .map(|k| {
            let cq = &space.cells[k];
            let mut s = Matrix2::zeros();
            let mut area = 0.0;
            for q in 0..nq {
                s += values[k * nq + q] * cq.w[q];
                area += cq.w[q];
            }
            s / area
        })
        .collect()
}

/// Broken Hessian `D_h^2 v` at all quadrature points.
pub fn broken_hessian(space: &DgSpace, v: &[f64]) -> Vec<Matrix2<f64>> {
    let nb = space.nb;
    let nq = space.n_quad();
    let mut out = Vec::with_capacity(space.n_cells * nq);
    for k in 0..space.n_cells {
        let cq = &space.cells[k];
        let loc = space.local(v, k);
        for q in 0..nq {
            let mut h = Matrix2::zeros();
            for a in 0..nb {
                h += cq.hess[q * nb + a] * loc[a];
            }
            out.push(h);
        }
    }
    out
}
