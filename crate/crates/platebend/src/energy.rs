//! Discrete plate energies, their variations, and the metric defects.
//!
//! The bending energy, the stabilization and the forcing term are quadratic or
//! linear in `y` and act on each component separately, so they are assembled
//! once as a [`QuadraticForm`] with a scalar matrix shared by the three
//! components. The stretching energy and the cubic bilayer term are evaluated
//! pointwise. Every assembled form has a direct evaluation next to it.

use std::sync::Arc;

use nalgebra::{Matrix2, Matrix3x2, Vector3};

use crate::dgspace::VectorField;
use crate::discretization::Discretization;
use crate::error::{Error, Result};
use crate::hessian::BoundarySample;
use crate::mesh::Vec2;
use crate::sparse::{BlockAssembler, BlockMatrix};

/// Lamé constants and thickness.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MaterialParams {
    pub mu: f64,
    pub lambda: f64,
    pub thickness: f64,
}

impl MaterialParams {
    pub fn new(mu: f64, lambda: f64, thickness: f64) -> Result<MaterialParams> {
        if !(mu > 0.0) || !(lambda >= 0.0) || !(thickness >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "material needs mu > 0, lambda >= 0, s >= 0 (got mu={mu}, lambda={lambda}, s={thickness})"
            )));
        }
        Ok(MaterialParams { mu, lambda, thickness })
    }

    /// Bilayer coefficient `mu (mu + lambda) / (3 (2 mu + lambda))`.
    pub fn alpha(&self) -> f64 {
        self.mu * (self.mu + self.lambda) / (3.0 * (2.0 * self.mu + self.lambda))
    }
}

impl Default for MaterialParams {
    fn default() -> Self {
        MaterialParams { mu: 6.0, lambda: 8.0, thickness: 0.0 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PenaltyParams {
    pub gamma0: f64,
    pub gamma1: f64,
    pub gamma2: f64,
}

impl PenaltyParams {
    pub fn new(gamma0: f64, gamma1: f64, gamma2: f64) -> Result<PenaltyParams> {
        if !(gamma0 > 0.0 && gamma1 > 0.0 && gamma2 > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "penalty parameters must be positive (got {gamma0}, {gamma1}, {gamma2})"
            )));
        }
        Ok(PenaltyParams { gamma0, gamma1, gamma2 })
    }
}

impl Default for PenaltyParams {
    fn default() -> Self {
        PenaltyParams { gamma0: 1.0, gamma1: 1.0, gamma2: 10.0 }
    }
}

/// Closed-form inverse square root of a symmetric positive-definite 2x2 matrix.
pub fn inv_sqrt_spd2(m: &Matrix2<f64>) -> Result<Matrix2<f64>> {
    let det = m.determinant();
    let tr = m.trace();
    let asym = (m[(0, 1)] - m[(1, 0)]).abs();
    if !(det > 0.0 && tr > 0.0) || asym > 1e-12 * tr {
        return Err(Error::InvalidParameter(format!("matrix {m:?} is not symmetric positive definite")));
    }
    // sqrt(M) = (M + sqrt(det) I) / sqrt(tr + 2 sqrt(det))
    let s = det.sqrt();
    let t = (tr + 2.0 * s).sqrt();
    let root = (m + Matrix2::identity() * s) / t;
    Ok(root.try_inverse().unwrap())
}

/// A metric sampled at the quadrature points and the cell barycentres.
#[derive(Clone, Debug)]
pub struct MetricField {
    pub g: Vec<Matrix2<f64>>,
    pub g_inv: Vec<Matrix2<f64>>,
    pub g_inv_sqrt: Vec<Matrix2<f64>>,
    pub center: Vec<Matrix2<f64>>,
    pub is_identity: bool,
}

impl MetricField {
    pub fn sample(disc: &Discretization, g: &dyn Fn(Vec2) -> Matrix2<f64>) -> Result<MetricField> {
        let space = &disc.space;
        let mut out =
            MetricField { g: Vec::new(), g_inv: Vec::new(), g_inv_sqrt: Vec::new(), center: Vec::new(), is_identity: false };
        for c in 0..space.n_cells {
            for &x in &space.cells[c].x {
                let gx = g(x);
                let r = inv_sqrt_spd2(&gx).map_err(|_| Error::MetricNotSpd { x: x.x, y: x.y })?;
                out.g.push(gx);
                out.g_inv.push(r * r);
                out.g_inv_sqrt.push(r);
            }
            out.center.push(g(disc.mesh().cell_center(c)));
        }
        out.is_identity = out.g.iter().all(|m| *m == Matrix2::identity());
        Ok(out)
    }

    pub fn identity(disc: &Discretization) -> MetricField {
        MetricField::sample(disc, &|_| Matrix2::identity()).unwrap()
    }
}

/// Piecewise-constant spontaneous curvature, one matrix per cell.
#[derive(Clone, Debug)]
pub struct CurvatureField {
    pub z: Vec<Matrix2<f64>>,
}

impl CurvatureField {
    /// Assigns `by_region(label)` to every cell of the mesh.
    pub fn from_regions(disc: &Discretization, by_region: &dyn Fn(u32) -> Option<Matrix2<f64>>) -> Result<CurvatureField> {
        let mut z = Vec::with_capacity(disc.space.n_cells);
        for &r in &disc.mesh().regions {
            let m = by_region(r).ok_or_else(|| Error::InvalidParameter(format!("no curvature given for region {r}")))?;
            if (m[(0, 1)] - m[(1, 0)]).abs() > 1e-14 * m.norm().max(1.0) {
                return Err(Error::InvalidParameter(format!("curvature of region {r} is not symmetric")));
            }
            z.push(m);
        }
        Ok(CurvatureField { z })
    }

    pub fn constant(disc: &Discretization, m: Matrix2<f64>) -> CurvatureField {
        CurvatureField { z: vec![m; disc.space.n_cells] }
    }
}

/// `1/2 sum_m y_m^T A y_m - sum_m b_m . y_m + c`, identical `A` for all components.
#[derive(Clone, Debug)]
pub struct QuadraticForm {
    pub matrix: BlockMatrix,
    pub rhs: [Vec<f64>; 3],
    pub constant: f64,
}

impl QuadraticForm {
    pub fn eval(&self, y: &VectorField) -> f64 {
        let mut e = self.constant;
        for m in 0..3 {
            let ym = y.component(m);
            e += 0.5 * self.matrix.quad_form(ym) - dot(&self.rhs[m], ym);
        }
        e
    }

    /// Gradient `A y_m - b_m` per component.
    pub fn gradient(&self, y: &VectorField) -> VectorField {
        let comps = [0, 1, 2].map(|m| {
            let mut g = self.matrix.mul_vec(y.component(m));
            for (gi, bi) in g.iter_mut().zip(&self.rhs[m]) {
                *gi -= bi;
            }
            g
        });
        VectorField::from_components(comps)
    }

    pub fn add(&self, other: &QuadraticForm) -> QuadraticForm {
        QuadraticForm {
            matrix: self.matrix.combine(1.0, &other.matrix, 1.0),
            rhs: [0, 1, 2].map(|m| self.rhs[m].iter().zip(&other.rhs[m]).map(|(a, b)| a + b).collect()),
            constant: self.constant + other.constant,
        }
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Energy values of one iterate.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct EnergyBreakdown {
    pub total: f64,
    pub stretching: f64,
    pub bending: f64,
    pub stabilization: f64,
    pub forcing: f64,
    pub cubic: f64,
    pub defect: f64,
}

/// Vectorized row of a 2x2 tensor, index `2 i + j`.
fn vec4(m: &Matrix2<f64>) -> [f64; 4] {
    [m[(0, 0)], m[(0, 1)], m[(1, 0)], m[(1, 1)]]
}

/// Pointwise bending weight `W` with density `1/2 h^T W h` for `h = vec(H)`.
fn bending_weight(mat: &MaterialParams, r: &Matrix2<f64>, ginv: &Matrix2<f64>) -> [[f64; 4]; 4] {
    let (mu, la) = (mat.mu, mat.lambda);
    let c1 = mu / 6.0;
    let c2 = mu * la / (6.0 * (2.0 * mu + la));
    // k[(ij),(rs)] = R[i,r] R[s,j] so that vec(R H R) = k vec(H)
    let mut k = [[0.0; 4]; 4];
    for i in 0..2 {
        for j in 0..2 {
            for a in 0..2 {
                for b in 0..2 {
                    k[2 * i + j][2 * a + b] = r[(i, a)] * r[(b, j)];
                }
            }
        }
    }
    let t = vec4(ginv);
    let mut w = [[0.0; 4]; 4];
    for p in 0..4 {
        for q in 0..4 {
            let kk: f64 = (0..4).map(|s| k[s][p] * k[s][q]).sum();
            w[p][q] = c1 * kk + c2 * t[p] * t[q];
        }
    }
    w
}

/// Energy data of a plate problem on a fixed discretization.
#[derive(Clone, Debug)]
pub struct PlateEnergy {
    pub disc: Arc<Discretization>,
    pub material: MaterialParams,
    pub penalties: PenaltyParams,
    pub metric: MetricField,
    pub bc: BoundarySample,
    /// Boundary lifting per component at all quadrature points.
    pub bc_lifting: [Vec<Matrix2<f64>>; 3],
    /// `int f_m psi_a` per component.
    pub force: [Vec<f64>; 3],
    pub curvature: Option<CurvatureField>,
}

impl PlateEnergy {
    pub fn new(
        disc: Arc<Discretization>,
        material: MaterialParams,
        penalties: PenaltyParams,
        metric: MetricField,
    ) -> PlateEnergy {
        let n = disc.n_dofs();
        let nq = disc.space.n_quad();
        let bc = BoundarySample {
            value: vec![None; disc.topo.n_edges()],
            gradient: vec![None; disc.topo.n_edges()],
            points: vec![[0.0; 3]; disc.points.len()],
        };
        let zero = vec![Matrix2::zeros(); disc.space.n_cells * nq];
        PlateEnergy {
            bc,
            bc_lifting: [zero.clone(), zero.clone(), zero],
            force: [vec![0.0; n], vec![0.0; n], vec![0.0; n]],
            curvature: None,
            disc,
            material,
            penalties,
            metric,
        }
    }

    pub fn set_boundary(&mut self, bc: BoundarySample) {
        let d = &self.disc;
        self.bc_lifting = [0, 1, 2].map(|m| d.hessian.boundary_lifting(&d.space, &d.topo, &bc, m));
        self.bc = bc;
    }

    /// Samples `f` at the quadrature points.
    pub fn set_force(&mut self, f: &dyn Fn(Vec2) -> Vector3<f64>) {
        let space = &self.disc.space;
        let nb = space.nb;
        let mut force = [vec![0.0; space.n_dofs()], vec![0.0; space.n_dofs()], vec![0.0; space.n_dofs()]];
        for c in 0..space.n_cells {
            let cq = &space.cells[c];
            for q in 0..space.n_quad() {
                let fx = f(cq.x[q]);
                for a in 0..nb {
                    let v = cq.w[q] * cq.val[q * nb + a];
                    for m in 0..3 {
                        force[m][c * nb + a] += v * fx[m];
                    }
                }
            }
        }
        self.force = force;
    }

    pub fn set_curvature(&mut self, z: CurvatureField) {
        self.curvature = Some(z);
    }

    fn nq(&self) -> usize {
        self.disc.space.n_quad()
    }

    // ---- stretching ----------------------------------------------------------

    fn metric_defect_at(&self, y: &VectorField, c: usize, q: usize) -> Matrix2<f64> {
        let f = self.disc.space.deformation_gradient(y, c, q);
        f.transpose() * f - self.metric.g[c * self.nq() + q]
    }

    /// `E_h^S`.
    pub fn stretching_energy(&self, y: &VectorField) -> f64 {
        self.stretching_energy_cells(y).iter().sum()
    }

    /// Contributions of each cell to `E_h^S`.
    pub fn stretching_energy_cells(&self, y: &VectorField) -> Vec<f64> {
        let (mu, la) = (self.material.mu, self.material.lambda);
        let space = &self.disc.space;
        (0..space.n_cells)
            .map(|c| {
                let mut e = 0.0;
                for q in 0..self.nq() {
                    let m = self.metric_defect_at(y, c, q);
                    let r = self.metric.g_inv_sqrt[c * self.nq() + q];
                    let a = r * m * r;
                    e += space.cells[c].w[q] * (0.25 * mu * a.norm_squared() + 0.125 * la * a.trace().powi(2));
                }
                e
            })
            .collect()
    }

    /// Coefficient of the linearized stretching form at one point.
    fn stretching_coefficient(&self, m: &Matrix2<f64>, idx: usize) -> Matrix2<f64> {
        let (mu, la) = (self.material.mu, self.material.lambda);
        let gi = self.metric.g_inv[idx];
        gi * m * gi * (0.5 * mu) + gi * (0.25 * la * (gi * m).trace())
    }

    /// The scalar matrix `2 int grad psi . C grad psi` with `C` from `coef(cell, q, m(y))`.
    fn gradient_form(&self, y: &VectorField, coef: &dyn Fn(&Matrix2<f64>, usize) -> Matrix2<f64>) -> BlockMatrix {
        let space = &self.disc.space;
        let nb = space.nb;
        let mut asm = BlockAssembler::new(space.n_cells, nb);
        for c in 0..space.n_cells {
            let cq = &space.cells[c];
            let blk = asm.block_mut(c, c);
            for q in 0..self.nq() {
                let m = self.metric_defect_at(y, c, q);
                let cc = coef(&m, c * self.nq() + q) * (2.0 * cq.w[q]);
                let grads = &cq.grad[q * nb..(q + 1) * nb];
                for a in 0..nb {
                    let ca = cc * grads[a];
                    for b in 0..nb {
                        blk[a * nb + b] += ca.dot(&grads[b]);
                    }
                }
            }
        }
        asm.finish()
    }

    /// Matrix of `delta E_h^S(y_base; v, w)`, block diagonal, shared by the components.
    pub fn stretching_matrix(&self, y_base: &VectorField) -> BlockMatrix {
        self.gradient_form(y_base, &|m, idx| self.stretching_coefficient(m, idx))
    }

    /// `delta E_h^S(y_base; v, w) = int l(v, w) : C(m(y_base))`, evaluated pointwise.
    pub fn stretching_first_variation(&self, y_base: &VectorField, v: &VectorField, w: &VectorField) -> f64 {
        let space = &self.disc.space;
        let mut s = 0.0;
        for c in 0..space.n_cells {
            for q in 0..self.nq() {
                let m = self.metric_defect_at(y_base, c, q);
                let cc = self.stretching_coefficient(&m, c * self.nq() + q);
                let fv = space.deformation_gradient(v, c, q);
                let fw = space.deformation_gradient(w, c, q);
                let l = fv.transpose() * fw + fw.transpose() * fv;
                s += space.cells[c].w[q] * l.component_mul(&cc).sum();
            }
        }
        s
    }

    /// `1/2 int |grad y^T grad y - g|^2`.
    pub fn simplified_stretching(&self, y: &VectorField) -> f64 {
        let space = &self.disc.space;
        let mut e = 0.0;
        for c in 0..space.n_cells {
            for q in 0..self.nq() {
                e += 0.5 * space.cells[c].w[q] * self.metric_defect_at(y, c, q).norm_squared();
            }
        }
        e
    }

    /// Matrix of the linearized simplified stretching energy at `y_base`.
    pub fn simplified_stretching_matrix(&self, y_base: &VectorField) -> BlockMatrix {
        self.gradient_form(y_base, &|m, _| *m)
    }

    // ---- bending -------------------------------------------------------------

    /// `H_h(phi_m, Phi_m; y_m)` at all quadrature points for each component.
    pub fn hessian_with_bc(&self, y: &VectorField) -> [Vec<Matrix2<f64>>; 3] {
        [0, 1, 2].map(|m| {
            let mut h = self.disc.hessian.apply(y.component(m));
            for (hi, li) in h.iter_mut().zip(&self.bc_lifting[m]) {
                *hi -= li;
            }
            h
        })
    }

    /// `E_h^B` evaluated from the Hessian values.
    pub fn bending_energy(&self, y: &VectorField) -> f64 {
        self.bending_energy_cells(y).iter().sum()
    }

    /// Contributions of each cell to `E_h^B`.
    pub fn bending_energy_cells(&self, y: &VectorField) -> Vec<f64> {
        let (mu, la) = (self.material.mu, self.material.lambda);
        let c2 = mu * la / (12.0 * (2.0 * mu + la));
        let space = &self.disc.space;
        let nq = self.nq();
        let mut e = vec![0.0; space.n_cells];
        for h in self.hessian_with_bc(y) {
            for (c, ec) in e.iter_mut().enumerate() {
                for q in 0..nq {
                    let r = self.metric.g_inv_sqrt[c * nq + q];
                    let a = r * h[c * nq + q] * r;
                    *ec += space.cells[c].w[q] * (mu / 12.0 * a.norm_squared() + c2 * a.trace().powi(2));
                }
            }
        }
        e
    }

    /// `E_h^B` as a quadratic form.
    pub fn bending_form(&self) -> QuadraticForm {
        let disc = &self.disc;
        let space = &disc.space;
        let hop = &disc.hessian;
        let nb = space.nb;
        let nq = self.nq();
        let n = space.n_dofs();
        let mut asm = BlockAssembler::new(space.n_cells, nb);
        let mut rhs = [vec![0.0; n], vec![0.0; n], vec![0.0; n]];
        let mut constant = 0.0;
        for k in 0..space.n_cells {
            let stencil = &hop.stencils[k];
            let ns = nb * stencil.len();
            let h = &hop.blocks[k];
            let mut rows = vec![0.0; 4 * ns];
            let mut wrows = vec![0.0; 4 * ns];
            for q in 0..nq {
                let idx = k * nq + q;
                let w = bending_weight(&self.material, &self.metric.g_inv_sqrt[idx], &self.metric.g_inv[idx]);
                let wq = space.cells[k].w[q];
                for r in 0..4 {
                    for col in 0..ns {
                        rows[r * ns + col] = h[(4 * q + r, col)];
                    }
                }
                for r in 0..4 {
                    for col in 0..ns {
                        wrows[r * ns + col] = (0..4).map(|s| w[r][s] * rows[s * ns + col]).sum();
                    }
                }
                asm.add_outer(stencil, &rows, stencil, &wrows, 4, wq);
                for m in 0..3 {
                    let l = vec4(&self.bc_lifting[m][idx]);
                    if l.iter().all(|v| *v == 0.0) {
                        continue;
                    }
                    let wl: Vec<f64> = (0..4).map(|r| (0..4).map(|s| w[r][s] * l[s]).sum()).collect();
                    constant += 0.5 * wq * (0..4).map(|r| l[r] * wl[r]).sum::<f64>();
                    for (p, &cell) in stencil.iter().enumerate() {
                        for a in 0..nb {
                            let col = p * nb + a;
                            let v: f64 = (0..4).map(|r| rows[r * ns + col] * wl[r]).sum();
                            rhs[m][cell * nb + a] += wq * v;
                        }
                    }
                }
            }
        }
        QuadraticForm { matrix: asm.finish(), rhs, constant }
    }

    // ---- stabilization -------------------------------------------------------

    /// `S_h` evaluated from jumps and point values.
    pub fn stabilization(&self, y: &VectorField) -> f64 {
        let disc = &self.disc;
        let space = &disc.space;
        let PenaltyParams { gamma0, gamma1, gamma2 } = self.penalties;
        let mut s = 0.0;
        for e in 0..disc.topo.n_edges() {
            let (val, grad) = (disc.active.val[e], disc.active.grad[e]);
            if !(val || grad) {
                continue;
            }
            let h = disc.sizes.edge[e];
            let boundary = disc.topo.edges[e].is_boundary();
            let eq = &space.edges[e];
            for m in 0..3 {
                let ym = y.component(m);
                for q in 0..space.n_edge_quad() {
                    let j = space.jump_avg(ym, e, q);
                    if val {
                        let d = if boundary { j.jump - self.bc.value[e].as_ref().map_or(0.0, |v| v[q][m]) } else { j.jump };
                        s += 0.5 * gamma0 * h.powi(-3) * eq.w[q] * d * d;
                    }
                    if grad {
                        let d = if boundary {
                            let g = self.bc.gradient[e].as_ref().map_or(Matrix3x2::zeros(), |g| g[q]);
                            j.grad_jump - Vec2::new(g[(m, 0)], g[(m, 1)])
                        } else {
                            j.grad_jump
                        };
                        s += 0.5 * gamma1 / h * eq.w[q] * d.norm_squared();
                    }
                }
            }
        }
        for (i, p) in disc.points.iter().enumerate() {
            for m in 0..3 {
                let d = p.average(y.component(m), space.nb) - self.bc.points[i][m];
                s += 0.5 * gamma2 * p.h.powi(-2) * d * d;
            }
        }
        s
    }

    /// `S_h` as a quadratic form.
    pub fn stabilization_form(&self) -> QuadraticForm {
        let PenaltyParams { gamma0, gamma1, gamma2 } = self.penalties;
        let matrix = jump_matrix(&self.disc, gamma0, gamma1, gamma2);
        let disc = &self.disc;
        let space = &disc.space;
        let nb = space.nb;
        let n = space.n_dofs();
        let mut rhs = [vec![0.0; n], vec![0.0; n], vec![0.0; n]];
        let mut constant = 0.0;
        for e in 0..disc.topo.n_edges() {
            if !disc.topo.edges[e].is_boundary() {
                continue;
            }
            let h = disc.sizes.edge[e];
            let eq = &space.edges[e];
            let side = &eq.minus;
            for q in 0..space.n_edge_quad() {
                let w = eq.w[q];
                if let Some(vals) = &self.bc.value[e] {
                    let c0 = gamma0 * h.powi(-3) * w;
                    for m in 0..3 {
                        let phi = vals[q][m];
                        constant += 0.5 * c0 * phi * phi;
                        for a in 0..nb {
                            rhs[m][side.cell * nb + a] += c0 * phi * side.val[q * nb + a];
                        }
                    }
                }
                if let Some(grads) = &self.bc.gradient[e] {
                    let c1 = gamma1 / h * w;
                    for m in 0..3 {
                        let g = Vec2::new(grads[q][(m, 0)], grads[q][(m, 1)]);
                        constant += 0.5 * c1 * g.norm_squared();
                        for a in 0..nb {
                            rhs[m][side.cell * nb + a] += c1 * g.dot(&side.grad[q * nb + a]);
                        }
                    }
                }
            }
        }
        for (i, p) in disc.points.iter().enumerate() {
            let c2 = gamma2 * p.h.powi(-2);
            let k = p.cells.len() as f64;
            for m in 0..3 {
                let phi = self.bc.points[i][m];
                constant += 0.5 * c2 * phi * phi;
                for (cell, vals) in &p.cells {
                    for a in 0..nb {
                        rhs[m][cell * nb + a] += c2 * phi * vals[a] / k;
                    }
                }
            }
        }
        QuadraticForm { matrix, rhs, constant }
    }

    // ---- forcing and cubic term ----------------------------------------------

    /// `F(y) = int f . y`.
    pub fn forcing(&self, y: &VectorField) -> f64 {
        (0..3).map(|m| dot(&self.force[m], y.component(m))).sum()
    }

    fn curvature_or_zero(&self, c: usize) -> Matrix2<f64> {
        self.curvature.as_ref().map_or(Matrix2::zeros(), |z| z.z[c])
    }

    /// `int_K (H_h(y_m) - L_m)` per cell and component.
    fn hessian_integrals(&self, y: &VectorField) -> Vec<[Matrix2<f64>; 3]> {
        let space = &self.disc.space;
        let nq = self.nq();
        let ints = [0, 1, 2].map(|m| self.disc.hessian.integrals(y.component(m)));
        (0..space.n_cells)
            .map(|c| {
                [0, 1, 2].map(|m| {
                    let mut s = ints[m][c];
                    for q in 0..nq {
                        s -= self.bc_lifting[m][c * nq + q] * space.cells[c].w[q];
                    }
                    s
                })
            })
            .collect()
    }

    fn tangents_at_center(&self, y: &VectorField, c: usize) -> (Vector3<f64>, Vector3<f64>) {
        let f = self.disc.space.deformation_gradient_at_point(y, c, [0.5, 0.5]);
        (f.column(0).into_owned(), f.column(1).into_owned())
    }

    /// `N_h(y) = alpha sum_K sum_ij Z_ij (int_K H_ij) . (d1 y x d2 y)(x_T)`.
    pub fn cubic_term(&self, y: &VectorField) -> f64 {
        let alpha = self.material.alpha();
        let ints = self.hessian_integrals(y);
        let mut s = 0.0;
        for (c, int) in ints.iter().enumerate() {
            let z = self.curvature_or_zero(c);
            let (t1, t2) = self.tangents_at_center(y, c);
            let n = t1.cross(&t2);
            for m in 0..3 {
                s += n[m] * int[m].component_mul(&z).sum();
            }
        }
        alpha * s
    }

    /// Gradient of `w -> N_h(y; w)`, the first variation of the cubic term.
    pub fn cubic_gradient(&self, y: &VectorField) -> VectorField {
        let alpha = self.material.alpha();
        let space = &self.disc.space;
        let hop = &self.disc.hessian;
        let nb = space.nb;
        let n = space.n_dofs();
        let ints = self.hessian_integrals(y);
        let mut g = VectorField::zeros(n);
        for c in 0..space.n_cells {
            let z = self.curvature_or_zero(c);
            if z == Matrix2::zeros() {
                continue;
            }
            let (t1, t2) = self.tangents_at_center(y, c);
            let normal = t1.cross(&t2);
            let zv = vec4(&z);
            // H slot: alpha sum_ij Z_ij n_m int_K H_ij(w_m)
            let int = &hop.integrated[c];
            for m in 0..3 {
                for (p, &cell) in hop.stencils[c].iter().enumerate() {
                    for a in 0..nb {
                        let col = p * nb + a;
                        let v: f64 = (0..4).map(|r| zv[r] * int[(r, col)]).sum();
                        g.data[m * n + cell * nb + a] += alpha * normal[m] * v;
                    }
                }
            }
            // tangent slots: a . (d1 w x t2) + a . (t1 x d2 w)
            let av = Vector3::from_fn(|m, _| ints[c][m].component_mul(&z).sum());
            let s1 = t2.cross(&av);
            let s2 = av.cross(&t1);
            let pb = space.eval_cell(c, [0.5, 0.5]);
            for m in 0..3 {
                for a in 0..nb {
                    g.data[m * n + c * nb + a] += alpha * (pb.grad[a].x * s1[m] + pb.grad[a].y * s2[m]);
                }
            }
        }
        g
    }

    /// `(alpha / 2) int |Z|^2`.
    pub fn curvature_constant(&self) -> f64 {
        let alpha = self.material.alpha();
        (0..self.disc.space.n_cells)
            .map(|c| 0.5 * alpha * self.disc.mesh().cell_area(c) * self.curvature_or_zero(c).norm_squared())
            .sum()
    }

    // ---- defects -------------------------------------------------------------

    /// Per-cell `|int_K (grad y^T grad y - g)|_F`.
    pub fn defect_aver_cells(&self, y: &VectorField) -> Vec<f64> {
        let space = &self.disc.space;
        (0..space.n_cells)
            .map(|c| {
                let mut s = Matrix2::zeros();
                for q in 0..self.nq() {
                    s += self.metric_defect_at(y, c, q) * space.cells[c].w[q];
                }
                s.norm()
            })
            .collect()
    }

    /// `D_h^aver`.
    pub fn defect_aver(&self, y: &VectorField) -> f64 {
        self.defect_aver_cells(y).iter().sum()
    }

    /// Per-cell `|(grad y^T grad y - g)(x_T)|_F`.
    pub fn defect_bary_cells(&self, y: &VectorField) -> Vec<f64> {
        (0..self.disc.space.n_cells)
            .map(|c| {
                let f: Matrix3x2<f64> = self.disc.space.deformation_gradient_at_point(y, c, [0.5, 0.5]);
                (f.transpose() * f - self.metric.center[c]).norm()
            })
            .collect()
    }

    /// `D_h^bary`, the largest barycentre defect.
    pub fn defect_bary(&self, y: &VectorField) -> f64 {
        self.defect_bary_cells(y).into_iter().fold(0.0, f64::max)
    }
}

/// Jump penalties with weights `c0 h_e^{-3}` on `E_val`, `c1 h_e^{-1}` on `E_grad`
/// and `c2 h_i^{-2}` on averaged point values.
pub fn jump_matrix(disc: &Discretization, c0: f64, c1: f64, c2: f64) -> BlockMatrix {
    let space = &disc.space;
    let nb = space.nb;
    let nqe = space.n_edge_quad();
    let mut asm = BlockAssembler::new(space.n_cells, nb);
    for e in 0..disc.topo.n_edges() {
        let (val, grad) = (disc.active.val[e], disc.active.grad[e]);
        let eq = &space.edges[e];
        let cells: Vec<usize> = eq.sides().map(|s| s.cell).collect();
        let ns = nb * cells.len();
        let h = disc.sizes.edge[e];
        if !(val || grad) {
            // keep neighbour blocks in the pattern so that all flow matrices share it
            for &a in &cells {
                for &b in &cells {
                    asm.block_mut(a, b);
                }
            }
            continue;
        }
        let mut jv = vec![0.0; nqe * ns];
        let mut jg = [vec![0.0; nqe * ns], vec![0.0; nqe * ns]];
        for (p, (sign, side)) in [(1.0, Some(&eq.minus)), (-1.0, eq.plus.as_ref())].into_iter().enumerate() {
            let Some(side) = side else { continue };
            for q in 0..nqe {
                for a in 0..nb {
                    jv[q * ns + p * nb + a] = sign * side.val[q * nb + a];
                    jg[0][q * ns + p * nb + a] = sign * side.grad[q * nb + a].x;
                    jg[1][q * ns + p * nb + a] = sign * side.grad[q * nb + a].y;
                }
            }
        }
        let weighted =
            |rows: &[f64], scale: f64| -> Vec<f64> { rows.iter().enumerate().map(|(i, v)| v * eq.w[i / ns] * scale).collect() };
        if val {
            let wv = weighted(&jv, c0 * h.powi(-3));
            asm.add_outer(&cells, &jv, &cells, &wv, nqe, 1.0);
        }
        if grad {
            for jgi in &jg {
                let wg = weighted(jgi, c1 / h);
                asm.add_outer(&cells, jgi, &cells, &wg, nqe, 1.0);
            }
        }
    }
    for p in &disc.points {
        let cells: Vec<usize> = p.cells.iter().map(|(c, _)| *c).collect();
        let k = cells.len() as f64;
        let row: Vec<f64> = p.cells.iter().flat_map(|(_, v)| v.iter().map(|x| x / k)).collect();
        asm.add_outer(&cells, &row, &cells, &row, 1, c2 * p.h.powi(-2));
    }
    for c in 0..space.n_cells {
        asm.block_mut(c, c);
    }
    asm.finish()
}

/// Cell mass matrices.
pub fn mass_matrix(disc: &Discretization) -> BlockMatrix {
    let space = &disc.space;
    let nb = space.nb;
    let mut asm = BlockAssembler::new(space.n_cells, nb);
    for c in 0..space.n_cells {
        let cq = &space.cells[c];
        let blk = asm.block_mut(c, c);
        for q in 0..space.n_quad() {
            let v = &cq.val[q * nb..(q + 1) * nb];
            for a in 0..nb {
                for b in 0..nb {
                    blk[a * nb + b] += cq.w[q] * v[a] * v[b];
                }
            }
        }
    }
    asm.finish()
}

/// `int D_h^2 v : D_h^2 w` with the broken Hessian.
pub fn broken_hessian_matrix(disc: &Discretization) -> BlockMatrix {
    let space = &disc.space;
    let nb = space.nb;
    let mut asm = BlockAssembler::new(space.n_cells, nb);
    for c in 0..space.n_cells {
        let cq = &space.cells[c];
        let blk = asm.block_mut(c, c);
        for q in 0..space.n_quad() {
            let hs = &cq.hess[q * nb..(q + 1) * nb];
            for a in 0..nb {
                for b in 0..nb {
                    blk[a * nb + b] += cq.w[q] * hs[a].component_mul(&hs[b]).sum();
                }
            }
        }
    }
    asm.finish()
}
