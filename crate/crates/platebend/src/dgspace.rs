//! Broken `Q_k` spaces on quadrilateral meshes with cached quadrature data.
//!
//! Each cell carries `(k+1)^2` nodal basis functions at tensor Gauss-Lobatto
//! points; basis function `i + (k+1) j` is `l_i(xi) l_j(eta)`. Vector fields
//! with three components are stored component by component, so scalar
//! operators apply to each block unchanged.

use nalgebra::{DMatrix, Matrix2, Vector3};

use crate::error::{Error, Result};
use crate::mesh::{cross_derivative, jacobian, Edge, EdgeTopology, Mesh, Vec2};
use crate::quadrature::{Rule1d, Rule2d};

/// Lagrange polynomials through the given nodes, stored by monomial coefficients.
#[derive(Clone, Debug)]
pub struct Lagrange1d {
    pub nodes: Vec<f64>,
    coeffs: Vec<Vec<f64>>,
}

impl Lagrange1d {
    pub fn new(nodes: Vec<f64>) -> Lagrange1d {
        let n = nodes.len();
        let mut coeffs = Vec::with_capacity(n);
        for i in 0..n {
            let mut c = vec![1.0];
            let mut denom = 1.0;
            for j in 0..n {
                if j == i {
                    continue;
                }
                // multiply by (x - x_j)
                let mut next = vec![0.0; c.len() + 1];
                for (p, &a) in c.iter().enumerate() {
                    next[p + 1] += a;
                    next[p] -= a * nodes[j];
                }
                c = next;
                denom *= nodes[i] - nodes[j];
            }
            coeffs.push(c.into_iter().map(|a| a / denom).collect());
        }
        Lagrange1d { nodes, coeffs }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Value, first and second derivative of polynomial `i` at `x`.
    pub fn eval(&self, i: usize, x: f64) -> [f64; 3] {
        let c = &self.coeffs[i];
        let (mut v, mut d1, mut d2) = (0.0, 0.0, 0.0);
        for &a in c.iter().rev() {
            d2 = d2 * x + 2.0 * d1;
            d1 = d1 * x + v;
            v = v * x + a;
        }
        [v, d1, d2]
    }
}

/// Physical values, gradients and Hessians of all basis functions of one cell at one point.
#[derive(Clone, Debug)]
pub struct PointBasis {
    pub val: Vec<f64>,
    pub grad: Vec<Vec2>,
    pub hess: Vec<Matrix2<f64>>,
}

/// Quadrature data of one cell; basis entries are indexed `q * nb + a`.
#[derive(Clone, Debug)]
pub struct CellQuadrature {
    pub x: Vec<Vec2>,
    /// Quadrature weight times jacobian determinant.
    pub w: Vec<f64>,
    pub val: Vec<f64>,
    pub grad: Vec<Vec2>,
    pub hess: Vec<Matrix2<f64>>,
}

/// Traces of one adjacent cell's basis on an edge, indexed `q * nb + a`.
#[derive(Clone, Debug)]
pub struct SideTrace {
    pub cell: usize,
    pub val: Vec<f64>,
    pub grad: Vec<Vec2>,
}

#[derive(Clone, Debug)]
pub struct EdgeQuadrature {
    pub x: Vec<Vec2>,
    /// Quadrature weight times edge length.
    pub w: Vec<f64>,
    pub minus: SideTrace,
    pub plus: Option<SideTrace>,
}

impl EdgeQuadrature {
    pub fn sides(&self) -> impl Iterator<Item = &SideTrace> {
        std::iter::once(&self.minus).chain(self.plus.as_ref())
    }
}

#[derive(Clone, Debug)]
pub struct DgSpace {
    pub degree: usize,
    /// Basis functions per cell.
    pub nb: usize,
    pub n_cells: usize,
    pub basis: Lagrange1d,
    pub cell_rule: Rule2d,
    pub edge_rule: Rule1d,
    pub cells: Vec<CellQuadrature>,
    pub edges: Vec<EdgeQuadrature>,
    /// Inverse of the local mass matrix of each cell.
    pub mass_inv: Vec<DMatrix<f64>>,
    vertices: Vec<[Vec2; 4]>,
}

impl DgSpace {
    /// Builds `V_h^k` with `k+2` Gauss points per direction on cells and edges.
    pub fn new(mesh: &Mesh, topo: &EdgeTopology, degree: usize) -> Result<DgSpace> {
        if degree < 1 {
            return Err(Error::InvalidParameter(format!("polynomial degree must be at least 1, got {degree}")));
        }
        let basis = Lagrange1d::new(Rule1d::gauss_lobatto(degree + 1).points);
        let edge_rule = Rule1d::gauss_legendre(degree + 2);
        let cell_rule = Rule2d::tensor(&edge_rule);
        let nb = (degree + 1) * (degree + 1);
        let vertices: Vec<[Vec2; 4]> = (0..mesh.n_cells()).map(|c| mesh.cell_vertices(c)).collect();
        let mut space = DgSpace {
            degree,
            nb,
            n_cells: mesh.n_cells(),
            basis,
            cell_rule,
            edge_rule,
            cells: Vec::new(),
            edges: Vec::new(),
            mass_inv: Vec::new(),
            vertices,
        };
        for c in 0..space.n_cells {
            let mut quad = CellQuadrature {
                x: Vec::new(),
                w: Vec::new(),
                val: Vec::with_capacity(space.cell_rule.len() * nb),
                grad: Vec::new(),
                hess: Vec::new(),
            };
            for (q, &xi) in space.cell_rule.points.iter().enumerate() {
                let det = jacobian(&space.vertices[c], xi).determinant();
                quad.x.push(space.map(c, xi));
                quad.w.push(space.cell_rule.weights[q] * det);
                let pb = space.eval_cell(c, xi);
                quad.val.extend(pb.val);
                quad.grad.extend(pb.grad);
                quad.hess.extend(pb.hess);
            }
            let mut mass = DMatrix::zeros(nb, nb);
            for q in 0..quad.w.len() {
                let v = &quad.val[q * nb..(q + 1) * nb];
                for a in 0..nb {
                    for b in 0..nb {
                        mass[(a, b)] += quad.w[q] * v[a] * v[b];
                    }
                }
            }
            let inv = mass.cholesky().map(|ch| ch.inverse()).ok_or(Error::DegenerateCell { cell: c, det: 0.0 })?;
            space.mass_inv.push(inv);
            space.cells.push(quad);
        }
        space.edges = topo.edges.iter().map(|e| space.edge_quadrature(e)).collect();
        Ok(space)
    }

    fn edge_quadrature(&self, e: &Edge) -> EdgeQuadrature {
        let rule = &self.edge_rule;
        let x = rule.points.iter().map(|&t| e.point(t)).collect();
        let w = rule.weights.iter().map(|&w| w * e.length).collect();
        let trace = |side: &crate::mesh::EdgeSide| {
            let mut val = Vec::new();
            let mut grad = Vec::new();
            for &t in &rule.points {
                let pb = self.eval_cell(side.cell, side.reference_point(t));
                val.extend(pb.val);
                grad.extend(pb.grad);
            }
            SideTrace { cell: side.cell, val, grad }
        };
        EdgeQuadrature { x, w, minus: trace(&e.minus), plus: e.plus.as_ref().map(trace) }
    }

    /// Scalar degrees of freedom.
    pub fn n_dofs(&self) -> usize {
        self.n_cells * self.nb
    }

    pub fn n_quad(&self) -> usize {
        self.cell_rule.len()
    }

    pub fn n_edge_quad(&self) -> usize {
        self.edge_rule.len()
    }

    pub fn map(&self, c: usize, xi: [f64; 2]) -> Vec2 {
        crate::mesh::map_bilinear(&self.vertices[c], xi)
    }

    /// Reference coordinates of the nodal points of a cell.
    pub fn node(&self, a: usize) -> [f64; 2] {
        let n = self.degree + 1;
        [self.basis.nodes[a % n], self.basis.nodes[a / n]]
    }

    /// Physical basis values, gradients and Hessians at reference point `xi` of cell `c`.
    pub fn eval_cell(&self, c: usize, xi: [f64; 2]) -> PointBasis {
        let n = self.degree + 1;
        let x = &self.vertices[c];
        let jac = jacobian(x, xi);
        let jinv = jac.try_inverse().expect("cell jacobian is singular");
        let cross = cross_derivative(x);
        let lx: Vec<[f64; 3]> = (0..n).map(|i| self.basis.eval(i, xi[0])).collect();
        let ly: Vec<[f64; 3]> = (0..n).map(|i| self.basis.eval(i, xi[1])).collect();
        let mut out = PointBasis { val: Vec::with_capacity(self.nb), grad: Vec::new(), hess: Vec::new() };
        for j in 0..n {
            for i in 0..n {
                let (a, b) = (lx[i], ly[j]);
                out.val.push(a[0] * b[0]);
                let gref = Vec2::new(a[1] * b[0], a[0] * b[1]);
                let grad = jinv.transpose() * gref;
                // second derivatives of the map: only d^2F/dxi deta = cross is nonzero
                let c01 = a[1] * b[1] - grad.dot(&cross);
                let href = Matrix2::new(a[2] * b[0], c01, c01, a[0] * b[2]);
                out.grad.push(grad);
                out.hess.push(jinv.transpose() * href * jinv);
            }
        }
        out
    }

    /// Nodal interpolant of a scalar function.
    pub fn interpolate(&self, f: impl Fn(Vec2) -> f64) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.n_dofs());
        for c in 0..self.n_cells {
            for a in 0..self.nb {
                out.push(f(self.map(c, self.node(a))));
            }
        }
        out
    }

    /// Nodal interpolant of a vector-valued function.
    pub fn interpolate_vector(&self, f: impl Fn(Vec2) -> Vector3<f64>) -> VectorField {
        let n = self.n_dofs();
        let mut y = VectorField::zeros(n);
        for c in 0..self.n_cells {
            for a in 0..self.nb {
                let v = f(self.map(c, self.node(a)));
                for m in 0..3 {
                    y.data[m * n + c * self.nb + a] = v[m];
                }
            }
        }
        y
    }

    /// Cell-local coefficients of a scalar field.
    pub fn local<'a>(&self, v: &'a [f64], c: usize) -> &'a [f64] {
        &v[c * self.nb..(c + 1) * self.nb]
    }

    /// Value and gradient of a scalar field at cell quadrature point `q`.
    pub fn value_grad_at(&self, v: &[f64], c: usize, q: usize) -> (f64, Vec2) {
        let cq = &self.cells[c];
        let loc = self.local(v, c);
        let mut val = 0.0;
        let mut grad = Vec2::zeros();
        for a in 0..self.nb {
            val += cq.val[q * self.nb + a] * loc[a];
            grad += cq.grad[q * self.nb + a] * loc[a];
        }
        (val, grad)
    }

    /// Deformation gradient `grad y` (3x2, rows are components) at cell quadrature point `q`.
    pub fn deformation_gradient(&self, y: &VectorField, c: usize, q: usize) -> nalgebra::Matrix3x2<f64> {
        let mut f = nalgebra::Matrix3x2::zeros();
        for m in 0..3 {
            let (_, g) = self.value_grad_at(y.component(m), c, q);
            f[(m, 0)] = g.x;
            f[(m, 1)] = g.y;
        }
        f
    }

    /// Deformation gradient at an arbitrary reference point.
    pub fn deformation_gradient_at_point(&self, y: &VectorField, c: usize, xi: [f64; 2]) -> nalgebra::Matrix3x2<f64> {
        let pb = self.eval_cell(c, xi);
        let mut f = nalgebra::Matrix3x2::zeros();
        for m in 0..3 {
            let loc = self.local(y.component(m), c);
            for a in 0..self.nb {
                f[(m, 0)] += pb.grad[a].x * loc[a];
                f[(m, 1)] += pb.grad[a].y * loc[a];
            }
        }
        f
    }

    /// Evaluate a scalar field at a reference point of a cell.
    pub fn eval_scalar(&self, v: &[f64], c: usize, xi: [f64; 2]) -> (f64, Vec2, Matrix2<f64>) {
        let pb = self.eval_cell(c, xi);
        let loc = self.local(v, c);
        let mut out = (0.0, Vec2::zeros(), Matrix2::zeros());
        for a in 0..self.nb {
            out.0 += pb.val[a] * loc[a];
            out.1 += pb.grad[a] * loc[a];
            out.2 += pb.hess[a] * loc[a];
        }
        out
    }

    /// Jump `v- - v+` and average of a scalar field and its gradient at edge point `q`.
    /// On boundary edges both equal the trace.
    pub fn jump_avg(&self, v: &[f64], e: usize, q: usize) -> JumpAvg {
        let eq = &self.edges[e];
        let side_values = |s: &SideTrace| {
            let loc = self.local(v, s.cell);
            let mut val = 0.0;
            let mut grad = Vec2::zeros();
            for a in 0..self.nb {
                val += s.val[q * self.nb + a] * loc[a];
                grad += s.grad[q * self.nb + a] * loc[a];
            }
            (val, grad)
        };
        let (vm, gm) = side_values(&eq.minus);
        match &eq.plus {
            None => JumpAvg { jump: vm, avg: vm, grad_jump: gm, grad_avg: gm },
            Some(p) => {
                let (vp, gp) = side_values(p);
                JumpAvg { jump: vm - vp, avg: 0.5 * (vm + vp), grad_jump: gm - gp, grad_avg: (gm + gp) * 0.5 }
            }
        }
    }

    /// L2 norm of a scalar field.
    pub fn l2_norm(&self, v: &[f64]) -> f64 {
        let mut s = 0.0;
        for c in 0..self.n_cells {
            for q in 0..self.n_quad() {
                let (val, _) = self.value_grad_at(v, c, q);
                s += self.cells[c].w[q] * val * val;
            }
        }
        s.sqrt()
    }
}

#[derive(Clone, Copy, Debug)]
pub struct JumpAvg {
    pub jump: f64,
    pub avg: f64,
    pub grad_jump: Vec2,
    pub grad_avg: Vec2,
}

/// A deformation `y: Omega -> R^3` stored component by component.
#[derive(Clone, Debug, PartialEq)]
pub struct VectorField {
    /// Scalar degrees of freedom per component.
    pub n: usize,
    pub data: Vec<f64>,
}

impl VectorField {
    pub fn zeros(n: usize) -> VectorField {
        VectorField { n, data: vec![0.0; 3 * n] }
    }

    pub fn from_components(c: [Vec<f64>; 3]) -> VectorField {
        let n = c[0].len();
        assert!(c[1].len() == n && c[2].len() == n);
        let mut data = Vec::with_capacity(3 * n);
        for comp in c {
            data.extend(comp);
        }
        VectorField { n, data }
    }

    pub fn component(&self, m: usize) -> &[f64] {
        &self.data[m * self.n..(m + 1) * self.n]
    }

    pub fn component_mut(&mut self, m: usize) -> &mut [f64] {
        &mut self.data[m * self.n..(m + 1) * self.n]
    }

    /// `self + a * other`.
    pub fn axpy(&self, a: f64, other: &VectorField) -> VectorField {
        VectorField { n: self.n, data: self.data.iter().zip(&other.data).map(|(x, y)| x + a * y).collect() }
    }

    pub fn sub(&self, other: &VectorField) -> VectorField {
        self.axpy(-1.0, other)
    }

    pub fn max_abs_diff(&self, other: &VectorField) -> f64 {
        self.data.iter().zip(&other.data).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{rectangle_mesh, structured_mesh};

    fn space_on(mesh: &Mesh, k: usize) -> DgSpace {
        let topo = EdgeTopology::build(mesh).unwrap();
        DgSpace::new(mesh, &topo, k).unwrap()
    }

    #[test]
    fn lagrange_is_nodal() {
        let b = Lagrange1d::new(Rule1d::gauss_lobatto(4).points);
        for i in 0..4 {
            for j in 0..4 {
                let v = b.eval(i, b.nodes[j])[0];
                assert!((v - if i == j { 1.0 } else { 0.0 }).abs() < 1e-13);
            }
        }
        // derivative of a partition of unity vanishes
        let x = 0.37;
        let d: f64 = (0..4).map(|i| b.eval(i, x)[1]).sum();
        let d2: f64 = (0..4).map(|i| b.eval(i, x)[2]).sum();
        assert!(d.abs() < 1e-12 && d2.abs() < 1e-11);
    }

    #[test]
    fn degree_zero_rejected() {
        let mesh = rectangle_mesh([0.0, 1.0], [0.0, 1.0], 1, 1).unwrap();
        let topo = EdgeTopology::build(&mesh).unwrap();
        assert!(DgSpace::new(&mesh, &topo, 0).is_err());
    }

    #[test]
    fn dof_count() {
        let mesh = rectangle_mesh([0.0, 1.0], [0.0, 1.0], 4, 3).unwrap();
        let space = space_on(&mesh, 2);
        assert_eq!(space.n_dofs(), 12 * 9);
        assert_eq!(space.n_quad(), 16);
        assert_eq!(space.n_edge_quad(), 4);
    }

    #[test]
    fn quadratic_hessian_on_distorted_cells() {
        // P2 functions are reproduced by Q2 on bilinear cells, including their Hessian
        let mesh = structured_mesh(3, 2, |p| Vec2::new(p.x + 0.15 * p.y * (1.0 - p.x), p.y + 0.1 * p.x * p.x)).unwrap();
        let space = space_on(&mesh, 2);
        let f = |x: Vec2| 1.0 + 2.0 * x.x - x.y + 0.5 * x.x * x.x + 3.0 * x.x * x.y - 2.0 * x.y * x.y;
        let v = space.interpolate(f);
        for c in 0..space.n_cells {
            for xi in [[0.2, 0.7], [0.9, 0.1]] {
                let (val, grad, hess) = space.eval_scalar(&v, c, xi);
                let x = space.map(c, xi);
                assert!((val - f(x)).abs() < 1e-12);
                let g = Vec2::new(2.0 + x.x + 3.0 * x.y, -1.0 + 3.0 * x.x - 4.0 * x.y);
                assert!((grad - g).norm() < 1e-11);
                assert!((hess - Matrix2::new(1.0, 3.0, 3.0, -4.0)).norm() < 1e-10);
            }
        }
    }

    #[test]
    fn jumps_vanish_for_continuous_interpolant() {
        let mesh = structured_mesh(3, 3, |p| Vec2::new(p.x + 0.1 * p.y, p.y)).unwrap();
        let space = space_on(&mesh, 2);
        let topo = EdgeTopology::build(&mesh).unwrap();
        let v = space.interpolate(|x| x.x * x.x - x.x * x.y + 0.3);
        for (e, edge) in topo.edges.iter().enumerate() {
            for q in 0..space.n_edge_quad() {
                let j = space.jump_avg(&v, e, q);
                if edge.is_boundary() {
                    assert_eq!(j.jump, j.avg);
                } else {
                    assert!(j.jump.abs() < 1e-13 && j.grad_jump.norm() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn area_from_quadrature() {
        let mesh = structured_mesh(2, 2, |p| Vec2::new(2.0 * p.x + 0.3 * p.y * p.y, p.y)).unwrap();
        let space = space_on(&mesh, 2);
        let area: f64 = space.cells.iter().flat_map(|c| c.w.iter()).sum();
        let exact: f64 = (0..mesh.n_cells()).map(|c| mesh.cell_area(c)).sum();
        assert!((area - exact).abs() < 1e-13);
    }
}
