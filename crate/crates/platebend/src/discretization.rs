//! Mesh, labels, space and Hessian bundled for assembly.

use crate::dgspace::DgSpace;
use crate::error::Result;
use crate::hessian::HessianOperator;
use crate::mesh::{classify, ActiveEdgeSets, EdgeTopology, Mesh, MeshData, MeshSizes};

/// Basis values of the cells sharing a point-condition vertex.
#[derive(Clone, Debug)]
pub struct PointStencil {
    pub vertex: usize,
    pub h: f64,
    /// `(cell, basis values at the vertex)`.
    pub cells: Vec<(usize, Vec<f64>)>,
}

impl PointStencil {
    /// Average of the cell traces of `v` at the vertex.
    pub fn average(&self, v: &[f64], nb: usize) -> f64 {
        let s: f64 =
            self.cells.iter().map(|(c, val)| val.iter().zip(&v[c * nb..(c + 1) * nb]).map(|(a, b)| a * b).sum::<f64>()).sum();
        s / self.cells.len() as f64
    }
}

#[derive(Clone, Debug)]
pub struct Discretization {
    pub data: MeshData,
    pub topo: EdgeTopology,
    pub active: ActiveEdgeSets,
    pub sizes: MeshSizes,
    pub space: DgSpace,
    pub hessian: HessianOperator,
    pub points: Vec<PointStencil>,
}

impl Discretization {
    pub fn new(data: MeshData, degree: usize) -> Result<Discretization> {
        let topo = EdgeTopology::build(&data.mesh)?;
        let active = classify(&data.mesh, &topo, &data.labels, &data.creases)?;
        let sizes = MeshSizes::compute(&data.mesh, &topo, &active);
        let space = DgSpace::new(&data.mesh, &topo, degree)?;
        let hessian = HessianOperator::new(&space, &topo, &active);
        let points = active
            .points
            .iter()
            .zip(&sizes.point)
            .zip(&sizes.point_cells)
            .map(|((&vertex, &h), cells)| PointStencil {
                vertex,
                h,
                cells: cells.iter().map(|&(c, xi)| (c, space.eval_cell(c, xi).val)).collect(),
            })
            .collect();
        Ok(Discretization { data, topo, active, sizes, space, hessian, points })
    }

    pub fn mesh(&self) -> &Mesh {
        &self.data.mesh
    }

    /// Scalar degrees of freedom per component.
    pub fn n_dofs(&self) -> usize {
        self.space.n_dofs()
    }

    /// Whether Dirichlet, mixed or pointwise conditions are present.
    pub fn has_boundary_conditions(&self) -> bool {
        self.active.has_essential_bc() || self.active.has_point_bc()
    }
}
