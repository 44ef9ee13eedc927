//! Quadrilateral meshes, edge topology and boundary/crease classification.
//!
//! Cells are bilinear images of the unit square. Vertex `i` of a cell maps to
//! the reference corner `(0,0), (1,0), (1,1), (0,1)` in that order, so cells are
//! listed counterclockwise. Local side `s` runs from vertex `s` to vertex `s+1`.

mod generate;
mod io;

pub use generate::{ball_mesh, diamond_mesh, rectangle_mesh, refine_cells, snap_curve, structured_mesh, BallSpec};
pub use io::{format_mesh, load_mesh, parse_mesh, save_mesh};

use std::collections::{HashMap, HashSet};

use nalgebra::{Matrix2, Vector2};

use crate::error::{Error, Result};

pub type Vec2 = Vector2<f64>;

/// Reference-corner coordinates of the four cell vertices.
pub const CORNERS: [[f64; 2]; 4] = [[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]];

#[derive(Clone, Debug)]
pub struct Mesh {
    pub vertices: Vec<Vec2>,
    pub cells: Vec<[usize; 4]>,
    /// Subdomain label per cell, used for piecewise data such as spontaneous curvature.
    pub regions: Vec<u32>,
}

impl Mesh {
    /// Builds a mesh and checks that every bilinear map has positive jacobian.
    pub fn new(vertices: Vec<Vec2>, cells: Vec<[usize; 4]>) -> Result<Mesh> {
        let regions = vec![0; cells.len()];
        Mesh::with_regions(vertices, cells, regions)
    }

    pub fn with_regions(vertices: Vec<Vec2>, cells: Vec<[usize; 4]>, regions: Vec<u32>) -> Result<Mesh> {
        if regions.len() != cells.len() {
            return Err(Error::Mesh(format!("{} region labels for {} cells", regions.len(), cells.len())));
        }
        for (c, cell) in cells.iter().enumerate() {
            for &v in cell {
                if v >= vertices.len() {
                    return Err(Error::Mesh(format!("cell {c} references missing vertex {v}")));
                }
            }
        }
        let mesh = Mesh { vertices, cells, regions };
        for c in 0..mesh.cells.len() {
            // det of a bilinear map is affine in each reference variable
            let x = mesh.cell_vertices(c);
            let scale = (x[2] - x[0]).norm() * (x[3] - x[1]).norm();
            for corner in CORNERS {
                let det = jacobian(&x, corner).determinant();
                if !(det > 1e-12 * scale) {
                    return Err(Error::DegenerateCell { cell: c, det });
                }
            }
        }
        Ok(mesh)
    }

    pub fn n_cells(&self) -> usize {
        self.cells.len()
    }

    pub fn cell_vertices(&self, c: usize) -> [Vec2; 4] {
        let v = self.cells[c];
        [self.vertices[v[0]], self.vertices[v[1]], self.vertices[v[2]], self.vertices[v[3]]]
    }

    /// Physical image of the reference point `xi` in cell `c`.
    pub fn map_point(&self, c: usize, xi: [f64; 2]) -> Vec2 {
        map_bilinear(&self.cell_vertices(c), xi)
    }

    /// Diameter of cell `c`; for a convex quadrilateral the largest vertex distance.
    pub fn cell_diameter(&self, c: usize) -> f64 {
        let x = self.cell_vertices(c);
        let mut d: f64 = 0.0;
        for i in 0..4 {
            for j in i + 1..4 {
                d = d.max((x[i] - x[j]).norm());
            }
        }
        d
    }

    /// The cell barycentre of the reference square, `F_T(1/2, 1/2)`.
    pub fn cell_center(&self, c: usize) -> Vec2 {
        self.map_point(c, [0.5, 0.5])
    }

    pub fn cell_area(&self, c: usize) -> f64 {
        // exact for bilinear maps: shoelace on the vertex polygon
        let x = self.cell_vertices(c);
        let mut a = 0.0;
        for i in 0..4 {
            let (p, q) = (x[i], x[(i + 1) % 4]);
            a += p.x * q.y - q.x * p.y;
        }
        0.5 * a
    }
}

pub fn map_bilinear(x: &[Vec2; 4], xi: [f64; 2]) -> Vec2 {
    let (s, t) = (xi[0], xi[1]);
    x[0] * ((1.0 - s) * (1.0 - t)) + x[1] * (s * (1.0 - t)) + x[2] * (s * t) + x[3] * ((1.0 - s) * t)
}

/// Jacobian of the bilinear map; column `i` is the derivative in reference direction `i`.
pub fn jacobian(x: &[Vec2; 4], xi: [f64; 2]) -> Matrix2<f64> {
    let (s, t) = (xi[0], xi[1]);
    let d0 = (x[1] - x[0]) * (1.0 - t) + (x[2] - x[3]) * t;
    let d1 = (x[3] - x[0]) * (1.0 - s) + (x[2] - x[1]) * s;
    Matrix2::from_columns(&[d0, d1])
}

/// The mixed second derivative of the bilinear map (the only nonzero second derivative).
pub fn cross_derivative(x: &[Vec2; 4]) -> Vec2 {
    x[0] - x[1] + x[2] - x[3]
}

/// Reference point on local side `side` at parameter `s` (counterclockwise).
pub fn side_point(side: usize, s: f64) -> [f64; 2] {
    match side {
        0 => [s, 0.0],
        1 => [1.0, s],
        2 => [1.0 - s, 1.0],
        3 => [0.0, 1.0 - s],
        _ => unreachable!("side index {side}"),
    }
}

/// One cell's view of an edge: points at edge parameter `t` sit at side parameter
/// `s0 + t * (s1 - s0)` of local side `side`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EdgeSide {
    pub cell: usize,
    pub side: usize,
    pub s0: f64,
    pub s1: f64,
}

impl EdgeSide {
    pub fn reference_point(&self, t: f64) -> [f64; 2] {
        side_point(self.side, self.s0 + t * (self.s1 - self.s0))
    }
}

/// An edge with a fixed unit normal pointing out of the `minus` cell.
#[derive(Clone, Debug)]
pub struct Edge {
    pub vertices: [usize; 2],
    pub a: Vec2,
    pub b: Vec2,
    pub minus: EdgeSide,
    pub plus: Option<EdgeSide>,
    pub normal: Vec2,
    pub length: f64,
}

impl Edge {
    pub fn is_boundary(&self) -> bool {
        self.plus.is_none()
    }

    pub fn point(&self, t: f64) -> Vec2 {
        self.a + (self.b - self.a) * t
    }

    pub fn sides(&self) -> impl Iterator<Item = &EdgeSide> {
        std::iter::once(&self.minus).chain(self.plus.as_ref())
    }
}

#[derive(Clone, Debug)]
pub struct EdgeTopology {
    pub edges: Vec<Edge>,
    /// Edges touching each cell, in side order.
    pub cell_edges: Vec<Vec<usize>>,
    by_vertices: HashMap<(usize, usize), usize>,
}

fn key(a: usize, b: usize) -> (usize, usize) {
    (a.min(b), a.max(b))
}

impl EdgeTopology {
    /// Matches cell sides into edges. A side that contains vertices of finer
    /// neighbours in its interior is split into sub-edges (hanging nodes).
    pub fn build(mesh: &Mesh) -> Result<EdgeTopology> {
        let mut sides: HashMap<(usize, usize), Vec<(usize, usize)>> = HashMap::new();
        for (c, cell) in mesh.cells.iter().enumerate() {
            for s in 0..4 {
                sides.entry(key(cell[s], cell[(s + 1) % 4])).or_default().push((c, s));
            }
        }
        let mut edges = Vec::new();
        let mut unmatched: Vec<(usize, usize)> = Vec::new();
        let mut keys: Vec<_> = sides.keys().copied().collect();
        keys.sort_unstable();
        for k in keys {
            let list = &sides[&k];
            match list.len() {
                1 => unmatched.push(list[0]),
                2 => {
                    let (m, p) = if list[0].0 < list[1].0 { (list[0], list[1]) } else { (list[1], list[0]) };
                    if m.0 == p.0 {
                        return Err(Error::Mesh(format!("cell {} uses edge {:?} twice", m.0, k)));
                    }
                    let cell = mesh.cells[m.0];
                    let (va, vb) = (cell[m.1], cell[(m.1 + 1) % 4]);
                    let pc = mesh.cells[p.0];
                    if pc[p.1] != vb {
                        return Err(Error::Mesh(format!("cells {} and {} have inconsistent orientation", m.0, p.0)));
                    }
                    edges.push(make_edge(
                        mesh,
                        [va, vb],
                        EdgeSide { cell: m.0, side: m.1, s0: 0.0, s1: 1.0 },
                        Some(EdgeSide { cell: p.0, side: p.1, s0: 1.0, s1: 0.0 }),
                    ));
                }
                n => return Err(Error::Mesh(format!("edge {:?} shared by {n} cells", k))),
            }
        }

        // hanging interfaces: a long side whose interior holds the vertices of short sides
        let mut consumed = vec![false; unmatched.len()];
        let mut from_vertex: HashMap<usize, Vec<usize>> = HashMap::new();
        for (i, &(c, s)) in unmatched.iter().enumerate() {
            let cell = mesh.cells[c];
            from_vertex.entry(cell[s]).or_default().push(i);
            from_vertex.entry(cell[(s + 1) % 4]).or_default().push(i);
        }
        let endpoints = |i: usize| {
            let (c, s) = unmatched[i];
            let cell = mesh.cells[c];
            (cell[s], cell[(s + 1) % 4])
        };
        let mut order: Vec<usize> = (0..unmatched.len()).collect();
        // longest sides first so that coarse sides claim their sub-edges
        order.sort_by(|&i, &j| {
            let li = side_length(mesh, endpoints(i));
            let lj = side_length(mesh, endpoints(j));
            lj.partial_cmp(&li).unwrap().then(i.cmp(&j))
        });
        let mut hanging_edges = Vec::new();
        for &i in &order {
            if consumed[i] {
                continue;
            }
            let (p, q) = endpoints(i);
            let (xp, xq) = (mesh.vertices[p], mesh.vertices[q]);
            let len = (xq - xp).norm();
            let dir = (xq - xp) / len;
            // walk from p to q along collinear unmatched sides traversed in the opposite sense
            let mut chain = Vec::new();
            let mut cur = p;
            let mut ok = true;
            while cur != q {
                let next = from_vertex.get(&cur).and_then(|cands| {
                    cands.iter().copied().find(|&j| {
                        if j == i || consumed[j] {
                            return false;
                        }
                        let (a, b) = endpoints(j);
                        // fine sides run q -> p relative to the coarse cell
                        if b != cur {
                            return false;
                        }
                        let xa = mesh.vertices[a];
                        let off = xa - xp;
                        let along = off.dot(&dir);
                        let perp = (off - dir * along).norm();
                        perp <= 1e-10 * len
                            && along > (mesh.vertices[cur] - xp).dot(&dir) + 1e-12 * len
                            && along <= len * (1.0 + 1e-10)
                    })
                });
                match next {
                    Some(j) => {
                        let (a, _) = endpoints(j);
                        chain.push(j);
                        cur = a;
                    }
                    None => {
                        ok = false;
                        break;
                    }
                }
            }
            if !ok || chain.is_empty() {
                continue;
            }
            consumed[i] = true;
            let (cc, cs) = unmatched[i];
            for &j in &chain {
                consumed[j] = true;
                let (fc, fs) = unmatched[j];
                let (a, b) = endpoints(j);
                let sa = (mesh.vertices[a] - xp).dot(&dir) / len;
                let sb = (mesh.vertices[b] - xp).dot(&dir) / len;
                // fine side traverses a -> b; coarse side parameter runs p -> q
                let fine = EdgeSide { cell: fc, side: fs, s0: 0.0, s1: 1.0 };
                let coarse = EdgeSide { cell: cc, side: cs, s0: sa, s1: sb };
                let (minus, plus) = if fc < cc {
                    (fine, coarse)
                } else {
                    (EdgeSide { cell: cc, side: cs, s0: sb, s1: sa }, EdgeSide { cell: fc, side: fs, s0: 1.0, s1: 0.0 })
                };
                let verts = if fc < cc { [a, b] } else { [b, a] };
                hanging_edges.push(make_edge(mesh, verts, minus, Some(plus)));
            }
        }
        edges.extend(hanging_edges);
        for (i, &(c, s)) in unmatched.iter().enumerate() {
            if consumed[i] {
                continue;
            }
            let cell = mesh.cells[c];
            edges.push(make_edge(mesh, [cell[s], cell[(s + 1) % 4]], EdgeSide { cell: c, side: s, s0: 0.0, s1: 1.0 }, None));
        }

        let mut cell_edges = vec![Vec::new(); mesh.n_cells()];
        for (e, edge) in edges.iter().enumerate() {
            for side in edge.sides() {
                cell_edges[side.cell].push(e);
            }
        }
        for (c, list) in cell_edges.iter_mut().enumerate() {
            list.sort_by(|&e, &f| {
                let se = side_of(&edges[e], c);
                let sf = side_of(&edges[f], c);
                (se.side, se.s0.min(se.s1)).partial_cmp(&(sf.side, sf.s0.min(sf.s1))).unwrap()
            });
        }
        let by_vertices = edges.iter().enumerate().map(|(e, edge)| (key(edge.vertices[0], edge.vertices[1]), e)).collect();
        Ok(EdgeTopology { edges, cell_edges, by_vertices })
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn find(&self, a: usize, b: usize) -> Option<usize> {
        self.by_vertices.get(&key(a, b)).copied()
    }

    /// Cells sharing an edge with `c`.
    pub fn neighbours(&self, c: usize) -> Vec<usize> {
        let mut out: Vec<usize> = self.cell_edges[c]
            .iter()
            .filter_map(|&e| {
                let edge = &self.edges[e];
                edge.plus.map(|p| if p.cell == c { edge.minus.cell } else { p.cell })
            })
            .collect();
        out.sort_unstable();
        out.dedup();
        out
    }
}

/// The view of `edge` from cell `c`.
pub fn side_of(edge: &Edge, c: usize) -> &EdgeSide {
    if edge.minus.cell == c {
        &edge.minus
    } else {
        edge.plus.as_ref().filter(|p| p.cell == c).expect("cell is not adjacent to edge")
    }
}

fn side_length(mesh: &Mesh, (a, b): (usize, usize)) -> f64 {
    (mesh.vertices[b] - mesh.vertices[a]).norm()
}

fn make_edge(mesh: &Mesh, vertices: [usize; 2], minus: EdgeSide, plus: Option<EdgeSide>) -> Edge {
    let a = mesh.vertices[vertices[0]];
    let b = mesh.vertices[vertices[1]];
    let d = b - a;
    let length = d.norm();
    Edge { vertices, a, b, minus, plus, normal: Vec2::new(d.y, -d.x) / length, length }
}

/// Boundary-condition labels given as vertex pairs (edges) and vertex ids (points).
#[derive(Clone, Debug, Default)]
pub struct BoundaryLabels {
    pub dirichlet: Vec<[usize; 2]>,
    pub mixed: Vec<[usize; 2]>,
    pub points: Vec<usize>,
}

impl BoundaryLabels {
    /// Labels every boundary edge whose midpoint satisfies `on` as Dirichlet.
    pub fn dirichlet_where(topo: &EdgeTopology, on: impl Fn(Vec2) -> bool) -> Vec<[usize; 2]> {
        topo.edges.iter().filter(|e| e.is_boundary() && on(e.point(0.5))).map(|e| e.vertices).collect()
    }
}

/// Interior edges along which the deformation may fold; given as vertex pairs.
#[derive(Clone, Debug, Default)]
pub struct CreaseSet {
    pub edges: Vec<[usize; 2]>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EdgeKind {
    Interior,
    Crease,
    Dirichlet,
    Mixed,
    Free,
}

/// Per-edge classification and the sets on which value and gradient jumps act.
#[derive(Clone, Debug)]
pub struct ActiveEdgeSets {
    pub kind: Vec<EdgeKind>,
    /// `E_val`: interior, crease, Dirichlet and mixed edges.
    pub val: Vec<bool>,
    /// `E_grad`: interior non-crease and Dirichlet edges.
    pub grad: Vec<bool>,
    /// Vertices carrying pointwise conditions, deduplicated and sorted.
    pub points: Vec<usize>,
}

impl ActiveEdgeSets {
    pub fn has_essential_bc(&self) -> bool {
        self.kind.iter().any(|k| matches!(k, EdgeKind::Dirichlet | EdgeKind::Mixed))
    }

    pub fn has_point_bc(&self) -> bool {
        !self.points.is_empty()
    }

    pub fn edges_of(&self, kind: EdgeKind) -> impl Iterator<Item = usize> + '_ {
        self.kind.iter().enumerate().filter(move |(_, k)| **k == kind).map(|(e, _)| e)
    }
}

pub fn classify(mesh: &Mesh, topo: &EdgeTopology, labels: &BoundaryLabels, creases: &CreaseSet) -> Result<ActiveEdgeSets> {
    let n = topo.n_edges();
    let mut kind: Vec<EdgeKind> =
        topo.edges.iter().map(|e| if e.is_boundary() { EdgeKind::Free } else { EdgeKind::Interior }).collect();
    let lookup = |pair: [usize; 2], what: &str| {
        topo.find(pair[0], pair[1]).ok_or_else(|| Error::Mesh(format!("{what} edge {:?} is not an edge of the mesh", pair)))
    };
    for (pairs, k, what) in [(&labels.dirichlet, EdgeKind::Dirichlet, "dirichlet"), (&labels.mixed, EdgeKind::Mixed, "mixed")] {
        for &pair in pairs {
            let e = lookup(pair, what)?;
            if !topo.edges[e].is_boundary() {
                return Err(Error::Mesh(format!("{what} label on interior edge {:?}", pair)));
            }
            if kind[e] != EdgeKind::Free && kind[e] != k {
                return Err(Error::Mesh(format!("edge {:?} labelled both dirichlet and mixed", pair)));
            }
            kind[e] = k;
        }
    }
    let mut crease_degree: HashMap<usize, usize> = HashMap::new();
    for &pair in &creases.edges {
        let e = lookup(pair, "crease")?;
        if topo.edges[e].is_boundary() {
            return Err(Error::Mesh(format!("crease edge {:?} lies on the boundary", pair)));
        }
        if kind[e] == EdgeKind::Crease {
            continue;
        }
        kind[e] = EdgeKind::Crease;
        for v in pair {
            *crease_degree.entry(v).or_default() += 1;
        }
    }
    let boundary_vertices: HashSet<usize> = topo.edges.iter().filter(|e| e.is_boundary()).flat_map(|e| e.vertices).collect();
    // junctions of several creases are fine; a crease may only end on the boundary
    let mut bad: Vec<_> =
        crease_degree.iter().filter(|(v, d)| **d == 1 && !boundary_vertices.contains(v)).map(|(v, _)| *v).collect();
    bad.sort_unstable();
    if let Some(v) = bad.first() {
        return Err(Error::Mesh(format!(
            "crease ends at interior vertex {v}; creases must end on the boundary or at another crease"
        )));
    }
    let mut points = labels.points.clone();
    points.sort_unstable();
    points.dedup();
    if let Some(&v) = points.iter().find(|&&v| v >= mesh.vertices.len()) {
        return Err(Error::Mesh(format!("point condition on missing vertex {v}")));
    }
    let val = (0..n).map(|e| !matches!(kind[e], EdgeKind::Free)).collect();
    let grad = (0..n).map(|e| matches!(kind[e], EdgeKind::Interior | EdgeKind::Dirichlet)).collect();
    Ok(ActiveEdgeSets { kind, val, grad, points })
}

/// Cell diameters, edge lengths and the local sizes `h_i` at pointwise-condition vertices.
#[derive(Clone, Debug)]
pub struct MeshSizes {
    pub cell: Vec<f64>,
    pub edge: Vec<f64>,
    pub min: f64,
    pub max: f64,
    /// Mean diameter of the cells containing each point-condition vertex (same order as `ActiveEdgeSets::points`).
    pub point: Vec<f64>,
    /// Cells containing each point-condition vertex, with the reference coordinates of the vertex.
    pub point_cells: Vec<Vec<(usize, [f64; 2])>>,
}

impl MeshSizes {
    pub fn compute(mesh: &Mesh, topo: &EdgeTopology, active: &ActiveEdgeSets) -> MeshSizes {
        let cell: Vec<f64> = (0..mesh.n_cells()).map(|c| mesh.cell_diameter(c)).collect();
        let edge = topo.edges.iter().map(|e| e.length).collect();
        let min = cell.iter().copied().fold(f64::INFINITY, f64::min);
        let max = cell.iter().copied().fold(0.0, f64::max);
        let mut point = Vec::new();
        let mut point_cells = Vec::new();
        for &v in &active.points {
            let mut list = Vec::new();
            for (c, verts) in mesh.cells.iter().enumerate() {
                if let Some(i) = verts.iter().position(|&w| w == v) {
                    list.push((c, CORNERS[i]));
                }
            }
            // a hanging vertex lies inside a coarse side
            let x = mesh.vertices[v];
            for e in &topo.edges {
                for side in e.sides() {
                    if list.iter().any(|(c, _)| *c == side.cell) {
                        continue;
                    }
                    if let Some(t) = param_on_segment(e.a, e.b, x) {
                        if t > 1e-12 && t < 1.0 - 1e-12 {
                            list.push((side.cell, side.reference_point(t)));
                        }
                    }
                }
            }
            list.sort_by_key(|(c, _)| *c);
            list.dedup_by_key(|(c, _)| *c);
            let h = list.iter().map(|(c, _)| cell[*c]).sum::<f64>() / list.len() as f64;
            point.push(h);
            point_cells.push(list);
        }
        MeshSizes { cell, edge, min, max, point, point_cells }
    }
}

fn param_on_segment(a: Vec2, b: Vec2, x: Vec2) -> Option<f64> {
    let d = b - a;
    let l2 = d.norm_squared();
    let t = (x - a).dot(&d) / l2;
    let perp = (x - a - d * t).norm();
    (perp <= 1e-10 * l2.sqrt() && (0.0..=1.0).contains(&t)).then_some(t)
}

/// Everything needed to discretize on a mesh: geometry, topology and labels.
#[derive(Clone, Debug)]
pub struct MeshData {
    pub mesh: Mesh,
    pub labels: BoundaryLabels,
    pub creases: CreaseSet,
}

impl MeshData {
    /// A mesh with free boundary and no creases.
    pub fn free(mesh: Mesh) -> MeshData {
        MeshData { mesh, labels: BoundaryLabels::default(), creases: CreaseSet::default() }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_square_topology() {
        let mesh = rectangle_mesh([0.0, 1.0], [0.0, 1.0], 3, 2).unwrap();
        let topo = EdgeTopology::build(&mesh).unwrap();
        // 3*2 cells: horizontal edges 3*3, vertical 4*2
        assert_eq!(topo.n_edges(), 17);
        let n_boundary = topo.edges.iter().filter(|e| e.is_boundary()).count();
        assert_eq!(n_boundary, 10);
        for e in &topo.edges {
            let c = e.minus.cell;
            let outward = e.point(0.5) - mesh.cell_center(c);
            assert!(outward.dot(&e.normal) > 0.0);
            assert!((e.normal.norm() - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn sides_map_to_same_physical_points() {
        let mesh = structured_mesh(3, 3, |p| Vec2::new(p.x + 0.1 * p.y * p.y, p.y + 0.05 * p.x)).unwrap();
        let topo = EdgeTopology::build(&mesh).unwrap();
        for e in &topo.edges {
            for t in [0.0, 0.3, 1.0] {
                let x = e.point(t);
                for side in e.sides() {
                    let y = mesh.map_point(side.cell, side.reference_point(t));
                    assert!((x - y).norm() < 1e-14);
                }
            }
        }
    }

    #[test]
    fn inverted_cell_is_rejected() {
        let v = vec![Vec2::new(0.0, 0.0), Vec2::new(1.0, 0.0), Vec2::new(1.0, 1.0), Vec2::new(0.0, 1.0)];
        let err = Mesh::new(v, vec![[0, 3, 2, 1]]).unwrap_err();
        assert!(matches!(err, Error::DegenerateCell { cell: 0, .. }));
    }

    #[test]
    fn hanging_node_split() {
        // one coarse cell on the left, two fine cells on the right
        let v = vec![
            Vec2::new(0.0, 0.0),
            Vec2::new(1.0, 0.0),
            Vec2::new(1.0, 1.0),
            Vec2::new(0.0, 1.0),
            Vec2::new(1.0, 0.5),
            Vec2::new(1.5, 0.0),
            Vec2::new(1.5, 0.5),
            Vec2::new(1.5, 1.0),
        ];
        let cells = vec![[0, 1, 2, 3], [1, 5, 6, 4], [4, 6, 7, 2]];
        let mesh = Mesh::new(v, cells).unwrap();
        let topo = EdgeTopology::build(&mesh).unwrap();
        let interior: Vec<_> = topo.edges.iter().filter(|e| !e.is_boundary()).collect();
        assert_eq!(interior.len(), 3);
        let hanging: Vec<_> = interior.iter().filter(|e| e.minus.cell == 0 || e.plus.unwrap().cell == 0).collect();
        assert_eq!(hanging.len(), 2);
        for e in hanging {
            for t in [0.0, 0.4, 1.0] {
                let x = e.point(t);
                for side in e.sides() {
                    assert!((mesh.map_point(side.cell, side.reference_point(t)) - x).norm() < 1e-14);
                }
            }
        }
        assert_eq!(topo.neighbours(0), vec![1, 2]);
    }

    #[test]
    fn crease_and_boundary_classification() {
        let mesh = rectangle_mesh([0.0, 2.0], [0.0, 1.0], 2, 2).unwrap();
        let topo = EdgeTopology::build(&mesh).unwrap();
        // vertical crease through x = 1: vertices 1, 4, 7 on a 3x3 vertex grid
        let creases = CreaseSet { edges: vec![[1, 4], [4, 7]] };
        let labels =
            BoundaryLabels { dirichlet: BoundaryLabels::dirichlet_where(&topo, |x| x.x < 1e-12), mixed: vec![], points: vec![8] };
        let active = classify(&mesh, &topo, &labels, &creases).unwrap();
        assert_eq!(active.edges_of(EdgeKind::Crease).count(), 2);
        assert_eq!(active.edges_of(EdgeKind::Dirichlet).count(), 2);
        for e in active.edges_of(EdgeKind::Crease) {
            assert!(active.val[e] && !active.grad[e]);
        }
        let sizes = MeshSizes::compute(&mesh, &topo, &active);
        assert_eq!(sizes.point_cells[0].len(), 1);
        assert!((sizes.point[0] - 1.25f64.sqrt()).abs() < 1e-14);

        let bent = CreaseSet { edges: vec![[3, 4], [4, 7]] };
        assert!(classify(&mesh, &topo, &labels, &bent).is_ok());
        let junction = CreaseSet { edges: vec![[1, 4], [4, 7], [3, 4]] };
        assert!(classify(&mesh, &topo, &labels, &junction).is_ok());
        let dangling = CreaseSet { edges: vec![[1, 4]] };
        assert!(classify(&mesh, &topo, &labels, &dangling).is_err());
    }
}
