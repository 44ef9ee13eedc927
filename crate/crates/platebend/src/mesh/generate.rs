//! Structured and multi-block mesh generators.

use std::collections::HashMap;
use std::f64::consts::{FRAC_1_SQRT_2, PI};

use super::{BoundaryLabels, CreaseSet, Mesh, MeshData, Vec2};
use crate::error::Result;

/// Accumulates blocks of structured cells and merges coincident vertices.
struct BlockMesher {
    vertices: Vec<Vec2>,
    cells: Vec<[usize; 4]>,
    regions: Vec<u32>,
    lookup: HashMap<(i64, i64), Vec<usize>>,
    tol: f64,
}

impl BlockMesher {
    fn new(tol: f64) -> BlockMesher {
        BlockMesher { vertices: Vec::new(), cells: Vec::new(), regions: Vec::new(), lookup: HashMap::new(), tol }
    }

    fn vertex(&mut self, x: Vec2) -> usize {
        let kx = (x.x / self.tol).floor() as i64;
        let ky = (x.y / self.tol).floor() as i64;
        for dx in -1..=1 {
            for dy in -1..=1 {
                if let Some(list) = self.lookup.get(&(kx + dx, ky + dy)) {
                    for &v in list {
                        if (self.vertices[v] - x).norm() < self.tol {
                            return v;
                        }
                    }
                }
            }
        }
        let v = self.vertices.len();
        self.vertices.push(x);
        self.lookup.entry((kx, ky)).or_default().push(v);
        v
    }

    /// Adds an `n0 x n1` block; returns the grid of vertex ids indexed `[i + (n0+1) j]`.
    fn block(&mut self, n0: usize, n1: usize, region: u32, map: impl Fn(f64, f64) -> Vec2) -> Vec<usize> {
        let mut ids = Vec::with_capacity((n0 + 1) * (n1 + 1));
        for j in 0..=n1 {
            for i in 0..=n0 {
                let x = map(i as f64 / n0 as f64, j as f64 / n1 as f64);
                ids.push(self.vertex(x));
            }
        }
        let w = n0 + 1;
        for j in 0..n1 {
            for i in 0..n0 {
                let mut cell = [ids[i + w * j], ids[i + 1 + w * j], ids[i + 1 + w * (j + 1)], ids[i + w * (j + 1)]];
                if signed_area(&self.vertices, &cell) < 0.0 {
                    cell = [cell[0], cell[3], cell[2], cell[1]];
                }
                self.cells.push(cell);
                self.regions.push(region);
            }
        }
        ids
    }

    fn finish(self) -> Result<Mesh> {
        Mesh::with_regions(self.vertices, self.cells, self.regions)
    }
}

fn signed_area(v: &[Vec2], cell: &[usize; 4]) -> f64 {
    let mut a = 0.0;
    for i in 0..4 {
        let (p, q) = (v[cell[i]], v[cell[(i + 1) % 4]]);
        a += p.x * q.y - q.x * p.y;
    }
    0.5 * a
}

/// Transfinite interpolation of four boundary curves traversed as a loop
/// `c0: P0 -> P1, c1: P1 -> P2, c2: P2 -> P3, c3: P3 -> P0`.
fn coons<'a>(curves: [&'a dyn Fn(f64) -> Vec2; 4]) -> impl Fn(f64, f64) -> Vec2 + 'a {
    move |s, t| {
        let p00 = curves[0](0.0);
        let p10 = curves[1](0.0);
        let p11 = curves[2](0.0);
        let p01 = curves[3](0.0);
        let bottom = curves[0](s);
        let right = curves[1](t);
        let top = curves[2](1.0 - s);
        let left = curves[3](1.0 - t);
        bottom * (1.0 - t) + top * t + left * (1.0 - s) + right * s
            - (p00 * ((1.0 - s) * (1.0 - t)) + p10 * (s * (1.0 - t)) + p11 * (s * t) + p01 * ((1.0 - s) * t))
    }
}

fn segment(a: Vec2, b: Vec2) -> impl Fn(f64) -> Vec2 {
    move |t| a + (b - a) * t
}

/// Uniform `nx x ny` grid on the unit square, mapped through `map`.
pub fn structured_mesh(nx: usize, ny: usize, map: impl Fn(Vec2) -> Vec2) -> Result<Mesh> {
    let mut m = BlockMesher::new(1e-12);
    let mut vertices = Vec::new();
    for j in 0..=ny {
        for i in 0..=nx {
            vertices.push(map(Vec2::new(i as f64 / nx as f64, j as f64 / ny as f64)));
        }
    }
    let w = nx + 1;
    for j in 0..ny {
        for i in 0..nx {
            m.cells.push([i + w * j, i + 1 + w * j, i + 1 + w * (j + 1), i + w * (j + 1)]);
            m.regions.push(0);
        }
    }
    m.vertices = vertices;
    m.finish()
}

/// Axis-aligned `nx x ny` grid on `[x0, x1] x [y0, y1]`; vertex `(i, j)` has id `i + (nx+1) j`.
pub fn rectangle_mesh(x: [f64; 2], y: [f64; 2], nx: usize, ny: usize) -> Result<Mesh> {
    structured_mesh(nx, ny, |p| Vec2::new(x[0] + (x[1] - x[0]) * p.x, y[0] + (y[1] - y[0]) * p.y))
}

/// A disc made of a central square and four curved patches, each split into `n x n` cells.
///
/// With `polygon = Some(m)` every quarter of the boundary is a polygon with `m`
/// straight sides instead of a circular arc; `n` must then be a multiple of `m`.
#[derive(Clone, Copy, Debug)]
pub struct BallSpec {
    pub radius: f64,
    pub n: usize,
    pub polygon: Option<usize>,
    pub rotation: f64,
}

impl BallSpec {
    pub fn disc(radius: f64, n: usize) -> BallSpec {
        BallSpec { radius, n, polygon: None, rotation: 0.0 }
    }
}

pub fn ball_mesh(spec: BallSpec) -> Result<Mesh> {
    let BallSpec { radius: r, n, polygon, rotation } = spec;
    let a = 1.0 / (1.0 + 2f64.sqrt());
    let w = r * a * FRAC_1_SQRT_2;
    let mut m = BlockMesher::new(1e-10 * r);
    let (cr, sr) = (rotation.cos(), rotation.sin());
    let rot = move |p: Vec2| Vec2::new(cr * p.x - sr * p.y, sr * p.x + cr * p.y);
    m.block(n, n, 0, |s, t| rot(Vec2::new(-w + 2.0 * w * s, -w + 2.0 * w * t)));
    let outer = move |theta0: f64, s: f64| -> Vec2 {
        match polygon {
            None => {
                let th = theta0 + 0.5 * PI * s;
                Vec2::new(th.cos(), th.sin()) * r
            }
            Some(k) => {
                let u = s * k as f64;
                let i = (u.floor() as usize).min(k - 1);
                let f = u - i as f64;
                let th0 = theta0 + 0.5 * PI * i as f64 / k as f64;
                let th1 = theta0 + 0.5 * PI * (i + 1) as f64 / k as f64;
                (Vec2::new(th0.cos(), th0.sin()) * (1.0 - f) + Vec2::new(th1.cos(), th1.sin()) * f) * r
            }
        }
    };
    // inner square corners counterclockwise from (-w, -w)
    let corners = [Vec2::new(-w, -w), Vec2::new(w, -w), Vec2::new(w, w), Vec2::new(-w, w)];
    for q in 0..4 {
        let p0 = corners[q];
        let p1 = corners[(q + 1) % 4];
        let theta0 = -0.75 * PI + 0.5 * PI * q as f64;
        m.block(n, n, 0, |s, t| {
            let inner = p0 + (p1 - p0) * s;
            rot(inner * (1.0 - t) + outer(theta0, s) * t)
        });
    }
    m.finish()
}

/// Left crease of the diamond in square coordinates: `(u, v)` for `s` in `[-1, 1]`.
fn crease_left(s: f64) -> Vec2 {
    let q = 0.25 * (1.0 + s * s);
    Vec2::new(s - q, s + q)
}

/// The square `(-1.5, 1.5)^2` rotated by 45 degrees, fitted to two parabolic
/// creases that split it into two corner regions (labels 1 and 3) and a middle
/// region (label 2). Each corner region is three `n x n` blocks and the middle
/// region one `2n x m` block, `m` even.
pub fn diamond_mesh(n: usize, m: usize) -> Result<MeshData> {
    assert!(m % 2 == 0, "middle block needs an even number of layers");
    let rotate = |p: Vec2| Vec2::new((p.x - p.y) * FRAC_1_SQRT_2, (p.x + p.y) * FRAC_1_SQRT_2);
    let mut mesher = BlockMesher::new(1e-10);

    let corner_region = |mesher: &mut BlockMesher, sign: f64, region: u32| {
        let f = |p: Vec2| rotate(p * sign);
        let c = Vec2::new(-1.5, 1.5);
        let p = crease_left(-1.0);
        let q = crease_left(1.0);
        let mid_pq = crease_left(0.0);
        let mid_cp = (c + p) * 0.5;
        let mid_qc = (q + c) * 0.5;
        let o = (mid_cp + mid_qc + mid_pq) / 3.0;
        let crease_lo = |t: f64| crease_left(-1.0 + t);
        let crease_hi = |t: f64| crease_left(t);
        let b1 = [segment(c, mid_cp), segment(mid_cp, o), segment(o, mid_qc), segment(mid_qc, c)];
        mesher.block(n, n, region, |s, t| f(coons([&b1[0], &b1[1], &b1[2], &b1[3]])(s, t)));
        let (s1, s2, s3) = (segment(mid_pq, o), segment(o, mid_cp), segment(mid_cp, p));
        mesher.block(n, n, region, |s, t| f(coons([&crease_lo, &s1, &s2, &s3])(s, t)));
        let (r0, r1, r2) = (segment(q, mid_qc), segment(mid_qc, o), segment(o, mid_pq));
        let crease_back = |t: f64| crease_hi(t);
        mesher.block(n, n, region, |s, t| f(coons([&r0, &r1, &r2, &crease_back])(s, t)));
    };
    corner_region(&mut mesher, 1.0, 1);
    corner_region(&mut mesher, -1.0, 3);

    let p = crease_left(-1.0);
    let q = crease_left(1.0);
    let (x3, x1) = (Vec2::new(1.5, 1.5), Vec2::new(-1.5, -1.5));
    let (z2, z1) = (-p, -q);
    let c0 = |t: f64| crease_left(-1.0 + 2.0 * t);
    let c1 = move |t: f64| if t <= 0.5 { q + (x3 - q) * (2.0 * t) } else { x3 + (z2 - x3) * (2.0 * t - 1.0) };
    // right crease from z2 to z1 is the reflection of the left crease from P to Q
    let c2 = |t: f64| -crease_left(-1.0 + 2.0 * t);
    let c3 = move |t: f64| if t <= 0.5 { z1 + (x1 - z1) * (2.0 * t) } else { x1 + (p - x1) * (2.0 * t - 1.0) };
    let patch = coons([&c0, &c1, &c2, &c3]);
    let ids = mesher.block(2 * n, m, 2, |s, t| rotate(patch(s, t)));

    let w = 2 * n + 1;
    let mut creases = Vec::new();
    for i in 0..2 * n {
        creases.push([ids[i], ids[i + 1]]);
        creases.push([ids[i + w * m], ids[i + 1 + w * m]]);
    }
    let mesh = mesher.finish()?;
    Ok(MeshData { mesh, labels: BoundaryLabels::default(), creases: CreaseSet { edges: creases } })
}

/// Splits every marked cell into four. Unmarked neighbours keep their sides,
/// which leaves hanging nodes on the shared edges.
pub fn refine_cells(mesh: &Mesh, marked: &[bool]) -> Result<Mesh> {
    let mut vertices = mesh.vertices.clone();
    let mut cells = Vec::new();
    let mut regions = Vec::new();
    let mut mids: HashMap<(usize, usize), usize> = HashMap::new();
    let mut mid = |vertices: &mut Vec<Vec2>, a: usize, b: usize| {
        *mids.entry((a.min(b), a.max(b))).or_insert_with(|| {
            vertices.push((vertices[a] + vertices[b]) * 0.5);
            vertices.len() - 1
        })
    };
    for (c, cell) in mesh.cells.iter().enumerate() {
        if !marked[c] {
            cells.push(*cell);
            regions.push(mesh.regions[c]);
            continue;
        }
        let m: Vec<usize> = (0..4).map(|s| mid(&mut vertices, cell[s], cell[(s + 1) % 4])).collect();
        vertices.push(mesh.map_point(c, [0.5, 0.5]));
        let o = vertices.len() - 1;
        for child in [[cell[0], m[0], o, m[3]], [m[0], cell[1], m[1], o], [o, m[1], cell[2], m[2]], [m[3], o, m[2], cell[3]]] {
            cells.push(child);
            regions.push(mesh.regions[c]);
        }
    }
    Mesh::with_regions(vertices, cells, regions)
}

/// Mesh edges approximating the curve `curve: [0, 1] -> R^2`.
///
/// Returns the cheapest edge path between the vertices nearest to the curve
/// end points, where an edge costs its length plus a penalty growing with the
/// distance of its midpoint from the curve.
pub fn snap_curve(mesh: &Mesh, curve: &dyn Fn(f64) -> Vec2, samples: usize) -> Vec<[usize; 2]> {
    use std::cmp::Reverse;
    use std::collections::BinaryHeap;

    let pts: Vec<Vec2> = (0..=samples).map(|i| curve(i as f64 / samples as f64)).collect();
    let dist = |x: Vec2| {
        pts.windows(2)
            .map(|w| {
                let d = w[1] - w[0];
                let t = ((x - w[0]).dot(&d) / d.norm_squared().max(f64::MIN_POSITIVE)).clamp(0.0, 1.0);
                (x - (w[0] + d * t)).norm()
            })
            .fold(f64::INFINITY, f64::min)
    };
    let nearest = |x: Vec2| {
        (0..mesh.vertices.len()).min_by(|&a, &b| (mesh.vertices[a] - x).norm().total_cmp(&(mesh.vertices[b] - x).norm())).unwrap()
    };
    let mut adj: Vec<Vec<(usize, f64)>> = vec![Vec::new(); mesh.vertices.len()];
    let mut seen = std::collections::HashSet::new();
    for cell in &mesh.cells {
        for s in 0..4 {
            let (a, b) = (cell[s], cell[(s + 1) % 4]);
            if !seen.insert((a.min(b), a.max(b))) {
                continue;
            }
            let (xa, xb) = (mesh.vertices[a], mesh.vertices[b]);
            let len = (xb - xa).norm();
            let off = dist((xa + xb) * 0.5) / len;
            let w = len * (1.0 + 50.0 * off * off);
            adj[a].push((b, w));
            adj[b].push((a, w));
        }
    }
    let (src, dst) = (nearest(pts[0]), nearest(pts[samples]));
    let mut cost = vec![f64::INFINITY; mesh.vertices.len()];
    let mut prev = vec![usize::MAX; mesh.vertices.len()];
    let mut heap = BinaryHeap::new();
    cost[src] = 0.0;
    // nonnegative floats order like their bit patterns
    heap.push(Reverse((0f64.to_bits(), src)));
    while let Some(Reverse((bits, v))) = heap.pop() {
        let cv = f64::from_bits(bits);
        if v == dst {
            break;
        }
        if cv > cost[v] {
            continue;
        }
        for &(u, w) in &adj[v] {
            if cv + w < cost[u] {
                cost[u] = cv + w;
                prev[u] = v;
                heap.push(Reverse(((cv + w).to_bits(), u)));
            }
        }
    }
    let mut path = Vec::new();
    let mut v = dst;
    while v != src && prev[v] != usize::MAX {
        path.push([prev[v], v]);
        v = prev[v];
    }
    path.reverse();
    path
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{classify, EdgeKind, EdgeTopology};

    #[test]
    fn disc_cell_counts() {
        assert_eq!(ball_mesh(BallSpec::disc(1.0, 8)).unwrap().n_cells(), 320);
        assert_eq!(ball_mesh(BallSpec::disc(1.0, 16)).unwrap().n_cells(), 1280);
    }

    #[test]
    fn disc_boundary_on_circle() {
        let mesh = ball_mesh(BallSpec::disc(2.0, 4)).unwrap();
        let topo = EdgeTopology::build(&mesh).unwrap();
        let boundary: Vec<_> = topo.edges.iter().filter(|e| e.is_boundary()).collect();
        assert_eq!(boundary.len(), 16);
        for e in boundary {
            assert!((e.a.norm() - 2.0).abs() < 1e-12);
        }
        let area: f64 = (0..mesh.n_cells()).map(|c| mesh.cell_area(c)).sum();
        let polygon = 0.5 * 16.0 * 4.0 * (2.0 * PI / 16.0).sin();
        assert!((area - polygon).abs() < 1e-12);
    }

    #[test]
    fn dodecagon_corners() {
        let spec = BallSpec { radius: 7.0, n: 3, polygon: Some(3), rotation: -PI / 12.0 };
        let mesh = ball_mesh(spec).unwrap();
        for i in 0..12 {
            let th = i as f64 * PI / 6.0;
            let x = Vec2::new(th.cos(), th.sin()) * 7.0;
            assert!(mesh.vertices.iter().any(|v| (v - x).norm() < 1e-10), "corner {i}");
        }
    }

    #[test]
    fn diamond_fits_creases() {
        let data = diamond_mesh(7, 12).unwrap();
        let mesh = &data.mesh;
        assert_eq!(mesh.n_cells(), 6 * 49 + 14 * 12);
        let topo = EdgeTopology::build(mesh).unwrap();
        let active = classify(mesh, &topo, &data.labels, &data.creases).unwrap();
        assert_eq!(active.edges_of(EdgeKind::Crease).count(), 28);
        for e in active.edges_of(EdgeKind::Crease) {
            let x = topo.edges[e].a;
            let on_crease = (x.x.abs() - (1.0 + 0.5 * x.y * x.y) / (2.0 * 2f64.sqrt())).abs();
            assert!(on_crease < 1e-12);
        }
        let area: f64 = (0..mesh.n_cells()).map(|c| mesh.cell_area(c)).sum();
        // the creases are parabolas approximated by chords, so only the square area is exact
        assert!((area - 9.0).abs() < 1e-12, "area {area}");
        for c in 0..mesh.n_cells() {
            let x = mesh.cell_center(c);
            let inside = x.x.abs() < (1.0 + 0.5 * x.y * x.y) / (2.0 * 2f64.sqrt());
            assert_eq!(mesh.regions[c] == 2, inside, "cell {c}");
        }
    }

    #[test]
    fn refinement_leaves_hanging_nodes() {
        let mesh = rectangle_mesh([0.0, 1.0], [0.0, 1.0], 2, 2).unwrap();
        let fine = refine_cells(&mesh, &[true, false, false, false]).unwrap();
        assert_eq!(fine.n_cells(), 7);
        let area: f64 = (0..fine.n_cells()).map(|c| fine.cell_area(c)).sum();
        assert!((area - 1.0).abs() < 1e-14);
        let topo = EdgeTopology::build(&fine).unwrap();
        let interior = topo.edges.iter().filter(|e| !e.is_boundary()).count();
        // 4 inside the refined cell, 2 + 2 sub-edges on its hanging sides, 2 coarse
        assert_eq!(interior, 10);
    }

    #[test]
    fn snapped_curve_follows_grid_line() {
        let mesh = rectangle_mesh([0.0, 1.0], [0.0, 1.0], 4, 4).unwrap();
        let path = snap_curve(&mesh, &|t| Vec2::new(0.5, 0.02 + 0.96 * t), 50);
        assert_eq!(path.len(), 4);
        for [a, b] in path {
            assert!((mesh.vertices[a].x - 0.5).abs() < 1e-14 && (mesh.vertices[b].x - 0.5).abs() < 1e-14);
        }
    }
}
