//! Mesh generators and the meshes shipped with the binary.

use std::f64::consts::PI;

use platebend::mesh::{
    ball_mesh, diamond_mesh, parse_mesh, rectangle_mesh, refine_cells, snap_curve, BallSpec, BoundaryLabels, CreaseSet,
    EdgeTopology, Mesh, MeshData, Vec2,
};

use crate::config::MeshSpec;
use crate::AppError;

/// Names and generator specifications of the bundled meshes.
pub const BUNDLED: [(&str, &str); 5] = [
    ("disc320", "unit disc, n = 8"),
    ("disc1280", "unit disc, n = 16"),
    ("diamond", "diamond with two creases, n = 7, m = 12"),
    ("half_sphere", "unit disc, n = 8, one boundary refinement (hanging nodes)"),
    ("starshade", "dodecagon of radius 7, n = 9, with 18 snapped creases"),
];

pub fn bundled_text(name: &str) -> Option<&'static str> {
    Some(match name {
        "disc320" => include_str!("../meshes/disc320.mesh"),
        "disc1280" => include_str!("../meshes/disc1280.mesh"),
        "diamond" => include_str!("../meshes/diamond.mesh"),
        "half_sphere" => include_str!("../meshes/half_sphere.mesh"),
        "starshade" => include_str!("../meshes/starshade.mesh"),
        _ => return None,
    })
}

pub fn bundled(name: &str) -> Result<MeshData, AppError> {
    let text = bundled_text(name).ok_or_else(|| {
        let names: Vec<&str> = BUNDLED.iter().map(|(n, _)| *n).collect();
        AppError::Config(format!("unknown bundled mesh '{name}' (available: {})", names.join(", ")))
    })?;
    Ok(parse_mesh(text, name)?)
}

/// Regenerates a bundled mesh from its generator.
pub fn generate_bundled(name: &str) -> Result<MeshData, AppError> {
    Ok(match name {
        "disc320" => MeshData::free(disc(1.0, 8, 0)?),
        "disc1280" => MeshData::free(disc(1.0, 16, 0)?),
        "diamond" => diamond_mesh(7, 12)?,
        "half_sphere" => MeshData::free(disc(1.0, 8, 1)?),
        "starshade" => starshade(9)?,
        _ => return Err(AppError::Config(format!("no generator for bundled mesh '{name}'"))),
    })
}

fn boundary_cells(mesh: &Mesh) -> Result<Vec<bool>, AppError> {
    let topo = EdgeTopology::build(mesh)?;
    let mut marked = vec![false; mesh.n_cells()];
    for e in topo.edges.iter().filter(|e| e.is_boundary()) {
        marked[e.minus.cell] = true;
    }
    Ok(marked)
}

/// Disc of the given radius; each refinement pass splits the cells along the
/// boundary and moves the new boundary vertices onto the circle.
pub fn disc(radius: f64, n: usize, refine_boundary: usize) -> Result<Mesh, AppError> {
    let mut mesh = ball_mesh(BallSpec::disc(radius, n))?;
    for _ in 0..refine_boundary {
        let marked = boundary_cells(&mesh)?;
        mesh = refine_cells(&mesh, &marked)?;
        let topo = EdgeTopology::build(&mesh)?;
        for e in topo.edges.iter().filter(|e| e.is_boundary()) {
            for v in e.vertices {
                let x = mesh.vertices[v];
                mesh.vertices[v] = x * (radius / x.norm());
            }
        }
        mesh = Mesh::with_regions(mesh.vertices, mesh.cells, mesh.regions)?;
    }
    Ok(mesh)
}

fn polar(r: f64, theta: f64) -> Vec2 {
    Vec2::new(r * theta.cos(), r * theta.sin())
}

fn cubic_bezier(p: [Vec2; 4]) -> impl Fn(f64) -> Vec2 {
    move |t| {
        let s = 1.0 - t;
        p[0] * (s * s * s) + p[1] * (3.0 * s * s * t) + p[2] * (3.0 * s * t * t) + p[3] * (t * t * t)
    }
}

/// Dodecagon of radius 7 with corners at multiples of `pi/6`, creased along
/// a hexagon of radius 0.8 and twelve cubic curves joining it to the corners.
/// Curve `i` (valley to corner `2i - 1`, mountain to corner `2i`) starts at the
/// hexagon vertex of angle `(i - 2) pi/3 - pi/72`.
pub fn starshade(n: usize) -> Result<MeshData, AppError> {
    if n % 3 != 0 {
        return Err(AppError::Config(format!("starshade mesh needs n divisible by 3, got {n}")));
    }
    let big = 7.0;
    let mesh = ball_mesh(BallSpec { radius: big, n, polygon: Some(3), rotation: -PI / 12.0 })?;
    let hexagon: Vec<Vec2> = (0..6).map(|j| polar(0.8, j as f64 * PI / 3.0 - PI / 72.0)).collect();
    let corner = |k: usize| polar(big, (k as f64 - 1.0) * PI / 6.0);
    let mut edges = Vec::new();
    let samples = 400;
    for i in 1..=6 {
        let base = (i as f64 - 1.0) * PI / 3.0;
        let start = hexagon[(i + 4) % 6];
        let valley = cubic_bezier([start, polar(3.0, base - PI / 8.0), polar(5.0, base - PI / 24.0), corner(2 * i - 1)]);
        let mountain = cubic_bezier([start, polar(3.0, base + 5.0 * PI / 72.0), polar(5.0, base + PI / 8.0), corner(2 * i)]);
        edges.extend(snap_curve(&mesh, &valley, samples));
        edges.extend(snap_curve(&mesh, &mountain, samples));
        let (a, b) = (hexagon[i - 1], hexagon[i % 6]);
        edges.extend(snap_curve(&mesh, &move |t| a + (b - a) * t, samples));
    }
    for e in &mut edges {
        e.sort_unstable();
    }
    edges.sort_unstable();
    edges.dedup();
    Ok(MeshData { mesh, labels: BoundaryLabels::default(), creases: CreaseSet { edges } })
}

pub fn build(spec: &MeshSpec, resolve: impl Fn(&std::path::Path) -> std::path::PathBuf) -> Result<MeshData, AppError> {
    Ok(match spec {
        MeshSpec::File { path } => platebend::mesh::load_mesh(resolve(path))?,
        MeshSpec::Bundled { name } => bundled(name)?,
        MeshSpec::Rectangle { x, y, n } => MeshData::free(rectangle_mesh(*x, *y, n[0], n[1])?),
        MeshSpec::Disc { radius, n, refine_boundary } => MeshData::free(disc(*radius, *n, *refine_boundary)?),
        MeshSpec::Diamond { n, m } => {
            if m % 2 != 0 {
                return Err(AppError::Config(format!("mesh.m: the diamond needs an even layer count, got {m}")));
            }
            diamond_mesh(*n, *m)?
        }
        MeshSpec::Starshade { n } => starshade(*n)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use platebend::mesh::format_mesh;

    #[test]
    fn bundled_meshes_match_their_generators() {
        for (name, _) in BUNDLED {
            let generated = format_mesh(&generate_bundled(name).unwrap());
            assert!(generated == bundled_text(name).unwrap(), "bundled mesh {name} is stale");
        }
    }

    #[test]
    fn bundled_sizes() {
        assert_eq!(bundled("disc320").unwrap().mesh.n_cells(), 320);
        assert_eq!(bundled("disc1280").unwrap().mesh.n_cells(), 1280);
        assert_eq!(bundled("diamond").unwrap().mesh.n_cells(), 462);
        assert_eq!(bundled("half_sphere").unwrap().mesh.n_cells(), 320 + 3 * 32);
    }

    #[test]
    fn refined_disc_keeps_boundary_on_circle() {
        let m = disc(1.0, 4, 2).unwrap();
        let topo = EdgeTopology::build(&m).unwrap();
        for e in topo.edges.iter().filter(|e| e.is_boundary()) {
            assert!((e.a.norm() - 1.0).abs() < 1e-14 && (e.b.norm() - 1.0).abs() < 1e-14);
        }
        // 80 cells, 16 on the boundary; then 32 boundary children are split again
        assert_eq!(m.n_cells(), 80 + 3 * 16 + 3 * 32);
    }

    #[test]
    fn starshade_corners_are_vertices() {
        let data = starshade(9).unwrap();
        for k in 1..=12 {
            let x = polar(7.0, (k as f64 - 1.0) * PI / 6.0);
            let d = data.mesh.vertices.iter().map(|v| (v - x).norm()).fold(f64::INFINITY, f64::min);
            assert!(d < 1e-12, "corner {k} at distance {d}");
        }
        assert!(data.creases.edges.len() > 60);
    }
}
