//! Plain-text mesh format.
//!
//! ```text
//! platebend-mesh v1
//! vertices N
//! x y            (N lines)
//! cells M
//! a b c d        (M lines, counterclockwise vertex ids)
//! dirichlet_edges K | mixed_edges K | crease_edges K
//! a b            (K lines)
//! point_bc K
//! v              (K lines)
//! regions M
//! r              (M lines, optional subdomain label per cell)
//! ```
//!
//! Blank lines and text after `#` are ignored. The count after a section
//! name may be omitted, in which case the section runs until the next name.

use std::fmt::Write as _;
use std::path::Path;

use super::{BoundaryLabels, CreaseSet, Mesh, MeshData, Vec2};
use crate::error::{Error, Result};

const HEADER: &str = "platebend-mesh v1";
const SECTIONS: [&str; 7] = ["vertices", "cells", "dirichlet_edges", "mixed_edges", "crease_edges", "point_bc", "regions"];

pub fn load_mesh(path: impl AsRef<Path>) -> Result<MeshData> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)?;
    parse_mesh(&text, &path.display().to_string())
}

pub fn parse_mesh(text: &str, source: &str) -> Result<MeshData> {
    let err = |line: usize, msg: String| Error::Parse { path: source.to_string(), line, msg };
    let lines: Vec<(usize, &str)> = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.split('#').next().unwrap().trim()))
        .filter(|(_, l)| !l.is_empty())
        .collect();
    let Some(&(first, header)) = lines.first() else {
        return Err(err(1, "empty mesh file".into()));
    };
    if header != HEADER {
        return Err(err(first, format!("expected header `{HEADER}`, found `{header}`")));
    }

    let mut vertices = Vec::new();
    let mut cells = Vec::new();
    let mut labels = BoundaryLabels::default();
    let mut creases = CreaseSet::default();
    let mut regions: Option<Vec<u32>> = None;
    let mut i = 1;
    while i < lines.len() {
        let (ln, line) = lines[i];
        let mut words = line.split_whitespace();
        let name = words.next().unwrap();
        if !SECTIONS.contains(&name) {
            return Err(err(ln, format!("unknown section `{name}`")));
        }
        let count = match words.next() {
            Some(w) => Some(w.parse::<usize>().map_err(|_| err(ln, format!("bad count `{w}`")))?),
            None => None,
        };
        i += 1;
        let start = i;
        while i < lines.len() {
            let word = lines[i].1.split_whitespace().next().unwrap();
            if count.map_or(SECTIONS.contains(&word), |n| i - start == n) {
                break;
            }
            i += 1;
        }
        let body = &lines[start..i];
        if let Some(n) = count {
            if body.len() != n {
                return Err(err(ln, format!("section `{name}` declares {n} entries, found {}", body.len())));
            }
        }
        for &(bl, text) in body {
            let nums: Vec<&str> = text.split_whitespace().collect();
            let need = match name {
                "vertices" | "dirichlet_edges" | "mixed_edges" | "crease_edges" => 2,
                "cells" => 4,
                _ => 1,
            };
            if nums.len() != need {
                return Err(err(bl, format!("expected {need} values in `{name}`, found {}", nums.len())));
            }
            let ids = || -> Result<Vec<usize>> {
                nums.iter().map(|w| w.parse::<usize>().map_err(|_| err(bl, format!("bad index `{w}`")))).collect()
            };
            match name {
                "vertices" => {
                    let x: Vec<f64> = nums
                        .iter()
                        .map(|w| w.parse::<f64>().map_err(|_| err(bl, format!("bad coordinate `{w}`"))))
                        .collect::<Result<_>>()?;
                    vertices.push(Vec2::new(x[0], x[1]));
                }
                "cells" => {
                    let v = ids()?;
                    cells.push([v[0], v[1], v[2], v[3]]);
                }
                "dirichlet_edges" | "mixed_edges" | "crease_edges" => {
                    let v = ids()?;
                    let list = match name {
                        "dirichlet_edges" => &mut labels.dirichlet,
                        "mixed_edges" => &mut labels.mixed,
                        _ => &mut creases.edges,
                    };
                    list.push([v[0], v[1]]);
                }
                "point_bc" => labels.points.push(ids()?[0]),
                _ => {
                    let r = nums[0].parse::<u32>().map_err(|_| err(bl, format!("bad region `{}`", nums[0])))?;
                    regions.get_or_insert_with(Vec::new).push(r);
                }
            }
        }
    }
    let n_cells = cells.len();
    let mesh = Mesh::with_regions(vertices, cells, regions.unwrap_or_else(|| vec![0; n_cells]))?;
    Ok(MeshData { mesh, labels, creases })
}

pub fn save_mesh(data: &MeshData, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, format_mesh(data))?;
    Ok(())
}

/// The text of `data` in the mesh format; vertex coordinates round-trip exactly.
pub fn format_mesh(data: &MeshData) -> String {
    let mut s = String::new();
    let MeshData { mesh, labels, creases } = data;
    writeln!(s, "{HEADER}").unwrap();
    writeln!(s, "vertices {}", mesh.vertices.len()).unwrap();
    for v in &mesh.vertices {
        writeln!(s, "{:?} {:?}", v.x, v.y).unwrap();
    }
    writeln!(s, "cells {}", mesh.cells.len()).unwrap();
    for c in &mesh.cells {
        writeln!(s, "{} {} {} {}", c[0], c[1], c[2], c[3]).unwrap();
    }
    for (name, pairs) in
        [("dirichlet_edges", &labels.dirichlet), ("mixed_edges", &labels.mixed), ("crease_edges", &creases.edges)]
    {
        if !pairs.is_empty() {
            writeln!(s, "{name} {}", pairs.len()).unwrap();
            for p in pairs {
                writeln!(s, "{} {}", p[0], p[1]).unwrap();
            }
        }
    }
    if !labels.points.is_empty() {
        writeln!(s, "point_bc {}", labels.points.len()).unwrap();
        for v in &labels.points {
            writeln!(s, "{v}").unwrap();
        }
    }
    if mesh.regions.iter().any(|&r| r != 0) {
        writeln!(s, "regions {}", mesh.regions.len()).unwrap();
        for r in &mesh.regions {
            writeln!(s, "{r}").unwrap();
        }
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    const SQUARE: &str = "platebend-mesh v1\nvertices 4\n0 0\n1 0\n1 1\n0 1\ncells 1\n0 1 2 3\ndirichlet_edges\n0 1\n# trailing comment\npoint_bc 1\n2\n";

    #[test]
    fn parse_minimal() {
        let data = parse_mesh(SQUARE, "inline").unwrap();
        assert_eq!(data.mesh.n_cells(), 1);
        assert_eq!(data.labels.dirichlet, vec![[0, 1]]);
        assert_eq!(data.labels.points, vec![2]);
    }

    #[test]
    fn errors_carry_line_numbers() {
        let bad = SQUARE.replace("1 1\n", "1 x\n");
        match parse_mesh(&bad, "inline") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 5),
            other => panic!("unexpected {other:?}"),
        }
        let short = SQUARE.replace("cells 1\n0 1 2 3", "cells 1\n0 1 2");
        match parse_mesh(&short, "inline") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 8),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn save_and_reload_is_exact() {
        let mut data = parse_mesh(SQUARE, "inline").unwrap();
        data.mesh.vertices[2] = Vec2::new(1.0 / 3.0, std::f64::consts::PI);
        data.mesh.regions = vec![7];
        let dir = std::env::temp_dir().join(format!("platebend-io-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("m.mesh");
        save_mesh(&data, &path).unwrap();
        let back = load_mesh(&path).unwrap();
        assert_eq!(back.mesh.vertices, data.mesh.vertices);
        assert_eq!(back.mesh.regions, vec![7]);
        std::fs::remove_dir_all(dir).ok();
    }
}
