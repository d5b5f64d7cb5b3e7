//! Plain-text mesh files, legacy VTK output and contact-state CSV.
//!
//! Mesh format:
//!
//! ```text
//! faultmortar-mesh 1
//! nodes <N>
//! <id> <x> <y> <z>            (N lines, ids 0..N in order)
//! cells <C>
//! <id> <region> <n0> ... <n7> (C lines)
//! faces <F>
//! <set> <cell> <local face>   (F lines)
//! ```
//!
//! Blank lines and lines starting with `#` are ignored.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::friction::ContactState;
use crate::hex::Vec3;
use crate::mesh::{FaceRef, Mesh};
use crate::solver::{InterfaceData, SimulationState};

pub fn write_mesh(mesh: &Mesh) -> String {
    let mut s = String::from("faultmortar-mesh 1\n");
    let _ = writeln!(s, "nodes {}", mesh.nodes.len());
    for (i, p) in mesh.nodes.iter().enumerate() {
        let _ = writeln!(s, "{i} {} {} {}", p.x, p.y, p.z);
    }
    let _ = writeln!(s, "cells {}", mesh.cells.len());
    for (i, c) in mesh.cells.iter().enumerate() {
        let _ = write!(s, "{i} {}", mesh.regions[i]);
        for n in c {
            let _ = write!(s, " {n}");
        }
        s.push('\n');
    }
    let total: usize = mesh.face_sets.values().map(Vec::len).sum();
    let _ = writeln!(s, "faces {total}");
    for (name, faces) in &mesh.face_sets {
        for f in faces {
            let _ = writeln!(s, "{name} {} {}", f.cell, f.local);
        }
    }
    s
}

struct Lines<'a> {
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
}

impl<'a> Lines<'a> {
    fn next(&mut self, what: &str) -> Result<(usize, Vec<&'a str>)> {
        for (i, l) in self.inner.by_ref() {
            let t = l.trim();
            if t.is_empty() || t.starts_with('#') {
                continue;
            }
            return Ok((i + 1, t.split_whitespace().collect()));
        }
        Err(Error::Parse {
            line: 0,
            msg: format!("unexpected end of file, expected {what}"),
        })
    }
}

fn parse_num<T: std::str::FromStr>(tok: &str, line: usize, what: &str) -> Result<T> {
    tok.parse().map_err(|_| Error::Parse {
        line,
        msg: format!("invalid {what} '{tok}'"),
    })
}

fn section(lines: &mut Lines, key: &str) -> Result<usize> {
    let (l, tok) = lines.next(key)?;
    if tok.len() != 2 || tok[0] != key {
        return Err(Error::Parse {
            line: l,
            msg: format!("expected '{key} <count>'"),
        });
    }
    parse_num(tok[1], l, "count")
}

/// Parses a mesh, reporting the offending line on malformed input and
/// rejecting inverted cells.
pub fn read_mesh(text: &str) -> Result<Mesh> {
    let mut lines = Lines {
        inner: text.lines().enumerate(),
    };
    let (l, head) = lines.next("header")?;
    if head != ["faultmortar-mesh", "1"] {
        return Err(Error::Parse {
            line: l,
            msg: "missing 'faultmortar-mesh 1' header".into(),
        });
    }
    let nn = section(&mut lines, "nodes")?;
    let mut nodes = Vec::with_capacity(nn);
    for i in 0..nn {
        let (l, tok) = lines.next("node record")?;
        if tok.len() != 4 {
            return Err(Error::Parse {
                line: l,
                msg: format!("node record needs 4 fields, found {}", tok.len()),
            });
        }
        let id: usize = parse_num(tok[0], l, "node id")?;
        if id != i {
            return Err(Error::Parse {
                line: l,
                msg: format!("node ids must be consecutive: expected {i}, found {id}"),
            });
        }
        let c: Vec<f64> = tok[1..].iter().map(|t| parse_num(t, l, "coordinate")).collect::<Result<_>>()?;
        if c.iter().any(|v| !v.is_finite()) {
            return Err(Error::Parse {
                line: l,
                msg: "non-finite coordinate".into(),
            });
        }
        nodes.push(Vec3::new(c[0], c[1], c[2]));
    }
    let nc = section(&mut lines, "cells")?;
    let mut cells = Vec::with_capacity(nc);
    let mut regions = Vec::with_capacity(nc);
    for i in 0..nc {
        let (l, tok) = lines.next("cell record")?;
        if tok.len() != 10 {
            return Err(Error::Parse {
                line: l,
                msg: format!("cell record needs 10 fields, found {}", tok.len()),
            });
        }
        let id: usize = parse_num(tok[0], l, "cell id")?;
        if id != i {
            return Err(Error::Parse {
                line: l,
                msg: format!("cell ids must be consecutive: expected {i}, found {id}"),
            });
        }
        regions.push(parse_num(tok[1], l, "region")?);
        let mut c = [0usize; 8];
        for (k, t) in tok[2..].iter().enumerate() {
            c[k] = parse_num(t, l, "node index")?;
            if c[k] >= nn {
                return Err(Error::Parse {
                    line: l,
                    msg: format!("cell references node {} but only {nn} nodes exist", c[k]),
                });
            }
        }
        cells.push(c);
    }
    let nf = section(&mut lines, "faces")?;
    let mut sets: BTreeMap<String, Vec<FaceRef>> = BTreeMap::new();
    for _ in 0..nf {
        let (l, tok) = lines.next("face record")?;
        if tok.len() != 3 {
            return Err(Error::Parse {
                line: l,
                msg: "face record needs '<set> <cell> <local>'".into(),
            });
        }
        let cell: usize = parse_num(tok[1], l, "cell index")?;
        let local: u8 = parse_num(tok[2], l, "local face")?;
        if cell >= nc || local >= 6 {
            return Err(Error::Parse {
                line: l,
                msg: format!("face ({cell}, {local}) out of range"),
            });
        }
        sets.entry(tok[0].to_string()).or_default().push(FaceRef { cell, local });
    }
    Mesh::new(nodes, cells, regions, sets)
}

pub fn load_mesh(path: &Path) -> Result<Mesh> {
    read_mesh(&std::fs::read_to_string(path)?)
}

/// Legacy ASCII VTK of the volume mesh with displacement and region fields.
pub fn volume_vtk(mesh: &Mesh, u: &[f64]) -> String {
    let mut s = String::from("# vtk DataFile Version 3.0\nfaultmortar volume\nASCII\nDATASET UNSTRUCTURED_GRID\n");
    let _ = writeln!(s, "POINTS {} double", mesh.nodes.len());
    for p in &mesh.nodes {
        let _ = writeln!(s, "{} {} {}", p.x, p.y, p.z);
    }
    let _ = writeln!(s, "CELLS {} {}", mesh.cells.len(), 9 * mesh.cells.len());
    for c in &mesh.cells {
        let _ = writeln!(s, "8 {} {} {} {} {} {} {} {}", c[0], c[1], c[2], c[3], c[4], c[5], c[6], c[7]);
    }
    let _ = writeln!(s, "CELL_TYPES {}", mesh.cells.len());
    for _ in &mesh.cells {
        s.push_str("12\n");
    }
    let _ = writeln!(s, "CELL_DATA {}\nSCALARS region int 1\nLOOKUP_TABLE default", mesh.cells.len());
    for r in &mesh.regions {
        let _ = writeln!(s, "{r}");
    }
    let _ = writeln!(s, "POINT_DATA {}\nVECTORS displacement double", mesh.nodes.len());
    for c in u.chunks(3) {
        let _ = writeln!(s, "{} {} {}", c[0], c[1], c[2]);
    }
    s
}

/// Legacy ASCII VTK of the non-mortar interface faces with contact fields.
pub fn interface_vtk(mesh: &Mesh, interfaces: &[InterfaceData], contact: &[ContactState]) -> String {
    let mut pts = Vec::new();
    let mut quads = Vec::new();
    let mut rows = Vec::new();
    for (it, st) in interfaces.iter().zip(contact) {
        if it.coupling.num_multipliers() != it.topo.num_faces() {
            continue;
        }
        for (i, f) in it.topo.non_mortar.iter().enumerate() {
            let base = pts.len();
            pts.extend(mesh.face_coords(f));
            quads.push([base, base + 1, base + 2, base + 3]);
            rows.push((st.faces[i].regime, st.t_normal(i), st.t_tangential(i).norm(), st.g_normal(i), st.g_tangential(i).norm()));
        }
    }
    let mut s = String::from("# vtk DataFile Version 3.0\nfaultmortar interface\nASCII\nDATASET UNSTRUCTURED_GRID\n");
    let _ = writeln!(s, "POINTS {} double", pts.len());
    for p in &pts {
        let _ = writeln!(s, "{} {} {}", p.x, p.y, p.z);
    }
    let _ = writeln!(s, "CELLS {} {}", quads.len(), 5 * quads.len());
    for q in &quads {
        let _ = writeln!(s, "4 {} {} {} {}", q[0], q[1], q[2], q[3]);
    }
    let _ = writeln!(s, "CELL_TYPES {}", quads.len());
    for _ in &quads {
        s.push_str("9\n");
    }
    let _ = writeln!(s, "CELL_DATA {}", quads.len());
    let fields: [(&str, Box<dyn Fn(&(crate::friction::Regime, f64, f64, f64, f64)) -> f64>); 5] = [
        ("regime", Box::new(|r| r.0 as u8 as f64)),
        ("t_N", Box::new(|r| r.1)),
        ("t_T_norm", Box::new(|r| r.2)),
        ("g_N", Box::new(|r| r.3)),
        ("g_T_norm", Box::new(|r| r.4)),
    ];
    for (name, f) in fields.iter() {
        let _ = writeln!(s, "SCALARS {name} double 1\nLOOKUP_TABLE default");
        for r in &rows {
            let _ = writeln!(s, "{}", f(r));
        }
    }
    s
}

/// One row per multiplier: id, regime, t_N, ‖t_T‖, g_N, ‖g_T‖, position.
pub fn state_csv(interfaces: &[InterfaceData], state: &SimulationState) -> String {
    let mut s = String::from("interface,face,regime,t_N,t_T_norm,g_N,g_T_norm,x,y,z\n");
    for (it, st) in interfaces.iter().zip(&state.contact) {
        for i in 0..st.len() {
            let p = it.coupling.positions[i];
            let _ = writeln!(
                s,
                "{},{},{},{:.12e},{:.12e},{:.12e},{:.12e},{},{},{}",
                it.def.name,
                i,
                st.faces[i].regime,
                st.t_normal(i),
                st.t_tangential(i).norm(),
                st.g_normal(i),
                st.g_tangential(i).norm(),
                p.x,
                p.y,
                p.z
            );
        }
    }
    s
}

/// Reads a per-cell body-force field: one `fx,fy,fz` line per cell (header optional).
pub fn read_cell_forces(text: &str, ncells: usize) -> Result<Vec<[f64; 3]>> {
    let mut out = Vec::with_capacity(ncells);
    for (i, line) in text.lines().enumerate() {
        let t = line.trim();
        if t.is_empty() || t.starts_with('#') || t.chars().next().is_some_and(|c| c.is_alphabetic()) {
            continue;
        }
        let v: Vec<f64> = t
            .split(',')
            .map(|x| parse_num(x.trim(), i + 1, "force component"))
            .collect::<Result<_>>()?;
        if v.len() != 3 {
            return Err(Error::Parse {
                line: i + 1,
                msg: "expected three comma-separated components".into(),
            });
        }
        out.push([v[0], v[1], v[2]]);
    }
    if out.len() != ncells {
        return Err(Error::Config(format!("body-force file has {} rows for {ncells} cells", out.len())));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::generate_structured;

    #[test]
    fn round_trip_is_bit_exact() {
        let mut m = generate_structured([1.0, 2.0, 3.0], [2, 1, 3], [0.1, -0.3, 1.0 / 3.0]).unwrap();
        m.nodes[5].x += 1e-3 / 7.0;
        m.regions[2] = 4;
        let back = read_mesh(&write_mesh(&m)).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn malformed_line_is_reported() {
        let m = generate_structured([1.0; 3], [1, 1, 1], [0.0; 3]).unwrap();
        let text = write_mesh(&m).replacen("\n3 1 1 0\n", "\n3 1 x 0\n", 1);
        match read_mesh(&text) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 6),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn inverted_cell_is_rejected() {
        let m = generate_structured([1.0; 3], [1, 1, 1], [0.0; 3]).unwrap();
        let text = write_mesh(&m).replace("0 0 0 1 3 2 4 5 7 6", "0 0 1 0 3 2 4 5 7 6");
        assert!(matches!(read_mesh(&text), Err(Error::InvalidGeometry(_))));
    }

    #[test]
    fn empty_and_truncated_inputs() {
        assert!(matches!(read_mesh(""), Err(Error::Parse { .. })));
        let m = generate_structured([1.0; 3], [1, 1, 1], [0.0; 3]).unwrap();
        let text = write_mesh(&m);
        let cut: String = text.lines().take(5).collect::<Vec<_>>().join("\n");
        assert!(matches!(read_mesh(&cut), Err(Error::Parse { .. })));
    }

    #[test]
    fn volume_vtk_counts() {
        let m = generate_structured([1.0; 3], [2, 1, 1], [0.0; 3]).unwrap();
        let v = volume_vtk(&m, &vec![0.0; 3 * m.nodes.len()]);
        assert!(v.contains("POINTS 12 double"));
        assert!(v.contains("CELLS 2 18"));
    }

    #[test]
    fn cell_force_file() {
        let f = read_cell_forces("fx,fy,fz\n1,2,3\n0,0,-1\n", 2).unwrap();
        assert_eq!(f[1], [0.0, 0.0, -1.0]);
        assert!(read_cell_forces("1,2\n", 1).is_err());
        assert!(read_cell_forces("1,2,3\n", 2).is_err());
    }
}
