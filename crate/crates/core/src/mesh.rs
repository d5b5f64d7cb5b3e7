//! Hexahedral meshes, boundary face sets and structured generators.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::hex::{hex_jacobian, hex_shape_grad, quad_point, Vec3, HEX_CORNERS, HEX_FACES};
use crate::quadrature::quad_rule;

/// A boundary face given by its owning cell and local face index (0..6).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct FaceRef {
    pub cell: usize,
    pub local: u8,
}

/// Resolved quad face: four node indices counter-clockwise about the outward normal.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Face {
    pub cell: usize,
    pub local: u8,
    pub nodes: [usize; 4],
}

/// Area below which a quad is degenerate, relative to its squared diameter.
pub const DEGENERATE_AREA: f64 = 1e-14;

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Mesh {
    pub nodes: Vec<Vec3>,
    pub cells: Vec<[usize; 8]>,
    pub regions: Vec<u32>,
    pub face_sets: BTreeMap<String, Vec<FaceRef>>,
}

impl Mesh {
    /// Builds a mesh and checks connectivity and orientation.
    pub fn new(
        nodes: Vec<Vec3>,
        cells: Vec<[usize; 8]>,
        regions: Vec<u32>,
        face_sets: BTreeMap<String, Vec<FaceRef>>,
    ) -> Result<Self> {
        let mesh = Self {
            nodes,
            cells,
            regions,
            face_sets,
        };
        mesh.validate()?;
        Ok(mesh)
    }

    pub fn validate(&self) -> Result<()> {
        if self.regions.len() != self.cells.len() {
            return Err(Error::InvalidGeometry(format!(
                "{} region tags for {} cells",
                self.regions.len(),
                self.cells.len()
            )));
        }
        for (c, cell) in self.cells.iter().enumerate() {
            if let Some(&bad) = cell.iter().find(|&&n| n >= self.nodes.len()) {
                return Err(Error::InvalidGeometry(format!(
                    "cell {c} references node {bad} but the mesh has {} nodes",
                    self.nodes.len()
                )));
            }
            let det = self.min_corner_jacobian(c);
            if !(det > 0.0) {
                return Err(Error::InvalidGeometry(format!(
                    "cell {c} is inverted or degenerate (min corner Jacobian {det:.3e})"
                )));
            }
        }
        for (name, faces) in &self.face_sets {
            for f in faces {
                if f.cell >= self.cells.len() || f.local >= 6 {
                    return Err(Error::InvalidGeometry(format!(
                        "face set '{name}' references cell {} face {}",
                        f.cell, f.local
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn cell_coords(&self, c: usize) -> [Vec3; 8] {
        self.cells[c].map(|n| self.nodes[n])
    }

    /// Smallest determinant of the trilinear map over the eight corners.
    pub fn min_corner_jacobian(&self, c: usize) -> f64 {
        let x = self.cell_coords(c);
        HEX_CORNERS
            .iter()
            .map(|&xi| hex_jacobian(&x, &hex_shape_grad(xi)).determinant())
            .fold(f64::INFINITY, f64::min)
    }

    pub fn face(&self, f: FaceRef) -> Face {
        let cell = &self.cells[f.cell];
        let loc = HEX_FACES[f.local as usize];
        Face {
            cell: f.cell,
            local: f.local,
            nodes: loc.map(|a| cell[a]),
        }
    }

    pub fn face_set(&self, name: &str) -> Result<Vec<Face>> {
        self.face_sets
            .get(name)
            .map(|fs| fs.iter().map(|&f| self.face(f)).collect())
            .ok_or_else(|| Error::Config(format!("unknown face set '{name}'")))
    }

    pub fn face_coords(&self, face: &Face) -> [Vec3; 4] {
        face.nodes.map(|n| self.nodes[n])
    }

    /// Sorted, unique nodes touched by a face set.
    pub fn face_set_nodes(&self, name: &str) -> Result<Vec<usize>> {
        let mut nodes: Vec<usize> = self
            .face_set(name)?
            .iter()
            .flat_map(|f| f.nodes)
            .collect();
        nodes.sort_unstable();
        nodes.dedup();
        Ok(nodes)
    }

    pub fn nodes_in_box(&self, lo: Vec3, hi: Vec3, tol: f64) -> Vec<usize> {
        self.nodes
            .iter()
            .enumerate()
            .filter(|(_, p)| (0..3).all(|k| p[k] >= lo[k] - tol && p[k] <= hi[k] + tol))
            .map(|(i, _)| i)
            .collect()
    }

    /// Bounding-box diagonal.
    pub fn diameter(&self) -> f64 {
        if self.nodes.is_empty() {
            return 0.0;
        }
        let mut lo = self.nodes[0];
        let mut hi = self.nodes[0];
        for p in &self.nodes {
            lo = lo.inf(p);
            hi = hi.sup(p);
        }
        (hi - lo).norm()
    }

    /// Mean face diameter over a face set.
    pub fn characteristic_size(&self, set: &str) -> Result<f64> {
        let faces = self.face_set(set)?;
        if faces.is_empty() {
            return Err(Error::Config(format!("face set '{set}' is empty")));
        }
        Ok(faces.iter().map(|f| face_diameter(&self.face_coords(f))).sum::<f64>() / faces.len() as f64)
    }

    /// Appends another mesh. Node and cell indices of `other` are shifted and
    /// its face sets are renamed `<prefix>.<name>`.
    pub fn merge(&mut self, other: &Mesh, prefix: &str) {
        let node_off = self.nodes.len();
        let cell_off = self.cells.len();
        self.nodes.extend_from_slice(&other.nodes);
        self.cells
            .extend(other.cells.iter().map(|c| c.map(|n| n + node_off)));
        self.regions.extend_from_slice(&other.regions);
        for (name, faces) in &other.face_sets {
            let key = if prefix.is_empty() {
                name.clone()
            } else {
                format!("{prefix}.{name}")
            };
            self.face_sets.entry(key).or_default().extend(faces.iter().map(|f| FaceRef {
                cell: f.cell + cell_off,
                local: f.local,
            }));
        }
    }

    pub fn set_region(&mut self, region: u32) {
        self.regions.iter_mut().for_each(|r| *r = region);
    }
}

pub fn face_area(coords: &[Vec3; 4]) -> f64 {
    quad_rule(2)
        .iter()
        .map(|(xi, w)| w * quad_point(coords, *xi).1.norm())
        .sum()
}

/// Largest node-to-node distance of a quad.
pub fn face_diameter(coords: &[Vec3; 4]) -> f64 {
    let mut d: f64 = 0.0;
    for a in 0..4 {
        for b in a + 1..4 {
            d = d.max((coords[a] - coords[b]).norm());
        }
    }
    d
}

pub fn is_degenerate(coords: &[Vec3; 4]) -> bool {
    let d = face_diameter(coords);
    face_area(coords) < DEGENERATE_AREA * d * d
}

/// Unit normal at the face center (outward for a boundary face).
pub fn face_normal(coords: &[Vec3; 4]) -> Vec3 {
    quad_point(coords, [0.0, 0.0]).1.normalize()
}

pub fn face_centroid(coords: &[Vec3; 4]) -> Vec3 {
    (coords[0] + coords[1] + coords[2] + coords[3]) / 4.0
}

/// Names of the six boundary face sets produced by the block generators,
/// indexed by local hex face.
pub const BLOCK_SIDES: [&str; 6] = ["zmin", "zmax", "ymin", "xmax", "ymax", "xmin"];

/// Axis-aligned block `[offset, offset + extent]` split into `divisions` cells.
pub fn generate_structured(extent: [f64; 3], divisions: [usize; 3], offset: [f64; 3]) -> Result<Mesh> {
    if extent.iter().any(|&e| !(e > 0.0)) {
        return Err(Error::InvalidGeometry(format!("block extent {extent:?} must be positive")));
    }
    let params = divisions.map(uniform_params);
    let o = Vec3::from(offset);
    let e = Vec3::from(extent);
    let corners = HEX_CORNERS.map(|c| {
        o + Vec3::new(
            0.5 * (c[0] + 1.0) * e[0],
            0.5 * (c[1] + 1.0) * e[1],
            0.5 * (c[2] + 1.0) * e[2],
        )
    });
    generate_mapped(&corners, &params)
}

/// `n` equal parametric intervals on [0, 1].
pub fn uniform_params(n: usize) -> Vec<f64> {
    (0..=n).map(|i| i as f64 / n as f64).collect()
}

/// Hexahedral block obtained by mapping a tensor grid of parametric
/// coordinates (each list increasing from 0 to 1) through the trilinear map of
/// eight corner points. Face sets `xmin`..`zmax` name the six block sides.
pub fn generate_mapped(corners: &[Vec3; 8], params: &[Vec<f64>; 3]) -> Result<Mesh> {
    for (axis, p) in params.iter().enumerate() {
        if p.len() < 2 {
            return Err(Error::InvalidGeometry(format!("axis {axis} needs at least one division")));
        }
        if p.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidGeometry(format!("axis {axis} parameters must increase")));
        }
    }
    let [px, py, pz] = params;
    let (nx, ny, nz) = (px.len() - 1, py.len() - 1, pz.len() - 1);
    let node_id = |i: usize, j: usize, k: usize| (k * (ny + 1) + j) * (nx + 1) + i;
    let mut nodes = Vec::with_capacity((nx + 1) * (ny + 1) * (nz + 1));
    for &w in pz {
        for &v in py {
            for &u in px {
                let xi = [2.0 * u - 1.0, 2.0 * v - 1.0, 2.0 * w - 1.0];
                let n = crate::hex::hex_shape(xi);
                let mut p = Vec3::zeros();
                for a in 0..8 {
                    p += corners[a] * n[a];
                }
                nodes.push(p);
            }
        }
    }
    let mut cells = Vec::with_capacity(nx * ny * nz);
    let mut sets: BTreeMap<String, Vec<FaceRef>> = BLOCK_SIDES.iter().map(|s| (s.to_string(), Vec::new())).collect();
    for k in 0..nz {
        for j in 0..ny {
            for i in 0..nx {
                let c = cells.len();
                cells.push([
                    node_id(i, j, k),
                    node_id(i + 1, j, k),
                    node_id(i + 1, j + 1, k),
                    node_id(i, j + 1, k),
                    node_id(i, j, k + 1),
                    node_id(i + 1, j, k + 1),
                    node_id(i + 1, j + 1, k + 1),
                    node_id(i, j + 1, k + 1),
                ]);
                let mut tag = |local: u8| {
                    sets.get_mut(BLOCK_SIDES[local as usize]).unwrap().push(FaceRef { cell: c, local });
                };
                if k == 0 {
                    tag(0);
                }
                if k + 1 == nz {
                    tag(1);
                }
                if j == 0 {
                    tag(2);
                }
                if i + 1 == nx {
                    tag(3);
                }
                if j + 1 == ny {
                    tag(4);
                }
                if i == 0 {
                    tag(5);
                }
            }
        }
    }
    let regions = vec![0; cells.len()];
    Mesh::new(nodes, cells, regions, sets)
}

/// Parametric coordinates with a uniform core of spacing `h` on
/// `[core_lo, core_hi]` and geometric growth (`ratio`) toward `lo` and `hi`.
/// Returned values are normalized to [0, 1].
pub fn graded_params(lo: f64, hi: f64, core_lo: f64, core_hi: f64, h: f64, ratio: f64) -> Vec<f64> {
    let mut xs = Vec::new();
    let ncore = ((core_hi - core_lo) / h).round().max(1.0) as usize;
    let hc = (core_hi - core_lo) / ncore as f64;
    for i in 0..=ncore {
        xs.push(core_lo + i as f64 * hc);
    }
    let grow = |start: f64, end: f64| -> Vec<f64> {
        let len = (end - start).abs();
        let dir = (end - start).signum();
        let mut out = Vec::new();
        let mut step = hc;
        let mut pos = 0.0;
        loop {
            step *= ratio;
            if pos + step >= len || pos + 1.5 * step >= len {
                break;
            }
            pos += step;
            out.push(start + dir * pos);
        }
        out.push(end);
        out
    };
    let mut left = if core_lo > lo { grow(core_lo, lo) } else { Vec::new() };
    left.reverse();
    let right = if core_hi < hi { grow(core_hi, hi) } else { Vec::new() };
    let all: Vec<f64> = left.into_iter().chain(xs).chain(right).collect();
    all.iter().map(|x| (x - lo) / (hi - lo)).collect()
}

/// Parametric coordinates on [0, 1] whose first interval has length `first`
/// (relative) and grows geometrically by `ratio`; `reverse` clusters at 1.
pub fn geometric_params(first: f64, ratio: f64, reverse: bool) -> Vec<f64> {
    let mut xs = vec![0.0];
    let mut step = first;
    let mut pos = 0.0;
    while pos + 1.5 * step < 1.0 {
        pos += step;
        xs.push(pos);
        step *= ratio;
    }
    xs.push(1.0);
    if reverse {
        xs = xs.iter().rev().map(|x| 1.0 - x).collect();
    }
    xs
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_cube_counts() {
        let m = generate_structured([1.0; 3], [1, 1, 1], [0.0; 3]).unwrap();
        assert_eq!((m.nodes.len(), m.cells.len()), (8, 1));
        let m = generate_structured([1.0; 3], [2, 2, 2], [0.0; 3]).unwrap();
        assert_eq!((m.nodes.len(), m.cells.len()), (27, 8));
        assert_eq!(m.face_sets["zmax"].len(), 4);
    }

    #[test]
    fn two_block_nonmortar_dimensions() {
        let m = generate_structured([10.0, 5.0, 15.0], [3, 20, 24], [0.0; 3]).unwrap();
        assert_eq!(m.cells.len(), 3 * 20 * 24);
        assert_eq!(m.nodes.len(), 4 * 21 * 25);
        assert_eq!(m.face_sets["xmin"].len(), 20 * 24);
    }

    #[test]
    fn non_positive_extent_rejected() {
        assert!(matches!(
            generate_structured([1.0, 0.0, 1.0], [1, 1, 1], [0.0; 3]),
            Err(Error::InvalidGeometry(_))
        ));
        assert!(generate_structured([1.0, -2.0, 1.0], [1, 1, 1], [0.0; 3]).is_err());
    }

    #[test]
    fn face_set_areas_match_analytic() {
        let m = generate_structured([2.0, 3.0, 5.0], [3, 4, 2], [1.0, -1.0, 0.5]).unwrap();
        let area = |s: &str| -> f64 {
            m.face_set(s).unwrap().iter().map(|f| face_area(&m.face_coords(f))).sum()
        };
        for (s, exact) in [("xmin", 15.0), ("xmax", 15.0), ("ymin", 10.0), ("zmax", 6.0)] {
            assert!((area(s) - exact).abs() <= 1e-12 * exact, "{s}");
        }
        for f in m.face_set("xmax").unwrap() {
            let n = face_normal(&m.face_coords(&f));
            assert!((n - Vec3::x()).norm() < 1e-14);
        }
    }

    #[test]
    fn inverted_cell_detected() {
        let mut m = generate_structured([1.0; 3], [1, 1, 1], [0.0; 3]).unwrap();
        m.cells[0].swap(0, 1);
        assert!(matches!(m.validate(), Err(Error::InvalidGeometry(_))));
    }

    #[test]
    fn merge_shifts_indices_and_prefixes_sets() {
        let a = generate_structured([1.0; 3], [1, 1, 1], [0.0; 3]).unwrap();
        let b = generate_structured([1.0; 3], [2, 1, 1], [1.0, 0.0, 0.0]).unwrap();
        let mut m = Mesh::default();
        m.merge(&a, "a");
        m.merge(&b, "b");
        m.validate().unwrap();
        assert_eq!(m.nodes.len(), 8 + 12);
        let f = m.face_set("b.xmin").unwrap()[0];
        assert!(f.nodes.iter().all(|&n| n >= 8));
    }

    #[test]
    fn graded_parameters_are_monotone() {
        let p = graded_params(-25.0, 25.0, -1.2, 1.2, 0.1, 1.3);
        assert!(p.windows(2).all(|w| w[1] > w[0]));
        assert_eq!(p[0], 0.0);
        assert!((p[p.len() - 1] - 1.0).abs() < 1e-15);
        let g = geometric_params(0.01, 1.3, true);
        assert!(g.windows(2).all(|w| w[1] > w[0]));
        assert!((g[g.len() - 1] - g[g.len() - 2] - 0.01).abs() < 1e-12);
    }
}
