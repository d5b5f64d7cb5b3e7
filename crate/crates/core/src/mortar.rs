//! Segment-based mortar coupling between a non-mortar and a mortar surface.
//!
//! Mortar faces are projected onto the plane of each non-mortar face, clipped
//! against it and the overlap is integrated with a degree-5 triangle rule.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use nalgebra::Matrix3;

use crate::error::{Error, Result};
use crate::hex::{invert_bilinear_2d, quad_point, quad_shape, Vec3};
use crate::interface::InterfaceTopology;
use crate::mesh::{face_area, face_centroid, face_diameter, face_normal, Mesh};
use crate::quadrature::{quad_rule, triangle_rule_deg5};
use crate::sparse::{CsrMatrix, TripletBuilder};

/// Overlaps smaller than this fraction of the non-mortar face area are dropped.
pub const SLIVER_FRACTION: f64 = 1e-12;
const INVERSE_TOL: f64 = 1e-12;
const INVERSE_MAX_ITER: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MultiplierSpace {
    /// One constant traction vector per non-mortar face.
    #[default]
    P0,
    /// Bilinear tractions at the non-mortar nodes (standard, non-dual basis).
    Nodal,
}

impl std::str::FromStr for MultiplierSpace {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "p0" => Ok(Self::P0),
            "nodal" | "q1" => Ok(Self::Nodal),
            other => Err(Error::Config(format!("unknown multiplier space '{other}' (use p0 or nodal)"))),
        }
    }
}

/// Orthonormal tangents completing `n`, from the Householder reflection that
/// maps the coordinate axis least aligned with `n` onto `n`.
pub fn tangent_frame(n: &Vec3) -> (Vec3, Vec3) {
    let k = (0..3)
        .min_by(|&a, &b| n[a].abs().partial_cmp(&n[b].abs()).unwrap())
        .unwrap();
    let mut ek = Vec3::zeros();
    ek[k] = 1.0;
    let v = n - ek;
    let h = Matrix3::identity() - v * v.transpose() * (2.0 / v.norm_squared());
    let others: Vec<usize> = (0..3).filter(|&i| i != k).collect();
    (h.column(others[0]).into_owned(), h.column(others[1]).into_owned())
}

/// Area-weighted averaged unit normals at the nodes of a face list.
pub fn averaged_normals(mesh: &Mesh, faces: &[crate::mesh::Face]) -> BTreeMap<usize, Vec3> {
    let mut acc: BTreeMap<usize, Vec3> = BTreeMap::new();
    for f in faces {
        let x = mesh.face_coords(f);
        let w = face_normal(&x) * face_area(&x);
        for n in f.nodes {
            *acc.entry(n).or_insert_with(Vec3::zeros) += w;
        }
    }
    acc.into_iter().map(|(k, v)| (k, v.normalize())).collect()
}

type P2 = [f64; 2];

fn cross2(o: P2, a: P2, b: P2) -> f64 {
    (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
}

/// Signed (shoelace) area of a 2D polygon.
pub fn polygon_area(p: &[P2]) -> f64 {
    let n = p.len();
    0.5 * (0..n)
        .map(|i| {
            let (a, b) = (p[i], p[(i + 1) % n]);
            a[0] * b[1] - b[0] * a[1]
        })
        .sum::<f64>()
}

/// Sutherland–Hodgman clipping of `subject` against a convex,
/// counter-clockwise `clip` polygon.
pub fn clip_polygon(subject: &[P2], clip: &[P2]) -> Vec<P2> {
    let mut out = subject.to_vec();
    let m = clip.len();
    for i in 0..m {
        if out.is_empty() {
            break;
        }
        let (a, b) = (clip[i], clip[(i + 1) % m]);
        let input = std::mem::take(&mut out);
        let k = input.len();
        for j in 0..k {
            let (p, q) = (input[j], input[(j + 1) % k]);
            let (sp, sq) = (cross2(a, b, p), cross2(a, b, q));
            if sp >= 0.0 {
                out.push(p);
            }
            if (sp >= 0.0) != (sq >= 0.0) {
                let t = sp / (sp - sq);
                out.push([p[0] + t * (q[0] - p[0]), p[1] + t * (q[1] - p[1])]);
            }
        }
    }
    out
}

fn ensure_ccw(p: &mut [P2]) {
    if polygon_area(p) < 0.0 {
        p.reverse();
    }
}

/// Local plane of a non-mortar face.
#[derive(Debug, Clone, Copy)]
struct FacePlane {
    origin: Vec3,
    normal: Vec3,
    t1: Vec3,
    t2: Vec3,
}

impl FacePlane {
    fn project(&self, p: &Vec3) -> P2 {
        let d = p - self.origin;
        [d.dot(&self.t1), d.dot(&self.t2)]
    }
}

/// Overlap between one non-mortar and one mortar face.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MortarPair {
    pub non_mortar: usize,
    pub mortar: usize,
    pub area: f64,
}

/// Mortar matrices of one interface.
///
/// Rows index multipliers (faces for P0, non-mortar nodes for nodal), columns
/// index mesh nodes, so that `(D - M) u` integrates the displacement jump
/// `u_nm - u_m` against each multiplier basis function.
#[derive(Debug, Clone)]
pub struct MortarCoupling {
    pub space: MultiplierSpace,
    pub d: CsrMatrix,
    pub m: CsrMatrix,
    /// Integral of each multiplier basis function over the non-mortar side.
    pub areas: Vec<f64>,
    /// Contact normal: opposite to the outward normal of the non-mortar body.
    pub normals: Vec<Vec3>,
    pub tangents: Vec<(Vec3, Vec3)>,
    /// Representative position of each multiplier (face centroid or node).
    pub positions: Vec<Vec3>,
    /// Mesh node of each nodal multiplier (empty for P0).
    pub multiplier_nodes: Vec<usize>,
    pub pairs: Vec<MortarPair>,
}

impl MortarCoupling {
    pub fn assemble(mesh: &Mesh, topo: &InterfaceTopology, space: MultiplierSpace) -> Result<Self> {
        let nn = mesh.nodes.len();
        let nm_normals = averaged_normals(mesh, &topo.non_mortar);
        let nmult = match space {
            MultiplierSpace::P0 => topo.non_mortar.len(),
            MultiplierSpace::Nodal => topo.non_mortar_nodes.len(),
        };
        let node_mult: BTreeMap<usize, usize> = topo
            .non_mortar_nodes
            .iter()
            .enumerate()
            .map(|(i, &n)| (n, i))
            .collect();
        let mut d = TripletBuilder::new(nmult, nn);
        let mut m = TripletBuilder::new(nmult, nn);

        // face-local D
        let rule = quad_rule(3);
        for (fi, f) in topo.non_mortar.iter().enumerate() {
            let x = mesh.face_coords(f);
            for (xi, w) in &rule {
                let (_, da) = quad_point(&x, *xi);
                let phi = quad_shape(*xi);
                let wa = w * da.norm();
                for a in 0..4 {
                    match space {
                        MultiplierSpace::P0 => d.push(fi, f.nodes[a], phi[a] * wa),
                        MultiplierSpace::Nodal => {
                            let row = node_mult[&f.nodes[a]];
                            for b in 0..4 {
                                d.push(row, f.nodes[b], phi[a] * phi[b] * wa);
                            }
                        }
                    }
                }
            }
        }

        // segment-based M
        let diam = topo.non_mortar_size.max(topo.mortar_size);
        let pad = 0.25 * diam;
        let bbox = |x: &[Vec3; 4]| {
            let mut lo = x[0];
            let mut hi = x[0];
            for p in x {
                lo = lo.inf(p);
                hi = hi.sup(p);
            }
            (lo.add_scalar(-pad), hi.add_scalar(pad))
        };
        let mortar_geo: Vec<_> = topo
            .mortar
            .iter()
            .map(|f| {
                let x = mesh.face_coords(f);
                let b = bbox(&x);
                (x, face_normal(&x), b)
            })
            .collect();
        let tri = triangle_rule_deg5();
        let mut pairs = Vec::new();
        for (fi, f) in topo.non_mortar.iter().enumerate() {
            let x = mesh.face_coords(f);
            let mean_n: Vec3 = f.nodes.iter().map(|n| nm_normals[n]).sum::<Vec3>();
            let normal = mean_n.normalize();
            let (t1, t2) = tangent_frame(&normal);
            let plane = FacePlane {
                origin: face_centroid(&x),
                normal,
                t1,
                t2,
            };
            let area_f = face_area(&x);
            let mut nm_poly: Vec<P2> = x.iter().map(|p| plane.project(p)).collect();
            let nm_corners = [nm_poly[0], nm_poly[1], nm_poly[2], nm_poly[3]];
            ensure_ccw(&mut nm_poly);
            let (flo, fhi) = bbox(&x);
            let dist_tol = 0.5 * face_diameter(&x).max(diam);
            for (ki, (y, ny, (mlo, mhi))) in mortar_geo.iter().enumerate() {
                if (0..3).any(|k| mhi[k] < flo[k] || mlo[k] > fhi[k]) {
                    continue;
                }
                if ny.dot(&plane.normal) >= 0.0 {
                    continue;
                }
                if (face_centroid(y) - plane.origin).dot(&plane.normal).abs() > dist_tol {
                    continue;
                }
                let m_corners: [P2; 4] = y.map(|p| plane.project(&p));
                let mut m_poly = m_corners.to_vec();
                ensure_ccw(&mut m_poly);
                let cell = clip_polygon(&m_poly, &nm_poly);
                if cell.len() < 3 {
                    continue;
                }
                let area = polygon_area(&cell);
                if area < SLIVER_FRACTION * area_f {
                    continue;
                }
                pairs.push(MortarPair {
                    non_mortar: fi,
                    mortar: ki,
                    area,
                });
                let kface = &topo.mortar[ki];
                let c = cell.iter().fold([0.0, 0.0], |s, p| [s[0] + p[0], s[1] + p[1]]);
                let c = [c[0] / cell.len() as f64, c[1] / cell.len() as f64];
                for j in 0..cell.len() {
                    let (p, q) = (cell[j], cell[(j + 1) % cell.len()]);
                    let ta = 0.5 * cross2(c, p, q);
                    if ta <= 0.0 {
                        continue;
                    }
                    for (l, w) in &tri {
                        let pt = [
                            l[0] * c[0] + l[1] * p[0] + l[2] * q[0],
                            l[0] * c[1] + l[1] * p[1] + l[2] * q[1],
                        ];
                        let xi_m = invert_bilinear_2d(&m_corners, pt, INVERSE_TOL, INVERSE_MAX_ITER).ok_or_else(|| {
                            Error::InvalidGeometry(format!(
                                "inverse map failed on mortar face of cell {} on '{}'",
                                kface.cell, topo.name
                            ))
                        })?;
                        let psi = quad_shape(xi_m);
                        let wq = ta * w;
                        match space {
                            MultiplierSpace::P0 => {
                                for b in 0..4 {
                                    m.push(fi, kface.nodes[b], psi[b] * wq);
                                }
                            }
                            MultiplierSpace::Nodal => {
                                let xi_f = invert_bilinear_2d(&nm_corners, pt, INVERSE_TOL, INVERSE_MAX_ITER)
                                    .ok_or_else(|| {
                                        Error::InvalidGeometry(format!(
                                            "inverse map failed on non-mortar face of cell {} on '{}'",
                                            f.cell, topo.name
                                        ))
                                    })?;
                                let phi = quad_shape(xi_f);
                                for a in 0..4 {
                                    let row = node_mult[&f.nodes[a]];
                                    for b in 0..4 {
                                        m.push(row, kface.nodes[b], phi[a] * psi[b] * wq);
                                    }
                                }
                            }
                        }
                    }
                }
            }
        }
        let d = d.build();
        let m = m.build();
        let areas: Vec<f64> = (0..nmult).map(|i| d.row(i).map(|(_, v)| v).sum()).collect();

        let (normals, positions, multiplier_nodes): (Vec<Vec3>, Vec<Vec3>, Vec<usize>) = match space {
            MultiplierSpace::P0 => {
                let mut ns = Vec::with_capacity(nmult);
                let mut ps = Vec::with_capacity(nmult);
                for f in &topo.non_mortar {
                    let mean_n: Vec3 = f.nodes.iter().map(|n| nm_normals[n]).sum::<Vec3>();
                    ns.push(-mean_n.normalize());
                    ps.push(face_centroid(&mesh.face_coords(f)));
                }
                (ns, ps, Vec::new())
            }
            MultiplierSpace::Nodal => (
                topo.non_mortar_nodes.iter().map(|n| -nm_normals[n]).collect(),
                topo.non_mortar_nodes.iter().map(|&n| mesh.nodes[n]).collect(),
                topo.non_mortar_nodes.clone(),
            ),
        };
        let tangents = normals.iter().map(tangent_frame).collect();
        Ok(Self {
            space,
            d,
            m,
            areas,
            normals,
            tangents,
            positions,
            multiplier_nodes,
            pairs,
        })
    }

    pub fn num_multipliers(&self) -> usize {
        self.areas.len()
    }

    /// Scalar coupling `D - M` (multipliers × mesh nodes).
    pub fn jump_operator(&self) -> CsrMatrix {
        let mut t = self.d.to_triplets();
        for i in 0..self.m.nrows {
            for (j, v) in self.m.row(i) {
                t.push(i, j, -v);
            }
        }
        t.build()
    }

    /// `B1ᵀ = (D - M) ⊗ I₃`: rows `3·multiplier + k`, columns `3·node + k`.
    pub fn b1t(&self) -> CsrMatrix {
        let g = self.jump_operator();
        let mut t = TripletBuilder::new(3 * g.nrows, 3 * g.ncols);
        for i in 0..g.nrows {
            for (j, v) in g.row(i) {
                for k in 0..3 {
                    t.push(3 * i + k, 3 * j + k, v);
                }
            }
        }
        t.build()
    }

    /// Integrated jump `∫ (u_nm - u_m) ψ` per multiplier, as 3-vectors.
    pub fn integrated_jump(&self, u: &[f64]) -> Vec<Vec3> {
        let g = self.jump_operator();
        (0..g.nrows)
            .map(|i| {
                let mut s = Vec3::zeros();
                for (j, v) in g.row(i) {
                    s += Vec3::new(u[3 * j], u[3 * j + 1], u[3 * j + 2]) * v;
                }
                s
            })
            .collect()
    }

    /// Mean displacement jump per multiplier (integrated jump / area).
    pub fn mean_jump(&self, u: &[f64]) -> Vec<Vec3> {
        self.integrated_jump(u)
            .into_iter()
            .zip(&self.areas)
            .map(|(j, a)| j / *a)
            .collect()
    }

    /// Per multiplier: `(Σ_b D - Σ_b M) / area`, zero for a fully covered face.
    pub fn coverage_defect(&self) -> Vec<f64> {
        (0..self.num_multipliers())
            .map(|i| {
                let sd: f64 = self.d.row(i).map(|(_, v)| v).sum();
                let sm: f64 = self.m.row(i).map(|(_, v)| v).sum();
                (sd - sm) / self.areas[i]
            })
            .collect()
    }

    /// CSV listing of every retained face pair and its overlap area.
    pub fn pairs_csv(&self, topo: &InterfaceTopology) -> String {
        let mut s = String::from("non_mortar_face,non_mortar_cell,mortar_face,mortar_cell,overlap_area\n");
        for p in &self.pairs {
            let _ = writeln!(
                s,
                "{},{},{},{},{:.12e}",
                p.non_mortar, topo.non_mortar[p.non_mortar].cell, p.mortar, topo.mortar[p.mortar].cell, p.area
            );
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::generate_structured;

    fn stacked(n_nm: [usize; 2], n_m: [usize; 2], shift: f64) -> Mesh {
        let lower = generate_structured([1.0, 1.0, 1.0], [n_nm[0], n_nm[1], 1], [0.0, 0.0, -1.0]).unwrap();
        let upper = generate_structured([1.0, 1.0, 1.0], [n_m[0], n_m[1], 1], [shift, 0.0, 0.0]).unwrap();
        let mut m = Mesh::default();
        m.merge(&lower, "nm");
        m.merge(&upper, "m");
        m
    }

    #[test]
    fn tangent_frame_is_orthonormal() {
        for n in [Vec3::x(), Vec3::new(1.0, 2.0, -0.5).normalize(), -Vec3::z(), Vec3::new(0.3, 0.3, 0.9).normalize()] {
            let (t1, t2) = tangent_frame(&n);
            for (a, b) in [(t1, t2), (t1, n), (t2, n)] {
                assert!(a.dot(&b).abs() < 1e-14);
            }
            assert!((t1.norm() - 1.0).abs() < 1e-14 && (t2.norm() - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn clipping_of_offset_squares() {
        let a = [[0.0, 0.0], [2.0, 0.0], [2.0, 2.0], [0.0, 2.0]];
        let b = [[1.0, 1.0], [3.0, 1.0], [3.0, 3.0], [1.0, 3.0]];
        let c = clip_polygon(&b, &a);
        assert!((polygon_area(&c) - 1.0).abs() < 1e-14);
        let far = [[5.0, 5.0], [6.0, 5.0], [6.0, 6.0], [5.0, 6.0]];
        assert!(polygon_area(&clip_polygon(&far, &a)).abs() < 1e-14);
        // touching along an edge only
        let touch = [[2.0, 0.0], [3.0, 0.0], [3.0, 2.0], [2.0, 2.0]];
        assert!(polygon_area(&clip_polygon(&touch, &a)).abs() < 1e-14);
    }

    #[test]
    fn conforming_interface_has_m_equal_d() {
        let mesh = stacked([3, 2], [3, 2], 0.0);
        let topo = InterfaceTopology::build(&mesh, "nm.zmax", "m.zmin").unwrap();
        for space in [MultiplierSpace::P0, MultiplierSpace::Nodal] {
            let c = MortarCoupling::assemble(&mesh, &topo, space).unwrap();
            // map mortar node -> coincident non-mortar node
            let mut md = c.m.to_dense();
            let dd = c.d.to_dense();
            for &b in &topo.mortar_nodes {
                let a = topo
                    .non_mortar_nodes
                    .iter()
                    .copied()
                    .find(|&a| (mesh.nodes[a] - mesh.nodes[b]).norm() < 1e-12)
                    .unwrap();
                for i in 0..md.nrows() {
                    md[(i, a)] += md[(i, b)];
                    md[(i, b)] = 0.0;
                }
            }
            assert!((md - dd).abs().max() < 1e-13, "{space:?}");
        }
    }

    #[test]
    fn nonconforming_constants_are_reproduced() {
        let mesh = stacked([4, 3], [3, 5], 0.0);
        let topo = InterfaceTopology::build(&mesh, "nm.zmax", "m.zmin").unwrap();
        for space in [MultiplierSpace::P0, MultiplierSpace::Nodal] {
            let c = MortarCoupling::assemble(&mesh, &topo, space).unwrap();
            for (i, e) in c.coverage_defect().iter().enumerate() {
                assert!(e.abs() < 1e-10, "{space:?} multiplier {i}: {e}");
            }
            // rigid translation produces no jump
            let u: Vec<f64> = (0..3 * mesh.nodes.len()).map(|d| [0.3, -1.0, 2.0][d % 3]).collect();
            assert!(c.integrated_jump(&u).iter().all(|j| j.norm() < 1e-12));
        }
    }

    #[test]
    fn contact_normal_points_into_non_mortar_body() {
        let mesh = stacked([2, 2], [1, 1], 0.0);
        let topo = InterfaceTopology::build(&mesh, "nm.zmax", "m.zmin").unwrap();
        let c = MortarCoupling::assemble(&mesh, &topo, MultiplierSpace::P0).unwrap();
        for n in &c.normals {
            assert!((n + Vec3::z()).norm() < 1e-14);
        }
        // opening: lower block moves down
        let u: Vec<f64> = (0..mesh.nodes.len())
            .flat_map(|i| if mesh.nodes[i].z < -0.5 || (i < 18 && mesh.nodes[i].z < 1e-9) { [0.0, 0.0, -0.01] } else { [0.0; 3] })
            .collect();
        for (g, n) in c.mean_jump(&u).iter().zip(&c.normals) {
            assert!((g.dot(n) - 0.01).abs() < 1e-14);
        }
    }

    #[test]
    fn partial_overlap_is_clipped() {
        let mesh = stacked([1, 1], [1, 1], 0.25);
        let topo = InterfaceTopology::build(&mesh, "nm.zmax", "m.zmin").unwrap();
        let c = MortarCoupling::assemble(&mesh, &topo, MultiplierSpace::P0).unwrap();
        assert_eq!(c.pairs.len(), 1);
        assert!((c.pairs[0].area - 0.75).abs() < 1e-14);
        assert!((c.coverage_defect()[0] - 0.25).abs() < 1e-14);
        assert!(c.pairs_csv(&topo).lines().count() == 2);
    }
}
