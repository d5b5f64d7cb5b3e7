//! Linear-elastic Q1 hexahedra: stiffness, load vectors and Dirichlet handling.

use std::collections::BTreeMap;

use nalgebra::{SMatrix, SVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hex::{hex_jacobian, hex_shape, hex_shape_grad, quad_point, quad_shape, Vec3};
use crate::mesh::Mesh;
use crate::quadrature::{hex_rule, quad_rule};
use crate::sparse::{CsrMatrix, TripletBuilder};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ElasticMaterial {
    pub young: f64,
    pub poisson: f64,
}

impl ElasticMaterial {
    pub fn new(young: f64, poisson: f64) -> Result<Self> {
        let m = Self { young, poisson };
        m.check()?;
        Ok(m)
    }

    pub fn check(&self) -> Result<()> {
        if !(self.young > 0.0) || !(self.poisson > -1.0 && self.poisson < 0.5) {
            return Err(Error::Config(format!(
                "elastic material needs E > 0 and -1 < nu < 0.5 (got E={}, nu={})",
                self.young, self.poisson
            )));
        }
        Ok(())
    }

    /// Isotropic constitutive matrix in Voigt order xx, yy, zz, xy, yz, zx
    /// (engineering shear strains).
    pub fn constitutive(&self) -> SMatrix<f64, 6, 6> {
        let (e, nu) = (self.young, self.poisson);
        let lambda = e * nu / ((1.0 + nu) * (1.0 - 2.0 * nu));
        let mu = e / (2.0 * (1.0 + nu));
        let mut d = SMatrix::<f64, 6, 6>::zeros();
        for i in 0..3 {
            for j in 0..3 {
                d[(i, j)] = lambda;
            }
            d[(i, i)] += 2.0 * mu;
            d[(i + 3, i + 3)] = mu;
        }
        d
    }
}

type Bmat = SMatrix<f64, 6, 24>;

fn strain_displacement(grad_x: &[[f64; 3]; 8]) -> Bmat {
    let mut b = Bmat::zeros();
    for a in 0..8 {
        let [dx, dy, dz] = grad_x[a];
        let c = 3 * a;
        b[(0, c)] = dx;
        b[(1, c + 1)] = dy;
        b[(2, c + 2)] = dz;
        b[(3, c)] = dy;
        b[(3, c + 1)] = dx;
        b[(4, c + 1)] = dz;
        b[(4, c + 2)] = dy;
        b[(5, c)] = dz;
        b[(5, c + 2)] = dx;
    }
    b
}

/// Physical shape-function gradients and Jacobian determinant at a point.
fn physical_gradients(coords: &[Vec3; 8], xi: [f64; 3]) -> Option<([[f64; 3]; 8], f64)> {
    let g = hex_shape_grad(xi);
    let j = hex_jacobian(coords, &g);
    let det = j.determinant();
    let jinv = j.try_inverse()?;
    let mut gx = [[0.0; 3]; 8];
    for a in 0..8 {
        for i in 0..3 {
            // dN/dx_i = Σ_k dN/dξ_k ∂ξ_k/∂x_i
            gx[a][i] = (0..3).map(|k| g[a][k] * jinv[(k, i)]).sum();
        }
    }
    Some((gx, det))
}

/// Element stiffness with an `order`³ Gauss rule.
pub fn element_stiffness(coords: &[Vec3; 8], mat: &ElasticMaterial, order: usize) -> Option<SMatrix<f64, 24, 24>> {
    let d = mat.constitutive();
    let mut k = SMatrix::<f64, 24, 24>::zeros();
    for (xi, w) in hex_rule(order) {
        let (gx, det) = physical_gradients(coords, xi)?;
        if !(det > 0.0) {
            return None;
        }
        let b = strain_displacement(&gx);
        k += b.transpose() * d * b * (det * w);
    }
    Some(0.5 * (k + k.transpose()))
}

/// Global stiffness over all nodes (3 DOFs per node, `3*node + component`).
pub fn assemble_stiffness(mesh: &Mesh, materials: &BTreeMap<u32, ElasticMaterial>) -> Result<CsrMatrix> {
    let ndof = 3 * mesh.nodes.len();
    let mut t = TripletBuilder::new(ndof, ndof);
    for (c, cell) in mesh.cells.iter().enumerate() {
        let region = mesh.regions[c];
        let mat = materials.get(&region).ok_or_else(|| Error::Config(format!("no material for region {region}")))?;
        let ke = element_stiffness(&mesh.cell_coords(c), mat, 2).ok_or_else(|| Error::Assembly {
            cell: c,
            msg: "singular or negative element Jacobian".into(),
        })?;
        for a in 0..8 {
            for i in 0..3 {
                let row = 3 * cell[a] + i;
                for b in 0..8 {
                    for j in 0..3 {
                        t.push(row, 3 * cell[b] + j, ke[(3 * a + i, 3 * b + j)]);
                    }
                }
            }
        }
    }
    Ok(t.build())
}

/// Nodes selected either by a face set or by an axis-aligned box.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum NodeSelector {
    FaceSet { set: String },
    Box { box_min: [f64; 3], box_max: [f64; 3] },
}

impl NodeSelector {
    pub fn resolve(&self, mesh: &Mesh) -> Result<Vec<usize>> {
        match self {
            NodeSelector::FaceSet { set } => mesh.face_set_nodes(set),
            NodeSelector::Box { box_min, box_max } => {
                let tol = 1e-9 * mesh.diameter().max(1.0);
                Ok(mesh.nodes_in_box(Vec3::from(*box_min), Vec3::from(*box_max), tol))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DirichletBc {
    #[serde(flatten)]
    pub nodes: NodeSelector,
    /// Component indices 0 = x, 1 = y, 2 = z.
    pub components: Vec<usize>,
    #[serde(default)]
    pub value: f64,
    #[serde(default)]
    pub curve: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurfaceTraction {
    pub set: String,
    pub value: [f64; 3],
    #[serde(default)]
    pub curve: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BodyForce {
    /// Region tag; `None` applies to every cell.
    #[serde(default)]
    pub region: Option<u32>,
    pub value: [f64; 3],
    #[serde(default)]
    pub curve: Option<String>,
}

/// Loads, constraints and the pseudo-time schedule of a simulation.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct LoadCase {
    #[serde(default)]
    pub body_forces: Vec<BodyForce>,
    /// Optional per-cell body force (force / volume), scaled by `cell_force_curve`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cell_body_forces: Option<Vec<[f64; 3]>>,
    #[serde(default)]
    pub cell_force_curve: Option<String>,
    #[serde(default)]
    pub tractions: Vec<SurfaceTraction>,
    #[serde(default)]
    pub dirichlet: Vec<DirichletBc>,
    /// Named load curves: factor per load step (step 1 is index 0).
    #[serde(default)]
    pub curves: BTreeMap<String, Vec<f64>>,
    /// Number of load steps; 0 in a config file means 1.
    #[serde(default)]
    pub steps: usize,
}

impl LoadCase {
    /// Factor of a named curve at a 1-based step; missing curve name means 1,
    /// steps beyond the table repeat its last value.
    pub fn factor(&self, curve: &Option<String>, step: usize) -> Result<f64> {
        let Some(name) = curve else { return Ok(1.0) };
        let table = self
            .curves
            .get(name)
            .ok_or_else(|| Error::Config(format!("unknown load curve '{name}'")))?;
        if table.is_empty() {
            return Err(Error::Config(format!("load curve '{name}' is empty")));
        }
        Ok(table[(step.max(1) - 1).min(table.len() - 1)])
    }
}

/// External force vector at `step`, every term multiplied by `scale`.
pub fn assemble_loads(mesh: &Mesh, lc: &LoadCase, step: usize, scale: f64) -> Result<Vec<f64>> {
    if !scale.is_finite() {
        return Err(Error::Config("load scale must be finite".into()));
    }
    let mut f = vec![0.0; 3 * mesh.nodes.len()];
    let rule = hex_rule(2);
    let add_body = |c: usize, b: Vec3, f: &mut Vec<f64>| -> Result<()> {
        let coords = mesh.cell_coords(c);
        for (xi, w) in &rule {
            let (_, det) = physical_gradients(&coords, *xi).ok_or_else(|| Error::Assembly {
                cell: c,
                msg: "singular Jacobian in body-force integration".into(),
            })?;
            let n = hex_shape(*xi);
            for a in 0..8 {
                for i in 0..3 {
                    f[3 * mesh.cells[c][a] + i] += n[a] * b[i] * det * w;
                }
            }
        }
        Ok(())
    };
    for bf in &lc.body_forces {
        let s = scale * lc.factor(&bf.curve, step)?;
        if s == 0.0 {
            continue;
        }
        let b = Vec3::from(bf.value) * s;
        for c in 0..mesh.cells.len() {
            if bf.region.map_or(true, |r| r == mesh.regions[c]) {
                add_body(c, b, &mut f)?;
            }
        }
    }
    if let Some(field) = &lc.cell_body_forces {
        if field.len() != mesh.cells.len() {
            return Err(Error::Config(format!(
                "per-cell body force has {} entries for {} cells",
                field.len(),
                mesh.cells.len()
            )));
        }
        let s = scale * lc.factor(&lc.cell_force_curve, step)?;
        if s != 0.0 {
            for (c, b) in field.iter().enumerate() {
                add_body(c, Vec3::from(*b) * s, &mut f)?;
            }
        }
    }
    let qrule = quad_rule(2);
    for tr in &lc.tractions {
        let faces = mesh.face_set(&tr.set)?;
        let s = scale * lc.factor(&tr.curve, step)?;
        let tv = Vec3::from(tr.value) * s;
        for face in &faces {
            let coords = mesh.face_coords(face);
            for (xi, w) in &qrule {
                let (_, da) = quad_point(&coords, *xi);
                let n = quad_shape(*xi);
                for a in 0..4 {
                    for i in 0..3 {
                        f[3 * face.nodes[a] + i] += n[a] * tv[i] * da.norm() * w;
                    }
                }
            }
        }
    }
    Ok(f)
}

/// Prescribed displacement values keyed by global DOF.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Constraints {
    pub values: BTreeMap<usize, f64>,
}

impl Constraints {
    pub fn insert(&mut self, dof: usize, value: f64) -> Result<()> {
        if let Some(&old) = self.values.get(&dof) {
            let tol = 1e-14 * old.abs().max(value.abs()).max(1e-300);
            if (old - value).abs() > tol {
                return Err(Error::Config(format!(
                    "DOF {dof} (node {}, component {}) prescribed twice with different values {old} and {value}",
                    dof / 3,
                    dof % 3
                )));
            }
        }
        self.values.insert(dof, value);
        Ok(())
    }

    pub fn is_constrained(&self, dof: usize) -> bool {
        self.values.contains_key(&dof)
    }
}

/// Resolves the Dirichlet conditions of a load case at a step.
pub fn dirichlet_constraints(mesh: &Mesh, lc: &LoadCase, step: usize, scale: f64) -> Result<Constraints> {
    let mut cons = Constraints::default();
    for bc in &lc.dirichlet {
        let value = bc.value * scale * lc.factor(&bc.curve, step)?;
        let nodes = bc.nodes.resolve(mesh)?;
        if nodes.is_empty() {
            return Err(Error::Config(format!("Dirichlet selector {:?} matches no node", bc.nodes)));
        }
        for &n in &nodes {
            for &c in &bc.components {
                if c > 2 {
                    return Err(Error::Config(format!("invalid displacement component {c}")));
                }
                cons.insert(3 * n + c, value)?;
            }
        }
    }
    Ok(cons)
}

/// Partition of the displacement DOFs into free and constrained ones.
#[derive(Debug, Clone, PartialEq)]
pub struct DofMap {
    pub ndof: usize,
    pub free: Vec<usize>,
    /// Global DOF → position in `free`.
    pub free_index: Vec<Option<usize>>,
}

impl DofMap {
    pub fn new(ndof: usize, constraints: &Constraints) -> Self {
        let mut free = Vec::new();
        let mut free_index = vec![None; ndof];
        for (d, slot) in free_index.iter_mut().enumerate() {
            if !constraints.is_constrained(d) {
                *slot = Some(free.len());
                free.push(d);
            }
        }
        Self { ndof, free, free_index }
    }

    pub fn num_free(&self) -> usize {
        self.free.len()
    }
}

/// Reduced system after symmetric elimination of prescribed DOFs.
#[derive(Debug, Clone)]
pub struct ReducedSystem {
    pub matrix: CsrMatrix,
    pub rhs: Vec<f64>,
    pub dofs: DofMap,
}

impl ReducedSystem {
    /// Scatters a free-DOF solution back into a full vector with prescribed values.
    pub fn expand(&self, free_solution: &[f64], constraints: &Constraints) -> Vec<f64> {
        let mut u = vec![0.0; self.dofs.ndof];
        for (k, &d) in self.dofs.free.iter().enumerate() {
            u[d] = free_solution[k];
        }
        for (&d, &v) in &constraints.values {
            u[d] = v;
        }
        u
    }
}

/// Eliminates prescribed DOFs from `A u = f`: returns `A_ff` and `f_f - A_fc u_c`.
pub fn apply_dirichlet(a: &CsrMatrix, f: &[f64], constraints: &Constraints) -> ReducedSystem {
    let dofs = DofMap::new(a.nrows, constraints);
    let mut uc = vec![0.0; a.nrows];
    for (&d, &v) in &constraints.values {
        uc[d] = v;
    }
    let mut rhs = Vec::with_capacity(dofs.num_free());
    for &d in &dofs.free {
        let coupling: f64 = a
            .row(d)
            .filter(|(j, _)| constraints.is_constrained(*j))
            .map(|(j, v)| v * uc[j])
            .sum();
        rhs.push(f[d] - coupling);
    }
    ReducedSystem {
        matrix: a.select(&dofs.free, &dofs.free),
        rhs,
        dofs,
    }
}

/// Reaction forces `A u - f` on the constrained DOFs.
pub fn reactions(a: &CsrMatrix, u: &[f64], f: &[f64], constraints: &Constraints) -> BTreeMap<usize, f64> {
    constraints
        .values
        .keys()
        .map(|&d| (d, a.row(d).map(|(j, v)| v * u[j]).sum::<f64>() - f[d]))
        .collect()
}

/// Small dense helper used by tests and diagnostics.
pub fn voigt_strain(coords: &[Vec3; 8], u: &[f64; 24], xi: [f64; 3]) -> Option<SVector<f64, 6>> {
    let (gx, _) = physical_gradients(coords, xi)?;
    Some(strain_displacement(&gx) * SVector::<f64, 24>::from_column_slice(u))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::generate_structured;
    use crate::sparse::SparseCholesky;

    fn unit_materials(e: f64, nu: f64) -> BTreeMap<u32, ElasticMaterial> {
        BTreeMap::from([(0, ElasticMaterial::new(e, nu).unwrap())])
    }

    #[test]
    fn material_bounds() {
        assert!(ElasticMaterial::new(0.0, 0.2).is_err());
        assert!(ElasticMaterial::new(1.0, 0.5).is_err());
        assert!(ElasticMaterial::new(1.0, -1.0).is_err());
        assert!(ElasticMaterial::new(1.0, 0.49).is_ok());
    }

    #[test]
    fn stiffness_is_symmetric_with_rigid_null_space() {
        let mut mesh = generate_structured([1.0, 2.0, 1.5], [2, 3, 2], [0.0; 3]).unwrap();
        mesh.nodes[13].x += 0.05;
        let a = assemble_stiffness(&mesh, &unit_materials(1000.0, 0.3)).unwrap();
        assert_eq!(a.asymmetry(), 0.0);
        for comp in 0..3 {
            let u: Vec<f64> = (0..a.ncols).map(|d| if d % 3 == comp { 1.0 } else { 0.0 }).collect();
            let r = a.mul_vec(&u);
            assert!(r.iter().all(|v| v.abs() < 1e-10 * a.max_abs()));
        }
    }

    #[test]
    fn quadrature_orders_agree_for_affine_cell() {
        let mesh = generate_structured([1.3, 0.7, 2.0], [1, 1, 1], [0.0; 3]).unwrap();
        let mut x = mesh.cell_coords(0);
        // shear the block: still affine
        for p in x.iter_mut() {
            p.x += 0.3 * p.z;
        }
        let m = ElasticMaterial::new(200.0, 0.25).unwrap();
        let k2 = element_stiffness(&x, &m, 2).unwrap();
        let k3 = element_stiffness(&x, &m, 3).unwrap();
        assert!((k2 - k3).abs().max() <= 1e-12 * k3.abs().max());
    }

    fn uniaxial_column(q: f64) -> (Mesh, LoadCase) {
        let mesh = generate_structured([1.0, 1.0, 1.0], [1, 1, 1], [0.0; 3]).unwrap();
        let lc = LoadCase {
            tractions: vec![SurfaceTraction {
                set: "zmax".into(),
                value: [0.0, 0.0, q],
                curve: None,
            }],
            dirichlet: vec![DirichletBc {
                nodes: NodeSelector::FaceSet { set: "zmin".into() },
                components: vec![0, 1, 2],
                value: 0.0,
                curve: None,
            }],
            steps: 1,
            ..Default::default()
        };
        (mesh, lc)
    }

    #[test]
    fn single_cube_under_top_pressure() {
        let (mesh, lc) = uniaxial_column(-1.0);
        let a = assemble_stiffness(&mesh, &unit_materials(1000.0, 0.0)).unwrap();
        let f = assemble_loads(&mesh, &lc, 1, 1.0).unwrap();
        let cons = dirichlet_constraints(&mesh, &lc, 1, 1.0).unwrap();
        let red = apply_dirichlet(&a, &f, &cons);
        let x = SparseCholesky::new(&red.matrix).unwrap().solve(&red.rhs);
        let u = red.expand(&x, &cons);
        for n in 4..8 {
            assert!((u[3 * n + 2] + 0.001).abs() < 1e-15);
            assert!(u[3 * n].abs() < 1e-15 && u[3 * n + 1].abs() < 1e-15);
        }
        let reac = reactions(&a, &u, &f, &cons);
        let total_z: f64 = reac.iter().filter(|(d, _)| *d % 3 == 2).map(|(_, v)| v).sum();
        assert!((total_z - 1.0).abs() < 1e-12);
    }

    #[test]
    fn uniform_pressure_partition() {
        let (mesh, lc) = uniaxial_column(1.0);
        let f = assemble_loads(&mesh, &lc, 1, 1.0).unwrap();
        for n in 4..8 {
            assert!((f[3 * n + 2] - 0.25).abs() < 1e-15);
        }
        let f2 = assemble_loads(&mesh, &lc, 1, 2.5).unwrap();
        for (a, b) in f.iter().zip(&f2) {
            assert!((2.5 * a - b).abs() < 1e-15);
        }
        let empty = LoadCase {
            steps: 1,
            ..Default::default()
        };
        assert!(assemble_loads(&mesh, &empty, 1, 1.0).unwrap().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn unknown_traction_set_is_config_error() {
        let (mesh, mut lc) = uniaxial_column(1.0);
        lc.tractions[0].set = "nope".into();
        assert!(matches!(assemble_loads(&mesh, &lc, 1, 1.0), Err(Error::Config(_))));
    }

    #[test]
    fn conflicting_dirichlet_values() {
        let (mesh, mut lc) = uniaxial_column(1.0);
        lc.dirichlet.push(DirichletBc {
            nodes: NodeSelector::Box {
                box_min: [0.0, 0.0, 0.0],
                box_max: [0.0, 0.0, 0.0],
            },
            components: vec![2],
            value: 0.5,
            curve: None,
        });
        assert!(matches!(dirichlet_constraints(&mesh, &lc, 1, 1.0), Err(Error::Config(_))));
    }

    #[test]
    fn dirichlet_edge_cases() {
        let mesh = generate_structured([1.0; 3], [1, 1, 1], [0.0; 3]).unwrap();
        let a = assemble_stiffness(&mesh, &unit_materials(1.0, 0.2)).unwrap();
        let f = vec![1.0; a.nrows];
        let red = apply_dirichlet(&a, &f, &Constraints::default());
        assert_eq!(red.matrix, a);
        assert_eq!(red.rhs, f);
        let mut all = Constraints::default();
        for d in 0..a.nrows {
            all.insert(d, 0.1 * d as f64).unwrap();
        }
        let red = apply_dirichlet(&a, &f, &all);
        assert_eq!(red.dofs.num_free(), 0);
        let u = red.expand(&[], &all);
        assert_eq!(u[5], 0.5);
    }

    #[test]
    fn linear_field_patch_test() {
        // distorted interior node, linear boundary displacement
        let mut mesh = generate_structured([1.0, 1.0, 1.0], [2, 2, 2], [0.0; 3]).unwrap();
        mesh.nodes[13] += Vec3::new(0.1, -0.07, 0.05);
        let exact = |p: &Vec3| [1e-3 * (p.x + 2.0 * p.y), -2e-3 * p.z + 1e-3 * p.x, 5e-4 * (p.y - p.z)];
        let a = assemble_stiffness(&mesh, &unit_materials(100.0, 0.3)).unwrap();
        let mut cons = Constraints::default();
        for (n, p) in mesh.nodes.iter().enumerate() {
            if n != 13 {
                let e = exact(p);
                for c in 0..3 {
                    cons.insert(3 * n + c, e[c]).unwrap();
                }
            }
        }
        let red = apply_dirichlet(&a, &vec![0.0; a.nrows], &cons);
        let x = SparseCholesky::new(&red.matrix).unwrap().solve(&red.rhs);
        let u = red.expand(&x, &cons);
        let e = exact(&mesh.nodes[13]);
        for c in 0..3 {
            assert!((u[39 + c] - e[c]).abs() <= 1e-10 * 3e-3);
        }
    }
}
