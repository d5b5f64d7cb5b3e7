//! Traction-jump stabilization for P0 multipliers.
//!
//! Every internal mortar node defines a macroelement. Its local Schur
//! estimate `S̃ = B̌ᵀ Ď_A⁻¹ B̌` scales a penalty on the traction jump across
//! each internal edge of the non-mortar faces it contains.

use std::collections::{BTreeMap, BTreeSet};

use nalgebra::{DMatrix, Matrix3};

use crate::error::{Error, Result};
use crate::friction::{Frame, Regime};
use crate::hex::Vec3;
use crate::interface::InterfaceTopology;
use crate::mortar::MortarCoupling;
use crate::sparse::{CsrMatrix, TripletBuilder};

#[derive(Debug, Clone, PartialEq)]
pub struct Macroelement {
    pub mortar_node: usize,
    /// Non-mortar face indices, sorted.
    pub faces: Vec<usize>,
    /// Indices into `InterfaceTopology::internal_edges`.
    pub edges: Vec<usize>,
    /// Mesh nodes coupled to the local faces through D or M.
    pub nodes: Vec<usize>,
}

pub fn build_macroelements(topo: &InterfaceTopology, coupling: &MortarCoupling) -> Vec<Macroelement> {
    let mut mortar_faces_of: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (k, f) in topo.mortar.iter().enumerate() {
        for n in f.nodes {
            mortar_faces_of.entry(n).or_default().push(k);
        }
    }
    let mut overlaps: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for p in &coupling.pairs {
        overlaps.entry(p.mortar).or_default().push(p.non_mortar);
    }
    let g = coupling.jump_operator();
    let mut out = Vec::new();
    for &node in &topo.internal_mortar_nodes {
        let faces: BTreeSet<usize> = mortar_faces_of[&node]
            .iter()
            .filter_map(|k| overlaps.get(k))
            .flatten()
            .copied()
            .collect();
        if faces.is_empty() {
            continue;
        }
        let edges = topo
            .internal_edges
            .iter()
            .enumerate()
            .filter(|(_, e)| faces.contains(&e.face_k) && faces.contains(&e.face_l))
            .map(|(i, _)| i)
            .collect();
        let nodes: BTreeSet<usize> = faces.iter().flat_map(|&f| g.row(f).map(|(j, _)| j)).collect();
        out.push(Macroelement {
            mortar_node: node,
            faces: faces.into_iter().collect(),
            edges,
            nodes: nodes.into_iter().collect(),
        });
    }
    out
}

/// Local Schur estimate over the macroelement's traction DOFs (3 per face,
/// ordered as `macro.faces`). `a_diag` is the stiffness diagonal over all
/// displacement DOFs; DOFs with `free[d] == false` are skipped.
pub fn local_schur(macro_el: &Macroelement, jump: &CsrMatrix, a_diag: &[f64], free: &[bool]) -> Result<DMatrix<f64>> {
    let nf = macro_el.faces.len();
    let mut s = DMatrix::zeros(3 * nf, 3 * nf);
    let rows: Vec<BTreeMap<usize, f64>> = macro_el.faces.iter().map(|&f| jump.row(f).collect()).collect();
    for &node in &macro_el.nodes {
        for k in 0..3 {
            let d = 3 * node + k;
            if !free[d] {
                continue;
            }
            if !(a_diag[d] > 0.0) {
                return Err(Error::Assembly {
                    cell: usize::MAX,
                    msg: format!("stiffness diagonal of free DOF {d} is {} in a stabilization macroelement", a_diag[d]),
                });
            }
            let inv = 1.0 / a_diag[d];
            for a in 0..nf {
                let Some(ga) = rows[a].get(&node) else { continue };
                for b in 0..nf {
                    if let Some(gb) = rows[b].get(&node) {
                        s[(3 * a + k, 3 * b + k)] += ga * gb * inv;
                    }
                }
            }
        }
    }
    Ok(s)
}

/// `S_E = ½ (S̃_KK + S̃_LL)` from local face positions `k` and `l`.
pub fn edge_tensor(s_tilde: &DMatrix<f64>, k: usize, l: usize) -> Matrix3<f64> {
    let kk: Matrix3<f64> = s_tilde.fixed_view::<3, 3>(3 * k, 3 * k).into_owned();
    let ll: Matrix3<f64> = s_tilde.fixed_view::<3, 3>(3 * l, 3 * l).into_owned();
    (kk + ll) * 0.5
}

#[derive(Debug, Clone)]
pub struct Stabilization {
    pub macroelements: Vec<Macroelement>,
    /// Accumulated tensor per internal edge (zero if no macroelement covers it).
    pub edge_tensors: Vec<Matrix3<f64>>,
    pub h: CsrMatrix,
    /// Internal edges that no macroelement reached.
    pub uncovered_edges: usize,
}

fn push_edge(t: &mut TripletBuilder, k: usize, l: usize, s: &Matrix3<f64>) {
    for r in 0..3 {
        for c in 0..3 {
            let v = s[(r, c)];
            t.push(3 * k + r, 3 * k + c, v);
            t.push(3 * l + r, 3 * l + c, v);
            t.push(3 * k + r, 3 * l + c, -v);
            t.push(3 * l + r, 3 * k + c, -v);
        }
    }
}

pub fn assemble_h(
    topo: &InterfaceTopology,
    coupling: &MortarCoupling,
    a_diag: &[f64],
    free: &[bool],
) -> Result<Stabilization> {
    let macros = build_macroelements(topo, coupling);
    let jump = coupling.jump_operator();
    let mut tensors = vec![Matrix3::zeros(); topo.internal_edges.len()];
    let mut covered = vec![false; topo.internal_edges.len()];
    for m in &macros {
        let s = local_schur(m, &jump, a_diag, free)?;
        let pos: BTreeMap<usize, usize> = m.faces.iter().enumerate().map(|(i, &f)| (f, i)).collect();
        for &e in &m.edges {
            let edge = &topo.internal_edges[e];
            tensors[e] += edge_tensor(&s, pos[&edge.face_k], pos[&edge.face_l]);
            covered[e] = true;
        }
    }
    let n = topo.num_faces();
    let mut t = TripletBuilder::new(3 * n, 3 * n);
    for (e, s) in tensors.iter().enumerate() {
        let edge = &topo.internal_edges[e];
        push_edge(&mut t, edge.face_k, edge.face_l, s);
    }
    Ok(Stabilization {
        macroelements: macros,
        edge_tensors: tensors,
        h: t.build(),
        uncovered_edges: covered.iter().filter(|c| !**c).count(),
    })
}

impl Stabilization {
    /// Stabilization restricted to the current regimes: full tensor between
    /// two stick faces, normal-normal part when a slip face is involved, and
    /// nothing across an open face.
    pub fn active_matrix(&self, topo: &InterfaceTopology, regimes: &[Regime], frames: &[Frame]) -> CsrMatrix {
        let n = topo.num_faces();
        let mut t = TripletBuilder::new(3 * n, 3 * n);
        for (e, s) in self.edge_tensors.iter().enumerate() {
            let edge = &topo.internal_edges[e];
            let (k, l) = (edge.face_k, edge.face_l);
            match (regimes[k], regimes[l]) {
                (Regime::Open, _) | (_, Regime::Open) => {}
                (Regime::Stick, Regime::Stick) => push_edge(&mut t, k, l, s),
                _ => {
                    let nb: Vec3 = (frames[k].n + frames[l].n).normalize();
                    let p = nb * nb.transpose();
                    push_edge(&mut t, k, l, &(p * s * p));
                }
            }
        }
        t.build()
    }
}
