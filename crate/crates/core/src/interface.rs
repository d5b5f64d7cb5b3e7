//! Interface topology between a non-mortar and a mortar face set.

use std::collections::{BTreeMap, BTreeSet};

use crate::error::{Error, Result};
use crate::mesh::{face_diameter, is_degenerate, Face, Mesh};

/// Edge shared by two non-mortar faces (indices into `non_mortar`).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct InternalEdge {
    pub face_k: usize,
    pub face_l: usize,
    pub nodes: (usize, usize),
}

#[derive(Debug, Clone)]
pub struct InterfaceTopology {
    pub name: String,
    pub non_mortar: Vec<Face>,
    pub mortar: Vec<Face>,
    pub internal_edges: Vec<InternalEdge>,
    /// Mean non-mortar face diameter over mean mortar face diameter.
    pub refinement_ratio: f64,
    pub non_mortar_size: f64,
    pub mortar_size: f64,
    /// Sorted unique mesh nodes of each side.
    pub non_mortar_nodes: Vec<usize>,
    pub mortar_nodes: Vec<usize>,
    /// Mortar nodes not on the geometric boundary of the mortar surface.
    pub internal_mortar_nodes: Vec<usize>,
}

impl InterfaceTopology {
    pub fn build(mesh: &Mesh, non_mortar_set: &str, mortar_set: &str) -> Result<Self> {
        let non_mortar = mesh.face_set(non_mortar_set)?;
        let mortar = mesh.face_set(mortar_set)?;
        Self::from_faces(
            mesh,
            format!("{non_mortar_set}/{mortar_set}"),
            non_mortar,
            mortar,
        )
    }

    pub fn from_faces(mesh: &Mesh, name: String, non_mortar: Vec<Face>, mortar: Vec<Face>) -> Result<Self> {
        if non_mortar.is_empty() || mortar.is_empty() {
            return Err(Error::Config(format!("interface '{name}' has an empty face set")));
        }
        for (side, faces) in [("non-mortar", &non_mortar), ("mortar", &mortar)] {
            for f in faces.iter() {
                if is_degenerate(&mesh.face_coords(f)) {
                    return Err(Error::InvalidGeometry(format!(
                        "{side} face of cell {} (local {}) on interface '{name}' is degenerate",
                        f.cell, f.local
                    )));
                }
            }
        }
        let nm_edges = edge_map(&non_mortar);
        let mut internal_edges = Vec::new();
        for (&(a, b), faces) in &nm_edges {
            if faces.len() == 2 {
                internal_edges.push(InternalEdge {
                    face_k: faces[0],
                    face_l: faces[1],
                    nodes: (a, b),
                });
            } else if faces.len() > 2 {
                return Err(Error::InvalidGeometry(format!(
                    "non-mortar edge ({a},{b}) on '{name}' is shared by {} faces",
                    faces.len()
                )));
            }
        }
        let m_edges = edge_map(&mortar);
        let boundary: BTreeSet<usize> = m_edges
            .iter()
            .filter(|(_, f)| f.len() == 1)
            .flat_map(|(&(a, b), _)| [a, b])
            .collect();
        let nodes_of = |faces: &[Face]| -> Vec<usize> {
            let s: BTreeSet<usize> = faces.iter().flat_map(|f| f.nodes).collect();
            s.into_iter().collect()
        };
        let mortar_nodes = nodes_of(&mortar);
        let internal_mortar_nodes = mortar_nodes.iter().copied().filter(|n| !boundary.contains(n)).collect();
        let mean_diam = |faces: &[Face]| -> f64 {
            faces.iter().map(|f| face_diameter(&mesh.face_coords(f))).sum::<f64>() / faces.len() as f64
        };
        let non_mortar_size = mean_diam(&non_mortar);
        let mortar_size = mean_diam(&mortar);
        Ok(Self {
            name,
            non_mortar_nodes: nodes_of(&non_mortar),
            mortar_nodes,
            internal_mortar_nodes,
            refinement_ratio: non_mortar_size / mortar_size,
            non_mortar_size,
            mortar_size,
            non_mortar,
            mortar,
            internal_edges,
        })
    }

    pub fn num_faces(&self) -> usize {
        self.non_mortar.len()
    }
}

/// Map from sorted node pair to the faces containing that edge.
fn edge_map(faces: &[Face]) -> BTreeMap<(usize, usize), Vec<usize>> {
    let mut map: BTreeMap<(usize, usize), Vec<usize>> = BTreeMap::new();
    for (fi, f) in faces.iter().enumerate() {
        for a in 0..4 {
            let (p, q) = (f.nodes[a], f.nodes[(a + 1) % 4]);
            map.entry((p.min(q), p.max(q))).or_default().push(fi);
        }
    }
    map
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::generate_structured;

    fn two_blocks(n_nm: usize, n_m: usize) -> Mesh {
        let lower = generate_structured([1.0, 1.0, 1.0], [n_nm, n_nm, 1], [0.0, 0.0, -1.0]).unwrap();
        let upper = generate_structured([1.0, 1.0, 1.0], [n_m, n_m, 1], [0.0, 0.0, 0.0]).unwrap();
        let mut m = Mesh::default();
        m.merge(&lower, "nm");
        m.merge(&upper, "m");
        m
    }

    #[test]
    fn conforming_two_by_two_patch() {
        let m = two_blocks(2, 2);
        let it = InterfaceTopology::build(&m, "nm.zmax", "m.zmin").unwrap();
        assert_eq!(it.non_mortar.len(), 4);
        assert_eq!(it.internal_edges.len(), 4);
        assert_eq!(it.internal_mortar_nodes.len(), 1);
        assert!((it.refinement_ratio - 1.0).abs() < 1e-14);
    }

    #[test]
    fn base_patch_refinement_ratio() {
        let m = two_blocks(4, 2);
        let it = InterfaceTopology::build(&m, "nm.zmax", "m.zmin").unwrap();
        assert!((it.refinement_ratio - 0.5).abs() < 1e-14);
        assert_eq!(it.non_mortar.len(), 16);
    }

    #[test]
    fn single_face_has_no_edges() {
        let m = two_blocks(1, 1);
        let it = InterfaceTopology::build(&m, "nm.zmax", "m.zmin").unwrap();
        assert!(it.internal_edges.is_empty());
        assert!(it.internal_mortar_nodes.is_empty());
    }

    #[test]
    fn structured_edge_count() {
        for (mx, ny) in [(3usize, 5usize), (4, 4), (1, 6)] {
            let blk = generate_structured([1.0, 1.0, 1.0], [mx, ny, 1], [0.0; 3]).unwrap();
            let other = generate_structured([1.0, 1.0, 1.0], [1, 1, 1], [0.0, 0.0, 1.0]).unwrap();
            let mut m = Mesh::default();
            m.merge(&blk, "a");
            m.merge(&other, "b");
            let it = InterfaceTopology::build(&m, "a.zmax", "b.zmin").unwrap();
            assert_eq!(it.internal_edges.len(), mx * (ny - 1) + ny * (mx - 1));
            for e in &it.internal_edges {
                assert_ne!(e.face_k, e.face_l);
            }
        }
    }

    #[test]
    fn degenerate_face_rejected() {
        let mut m = two_blocks(1, 1);
        // collapse the non-mortar top face onto a line
        let f = m.face_set("nm.zmax").unwrap()[0];
        let p = m.nodes[f.nodes[0]];
        m.nodes[f.nodes[1]] = p;
        m.nodes[f.nodes[2]] = p;
        let r = InterfaceTopology::from_faces(&m, "x".into(), vec![f], m.face_set("m.zmin").unwrap());
        assert!(matches!(r, Err(Error::InvalidGeometry(_))));
    }
}
