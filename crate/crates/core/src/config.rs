//! TOML run configuration.
//!
//! ```toml
//! [[mesh.blocks]]
//! name = "left"
//! extent = [5.0, 5.0, 15.0]
//! divisions = [3, 10, 12]
//!
//! [materials.0]
//! young = 2000.0
//! poisson = 0.25
//!
//! [[interfaces]]
//! name = "fault"
//! non_mortar = "right.xmin"
//! mortar = "left.xmax"
//! friction_angle_deg = 30.0
//!
//! [loads]
//! steps = 4
//! [[loads.dirichlet]]
//! set = "left.zmin"
//! components = [0, 1, 2]
//! ```
//!
//! Relative file paths are resolved against the directory of the config file.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::elasticity::{ElasticMaterial, LoadCase};
use crate::error::{Error, Result};
use crate::hex::Vec3;
use crate::io::{load_mesh, read_cell_forces};
use crate::mesh::{generate_mapped, generate_structured, uniform_params, Mesh};
use crate::solver::{InterfaceDef, Problem, SolverConfig};

/// Hexahedral block: either axis-aligned (`extent`, `offset`) or mapped from
/// eight corners in the usual hex node order. `params` optionally replaces the
/// uniform spacing per axis with explicit coordinates in `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BlockSpec {
    pub name: String,
    #[serde(default)]
    pub extent: Option<[f64; 3]>,
    #[serde(default)]
    pub offset: [f64; 3],
    #[serde(default)]
    pub corners: Option<[[f64; 3]; 8]>,
    #[serde(default)]
    pub divisions: Option<[usize; 3]>,
    #[serde(default)]
    pub params: Option<[Vec<f64>; 3]>,
    #[serde(default)]
    pub region: u32,
}

impl BlockSpec {
    pub fn build(&self) -> Result<Mesh> {
        let mut m = match (&self.extent, &self.corners) {
            (Some(e), None) => {
                let d = self
                    .divisions
                    .ok_or_else(|| Error::Config(format!("block '{}': divisions missing", self.name)))?;
                generate_structured(*e, d, self.offset)?
            }
            (None, Some(c)) => {
                let params = match (&self.params, self.divisions) {
                    (Some(p), _) => p.clone(),
                    (None, Some(d)) => [uniform_params(d[0]), uniform_params(d[1]), uniform_params(d[2])],
                    (None, None) => {
                        return Err(Error::Config(format!("block '{}': divisions or params required", self.name)))
                    }
                };
                let corners: [Vec3; 8] = std::array::from_fn(|k| Vec3::from(c[k]) + Vec3::from(self.offset));
                generate_mapped(&corners, &params)?
            }
            _ => {
                return Err(Error::Config(format!(
                    "block '{}': give exactly one of extent or corners",
                    self.name
                )))
            }
        };
        m.set_region(self.region);
        Ok(m)
    }
}

/// Cells whose centroid lies inside the box get `region`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegionBox {
    pub box_min: [f64; 3],
    pub box_max: [f64; 3],
    pub region: u32,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeshSpec {
    /// Mesh file in the native text format.
    #[serde(default)]
    pub file: Option<PathBuf>,
    #[serde(default)]
    pub blocks: Vec<BlockSpec>,
    #[serde(default)]
    pub region_boxes: Vec<RegionBox>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    #[serde(default)]
    pub dir: Option<PathBuf>,
    #[serde(default)]
    pub dump_pairs: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub mesh: MeshSpec,
    /// Keyed by region id; TOML keys are strings, so they are parsed on use.
    pub materials: BTreeMap<String, ElasticMaterial>,
    #[serde(default)]
    pub interfaces: Vec<InterfaceDef>,
    #[serde(default)]
    pub loads: LoadCase,
    /// CSV of per-cell body forces (`fx,fy,fz` per line), overriding
    /// `loads.cell_body_forces`.
    #[serde(default)]
    pub body_force_file: Option<PathBuf>,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub output: OutputSpec,
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<(Self, PathBuf)> {
        let text = std::fs::read_to_string(path)?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok((Self::parse(&text)?, base))
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn build_mesh(&self, base: &Path) -> Result<Mesh> {
        let mut mesh = match &self.mesh.file {
            Some(f) => load_mesh(&base.join(f))?,
            None => Mesh::default(),
        };
        for b in &self.mesh.blocks {
            mesh.merge(&b.build()?, &b.name);
        }
        if mesh.cells.is_empty() {
            return Err(Error::Config("the mesh is empty: give mesh.file or mesh.blocks".into()));
        }
        for rb in &self.mesh.region_boxes {
            let (lo, hi) = (Vec3::from(rb.box_min), Vec3::from(rb.box_max));
            for c in 0..mesh.cells.len() {
                let x = mesh.cell_coords(c).iter().sum::<Vec3>() / 8.0;
                if (0..3).all(|k| x[k] >= lo[k] && x[k] <= hi[k]) {
                    mesh.regions[c] = rb.region;
                }
            }
        }
        Ok(mesh)
    }

    pub fn into_problem(self, base: &Path) -> Result<Problem> {
        let mesh = self.build_mesh(base)?;
        let mut loads = self.loads;
        if let Some(f) = &self.body_force_file {
            let text = std::fs::read_to_string(base.join(f))?;
            loads.cell_body_forces = Some(read_cell_forces(&text, mesh.cells.len())?);
        }
        let materials = self
            .materials
            .into_iter()
            .map(|(k, m)| {
                k.trim()
                    .parse::<u32>()
                    .map(|r| (r, m))
                    .map_err(|_| Error::Config(format!("material key '{k}' is not a region id")))
            })
            .collect::<Result<BTreeMap<_, _>>>()?;
        if loads.steps == 0 {
            loads.steps = 1;
        }
        Ok(Problem {
            mesh,
            materials,
            interfaces: self.interfaces,
            loads,
            solver: self.solver,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mortar::MultiplierSpace;

    const SAMPLE: &str = r#"
[[mesh.blocks]]
name = "lower"
extent = [1.0, 1.0, 1.0]
divisions = [2, 2, 2]

[[mesh.blocks]]
name = "upper"
extent = [1.0, 1.0, 1.0]
offset = [0.0, 0.0, 1.0]
divisions = [3, 3, 3]
region = 1

[materials.0]
young = 1000.0
poisson = 0.0

[materials.1]
young = 1000.0
poisson = 0.0

[[interfaces]]
name = "glue"
non_mortar = "upper.zmin"
mortar = "lower.zmax"
tied = true

[loads]
steps = 1

[[loads.dirichlet]]
set = "lower.zmin"
components = [0, 1, 2]

[[loads.tractions]]
set = "upper.zmax"
value = [0.0, 0.0, -1.0]

[solver]
multiplier_space = "p0"
"#;

    #[test]
    fn sample_builds_a_problem() {
        let cfg = RunConfig::parse(SAMPLE).unwrap();
        assert_eq!(cfg.solver.multiplier_space, MultiplierSpace::P0);
        let p = cfg.into_problem(Path::new(".")).unwrap();
        assert_eq!(p.mesh.cells.len(), 8 + 27);
        assert_eq!(p.mesh.regions.iter().filter(|&&r| r == 1).count(), 27);
        assert!(p.mesh.face_sets.contains_key("upper.zmin"));
    }

    #[test]
    fn round_trip_through_toml() {
        let cfg = RunConfig::parse(SAMPLE).unwrap();
        let back = RunConfig::parse(&cfg.to_toml().unwrap()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn unknown_keys_and_bad_blocks_are_rejected() {
        assert!(matches!(RunConfig::parse("[mesh]\nfoo = 1\n[materials]\n"), Err(Error::Config(_))));
        let both = r#"
[[mesh.blocks]]
name = "b"
extent = [1.0, 1.0, 1.0]
corners = [[0,0,0],[1,0,0],[1,1,0],[0,1,0],[0,0,1],[1,0,1],[1,1,1],[0,1,1]]
divisions = [1, 1, 1]
[materials.0]
young = 1.0
poisson = 0.0
"#;
        let cfg = RunConfig::parse(both).unwrap();
        assert!(matches!(cfg.into_problem(Path::new(".")), Err(Error::Config(_))));
        let bad_key = RunConfig::parse(&SAMPLE.replace("[materials.1]", "[materials.soft]")).unwrap();
        assert!(matches!(bad_key.into_problem(Path::new(".")), Err(Error::Config(_))));
        let empty = RunConfig::parse("[materials.0]\nyoung = 1.0\npoisson = 0.0\n").unwrap();
        assert!(matches!(empty.into_problem(Path::new(".")), Err(Error::Config(_))));
    }

    #[test]
    fn region_boxes_override_block_regions() {
        let text = format!(
            "{SAMPLE}\n[[mesh.region_boxes]]\nbox_min = [-1.0, -1.0, -1.0]\nbox_max = [2.0, 2.0, 0.5]\nregion = 1\n"
        );
        let p = RunConfig::parse(&text).unwrap().into_problem(Path::new(".")).unwrap();
        assert_eq!(p.mesh.regions.iter().filter(|&&r| r == 1).count(), 27 + 4);
    }
}
