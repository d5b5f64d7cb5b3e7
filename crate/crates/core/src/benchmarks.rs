//! Packaged benchmark problems, analytic oracles and reports.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use crate::analysis::{infsup_csv, infsup_entry, saddle_operators, InfSupEntry};
use crate::elasticity::{BodyForce, DirichletBc, ElasticMaterial, LoadCase, NodeSelector, SurfaceTraction};
use crate::error::{Error, Result};
use crate::friction::Regime;
use crate::hex::Vec3;
use crate::io::{interface_vtk, state_csv, volume_vtk};
use crate::mesh::{generate_mapped, generate_structured, geometric_params, graded_params, uniform_params, Mesh};
use crate::mortar::MultiplierSpace;
use crate::solver::{InterfaceDef, Model, Problem, SimulationState, SolverConfig, StepResult};

pub const BENCHMARKS: [&str; 6] = ["patch", "sliding", "fracture", "twoblock", "infsup", "layered"];

fn fix_all(set: &str) -> DirichletBc {
    DirichletBc {
        nodes: NodeSelector::FaceSet { set: set.into() },
        components: vec![0, 1, 2],
        value: 0.0,
        curve: None,
    }
}

fn fix(set: &str, components: &[usize], value: f64) -> DirichletBc {
    DirichletBc {
        nodes: NodeSelector::FaceSet { set: set.into() },
        components: components.to_vec(),
        value,
        curve: None,
    }
}

fn fix_box(lo: [f64; 3], hi: [f64; 3], components: &[usize]) -> DirichletBc {
    DirichletBc {
        nodes: NodeSelector::Box { box_min: lo, box_max: hi },
        components: components.to_vec(),
        value: 0.0,
        curve: None,
    }
}

fn traction(set: &str, value: [f64; 3], curve: Option<&str>) -> SurfaceTraction {
    SurfaceTraction {
        set: set.into(),
        value,
        curve: curve.map(Into::into),
    }
}

fn single_material(young: f64, poisson: f64) -> BTreeMap<u32, ElasticMaterial> {
    BTreeMap::from([(0, ElasticMaterial { young, poisson })])
}

/// Extruded quadrilateral `p` (counter-clockwise in xy) over `z ∈ [0, depth]`.
fn extruded(p: [[f64; 2]; 4], depth: f64, params: [Vec<f64>; 3]) -> Result<Mesh> {
    let mut c = [Vec3::zeros(); 8];
    for k in 0..4 {
        c[k] = Vec3::new(p[k][0], p[k][1], 0.0);
        c[k + 4] = Vec3::new(p[k][0], p[k][1], depth);
    }
    generate_mapped(&c, &params)
}

// ---------------------------------------------------------------- patch

/// Eight octant blocks of the unit cube with `2 + i + j + k` divisions each,
/// tied along twelve non-conforming interfaces; top pressure, fixed bottom.
pub fn patch_problem() -> Result<Problem> {
    let mut mesh = Mesh::default();
    let name = |i: usize, j: usize, k: usize| format!("b{i}{j}{k}");
    for k in 0..2 {
        for j in 0..2 {
            for i in 0..2 {
                let n = 2 + i + j + k;
                let b = generate_structured([0.5; 3], [n; 3], [0.5 * i as f64, 0.5 * j as f64, 0.5 * k as f64])?;
                mesh.merge(&b, &name(i, j, k));
            }
        }
    }
    let mut interfaces = Vec::new();
    let axes = [("x", [1, 0, 0]), ("y", [0, 1, 0]), ("z", [0, 0, 1])];
    for (ax, d) in axes {
        for k in 0..2 - d[2] {
            for j in 0..2 - d[1] {
                for i in 0..2 - d[0] {
                    let lo = name(i, j, k);
                    let hi = name(i + d[0], j + d[1], k + d[2]);
                    // the upper block has one more division: it carries the multipliers
                    interfaces.push(InterfaceDef::tied(
                        &format!("{lo}-{hi}"),
                        &format!("{hi}.{ax}min"),
                        &format!("{lo}.{ax}max"),
                    ));
                }
            }
        }
    }
    let mut dirichlet = Vec::new();
    let mut tractions = Vec::new();
    for j in 0..2 {
        for i in 0..2 {
            dirichlet.push(fix_all(&format!("{}.zmin", name(i, j, 0))));
            tractions.push(traction(&format!("{}.zmax", name(i, j, 1)), [0.0, 0.0, -1.0], None));
        }
    }
    Ok(Problem {
        mesh,
        materials: single_material(1000.0, 0.0),
        interfaces,
        loads: LoadCase {
            tractions,
            dirichlet,
            steps: 1,
            ..Default::default()
        },
        solver: SolverConfig::default(),
    })
}

// ---------------------------------------------------------------- sliding

pub const SLIDING_TAN_PHI: f64 = 0.1;
pub const SLIDING_TOP_DISPLACEMENT: f64 = -0.1;

/// Two trapezoidal blocks separated by a 45° fault from (0,1) to (2,3);
/// the upper block is pushed down and slides rigidly.
pub fn sliding_problem() -> Result<Problem> {
    let lower = extruded(
        [[0.0, 0.0], [2.0, 0.0], [2.0, 3.0], [0.0, 1.0]],
        1.0,
        [uniform_params(4), uniform_params(4), uniform_params(1)],
    )?;
    let upper = extruded(
        [[0.0, 1.0], [2.0, 3.0], [2.0, 4.0], [0.0, 4.0]],
        1.0,
        [uniform_params(3), uniform_params(3), uniform_params(1)],
    )?;
    let mut mesh = Mesh::default();
    mesh.merge(&lower, "lower");
    mesh.merge(&upper, "upper");
    let phi = SLIDING_TAN_PHI.atan().to_degrees();
    Ok(Problem {
        mesh,
        materials: single_material(5000.0, 0.25),
        interfaces: vec![InterfaceDef::frictional("fault", "lower.ymax", "upper.ymin", 0.0, phi)],
        loads: LoadCase {
            dirichlet: vec![
                fix("lower.ymin", &[1], 0.0),
                fix_box([2.0, 0.0, 0.0], [2.0, 0.0, 1.0], &[0, 1, 2]),
                fix("upper.ymax", &[1], SLIDING_TOP_DISPLACEMENT),
                fix_box([-1.0, -1.0, -1.0], [3.0, 5.0, 2.0], &[2]),
            ],
            steps: 1,
            ..Default::default()
        },
        solver: SolverConfig::default(),
    })
}

// ---------------------------------------------------------------- fracture

/// Parameters of the single inclined crack under uniaxial compression.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FractureParams {
    pub sigma: f64,
    pub psi_deg: f64,
    pub phi_deg: f64,
    pub young: f64,
    pub poisson: f64,
    pub half_length: f64,
}

impl Default for FractureParams {
    fn default() -> Self {
        Self {
            sigma: 100.0,
            psi_deg: 20.0,
            phi_deg: 30.0,
            young: 15000.0,
            poisson: 0.25,
            half_length: 1.0,
        }
    }
}

/// Closed-form normal traction and slip magnitude at arc length `xi ∈ [0, 2b]`
/// along a sliding crack in an infinite plane-strain body.
pub fn oracle_single_fracture(xi: f64, p: &FractureParams) -> Result<(f64, f64)> {
    let b = p.half_length;
    if !(0.0..=2.0 * b).contains(&xi) {
        return Err(Error::Domain(format!("xi = {xi} outside the crack [0, {}]", 2.0 * b)));
    }
    let (s, c) = p.psi_deg.to_radians().sin_cos();
    let t_n = -p.sigma * s * s;
    let drive = p.sigma * s * (c - s * p.phi_deg.to_radians().tan());
    let g = 4.0 * (1.0 - p.poisson * p.poisson) / p.young * drive * (b * b - (b - xi) * (b - xi)).max(0.0).sqrt();
    Ok((t_n, g))
}

/// Mesh controls of the fracture benchmark.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FractureMesh {
    pub half_width: f64,
    /// Uniform spacing near the crack on the non-mortar (lower) and mortar sides.
    pub h_non_mortar: f64,
    pub h_mortar: f64,
    pub core: f64,
    pub growth: f64,
}

impl Default for FractureMesh {
    fn default() -> Self {
        Self {
            half_width: 25.0,
            h_non_mortar: 0.025,
            h_mortar: 0.05,
            core: 1.2,
            growth: 1.25,
        }
    }
}

pub fn fracture_problem(p: &FractureParams, m: &FractureMesh) -> Result<Problem> {
    let w = m.half_width;
    let slope = p.psi_deg.to_radians().tan();
    let yl = -w * slope;
    let yr = w * slope;
    let px = |h: f64| graded_params(-w, w, -m.core, m.core, h, m.growth);
    let lower = extruded(
        [[-w, -w], [w, -w], [w, yr], [-w, yl]],
        1.0,
        [px(m.h_non_mortar), geometric_params(m.h_non_mortar / w, m.growth, true), uniform_params(2)],
    )?;
    let upper = extruded(
        [[-w, yl], [w, yr], [w, w], [-w, w]],
        1.0,
        [px(m.h_mortar), geometric_params(m.h_mortar / w, m.growth, false), uniform_params(2)],
    )?;
    let mut mesh = Mesh::default();
    mesh.merge(&lower, "lower");
    mesh.merge(&upper, "upper");
    // faces beyond the crack tips stay bonded
    let (s, c) = p.psi_deg.to_radians().sin_cos();
    let b = p.half_length;
    let xb = b * c;
    let big = 2.0 * w;
    let mut fault = InterfaceDef::frictional("crack", "lower.ymax", "upper.ymin", 0.0, p.phi_deg);
    fault.frozen_boxes = vec![
        [[-big, -big, -big], [-xb, big, big]],
        [[xb, -big, -big], [big, big, big]],
    ];
    let _ = s;
    Ok(Problem {
        mesh,
        materials: single_material(p.young, p.poisson),
        interfaces: vec![fault],
        loads: LoadCase {
            tractions: vec![
                traction("lower.xmax", [-p.sigma, 0.0, 0.0], None),
                traction("upper.xmax", [-p.sigma, 0.0, 0.0], None),
            ],
            dirichlet: vec![
                fix("lower.xmin", &[0], 0.0),
                fix("upper.xmin", &[0], 0.0),
                fix("lower.ymin", &[1], 0.0),
                fix_box([-big, -big, -big], [big, big, big], &[2]),
            ],
            steps: 1,
            ..Default::default()
        },
        solver: SolverConfig::default(),
    })
}

/// Arc-length coordinate `ξ ∈ [0, 2b]` of a point on the crack line.
pub fn crack_coordinate(p: &FractureParams, x: &Vec3) -> f64 {
    let (s, c) = p.psi_deg.to_radians().sin_cos();
    x.x * c + x.y * s + p.half_length
}

// ---------------------------------------------------------------- two blocks

/// Approximate load history: normal pressure and downward shear on the loaded
/// face per step. Only the resulting progression matters: stick through step
/// 7, slip starting at the top at step 8 and covering the fault by step 15.
pub const TWOBLOCK_NORMAL: [f64; 20] = [
    1.00, 1.00, 1.00, 1.00, 1.00, 1.00, 1.00, 1.00, 0.85, 0.70, 0.60, 0.50, 0.45, 0.40, 0.25, 0.25, 0.25, 0.25, 0.25, 0.25,
];
pub const TWOBLOCK_SHEAR: [f64; 20] = [
    0.00, 0.00, 0.16, 0.32, 0.48, 0.64, 0.80, 0.96, 1.12, 1.28, 1.44, 1.60, 1.76, 1.92, 2.08, 2.24, 2.40, 2.56, 2.72, 2.88,
];

/// Two stacked prisms `[0,5]` (mortar, 3×10×12) and `[5,10]` (non-mortar,
/// 3×20×24) in x, loaded on the far face by pressure and downward shear.
pub const TWOBLOCK_HEIGHT: f64 = 15.0;

pub fn twoblock_problem(steps: usize, space: MultiplierSpace, stabilization: bool) -> Result<Problem> {
    let left = generate_structured([5.0, 5.0, TWOBLOCK_HEIGHT], [3, 10, 12], [0.0; 3])?;
    let right = generate_structured([5.0, 5.0, TWOBLOCK_HEIGHT], [3, 20, 24], [5.0, 0.0, 0.0])?;
    let mut mesh = Mesh::default();
    mesh.merge(&left, "left");
    mesh.merge(&right, "right");
    let steps = steps.clamp(1, TWOBLOCK_NORMAL.len());
    let curves = BTreeMap::from([
        ("normal".to_string(), TWOBLOCK_NORMAL.to_vec()),
        ("shear".to_string(), TWOBLOCK_SHEAR.to_vec()),
    ]);
    Ok(Problem {
        mesh,
        materials: single_material(2000.0, 0.25),
        interfaces: vec![InterfaceDef::frictional("fault", "right.xmin", "left.xmax", 0.0, 30.0)],
        loads: LoadCase {
            tractions: vec![
                traction("right.xmax", [-1.0, 0.0, 0.0], Some("normal")),
                traction("right.zmax", [0.0, 0.0, -1.0], Some("shear")),
            ],
            dirichlet: vec![
                fix("left.zmin", &[2], 0.0),
                fix("right.zmin", &[2], 0.0),
                fix("left.xmin", &[0], 0.0),
                fix("left.ymin", &[1], 0.0),
                fix("left.ymax", &[1], 0.0),
                fix("right.ymin", &[1], 0.0),
                fix("right.ymax", &[1], 0.0),
            ],
            curves,
            steps,
            ..Default::default()
        },
        solver: SolverConfig {
            multiplier_space: space,
            stabilization,
            ..Default::default()
        },
    })
}

/// Tractions along z on the interface column closest to `y = 2.5`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ColumnProfile {
    pub z: Vec<f64>,
    pub t_n: Vec<f64>,
    /// Vertical (z) component of the traction, the in-plane shear direction.
    pub t_shear: Vec<f64>,
}

impl ColumnProfile {
    pub fn csv(&self) -> String {
        let mut s = String::from("z,t_n,t_shear\n");
        for i in 0..self.z.len() {
            let _ = writeln!(s, "{:.6e},{:.6e},{:.6e}", self.z[i], self.t_n[i], self.t_shear[i]);
        }
        s
    }
}

pub fn twoblock_profile(model: &Model, state: &SimulationState) -> ColumnProfile {
    let it = &model.interfaces[0];
    let st = &state.contact[0];
    let target = 2.5;
    let best = it
        .coupling
        .positions
        .iter()
        .map(|p| (p.y - target).abs())
        .fold(f64::INFINITY, f64::min);
    let tol = 1e-9 * model.problem.mesh.diameter();
    let mut rows: Vec<(f64, f64, f64)> = it
        .coupling
        .positions
        .iter()
        .enumerate()
        .filter(|(_, p)| (p.y - target).abs() <= best + tol && p.y <= target + tol)
        .map(|(i, p)| (p.z, st.t_normal(i), st.faces[i].traction.z))
        .collect();
    rows.sort_by(|a, b| a.0.total_cmp(&b.0));
    ColumnProfile {
        z: rows.iter().map(|r| r.0).collect(),
        t_n: rows.iter().map(|r| r.1).collect(),
        t_shear: rows.iter().map(|r| r.2).collect(),
    }
}

/// Profile of the two-block problem under the loads of `step` with the whole
/// interface held in stick. The unstabilized frictional run cannot be used
/// here: its spurious traction modes exceed the Coulomb bound and the active
/// set breaks down at the first step.
pub fn twoblock_stick_profile(space: MultiplierSpace, stabilization: bool, step: usize) -> Result<ColumnProfile> {
    let mut p = twoblock_problem(step, space, stabilization)?;
    for it in &mut p.interfaces {
        it.tied = true;
    }
    let model = Model::new(p)?;
    let mut start = model.initial_state();
    start.step = step - 1;
    let res = model.solve_load_step(&start)?;
    Ok(twoblock_profile(&model, &res.state))
}

/// Load step at which the stick-state profiles are compared.
pub const TWOBLOCK_PROBE_STEP: usize = 6;

/// Stick-state profiles of the stabilized and unstabilized P0 runs and of the
/// nodal baseline.
#[derive(Debug, Clone)]
pub struct TwoBlockComparison {
    pub stabilized: ColumnProfile,
    pub unstabilized: ColumnProfile,
    pub nodal: ColumnProfile,
    pub tv_stabilized: f64,
    pub tv_unstabilized: f64,
}

impl TwoBlockComparison {
    pub fn tv_ratio(&self) -> f64 {
        self.tv_stabilized / self.tv_unstabilized
    }

    /// Share of the nodal shear-traction variation in the bottom quarter of
    /// the interface.
    pub fn nodal_bottom_share(&self) -> f64 {
        variation_share_below(&self.nodal.z, &self.nodal.t_shear, 0.25 * TWOBLOCK_HEIGHT)
    }
}

pub fn twoblock_comparison(step: usize) -> Result<TwoBlockComparison> {
    let stabilized = twoblock_stick_profile(MultiplierSpace::P0, true, step)?;
    let unstabilized = twoblock_stick_profile(MultiplierSpace::P0, false, step)?;
    let nodal = twoblock_stick_profile(MultiplierSpace::Nodal, false, step)?;
    Ok(TwoBlockComparison {
        tv_stabilized: oscillation_metric(&stabilized.t_n),
        tv_unstabilized: oscillation_metric(&unstabilized.t_n),
        stabilized,
        unstabilized,
        nodal,
    })
}

/// Total variation `Σ |v_{i+1} - v_i|`.
pub fn oscillation_metric(profile: &[f64]) -> f64 {
    profile.windows(2).map(|w| (w[1] - w[0]).abs()).sum()
}

/// Share of the total variation of `v(z)` contributed by samples with
/// `z ≤ z_cut`.
pub fn variation_share_below(z: &[f64], v: &[f64], z_cut: f64) -> f64 {
    let total = oscillation_metric(v);
    if total == 0.0 {
        return 0.0;
    }
    let low: f64 = (1..v.len())
        .filter(|&i| z[i] <= z_cut)
        .map(|i| (v[i] - v[i - 1]).abs())
        .sum();
    low / total
}

// ---------------------------------------------------------------- inf-sup

/// Non-mortar cube `[0,1]²×[-1,0]` with `n1³` cells under a mortar cube
/// `[0,1]²×[0,1]` with `n2³` cells; every outer boundary node is fixed.
pub fn infsup_problem(n1: usize, n2: usize, stabilization: bool) -> Result<Problem> {
    let lower = generate_structured([1.0; 3], [n1; 3], [0.0, 0.0, -1.0])?;
    let upper = generate_structured([1.0; 3], [n2; 3], [0.0; 3])?;
    let mut mesh = Mesh::default();
    mesh.merge(&lower, "nm");
    mesh.merge(&upper, "m");
    let mut dirichlet = Vec::new();
    for side in ["xmin", "xmax", "ymin", "ymax"] {
        dirichlet.push(fix_all(&format!("nm.{side}")));
        dirichlet.push(fix_all(&format!("m.{side}")));
    }
    dirichlet.push(fix_all("nm.zmin"));
    dirichlet.push(fix_all("m.zmax"));
    Ok(Problem {
        mesh,
        materials: single_material(1.0, 0.3),
        interfaces: vec![InterfaceDef::tied("patch", "nm.zmax", "m.zmin")],
        loads: LoadCase {
            body_forces: vec![BodyForce {
                region: None,
                value: [0.0, 0.0, -1.0],
                curve: None,
            }],
            dirichlet,
            steps: 1,
            ..Default::default()
        },
        solver: SolverConfig {
            stabilization,
            ..Default::default()
        },
    })
}

pub fn infsup_run(n1: usize, n2: usize) -> Result<(InfSupEntry, InfSupEntry)> {
    let model = Model::new(infsup_problem(n1, n2, true)?)?;
    let ops = saddle_operators(&model)?;
    Ok((infsup_entry(&ops, false)?, infsup_entry(&ops, true)?))
}

/// Fixed-ratio sweep `(2k)³ over k³` and non-mortar-only sweep over a 2³ mortar.
pub fn infsup_sweeps() -> Result<(Vec<InfSupEntry>, Vec<InfSupEntry>)> {
    let mut fixed = Vec::new();
    for n2 in [2, 4, 8] {
        fixed.push(infsup_run(2 * n2, n2)?.1);
    }
    let mut nm_only = Vec::new();
    for n1 in [4, 8, 16] {
        nm_only.push(infsup_run(n1, 2)?.1);
    }
    Ok((fixed, nm_only))
}

// ---------------------------------------------------------------- layered

/// Layered faulted block: three horizontal layers with different stiffness,
/// a vertical fault at `x = 5`, lateral confinement and a per-cell upward body
/// force growing with the load step. The lowest fault row stays stick.
pub fn layered_problem(steps: usize) -> Result<Problem> {
    let left = generate_structured([5.0, 2.0, 9.0], [4, 2, 6], [0.0; 3])?;
    let right = generate_structured([5.0, 2.0, 9.0], [5, 3, 9], [5.0, 0.0, 0.0])?;
    let mut mesh = Mesh::default();
    mesh.merge(&left, "left");
    mesh.merge(&right, "right");
    let layer_of = |z: f64| ((z / 3.0).floor() as u32).min(2);
    let mut forces = Vec::with_capacity(mesh.cells.len());
    for c in 0..mesh.cells.len() {
        let x = mesh.cell_coords(c);
        let centroid = x.iter().sum::<Vec3>() / 8.0;
        mesh.regions[c] = layer_of(centroid.z);
        // pressure-gradient stand-in: strongest near the top of the left block
        let f = if centroid.x < 5.0 { 0.02 * centroid.z } else { 0.0 };
        forces.push([0.0, 0.0, f]);
    }
    let materials = BTreeMap::from([
        (0, ElasticMaterial { young: 3000.0, poisson: 0.25 }),
        (1, ElasticMaterial { young: 1000.0, poisson: 0.3 }),
        (2, ElasticMaterial { young: 2000.0, poisson: 0.25 }),
    ]);
    let mut fault = InterfaceDef::frictional("fault", "right.xmin", "left.xmax", 0.0, 30.0);
    fault.frozen_boxes = vec![[[4.0, -1.0, -1.0], [6.0, 3.0, 1.0]]];
    let ramp: Vec<f64> = (1..=steps.max(1)).map(|s| s as f64).collect();
    Ok(Problem {
        mesh,
        materials,
        interfaces: vec![fault],
        loads: LoadCase {
            cell_body_forces: Some(forces),
            cell_force_curve: Some("ramp".into()),
            tractions: vec![traction("right.xmax", [-1.0, 0.0, 0.0], None)],
            dirichlet: vec![
                fix_all("left.zmin"),
                fix_all("right.zmin"),
                fix("left.xmin", &[0], 0.0),
                fix("left.ymin", &[1], 0.0),
                fix("left.ymax", &[1], 0.0),
                fix("right.ymin", &[1], 0.0),
                fix("right.ymax", &[1], 0.0),
            ],
            curves: BTreeMap::from([("ramp".to_string(), ramp)]),
            steps: steps.max(1),
            ..Default::default()
        },
        solver: SolverConfig::default(),
    })
}

// ---------------------------------------------------------------- reports

/// One reported quantity with its reference value.
#[derive(Debug, Clone, PartialEq)]
pub struct Metric {
    pub name: String,
    pub measured: f64,
    pub oracle: f64,
    pub error: f64,
    pub threshold: f64,
    pub pass: bool,
}

impl Metric {
    /// Passes when `error ≤ threshold`.
    pub fn at_most(name: &str, measured: f64, oracle: f64, error: f64, threshold: f64) -> Self {
        Self {
            name: name.into(),
            measured,
            oracle,
            error,
            threshold,
            pass: error <= threshold,
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct BenchReport {
    pub name: String,
    pub metrics: Vec<Metric>,
    pub notes: Vec<String>,
}

impl BenchReport {
    pub fn passed(&self) -> bool {
        self.metrics.iter().all(|m| m.pass)
    }

    pub fn metrics_csv(&self) -> String {
        let mut s = String::from("metric,measured,oracle,error,threshold,pass\n");
        for m in &self.metrics {
            let _ = writeln!(
                s,
                "{},{:.12e},{:.12e},{:.6e},{:.6e},{}",
                m.name, m.measured, m.oracle, m.error, m.threshold, m.pass
            );
        }
        s
    }

    pub fn text(&self) -> String {
        let mut s = format!("benchmark: {}\nresult: {}\n\n", self.name, if self.passed() { "PASS" } else { "FAIL" });
        for m in &self.metrics {
            let _ = writeln!(
                s,
                "  [{}] {:<34} measured {:>14.6e}  reference {:>14.6e}  error {:>10.3e} (limit {:.1e})",
                if m.pass { "pass" } else { "FAIL" },
                m.name,
                m.measured,
                m.oracle,
                m.error,
                m.threshold
            );
        }
        if !self.notes.is_empty() {
            s.push_str("\nnotes:\n");
            for n in &self.notes {
                let _ = writeln!(s, "  - {n}");
            }
        }
        s
    }
}

/// Options shared by `bench` and `run`.
#[derive(Debug, Clone, Default)]
pub struct BenchOptions {
    pub no_stabilization: bool,
    pub multiplier: Option<MultiplierSpace>,
    pub steps: Option<usize>,
}

fn apply_options(p: &mut Problem, o: &BenchOptions) {
    if o.no_stabilization {
        p.solver.stabilization = false;
    }
    if let Some(m) = o.multiplier {
        p.solver.multiplier_space = m;
    }
}

/// Writes per-step CSV and VTK files for a finished run.
pub fn write_step_outputs(dir: &Path, model: &Model, steps: &[StepResult]) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    for s in steps {
        let n = s.state.step;
        std::fs::write(dir.join(format!("state_step_{n}.csv")), state_csv(&model.interfaces, &s.state))?;
        let mut vtk = volume_vtk(&model.problem.mesh, &s.state.u);
        if model.problem.solver.multiplier_space == MultiplierSpace::P0 {
            std::fs::write(
                dir.join(format!("interface_step_{n}.vtk")),
                interface_vtk(&model.problem.mesh, &model.interfaces, &s.state.contact),
            )?;
        }
        vtk.shrink_to_fit();
        std::fs::write(dir.join(format!("fields_step_{n}.vtk")), vtk)?;
    }
    Ok(())
}

pub fn write_report(dir: &Path, report: &BenchReport) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join("metrics.csv"), report.metrics_csv())?;
    std::fs::write(dir.join("report.txt"), report.text())?;
    Ok(())
}

/// Runs a packaged benchmark; writes outputs when `output` is given.
pub fn run_benchmark(name: &str, opts: &BenchOptions, output: Option<&Path>) -> Result<BenchReport> {
    let mut report = BenchReport {
        name: name.into(),
        ..Default::default()
    };
    let finish = |model: &Model, steps: &[StepResult], report: &BenchReport| -> Result<()> {
        if let Some(dir) = output {
            write_step_outputs(dir, model, steps)?;
            write_report(dir, report)?;
        }
        Ok(())
    };
    match name {
        "patch" => {
            let mut p = patch_problem()?;
            apply_options(&mut p, opts);
            let model = Model::new(p)?;
            let steps = model.run(None)?;
            let st = &steps[0].state;
            let mut worst_n: f64 = 0.0;
            let mut worst_side: f64 = 0.0;
            for (it, cs) in model.interfaces.iter().zip(&st.contact) {
                for i in 0..cs.len() {
                    let n = it.frames[i].n;
                    if n.z.abs() > 0.5 {
                        worst_n = worst_n.max((cs.t_normal(i) + 1.0).abs());
                    } else {
                        worst_side = worst_side.max(cs.faces[i].traction.norm());
                    }
                }
            }
            let mut worst_u: f64 = 0.0;
            for (k, p) in model.problem.mesh.nodes.iter().enumerate() {
                let exact = -p.z / 1000.0;
                worst_u = worst_u.max((st.u[3 * k + 2] - exact).abs() / 1e-3);
                worst_u = worst_u.max(st.u[3 * k].abs().max(st.u[3 * k + 1].abs()) / 1e-3);
            }
            report.metrics.push(Metric::at_most("max |t_N + 1| (horizontal)", -1.0 + worst_n, -1.0, worst_n, 1e-8));
            report.metrics.push(Metric::at_most("max |t| (vertical interfaces)", worst_side, 0.0, worst_side, 1e-8));
            report.metrics.push(Metric::at_most("u linear in z (relative)", worst_u, 0.0, worst_u, 1e-9));
            finish(&model, &steps, &report)?;
        }
        "sliding" => {
            let mut p = sliding_problem()?;
            apply_options(&mut p, opts);
            let model = Model::new(p)?;
            let steps = model.run(None)?;
            let st = &steps[0].state.contact[0];
            let exact = SLIDING_TAN_PHI * 2f64.sqrt();
            let worst = (0..st.len())
                .map(|i| (st.g_tangential(i).norm() - exact).abs() / exact)
                .fold(0.0, f64::max);
            let mean = (0..st.len()).map(|i| st.g_tangential(i).norm()).sum::<f64>() / st.len() as f64;
            report.metrics.push(Metric::at_most("max rel. error of |g_T|", mean, exact, worst, 1e-6));
            let updates = steps[0].report.active_set_updates as f64;
            report
                .metrics
                .push(Metric::at_most("active-set updates", updates, 1.0, (updates - 1.0).abs(), 0.0));
            report.notes.push(format!("slip faces: {} of {}", st.count(Regime::Slip), st.len()));
            finish(&model, &steps, &report)?;
        }
        "fracture" => {
            let params = FractureParams::default();
            let mut p = fracture_problem(&params, &FractureMesh::default())?;
            apply_options(&mut p, opts);
            let model = Model::new(p)?;
            let steps = model.run(None)?;
            let cmp = fracture_comparison(&model, &steps[0].state, &params)?;
            report.metrics.push(Metric::at_most(
                "max rel. error of t_N (interior)",
                cmp.worst_t_n,
                cmp.oracle_t_n,
                cmp.t_n_error,
                0.05,
            ));
            report.metrics.push(Metric::at_most("rel. L2 error of |g_T|", cmp.g_norm, cmp.g_oracle_norm, cmp.g_error, 0.10));
            report.notes.push(format!("compared faces: {}, slip faces on crack: {}", cmp.samples, cmp.slip_faces));
            if let Some(dir) = output {
                std::fs::create_dir_all(dir)?;
                std::fs::write(dir.join("profile.csv"), cmp.csv)?;
            }
            finish(&model, &steps, &report)?;
        }
        "twoblock" => {
            let cmp = twoblock_comparison(TWOBLOCK_PROBE_STEP)?;
            report.metrics.push(Metric::at_most(
                "t_N TV ratio stabilized/unstabilized (stick)",
                cmp.tv_stabilized,
                cmp.tv_unstabilized,
                cmp.tv_ratio(),
                0.25,
            ));
            let share = cmp.nodal_bottom_share();
            report.metrics.push(Metric {
                name: "nodal shear-traction TV share in bottom quarter".into(),
                measured: share,
                oracle: 0.5,
                error: (0.5 - share).max(0.0),
                threshold: 0.5,
                pass: share >= 0.5,
            });
            report.notes.push(format!(
                "stick profiles at step {}: t_N TV stabilized {:.4e}, unstabilized {:.4e}, nodal {:.4e}",
                TWOBLOCK_PROBE_STEP,
                cmp.tv_stabilized,
                cmp.tv_unstabilized,
                oscillation_metric(&cmp.nodal.t_n)
            ));
            let n = opts.steps.unwrap_or(TWOBLOCK_NORMAL.len());
            let space = opts.multiplier.unwrap_or(MultiplierSpace::P0);
            let model = Model::new(twoblock_problem(n, space, !opts.no_stabilization)?)?;
            report.notes.push(format!(
                "frictional run: multipliers {:?}, stabilization {}",
                space,
                model.interfaces[0].stabilization.is_some()
            ));
            let mut steps = Vec::new();
            let mut state = model.initial_state();
            let mut failure = None;
            while state.step < n {
                match model.solve_load_step(&state) {
                    Ok(r) => {
                        state = r.state.clone();
                        steps.push(r);
                    }
                    Err(e) => {
                        failure = Some(e);
                        break;
                    }
                }
            }
            let mut csv = String::from("step,stick,slip,open\n");
            for s in &steps {
                let c = &s.state.contact[0];
                let line = format!("{},{},{},{}", s.state.step, c.count(Regime::Stick), c.count(Regime::Slip), c.count(Regime::Open));
                report.notes.push(format!("step {line}"));
                let _ = writeln!(csv, "{line}");
            }
            let done = steps.len() as f64;
            report.metrics.push(Metric {
                name: "frictional load steps completed".into(),
                measured: done,
                oracle: n as f64,
                error: n as f64 - done,
                threshold: 0.0,
                pass: failure.is_none(),
            });
            if let Some(e) = &failure {
                report.notes.push(format!("step {} failed: {e}", steps.len() + 1));
            }
            if let Some(dir) = output {
                std::fs::create_dir_all(dir)?;
                std::fs::write(dir.join("regimes.csv"), csv)?;
                std::fs::write(dir.join("profile_stabilized.csv"), cmp.stabilized.csv())?;
                std::fs::write(dir.join("profile_unstabilized.csv"), cmp.unstabilized.csv())?;
                std::fs::write(dir.join("profile_nodal.csv"), cmp.nodal.csv())?;
            }
            finish(&model, &steps, &report)?;
        }
        "infsup" => {
            let (unstab, stab) = infsup_run(4, 2)?;
            report.metrics.push(Metric::at_most("beta* unstabilized base patch", unstab.beta, 0.0, unstab.beta, 1e-7));
            let (fixed, nm_only) = infsup_sweeps()?;
            let worst_drop = fixed
                .windows(2)
                .map(|w| (w[0].beta - w[1].beta) / w[0].beta)
                .fold(f64::NEG_INFINITY, f64::max);
            report.metrics.push(Metric::at_most(
                "max beta* decrease per level",
                fixed.last().map_or(0.0, |e| e.beta),
                fixed[0].beta,
                worst_drop,
                0.10,
            ));
            let spread = nm_only
                .iter()
                .map(|e| (e.beta - nm_only[0].beta).abs() / nm_only[0].beta)
                .fold(0.0, f64::max);
            report.metrics.push(Metric::at_most(
                "non-mortar-only beta* spread",
                nm_only.last().map_or(0.0, |e| e.beta),
                nm_only[0].beta,
                spread,
                0.15,
            ));
            report.notes.push(format!("stabilized base patch beta* = {:.6e}", stab.beta));
            if let Some(dir) = output {
                std::fs::create_dir_all(dir)?;
                let mut all = vec![unstab, stab];
                all.extend(fixed);
                all.extend(nm_only);
                std::fs::write(dir.join("infsup.csv"), infsup_csv(&all))?;
                write_report(dir, &report)?;
            }
        }
        "layered" => {
            let mut p = layered_problem(opts.steps.unwrap_or(4))?;
            apply_options(&mut p, opts);
            let model = Model::new(p)?;
            let steps = model.run(None)?;
            for it in &model.interfaces {
                let c = stabilization_checks(it)?;
                report.metrics.push(Metric::at_most("H asymmetry / |H|", c.asymmetry, 0.0, c.asymmetry, 1e-15));
                report.metrics.push(Metric {
                    name: "H + 1e-12 |H| I positive definite".into(),
                    measured: c.min_eigenvalue_defect,
                    oracle: 0.0,
                    error: c.min_eigenvalue_defect.max(0.0),
                    threshold: PSD_TOLERANCE,
                    pass: c.psd,
                });
                report.metrics.push(Metric::at_most("|H 1| / |H|", c.constant, 0.0, c.constant, 1e-12));
            }
            for s in &steps {
                let c = &s.state.contact[0];
                report.notes.push(format!(
                    "step {}: stick {} slip {} open {}",
                    s.state.step,
                    c.count(Regime::Stick),
                    c.count(Regime::Slip),
                    c.count(Regime::Open)
                ));
            }
            finish(&model, &steps, &report)?;
        }
        other => {
            return Err(Error::Config(format!(
                "unknown benchmark '{other}' (choose from {})",
                BENCHMARKS.join(", ")
            )))
        }
    }
    Ok(report)
}

/// Structural checks of an assembled H, relative to `max |H_ij|`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StabilizationChecks {
    pub asymmetry: f64,
    /// `-λ_min(H) / max|H_ij|`; NaN when H is too large for a dense solve.
    pub min_eigenvalue_defect: f64,
    /// `H + 1e-12·max|H_ij|·I` admits a Cholesky factorization, i.e.
    /// `λ_min(H) > -1e-12·max|H_ij|`.
    pub psd: bool,
    /// Largest `|H c|` over the three constant traction fields `c`.
    pub constant: f64,
}

pub const PSD_TOLERANCE: f64 = 1e-12;

pub fn stabilization_checks(it: &crate::solver::InterfaceData) -> Result<StabilizationChecks> {
    let mut out = StabilizationChecks {
        asymmetry: 0.0,
        min_eigenvalue_defect: 0.0,
        psd: true,
        constant: 0.0,
    };
    let Some(st) = &it.stabilization else { return Ok(out) };
    let h = &st.h;
    let scale = h.max_abs();
    if scale == 0.0 {
        return Ok(out);
    }
    out.asymmetry = h.asymmetry() / scale;
    for k in 0..3 {
        let t: Vec<f64> = (0..h.ncols).map(|i| if i % 3 == k { 1.0 } else { 0.0 }).collect();
        out.constant = out.constant.max(h.mul_vec(&t).iter().fold(0.0f64, |m, v| m.max(v.abs())) / scale);
    }
    out.min_eigenvalue_defect = if h.nrows <= 3000 {
        -crate::analysis::eigen_range(&h.to_dense()).0 / scale
    } else {
        f64::NAN
    };
    let mut shifted = h.to_triplets();
    for i in 0..h.nrows {
        shifted.push(i, i, PSD_TOLERANCE * scale);
    }
    out.psd = match crate::sparse::SparseCholesky::new(&shifted.build()) {
        Ok(_) => true,
        Err(Error::NotPositiveDefinite(_)) => false,
        Err(e) => return Err(e),
    };
    Ok(out)
}

/// Numerical vs closed-form profiles along the crack.
#[derive(Debug, Clone)]
pub struct FractureComparison {
    pub samples: usize,
    pub slip_faces: usize,
    pub oracle_t_n: f64,
    pub worst_t_n: f64,
    pub t_n_error: f64,
    pub g_norm: f64,
    pub g_oracle_norm: f64,
    pub g_error: f64,
    /// `[ξ, t_N, t_N oracle, |g_T|, |g_T| oracle]` per crack face, in mesh order.
    pub rows: Vec<[f64; 5]>,
    pub csv: String,
}

/// Compares faces with `ξ ∈ [0.1·2b, 0.9·2b]` against the oracle.
pub fn fracture_comparison(model: &Model, state: &SimulationState, p: &FractureParams) -> Result<FractureComparison> {
    let it = &model.interfaces[0];
    let st = &state.contact[0];
    let len = 2.0 * p.half_length;
    let (lo, hi) = (0.1 * len, 0.9 * len);
    let mut csv = String::from("xi,regime,t_N,t_N_oracle,g_T,g_T_oracle\n");
    let mut rows = Vec::new();
    let mut samples = 0;
    let mut slip_faces = 0;
    let mut worst = 0.0f64;
    let mut worst_t = 0.0;
    let (mut num, mut den) = (0.0, 0.0);
    let mut gsum = 0.0;
    let mut oracle_t_n = 0.0;
    for i in 0..st.len() {
        let xi = crack_coordinate(p, &it.coupling.positions[i]);
        if !(0.0..=len).contains(&xi) {
            continue;
        }
        if st.faces[i].regime == Regime::Slip {
            slip_faces += 1;
        }
        let (tn_o, g_o) = oracle_single_fracture(xi, p)?;
        oracle_t_n = tn_o;
        let tn = st.t_normal(i);
        let g = st.g_tangential(i).norm();
        let _ = writeln!(csv, "{xi},{},{tn:.10e},{tn_o:.10e},{g:.10e},{g_o:.10e}", st.faces[i].regime);
        rows.push([xi, tn, tn_o, g, g_o]);
        if xi < lo || xi > hi {
            continue;
        }
        samples += 1;
        let e = ((tn - tn_o) / tn_o).abs();
        if e > worst {
            worst = e;
            worst_t = tn;
        }
        let w = it.coupling.areas[i];
        num += w * (g - g_o).powi(2);
        den += w * g_o * g_o;
        gsum += w * g * g;
    }
    if samples == 0 {
        return Err(Error::Domain("no crack faces in the comparison window".into()));
    }
    Ok(FractureComparison {
        samples,
        slip_faces,
        oracle_t_n,
        worst_t_n: worst_t,
        t_n_error: worst,
        g_norm: gsum.sqrt(),
        g_oracle_norm: den.sqrt(),
        g_error: (num / den).sqrt(),
        rows,
        csv,
    })
}
