//! Load stepping, the active-set loop and Newton iterations on the
//! (stabilized) saddle-point system
//!
//! ```text
//! [ A   B1     ] [δu]     [ r_u  ]
//! [ B2  C - Ĥ  ] [δt] = - [ r_t* ]
//! ```

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::elasticity::{
    assemble_loads, assemble_stiffness, dirichlet_constraints, Constraints, DofMap, ElasticMaterial, LoadCase,
};
use crate::error::{Error, Result};
use crate::friction::{
    assemble_b2, assemble_c, face_residual, update_active_set, ContactState, Frame,
    FrictionMaterial, LawParams, Regime, Tolerances,
};
use crate::hex::Vec3;
use crate::interface::InterfaceTopology;
use crate::mesh::Mesh;
use crate::mortar::{MortarCoupling, MultiplierSpace};
use crate::sparse::{CsrMatrix, SparseLu, TripletBuilder};
use crate::stabilization::{assemble_h, Stabilization};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    pub newton_tol: f64,
    pub newton_max_iter: usize,
    pub active_set_max_iter: usize,
    /// Unit coefficient of the slip and open rows.
    pub unit_scale: f64,
    pub stabilization: bool,
    #[serde(with = "space_serde")]
    pub multiplier_space: MultiplierSpace,
    /// Stress scale of the active-set tolerances (default: largest Young's modulus).
    pub reference_stress: Option<f64>,
    /// Length scale of the gap tolerance and slip regularization (default: mesh diameter).
    pub reference_length: Option<f64>,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            newton_tol: 1e-9,
            newton_max_iter: 25,
            active_set_max_iter: 30,
            unit_scale: 1.0,
            stabilization: true,
            multiplier_space: MultiplierSpace::P0,
            reference_stress: None,
            reference_length: None,
        }
    }
}

mod space_serde {
    use super::MultiplierSpace;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &MultiplierSpace, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(match v {
            MultiplierSpace::P0 => "p0",
            MultiplierSpace::Nodal => "nodal",
        })
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<MultiplierSpace, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// A contact interface between two face sets of the mesh.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InterfaceDef {
    pub name: String,
    pub non_mortar: String,
    pub mortar: String,
    #[serde(default)]
    pub cohesion: f64,
    #[serde(default)]
    pub friction_angle_deg: f64,
    /// Every face permanently stick.
    #[serde(default)]
    pub tied: bool,
    /// Faces whose centroid lies in one of these boxes are permanently stick.
    #[serde(default)]
    pub frozen_boxes: Vec<[[f64; 3]; 2]>,
}

impl InterfaceDef {
    pub fn tied(name: &str, non_mortar: &str, mortar: &str) -> Self {
        Self {
            name: name.into(),
            non_mortar: non_mortar.into(),
            mortar: mortar.into(),
            cohesion: 0.0,
            friction_angle_deg: 30.0,
            tied: true,
            frozen_boxes: Vec::new(),
        }
    }

    pub fn frictional(name: &str, non_mortar: &str, mortar: &str, cohesion: f64, friction_angle_deg: f64) -> Self {
        Self {
            tied: false,
            cohesion,
            friction_angle_deg,
            ..Self::tied(name, non_mortar, mortar)
        }
    }

    pub fn friction(&self) -> Result<FrictionMaterial> {
        FrictionMaterial::from_degrees(self.cohesion, self.friction_angle_deg)
    }
}

/// Everything needed to run a simulation.
#[derive(Debug, Clone)]
pub struct Problem {
    pub mesh: Mesh,
    pub materials: BTreeMap<u32, ElasticMaterial>,
    pub interfaces: Vec<InterfaceDef>,
    pub loads: LoadCase,
    pub solver: SolverConfig,
}

/// Assembled data of one interface.
#[derive(Debug, Clone)]
pub struct InterfaceData {
    pub def: InterfaceDef,
    pub topo: InterfaceTopology,
    pub coupling: MortarCoupling,
    pub b1t: CsrMatrix,
    pub stabilization: Option<Stabilization>,
    /// First multiplier index of this interface in the global numbering.
    pub offset: usize,
    pub frames: Vec<Frame>,
    pub frozen: Vec<bool>,
    pub friction: FrictionMaterial,
}

impl InterfaceData {
    pub fn num_multipliers(&self) -> usize {
        self.coupling.num_multipliers()
    }
}

/// Prepared model: stiffness, mortar operators and stabilization.
#[derive(Debug, Clone)]
pub struct Model {
    pub problem: Problem,
    pub a: CsrMatrix,
    pub interfaces: Vec<InterfaceData>,
    pub n_multipliers: usize,
    /// `B1ᵀ` stacked over all interfaces.
    pub b1t: CsrMatrix,
    pub params: LawParams,
    pub tolerances: Tolerances,
}

/// Per-step quantities fixed during the Newton iterations.
#[derive(Debug, Clone)]
pub struct StepContext {
    pub step: usize,
    pub f: Vec<f64>,
    pub constraints: Constraints,
    pub dofs: DofMap,
    pub a_ff: CsrMatrix,
    pub b1_free: CsrMatrix,
    /// Multiplier components that act on constrained DOFs only. Under stick
    /// they are undetermined and are pinned to zero.
    pub decoupled: Vec<bool>,
}

/// Converged (or initial) unknowns.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulationState {
    /// Last completed load step (0 before the first).
    pub step: usize,
    pub u: Vec<f64>,
    pub contact: Vec<ContactState>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct StepReport {
    pub step: usize,
    /// Newton iterations of every active-set cycle.
    pub newton_iterations: Vec<usize>,
    /// Active-set updates that changed at least one regime.
    pub active_set_updates: usize,
    pub final_residual: f64,
    /// Non-fatal diagnostics (e.g. residual increases).
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct StepResult {
    pub state: SimulationState,
    pub report: StepReport,
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

impl Model {
    pub fn new(problem: Problem) -> Result<Self> {
        let mesh = &problem.mesh;
        mesh.validate()?;
        for m in problem.materials.values() {
            m.check()?;
        }
        let cfg = problem.solver.clone();
        if !(cfg.newton_tol > 0.0) || !(cfg.unit_scale > 0.0) || cfg.newton_max_iter == 0 || cfg.active_set_max_iter == 0
        {
            return Err(Error::Config("solver tolerances and iteration limits must be positive".into()));
        }
        if problem.loads.steps == 0 {
            return Err(Error::Config("at least one load step is required".into()));
        }
        let a = assemble_stiffness(mesh, &problem.materials)?;
        let ndof = a.nrows;
        let cons1 = dirichlet_constraints(mesh, &problem.loads, 1, 1.0)?;
        let a_diag = a.diagonal();
        let space = cfg.multiplier_space;
        let length = cfg.reference_length.unwrap_or_else(|| mesh.diameter());
        let stress = cfg
            .reference_stress
            .unwrap_or_else(|| problem.materials.values().map(|m| m.young).fold(0.0, f64::max));
        let mut interfaces = Vec::new();
        let mut offset = 0;
        for def in &problem.interfaces {
            let topo = InterfaceTopology::build(mesh, &def.non_mortar, &def.mortar)?;
            let coupling = MortarCoupling::assemble(mesh, &topo, space)?;
            if coupling.pairs.is_empty() {
                return Err(Error::InvalidGeometry(format!("interface '{}' has no overlapping faces", def.name)));
            }
            let b1t = coupling.b1t();
            let frames: Vec<Frame> = coupling
                .normals
                .iter()
                .zip(&coupling.tangents)
                .map(|(n, t)| Frame::new(*n, *t))
                .collect();
            let frozen: Vec<bool> = coupling
                .positions
                .iter()
                .map(|p| {
                    def.tied
                        || space == MultiplierSpace::Nodal
                        || def.frozen_boxes.iter().any(|[lo, hi]| (0..3).all(|k| p[k] >= lo[k] && p[k] <= hi[k]))
                })
                .collect();
            let n = coupling.num_multipliers();
            interfaces.push(InterfaceData {
                friction: def.friction()?,
                def: def.clone(),
                topo,
                coupling,
                b1t,
                stabilization: None,
                offset,
                frames,
                frozen,
            });
            offset += n;
        }
        let mut stacked = TripletBuilder::new(3 * offset, ndof);
        for it in &interfaces {
            stacked.extend_from(&it.b1t.to_triplets(), 3 * it.offset, 0);
        }
        let mut model = Self {
            a,
            interfaces,
            n_multipliers: offset,
            b1t: stacked.build(),
            params: LawParams {
                eps: 1e-12 * length,
                unit_scale: cfg.unit_scale,
            },
            tolerances: Tolerances::scaled(stress, length),
            problem,
        };
        if cfg.stabilization && space == MultiplierSpace::P0 {
            let cons = model.effective_constraints(cons1);
            let free: Vec<bool> = (0..ndof).map(|d| !cons.is_constrained(d)).collect();
            for it in &mut model.interfaces {
                it.stabilization = Some(assemble_h(&it.topo, &it.coupling, &a_diag, &free)?);
            }
        }
        Ok(model)
    }

    pub fn ndof(&self) -> usize {
        self.a.nrows
    }

    /// In nodal mode the non-mortar interface nodes drop their Dirichlet
    /// conditions and inherit them weakly through the mortar side.
    fn effective_constraints(&self, mut cons: Constraints) -> Constraints {
        if self.problem.solver.multiplier_space == MultiplierSpace::Nodal {
            for it in &self.interfaces {
                for &n in &it.topo.non_mortar_nodes {
                    for k in 0..3 {
                        cons.values.remove(&(3 * n + k));
                    }
                }
            }
        }
        cons
    }

    pub fn initial_state(&self) -> SimulationState {
        let contact = self
            .interfaces
            .iter()
            .map(|it| {
                let mut st = ContactState::new(it.frames.clone(), it.coupling.areas.clone(), it.friction);
                for (f, &fz) in st.faces.iter_mut().zip(&it.frozen) {
                    f.frozen = fz;
                    f.regime = Regime::Stick;
                }
                st
            })
            .collect();
        SimulationState {
            step: 0,
            u: vec![0.0; self.ndof()],
            contact,
        }
    }

    pub fn step_context(&self, step: usize) -> Result<StepContext> {
        let lc = &self.problem.loads;
        let f = assemble_loads(&self.problem.mesh, lc, step, 1.0)?;
        let constraints = self.effective_constraints(dirichlet_constraints(&self.problem.mesh, lc, step, 1.0)?);
        let dofs = DofMap::new(self.ndof(), &constraints);
        let a_ff = self.a.select(&dofs.free, &dofs.free);
        let all_t: Vec<usize> = (0..3 * self.n_multipliers).collect();
        let b1_free = self.b1t.transpose().select(&dofs.free, &all_t);
        let decoupled = (0..self.b1t.nrows)
            .map(|r| self.b1t.row(r).all(|(c, v)| v == 0.0 || dofs.free_index[c].is_none()))
            .collect();
        Ok(StepContext {
            step,
            f,
            constraints,
            dofs,
            a_ff,
            b1_free,
            decoupled,
        })
    }

    fn traction_vector(&self, contact: &[ContactState]) -> Vec<f64> {
        let mut t = vec![0.0; 3 * self.n_multipliers];
        for (it, st) in self.interfaces.iter().zip(contact) {
            for (i, f) in st.faces.iter().enumerate() {
                for k in 0..3 {
                    t[3 * (it.offset + i) + k] = f.traction[k];
                }
            }
        }
        t
    }

    fn integrated_jumps(&self, it: &InterfaceData, u: &[f64]) -> Vec<Vec3> {
        let j = it.b1t.mul_vec(u);
        j.chunks(3).map(|c| Vec3::new(c[0], c[1], c[2])).collect()
    }

    /// Row projector `P` (3×3 per face): identity on stick faces, normal row
    /// on slip faces, zero on open faces.
    fn stab_projector(st: &ContactState, i: usize) -> nalgebra::Matrix3<f64> {
        match st.faces[i].regime {
            Regime::Stick => nalgebra::Matrix3::identity(),
            Regime::Slip => {
                let mut p = nalgebra::Matrix3::zeros();
                p.set_row(0, &st.frames[i].n.transpose());
                p
            }
            Regime::Open => nalgebra::Matrix3::zeros(),
        }
    }

    fn active_h(&self, it: &InterfaceData, st: &ContactState) -> Option<CsrMatrix> {
        let stab = it.stabilization.as_ref()?;
        let regimes: Vec<Regime> = st.faces.iter().map(|f| f.regime).collect();
        Some(stab.active_matrix(&it.topo, &regimes, &it.frames))
    }

    /// Residual `[r_u (free rows); r_t*]` at the full displacement `u`.
    pub fn residual(&self, ctx: &StepContext, u: &[f64], contact: &[ContactState]) -> Vec<f64> {
        let t = self.traction_vector(contact);
        let mut ru = self.a.mul_vec(u);
        for (r, f) in ru.iter_mut().zip(&ctx.f) {
            *r -= f;
        }
        for i in 0..self.b1t.nrows {
            for (j, v) in self.b1t.row(i) {
                ru[j] += v * t[i];
            }
        }
        let mut r: Vec<f64> = ctx.dofs.free.iter().map(|&d| ru[d]).collect();
        for (it, st) in self.interfaces.iter().zip(contact) {
            let jumps = self.integrated_jumps(it, u);
            let ht = self.active_h(it, st).map(|h| {
                let tl = &t[3 * it.offset..3 * (it.offset + it.num_multipliers())];
                h.mul_vec(tl)
            });
            for i in 0..st.len() {
                let mut ri = face_residual(st, i, &jumps[i], &self.params);
                if let Some(ht) = &ht {
                    ri -= Self::stab_projector(st, i) * Vec3::new(ht[3 * i], ht[3 * i + 1], ht[3 * i + 2]);
                }
                if st.faces[i].regime == Regime::Stick {
                    let w = st.areas[i] / self.params.unit_scale;
                    for k in 0..3 {
                        if ctx.decoupled[3 * (it.offset + i) + k] {
                            ri[k] = w * st.faces[i].traction[k];
                        }
                    }
                }
                r.extend(ri.iter());
            }
        }
        r
    }

    /// Jacobian with respect to `[u_free; t]`.
    pub fn jacobian(&self, ctx: &StepContext, u: &[f64], contact: &[ContactState]) -> CsrMatrix {
        let nf = ctx.dofs.num_free();
        let nt = 3 * self.n_multipliers;
        let mut j = TripletBuilder::new(nf + nt, nf + nt);
        j.extend_from(&ctx.a_ff.to_triplets(), 0, 0);
        j.extend_from(&ctx.b1_free.to_triplets(), 0, nf);
        for (it, st) in self.interfaces.iter().zip(contact) {
            let jumps = self.integrated_jumps(it, u);
            let b2 = assemble_b2(st, &jumps, &it.b1t, &self.params);
            let rows: Vec<usize> = (0..b2.nrows).collect();
            j.extend_from(&b2.select(&rows, &ctx.dofs.free).to_triplets(), nf + 3 * it.offset, 0);
            let mut c = assemble_c(st, &jumps, &self.params).to_triplets();
            if let Some(h) = self.active_h(it, st) {
                for i in 0..st.len() {
                    let p = Self::stab_projector(st, i);
                    for r in 0..3 {
                        for s in 0..3 {
                            let w = p[(r, s)];
                            if w == 0.0 {
                                continue;
                            }
                            for (col, v) in h.row(3 * i + s) {
                                c.push(3 * i + r, col, -w * v);
                            }
                        }
                    }
                }
            }
            let pinned: Vec<usize> = (0..3 * st.len())
                .filter(|&r| st.faces[r / 3].regime == Regime::Stick && ctx.decoupled[3 * it.offset + r])
                .collect();
            if !pinned.is_empty() {
                c.retain(|r, _, _| !ctx.decoupled[3 * it.offset + r] || st.faces[r / 3].regime != Regime::Stick);
                for r in pinned {
                    c.push(r, r, st.areas[r / 3] / self.params.unit_scale);
                }
            }
            j.extend_from(&c, nf + 3 * it.offset, nf + 3 * it.offset);
        }
        j.build()
    }

    fn set_tractions(&self, contact: &mut [ContactState], t: &[f64]) {
        for (it, st) in self.interfaces.iter().zip(contact.iter_mut()) {
            for (i, f) in st.faces.iter_mut().enumerate() {
                let b = 3 * (it.offset + i);
                f.traction = Vec3::new(t[b], t[b + 1], t[b + 2]);
            }
        }
    }

    fn refresh_gaps(&self, contact: &mut [ContactState], u: &[f64]) {
        for (it, st) in self.interfaces.iter().zip(contact.iter_mut()) {
            st.set_jumps(&self.integrated_jumps(it, u));
        }
    }

    /// Newton iterations for a fixed active set; returns the iteration count
    /// and whether the residual tolerance was met.
    fn newton(
        &self,
        ctx: &StepContext,
        u: &mut [f64],
        contact: &mut [ContactState],
        reference: &mut Option<f64>,
        report: &mut StepReport,
    ) -> Result<(usize, bool)> {
        let cfg = &self.problem.solver;
        let nf = ctx.dofs.num_free();
        let fnorm = norm(&ctx.dofs.free.iter().map(|&d| ctx.f[d]).collect::<Vec<_>>());
        let mut last = f64::INFINITY;
        for iter in 0..=cfg.newton_max_iter {
            let r = self.residual(ctx, u, contact);
            let rn = norm(&r);
            let umax = u.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            let floor = 1e-13 * self.a.max_abs() * umax * (r.len() as f64).sqrt();
            let rref = *reference.get_or_insert(rn.max(fnorm));
            report.final_residual = rn;
            if rn <= cfg.newton_tol * rref.max(fnorm) || rn <= floor || rn == 0.0 {
                self.refresh_gaps(contact, u);
                return Ok((iter, true));
            }
            if iter == cfg.newton_max_iter {
                break;
            }
            if rn > last * (1.0 + 1e-8) {
                report
                    .warnings
                    .push(format!("step {}: residual increased from {last:.3e} to {rn:.3e}", ctx.step));
            }
            last = rn;
            let jac = self.jacobian(ctx, u, contact);
            let rhs: Vec<f64> = r.iter().map(|v| -v).collect();
            let dz = SparseLu::new(&jac)?.solve(&rhs)?;
            for (k, &d) in ctx.dofs.free.iter().enumerate() {
                u[d] += dz[k];
            }
            let mut t = self.traction_vector(contact);
            for (ti, dt) in t.iter_mut().zip(&dz[nf..]) {
                *ti += dt;
            }
            self.set_tractions(contact, &t);
            self.refresh_gaps(contact, u);
        }
        self.refresh_gaps(contact, u);
        Ok((cfg.newton_max_iter, false))
    }

    /// Solves load step `state.step + 1` starting from `state`.
    pub fn solve_load_step(&self, state: &SimulationState) -> Result<StepResult> {
        let step = state.step + 1;
        let ctx = self.step_context(step)?;
        let mut u = state.u.clone();
        for (&d, &v) in &ctx.constraints.values {
            u[d] = v;
        }
        let mut contact = state.contact.clone();
        let mut report = StepReport {
            step,
            ..Default::default()
        };
        let mut reference = None;
        for _ in 0..self.problem.solver.active_set_max_iter {
            let (it, converged) = self.newton(&ctx, &mut u, &mut contact, &mut reference, &mut report)?;
            report.newton_iterations.push(it);
            let mut changed_any = false;
            for st in contact.iter_mut() {
                let (next, changed) = update_active_set(st, &self.tolerances);
                if changed {
                    *st = next;
                    changed_any = true;
                }
            }
            if !converged {
                // a stalled Newton loop usually means the regimes are wrong:
                // retry from the updated set, fail only if nothing changes
                report.warnings.push(format!(
                    "step {step}: Newton stalled at residual {:.3e}; regimes {}",
                    report.final_residual,
                    regime_summary(&contact)
                ));
                if !changed_any {
                    return Err(Error::NonConvergence(format!(
                        "step {step}: Newton did not converge in {} iterations (residual {:.3e}); regimes {}",
                        self.problem.solver.newton_max_iter,
                        report.final_residual,
                        regime_summary(&contact)
                    )));
                }
            } else if !changed_any {
                for st in contact.iter_mut() {
                    st.commit_step();
                }
                return Ok(StepResult {
                    state: SimulationState { step, u, contact },
                    report,
                });
            }
            report.active_set_updates += 1;
        }
        Err(Error::NonConvergence(format!(
            "step {step}: active set still changing after {} cycles; regimes {}",
            self.problem.solver.active_set_max_iter,
            regime_summary(&contact)
        )))
    }

    /// Runs the remaining load steps from `start` (or from rest).
    pub fn run(&self, start: Option<SimulationState>) -> Result<Vec<StepResult>> {
        let mut state = start.unwrap_or_else(|| self.initial_state());
        let mut out = Vec::new();
        while state.step < self.problem.loads.steps {
            let res = self.solve_load_step(&state)?;
            state = res.state.clone();
            out.push(res);
        }
        Ok(out)
    }
}

fn regime_summary(contact: &[ContactState]) -> String {
    let mut counts = [0usize; 3];
    for st in contact {
        counts[0] += st.count(Regime::Stick);
        counts[1] += st.count(Regime::Slip);
        counts[2] += st.count(Regime::Open);
    }
    format!("stick={} slip={} open={}", counts[0], counts[1], counts[2])
}

/// Convenience wrapper: prepares the model and runs every load step.
pub fn run_simulation(problem: Problem) -> Result<(Model, Vec<StepResult>)> {
    let model = Model::new(problem)?;
    let steps = model.run(None)?;
    Ok((model, steps))
}

impl SimulationState {
    /// Text checkpoint; floats use the shortest representation that parses
    /// back to the same bits.
    pub fn to_checkpoint(&self) -> String {
        let mut s = format!("faultmortar-checkpoint 1\nstep {}\nu {}\n", self.step, self.u.len());
        for v in &self.u {
            s.push_str(&format!("{v}\n"));
        }
        s.push_str(&format!("interfaces {}\n", self.contact.len()));
        for st in &self.contact {
            s.push_str(&format!("faces {}\n", st.len()));
            for f in &st.faces {
                s.push_str(&format!(
                    "{} {} {} {} {} {} {} {} {} {} {} {} {}\n",
                    f.regime,
                    u8::from(f.frozen),
                    f.traction[0],
                    f.traction[1],
                    f.traction[2],
                    f.gap[0],
                    f.gap[1],
                    f.gap[2],
                    f.gap_prev[0],
                    f.gap_prev[1],
                    f.gap_prev[2],
                    f.slip_increment[0],
                    f.slip_increment[1]
                ));
            }
        }
        s
    }

    /// Restores a checkpoint on top of the model's initial state (frames and
    /// materials come from the model).
    pub fn from_checkpoint(model: &Model, text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate();
        let mut next = |what: &str| -> Result<(usize, &str)> {
            lines
                .next()
                .map(|(i, l)| (i + 1, l))
                .ok_or_else(|| Error::Parse {
                    line: 0,
                    msg: format!("unexpected end of checkpoint, expected {what}"),
                })
        };
        let perr = |line: usize, msg: String| Error::Parse { line, msg };
        let (l, header) = next("header")?;
        if header.trim() != "faultmortar-checkpoint 1" {
            return Err(perr(l, "not a checkpoint file".into()));
        }
        let keyed = |(l, s): (usize, &str), key: &str| -> Result<usize> {
            let mut it = s.split_whitespace();
            if it.next() != Some(key) {
                return Err(perr(l, format!("expected '{key}'")));
            }
            it.next()
                .and_then(|v| v.parse().ok())
                .ok_or_else(|| perr(l, format!("bad '{key}' count")))
        };
        let step = keyed(next("step")?, "step")?;
        let n = keyed(next("u")?, "u")?;
        if n != model.ndof() {
            return Err(perr(0, format!("checkpoint has {n} DOFs, model has {}", model.ndof())));
        }
        let mut u = Vec::with_capacity(n);
        for _ in 0..n {
            let (l, s) = next("displacement")?;
            u.push(s.trim().parse().map_err(|e| perr(l, format!("{e}")))?);
        }
        let mut state = model.initial_state();
        let ni = keyed(next("interfaces")?, "interfaces")?;
        if ni != state.contact.len() {
            return Err(perr(0, "interface count mismatch".into()));
        }
        for st in state.contact.iter_mut() {
            let nfaces = keyed(next("faces")?, "faces")?;
            if nfaces != st.len() {
                return Err(perr(0, "face count mismatch".into()));
            }
            for f in st.faces.iter_mut() {
                let (l, s) = next("face record")?;
                let tok: Vec<&str> = s.split_whitespace().collect();
                if tok.len() != 13 {
                    return Err(perr(l, "face record needs 13 fields".into()));
                }
                f.regime = tok[0].parse().map_err(|_| perr(l, "bad regime".into()))?;
                f.frozen = tok[1] == "1";
                let v: Vec<f64> = tok[2..]
                    .iter()
                    .map(|x| x.parse::<f64>())
                    .collect::<std::result::Result<_, _>>()
                    .map_err(|e| perr(l, format!("{e}")))?;
                f.traction = Vec3::new(v[0], v[1], v[2]);
                f.gap = Vec3::new(v[3], v[4], v[5]);
                f.gap_prev = Vec3::new(v[6], v[7], v[8]);
                f.slip_increment = nalgebra::Vector2::new(v[9], v[10]);
            }
        }
        state.step = step;
        state.u = u;
        Ok(state)
    }
}
