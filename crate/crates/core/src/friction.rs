//! Coulomb friction: limiting traction, its derivatives, the stick/slip/open
//! classification and the per-face constraint rows.

use nalgebra::{Matrix2, Matrix2x3, Matrix3, RowVector3, Vector2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hex::Vec3;
use crate::sparse::{CsrMatrix, TripletBuilder};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrictionMaterial {
    pub cohesion: f64,
    /// Friction angle in radians.
    pub friction_angle: f64,
}

impl FrictionMaterial {
    pub fn new(cohesion: f64, friction_angle: f64) -> Result<Self> {
        if !(cohesion >= 0.0) || !(friction_angle >= 0.0 && friction_angle < std::f64::consts::FRAC_PI_2) {
            return Err(Error::Config(format!(
                "friction needs c >= 0 and 0 <= phi < 90 deg (got c={cohesion}, phi={friction_angle} rad)"
            )));
        }
        Ok(Self {
            cohesion,
            friction_angle,
        })
    }

    pub fn from_degrees(cohesion: f64, degrees: f64) -> Result<Self> {
        Self::new(cohesion, degrees.to_radians())
    }

    pub fn tan_phi(&self) -> f64 {
        self.friction_angle.tan()
    }
}

/// `τ_lim = c - t_N tan φ`, floored at zero.
pub fn coulomb_limit(t_n: f64, mat: &FrictionMaterial) -> f64 {
    (mat.cohesion - t_n * mat.tan_phi()).max(0.0)
}

/// `t_T* = τ_lim Δg_T / max(‖Δg_T‖, ε)`.
pub fn limiting_traction(dg: &Vector2<f64>, tau: f64, eps: f64) -> Vector2<f64> {
    dg * (tau / dg.norm().max(eps))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrictionDerivatives {
    /// ∂t_T*/∂Δg_T
    pub d_slip: Matrix2<f64>,
    /// ∂t_T*/∂t_N
    pub d_normal: Vector2<f64>,
}

pub fn friction_derivatives(dg: &Vector2<f64>, t_n: f64, mat: &FrictionMaterial, eps: f64) -> FrictionDerivatives {
    let tau = coulomb_limit(t_n, mat);
    let norm = dg.norm().max(eps);
    let d_slip = (Matrix2::identity() * norm * norm - dg * dg.transpose()) * (tau / norm.powi(3));
    let active = mat.cohesion - t_n * mat.tan_phi() > 0.0;
    let d_normal = if active {
        dg * (-mat.tan_phi() / norm)
    } else {
        Vector2::zeros()
    };
    FrictionDerivatives { d_slip, d_normal }
}

/// Orthonormal frame of a multiplier: contact normal and two tangents.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Frame {
    pub n: Vec3,
    pub t1: Vec3,
    pub t2: Vec3,
}

impl Frame {
    pub fn new(n: Vec3, (t1, t2): (Vec3, Vec3)) -> Self {
        Self { n, t1, t2 }
    }

    /// Rows n, t1, t2.
    pub fn rotation(&self) -> Matrix3<f64> {
        Matrix3::from_rows(&[self.n.transpose(), self.t1.transpose(), self.t2.transpose()])
    }

    pub fn tangential(&self) -> Matrix2x3<f64> {
        Matrix2x3::from_rows(&[self.t1.transpose(), self.t2.transpose()])
    }

    pub fn normal_part(&self, v: &Vec3) -> f64 {
        v.dot(&self.n)
    }

    pub fn tangential_part(&self, v: &Vec3) -> Vector2<f64> {
        Vector2::new(v.dot(&self.t1), v.dot(&self.t2))
    }

    pub fn from_tangential(&self, v: &Vector2<f64>) -> Vec3 {
        self.t1 * v[0] + self.t2 * v[1]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Regime {
    Stick,
    Slip,
    Open,
}

impl Regime {
    pub fn as_str(&self) -> &'static str {
        match self {
            Regime::Stick => "stick",
            Regime::Slip => "slip",
            Regime::Open => "open",
        }
    }
}

impl std::fmt::Display for Regime {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Regime {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "stick" => Ok(Regime::Stick),
            "slip" => Ok(Regime::Slip),
            "open" => Ok(Regime::Open),
            _ => Err(Error::Config(format!("unknown contact regime '{s}'"))),
        }
    }
}

/// Per-multiplier contact data.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FaceState {
    pub regime: Regime,
    /// Pinned by configuration; never reclassified.
    pub frozen: bool,
    /// Traction in global components.
    pub traction: Vec3,
    /// Current mean displacement jump.
    pub gap: Vec3,
    /// Converged jump of the previous load step.
    pub gap_prev: Vec3,
    /// Tangential slip increment in the local frame.
    pub slip_increment: Vector2<f64>,
}

impl Default for FaceState {
    fn default() -> Self {
        Self {
            regime: Regime::Stick,
            frozen: false,
            traction: Vec3::zeros(),
            gap: Vec3::zeros(),
            gap_prev: Vec3::zeros(),
            slip_increment: Vector2::zeros(),
        }
    }
}

/// Contact state of one interface.
#[derive(Debug, Clone, PartialEq)]
pub struct ContactState {
    pub faces: Vec<FaceState>,
    pub frames: Vec<Frame>,
    pub areas: Vec<f64>,
    pub material: FrictionMaterial,
}

/// Absolute traction and gap tolerances plus a relative slip-ratio tolerance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    pub traction: f64,
    pub ratio: f64,
    pub gap: f64,
}

impl Tolerances {
    pub fn scaled(reference_stress: f64, reference_length: f64) -> Self {
        Self {
            traction: 1e-10 * reference_stress,
            ratio: 1e-8,
            gap: 1e-10 * reference_length,
        }
    }
}

impl ContactState {
    pub fn new(frames: Vec<Frame>, areas: Vec<f64>, material: FrictionMaterial) -> Self {
        Self {
            faces: vec![FaceState::default(); frames.len()],
            frames,
            areas,
            material,
        }
    }

    pub fn len(&self) -> usize {
        self.faces.len()
    }

    pub fn is_empty(&self) -> bool {
        self.faces.is_empty()
    }

    pub fn count(&self, regime: Regime) -> usize {
        self.faces.iter().filter(|f| f.regime == regime).count()
    }

    pub fn t_normal(&self, i: usize) -> f64 {
        self.frames[i].normal_part(&self.faces[i].traction)
    }

    pub fn t_tangential(&self, i: usize) -> Vector2<f64> {
        self.frames[i].tangential_part(&self.faces[i].traction)
    }

    pub fn g_normal(&self, i: usize) -> f64 {
        self.frames[i].normal_part(&self.faces[i].gap)
    }

    pub fn g_tangential(&self, i: usize) -> Vector2<f64> {
        self.frames[i].tangential_part(&self.faces[i].gap)
    }

    /// Refreshes gaps and slip increments from integrated jumps `∫⟦u⟧` per face.
    pub fn set_jumps(&mut self, integrated: &[Vec3]) {
        for (i, j) in integrated.iter().enumerate() {
            let f = &mut self.faces[i];
            f.gap = j / self.areas[i];
            f.slip_increment = self.frames[i].tangential_part(&(f.gap - f.gap_prev));
        }
    }

    /// Stores the converged gaps as the reference for the next step.
    pub fn commit_step(&mut self) {
        for f in &mut self.faces {
            f.gap_prev = f.gap;
            f.slip_increment = Vector2::zeros();
        }
    }
}

/// Applies the KKT-based transition rules. Returns the new state and whether
/// any regime changed.
pub fn update_active_set(state: &ContactState, tol: &Tolerances) -> (ContactState, bool) {
    let mut next = state.clone();
    let mut changed = false;
    for i in 0..state.len() {
        let f = &state.faces[i];
        if f.frozen {
            continue;
        }
        let t_n = state.t_normal(i);
        let t_t = state.t_tangential(i);
        let tau = coulomb_limit(t_n, &state.material);
        let new = match f.regime {
            Regime::Stick if t_n > tol.traction => Regime::Open,
            Regime::Stick if t_t.norm() > tau * (1.0 + tol.ratio) && t_t.norm() > tol.traction => Regime::Slip,
            Regime::Slip if t_n > tol.traction => Regime::Open,
            // reverse slip; a face with a vanishing limit keeps sliding
            Regime::Slip if f.slip_increment.dot(&t_t) <= -tol.traction * f.slip_increment.norm() => Regime::Stick,
            Regime::Open if state.g_normal(i) < -tol.gap => Regime::Stick,
            r => r,
        };
        if new != f.regime {
            next.faces[i].regime = new;
            changed = true;
        }
    }
    (next, changed)
}

/// Value and derivatives of the limiting traction used by the slip rows.
///
/// Away from slip onset this is `limiting_traction` with its exact
/// derivatives. When the slip increment is still inside the ε-ball, the slip
/// direction is taken from the current tangential traction and held fixed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlipLaw {
    pub t_star: Vector2<f64>,
    pub derivs: FrictionDerivatives,
}

pub fn slip_law(dg: &Vector2<f64>, t_t: &Vector2<f64>, t_n: f64, mat: &FrictionMaterial, eps: f64) -> SlipLaw {
    let tau = coulomb_limit(t_n, mat);
    if dg.norm() > eps {
        return SlipLaw {
            t_star: limiting_traction(dg, tau, eps),
            derivs: friction_derivatives(dg, t_n, mat, eps),
        };
    }
    let dir = if t_t.norm() > 0.0 {
        t_t / t_t.norm()
    } else {
        Vector2::new(1.0, 0.0)
    };
    let active = mat.cohesion - t_n * mat.tan_phi() > 0.0;
    SlipLaw {
        t_star: dir * tau,
        derivs: FrictionDerivatives {
            d_slip: Matrix2::zeros(),
            d_normal: if active { dir * -mat.tan_phi() } else { Vector2::zeros() },
        },
    }
}

/// Constraint-row parameters shared by residual and Jacobian.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LawParams {
    /// Slip regularization length.
    pub eps: f64,
    /// Unit coefficient scaling slip and open rows.
    pub unit_scale: f64,
}

/// Row weighting `W` of a face: identity for stick/open, rotation for slip.
pub fn row_weight(regime: Regime, frame: &Frame) -> Matrix3<f64> {
    match regime {
        Regime::Slip => frame.rotation(),
        _ => Matrix3::identity(),
    }
}

/// Constraint residual of one face (before stabilization). `jump` is the
/// integrated jump `(B1ᵀu)_F`.
pub fn face_residual(state: &ContactState, i: usize, jump: &Vec3, p: &LawParams) -> Vec3 {
    let f = &state.faces[i];
    let fr = &state.frames[i];
    let area = state.areas[i];
    match f.regime {
        Regime::Stick => {
            let g_prev_t = fr.from_tangential(&fr.tangential_part(&f.gap_prev));
            jump - g_prev_t * area
        }
        Regime::Open => f.traction * (area / p.unit_scale),
        Regime::Slip => {
            let dg = fr.tangential_part(&(jump / area - f.gap_prev));
            let t_t = fr.tangential_part(&f.traction);
            let t_n = fr.normal_part(&f.traction);
            let law = slip_law(&dg, &t_t, t_n, &state.material, p.eps);
            let r_t = (t_t - law.t_star) * (area / p.unit_scale);
            Vec3::new(fr.normal_part(jump), r_t[0], r_t[1])
        }
    }
}

/// Per-face Jacobian blocks: `K` with `B2_F = K · (B1ᵀ)_F` and the `C` block.
pub fn face_jacobian(state: &ContactState, i: usize, jump: &Vec3, p: &LawParams) -> (Matrix3<f64>, Matrix3<f64>) {
    let f = &state.faces[i];
    let fr = &state.frames[i];
    let area = state.areas[i];
    match f.regime {
        Regime::Stick => (Matrix3::identity(), Matrix3::zeros()),
        Regime::Open => (Matrix3::zeros(), Matrix3::identity() * (area / p.unit_scale)),
        Regime::Slip => {
            let dg = fr.tangential_part(&(jump / area - f.gap_prev));
            let t_t = fr.tangential_part(&f.traction);
            let t_n = fr.normal_part(&f.traction);
            let law = slip_law(&dg, &t_t, t_n, &state.material, p.eps);
            let tang = fr.tangential();
            let kt = -(law.derivs.d_slip * tang) / p.unit_scale;
            let ct = (tang - law.derivs.d_normal * fr.n.transpose()) * (area / p.unit_scale);
            let mut k = Matrix3::zeros();
            let mut c = Matrix3::zeros();
            k.set_row(0, &RowVector3::from(fr.n.transpose()));
            for r in 0..2 {
                k.set_row(r + 1, &kt.row(r));
                c.set_row(r + 1, &ct.row(r));
            }
            (k, c)
        }
    }
}

/// Block-diagonal `C` over all faces of an interface.
pub fn assemble_c(state: &ContactState, jumps: &[Vec3], p: &LawParams) -> CsrMatrix {
    let n = state.len();
    let mut t = TripletBuilder::new(3 * n, 3 * n);
    for i in 0..n {
        let (_, c) = face_jacobian(state, i, &jumps[i], p);
        for r in 0..3 {
            for s in 0..3 {
                t.push(3 * i + r, 3 * i + s, c[(r, s)]);
            }
        }
    }
    t.build()
}

/// `B2 = blockdiag(K_F) · B1ᵀ`.
pub fn assemble_b2(state: &ContactState, jumps: &[Vec3], b1t: &CsrMatrix, p: &LawParams) -> CsrMatrix {
    let n = state.len();
    let mut t = TripletBuilder::new(3 * n, b1t.ncols);
    for i in 0..n {
        let (k, _) = face_jacobian(state, i, &jumps[i], p);
        for r in 0..3 {
            for s in 0..3 {
                let w = k[(r, s)];
                if w == 0.0 {
                    continue;
                }
                for (col, v) in b1t.row(3 * i + s) {
                    t.push(3 * i + r, col, w * v);
                }
            }
        }
    }
    t.build()
}
