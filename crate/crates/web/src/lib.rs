//! Browser bindings: inf-sup check of the base patch, a single-fracture run
//! against its closed-form solution, and the two-block traction profiles.

use wasm_bindgen::prelude::*;

use faultmortar::analysis::{infsup_entry, saddle_operators};
use faultmortar::benchmarks::{
    fracture_comparison, fracture_problem, infsup_problem, twoblock_stick_profile, FractureMesh, FractureParams,
};
use faultmortar::mortar::MultiplierSpace;
use faultmortar::solver::Model;

fn js_err(e: faultmortar::Error) -> JsValue {
    JsValue::from_str(&e.to_string())
}

/// Inf-sup constants of a tied cube pair with `n1³` non-mortar and `n2³`
/// mortar cells: `[β* plain, β* stabilized, λmin/λmax plain, λmin/λmax
/// stabilized, kernel dimension of S]`.
#[wasm_bindgen]
pub fn infsup(n1: usize, n2: usize) -> Result<Vec<f64>, JsValue> {
    if !(1..=8).contains(&n1) || !(1..=8).contains(&n2) {
        return Err(JsValue::from_str("divisions must lie in 1..=8"));
    }
    let model = Model::new(infsup_problem(n1, n2, true).map_err(js_err)?).map_err(js_err)?;
    let ops = saddle_operators(&model).map_err(js_err)?;
    let plain = infsup_entry(&ops, false).map_err(js_err)?;
    let stab = infsup_entry(&ops, true).map_err(js_err)?;
    Ok(vec![
        plain.beta,
        stab.beta,
        plain.relative_min_eigenvalue,
        stab.relative_min_eigenvalue,
        plain.kernel_dim as f64,
    ])
}

/// Inclined crack under uniaxial compression on a coarse mesh. Returns rows
/// of `[ξ, t_N, t_N exact, |g_T|, |g_T| exact]` flattened, sorted by `ξ`.
#[wasm_bindgen]
pub fn fracture(psi_deg: f64, phi_deg: f64, h: f64) -> Result<Vec<f64>, JsValue> {
    if !(0.02..=0.5).contains(&h) {
        return Err(JsValue::from_str("mesh size must lie in [0.02, 0.5]"));
    }
    let p = FractureParams {
        psi_deg,
        phi_deg,
        ..FractureParams::default()
    };
    let mesh = FractureMesh {
        h_non_mortar: h,
        h_mortar: 2.0 * h,
        ..FractureMesh::default()
    };
    let model = Model::new(fracture_problem(&p, &mesh).map_err(js_err)?).map_err(js_err)?;
    let state = model.run(None).map_err(js_err)?.pop().expect("one load step").state;
    let mut rows = fracture_comparison(&model, &state, &p).map_err(js_err)?.rows;
    rows.sort_by(|a, b| a[0].total_cmp(&b[0]));
    Ok(rows.into_iter().flatten().collect())
}

/// Normal and shear traction along the vertical fault of the two-block model
/// at `step` with the fault held in stick. `multipliers` is "p0" or "nodal".
/// Returns `[z…, t_N…, t_shear…]` as three equal-length runs.
#[wasm_bindgen]
pub fn twoblock(multipliers: &str, stabilized: bool, step: usize) -> Result<Vec<f64>, JsValue> {
    let space: MultiplierSpace = multipliers.parse().map_err(js_err)?;
    let prof = twoblock_stick_profile(space, stabilized, step.clamp(1, 20)).map_err(js_err)?;
    Ok([prof.z, prof.t_n, prof.t_shear].concat())
}
