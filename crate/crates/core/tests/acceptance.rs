//! Acceptance checks. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

use std::time::{Duration, Instant};

use nalgebra::{DMatrix, Vector2};

use faultmortar::analysis::{infsup_entry, saddle_operators};
use faultmortar::benchmarks::*;
use faultmortar::elasticity::{DirichletBc, ElasticMaterial, LoadCase, NodeSelector};
use faultmortar::friction::Regime;
use faultmortar::hex::Vec3;
use faultmortar::mesh::{generate_structured, Mesh};
use faultmortar::mortar::{MortarCoupling, MultiplierSpace};
use faultmortar::solver::{InterfaceDef, Model, Problem, SolverConfig};
use faultmortar::Error;

type Outcome = Result<(bool, String), Error>;

fn main() {
    let criteria: Vec<(&str, Duration, fn() -> Outcome)> = vec![
        ("1 patch test", Duration::from_secs(30), patch),
        ("2 constant sliding", Duration::from_secs(30), sliding),
        ("3 single fracture", Duration::from_secs(300), fracture),
        ("4 inf-sup sweeps", Duration::from_secs(120), infsup),
        ("5 kernel removal", Duration::from_secs(60), kernel),
        ("6 stabilization structure", Duration::from_secs(300), structure),
        ("7 mortar consistency", Duration::from_secs(300), consistency),
        ("8 two-block oscillations", Duration::from_secs(300), oscillations),
        ("9 jacobian verification", Duration::from_secs(60), jacobian),
    ];
    let mut failed = 0;
    for (name, budget, check) in criteria {
        let start = Instant::now();
        let (ok, detail) = check().unwrap_or_else(|e| (false, format!("error: {e}")));
        let took = start.elapsed();
        let ok = ok && took <= budget;
        if !ok {
            failed += 1;
        }
        println!(
            "{} {name}: {detail} [{:.1} s, budget {} s]",
            if ok { "PASS" } else { "FAIL" },
            took.as_secs_f64(),
            budget.as_secs()
        );
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}

fn patch() -> Outcome {
    let model = Model::new(patch_problem()?)?;
    let state = model.run(None)?.pop().unwrap().state;
    let (mut tn_err, mut vertical) = (0.0f64, 0.0f64);
    for (it, st) in model.interfaces.iter().zip(&state.contact) {
        for i in 0..st.len() {
            if it.coupling.normals[i].z.abs() > 0.5 {
                tn_err = tn_err.max((st.t_normal(i) + 1.0).abs());
            } else {
                vertical = vertical.max(st.faces[i].traction.norm());
            }
        }
    }
    // least-squares line through (z, u_z) over all nodes
    let nodes = &model.problem.mesh.nodes;
    let n = nodes.len() as f64;
    let (sz, su) = nodes.iter().enumerate().fold((0.0, 0.0), |a, (k, p)| (a.0 + p.z, a.1 + state.u[3 * k + 2]));
    let (mz, mu) = (sz / n, su / n);
    let (mut szz, mut szu) = (0.0, 0.0);
    for (k, p) in nodes.iter().enumerate() {
        szz += (p.z - mz) * (p.z - mz);
        szu += (p.z - mz) * (state.u[3 * k + 2] - mu);
    }
    let slope = szu / szz;
    let umax = (0..nodes.len()).map(|k| state.u[3 * k + 2].abs()).fold(0.0, f64::max);
    let lin = nodes
        .iter()
        .enumerate()
        .map(|(k, p)| (state.u[3 * k + 2] - mu - slope * (p.z - mz)).abs())
        .fold(0.0, f64::max)
        / umax;
    // exact solution of a bar under unit pressure: u_z = -z / E
    let slope_err = (slope + 1.0 / 1000.0).abs() * 1000.0;
    let ok = tn_err <= 1e-8 && vertical <= 1e-8 && lin <= 1e-9 && slope_err <= 1e-9;
    Ok((
        ok,
        format!("max|t_N+1| {tn_err:.2e}, vertical |t| {vertical:.2e}, u_z nonlinearity {lin:.2e}, slope error {slope_err:.2e}"),
    ))
}

fn sliding() -> Outcome {
    let model = Model::new(sliding_problem()?)?;
    let res = model.run(None)?;
    let last = res.last().unwrap();
    let exact = SLIDING_TAN_PHI * 2f64.sqrt();
    let st = &last.state.contact[0];
    let worst = (0..st.len())
        .map(|i| (st.g_tangential(i).norm() - exact).abs() / exact)
        .fold(0.0, f64::max);
    let updates: usize = res.iter().map(|r| r.report.active_set_updates).sum();
    let all_slip = st.count(Regime::Slip) == st.len();
    Ok((
        worst <= 1e-6 && updates == 1 && all_slip,
        format!("max rel. |g_T| error {worst:.2e}, active-set updates {updates}, slip faces {}/{}", st.count(Regime::Slip), st.len()),
    ))
}

fn fracture() -> Outcome {
    let p = FractureParams::default();
    let model = Model::new(fracture_problem(&p, &FractureMesh::default())?)?;
    let state = model.run(None)?.pop().unwrap().state;
    let cmp = fracture_comparison(&model, &state, &p)?;
    let expected = -p.sigma * p.psi_deg.to_radians().sin().powi(2);
    let oracle_ok = (cmp.oracle_t_n - expected).abs() <= 1e-12 * expected.abs() && (expected + 11.698).abs() < 1e-3;
    Ok((
        oracle_ok && cmp.t_n_error <= 0.05 && cmp.g_error <= 0.10,
        format!(
            "t_N reference {expected:.4}, max rel. t_N error {:.2e}, rel. L2 |g_T| error {:.2e}, {} faces compared",
            cmp.t_n_error, cmp.g_error, cmp.samples
        ),
    ))
}

fn infsup() -> Outcome {
    let (unstab, _) = infsup_run(4, 2)?;
    let (fixed, nm_only) = infsup_sweeps()?;
    let drops: Vec<f64> = fixed.windows(2).map(|w| (w[0].beta - w[1].beta) / w[0].beta).collect();
    let spread = nm_only
        .iter()
        .map(|e| (e.beta - nm_only[0].beta).abs() / nm_only[0].beta)
        .fold(0.0, f64::max);
    let ok = unstab.beta <= 1e-7
        && fixed.len() == 3
        && fixed.iter().all(|e| e.beta > 0.0)
        && drops.iter().all(|&d| d <= 0.10)
        && nm_only.len() == 3
        && spread <= 0.15;
    let betas = |v: &[faultmortar::analysis::InfSupEntry]| v.iter().map(|e| format!("{:.4}", e.beta)).collect::<Vec<_>>().join(", ");
    Ok((
        ok,
        format!(
            "unstabilized beta* {:.2e}; fixed ratio [{}]; non-mortar only [{}], spread {:.1}%",
            unstab.beta,
            betas(&fixed),
            betas(&nm_only),
            100.0 * spread
        ),
    ))
}

fn kernel() -> Outcome {
    let model = Model::new(infsup_problem(4, 2, true)?)?;
    let ops = saddle_operators(&model)?;
    let plain = infsup_entry(&ops, false)?;
    let stab = infsup_entry(&ops, true)?;
    // the unstabilized saddle-point system of the same patch must be rejected
    let singular = matches!(Model::new(infsup_problem(4, 2, false)?)?.run(None), Err(Error::Singular { .. }));
    let solves = model.run(None).is_ok();
    Ok((
        plain.relative_min_eigenvalue < 1e-10 && stab.relative_min_eigenvalue > 1e-8 && singular && solves,
        format!(
            "lambda_min(S)/|S| {:.2e} (kernel dim {}), lambda_min(S+H)/|S+H| {:.3e}, unstabilized solve singular: {singular}, stabilized solves: {solves}",
            plain.relative_min_eigenvalue, plain.kernel_dim, stab.relative_min_eigenvalue
        ),
    ))
}

/// Every packaged benchmark model, stabilized P0.
fn benchmark_models() -> Result<Vec<(&'static str, Model)>, Error> {
    let p = FractureParams::default();
    Ok(vec![
        ("patch", Model::new(patch_problem()?)?),
        ("sliding", Model::new(sliding_problem()?)?),
        ("fracture", Model::new(fracture_problem(&p, &FractureMesh::default())?)?),
        ("twoblock", Model::new(twoblock_problem(1, MultiplierSpace::P0, true)?)?),
        ("infsup", Model::new(infsup_problem(4, 2, true)?)?),
        ("layered", Model::new(layered_problem(1)?)?),
    ])
}

fn structure() -> Outcome {
    let (mut sym, mut cst, mut psd, mut count) = (0.0f64, 0.0f64, true, 0);
    for (_, model) in benchmark_models()? {
        for it in &model.interfaces {
            if it.stabilization.is_none() {
                continue;
            }
            let c = stabilization_checks(it)?;
            sym = sym.max(c.asymmetry);
            cst = cst.max(c.constant);
            psd &= c.psd && !(c.min_eigenvalue_defect > PSD_TOLERANCE);
            count += 1;
        }
    }
    Ok((
        count > 0 && sym <= 1e-14 && cst <= 1e-12 && psd,
        format!("{count} interfaces: max asymmetry {sym:.1e}, PSD within 1e-12: {psd}, max |H c| {cst:.1e} (relative to max|H|)"),
    ))
}

fn consistency() -> Outcome {
    let mut worst = 0.0f64;
    let mut count = 0;
    for (_, model) in benchmark_models()? {
        for it in &model.interfaces {
            worst = it.coupling.coverage_defect().iter().fold(worst, |m, d| m.max(d.abs()));
            count += 1;
        }
    }
    // conforming copy of the two-block interface
    let mut mesh = Mesh::default();
    mesh.merge(&generate_structured([5.0, 5.0, 15.0], [3, 6, 8], [0.0; 3])?, "left");
    mesh.merge(&generate_structured([5.0, 5.0, 15.0], [2, 6, 8], [5.0, 0.0, 0.0])?, "right");
    let topo = faultmortar::interface::InterfaceTopology::build(&mesh, "right.xmin", "left.xmax")?;
    let c = MortarCoupling::assemble(&mesh, &topo, MultiplierSpace::P0)?;
    let mut m = c.m.to_dense();
    for &b in &topo.mortar_nodes {
        let a = topo
            .non_mortar_nodes
            .iter()
            .copied()
            .find(|&a| (mesh.nodes[a] - mesh.nodes[b]).norm() < 1e-12)
            .ok_or_else(|| Error::Config("conforming interface without a matching node".into()))?;
        for i in 0..m.nrows() {
            m[(i, a)] += m[(i, b)];
            m[(i, b)] = 0.0;
        }
    }
    let conforming = (0..m.nrows())
        .map(|i| (m.row(i) - c.d.to_dense().row(i)).abs().max() / c.areas[i])
        .fold(0.0, f64::max);
    Ok((
        worst <= 1e-10 && conforming <= 1e-12,
        format!("{count} interfaces: max |D1-M1|/area {worst:.1e}; conforming max |M-D|/area {conforming:.1e}"),
    ))
}

fn oscillations() -> Outcome {
    let cmp = twoblock_comparison(TWOBLOCK_PROBE_STEP)?;
    let ratio = cmp.tv_ratio();
    let share = cmp.nodal_bottom_share();
    Ok((
        ratio <= 0.25 && share >= 0.5,
        format!(
            "t_N TV stabilized {:.3e} / unstabilized {:.3e} = {:.3}; nodal shear-traction TV share in bottom quarter {:.2}",
            cmp.tv_stabilized, cmp.tv_unstabilized, ratio, share
        ),
    ))
}

/// 2×2 non-mortar faces against a 3×3 mortar side, every face sliding.
fn jacobian() -> Outcome {
    let mut mesh = Mesh::default();
    mesh.merge(&generate_structured([1.0, 1.0, 0.5], [2, 2, 1], [0.0, 0.0, -0.5])?, "nm");
    mesh.merge(&generate_structured([1.0, 1.0, 0.5], [3, 3, 1], [0.0; 3])?, "m");
    let problem = Problem {
        mesh,
        materials: [(0, ElasticMaterial { young: 100.0, poisson: 0.25 })].into(),
        interfaces: vec![InterfaceDef::frictional("fault", "nm.zmax", "m.zmin", 0.05, 30.0)],
        loads: LoadCase {
            dirichlet: vec![DirichletBc {
                nodes: NodeSelector::FaceSet { set: "nm.zmin".into() },
                components: vec![0, 1, 2],
                value: 0.0,
                curve: None,
            }],
            steps: 1,
            ..Default::default()
        },
        solver: SolverConfig::default(),
    };
    let model = Model::new(problem)?;
    let ctx = model.step_context(1)?;
    let mut contact = model.initial_state().contact;
    let mut u = vec![0.0; model.ndof()];
    let mut seed = 12345u64;
    let mut rand = || {
        seed = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        (seed >> 11) as f64 / (1u64 << 53) as f64 - 0.5
    };
    for &d in &ctx.dofs.free {
        u[d] = 1e-2 * rand();
    }
    for f in contact[0].faces.iter_mut() {
        f.regime = Regime::Slip;
        f.traction = Vec3::new(0.3 * rand(), 0.3 * rand(), -1.0 + 0.2 * rand());
        f.gap_prev = Vec3::new(1e-3 * rand(), 1e-3 * rand(), 0.0);
    }
    let nf = ctx.dofs.num_free();
    let nt = 3 * model.n_multipliers;
    let unknowns = |u: &[f64], contact: &[faultmortar::friction::ContactState]| {
        let mut x: Vec<f64> = ctx.dofs.free.iter().map(|&d| u[d]).collect();
        for f in &contact[0].faces {
            x.extend(f.traction.iter());
        }
        x
    };
    let x0 = unknowns(&u, &contact);
    let eval = |x: &[f64]| {
        let mut uu = u.clone();
        for (k, &d) in ctx.dofs.free.iter().enumerate() {
            uu[d] = x[k];
        }
        let mut cc = contact.clone();
        for (i, f) in cc[0].faces.iter_mut().enumerate() {
            f.traction = Vec3::new(x[nf + 3 * i], x[nf + 3 * i + 1], x[nf + 3 * i + 2]);
        }
        model.residual(&ctx, &uu, &cc)
    };
    // every face must be a genuine slip state: nonzero slip increment
    let b1 = model.interfaces[0].b1t.mul_vec(&u);
    let st = &contact[0];
    let min_slip = (0..st.len())
        .map(|i| {
            let j = Vec3::new(b1[3 * i], b1[3 * i + 1], b1[3 * i + 2]) / st.areas[i] - st.faces[i].gap_prev;
            let dg: Vector2<f64> = st.frames[i].tangential_part(&j);
            dg.norm()
        })
        .fold(f64::INFINITY, f64::min);
    let jac = model.jacobian(&ctx, &u, &contact).to_dense();
    let mut fd = DMatrix::zeros(nf + nt, nf + nt);
    for c in 0..nf + nt {
        let h = if c < nf { 1e-7 } else { 1e-6 };
        let mut xp = x0.clone();
        let mut xm = x0.clone();
        xp[c] += h;
        xm[c] -= h;
        let (rp, rm) = (eval(&xp), eval(&xm));
        for r in 0..nf + nt {
            fd[(r, c)] = (rp[r] - rm[r]) / (2.0 * h);
        }
    }
    let rows = nf..nf + nt;
    let block_err = |cols: std::ops::Range<usize>| {
        let a = jac.view((rows.start, cols.start), (rows.len(), cols.len()));
        let b = fd.view((rows.start, cols.start), (rows.len(), cols.len()));
        (a - b).abs().max() / a.abs().max()
    };
    let b2 = block_err(0..nf);
    let c = block_err(nf..nf + nt);
    let all = (&jac - &fd).abs().max() / jac.abs().max();
    Ok((
        min_slip > 1e-6 && b2 <= 1e-5 && c <= 1e-5 && all <= 1e-5,
        format!("{} slip faces (min |dg_T| {min_slip:.1e}): rel. error B2 {b2:.1e}, C {c:.1e}, full {all:.1e}", st.len()),
    ))
}
