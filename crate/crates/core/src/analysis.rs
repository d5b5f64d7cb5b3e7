//! Numerical inf-sup test and Schur-complement kernel diagnostics.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};
use crate::mortar::MortarCoupling;
use crate::solver::Model;
use crate::sparse::{CsrMatrix, SparseCholesky};

/// Diagonal of the P0 multiplier mass matrix: `area(F)` three times per face.
pub fn assemble_q(coupling: &MortarCoupling) -> Vec<f64> {
    coupling.areas.iter().flat_map(|&a| [a, a, a]).collect()
}

/// `S = Bᵀ A⁻¹ B` with `A` SPD (free DOFs) and `B` of size free × traction.
pub fn schur_complement(a: &CsrMatrix, b: &CsrMatrix) -> Result<DMatrix<f64>> {
    let chol = SparseCholesky::new(a)?;
    let bd = b.to_dense();
    let x = chol.solve_dense(&bd);
    let s = bd.transpose() * x;
    Ok((&s + s.transpose()) * 0.5)
}

/// Eigen-decomposition of `D^{-1/2} M D^{-1/2}` for a positive diagonal `D`.
fn scaled_eigen(m: &DMatrix<f64>, d: &[f64]) -> SymmetricEigen<f64, nalgebra::Dyn> {
    let n = m.nrows();
    let s: Vec<f64> = d.iter().map(|v| 1.0 / v.sqrt()).collect();
    let scaled = DMatrix::from_fn(n, n, |i, j| m[(i, j)] * s[i] * s[j]);
    SymmetricEigen::new(scaled)
}

/// `β*` = square root of the smallest generalized eigenvalue of
/// `(S [+ H]) t = λ (h Q) t`, with `Q` diagonal.
pub fn infsup_constant(s: &DMatrix<f64>, h_stab: Option<&DMatrix<f64>>, q: &[f64], h: f64) -> Result<f64> {
    if q.len() != s.nrows() || q.iter().any(|v| !(*v > 0.0)) || !(h > 0.0) {
        return Err(Error::Domain("inf-sup test needs a positive mass diagonal and mesh size".into()));
    }
    let m = match h_stab {
        Some(hm) => s + hm,
        None => s.clone(),
    };
    let d: Vec<f64> = q.iter().map(|v| v * h).collect();
    let eig = scaled_eigen(&m, &d);
    Ok(eig.eigenvalues.min().max(0.0).sqrt())
}

/// Eigenvectors of `S` with eigenvalue below `tol · λ_max`.
pub fn schur_kernel(s: &DMatrix<f64>, tol: f64) -> (usize, DMatrix<f64>) {
    let eig = SymmetricEigen::new(s.clone());
    let lmax = eig.eigenvalues.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let idx: Vec<usize> = (0..s.nrows()).filter(|&i| eig.eigenvalues[i] < tol * lmax).collect();
    let basis = DMatrix::from_fn(s.nrows(), idx.len(), |r, c| eig.eigenvectors[(r, idx[c])]);
    (idx.len(), basis)
}

/// Smallest and largest eigenvalue of a symmetric matrix.
pub fn eigen_range(m: &DMatrix<f64>) -> (f64, f64) {
    let ev = m.clone().symmetric_eigenvalues();
    (ev.min(), ev.max())
}

/// Outcome of the inf-sup test on one mesh.
#[derive(Debug, Clone, PartialEq)]
pub struct InfSupEntry {
    /// Mean non-mortar face diameter.
    pub h: f64,
    pub r_h: f64,
    pub stabilized: bool,
    pub beta: f64,
    /// Smallest eigenvalue of `S (+H)` relative to its largest.
    pub relative_min_eigenvalue: f64,
    /// Dimension of the kernel of `S` (tolerance 1e-10).
    pub kernel_dim: usize,
}

/// Dense operators of a single-interface model after Dirichlet elimination.
pub struct SaddleOperators {
    pub s: DMatrix<f64>,
    pub h: Option<DMatrix<f64>>,
    pub q: Vec<f64>,
    pub h_size: f64,
    pub r_h: f64,
}

pub fn saddle_operators(model: &Model) -> Result<SaddleOperators> {
    if model.interfaces.len() != 1 {
        return Err(Error::Config("the inf-sup test expects exactly one interface".into()));
    }
    let ctx = model.step_context(1)?;
    let it = &model.interfaces[0];
    let s = schur_complement(&ctx.a_ff, &ctx.b1_free).map_err(|e| {
        Error::Config(format!(
            "the inf-sup test needs every block fully constrained (stiffness factorization failed: {e})"
        ))
    })?;
    let h = it.stabilization.as_ref().map(|st| st.h.to_dense());
    Ok(SaddleOperators {
        s,
        h,
        q: assemble_q(&it.coupling),
        h_size: it.topo.non_mortar_size,
        r_h: it.topo.refinement_ratio,
    })
}

pub fn infsup_entry(ops: &SaddleOperators, stabilized: bool) -> Result<InfSupEntry> {
    let h_stab = if stabilized {
        Some(ops.h.as_ref().ok_or_else(|| Error::Config("model was assembled without stabilization".into()))?)
    } else {
        None
    };
    let beta = infsup_constant(&ops.s, h_stab, &ops.q, ops.h_size)?;
    let m = match h_stab {
        Some(h) => &ops.s + h,
        None => ops.s.clone(),
    };
    let (lo, hi) = eigen_range(&m);
    let (kernel_dim, _) = schur_kernel(&ops.s, 1e-10);
    Ok(InfSupEntry {
        h: ops.h_size,
        r_h: ops.r_h,
        stabilized,
        beta,
        relative_min_eigenvalue: lo / hi,
        kernel_dim,
    })
}

pub fn infsup_csv(entries: &[InfSupEntry]) -> String {
    let mut s = String::from("h,r_h,stabilized,beta,relative_min_eigenvalue,kernel_dim\n");
    for e in entries {
        s.push_str(&format!(
            "{:.6e},{:.6},{},{:.6e},{:.6e},{}\n",
            e.h, e.r_h, e.stabilized, e.beta, e.relative_min_eigenvalue, e.kernel_dim
        ));
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sparse::TripletBuilder;

    #[test]
    fn generalized_eigenvalue_matches_rayleigh_quotient() {
        let s = DMatrix::from_row_slice(3, 3, &[4.0, 1.0, 0.0, 1.0, 3.0, 0.5, 0.0, 0.5, 2.0]);
        let q = [0.5, 1.0, 2.0];
        let h = 0.25;
        let beta = infsup_constant(&s, None, &q, h).unwrap();
        // brute-force minimum of the quotient over the scaled eigenvectors
        let d: Vec<f64> = q.iter().map(|v| v * h).collect();
        let eig = scaled_eigen(&s, &d);
        let k = eig.eigenvalues.imin();
        let t: Vec<f64> = (0..3).map(|i| eig.eigenvectors[(i, k)] / d[i].sqrt()).collect();
        let tv = nalgebra::DVector::from_vec(t.clone());
        let num = (tv.transpose() * &s * &tv)[(0, 0)];
        let den: f64 = (0..3).map(|i| t[i] * t[i] * d[i]).sum();
        assert!(((num / den).sqrt() - beta).abs() <= 1e-10 * beta);
    }

    #[test]
    fn schur_scaling_and_kernel() {
        let mut a = TripletBuilder::new(3, 3);
        for i in 0..3 {
            a.push(i, i, 2.0);
        }
        a.push(0, 1, -1.0);
        a.push(1, 0, -1.0);
        let a = a.build();
        // two identical multiplier columns: one-dimensional kernel
        let mut b = TripletBuilder::new(3, 2);
        b.push(0, 0, 1.0);
        b.push(0, 1, 1.0);
        let b = b.build();
        let s = schur_complement(&a, &b).unwrap();
        let (dim, basis) = schur_kernel(&s, 1e-10);
        assert_eq!(dim, 1);
        assert!((basis[(0, 0)] + basis[(1, 0)]).abs() < 1e-12);
        let mut a2 = a.clone();
        a2.scale(4.0);
        let s2 = schur_complement(&a2, &b).unwrap();
        assert!((s2 * 4.0 - &s).abs().max() < 1e-14);
        assert_eq!(schur_kernel(&s, 1e-10).0, dim);
    }

    #[test]
    fn non_spd_stiffness_is_rejected() {
        let mut a = TripletBuilder::new(2, 2);
        a.push(0, 0, 1.0);
        a.push(1, 1, -1.0);
        let b = CsrMatrix::zeros(2, 1);
        assert!(matches!(schur_complement(&a.build(), &b), Err(Error::NotPositiveDefinite(_))));
    }
}
