//! Compressed-row sparse matrices and the direct solvers built on faer.

use faer::linalg::solvers::Solve;
use faer::sparse::{SparseColMat, Triplet};
use faer::{Mat, Side};
use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Coordinate-format accumulator. Duplicate entries are summed on conversion.
#[derive(Debug, Clone, Default)]
pub struct TripletBuilder {
    pub nrows: usize,
    pub ncols: usize,
    entries: Vec<(usize, usize, f64)>,
}

impl TripletBuilder {
    pub fn retain(&mut self, mut keep: impl FnMut(usize, usize, f64) -> bool) {
        self.entries.retain(|&(r, c, v)| keep(r, c, v));
    }

    pub fn new(nrows: usize, ncols: usize) -> Self {
        Self {
            nrows,
            ncols,
            entries: Vec::new(),
        }
    }

    #[inline]
    pub fn push(&mut self, row: usize, col: usize, value: f64) {
        debug_assert!(row < self.nrows && col < self.ncols);
        if value != 0.0 {
            self.entries.push((row, col, value));
        }
    }

    pub fn extend_from(&mut self, other: &TripletBuilder, row_offset: usize, col_offset: usize) {
        for &(r, c, v) in &other.entries {
            self.push(r + row_offset, c + col_offset, v);
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn build(mut self) -> CsrMatrix {
        self.entries.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        let mut indptr = vec![0usize; self.nrows + 1];
        let mut indices = Vec::with_capacity(self.entries.len());
        let mut values: Vec<f64> = Vec::with_capacity(self.entries.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in self.entries {
            if last == Some((r, c)) {
                *values.last_mut().unwrap() += v;
            } else {
                indices.push(c);
                values.push(v);
                indptr[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for i in 0..self.nrows {
            indptr[i + 1] += indptr[i];
        }
        CsrMatrix {
            nrows: self.nrows,
            ncols: self.ncols,
            indptr,
            indices,
            values,
        }
    }
}

/// Compressed sparse row matrix with sorted, unique column indices per row.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    pub nrows: usize,
    pub ncols: usize,
    pub indptr: Vec<usize>,
    pub indices: Vec<usize>,
    pub values: Vec<f64>,
}

impl CsrMatrix {
    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        Self {
            nrows,
            ncols,
            indptr: vec![0; nrows + 1],
            indices: Vec::new(),
            values: Vec::new(),
        }
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let range = self.indptr[i]..self.indptr[i + 1];
        self.indices[range.clone()]
            .iter()
            .copied()
            .zip(self.values[range].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let range = self.indptr[i]..self.indptr[i + 1];
        match self.indices[range.clone()].binary_search(&j) {
            Ok(k) => self.values[range.start + k],
            Err(_) => 0.0,
        }
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.ncols, "dimension mismatch in mul_vec");
        (0..self.nrows)
            .map(|i| self.row(i).map(|(j, v)| v * x[j]).sum())
            .collect()
    }

    /// `y += alpha * self * x`
    pub fn mul_vec_acc(&self, alpha: f64, x: &[f64], y: &mut [f64]) {
        for (i, yi) in y.iter_mut().enumerate().take(self.nrows) {
            let s: f64 = self.row(i).map(|(j, v)| v * x[j]).sum();
            *yi += alpha * s;
        }
    }

    pub fn transpose(&self) -> CsrMatrix {
        let mut t = TripletBuilder::new(self.ncols, self.nrows);
        for i in 0..self.nrows {
            for (j, v) in self.row(i) {
                t.push(j, i, v);
            }
        }
        t.build()
    }

    pub fn scale(&mut self, alpha: f64) {
        self.values.iter_mut().for_each(|v| *v *= alpha);
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.nrows.min(self.ncols)).map(|i| self.get(i, i)).collect()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Sub-matrix picking the given rows and columns (in the given order).
    pub fn select(&self, rows: &[usize], cols: &[usize]) -> CsrMatrix {
        let mut col_map = vec![usize::MAX; self.ncols];
        for (k, &c) in cols.iter().enumerate() {
            col_map[c] = k;
        }
        let mut t = TripletBuilder::new(rows.len(), cols.len());
        for (ri, &r) in rows.iter().enumerate() {
            for (j, v) in self.row(r) {
                let k = col_map[j];
                if k != usize::MAX {
                    t.push(ri, k, v);
                }
            }
        }
        t.build()
    }

    pub fn to_triplets(&self) -> TripletBuilder {
        let mut t = TripletBuilder::new(self.nrows, self.ncols);
        for i in 0..self.nrows {
            for (j, v) in self.row(i) {
                t.push(i, j, v);
            }
        }
        t
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.nrows, self.ncols);
        for i in 0..self.nrows {
            for (j, v) in self.row(i) {
                m[(i, j)] += v;
            }
        }
        m
    }

    pub fn from_dense(m: &DMatrix<f64>) -> CsrMatrix {
        let mut t = TripletBuilder::new(m.nrows(), m.ncols());
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                t.push(i, j, m[(i, j)]);
            }
        }
        t.build()
    }

    /// Largest absolute entry of `self - selfᵀ`.
    pub fn asymmetry(&self) -> f64 {
        let t = self.transpose();
        let mut worst: f64 = 0.0;
        for i in 0..self.nrows {
            for (j, v) in self.row(i) {
                worst = worst.max((v - t.get(i, j)).abs());
            }
            for (j, v) in t.row(i) {
                worst = worst.max((v - self.get(i, j)).abs());
            }
        }
        worst
    }

    fn to_faer(&self) -> Result<SparseColMat<usize, f64>> {
        let mut trip = Vec::with_capacity(self.nnz());
        for i in 0..self.nrows {
            for (j, v) in self.row(i) {
                trip.push(Triplet::new(i, j, v));
            }
        }
        SparseColMat::try_new_from_triplets(self.nrows, self.ncols, &trip)
            .map_err(|e| Error::Config(format!("sparse matrix creation failed: {e:?}")))
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Direct LU solver: dense partial pivoting for small systems (which also
/// yields a trustworthy smallest pivot), faer's sparse LU otherwise.
pub struct SparseLu {
    matrix: CsrMatrix,
    factor: LuFactor,
}

enum LuFactor {
    Dense(nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>),
    Sparse(faer::sparse::linalg::solvers::Lu<usize, f64>),
}

/// Systems up to this size are factored densely.
pub const DENSE_LU_LIMIT: usize = 1500;
/// Relative pivot below which a dense factor is declared singular.
const SINGULAR_PIVOT: f64 = 1e-13;
/// Relative residual above which a direct solve is declared singular.
const SINGULAR_RESIDUAL: f64 = 1e-6;
const MAX_REFINEMENT: usize = 3;

impl SparseLu {
    pub fn new(matrix: &CsrMatrix) -> Result<Self> {
        assert_eq!(matrix.nrows, matrix.ncols, "LU needs a square matrix");
        if matrix.nrows <= DENSE_LU_LIMIT {
            return Self::dense(matrix);
        }
        let faer_mat = matrix.to_faer()?;
        match faer_mat.sp_lu() {
            Ok(lu) => Ok(Self {
                matrix: matrix.clone(),
                factor: LuFactor::Sparse(lu),
            }),
            // structurally singular patterns can still be numerically regular
            Err(_) if matrix.nrows <= 2 * DENSE_LU_LIMIT => Self::dense(matrix),
            Err(e) => Err(Error::Singular {
                msg: format!("sparse LU failed: {e:?}"),
                smallest_pivot: 0.0,
                residual_ratio: f64::INFINITY,
            }),
        }
    }

    fn dense(matrix: &CsrMatrix) -> Result<Self> {
        let a = matrix.to_dense();
        let scale = a.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let lu = a.lu();
        let u = lu.u();
        let pivot = (0..u.nrows())
            .map(|i| u[(i, i)].abs())
            .fold(f64::INFINITY, f64::min)
            / scale.max(f64::MIN_POSITIVE);
        if !(pivot >= SINGULAR_PIVOT) {
            return Err(Error::Singular {
                msg: "LU pivot below 1e-13 relative to max|A|; the system has a (near) kernel, e.g. spurious multiplier modes"
                    .into(),
                smallest_pivot: pivot,
                residual_ratio: f64::NAN,
            });
        }
        Ok(Self {
            matrix: matrix.clone(),
            factor: LuFactor::Dense(lu),
        })
    }

    fn apply(&self, rhs: &[f64]) -> Vec<f64> {
        match &self.factor {
            LuFactor::Dense(lu) => {
                let b = nalgebra::DVector::from_column_slice(rhs);
                lu.solve(&b)
                    .map(|x| x.as_slice().to_vec())
                    .unwrap_or_else(|| vec![f64::NAN; rhs.len()])
            }
            LuFactor::Sparse(lu) => {
                let b = Mat::from_fn(rhs.len(), 1, |i, _| rhs[i]);
                let x = lu.solve(&b);
                (0..rhs.len()).map(|i| x[(i, 0)]).collect()
            }
        }
    }

    fn residual(&self, x: &[f64], rhs: &[f64]) -> Vec<f64> {
        let mut r = self.matrix.mul_vec(x);
        for (ri, bi) in r.iter_mut().zip(rhs) {
            *ri = bi - *ri;
        }
        r
    }

    /// Solves `A x = b` with a few steps of iterative refinement and rejects
    /// solutions whose residual shows a (numerically) singular factor.
    pub fn solve(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        let bnorm = norm(rhs);
        let rel = |r: &[f64]| if bnorm > 0.0 { norm(r) / bnorm } else { norm(r) };
        let mut x = self.apply(rhs);
        let mut r = self.residual(&x, rhs);
        let mut ratio = rel(&r);
        for _ in 0..MAX_REFINEMENT {
            if !x.iter().all(|v| v.is_finite()) || ratio <= 1e-14 {
                break;
            }
            let dx = self.apply(&r);
            let trial: Vec<f64> = x.iter().zip(&dx).map(|(a, b)| a + b).collect();
            let tr = self.residual(&trial, rhs);
            let tratio = rel(&tr);
            if !(tratio < ratio) {
                break;
            }
            x = trial;
            r = tr;
            ratio = tratio;
        }
        if !x.iter().all(|v| v.is_finite()) || !(ratio <= SINGULAR_RESIDUAL) {
            return Err(Error::Singular {
                msg: "direct solve did not reproduce the right-hand side; a spurious (kernel) mode is likely"
                    .into(),
                smallest_pivot: self.smallest_pivot_estimate(),
                residual_ratio: ratio,
            });
        }
        Ok(x)
    }

    /// Smallest pivot of a dense LU, relative to the largest entry. Only
    /// computed for moderate sizes; larger systems report NaN.
    pub fn smallest_pivot_estimate(&self) -> f64 {
        if self.matrix.nrows > 2 * DENSE_LU_LIMIT {
            return f64::NAN;
        }
        smallest_dense_pivot(&self.matrix.to_dense())
    }
}

/// Smallest |U_ii| / max|A_ij| of a partially pivoted dense LU.
pub fn smallest_dense_pivot(a: &DMatrix<f64>) -> f64 {
    let scale = a.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if a.nrows() == 0 || scale == 0.0 {
        return 0.0;
    }
    let lu = a.clone().lu();
    let u = lu.u();
    (0..u.nrows().min(u.ncols()))
        .map(|i| u[(i, i)].abs() / scale)
        .fold(f64::INFINITY, f64::min)
}

/// Sparse Cholesky factorization for SPD matrices.
pub struct SparseCholesky {
    llt: faer::sparse::linalg::solvers::Llt<usize, f64>,
    n: usize,
}

impl SparseCholesky {
    pub fn new(matrix: &CsrMatrix) -> Result<Self> {
        let faer_mat = matrix.to_faer()?;
        let llt = faer_mat
            .sp_cholesky(Side::Lower)
            .map_err(|e| Error::NotPositiveDefinite(format!("{e:?}")))?;
        Ok(Self {
            llt,
            n: matrix.nrows,
        })
    }

    pub fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        let b = Mat::from_fn(self.n, 1, |i, _| rhs[i]);
        let x = self.llt.solve(&b);
        (0..self.n).map(|i| x[(i, 0)]).collect()
    }

    /// Solves for all columns of a dense right-hand side at once.
    pub fn solve_dense(&self, rhs: &DMatrix<f64>) -> DMatrix<f64> {
        let b = Mat::from_fn(rhs.nrows(), rhs.ncols(), |i, j| rhs[(i, j)]);
        let x = self.llt.solve(&b);
        DMatrix::from_fn(rhs.nrows(), rhs.ncols(), |i, j| x[(i, j)])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn laplacian_1d(n: usize) -> CsrMatrix {
        let mut t = TripletBuilder::new(n, n);
        for i in 0..n {
            t.push(i, i, 2.0);
            if i > 0 {
                t.push(i, i - 1, -1.0);
            }
            if i + 1 < n {
                t.push(i, i + 1, -1.0);
            }
        }
        t.build()
    }

    #[test]
    fn duplicates_are_summed() {
        let mut t = TripletBuilder::new(2, 2);
        t.push(0, 1, 1.0);
        t.push(0, 1, 2.5);
        t.push(1, 0, -1.0);
        let m = t.build();
        assert_eq!(m.get(0, 1), 3.5);
        assert_eq!(m.get(1, 0), -1.0);
        assert_eq!(m.get(0, 0), 0.0);
        assert_eq!(m.nnz(), 2);
    }

    #[test]
    fn transpose_and_select() {
        let mut t = TripletBuilder::new(2, 3);
        t.push(0, 2, 4.0);
        t.push(1, 0, 5.0);
        let m = t.build();
        let mt = m.transpose();
        assert_eq!(mt.nrows, 3);
        assert_eq!(mt.get(2, 0), 4.0);
        let s = m.select(&[1, 0], &[2, 0]);
        assert_eq!(s.get(0, 1), 5.0);
        assert_eq!(s.get(1, 0), 4.0);
    }

    #[test]
    fn lu_solves_indefinite_system() {
        // [[0, 1], [1, 0]] needs pivoting
        let mut t = TripletBuilder::new(2, 2);
        t.push(0, 1, 1.0);
        t.push(1, 0, 1.0);
        let lu = SparseLu::new(&t.build()).unwrap();
        let x = lu.solve(&[3.0, 7.0]).unwrap();
        assert!((x[0] - 7.0).abs() < 1e-14 && (x[1] - 3.0).abs() < 1e-14);
    }

    #[test]
    fn lu_rejects_singular_matrix() {
        let mut t = TripletBuilder::new(3, 3);
        t.push(0, 0, 1.0);
        t.push(1, 1, 1.0);
        t.push(0, 1, 1.0);
        t.push(1, 0, 1.0);
        t.push(2, 2, 1.0);
        let result = SparseLu::new(&t.build()).and_then(|lu| lu.solve(&[1.0, 2.0, 3.0]));
        assert!(matches!(result, Err(Error::Singular { .. })));
    }

    #[test]
    fn cholesky_matches_lu() {
        let a = laplacian_1d(10);
        let b: Vec<f64> = (0..10).map(|i| i as f64).collect();
        let x1 = SparseCholesky::new(&a).unwrap().solve(&b);
        let x2 = SparseLu::new(&a).unwrap().solve(&b).unwrap();
        for (p, q) in x1.iter().zip(&x2) {
            assert!((p - q).abs() < 1e-12);
        }
    }
}
