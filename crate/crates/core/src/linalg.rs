//! Dense row-major matrices and the truncated-SVD least-squares solve that
//! every collocation fit goes through.
//!
//! Tall systems (rows > cols) are first reduced with a Householder QR so the
//! SVD only ever sees a `cols x cols` triangle; the residual norm is recovered
//! from the orthogonal factors instead of a second product with `A`.

use faer::dyn_stack::{MemBuffer, MemStack};
use faer::linalg::householder;
use faer::linalg::qr::no_pivoting::factor as qr;
use faer::linalg::solvers::Solve;
use faer::{Conj, Mat, Par};

use crate::error::{Error, Result};

/// Default relative singular-value cutoff used by collocation solves.
pub const DEFAULT_RCOND: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Dimension(format!(
                "{} entries for a {rows}x{cols} matrix",
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("matrix entries"));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    pub fn from_fn(
        rows: usize,
        cols: usize,
        mut f: impl FnMut(usize, usize) -> f64,
    ) -> Result<Self> {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self::new(rows, cols, data)
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::Dimension("ragged rows".into()));
        }
        Self::new(rows.len(), cols, rows.concat())
    }

    /// Builds a matrix from column vectors of equal length.
    pub fn from_columns(rows: usize, columns: &[Vec<f64>]) -> Result<Self> {
        if columns.iter().any(|c| c.len() != rows) {
            return Err(Error::Dimension(
                "column length differs from row count".into(),
            ));
        }
        let cols = columns.len();
        Self::from_fn(rows, cols, |i, j| columns[j][i])
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self.get(i, j)).collect()
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.cols, "matvec length mismatch");
        (0..self.rows)
            .map(|i| self.row(i).iter().zip(x).map(|(a, b)| a * b).sum())
            .collect()
    }

    pub fn transpose_matvec(&self, y: &[f64]) -> Vec<f64> {
        assert_eq!(y.len(), self.rows, "transpose matvec length mismatch");
        let mut out = vec![0.0; self.cols];
        for (i, yi) in y.iter().enumerate() {
            for (o, a) in out.iter_mut().zip(self.row(i)) {
                *o += a * yi;
            }
        }
        out
    }

    pub fn matmul(&self, other: &DenseMatrix) -> Result<DenseMatrix> {
        if self.cols != other.rows {
            return Err(Error::Dimension(format!(
                "{}x{} times {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(i, k);
                if a == 0.0 {
                    continue;
                }
                for j in 0..other.cols {
                    out.data[i * other.cols + j] += a * other.get(k, j);
                }
            }
        }
        Ok(out)
    }

    /// Stacks `self` on top of `below`.
    pub fn vstack(&self, below: &DenseMatrix) -> Result<DenseMatrix> {
        if self.cols != below.cols && self.rows > 0 && below.rows > 0 {
            return Err(Error::Dimension(
                "vstack with different column counts".into(),
            ));
        }
        let cols = if self.rows > 0 { self.cols } else { below.cols };
        let mut data = Vec::with_capacity(self.data.len() + below.data.len());
        data.extend_from_slice(&self.data);
        data.extend_from_slice(&below.data);
        Ok(Self {
            rows: self.rows + below.rows,
            cols,
            data,
        })
    }

    /// Returns a copy with one extra column on the right.
    pub fn append_column(&self, column: &[f64]) -> Result<DenseMatrix> {
        if column.len() != self.rows {
            return Err(Error::Dimension("appended column length".into()));
        }
        Self::from_fn(self.rows, self.cols + 1, |i, j| {
            if j < self.cols {
                self.get(i, j)
            } else {
                column[i]
            }
        })
    }

    fn to_faer(&self) -> Mat<f64> {
        Mat::from_fn(self.rows, self.cols, |i, j| self.data[i * self.cols + j])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LsqResult {
    pub solution: Vec<f64>,
    pub residual_norm: f64,
    pub effective_rank: usize,
    pub max_singular_value: f64,
    pub min_kept_singular_value: f64,
}

/// Minimum-norm least-squares solution of `A x ~ b`, discarding singular
/// values below `rcond * sigma_max`.
pub fn lstsq(a: &DenseMatrix, b: &[f64], rcond: f64) -> Result<LsqResult> {
    if b.len() != a.rows() {
        return Err(Error::Dimension(format!(
            "right-hand side has {} entries, matrix has {} rows",
            b.len(),
            a.rows()
        )));
    }
    if !(rcond > 0.0 && rcond < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "rcond {rcond} outside (0, 1)"
        )));
    }
    if b.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("least-squares right-hand side"));
    }
    let (m, n) = (a.rows(), a.cols());
    let b_norm = b.iter().map(|v| v * v).sum::<f64>().sqrt();
    if n == 0 || m == 0 {
        return Ok(LsqResult {
            solution: vec![0.0; n],
            residual_norm: b_norm,
            effective_rank: 0,
            max_singular_value: 0.0,
            min_kept_singular_value: 0.0,
        });
    }

    // Reduce to a square triangle when the system is tall.
    let (core, rhs, tail_sq) = if m > n {
        let mut work = a.to_faer();
        let mut rhs = Mat::from_fn(m, 1, |i, _| b[i]);
        let block = qr::recommended_block_size::<f64>(m, n);
        let mut coeffs = Mat::<f64>::zeros(block, n);
        qr::qr_in_place(
            work.as_mut(),
            coeffs.as_mut(),
            Par::Seq,
            MemStack::new(&mut MemBuffer::new(qr::qr_in_place_scratch::<f64>(
                m,
                n,
                block,
                Par::Seq,
                Default::default(),
            ))),
            Default::default(),
        );
        householder::apply_block_householder_sequence_transpose_on_the_left_in_place_with_conj(
            work.as_ref(),
            coeffs.as_ref(),
            Conj::No,
            rhs.as_mut(),
            Par::Seq,
            MemStack::new(&mut MemBuffer::new(
                householder::apply_block_householder_sequence_transpose_on_the_left_in_place_scratch::<f64>(
                    m, block, 1,
                ),
            )),
        );
        let r = Mat::from_fn(n, n, |i, j| if i <= j { work[(i, j)] } else { 0.0 });
        drop(work);
        let tail_sq: f64 = (n..m).map(|i| rhs[(i, 0)] * rhs[(i, 0)]).sum();
        let head: Vec<f64> = (0..n).map(|i| rhs[(i, 0)]).collect();
        (r, head, tail_sq)
    } else {
        (a.to_faer(), b.to_vec(), 0.0)
    };

    let svd = core.thin_svd().map_err(|_| Error::Svd)?;
    let (u, s, v) = (svd.U(), svd.S(), svd.V());
    let k = s.dim();
    let sigma_max = if k > 0 { s[0] } else { 0.0 };
    if !(sigma_max > 0.0) {
        return Ok(LsqResult {
            solution: vec![0.0; n],
            residual_norm: b_norm,
            effective_rank: 0,
            max_singular_value: 0.0,
            min_kept_singular_value: 0.0,
        });
    }
    let cutoff = rcond * sigma_max;
    let rank = (0..k).take_while(|&j| s[j] >= cutoff).count();

    let mut solution = vec![0.0; n];
    let mut fitted = vec![0.0; rhs.len()];
    for j in 0..rank {
        let proj: f64 = (0..rhs.len()).map(|i| u[(i, j)] * rhs[i]).sum();
        let scale = proj / s[j];
        for (i, x) in solution.iter_mut().enumerate() {
            *x += v[(i, j)] * scale;
        }
        for (i, f) in fitted.iter_mut().enumerate() {
            *f += u[(i, j)] * proj;
        }
    }
    let head_sq: f64 = rhs
        .iter()
        .zip(&fitted)
        .map(|(c, f)| (c - f) * (c - f))
        .sum();

    Ok(LsqResult {
        solution,
        residual_norm: (head_sq + tail_sq).sqrt(),
        effective_rank: rank,
        max_singular_value: sigma_max,
        min_kept_singular_value: if rank > 0 { s[rank - 1] } else { 0.0 },
    })
}

/// Solves the square system `A x = b` by LU with partial pivoting.
pub fn solve_square(a: &DenseMatrix, b: &[f64]) -> Result<Vec<f64>> {
    if a.rows() != a.cols() || b.len() != a.rows() {
        return Err(Error::Dimension(
            "square solve needs an n x n matrix and n entries".into(),
        ));
    }
    let lu = a.to_faer().partial_piv_lu();
    let mut rhs = Mat::from_fn(b.len(), 1, |i, _| b[i]);
    lu.solve_in_place(rhs.as_mut());
    let x: Vec<f64> = (0..b.len()).map(|i| rhs[(i, 0)]).collect();
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("square solve (singular matrix)"));
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lcg(state: &mut u64) -> f64 {
        *state = state
            .wrapping_mul(6364136223846793005)
            .wrapping_add(1442695040888963407);
        ((*state >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0
    }

    fn random_matrix(rows: usize, cols: usize, seed: u64) -> DenseMatrix {
        let mut s = seed;
        DenseMatrix::from_fn(rows, cols, |_, _| lcg(&mut s)).unwrap()
    }

    fn residual(a: &DenseMatrix, x: &[f64], b: &[f64]) -> f64 {
        a.matvec(x)
            .iter()
            .zip(b)
            .map(|(p, q)| (p - q) * (p - q))
            .sum::<f64>()
            .sqrt()
    }

    /// Gaussian elimination with partial pivoting on the normal equations.
    fn normal_equations(a: &DenseMatrix, b: &[f64]) -> Vec<f64> {
        let n = a.cols();
        let mut m = vec![vec![0.0; n + 1]; n];
        for i in 0..n {
            for j in 0..n {
                m[i][j] = (0..a.rows()).map(|k| a.get(k, i) * a.get(k, j)).sum();
            }
            m[i][n] = (0..a.rows()).map(|k| a.get(k, i) * b[k]).sum();
        }
        for c in 0..n {
            let p = (c..n)
                .max_by(|&x, &y| m[x][c].abs().total_cmp(&m[y][c].abs()))
                .unwrap();
            m.swap(c, p);
            for r in c + 1..n {
                let f = m[r][c] / m[c][c];
                for k in c..=n {
                    m[r][k] -= f * m[c][k];
                }
            }
        }
        let mut x = vec![0.0; n];
        for r in (0..n).rev() {
            let s: f64 = (r + 1..n).map(|k| m[r][k] * x[k]).sum();
            x[r] = (m[r][n] - s) / m[r][r];
        }
        x
    }

    #[test]
    fn identity_system() {
        let res = lstsq(&DenseMatrix::identity(2), &[1.0, 2.0], DEFAULT_RCOND).unwrap();
        assert!((res.solution[0] - 1.0).abs() < 1e-15);
        assert!((res.solution[1] - 2.0).abs() < 1e-15);
        assert!(res.residual_norm < 1e-15);
        assert_eq!(res.effective_rank, 2);
    }

    #[test]
    fn rank_one_minimum_norm_split() {
        let a = DenseMatrix::from_rows(&[vec![1.0, 1.0], vec![1.0, 1.0]]).unwrap();
        let res = lstsq(&a, &[1.0, 1.0], DEFAULT_RCOND).unwrap();
        assert!((res.solution[0] - 0.5).abs() < 1e-14);
        assert!((res.solution[1] - 0.5).abs() < 1e-14);
        assert_eq!(res.effective_rank, 1);
    }

    #[test]
    fn tall_random_matches_normal_equations() {
        let a = random_matrix(10, 4, 11);
        let mut s = 99;
        let b: Vec<f64> = (0..10).map(|_| lcg(&mut s)).collect();
        let res = lstsq(&a, &b, DEFAULT_RCOND).unwrap();
        let oracle = normal_equations(&a, &b);
        let scale = oracle.iter().map(|v| v * v).sum::<f64>().sqrt();
        for (x, y) in res.solution.iter().zip(&oracle) {
            assert!((x - y).abs() <= 1e-10 * scale, "{x} vs {y}");
        }
        assert!((res.residual_norm - residual(&a, &res.solution, &b)).abs() < 1e-12);
    }

    #[test]
    fn wide_system_is_solved_exactly_with_minimum_norm() {
        let a = random_matrix(3, 6, 5);
        let b = [0.3, -1.0, 2.0];
        let res = lstsq(&a, &b, DEFAULT_RCOND).unwrap();
        assert!(res.residual_norm < 1e-12);
        // the minimum-norm solution lies in the row space of A
        let y = normal_equations(
            &a.matmul(&DenseMatrix::from_fn(6, 3, |i, j| a.get(j, i)).unwrap())
                .unwrap(),
            &b,
        );
        let x = a.transpose_matvec(&y);
        for (p, q) in res.solution.iter().zip(&x) {
            assert!((p - q).abs() < 1e-10);
        }
    }

    #[test]
    fn zero_matrix_gives_zero_solution() {
        let res = lstsq(
            &DenseMatrix::zeros(4, 3),
            &[1.0, 0.0, 0.0, 0.0],
            DEFAULT_RCOND,
        )
        .unwrap();
        assert_eq!(res.solution, vec![0.0; 3]);
        assert_eq!(res.effective_rank, 0);
        assert!((res.residual_norm - 1.0).abs() < 1e-15);
    }

    #[test]
    fn rejects_mismatched_rhs_and_nonfinite_input() {
        assert!(matches!(
            lstsq(&DenseMatrix::identity(2), &[1.0], DEFAULT_RCOND),
            Err(Error::Dimension(_))
        ));
        assert!(matches!(
            lstsq(&DenseMatrix::identity(2), &[1.0, f64::NAN], DEFAULT_RCOND),
            Err(Error::NonFinite(_))
        ));
        assert!(DenseMatrix::new(1, 1, vec![f64::INFINITY]).is_err());
    }

    #[test]
    fn null_space_perturbation_increases_norm() {
        // columns 3 and 4 duplicate columns 0 and 1: null space is spanned by
        // e0 - e3 and e1 - e4
        let base = random_matrix(12, 3, 3);
        let a = DenseMatrix::from_fn(12, 5, |i, j| base.get(i, [0, 1, 2, 0, 1][j])).unwrap();
        let mut s = 7;
        let b: Vec<f64> = (0..12).map(|_| lcg(&mut s)).collect();
        let res = lstsq(&a, &b, DEFAULT_RCOND).unwrap();
        assert_eq!(res.effective_rank, 3);
        let norm = |x: &[f64]| x.iter().map(|v| v * v).sum::<f64>().sqrt();
        for (t0, t1) in [(1e-3, 0.0), (0.0, -2e-2), (0.3, 0.1)] {
            let mut x = res.solution.clone();
            x[0] += t0;
            x[3] -= t0;
            x[1] += t1;
            x[4] -= t1;
            assert!(norm(&x) > norm(&res.solution));
            assert!((residual(&a, &x, &b) - res.residual_norm).abs() < 1e-12);
        }
    }

    #[test]
    fn orthogonal_invariance() {
        let a = random_matrix(8, 3, 21);
        let mut s = 4;
        let b: Vec<f64> = (0..8).map(|_| lcg(&mut s)).collect();
        // Householder reflector as the orthogonal transform
        let v: Vec<f64> = (0..8).map(|_| lcg(&mut s)).collect();
        let vv: f64 = v.iter().map(|x| x * x).sum();
        let q = DenseMatrix::from_fn(8, 8, |i, j| {
            (if i == j { 1.0 } else { 0.0 }) - 2.0 * v[i] * v[j] / vv
        })
        .unwrap();
        let r1 = lstsq(&a, &b, DEFAULT_RCOND).unwrap();
        let r2 = lstsq(&q.matmul(&a).unwrap(), &q.matvec(&b), DEFAULT_RCOND).unwrap();
        for (x, y) in r1.solution.iter().zip(&r2.solution) {
            assert!((x - y).abs() < 1e-12);
        }
        assert!((r1.residual_norm - r2.residual_norm).abs() < 1e-12);
    }
}
