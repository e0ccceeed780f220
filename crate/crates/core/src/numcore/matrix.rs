use crate::error::{Error, Result};

/// Dense row-major matrix of `f64`.
///
/// Every public constructor rejects non-finite values, and every arithmetic
/// operation re-checks its output, so a `Matrix` obtained through the public
/// API never holds NaN or infinity.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Shape(format!(
                "{} values cannot fill a {rows}x{cols} matrix",
                data.len()
            )));
        }
        ensure_finite(&data, "matrix data")?;
        Ok(Matrix { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    /// Builds a matrix from equally long rows.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for (i, r) in rows.iter().enumerate() {
            let r = r.as_ref();
            if r.len() != cols {
                return Err(Error::Shape(format!(
                    "row {i} has {} columns, expected {cols}",
                    r.len()
                )));
            }
            data.extend_from_slice(r);
        }
        Matrix::new(rows.len(), cols, data)
    }

    /// Caller guarantees `data.len() == rows * cols` and finiteness.
    pub(crate) fn from_vec_unchecked(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), rows * cols);
        Matrix { rows, cols, data }
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub(crate) fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn iter_rows(&self) -> impl Iterator<Item = &[f64]> + '_ {
        // chunks_exact(0) panics, so guard the degenerate case.
        let width = self.cols.max(1);
        self.data
            .chunks_exact(width)
            .take(if self.cols == 0 { 0 } else { self.rows })
    }

    /// Gathers the given rows (repeats allowed) into a new matrix.
    pub fn select_rows(&self, indices: &[usize]) -> Matrix {
        let mut data = Vec::with_capacity(indices.len() * self.cols);
        for &i in indices {
            data.extend_from_slice(self.row(i));
        }
        Matrix::from_vec_unchecked(indices.len(), self.cols, data)
    }

    pub fn column(&self, c: usize) -> Vec<f64> {
        (0..self.rows).map(|r| self.get(r, c)).collect()
    }

    pub fn transpose(&self) -> Matrix {
        let mut out = vec![0.0; self.data.len()];
        for r in 0..self.rows {
            for c in 0..self.cols {
                out[c * self.rows + r] = self.data[r * self.cols + c];
            }
        }
        Matrix::from_vec_unchecked(self.cols, self.rows, out)
    }

    /// `self · other`.
    pub fn matmul(&self, other: &Matrix) -> Result<Matrix> {
        matmul(self, other)
    }

    /// `selfᵀ · other`, without materializing the transpose.
    pub fn t_matmul(&self, other: &Matrix) -> Result<Matrix> {
        if self.rows != other.rows {
            return Err(Error::Shape(format!(
                "cannot multiply transpose of {}x{} by {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let out = gemm(
            self.cols,
            self.rows,
            other.cols,
            (&self.data, 1, self.cols as isize),
            (&other.data, other.cols as isize, 1),
        );
        checked(self.cols, other.cols, out)
    }

    /// `self · otherᵀ`, without materializing the transpose.
    pub fn matmul_t(&self, other: &Matrix) -> Result<Matrix> {
        if self.cols != other.cols {
            return Err(Error::Shape(format!(
                "cannot multiply {}x{} by transpose of {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let out = gemm(
            self.rows,
            self.cols,
            other.rows,
            (&self.data, self.cols as isize, 1),
            (&other.data, 1, other.cols as isize),
        );
        checked(self.rows, other.rows, out)
    }
}

/// Standard matrix product `a · b`.
///
/// Rows of the result depend only on the matching row of `a`, so scoring a
/// single vector gives bitwise the same numbers as scoring it inside a batch.
pub fn matmul(a: &Matrix, b: &Matrix) -> Result<Matrix> {
    if a.cols != b.rows {
        return Err(Error::Shape(format!(
            "cannot multiply {}x{} by {}x{}",
            a.rows, a.cols, b.rows, b.cols
        )));
    }
    let out = gemm(
        a.rows,
        a.cols,
        b.cols,
        (&a.data, a.cols as isize, 1),
        (&b.data, b.cols as isize, 1),
    );
    checked(a.rows, b.cols, out)
}

fn gemm(
    m: usize,
    k: usize,
    n: usize,
    a: (&[f64], isize, isize),
    b: (&[f64], isize, isize),
) -> Vec<f64> {
    let mut out = vec![0.0; m * n];
    if m == 0 || n == 0 || k == 0 {
        return out;
    }
    // SAFETY: the strides describe exactly the row-major (or transposed) layouts
    // of `a` (m×k) and `b` (k×n) whose lengths were checked by the callers, and
    // `out` is a fresh m×n row-major buffer.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.0.as_ptr(),
            a.1,
            a.2,
            b.0.as_ptr(),
            b.1,
            b.2,
            0.0,
            out.as_mut_ptr(),
            n as isize,
            1,
        );
    }
    out
}

fn checked(rows: usize, cols: usize, data: Vec<f64>) -> Result<Matrix> {
    ensure_finite(&data, "matrix product")?;
    Ok(Matrix::from_vec_unchecked(rows, cols, data))
}

pub(crate) fn ensure_finite(values: &[f64], what: &str) -> Result<()> {
    match values.iter().position(|v| !v.is_finite()) {
        Some(i) => Err(Error::NonFinite(format!(
            "{what} holds {} at index {i}",
            values[i]
        ))),
        None => Ok(()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numcore::RngState;

    fn naive(a: &Matrix, b: &Matrix) -> Vec<f64> {
        let mut out = vec![0.0; a.rows() * b.cols()];
        for i in 0..a.rows() {
            for j in 0..b.cols() {
                let mut s = 0.0;
                for k in 0..a.cols() {
                    s += a.get(i, k) * b.get(k, j);
                }
                out[i * b.cols() + j] = s;
            }
        }
        out
    }

    fn random(rng: &mut RngState, r: usize, c: usize) -> Matrix {
        let data = (0..r * c).map(|_| rng.uniform() * 2.0 - 1.0).collect();
        Matrix::new(r, c, data).unwrap()
    }

    #[test]
    fn identity_product() {
        let m = Matrix::from_rows(&[[1.0, 2.0], [3.0, 4.0]]).unwrap();
        assert_eq!(matmul(&Matrix::identity(2), &m).unwrap(), m);
    }

    #[test]
    fn column_vector_product() {
        let a = Matrix::from_rows(&[[1.0, 2.0], [3.0, 4.0]]).unwrap();
        let b = Matrix::from_rows(&[[0.0], [1.0]]).unwrap();
        assert_eq!(matmul(&a, &b).unwrap().as_slice(), &[2.0, 4.0]);
    }

    #[test]
    fn matches_triple_loop() {
        let mut rng = RngState::new(11);
        let a = random(&mut rng, 5, 7);
        let b = random(&mut rng, 7, 3);
        let got = matmul(&a, &b).unwrap();
        for (x, y) in got.as_slice().iter().zip(naive(&a, &b)) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn transposed_variants_match_explicit_transpose() {
        let mut rng = RngState::new(3);
        let a = random(&mut rng, 6, 4);
        let b = random(&mut rng, 6, 5);
        let c = random(&mut rng, 3, 4);
        let atb = a.t_matmul(&b).unwrap();
        for (x, y) in atb.as_slice().iter().zip(naive(&a.transpose(), &b)) {
            assert!((x - y).abs() < 1e-12);
        }
        let act = a.matmul_t(&c).unwrap();
        for (x, y) in act.as_slice().iter().zip(naive(&a, &c.transpose())) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn dimension_mismatch() {
        let a = Matrix::zeros(2, 3);
        assert!(matches!(matmul(&a, &a), Err(Error::Shape(_))));
    }

    #[test]
    fn rejects_non_finite() {
        assert!(matches!(
            Matrix::new(1, 2, vec![1.0, f64::NAN]),
            Err(Error::NonFinite(_))
        ));
        let big = Matrix::new(1, 1, vec![1e200]).unwrap();
        assert!(matmul(&big, &big).is_err());
    }

    #[test]
    fn row_results_do_not_depend_on_batch() {
        let mut rng = RngState::new(5);
        let a = random(&mut rng, 37, 50);
        let w = random(&mut rng, 50, 19);
        let full = matmul(&a, &w).unwrap();
        for r in [0, 8, 36] {
            let single = matmul(&a.select_rows(&[r]), &w).unwrap();
            assert_eq!(single.as_slice(), full.row(r));
        }
    }

    #[test]
    fn associativity() {
        let mut rng = RngState::new(99);
        for _ in 0..20 {
            let a = random(&mut rng, 3, 4);
            let b = random(&mut rng, 4, 2);
            let c = random(&mut rng, 2, 5);
            let left = matmul(&matmul(&a, &b).unwrap(), &c).unwrap();
            let right = matmul(&a, &matmul(&b, &c).unwrap()).unwrap();
            for (x, y) in left.as_slice().iter().zip(right.as_slice()) {
                assert!((x - y).abs() < 1e-9);
            }
        }
    }
}
