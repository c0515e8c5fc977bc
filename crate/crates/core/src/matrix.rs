//! Dense column-major matrices and the norms/metrics built on them.
//!
//! Entries are stored column by column so that a contiguous range of columns
//! (a batch of frames) is a contiguous slice. All reductions accumulate in
//! `f64` regardless of the element type.

use std::fmt::Debug;
use std::iter::Sum;
use std::ops::{AddAssign, MulAssign, SubAssign};

use num_traits::{Float, FromPrimitive, ToPrimitive};

use crate::error::{BearError, Result};

/// Element type of a [`Matrix`]. Implemented for `f32` (the storage type) and
/// `f64` (used by gradient checks and oracles).
pub trait Real:
    Float
    + FromPrimitive
    + ToPrimitive
    + AddAssign
    + SubAssign
    + MulAssign
    + Sum
    + Default
    + Debug
    + Send
    + Sync
    + 'static
{
    fn lit(x: f64) -> Self {
        <Self as FromPrimitive>::from_f64(x).expect("f64 is representable")
    }

    fn as_f64(self) -> f64 {
        <Self as ToPrimitive>::to_f64(&self).expect("finite conversion")
    }

    /// Sign with `sign(0) = 0`.
    fn sign0(self) -> Self {
        if self > Self::zero() {
            Self::one()
        } else if self < Self::zero() {
            -Self::one()
        } else {
            Self::zero()
        }
    }
}

impl Real for f32 {}
impl Real for f64 {}

#[derive(Clone, PartialEq)]
pub struct Matrix<T = f32> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Debug + Copy> Debug for Matrix<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Matrix {}x{}", self.rows, self.cols)?;
        if self.rows * self.cols <= 64 {
            write!(f, " [")?;
            for i in 0..self.rows {
                let row: Vec<T> = (0..self.cols).map(|j| self.data[j * self.rows + i]).collect();
                write!(f, "{row:?}")?;
            }
            write!(f, "]")?;
        }
        Ok(())
    }
}

impl<T: Real> Matrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![T::zero(); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_fn(n, n, |i, j| if i == j { T::one() } else { T::zero() })
    }

    pub fn from_diag(values: &[T]) -> Self {
        let n = values.len();
        Self::from_fn(n, n, |i, j| if i == j { values[i] } else { T::zero() })
    }

    /// Wraps column-major data. Fails if `data.len() != rows * cols`.
    pub fn from_col_major(rows: usize, cols: usize, data: Vec<T>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(BearError::Dimension(format!(
                "{} entries cannot form a {rows}x{cols} matrix",
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    /// Builds a matrix from row slices; convenient for literals in tests.
    pub fn from_rows(rows: &[&[T]]) -> Result<Self> {
        let n = rows.len();
        let m = rows.first().map_or(0, |r| r.len());
        if rows.iter().any(|r| r.len() != m) {
            return Err(BearError::Dimension("ragged rows".into()));
        }
        Ok(Self::from_fn(n, m, |i, j| rows[i][j]))
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for j in 0..cols {
            for i in 0..rows {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
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

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> T {
        self.data[j * self.rows + i]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: T) {
        self.data[j * self.rows + i] = v;
    }

    #[inline]
    pub fn col(&self, j: usize) -> &[T] {
        &self.data[j * self.rows..(j + 1) * self.rows]
    }

    #[inline]
    pub fn col_mut(&mut self, j: usize) -> &mut [T] {
        &mut self.data[j * self.rows..(j + 1) * self.rows]
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<T> {
        self.data
    }

    /// Reshapes in place to `rows x cols`, reusing the allocation. Contents are
    /// unspecified afterwards except that existing leading entries are kept.
    pub fn resize(&mut self, rows: usize, cols: usize) {
        self.rows = rows;
        self.cols = cols;
        self.data.resize(rows * cols, T::zero());
    }

    /// Copies of columns `start..end`.
    pub fn columns(&self, start: usize, end: usize) -> Self {
        assert!(start <= end && end <= self.cols, "column range out of bounds");
        Self {
            rows: self.rows,
            cols: end - start,
            data: self.data[start * self.rows..end * self.rows].to_vec(),
        }
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self.get(j, i))
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&x| f(x)).collect(),
        }
    }

    /// Converts the element type, e.g. `f32 -> f64` for oracle computations.
    pub fn cast<U: Real>(&self) -> Matrix<U> {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|x| U::lit(x.as_f64())).collect(),
        }
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    pub fn scale(&self, alpha: T) -> Self {
        self.map(|x| alpha * x)
    }

    pub fn try_sub(&self, other: &Self) -> Result<Self> {
        self.check_same_shape(other, "subtraction")?;
        Ok(Self {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| a - b)
                .collect(),
        })
    }

    pub fn try_add(&self, other: &Self) -> Result<Self> {
        self.check_same_shape(other, "addition")?;
        Ok(Self {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| a + b)
                .collect(),
        })
    }

    /// Dense product `self * other`.
    pub fn matmul(&self, other: &Self) -> Result<Self> {
        if self.cols != other.rows {
            return Err(BearError::Dimension(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = Self::zeros(self.rows, other.cols);
        crate::linalg::gemm_nn_into(&mut out, self, other, T::one(), false);
        Ok(out)
    }

    pub fn min_value(&self) -> Option<T> {
        self.data.iter().copied().reduce(T::min)
    }

    pub fn max_value(&self) -> Option<T> {
        self.data.iter().copied().reduce(T::max)
    }

    pub(crate) fn check_same_shape(&self, other: &Self, what: &str) -> Result<()> {
        if self.shape() != other.shape() {
            return Err(BearError::Dimension(format!(
                "{what}: {}x{} vs {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        Ok(())
    }
}

/// Sum of absolute values. An empty matrix has norm 0.
pub fn l1_norm<T: Real>(m: &Matrix<T>) -> f64 {
    m.as_slice().iter().map(|x| x.abs().as_f64()).sum()
}

/// Square root of the sum of squares. An empty matrix has norm 0.
pub fn fro_norm<T: Real>(m: &Matrix<T>) -> f64 {
    m.as_slice()
        .iter()
        .map(|x| {
            let v = x.as_f64();
            v * v
        })
        .sum::<f64>()
        .sqrt()
}

/// `‖truth − estimate‖_F / ‖truth‖_F`.
pub fn relative_error<T: Real>(truth: &Matrix<T>, estimate: &Matrix<T>) -> Result<f64> {
    truth.check_same_shape(estimate, "relative_error")?;
    let denom = fro_norm(truth);
    if denom == 0.0 {
        return Err(BearError::Degenerate(
            "reference matrix has zero Frobenius norm".into(),
        ));
    }
    let num = truth
        .as_slice()
        .iter()
        .zip(estimate.as_slice())
        .map(|(&a, &b)| {
            let d = a.as_f64() - b.as_f64();
            d * d
        })
        .sum::<f64>()
        .sqrt();
    Ok(num / denom)
}

/// Default absolute tolerance for [`approx_eq`].
pub const DEFAULT_ATOL: f64 = 1e-6;
/// Default relative tolerance for [`approx_eq`].
pub const DEFAULT_RTOL: f64 = 1e-5;

/// Entrywise `|a − b| ≤ atol + rtol·|b|`; false on shape mismatch.
pub fn approx_eq<T: Real>(a: &Matrix<T>, b: &Matrix<T>, atol: f64, rtol: f64) -> bool {
    a.shape() == b.shape()
        && a.as_slice().iter().zip(b.as_slice()).all(|(&x, &y)| {
            let (x, y) = (x.as_f64(), y.as_f64());
            (x - y).abs() <= atol + rtol * y.abs()
        })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SeededRng;

    fn random(rows: usize, cols: usize, seed: u64) -> Matrix<f64> {
        let mut rng = SeededRng::new(seed);
        Matrix::from_fn(rows, cols, |_, _| rng.normal())
    }

    #[test]
    fn l1_norm_examples() {
        let m = Matrix::from_rows(&[&[1.0f32, -2.0], &[0.0, 3.0]]).unwrap();
        assert_eq!(l1_norm(&m), 6.0);
        assert_eq!(l1_norm(&Matrix::<f32>::zeros(5, 5)), 0.0);
        assert_eq!(l1_norm(&Matrix::<f32>::zeros(0, 0)), 0.0);
    }

    #[test]
    fn norms_match_double_loop() {
        let m = random(10, 10, 7);
        let (mut l1, mut sq) = (0.0f64, 0.0f64);
        for i in 0..10 {
            for j in 0..10 {
                l1 += m.get(i, j).abs();
                sq += m.get(i, j) * m.get(i, j);
            }
        }
        assert!((l1_norm(&m) - l1).abs() <= 1e-9 * l1);
        assert!((fro_norm(&m) - sq.sqrt()).abs() <= 1e-9 * sq.sqrt());
    }

    #[test]
    fn fro_norm_examples() {
        let m = Matrix::from_rows(&[&[3.0f32, 0.0], &[0.0, 4.0]]).unwrap();
        assert_eq!(fro_norm(&m), 5.0);
        assert_eq!(fro_norm(&Matrix::<f32>::identity(4)), 2.0);
    }

    #[test]
    fn relative_error_examples() {
        let l = random(6, 4, 1);
        assert_eq!(relative_error(&l, &l).unwrap(), 0.0);
        let zero = Matrix::zeros(6, 4);
        assert!((relative_error(&l, &zero).unwrap() - 1.0).abs() < 1e-12);
        assert!((relative_error(&l, &l.scale(2.0)).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn relative_error_errors() {
        let a = Matrix::<f32>::zeros(2, 2);
        assert!(matches!(
            relative_error(&a, &Matrix::zeros(2, 3)),
            Err(BearError::Dimension(_))
        ));
        assert!(matches!(
            relative_error(&a, &a),
            Err(BearError::Degenerate(_))
        ));
    }

    #[test]
    fn col_major_layout() {
        let m = Matrix::from_rows(&[&[1.0f32, 2.0, 3.0], &[4.0, 5.0, 6.0]]).unwrap();
        assert_eq!(m.as_slice(), &[1.0, 4.0, 2.0, 5.0, 3.0, 6.0]);
        assert_eq!(m.col(1), &[2.0, 5.0]);
        assert_eq!(m.columns(1, 3).as_slice(), &[2.0, 5.0, 3.0, 6.0]);
        assert_eq!(m.transpose().col(0), &[1.0, 2.0, 3.0]);
        assert!(Matrix::<f32>::from_col_major(2, 2, vec![0.0; 3]).is_err());
    }

    #[test]
    fn approx_eq_tolerances() {
        let a = Matrix::from_rows(&[&[1.0f64, 2.0]]).unwrap();
        let b = Matrix::from_rows(&[&[1.0 + 5e-6, 2.0]]).unwrap();
        assert!(approx_eq(&a, &b, DEFAULT_ATOL, DEFAULT_RTOL));
        let c = Matrix::from_rows(&[&[1.1f64, 2.0]]).unwrap();
        assert!(!approx_eq(&a, &c, DEFAULT_ATOL, DEFAULT_RTOL));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn norms_are_homogeneous_and_ordered(seed in 0u64..1000, alpha in -10.0f64..10.0) {
                let m = random(7, 5, seed);
                let scaled = m.scale(alpha);
                let l1 = l1_norm(&m);
                let fro = fro_norm(&m);
                prop_assert!(l1 >= fro);
                prop_assert!((l1_norm(&scaled) - alpha.abs() * l1).abs() <= 1e-9 * l1.max(1e-300) * alpha.abs().max(1.0));
                prop_assert!((fro_norm(&scaled) - alpha.abs() * fro).abs() <= 1e-9 * fro * alpha.abs().max(1.0));
            }

            #[test]
            fn relative_error_is_norm_of_difference(seed in 0u64..1000) {
                let a = random(5, 5, seed);
                let d = random(5, 5, seed + 10_000).scale(0.1);
                let b = a.try_add(&d).unwrap();
                let expected = fro_norm(&d) / fro_norm(&a);
                prop_assert!((relative_error(&a, &b).unwrap() - expected).abs() <= 1e-9 * expected);
            }
        }
    }
}
