//! Dense complex matrices and their JSON interchange format.
//!
//! Every operand in the crate is a [`DenseMatrix`]: a finite, non-empty,
//! complex matrix. Real matrices are complex matrices with a zero imaginary
//! part; the few operations that need real non-negative input check for it
//! explicitly.
//!
//! The JSON form is `{"rows": m, "cols": n, "re": [...], "im": [...]}` with
//! row-major entries. `im` is optional on input and omitted on output when the
//! matrix is real.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MatrixJson", into = "MatrixJson")]
pub struct DenseMatrix(DMatrix<Complex64>);

#[derive(Clone, Debug, Serialize, Deserialize)]
struct MatrixJson {
    rows: usize,
    cols: usize,
    re: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    im: Option<Vec<f64>>,
}

impl TryFrom<MatrixJson> for DenseMatrix {
    type Error = Error;

    fn try_from(j: MatrixJson) -> Result<Self> {
        let len = j
            .rows
            .checked_mul(j.cols)
            .ok_or_else(|| Error::ShapeError(format!("{}x{} overflows", j.rows, j.cols)))?;
        if j.re.len() != len {
            return Err(Error::ShapeError(format!(
                "\"re\" has {} entries, expected {} for a {}x{} matrix",
                j.re.len(),
                len,
                j.rows,
                j.cols
            )));
        }
        let im = match j.im {
            Some(im) if im.len() != len => {
                return Err(Error::ShapeError(format!(
                    "\"im\" has {} entries, expected {}",
                    im.len(),
                    len
                )))
            }
            Some(im) => im,
            None => vec![0.0; len],
        };
        let entries =
            j.re.into_iter()
                .zip(im)
                .map(|(re, im)| Complex64::new(re, im))
                .collect();
        DenseMatrix::new(j.rows, j.cols, entries)
    }
}

impl From<DenseMatrix> for MatrixJson {
    fn from(m: DenseMatrix) -> Self {
        let (rows, cols) = m.shape();
        let mut re = Vec::with_capacity(rows * cols);
        let mut im = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                let z = m.0[(i, j)];
                re.push(z.re);
                im.push(z.im);
            }
        }
        let im = if im.iter().all(|&x| x == 0.0) { None } else { Some(im) };
        MatrixJson { rows, cols, re, im }
    }
}

fn check_finite(m: &DMatrix<Complex64>) -> Result<()> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return Err(Error::ShapeError(format!(
            "matrix must be non-empty, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    if let Some(z) = m.iter().find(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::DomainError(format!("non-finite entry {z}")));
    }
    Ok(())
}

impl DenseMatrix {
    /// Builds a matrix from row-major complex entries.
    pub fn new(rows: usize, cols: usize, entries: Vec<Complex64>) -> Result<Self> {
        if entries.len() != rows * cols {
            return Err(Error::ShapeError(format!(
                "{} entries for a {}x{} matrix",
                entries.len(),
                rows,
                cols
            )));
        }
        let m = DMatrix::from_row_iterator(rows, cols, entries);
        check_finite(&m)?;
        Ok(DenseMatrix(m))
    }

    /// Builds a real matrix from row-major entries.
    pub fn real(rows: usize, cols: usize, entries: &[f64]) -> Result<Self> {
        Self::new(rows, cols, entries.iter().map(|&x| Complex64::new(x, 0.0)).collect())
    }

    /// Builds a real matrix from a slice of equally long rows.
    pub fn from_real_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let cols = rows.first().map(|r| r.as_ref().len()).unwrap_or(0);
        if rows.iter().any(|r| r.as_ref().len() != cols) {
            return Err(Error::ShapeError("ragged rows".into()));
        }
        let flat: Vec<f64> = rows.iter().flat_map(|r| r.as_ref().iter().copied()).collect();
        Self::real(rows.len(), cols, &flat)
    }

    pub fn from_nalgebra(m: DMatrix<Complex64>) -> Result<Self> {
        check_finite(&m)?;
        Ok(DenseMatrix(m))
    }

    pub fn from_fn<F: FnMut(usize, usize) -> Complex64>(rows: usize, cols: usize, f: F) -> Self {
        assert!(rows > 0 && cols > 0, "matrix must be non-empty");
        DenseMatrix(DMatrix::from_fn(rows, cols, f))
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        assert!(rows > 0 && cols > 0, "matrix must be non-empty");
        DenseMatrix(DMatrix::zeros(rows, cols))
    }

    pub fn identity(n: usize) -> Self {
        assert!(n > 0, "matrix must be non-empty");
        DenseMatrix(DMatrix::identity(n, n))
    }

    pub fn diag(values: &[f64]) -> Self {
        let n = values.len();
        Self::from_fn(n, n, |i, j| {
            if i == j {
                Complex64::new(values[i], 0.0)
            } else {
                Complex64::new(0.0, 0.0)
            }
        })
    }

    pub fn as_nalgebra(&self) -> &DMatrix<Complex64> {
        &self.0
    }

    pub fn into_nalgebra(self) -> DMatrix<Complex64> {
        self.0
    }

    pub fn rows(&self) -> usize {
        self.0.nrows()
    }

    pub fn cols(&self) -> usize {
        self.0.ncols()
    }

    pub fn shape(&self) -> (usize, usize) {
        self.0.shape()
    }

    pub fn is_square(&self) -> bool {
        self.rows() == self.cols()
    }

    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        self.0[(i, j)]
    }

    /// Real part of entry `(i, j)`.
    pub fn re(&self, i: usize, j: usize) -> f64 {
        self.0[(i, j)].re
    }

    pub fn set(&mut self, i: usize, j: usize, z: Complex64) {
        self.0[(i, j)] = z;
    }

    pub fn iter(&self) -> impl Iterator<Item = &Complex64> {
        self.0.iter()
    }

    /// Row-major entries.
    pub fn to_row_major(&self) -> Vec<Complex64> {
        let (r, c) = self.shape();
        (0..r)
            .flat_map(|i| (0..c).map(move |j| (i, j)))
            .map(|(i, j)| self.0[(i, j)])
            .collect()
    }

    pub fn adjoint(&self) -> Self {
        DenseMatrix(self.0.adjoint())
    }

    pub fn transpose(&self) -> Self {
        DenseMatrix(self.0.transpose())
    }

    pub fn scale(&self, c: f64) -> Self {
        DenseMatrix(self.0.map(|z| z * c))
    }

    pub fn scale_complex(&self, c: Complex64) -> Self {
        DenseMatrix(self.0.map(|z| z * c))
    }

    pub fn map<F: FnMut(Complex64) -> Complex64>(&self, f: F) -> Self {
        DenseMatrix(self.0.map(f))
    }

    /// Entrywise (Hadamard) product.
    pub fn hadamard(&self, other: &DenseMatrix) -> Result<Self> {
        if self.shape() != other.shape() {
            return Err(Error::ShapeError(format!(
                "hadamard product of {:?} and {:?}",
                self.shape(),
                other.shape()
            )));
        }
        Ok(DenseMatrix(self.0.component_mul(&other.0)))
    }

    /// Kronecker product `self ⊗ other`.
    pub fn kron(&self, other: &DenseMatrix) -> Self {
        DenseMatrix(self.0.kronecker(&other.0))
    }

    pub fn trace(&self) -> Complex64 {
        self.0.diagonal().iter().copied().sum()
    }

    /// `Tr[self · other*] = Σ self_ij · conj(other_ij)`.
    pub fn inner(&self, other: &DenseMatrix) -> Complex64 {
        assert_eq!(self.shape(), other.shape(), "inner product shape mismatch");
        self.0.iter().zip(other.0.iter()).map(|(a, b)| a * b.conj()).sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.0.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.0.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Largest entrywise distance to `other`.
    pub fn max_abs_diff(&self, other: &DenseMatrix) -> f64 {
        assert_eq!(self.shape(), other.shape(), "shape mismatch");
        self.0
            .iter()
            .zip(other.0.iter())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    pub fn is_real(&self) -> bool {
        self.0.iter().all(|z| z.im == 0.0)
    }

    /// True when every entry is real and `>= 0`.
    pub fn is_nonnegative(&self) -> bool {
        self.0.iter().all(|z| z.im == 0.0 && z.re >= 0.0)
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|z| z.re == 0.0 && z.im == 0.0)
    }

    /// Entrywise absolute value as a real matrix.
    pub fn abs(&self) -> Self {
        self.map(|z| Complex64::new(z.norm(), 0.0))
    }

    /// Copies `self` into a larger zero matrix, top-left aligned.
    pub fn padded(&self, rows: usize, cols: usize) -> Self {
        assert!(rows >= self.rows() && cols >= self.cols(), "padding must not shrink");
        let mut out = DMatrix::zeros(rows, cols);
        out.view_mut((0, 0), self.shape()).copy_from(&self.0);
        DenseMatrix(out)
    }

    /// The `(rows x cols)` sub-matrix starting at `(i, j)`.
    pub fn sub_matrix(&self, i: usize, j: usize, rows: usize, cols: usize) -> Self {
        DenseMatrix(self.0.view((i, j), (rows, cols)).into_owned())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("matrix serialization is infallible")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

impl fmt::Display for DenseMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let real = self.is_real();
        for i in 0..self.rows() {
            let row: Vec<String> = (0..self.cols())
                .map(|j| {
                    let z = self.get(i, j);
                    if real {
                        format!("{:>12.6}", z.re)
                    } else {
                        format!("{:>12.6}{:+.6}i", z.re, z.im)
                    }
                })
                .collect();
            writeln!(f, "[{}]", row.join(" "))?;
        }
        Ok(())
    }
}

macro_rules! binop {
    ($trait:ident, $method:ident, $op:tt) => {
        impl $trait<&DenseMatrix> for &DenseMatrix {
            type Output = DenseMatrix;
            fn $method(self, rhs: &DenseMatrix) -> DenseMatrix {
                DenseMatrix(&self.0 $op &rhs.0)
            }
        }
        impl $trait<DenseMatrix> for DenseMatrix {
            type Output = DenseMatrix;
            fn $method(self, rhs: DenseMatrix) -> DenseMatrix {
                DenseMatrix(self.0 $op rhs.0)
            }
        }
    };
}

binop!(Add, add, +);
binop!(Sub, sub, -);
binop!(Mul, mul, *);

impl Neg for &DenseMatrix {
    type Output = DenseMatrix;
    fn neg(self) -> DenseMatrix {
        DenseMatrix(-&self.0)
    }
}
