//! Singular values, Schatten and Ky Fan norms, entrywise and polar powers,
//! dual-norm witnesses and PSD utilities.

use std::fmt;
use std::str::FromStr;

use nalgebra::linalg::{SymmetricEigen, SVD};
use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::matrix::DenseMatrix;

/// Smallest quasi-norm exponent accepted; below it `sigma^p` is dominated by
/// overflow and rounding.
pub const MIN_EXPONENT: f64 = 0.05;

/// An exponent `p` in `[0.05, ∞]`.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd)]
pub struct SchattenOrder(f64);

impl SchattenOrder {
    pub const ONE: SchattenOrder = SchattenOrder(1.0);
    pub const TWO: SchattenOrder = SchattenOrder(2.0);
    pub const INFINITY: SchattenOrder = SchattenOrder(f64::INFINITY);

    pub fn new(p: f64) -> Result<Self> {
        if p.is_nan() || p < MIN_EXPONENT || p == f64::NEG_INFINITY {
            return Err(Error::InvalidArgument(format!(
                "Schatten exponent must lie in [{MIN_EXPONENT}, inf], got {p}"
            )));
        }
        Ok(SchattenOrder(p))
    }

    pub fn value(self) -> f64 {
        self.0
    }

    pub fn is_infinite(self) -> bool {
        self.0.is_infinite()
    }

    pub fn is_quasi_norm(self) -> bool {
        self.0 < 1.0
    }

    pub fn is_norm(self) -> bool {
        self.0 >= 1.0
    }

    /// `p' = p / (p - 1)`, defined for `p > 1` (`∞' = 1`).
    pub fn conjugate(self) -> Option<SchattenOrder> {
        if self.0 <= 1.0 {
            None
        } else if self.is_infinite() {
            Some(SchattenOrder::ONE)
        } else {
            Some(SchattenOrder(self.0 / (self.0 - 1.0)))
        }
    }

    /// `p / 2`, the exponent of the Gram form.
    pub fn half(self) -> Result<SchattenOrder> {
        SchattenOrder::new(self.0 / 2.0)
    }
}

impl fmt::Display for SchattenOrder {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_infinite() {
            write!(f, "inf")
        } else {
            write!(f, "{}", self.0)
        }
    }
}

impl FromStr for SchattenOrder {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "inf" | "Inf" | "infinity" | "∞" => Ok(SchattenOrder::INFINITY),
            t => {
                let p: f64 = t
                    .parse()
                    .map_err(|_| Error::InvalidArgument(format!("not an exponent: {s:?}")))?;
                SchattenOrder::new(p)
            }
        }
    }
}

impl TryFrom<f64> for SchattenOrder {
    type Error = Error;
    fn try_from(p: f64) -> Result<Self> {
        SchattenOrder::new(p)
    }
}

impl Serialize for SchattenOrder {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        if self.is_infinite() {
            s.serialize_str("inf")
        } else {
            s.serialize_f64(self.0)
        }
    }
}

impl<'de> Deserialize<'de> for SchattenOrder {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Str(String),
        }
        let parsed = match Raw::deserialize(d)? {
            Raw::Num(p) => SchattenOrder::new(p),
            Raw::Str(s) => s.parse(),
        };
        parsed.map_err(serde::de::Error::custom)
    }
}

/// Thin SVD `A = U diag(sigma) V*` with `k = min(rows, cols)` columns.
#[derive(Clone, Debug)]
pub struct SvdFactors {
    pub u: DenseMatrix,
    pub sigma: Vec<f64>,
    pub v: DenseMatrix,
}

impl SvdFactors {
    pub fn reconstruct(&self) -> DenseMatrix {
        self.with_sigma(|s| s)
    }

    /// `U diag(f(sigma)) V*`.
    pub fn with_sigma<F: Fn(f64) -> f64>(&self, f: F) -> DenseMatrix {
        let u = self.u.as_nalgebra();
        let mut us = u.clone();
        for (j, &s) in self.sigma.iter().enumerate() {
            let w = f(s);
            us.column_mut(j).scale_mut(w);
        }
        DenseMatrix::from_nalgebra(us * self.v.as_nalgebra().adjoint()).expect("finite factors give a finite product")
    }

    /// Singular values below this are treated as exact zeros.
    pub fn rank_threshold(&self) -> f64 {
        let (m, n) = (self.u.rows(), self.v.rows());
        self.sigma.first().copied().unwrap_or(0.0) * (m.max(n) as f64) * f64::EPSILON
    }
}

fn svd_budget(m: &DMatrix<Complex64>) -> usize {
    200 * m.nrows().max(m.ncols()).max(8)
}

pub fn svd(a: &DenseMatrix) -> Result<SvdFactors> {
    let m = a.as_nalgebra().clone();
    let budget = svd_budget(&m);
    let f = SVD::try_new(m, true, true, f64::EPSILON, budget)
        .ok_or_else(|| Error::NumericalFailure(format!("SVD did not converge within {budget} sweeps")))?;
    let u = f.u.expect("requested U");
    let v_t = f.v_t.expect("requested V*");
    Ok(SvdFactors {
        u: DenseMatrix::from_nalgebra(u)?,
        sigma: f.singular_values.iter().map(|s| s.max(0.0)).collect(),
        v: DenseMatrix::from_nalgebra(v_t.adjoint())?,
    })
}

/// Singular values, non-increasing.
pub fn singular_values(a: &DenseMatrix) -> Result<Vec<f64>> {
    let m = a.as_nalgebra().clone();
    let budget = svd_budget(&m);
    let f = SVD::try_new(m, false, false, f64::EPSILON, budget)
        .ok_or_else(|| Error::NumericalFailure(format!("SVD did not converge within {budget} sweeps")))?;
    Ok(f.singular_values.iter().map(|s| s.max(0.0)).collect())
}

/// Singular values with those below the numerical rank threshold set to
/// zero. Rounding noise would otherwise dominate `Σ sigma^p` for `p < 1`.
pub fn singular_values_truncated(a: &DenseMatrix) -> Result<Vec<f64>> {
    let mut sigma = singular_values(a)?;
    let top = sigma.first().copied().unwrap_or(0.0);
    let floor = top * (a.rows().max(a.cols()) as f64) * f64::EPSILON;
    for s in sigma.iter_mut() {
        if *s <= floor {
            *s = 0.0;
        }
    }
    Ok(sigma)
}

/// `(Σ sigma_i^p)^{1/p}` for a non-increasing slice, scaled by `sigma_max` so
/// that neither tiny nor large singular values overflow.
pub fn lp_norm_of_sorted(sigma: &[f64], p: SchattenOrder) -> f64 {
    let top = sigma.first().copied().unwrap_or(0.0);
    if top == 0.0 {
        return 0.0;
    }
    if p.is_infinite() {
        return top;
    }
    let p = p.value();
    let s: f64 = sigma.iter().map(|&x| (x / top).powf(p)).sum();
    top * s.powf(1.0 / p)
}

pub fn schatten_norm(a: &DenseMatrix, p: SchattenOrder) -> Result<f64> {
    if p.value() == 2.0 {
        return Ok(a.frobenius_norm());
    }
    Ok(lp_norm_of_sorted(&singular_values_truncated(a)?, p))
}

/// `Tr |A|^p = Σ sigma_i^p` for finite `p`.
pub fn schatten_power_sum(a: &DenseMatrix, p: SchattenOrder) -> Result<f64> {
    if p.is_infinite() {
        return Err(Error::UnsupportedExponent("power sum needs a finite p".into()));
    }
    Ok(singular_values_truncated(a)?.iter().map(|s| s.powf(p.value())).sum())
}

/// Neumaier-compensated sum, used when re-verifying near-tie margins.
pub fn compensated_sum<I: IntoIterator<Item = f64>>(xs: I) -> f64 {
    let mut sum = 0.0f64;
    let mut c = 0.0f64;
    for x in xs {
        let t = sum + x;
        if sum.abs() >= x.abs() {
            c += (sum - t) + x;
        } else {
            c += (x - t) + sum;
        }
        sum = t;
    }
    sum + c
}

/// Schatten norm with compensated summation of the singular value powers.
pub fn schatten_norm_compensated(a: &DenseMatrix, p: SchattenOrder) -> Result<f64> {
    let sigma = singular_values_truncated(a)?;
    let top = sigma.first().copied().unwrap_or(0.0);
    if top == 0.0 {
        return Ok(0.0);
    }
    if p.is_infinite() {
        return Ok(top);
    }
    let pv = p.value();
    let s = compensated_sum(sigma.iter().map(|&x| (x / top).powf(pv)));
    Ok(top * s.powf(1.0 / pv))
}

/// Sum of the `k` largest singular values.
pub fn ky_fan_norm(a: &DenseMatrix, k: usize) -> Result<f64> {
    let n = a.rows().min(a.cols());
    if k == 0 || k > n {
        return Err(Error::InvalidArgument(format!("Ky Fan index {k} outside 1..={n}")));
    }
    Ok(singular_values(a)?.iter().take(k).sum())
}

/// Entrywise power `B^{∘r}` with `0^r = 0` for `r > 0` and `0^0 = 1`.
///
/// Non-integer (or negative) `r` needs real non-negative entries.
pub fn hadamard_power(b: &DenseMatrix, r: f64) -> Result<DenseMatrix> {
    if !r.is_finite() {
        return Err(Error::InvalidArgument(format!("Hadamard exponent {r}")));
    }
    let integral = r >= 0.0 && r.fract() == 0.0 && r <= i32::MAX as f64;
    if integral {
        let n = r as i32;
        return DenseMatrix::from_nalgebra(b.as_nalgebra().map(|z| z.powi(n)));
    }
    if !b.is_nonnegative() {
        return Err(Error::DomainError(format!(
            "fractional Hadamard power {r} of a matrix with negative or complex entries"
        )));
    }
    if r < 0.0 && b.iter().any(|z| z.re == 0.0) {
        return Err(Error::DomainError(format!(
            "negative Hadamard power {r} of a zero entry"
        )));
    }
    Ok(b.map(|z| {
        let v = if z.re == 0.0 { 0.0 } else { z.re.powf(r) };
        Complex64::new(v, 0.0)
    }))
}

/// Polar power `B^{[r]} = (BB*)^{(r-1)/2} B = U diag(sigma^r) V*`, `r >= 0`.
///
/// Numerically zero singular values map to zero, so `B^{[0]}` is the partial
/// isometry of the polar decomposition.
pub fn polar_power(b: &DenseMatrix, r: f64) -> Result<DenseMatrix> {
    if !(r >= 0.0) || !r.is_finite() {
        return Err(Error::InvalidArgument(format!("polar power needs r >= 0, got {r}")));
    }
    polar_power_signed(b, r)
}

/// Polar power for any real `r`; negative `r` needs full rank.
pub(crate) fn polar_power_signed(b: &DenseMatrix, r: f64) -> Result<DenseMatrix> {
    let f = svd(b)?;
    let cut = f.rank_threshold();
    if r < 0.0 && f.sigma.iter().any(|&s| s <= cut) {
        return Err(Error::BoundarySingularity(format!(
            "negative polar power {r} of a rank-deficient matrix"
        )));
    }
    Ok(f.with_sigma(|s| if s <= cut { 0.0 } else { s.powf(r) }))
}

/// The maximiser `Y` of `Re Tr[T Y*]` over the unit ball of the conjugate
/// norm `‖·‖_{p'}`.
#[derive(Clone, Debug)]
pub struct DualWitness {
    pub y: DenseMatrix,
    /// `Re Tr[T Y*]`, equal to `‖T‖_p` at the optimum.
    pub attained: f64,
    pub exponent_of_y: SchattenOrder,
}

pub fn dual_witness(t: &DenseMatrix, p: SchattenOrder) -> Result<DualWitness> {
    if p.is_infinite() || p.value() <= 1.0 {
        return Err(Error::UnsupportedExponent(format!(
            "dual witness is unique only for 1 < p < inf, got {p}"
        )));
    }
    if t.is_zero() {
        return Err(Error::InvalidArgument("dual witness of the zero matrix".into()));
    }
    let conj = p.conjugate().expect("p > 1");
    let f = svd(t)?;
    let pv = p.value();
    let weights: Vec<f64> = f.sigma.iter().map(|s| s.powf(pv - 1.0)).collect();
    let norm = lp_norm_of_sorted(&weights, conj);
    let y = f.with_sigma(|s| s.powf(pv - 1.0) / norm);
    let attained = t.inner(&y).re;
    Ok(DualWitness {
        y,
        attained,
        exponent_of_y: conj,
    })
}

/// Eigen-decomposition of the Hermitian part `(A + A*)/2`: eigenvalues
/// ascending, eigenvectors as matching columns.
pub fn hermitian_eigen(a: &DenseMatrix) -> Result<(Vec<f64>, DenseMatrix)> {
    if !a.is_square() {
        return Err(Error::InvalidArgument(format!("eigen of non-square {:?}", a.shape())));
    }
    let m = a.as_nalgebra();
    let h = (m + m.adjoint()).scale(0.5);
    let budget = 200 * m.nrows().max(8);
    let e = SymmetricEigen::try_new(h, f64::EPSILON, budget)
        .ok_or_else(|| Error::NumericalFailure(format!("eigensolver did not converge within {budget} sweeps")))?;
    let mut order: Vec<usize> = (0..e.eigenvalues.len()).collect();
    order.sort_by(|&i, &j| e.eigenvalues[i].total_cmp(&e.eigenvalues[j]));
    let values = order.iter().map(|&i| e.eigenvalues[i]).collect();
    let n = m.nrows();
    let vectors = DenseMatrix::from_fn(n, n, |i, j| e.eigenvectors[(i, order[j])]);
    Ok((values, vectors))
}

pub fn is_psd(a: &DenseMatrix, tol: f64) -> Result<bool> {
    if !a.is_square() {
        return Err(Error::InvalidArgument(format!(
            "PSD test of non-square {:?}",
            a.shape()
        )));
    }
    let (values, _) = hermitian_eigen(a)?;
    let opnorm = values.iter().map(|v| v.abs()).fold(0.0, f64::max);
    let scale = opnorm.max(1.0);
    if a.max_abs_diff(&a.adjoint()) > tol * scale {
        return Ok(false);
    }
    Ok(values[0] >= -tol * scale)
}

/// Functional calculus on a PSD matrix: `V diag(lambda^r) V*`.
///
/// Eigenvalues at or below the rounding floor are clamped to zero; `0^0 = 1`,
/// and a negative `r` on a singular matrix is a [`Error::DomainError`].
pub fn psd_power(a: &DenseMatrix, r: f64) -> Result<DenseMatrix> {
    let (values, vecs) = hermitian_eigen(a)?;
    let top = values.iter().map(|v| v.abs()).fold(0.0, f64::max);
    let floor = top * (a.rows() as f64) * 8.0 * f64::EPSILON;
    if values[0] < -floor.max(1e-12) {
        return Err(Error::DomainError(format!(
            "matrix power of a non-PSD matrix (min eigenvalue {})",
            values[0]
        )));
    }
    let mut scaled = vecs.as_nalgebra().clone();
    for (j, &l) in values.iter().enumerate() {
        let l = if l <= floor { 0.0 } else { l };
        let w = if l == 0.0 {
            if r > 0.0 {
                0.0
            } else if r == 0.0 {
                1.0
            } else {
                return Err(Error::DomainError(format!(
                    "negative power {r} of a singular PSD matrix"
                )));
            }
        } else {
            l.powf(r)
        };
        scaled.column_mut(j).scale_mut(w);
    }
    DenseMatrix::from_nalgebra(scaled * vecs.as_nalgebra().adjoint())
}

/// Principal square root of a PSD matrix.
pub fn psd_sqrt(a: &DenseMatrix) -> Result<DenseMatrix> {
    psd_power(a, 0.5)
}
