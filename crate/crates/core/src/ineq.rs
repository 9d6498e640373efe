//! Inequality checkers. Each one evaluates both sides, knows which way the
//! inequality is supposed to go, and returns an [`IneqReport`] with a signed
//! relative margin.

use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::blockmat::{assemble, compress, gram_form, BlockMatrix};
use crate::error::{Error, Result};
use crate::matrix::DenseMatrix;
use crate::schatten::{dual_witness, hermitian_eigen, is_psd, ky_fan_norm, schatten_norm, SchattenOrder};

/// Tolerance used to validate PSD inputs.
pub const PSD_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Direction {
    #[serde(rename = "lhs<=rhs")]
    LhsLeRhs,
    #[serde(rename = "lhs>=rhs")]
    LhsGeRhs,
    #[serde(rename = "equality")]
    Equality,
}

impl Direction {
    fn flipped(self) -> Direction {
        match self {
            Direction::LhsLeRhs => Direction::LhsGeRhs,
            Direction::LhsGeRhs => Direction::LhsLeRhs,
            Direction::Equality => Direction::Equality,
        }
    }
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Direction::LhsLeRhs => "lhs<=rhs",
            Direction::LhsGeRhs => "lhs>=rhs",
            Direction::Equality => "equality",
        })
    }
}

/// How much weight a verdict carries.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scope {
    /// A proven theorem; a violation beyond tolerance is a bug.
    Proven,
    /// The conjectured 2 x N inequality.
    Conjecture,
    /// The conjectured direction carried below `p = 1`.
    Extension,
    /// Not a 2 x N instance; the direction is informational.
    OutsideConjectureScope,
    /// An open question; margins are recorded, nothing is asserted.
    Open,
    /// An algebraic identity.
    Identity,
}

impl fmt::Display for Scope {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = serde_json::to_value(self).expect("unit variant");
        f.write_str(s.as_str().expect("string"))
    }
}

/// A unitarily invariant norm: a Schatten norm or a Ky Fan norm.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum UiNorm {
    Schatten(SchattenOrder),
    KyFan(usize),
}

impl UiNorm {
    /// Norm of `a`. A Ky Fan index larger than the matrix is clamped, which is
    /// the Ky Fan norm of `a` padded with zeros.
    pub fn eval(self, a: &DenseMatrix) -> Result<f64> {
        match self {
            UiNorm::Schatten(p) => schatten_norm(a, p),
            UiNorm::KyFan(k) => {
                if k == 0 {
                    return Err(Error::InvalidArgument("Ky Fan index must be >= 1".into()));
                }
                ky_fan_norm(a, k.min(a.rows().min(a.cols())))
            }
        }
    }

    fn is_quasi(self) -> bool {
        matches!(self, UiNorm::Schatten(p) if p.is_quasi_norm())
    }
}

impl From<SchattenOrder> for UiNorm {
    fn from(p: SchattenOrder) -> Self {
        UiNorm::Schatten(p)
    }
}

impl fmt::Display for UiNorm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            UiNorm::Schatten(p) => write!(f, "{p}"),
            UiNorm::KyFan(k) => write!(f, "kyfan:{k}"),
        }
    }
}

impl Serialize for UiNorm {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            UiNorm::Schatten(p) => p.serialize(s),
            UiNorm::KyFan(k) => s.serialize_str(&format!("kyfan:{k}")),
        }
    }
}

impl<'de> Deserialize<'de> for UiNorm {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let v = serde_json::Value::deserialize(d)?;
        if let Some(k) = v.as_str().and_then(|s| s.strip_prefix("kyfan:")) {
            let k = k.parse().map_err(serde::de::Error::custom)?;
            return Ok(UiNorm::KyFan(k));
        }
        SchattenOrder::deserialize(v)
            .map(UiNorm::Schatten)
            .map_err(serde::de::Error::custom)
    }
}

/// One inequality evaluation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IneqReport {
    pub name: String,
    #[serde(rename = "p")]
    pub norm: UiNorm,
    pub lhs: f64,
    pub rhs: f64,
    pub direction: Direction,
    /// Signed so that a non-negative margin means the expected direction holds.
    pub margin: f64,
    pub satisfied: bool,
    pub tol: f64,
    pub scope: Scope,
}

impl IneqReport {
    pub fn evaluate(
        name: impl Into<String>,
        norm: impl Into<UiNorm>,
        lhs: f64,
        rhs: f64,
        direction: Direction,
        tol: f64,
        scope: Scope,
    ) -> Self {
        let margin = match direction {
            Direction::LhsLeRhs => rhs - lhs,
            Direction::LhsGeRhs => lhs - rhs,
            Direction::Equality => -(lhs - rhs).abs(),
        };
        let mut r = IneqReport {
            name: name.into(),
            norm: norm.into(),
            lhs,
            rhs,
            direction,
            margin,
            satisfied: false,
            tol,
            scope,
        };
        r.satisfied = margin >= -tol * r.scale();
        r
    }

    /// `max(1, |lhs|, |rhs|)`, the scale relative margins refer to.
    pub fn scale(&self) -> f64 {
        1f64.max(self.lhs.abs()).max(self.rhs.abs())
    }

    pub fn relative_margin(&self) -> f64 {
        self.margin / self.scale()
    }

    pub fn is_violation(&self) -> bool {
        !self.satisfied
    }

    /// The exponent, when the report is about a Schatten norm.
    pub fn exponent(&self) -> Option<SchattenOrder> {
        match self.norm {
            UiNorm::Schatten(p) => Some(p),
            UiNorm::KyFan(_) => None,
        }
    }
}

impl fmt::Display for IneqReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} p={} lhs={:.6} rhs={:.6} [{}] margin={:.6e} {} ({})",
            self.name,
            self.norm,
            self.lhs,
            self.rhs,
            self.direction,
            self.margin,
            if self.satisfied { "satisfied" } else { "VIOLATED" },
            self.scope
        )
    }
}

/// Conjectured direction for the block-norm inequality at exponent `p`.
pub fn nci_direction(p: SchattenOrder) -> Direction {
    let v = p.value();
    if v < 2.0 {
        Direction::LhsGeRhs
    } else if v == 2.0 {
        Direction::Equality
    } else {
        Direction::LhsLeRhs
    }
}

/// `‖T‖_p` against `‖[‖T_(ij)‖_p]‖_p`.
pub fn check_nci(t: &BlockMatrix, p: SchattenOrder, tol: f64) -> Result<IneqReport> {
    let lhs = schatten_norm(&assemble(t), p)?;
    let rhs = schatten_norm(&compress(t, p)?.values, p)?;
    let scope = if !t.is_two_row() {
        Scope::OutsideConjectureScope
    } else if p.is_quasi_norm() {
        Scope::Extension
    } else {
        Scope::Conjecture
    };
    Ok(IneqReport::evaluate("nci", p, lhs, rhs, nci_direction(p), tol, scope))
}

/// The squared form `‖G‖_q` vs `‖[[Σa², Σab], [Σab, Σb²]]‖_q`, equivalent to
/// [`check_nci`] at `p = 2q`.
pub fn check_nci_gram(t: &BlockMatrix, q: SchattenOrder, tol: f64) -> Result<IneqReport> {
    if q.value() < 0.5 {
        return Err(Error::InvalidArgument(format!("Gram form needs q >= 0.5, got {q}")));
    }
    let gf = gram_form(t, q)?;
    let lhs = schatten_norm(&gf.g, q)?;
    let rhs = schatten_norm(&gf.compressed, q)?;
    let direction = if q.value() > 1.0 {
        Direction::LhsLeRhs
    } else if q.value() == 1.0 {
        Direction::Equality
    } else {
        Direction::LhsGeRhs
    };
    Ok(IneqReport::evaluate(
        "nci-gram",
        q,
        lhs,
        rhs,
        direction,
        tol,
        Scope::Conjecture,
    ))
}

fn same_shape(a: &DenseMatrix, b: &DenseMatrix) -> Result<()> {
    if a.shape() != b.shape() {
        return Err(Error::ShapeError(format!("{:?} vs {:?}", a.shape(), b.shape())));
    }
    Ok(())
}

fn hanner_exponent(p: SchattenOrder) -> Result<f64> {
    if p.is_infinite() {
        return Err(Error::UnsupportedExponent(
            "Hanner's inequality needs a finite p".into(),
        ));
    }
    if p.value() < 1.0 {
        return Err(Error::InvalidArgument(format!(
            "Hanner's inequality needs p >= 1, got {p}"
        )));
    }
    Ok(p.value())
}

/// `‖A+B‖^p + ‖A−B‖^p` against `(‖A‖+‖B‖)^p + |‖A‖−‖B‖|^p`.
pub fn check_hanner(a: &DenseMatrix, b: &DenseMatrix, p: SchattenOrder, tol: f64) -> Result<IneqReport> {
    same_shape(a, b)?;
    let pv = hanner_exponent(p)?;
    let lhs = schatten_norm(&(a + b), p)?.powf(pv) + schatten_norm(&(a - b), p)?.powf(pv);
    let na = schatten_norm(a, p)?;
    let nb = schatten_norm(b, p)?;
    let rhs = (na + nb).powf(pv) + (na - nb).abs().powf(pv);
    // known for general matrices on these ranges
    let proven = pv <= 4.0 / 3.0 || pv == 2.0 || pv >= 4.0;
    let scope = if proven { Scope::Proven } else { Scope::Conjecture };
    Ok(IneqReport::evaluate(
        "hanner",
        p,
        lhs,
        rhs,
        nci_direction(p),
        tol,
        scope,
    ))
}

/// The block-norm check on `T = [[A, B], [B, A]]` next to Hanner's inequality
/// for `(A, B)`, with the unitary conjugation that links them.
#[derive(Clone, Debug, Serialize)]
pub struct HannerReduction {
    pub nci: IneqReport,
    pub hanner: IneqReport,
    /// Largest off-diagonal block entry of `W T W*`, `W = [[1, 1], [1, -1]]/√2`.
    pub conjugation_residual: f64,
    /// `|‖T‖_p^p − Hanner lhs| / scale`.
    pub lhs_gap: f64,
    /// `|‖C_p(T)‖_p^p − Hanner rhs| / scale`.
    pub rhs_gap: f64,
    pub identity_holds: bool,
}

pub const HANNER_IDENTITY_TOL: f64 = 1e-10;

pub fn hanner_from_nci(a: &DenseMatrix, b: &DenseMatrix, p: SchattenOrder) -> Result<HannerReduction> {
    same_shape(a, b)?;
    let pv = hanner_exponent(p)?;
    let t = BlockMatrix::new(vec![vec![a.clone(), b.clone()], vec![b.clone(), a.clone()]])?;
    let nci = check_nci(&t, p, crate::DEFAULT_TOL)?;
    let hanner = check_hanner(a, b, p, crate::DEFAULT_TOL)?;

    let (m, n) = a.shape();
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let w = |k: usize| {
        let h = BlockMatrix::new(vec![
            vec![DenseMatrix::identity(k).scale(s), DenseMatrix::identity(k).scale(s)],
            vec![DenseMatrix::identity(k).scale(s), DenseMatrix::identity(k).scale(-s)],
        ])
        .expect("square blocks");
        assemble(&h)
    };
    let conj = &(&w(m) * &assemble(&t)) * &w(n);
    let sum = conj.sub_matrix(0, 0, m, n);
    let diff = conj.sub_matrix(m, n, m, n);
    let off = conj
        .sub_matrix(0, n, m, n)
        .max_abs()
        .max(conj.sub_matrix(m, 0, m, n).max_abs());
    let scale = 1f64.max(a.max_abs()).max(b.max_abs());
    let conjugation_residual = off.max(sum.max_abs_diff(&(a + b))).max(diff.max_abs_diff(&(a - b))) / scale;

    let rel = |x: f64, y: f64| (x - y).abs() / 1f64.max(x.abs()).max(y.abs());
    let lhs_gap = rel(nci.lhs.powf(pv), hanner.lhs);
    let rhs_gap = rel(nci.rhs.powf(pv), hanner.rhs);
    let identity_holds = lhs_gap <= HANNER_IDENTITY_TOL
        && rhs_gap <= HANNER_IDENTITY_TOL
        && conjugation_residual <= HANNER_IDENTITY_TOL
        && nci.satisfied == hanner.satisfied;
    Ok(HannerReduction {
        nci,
        hanner,
        conjugation_residual,
        lhs_gap,
        rhs_gap,
        identity_holds,
    })
}

fn common_psd_list(list: &[DenseMatrix], what: &str) -> Result<usize> {
    let first = list
        .first()
        .ok_or_else(|| Error::InvalidArgument(format!("empty {what} list")))?;
    let n = first.rows();
    for (k, m) in list.iter().enumerate() {
        if m.shape() != (n, n) {
            return Err(Error::ShapeError(format!(
                "{what}[{k}] is {:?}, expected {n}x{n}",
                m.shape()
            )));
        }
        if !is_psd(m, PSD_TOL)? {
            return Err(Error::DomainError(format!("{what}[{k}] is not PSD")));
        }
    }
    Ok(n)
}

fn kron_sum(a_list: &[DenseMatrix], b_list: &[DenseMatrix]) -> Result<DenseMatrix> {
    if a_list.len() != b_list.len() {
        return Err(Error::ShapeError(format!(
            "{} A-terms vs {} B-terms",
            a_list.len(),
            b_list.len()
        )));
    }
    common_psd_list(a_list, "A")?;
    common_psd_list(b_list, "B")?;
    let mut terms = a_list.iter().zip(b_list).map(|(a, b)| a.kron(b));
    let first = terms.next().expect("non-empty");
    Ok(terms.fold(first, |acc, t| acc + t))
}

fn q_direction(q: SchattenOrder) -> Direction {
    if q.value() >= 1.0 {
        Direction::LhsLeRhs
    } else {
        Direction::LhsGeRhs
    }
}

/// `‖Σ A_k⊗B_k‖_q` against `‖Σ A_k‖_q · max_j ‖B_j‖_q` (`min_j` and reversed
/// for `q < 1`), for PSD `A_k`, `B_k`.
pub fn check_king_tensor(
    a_list: &[DenseMatrix],
    b_list: &[DenseMatrix],
    q: SchattenOrder,
    tol: f64,
) -> Result<IneqReport> {
    let lhs = schatten_norm(&kron_sum(a_list, b_list)?, q)?;
    let sum_a = a_list[1..].iter().fold(a_list[0].clone(), |acc, a| acc + a.clone());
    let b_norms = b_list.iter().map(|b| schatten_norm(b, q)).collect::<Result<Vec<_>>>()?;
    let extreme = if q.value() >= 1.0 {
        b_norms.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    } else {
        b_norms.iter().copied().fold(f64::INFINITY, f64::min)
    };
    let rhs = schatten_norm(&sum_a, q)? * extreme;
    Ok(IneqReport::evaluate(
        "king-tensor",
        q,
        lhs,
        rhs,
        q_direction(q),
        tol,
        Scope::Proven,
    ))
}

/// `‖Σ A_k⊗B_k‖_q` against `‖Σ ‖B_k‖_q A_k‖_q`.
pub fn check_scaled_tensor(
    a_list: &[DenseMatrix],
    b_list: &[DenseMatrix],
    q: SchattenOrder,
    tol: f64,
) -> Result<IneqReport> {
    let lhs = schatten_norm(&kron_sum(a_list, b_list)?, q)?;
    let mut scaled = DenseMatrix::zeros(a_list[0].rows(), a_list[0].cols());
    for (a, b) in a_list.iter().zip(b_list) {
        scaled = scaled + a.scale(schatten_norm(b, q)?);
    }
    let rhs = schatten_norm(&scaled, q)?;
    Ok(IneqReport::evaluate(
        "scaled-tensor",
        q,
        lhs,
        rhs,
        q_direction(q),
        tol,
        Scope::Proven,
    ))
}

/// Tolerance on the `‖X_k X_k*‖_q = 1` normalisation.
pub const NORMALIZATION_TOL: f64 = 1e-8;

/// The block matrix `Q = [z_ij X_i X_j*]`.
pub fn rank1_psd_block(xs: &[DenseMatrix], z: &DenseMatrix) -> Result<DenseMatrix> {
    let d = xs.len();
    if z.shape() != (d, d) {
        return Err(Error::ShapeError(format!("Z is {:?}, expected {d}x{d}", z.shape())));
    }
    let cols = xs.first().map(DenseMatrix::cols).unwrap_or(0);
    if let Some(k) = xs.iter().position(|x| x.cols() != cols) {
        return Err(Error::ShapeError(format!(
            "X[{k}] has {} columns, expected {cols}",
            xs[k].cols()
        )));
    }
    let blocks = (0..d)
        .map(|i| {
            (0..d)
                .map(|j| (&xs[i] * &xs[j].adjoint()).scale_complex(z.get(i, j)))
                .collect()
        })
        .collect();
    Ok(assemble(&BlockMatrix::new(blocks)?))
}

/// `‖[z_ij X_i X_j*]‖_q` against `‖Z‖_q` for `‖X_k X_k*‖_q = 1` and PSD `Z`.
pub fn check_rank1_psd_bound(xs: &[DenseMatrix], z: &DenseMatrix, q: SchattenOrder, tol: f64) -> Result<IneqReport> {
    if xs.is_empty() {
        return Err(Error::InvalidArgument("empty X list".into()));
    }
    for (k, x) in xs.iter().enumerate() {
        let n = schatten_norm(&(x * &x.adjoint()), q)?;
        if (n - 1.0).abs() > NORMALIZATION_TOL {
            return Err(Error::InvalidArgument(format!("‖X[{k}] X[{k}]*‖_q = {n}, expected 1")));
        }
    }
    let big_q = rank1_psd_block(xs, z)?;
    if !is_psd(z, PSD_TOL)? {
        return Err(Error::DomainError("Z is not PSD".into()));
    }
    let lhs = schatten_norm(&big_q, q)?;
    let rhs = schatten_norm(z, q)?;
    Ok(IneqReport::evaluate(
        "rank1-psd-bound",
        q,
        lhs,
        rhs,
        q_direction(q),
        tol,
        Scope::Proven,
    ))
}

fn check_nonneg_psd_2x2(a: &DenseMatrix, what: &str) -> Result<()> {
    if a.shape() != (2, 2) {
        return Err(Error::ShapeError(format!("{what} is {:?}, expected 2x2", a.shape())));
    }
    if !a.is_nonnegative() {
        return Err(Error::DomainError(format!("{what} has a negative or complex entry")));
    }
    if !is_psd(a, PSD_TOL)? {
        return Err(Error::DomainError(format!("{what} is not PSD")));
    }
    Ok(())
}

/// Monotonicity of UI norms on entrywise-dominated 2x2 PSD matrices with
/// non-negative entries.
pub fn check_mono_2x2(a1: &DenseMatrix, a2: &DenseMatrix, p: SchattenOrder, tol: f64) -> Result<IneqReport> {
    check_mono_2x2_ui(a1, a2, UiNorm::Schatten(p), tol)
}

pub fn check_mono_2x2_ui(a1: &DenseMatrix, a2: &DenseMatrix, norm: UiNorm, tol: f64) -> Result<IneqReport> {
    check_nonneg_psd_2x2(a1, "A1")?;
    check_nonneg_psd_2x2(a2, "A2")?;
    for i in 0..2 {
        for j in 0..2 {
            if a1.re(i, j) > a2.re(i, j) {
                return Err(Error::InvalidArgument(format!("A1 exceeds A2 at ({i},{j})")));
            }
        }
    }
    let scope = if norm.is_quasi() { Scope::Open } else { Scope::Proven };
    let lhs = norm.eval(a1)?;
    let rhs = norm.eval(a2)?;
    Ok(IneqReport::evaluate(
        "mono-2x2",
        norm,
        lhs,
        rhs,
        Direction::LhsLeRhs,
        tol,
        scope,
    ))
}

/// `|||Q + R|||` against `|||[[Σq_k, y], [y, Σr_k]] ⊕ 0|||`, `y = Σ √(q_k r_k)`,
/// for PSD `Q`, `R` cut into diagonal blocks of the given sizes.
///
/// For scalar blocks `q_k = Q_kk`; otherwise `q_k` is the same norm of the
/// diagonal block `Q_(kk)`.
pub fn check_kyfan_compression(
    q_mat: &DenseMatrix,
    r_mat: &DenseMatrix,
    partition: &[usize],
    norm: UiNorm,
    tol: f64,
) -> Result<IneqReport> {
    same_shape(q_mat, r_mat)?;
    let d = q_mat.rows();
    if !q_mat.is_square() || partition.iter().sum::<usize>() != d || partition.contains(&0) {
        return Err(Error::ShapeError(format!(
            "partition {partition:?} does not cut a {d}x{d} matrix"
        )));
    }
    if !is_psd(q_mat, PSD_TOL)? || !is_psd(r_mat, PSD_TOL)? {
        return Err(Error::DomainError("Q and R must be PSD".into()));
    }
    let mut offset = 0;
    let (mut tq, mut tr, mut y) = (0.0, 0.0, 0.0);
    for &size in partition {
        let qb = q_mat.sub_matrix(offset, offset, size, size);
        let rb = r_mat.sub_matrix(offset, offset, size, size);
        let (qk, rk) = if size == 1 {
            (qb.re(0, 0).max(0.0), rb.re(0, 0).max(0.0))
        } else {
            (norm.eval(&qb)?, norm.eval(&rb)?)
        };
        tq += qk;
        tr += rk;
        y += (qk * rk).sqrt();
        offset += size;
    }
    let lhs = norm.eval(&(q_mat + r_mat))?;
    let small = DenseMatrix::from_real_rows(&[[tq, y], [y, tr]])?;
    let rhs = if d >= 2 {
        norm.eval(&small.padded(d, d))?
    } else {
        norm.eval(&small)?
    };
    let direction = if norm.is_quasi() {
        Direction::LhsGeRhs
    } else {
        Direction::LhsLeRhs
    };
    let scope = if partition.iter().all(|&s| s == 1) {
        Scope::Proven
    } else {
        Scope::Conjecture
    };
    Ok(IneqReport::evaluate(
        "kyfan-compression",
        norm,
        lhs,
        rhs,
        direction,
        tol,
        scope,
    ))
}

/// Closed-form maximum of `‖Q + R + S + …‖_∞` over PSD matrices with the
/// prescribed diagonals: the operator norm of `Σ_m [√(v^m_i v^m_j)]`.
pub fn max_opnorm_prescribed_diag(diags: &[Vec<f64>]) -> Result<f64> {
    let d = diags
        .first()
        .map(Vec::len)
        .ok_or_else(|| Error::InvalidArgument("no diagonals given".into()))?;
    if d == 0 || diags.iter().any(|v| v.len() != d) {
        return Err(Error::ShapeError("diagonals must share a positive length".into()));
    }
    if diags.iter().flatten().any(|&x| !(x >= 0.0) || !x.is_finite()) {
        return Err(Error::DomainError("diagonal entries must be finite and >= 0".into()));
    }
    let mut sum = DenseMatrix::zeros(d, d);
    for v in diags {
        let w: Vec<f64> = v.iter().map(|x| x.sqrt()).collect();
        sum = sum + DenseMatrix::from_fn(d, d, |i, j| num_complex::Complex64::new(w[i] * w[j], 0.0));
    }
    let (values, _) = hermitian_eigen(&sum)?;
    Ok(values[d - 1].max(0.0))
}

/// `‖Σ A_k B_k*‖_q ≤ Σ ‖A_k A_k*‖_q^{1/2} ‖B_k B_k*‖_q^{1/2}` on a 2 x N grid.
pub fn check_cauchy_schwarz_chain(t: &BlockMatrix, q: SchattenOrder, tol: f64) -> Result<IneqReport> {
    if !t.is_two_row() {
        return Err(Error::ShapeError("needs 2 block rows".into()));
    }
    if q.value() < 1.0 {
        return Err(Error::InvalidArgument(format!("needs q >= 1, got {q}")));
    }
    let mut cross = DenseMatrix::zeros(t.row_heights()[0], t.row_heights()[1]);
    let mut rhs = 0.0;
    for k in 0..t.block_cols() {
        let (a, b) = (t.block(0, k), t.block(1, k));
        cross = cross + a * &b.adjoint();
        rhs += schatten_norm(&(a * &a.adjoint()), q)?.sqrt() * schatten_norm(&(b * &b.adjoint()), q)?.sqrt();
    }
    let lhs = schatten_norm(&cross, q)?;
    Ok(IneqReport::evaluate(
        "cauchy-schwarz-chain",
        q,
        lhs,
        rhs,
        Direction::LhsLeRhs,
        tol,
        Scope::Proven,
    ))
}

/// The block-norm inequality on a PSD 2x2 block matrix. Proven for `q >= 1`;
/// for `q < 1` the direction recorded is the `q >= 2` one and the scope is
/// open.
pub fn check_psd_nci(t: &BlockMatrix, q: SchattenOrder, tol: f64) -> Result<IneqReport> {
    if t.block_rows() != 2 || t.block_cols() != 2 {
        return Err(Error::ShapeError("needs a 2x2 block grid".into()));
    }
    let flat = assemble(t);
    if !flat.is_square() || !is_psd(&flat, PSD_TOL)? {
        return Err(Error::DomainError("block matrix is not PSD".into()));
    }
    let mut r = check_nci(t, q, tol)?;
    r.name = "psd-nci".into();
    if q.is_quasi_norm() {
        r = IneqReport::evaluate("psd-nci", q, r.lhs, r.rhs, nci_direction(q).flipped(), tol, Scope::Open);
    } else {
        r.scope = Scope::Proven;
    }
    Ok(r)
}

/// The witness construction that fails to transfer the `p'` inequality back
/// to `p`: per-block witnesses stitched together with the signed weights of
/// the compression's witness.
#[derive(Clone, Debug, Serialize)]
pub struct DualityRoundtrip {
    pub p: SchattenOrder,
    pub compression: DenseMatrix,
    /// Dual witness of the compression, `‖X̂‖_{p'} = 1`.
    pub x_hat: DenseMatrix,
    pub x_hat_norm: f64,
    pub g_hat: Vec<DenseMatrix>,
    pub h_hat: Vec<DenseMatrix>,
    /// Blocks `ŝ_k Ĝ_k` over `t̂_k Ĥ_k`.
    pub y: BlockMatrix,
    /// `‖Y‖_{p'}`, may exceed 1.
    pub y_norm: f64,
    /// `Re Tr[T Y*]`, which equals `‖C_p(T)‖_p`.
    pub rhs_value: f64,
    /// `‖T‖_p`.
    pub lhs_value: f64,
    /// `Re Tr[T X̂*]`, defined when every block is a scalar.
    pub tr_t_xhat: Option<f64>,
}

pub fn duality_roundtrip(t: &BlockMatrix, p: SchattenOrder) -> Result<DualityRoundtrip> {
    if !(p.value() > 1.0 && p.value() < 2.0) {
        return Err(Error::InvalidArgument(format!(
            "duality roundtrip needs 1 < p < 2, got {p}"
        )));
    }
    if !t.is_two_row() {
        return Err(Error::ShapeError("duality roundtrip needs 2 block rows".into()));
    }
    let conj = p.conjugate().expect("p > 1");
    let compression = compress(t, p)?.values;
    let x = dual_witness(&compression, p)?;
    let witness = |b: &DenseMatrix| -> Result<DenseMatrix> {
        if b.is_zero() {
            Ok(DenseMatrix::zeros(b.rows(), b.cols()))
        } else {
            Ok(dual_witness(b, p)?.y)
        }
    };
    let n = t.block_cols();
    let g_hat = (0..n).map(|k| witness(t.block(0, k))).collect::<Result<Vec<_>>>()?;
    let h_hat = (0..n).map(|k| witness(t.block(1, k))).collect::<Result<Vec<_>>>()?;
    let y = t.map_blocks(|i, k, _| {
        let w = if i == 0 { &g_hat[k] } else { &h_hat[k] };
        w.scale(x.y.re(i, k))
    })?;
    let flat_t = assemble(t);
    let flat_y = assemble(&y);
    let scalar = t.row_heights().iter().chain(t.col_widths().iter()).all(|&s| s == 1);
    Ok(DualityRoundtrip {
        p,
        x_hat_norm: schatten_norm(&x.y, conj)?,
        y_norm: schatten_norm(&flat_y, conj)?,
        rhs_value: flat_t.inner(&flat_y).re,
        lhs_value: schatten_norm(&flat_t, p)?,
        tr_t_xhat: scalar.then(|| flat_t.inner(&x.y).re),
        compression,
        x_hat: x.y,
        g_hat,
        h_hat,
        y,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn r(rows: &[&[f64]]) -> DenseMatrix {
        DenseMatrix::from_real_rows(rows).unwrap()
    }

    fn p(v: f64) -> SchattenOrder {
        SchattenOrder::new(v).unwrap()
    }

    #[test]
    fn report_margin_semantics() {
        let le = IneqReport::evaluate("x", p(3.0), 1.0, 2.0, Direction::LhsLeRhs, 1e-9, Scope::Proven);
        assert_eq!(le.margin, 1.0);
        assert!(le.satisfied);
        let ge = IneqReport::evaluate("x", p(3.0), 1.0, 2.0, Direction::LhsGeRhs, 1e-9, Scope::Proven);
        assert_eq!(ge.margin, -1.0);
        assert!(!ge.satisfied);
        let eq = IneqReport::evaluate("x", p(2.0), 1e6, 1e6 + 1e-4, Direction::Equality, 1e-9, Scope::Identity);
        assert!(eq.satisfied, "relative tolerance scales with |lhs|");
    }

    #[test]
    fn report_json_keys() {
        let rep = IneqReport::evaluate("nci", p(1.5), 1.0, 2.0, Direction::LhsGeRhs, 1e-9, Scope::Conjecture);
        let v = serde_json::to_value(&rep).unwrap();
        for key in [
            "name",
            "p",
            "lhs",
            "rhs",
            "direction",
            "margin",
            "satisfied",
            "tol",
            "scope",
        ] {
            assert!(v.get(key).is_some(), "missing {key}");
        }
        assert_eq!(v["direction"], "lhs>=rhs");
        assert_eq!(v["scope"], "conjecture");
        let back: IneqReport = serde_json::from_value(v).unwrap();
        assert_eq!(back, rep);
        let ky = IneqReport::evaluate(
            "m",
            UiNorm::KyFan(2),
            1.0,
            2.0,
            Direction::LhsLeRhs,
            1e-9,
            Scope::Proven,
        );
        assert_eq!(serde_json::to_value(&ky).unwrap()["p"], "kyfan:2");
    }

    #[test]
    fn direction_flips_across_two() {
        assert_eq!(nci_direction(p(1.5)), Direction::LhsGeRhs);
        assert_eq!(nci_direction(p(2.0)), Direction::Equality);
        assert_eq!(nci_direction(p(2.5)), Direction::LhsLeRhs);
        assert_eq!(nci_direction(SchattenOrder::INFINITY), Direction::LhsLeRhs);
    }

    #[test]
    fn nci_scope_flags() {
        let a = r(&[&[1.0, -1.0], &[0.5, 2.0]]);
        let t = BlockMatrix::scalar_blocks(&a);
        assert_eq!(check_nci(&t, p(3.0), 1e-9).unwrap().scope, Scope::Conjecture);
        assert_eq!(check_nci(&t, p(0.5), 1e-9).unwrap().scope, Scope::Extension);
        let t3 = BlockMatrix::scalar_blocks(&DenseMatrix::identity(3));
        assert_eq!(
            check_nci(&t3, p(3.0), 1e-9).unwrap().scope,
            Scope::OutsideConjectureScope
        );
    }

    #[test]
    fn gram_at_q_one_is_trace_equality() {
        let t = BlockMatrix::two_row(
            vec![r(&[&[1.0, 2.0]]), r(&[&[0.0, -1.0]])],
            vec![r(&[&[3.0, 0.5]]), r(&[&[1.0, 1.0]])],
        )
        .unwrap();
        let rep = check_nci_gram(&t, SchattenOrder::ONE, 1e-12).unwrap();
        assert_eq!(rep.direction, Direction::Equality);
        assert!(rep.satisfied, "{rep}");
        assert!(check_nci_gram(&t, p(0.4), 1e-9).is_err());
    }

    #[test]
    fn hanner_equal_arguments() {
        let a = r(&[&[1.0, 2.0], &[0.0, -1.0]]);
        for pv in [1.2, 1.5, 3.0] {
            let rep = check_hanner(&a, &a, p(pv), 1e-10).unwrap();
            let na = schatten_norm(&a, p(pv)).unwrap();
            assert!((rep.lhs - 2f64.powf(pv) * na.powf(pv)).abs() < 1e-10 * rep.lhs);
            assert!((rep.lhs - rep.rhs).abs() < 1e-10 * rep.lhs);
        }
    }

    #[test]
    fn hanner_errors() {
        let a = DenseMatrix::identity(2);
        assert!(matches!(
            check_hanner(&a, &DenseMatrix::identity(3), p(1.5), 1e-9),
            Err(Error::ShapeError(_))
        ));
        assert!(matches!(
            check_hanner(&a, &a, SchattenOrder::INFINITY, 1e-9),
            Err(Error::UnsupportedExponent(_))
        ));
        assert!(matches!(
            check_hanner(&a, &a, p(0.5), 1e-9),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn hanner_reduction_equal_arguments() {
        let a = r(&[&[1.0, 2.0], &[0.0, -1.0]]);
        let red = hanner_from_nci(&a, &a, p(1.5)).unwrap();
        assert!(red.identity_holds, "{red:?}");
        assert!(red.nci.satisfied && red.hanner.satisfied);
    }

    #[test]
    fn king_single_term_and_equal_b() {
        let a = r(&[&[2.0, 1.0], &[1.0, 1.0]]);
        let b = r(&[&[1.0, 0.0], &[0.0, 3.0]]);
        for q in [0.5, 1.0, 3.0] {
            let rep = check_king_tensor(&[a.clone()], &[b.clone()], p(q), 1e-12).unwrap();
            assert!((rep.lhs - rep.rhs).abs() < 1e-12 * rep.rhs, "{rep}");
            let rep = check_king_tensor(&[a.clone(), b.clone()], &[b.clone(), b.clone()], p(q), 1e-12).unwrap();
            assert!((rep.lhs - rep.rhs).abs() < 1e-12 * rep.rhs, "{rep}");
        }
    }

    #[test]
    fn king_rejects_non_psd() {
        let bad = DenseMatrix::diag(&[1.0, -1.0]);
        let good = DenseMatrix::identity(2);
        assert!(matches!(
            check_king_tensor(&[bad], &[good], p(2.0), 1e-9),
            Err(Error::DomainError(_))
        ));
    }

    #[test]
    fn scaled_tensor_with_unit_b_norms() {
        let a1 = r(&[&[2.0, 1.0], &[1.0, 1.0]]);
        let a2 = DenseMatrix::diag(&[0.5, 0.25]);
        let q = p(1.5);
        let b1 = DenseMatrix::diag(&[1.0, 0.0]);
        let b2 = r(&[&[0.5, 0.5], &[0.5, 0.5]]);
        let s = check_scaled_tensor(&[a1.clone(), a2.clone()], &[b1.clone(), b2.clone()], q, 1e-12).unwrap();
        let k = check_king_tensor(&[a1, a2], &[b1, b2], q, 1e-12).unwrap();
        assert!((s.rhs - k.rhs).abs() < 1e-12);
    }

    #[test]
    fn rank1_bound_scalar_x_is_equality() {
        let xs = vec![r(&[&[1.0]]), r(&[&[1.0]])];
        let z = r(&[&[2.0, 1.0], &[1.0, 3.0]]);
        let rep = check_rank1_psd_bound(&xs, &z, p(1.5), 1e-12).unwrap();
        assert!((rep.lhs - rep.rhs).abs() < 1e-12);
        let bad = vec![r(&[&[2.0]]), r(&[&[1.0]])];
        assert!(matches!(
            check_rank1_psd_bound(&bad, &z, p(1.5), 1e-9),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn mono_cases() {
        let a = r(&[&[1.0, 0.5], &[0.5, 1.0]]);
        let rep = check_mono_2x2(&a, &a, p(3.0), 1e-12).unwrap();
        assert_eq!(rep.margin, 0.0);
        let delta = 1e-3;
        let a2 = r(&[&[1.0, 1.0], &[1.0, 1.0]]).scale(1.0 + delta);
        for pv in [1.0, 1.5, 2.0, 3.0] {
            let rep = check_mono_2x2(&DenseMatrix::identity(2), &a2, p(pv), 1e-12).unwrap();
            // oracle: eigenvalues of I are (1,1), of a2 are (2(1+δ), 0)
            let expect = 2.0 * (1.0 + delta);
            assert!((rep.rhs - expect).abs() < 1e-12, "{rep}");
            assert!((rep.lhs - 2f64.powf(1.0 / pv)).abs() < 1e-12);
            assert!(rep.satisfied);
        }
        let rep = check_mono_2x2(&DenseMatrix::identity(2), &a2, SchattenOrder::INFINITY, 1e-12).unwrap();
        assert!(rep.satisfied);
        assert!(matches!(
            check_mono_2x2(&a2, &DenseMatrix::identity(2), p(2.0), 1e-9),
            Err(Error::InvalidArgument(_))
        ));
        let neg = r(&[&[1.0, -0.5], &[-0.5, 1.0]]);
        assert!(matches!(
            check_mono_2x2(&neg, &a2, p(2.0), 1e-9),
            Err(Error::DomainError(_))
        ));
    }

    #[test]
    fn kyfan_with_zero_r() {
        // Q rank one: Ky Fan k >= 1 is the trace
        let v = [1.0, 2.0, 0.5];
        let q_mat = DenseMatrix::from_fn(3, 3, |i, j| num_complex::Complex64::new(v[i] * v[j], 0.0));
        let r_mat = DenseMatrix::zeros(3, 3);
        for k in 1..=3 {
            let rep = check_kyfan_compression(&q_mat, &r_mat, &[1, 1, 1], UiNorm::KyFan(k), 1e-12).unwrap();
            assert!((rep.lhs - rep.rhs).abs() < 1e-12, "{rep}");
        }
    }

    #[test]
    fn kyfan_k2_rhs_is_total_trace() {
        let q_mat = DenseMatrix::diag(&[1.0, 2.0, 3.0]);
        let r_mat = r(&[&[1.0, 0.5, 0.0], &[0.5, 1.0, 0.0], &[0.0, 0.0, 2.0]]);
        let rep = check_kyfan_compression(&q_mat, &r_mat, &[1, 1, 1], UiNorm::KyFan(2), 1e-12).unwrap();
        assert!((rep.rhs - 10.0).abs() < 1e-12);
        assert!(rep.satisfied);
        assert!(matches!(
            check_kyfan_compression(
                &DenseMatrix::diag(&[1.0, -1.0]),
                &DenseMatrix::identity(2),
                &[1, 1],
                UiNorm::KyFan(1),
                1e-9
            ),
            Err(Error::DomainError(_))
        ));
    }

    #[test]
    fn prescribed_diag_closed_form() {
        let q = vec![1.0, 2.0, 3.0];
        assert!((max_opnorm_prescribed_diag(&[q]).unwrap() - 6.0).abs() < 1e-12);
        let v = max_opnorm_prescribed_diag(&[vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        assert!((v - 1.0).abs() < 1e-12);
        assert!(matches!(
            max_opnorm_prescribed_diag(&[vec![-1.0]]),
            Err(Error::DomainError(_))
        ));
    }

    #[test]
    fn roundtrip_nonnegative_scalars() {
        let t = BlockMatrix::scalar_blocks(&r(&[&[1.0, 2.0], &[0.1, 1.0]]));
        let rt = duality_roundtrip(&t, p(1.5)).unwrap();
        assert!(rt.y_norm <= 1.0 + 1e-9);
        assert!((rt.y_norm - 1.0).abs() < 1e-9);
        assert!(matches!(duality_roundtrip(&t, p(2.5)), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn roundtrip_zero_block() {
        let t = BlockMatrix::scalar_blocks(&r(&[&[1.0, 0.0], &[-0.5, 1.0]]));
        let rt = duality_roundtrip(&t, p(1.5)).unwrap();
        assert!(rt.g_hat[1].is_zero());
        assert!(rt.y.block(0, 1).is_zero());
    }
}
