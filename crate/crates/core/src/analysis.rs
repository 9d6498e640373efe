//! The entrywise-power function `g_p(B) = ‖B^{∘1/p}‖_p^p`, its directional
//! derivative, the derivative inequality it reduces to, and the boundary
//! behaviour of polar powers of non-negative matrices.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::blockmat::BlockMatrix;
use crate::error::{Error, Result};
use crate::ineq::{Direction, IneqReport, Scope};
use crate::matrix::DenseMatrix;
use crate::rng::{keyed_rng, uniform_nonneg};
use crate::schatten::{hadamard_power, polar_power, polar_power_signed, psd_power, schatten_power_sum, SchattenOrder};

fn require_nonneg(b: &DenseMatrix, what: &str) -> Result<()> {
    if !b.is_nonnegative() {
        return Err(Error::DomainError(format!("{what} must be real and entrywise >= 0")));
    }
    Ok(())
}

fn require_positive(b: &DenseMatrix, what: &str) -> Result<()> {
    require_nonneg(b, what)?;
    if b.iter().any(|z| z.re == 0.0) {
        return Err(Error::BoundarySingularity(format!(
            "{what} has a zero entry; use epsilon_limit_study to approach the boundary"
        )));
    }
    Ok(())
}

fn finite_p(p: SchattenOrder) -> Result<f64> {
    if p.is_infinite() {
        return Err(Error::UnsupportedExponent("g_p needs a finite p".into()));
    }
    Ok(p.value())
}

#[derive(Clone, Debug, Serialize)]
pub struct GpEvaluation {
    pub b: DenseMatrix,
    pub p: SchattenOrder,
    pub value: f64,
}

/// `g_p(B) = ‖B^{∘1/p}‖_p^p`, positively homogeneous of degree one.
pub fn g_p(b: &DenseMatrix, p: SchattenOrder) -> Result<GpEvaluation> {
    require_nonneg(b, "B")?;
    let pv = finite_p(p)?;
    let value = schatten_power_sum(&hadamard_power(b, 1.0 / pv)?, p)?;
    Ok(GpEvaluation { b: b.clone(), p, value })
}

fn g_value(b: &DenseMatrix, p: SchattenOrder) -> Result<f64> {
    g_p(b, p).map(|g| g.value)
}

/// `d/dt g_p(B + tΔ)` at `t = 0`, i.e.
/// `Tr Δᵀ((B^{∘1/p})^{[p−1]} ∘ B^{∘(1−p)/p})`. `B` must be strictly positive.
pub fn g_p_frechet(b: &DenseMatrix, delta: &DenseMatrix, p: SchattenOrder) -> Result<f64> {
    require_positive(b, "B")?;
    require_nonneg(delta, "Delta")?;
    if b.shape() != delta.shape() {
        return Err(Error::ShapeError(format!("{:?} vs {:?}", b.shape(), delta.shape())));
    }
    let pv = finite_p(p)?;
    let c = hadamard_power(b, 1.0 / pv)?;
    let polar = polar_power_signed(&c, pv - 1.0)?;
    let weight = hadamard_power(b, (1.0 - pv) / pv)?;
    Ok(weighted_trace(delta, &polar, &weight))
}

/// `Σ_ij x_ij · y_ij · w_ij` over real parts.
fn weighted_trace(x: &DenseMatrix, y: &DenseMatrix, w: &DenseMatrix) -> f64 {
    x.iter()
        .zip(y.iter())
        .zip(w.iter())
        .map(|((a, b), c)| a.re * b.re * c.re)
        .sum()
}

fn ac_exponent(p: SchattenOrder) -> Result<f64> {
    let pv = p.value();
    if !(1.0..=2.0).contains(&pv) {
        return Err(Error::InvalidArgument(format!(
            "the derivative inequality needs 1 <= p <= 2, got {p}"
        )));
    }
    Ok(pv)
}

/// `Tr (A^{∘p})ᵀ(C^{[p−1]} ∘ C^{∘1−p}) ≤ Tr|A|^p` for non-negative `A` and
/// strictly positive `C`. The right side is the Schatten power sum, so `A = cC`
/// gives equality.
pub fn check_ac(a: &DenseMatrix, c: &DenseMatrix, p: SchattenOrder, tol: f64) -> Result<IneqReport> {
    require_nonneg(a, "A")?;
    require_positive(c, "C")?;
    if a.shape() != c.shape() {
        return Err(Error::ShapeError(format!("{:?} vs {:?}", a.shape(), c.shape())));
    }
    let pv = ac_exponent(p)?;
    let ap = hadamard_power(a, pv)?;
    let polar = polar_power(c, pv - 1.0)?;
    let weight = hadamard_power(c, 1.0 - pv)?;
    let lhs = weighted_trace(&ap, &polar, &weight);
    let rhs = schatten_power_sum(a, p)?;
    let scope = match c.shape() {
        (2, 2) => Scope::Proven,
        (2, _) | (_, 2) => Scope::Open,
        _ => Scope::OutsideConjectureScope,
    };
    Ok(IneqReport::evaluate("ac", p, lhs, rhs, Direction::LhsLeRhs, tol, scope))
}

/// `[[ε, 1, ε], [1, ε, 1], [ε, 1, 1]]`.
pub fn c_matrix(eps: f64) -> DenseMatrix {
    DenseMatrix::from_real_rows(&[[eps, 1.0, eps], [1.0, eps, 1.0], [eps, 1.0, 1.0]]).expect("finite entries")
}

/// `10^-1, 10^-2, …, 10^-7`.
pub fn default_schedule() -> Vec<f64> {
    (1..=7).map(|k| 10f64.powi(-k)).collect()
}

pub const STABILIZATION_TOL: f64 = 1e-4;
pub const SCHEDULE_END: f64 = 1e-7;

#[derive(Clone, Debug, Serialize)]
pub struct EpsilonRow {
    pub epsilon: f64,
    pub entry11: f64,
    pub combined11: f64,
}

/// `(C(ε)^{[p−1]})_{11}` and `(C(ε)^{[p−1]} ∘ C(ε)^{∘1−p})_{11}` along a
/// decreasing schedule.
#[derive(Clone, Debug, Serialize)]
pub struct EpsilonStudy {
    pub p: SchattenOrder,
    pub epsilons: Vec<f64>,
    pub entries_11: Vec<f64>,
    pub combined_11: Vec<f64>,
    /// Schedule reaches `1e-7` and the last two entries agree within `1e-4`.
    pub stabilized: bool,
}

impl EpsilonStudy {
    pub fn rows(&self) -> Vec<EpsilonRow> {
        self.epsilons
            .iter()
            .zip(&self.entries_11)
            .zip(&self.combined_11)
            .map(|((&epsilon, &entry11), &combined11)| EpsilonRow {
                epsilon,
                entry11,
                combined11,
            })
            .collect()
    }

    pub fn last_entry(&self) -> f64 {
        *self.entries_11.last().expect("non-empty schedule")
    }
}

pub fn epsilon_limit_study(p: SchattenOrder, schedule: &[f64]) -> Result<EpsilonStudy> {
    let pv = p.value();
    if !(pv > 1.0 && pv < 2.0) {
        return Err(Error::InvalidArgument(format!("limit study needs 1 < p < 2, got {p}")));
    }
    if schedule.is_empty() || schedule.iter().any(|&e| !(e > 0.0) || !e.is_finite()) {
        return Err(Error::InvalidArgument("schedule must be non-empty and positive".into()));
    }
    if schedule.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::InvalidArgument("schedule must be strictly decreasing".into()));
    }
    let mut entries = Vec::with_capacity(schedule.len());
    let mut combined = Vec::with_capacity(schedule.len());
    for &eps in schedule {
        let e11 = polar_power(&c_matrix(eps), pv - 1.0)?.re(0, 0);
        entries.push(e11);
        combined.push(e11 * eps.powf(1.0 - pv));
    }
    let n = entries.len();
    let stabilized =
        n >= 2 && schedule[n - 1] <= SCHEDULE_END && (entries[n - 1] - entries[n - 2]).abs() <= STABILIZATION_TOL;
    Ok(EpsilonStudy {
        p,
        epsilons: schedule.to_vec(),
        entries_11: entries,
        combined_11: combined,
        stabilized,
    })
}

/// `(C^{[p−1]})_ij` at every zero entry of `C`.
pub fn zero_entry_values(c: &DenseMatrix, p: SchattenOrder) -> Result<Vec<((usize, usize), f64)>> {
    require_nonneg(c, "C")?;
    let pv = ac_exponent(p)?;
    let zeros: Vec<(usize, usize)> = (0..c.rows())
        .flat_map(|i| (0..c.cols()).map(move |j| (i, j)))
        .filter(|&(i, j)| c.re(i, j) == 0.0)
        .collect();
    if zeros.is_empty() {
        return Err(Error::InvalidArgument("C has no zero entry".into()));
    }
    let polar = polar_power(c, pv - 1.0)?;
    Ok(zeros.into_iter().map(|(i, j)| ((i, j), polar.re(i, j))).collect())
}

/// At every zero entry of a non-negative `C`, `(C^{[p−1]})_ij ≤ 0`. Holds on
/// 2 x N; reported as out of scope elsewhere.
pub fn check_zero_entry_lemma(c: &DenseMatrix, p: SchattenOrder, tol: f64) -> Result<IneqReport> {
    let values = zero_entry_values(c, p)?;
    let worst = values.iter().map(|&(_, v)| v).fold(f64::NEG_INFINITY, f64::max);
    let scope = if c.rows() == 2 || c.cols() == 2 {
        Scope::Proven
    } else {
        Scope::OutsideConjectureScope
    };
    Ok(IneqReport::evaluate(
        "zero-entry-sign",
        p,
        worst,
        0.0,
        Direction::LhsLeRhs,
        tol,
        scope,
    ))
}

/// `A = λP + μ(1 − P)`, `P = [[t, s], [s, 1 − t]]`, `s = √(t(1 − t))`: every
/// 2x2 PSD matrix with non-negative entries.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct Psd2Param {
    pub lambda: f64,
    pub mu: f64,
    pub t: f64,
}

impl Psd2Param {
    pub fn new(lambda: f64, mu: f64, t: f64) -> Result<Self> {
        if !(mu >= 0.0 && lambda >= mu && lambda.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "need lambda >= mu >= 0, got {lambda}, {mu}"
            )));
        }
        if !(0.0..=1.0).contains(&t) {
            return Err(Error::InvalidArgument(format!("t must lie in [0, 1], got {t}")));
        }
        Ok(Psd2Param { lambda, mu, t })
    }

    pub fn s(&self) -> f64 {
        (self.t * (1.0 - self.t)).sqrt()
    }

    pub fn projector(&self) -> DenseMatrix {
        let (t, s) = (self.t, self.s());
        DenseMatrix::from_real_rows(&[[t, s], [s, 1.0 - t]]).expect("finite")
    }

    pub fn matrix(&self) -> DenseMatrix {
        self.with_eigenvalues(self.lambda, self.mu)
    }

    fn with_eigenvalues(&self, l: f64, m: f64) -> DenseMatrix {
        let p = self.projector();
        &p.scale(l) + &(&DenseMatrix::identity(2) - &p).scale(m)
    }

    /// `λ^p P + μ^p (1 − P)`, with `0^0 = 1`.
    pub fn closed_form_power(&self, p: f64) -> Result<DenseMatrix> {
        if self.mu == 0.0 && p < 0.0 {
            return Err(Error::DomainError("negative power of a singular matrix".into()));
        }
        let pow = |x: f64| if x == 0.0 && p == 0.0 { 1.0 } else { x.powf(p) };
        Ok(self.with_eigenvalues(pow(self.lambda), pow(self.mu)))
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Psd2PowerCheck {
    pub closed_form: DenseMatrix,
    pub generic: DenseMatrix,
    /// `max |closed − generic| / max(1, max|generic|)`.
    pub deviation: f64,
    pub identity_holds: bool,
    /// `(A^p)_12 ≥ 0` for `p ≥ 0`, `≤ 0` for `p < 0`.
    pub sign: IneqReport,
}

pub const PSD2_IDENTITY_TOL: f64 = 1e-10;

pub fn psd2_power_identity(param: &Psd2Param, p: f64) -> Result<Psd2PowerCheck> {
    let closed_form = param.closed_form_power(p)?;
    let generic = psd_power(&param.matrix(), p)?;
    let scale = 1f64.max(generic.max_abs());
    let deviation = closed_form.max_abs_diff(&generic) / scale;
    let direction = if p >= 0.0 {
        Direction::LhsGeRhs
    } else {
        Direction::LhsLeRhs
    };
    let norm = SchattenOrder::new(p.abs().max(crate::schatten::MIN_EXPONENT))?;
    let sign = IneqReport::evaluate(
        "psd2-offdiag-sign",
        norm,
        generic.re(0, 1),
        0.0,
        direction,
        PSD2_IDENTITY_TOL * scale,
        Scope::Proven,
    );
    Ok(Psd2PowerCheck {
        closed_form,
        generic,
        deviation,
        identity_holds: deviation <= PSD2_IDENTITY_TOL,
        sign,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Additivity {
    /// `g_p(A + B) > g_p(A) + g_p(B)`: convexity fails.
    Superadditive,
    /// `g_p(A + B) < g_p(A) + g_p(B)`: concavity fails.
    Subadditive,
}

#[derive(Clone, Debug, Serialize)]
pub struct GpCertificate {
    pub a: DenseMatrix,
    pub b: DenseMatrix,
    pub p: SchattenOrder,
    pub kind: Additivity,
    pub trial_index: u64,
    /// `g_p(A + B)`.
    pub joint: f64,
    /// `g_p(A) + g_p(B)`.
    pub separate: f64,
    /// `joint − separate`.
    pub gap: f64,
}

impl GpCertificate {
    /// Diagonal blocks `T_ij = diag(A_ij^{1/p}, B_ij^{1/p})`: `‖T‖_p^p` is the
    /// separate sum and the compression's `p`-th power is the joint value.
    pub fn to_block_instance(&self) -> Result<BlockMatrix> {
        let r = 1.0 / self.p.value();
        let (m, n) = self.a.shape();
        let blocks = (0..m)
            .map(|i| {
                (0..n)
                    .map(|j| DenseMatrix::diag(&[self.a.re(i, j).powf(r), self.b.re(i, j).powf(r)]))
                    .collect()
            })
            .collect();
        BlockMatrix::new(blocks)
    }

    pub fn reverify(&self) -> Result<f64> {
        let sum = &self.a + &self.b;
        Ok(g_value(&sum, self.p)? - g_value(&self.a, self.p)? - g_value(&self.b, self.p)?)
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct NonconvexityProbe {
    pub p: SchattenOrder,
    pub trials: u64,
    pub seed: u64,
    pub superadditive: Option<GpCertificate>,
    pub subadditive: Option<GpCertificate>,
}

/// Relative gap below which a trial counts as additive.
pub const PROBE_TOL: f64 = 1e-9;

/// Random non-negative 2x2 pairs, keeping the most extreme violation of each
/// direction of additivity.
pub fn g_p_nonconvexity_probe(p: SchattenOrder, trials: u64, seed: u64) -> Result<NonconvexityProbe> {
    finite_p(p)?;
    let results: Vec<Result<(u64, DenseMatrix, DenseMatrix, f64, f64)>> = (0..trials)
        .into_par_iter()
        .map(|i| {
            let mut rng = keyed_rng(seed, i);
            let a = uniform_nonneg(&mut rng, 2, 2);
            let b = uniform_nonneg(&mut rng, 2, 2);
            let joint = g_value(&(&a + &b), p)?;
            let separate = g_value(&a, p)? + g_value(&b, p)?;
            Ok((i, a, b, joint, separate))
        })
        .collect();
    let mut sup: Option<GpCertificate> = None;
    let mut sub: Option<GpCertificate> = None;
    for r in results {
        let (i, a, b, joint, separate) = r?;
        let gap = joint - separate;
        let thresh = PROBE_TOL * 1f64.max(joint.abs()).max(separate.abs());
        let kind = if gap > thresh {
            Additivity::Superadditive
        } else if gap < -thresh {
            Additivity::Subadditive
        } else {
            continue;
        };
        let slot = if kind == Additivity::Superadditive {
            &mut sup
        } else {
            &mut sub
        };
        if slot.as_ref().is_none_or(|c| gap.abs() > c.gap.abs()) {
            *slot = Some(GpCertificate {
                a,
                b,
                p,
                kind,
                trial_index: i,
                joint,
                separate,
                gap,
            });
        }
    }
    Ok(NonconvexityProbe {
        p,
        trials,
        seed,
        superadditive: sup,
        subadditive: sub,
    })
}

/// `B + tΔ` for non-negative `t`.
pub fn along(b: &DenseMatrix, delta: &DenseMatrix, t: f64) -> DenseMatrix {
    b + &delta.scale_complex(Complex64::new(t, 0.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(v: f64) -> SchattenOrder {
        SchattenOrder::new(v).unwrap()
    }

    #[test]
    fn g_of_diagonal_is_trace() {
        let b = DenseMatrix::diag(&[2.0, 3.0, 0.5]);
        for pv in [0.5, 1.5, 3.0] {
            assert!((g_p(&b, p(pv)).unwrap().value - 5.5).abs() < 1e-12);
        }
    }

    #[test]
    fn g_of_ones() {
        let ones = DenseMatrix::real(2, 2, &[1.0; 4]).unwrap();
        assert!((g_p(&ones, p(1.5)).unwrap().value - 2f64.powf(1.5)).abs() < 1e-12);
    }

    #[test]
    fn g_rejects_negative() {
        let b = DenseMatrix::diag(&[1.0, -1.0]);
        assert!(matches!(g_p(&b, p(1.5)), Err(Error::DomainError(_))));
    }

    #[test]
    fn frechet_refuses_boundary() {
        let b = DenseMatrix::from_real_rows(&[[0.0, 1.0], [1.0, 1.0]]).unwrap();
        let d = DenseMatrix::real(2, 2, &[1.0; 4]).unwrap();
        assert!(matches!(
            g_p_frechet(&b, &d, p(1.5)),
            Err(Error::BoundarySingularity(_))
        ));
        assert!(matches!(
            check_ac(&d, &b, p(1.5), 1e-9),
            Err(Error::BoundarySingularity(_))
        ));
    }

    #[test]
    fn ac_equality_for_equal_arguments() {
        let c = DenseMatrix::from_real_rows(&[[1.0, 2.0, 0.5], [0.3, 1.0, 4.0]]).unwrap();
        let rep = check_ac(&c, &c, p(1.5), 1e-9).unwrap();
        assert!(rep.margin.abs() < 1e-9 * rep.scale(), "{rep}");
        assert_eq!(rep.scope, Scope::Open);
        let rep = check_ac(&c.scale(2.5), &c, p(1.2), 1e-9).unwrap();
        assert!(rep.margin.abs() < 1e-9 * rep.scale(), "{rep}");
    }

    #[test]
    fn schedule_must_decrease() {
        assert!(matches!(
            epsilon_limit_study(p(1.5), &[1e-2, 1e-1]),
            Err(Error::InvalidArgument(_))
        ));
        assert!(matches!(
            epsilon_limit_study(p(1.5), &[]),
            Err(Error::InvalidArgument(_))
        ));
        assert!(matches!(
            epsilon_limit_study(p(2.5), &[1e-1]),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn limit_at_eps_one_matches_rank_one_power() {
        let s = epsilon_limit_study(p(1.5), &[1.0]).unwrap();
        // C(1) is all ones: sigma = 3, U = V = ones/sqrt(3)
        assert!((s.entries_11[0] - 3f64.sqrt() / 3.0).abs() < 1e-12);
        assert!(!s.stabilized);
    }

    #[test]
    fn zero_entry_simple_case() {
        let c = DenseMatrix::from_real_rows(&[[0.0, 1.0], [1.0, 1.0]]).unwrap();
        let rep = check_zero_entry_lemma(&c, p(1.5), 1e-12).unwrap();
        assert!(rep.lhs <= 1e-12, "{rep}");
        assert!(rep.satisfied);
        let full = DenseMatrix::real(2, 2, &[1.0; 4]).unwrap();
        assert!(matches!(
            check_zero_entry_lemma(&full, p(1.5), 1e-12),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn psd2_trivial_cases() {
        let diag = Psd2Param::new(3.0, 1.0, 0.0).unwrap();
        for e in [-0.5, 0.0, 0.5, 2.0] {
            let chk = psd2_power_identity(&diag, e).unwrap();
            assert!(chk.identity_holds);
            assert_eq!(chk.closed_form.re(0, 1), 0.0);
        }
        let scalar = Psd2Param::new(2.0, 2.0, 0.3).unwrap();
        let chk = psd2_power_identity(&scalar, 1.5).unwrap();
        let expect = DenseMatrix::identity(2).scale(2f64.powf(1.5));
        assert!(chk.closed_form.max_abs_diff(&expect) < 1e-12);
        assert!(chk.identity_holds);
        let singular = Psd2Param::new(2.0, 0.0, 0.3).unwrap();
        assert!(matches!(
            psd2_power_identity(&singular, -0.5),
            Err(Error::DomainError(_))
        ));
        assert!(Psd2Param::new(1.0, 2.0, 0.5).is_err());
    }

    #[test]
    fn certificate_block_instance_matches_gp() {
        let a = DenseMatrix::from_real_rows(&[[0.2, 0.9], [0.4, 0.1]]).unwrap();
        let b = DenseMatrix::from_real_rows(&[[0.7, 0.1], [0.3, 0.8]]).unwrap();
        let pp = p(0.5);
        let joint = g_value(&(&a + &b), pp).unwrap();
        let separate = g_value(&a, pp).unwrap() + g_value(&b, pp).unwrap();
        let cert = GpCertificate {
            a,
            b,
            p: pp,
            kind: Additivity::Subadditive,
            trial_index: 0,
            joint,
            separate,
            gap: joint - separate,
        };
        let t = cert.to_block_instance().unwrap();
        let rep = crate::ineq::check_nci(&t, pp, 1e-9).unwrap();
        assert!((rep.lhs.powf(0.5) - separate).abs() < 1e-10);
        assert!((rep.rhs.powf(0.5) - joint).abs() < 1e-10);
    }
}
