//! Library values checked against independent closed forms and published
//! reference numbers.

use rand::Rng;

use ncilab::analysis::{check_ac, psd2_power_identity, Psd2Param};
use ncilab::blockmat::gram_form;
use ncilab::ineq::{check_cauchy_schwarz_chain, check_hanner, check_nci, max_opnorm_prescribed_diag};
use ncilab::rng::{ginibre, keyed_rng, real_gaussian, uniform_range};
use ncilab::schatten::{ky_fan_norm, singular_values};
use ncilab::search::{probe_variational, variational_closed_form, VariationalConfig};
use ncilab::{compress, schatten_norm, BlockMatrix, DenseMatrix, SchattenOrder, Scope};

fn p(v: f64) -> SchattenOrder {
    SchattenOrder::new(v).unwrap()
}

/// Singular values of a real 2x2 matrix from its Frobenius norm and determinant.
fn sv_2x2(a: [[f64; 2]; 2]) -> (f64, f64) {
    let f = a.iter().flatten().map(|x| x * x).sum::<f64>();
    let det = a[0][0] * a[1][1] - a[0][1] * a[1][0];
    let disc = (f * f - 4.0 * det * det).max(0.0).sqrt();
    (((f + disc) / 2.0).sqrt(), ((f - disc) / 2.0).max(0.0).sqrt())
}

#[test]
fn two_by_two_norms_match_closed_form() {
    let mut rng = keyed_rng(1, 0);
    for _ in 0..200 {
        let a: [[f64; 2]; 2] = [
            [rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)],
            [rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)],
        ];
        let (s1, s2) = sv_2x2(a);
        let m = DenseMatrix::from_real_rows(&a).unwrap();
        for pv in [0.5, 1.0, 1.5, 3.0, 7.0] {
            let want = (s1.powf(pv) + s2.powf(pv)).powf(1.0 / pv);
            let got = schatten_norm(&m, p(pv)).unwrap();
            assert!((got - want).abs() <= 1e-10 * want.max(1.0), "p={pv}: {got} vs {want}");
        }
        let got = schatten_norm(&m, SchattenOrder::INFINITY).unwrap();
        assert!((got - s1).abs() <= 1e-12 * s1.max(1.0));
        assert!((ky_fan_norm(&m, 1).unwrap() - s1).abs() <= 1e-12 * s1.max(1.0));
    }
}

#[test]
fn diagonal_matrix_norms() {
    let d = DenseMatrix::diag(&[3.0, -4.0, 0.0]);
    assert!((schatten_norm(&d, p(1.0)).unwrap() - 7.0).abs() < 1e-12);
    assert!((schatten_norm(&d, p(2.0)).unwrap() - 5.0).abs() < 1e-12);
    assert!((schatten_norm(&d, p(0.5)).unwrap() - (3f64.sqrt() + 2.0).powi(2)).abs() < 1e-12);
    assert_eq!(ky_fan_norm(&d, 2).unwrap(), 7.0);
}

#[test]
fn scalar_blocks_compress_to_absolute_values() {
    let mut rng = keyed_rng(2, 0);
    let a = real_gaussian(&mut rng, 3, 4);
    let c = compress(&BlockMatrix::scalar_blocks(&a), p(1.7)).unwrap();
    assert!(c.values.max_abs_diff(&a.abs()) < 1e-15);
}

#[test]
fn published_four_by_four_values() {
    let a = ncilab::search::counterexample_4x4();
    let lhs = schatten_norm(&a, p(1.5)).unwrap();
    let rhs = schatten_norm(&a.abs(), p(1.5)).unwrap();
    assert!((lhs - 9.49929).abs() < 1e-4);
    assert!((rhs - 9.63184).abs() < 1e-4);
    let r = check_nci(&BlockMatrix::scalar_blocks(&a), p(1.5), 1e-9).unwrap();
    assert!(!r.satisfied);
    assert_eq!(r.scope, Scope::OutsideConjectureScope);
}

#[test]
fn hanner_equality_for_real_scalars() {
    let mut rng = keyed_rng(3, 0);
    for _ in 0..200 {
        let (x, y): (f64, f64) = (rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0));
        for pv in [1.2, 1.5, 3.0, 5.0] {
            let direct = (x + y).abs().powf(pv) + (x - y).abs().powf(pv);
            let bound = (x.abs() + y.abs()).powf(pv) + (x.abs() - y.abs()).abs().powf(pv);
            assert!((direct - bound).abs() <= 1e-12 * bound.max(1.0));
            let (a, b) = (DenseMatrix::diag(&[x]), DenseMatrix::diag(&[y]));
            let r = check_hanner(&a, &b, p(pv), 1e-10).unwrap();
            assert!((r.lhs - direct).abs() <= 1e-12 * direct.max(1.0));
            assert!((r.rhs - bound).abs() <= 1e-12 * bound.max(1.0));
        }
    }
}

#[test]
fn gram_form_matches_nci_at_even_exponent() {
    let mut rng = keyed_rng(4, 0);
    for _ in 0..100 {
        let t = BlockMatrix::two_row(
            (0..3).map(|_| ginibre(&mut rng, 2, 2)).collect(),
            (0..3).map(|_| ginibre(&mut rng, 2, 2)).collect(),
        )
        .unwrap();
        for qv in [1.0, 1.5, 2.5] {
            let g = gram_form(&t, p(qv)).unwrap();
            let nci = check_nci(&t, p(2.0 * qv), 1e-12).unwrap();
            let lhs = schatten_norm(&g.g, p(qv)).unwrap();
            let rhs = schatten_norm(&g.compressed, p(qv)).unwrap();
            assert!((lhs - nci.lhs * nci.lhs).abs() <= 1e-10 * lhs);
            assert!((rhs - nci.rhs * nci.rhs).abs() <= 1e-10 * rhs);
        }
    }
}

#[test]
fn cauchy_schwarz_chain_holds() {
    let mut rng = keyed_rng(5, 0);
    for _ in 0..300 {
        let n = rng.random_range(1..=4);
        let (h1, h2, w) = (
            rng.random_range(1..=3),
            rng.random_range(1..=3),
            rng.random_range(1..=3),
        );
        let t = BlockMatrix::two_row(
            (0..n).map(|_| ginibre(&mut rng, h1, w)).collect(),
            (0..n).map(|_| ginibre(&mut rng, h2, w)).collect(),
        )
        .unwrap();
        for qv in [1.0, 1.5, 3.0] {
            let r = check_cauchy_schwarz_chain(&t, p(qv), 1e-10).unwrap();
            assert!(r.satisfied, "{r}");
        }
    }
}

#[test]
fn ac_holds_for_two_by_two() {
    let mut rng = keyed_rng(6, 0);
    for _ in 0..500 {
        let a = uniform_range(&mut rng, 2, 2, 0.0, 1.0);
        let c = uniform_range(&mut rng, 2, 2, 0.01, 1.0);
        let pv = rng.random_range(1.0..=2.0);
        let r = check_ac(&a, &c, p(pv), 1e-10).unwrap();
        assert_eq!(r.scope, Scope::Proven);
        assert!(r.satisfied, "{r}");
    }
}

#[test]
fn psd2_power_identity_on_random_parameters() {
    let mut rng = keyed_rng(7, 0);
    for _ in 0..500 {
        let mu = rng.random_range(0.01..2.0);
        let lambda = mu + rng.random_range(0.0..2.0);
        let param = Psd2Param::new(lambda, mu, rng.random_range(0.0..=1.0)).unwrap();
        for pv in [-1.5, -0.5, 0.0, 0.3, 1.0, 2.5] {
            let c = psd2_power_identity(&param, pv).unwrap();
            assert!(c.identity_holds, "p={pv}: deviation {}", c.deviation);
            assert!(c.sign.satisfied, "{}", c.sign);
        }
    }
}

#[test]
fn prescribed_diagonal_two_terms() {
    // rank-one completions: λmax of (√q√qᵀ + √r√rᵀ) is the larger eigenvalue of the 2x2 Gram matrix
    let (q, r) = ([0.3, 0.5, 0.2], [0.1, 0.4, 0.9]);
    let qq: f64 = q.iter().sum();
    let rr: f64 = r.iter().sum();
    let qr: f64 = q.iter().zip(&r).map(|(a, b)| (a * b).sqrt()).sum();
    let want = (qq + rr) / 2.0 + (((qq - rr) / 2.0).powi(2) + qr * qr).sqrt();
    let got = max_opnorm_prescribed_diag(&[q.to_vec(), r.to_vec()]).unwrap();
    assert!((got - want).abs() < 1e-12);
}

#[test]
fn variational_probe_reaches_closed_form_for_scalar_blocks() {
    for qv in [1.5, 3.0, 0.7] {
        let config = VariationalConfig {
            q_vals: vec![0.3, 1.0, 0.5],
            r_vals: vec![0.8, 0.2, 0.6],
            q: p(qv),
            block_dim: 1,
            trials: 64,
            seed: 9,
            refine_steps: 400,
        };
        let probe = probe_variational(&config).unwrap();
        let closed = variational_closed_form(&config.q_vals, &config.r_vals, p(qv)).unwrap();
        assert!(
            (probe.report.lhs - closed).abs() <= 1e-3,
            "q={qv}: {} vs {closed}",
            probe.report.lhs
        );
        assert!(probe.report.satisfied);
    }
}

#[test]
fn singular_values_are_sorted_and_nonnegative() {
    let mut rng = keyed_rng(8, 0);
    let s = singular_values(&ginibre(&mut rng, 5, 3)).unwrap();
    assert_eq!(s.len(), 3);
    assert!(s.windows(2).all(|w| w[0] >= w[1]) && s[2] >= 0.0);
}
