//! Seeded random ensembles, counterexample search with hill-climb refinement,
//! the variational probe and the fixed reproduction cases.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analysis::{c_matrix, default_schedule, epsilon_limit_study, g_p_nonconvexity_probe, zero_entry_values};
use crate::blockmat::{assemble, compress_compensated, BlockMatrix};
use crate::error::{Error, Result};
use crate::ineq::{check_nci, duality_roundtrip, hanner_from_nci, Direction, IneqReport, Scope};
use crate::matrix::DenseMatrix;
use crate::rng::{complex_gaussian, gaussian, ginibre, keyed_rng, real_gaussian, unit_vector, TrialRng};
use crate::schatten::{schatten_norm, schatten_norm_compensated, SchattenOrder};

/// Instance families for [`random_instance`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Ensemble {
    /// Standard complex Gaussian entries.
    GeneralComplex,
    /// Standard real Gaussian entries.
    Real,
    /// The assembled matrix is `G*G` for a square Ginibre `G`.
    #[serde(rename = "psd-gram")]
    PsdGram,
    /// Square diagonal blocks with entries uniform on `[0, 1)`.
    DiagonalBlocks,
    /// Real `1 x 1` blocks.
    ScalarBlocks,
    /// Blocks `α_k u_k v_k*`.
    Rank1Blocks,
    /// Two block rows `a_k X` over `b_k Y`.
    ProportionalRows,
    /// Two block rows whose compression has rank one: `‖B_k‖_p = c ‖A_k‖_p`.
    Rank1Compression,
}

impl Ensemble {
    pub const ALL: [Ensemble; 8] = [
        Ensemble::GeneralComplex,
        Ensemble::Real,
        Ensemble::PsdGram,
        Ensemble::DiagonalBlocks,
        Ensemble::ScalarBlocks,
        Ensemble::Rank1Blocks,
        Ensemble::ProportionalRows,
        Ensemble::Rank1Compression,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Ensemble::GeneralComplex => "general-complex",
            Ensemble::Real => "real",
            Ensemble::PsdGram => "psd-gram",
            Ensemble::DiagonalBlocks => "diagonal-blocks",
            Ensemble::ScalarBlocks => "scalar-blocks",
            Ensemble::Rank1Blocks => "rank1-blocks",
            Ensemble::ProportionalRows => "proportional-rows",
            Ensemble::Rank1Compression => "rank1-compression",
        }
    }

    fn is_complex(self) -> bool {
        matches!(
            self,
            Ensemble::GeneralComplex
                | Ensemble::PsdGram
                | Ensemble::Rank1Blocks
                | Ensemble::ProportionalRows
                | Ensemble::Rank1Compression
        )
    }
}

impl fmt::Display for Ensemble {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Ensemble {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim().to_ascii_lowercase();
        Ensemble::ALL
            .into_iter()
            .find(|e| e.name() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown ensemble '{s}'")))
    }
}

/// Grid size and block size.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Shape {
    pub block_rows: usize,
    pub block_cols: usize,
    pub block_height: usize,
    pub block_width: usize,
}

impl Shape {
    pub fn new(block_rows: usize, block_cols: usize, block_height: usize, block_width: usize) -> Self {
        Shape {
            block_rows,
            block_cols,
            block_height,
            block_width,
        }
    }

    pub fn scalar(block_rows: usize, block_cols: usize) -> Self {
        Shape::new(block_rows, block_cols, 1, 1)
    }
}

impl fmt::Display for Shape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}x{}:{}x{}",
            self.block_rows, self.block_cols, self.block_height, self.block_width
        )
    }
}

/// `MxN` (scalar blocks), `MxN:d` (square `d x d` blocks) or `MxN:hxw`.
impl FromStr for Shape {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidArgument(format!("shape '{s}' is not MxN, MxN:d or MxN:hxw"));
        let pair = |t: &str| -> Result<(usize, usize)> {
            let (a, b) = t.split_once(['x', 'X']).ok_or_else(bad)?;
            Ok((
                a.trim().parse().map_err(|_| bad())?,
                b.trim().parse().map_err(|_| bad())?,
            ))
        };
        let (grid, block) = match s.split_once(':') {
            Some((g, b)) => (g, Some(b)),
            None => (s, None),
        };
        let (m, n) = pair(grid)?;
        let (h, w) = match block {
            None => (1, 1),
            Some(b) if b.contains(['x', 'X']) => pair(b)?,
            Some(b) => {
                let d = b.trim().parse().map_err(|_| bad())?;
                (d, d)
            }
        };
        Ok(Shape::new(m, n, h, w))
    }
}

/// How instances are drawn before refinement.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Seeding {
    /// Plain ensemble sampling.
    #[default]
    Random,
    /// Diagonal blocks `diag(C(ε)_ij, s·A_ij, 0, …)` with `A_11 = 1`, small
    /// random `A` elsewhere and zeros of `A` where `C(ε)` has `ε`.
    CMatrix,
}

impl FromStr for Seeding {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "random" => Ok(Seeding::Random),
            "c-matrix" => Ok(Seeding::CMatrix),
            other => Err(Error::InvalidArgument(format!("unknown seeding '{other}'"))),
        }
    }
}

pub const DEFAULT_REFINE_STEPS: usize = 500;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SearchConfig {
    pub ensemble: Ensemble,
    pub shape: Shape,
    pub p_grid: Vec<SchattenOrder>,
    pub trials: u64,
    pub seed: u64,
    #[serde(default = "default_refine_steps")]
    pub refine_steps: usize,
    #[serde(default)]
    pub seeding: Seeding,
}

fn default_refine_steps() -> usize {
    DEFAULT_REFINE_STEPS
}

impl SearchConfig {
    pub fn new(ensemble: Ensemble, shape: Shape, p_grid: Vec<SchattenOrder>, trials: u64, seed: u64) -> Self {
        SearchConfig {
            ensemble,
            shape,
            p_grid,
            trials,
            seed,
            refine_steps: DEFAULT_REFINE_STEPS,
            seeding: Seeding::Random,
        }
    }

    pub fn with_refine_steps(mut self, steps: usize) -> Self {
        self.refine_steps = steps;
        self
    }

    pub fn with_seeding(mut self, seeding: Seeding) -> Self {
        self.seeding = seeding;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidArgument(msg));
        let s = self.shape;
        if self.trials == 0 {
            return bad("trials must be at least 1".into());
        }
        if self.p_grid.is_empty() {
            return bad("p grid is empty".into());
        }
        if s.block_rows == 0 || s.block_cols == 0 || s.block_height == 0 || s.block_width == 0 {
            return bad(format!("shape {s} has a zero dimension"));
        }
        match self.ensemble {
            Ensemble::ScalarBlocks if (s.block_height, s.block_width) != (1, 1) => {
                return bad(format!("scalar-blocks needs 1x1 blocks, got {s}"));
            }
            Ensemble::DiagonalBlocks if s.block_height != s.block_width => {
                return bad(format!("diagonal-blocks needs square blocks, got {s}"));
            }
            Ensemble::PsdGram if s.block_rows * s.block_height != s.block_cols * s.block_width => {
                return bad(format!("psd-gram needs a square assembled matrix, got {s}"));
            }
            Ensemble::ProportionalRows | Ensemble::Rank1Compression if s.block_rows != 2 => {
                return bad(format!("{} needs 2 block rows, got {s}", self.ensemble));
            }
            _ => {}
        }
        if self.seeding == Seeding::CMatrix
            && (self.ensemble != Ensemble::DiagonalBlocks
                || (s.block_rows, s.block_cols) != (3, 3)
                || s.block_height < 2)
        {
            return bad(format!(
                "c-matrix seeding needs 3x3 diagonal blocks of size >= 2, got {} {s}",
                self.ensemble
            ));
        }
        Ok(())
    }
}

fn blocks_from_fn<F: FnMut(usize, usize) -> DenseMatrix>(s: Shape, mut f: F) -> BlockMatrix {
    let blocks = (0..s.block_rows)
        .map(|i| (0..s.block_cols).map(|j| f(i, j)).collect())
        .collect();
    BlockMatrix::new(blocks).expect("uniform block sizes")
}

fn split_blocks(flat: &DenseMatrix, s: Shape) -> BlockMatrix {
    blocks_from_fn(s, |i, j| {
        flat.sub_matrix(i * s.block_height, j * s.block_width, s.block_height, s.block_width)
    })
}

fn c_matrix_seed(rng: &mut TrialRng, d: usize) -> BlockMatrix {
    let eps = 10f64.powf(rng.random_range(-4.0..-2.0));
    let s = rng.random_range(1e-3..3e-2);
    let c = c_matrix(eps);
    let pattern = c_matrix(0.0);
    let mut a = [[0.0; 3]; 3];
    for (i, row) in a.iter_mut().enumerate() {
        for (j, x) in row.iter_mut().enumerate() {
            // C(ε) has ε exactly where C(0) vanishes
            if pattern.re(i, j) != 0.0 {
                *x = rng.random_range(0.0..0.1);
            }
        }
    }
    a[0][0] = 1.0;
    blocks_from_fn(Shape::new(3, 3, d, d), |i, j| {
        let mut diag = vec![0.0; d];
        diag[0] = c.re(i, j);
        diag[1] = s * a[i][j];
        DenseMatrix::diag(&diag)
    })
}

/// Trial `trial_index` of `config`, drawn for the first exponent of the grid.
pub fn random_instance(config: &SearchConfig, trial_index: u64) -> Result<BlockMatrix> {
    let p = *config
        .p_grid
        .first()
        .ok_or_else(|| Error::InvalidArgument("p grid is empty".into()))?;
    random_instance_for(config, trial_index, p)
}

/// As [`random_instance`]; only the rank-1-compression ensemble depends on `p`.
pub fn random_instance_for(config: &SearchConfig, trial_index: u64, p: SchattenOrder) -> Result<BlockMatrix> {
    config.validate()?;
    if trial_index >= config.trials {
        return Err(Error::InvalidArgument(format!(
            "trial index {trial_index} out of range for {} trials",
            config.trials
        )));
    }
    let s = config.shape;
    let (h, w) = (s.block_height, s.block_width);
    let mut rng = keyed_rng(config.seed, trial_index);
    let rng = &mut rng;
    if config.seeding == Seeding::CMatrix {
        return Ok(c_matrix_seed(rng, h));
    }
    let t = match config.ensemble {
        Ensemble::GeneralComplex => blocks_from_fn(s, |_, _| ginibre(rng, h, w)),
        Ensemble::Real | Ensemble::ScalarBlocks => blocks_from_fn(s, |_, _| real_gaussian(rng, h, w)),
        Ensemble::PsdGram => {
            let n = s.block_rows * h;
            let g = ginibre(rng, n, n);
            split_blocks(&crate::rng::hermitize(&(&g.adjoint() * &g)), s)
        }
        Ensemble::DiagonalBlocks => blocks_from_fn(s, |_, _| {
            let d: Vec<f64> = (0..h).map(|_| rng.random::<f64>()).collect();
            DenseMatrix::diag(&d)
        }),
        Ensemble::Rank1Blocks => blocks_from_fn(s, |_, _| {
            let alpha = complex_gaussian(rng);
            let u = unit_vector(rng, h);
            let v = unit_vector(rng, w);
            (&u * &v.adjoint()).scale_complex(alpha)
        }),
        Ensemble::ProportionalRows => {
            let x = ginibre(rng, h, w);
            let y = ginibre(rng, h, w);
            let coef: Vec<[Complex64; 2]> = (0..s.block_cols)
                .map(|_| [complex_gaussian(rng), complex_gaussian(rng)])
                .collect();
            blocks_from_fn(s, |i, k| if i == 0 { &x } else { &y }.scale_complex(coef[k][i]))
        }
        Ensemble::Rank1Compression => {
            let c = gaussian(rng).abs() + 0.1;
            let t = blocks_from_fn(s, |_, _| ginibre(rng, h, w));
            let mut ratios = Vec::with_capacity(s.block_cols);
            for k in 0..s.block_cols {
                let na = schatten_norm(t.block(0, k), p)?;
                let nb = schatten_norm(t.block(1, k), p)?;
                ratios.push(c * na / nb);
            }
            t.map_blocks(|i, k, b| if i == 0 { b.clone() } else { b.scale(ratios[k]) })?
        }
    };
    Ok(t)
}

/// A refined, re-verified violation of the compression inequality.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ViolationCertificate {
    pub config: SearchConfig,
    pub trial_index: u64,
    pub p: SchattenOrder,
    pub instance: BlockMatrix,
    pub lhs: f64,
    pub rhs: f64,
    pub margin: f64,
    /// Margin recomputed with compensated summation.
    pub compensated_margin: f64,
}

impl ViolationCertificate {
    pub fn scale(&self) -> f64 {
        1f64.max(self.lhs.abs()).max(self.rhs.abs())
    }

    /// Re-runs [`check_nci`] on the stored instance.
    pub fn reverify(&self, tol: f64) -> Result<IneqReport> {
        check_nci(&self.instance, self.p, tol)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("certificate serializes")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

/// Certification threshold on the compensated margin, relative to scale.
pub const CERTIFY_TOL: f64 = 1e-8;

const REFINE_KEY: u64 = 0x5851_f42d_4c95_7f2d;
const INITIAL_STEP: f64 = 1e-2;
const PATIENCE: usize = 20;

#[derive(Clone, Copy)]
enum Perturbation {
    /// Every entry by its own factor.
    Entry { complex: bool },
    /// Every block by one factor.
    Block,
    /// Both blocks of a grid column by one factor.
    Column,
}

fn perturbation(e: Ensemble) -> Perturbation {
    match e {
        Ensemble::Rank1Blocks | Ensemble::ProportionalRows => Perturbation::Block,
        Ensemble::Rank1Compression => Perturbation::Column,
        Ensemble::PsdGram => Perturbation::Entry { complex: true },
        other => Perturbation::Entry {
            complex: other.is_complex(),
        },
    }
}

fn factor(rng: &mut TrialRng, delta: f64, complex: bool) -> Complex64 {
    if complex {
        Complex64::new(1.0, 0.0) + complex_gaussian(rng) * delta
    } else {
        Complex64::new(1.0 + delta * gaussian(rng), 0.0)
    }
}

fn perturb(t: &BlockMatrix, kind: Perturbation, delta: f64, rng: &mut TrialRng) -> Result<BlockMatrix> {
    let n = t.block_cols();
    let out = match kind {
        Perturbation::Entry { complex } => t.map_blocks(|_, _, b| b.map(|z| z * factor(rng, delta, complex)))?,
        Perturbation::Block => t.map_blocks(|_, _, b| b.scale_complex(factor(rng, delta, true)))?,
        Perturbation::Column => {
            let f: Vec<Complex64> = (0..n).map(|_| factor(rng, delta, false)).collect();
            t.map_blocks(|_, k, b| b.scale_complex(f[k]))?
        }
    };
    Ok(out)
}

fn frobenius(t: &BlockMatrix) -> f64 {
    assemble(t).frobenius_norm()
}

/// Result of a hill-climb: the final instance, its report, and the accepted
/// margins in order.
#[derive(Clone, Debug)]
pub struct Refinement {
    pub instance: BlockMatrix,
    pub report: IneqReport,
    pub accepted: Vec<f64>,
}

/// Hill-climbs `−margin` at fixed Frobenius norm. A step is kept only if it
/// strictly lowers the margin; the step size halves after 20 rejections.
pub fn refine(
    t: &BlockMatrix,
    p: SchattenOrder,
    ensemble: Ensemble,
    steps: usize,
    tol: f64,
    rng: &mut TrialRng,
) -> Result<Refinement> {
    let kind = perturbation(ensemble);
    let target = frobenius(t);
    let mut best = t.clone();
    let mut report = check_nci(&best, p, tol)?;
    let mut accepted = vec![report.margin];
    let mut delta = INITIAL_STEP;
    let mut rejections = 0;
    for _ in 0..steps {
        let cand = perturb(&best, kind, delta, rng)?;
        let norm = frobenius(&cand);
        if !(norm > 0.0) {
            continue;
        }
        let cand = cand.map_blocks(|_, _, b| b.scale(target / norm))?;
        let rep = check_nci(&cand, p, tol)?;
        if rep.margin < report.margin {
            best = cand;
            report = rep;
            accepted.push(report.margin);
            rejections = 0;
        } else {
            rejections += 1;
            if rejections == PATIENCE {
                delta *= 0.5;
                rejections = 0;
            }
        }
    }
    Ok(Refinement {
        instance: best,
        report,
        accepted,
    })
}

/// `(lhs, rhs, margin)` with compensated summation throughout.
pub fn compensated_margin(t: &BlockMatrix, p: SchattenOrder) -> Result<(f64, f64, f64)> {
    let lhs = schatten_norm_compensated(&assemble(t), p)?;
    let rhs = schatten_norm_compensated(&compress_compensated(t, p)?.values, p)?;
    let rep = IneqReport::evaluate(
        "nci",
        p,
        lhs,
        rhs,
        crate::ineq::nci_direction(p),
        0.0,
        Scope::Conjecture,
    );
    Ok((lhs, rhs, rep.margin))
}

fn search_trial(config: &SearchConfig, idx: u64, tol: f64) -> Result<Vec<ViolationCertificate>> {
    let mut found = Vec::new();
    let p_aware = config.ensemble == Ensemble::Rank1Compression;
    let shared = if p_aware {
        None
    } else {
        Some(random_instance(config, idx)?)
    };
    for (k, &p) in config.p_grid.iter().enumerate() {
        let t = match &shared {
            Some(t) => t.clone(),
            None => random_instance_for(config, idx, p)?,
        };
        let raw = check_nci(&t, p, tol)?;
        if raw.satisfied {
            continue;
        }
        let stream = idx.wrapping_mul(config.p_grid.len() as u64).wrapping_add(k as u64);
        let mut rng = keyed_rng(config.seed ^ REFINE_KEY, stream);
        let refined = refine(&t, p, config.ensemble, config.refine_steps, tol, &mut rng)?;
        let (_, _, cmargin) = compensated_margin(&refined.instance, p)?;
        let rep = refined.report;
        let threshold = tol.max(CERTIFY_TOL) * rep.scale();
        if rep.margin < -threshold && cmargin < -threshold {
            found.push(ViolationCertificate {
                config: config.clone(),
                trial_index: idx,
                p,
                instance: refined.instance,
                lhs: rep.lhs,
                rhs: rep.rhs,
                margin: rep.margin,
                compensated_margin: cmargin,
            });
        }
    }
    Ok(found)
}

/// Checks every trial at every exponent of the grid; raw violations are
/// refined, re-verified, and returned most negative margin first.
pub fn search_violations(config: &SearchConfig, tol: f64) -> Result<Vec<ViolationCertificate>> {
    config.validate()?;
    let per_trial: Vec<Result<Vec<ViolationCertificate>>> = (0..config.trials)
        .into_par_iter()
        .map(|i| search_trial(config, i, tol))
        .collect();
    let mut all = Vec::new();
    for r in per_trial {
        all.extend(r?);
    }
    all.sort_by(|a, b| {
        a.margin
            .total_cmp(&b.margin)
            .then(a.trial_index.cmp(&b.trial_index))
            .then(a.p.value().total_cmp(&b.p.value()))
    });
    Ok(all)
}

/// Prescribed block norms for the variational probe.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VariationalConfig {
    pub q_vals: Vec<f64>,
    pub r_vals: Vec<f64>,
    pub q: SchattenOrder,
    pub block_dim: usize,
    pub trials: u64,
    pub seed: u64,
    #[serde(default = "default_refine_steps")]
    pub refine_steps: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct VariationalProbe {
    /// Empirical extremum of `‖Q + R‖_q` against the closed form.
    pub report: IneqReport,
    pub trials: u64,
    /// Trial that produced the extremum.
    pub best_trial: u64,
    /// Factor ranks of `Q` and `R` in that trial.
    pub best_ranks: (usize, usize),
}

/// `‖[[Σq_k, Σ√(q_k r_k)], [Σ√(q_k r_k), Σr_k]]‖_q`.
pub fn variational_closed_form(q_vals: &[f64], r_vals: &[f64], q: SchattenOrder) -> Result<f64> {
    let sq: f64 = q_vals.iter().sum();
    let sr: f64 = r_vals.iter().sum();
    let sx: f64 = q_vals.iter().zip(r_vals).map(|(a, b)| (a * b).sqrt()).sum();
    schatten_norm(&DenseMatrix::from_real_rows(&[[sq, sx], [sx, sr]])?, q)
}

/// `F` with column block `k` rescaled so that `‖F_k* F_k‖_q = targets[k]`.
fn normalize_factor(f: &DenseMatrix, targets: &[f64], d: usize, q: SchattenOrder) -> Result<DenseMatrix> {
    let mut out = f.clone();
    for (k, &tk) in targets.iter().enumerate() {
        let fk = f.sub_matrix(0, k * d, f.rows(), d);
        let n = schatten_norm(&(&fk.adjoint() * &fk), q)?;
        let c = if tk == 0.0 || n == 0.0 { 0.0 } else { (tk / n).sqrt() };
        for i in 0..f.rows() {
            for j in 0..d {
                out.set(i, k * d + j, fk.get(i, j) * c);
            }
        }
    }
    Ok(out)
}

struct VariationalState {
    f: DenseMatrix,
    g: DenseMatrix,
    value: f64,
}

fn variational_value(f: &DenseMatrix, g: &DenseMatrix, q: SchattenOrder) -> Result<f64> {
    let sum = &(&f.adjoint() * f) + &(&g.adjoint() * g);
    schatten_norm(&sum, q)
}

/// Random PSD `Q = F*F`, `R = G*G` with the prescribed diagonal-block norms,
/// hill-climbed towards the extremum of `‖Q + R‖_q` (maximum for `q ≥ 1`,
/// minimum below). Half of the trials use factors of rank `d`, the form the
/// extremizers take.
pub fn probe_variational(config: &VariationalConfig) -> Result<VariationalProbe> {
    let VariationalConfig {
        q_vals,
        r_vals,
        q,
        block_dim: d,
        trials,
        seed,
        refine_steps,
    } = config;
    let (q, d, trials) = (*q, *d, *trials);
    if q.value() < 0.5 {
        return Err(Error::InvalidArgument(format!(
            "variational probe needs q >= 0.5, got {q}"
        )));
    }
    if q_vals.is_empty() || q_vals.len() != r_vals.len() {
        return Err(Error::InvalidArgument(
            "q_vals and r_vals must be non-empty and of equal length".into(),
        ));
    }
    if q_vals.iter().chain(r_vals).any(|&x| !(x >= 0.0) || !x.is_finite()) {
        return Err(Error::InvalidArgument(
            "prescribed norms must be finite and non-negative".into(),
        ));
    }
    if d == 0 || trials == 0 {
        return Err(Error::InvalidArgument("block_dim and trials must be at least 1".into()));
    }
    let maximize = q.value() >= 1.0;
    let better = |a: f64, b: f64| if maximize { a > b } else { a < b };
    let width = q_vals.len() * d;
    let run = |i: u64| -> Result<(u64, (usize, usize), f64)> {
        let mut rng = keyed_rng(*seed, i);
        let rank = |rng: &mut TrialRng| {
            if rng.random::<bool>() {
                d
            } else {
                rng.random_range(1..=width)
            }
        };
        let (kq, kr) = (rank(&mut rng), rank(&mut rng));
        let f = normalize_factor(&ginibre(&mut rng, kq, width), q_vals, d, q)?;
        let g = normalize_factor(&ginibre(&mut rng, kr, width), r_vals, d, q)?;
        let value = variational_value(&f, &g, q)?;
        let mut st = VariationalState { f, g, value };
        let mut delta = INITIAL_STEP * 10.0;
        let mut rejections = 0;
        for _ in 0..*refine_steps {
            let jitter = |m: &DenseMatrix, rng: &mut TrialRng| {
                let s = m.frobenius_norm() / ((m.rows() * m.cols()) as f64).sqrt();
                m + &ginibre(rng, m.rows(), m.cols()).scale(delta * s)
            };
            let f = normalize_factor(&jitter(&st.f, &mut rng), q_vals, d, q)?;
            let g = normalize_factor(&jitter(&st.g, &mut rng), r_vals, d, q)?;
            let value = variational_value(&f, &g, q)?;
            if better(value, st.value) {
                st = VariationalState { f, g, value };
                rejections = 0;
            } else {
                rejections += 1;
                if rejections == PATIENCE {
                    delta *= 0.5;
                    rejections = 0;
                }
            }
        }
        Ok((i, (kq, kr), st.value))
    };
    let results: Vec<Result<(u64, (usize, usize), f64)>> = (0..trials).into_par_iter().map(run).collect();
    let mut best: Option<(u64, (usize, usize), f64)> = None;
    for r in results {
        let r = r?;
        if best.as_ref().is_none_or(|b| better(r.2, b.2)) {
            best = Some(r);
        }
    }
    let (best_trial, best_ranks, lhs) = best.expect("trials >= 1");
    let rhs = variational_closed_form(q_vals, r_vals, q)?;
    let direction = if maximize {
        Direction::LhsLeRhs
    } else {
        Direction::LhsGeRhs
    };
    let scope = if d == 1 { Scope::Proven } else { Scope::Conjecture };
    let report = IneqReport::evaluate("variational", q, lhs, rhs, direction, crate::DEFAULT_TOL, scope);
    Ok(VariationalProbe {
        report,
        trials,
        best_trial,
        best_ranks,
    })
}

/// Fixed instances with published reference numbers.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ReproCase {
    #[serde(rename = "counterexample-4x4")]
    Counterexample4x4,
    Duality,
    #[serde(rename = "limit-0p11669")]
    Limit0p11669,
    HannerReduction,
    GpNonconvex,
}

impl ReproCase {
    pub const ALL: [ReproCase; 5] = [
        ReproCase::Counterexample4x4,
        ReproCase::Duality,
        ReproCase::Limit0p11669,
        ReproCase::HannerReduction,
        ReproCase::GpNonconvex,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ReproCase::Counterexample4x4 => "counterexample-4x4",
            ReproCase::Duality => "duality",
            ReproCase::Limit0p11669 => "limit-0p11669",
            ReproCase::HannerReduction => "hanner-reduction",
            ReproCase::GpNonconvex => "gp-nonconvex",
        }
    }
}

impl fmt::Display for ReproCase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ReproCase {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ReproCase::ALL
            .into_iter()
            .find(|c| c.name() == s.trim())
            .ok_or_else(|| Error::InvalidArgument(format!("unknown repro case '{s}'")))
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ReproReport {
    pub case: ReproCase,
    /// The instance exhibits a violation of the inequality under study.
    pub violation: bool,
    pub quantities: BTreeMap<String, f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub report: Option<IneqReport>,
}

/// The 4x4 positive semidefinite matrix whose entrywise absolute value has a
/// larger 1.5-norm.
pub fn counterexample_4x4() -> DenseMatrix {
    DenseMatrix::from_real_rows(&[
        [3.0, 0.0, -2.0, -2.0],
        [0.0, 3.0, 2.0, -1.0],
        [-2.0, 2.0, 4.0, 0.0],
        [-2.0, -1.0, 0.0, 3.0],
    ])
    .expect("finite")
}

/// `[[1, 2], [−0.1, 1]]`, scalar blocks.
pub fn duality_instance() -> DenseMatrix {
    DenseMatrix::from_real_rows(&[[1.0, 2.0], [-0.1, 1.0]]).expect("finite")
}

const GP_PROBE_TRIALS: u64 = 10_000;

pub fn repro(case: ReproCase) -> Result<ReproReport> {
    let p15 = SchattenOrder::new(1.5)?;
    let mut q = BTreeMap::new();
    let (violation, report) = match case {
        ReproCase::Counterexample4x4 => {
            let t = BlockMatrix::scalar_blocks(&counterexample_4x4());
            let rep = check_nci(&t, p15, crate::DEFAULT_TOL)?;
            q.insert("lhs".into(), rep.lhs);
            q.insert("rhs".into(), rep.rhs);
            q.insert("margin".into(), rep.margin);
            (!rep.satisfied, Some(rep))
        }
        ReproCase::Duality => {
            let rt = duality_roundtrip(&BlockMatrix::scalar_blocks(&duality_instance()), p15)?;
            for i in 0..2 {
                for j in 0..2 {
                    q.insert(format!("x_hat_{}{}", i + 1, j + 1), rt.x_hat.re(i, j));
                    q.insert(format!("y_{}{}", i + 1, j + 1), rt.y.block(i, j).re(0, 0));
                }
            }
            q.insert("x_hat_norm".into(), rt.x_hat_norm);
            q.insert("y_norm".into(), rt.y_norm);
            q.insert("tr_t_y".into(), rt.rhs_value);
            q.insert("tr_t_xhat".into(), rt.tr_t_xhat.expect("scalar blocks"));
            q.insert("norm_t".into(), rt.lhs_value);
            let rep = check_nci(
                &BlockMatrix::scalar_blocks(&duality_instance()),
                p15,
                crate::DEFAULT_TOL,
            )?;
            (!rep.satisfied, Some(rep))
        }
        ReproCase::Limit0p11669 => {
            let study = epsilon_limit_study(p15, &default_schedule())?;
            q.insert("entry11".into(), study.last_entry());
            q.insert("epsilon".into(), *study.epsilons.last().expect("non-empty"));
            q.insert("stabilized".into(), if study.stabilized { 1.0 } else { 0.0 });
            let at_zero = zero_entry_values(&c_matrix(0.0), p15)?;
            let e11 = at_zero
                .iter()
                .find(|(pos, _)| *pos == (0, 0))
                .map(|&(_, v)| v)
                .expect("zero at (1,1)");
            q.insert("entry11_at_zero".into(), e11);
            (false, None)
        }
        ReproCase::HannerReduction => {
            let mut rng = keyed_rng(0, 0);
            let a = ginibre(&mut rng, 2, 2);
            let b = ginibre(&mut rng, 2, 2);
            let h = hanner_from_nci(&a, &b, p15)?;
            q.insert("conjugation_residual".into(), h.conjugation_residual);
            q.insert("lhs_gap".into(), h.lhs_gap);
            q.insert("rhs_gap".into(), h.rhs_gap);
            q.insert("identity_holds".into(), if h.identity_holds { 1.0 } else { 0.0 });
            (!h.identity_holds || !h.nci.satisfied, Some(h.nci))
        }
        ReproCase::GpNonconvex => {
            let probe = g_p_nonconvexity_probe(SchattenOrder::new(0.5)?, GP_PROBE_TRIALS, 0)?;
            if let Some(c) = &probe.superadditive {
                q.insert("superadditive_gap".into(), c.gap);
            }
            if let Some(c) = &probe.subadditive {
                q.insert("subadditive_gap".into(), c.gap);
            }
            (probe.superadditive.is_some() || probe.subadditive.is_some(), None)
        }
    };
    Ok(ReproReport {
        case,
        violation,
        quantities: q,
        report,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schatten::singular_values;

    fn p(v: f64) -> SchattenOrder {
        SchattenOrder::new(v).unwrap()
    }

    fn cfg(e: Ensemble, s: &str) -> SearchConfig {
        SearchConfig::new(e, s.parse().unwrap(), vec![p(1.5)], 10, 7)
    }

    #[test]
    fn shape_parsing() {
        assert_eq!("3x3".parse::<Shape>().unwrap(), Shape::scalar(3, 3));
        assert_eq!("2x4:3".parse::<Shape>().unwrap(), Shape::new(2, 4, 3, 3));
        assert_eq!("2x4:3x2".parse::<Shape>().unwrap(), Shape::new(2, 4, 3, 2));
        assert!("2by4".parse::<Shape>().is_err());
        let s = Shape::new(2, 3, 1, 2);
        assert_eq!(s.to_string().parse::<Shape>().unwrap(), s);
    }

    #[test]
    fn ensemble_names_roundtrip() {
        for e in Ensemble::ALL {
            assert_eq!(e.name().parse::<Ensemble>().unwrap(), e);
            assert_eq!(serde_json::to_value(e).unwrap(), e.name());
        }
    }

    #[test]
    fn config_validation() {
        assert!(cfg(Ensemble::ScalarBlocks, "3x3:2").validate().is_err());
        assert!(cfg(Ensemble::DiagonalBlocks, "3x3:2x1").validate().is_err());
        assert!(cfg(Ensemble::PsdGram, "2x3").validate().is_err());
        assert!(cfg(Ensemble::ProportionalRows, "3x3").validate().is_err());
        let mut c = cfg(Ensemble::Real, "2x2");
        c.trials = 0;
        assert!(matches!(c.validate(), Err(Error::InvalidArgument(_))));
        c.trials = 1;
        c.p_grid.clear();
        assert!(c.validate().is_err());
        assert!(cfg(Ensemble::Real, "3x3:2")
            .with_seeding(Seeding::CMatrix)
            .validate()
            .is_err());
        assert!(cfg(Ensemble::DiagonalBlocks, "3x3:2")
            .with_seeding(Seeding::CMatrix)
            .validate()
            .is_ok());
    }

    #[test]
    fn instances_are_deterministic() {
        for e in Ensemble::ALL {
            let shape = match e {
                Ensemble::ScalarBlocks => "2x3",
                Ensemble::DiagonalBlocks | Ensemble::PsdGram => "2x2:2",
                _ => "2x3:2x3",
            };
            let c = cfg(e, shape);
            assert_eq!(random_instance(&c, 3).unwrap(), random_instance(&c, 3).unwrap());
            assert_ne!(random_instance(&c, 3).unwrap(), random_instance(&c, 4).unwrap());
        }
        assert!(random_instance(&cfg(Ensemble::Real, "2x2"), 10).is_err());
    }

    #[test]
    fn structured_ensembles() {
        let r1 = random_instance(&cfg(Ensemble::Rank1Blocks, "2x3:3x2"), 0).unwrap();
        for row in r1.blocks() {
            for b in row {
                let s = singular_values(b).unwrap();
                assert!(s[1] <= 1e-12 * s[0]);
            }
        }
        let d = random_instance(&cfg(Ensemble::DiagonalBlocks, "3x3:2"), 0).unwrap();
        assert_eq!(crate::blockmat::diagonal_block_reduction(&d).unwrap().len(), 2);
        let g = random_instance(&cfg(Ensemble::PsdGram, "2x2:2"), 0).unwrap();
        assert!(crate::schatten::is_psd(&assemble(&g), 1e-9).unwrap());
        let c = cfg(Ensemble::Rank1Compression, "2x3:2");
        let t = random_instance_for(&c, 0, p(3.0)).unwrap();
        let comp = crate::compress(&t, p(3.0)).unwrap().values;
        let s = singular_values(&comp).unwrap();
        assert!(s[1] <= 1e-12 * s[0]);
    }

    #[test]
    fn c_matrix_seed_keeps_zero_pattern() {
        let c = cfg(Ensemble::DiagonalBlocks, "3x3:2").with_seeding(Seeding::CMatrix);
        let t = random_instance(&c, 0).unwrap();
        assert!(t.block(0, 0).re(1, 1) > 0.0);
        for (i, j) in [(0, 2), (1, 1), (2, 0)] {
            assert_eq!(t.block(i, j).re(1, 1), 0.0);
            assert!(t.block(i, j).re(0, 0) < 1e-2);
        }
    }

    #[test]
    fn refinement_is_monotone() {
        let c = cfg(Ensemble::ScalarBlocks, "3x3");
        let t = random_instance(&c, 0).unwrap();
        let mut rng = keyed_rng(1, 1);
        let r = refine(&t, p(1.5), Ensemble::ScalarBlocks, 200, 1e-9, &mut rng).unwrap();
        assert!(r.accepted.windows(2).all(|w| w[1] < w[0]));
        assert!((frobenius(&r.instance) - frobenius(&t)).abs() < 1e-9 * frobenius(&t));
    }

    #[test]
    fn closed_form_single_block() {
        let v = variational_closed_form(&[2.0], &[3.0], p(2.0)).unwrap();
        assert!((v - 5.0).abs() < 1e-12);
    }

    #[test]
    fn repro_case_names() {
        for c in ReproCase::ALL {
            assert_eq!(c.name().parse::<ReproCase>().unwrap(), c);
        }
        assert!(matches!("nope".parse::<ReproCase>(), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn repro_counterexample() {
        let r = repro(ReproCase::Counterexample4x4).unwrap();
        assert!(r.violation);
        assert!((r.quantities["lhs"] - 9.49929).abs() < 1e-4);
        assert!((r.quantities["rhs"] - 9.63184).abs() < 1e-4);
    }
}
