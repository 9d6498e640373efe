//! `ncilab`: command-line front end for the checkers, the counterexample
//! search and the reproduction cases.
//!
//! Exit codes: 0 when the computation succeeded and any checked inequality
//! holds, 2 when a violation was found (the report is still written), 1 on
//! usage or input errors.

mod output;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use ncilab::analysis::{check_ac, default_schedule, epsilon_limit_study, g_p, g_p_frechet, g_p_nonconvexity_probe};
use ncilab::blockmat::{compress, BlockMatrix};
use ncilab::ineq::{check_cauchy_schwarz_chain, check_nci, check_nci_gram, check_psd_nci, hanner_from_nci, UiNorm};
use ncilab::schatten::{singular_values, SchattenOrder};
use ncilab::search::{
    probe_variational, repro, search_violations, Ensemble, ReproCase, SearchConfig, Seeding, Shape, VariationalConfig,
    DEFAULT_REFINE_STEPS,
};
use ncilab::{DenseMatrix, Error, DEFAULT_TOL};

#[derive(Parser, Debug)]
#[command(
    name = "ncilab",
    version,
    about = "Schatten-norm compression inequalities on block matrices"
)]
struct Cli {
    /// Report format.
    #[arg(long, value_enum, default_value_t = Format::Json, global = true)]
    format: Format,
    /// Write the report here instead of stdout.
    #[arg(long, global = true)]
    output: Option<PathBuf>,
    /// Worker threads for search and probe.
    #[arg(long, env = "NCILAB_JOBS", global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Format {
    Json,
    Table,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Schatten (or Ky Fan) norm of a matrix or an assembled block matrix.
    Norm {
        #[arg(long)]
        p: Option<SchattenOrder>,
        /// Ky Fan index instead of a Schatten exponent.
        #[arg(long, conflicts_with = "p")]
        kyfan: Option<usize>,
        #[arg(long)]
        input: PathBuf,
    },
    /// Matrix of block norms.
    Compress {
        #[arg(long)]
        p: SchattenOrder,
        #[arg(long)]
        input: PathBuf,
    },
    /// Check the compression inequality on a block matrix (a plain matrix is
    /// read as scalar blocks).
    Check(CheckArgs),
    /// The Hanner inequality for A, B and its reduction from the 2x2 block case.
    Hanner {
        #[arg(long)]
        p: SchattenOrder,
        /// A then B.
        #[arg(long, num_args = 1, required = true)]
        input: Vec<PathBuf>,
    },
    /// Directional derivative of g_p against a central difference.
    DerivativeCheck {
        #[arg(long)]
        p: SchattenOrder,
        /// B then Delta.
        #[arg(long, num_args = 1, required = true)]
        input: Vec<PathBuf>,
        #[arg(long, default_value_t = 1e-6)]
        step: f64,
        /// Relative tolerance on the agreement.
        #[arg(long, default_value_t = 1e-5)]
        tol: f64,
    },
    /// The derivative inequality for non-negative A and positive C.
    Ac {
        #[arg(long)]
        p: SchattenOrder,
        /// A then C.
        #[arg(long, num_args = 1, required = true)]
        input: Vec<PathBuf>,
        #[arg(long, default_value_t = DEFAULT_TOL)]
        tol: f64,
    },
    /// Polar-power entry (1,1) of C(eps) along a decreasing schedule.
    LimitStudy {
        #[arg(long, default_value = "1.5")]
        p: SchattenOrder,
        /// Comma-separated, strictly decreasing.
        #[arg(long, value_delimiter = ',')]
        schedule: Option<Vec<f64>>,
    },
    /// Random counterexample search with refinement.
    Search(SearchArgs),
    /// Variational or g_p non-convexity probes.
    Probe(ProbeArgs),
    /// Reproduce a reference case.
    Repro {
        /// counterexample-4x4, duality, limit-0p11669, hanner-reduction or
        /// gp-nonconvex.
        #[arg(value_parser = parse_case)]
        case: ReproCase,
    },
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Checker {
    Nci,
    Gram,
    Psd,
    CauchySchwarz,
}

#[derive(Args, Debug)]
struct CheckArgs {
    /// Schatten exponent (`inf` allowed).
    #[arg(long, required_unless_present = "q")]
    p: Option<SchattenOrder>,
    /// Gram-form exponent, `p = 2q`.
    #[arg(long)]
    q: Option<SchattenOrder>,
    /// Shorthand for `--checker gram`.
    #[arg(long)]
    gram: bool,
    #[arg(long, value_enum, default_value_t = Checker::Nci)]
    checker: Checker,
    /// Block-matrix JSON, or a plain matrix.
    #[arg(long)]
    input: PathBuf,
    #[arg(long, default_value_t = DEFAULT_TOL)]
    tol: f64,
}

#[derive(Args, Debug)]
struct SearchArgs {
    /// general-complex, real, psd-gram, diagonal-blocks, scalar-blocks,
    /// rank1-blocks, proportional-rows or rank1-compression.
    #[arg(long, value_parser = parse_ensemble)]
    ensemble: Ensemble,
    /// `MxN`, `MxN:d` or `MxN:hxw`.
    #[arg(long, value_parser = parse_shape)]
    shape: Shape,
    /// Comma-separated exponent grid.
    #[arg(long, value_delimiter = ',', required = true)]
    p: Vec<SchattenOrder>,
    #[arg(long, default_value_t = 1000)]
    trials: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = DEFAULT_REFINE_STEPS)]
    refine_steps: usize,
    /// random or c-matrix.
    #[arg(long, value_parser = parse_seeding, default_value = "random")]
    seeding: Seeding,
    #[arg(long, default_value_t = DEFAULT_TOL)]
    tol: f64,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ProbeKind {
    Variational,
    GpNonconvex,
}

#[derive(Args, Debug)]
struct ProbeArgs {
    #[arg(long, value_enum, default_value_t = ProbeKind::Variational)]
    kind: ProbeKind,
    /// Exponent of the variational probe.
    #[arg(long)]
    q: Option<SchattenOrder>,
    /// Exponent of the g_p probe.
    #[arg(long)]
    p: Option<SchattenOrder>,
    /// Prescribed norms of the diagonal blocks of Q.
    #[arg(long, value_delimiter = ',')]
    q_vals: Vec<f64>,
    /// Prescribed norms of the diagonal blocks of R.
    #[arg(long, value_delimiter = ',')]
    r_vals: Vec<f64>,
    #[arg(long, default_value_t = 1)]
    block_dim: usize,
    #[arg(long, default_value_t = 1000)]
    trials: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = DEFAULT_REFINE_STEPS)]
    refine_steps: usize,
}

fn parse_ensemble(s: &str) -> Result<Ensemble, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_shape(s: &str) -> Result<Shape, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_seeding(s: &str) -> Result<Seeding, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_case(s: &str) -> Result<ReproCase, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

/// Failure before a report exists.
#[derive(Debug)]
struct CliError(String);

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError(e.to_string())
    }
}

type CliResult<T> = Result<T, CliError>;

/// A report and whether it records a violation.
struct Outcome {
    report: Value,
    violation: bool,
}

impl Outcome {
    fn ok(report: Value) -> Self {
        Outcome {
            report,
            violation: false,
        }
    }
}

fn to_value<T: serde::Serialize>(x: &T) -> Value {
    serde_json::to_value(x).expect("report serializes")
}

fn read_json(path: &Path) -> CliResult<Value> {
    let text = fs::read_to_string(path).map_err(|e| CliError(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError(format!("{}: malformed JSON: {e}", path.display())))
}

fn read_matrix(path: &Path) -> CliResult<DenseMatrix> {
    let v = read_json(path)?;
    serde_json::from_value(v).map_err(|e| CliError(format!("{}: {e}", path.display())))
}

/// A block-matrix document, or a plain matrix read as scalar blocks.
fn read_blocks(path: &Path) -> CliResult<BlockMatrix> {
    let v = read_json(path)?;
    let parsed = if v.get("blocks").is_some() {
        serde_json::from_value::<BlockMatrix>(v)
    } else {
        serde_json::from_value::<DenseMatrix>(v).map(|m| BlockMatrix::scalar_blocks(&m))
    };
    parsed.map_err(|e| CliError(format!("{}: {e}", path.display())))
}

fn two_inputs(inputs: &[PathBuf], what: &str) -> CliResult<(DenseMatrix, DenseMatrix)> {
    match inputs {
        [a, b] => Ok((read_matrix(a)?, read_matrix(b)?)),
        _ => Err(CliError(format!(
            "expected two --input files ({what}), got {}",
            inputs.len()
        ))),
    }
}

fn run(cmd: Command) -> CliResult<Outcome> {
    match cmd {
        Command::Norm { p, kyfan, input } => {
            let t = read_blocks(&input)?;
            let a = ncilab::assemble(&t);
            let norm = match (p, kyfan) {
                (_, Some(k)) => UiNorm::KyFan(k),
                (Some(p), None) => UiNorm::Schatten(p),
                (None, None) => return Err(CliError("one of --p or --kyfan is required".into())),
            };
            let value = norm.eval(&a)?;
            Ok(Outcome::ok(json!({
                "p": to_value(&norm),
                "norm": value,
                "singular_values": singular_values(&a)?,
            })))
        }
        Command::Compress { p, input } => {
            let t = read_blocks(&input)?;
            let c = compress(&t, p)?;
            Ok(Outcome::ok(
                json!({ "p": to_value(&p), "compression": to_value(&c.values) }),
            ))
        }
        Command::Check(args) => {
            let t = read_blocks(&args.input)?;
            let checker = if args.gram { Checker::Gram } else { args.checker };
            let exponent = |want_q: bool| -> CliResult<SchattenOrder> {
                match (args.p, args.q) {
                    (_, Some(q)) if want_q => Ok(q),
                    (Some(p), _) if want_q => Ok(p.half()?),
                    (Some(p), _) => Ok(p),
                    (None, Some(q)) => Ok(SchattenOrder::new(2.0 * q.value())?),
                    (None, None) => Err(CliError("one of --p or --q is required".into())),
                }
            };
            let rep = match checker {
                Checker::Nci => check_nci(&t, exponent(false)?, args.tol)?,
                Checker::Gram => check_nci_gram(&t, exponent(true)?, args.tol)?,
                Checker::Psd => check_psd_nci(&t, exponent(false)?, args.tol)?,
                Checker::CauchySchwarz => check_cauchy_schwarz_chain(&t, exponent(true)?, args.tol)?,
            };
            Ok(Outcome {
                violation: !rep.satisfied,
                report: to_value(&rep),
            })
        }
        Command::Hanner { p, input } => {
            let (a, b) = two_inputs(&input, "A, B")?;
            let h = hanner_from_nci(&a, &b, p)?;
            let violation = !h.hanner.satisfied || !h.identity_holds;
            Ok(Outcome {
                violation,
                report: json!({
                    "hanner": to_value(&h.hanner),
                    "nci": to_value(&h.nci),
                    "conjugation_residual": h.conjugation_residual,
                    "lhs_gap": h.lhs_gap,
                    "rhs_gap": h.rhs_gap,
                    "identity_holds": h.identity_holds,
                }),
            })
        }
        Command::DerivativeCheck { p, input, step, tol } => {
            let (b, d) = two_inputs(&input, "B, Delta")?;
            let analytic = g_p_frechet(&b, &d, p)?;
            let plus = g_p(&(&b + &d.scale(step)), p)?.value;
            let minus = g_p(&(&b - &d.scale(step)), p)?.value;
            let fd = (plus - minus) / (2.0 * step);
            let rel = (analytic - fd).abs() / analytic.abs().max(fd.abs()).max(f64::MIN_POSITIVE);
            Ok(Outcome {
                violation: rel > tol,
                report: json!({
                    "p": to_value(&p),
                    "analytic": analytic,
                    "finite_difference": fd,
                    "step": step,
                    "rel_error": rel,
                    "tol": tol,
                    "agrees": rel <= tol,
                }),
            })
        }
        Command::Ac { p, input, tol } => {
            let (a, c) = two_inputs(&input, "A, C")?;
            let rep = check_ac(&a, &c, p, tol)?;
            Ok(Outcome {
                violation: !rep.satisfied,
                report: to_value(&rep),
            })
        }
        Command::LimitStudy { p, schedule } => {
            let schedule = schedule.unwrap_or_else(default_schedule);
            let study = epsilon_limit_study(p, &schedule)?;
            Ok(Outcome::ok(json!({
                "p": to_value(&p),
                "rows": to_value(&study.rows()),
                "stabilized": study.stabilized,
            })))
        }
        Command::Search(a) => {
            let config = SearchConfig::new(a.ensemble, a.shape, a.p, a.trials, a.seed)
                .with_refine_steps(a.refine_steps)
                .with_seeding(a.seeding);
            let certs = search_violations(&config, a.tol)?;
            Ok(Outcome {
                violation: !certs.is_empty(),
                report: json!({
                    "config": to_value(&config),
                    "count": certs.len(),
                    "certificates": to_value(&certs),
                }),
            })
        }
        Command::Probe(a) => match a.kind {
            ProbeKind::Variational => {
                let q =
                    a.q.ok_or_else(|| CliError("--q is required for the variational probe".into()))?;
                let config = VariationalConfig {
                    q_vals: a.q_vals,
                    r_vals: a.r_vals,
                    q,
                    block_dim: a.block_dim,
                    trials: a.trials,
                    seed: a.seed,
                    refine_steps: a.refine_steps,
                };
                let probe = probe_variational(&config)?;
                Ok(Outcome {
                    violation: !probe.report.satisfied,
                    report: to_value(&probe),
                })
            }
            ProbeKind::GpNonconvex => {
                let p =
                    a.p.ok_or_else(|| CliError("--p is required for the g_p probe".into()))?;
                let probe = g_p_nonconvexity_probe(p, a.trials, a.seed)?;
                let violation = probe.superadditive.is_some() || probe.subadditive.is_some();
                Ok(Outcome {
                    violation,
                    report: to_value(&probe),
                })
            }
        },
        Command::Repro { case } => {
            let r = repro(case)?;
            Ok(Outcome {
                violation: r.violation,
                report: to_value(&r),
            })
        }
    }
}

fn emit(text: &str, path: Option<&Path>) -> CliResult<()> {
    match path {
        Some(p) => fs::write(p, text).map_err(|e| CliError(format!("{}: {e}", p.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    if let Some(n) = cli.jobs {
        if n == 0 {
            eprintln!("error: --jobs must be at least 1");
            return ExitCode::from(1);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    }
    let result = run(cli.command).and_then(|out| {
        let text = match cli.format {
            Format::Json => output::render_json(&out.report),
            Format::Table => output::render_table(&out.report),
        };
        emit(&text, cli.output.as_deref())?;
        Ok(out.violation)
    });
    match result {
        Ok(false) => ExitCode::SUCCESS,
        Ok(true) => ExitCode::from(2),
        Err(CliError(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}
