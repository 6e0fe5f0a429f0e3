//! Command-line front end.
//!
//! Exit codes: 0 success, 1 recovery failed or expansion not verified,
//! 2 invalid input, 3 enumeration budget exceeded. Data goes to files or
//! standard output; summaries go to standard error. Nothing is written when
//! the exit code is nonzero.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::bench::{emit_report, run_sweep, ReportFormat, TrialSpec};
use crate::budget;
use crate::decode::{decode_fast, decode_majority, DecodeOptions, DecodeStatus, Decoded};
use crate::error::{Error, Result};
use crate::graph::{
    check_expansion, gen_random_graph, gen_right_regular_graph, BipartiteGraph, ExpansionOptions, SampleOptions,
};
use crate::io::{self, SignalFile, SketchFile};
use crate::robust::{recover_robust, ripr_error_bound, AlmostSparseModel, RobustOptions};
use crate::scalar::Scalar;
use crate::signal::{gen_sparse_signal, Sketch, SparseSignal};
use crate::sketch::encode;

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILED: i32 = 1;
pub const EXIT_INVALID: i32 = 2;
pub const EXIT_BUDGET: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "expander-cs", version, about = "Compressed sensing with bipartite expander graphs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a random left-regular (optionally right-regular) graph.
    GenGraph(GenGraphArgs),
    /// Check that every subset of size up to s-max expands.
    CheckExpansion(CheckExpansionArgs),
    /// Generate a random exactly k-sparse integer signal.
    GenSignal(GenSignalArgs),
    /// Compute the sketch y = A x of a signal.
    Sketch(SketchArgs),
    /// Recover an exactly sparse signal from its sketch.
    Recover(RecoverArgs),
    /// Recover an almost sparse signal: support identification then least squares.
    RecoverRobust(RecoverRobustArgs),
    /// Run a seeded benchmark sweep.
    Bench(BenchArgs),
}

#[derive(Debug, Args)]
struct GenGraphArgs {
    #[arg(long)]
    n: usize,
    #[arg(long)]
    m: usize,
    #[arg(long)]
    d: usize,
    #[arg(long)]
    seed: u64,
    /// Make every right node have degree n*d/m.
    #[arg(long)]
    right_regular: bool,
    #[arg(short, long)]
    output: PathBuf,
}

#[derive(Debug, Args)]
struct CheckExpansionArgs {
    #[arg(long)]
    graph: PathBuf,
    #[arg(long)]
    s_max: usize,
    #[arg(long)]
    epsilon: f64,
    /// Sample this many subsets per size when the exhaustive check is over budget.
    #[arg(long)]
    sample: Option<usize>,
    /// Seed of the sampler.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Debug, Args)]
struct GenSignalArgs {
    #[arg(long)]
    n: usize,
    #[arg(long)]
    k: usize,
    #[arg(long)]
    seed: u64,
    /// Largest magnitude of a nonzero entry.
    #[arg(long, default_value_t = 100)]
    max_value: i64,
    #[arg(short, long)]
    output: PathBuf,
}

#[derive(Debug, Args)]
struct SketchArgs {
    #[arg(long)]
    graph: PathBuf,
    #[arg(long)]
    signal: PathBuf,
    #[arg(short, long)]
    output: PathBuf,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Algorithm {
    Majority,
    Fast,
}

#[derive(Debug, Args)]
struct RecoverArgs {
    #[arg(long)]
    graph: PathBuf,
    #[arg(long)]
    sketch: PathBuf,
    #[arg(long, default_value_t = 0.125)]
    epsilon: f64,
    #[arg(long, value_enum, default_value_t = Algorithm::Fast)]
    algorithm: Algorithm,
    #[arg(long)]
    max_iters: Option<usize>,
    /// Write the per-iteration trace as CSV.
    #[arg(long)]
    trace: Option<PathBuf>,
    #[arg(short, long)]
    output: PathBuf,
}

#[derive(Debug, Args)]
struct RecoverRobustArgs {
    #[arg(long)]
    graph: PathBuf,
    #[arg(long)]
    sketch: PathBuf,
    #[arg(long)]
    k: usize,
    #[arg(long)]
    lambda: f64,
    #[arg(long)]
    big_l: f64,
    #[arg(long)]
    delta: f64,
    #[arg(long, default_value_t = 0.125)]
    epsilon: f64,
    #[arg(long)]
    max_iters: Option<usize>,
    #[arg(long)]
    trace: Option<PathBuf>,
    /// Original signal; when given, the restricted error bound is evaluated
    /// on the actual error.
    #[arg(long)]
    truth: Option<PathBuf>,
    #[arg(short, long)]
    output: PathBuf,
}

#[derive(Debug, Args)]
struct BenchArgs {
    #[arg(long)]
    spec: PathBuf,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
    #[arg(short, long)]
    output: PathBuf,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Markdown,
}

/// Result of one invocation. `files` are written only on exit code 0.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct CommandOutcome {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
    pub files: Vec<(PathBuf, String)>,
}

impl CommandOutcome {
    fn failure(code: i32, stderr: String) -> Self {
        CommandOutcome {
            code,
            stderr,
            ..Default::default()
        }
    }

    fn file(&mut self, path: &Path, contents: String) {
        self.files.push((path.to_path_buf(), contents));
    }

    /// Writes the pending files if the command succeeded. A failed write
    /// turns the outcome into an invalid-input failure.
    pub fn commit(mut self) -> Self {
        if self.code != EXIT_OK {
            self.files.clear();
            return self;
        }
        for (path, contents) in &self.files {
            if let Err(err) = fs::write(path, contents) {
                return CommandOutcome::failure(EXIT_INVALID, format!("error: {}: {err}\n", path.display()));
            }
        }
        self
    }
}

fn exit_code(err: &Error) -> i32 {
    match err {
        Error::BudgetExceeded { .. } => EXIT_BUDGET,
        _ => EXIT_INVALID,
    }
}

/// Parses `args` (without the program name) and runs the command. Files
/// are not written; call [`CommandOutcome::commit`] for that.
pub fn dispatch<I, S>(args: I) -> CommandOutcome
where
    I: IntoIterator<Item = S>,
    S: Into<OsString> + Clone,
{
    let argv = std::iter::once(OsString::from("expander-cs")).chain(args.into_iter().map(Into::into));
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(err) => {
            let text = err.render().to_string();
            return match err.exit_code() {
                0 => CommandOutcome {
                    stdout: text,
                    ..Default::default()
                },
                _ => CommandOutcome::failure(EXIT_INVALID, text),
            };
        }
    };
    let result = match cli.command {
        Command::GenGraph(a) => gen_graph(a),
        Command::CheckExpansion(a) => check(a),
        Command::GenSignal(a) => gen_signal(a),
        Command::Sketch(a) => sketch(a),
        Command::Recover(a) => recover(a),
        Command::RecoverRobust(a) => recover_robust_cmd(a),
        Command::Bench(a) => bench(a),
    };
    match result {
        Ok(outcome) => outcome,
        Err(err) => CommandOutcome::failure(exit_code(&err), format!("error: {err}\n")),
    }
}

fn gen_graph(a: GenGraphArgs) -> Result<CommandOutcome> {
    let g = if a.right_regular {
        gen_right_regular_graph(a.n, a.m, a.d, a.seed)?
    } else {
        gen_random_graph(a.n, a.m, a.d, a.seed)?
    };
    let mut out = CommandOutcome::default();
    out.stderr = format!("generated graph n={} m={} d={}\n", g.n(), g.m(), g.d());
    out.file(&a.output, io::format_graph(&g));
    Ok(out)
}

fn format_subset(s: &[usize]) -> String {
    s.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(" ")
}

fn check(a: CheckExpansionArgs) -> Result<CommandOutcome> {
    let g = io::load_graph(&a.graph)?;
    let opts = ExpansionOptions {
        budget: budget::from_env()?,
        sample: a.sample.map(|samples| SampleOptions { samples, seed: a.seed }),
    };
    let report = check_expansion(&g, a.s_max, a.epsilon, &opts)?;
    let mut stdout = String::new();
    let _ = writeln!(stdout, "verified {}", report.verified);
    let _ = writeln!(stdout, "mode {}", if report.exhaustive { "exhaustive" } else { "sampled" });
    let _ = writeln!(stdout, "s_max {}", report.s_max);
    let _ = writeln!(stdout, "epsilon {}", report.epsilon);
    let _ = writeln!(stdout, "subsets_checked {}", report.subsets_checked);
    let _ = writeln!(stdout, "worst_ratio {}", report.worst_ratio);
    let _ = writeln!(stdout, "worst_subset {}", format_subset(&report.worst_subset));
    if let Some(w) = &report.witness {
        let _ = writeln!(stdout, "witness {}", format_subset(w));
    }
    if !report.verified {
        return Ok(CommandOutcome::failure(
            EXIT_FAILED,
            format!("{stdout}expansion not verified at s_max={} epsilon={}\n", a.s_max, a.epsilon),
        ));
    }
    let stderr = if report.exhaustive {
        "expansion verified\n".to_string()
    } else {
        "expansion not falsified by sampling\n".to_string()
    };
    Ok(CommandOutcome {
        stdout,
        stderr,
        ..Default::default()
    })
}

fn gen_signal(a: GenSignalArgs) -> Result<CommandOutcome> {
    let x = gen_sparse_signal(a.n, a.k, a.max_value, a.seed)?;
    let mut out = CommandOutcome::default();
    out.file(&a.output, io::format_signal(&x));
    Ok(out)
}

fn sketch(a: SketchArgs) -> Result<CommandOutcome> {
    let g = io::load_graph(&a.graph)?;
    let text = match io::load_signal(&a.signal)? {
        SignalFile::Exact(x) => io::format_sketch(&encode(&g, &x)?),
        SignalFile::Float(x) => io::format_sketch(&encode(&g, &x)?),
    };
    let mut out = CommandOutcome::default();
    out.file(&a.output, text);
    Ok(out)
}

fn decode_any<T: Scalar>(g: &BipartiteGraph, y: &Sketch<T>, a: &RecoverArgs) -> Result<Decoded<T>> {
    let opts = DecodeOptions {
        max_iters: a.max_iters,
        ..Default::default()
    };
    match a.algorithm {
        Algorithm::Majority => decode_majority(g, y, &opts),
        Algorithm::Fast => decode_fast(g, y, a.epsilon, &opts),
    }
}

fn recover_outcome<T: Scalar>(decoded: Decoded<T>, a: &RecoverArgs) -> CommandOutcome {
    let trace = &decoded.trace;
    let gaps = trace.gap_supports();
    let summary = format!(
        "{} after {} iterations; gap support {}\n",
        decoded.status().as_str(),
        trace.iterations(),
        gaps.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(" -> ")
    );
    if decoded.status() != DecodeStatus::Recovered {
        let hint = if a.trace.is_some() {
            "no files written; the trace above shows the progress made\n"
        } else {
            "no files written; rerun with --trace FILE after a successful run or inspect the gap supports above\n"
        };
        return CommandOutcome::failure(EXIT_FAILED, format!("{summary}{}{hint}", trace.to_csv()));
    }
    let mut out = CommandOutcome::default();
    out.stderr = summary;
    out.file(&a.output, io::format_signal(&decoded.estimate));
    if let Some(path) = &a.trace {
        out.file(path, trace.to_csv());
    }
    out
}

fn recover(a: RecoverArgs) -> Result<CommandOutcome> {
    let g = io::load_graph(&a.graph)?;
    Ok(match io::load_sketch(&a.sketch)? {
        SketchFile::Exact(y) => recover_outcome(decode_any(&g, &y, &a)?, &a),
        SketchFile::Float(y) => recover_outcome(decode_any(&g, &y, &a)?, &a),
    })
}

fn float_sketch(file: SketchFile) -> Sketch<f64> {
    match file {
        SketchFile::Exact(y) => Sketch::new(y.values().iter().map(|&v| v as f64).collect()),
        SketchFile::Float(y) => y,
    }
}

fn float_signal(file: SignalFile) -> SparseSignal<f64> {
    match file {
        SignalFile::Exact(x) => {
            let mut out = SparseSignal::zeros(x.dim());
            for (j, v) in x.iter() {
                out.set(j, v as f64);
            }
            out
        }
        SignalFile::Float(x) => x,
    }
}

fn recover_robust_cmd(a: RecoverRobustArgs) -> Result<CommandOutcome> {
    let g = io::load_graph(&a.graph)?;
    let y = float_sketch(io::load_sketch(&a.sketch)?);
    let right_degree = g
        .right_degree()
        .ok_or_else(|| Error::invalid("robust recovery needs a right-regular graph"))?;
    let model = AlmostSparseModel {
        k: a.k,
        lambda: a.lambda,
        big_l: a.big_l,
        delta: a.delta,
        right_degree,
    };
    let opts = RobustOptions {
        max_iters: a.max_iters,
    };
    let rec = recover_robust(&g, &y, &model, a.epsilon, &opts)?;
    let trace = &rec.identified.trace;
    if trace.status != DecodeStatus::Recovered {
        return Ok(CommandOutcome::failure(
            EXIT_FAILED,
            format!(
                "support identification {} after {} iterations\n{}no files written\n",
                trace.status.as_str(),
                trace.iterations(),
                trace.to_csv()
            ),
        ));
    }

    let mut stdout = String::new();
    let _ = writeln!(stdout, "index,sign,level,refined");
    for &(j, sign) in &rec.identified.support {
        let _ = writeln!(
            stdout,
            "{j},{},{},{}",
            sign.as_char(),
            rec.identified.levels.get(j),
            rec.refined.get(j)
        );
    }
    let av = encode(&g, &rec.refined)?;
    let residual_l1: f64 = av.values().iter().zip(y.values()).map(|(a, b)| (a - b).abs()).sum();
    let _ = writeln!(stdout, "residual_l2 {}", rec.residual_l2);
    let _ = writeln!(stdout, "residual_l1 {}", residual_l1);

    // Without the original signal only the a-priori bound is available:
    // ||u_{S^c}||_1 <= n lambda and ||A u||_1 = residual_l1.
    let eps = a.epsilon;
    let n_lambda = g.n() as f64 * a.lambda;
    let a_priori = (1.0 - 2.0 * eps) / (1.0 - 4.0 * eps)
        * (residual_l1 / (g.d() as f64 * (1.0 - 2.0 * eps)) + 2.0 * eps / (1.0 - 2.0 * eps) * n_lambda);
    let _ = writeln!(stdout, "support_error_bound {a_priori}");
    if let Some(path) = &a.truth {
        let x = float_signal(io::load_signal(path)?);
        let u = x.sub(&rec.refined)?;
        let cert = ripr_error_bound(&g, &u, &rec.identified.indices(), eps)?;
        let _ = writeln!(stdout, "ripr_b {}", cert.b);
        let _ = writeln!(stdout, "ripr_u_support_l1 {}", cert.u_support_l1);
        let _ = writeln!(stdout, "ripr_u_complement_l1 {}", cert.u_complement_l1);
        let _ = writeln!(stdout, "ripr_first {} <= {} {}", cert.first.lhs, cert.first.rhs, cert.first.holds);
        let _ = writeln!(stdout, "ripr_second {} <= {} {}", cert.second.lhs, cert.second.rhs, cert.second.holds);
        let _ = writeln!(stdout, "ripr_holds {}", cert.holds);
    }

    let mut out = CommandOutcome {
        stdout,
        stderr: format!(
            "identified {} significant entries in {} iterations\n",
            rec.identified.support.len(),
            trace.iterations()
        ),
        ..Default::default()
    };
    out.file(&a.output, io::format_signal(&rec.refined));
    if let Some(path) = &a.trace {
        out.file(path, trace.to_csv());
    }
    Ok(out)
}

fn bench(a: BenchArgs) -> Result<CommandOutcome> {
    let mut spec = TrialSpec::parse(&fs::read_to_string(&a.spec)?)?;
    if std::env::var_os(budget::BUDGET_ENV).is_some() {
        spec.budget = budget::from_env()?;
    }
    let report = run_sweep(&spec)?;
    let format = match a.format {
        Format::Csv => ReportFormat::Csv,
        Format::Markdown => ReportFormat::Markdown,
    };
    let mut out = CommandOutcome::default();
    out.stderr = format!("{} trials, {} report rows\n", spec.trials, report.rows.len());
    out.file(&a.output, emit_report(&report, format));
    Ok(out)
}
