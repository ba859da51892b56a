//! Command-line front end.
//!
//! Exit codes: 0 success, 1 no strategy within the schedule (or a failed
//! `--check`), 2 usage or input errors.

pub mod pg;

use std::ffi::OsString;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::time::Duration;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::bench::{self, BenchRow, Family};
use crate::encoding::{encode, encode_true_concurrent, EncodeOptions, EncodingKind};
use crate::game::PetriGame;
use crate::net::PetriNet;
use crate::semantics::{maximal_seq_traces, maximal_tc_traces};
use crate::solving::{
    qcir, qdimacs, Backend, BruteForceCaps, ExternalSolver, SolverFormat, Status,
};
use crate::synthesis::{
    build_strategy_net, default_schedule, fixed_bound_schedule, parse_pgstrat, synthesize_with_log,
    Outcome, SynthesisOptions, DEFAULT_MAX_BOUND, DEFAULT_MAX_N,
};
use crate::unfolding::unfold;

pub use pg::{parse_pg, print_pg, PgError};

pub const EXIT_OK: i32 = 0;
pub const EXIT_NO_STRATEGY: i32 = 1;
pub const EXIT_ERROR: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "pgsynth", version, about = "Bounded synthesis for Petri games")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Search for a winning system strategy.
    Synth(SynthArgs),
    /// Write the formula for one bound and length.
    Encode(EncodeArgs),
    /// List the maximal traces of a game or strategy net.
    Simulate(SimulateArgs),
    /// Run benchmark families and print a CSV table.
    Bench(BenchArgs),
    /// Decide a QCIR or QDIMACS file (exit 10 SAT, 20 UNSAT).
    Solve(SolveArgs),
    /// Print a game as a DOT graph.
    Dot(DotArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum EncodingArg {
    Seq,
    Tc,
}

impl From<EncodingArg> for EncodingKind {
    fn from(e: EncodingArg) -> Self {
        match e {
            EncodingArg::Seq => EncodingKind::Sequential,
            EncodingArg::Tc => EncodingKind::TrueConcurrent,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum SolverArg {
    Internal,
    Bruteforce,
    External,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum FormatArg {
    Qcir,
    Qdimacs,
}

impl From<FormatArg> for SolverFormat {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Qcir => SolverFormat::Qcir,
            FormatArg::Qdimacs => SolverFormat::Qdimacs,
        }
    }
}

#[derive(Debug, Args)]
pub struct SolverOpts {
    #[arg(long, value_enum, default_value = "internal")]
    pub solver: SolverArg,
    /// Solver command; `{file}` is replaced by the formula path. Defaults to
    /// the PGSYNTH_SOLVER environment variable.
    #[arg(long)]
    pub solver_cmd: Option<String>,
    #[arg(long, value_enum)]
    pub solver_format: Option<FormatArg>,
    /// Overall time limit in seconds.
    #[arg(long, default_value_t = 1800)]
    pub timeout: u64,
}

impl SolverOpts {
    fn backend(&self) -> Result<Backend> {
        Ok(match self.solver {
            SolverArg::Internal => Backend::Internal,
            SolverArg::Bruteforce => Backend::BruteForce(BruteForceCaps::default()),
            SolverArg::External => {
                let mut s = match &self.solver_cmd {
                    Some(cmd) => ExternalSolver::new(cmd.clone(), SolverFormat::Qcir),
                    None => ExternalSolver::from_env()
                        .ok_or_else(|| anyhow!("--solver external needs --solver-cmd or PGSYNTH_SOLVER"))?,
                };
                if let Some(f) = self.solver_format {
                    s.format = f.into();
                }
                s.timeout = Duration::from_secs(self.timeout);
                Backend::External(s)
            }
        })
    }

    fn options(&self) -> Result<SynthesisOptions> {
        Ok(SynthesisOptions {
            backend: self.backend()?,
            timeout: Duration::from_secs(self.timeout),
            ..SynthesisOptions::default()
        })
    }
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    pub file: PathBuf,
    #[arg(long, value_enum, default_value = "tc")]
    pub encoding: EncodingArg,
    #[command(flatten)]
    pub solver: SolverOpts,
    #[arg(long, default_value_t = DEFAULT_MAX_BOUND)]
    pub max_bound: usize,
    /// Only try this memory bound.
    #[arg(long, conflicts_with = "max_bound")]
    pub bound: Option<usize>,
    #[arg(long, default_value_t = DEFAULT_MAX_N)]
    pub max_n: usize,
    /// Directory for the strategy listing and its DOT graph.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(short, long)]
    pub quiet: bool,
}

#[derive(Debug, Args)]
pub struct EncodeArgs {
    pub file: PathBuf,
    #[arg(long, value_enum, default_value = "tc")]
    pub encoding: EncodingArg,
    #[arg(long, default_value_t = 1)]
    pub bound: usize,
    #[arg(long)]
    pub n: usize,
    #[arg(long, value_enum, default_value = "qcir")]
    pub format: FormatArg,
    /// Output file; standard output when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Print variable counts per role to standard error.
    #[arg(long)]
    pub stats: bool,
    /// Drop the environment's stall choices (unsound, for diagnostics).
    #[arg(long)]
    pub no_stall: bool,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum SemanticsArg {
    Seq,
    Tc,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    pub file: PathBuf,
    #[arg(long, value_enum, default_value = "seq")]
    pub semantics: SemanticsArg,
    /// A `.pgstrat` listing; the traces of its strategy net are listed.
    #[arg(long)]
    pub strategy: Option<PathBuf>,
    /// Maximal number of traces listed.
    #[arg(long, default_value_t = 1000)]
    pub max_steps: usize,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    /// Families to run (AS, CA, DR, PL, DW); all when absent.
    #[arg(long, value_delimiter = ',')]
    pub family: Vec<String>,
    /// Parameters as `a..b` (inclusive) or a single number.
    #[arg(long, default_value = "1..2")]
    pub param_range: String,
    #[arg(long, default_value = "both")]
    pub encoding: String,
    #[arg(long, default_value_t = DEFAULT_MAX_N)]
    pub max_n: usize,
    #[command(flatten)]
    pub solver: SolverOpts,
    /// CSV output file; standard output when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Fail unless tc needs no more iterations than seq on every instance.
    #[arg(long)]
    pub check: bool,
    /// Write each generated instance as `.pg` into this directory.
    #[arg(long)]
    pub export: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    pub file: PathBuf,
}

#[derive(Debug, Args)]
pub struct DotArgs {
    pub file: PathBuf,
    /// Draw the unfolding at this bound instead of the game.
    #[arg(long)]
    pub bound: Option<usize>,
}

/// Parses arguments and runs the command, returning the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_ERROR } else { EXIT_OK };
        }
    };
    match execute(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            EXIT_ERROR
        }
    }
}

fn execute(cmd: Command) -> Result<i32> {
    match cmd {
        Command::Synth(a) => cmd_synth(a),
        Command::Encode(a) => cmd_encode(a),
        Command::Simulate(a) => cmd_simulate(a),
        Command::Bench(a) => cmd_bench(a),
        Command::Solve(a) => cmd_solve(a),
        Command::Dot(a) => cmd_dot(a),
    }
}

pub fn load_game(path: &Path) -> Result<PetriGame> {
    let text = fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    parse_pg(&text).with_context(|| format!("{}", path.display()))
}

fn file_stem(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "game".into())
}

fn cmd_synth(a: SynthArgs) -> Result<i32> {
    let game = load_game(&a.file)?;
    let kind: EncodingKind = a.encoding.into();
    let schedule = match a.bound {
        Some(b) => fixed_bound_schedule(b, a.max_n),
        None => default_schedule(a.max_bound, a.max_n),
    };
    let mut options = a.solver.options()?;
    options.artifact_dir = a.out.clone();
    if !a.quiet {
        eprintln!("{:>5} {:>4} {:>7} {:>10}", "bound", "n", "status", "seconds");
    }
    let quiet = a.quiet;
    let run = synthesize_with_log(&game, kind, &schedule, &options, |it| {
        if !quiet {
            eprintln!(
                "{:>5} {:>4} {:>7} {:>10.3}",
                it.bound,
                it.n,
                it.status.to_string(),
                it.elapsed.as_secs_f64()
            );
        }
    })?;
    match (&run.outcome, &run.strategy) {
        (Outcome::Strategy, Some(s)) => {
            println!(
                "strategy found at bound {}, length {} after {} iterations ({:.3}s)",
                s.bound,
                s.n,
                run.iterations.len(),
                run.elapsed.as_secs_f64()
            );
            let listing = s.to_pgstrat();
            if let Some(dir) = &a.out {
                fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
                let stem = file_stem(&a.file);
                fs::write(dir.join(format!("{stem}.pgstrat")), &listing)?;
                fs::write(
                    dir.join(format!("{stem}.dot")),
                    s.net.game().to_dot(&format!("{stem}_strategy")),
                )?;
            } else {
                print!("{listing}");
            }
            Ok(EXIT_OK)
        }
        (Outcome::Timeout, _) => {
            println!("timeout after {} iterations", run.iterations.len());
            Ok(EXIT_NO_STRATEGY)
        }
        _ => {
            println!("no strategy within the schedule ({} iterations)", run.iterations.len());
            Ok(EXIT_NO_STRATEGY)
        }
    }
}

fn cmd_encode(a: EncodeArgs) -> Result<i32> {
    let game = load_game(&a.file)?;
    let u = std::sync::Arc::new(unfold(&game, a.bound)?);
    let kind: EncodingKind = a.encoding.into();
    let q = match kind {
        EncodingKind::TrueConcurrent => encode_true_concurrent(
            &u,
            a.n,
            EncodeOptions {
                stalling: !a.no_stall,
            },
        )?,
        EncodingKind::Sequential => encode(&u, kind, a.n)?,
    };
    if a.stats {
        eprintln!("{}", q.stats());
    }
    let text = SolverFormat::from(a.format).render(&q.qbf);
    match &a.out {
        Some(path) => fs::write(path, text).with_context(|| format!("cannot write {}", path.display()))?,
        None => std::io::stdout().write_all(text.as_bytes())?,
    }
    Ok(EXIT_OK)
}

fn print_traces(net: &PetriNet, semantics: SemanticsArg, limit: usize) -> Result<()> {
    match semantics {
        SemanticsArg::Seq => {
            let traces = maximal_seq_traces(net, limit)?;
            println!("{} sequential traces", traces.len());
            for (i, t) in traces.iter().enumerate() {
                println!("trace {} (length {})", i + 1, t.len());
                print!("{t}");
            }
        }
        SemanticsArg::Tc => {
            let traces = maximal_tc_traces(net, limit)?;
            println!("{} true-concurrent traces", traces.len());
            for (i, t) in traces.iter().enumerate() {
                println!("trace {} (length {})", i + 1, t.len());
                print!("{t}");
            }
        }
    }
    Ok(())
}

fn cmd_simulate(a: SimulateArgs) -> Result<i32> {
    let game = load_game(&a.file)?;
    match &a.strategy {
        Some(path) => {
            let text =
                fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
            let (u, assignment) = parse_pgstrat(&game, &text)?;
            let s = build_strategy_net(&u, &assignment);
            print_traces(s.game().net(), a.semantics, a.max_steps)?;
        }
        None => print_traces(game.net(), a.semantics, a.max_steps)?,
    }
    Ok(EXIT_OK)
}

/// `a..b`, `a..=b` or a single number.
pub fn parse_range(s: &str) -> Result<Vec<usize>> {
    let s = s.trim();
    let parse = |t: &str| -> Result<usize> {
        t.trim().parse().map_err(|_| anyhow!("bad parameter `{t}` in `{s}`"))
    };
    let (lo, hi) = match s.split_once("..") {
        Some((a, b)) => (parse(a)?, parse(b.trim_start_matches('='))?),
        None => {
            let v = parse(s)?;
            (v, v)
        }
    };
    if lo == 0 || lo > hi {
        bail!("empty or invalid parameter range `{s}`");
    }
    Ok((lo..=hi).collect())
}

fn cmd_bench(a: BenchArgs) -> Result<i32> {
    let families: Vec<Family> = if a.family.is_empty() {
        Family::ALL.to_vec()
    } else {
        a.family.iter().map(|f| f.parse()).collect::<Result<_, _>>()?
    };
    let params = parse_range(&a.param_range)?;
    let kinds = match a.encoding.to_ascii_lowercase().as_str() {
        "seq" => vec![EncodingKind::Sequential],
        "tc" => vec![EncodingKind::TrueConcurrent],
        "both" => vec![EncodingKind::Sequential, EncodingKind::TrueConcurrent],
        other => bail!("unknown encoding `{other}` (expected seq, tc or both)"),
    };
    let instances: Vec<(Family, usize)> = families
        .iter()
        .flat_map(|&f| params.iter().map(move |&m| (f, m)))
        .collect();
    if let Some(dir) = &a.export {
        fs::create_dir_all(dir)?;
        for &(f, m) in &instances {
            let inst = bench::generate(f, m)?;
            fs::write(dir.join(format!("{}_{m}.pg", f.code())), print_pg(&inst.game))?;
        }
    }
    let options = a.solver.options()?;
    let rows = bench::run_suite(&instances, &kinds, a.max_n, &options, |row| {
        eprintln!("{}", row.to_csv());
    })?;
    let csv = bench::to_csv(&rows);
    match &a.out {
        Some(path) => fs::write(path, &csv).with_context(|| format!("cannot write {}", path.display()))?,
        None => print!("{csv}"),
    }
    if a.check {
        let violations = iteration_violations(&rows);
        for v in &violations {
            eprintln!("check failed: {v}");
        }
        if !violations.is_empty() {
            return Ok(EXIT_NO_STRATEGY);
        }
    }
    Ok(EXIT_OK)
}

/// Instances where both encodings found a strategy but tc needed more
/// iterations than seq.
pub fn iteration_violations(rows: &[BenchRow]) -> Vec<String> {
    let mut out = Vec::new();
    for tc in rows.iter().filter(|r| r.encoding == EncodingKind::TrueConcurrent) {
        let seq = rows.iter().find(|r| {
            r.encoding == EncodingKind::Sequential && r.family == tc.family && r.param == tc.param
        });
        if let Some(seq) = seq {
            if tc.outcome == Outcome::Strategy
                && seq.outcome == Outcome::Strategy
                && tc.iterations > seq.iterations
            {
                out.push(format!(
                    "{}({}): tc {} > seq {}",
                    tc.family, tc.param, tc.iterations, seq.iterations
                ));
            }
        }
    }
    out
}

pub const SOLVE_SAT: i32 = 10;
pub const SOLVE_UNSAT: i32 = 20;

fn cmd_solve(a: SolveArgs) -> Result<i32> {
    let text = fs::read_to_string(&a.file).with_context(|| format!("cannot read {}", a.file.display()))?;
    let is_qcir = text
        .lines()
        .find(|l| !l.trim().is_empty())
        .is_some_and(|l| l.trim().to_ascii_uppercase().starts_with("#QCIR"));
    let result = if is_qcir {
        let q = qcir::parse_qcir(&text)?;
        crate::solving::solve_cegar(&q, None)
    } else {
        let cnf = qdimacs::parse_qdimacs(&text)?;
        qdimacs::solve_by_expansion(&cnf, None)?
    };
    println!("{}", result.status);
    Ok(match result.status {
        Status::Sat => SOLVE_SAT,
        Status::Unsat => SOLVE_UNSAT,
        Status::Unknown => EXIT_ERROR,
    })
}

fn cmd_dot(a: DotArgs) -> Result<i32> {
    let game = load_game(&a.file)?;
    let stem = file_stem(&a.file);
    match a.bound {
        Some(b) => print!("{}", unfold(&game, b)?.to_dot(&stem)),
        None => print!("{}", game.to_dot(&stem)),
    }
    Ok(EXIT_OK)
}
