//! The bounded synthesis loop.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::PathBuf;
use std::sync::Arc;
use std::time::{Duration, Instant};

use thiserror::Error;

use crate::encoding::{encode_sequential, encode_true_concurrent, EncodeOptions, EncodingError, EncodingKind};
use crate::game::{GameError, PetriGame, StrategyKind, StrategyNet, ViolationReport};
use crate::net::TransitionId;
use crate::solving::{qcir, solve_problem, Backend, SolveError, Status, StrategyAssignment};
use crate::unfolding::{unfold, BoundedUnfolding, UnfoldError};

pub const DEFAULT_MAX_BOUND: usize = 3;
pub const DEFAULT_MAX_N: usize = 12;
pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(1800);

#[derive(Debug, Error)]
pub enum SynthesisError {
    #[error("invalid schedule: {0}")]
    BadSchedule(String),
    #[error(transparent)]
    Unfold(#[from] UnfoldError),
    #[error(transparent)]
    Encoding(#[from] EncodingError),
    #[error(transparent)]
    Solve(#[from] SolveError),
    #[error(transparent)]
    Game(#[from] GameError),
    #[error("strategy found at bound {bound}, length {n} is not winning: {}{}", .report.join("; "), .artifacts.as_ref().map(|p| format!(" (formula saved to {})", p.display())).unwrap_or_default())]
    SoundnessAlarm {
        bound: usize,
        n: usize,
        report: Vec<String>,
        artifacts: Option<PathBuf>,
    },
    #[error("strategy listing line {line}: {message}")]
    Listing { line: usize, message: String },
}

/// `(b, n)` pairs: bounds `1..=max_bound`, lengths `2..=max_n` for each.
pub fn default_schedule(max_bound: usize, max_n: usize) -> Vec<(usize, usize)> {
    let mut s = Vec::new();
    for b in 1..=max_bound {
        for n in 2..=max_n {
            s.push((b, n));
        }
    }
    s
}

/// Lengths `2..=max_n` at a single bound.
pub fn fixed_bound_schedule(bound: usize, max_n: usize) -> Vec<(usize, usize)> {
    (2..=max_n).map(|n| (bound, n)).collect()
}

fn check_schedule(schedule: &[(usize, usize)]) -> Result<(), SynthesisError> {
    if schedule.is_empty() {
        return Err(SynthesisError::BadSchedule("empty".into()));
    }
    if let Some(&(b, n)) = schedule.iter().find(|&&(b, n)| b < 1 || n < 1) {
        return Err(SynthesisError::BadSchedule(format!("entry ({b}, {n})")));
    }
    if let Some(w) = schedule.windows(2).find(|w| w[1] < w[0]) {
        return Err(SynthesisError::BadSchedule(format!(
            "({}, {}) follows ({}, {})",
            w[1].0, w[1].1, w[0].0, w[0].1
        )));
    }
    Ok(())
}

#[derive(Debug, Clone)]
pub struct SynthesisOptions {
    pub backend: Backend,
    pub timeout: Duration,
    pub encode: EncodeOptions,
    /// Where formulas of failed validations are written.
    pub artifact_dir: Option<PathBuf>,
}

impl Default for SynthesisOptions {
    fn default() -> Self {
        Self {
            backend: Backend::Internal,
            timeout: DEFAULT_TIMEOUT,
            encode: EncodeOptions::default(),
            artifact_dir: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Strategy,
    Exhausted,
    Timeout,
}

impl Outcome {
    pub fn as_str(self) -> &'static str {
        match self {
            Outcome::Strategy => "strategy",
            Outcome::Exhausted => "exhausted",
            Outcome::Timeout => "timeout",
        }
    }
}

#[derive(Debug, Clone)]
pub struct Iteration {
    pub bound: usize,
    pub n: usize,
    pub status: Status,
    pub elapsed: Duration,
}

#[derive(Debug, Clone)]
pub struct SynthesizedStrategy {
    pub bound: usize,
    pub n: usize,
    pub assignment: StrategyAssignment,
    pub net: StrategyNet,
}

impl SynthesizedStrategy {
    /// The strategy listing: the bound followed by every allowed
    /// (place copy, original transition) pair.
    pub fn to_pgstrat(&self) -> String {
        to_pgstrat(self.net.unfolding(), &self.assignment)
    }
}

#[derive(Debug, Clone)]
pub struct SynthesisRun {
    pub kind: EncodingKind,
    pub schedule: Vec<(usize, usize)>,
    pub iterations: Vec<Iteration>,
    pub outcome: Outcome,
    pub strategy: Option<SynthesizedStrategy>,
    pub elapsed: Duration,
}

/// Keeps a transition iff every system place in its preset allows its label.
pub fn build_strategy_net(
    u: &Arc<BoundedUnfolding>,
    assignment: &StrategyAssignment,
) -> StrategyNet {
    let net = u.net();
    let removed: BTreeSet<TransitionId> = net
        .transitions()
        .filter(|&t| {
            let label = u.transition_label(t);
            u.game()
                .system_pre(t)
                .any(|p| !assignment.get(&(p, label)).copied().unwrap_or(false))
        })
        .collect();
    let full = StrategyNet::unrestricted(u.clone());
    StrategyNet::restrict(&full, &removed, StrategyKind::System)
}

/// Checks a system strategy by direct reachability, independently of any
/// encoding.
pub fn validate_strategy(s: &StrategyNet) -> Result<ViolationReport, GameError> {
    s.system_violations()
}

/// Runs the schedule until a validated strategy is found.
pub fn synthesize(
    game: &PetriGame,
    kind: EncodingKind,
    schedule: &[(usize, usize)],
    options: &SynthesisOptions,
) -> Result<SynthesisRun, SynthesisError> {
    synthesize_with_log(game, kind, schedule, options, |_| {})
}

/// Like [`synthesize`], reporting every finished iteration to `log`.
pub fn synthesize_with_log(
    game: &PetriGame,
    kind: EncodingKind,
    schedule: &[(usize, usize)],
    options: &SynthesisOptions,
    mut log: impl FnMut(&Iteration),
) -> Result<SynthesisRun, SynthesisError> {
    check_schedule(schedule)?;
    let start = Instant::now();
    let deadline = start + options.timeout;
    let mut unfoldings: BTreeMap<usize, Arc<BoundedUnfolding>> = BTreeMap::new();
    let mut run = SynthesisRun {
        kind,
        schedule: schedule.to_vec(),
        iterations: Vec::new(),
        outcome: Outcome::Exhausted,
        strategy: None,
        elapsed: Duration::ZERO,
    };
    for &(b, n) in schedule {
        if Instant::now() >= deadline {
            run.outcome = Outcome::Timeout;
            break;
        }
        let iter_start = Instant::now();
        let u = match unfoldings.get(&b) {
            Some(u) => u.clone(),
            None => {
                let u = Arc::new(unfold(game, b)?);
                unfoldings.insert(b, u.clone());
                u
            }
        };
        let q = match kind {
            EncodingKind::Sequential => encode_sequential(&u, n)?,
            EncodingKind::TrueConcurrent => encode_true_concurrent(&u, n, options.encode)?,
        };
        let (result, assignment) = solve_problem(&q, &options.backend, Some(deadline))?;
        let it = Iteration {
            bound: b,
            n,
            status: result.status,
            elapsed: iter_start.elapsed(),
        };
        log(&it);
        run.iterations.push(it);
        match (result.status, assignment) {
            (Status::Sat, Some(assignment)) => {
                let net = build_strategy_net(&u, &assignment);
                let report = validate_strategy(&net)?;
                if !report.is_empty() {
                    let artifacts = options.artifact_dir.as_ref().and_then(|dir| {
                        let path = dir.join(format!("alarm-{}-b{b}-n{n}.qcir", kind.short_name()));
                        std::fs::write(&path, qcir::to_qcir(&q.qbf)).ok().map(|_| path)
                    });
                    return Err(SynthesisError::SoundnessAlarm {
                        bound: b,
                        n,
                        report: report.iter().map(ToString::to_string).collect(),
                        artifacts,
                    });
                }
                run.outcome = Outcome::Strategy;
                run.strategy = Some(SynthesizedStrategy {
                    bound: b,
                    n,
                    assignment,
                    net,
                });
                break;
            }
            (Status::Unknown, _) if Instant::now() >= deadline => {
                run.outcome = Outcome::Timeout;
                break;
            }
            _ => {}
        }
    }
    run.elapsed = start.elapsed();
    Ok(run)
}

pub fn to_pgstrat(u: &BoundedUnfolding, assignment: &StrategyAssignment) -> String {
    let mut out = String::new();
    let _ = writeln!(out, ".bound {}", u.bound());
    for (&(p, t), &val) in assignment {
        if val {
            let _ = writeln!(
                out,
                "{} {}",
                u.net().place_name(p),
                u.original().net().transition_name(t)
            );
        }
    }
    out
}

/// Reads a strategy listing against `game`, unfolding it at the listed bound.
pub fn parse_pgstrat(
    game: &PetriGame,
    text: &str,
) -> Result<(Arc<BoundedUnfolding>, StrategyAssignment), SynthesisError> {
    let err = |line: usize, message: String| SynthesisError::Listing { line, message };
    let mut bound = None;
    let mut pairs = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let s = raw.split('#').next().unwrap_or("").trim();
        if s.is_empty() {
            continue;
        }
        if let Some(rest) = s.strip_prefix(".bound") {
            let b: usize = rest
                .trim()
                .parse()
                .map_err(|_| err(line, format!("bad bound `{}`", rest.trim())))?;
            bound = Some(b);
            continue;
        }
        let mut toks = s.split_whitespace();
        match (toks.next(), toks.next(), toks.next()) {
            (Some(p), Some(t), None) => pairs.push((line, p.to_string(), t.to_string())),
            _ => return Err(err(line, "expected `place transition`".into())),
        }
    }
    let b = bound.ok_or_else(|| err(1, "missing .bound line".into()))?;
    let u = Arc::new(unfold(game, b)?);
    let mut assignment = StrategyAssignment::new();
    for p in u.net().places().filter(|&p| u.game().is_system(p)) {
        for &t in u.net().consumers(p) {
            assignment.insert((p, u.transition_label(t)), false);
        }
    }
    for (line, p, t) in pairs {
        let place = u
            .net()
            .place(&p)
            .map_err(|_| err(line, format!("unknown place `{p}`")))?;
        let transition = game
            .net()
            .transition(&t)
            .map_err(|_| err(line, format!("unknown transition `{t}`")))?;
        assignment.insert((place, transition), true);
    }
    Ok((u, assignment))
}
