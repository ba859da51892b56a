//! Deciding 2-QBF problems: exhaustive and counterexample-guided evaluators,
//! QCIR/QDIMACS writers and readers, and external solver processes.

mod bruteforce;
mod cegar;
mod external;
pub mod qcir;
pub mod qdimacs;

pub use bruteforce::{eval_bruteforce, BruteForceCaps};
pub use cegar::solve_cegar;
pub use external::{solve_external, ExternalSolver, SolverFormat, SOLVER_ENV, SOLVER_FORMAT_ENV};

use std::collections::BTreeMap;
use std::fmt;
use std::time::{Duration, Instant};

use thiserror::Error;

use crate::encoding::QbfProblem;
use crate::formula::Qbf;
use crate::net::{PlaceId, TransitionId};

#[derive(Debug, Error)]
pub enum SolveError {
    #[error("{what} has {count} variables, cap is {cap}")]
    TooManyVars {
        what: &'static str,
        count: usize,
        cap: usize,
    },
    #[error("cannot start solver `{command}`: {source}")]
    Spawn {
        command: String,
        source: std::io::Error,
    },
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("solver answers are inconsistent while fixing variable {0}")]
    Inconsistent(u32),
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("{0}")]
    Unsupported(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Status {
    Sat,
    Unsat,
    Unknown,
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Status::Sat => "SAT",
            Status::Unsat => "UNSAT",
            Status::Unknown => "UNKNOWN",
        })
    }
}

#[derive(Debug, Clone)]
pub struct SolveResult {
    pub status: Status,
    /// Values of the existential block, in block order.
    pub witness: Option<Vec<bool>>,
    pub solver: String,
    pub elapsed: Duration,
    pub diagnostics: String,
}

impl SolveResult {
    fn new(status: Status, solver: &str, start: Instant) -> Self {
        Self {
            status,
            witness: None,
            solver: solver.to_string(),
            elapsed: start.elapsed(),
            diagnostics: String::new(),
        }
    }
}

/// How a problem is decided.
#[derive(Debug, Clone)]
pub enum Backend {
    /// Counterexample-guided abstraction refinement on top of a SAT solver.
    Internal,
    /// Exhaustive evaluation, limited to small prefixes.
    BruteForce(BruteForceCaps),
    External(ExternalSolver),
}

impl Backend {
    pub fn name(&self) -> String {
        match self {
            Backend::Internal => "internal".into(),
            Backend::BruteForce(_) => "bruteforce".into(),
            Backend::External(s) => format!("external:{}", s.command),
        }
    }

    pub fn solve(&self, q: &Qbf, deadline: Option<Instant>) -> Result<SolveResult, SolveError> {
        match self {
            Backend::Internal => Ok(solve_cegar(q, deadline)),
            Backend::BruteForce(caps) => eval_bruteforce(q, *caps),
            Backend::External(s) => solve_external(q, s, deadline),
        }
    }
}

/// Values of the strategy variables of a satisfiable problem.
pub type StrategyAssignment = BTreeMap<(PlaceId, TransitionId), bool>;

/// Decides `q` and, when it is satisfiable, recovers values for the strategy
/// variables. Backends that report a witness are trusted directly; others are
/// probed one variable at a time.
pub fn solve_problem(
    q: &QbfProblem,
    backend: &Backend,
    deadline: Option<Instant>,
) -> Result<(SolveResult, Option<StrategyAssignment>), SolveError> {
    let result = backend.solve(&q.qbf, deadline)?;
    if result.status != Status::Sat {
        return Ok((result, None));
    }
    let values = match &result.witness {
        Some(w) => w.clone(),
        None => match probe(&q.qbf, backend, deadline)? {
            Some(v) => v,
            None => {
                let mut r = result;
                r.status = Status::Unknown;
                r.diagnostics = "strategy extraction ran out of time".into();
                return Ok((r, None));
            }
        },
    };
    let assignment = q
        .strategy_vars()
        .into_iter()
        .zip(values)
        .map(|((_, p, t), val)| ((p, t), val))
        .collect();
    Ok((result, Some(assignment)))
}

/// Fixes existential variables one after another, preferring `true`.
/// `None` when the backend stops answering.
pub fn probe(
    q: &Qbf,
    backend: &Backend,
    deadline: Option<Instant>,
) -> Result<Option<Vec<bool>>, SolveError> {
    let mut pins: Vec<(u32, bool)> = Vec::new();
    for &v in &q.exists {
        let mut decided = None;
        for val in [true, false] {
            pins.push((v, val));
            let r = backend.solve(&q.with_units(&pins), deadline)?;
            pins.pop();
            match r.status {
                Status::Sat => {
                    decided = Some(val);
                    break;
                }
                Status::Unsat => {}
                Status::Unknown => return Ok(None),
            }
        }
        match decided {
            Some(val) => pins.push((v, val)),
            None => return Err(SolveError::Inconsistent(v + 1)),
        }
    }
    Ok(Some(pins.into_iter().map(|(_, val)| val).collect()))
}
