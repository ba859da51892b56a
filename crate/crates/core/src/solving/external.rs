//! Running a QBF solver as a child process.

use std::io::{Read, Write};
use std::process::{Command, Stdio};
use std::str::FromStr;
use std::thread;
use std::time::{Duration, Instant};

use super::{qcir, qdimacs, SolveError, SolveResult, Status};
use crate::formula::Qbf;

/// Default solver command template.
pub const SOLVER_ENV: &str = "PGSYNTH_SOLVER";
/// Format fed to the solver named by [`SOLVER_ENV`]: `qcir` or `qdimacs`.
pub const SOLVER_FORMAT_ENV: &str = "PGSYNTH_SOLVER_FORMAT";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolverFormat {
    Qcir,
    Qdimacs,
}

impl SolverFormat {
    pub fn extension(self) -> &'static str {
        match self {
            SolverFormat::Qcir => "qcir",
            SolverFormat::Qdimacs => "qdimacs",
        }
    }

    pub fn render(self, q: &Qbf) -> String {
        match self {
            SolverFormat::Qcir => qcir::to_qcir(q),
            SolverFormat::Qdimacs => qdimacs::to_qdimacs(q),
        }
    }
}

impl FromStr for SolverFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "qcir" => Ok(SolverFormat::Qcir),
            "qdimacs" => Ok(SolverFormat::Qdimacs),
            other => Err(format!("unknown formula format `{other}`")),
        }
    }
}

/// A solver command. `{file}` in the template is replaced by the path of the
/// formula file; without it the formula is written to standard input.
#[derive(Debug, Clone)]
pub struct ExternalSolver {
    pub command: String,
    pub format: SolverFormat,
    pub timeout: Duration,
    pub sat_code: i32,
    pub unsat_code: i32,
}

impl ExternalSolver {
    pub fn new(command: impl Into<String>, format: SolverFormat) -> Self {
        Self {
            command: command.into(),
            format,
            timeout: Duration::from_secs(1800),
            sat_code: 10,
            unsat_code: 20,
        }
    }

    /// The solver configured through the environment, if any.
    pub fn from_env() -> Option<Self> {
        let command = std::env::var(SOLVER_ENV).ok().filter(|s| !s.trim().is_empty())?;
        let format = std::env::var(SOLVER_FORMAT_ENV)
            .ok()
            .and_then(|f| f.parse().ok())
            .unwrap_or(SolverFormat::Qcir);
        Some(Self::new(command, format))
    }
}

fn status_from_output(stdout: &str) -> Status {
    for line in stdout.lines() {
        let t = line.trim();
        let upper = t.to_ascii_uppercase();
        match upper.as_str() {
            "S CNF 1" | "SAT" | "SATISFIABLE" | "S SATISFIABLE" => return Status::Sat,
            "S CNF 0" | "UNSAT" | "UNSATISFIABLE" | "S UNSATISFIABLE" => return Status::Unsat,
            _ => {}
        }
    }
    Status::Unknown
}

pub fn solve_external(
    q: &Qbf,
    solver: &ExternalSolver,
    deadline: Option<Instant>,
) -> Result<SolveResult, SolveError> {
    let start = Instant::now();
    let text = solver.format.render(q);
    let mut file = tempfile::Builder::new()
        .prefix("pgsynth-")
        .suffix(&format!(".{}", solver.format.extension()))
        .tempfile()?;
    file.write_all(text.as_bytes())?;
    file.flush()?;
    let path = file.path().to_string_lossy().into_owned();

    let uses_file = solver.command.contains("{file}");
    let mut parts = solver
        .command
        .split_whitespace()
        .map(|p| p.replace("{file}", &path));
    let program = parts.next().ok_or_else(|| SolveError::Spawn {
        command: solver.command.clone(),
        source: std::io::Error::new(std::io::ErrorKind::InvalidInput, "empty command"),
    })?;
    let mut child = Command::new(&program)
        .args(parts)
        .stdin(if uses_file { Stdio::null() } else { Stdio::piped() })
        .stdout(Stdio::piped())
        .stderr(Stdio::null())
        .spawn()
        .map_err(|source| SolveError::Spawn {
            command: solver.command.clone(),
            source,
        })?;
    if !uses_file {
        let mut stdin = child.stdin.take().expect("piped stdin");
        let bytes = text.into_bytes();
        thread::spawn(move || {
            let _ = stdin.write_all(&bytes);
        });
    }
    let mut stdout = child.stdout.take().expect("piped stdout");
    let reader = thread::spawn(move || {
        let mut s = String::new();
        let _ = stdout.read_to_string(&mut s);
        s
    });

    let mut limit = start + solver.timeout;
    if let Some(d) = deadline {
        limit = limit.min(d);
    }
    let exit = loop {
        if let Some(status) = child.try_wait()? {
            break Some(status);
        }
        if Instant::now() >= limit {
            let _ = child.kill();
            let _ = child.wait();
            break None;
        }
        thread::sleep(Duration::from_millis(5));
    };
    let out = reader.join().unwrap_or_default();
    let name = format!("external:{}", solver.command);
    let Some(exit) = exit else {
        let mut r = SolveResult::new(Status::Unknown, &name, start);
        r.diagnostics = "solver timed out".into();
        return Ok(r);
    };
    let status = match exit.code() {
        Some(c) if c == solver.sat_code => Status::Sat,
        Some(c) if c == solver.unsat_code => Status::Unsat,
        _ => status_from_output(&out),
    };
    let mut r = SolveResult::new(status, &name, start);
    if status == Status::Unknown {
        r.diagnostics = format!("exit status {exit}, unrecognized output");
    }
    Ok(r)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn output_parsing() {
        assert_eq!(status_from_output("c hi\ns cnf 1\n"), Status::Sat);
        assert_eq!(status_from_output("UNSATISFIABLE\n"), Status::Unsat);
        assert_eq!(status_from_output("SAT\n"), Status::Sat);
        assert_eq!(status_from_output("garbage"), Status::Unknown);
    }

    #[test]
    fn missing_program_is_a_spawn_error() {
        let q = Qbf {
            num_vars: 0,
            exists: vec![],
            forall: vec![],
            circuit: crate::formula::Circuit::new(),
            output: crate::formula::Lit::TRUE,
        };
        let s = ExternalSolver::new("/nonexistent/solver {file}", SolverFormat::Qcir);
        assert!(matches!(
            solve_external(&q, &s, None),
            Err(SolveError::Spawn { .. })
        ));
    }

    #[test]
    fn exit_codes_map_to_status() {
        let q = Qbf {
            num_vars: 0,
            exists: vec![],
            forall: vec![],
            circuit: crate::formula::Circuit::new(),
            output: crate::formula::Lit::TRUE,
        };
        let dir = tempfile::tempdir().unwrap();
        let script = dir.path().join("s.sh");
        std::fs::write(&script, "#!/bin/sh\ncat >/dev/null\nexit 20\n").unwrap();
        let s = ExternalSolver::new(format!("sh {}", script.display()), SolverFormat::Qdimacs);
        assert_eq!(solve_external(&q, &s, None).unwrap().status, Status::Unsat);
    }
}
