//! Parameterized benchmark families and the runner that times them.
//!
//! Every family is realizable for every parameter `m >= 1` and comes with
//! the memory bound its strategies need.

use std::fmt;
use std::str::FromStr;
use std::time::Duration;

use thiserror::Error;

use crate::encoding::EncodingKind;
use crate::game::{GameBuilder, GameError, PetriGame};
use crate::synthesis::{fixed_bound_schedule, synthesize, Outcome, SynthesisError, SynthesisOptions};

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("unknown benchmark family `{0}` (expected AS, CA, DR, PL or DW)")]
    UnknownFamily(String),
    #[error("parameter must be at least 1")]
    BadParameter,
    #[error(transparent)]
    Game(#[from] GameError),
    #[error(transparent)]
    Synthesis(#[from] SynthesisError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Family {
    /// Alarm system: a burglar intrudes at one of `m` locations and every
    /// location must report where.
    AlarmSystem,
    /// Collision avoidance: up to `m` robots pick one of two cyclic routes.
    CollisionAvoidance,
    /// Disjoint routing of `m` packets over `m` routes.
    DisjointRouting,
    /// Production line with `m` robots that repair or ignore a workpiece.
    ProductionLine,
    /// Document workflow around a ring of `m` workers.
    DocumentWorkflow,
}

impl Family {
    pub const ALL: [Family; 5] = [
        Family::AlarmSystem,
        Family::CollisionAvoidance,
        Family::DisjointRouting,
        Family::ProductionLine,
        Family::DocumentWorkflow,
    ];

    pub fn code(self) -> &'static str {
        match self {
            Family::AlarmSystem => "AS",
            Family::CollisionAvoidance => "CA",
            Family::DisjointRouting => "DR",
            Family::ProductionLine => "PL",
            Family::DocumentWorkflow => "DW",
        }
    }

    /// Memory bound at which the family is solved.
    pub fn bound(self) -> usize {
        match self {
            Family::ProductionLine => 2,
            _ => 1,
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

impl FromStr for Family {
    type Err = BenchError;

    fn from_str(s: &str) -> Result<Self, BenchError> {
        Family::ALL
            .into_iter()
            .find(|f| f.code().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| BenchError::UnknownFamily(s.to_string()))
    }
}

#[derive(Debug, Clone)]
pub struct BenchmarkInstance {
    pub family: Family,
    pub param: usize,
    pub game: PetriGame,
    pub expected_realizable: bool,
    pub bound: usize,
}

pub fn generate(family: Family, m: usize) -> Result<BenchmarkInstance, BenchError> {
    if m == 0 {
        return Err(BenchError::BadParameter);
    }
    let game = match family {
        Family::AlarmSystem => alarm_system(m),
        Family::CollisionAvoidance => collision_avoidance(m),
        Family::DisjointRouting => disjoint_routing(m),
        Family::ProductionLine => build_production_line(m),
        Family::DocumentWorkflow => document_workflow(m),
    }?;
    Ok(BenchmarkInstance {
        family,
        param: m,
        game,
        expected_realizable: true,
        bound: family.bound(),
    })
}

/// The production line with `m` robots. For `m = 2` this is the running
/// example with its original place and transition names.
///
/// # Panics
/// If `m` is zero.
pub fn production_line(m: usize) -> PetriGame {
    assert!(m >= 1, "production line needs at least one robot");
    build_production_line(m).expect("production line is well formed")
}

fn build_production_line(m: usize) -> Result<PetriGame, GameError> {
    let mut g = GameBuilder::new();
    let all = format!("{m}_robots");
    let profiles: Vec<String> = if m == 1 {
        vec!["1_robot".into()]
    } else {
        vec!["1_robot".into(), all.clone()]
    };
    g.place("env", true, false, true);
    for p in &profiles {
        g.env(&format!("{p}_check"));
    }
    for i in 1..=m {
        g.env(&format!("env{i}"));
        g.place(&format!("robot{i}"), false, false, false);
    }
    for i in 1..=m {
        g.sys(&format!("ignored{i}"));
        g.sys(&format!("repaired{i}"));
    }
    g.place("bot", false, true, false);

    for p in &profiles {
        let mut post = vec![format!("{p}_check")];
        for i in 1..=m {
            post.push(format!("env{i}"));
            post.push(format!("robot{i}"));
        }
        let post: Vec<&str> = post.iter().map(String::as_str).collect();
        g.transition(p, &["env"], &post);
    }
    for i in 1..=m {
        g.transition(&format!("ignore{i}"), &[&format!("robot{i}")], &[&format!("ignored{i}")]);
        g.transition(
            &format!("repair{i}"),
            &[&format!("env{i}"), &format!("robot{i}")],
            &[&format!("repaired{i}")],
        );
    }
    // the single-robot profile needs robot 1 to repair and the others to
    // ignore; the full profile needs every robot to repair
    let single = "1_robot_check".to_string();
    let mut wrong: Vec<(String, String, String)> = Vec::new();
    wrong.push(("wrong_ignore1".into(), "ignored1".into(), single.clone()));
    for i in 2..=m {
        let name = if m == 2 {
            "wrong_repair".to_string()
        } else {
            format!("wrong_repair{i}")
        };
        wrong.push((name, format!("repaired{i}"), single.clone()));
    }
    if m > 1 {
        let all_check = format!("{all}_check");
        for i in 1..=m {
            let name = match (m, i) {
                (2, 1) => "wrong_ignore3".to_string(),
                (2, 2) => "wrong_ignore2".to_string(),
                _ => format!("wrong_ignore{i}_all"),
            };
            wrong.push((name, format!("ignored{i}"), all_check.clone()));
        }
    }
    if m == 2 {
        // declaration order of the running example
        wrong.sort_by_key(|(name, _, _)| match name.as_str() {
            "wrong_ignore1" => 0,
            "wrong_ignore2" => 1,
            "wrong_repair" => 2,
            _ => 3,
        });
    }
    for (name, place, check) in &wrong {
        g.transition(name, &[place, check], &["bot"]);
    }
    g.build()
}

fn names(v: &[String]) -> Vec<&str> {
    v.iter().map(String::as_str).collect()
}

fn alarm_system(m: usize) -> Result<PetriGame, GameError> {
    let mut g = GameBuilder::new();
    g.place("burglar", true, false, true);
    for j in 1..=m {
        g.env(&format!("at{j}"));
        g.env(&format!("flag{j}"));
    }
    for i in 1..=m {
        g.place(&format!("watch{i}"), false, false, true);
        g.sys(&format!("alarm{i}"));
    }
    for k in 1..=m {
        for i in 1..=m {
            g.sys(&format!("heard{k}_{i}"));
        }
        for j in 1..=m {
            g.env(&format!("ind{k}_{j}"));
        }
    }
    g.place("bad", false, true, false);

    for j in 1..=m {
        g.transition(&format!("intrude{j}"), &["burglar"], &[&format!("at{j}"), &format!("flag{j}")]);
    }
    for i in 1..=m {
        g.transition(
            &format!("detect{i}"),
            &[&format!("at{i}"), &format!("watch{i}")],
            &[&format!("alarm{i}")],
        );
        let mut pre = vec![format!("alarm{i}")];
        pre.extend((1..=m).filter(|&k| k != i).map(|k| format!("watch{k}")));
        let post: Vec<String> = (1..=m).map(|k| format!("heard{k}_{i}")).collect();
        g.transition(&format!("broadcast{i}"), &names(&pre), &names(&post));
    }
    for k in 1..=m {
        for i in 1..=m {
            for j in 1..=m {
                g.transition(
                    &format!("indicate{k}_{i}_{j}"),
                    &[&format!("heard{k}_{i}")],
                    &[&format!("ind{k}_{j}")],
                );
            }
        }
    }
    for k in 1..=m {
        for j in 1..=m {
            for l in (1..=m).filter(|&l| l != j) {
                g.transition(
                    &format!("false_alarm{k}_{j}_{l}"),
                    &[&format!("ind{k}_{j}"), &format!("flag{l}")],
                    &["bad"],
                );
            }
        }
    }
    g.build()
}

fn collision_avoidance(m: usize) -> Result<PetriGame, GameError> {
    let mut g = GameBuilder::new();
    let route = |kind: &str, i: usize, k: usize| format!("{kind}{i}_{k}");
    for i in 1..=m {
        g.place(&format!("e{i}"), true, false, true);
        g.env(&format!("parked{i}"));
        g.sys(&format!("r{i}"));
        for kind in ["lo", "hi"] {
            for k in 1..=i + 1 {
                g.env(&route(kind, i, k));
            }
        }
    }
    for i in 1..m {
        g.place(&format!("crash{i}"), false, true, false);
    }
    for i in 1..=m {
        g.transition(&format!("go{i}"), &[&format!("e{i}")], &[&format!("r{i}")]);
        g.transition(&format!("stay{i}"), &[&format!("e{i}")], &[&format!("parked{i}")]);
        for kind in ["lo", "hi"] {
            g.transition(&format!("take_{kind}{i}"), &[&format!("r{i}")], &[&route(kind, i, 1)]);
            let len = i + 1;
            for k in 1..=len {
                g.transition(
                    &format!("drive_{kind}{i}_{k}"),
                    &[&route(kind, i, k)],
                    &[&route(kind, i, k % len + 1)],
                );
            }
        }
    }
    // neighbouring robots collide when they take different routes
    for i in 1..m {
        g.transition(
            &format!("collide{i}_a"),
            &[&route("hi", i, 1), &route("lo", i + 1, 1)],
            &[&format!("crash{i}")],
        );
        g.transition(
            &format!("collide{i}_b"),
            &[&route("lo", i, 1), &route("hi", i + 1, 1)],
            &[&format!("crash{i}")],
        );
    }
    g.build()
}

fn disjoint_routing(m: usize) -> Result<PetriGame, GameError> {
    let mut g = GameBuilder::new();
    for i in 1..=m {
        g.place(&format!("src{i}"), true, false, true);
        g.sys(&format!("pkt{i}"));
        g.env(&format!("out{i}"));
        for k in 1..=m {
            g.env(&format!("on{i}_{k}"));
        }
    }
    for k in 1..=m {
        g.place(&format!("clash{k}"), false, true, false);
    }
    for i in 1..=m {
        g.transition(&format!("arrive{i}"), &[&format!("src{i}")], &[&format!("pkt{i}")]);
        for k in 1..=m {
            g.transition(&format!("route{i}_{k}"), &[&format!("pkt{i}")], &[&format!("on{i}_{k}")]);
            g.transition(&format!("deliver{i}_{k}"), &[&format!("on{i}_{k}")], &[&format!("out{i}")]);
        }
    }
    for k in 1..=m {
        for i in 1..=m {
            for j in i + 1..=m {
                g.transition(
                    &format!("collide{i}_{j}_{k}"),
                    &[&format!("on{i}_{k}"), &format!("on{j}_{k}")],
                    &[&format!("clash{k}")],
                );
            }
        }
    }
    g.build()
}

fn document_workflow(m: usize) -> Result<PetriGame, GameError> {
    let mut g = GameBuilder::new();
    g.place("doc", true, false, true);
    for j in 0..m {
        g.env(&format!("at{j}"));
        g.place(&format!("idle{j}"), false, false, true);
        g.sys(&format!("seen{j}"));
        g.env(&format!("yes{j}"));
        g.env(&format!("no{j}"));
    }
    for p in ["seen_check", "vote_check", "all_seen", "unanimous"] {
        g.env(p);
    }
    g.place("bad", false, true, false);

    for j in 0..m {
        g.transition(&format!("start{j}"), &["doc"], &[&format!("at{j}")]);
    }
    for j in 0..m {
        let next = format!("at{}", (j + 1) % m);
        for (verb, vote) in [("endorse", "yes"), ("reject", "no")] {
            g.transition(
                &format!("{verb}{j}"),
                &[&format!("at{j}"), &format!("idle{j}")],
                &[&next, &format!("seen{j}"), &format!("{vote}{j}")],
            );
        }
        g.transition(
            &format!("finish{j}"),
            &[&format!("at{j}"), &format!("seen{j}")],
            &["seen_check", "vote_check"],
        );
    }
    g.transition("check_seen", &["seen_check"], &["all_seen"]);
    g.transition("check_votes", &["vote_check"], &["unanimous"]);
    for i in 0..m {
        for j in (0..m).filter(|&j| j != i) {
            g.transition(
                &format!("mismatch{i}_{j}"),
                &[&format!("yes{i}"), &format!("no{j}")],
                &["bad"],
            );
        }
    }
    g.build()
}

/// One line of the benchmark table.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchRow {
    pub family: Family,
    pub param: usize,
    pub encoding: EncodingKind,
    /// Number of solver calls until the outcome was settled.
    pub iterations: usize,
    /// The length at which a strategy was found, if any.
    pub n: Option<usize>,
    pub runtime: Duration,
    pub outcome: Outcome,
}

pub const CSV_HEADER: &str = "family,param,encoding,iterations,runtime_s,outcome";

impl BenchRow {
    pub fn to_csv(&self) -> String {
        format!(
            "{},{},{},{},{:.3},{}",
            self.family,
            self.param,
            self.encoding,
            self.iterations,
            self.runtime.as_secs_f64(),
            self.outcome.as_str()
        )
    }
}

pub fn to_csv(rows: &[BenchRow]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&r.to_csv());
        out.push('\n');
    }
    out
}

/// Solves one instance at its family bound with lengths `2..=max_n`.
pub fn run_instance(
    inst: &BenchmarkInstance,
    kind: EncodingKind,
    max_n: usize,
    options: &SynthesisOptions,
) -> Result<BenchRow, BenchError> {
    let schedule = fixed_bound_schedule(inst.bound, max_n);
    let run = synthesize(&inst.game, kind, &schedule, options)?;
    Ok(BenchRow {
        family: inst.family,
        param: inst.param,
        encoding: kind,
        iterations: run.iterations.len(),
        n: run.strategy.as_ref().map(|s| s.n),
        runtime: run.elapsed,
        outcome: run.outcome,
    })
}

/// Runs every `(family, param)` pair with every encoding, in that order.
pub fn run_suite(
    instances: &[(Family, usize)],
    kinds: &[EncodingKind],
    max_n: usize,
    options: &SynthesisOptions,
    mut progress: impl FnMut(&BenchRow),
) -> Result<Vec<BenchRow>, BenchError> {
    let mut rows = Vec::new();
    for &(family, m) in instances {
        let inst = generate(family, m)?;
        for &kind in kinds {
            let row = run_instance(&inst, kind, max_n, options)?;
            progress(&row);
            rows.push(row);
        }
    }
    Ok(rows)
}
