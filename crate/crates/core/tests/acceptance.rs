//! Acceptance suite. Every criterion runs in order and prints one PASS/FAIL
//! line; the test fails if any criterion fails or exceeds its time limit.

mod common;

use std::collections::{BTreeMap, BTreeSet};
use std::panic::{self, AssertUnwindSafe};
use std::path::PathBuf;
use std::process::Command;
use std::sync::Arc;
use std::time::{Duration, Instant};

use common::{random_game, random_qbf, random_seq_trace, rng, GameShape};
use pgsynth::bench::{self, Family};
use pgsynth::encoding::{encode_sequential, encode_true_concurrent, EncodeOptions, EncodingKind};
use pgsynth::game::{StrategyKind, StrategyNet};
use pgsynth::net::{PetriNet, TransitionId};
use pgsynth::semantics::{
    maximal_seq_traces, maximal_steps, reorder_adjacent, seq_to_tc, tc_fire, tc_to_seq, TcTrace,
    VisitsMarkings,
};
use pgsynth::solving::{
    eval_bruteforce, qdimacs, solve_external, solve_problem, Backend, BruteForceCaps,
    ExternalSolver, SolverFormat, Status, StrategyAssignment,
};
use pgsynth::synthesis::{
    build_strategy_net, default_schedule, synthesize, validate_strategy, Outcome, SynthesisError,
    SynthesisOptions,
};
use pgsynth::unfolding::unfold;
use rand::seq::SliceRandom;
use rand::Rng;

type Check = Result<String, String>;

/// Strategies validated so far and validation failures, for criterion 9.
#[derive(Default)]
struct Soundness {
    validated: usize,
    alarms: Vec<String>,
}

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn name(net: &PetriNet, t: TransitionId) -> String {
    net.transition_name(t).to_string()
}

fn record_synthesis(
    result: Result<pgsynth::synthesis::SynthesisRun, SynthesisError>,
    sound: &mut Soundness,
) -> Result<pgsynth::synthesis::SynthesisRun, String> {
    match result {
        Ok(run) => {
            if run.strategy.is_some() {
                sound.validated += 1;
            }
            Ok(run)
        }
        Err(e @ SynthesisError::SoundnessAlarm { .. }) => {
            sound.alarms.push(e.to_string());
            Err(e.to_string())
        }
        Err(e) => Err(e.to_string()),
    }
}

fn criterion_1() -> Check {
    let bin = env!("CARGO_BIN_EXE_pgsynth");
    let game = fixture("production_line_2.pg");
    let strat = fixture("production_line_2.pgstrat");
    let run = |semantics: &str| -> Result<String, String> {
        let out = Command::new(bin)
            .args(["simulate"])
            .arg(&game)
            .arg("--strategy")
            .arg(&strat)
            .args(["--semantics", semantics])
            .output()
            .map_err(|e| e.to_string())?;
        ensure(out.status.success(), || format!("simulate exited with {}", out.status))?;
        Ok(String::from_utf8_lossy(&out.stdout).into_owned())
    };
    let lengths = |text: &str| -> Vec<usize> {
        text.lines()
            .filter_map(|l| l.split("(length ").nth(1))
            .filter_map(|r| r.trim_end_matches(')').parse().ok())
            .collect()
    };
    let seq = run("seq")?;
    let tc = run("tc")?;
    ensure(seq.starts_with("4 sequential traces"), || format!("seq header: {}", seq.lines().next().unwrap_or("")))?;
    ensure(tc.starts_with("2 true-concurrent traces"), || format!("tc header: {}", tc.lines().next().unwrap_or("")))?;
    ensure(lengths(&seq) == vec![3; 4], || format!("seq lengths {:?}", lengths(&seq)))?;
    ensure(lengths(&tc) == vec![2; 2], || format!("tc lengths {:?}", lengths(&tc)))?;
    Ok("4 sequential traces of length 3, 2 true-concurrent traces of length 2".into())
}

fn criterion_2(sound: &mut Soundness) -> Check {
    let game = bench::production_line(2);
    let run = record_synthesis(
        synthesize(
            &game,
            EncodingKind::TrueConcurrent,
            &default_schedule(3, 12),
            &SynthesisOptions::default(),
        ),
        sound,
    )?;
    let s = run.strategy.ok_or_else(|| format!("no strategy ({:?})", run.outcome))?;
    let net = s.net.game().net();
    let orig = game.net();
    let mut decisions: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
    for trace in maximal_seq_traces(net, 100).map_err(|e| e.to_string())? {
        let labels: Vec<String> = trace
            .steps()
            .iter()
            .map(|&t| name(orig, s.net.transition_label(t)))
            .collect();
        let (first, rest) = labels.split_first().ok_or("empty trace")?;
        let entry = decisions.entry(first.clone()).or_default();
        let rest: BTreeSet<String> = rest.iter().cloned().collect();
        ensure(entry.is_empty() || *entry == rest, || format!("runs after {first} disagree"))?;
        *entry = rest;
    }
    let expected: BTreeMap<String, BTreeSet<String>> = [
        ("1_robot", vec!["repair1", "ignore2"]),
        ("2_robots", vec!["repair1", "repair2"]),
    ]
    .into_iter()
    .map(|(k, v)| (k.to_string(), v.into_iter().map(String::from).collect()))
    .collect();
    ensure(decisions == expected, || format!("decisions {decisions:?}"))?;
    Ok(format!(
        "strategy at bound {}, length {}: {:?}",
        s.bound, s.n, decisions
    ))
}

fn criterion_3(sound: &mut Soundness) -> Check {
    let text = std::fs::read_to_string(fixture("nondeterministic_choice.pg")).map_err(|e| e.to_string())?;
    let game = pgsynth::cli::parse_pg(&text).map_err(|e| e.to_string())?;
    let schedule = default_schedule(3, 12);
    for kind in [EncodingKind::Sequential, EncodingKind::TrueConcurrent] {
        let run = record_synthesis(
            synthesize(&game, kind, &schedule, &SynthesisOptions::default()),
            sound,
        )?;
        ensure(run.outcome == Outcome::Exhausted, || {
            format!("{kind}: outcome {:?}", run.outcome)
        })?;
    }
    // without stalling, allowing both t4 and t6 looks winning
    let u = Arc::new(unfold(&game, 1).map_err(|e| e.to_string())?);
    let sys = u.net().place("sys").map_err(|e| e.to_string())?;
    let t4 = game.net().transition("t4").map_err(|e| e.to_string())?;
    let t6 = game.net().transition("t6").map_err(|e| e.to_string())?;
    let pins = [(sys, t4, true), (sys, t6, true)];
    for n in 5..=8 {
        for stalling in [false, true] {
            let q = encode_true_concurrent(&u, n, EncodeOptions { stalling })
                .map_err(|e| e.to_string())?
                .pin_strategy(&pins)
                .ok_or("no strategy variable for (sys, t4/t6)")?;
            let (r, _) = solve_problem(&q, &Backend::Internal, None).map_err(|e| e.to_string())?;
            let expected = if stalling { Status::Unsat } else { Status::Sat };
            ensure(r.status == expected, || {
                format!("n = {n}, stalling = {stalling}: {}", r.status)
            })?;
        }
    }
    Ok("unrealizable under both encodings; unstalled tc accepts the t4/t6 strategy for n = 5..8".into())
}

fn is_sat(
    u: &Arc<pgsynth::unfolding::BoundedUnfolding>,
    kind: EncodingKind,
    n: usize,
    sound: &mut Soundness,
) -> Result<bool, String> {
    let q = match kind {
        EncodingKind::Sequential => encode_sequential(u, n),
        EncodingKind::TrueConcurrent => encode_true_concurrent(u, n, EncodeOptions::default()),
    }
    .map_err(|e| e.to_string())?;
    let (r, assignment) = solve_problem(&q, &Backend::Internal, None).map_err(|e| e.to_string())?;
    match r.status {
        Status::Sat => {
            let assignment: StrategyAssignment = assignment.ok_or("SAT without assignment")?;
            let s = build_strategy_net(u, &assignment);
            let report = validate_strategy(&s).map_err(|e| e.to_string())?;
            if report.is_empty() {
                sound.validated += 1;
            } else {
                sound.alarms.push(format!(
                    "{kind} n = {n}: {}",
                    report.iter().map(ToString::to_string).collect::<Vec<_>>().join("; ")
                ));
            }
            Ok(true)
        }
        Status::Unsat => Ok(false),
        Status::Unknown => Err(format!("{kind}: solver gave up ({})", r.diagnostics)),
    }
}

fn criterion_4(sound: &mut Soundness) -> Check {
    let mut rng = rng(0x5eed_0004);
    let games = 200;
    let mut realizable = 0;
    for i in 0..games {
        let game = random_game(&mut rng, GameShape::default());
        for b in 1..=2 {
            let u = Arc::new(unfold(&game, b).map_err(|e| e.to_string())?);
            let reachable = u.net().reachable_markings().map_err(|e| e.to_string())?.len();
            let n = reachable + 1;
            let seq = is_sat(&u, EncodingKind::Sequential, n, sound)?;
            let tc = is_sat(&u, EncodingKind::TrueConcurrent, n, sound)?;
            ensure(seq == tc, || {
                format!(
                    "game {i}, bound {b}, n = {n}: seq {seq}, tc {tc}\n{}",
                    pgsynth::cli::print_pg(&game)
                )
            })?;
            realizable += usize::from(seq);
        }
    }
    Ok(format!("{games} games at bounds 1 and 2 agree ({realizable} realizable cases)"))
}

fn criterion_5() -> Check {
    let mut rng = rng(0x5eed_0005);
    let mut pairs = 0;
    let mut attempts = 0;
    let mut nontrivial = 0;
    while pairs < 100 {
        attempts += 1;
        ensure(attempts < 100_000, || format!("only {pairs} pairs found"))?;
        let game = random_game(&mut rng, GameShape::default());
        let b = rng.gen_range(1..=2);
        let u = Arc::new(unfold(&game, b).map_err(|e| e.to_string())?);
        let mut assignment = StrategyAssignment::new();
        for p in u.net().places().filter(|&p| u.game().is_system(p)) {
            for &t in u.net().consumers(p) {
                assignment.insert((p, u.transition_label(t)), rng.gen_bool(0.8));
            }
        }
        let sys = build_strategy_net(&u, &assignment);
        if !sys.check_determinism().map_err(|e| e.to_string())?.is_empty() {
            continue;
        }
        // every environment place keeps one kept outgoing transition or none
        let mut removed = BTreeSet::new();
        for &p in sys.kept_places() {
            if !u.game().is_env(p) {
                continue;
            }
            let out: Vec<TransitionId> = u
                .net()
                .consumers(p)
                .iter()
                .copied()
                .filter(|&t| sys.is_kept(t))
                .collect();
            let keep = if rng.gen_bool(0.1) { None } else { out.choose(&mut rng).copied() };
            removed.extend(out.into_iter().filter(|&t| Some(t) != keep));
        }
        let env = StrategyNet::restrict(&sys, &removed, StrategyKind::Environment);
        if !env.check_explicit_choice().is_empty() || !env.check_determinism().map_err(|e| e.to_string())?.is_empty() {
            continue;
        }
        let net = env.game().net();
        if let Some(p) = net.places().find(|&p| net.consumers(p).len() > 1) {
            return Err(format!(
                "place {} has {} outgoing transitions\n{}",
                net.place_name(p),
                net.consumers(p).len(),
                pgsynth::cli::print_pg(&game)
            ));
        }
        // places that had a choice in the unfolding and kept a transition
        let resolved_choice = net.places().any(|p| {
            net.consumers(p).len() == 1 && u.net().consumers(env.place_origin(p)).len() > 1
        });
        nontrivial += usize::from(resolved_choice);
        pairs += 1;
    }
    Ok(format!(
        "{pairs} strategy pairs ({attempts} candidates) are fully resolved, {nontrivial} of them resolve a choice"
    ))
}

fn criterion_6() -> Check {
    let mut rng = rng(0x5eed_0006);
    let shape = GameShape {
        resolved: true,
        ..GameShape::default()
    };
    let mut reorders = 0;
    for i in 0..500 {
        let game = random_game(&mut rng, shape);
        let net = game.net();
        let seq = random_seq_trace(&mut rng, net, 8);
        // (a) legal adjacent swaps keep the verdict on bad places
        for k in 1..seq.len() {
            if let Ok(swapped) = reorder_adjacent(&seq, k) {
                reorders += 1;
                ensure(swapped.reaches_bad(&game) == seq.reaches_bad(&game), || {
                    format!("trace {i}: swapping step {k} changes reaches_bad")
                })?;
            }
        }
        // (b) both conversions keep the reached marking
        let tc = seq_to_tc(&seq).map_err(|e| format!("trace {i}: {e}"))?;
        ensure(tc.final_marking() == seq.final_marking(), || format!("trace {i}: seq_to_tc"))?;
        let mut m = net.initial_marking().clone();
        let mut steps = Vec::new();
        for _ in 0..rng.gen_range(0..=5) {
            let Some(step) = maximal_steps(net, &m).choose(&mut rng).cloned() else { break };
            m = tc_fire(net, &m, &step).map_err(|e| e.to_string())?;
            steps.push(step);
        }
        let random_tc = TcTrace::new(net, steps).map_err(|e| e.to_string())?;
        ensure(tc_to_seq(&random_tc).final_marking() == random_tc.final_marking(), || {
            format!("trace {i}: tc_to_seq")
        })?;
        // (c) the round trip permutes the steps
        let back = tc_to_seq(&tc);
        let mut a = back.steps().to_vec();
        let mut b = seq.steps().to_vec();
        a.sort_unstable();
        b.sort_unstable();
        ensure(a == b, || format!("trace {i}: round trip is not a permutation"))?;
        ensure(back.final_marking() == seq.final_marking(), || format!("trace {i}: round trip marking"))?;
    }
    Ok(format!("500 traces, {reorders} legal swaps"))
}

fn external_solver() -> (ExternalSolver, ExternalSolver, Option<&'static str>) {
    match ExternalSolver::from_env() {
        Some(s) => {
            let mut qcir = s.clone();
            qcir.format = SolverFormat::Qcir;
            let mut qdimacs = s;
            qdimacs.format = SolverFormat::Qdimacs;
            (qcir, qdimacs, None)
        }
        None => {
            let cmd = format!("{} solve {{file}}", env!("CARGO_BIN_EXE_pgsynth"));
            (
                ExternalSolver::new(cmd.clone(), SolverFormat::Qcir),
                ExternalSolver::new(cmd, SolverFormat::Qdimacs),
                Some("PGSYNTH_SOLVER unset, used `pgsynth solve` as the solver process"),
            )
        }
    }
}

fn criterion_7() -> Check {
    let (via_qcir, via_qdimacs, note) = external_solver();
    let mut rng = rng(0x5eed_0007);
    let mut sat = 0;
    for i in 0..100 {
        let gates = rng.gen_range(1..=40);
        let q = random_qbf(&mut rng, 20, gates);
        let expected = eval_bruteforce(&q, BruteForceCaps::default())
            .map_err(|e| e.to_string())?
            .status;
        sat += usize::from(expected == Status::Sat);
        for solver in [&via_qcir, &via_qdimacs] {
            let got = solve_external(&q, solver, None).map_err(|e| e.to_string())?.status;
            ensure(got == expected, || {
                format!("problem {i} via {:?}: {got}, expected {expected}", solver.format)
            })?;
        }
        let tseitin = qdimacs::solve_by_expansion(&qdimacs::to_cnf(&q), None)
            .map_err(|e| e.to_string())?
            .status;
        ensure(tseitin == expected, || format!("problem {i}: Tseitin form {tseitin}, expected {expected}"))?;
    }
    let mut msg = format!("100 problems agree ({sat} SAT)");
    if let Some(n) = note {
        msg.push_str("; ");
        msg.push_str(n);
    }
    Ok(msg)
}

fn criterion_8(sound: &mut Soundness) -> Check {
    let options = SynthesisOptions::default();
    let mut table = Vec::new();
    let mut pl_tc = BTreeSet::new();
    for family in [Family::ProductionLine, Family::DocumentWorkflow] {
        for m in 1..=3 {
            let inst = bench::generate(family, m).map_err(|e| e.to_string())?;
            let mut iterations = BTreeMap::new();
            for kind in [EncodingKind::Sequential, EncodingKind::TrueConcurrent] {
                let row = match bench::run_instance(&inst, kind, 12, &options) {
                    Ok(row) => row,
                    Err(bench::BenchError::Synthesis(e)) => {
                        record_synthesis(Err(e), sound)?;
                        unreachable!("errors are returned above")
                    }
                    Err(e) => return Err(e.to_string()),
                };
                ensure(row.outcome == Outcome::Strategy, || {
                    format!("{family}({m}) {kind}: {}", row.outcome.as_str())
                })?;
                sound.validated += 1;
                iterations.insert(kind, row.iterations);
            }
            let seq = iterations[&EncodingKind::Sequential];
            let tc = iterations[&EncodingKind::TrueConcurrent];
            ensure(tc <= seq, || format!("{family}({m}): tc {tc} > seq {seq}"))?;
            if family == Family::ProductionLine {
                pl_tc.insert(tc);
            }
            table.push(format!("{family}({m}) seq {seq} tc {tc}"));
        }
    }
    ensure(pl_tc.len() == 1, || format!("PL tc iterations vary: {pl_tc:?}"))?;
    Ok(table.join(", "))
}

fn criterion_9(sound: &Soundness) -> Check {
    ensure(sound.alarms.is_empty(), || sound.alarms.join("\n"))?;
    ensure(sound.validated > 0, || "no strategy was checked".into())?;
    Ok(format!("{} strategies validated, none rejected", sound.validated))
}

#[test]
fn acceptance_criteria() {
    let mut sound = Soundness::default();
    let mut failures = Vec::new();
    let mut run = |id: usize, limit: Duration, f: &mut dyn FnMut() -> Check| {
        let start = Instant::now();
        let result = panic::catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into()))
        });
        let elapsed = start.elapsed();
        let result = result.and_then(|msg| {
            if elapsed > limit {
                Err(format!("took {elapsed:.1?}, limit {limit:?} ({msg})"))
            } else {
                Ok(msg)
            }
        });
        match result {
            Ok(msg) => println!("criterion {id}: PASS [{elapsed:.2?}] {msg}"),
            Err(msg) => {
                println!("criterion {id}: FAIL [{elapsed:.2?}] {msg}");
                failures.push(id);
            }
        }
    };
    let secs = Duration::from_secs;
    run(1, secs(1), &mut criterion_1);
    run(2, secs(60), &mut || criterion_2(&mut sound));
    run(3, secs(60), &mut || criterion_3(&mut sound));
    run(4, secs(600), &mut || criterion_4(&mut sound));
    run(5, secs(60), &mut criterion_5);
    run(6, secs(120), &mut criterion_6);
    run(7, secs(300), &mut criterion_7);
    run(8, secs(900), &mut || criterion_8(&mut sound));
    run(9, Duration::MAX, &mut || criterion_9(&sound));
    assert!(failures.is_empty(), "failed criteria: {failures:?}");
}
