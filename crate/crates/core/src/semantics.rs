//! Sequential and true-concurrent firing, traces and their transformations.

use std::collections::{BTreeSet, VecDeque};
use std::fmt;

use thiserror::Error;

use crate::game::PetriGame;
use crate::net::{Marking, NetError, PetriNet, PlaceId, TransitionId, DEFAULT_MARKING_GUARD};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SemanticsError {
    #[error(transparent)]
    Net(#[from] NetError),
    #[error("{0} and {1} share a preset place")]
    Conflict(String, String),
    #[error("step {0} is empty")]
    EmptyStep(usize),
    #[error("place {place} enables both {first} and {second}")]
    Nondeterminism {
        place: String,
        first: String,
        second: String,
    },
    #[error("cannot swap steps {index} and {next}: {reason}", next = index + 1)]
    Reorder { index: usize, reason: String },
    #[error("place {0} has more than one outgoing transition")]
    Unresolved(String),
    #[error("more than {0} traces")]
    TooManyTraces(usize),
}

/// A finite firing sequence from the initial marking.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SeqTrace<'a> {
    net: &'a PetriNet,
    steps: Vec<TransitionId>,
    markings: Vec<Marking>,
}

impl<'a> SeqTrace<'a> {
    pub fn new(net: &'a PetriNet, steps: Vec<TransitionId>) -> Result<Self, SemanticsError> {
        let mut markings = vec![net.initial_marking().clone()];
        for &t in &steps {
            let next = net.fire(markings.last().expect("non-empty"), t)?;
            markings.push(next);
        }
        Ok(Self {
            net,
            steps,
            markings,
        })
    }

    pub fn from_names(net: &'a PetriNet, names: &[&str]) -> Result<Self, SemanticsError> {
        let steps = names
            .iter()
            .map(|n| net.transition(n))
            .collect::<Result<Vec<_>, _>>()?;
        Self::new(net, steps)
    }

    pub fn net(&self) -> &'a PetriNet {
        self.net
    }

    pub fn steps(&self) -> &[TransitionId] {
        &self.steps
    }

    /// The initial marking followed by the marking after every step.
    pub fn markings(&self) -> &[Marking] {
        &self.markings
    }

    pub fn final_marking(&self) -> &Marking {
        self.markings.last().expect("non-empty")
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn step_names(&self) -> Vec<&'a str> {
        self.steps.iter().map(|&t| self.net.transition_name(t)).collect()
    }
}

/// A finite sequence of non-empty, conflict-free steps fired at once.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TcTrace<'a> {
    net: &'a PetriNet,
    steps: Vec<BTreeSet<TransitionId>>,
    markings: Vec<Marking>,
}

impl<'a> TcTrace<'a> {
    pub fn new(
        net: &'a PetriNet,
        steps: Vec<BTreeSet<TransitionId>>,
    ) -> Result<Self, SemanticsError> {
        let mut markings = vec![net.initial_marking().clone()];
        for (i, ts) in steps.iter().enumerate() {
            if ts.is_empty() {
                return Err(SemanticsError::EmptyStep(i + 1));
            }
            let next = tc_fire(net, markings.last().expect("non-empty"), ts)?;
            markings.push(next);
        }
        Ok(Self {
            net,
            steps,
            markings,
        })
    }

    pub fn from_names(net: &'a PetriNet, names: &[&[&str]]) -> Result<Self, SemanticsError> {
        let mut steps = Vec::new();
        for step in names {
            steps.push(
                step.iter()
                    .map(|n| net.transition(n))
                    .collect::<Result<BTreeSet<_>, _>>()?,
            );
        }
        Self::new(net, steps)
    }

    pub fn net(&self) -> &'a PetriNet {
        self.net
    }

    pub fn steps(&self) -> &[BTreeSet<TransitionId>] {
        &self.steps
    }

    pub fn markings(&self) -> &[Marking] {
        &self.markings
    }

    pub fn final_marking(&self) -> &Marking {
        self.markings.last().expect("non-empty")
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }
}

/// Fires a set of transitions with pairwise disjoint presets in one step.
pub fn tc_fire(
    net: &PetriNet,
    m: &Marking,
    ts: &BTreeSet<TransitionId>,
) -> Result<Marking, SemanticsError> {
    let mut consumed = BTreeSet::new();
    for &t in ts {
        for &p in net.pre(t) {
            if !consumed.insert(p) {
                let other = ts
                    .iter()
                    .find(|&&u| u != t && net.pre(u).contains(&p))
                    .expect("some other transition consumed p");
                return Err(SemanticsError::Conflict(
                    net.transition_name(*other).to_string(),
                    net.transition_name(t).to_string(),
                ));
            }
        }
    }
    for &t in ts {
        if !net.is_enabled(m, t) {
            return Err(NetError::NotEnabled {
                transition: net.transition_name(t).to_string(),
                marking: net.format_marking(m),
            }
            .into());
        }
    }
    let mut next: Marking = m.iter().filter(|p| !consumed.contains(p)).collect();
    for &t in ts {
        for &p in net.post(t) {
            next.insert(p);
        }
    }
    Ok(next)
}

/// All transitions enabled at `m`; an error if two of them compete for a place.
pub fn max_concurrent_set(
    net: &PetriNet,
    m: &Marking,
) -> Result<BTreeSet<TransitionId>, SemanticsError> {
    let enabled: BTreeSet<TransitionId> = net.enabled(m).collect();
    let mut owner: Vec<Option<TransitionId>> = vec![None; net.place_count()];
    for &t in &enabled {
        for &p in net.pre(t) {
            if let Some(u) = owner[p.index()] {
                return Err(SemanticsError::Nondeterminism {
                    place: net.place_name(p).to_string(),
                    first: net.transition_name(u).to_string(),
                    second: net.transition_name(t).to_string(),
                });
            }
            owner[p.index()] = Some(t);
        }
    }
    Ok(enabled)
}

/// Every maximal conflict-free set of transitions enabled at `m`.
///
/// Without competing transitions this is the single set of all enabled ones.
pub fn maximal_steps(net: &PetriNet, m: &Marking) -> Vec<BTreeSet<TransitionId>> {
    let enabled: Vec<TransitionId> = net.enabled(m).collect();
    if enabled.is_empty() {
        return Vec::new();
    }
    let conflict = |a: TransitionId, b: TransitionId| net.pre(a).iter().any(|p| net.pre(b).contains(p));
    let mut out = Vec::new();
    let mut chosen = Vec::new();
    extend_steps(&enabled, 0, &mut chosen, &conflict, &mut out);
    out
}

fn extend_steps(
    enabled: &[TransitionId],
    k: usize,
    chosen: &mut Vec<TransitionId>,
    conflict: &dyn Fn(TransitionId, TransitionId) -> bool,
    out: &mut Vec<BTreeSet<TransitionId>>,
) {
    if k == enabled.len() {
        // keep only maximal sets
        let maximal = enabled
            .iter()
            .all(|&t| chosen.contains(&t) || chosen.iter().any(|&c| conflict(c, t)));
        if maximal {
            out.push(chosen.iter().copied().collect());
        }
        return;
    }
    let t = enabled[k];
    if chosen.iter().all(|&c| !conflict(c, t)) {
        chosen.push(t);
        extend_steps(enabled, k + 1, chosen, conflict, out);
        chosen.pop();
    }
    extend_steps(enabled, k + 1, chosen, conflict, out);
}

pub fn reach_tc(net: &PetriNet) -> Result<BTreeSet<Marking>, SemanticsError> {
    reach_tc_with_guard(net, DEFAULT_MARKING_GUARD)
}

/// Markings reachable by firing maximal conflict-free steps from the initial
/// marking. Competing transitions branch into one step per maximal choice.
pub fn reach_tc_with_guard(
    net: &PetriNet,
    guard: usize,
) -> Result<BTreeSet<Marking>, SemanticsError> {
    let mut seen = BTreeSet::from([net.initial_marking().clone()]);
    let mut queue = VecDeque::from([net.initial_marking().clone()]);
    while let Some(m) = queue.pop_front() {
        for step in maximal_steps(net, &m) {
            let next = tc_fire(net, &m, &step)?;
            if !seen.contains(&next) {
                if seen.len() >= guard {
                    return Err(NetError::TooManyMarkings(guard).into());
                }
                seen.insert(next.clone());
                queue.push_back(next);
            }
        }
    }
    Ok(seen)
}

/// Swaps steps `i` and `i + 1` (1-based) and checks the result is still a trace.
pub fn reorder_adjacent<'a>(
    trace: &SeqTrace<'a>,
    i: usize,
) -> Result<SeqTrace<'a>, SemanticsError> {
    if i < 1 || i >= trace.len() {
        return Err(SemanticsError::Reorder {
            index: i,
            reason: format!("index out of range for a trace of length {}", trace.len()),
        });
    }
    let net = trace.net;
    let mut steps = trace.steps.clone();
    steps.swap(i - 1, i);
    let before = &trace.markings[i - 1];
    let swapped = net
        .fire(before, steps[i - 1])
        .and_then(|m| net.fire(&m, steps[i]))
        .map_err(|e| SemanticsError::Reorder {
            index: i,
            reason: e.to_string(),
        })?;
    let mut markings = trace.markings.clone();
    markings[i] = net.fire(before, steps[i - 1])?;
    debug_assert_eq!(swapped, markings[i + 1]);
    if swapped != markings[i + 1] {
        return Err(SemanticsError::Reorder {
            index: i,
            reason: "swapped steps reach a different marking".to_string(),
        });
    }
    Ok(SeqTrace {
        net,
        steps,
        markings,
    })
}

/// Unrolls every step in ascending transition order.
pub fn tc_to_seq<'a>(trace: &TcTrace<'a>) -> SeqTrace<'a> {
    let steps: Vec<TransitionId> = trace.steps.iter().flatten().copied().collect();
    SeqTrace::new(trace.net, steps).expect("conflict-free steps linearize")
}

/// Whether every place has at most one outgoing transition.
pub fn check_resolved(net: &PetriNet) -> Result<(), SemanticsError> {
    match net.places().find(|&p| net.consumers(p).len() > 1) {
        Some(p) => Err(SemanticsError::Unresolved(net.place_name(p).to_string())),
        None => Ok(()),
    }
}

fn independent(net: &PetriNet, a: TransitionId, b: TransitionId) -> bool {
    let touches = |t: TransitionId, p: &PlaceId| net.pre(t).contains(p) || net.post(t).contains(p);
    !net.pre(a)
        .iter()
        .chain(net.post(a))
        .any(|p| touches(b, p))
}

/// Moves steps as early as adjacent swaps allow, then groups runs of steps
/// that are enabled together at the start of their group.
pub fn seq_to_tc<'a>(trace: &SeqTrace<'a>) -> Result<TcTrace<'a>, SemanticsError> {
    let net = trace.net;
    check_resolved(net)?;
    // depth of each step in the dependency order
    let n = trace.len();
    let mut level = vec![0usize; n];
    for k in 0..n {
        for j in 0..k {
            if !independent(net, trace.steps[j], trace.steps[k]) {
                level[k] = level[k].max(level[j] + 1);
            }
        }
    }
    // phase 1: stable bubble sort by level through single swaps
    let mut current = trace.clone();
    let mut order: Vec<usize> = (0..n).collect();
    loop {
        let mut swapped = false;
        for i in 0..n.saturating_sub(1) {
            if level[order[i + 1]] < level[order[i]] {
                current = reorder_adjacent(&current, i + 1)?;
                order.swap(i, i + 1);
                swapped = true;
            }
        }
        if !swapped {
            break;
        }
    }
    // phase 2: maximal runs that fire together
    let mut steps: Vec<BTreeSet<TransitionId>> = Vec::new();
    let mut start = net.initial_marking().clone();
    let mut group: Vec<TransitionId> = Vec::new();
    for &t in &current.steps {
        let joins = net.is_enabled(&start, t) && group.iter().all(|&u| independent(net, u, t));
        if !joins {
            let set: BTreeSet<TransitionId> = group.drain(..).collect();
            start = tc_fire(net, &start, &set)?;
            steps.push(set);
        }
        group.push(t);
    }
    if !group.is_empty() {
        steps.push(group.into_iter().collect());
    }
    let tc = TcTrace::new(net, steps)?;
    debug_assert_eq!(tc.final_marking(), trace.final_marking());
    Ok(tc)
}

/// Traces that can tell whether they visit a bad place.
pub trait VisitsMarkings {
    fn visited(&self) -> &[Marking];

    /// Whether a visited marking contains a bad place of `game`, whose places
    /// must be those of the trace's net.
    fn reaches_bad(&self, game: &PetriGame) -> bool {
        self.visited().iter().any(|m| game.marking_is_bad(m))
    }
}

impl VisitsMarkings for SeqTrace<'_> {
    fn visited(&self) -> &[Marking] {
        &self.markings
    }
}

impl VisitsMarkings for TcTrace<'_> {
    fn visited(&self) -> &[Marking] {
        &self.markings
    }
}

/// At most the final marking repeats an earlier one.
pub fn is_bounded_trace(trace: &SeqTrace<'_>) -> bool {
    let (_, rest) = trace.markings.split_last().expect("non-empty");
    let distinct: BTreeSet<&Marking> = rest.iter().collect();
    distinct.len() == rest.len()
}

/// Every maximal firing sequence that stops at a deadlock or just after its
/// first repeated marking.
pub fn maximal_seq_traces(
    net: &PetriNet,
    limit: usize,
) -> Result<Vec<SeqTrace<'_>>, SemanticsError> {
    let mut out = Vec::new();
    let mut path = Vec::new();
    let mut visited = vec![net.initial_marking().clone()];
    seq_dfs(net, &mut path, &mut visited, limit, &mut out)?;
    Ok(out)
}

fn seq_dfs<'a>(
    net: &'a PetriNet,
    path: &mut Vec<TransitionId>,
    visited: &mut Vec<Marking>,
    limit: usize,
    out: &mut Vec<SeqTrace<'a>>,
) -> Result<(), SemanticsError> {
    let m = visited.last().expect("non-empty").clone();
    let repeated = visited[..visited.len() - 1].contains(&m);
    let enabled: Vec<TransitionId> = net.enabled(&m).collect();
    if repeated || enabled.is_empty() {
        if out.len() >= limit {
            return Err(SemanticsError::TooManyTraces(limit));
        }
        out.push(SeqTrace {
            net,
            steps: path.clone(),
            markings: visited.clone(),
        });
        return Ok(());
    }
    for t in enabled {
        let next = net.fire(&m, t)?;
        path.push(t);
        visited.push(next);
        seq_dfs(net, path, visited, limit, out)?;
        visited.pop();
        path.pop();
    }
    Ok(())
}

/// Every maximal run of maximal steps, cut like [`maximal_seq_traces`].
pub fn maximal_tc_traces(
    net: &PetriNet,
    limit: usize,
) -> Result<Vec<TcTrace<'_>>, SemanticsError> {
    let mut out = Vec::new();
    let mut path = Vec::new();
    let mut visited = vec![net.initial_marking().clone()];
    tc_dfs(net, &mut path, &mut visited, limit, &mut out)?;
    Ok(out)
}

fn tc_dfs<'a>(
    net: &'a PetriNet,
    path: &mut Vec<BTreeSet<TransitionId>>,
    visited: &mut Vec<Marking>,
    limit: usize,
    out: &mut Vec<TcTrace<'a>>,
) -> Result<(), SemanticsError> {
    let m = visited.last().expect("non-empty").clone();
    let repeated = visited[..visited.len() - 1].contains(&m);
    let steps = maximal_steps(net, &m);
    if repeated || steps.is_empty() {
        if out.len() >= limit {
            return Err(SemanticsError::TooManyTraces(limit));
        }
        out.push(TcTrace {
            net,
            steps: path.clone(),
            markings: visited.clone(),
        });
        return Ok(());
    }
    for step in steps {
        let next = tc_fire(net, &m, &step)?;
        path.push(step);
        visited.push(next);
        tc_dfs(net, path, visited, limit, out)?;
        visited.pop();
        path.pop();
    }
    Ok(())
}

impl fmt::Display for SeqTrace<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "   {}", self.net.format_marking(&self.markings[0]))?;
        for (i, &t) in self.steps.iter().enumerate() {
            writeln!(
                f,
                "{:>2} {} -> {}",
                i + 1,
                self.net.transition_name(t),
                self.net.format_marking(&self.markings[i + 1])
            )?;
        }
        Ok(())
    }
}

impl fmt::Display for TcTrace<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "   {}", self.net.format_marking(&self.markings[0]))?;
        for (i, ts) in self.steps.iter().enumerate() {
            let names: Vec<&str> = ts.iter().map(|&t| self.net.transition_name(t)).collect();
            writeln!(
                f,
                "{:>2} {{{}}} -> {}",
                i + 1,
                names.join(", "),
                self.net.format_marking(&self.markings[i + 1])
            )?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::net::NetBuilder;

    fn chain() -> PetriNet {
        let mut b = NetBuilder::new();
        let a = b.marked_place("a");
        let c = b.place("c");
        let d = b.place("d");
        b.transition("t1", [a], [c]);
        b.transition("t2", [c], [d]);
        b.build().unwrap()
    }

    fn loop_net() -> PetriNet {
        let mut b = NetBuilder::new();
        let a = b.marked_place("a");
        let c = b.place("c");
        b.transition("go", [a], [c]);
        b.transition("back", [c], [a]);
        b.build().unwrap()
    }

    #[test]
    fn dependent_swap_is_refused() {
        let net = chain();
        let tr = SeqTrace::from_names(&net, &["t1", "t2"]).unwrap();
        assert!(matches!(
            reorder_adjacent(&tr, 1),
            Err(SemanticsError::Reorder { index: 1, .. })
        ));
        assert!(reorder_adjacent(&tr, 2).is_err());
        assert!(reorder_adjacent(&tr, 0).is_err());
    }

    #[test]
    fn chain_groups_into_singletons() {
        let net = chain();
        let tr = SeqTrace::from_names(&net, &["t1", "t2"]).unwrap();
        let tc = seq_to_tc(&tr).unwrap();
        assert!(tc.steps().iter().all(|s| s.len() == 1));
        assert_eq!(tc.len(), 2);
    }

    #[test]
    fn empty_traces() {
        let net = chain();
        let tc = TcTrace::new(&net, vec![]).unwrap();
        assert!(tc_to_seq(&tc).is_empty());
        assert!(TcTrace::new(&net, vec![BTreeSet::new()]).is_err());
    }

    #[test]
    fn bounded_traces() {
        let net = loop_net();
        assert!(is_bounded_trace(&SeqTrace::from_names(&net, &["go"]).unwrap()));
        assert!(is_bounded_trace(&SeqTrace::from_names(&net, &["go", "back"]).unwrap()));
        assert!(!is_bounded_trace(
            &SeqTrace::from_names(&net, &["go", "back", "go", "back"]).unwrap()
        ));
    }

    #[test]
    fn terminal_marking_has_no_concurrent_step() {
        let net = chain();
        let end = SeqTrace::from_names(&net, &["t1", "t2"]).unwrap();
        assert!(max_concurrent_set(&net, end.final_marking()).unwrap().is_empty());
        assert!(maximal_steps(&net, end.final_marking()).is_empty());
    }

    #[test]
    fn loop_traces_stop_after_repetition() {
        let net = loop_net();
        let traces = maximal_seq_traces(&net, 10).unwrap();
        assert_eq!(traces.len(), 1);
        assert_eq!(traces[0].step_names(), vec!["go", "back"]);
    }

    #[test]
    fn no_transition_reach_tc() {
        let mut b = NetBuilder::new();
        b.marked_place("a");
        let net = b.build().unwrap();
        assert_eq!(reach_tc(&net).unwrap().len(), 1);
    }
}
