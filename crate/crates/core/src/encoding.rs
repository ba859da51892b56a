//! QBF encodings of bounded synthesis over a bounded unfolding.
//!
//! Both encodings have the prefix `∃ strategy ∀ (marking, environment)`. The
//! strategy variable `(p, t)` allows the system place copy `p` to take part
//! in transitions labelled with the original transition `t`; the marking
//! variable `(p, i)` says that `p` holds a token at time `i` (1-based).
//!
//! The true-concurrent encoding merges the marking and environment blocks
//! into a single universal block.

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::sync::Arc;

use thiserror::Error;

use crate::formula::{Circuit, Lit, Qbf};
use crate::net::{PlaceId, TransitionId};
use crate::unfolding::BoundedUnfolding;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum EncodingError {
    #[error("simulation length must be at least 1, got {0}")]
    BadLength(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum EncodingKind {
    Sequential,
    TrueConcurrent,
}

impl EncodingKind {
    pub fn short_name(self) -> &'static str {
        match self {
            EncodingKind::Sequential => "seq",
            EncodingKind::TrueConcurrent => "tc",
        }
    }
}

impl fmt::Display for EncodingKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.short_name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EncodeOptions {
    /// Whether the environment may stall transitions with a system place in
    /// their preset. Switching this off gives an unsound encoding and exists
    /// only for diagnostics.
    pub stalling: bool,
}

impl Default for EncodeOptions {
    fn default() -> Self {
        Self { stalling: true }
    }
}

/// What a QBF variable stands for. Places and transitions are unfolding ids
/// except for the original transition of a strategy variable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum VarRole {
    Strategy {
        place: PlaceId,
        transition: TransitionId,
    },
    Marking {
        place: PlaceId,
        time: usize,
    },
    EnvChoice {
        place: PlaceId,
        transition: TransitionId,
        time: usize,
    },
    Stall {
        transition: TransitionId,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct FormulaStats {
    pub strategy_vars: usize,
    pub marking_vars: usize,
    pub env_choice_vars: usize,
    pub stall_vars: usize,
    pub aux_vars: usize,
    pub gates: usize,
}

impl fmt::Display for FormulaStats {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "strategy variables:  {}", self.strategy_vars)?;
        writeln!(f, "marking variables:   {}", self.marking_vars)?;
        writeln!(f, "env choice variables: {}", self.env_choice_vars)?;
        writeln!(f, "stall variables:     {}", self.stall_vars)?;
        writeln!(f, "aux variables:       {}", self.aux_vars)?;
        writeln!(f, "gates:               {}", self.gates)
    }
}

/// A closed 2-QBF together with the meaning of its variables.
#[derive(Debug, Clone)]
pub struct QbfProblem {
    pub qbf: Qbf,
    pub kind: EncodingKind,
    pub n: usize,
    roles: Vec<VarRole>,
    index: HashMap<VarRole, u32>,
    unfolding: Arc<BoundedUnfolding>,
}

impl QbfProblem {
    pub fn unfolding(&self) -> &BoundedUnfolding {
        &self.unfolding
    }

    pub fn unfolding_arc(&self) -> Arc<BoundedUnfolding> {
        self.unfolding.clone()
    }

    pub fn role(&self, v: u32) -> VarRole {
        self.roles[v as usize]
    }

    pub fn roles(&self) -> &[VarRole] {
        &self.roles
    }

    pub fn var(&self, role: VarRole) -> Option<u32> {
        self.index.get(&role).copied()
    }

    /// Strategy variables with their (place copy, original transition).
    pub fn strategy_vars(&self) -> Vec<(u32, PlaceId, TransitionId)> {
        self.qbf
            .exists
            .iter()
            .map(|&v| match self.roles[v as usize] {
                VarRole::Strategy { place, transition } => (v, place, transition),
                other => unreachable!("{other:?} in the strategy block"),
            })
            .collect()
    }

    pub fn stats(&self) -> FormulaStats {
        let mut s = FormulaStats {
            gates: self.qbf.circuit.cone(self.qbf.output).len(),
            ..FormulaStats::default()
        };
        for r in &self.roles {
            match r {
                VarRole::Strategy { .. } => s.strategy_vars += 1,
                VarRole::Marking { .. } => s.marking_vars += 1,
                VarRole::EnvChoice { .. } => s.env_choice_vars += 1,
                VarRole::Stall { .. } => s.stall_vars += 1,
            }
        }
        s
    }

    /// The same problem with some strategy variables fixed.
    pub fn pin_strategy(&self, pins: &[(PlaceId, TransitionId, bool)]) -> Option<QbfProblem> {
        let mut units = Vec::new();
        for &(p, t, val) in pins {
            let v = self.var(VarRole::Strategy {
                place: p,
                transition: t,
            })?;
            units.push((v, val));
        }
        let mut q = self.clone();
        q.qbf = self.qbf.with_units(&units);
        Some(q)
    }
}

/// Longest play that can avoid repeating a marking of the unfolding, plus
/// one: `2^|places| + 1`, saturating at `u64::MAX`.
pub fn max_simulation_length(u: &BoundedUnfolding) -> u64 {
    let places = u.net().place_count() as u32;
    1u64.checked_shl(places)
        .filter(|_| places < 64)
        .map_or(u64::MAX, |v| v.saturating_add(1))
}

struct Builder<'a> {
    u: &'a BoundedUnfolding,
    c: Circuit,
    roles: Vec<VarRole>,
    index: HashMap<VarRole, u32>,
    n: usize,
}

impl<'a> Builder<'a> {
    fn new(u: &'a BoundedUnfolding, n: usize) -> Self {
        Self {
            u,
            c: Circuit::new(),
            roles: Vec::new(),
            index: HashMap::new(),
            n,
        }
    }

    fn alloc(&mut self, role: VarRole) -> u32 {
        let v = self.roles.len() as u32;
        self.roles.push(role);
        self.index.insert(role, v);
        // variable nodes in variable order keep gate operands sorted by id
        self.c.var(v);
        v
    }

    fn lit(&mut self, role: VarRole) -> Lit {
        let v = self.index[&role];
        self.c.var(v)
    }

    fn alloc_strategy_and_marking(&mut self) -> (Vec<u32>, Vec<u32>) {
        let net = self.u.net();
        let game = self.u.game();
        let mut exists = Vec::new();
        for p in net.places().filter(|&p| game.is_system(p)) {
            let originals: BTreeSet<TransitionId> = net
                .consumers(p)
                .iter()
                .map(|&t| self.u.transition_label(t))
                .collect();
            for t in originals {
                exists.push(self.alloc(VarRole::Strategy {
                    place: p,
                    transition: t,
                }));
            }
        }
        let mut forall = Vec::new();
        for time in 1..=self.n {
            for p in net.places() {
                forall.push(self.alloc(VarRole::Marking { place: p, time }));
            }
        }
        (exists, forall)
    }

    fn m(&mut self, p: PlaceId, time: usize) -> Lit {
        self.lit(VarRole::Marking { place: p, time })
    }

    /// Strategy literal of system place `p` for unfolding transition `t`.
    fn s(&mut self, p: PlaceId, t: TransitionId) -> Lit {
        let transition = self.u.transition_label(t);
        self.lit(VarRole::Strategy {
            place: p,
            transition,
        })
    }

    fn system_pre(&self, t: TransitionId) -> Vec<PlaceId> {
        self.u.game().system_pre(t).collect()
    }

    fn initial(&mut self) -> Lit {
        let net = self.u.net();
        let lits: Vec<Lit> = net
            .places()
            .map(|p| {
                let l = self.m(p, 1);
                if net.initial_marking().contains(p) {
                    l
                } else {
                    !l
                }
            })
            .collect();
        self.c.and(lits)
    }

    fn seqflow(&mut self, i: usize) -> Lit {
        let net = self.u.net();
        let mut alternatives = Vec::new();
        for t in net.transitions() {
            let mut lits = Vec::new();
            for &p in net.pre(t) {
                lits.push(self.m(p, i));
            }
            for p in self.system_pre(t) {
                lits.push(self.s(p, t));
            }
            for &p in net.post(t) {
                lits.push(self.m(p, i + 1));
            }
            for &p in net.pre(t) {
                if !net.post(t).contains(&p) {
                    lits.push(!self.m(p, i + 1));
                }
            }
            for p in net.places() {
                if !net.pre(t).contains(&p) && !net.post(t).contains(&p) {
                    let (a, b) = (self.m(p, i), self.m(p, i + 1));
                    lits.push(self.c.iff(a, b));
                }
            }
            alternatives.push(self.c.and(lits));
        }
        self.c.or(alternatives)
    }

    fn win(&mut self, i: usize) -> Lit {
        let net = self.u.net();
        let game = self.u.game();
        let nobad: Vec<Lit> = game
            .bad_places()
            .iter()
            .map(|&p| !self.m(p, i))
            .collect();
        let nobad = self.c.and(nobad);

        let mut det = Vec::new();
        let transitions: Vec<TransitionId> = net.transitions().collect();
        for (k, &t1) in transitions.iter().enumerate() {
            let s1 = self.system_pre(t1);
            for &t2 in &transitions[k + 1..] {
                let s2 = self.system_pre(t2);
                if !s1.iter().any(|p| s2.contains(p)) {
                    continue;
                }
                let mut lits = Vec::new();
                for &p in net.pre(t1).iter().chain(net.pre(t2)) {
                    lits.push(!self.m(p, i));
                }
                for &p in &s1 {
                    lits.push(!self.s(p, t1));
                }
                for &p in &s2 {
                    lits.push(!self.s(p, t2));
                }
                det.push(self.c.or(lits));
            }
        }
        let det = self.c.and(det);

        let mut deadlock = Vec::new();
        let mut terminating = Vec::new();
        for &t in &transitions {
            let unmarked: Vec<Lit> = net.pre(t).iter().map(|&p| !self.m(p, i)).collect();
            terminating.push(self.c.or(unmarked.clone()));
            let mut lits = unmarked;
            for p in self.system_pre(t) {
                lits.push(!self.s(p, t));
            }
            deadlock.push(self.c.or(lits));
        }
        let deadlock = self.c.and(deadlock);
        let terminating = self.c.and(terminating);
        let progress = self.c.implies(deadlock, terminating);
        self.c.and([nobad, det, progress])
    }

    fn same_marking(&mut self, places: &[PlaceId], i1: usize, i2: usize) -> Lit {
        let lits: Vec<Lit> = places
            .iter()
            .map(|&p| {
                let (a, b) = (self.m(p, i1), self.m(p, i2));
                self.c.iff(a, b)
            })
            .collect();
        self.c.and(lits)
    }

    fn repeats(&mut self, places: &[PlaceId]) -> Lit {
        let mut pairs = Vec::new();
        for i2 in 1..=self.n {
            for i1 in 1..i2 {
                pairs.push(self.same_marking(places, i1, i2));
            }
        }
        self.c.or(pairs)
    }

    /// `∧_{i<n} (seq_i → win_i) ∧ (seq_n → win_n ∧ loop)`.
    fn body(&mut self, flows: &[Lit], lp: Lit) -> Lit {
        let mut seq = self.initial();
        let mut parts = Vec::new();
        for i in 1..=self.n {
            if i > 1 {
                seq = self.c.and([seq, flows[i - 2]]);
            }
            let w = self.win(i);
            let goal = if i == self.n { self.c.and([w, lp]) } else { w };
            parts.push(self.c.implies(seq, goal));
        }
        self.c.and(parts)
    }

    fn finish(self, exists: Vec<u32>, forall: Vec<u32>, output: Lit, kind: EncodingKind, u: Arc<BoundedUnfolding>) -> QbfProblem {
        QbfProblem {
            qbf: Qbf {
                num_vars: self.roles.len() as u32,
                exists,
                forall,
                circuit: self.c,
                output,
            },
            kind,
            n: self.n,
            roles: self.roles,
            index: self.index,
            unfolding: u,
        }
    }
}

pub fn encode(
    u: &Arc<BoundedUnfolding>,
    kind: EncodingKind,
    n: usize,
) -> Result<QbfProblem, EncodingError> {
    match kind {
        EncodingKind::Sequential => encode_sequential(u, n),
        EncodingKind::TrueConcurrent => encode_true_concurrent(u, n, EncodeOptions::default()),
    }
}

/// Every interleaving of single firings.
pub fn encode_sequential(
    u: &Arc<BoundedUnfolding>,
    n: usize,
) -> Result<QbfProblem, EncodingError> {
    if n < 1 {
        return Err(EncodingError::BadLength(n));
    }
    let mut b = Builder::new(u, n);
    let (exists, forall) = b.alloc_strategy_and_marking();
    let flows: Vec<Lit> = (1..n).map(|i| b.seqflow(i)).collect();
    let all: Vec<PlaceId> = u.net().places().collect();
    let lp = b.repeats(&all);
    let out = b.body(&flows, lp);
    Ok(b.finish(exists, forall, out, EncodingKind::Sequential, u.clone()))
}

/// Maximal steps of enabled, non-stalled transitions chosen by the environment.
pub fn encode_true_concurrent(
    u: &Arc<BoundedUnfolding>,
    n: usize,
    options: EncodeOptions,
) -> Result<QbfProblem, EncodingError> {
    if n < 1 {
        return Err(EncodingError::BadLength(n));
    }
    let net = u.net();
    let game = u.game();
    let mut b = Builder::new(u, n);
    let (exists, mut forall) = b.alloc_strategy_and_marking();
    // Environment places without outgoing transitions have nothing to choose.
    let choosers: Vec<PlaceId> = net
        .places()
        .filter(|&p| game.is_env(p) && !net.consumers(p).is_empty())
        .collect();
    for time in 1..n {
        for &p in &choosers {
            for &t in net.consumers(p) {
                forall.push(b.alloc(VarRole::EnvChoice {
                    place: p,
                    transition: t,
                    time,
                }));
            }
        }
    }
    let stallable: Vec<TransitionId> = if options.stalling {
        net.transitions().filter(|&t| game.has_system_pre(t)).collect()
    } else {
        Vec::new()
    };
    for &t in &stallable {
        forall.push(b.alloc(VarRole::Stall { transition: t }));
    }

    let mut choice = Vec::new();
    for time in 1..n {
        for &p in &choosers {
            let out = net.consumers(p);
            let mut exactly_one = Vec::new();
            for &t in out {
                let mut lits = Vec::new();
                for &t2 in out {
                    let l = b.lit(VarRole::EnvChoice {
                        place: p,
                        transition: t2,
                        time,
                    });
                    lits.push(if t2 == t { l } else { !l });
                }
                exactly_one.push(b.c.and(lits));
            }
            choice.push(b.c.or(exactly_one));
        }
    }
    let choice = b.c.and(choice);

    let mut flows = Vec::new();
    for i in 1..n {
        let mut enabled = Vec::with_capacity(net.transition_count());
        for t in net.transitions() {
            let mut lits = Vec::new();
            for &p in net.pre(t) {
                lits.push(b.m(p, i));
                if game.is_system(p) {
                    lits.push(b.s(p, t));
                } else {
                    lits.push(b.lit(VarRole::EnvChoice {
                        place: p,
                        transition: t,
                        time: i,
                    }));
                }
            }
            if stallable.contains(&t) {
                lits.push(b.lit(VarRole::Stall { transition: t }));
            }
            enabled.push(b.c.and(lits));
        }
        let mut fire = Vec::new();
        for t in net.transitions() {
            let mut effect = Vec::new();
            for &p in net.pre(t) {
                if !net.post(t).contains(&p) {
                    effect.push(!b.m(p, i + 1));
                }
            }
            for &p in net.post(t) {
                effect.push(b.m(p, i + 1));
            }
            let effect = b.c.and(effect);
            fire.push(b.c.implies(enabled[t.index()], effect));
        }
        let fire = b.c.and(fire);
        let mut update = Vec::new();
        for p in net.places() {
            let idle: Vec<Lit> = net
                .producers(p)
                .iter()
                .chain(net.consumers(p))
                .map(|t| !enabled[t.index()])
                .collect();
            let idle = b.c.and(idle);
            let (a, c) = (b.m(p, i), b.m(p, i + 1));
            let keep = b.c.iff(a, c);
            update.push(b.c.implies(idle, keep));
        }
        let update = b.c.and(update);
        flows.push(b.c.and([fire, update]));
    }

    let mut loops = Vec::new();
    for scc in net.sccs() {
        let places: Vec<PlaceId> = scc.into_iter().collect();
        loops.push(b.repeats(&places));
    }
    let lp = b.c.and(loops);
    let body = b.body(&flows, lp);
    let out = b.c.implies(choice, body);
    Ok(b.finish(exists, forall, out, EncodingKind::TrueConcurrent, u.clone()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bench;
    use crate::unfolding::unfold;

    #[test]
    fn length_zero_is_rejected() {
        let u = Arc::new(unfold(&bench::production_line(1), 1).unwrap());
        assert_eq!(
            encode_sequential(&u, 0).unwrap_err(),
            EncodingError::BadLength(0)
        );
        assert!(encode_true_concurrent(&u, 0, EncodeOptions::default()).is_err());
    }

    #[test]
    fn variable_counts_on_production_line() {
        let u = Arc::new(unfold(&bench::production_line(2), 1).unwrap());
        let places = u.net().place_count();
        assert_eq!(places, 12);
        let q = encode_true_concurrent(&u, 3, EncodeOptions::default()).unwrap();
        let stats = q.stats();
        assert_eq!(stats.marking_vars, places * 3);
        assert_eq!(stats.stall_vars, 8);
        let seq = encode_sequential(&u, 3).unwrap();
        assert_eq!(seq.stats().stall_vars, 0);
        assert_eq!(seq.stats().env_choice_vars, 0);
        assert_eq!(seq.stats().strategy_vars, stats.strategy_vars);
    }

    #[test]
    fn allocation_is_role_major() {
        let u = Arc::new(unfold(&bench::production_line(2), 2).unwrap());
        let q = encode_true_concurrent(&u, 3, EncodeOptions::default()).unwrap();
        let rank = |r: &VarRole| match r {
            VarRole::Strategy { .. } => 0,
            VarRole::Marking { .. } => 1,
            VarRole::EnvChoice { .. } => 2,
            VarRole::Stall { .. } => 3,
        };
        assert!(q.roles().windows(2).all(|w| rank(&w[0]) <= rank(&w[1])));
    }

    #[test]
    fn simulation_length() {
        let u = unfold(&bench::production_line(2), 1).unwrap();
        assert_eq!(max_simulation_length(&u), 4097);
    }
}
