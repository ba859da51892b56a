//! Bounded unfoldings.
//!
//! Every place copy stands for one causal past of its original place. The
//! construction proceeds in rounds: each round instantiates every original
//! transition on every combination of existing preset copies that can be
//! marked together, and gives the instance fresh postset copies. Once an
//! original place already has `bound` copies, the arc is folded back onto its
//! copy with ordinal 0, which merges causal pasts and may close cycles.
//!
//! Joint markability is judged from recorded causal histories. A copy that
//! received a folded arc, or that descends from one, has no exact history any
//! more; such copies are never used to rule a combination out.
//!
//! Copies are named after their original with one `'` per ordinal, in
//! creation order (`robot2`, `robot2'`, ...). Transition instances follow the
//! same convention.

use std::collections::{BTreeSet, HashSet};
use std::fmt::Write as _;
use std::sync::Arc;

use thiserror::Error;

use crate::game::{GameError, PetriGame};
use crate::net::{NetBuilder, PetriNet, PlaceId, TransitionId};

/// Default cap on the number of nodes of an unfolding.
pub const DEFAULT_NODE_GUARD: usize = 50_000;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum UnfoldError {
    #[error("memory bound must be at least 1, got {0}")]
    BadBound(usize),
    #[error("unfolding exceeds {0} nodes")]
    TooLarge(usize),
    #[error(transparent)]
    Game(#[from] GameError),
}

#[derive(Debug)]
struct Copy {
    orig: PlaceId,
    ordinal: u32,
    creator: Option<usize>,
    tainted: bool,
}

#[derive(Debug)]
struct Instance {
    orig: TransitionId,
    pre: Vec<usize>,
    post: Vec<usize>,
    history: BTreeSet<usize>,
    tainted: bool,
}

#[derive(Default)]
struct Builder {
    copies: Vec<Copy>,
    copies_of: Vec<Vec<usize>>,
    instances: Vec<Instance>,
    instances_of: Vec<usize>,
    keys: HashSet<(TransitionId, Vec<usize>)>,
}

impl Builder {
    fn new_copy(&mut self, orig: PlaceId, creator: Option<usize>, tainted: bool) -> usize {
        let id = self.copies.len();
        let ordinal = self.copies_of[orig.index()].len() as u32;
        self.copies.push(Copy {
            orig,
            ordinal,
            creator,
            tainted,
        });
        self.copies_of[orig.index()].push(id);
        id
    }

    fn history_of_copy(&self, c: usize) -> Option<&BTreeSet<usize>> {
        self.copies[c].creator.map(|i| &self.instances[i].history)
    }

    /// Whether the exact copies of `combo` can be marked at the same time.
    fn coverable(&self, combo: &[usize]) -> bool {
        let exact: Vec<usize> = combo
            .iter()
            .copied()
            .filter(|&c| !self.copies[c].tainted)
            .collect();
        let mut history = BTreeSet::new();
        for &c in &exact {
            if let Some(h) = self.history_of_copy(c) {
                history.extend(h.iter().copied());
            }
        }
        let mut consumed = HashSet::new();
        for &i in &history {
            for &c in &self.instances[i].pre {
                if !consumed.insert(c) {
                    // two past events took the same token
                    return false;
                }
            }
        }
        exact.iter().all(|c| !consumed.contains(c))
    }

    fn instantiate(
        &mut self,
        game: &PetriGame,
        t: TransitionId,
        combo: Vec<usize>,
        bound: usize,
        forced: bool,
    ) {
        let id = self.instances.len();
        let tainted = forced || combo.iter().any(|&c| self.copies[c].tainted);
        let mut history = BTreeSet::from([id]);
        if !tainted {
            for &c in &combo {
                if let Some(h) = self.history_of_copy(c) {
                    history.extend(h.iter().copied());
                }
            }
        }
        self.keys.insert((t, combo.clone()));
        self.instances.push(Instance {
            orig: t,
            pre: combo,
            post: Vec::new(),
            history,
            tainted,
        });
        self.instances_of[t.index()] += 1;
        let mut post = Vec::new();
        for &q in game.net().post(t) {
            if self.copies_of[q.index()].len() < bound {
                post.push(self.new_copy(q, Some(id), tainted));
            } else {
                let target = self.copies_of[q.index()][0];
                self.copies[target].tainted = true;
                post.push(target);
            }
        }
        self.instances[id].post = post;
    }

    fn propagate_taint(&mut self) {
        loop {
            let mut changed = false;
            for i in 0..self.instances.len() {
                if !self.instances[i].tainted
                    && self.instances[i].pre.iter().any(|&c| self.copies[c].tainted)
                {
                    self.instances[i].tainted = true;
                    changed = true;
                }
                if self.instances[i].tainted {
                    for k in 0..self.instances[i].post.len() {
                        let c = self.instances[i].post[k];
                        if !self.copies[c].tainted {
                            self.copies[c].tainted = true;
                            changed = true;
                        }
                    }
                }
            }
            if !changed {
                break;
            }
        }
    }

    fn size(&self) -> usize {
        self.copies.len() + self.instances.len()
    }
}

/// A bounded unfolding of a game together with its homomorphism back onto the
/// original nodes.
#[derive(Debug, Clone)]
pub struct BoundedUnfolding {
    game: PetriGame,
    original: Arc<PetriGame>,
    place_lambda: Vec<PlaceId>,
    transition_lambda: Vec<TransitionId>,
    copy_ordinal: Vec<u32>,
    bound: usize,
}

pub fn unfold(game: &PetriGame, bound: usize) -> Result<BoundedUnfolding, UnfoldError> {
    unfold_with_guard(game, bound, DEFAULT_NODE_GUARD)
}

pub fn unfold_with_guard(
    game: &PetriGame,
    bound: usize,
    guard: usize,
) -> Result<BoundedUnfolding, UnfoldError> {
    if bound < 1 {
        return Err(UnfoldError::BadBound(bound));
    }
    let net = game.net();
    let mut b = Builder {
        copies_of: vec![Vec::new(); net.place_count()],
        instances_of: vec![0; net.transition_count()],
        ..Builder::default()
    };
    let mut initial = Vec::new();
    for p in net.initial_marking().iter() {
        initial.push(b.new_copy(p, None, false));
    }

    loop {
        let mut changed = false;
        loop {
            b.propagate_taint();
            let frozen: Vec<usize> = b.copies_of.iter().map(Vec::len).collect();
            let mut round = Vec::new();
            for t in net.transitions() {
                let pre = net.pre(t);
                let choices: Vec<&[usize]> = pre
                    .iter()
                    .map(|p| &b.copies_of[p.index()][..frozen[p.index()]])
                    .collect();
                for combo in cartesian(&choices) {
                    if b.keys.contains(&(t, combo.clone())) || !b.coverable(&combo) {
                        continue;
                    }
                    round.push((t, combo));
                }
            }
            if round.is_empty() {
                break;
            }
            for (t, combo) in round {
                // an earlier instance of this round may have tainted a copy
                if b.keys.contains(&(t, combo.clone())) || !b.coverable(&combo) {
                    continue;
                }
                b.instantiate(game, t, combo, bound, false);
                changed = true;
                if b.size() > guard {
                    return Err(UnfoldError::TooLarge(guard));
                }
            }
        }
        // Transitions that never became instantiable still get one instance,
        // so that no original node is lost.
        if let Some(t) = net.transitions().find(|t| b.instances_of[t.index()] == 0) {
            let mut combo = Vec::new();
            for &p in net.pre(t) {
                if b.copies_of[p.index()].is_empty() {
                    b.new_copy(p, None, true);
                }
                combo.push(b.copies_of[p.index()][0]);
            }
            b.instantiate(game, t, combo, bound, true);
            changed = true;
        }
        if !changed {
            break;
        }
    }
    for p in net.places() {
        if b.copies_of[p.index()].is_empty() {
            b.new_copy(p, None, true);
        }
    }
    if b.size() > guard {
        return Err(UnfoldError::TooLarge(guard));
    }

    let mut nb = NetBuilder::new();
    let mut env = BTreeSet::new();
    let mut bad = BTreeSet::new();
    for c in &b.copies {
        let name = primed(net.place_name(c.orig), c.ordinal as usize);
        let id = nb.place(name);
        if game.is_env(c.orig) {
            env.insert(id);
        }
        if game.is_bad(c.orig) {
            bad.insert(id);
        }
    }
    for &c in &initial {
        nb.mark(PlaceId(c as u32));
    }
    let mut seen = vec![0usize; net.transition_count()];
    for inst in &b.instances {
        let ord = seen[inst.orig.index()];
        seen[inst.orig.index()] += 1;
        nb.transition(
            primed(net.transition_name(inst.orig), ord),
            inst.pre.iter().map(|&c| PlaceId(c as u32)),
            inst.post.iter().map(|&c| PlaceId(c as u32)),
        );
    }
    let unfolded = PetriGame::new(nb.build().map_err(GameError::from)?, env, bad)?;
    Ok(BoundedUnfolding {
        game: unfolded,
        original: Arc::new(game.clone()),
        place_lambda: b.copies.iter().map(|c| c.orig).collect(),
        transition_lambda: b.instances.iter().map(|i| i.orig).collect(),
        copy_ordinal: b.copies.iter().map(|c| c.ordinal).collect(),
        bound,
    })
}

fn primed(name: &str, ordinal: usize) -> String {
    let mut s = String::with_capacity(name.len() + ordinal);
    s.push_str(name);
    for _ in 0..ordinal {
        s.push('\'');
    }
    s
}

fn cartesian(choices: &[&[usize]]) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::new()];
    for options in choices {
        let mut next = Vec::with_capacity(out.len() * options.len());
        for prefix in &out {
            for &o in options.iter() {
                let mut v = prefix.clone();
                v.push(o);
                next.push(v);
            }
        }
        out = next;
    }
    out
}

impl BoundedUnfolding {
    /// The unfolded game; place classes and bad places are inherited.
    pub fn game(&self) -> &PetriGame {
        &self.game
    }

    pub fn net(&self) -> &PetriNet {
        self.game.net()
    }

    pub fn original(&self) -> &PetriGame {
        &self.original
    }

    pub fn bound(&self) -> usize {
        self.bound
    }

    pub fn place_label(&self, p: PlaceId) -> PlaceId {
        self.place_lambda[p.index()]
    }

    pub fn transition_label(&self, t: TransitionId) -> TransitionId {
        self.transition_lambda[t.index()]
    }

    /// `(original place, ordinal)` of a copy.
    pub fn copy_index(&self, p: PlaceId) -> (PlaceId, u32) {
        (self.place_lambda[p.index()], self.copy_ordinal[p.index()])
    }

    pub fn copies_of(&self, orig: PlaceId) -> Vec<PlaceId> {
        self.net()
            .places()
            .filter(|&p| self.place_lambda[p.index()] == orig)
            .collect()
    }

    /// Checks that the labelling is a homomorphism onto the original game.
    pub fn verify_homomorphism(&self) -> Vec<String> {
        verify(
            &self.game,
            &self.original,
            &self.place_lambda,
            &self.transition_lambda,
            self.bound,
        )
    }

    /// DOT rendering with the original label of every node.
    pub fn to_dot(&self, title: &str) -> String {
        let mut dot = self.game.to_dot(title);
        dot.truncate(dot.len() - 2);
        let net = self.net();
        let orig = self.original.net();
        for p in net.places() {
            let _ = writeln!(
                dot,
                "  \"p:{}\" [tooltip=\"{}\"];",
                net.place_name(p),
                orig.place_name(self.place_label(p))
            );
        }
        for t in net.transitions() {
            let _ = writeln!(
                dot,
                "  \"t:{}\" [tooltip=\"{}\"];",
                net.transition_name(t),
                orig.transition_name(self.transition_label(t))
            );
        }
        dot.push_str("}\n");
        dot
    }

    #[cfg(test)]
    pub(crate) fn corrupt_place_label(&mut self, p: PlaceId, to: PlaceId) {
        self.place_lambda[p.index()] = to;
    }
}

fn verify(
    game: &PetriGame,
    original: &PetriGame,
    place_lambda: &[PlaceId],
    transition_lambda: &[TransitionId],
    bound: usize,
) -> Vec<String> {
    let net = game.net();
    let orig = original.net();
    let mut report = Vec::new();
    if place_lambda.len() != net.place_count() || transition_lambda.len() != net.transition_count()
    {
        report.push("labelling is not total".to_string());
        return report;
    }
    for p in net.places() {
        let o = place_lambda[p.index()];
        if o.index() >= orig.place_count() {
            report.push(format!("{} maps outside the game", net.place_name(p)));
            continue;
        }
        if game.is_env(p) != original.is_env(o) || game.is_bad(p) != original.is_bad(o) {
            report.push(format!(
                "{} does not keep the classification of {}",
                net.place_name(p),
                orig.place_name(o)
            ));
        }
    }
    if !report.is_empty() {
        return report;
    }
    let mut counts = vec![0usize; orig.place_count()];
    for &o in place_lambda {
        counts[o.index()] += 1;
    }
    for o in orig.places() {
        if counts[o.index()] > bound {
            report.push(format!(
                "{} has {} copies, bound is {}",
                orig.place_name(o),
                counts[o.index()],
                bound
            ));
        }
    }
    let check = |side: &str, mine: &[PlaceId], theirs: &[PlaceId], t: TransitionId| {
        let mut image: Vec<PlaceId> = mine.iter().map(|p| place_lambda[p.index()]).collect();
        image.sort();
        if image != theirs {
            Some(format!(
                "{} of {} is not mapped bijectively",
                side,
                net.transition_name(t)
            ))
        } else {
            None
        }
    };
    for t in net.transitions() {
        let o = transition_lambda[t.index()];
        if o.index() >= orig.transition_count() {
            report.push(format!("{} maps outside the game", net.transition_name(t)));
            continue;
        }
        report.extend(check("preset", net.pre(t), orig.pre(o), t));
        report.extend(check("postset", net.post(t), orig.post(o), t));
    }
    let mut init: Vec<PlaceId> = net
        .initial_marking()
        .iter()
        .map(|p| place_lambda[p.index()])
        .collect();
    init.sort();
    let orig_init: Vec<PlaceId> = orig.initial_marking().iter().collect();
    if init != orig_init {
        report.push("initial marking is not mapped bijectively".to_string());
    }
    report
}
