//! 1-bounded Petri nets: structure, firing, reachability, conflict and SCCs.
//!
//! Places and transitions are dense indices into the owning [`PetriNet`];
//! their order is the declaration order, which keeps every derived artifact
//! (encodings, DOT files, reports) reproducible.

use std::collections::{BTreeSet, HashMap, VecDeque};
use std::fmt;

use thiserror::Error;

/// Default cap on the number of markings a reachability search may visit.
pub const DEFAULT_MARKING_GUARD: usize = 1 << 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PlaceId(pub u32);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TransitionId(pub u32);

impl PlaceId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl TransitionId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

/// A place or a transition of a net.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Node {
    Place(PlaceId),
    Transition(TransitionId),
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum NetError {
    #[error("unknown place {0}")]
    UnknownPlace(String),
    #[error("unknown transition {0}")]
    UnknownTransition(String),
    #[error("unknown node {0:?}")]
    UnknownNode(Node),
    #[error("duplicate name {0}")]
    DuplicateName(String),
    #[error("transition {0} has an empty preset")]
    EmptyPreset(String),
    #[error("transition {0} has an empty postset")]
    EmptyPostset(String),
    #[error("transition {transition} is not enabled at {marking}")]
    NotEnabled { transition: String, marking: String },
    #[error("firing {transition} puts a second token on {place}")]
    Unsafe { transition: String, place: String },
    #[error("transitions {0} and {1} share a preset place")]
    Conflict(String, String),
    #[error("more than {0} reachable markings")]
    TooManyMarkings(usize),
}

/// A set of marked places. Nets are 1-bounded, so a set is enough.
#[derive(Debug, Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Marking(BTreeSet<PlaceId>);

impl Marking {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn contains(&self, p: PlaceId) -> bool {
        self.0.contains(&p)
    }

    pub fn insert(&mut self, p: PlaceId) -> bool {
        self.0.insert(p)
    }

    pub fn remove(&mut self, p: PlaceId) -> bool {
        self.0.remove(&p)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = PlaceId> + '_ {
        self.0.iter().copied()
    }

    pub fn places(&self) -> &BTreeSet<PlaceId> {
        &self.0
    }

    pub fn is_superset_of<'a>(&self, places: impl IntoIterator<Item = &'a PlaceId>) -> bool {
        places.into_iter().all(|p| self.0.contains(p))
    }
}

impl FromIterator<PlaceId> for Marking {
    fn from_iter<I: IntoIterator<Item = PlaceId>>(iter: I) -> Self {
        Marking(iter.into_iter().collect())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct TransitionData {
    name: String,
    pre: Vec<PlaceId>,
    post: Vec<PlaceId>,
}

/// A finite 1-bounded Petri net. Immutable once built.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PetriNet {
    place_names: Vec<String>,
    transitions: Vec<TransitionData>,
    place_pre: Vec<Vec<TransitionId>>,
    place_post: Vec<Vec<TransitionId>>,
    initial: Marking,
    place_index: HashMap<String, PlaceId>,
    transition_index: HashMap<String, TransitionId>,
}

/// Incremental construction of a [`PetriNet`]; validation happens in [`build`](Self::build).
#[derive(Debug, Default, Clone)]
pub struct NetBuilder {
    place_names: Vec<String>,
    transitions: Vec<TransitionData>,
    initial: BTreeSet<PlaceId>,
}

impl NetBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn place(&mut self, name: impl Into<String>) -> PlaceId {
        let id = PlaceId(self.place_names.len() as u32);
        self.place_names.push(name.into());
        id
    }

    pub fn marked_place(&mut self, name: impl Into<String>) -> PlaceId {
        let id = self.place(name);
        self.initial.insert(id);
        id
    }

    pub fn mark(&mut self, p: PlaceId) {
        self.initial.insert(p);
    }

    pub fn transition(
        &mut self,
        name: impl Into<String>,
        pre: impl IntoIterator<Item = PlaceId>,
        post: impl IntoIterator<Item = PlaceId>,
    ) -> TransitionId {
        let id = TransitionId(self.transitions.len() as u32);
        let mut pre: Vec<PlaceId> = pre.into_iter().collect();
        let mut post: Vec<PlaceId> = post.into_iter().collect();
        pre.sort();
        pre.dedup();
        post.sort();
        post.dedup();
        self.transitions.push(TransitionData {
            name: name.into(),
            pre,
            post,
        });
        id
    }

    pub fn place_count(&self) -> usize {
        self.place_names.len()
    }

    pub fn build(self) -> Result<PetriNet, NetError> {
        let np = self.place_names.len();
        let mut place_index = HashMap::new();
        let mut transition_index = HashMap::new();
        for (i, name) in self.place_names.iter().enumerate() {
            if place_index.insert(name.clone(), PlaceId(i as u32)).is_some() {
                return Err(NetError::DuplicateName(name.clone()));
            }
        }
        let mut place_pre = vec![Vec::new(); np];
        let mut place_post = vec![Vec::new(); np];
        for (i, t) in self.transitions.iter().enumerate() {
            if place_index.contains_key(&t.name)
                || transition_index
                    .insert(t.name.clone(), TransitionId(i as u32))
                    .is_some()
            {
                return Err(NetError::DuplicateName(t.name.clone()));
            }
            if t.pre.is_empty() {
                return Err(NetError::EmptyPreset(t.name.clone()));
            }
            if t.post.is_empty() {
                return Err(NetError::EmptyPostset(t.name.clone()));
            }
            for &p in t.pre.iter().chain(&t.post) {
                if p.index() >= np {
                    return Err(NetError::UnknownPlace(format!("#{}", p.0)));
                }
            }
            for &p in &t.pre {
                place_post[p.index()].push(TransitionId(i as u32));
            }
            for &p in &t.post {
                place_pre[p.index()].push(TransitionId(i as u32));
            }
        }
        if let Some(p) = self.initial.iter().find(|p| p.index() >= np) {
            return Err(NetError::UnknownPlace(format!("#{}", p.0)));
        }
        Ok(PetriNet {
            place_names: self.place_names,
            transitions: self.transitions,
            place_pre,
            place_post,
            initial: Marking(self.initial),
            place_index,
            transition_index,
        })
    }
}

impl PetriNet {
    pub fn place_count(&self) -> usize {
        self.place_names.len()
    }

    pub fn transition_count(&self) -> usize {
        self.transitions.len()
    }

    pub fn places(&self) -> impl DoubleEndedIterator<Item = PlaceId> + ExactSizeIterator {
        (0..self.place_names.len() as u32).map(PlaceId)
    }

    pub fn transitions(&self) -> impl DoubleEndedIterator<Item = TransitionId> + ExactSizeIterator {
        (0..self.transitions.len() as u32).map(TransitionId)
    }

    pub fn initial_marking(&self) -> &Marking {
        &self.initial
    }

    pub fn place_name(&self, p: PlaceId) -> &str {
        &self.place_names[p.index()]
    }

    pub fn transition_name(&self, t: TransitionId) -> &str {
        &self.transitions[t.index()].name
    }

    pub fn node_name(&self, n: Node) -> &str {
        match n {
            Node::Place(p) => self.place_name(p),
            Node::Transition(t) => self.transition_name(t),
        }
    }

    pub fn place(&self, name: &str) -> Result<PlaceId, NetError> {
        self.place_index
            .get(name)
            .copied()
            .ok_or_else(|| NetError::UnknownPlace(name.to_string()))
    }

    pub fn transition(&self, name: &str) -> Result<TransitionId, NetError> {
        self.transition_index
            .get(name)
            .copied()
            .ok_or_else(|| NetError::UnknownTransition(name.to_string()))
    }

    /// Looks a node up by name, places first.
    pub fn node(&self, name: &str) -> Result<Node, NetError> {
        if let Some(&p) = self.place_index.get(name) {
            return Ok(Node::Place(p));
        }
        self.transition(name).map(Node::Transition)
    }

    /// Preset of a transition, sorted.
    pub fn pre(&self, t: TransitionId) -> &[PlaceId] {
        &self.transitions[t.index()].pre
    }

    /// Postset of a transition, sorted.
    pub fn post(&self, t: TransitionId) -> &[PlaceId] {
        &self.transitions[t.index()].post
    }

    /// Transitions producing into `p`.
    pub fn producers(&self, p: PlaceId) -> &[TransitionId] {
        &self.place_pre[p.index()]
    }

    /// Transitions consuming from `p`.
    pub fn consumers(&self, p: PlaceId) -> &[TransitionId] {
        &self.place_post[p.index()]
    }

    fn check_node(&self, n: Node) -> Result<(), NetError> {
        let ok = match n {
            Node::Place(p) => p.index() < self.place_count(),
            Node::Transition(t) => t.index() < self.transition_count(),
        };
        if ok {
            Ok(())
        } else {
            Err(NetError::UnknownNode(n))
        }
    }

    pub fn preset(&self, n: Node) -> Result<BTreeSet<Node>, NetError> {
        self.check_node(n)?;
        Ok(match n {
            Node::Place(p) => self.producers(p).iter().map(|&t| Node::Transition(t)).collect(),
            Node::Transition(t) => self.pre(t).iter().map(|&p| Node::Place(p)).collect(),
        })
    }

    pub fn postset(&self, n: Node) -> Result<BTreeSet<Node>, NetError> {
        self.check_node(n)?;
        Ok(match n {
            Node::Place(p) => self.consumers(p).iter().map(|&t| Node::Transition(t)).collect(),
            Node::Transition(t) => self.post(t).iter().map(|&p| Node::Place(p)).collect(),
        })
    }

    pub fn is_enabled(&self, m: &Marking, t: TransitionId) -> bool {
        m.is_superset_of(self.pre(t))
    }

    pub fn enabled(&self, m: &Marking) -> impl Iterator<Item = TransitionId> + '_ {
        let m = m.clone();
        self.transitions().filter(move |&t| self.is_enabled(&m, t))
    }

    pub fn format_marking(&self, m: &Marking) -> String {
        let names: Vec<&str> = m.iter().map(|p| self.place_name(p)).collect();
        format!("{{{}}}", names.join(", "))
    }

    /// Fires `t`, refusing steps that would put two tokens on a place.
    pub fn fire(&self, m: &Marking, t: TransitionId) -> Result<Marking, NetError> {
        if !self.is_enabled(m, t) {
            return Err(NetError::NotEnabled {
                transition: self.transition_name(t).to_string(),
                marking: self.format_marking(m),
            });
        }
        let mut next = m.clone();
        for &p in self.pre(t) {
            next.remove(p);
        }
        for &p in self.post(t) {
            if !next.insert(p) {
                return Err(NetError::Unsafe {
                    transition: self.transition_name(t).to_string(),
                    place: self.place_name(p).to_string(),
                });
            }
        }
        Ok(next)
    }

    pub fn reachable_markings(&self) -> Result<BTreeSet<Marking>, NetError> {
        self.reachable_markings_with_guard(DEFAULT_MARKING_GUARD)
    }

    /// Breadth-first fixed point of [`fire`](Self::fire) from the initial marking.
    pub fn reachable_markings_with_guard(
        &self,
        guard: usize,
    ) -> Result<BTreeSet<Marking>, NetError> {
        let mut seen = BTreeSet::new();
        let mut queue = VecDeque::new();
        seen.insert(self.initial.clone());
        queue.push_back(self.initial.clone());
        while let Some(m) = queue.pop_front() {
            for t in self.transitions() {
                if !self.is_enabled(&m, t) {
                    continue;
                }
                let next = self.fire(&m, t)?;
                if !seen.contains(&next) {
                    if seen.len() >= guard {
                        return Err(NetError::TooManyMarkings(guard));
                    }
                    seen.insert(next.clone());
                    queue.push_back(next);
                }
            }
        }
        Ok(seen)
    }

    /// Nodes reachable from `start` along flow arcs, `start` included.
    fn forward_closure(&self, start: Node) -> BTreeSet<Node> {
        let mut seen = BTreeSet::new();
        let mut stack = vec![start];
        while let Some(n) = stack.pop() {
            if !seen.insert(n) {
                continue;
            }
            match n {
                Node::Place(p) => stack.extend(self.consumers(p).iter().map(|&t| Node::Transition(t))),
                Node::Transition(t) => stack.extend(self.post(t).iter().map(|&p| Node::Place(p))),
            }
        }
        seen
    }

    /// Structural conflict: some place `p` outside `{x, y}` has two distinct
    /// outgoing transitions from which `x` and `y` are respectively reachable.
    ///
    /// Reachability is plain graph reachability over flow arcs; markings play
    /// no role.
    pub fn in_conflict(&self, x: Node, y: Node) -> Result<bool, NetError> {
        self.check_node(x)?;
        self.check_node(y)?;
        let closures: Vec<BTreeSet<Node>> = self
            .transitions()
            .map(|t| self.forward_closure(Node::Transition(t)))
            .collect();
        for p in self.places() {
            if Node::Place(p) == x || Node::Place(p) == y {
                continue;
            }
            let outs = self.consumers(p);
            for &t in outs {
                if !closures[t.index()].contains(&x) {
                    continue;
                }
                if outs
                    .iter()
                    .any(|&u| u != t && closures[u.index()].contains(&y))
                {
                    return Ok(true);
                }
            }
        }
        Ok(false)
    }

    /// Place sets of the strongly connected components of the flow graph.
    ///
    /// Every non-trivial component (more than one node, or a node with a
    /// self-loop) contributes its places; all remaining places are collected
    /// into one trailing set. Components are ordered by their smallest place.
    pub fn sccs(&self) -> Vec<BTreeSet<PlaceId>> {
        use petgraph::graph::DiGraph;

        let np = self.place_count();
        let mut g = DiGraph::<Node, ()>::with_capacity(np + self.transition_count(), 0);
        let pidx: Vec<_> = self.places().map(|p| g.add_node(Node::Place(p))).collect();
        let tidx: Vec<_> = self
            .transitions()
            .map(|t| g.add_node(Node::Transition(t)))
            .collect();
        for t in self.transitions() {
            for &p in self.pre(t) {
                g.add_edge(pidx[p.index()], tidx[t.index()], ());
            }
            for &p in self.post(t) {
                g.add_edge(tidx[t.index()], pidx[p.index()], ());
            }
        }
        let mut sets = Vec::new();
        let mut covered = BTreeSet::new();
        for comp in petgraph::algo::tarjan_scc(&g) {
            let nontrivial = comp.len() > 1 || g.contains_edge(comp[0], comp[0]);
            if !nontrivial {
                continue;
            }
            let places: BTreeSet<PlaceId> = comp
                .iter()
                .filter_map(|&ix| match g[ix] {
                    Node::Place(p) => Some(p),
                    Node::Transition(_) => None,
                })
                .collect();
            if !places.is_empty() {
                covered.extend(places.iter().copied());
                sets.push(places);
            }
        }
        sets.sort_by_key(|s| *s.iter().next().unwrap());
        let rest: BTreeSet<PlaceId> = self.places().filter(|p| !covered.contains(p)).collect();
        if !rest.is_empty() {
            sets.push(rest);
        }
        sets
    }
}

impl fmt::Display for PetriNet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for t in self.transitions() {
            let pre: Vec<_> = self.pre(t).iter().map(|&p| self.place_name(p)).collect();
            let post: Vec<_> = self.post(t).iter().map(|&p| self.place_name(p)).collect();
            writeln!(
                f,
                "{}: {{{}}} -> {{{}}}",
                self.transition_name(t),
                pre.join(", "),
                post.join(", ")
            )?;
        }
        Ok(())
    }
}
