//! Strategies as subprocesses of a bounded unfolding.
//!
//! All transition and place sets are kept in unfolding ids; the derived net
//! is materialized once for reachability and simulation.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::Arc;

use super::{GameError, PetriGame};
use crate::net::{Marking, NetBuilder, PlaceId, TransitionId};
use crate::unfolding::BoundedUnfolding;

/// Default cap on reachable markings (and on enumerated strategies) per check.
pub const DEFAULT_STRATEGY_GUARD: usize = 1 << 18;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StrategyKind {
    System,
    Environment,
    /// The whole unfolding, nothing removed yet.
    Unrestricted,
}

/// A failed strategy condition with the nodes that witness it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    /// A system place has two enabled outgoing transitions.
    Nondeterminism {
        marking: String,
        place: String,
        transitions: (String, String),
    },
    /// A removed transition has no system place that refuses all its copies.
    UnjustifiedRefusal { transition: String },
    /// The parent can move but the strategy cannot.
    Deadlock { marking: String },
    /// An environment place keeps more than one outgoing transition.
    AmbiguousChoice { place: String, transitions: Vec<String> },
    /// The environment removed a transition without an environment place in its preset.
    SystemRefusal { transition: String },
    BadMarking { marking: String },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::Nondeterminism {
                marking,
                place,
                transitions: (a, b),
            } => write!(f, "{place} enables both {a} and {b} in {marking}"),
            Violation::UnjustifiedRefusal { transition } => {
                write!(f, "{transition} is removed but no system place refuses it")
            }
            Violation::Deadlock { marking } => {
                write!(f, "strategy is stuck in {marking} although the game can move")
            }
            Violation::AmbiguousChoice { place, transitions } => {
                write!(f, "{place} keeps {}", transitions.join(", "))
            }
            Violation::SystemRefusal { transition } => write!(
                f,
                "{transition} is removed but has no environment place in its preset"
            ),
            Violation::BadMarking { marking } => write!(f, "bad marking {marking} is reachable"),
        }
    }
}

pub type ViolationReport = Vec<Violation>;

/// A subprocess of a bounded unfolding obtained by removing transitions.
#[derive(Debug, Clone)]
pub struct StrategyNet {
    kind: StrategyKind,
    unfolding: Arc<BoundedUnfolding>,
    parent: BTreeSet<TransitionId>,
    removed: BTreeSet<TransitionId>,
    kept_places: BTreeSet<PlaceId>,
    kept_transitions: BTreeSet<TransitionId>,
    derived: PetriGame,
    place_origin: Vec<PlaceId>,
    transition_origin: Vec<TransitionId>,
    place_index: BTreeMap<PlaceId, PlaceId>,
}

impl StrategyNet {
    pub fn unrestricted(unfolding: Arc<BoundedUnfolding>) -> Self {
        let all: BTreeSet<TransitionId> = unfolding.net().transitions().collect();
        Self::build(unfolding, all, &BTreeSet::new(), StrategyKind::Unrestricted)
    }

    /// Removes `removed` from `base` together with every node that can no
    /// longer be reached from the initial marking. Transitions that are never
    /// enabled and places that are never marked are dropped as well, unless
    /// the reachability guard is exceeded.
    pub fn restrict(
        base: &StrategyNet,
        removed: &BTreeSet<TransitionId>,
        kind: StrategyKind,
    ) -> Self {
        Self::build(
            base.unfolding.clone(),
            base.kept_transitions.clone(),
            removed,
            kind,
        )
    }

    fn build(
        unfolding: Arc<BoundedUnfolding>,
        parent: BTreeSet<TransitionId>,
        removed: &BTreeSet<TransitionId>,
        kind: StrategyKind,
    ) -> Self {
        let u = unfolding.net();
        let mut places: BTreeSet<PlaceId> = u.initial_marking().iter().collect();
        let mut kept = BTreeSet::new();
        loop {
            let mut changed = false;
            for &t in &parent {
                if kept.contains(&t) || removed.contains(&t) {
                    continue;
                }
                if u.pre(t).iter().all(|p| places.contains(p)) {
                    kept.insert(t);
                    places.extend(u.post(t).iter().copied());
                    changed = true;
                }
            }
            if !changed {
                break;
            }
        }

        let removed: BTreeSet<TransitionId> = removed.intersection(&parent).copied().collect();
        let (derived, place_index) = materialize(&unfolding, &places, &kept);
        // Drop transitions that can never fire and places that are never marked.
        if let Ok(markings) = derived
            .net()
            .reachable_markings_with_guard(DEFAULT_STRATEGY_GUARD)
        {
            let origin: Vec<PlaceId> = places.iter().copied().collect();
            let kept_vec: Vec<TransitionId> = kept.iter().copied().collect();
            let mut live_places = BTreeSet::new();
            let mut live = BTreeSet::new();
            for m in &markings {
                live_places.extend(m.iter().map(|p| origin[p.index()]));
                live.extend(derived.net().enabled(m).map(|t| kept_vec[t.index()]));
            }
            places = live_places;
            kept = live;
        }
        let (derived, place_index) = if derived.net().place_count() == places.len()
            && derived.net().transition_count() == kept.len()
        {
            (derived, place_index)
        } else {
            materialize(&unfolding, &places, &kept)
        };
        Self {
            kind,
            parent,
            removed,
            place_origin: places.iter().copied().collect(),
            transition_origin: kept.iter().copied().collect(),
            kept_places: places,
            kept_transitions: kept,
            derived,
            place_index,
            unfolding,
        }
    }

    pub fn kind(&self) -> StrategyKind {
        self.kind
    }

    pub fn unfolding(&self) -> &BoundedUnfolding {
        &self.unfolding
    }

    pub fn unfolding_arc(&self) -> Arc<BoundedUnfolding> {
        self.unfolding.clone()
    }

    /// The derived net as a game with inherited classes.
    pub fn game(&self) -> &PetriGame {
        &self.derived
    }

    pub fn kept_places(&self) -> &BTreeSet<PlaceId> {
        &self.kept_places
    }

    /// Kept transitions, in unfolding ids.
    pub fn kept_transitions(&self) -> &BTreeSet<TransitionId> {
        &self.kept_transitions
    }

    /// Transitions of the parent, in unfolding ids.
    pub fn parent_transitions(&self) -> &BTreeSet<TransitionId> {
        &self.parent
    }

    pub fn is_kept(&self, t: TransitionId) -> bool {
        self.kept_transitions.contains(&t)
    }

    /// Unfolding id of a place of the derived net.
    pub fn place_origin(&self, p: PlaceId) -> PlaceId {
        self.place_origin[p.index()]
    }

    /// Unfolding id of a transition of the derived net.
    pub fn transition_origin(&self, t: TransitionId) -> TransitionId {
        self.transition_origin[t.index()]
    }

    /// Derived id of an unfolding place, if kept.
    pub fn derived_place(&self, p: PlaceId) -> Option<PlaceId> {
        self.place_index.get(&p).copied()
    }

    /// Original game place of a derived place.
    pub fn place_label(&self, p: PlaceId) -> PlaceId {
        self.unfolding.place_label(self.place_origin(p))
    }

    /// Original game transition of a derived transition.
    pub fn transition_label(&self, t: TransitionId) -> TransitionId {
        self.unfolding.transition_label(self.transition_origin(t))
    }

    fn reachable(&self) -> Result<BTreeSet<Marking>, GameError> {
        Ok(self
            .derived
            .net()
            .reachable_markings_with_guard(DEFAULT_STRATEGY_GUARD)?)
    }

    fn to_unfolding_marking(&self, m: &Marking) -> Marking {
        m.iter().map(|p| self.place_origin(p)).collect()
    }

    /// At most one enabled outgoing transition per marked system place.
    pub fn check_determinism(&self) -> Result<ViolationReport, GameError> {
        let net = self.derived.net();
        let mut report = Vec::new();
        for m in self.reachable()? {
            for p in m.iter().filter(|&p| self.derived.is_system(p)) {
                let en: Vec<TransitionId> = net
                    .consumers(p)
                    .iter()
                    .copied()
                    .filter(|&t| net.is_enabled(&m, t))
                    .collect();
                if en.len() > 1 {
                    report.push(Violation::Nondeterminism {
                        marking: net.format_marking(&m),
                        place: net.place_name(p).to_string(),
                        transitions: (
                            net.transition_name(en[0]).to_string(),
                            net.transition_name(en[1]).to_string(),
                        ),
                    });
                }
            }
        }
        Ok(report)
    }

    /// Explicitly removed transitions whose preset places all survive.
    fn refused(&self) -> impl Iterator<Item = TransitionId> + '_ {
        let u = self.unfolding.net();
        self.removed
            .iter()
            .copied()
            .filter(move |t| u.pre(*t).iter().all(|p| self.kept_places.contains(p)))
    }

    /// Every refused transition has a system place in its preset that refuses
    /// all its copies with the same original label.
    pub fn check_system_refusal(&self) -> ViolationReport {
        let u = self.unfolding.net();
        let ug = self.unfolding.game();
        self.refused()
            .filter(|&t| {
                let label = self.unfolding.transition_label(t);
                !u.pre(t).iter().any(|&p| {
                    ug.is_system(p)
                        && u.consumers(p).iter().all(|&t2| {
                            self.unfolding.transition_label(t2) != label
                                || !self.kept_transitions.contains(&t2)
                        })
                })
            })
            .map(|t| Violation::UnjustifiedRefusal {
                transition: u.transition_name(t).to_string(),
            })
            .collect()
    }

    /// Whenever a parent transition is enabled, a kept one is enabled too.
    pub fn check_deadlock_avoidance(&self) -> Result<ViolationReport, GameError> {
        let u = self.unfolding.net();
        let net = self.derived.net();
        let mut report = Vec::new();
        for m in self.reachable()? {
            if net.enabled(&m).next().is_some() {
                continue;
            }
            let um = self.to_unfolding_marking(&m);
            if self.parent.iter().any(|&t| u.is_enabled(&um, t)) {
                report.push(Violation::Deadlock {
                    marking: net.format_marking(&m),
                });
            }
        }
        Ok(report)
    }

    /// At most one kept outgoing transition per environment place.
    pub fn check_explicit_choice(&self) -> ViolationReport {
        let net = self.derived.net();
        net.places()
            .filter(|&p| self.derived.is_env(p) && net.consumers(p).len() > 1)
            .map(|p| Violation::AmbiguousChoice {
                place: net.place_name(p).to_string(),
                transitions: net
                    .consumers(p)
                    .iter()
                    .map(|&t| net.transition_name(t).to_string())
                    .collect(),
            })
            .collect()
    }

    /// Every refused transition has an environment place in its preset.
    pub fn check_environment_refusal(&self) -> ViolationReport {
        let u = self.unfolding.net();
        let ug = self.unfolding.game();
        self.refused()
            .filter(|&t| !u.pre(t).iter().any(|&p| ug.is_env(p)))
            .map(|t| Violation::SystemRefusal {
                transition: u.transition_name(t).to_string(),
            })
            .collect()
    }

    /// Same condition as deadlock avoidance, relative to the parent strategy.
    pub fn check_progress(&self) -> Result<ViolationReport, GameError> {
        self.check_deadlock_avoidance()
    }

    pub fn bad_markings(&self) -> Result<ViolationReport, GameError> {
        let net = self.derived.net();
        Ok(self
            .reachable()?
            .into_iter()
            .filter(|m| self.derived.marking_is_bad(m))
            .map(|m| Violation::BadMarking {
                marking: net.format_marking(&m),
            })
            .collect())
    }

    /// All system strategy conditions plus unreachability of bad places.
    pub fn system_violations(&self) -> Result<ViolationReport, GameError> {
        let mut report = self.bad_markings()?;
        report.extend(self.check_determinism()?);
        report.extend(self.check_system_refusal());
        report.extend(self.check_deadlock_avoidance()?);
        Ok(report)
    }

    pub fn is_winning_system(&self) -> Result<bool, GameError> {
        Ok(self.system_violations()?.is_empty())
    }

    pub fn environment_violations(&self) -> Result<ViolationReport, GameError> {
        let mut report = self.check_explicit_choice();
        report.extend(self.check_environment_refusal());
        report.extend(self.check_progress()?);
        Ok(report)
    }

    /// Every place has at most one outgoing transition, so the net has a
    /// single run up to reordering of independent steps.
    pub fn has_unique_run(&self) -> bool {
        let net = self.derived.net();
        net.places().all(|p| net.consumers(p).len() <= 1)
    }
}

fn materialize(
    unfolding: &BoundedUnfolding,
    places: &BTreeSet<PlaceId>,
    kept: &BTreeSet<TransitionId>,
) -> (PetriGame, BTreeMap<PlaceId, PlaceId>) {
    let u = unfolding.net();
    let ugame = unfolding.game();
    let mut nb = NetBuilder::new();
    let mut place_index = BTreeMap::new();
    let mut env = BTreeSet::new();
    let mut bad = BTreeSet::new();
    for &p in places {
        let id = nb.place(u.place_name(p));
        if u.initial_marking().contains(p) {
            nb.mark(id);
        }
        if ugame.is_env(p) {
            env.insert(id);
        }
        if ugame.is_bad(p) {
            bad.insert(id);
        }
        place_index.insert(p, id);
    }
    for &t in kept {
        nb.transition(
            u.transition_name(t),
            u.pre(t).iter().map(|p| place_index[p]),
            u.post(t).iter().map(|p| place_index[p]),
        );
    }
    let net = nb.build().expect("subnet of a valid net is valid");
    let derived = PetriGame::new(net, env, bad).expect("classes come from the net");
    (derived, place_index)
}

/// Every environment strategy of `s`, each as a subprocess of `s`.
pub fn enumerate_environment_strategies(s: &StrategyNet) -> Result<Vec<StrategyNet>, GameError> {
    let u = s.unfolding.net();
    let ug = s.unfolding.game();
    let choices: Vec<Vec<TransitionId>> = s
        .kept_places
        .iter()
        .filter(|&&p| ug.is_env(p))
        .map(|&p| {
            u.consumers(p)
                .iter()
                .copied()
                .filter(|t| s.kept_transitions.contains(t))
                .collect::<Vec<_>>()
        })
        .filter(|out| !out.is_empty())
        .collect();
    let mut total: usize = 1;
    for c in &choices {
        total = total.saturating_mul(c.len() + 1);
        if total > DEFAULT_STRATEGY_GUARD {
            return Err(GameError::TooManyStrategies(DEFAULT_STRATEGY_GUARD));
        }
    }
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    // index c.len() encodes "no transition"
    let mut pick = vec![0usize; choices.len()];
    loop {
        let mut removed = BTreeSet::new();
        for (c, &k) in choices.iter().zip(&pick) {
            for (i, &t) in c.iter().enumerate() {
                if i != k {
                    removed.insert(t);
                }
            }
        }
        let e = StrategyNet::restrict(s, &removed, StrategyKind::Environment);
        if seen.insert(e.kept_transitions.clone()) && e.environment_violations()?.is_empty() {
            out.push(e);
        }
        let mut i = 0;
        loop {
            if i == pick.len() {
                return Ok(out);
            }
            pick[i] += 1;
            if pick[i] <= choices[i].len() {
                break;
            }
            pick[i] = 0;
            i += 1;
        }
    }
}
