//! Petri games and their strategies.

mod strategy;

pub use strategy::{
    enumerate_environment_strategies, StrategyKind, StrategyNet, Violation, ViolationReport,
    DEFAULT_STRATEGY_GUARD,
};

use std::collections::{BTreeSet, HashMap};
use std::fmt::Write as _;

use thiserror::Error;

use crate::net::{Marking, NetBuilder, NetError, PetriNet, PlaceId, TransitionId};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GameError {
    #[error(transparent)]
    Net(#[from] NetError),
    #[error("place {0} is not a place of the net")]
    ForeignPlace(String),
    #[error("more than {0} environment strategies")]
    TooManyStrategies(usize),
    #[error("{0}")]
    Invalid(String),
}

/// A Petri net whose places are split between the system and the environment,
/// with a set of bad places the system must avoid.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PetriGame {
    net: PetriNet,
    env: BTreeSet<PlaceId>,
    bad: BTreeSet<PlaceId>,
}

impl PetriGame {
    /// Places not listed in `env` belong to the system.
    pub fn new(
        net: PetriNet,
        env: BTreeSet<PlaceId>,
        bad: BTreeSet<PlaceId>,
    ) -> Result<Self, GameError> {
        let np = net.place_count();
        if let Some(p) = env.iter().chain(&bad).find(|p| p.index() >= np) {
            return Err(GameError::ForeignPlace(format!("#{}", p.0)));
        }
        Ok(Self { net, env, bad })
    }

    pub fn net(&self) -> &PetriNet {
        &self.net
    }

    pub fn is_env(&self, p: PlaceId) -> bool {
        self.env.contains(&p)
    }

    pub fn is_system(&self, p: PlaceId) -> bool {
        !self.env.contains(&p)
    }

    pub fn is_bad(&self, p: PlaceId) -> bool {
        self.bad.contains(&p)
    }

    pub fn env_places(&self) -> &BTreeSet<PlaceId> {
        &self.env
    }

    pub fn system_places(&self) -> BTreeSet<PlaceId> {
        self.net.places().filter(|&p| self.is_system(p)).collect()
    }

    pub fn bad_places(&self) -> &BTreeSet<PlaceId> {
        &self.bad
    }

    pub fn marking_is_bad(&self, m: &Marking) -> bool {
        m.iter().any(|p| self.is_bad(p))
    }

    /// System places in the preset of `t`.
    pub fn system_pre(&self, t: TransitionId) -> impl Iterator<Item = PlaceId> + '_ {
        self.net.pre(t).iter().copied().filter(|&p| self.is_system(p))
    }

    pub fn has_system_pre(&self, t: TransitionId) -> bool {
        self.system_pre(t).next().is_some()
    }

    /// Graphviz rendering: places as circles (environment places filled
    /// white, system places grey), transitions as boxes, bad places doubled.
    pub fn to_dot(&self, title: &str) -> String {
        let net = &self.net;
        let mut out = String::new();
        let _ = writeln!(out, "digraph \"{}\" {{", escape(title));
        let _ = writeln!(out, "  rankdir=TB;");
        for p in net.places() {
            let shape = if self.is_bad(p) { "doublecircle" } else { "circle" };
            let fill = if self.is_env(p) { "white" } else { "lightgrey" };
            let tokens = if net.initial_marking().contains(p) { "&#9679;" } else { "" };
            let _ = writeln!(
                out,
                "  \"p:{name}\" [shape={shape}, style=filled, fillcolor={fill}, xlabel=\"{name}\", label=\"{tokens}\"];",
                name = escape(net.place_name(p)),
            );
        }
        for t in net.transitions() {
            let _ = writeln!(
                out,
                "  \"t:{name}\" [shape=box, label=\"{name}\"];",
                name = escape(net.transition_name(t))
            );
        }
        for t in net.transitions() {
            let tn = escape(net.transition_name(t));
            for &p in net.pre(t) {
                let _ = writeln!(out, "  \"p:{}\" -> \"t:{}\";", escape(net.place_name(p)), tn);
            }
            for &p in net.post(t) {
                let _ = writeln!(out, "  \"t:{}\" -> \"p:{}\";", tn, escape(net.place_name(p)));
            }
        }
        out.push_str("}\n");
        out
    }
}

/// Builds games by place name.
#[derive(Debug, Default)]
pub struct GameBuilder {
    net: NetBuilder,
    names: HashMap<String, PlaceId>,
    env: BTreeSet<PlaceId>,
    bad: BTreeSet<PlaceId>,
    missing: Option<String>,
}

impl GameBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn place(&mut self, name: &str, env: bool, bad: bool, init: bool) -> PlaceId {
        let p = if init {
            self.net.marked_place(name)
        } else {
            self.net.place(name)
        };
        self.names.entry(name.to_string()).or_insert(p);
        if env {
            self.env.insert(p);
        }
        if bad {
            self.bad.insert(p);
        }
        p
    }

    pub fn sys(&mut self, name: &str) -> PlaceId {
        self.place(name, false, false, false)
    }

    pub fn env(&mut self, name: &str) -> PlaceId {
        self.place(name, true, false, false)
    }

    fn lookup(&mut self, names: &[&str]) -> Vec<PlaceId> {
        names
            .iter()
            .filter_map(|n| match self.names.get(*n) {
                Some(&p) => Some(p),
                None => {
                    self.missing.get_or_insert_with(|| n.to_string());
                    None
                }
            })
            .collect()
    }

    /// Adds a transition between named places.
    pub fn transition(&mut self, name: &str, pre: &[&str], post: &[&str]) -> TransitionId {
        let pre = self.lookup(pre);
        let post = self.lookup(post);
        self.net.transition(name, pre, post)
    }

    pub fn build(self) -> Result<PetriGame, GameError> {
        if let Some(name) = self.missing {
            return Err(NetError::UnknownPlace(name).into());
        }
        PetriGame::new(self.net.build()?, self.env, self.bad)
    }
}

fn escape(s: &str) -> String {
    s.replace('\\', "\\\\").replace('"', "\\\"")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::net::NetBuilder;

    #[test]
    fn rejects_foreign_bad_place() {
        let mut b = NetBuilder::new();
        b.marked_place("p");
        let net = b.build().unwrap();
        let err = PetriGame::new(net, BTreeSet::new(), BTreeSet::from([PlaceId(4)]));
        assert!(matches!(err, Err(GameError::ForeignPlace(_))));
    }

    #[test]
    fn dot_marks_bad_places() {
        let mut b = NetBuilder::new();
        let p = b.marked_place("p");
        let q = b.place("q");
        b.transition("t", [p], [q]);
        let g = PetriGame::new(b.build().unwrap(), BTreeSet::from([p]), BTreeSet::from([q])).unwrap();
        let dot = g.to_dot("g");
        assert!(dot.contains("\"p:q\" [shape=doublecircle"));
        assert!(dot.contains("\"p:p\" [shape=circle, style=filled, fillcolor=white"));
        assert!(dot.contains("\"t:t\" [shape=box"));
        assert!(dot.contains("\"p:p\" -> \"t:t\";"));
    }
}
