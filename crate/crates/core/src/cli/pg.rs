//! The line-based `.pg` game format.
//!
//! ```text
//! # comment
//! .places
//! env env init
//! robot
//! bot bad
//! .transitions
//! go
//! .flows
//! go: {env} -> {robot}
//! ```
//!
//! Places without the `env` flag belong to the system. Every declared
//! transition needs exactly one flow line.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use thiserror::Error;

use crate::game::{GameError, PetriGame};
use crate::net::{NetBuilder, PlaceId};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("{line}:{col}: {message}")]
pub struct PgError {
    pub line: usize,
    pub col: usize,
    pub message: String,
}

fn err(line: usize, col: usize, message: impl Into<String>) -> PgError {
    PgError {
        line,
        col,
        message: message.into(),
    }
}

fn valid_name(s: &str) -> bool {
    !s.is_empty()
        && s
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '\'')
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Section {
    None,
    Places,
    Transitions,
    Flows,
}

struct PlaceDecl {
    name: String,
    env: bool,
    bad: bool,
    init: bool,
}

/// Column (1-based) of `needle`, a slice of `line`, for diagnostics.
fn col_of(line: &str, needle: &str) -> usize {
    let start = line.as_ptr() as usize;
    let at = needle.as_ptr() as usize;
    if (start..=start + line.len()).contains(&at) {
        at - start + 1
    } else {
        line.find(needle).map_or(1, |i| i + 1)
    }
}

/// Parses `{a, b}` into names, checking each against `known`.
fn parse_set(
    raw: &str,
    text: &str,
    line: usize,
    known: &BTreeMap<String, usize>,
) -> Result<Vec<usize>, PgError> {
    let t = text.trim();
    let inner = t
        .strip_prefix('{')
        .and_then(|r| r.strip_suffix('}'))
        .ok_or_else(|| err(line, col_of(raw, t), format!("expected `{{...}}`, found `{t}`")))?;
    let mut out = Vec::new();
    for name in inner.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let &idx = known
            .get(name)
            .ok_or_else(|| err(line, col_of(raw, name), format!("unknown place `{name}`")))?;
        out.push(idx);
    }
    Ok(out)
}

pub fn parse_pg(text: &str) -> Result<PetriGame, PgError> {
    let mut section = Section::None;
    let mut places: Vec<PlaceDecl> = Vec::new();
    let mut place_index: BTreeMap<String, usize> = BTreeMap::new();
    let mut transitions: Vec<(String, usize)> = Vec::new();
    let mut transition_index: BTreeMap<String, usize> = BTreeMap::new();
    let mut flows: BTreeMap<usize, (Vec<usize>, Vec<usize>)> = BTreeMap::new();

    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("");
        let s = content.trim();
        if s.is_empty() {
            continue;
        }
        if s.starts_with('.') {
            section = match s {
                ".places" => Section::Places,
                ".transitions" => Section::Transitions,
                ".flows" => Section::Flows,
                other => return Err(err(line, col_of(raw, other), format!("unknown section `{other}`"))),
            };
            continue;
        }
        match section {
            Section::None => return Err(err(line, col_of(raw, s), "content before the first section")),
            Section::Places => {
                let mut toks = s.split_whitespace();
                let name = toks.next().expect("non-empty line");
                if !valid_name(name) {
                    return Err(err(line, col_of(raw, name), format!("invalid name `{name}`")));
                }
                if place_index.contains_key(name) || transition_index.contains_key(name) {
                    return Err(err(line, col_of(raw, name), format!("duplicate name `{name}`")));
                }
                let mut decl = PlaceDecl {
                    name: name.to_string(),
                    env: false,
                    bad: false,
                    init: false,
                };
                for flag in toks {
                    match flag {
                        "env" => decl.env = true,
                        "bad" => decl.bad = true,
                        "init" => decl.init = true,
                        other => return Err(err(line, col_of(raw, other), format!("unknown flag `{other}`"))),
                    }
                }
                place_index.insert(decl.name.clone(), places.len());
                places.push(decl);
            }
            Section::Transitions => {
                for name in s.split_whitespace() {
                    if !valid_name(name) {
                        return Err(err(line, col_of(raw, name), format!("invalid name `{name}`")));
                    }
                    if place_index.contains_key(name) || transition_index.contains_key(name) {
                        return Err(err(line, col_of(raw, name), format!("duplicate name `{name}`")));
                    }
                    transition_index.insert(name.to_string(), transitions.len());
                    transitions.push((name.to_string(), line));
                }
            }
            Section::Flows => {
                let (name, rest) = s
                    .split_once(':')
                    .ok_or_else(|| err(line, col_of(raw, s), "expected `t: {...} -> {...}`"))?;
                let name = name.trim();
                let &t = transition_index
                    .get(name)
                    .ok_or_else(|| err(line, col_of(raw, name), format!("unknown transition `{name}`")))?;
                if flows.contains_key(&t) {
                    return Err(err(line, col_of(raw, name), format!("second flow for `{name}`")));
                }
                let (pre, post) = rest
                    .split_once("->")
                    .ok_or_else(|| err(line, col_of(raw, rest), "expected `->`"))?;
                let pre = parse_set(raw, pre, line, &place_index)?;
                let post = parse_set(raw, post, line, &place_index)?;
                if pre.is_empty() {
                    return Err(err(line, col_of(raw, name), format!("`{name}` has an empty preset")));
                }
                if post.is_empty() {
                    return Err(err(line, col_of(raw, name), format!("`{name}` has an empty postset")));
                }
                flows.insert(t, (pre, post));
            }
        }
    }

    let mut b = NetBuilder::new();
    let ids: Vec<PlaceId> = places
        .iter()
        .map(|p| if p.init { b.marked_place(&p.name) } else { b.place(&p.name) })
        .collect();
    for (t, (name, line)) in transitions.iter().enumerate() {
        let (pre, post) = flows
            .get(&t)
            .ok_or_else(|| err(*line, 1, format!("transition `{name}` has no flow")))?;
        b.transition(
            name,
            pre.iter().map(|&i| ids[i]).collect::<Vec<_>>(),
            post.iter().map(|&i| ids[i]).collect::<Vec<_>>(),
        );
    }
    let net = b.build().map_err(|e| err(0, 0, e.to_string()))?;
    let env: BTreeSet<PlaceId> = places.iter().zip(&ids).filter(|(p, _)| p.env).map(|(_, &id)| id).collect();
    let bad: BTreeSet<PlaceId> = places.iter().zip(&ids).filter(|(p, _)| p.bad).map(|(_, &id)| id).collect();
    PetriGame::new(net, env, bad).map_err(|e: GameError| err(0, 0, e.to_string()))
}

pub fn print_pg(game: &PetriGame) -> String {
    let net = game.net();
    let initial = net.initial_marking();
    let mut out = String::from(".places\n");
    for p in net.places() {
        out.push_str(net.place_name(p));
        if game.is_env(p) {
            out.push_str(" env");
        }
        if game.is_bad(p) {
            out.push_str(" bad");
        }
        if initial.contains(p) {
            out.push_str(" init");
        }
        out.push('\n');
    }
    out.push_str(".transitions\n");
    for t in net.transitions() {
        let _ = writeln!(out, "{}", net.transition_name(t));
    }
    out.push_str(".flows\n");
    let set = |ps: &[PlaceId]| {
        ps.iter()
            .map(|&p| net.place_name(p))
            .collect::<Vec<_>>()
            .join(", ")
    };
    for t in net.transitions() {
        let _ = writeln!(
            out,
            "{}: {{{}}} -> {{{}}}",
            net.transition_name(t),
            set(net.pre(t)),
            set(net.post(t))
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    const SMALL: &str = "\
# two places
.places
a env init
b bad
.transitions
t
.flows
t: {a} -> {b}
";

    #[test]
    fn parses_and_prints() {
        let g = parse_pg(SMALL).unwrap();
        assert_eq!(g.net().place_count(), 2);
        assert!(g.is_env(g.net().place("a").unwrap()));
        assert!(g.is_bad(g.net().place("b").unwrap()));
        let again = parse_pg(&print_pg(&g)).unwrap();
        assert_eq!(print_pg(&again), print_pg(&g));
    }

    #[test]
    fn diagnostics_carry_positions() {
        let e = parse_pg(".places\na\n.transitions\nt\n.flows\nt: {a} -> {zz}\n").unwrap_err();
        assert_eq!((e.line, e.col), (6, 12));
        let e = parse_pg(".places\na\n.transitions\nt\n.flows\n").unwrap_err();
        assert_eq!(e.line, 4);
        assert!(parse_pg(".places\na\na\n").is_err());
        assert!(parse_pg(".places\na\n.transitions\nt\n.flows\nt: {} -> {a}\n").is_err());
        assert!(parse_pg(".places\na-b\n").is_err());
        let e = parse_pg(".places\na\n.transitions\nta\n.flows\nta: {a} -> {a, x}\n").unwrap_err();
        assert_eq!((e.line, e.col), (6, 16));
    }
}
