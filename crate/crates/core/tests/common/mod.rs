//! Seeded random games, nets, traces and formulas.

#![allow(dead_code)]

use std::collections::BTreeSet;

use pgsynth::formula::{Circuit, Lit, Qbf};
use pgsynth::game::PetriGame;
use pgsynth::net::{NetBuilder, PetriNet, PlaceId, TransitionId};
use pgsynth::semantics::SeqTrace;
use rand::rngs::StdRng;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};

pub fn rng(seed: u64) -> StdRng {
    StdRng::seed_from_u64(seed)
}

#[derive(Debug, Clone, Copy)]
pub struct GameShape {
    pub max_places: usize,
    pub max_transitions: usize,
    pub max_env: usize,
    /// At most one consumer per place.
    pub resolved: bool,
}

impl Default for GameShape {
    fn default() -> Self {
        Self {
            max_places: 6,
            max_transitions: 6,
            max_env: 2,
            resolved: false,
        }
    }
}

fn random_subset(rng: &mut StdRng, pool: &[usize], max: usize) -> Vec<usize> {
    let k = rng.gen_range(1..=max.min(pool.len()));
    let mut v: Vec<usize> = pool.choose_multiple(rng, k).copied().collect();
    v.sort_unstable();
    v
}

/// One attempt at a random game; `None` when the net is not 1-safe or has
/// too many reachable markings.
pub fn try_random_game(rng: &mut StdRng, shape: GameShape) -> Option<PetriGame> {
    let places = rng.gen_range(2..=shape.max_places);
    let transitions = rng.gen_range(1..=shape.max_transitions);
    let all: Vec<usize> = (0..places).collect();
    let mut b = NetBuilder::new();
    let initial: BTreeSet<usize> = random_subset(rng, &all, 2).into_iter().collect();
    let ids: Vec<PlaceId> = (0..places)
        .map(|i| {
            let name = format!("p{i}");
            if initial.contains(&i) {
                b.marked_place(&name)
            } else {
                b.place(&name)
            }
        })
        .collect();
    let mut consumed: BTreeSet<usize> = BTreeSet::new();
    for t in 0..transitions {
        let pool: Vec<usize> = if shape.resolved {
            all.iter().copied().filter(|p| !consumed.contains(p)).collect()
        } else {
            all.clone()
        };
        if pool.is_empty() {
            break;
        }
        let pre = random_subset(rng, &pool, 2);
        consumed.extend(&pre);
        let post = random_subset(rng, &all, 2);
        b.transition(
            format!("t{t}"),
            pre.iter().map(|&i| ids[i]).collect::<Vec<_>>(),
            post.iter().map(|&i| ids[i]).collect::<Vec<_>>(),
        );
    }
    let net = b.build().ok()?;
    net.reachable_markings_with_guard(256).ok()?;
    let env_count = rng.gen_range(0..=shape.max_env.min(places));
    let env: BTreeSet<PlaceId> = all
        .choose_multiple(rng, env_count)
        .map(|&i| ids[i])
        .collect();
    let bad: BTreeSet<PlaceId> = if rng.gen_bool(0.6) {
        [ids[rng.gen_range(0..places)]].into_iter().collect()
    } else {
        BTreeSet::new()
    };
    PetriGame::new(net, env, bad).ok()
}

pub fn random_game(rng: &mut StdRng, shape: GameShape) -> PetriGame {
    loop {
        if let Some(g) = try_random_game(rng, shape) {
            return g;
        }
    }
}

/// A random firing sequence of up to `max_len` steps.
pub fn random_seq_trace<'a>(rng: &mut StdRng, net: &'a PetriNet, max_len: usize) -> SeqTrace<'a> {
    let mut m = net.initial_marking().clone();
    let mut steps: Vec<TransitionId> = Vec::new();
    let len = rng.gen_range(0..=max_len);
    while steps.len() < len {
        let enabled: Vec<TransitionId> = net.enabled(&m).collect();
        let Some(&t) = enabled.choose(rng) else { break };
        m = net.fire(&m, t).expect("1-safe net");
        steps.push(t);
    }
    SeqTrace::new(net, steps).expect("valid firing sequence")
}

/// A random `∃x ∀y φ` with at most `max_vars` variables in total and at
/// most 12 universal ones.
pub fn random_qbf(rng: &mut StdRng, max_vars: u32, gates: usize) -> Qbf {
    let num_vars = rng.gen_range(1..=max_vars);
    let split = rng.gen_range(num_vars.saturating_sub(12)..=num_vars);
    let exists: Vec<u32> = (0..split).collect();
    let forall: Vec<u32> = (split..num_vars).collect();
    let mut c = Circuit::new();
    let mut pool: Vec<Lit> = (0..num_vars).map(|v| c.var(v)).collect();
    for _ in 0..gates {
        let pick = |rng: &mut StdRng, pool: &[Lit]| {
            let l = *pool.choose(rng).expect("non-empty pool");
            if rng.gen_bool(0.5) {
                !l
            } else {
                l
            }
        };
        let a = pick(rng, &pool);
        let b = pick(rng, &pool);
        let g = match rng.gen_range(0..3) {
            0 => c.and([a, b]),
            1 => c.or([a, b]),
            _ => c.xor(a, b),
        };
        pool.push(g);
    }
    let output = *pool.last().expect("non-empty pool");
    Qbf {
        num_vars,
        exists,
        forall,
        circuit: c,
        output,
    }
}
