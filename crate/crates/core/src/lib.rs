//! Bounded synthesis of distributed controllers for Petri games.
//!
//! A Petri game splits the places of a 1-safe net into system and
//! environment places. The library unfolds the game up to a memory bound,
//! encodes the existence of a winning system strategy of bounded length as
//! a quantified Boolean formula, solves it and checks the resulting strategy
//! net directly.

pub mod bench;
pub mod cli;
pub mod encoding;
pub mod formula;
pub mod game;
pub mod net;
pub mod semantics;
pub mod solving;
pub mod synthesis;
pub mod unfolding;
