//! Rules engine, economics, risk deck, outcome indicators and bot strategies
//! for a deterministic forest-management board game.
//!
//! Every game is a pure function of its configuration, seed and the ordered
//! list of player actions, so a [`game::DecisionLog`] replays bit-for-bit.

pub mod canonical;
pub mod economics;
pub mod game;
pub mod outcomes;
pub mod risk;
pub mod seed;
pub mod strategy;
