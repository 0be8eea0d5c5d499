//! Decision, synthesis and simulation for Boolean combinations of
//! qualitative parity objectives on finite Markov decision processes.
//!
//! The library answers, for an MDP `Γ`, a state `s` and a formula built from
//! the atoms `A(p)` (surely), `AS(p)` (almost surely), `NZ(p)` (with non-zero
//! probability) and `E(p)` (on at least one path) over parity conditions `p`,
//! whether some strategy from `s` satisfies the formula, and can additionally
//! synthesize an executable witness strategy and estimate its behaviour by
//! seeded simulation.
//!
//! All decision work is done with exact rational arithmetic; floating point
//! only appears in simulation statistics.

pub mod model;
pub mod format;
pub mod qpl;
pub mod graphalg;
pub mod games;
pub mod ecs;
pub mod decide;
pub mod synth;
pub mod sim;
pub mod gen;
pub mod fixtures;
#[cfg(feature = "desk-scale")]
pub mod oracle;

/// Version tag embedded in every JSON document emitted by the crate.
pub const SCHEMA_VERSION: u32 = 1;
