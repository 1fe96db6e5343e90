//! Simulation and exact analysis of single-hop beeping networks.
//!
//! The model: an anonymous network of `n` identical probabilistic state
//! machines, synchronized to a global round clock, communicating only through
//! a shared unary channel. In each round every node either beeps or listens;
//! listeners observe beep iff at least one node beeped, beepers always observe
//! beep. No identifiers, no messages, no knowledge of `n`.
//!
//! The crate provides:
//!
//! - [`machine`] — the formal state-machine representation (explicit
//!   transition tables over exact rational probabilities), JSON import/export,
//!   and behavioral extraction of tables from arbitrary [`machine::NodeProgram`]
//!   implementations.
//! - [`engine`] — the round-driven network simulator with full tracing.
//! - [`election`] — universal leader election with swappable termination
//!   subroutines, plus the loneliness-detection reduction built on top of it.
//! - [`counterdist`] — a distributed counter machine: a tiny assembly language
//!   whose programs run as beep-coordinated protocols across the network.
//! - [`analysis`] — exact Markov-chain analysis over anonymous configurations
//!   (multisets of node states) with big-rational arithmetic.
//! - [`harness`] — Monte Carlo experiment runner with deterministic seeding,
//!   Wilson intervals and CSV reporting.
//!
//! Randomness is reproducible by construction: every (seed, node, round)
//! triple names an independent splitmix64 stream, so executions are replayable
//! and insensitive to how many draws other rounds consume. See [`rng`].

pub mod analysis;
pub mod counterdist;
pub mod election;
pub mod engine;
pub mod harness;
pub mod machine;
pub mod prob;
pub mod rng;
