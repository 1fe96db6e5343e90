//! Ground types of the beeping model and the procedural program interface.

use crate::rng::DrawSource;
use serde::{Deserialize, Serialize};
use std::fmt;

/// What a node does in a round.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Action {
    Listen,
    Beep,
}

/// What the channel carried in a round: silence (no node beeped) or a beep
/// (at least one did). A beeping node always observes `Beep`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Channel {
    Silent,
    Beep,
}

impl fmt::Display for Channel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Channel::Silent => "-",
            Channel::Beep => "T",
        })
    }
}

/// Standard labels for designated final states.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FinalLabel {
    Leader,
    Alone,
    Crowd,
    Accept,
    Reject,
}

impl FinalLabel {
    pub const ALL: [FinalLabel; 5] = [
        FinalLabel::Leader,
        FinalLabel::Alone,
        FinalLabel::Crowd,
        FinalLabel::Accept,
        FinalLabel::Reject,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            FinalLabel::Leader => "leader",
            FinalLabel::Alone => "alone",
            FinalLabel::Crowd => "crowd",
            FinalLabel::Accept => "accept",
            FinalLabel::Reject => "reject",
        }
    }

    pub fn parse(s: &str) -> Option<FinalLabel> {
        FinalLabel::ALL.iter().copied().find(|l| l.as_str() == s)
    }
}

impl fmt::Display for FinalLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Protocol-level happenings, derived from state transitions and stamped with
/// (round, node) by the engine. These drive invariant checks and trace
/// analysis; they never influence execution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NodeEvent {
    /// A termination-subroutine invocation began with these arguments.
    SubBegin { active: bool, ko: bool },
    /// The invocation returned this bit.
    SubEnd { result: bool },
    /// An active node heard a beep while listening in a knockout round.
    Knockout,
    /// A sub-election inside the counter simulation ended; `winner` is
    /// per-node (true for the elected node).
    Elected { winner: bool },
    /// Coordinator committed an opcode frame (raw field values).
    FrameSent { opcode: u8, counter: u8 },
    /// A node's unary bit for `counter` changed to `value`.
    BitSet { counter: u8, value: bool },
    /// The node entered a labeled final state.
    Entered { label: FinalLabel },
}

/// A node's procedural program: deterministic action per state, randomized
/// transition on the observed channel bit.
///
/// Randomness discipline: a `step` makes at most one `uniform(d)` draw, and
/// distinct draw values that lead to distinct successors must occupy
/// ascending contiguous intervals of `[0, d)`. Extraction preserves those
/// intervals, so executing the extracted machine with the canonical sampler
/// replays the program draw-for-draw. Multi-draw steps are still extracted
/// correctly (the decision tree is enumerated), but only distribution-level
/// equivalence holds for them.
pub trait NodeProgram {
    type State: Clone + Eq + std::hash::Hash + fmt::Debug;

    fn start(&self) -> Self::State;

    /// Deterministic: beep states vs receive states.
    fn act(&self, s: &Self::State) -> Action;

    fn step(&self, s: &Self::State, chan: Channel, rng: &mut dyn DrawSource) -> Self::State;

    fn label(&self, s: &Self::State) -> Option<FinalLabel>;

    /// Terminal states self-loop forever; the engine halts when all nodes are
    /// terminal. Defaults to "carries a label"; programs with unlabeled
    /// resting states (e.g. election non-leaders) widen this.
    fn is_terminal(&self, s: &Self::State) -> bool {
        self.label(s).is_some()
    }

    /// Labels this program can produce.
    fn declared_labels(&self) -> Vec<FinalLabel> {
        Vec::new()
    }

    /// Derive protocol events from one observed transition.
    fn events(
        &self,
        _before: &Self::State,
        _chan: Channel,
        _after: &Self::State,
        _out: &mut Vec<NodeEvent>,
    ) {
    }
}
