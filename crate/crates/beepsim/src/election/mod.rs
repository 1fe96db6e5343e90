//! Universal leader election and protocols built on it.
//!
//! [`ElectProgram`] runs the full election: an initial detection call, then
//! knockout epochs interleaved with further calls, until a call returns true
//! and the surviving candidate becomes the leader. The detection strategy is
//! chosen by [`SubKind`] and all parameters derive exactly from `(q, ε, Ñ)`
//! via [`ElectionParams`].
//!
//! [`SubroutineProgram`] exposes a single detection call as its own protocol,
//! and [`Lonely`] is the reduction from leader election to loneliness
//! detection (does `n = 1` hold?).

mod core;
mod lonely;
mod params;
mod subroutine;

pub use self::core::{CoreState, CsStage, ElectCore, FeStage, ObserverReplay, SoStage, SubState};
pub use lonely::{Lonely, LonelyState};
pub use params::{ElectionParams, ParamError, SubKind, CS_COUNT_BOUND, SO_EXPONENT};
pub use subroutine::{SubProgState, SubroutineProgram};

use crate::engine::Summary;
use crate::machine::{Action, Channel, FinalLabel, NodeEvent, NodeProgram};
use crate::rng::DrawSource;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ElectState {
    /// Setup round; every node listens and draws its first coins on the way
    /// out, since actions are functions of state.
    Init,
    Run(CoreState),
}

/// The universal election protocol.
#[derive(Debug, Clone, Copy)]
pub struct ElectProgram {
    core: ElectCore,
}

impl ElectProgram {
    pub fn new(params: ElectionParams) -> Self {
        ElectProgram { core: ElectCore::new(params) }
    }

    pub fn params(&self) -> &ElectionParams {
        &self.core.params
    }
}

impl NodeProgram for ElectProgram {
    type State = ElectState;

    fn start(&self) -> ElectState {
        ElectState::Init
    }

    fn act(&self, s: &ElectState) -> Action {
        match s {
            ElectState::Init => Action::Listen,
            ElectState::Run(cs) => self.core.act(cs),
        }
    }

    fn step(&self, s: &ElectState, chan: Channel, rng: &mut dyn DrawSource) -> ElectState {
        match s {
            ElectState::Init => ElectState::Run(self.core.enter(true, rng)),
            ElectState::Run(cs) => ElectState::Run(self.core.step(cs, chan, rng)),
        }
    }

    fn label(&self, s: &ElectState) -> Option<FinalLabel> {
        match s {
            ElectState::Run(CoreState::Done { leader: true }) => Some(FinalLabel::Leader),
            _ => None,
        }
    }

    fn is_terminal(&self, s: &ElectState) -> bool {
        // Losing nodes park in an unlabeled terminal state.
        matches!(s, ElectState::Run(CoreState::Done { .. }))
    }

    fn declared_labels(&self) -> Vec<FinalLabel> {
        vec![FinalLabel::Leader]
    }

    fn events(
        &self,
        before: &ElectState,
        _chan: Channel,
        after: &ElectState,
        out: &mut Vec<NodeEvent>,
    ) {
        let (b, a) = match (before, after) {
            (ElectState::Init, ElectState::Run(a)) => {
                if let CoreState::Sub { active, ko, .. } = a {
                    out.push(NodeEvent::SubBegin { active: *active, ko: *ko });
                }
                return;
            }
            (ElectState::Run(b), ElectState::Run(a)) => (b, a),
            _ => return,
        };
        if let Some(result) = ElectCore::sub_result(b, a) {
            out.push(NodeEvent::SubEnd { result });
        }
        if let (CoreState::Knock { .. }, CoreState::Sub { active, ko, .. }) = (b, a) {
            out.push(NodeEvent::SubBegin { active: *active, ko: *ko });
        }
        if b.is_active() && !a.is_active() && !a.is_done() {
            out.push(NodeEvent::Knockout);
        }
        if !b.is_done() && a.is_done() {
            out.push(NodeEvent::Elected { winner: a.is_active() });
        }
    }
}

/// Verdict of one election run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ElectionOutcome {
    /// Terminated with exactly one leader.
    Elected { rounds: u64 },
    /// Terminated with zero or several leaders.
    Violation { leaders: usize },
    /// Hit the round cutoff before terminating.
    Cutoff,
}

pub fn check_election_outcome(summary: &Summary) -> ElectionOutcome {
    if !summary.terminated {
        return ElectionOutcome::Cutoff;
    }
    let leaders = summary.count(FinalLabel::Leader);
    if leaders == 1 {
        ElectionOutcome::Elected { rounds: summary.rounds }
    } else {
        ElectionOutcome::Violation { leaders }
    }
}
