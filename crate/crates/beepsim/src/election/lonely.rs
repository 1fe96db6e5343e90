//! Loneliness detection by reduction to leader election.
//!
//! Wraps any election protocol so that every node ends up knowing whether it
//! is alone in the network. Rounds are dilated by a factor of two: odd rounds
//! carry the underlying election, even rounds are announcement slots in which
//! any node that has won the election beeps. The first announcement freezes
//! the network and triggers one closing round in which everybody *except*
//! announcers beeps: if that round is silent the announcer heard no one —
//! there is no one — and every node (there is only the one) reports `alone`;
//! otherwise all nodes report `crowd`.
//!
//! The wrapper adds four states on top of the doubled base machine, so a base
//! election with `s` states yields at most `2s + 4` states. Its error is the
//! base election's: a wrong multi-leader outcome can end with two announcers
//! and a silent closing round only when election safety already failed.

use crate::machine::{Action, Channel, FinalLabel, NodeEvent, NodeProgram};
use crate::rng::DrawSource;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum LonelyState<S> {
    /// Election round: run the base protocol.
    Sim(S),
    /// Announcement round: leaders beep.
    Announce(S),
    /// Closing round, reached after an announcement was heard.
    ClosingLeader,
    ClosingOther,
    Alone,
    Crowd,
}

#[derive(Debug, Clone, Copy)]
pub struct Lonely<P> {
    base: P,
}

impl<P: NodeProgram> Lonely<P> {
    pub fn new(base: P) -> Self {
        Lonely { base }
    }

    fn is_leader(&self, s: &P::State) -> bool {
        self.base.label(s) == Some(FinalLabel::Leader)
    }
}

impl<P: NodeProgram> NodeProgram for Lonely<P> {
    type State = LonelyState<P::State>;

    fn start(&self) -> Self::State {
        LonelyState::Sim(self.base.start())
    }

    fn act(&self, s: &Self::State) -> Action {
        match s {
            LonelyState::Sim(b) => self.base.act(b),
            LonelyState::Announce(b) => {
                if self.is_leader(b) {
                    Action::Beep
                } else {
                    Action::Listen
                }
            }
            LonelyState::ClosingLeader => Action::Listen,
            LonelyState::ClosingOther => Action::Beep,
            LonelyState::Alone | LonelyState::Crowd => Action::Listen,
        }
    }

    fn step(&self, s: &Self::State, chan: Channel, rng: &mut dyn DrawSource) -> Self::State {
        match s {
            LonelyState::Sim(b) => {
                // A terminated base node holds its state through further
                // election rounds; others advance.
                let b = if self.base.is_terminal(b) {
                    b.clone()
                } else {
                    self.base.step(b, chan, rng)
                };
                LonelyState::Announce(b)
            }
            LonelyState::Announce(b) => {
                if chan == Channel::Beep {
                    if self.is_leader(b) {
                        LonelyState::ClosingLeader
                    } else {
                        LonelyState::ClosingOther
                    }
                } else {
                    LonelyState::Sim(b.clone())
                }
            }
            LonelyState::ClosingLeader => {
                if chan == Channel::Silent {
                    LonelyState::Alone
                } else {
                    LonelyState::Crowd
                }
            }
            LonelyState::ClosingOther => LonelyState::Crowd,
            LonelyState::Alone | LonelyState::Crowd => s.clone(),
        }
    }

    fn label(&self, s: &Self::State) -> Option<FinalLabel> {
        match s {
            LonelyState::Alone => Some(FinalLabel::Alone),
            LonelyState::Crowd => Some(FinalLabel::Crowd),
            _ => None,
        }
    }

    fn declared_labels(&self) -> Vec<FinalLabel> {
        vec![FinalLabel::Alone, FinalLabel::Crowd]
    }

    fn events(
        &self,
        before: &Self::State,
        chan: Channel,
        after: &Self::State,
        out: &mut Vec<NodeEvent>,
    ) {
        if let (LonelyState::Sim(b), LonelyState::Announce(a)) = (before, after) {
            if !self.base.is_terminal(b) {
                self.base.events(b, chan, a, out);
            }
        }
        if let Some(label) = self.label(after) {
            if self.label(before).is_none() {
                out.push(NodeEvent::Entered { label });
            }
        }
    }
}
