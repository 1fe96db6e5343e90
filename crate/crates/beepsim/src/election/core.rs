//! The election core: knockout rounds interleaved with termination-detection
//! calls.
//!
//! The core is deliberately not a [`crate::machine::NodeProgram`] itself — it
//! is a pure transition component shared by the standalone election program,
//! the direct detector invocation program, and the counter-machine layer
//! (which runs many elections among changing participant sets).
//!
//! # Protocol shape
//!
//! A node is either *active* (still a leadership candidate) or not. Rounds
//! alternate between two regimes, and every regime switch is triggered by a
//! channel observation that all nodes share, so the whole network moves
//! through phases in lockstep without any coordination state:
//!
//! - **Knockout rounds.** Each active node beeps with probability `1 − 1/q̂`.
//!   An active node that chose to listen and heard a beep drops out (`active ←
//!   0`) and raises its `ko` flag. A *silent* knockout round ends the epoch:
//!   every node enters a detection call.
//! - **Detection calls.** A multi-round subprotocol that returns one boolean,
//!   identical at every node. `true` ends the election (leader = whoever is
//!   still active); `false` resumes knockout rounds. The `ko` flags are
//!   consumed by the call and cleared when it returns.
//!
//! The very first call happens before any knockout round, with `ko = 1`
//! everywhere, so detectors that gate on "did anything change" run in full.
//!
//! # Detectors
//!
//! - **state-optimal** — `δ` rounds in which *every* node (active or not)
//!   beeps with probability `1 − 1/q̂`; returns true iff all `δ` rounds were
//!   silent. With `n ≥ Ñ` nodes a call accepts with probability at most
//!   `(1/q̂)^(δ·Ñ) ≤ ε^c`, independent of how the election is going.
//! - **fixed-error** — a `ko` gate round (nodes with `ko = 1` beep; silence
//!   means no knockout happened since the last call and the call aborts
//!   false), then `m` solo-test rounds in which active nodes flip fair coins
//!   and any active listener who hears a beep learns it is not alone, then a
//!   vote round where active nodes that detected company beep; silence means
//!   every candidate believes it is alone, and the call returns true.
//! - **constant-state** — the same gate and vote, but the solo test runs for
//!   a *random* number of rounds controlled by attack rounds instead of a
//!   counter: odd rounds are solo tests, even rounds are attack rounds in
//!   which every node still "in the attack" flips a fair coin; hearing a beep
//!   while listening knocks a node out of the attack. A silent attack round
//!   bumps a shared count (everyone sees the silence) and restarts the
//!   attack. After `count_bound + 1` silent attack rounds the vote runs. The
//!   count is the only unbounded-looking quantity and it is capped by a
//!   constant, so the machine has O(1) states.
//! - **double-safe** — fixed-error followed immediately by constant-state
//!   (the `ko` flags are not cleared in between, so both see the same epoch),
//!   returning the conjunction.
//!
//! # Randomness
//!
//! Coins for a round's action are drawn in the *previous* round's `step`, so
//! that `act` is a pure function of state. Every draw is a single
//! `weighted(num, den)` call with the "quiet" outcome on the low interval;
//! this keeps extracted transition tables two-way at each draw.

use crate::machine::{Action, Channel};
use crate::rng::DrawSource;

use super::params::{ElectionParams, SubKind};

/// Fixed-error detector stages.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FeStage {
    /// Gate round: `ko` holders beep; silence aborts the call.
    Ko { act: Action },
    /// Solo-test round `i` of `m`.
    Mid { i: u32, act: Action, solo: bool },
    /// Vote round: active nodes that detected company beep.
    Fin { act: Action },
}

/// Constant-state detector stages.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CsStage {
    Ko { act: Action },
    /// Solo-test round (odd position).
    Odd { act: Action, solo: bool, attack: bool, count: u8 },
    /// Attack round (even position).
    Even { act: Action, solo: bool, attack: bool, count: u8 },
    Fin { act: Action },
}

/// State-optimal detector: round `i` of `δ`, whether every round so far was
/// silent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SoStage {
    pub i: u64,
    pub act: Action,
    pub all_silent: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SubState {
    So(SoStage),
    Fe(FeStage),
    Cs(CsStage),
    /// double-safe: first leg.
    DsFe(FeStage),
    /// double-safe: second leg, carrying the first leg's verdict.
    DsCs { out1: bool, cs: CsStage },
}

/// One node's view of the election.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CoreState {
    Sub { active: bool, ko: bool, sub: SubState },
    Knock { active: bool, ko: bool, act: Action },
    Done { leader: bool },
}

impl CoreState {
    pub fn is_done(&self) -> bool {
        matches!(self, CoreState::Done { .. })
    }

    pub fn is_active(&self) -> bool {
        match *self {
            CoreState::Sub { active, .. } | CoreState::Knock { active, .. } => active,
            CoreState::Done { leader } => leader,
        }
    }

    pub fn in_sub(&self) -> bool {
        matches!(self, CoreState::Sub { .. })
    }
}

/// Result of stepping one stage of a detector.
enum StageStep<S> {
    Continue(S),
    Return(bool),
}

/// Stateless transition rules for one parameter set.
#[derive(Debug, Clone, Copy)]
pub struct ElectCore {
    pub params: ElectionParams,
}

impl ElectCore {
    pub fn new(params: ElectionParams) -> Self {
        ElectCore { params }
    }

    /// Quiet with probability `1/q̂`, beep otherwise.
    fn lazy_act(&self, rng: &mut dyn DrawSource) -> Action {
        if rng.weighted(1, self.params.q_hat) {
            Action::Listen
        } else {
            Action::Beep
        }
    }

    /// Fair coin: quiet or beep.
    fn coin_act(&self, rng: &mut dyn DrawSource) -> Action {
        if rng.weighted(1, 2) {
            Action::Listen
        } else {
            Action::Beep
        }
    }

    fn fe_entry(&self, ko: bool) -> FeStage {
        FeStage::Ko { act: if ko { Action::Beep } else { Action::Listen } }
    }

    fn cs_entry(&self, ko: bool) -> CsStage {
        CsStage::Ko { act: if ko { Action::Beep } else { Action::Listen } }
    }

    /// First stage of a fresh detection call for a node with the given flags.
    fn sub_entry(&self, ko: bool, rng: &mut dyn DrawSource) -> SubState {
        match self.params.sub {
            SubKind::StateOptimal => SubState::So(SoStage {
                i: 1,
                act: self.lazy_act(rng),
                all_silent: true,
            }),
            SubKind::FixedError => SubState::Fe(self.fe_entry(ko)),
            SubKind::ConstantState => SubState::Cs(self.cs_entry(ko)),
            SubKind::DoubleSafe => SubState::DsFe(self.fe_entry(ko)),
        }
    }

    /// Initial state. Participants start active with `ko` raised so the first
    /// detection call runs in full; observers (counter-machine bystanders)
    /// start inactive but still take part in all-node rounds.
    pub fn enter(&self, participant: bool, rng: &mut dyn DrawSource) -> CoreState {
        self.enter_with(participant, participant, rng)
    }

    /// Initial state with explicit flags.
    pub fn enter_with(&self, active: bool, ko: bool, rng: &mut dyn DrawSource) -> CoreState {
        CoreState::Sub { active, ko, sub: self.sub_entry(ko, rng) }
    }

    pub fn act(&self, s: &CoreState) -> Action {
        match *s {
            CoreState::Knock { act, .. } => act,
            CoreState::Sub { sub, .. } => match sub {
                SubState::So(SoStage { act, .. }) => act,
                SubState::Fe(st) | SubState::DsFe(st) => match st {
                    FeStage::Ko { act } | FeStage::Mid { act, .. } | FeStage::Fin { act } => act,
                },
                SubState::Cs(st) | SubState::DsCs { cs: st, .. } => match st {
                    CsStage::Ko { act }
                    | CsStage::Odd { act, .. }
                    | CsStage::Even { act, .. }
                    | CsStage::Fin { act } => act,
                },
            },
            CoreState::Done { .. } => Action::Listen,
        }
    }

    fn step_so(
        &self,
        st: SoStage,
        chan: Channel,
        rng: &mut dyn DrawSource,
    ) -> StageStep<SoStage> {
        let all_silent = st.all_silent && chan == Channel::Silent;
        if st.i == self.params.delta {
            StageStep::Return(all_silent)
        } else {
            StageStep::Continue(SoStage { i: st.i + 1, act: self.lazy_act(rng), all_silent })
        }
    }

    fn step_fe(
        &self,
        st: FeStage,
        active: bool,
        chan: Channel,
        rng: &mut dyn DrawSource,
    ) -> StageStep<FeStage> {
        let heard = chan == Channel::Beep;
        match st {
            FeStage::Ko { .. } => {
                if !heard {
                    // No knockout since the last call: nothing to re-check.
                    return StageStep::Return(false);
                }
                StageStep::Continue(FeStage::Mid {
                    i: 1,
                    act: if active { self.coin_act(rng) } else { Action::Listen },
                    solo: true,
                })
            }
            FeStage::Mid { i, act, solo } => {
                let solo = solo && !(active && act == Action::Listen && heard);
                if i == self.params.m {
                    let vote = active && !solo;
                    StageStep::Continue(FeStage::Fin {
                        act: if vote { Action::Beep } else { Action::Listen },
                    })
                } else {
                    StageStep::Continue(FeStage::Mid {
                        i: i + 1,
                        act: if active { self.coin_act(rng) } else { Action::Listen },
                        solo,
                    })
                }
            }
            FeStage::Fin { .. } => StageStep::Return(!heard),
        }
    }

    fn step_cs(
        &self,
        st: CsStage,
        active: bool,
        chan: Channel,
        rng: &mut dyn DrawSource,
    ) -> StageStep<CsStage> {
        let heard = chan == Channel::Beep;
        match st {
            CsStage::Ko { .. } => {
                if !heard {
                    return StageStep::Return(false);
                }
                StageStep::Continue(CsStage::Odd {
                    act: if active { self.coin_act(rng) } else { Action::Listen },
                    solo: true,
                    attack: true,
                    count: 0,
                })
            }
            CsStage::Odd { act, solo, attack, count } => {
                let solo = solo && !(active && act == Action::Listen && heard);
                // Attack rounds involve every node, observers included.
                StageStep::Continue(CsStage::Even {
                    act: if attack { self.coin_act(rng) } else { Action::Listen },
                    solo,
                    attack,
                    count,
                })
            }
            CsStage::Even { act, solo, attack, count } => {
                let (attack, count) = if heard {
                    (attack && act != Action::Listen, count)
                } else {
                    // Silence is shared, so the count stays identical at all
                    // nodes and the attack restarts everywhere.
                    (true, count + 1)
                };
                if count > self.params.count_bound {
                    let vote = active && !solo;
                    StageStep::Continue(CsStage::Fin {
                        act: if vote { Action::Beep } else { Action::Listen },
                    })
                } else {
                    StageStep::Continue(CsStage::Odd {
                        act: if active { self.coin_act(rng) } else { Action::Listen },
                        solo,
                        attack,
                        count,
                    })
                }
            }
            CsStage::Fin { .. } => StageStep::Return(!heard),
        }
    }

    fn step_sub(
        &self,
        sub: SubState,
        active: bool,
        ko: bool,
        chan: Channel,
        rng: &mut dyn DrawSource,
    ) -> StageStep<SubState> {
        match sub {
            SubState::So(st) => match self.step_so(st, chan, rng) {
                StageStep::Continue(st) => StageStep::Continue(SubState::So(st)),
                StageStep::Return(r) => StageStep::Return(r),
            },
            SubState::Fe(st) => match self.step_fe(st, active, chan, rng) {
                StageStep::Continue(st) => StageStep::Continue(SubState::Fe(st)),
                StageStep::Return(r) => StageStep::Return(r),
            },
            SubState::Cs(st) => match self.step_cs(st, active, chan, rng) {
                StageStep::Continue(st) => StageStep::Continue(SubState::Cs(st)),
                StageStep::Return(r) => StageStep::Return(r),
            },
            SubState::DsFe(st) => match self.step_fe(st, active, chan, rng) {
                StageStep::Continue(st) => StageStep::Continue(SubState::DsFe(st)),
                // Hand over to the second leg with ko still uncleared.
                StageStep::Return(out1) => StageStep::Continue(SubState::DsCs {
                    out1,
                    cs: self.cs_entry(ko),
                }),
            },
            SubState::DsCs { out1, cs } => match self.step_cs(cs, active, chan, rng) {
                StageStep::Continue(cs) => StageStep::Continue(SubState::DsCs { out1, cs }),
                StageStep::Return(out2) => StageStep::Return(out1 && out2),
            },
        }
    }

    fn knock_entry(&self, active: bool, ko: bool, rng: &mut dyn DrawSource) -> CoreState {
        CoreState::Knock {
            active,
            ko,
            act: if active { self.lazy_act(rng) } else { Action::Listen },
        }
    }

    pub fn step(&self, s: &CoreState, chan: Channel, rng: &mut dyn DrawSource) -> CoreState {
        match *s {
            CoreState::Sub { active, ko, sub } => {
                match self.step_sub(sub, active, ko, chan, rng) {
                    StageStep::Continue(sub) => CoreState::Sub { active, ko, sub },
                    StageStep::Return(true) => CoreState::Done { leader: active },
                    // ko flags are consumed by the call.
                    StageStep::Return(false) => self.knock_entry(active, false, rng),
                }
            }
            CoreState::Knock { active, ko, act } => {
                if chan == Channel::Beep {
                    let knocked = active && act == Action::Listen;
                    self.knock_entry(active && !knocked, ko || knocked, rng)
                } else {
                    // Silent round: epoch over, run the detector.
                    CoreState::Sub { active, ko, sub: self.sub_entry(ko, rng) }
                }
            }
            CoreState::Done { .. } => *s,
        }
    }

    /// The detection verdict implied by a transition out of `Sub`, if any.
    pub fn sub_result(before: &CoreState, after: &CoreState) -> Option<bool> {
        match (before, after) {
            (CoreState::Sub { .. }, CoreState::Knock { .. }) => Some(false),
            (CoreState::Sub { .. }, CoreState::Done { .. }) => Some(true),
            _ => None,
        }
    }
}

/// Tracks election progress from channel observations alone.
///
/// The replay instance participates in nothing (it enters as an observer and
/// its would-be actions are discarded), yet its phase transitions — call
/// boundaries, verdicts, termination — are functions of the channel only, so
/// they coincide with those of every real node. Used to test that property
/// and to let external components follow an election they can only hear.
pub struct ObserverReplay {
    core: ElectCore,
    state: CoreState,
    rng: crate::rng::Stream,
    /// (round, verdict) for every completed detection call.
    pub verdicts: Vec<(u64, bool)>,
    /// Round at which the election terminated, if it has.
    pub done_round: Option<u64>,
    round: u64,
}

impl ObserverReplay {
    pub fn new(params: ElectionParams) -> Self {
        let core = ElectCore::new(params);
        // The observer's own draws never reach the channel; any fixed stream
        // works.
        let mut rng = crate::rng::Stream::new(0);
        let state = core.enter(false, &mut rng);
        ObserverReplay {
            core,
            state,
            rng,
            verdicts: Vec::new(),
            done_round: None,
            round: 1,
        }
    }

    /// Feed one observed channel bit (for the round the election is on).
    pub fn feed(&mut self, chan: Channel) {
        if self.state.is_done() {
            return;
        }
        let next = self.core.step(&self.state, chan, &mut self.rng);
        if let Some(v) = ElectCore::sub_result(&self.state, &next) {
            self.verdicts.push((self.round, v));
        }
        if next.is_done() && self.done_round.is_none() {
            self.done_round = Some(self.round);
        }
        self.state = next;
        self.round += 1;
    }

    pub fn in_sub(&self) -> bool {
        self.state.in_sub()
    }
}
