//! Beeping state machines with exact rational transition probabilities.
//!
//! A machine is `(Q_r, Q_b, q_s, delta_silent, delta_beep)` over dense integer
//! state-ids: `Q_b` states beep, `Q_r` states listen, and after each round a
//! node applies `delta_beep` when the channel carried a beep (its own
//! included) and `delta_silent` otherwise. Designated final states carry
//! labels and must be terminal.

mod extract;
mod io;
mod machine_program;
mod program;
mod solo;

pub use extract::{audit_state_count, extract_machine, Extraction};
pub use io::{machine_from_json, machine_to_json};
pub use machine_program::MachineProgram;
pub use program::{Action, Channel, FinalLabel, NodeEvent, NodeProgram};
pub use solo::{find_solo_reachable_path, solo_path_to_label};

use crate::prob::Prob;
use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Zero};
use std::collections::BTreeMap;
use thiserror::Error;

/// Dense state index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct StateId(pub u32);

impl StateId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl std::fmt::Display for StateId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum MachineError {
    #[error("malformed machine: {}", format_violations(.0))]
    Malformed(Vec<StructuralViolation>),
    #[error("state enumeration exceeded cap: {seen} states seen, cap {cap}")]
    EnumerationOverflow { seen: usize, cap: usize },
    #[error("unknown state id {0}")]
    UnknownState(u32),
    #[error("machine has no `{0}` final state")]
    UnknownLabel(FinalLabel),
    #[error("program drew more than {limit} values in one step (state {state:?})")]
    DrawLimit { state: String, limit: usize },
    #[error("two states labeled `{0}`")]
    DuplicateLabel(FinalLabel),
    #[error("cannot compile sampler: {0}")]
    Sampler(String),
}

#[derive(Debug, PartialEq, Eq)]
pub enum StructuralViolation {
    /// delta tables must cover exactly the declared states.
    TableLength { channel: Channel, expected: usize, got: usize },
    BadStart { start: u32, count: usize },
    BadTarget { state: u32, channel: Channel, target: u32 },
    DuplicateTarget { state: u32, channel: Channel, target: u32 },
    /// Distribution mass must sum to exactly 1.
    BadSum { state: u32, channel: Channel, sum: String },
    BadFinalState { label: FinalLabel, state: u32 },
    /// Labeled finals must place probability 1 on themselves on both channels.
    NonTerminalFinal { label: FinalLabel, state: u32 },
}

fn format_violations(v: &[StructuralViolation]) -> String {
    let parts: Vec<String> = v.iter().map(|x| format!("{x:?}")).collect();
    parts.join("; ")
}

/// A probability distribution over successor states. Entries are ordered (the
/// order is the canonical sampling order), reference distinct states, carry
/// nonzero probability, and sum to exactly 1.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TransitionDistribution {
    entries: Vec<(StateId, Prob)>,
}

impl TransitionDistribution {
    /// Build from (state, probability) pairs. Zero-probability entries are
    /// dropped; duplicates and bad sums are structural violations reported by
    /// the machine constructor, so this returns raw results for it to check.
    pub fn new(entries: Vec<(StateId, Prob)>) -> Self {
        TransitionDistribution {
            entries: entries.into_iter().filter(|(_, p)| !p.is_zero()).collect(),
        }
    }

    pub fn point(s: StateId) -> Self {
        TransitionDistribution { entries: vec![(s, Prob::one())] }
    }

    pub fn entries(&self) -> &[(StateId, Prob)] {
        &self.entries
    }

    pub fn is_point_on(&self, s: StateId) -> bool {
        self.entries.len() == 1 && self.entries[0].0 == s && self.entries[0].1.is_one()
    }

    pub fn mass(&self) -> BigRational {
        self.entries.iter().fold(BigRational::zero(), |a, (_, p)| a + p.ratio())
    }

    /// Least common denominator of the (reduced) entry probabilities.
    pub fn common_denominator(&self) -> BigInt {
        self.entries
            .iter()
            .fold(BigInt::one(), |l, (_, p)| l.lcm(p.ratio().denom()))
    }

    fn check(&self, state: u32, channel: Channel, count: usize, out: &mut Vec<StructuralViolation>) {
        let mut seen = std::collections::HashSet::new();
        for (t, _) in &self.entries {
            if t.index() >= count {
                out.push(StructuralViolation::BadTarget { state, channel, target: t.0 });
            }
            if !seen.insert(*t) {
                out.push(StructuralViolation::DuplicateTarget { state, channel, target: t.0 });
            }
        }
        let sum = self.mass();
        if !sum.is_one() {
            out.push(StructuralViolation::BadSum { state, channel, sum: sum.to_string() });
        }
    }
}

/// A precision-validation finding: a transition probability outside
/// `{0, 1} ∪ [1/q, 1 - 1/q]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PrecisionViolation {
    pub state: StateId,
    pub channel: Channel,
    pub target: StateId,
    pub prob: Prob,
}

/// A beeping machine over dense state ids.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BeepMachine {
    is_beep: Vec<bool>,
    start: StateId,
    delta_silent: Vec<TransitionDistribution>,
    delta_beep: Vec<TransitionDistribution>,
    finals: BTreeMap<FinalLabel, StateId>,
}

impl BeepMachine {
    /// Validate and assemble. Any structural violation yields the distinct
    /// malformed-machine error carrying the full list.
    pub fn from_parts(
        is_beep: Vec<bool>,
        start: StateId,
        delta_silent: Vec<TransitionDistribution>,
        delta_beep: Vec<TransitionDistribution>,
        finals: BTreeMap<FinalLabel, StateId>,
    ) -> Result<Self, MachineError> {
        let count = is_beep.len();
        let mut v = Vec::new();
        if delta_silent.len() != count {
            v.push(StructuralViolation::TableLength {
                channel: Channel::Silent,
                expected: count,
                got: delta_silent.len(),
            });
        }
        if delta_beep.len() != count {
            v.push(StructuralViolation::TableLength {
                channel: Channel::Beep,
                expected: count,
                got: delta_beep.len(),
            });
        }
        if start.index() >= count {
            v.push(StructuralViolation::BadStart { start: start.0, count });
        }
        if delta_silent.len() == count && delta_beep.len() == count {
            for (i, d) in delta_silent.iter().enumerate() {
                d.check(i as u32, Channel::Silent, count, &mut v);
            }
            for (i, d) in delta_beep.iter().enumerate() {
                d.check(i as u32, Channel::Beep, count, &mut v);
            }
            for (label, s) in &finals {
                if s.index() >= count {
                    v.push(StructuralViolation::BadFinalState { label: *label, state: s.0 });
                } else if !delta_silent[s.index()].is_point_on(*s)
                    || !delta_beep[s.index()].is_point_on(*s)
                {
                    v.push(StructuralViolation::NonTerminalFinal { label: *label, state: s.0 });
                }
            }
        }
        if !v.is_empty() {
            return Err(MachineError::Malformed(v));
        }
        Ok(BeepMachine { is_beep, start, delta_silent, delta_beep, finals })
    }

    pub fn state_count(&self) -> usize {
        self.is_beep.len()
    }

    pub fn start(&self) -> StateId {
        self.start
    }

    pub fn is_beep_state(&self, s: StateId) -> bool {
        self.is_beep[s.index()]
    }

    pub fn receive_states(&self) -> impl Iterator<Item = StateId> + '_ {
        (0..self.is_beep.len() as u32).map(StateId).filter(move |s| !self.is_beep[s.index()])
    }

    pub fn beep_states(&self) -> impl Iterator<Item = StateId> + '_ {
        (0..self.is_beep.len() as u32).map(StateId).filter(move |s| self.is_beep[s.index()])
    }

    pub fn delta(&self, chan: Channel, s: StateId) -> &TransitionDistribution {
        match chan {
            Channel::Silent => &self.delta_silent[s.index()],
            Channel::Beep => &self.delta_beep[s.index()],
        }
    }

    pub fn finals(&self) -> &BTreeMap<FinalLabel, StateId> {
        &self.finals
    }

    pub fn label_of(&self, s: StateId) -> Option<FinalLabel> {
        self.finals.iter().find(|(_, id)| **id == s).map(|(l, _)| *l)
    }

    /// Structurally stuck: probability 1 on itself under both channel bits.
    pub fn is_sink(&self, s: StateId) -> bool {
        self.delta_silent[s.index()].is_point_on(s) && self.delta_beep[s.index()].is_point_on(s)
    }

    /// Check every transition probability against precision `q`: each must be
    /// 0, 1, or inside `[1/q, 1 - 1/q]`. The machine is structurally valid by
    /// construction, so the only possible findings are precision violations.
    pub fn validate_precision(&self, q: u64) -> Vec<PrecisionViolation> {
        assert!(q >= 2, "precision q must be at least 2");
        let lo = BigRational::new(BigInt::one(), BigInt::from(q));
        let hi = BigRational::one() - &lo;
        let mut out = Vec::new();
        for chan in [Channel::Silent, Channel::Beep] {
            let table = match chan {
                Channel::Silent => &self.delta_silent,
                Channel::Beep => &self.delta_beep,
            };
            for (i, dist) in table.iter().enumerate() {
                for (t, p) in dist.entries() {
                    if p.is_zero() || p.is_one() {
                        continue;
                    }
                    if p.ratio() < &lo || p.ratio() > &hi {
                        out.push(PrecisionViolation {
                            state: StateId(i as u32),
                            channel: chan,
                            target: *t,
                            prob: p.clone(),
                        });
                    }
                }
            }
        }
        out
    }
}

#[cfg(test)]
pub(crate) mod tests_support {
    use super::*;
    use crate::rng::DrawSource;

    /// Small mixed program: coin-driven branch through a beep state into a
    /// labeled terminal. Shared by serialization and solo-path tests.
    #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
    pub(crate) enum FlipState {
        Start,
        Loud,
        Quiet,
        Done,
    }

    pub(crate) struct CoinFlip;

    impl NodeProgram for CoinFlip {
        type State = FlipState;

        fn start(&self) -> FlipState {
            FlipState::Start
        }

        fn act(&self, s: &FlipState) -> Action {
            match s {
                FlipState::Loud => Action::Beep,
                _ => Action::Listen,
            }
        }

        fn step(&self, s: &FlipState, chan: Channel, rng: &mut dyn DrawSource) -> FlipState {
            match s {
                FlipState::Start => {
                    if rng.coin() {
                        FlipState::Loud
                    } else {
                        FlipState::Quiet
                    }
                }
                FlipState::Loud => FlipState::Done,
                FlipState::Quiet => {
                    if chan == Channel::Beep {
                        FlipState::Start
                    } else {
                        FlipState::Done
                    }
                }
                FlipState::Done => FlipState::Done,
            }
        }

        fn label(&self, s: &FlipState) -> Option<FinalLabel> {
            matches!(s, FlipState::Done).then_some(FinalLabel::Alone)
        }
    }

    pub(crate) fn coin_flip_program() -> CoinFlip {
        CoinFlip
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(n: u64, d: u64) -> Prob {
        Prob::from_u64(n, d).unwrap()
    }

    fn two_state(prob_to_1: Prob) -> Result<BeepMachine, MachineError> {
        let rest = Prob::new(
            BigRational::one() - prob_to_1.ratio(),
        )
        .unwrap();
        let d0 = TransitionDistribution::new(vec![(StateId(1), prob_to_1), (StateId(0), rest)]);
        BeepMachine::from_parts(
            vec![false, true],
            StateId(0),
            vec![d0.clone(), TransitionDistribution::point(StateId(0))],
            vec![d0, TransitionDistribution::point(StateId(0))],
            BTreeMap::new(),
        )
    }

    #[test]
    fn structure_rejects_bad_sum() {
        let d = TransitionDistribution::new(vec![(StateId(0), p(1, 3))]);
        let err = BeepMachine::from_parts(
            vec![false],
            StateId(0),
            vec![d.clone()],
            vec![d],
            BTreeMap::new(),
        )
        .unwrap_err();
        match err {
            MachineError::Malformed(v) => {
                assert!(v.iter().any(|x| matches!(x, StructuralViolation::BadSum { .. })));
            }
            other => panic!("expected Malformed, got {other:?}"),
        }
    }

    #[test]
    fn structure_rejects_nonterminal_final() {
        let mut finals = BTreeMap::new();
        finals.insert(FinalLabel::Leader, StateId(1));
        let err = BeepMachine::from_parts(
            vec![false, false],
            StateId(0),
            vec![
                TransitionDistribution::point(StateId(1)),
                TransitionDistribution::point(StateId(0)),
            ],
            vec![
                TransitionDistribution::point(StateId(1)),
                TransitionDistribution::point(StateId(1)),
            ],
            finals,
        )
        .unwrap_err();
        match err {
            MachineError::Malformed(v) => {
                assert!(v.iter().any(|x| matches!(x, StructuralViolation::NonTerminalFinal { .. })));
            }
            other => panic!("expected Malformed, got {other:?}"),
        }
    }

    #[test]
    fn precision_examples() {
        // Probability 1/3 fails at q=2 (interval [1/2, 1/2]) and passes at q=4.
        // Both entries (1/3 and 2/3) violate, on both channel tables.
        let m = two_state(p(1, 3)).unwrap();
        assert_eq!(m.validate_precision(2).len(), 4);
        assert!(m.validate_precision(4).is_empty());

        // All probabilities in {0, 1/2, 1} pass at q=2.
        let m = two_state(p(1, 2)).unwrap();
        assert!(m.validate_precision(2).is_empty());
    }

    #[test]
    fn precision_closure_at_q2() {
        // Passing at q=2 forces every probability into {0, 1/2, 1}, which then
        // passes for every q' >= 2.
        let m = two_state(p(1, 2)).unwrap();
        assert!(m.validate_precision(2).is_empty());
        for chan in [Channel::Silent, Channel::Beep] {
            for s in 0..m.state_count() as u32 {
                for (_, prob) in m.delta(chan, StateId(s)).entries() {
                    assert!(
                        prob.is_zero() || prob.is_one() || *prob == p(1, 2),
                        "q=2-valid machine carried {prob}"
                    );
                }
            }
        }
        for q in [2, 3, 17, 1000] {
            assert!(m.validate_precision(q).is_empty());
        }
    }
}
