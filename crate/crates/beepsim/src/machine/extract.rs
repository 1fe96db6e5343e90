//! Behavioral extraction: enumerate a program's reachable states and the
//! exact transition distribution of every (state, channel) pair.
//!
//! Each step call is replayed under a recording draw source. Unfulfilled
//! draws split the run into one branch per outcome (a two-way branch for
//! `weighted`, `den` branches for raw `uniform`), so the decision tree is
//! explored exhaustively and leaf probabilities are products of exact branch
//! probabilities. Reachability follows execution semantics: beep states are
//! only ever followed by `delta_beep` (a beeping node hears its own beep), so
//! their silent-channel row is the self-loop convention.

use super::{
    Action, BeepMachine, Channel, MachineError, NodeProgram, StateId,
    TransitionDistribution,
};
use crate::prob::Prob;
use crate::rng::DrawSource;
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::One;
use std::collections::{BTreeMap, HashMap, VecDeque};

/// Hard cap on draws per step; protocol steps draw at most once.
const STEP_DRAW_LIMIT: usize = 64;
/// Hard cap on raw `uniform` fan-out during enumeration.
const FANOUT_LIMIT: u64 = 4096;

/// An extracted machine plus the program state behind each dense id
/// (`states[0]` is the start state; ids follow discovery order).
#[derive(Debug, Clone)]
pub struct Extraction<S> {
    pub machine: BeepMachine,
    pub states: Vec<S>,
}

impl<S> Extraction<S> {
    pub fn state_of(&self, id: StateId) -> &S {
        &self.states[id.index()]
    }
}

/// One recorded branch of a replayed step.
#[derive(Debug, Clone, Copy)]
enum BranchKind {
    Uniform { den: u64 },
    Weighted { num: u64, den: u64 },
}

impl BranchKind {
    fn arity(&self) -> u64 {
        match self {
            BranchKind::Uniform { den } => *den,
            BranchKind::Weighted { .. } => 2,
        }
    }

    /// Probability of taking branch `choice`.
    fn prob(&self, choice: u64) -> BigRational {
        match *self {
            BranchKind::Uniform { den } => {
                BigRational::new(BigInt::one(), BigInt::from(den))
            }
            BranchKind::Weighted { num, den } => {
                let n = if choice == 0 { num } else { den - num };
                BigRational::new(BigInt::from(n), BigInt::from(den))
            }
        }
    }
}

/// Replays a forced branch prefix; records the first unfulfilled draw.
struct ReplaySource<'a> {
    forced: &'a [u64],
    kinds: Vec<BranchKind>,
    used: usize,
    pending: Option<BranchKind>,
    total: usize,
}

impl<'a> ReplaySource<'a> {
    fn new(forced: &'a [u64]) -> Self {
        ReplaySource { forced, kinds: Vec::new(), used: 0, pending: None, total: 0 }
    }

    fn take(&mut self, kind: BranchKind) -> u64 {
        self.total += 1;
        if self.used < self.forced.len() {
            let v = self.forced[self.used];
            debug_assert!(v < kind.arity(), "replayed branch out of range");
            self.kinds.push(kind);
            self.used += 1;
            v
        } else {
            if self.pending.is_none() {
                self.pending = Some(kind);
            }
            0
        }
    }
}

impl DrawSource for ReplaySource<'_> {
    fn uniform(&mut self, den: u64) -> u64 {
        self.take(BranchKind::Uniform { den })
    }

    fn weighted(&mut self, num: u64, den: u64) -> bool {
        debug_assert!(num <= den);
        // Choice 0 is the true branch (the low interval [0, num)).
        match self.take(BranchKind::Weighted { num, den }) {
            0 => true,
            _ => false,
        }
    }
}

struct Interner<S> {
    ids: HashMap<S, u32>,
    states: Vec<S>,
}

impl<S: Clone + Eq + std::hash::Hash> Interner<S> {
    fn intern(&mut self, s: &S) -> u32 {
        if let Some(id) = self.ids.get(s) {
            return *id;
        }
        let id = self.states.len() as u32;
        self.states.push(s.clone());
        self.ids.insert(s.clone(), id);
        id
    }
}

/// Enumerate the decision tree of `step(s, chan, ·)`; aggregate leaves per
/// successor state in first-seen (ascending draw value) order.
fn enumerate_transition<P: NodeProgram>(
    p: &P,
    s: &P::State,
    chan: Channel,
    interner: &mut Interner<P::State>,
) -> Result<Vec<(u32, BigRational)>, MachineError> {
    let mut queue: VecDeque<Vec<u64>> = VecDeque::new();
    queue.push_back(Vec::new());
    let mut order: Vec<u32> = Vec::new();
    let mut accum: HashMap<u32, BigRational> = HashMap::new();
    while let Some(prefix) = queue.pop_front() {
        let mut src = ReplaySource::new(&prefix);
        let next = p.step(s, chan, &mut src);
        if src.total > STEP_DRAW_LIMIT {
            return Err(MachineError::DrawLimit {
                state: format!("{s:?}"),
                limit: STEP_DRAW_LIMIT,
            });
        }
        if let Some(kind) = src.pending {
            let arity = kind.arity();
            if arity > FANOUT_LIMIT {
                return Err(MachineError::Sampler(format!(
                    "uniform({arity}) fan-out exceeds enumeration limit {FANOUT_LIMIT}; \
                     draw through `weighted` instead"
                )));
            }
            for v in 0..arity {
                let mut ext = prefix.clone();
                ext.push(v);
                queue.push_back(ext);
            }
            continue;
        }
        debug_assert_eq!(src.used, prefix.len(), "step consumed fewer draws than before");
        let mut prob = BigRational::one();
        for (choice, kind) in prefix.iter().zip(src.kinds.iter()) {
            prob *= kind.prob(*choice);
        }
        let id = interner.intern(&next);
        match accum.get_mut(&id) {
            Some(mass) => *mass += prob,
            None => {
                order.push(id);
                accum.insert(id, prob);
            }
        }
    }
    Ok(order.into_iter().map(|id| (id, accum.remove(&id).unwrap())).collect())
}

/// Extract the exact `BeepMachine` realized by a program, up to `cap`
/// reachable states.
pub fn extract_machine<P: NodeProgram>(
    p: &P,
    cap: usize,
) -> Result<Extraction<P::State>, MachineError> {
    let mut interner = Interner { ids: HashMap::new(), states: Vec::new() };
    interner.intern(&p.start());
    let mut is_beep: Vec<bool> = Vec::new();
    let mut silent: Vec<TransitionDistribution> = Vec::new();
    let mut beep: Vec<TransitionDistribution> = Vec::new();
    let mut i = 0usize;
    while i < interner.states.len() {
        if interner.states.len() > cap {
            return Err(MachineError::EnumerationOverflow { seen: interner.states.len(), cap });
        }
        let s = interner.states[i].clone();
        let me = StateId(i as u32);
        let act = p.act(&s);
        is_beep.push(act == Action::Beep);
        if p.is_terminal(&s) {
            silent.push(TransitionDistribution::point(me));
            beep.push(TransitionDistribution::point(me));
        } else {
            let ds = if act == Action::Beep {
                // Unexercisable: a beeping node never observes silence.
                TransitionDistribution::point(me)
            } else {
                build_dist(enumerate_transition(p, &s, Channel::Silent, &mut interner)?)
            };
            let db = build_dist(enumerate_transition(p, &s, Channel::Beep, &mut interner)?);
            silent.push(ds);
            beep.push(db);
        }
        i += 1;
    }
    if interner.states.len() > cap {
        return Err(MachineError::EnumerationOverflow { seen: interner.states.len(), cap });
    }
    let mut finals = BTreeMap::new();
    for (i, s) in interner.states.iter().enumerate() {
        if let Some(label) = p.label(s) {
            if finals.insert(label, StateId(i as u32)).is_some() {
                return Err(MachineError::DuplicateLabel(label));
            }
        }
    }
    let machine = BeepMachine::from_parts(is_beep, StateId(0), silent, beep, finals)?;
    Ok(Extraction { machine, states: interner.states })
}

fn build_dist(entries: Vec<(u32, BigRational)>) -> TransitionDistribution {
    TransitionDistribution::new(
        entries
            .into_iter()
            .map(|(id, r)| (StateId(id), Prob::new(r).expect("branch probabilities stay in [0,1]")))
            .collect(),
    )
}

/// Count reachable states without building distributions: an independent,
/// lighter walk used to cross-check extraction and audit protocol footprints.
pub fn audit_state_count<P: NodeProgram>(p: &P, cap: usize) -> Result<usize, MachineError> {
    let mut interner = Interner { ids: HashMap::new(), states: Vec::new() };
    interner.intern(&p.start());
    let mut i = 0usize;
    while i < interner.states.len() {
        if interner.states.len() > cap {
            return Err(MachineError::EnumerationOverflow { seen: interner.states.len(), cap });
        }
        let s = interner.states[i].clone();
        if !p.is_terminal(&s) {
            let chans: &[Channel] = if p.act(&s) == Action::Beep {
                &[Channel::Beep]
            } else {
                &[Channel::Silent, Channel::Beep]
            };
            for &chan in chans {
                // Walk the branch tree, interning every leaf successor.
                let mut queue: VecDeque<Vec<u64>> = VecDeque::new();
                queue.push_back(Vec::new());
                while let Some(prefix) = queue.pop_front() {
                    let mut src = ReplaySource::new(&prefix);
                    let next = p.step(&s, chan, &mut src);
                    if src.total > STEP_DRAW_LIMIT {
                        return Err(MachineError::DrawLimit {
                            state: format!("{s:?}"),
                            limit: STEP_DRAW_LIMIT,
                        });
                    }
                    match src.pending {
                        Some(kind) => {
                            let arity = kind.arity();
                            if arity > FANOUT_LIMIT {
                                return Err(MachineError::Sampler(format!(
                                    "uniform({arity}) fan-out exceeds enumeration limit \
                                     {FANOUT_LIMIT}; draw through `weighted` instead"
                                )));
                            }
                            for v in 0..arity {
                                let mut ext = prefix.clone();
                                ext.push(v);
                                queue.push_back(ext);
                            }
                        }
                        None => {
                            interner.intern(&next);
                        }
                    }
                }
            }
        }
        i += 1;
    }
    Ok(interner.states.len())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::machine::{FinalLabel, MachineProgram};
    use crate::rng::Stream;

    /// One bit of state; always beeps; flips the bit on a fair coin.
    #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
    struct Bit(bool);

    struct AlwaysBeep;

    impl NodeProgram for AlwaysBeep {
        type State = Bit;

        fn start(&self) -> Bit {
            Bit(false)
        }

        fn act(&self, _s: &Bit) -> Action {
            Action::Beep
        }

        fn step(&self, s: &Bit, _chan: Channel, rng: &mut dyn DrawSource) -> Bit {
            if rng.coin() {
                Bit(!s.0)
            } else {
                *s
            }
        }

        fn label(&self, _s: &Bit) -> Option<FinalLabel> {
            None
        }
    }

    #[test]
    fn always_beep_extracts_two_states() {
        let ex = extract_machine(&AlwaysBeep, 1000).unwrap();
        assert_eq!(ex.machine.state_count(), 2);
        assert_eq!(ex.machine.beep_states().count(), 2);
        // Silent rows are the unexercisable self-loop convention.
        assert!(ex.machine.delta(Channel::Silent, StateId(0)).is_point_on(StateId(0)));
        let db = ex.machine.delta(Channel::Beep, StateId(0));
        assert_eq!(db.entries().len(), 2);
        for (_, p) in db.entries() {
            assert_eq!(p.to_string(), "1/2");
        }
        assert_eq!(audit_state_count(&AlwaysBeep, 1000).unwrap(), 2);
    }

    /// Ignores randomness entirely: extraction must yield only 0/1 probs.
    struct TwoPhase;

    impl NodeProgram for TwoPhase {
        type State = Bit;

        fn start(&self) -> Bit {
            Bit(false)
        }

        fn act(&self, s: &Bit) -> Action {
            if s.0 {
                Action::Beep
            } else {
                Action::Listen
            }
        }

        fn step(&self, s: &Bit, _chan: Channel, _rng: &mut dyn DrawSource) -> Bit {
            Bit(!s.0)
        }

        fn label(&self, _s: &Bit) -> Option<FinalLabel> {
            None
        }
    }

    #[test]
    fn deterministic_program_extracts_point_masses() {
        let ex = extract_machine(&TwoPhase, 10).unwrap();
        assert_eq!(ex.machine.state_count(), 2);
        for chan in [Channel::Silent, Channel::Beep] {
            for s in 0..2u32 {
                for (_, p) in ex.machine.delta(chan, StateId(s)).entries() {
                    assert!(p.is_zero() || p.is_one());
                }
            }
        }
    }

    #[test]
    fn overflow_reports_partial_count() {
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
        struct Counter(u64);
        struct Unbounded;
        impl NodeProgram for Unbounded {
            type State = Counter;
            fn start(&self) -> Counter {
                Counter(0)
            }
            fn act(&self, _s: &Counter) -> Action {
                Action::Listen
            }
            fn step(&self, s: &Counter, _c: Channel, _r: &mut dyn DrawSource) -> Counter {
                Counter(s.0 + 1)
            }
            fn label(&self, _s: &Counter) -> Option<FinalLabel> {
                None
            }
        }
        let err = extract_machine(&Unbounded, 16).unwrap_err();
        match err {
            MachineError::EnumerationOverflow { seen, cap } => {
                assert!(seen > cap);
                assert_eq!(cap, 16);
            }
            other => panic!("expected overflow, got {other:?}"),
        }
    }

    #[test]
    fn weighted_draw_matches_uniform_derivation() {
        // weighted(1, q) through a real stream equals uniform(q) < 1.
        for seed in 0..200u64 {
            let mut a = Stream::for_node_round(seed, 0, 1);
            let mut b = Stream::for_node_round(seed, 0, 1);
            assert_eq!(a.weighted(1, 5), b.uniform(5) < 1);
        }
    }

    #[test]
    fn extraction_round_trips_through_machine_program() {
        // extract(MachineProgram(extract(P))) reproduces the same machine.
        let ex1 = extract_machine(&AlwaysBeep, 100).unwrap();
        let mp = MachineProgram::new(ex1.machine.clone()).unwrap();
        let ex2 = extract_machine(&mp, 100).unwrap();
        assert_eq!(ex1.machine, ex2.machine);
    }
}
