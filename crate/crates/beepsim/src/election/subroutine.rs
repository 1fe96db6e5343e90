//! Direct invocation of a termination detector as a standalone program.
//!
//! Runs exactly one detection call across the network and labels every node
//! with the verdict: `accept` for true, `reject` for false. Useful for
//! studying detector behaviour in isolation and for exact analysis of a
//! single call.

use crate::machine::{Action, Channel, FinalLabel, NodeEvent, NodeProgram};
use crate::rng::DrawSource;

use super::core::{CoreState, ElectCore};
use super::params::ElectionParams;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SubProgState {
    /// Setup round: the first real round's coins are drawn on the way out.
    Pre,
    Run(CoreState),
    Ret(bool),
}

/// One detection call, verdict as a final label.
#[derive(Debug, Clone, Copy)]
pub struct SubroutineProgram {
    core: ElectCore,
    active: bool,
    ko: bool,
}

impl SubroutineProgram {
    /// All nodes enter as fresh candidates (`active = 1, ko = 1`), matching
    /// the initial call of a full election.
    pub fn new(params: ElectionParams) -> Self {
        SubroutineProgram { core: ElectCore::new(params), active: true, ko: true }
    }

    /// Override the entry flags — e.g. `ko = false` exercises the gate-abort
    /// path of the fixed-error and constant-state detectors.
    pub fn with_flags(params: ElectionParams, active: bool, ko: bool) -> Self {
        SubroutineProgram { core: ElectCore::new(params), active, ko }
    }

    pub fn params(&self) -> &ElectionParams {
        &self.core.params
    }
}

impl NodeProgram for SubroutineProgram {
    type State = SubProgState;

    fn start(&self) -> SubProgState {
        SubProgState::Pre
    }

    fn act(&self, s: &SubProgState) -> Action {
        match s {
            SubProgState::Pre | SubProgState::Ret(_) => Action::Listen,
            SubProgState::Run(cs) => self.core.act(cs),
        }
    }

    fn step(&self, s: &SubProgState, chan: Channel, rng: &mut dyn DrawSource) -> SubProgState {
        match *s {
            SubProgState::Pre => SubProgState::Run(self.core.enter_with(self.active, self.ko, rng)),
            SubProgState::Run(cs) => match self.core.step(&cs, chan, rng) {
                next @ CoreState::Sub { .. } => SubProgState::Run(next),
                CoreState::Done { .. } => SubProgState::Ret(true),
                CoreState::Knock { .. } => SubProgState::Ret(false),
            },
            SubProgState::Ret(_) => s.clone(),
        }
    }

    fn label(&self, s: &SubProgState) -> Option<FinalLabel> {
        match s {
            SubProgState::Ret(true) => Some(FinalLabel::Accept),
            SubProgState::Ret(false) => Some(FinalLabel::Reject),
            _ => None,
        }
    }

    fn declared_labels(&self) -> Vec<FinalLabel> {
        vec![FinalLabel::Accept, FinalLabel::Reject]
    }

    fn events(
        &self,
        before: &SubProgState,
        _chan: Channel,
        after: &SubProgState,
        out: &mut Vec<NodeEvent>,
    ) {
        match (before, after) {
            (SubProgState::Pre, SubProgState::Run(CoreState::Sub { active, ko, .. })) => {
                out.push(NodeEvent::SubBegin { active: *active, ko: *ko });
            }
            (SubProgState::Run(_), SubProgState::Ret(result)) => {
                out.push(NodeEvent::SubEnd { result: *result });
            }
            _ => {}
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::election::params::SubKind;
    use crate::engine::{run_summary, NetworkSpec};
    use crate::machine::FinalLabel;

    fn params(sub: SubKind, q: u64, eps: (u64, u64), nt: u64) -> ElectionParams {
        ElectionParams::new(sub, q, eps, nt).unwrap()
    }

    #[test]
    fn fixed_error_lone_node_accepts_in_fixed_time() {
        let p = params(SubKind::FixedError, 2, (1, 10), 1);
        let prog = SubroutineProgram::new(p);
        for seed in 0..20 {
            let s = run_summary(&NetworkSpec::uniform(prog, 1), seed, 1000);
            assert!(s.terminated);
            assert_eq!(s.count(FinalLabel::Accept), 1);
            // setup + gate + m solo rounds + vote.
            assert_eq!(s.rounds, 1 + 1 + p.m as u64 + 1);
            assert_eq!(s.agreement_violations, 0);
        }
    }

    #[test]
    fn fixed_error_gate_aborts_without_ko() {
        let p = params(SubKind::FixedError, 2, (1, 10), 1);
        let prog = SubroutineProgram::with_flags(p, true, false);
        let s = run_summary(&NetworkSpec::uniform(prog, 5), 1, 1000);
        assert!(s.terminated);
        assert_eq!(s.count(FinalLabel::Reject), 5);
        // setup + gate only.
        assert_eq!(s.rounds, 2);
    }

    #[test]
    fn fixed_error_crowd_mostly_rejects_at_fixed_length() {
        let p = params(SubKind::FixedError, 2, (1, 10), 1);
        let prog = SubroutineProgram::new(p);
        let mut accepts = 0;
        for seed in 0..200 {
            let s = run_summary(&NetworkSpec::uniform(prog, 8), seed, 1000);
            assert!(s.terminated);
            assert_eq!(s.agreement_violations, 0);
            assert_eq!(s.rounds, 1 + 1 + p.m as u64 + 1, "non-abort calls have fixed length");
            if s.count(FinalLabel::Accept) == 8 {
                accepts += 1;
            } else {
                assert_eq!(s.count(FinalLabel::Reject), 8);
            }
        }
        // Eight candidates almost always collide within m = 5 coin rounds.
        assert!(accepts <= 20, "false-accept rate implausibly high: {accepts}/200");
    }

    #[test]
    fn constant_state_lone_node_accepts() {
        let p = params(SubKind::ConstantState, 2, (1, 2), 1);
        let prog = SubroutineProgram::new(p);
        for seed in 0..10 {
            let s = run_summary(&NetworkSpec::uniform(prog, 1), seed, 10_000);
            assert!(s.terminated);
            assert_eq!(s.count(FinalLabel::Accept), 1);
            // gate + (count_bound + 1) silent attack rounds at minimum, plus
            // the paired solo rounds, the setup and the vote.
            assert!(s.rounds >= 1 + 1 + 2 * (p.count_bound as u64 + 1) + 1);
        }
    }

    #[test]
    fn state_optimal_verdict_rate_matches_exact_probability() {
        // q̂ = 2, Ñ = 1, ε = 1/2: least δ with 2^δ ≥ 2^5 is 5.
        let p = params(SubKind::StateOptimal, 2, (1, 2), 1);
        assert_eq!(p.delta, 5);
        let prog = SubroutineProgram::new(p);
        let mut accepts = 0u32;
        let trials = 4000u32;
        for seed in 0..trials as u64 {
            let s = run_summary(&NetworkSpec::uniform(prog, 2), seed, 1000);
            assert!(s.terminated);
            assert_eq!(s.rounds, 1 + p.delta, "call length is always setup + δ");
            if s.count(FinalLabel::Accept) == 2 {
                accepts += 1;
            }
        }
        // P(accept) = (1/2)^(δ·n) = 2^-10 ≈ 0.000977; expect ≈ 3.9 of 4000.
        // A generous band still catches off-by-one-round or per-node bugs,
        // which shift the rate by powers of two.
        assert!(accepts <= 16, "accept rate far too high: {accepts}/4000");
    }

    #[test]
    fn double_safe_lone_node_accepts_with_leg_sum_length() {
        let p = params(SubKind::DoubleSafe, 2, (1, 10), 1);
        let prog = SubroutineProgram::new(p);
        let s = run_summary(&NetworkSpec::uniform(prog, 1), 42, 10_000);
        assert!(s.terminated);
        assert_eq!(s.count(FinalLabel::Accept), 1);
        // setup + fixed-error leg (gate + m + vote) + constant-state leg
        // (gate + pairs + vote): at least the deterministic parts.
        assert!(s.rounds >= 1 + (1 + p.m as u64 + 1) + (1 + 2 * (p.count_bound as u64 + 1) + 1));
    }

    #[test]
    fn double_safe_gate_abort_costs_two_rounds() {
        let p = params(SubKind::DoubleSafe, 2, (1, 10), 1);
        let prog = SubroutineProgram::with_flags(p, true, false);
        let s = run_summary(&NetworkSpec::uniform(prog, 3), 5, 1000);
        assert!(s.terminated);
        assert_eq!(s.count(FinalLabel::Reject), 3);
        // setup + fe gate + cs gate.
        assert_eq!(s.rounds, 3);
    }
}
