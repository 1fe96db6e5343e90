//! Exact distribution analysis over anonymous configurations.
//!
//! Nodes are anonymous and the channel collapses everything to a single bit,
//! so a network of `n` copies of one machine is itself a Markov chain whose
//! state is the *multiset* of node states. This module walks that chain with
//! exact rational arithmetic — no sampling, no floating point — which turns
//! error-bound claims into equality checks and gives the Monte Carlo harness
//! an oracle to be audited against.
//!
//! The core operations are [`step_exact`], one exact transition of the
//! configuration chain, and [`absorb_exact`], which pushes the distribution
//! forward until (almost) all mass is retired into absorbing buckets:
//!
//! * the **violation** bucket — configurations with two or more nodes in the
//!   leader-labeled state; these are retired the moment they appear, whether
//!   or not the rest of the network has halted;
//! * **profile** buckets — configurations where every occupied state is a
//!   sink, keyed by the multiset of final labels.
//!
//! Mass that is still live when the walk stops (tail threshold or horizon)
//! is reported as `unresolved`. The three buckets plus `unresolved` sum to
//! exactly 1.

use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};
use thiserror::Error;

use crate::machine::{BeepMachine, Channel, FinalLabel, StateId};

/// A multiset of machine states: how many nodes sit in each state. Entries
/// are sorted by state id and counts are strictly positive, so two equal
/// multisets are structurally equal.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Configuration(Vec<(StateId, u64)>);

/// The multiset of final labels in an absorbed configuration. `None` counts
/// nodes parked in an unlabeled sink (e.g. a knocked-out non-leader).
pub type Profile = BTreeMap<Option<FinalLabel>, u64>;

impl Configuration {
    /// All `n` nodes in one state. `n` must be at least 1.
    pub fn uniform(state: StateId, n: u64) -> Self {
        assert!(n >= 1, "a configuration needs at least one node");
        Configuration(vec![(state, n)])
    }

    /// Build from (state, count) pairs; duplicates are merged, zero counts
    /// dropped. The result must be nonempty.
    pub fn from_pairs(pairs: impl IntoIterator<Item = (StateId, u64)>) -> Self {
        let mut map: BTreeMap<StateId, u64> = BTreeMap::new();
        for (s, c) in pairs {
            if c > 0 {
                *map.entry(s).or_insert(0) += c;
            }
        }
        assert!(!map.is_empty(), "a configuration needs at least one node");
        Configuration(map.into_iter().collect())
    }

    fn from_map(map: BTreeMap<StateId, u64>) -> Self {
        debug_assert!(map.values().all(|&c| c > 0));
        Configuration(map.into_iter().collect())
    }

    pub fn counts(&self) -> &[(StateId, u64)] {
        &self.0
    }

    pub fn n_nodes(&self) -> u64 {
        self.0.iter().map(|&(_, c)| c).sum()
    }

    pub fn count_of(&self, state: StateId) -> u64 {
        self.0.iter().find(|&&(s, _)| s == state).map_or(0, |&(_, c)| c)
    }

    /// The channel bit this configuration produces: ⊤ iff any occupied state
    /// beeps. Anonymity makes this deterministic given the multiset.
    pub fn channel(&self, machine: &BeepMachine) -> Channel {
        if self.0.iter().any(|&(s, _)| machine.is_beep_state(s)) {
            Channel::Beep
        } else {
            Channel::Silent
        }
    }

    /// True when every occupied state is a structural sink, i.e. the
    /// configuration can never change again.
    pub fn is_all_sink(&self, machine: &BeepMachine) -> bool {
        self.0.iter().all(|&(s, _)| machine.is_sink(s))
    }

    /// Label multiset of the occupied states (meaningful for absorbed
    /// configurations; defined for any).
    pub fn profile(&self, machine: &BeepMachine) -> Profile {
        let mut p = Profile::new();
        for &(s, c) in &self.0 {
            *p.entry(machine.label_of(s)).or_insert(0) += c;
        }
        p
    }
}

/// Render a profile as `label:count` pairs, e.g. `leader:1,none:1`.
pub fn format_profile(profile: &Profile) -> String {
    let parts: Vec<String> = profile
        .iter()
        .map(|(l, c)| match l {
            Some(l) => format!("{l}:{c}"),
            None => format!("none:{c}"),
        })
        .collect();
    parts.join(",")
}

/// One exact step of the configuration chain: the distribution over successor
/// configurations, as exact rationals summing to 1.
///
/// The channel is determined by the configuration, so each node's row is
/// fixed; `k` nodes in one state split multinomially over that row, and the
/// per-state splits combine independently.
pub fn step_exact(
    machine: &BeepMachine,
    config: &Configuration,
) -> Vec<(Configuration, BigRational)> {
    let chan = config.channel(machine);
    // Fold states into the running cartesian product of per-state splits.
    let mut acc: BTreeMap<BTreeMap<StateId, u64>, BigRational> = BTreeMap::new();
    acc.insert(BTreeMap::new(), BigRational::one());
    for &(state, k) in config.counts() {
        let row = machine.delta(chan, state).entries();
        let mut splits: Vec<(Vec<(StateId, u64)>, BigRational)> = Vec::new();
        for_each_composition(k, row.len(), &mut |parts| {
            let mut weight = BigRational::from(multinomial(k, parts));
            let mut targets = Vec::new();
            for (i, (target, prob)) in row.iter().enumerate() {
                if parts[i] == 0 {
                    continue;
                }
                weight *= pow_ratio(prob.ratio(), parts[i]);
                targets.push((*target, parts[i]));
            }
            splits.push((targets, weight));
        });
        let mut next: BTreeMap<BTreeMap<StateId, u64>, BigRational> = BTreeMap::new();
        for (partial, wp) in &acc {
            for (targets, w) in &splits {
                let mut merged = partial.clone();
                for &(t, c) in targets {
                    *merged.entry(t).or_insert(0) += c;
                }
                let slot = next.entry(merged).or_insert_with(BigRational::zero);
                *slot += wp * w;
            }
        }
        acc = next;
    }
    acc.into_iter().map(|(m, w)| (Configuration::from_map(m), w)).collect()
}

/// Visit every way to write `total` as an ordered sum of `parts` nonnegative
/// integers. `parts` must be at least 1.
fn for_each_composition(total: u64, parts: usize, f: &mut impl FnMut(&[u64])) {
    assert!(parts >= 1, "transition rows are never empty");
    let mut buf = vec![0u64; parts];
    fn rec(buf: &mut Vec<u64>, idx: usize, rem: u64, f: &mut impl FnMut(&[u64])) {
        if idx + 1 == buf.len() {
            buf[idx] = rem;
            f(buf);
            return;
        }
        for v in 0..=rem {
            buf[idx] = v;
            rec(buf, idx + 1, rem - v, f);
        }
    }
    rec(&mut buf, 0, total, f);
}

fn binomial(n: u64, k: u64) -> BigInt {
    let k = k.min(n - k.min(n));
    let mut c = BigInt::one();
    for i in 1..=k {
        c = c * BigInt::from(n - k + i) / BigInt::from(i);
    }
    c
}

/// total! / (parts[0]! · parts[1]! · …) for parts summing to total.
fn multinomial(total: u64, parts: &[u64]) -> BigInt {
    let mut result = BigInt::one();
    let mut remaining = total;
    for &p in parts {
        result *= binomial(remaining, p);
        remaining -= p;
    }
    debug_assert_eq!(remaining, 0);
    result
}

fn pow_ratio(r: &BigRational, exp: u64) -> BigRational {
    let mut out = BigRational::one();
    for _ in 0..exp {
        out *= r;
    }
    out
}

/// Stopping controls for [`absorb_exact`]. `tail` is the live mass below
/// which the walk stops; `horizon` caps the number of rounds; `config_cap`
/// bounds the live configuration count (exceeding it is an error, not a
/// truncation — exactness is the whole point).
#[derive(Debug, Clone)]
pub struct AbsorbOptions {
    pub tail: BigRational,
    pub horizon: u64,
    pub config_cap: usize,
}

impl Default for AbsorbOptions {
    fn default() -> Self {
        AbsorbOptions {
            tail: BigRational::new(BigInt::one(), BigInt::from(1_000_000_000u64)),
            horizon: 100_000,
            config_cap: 2_000_000,
        }
    }
}

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error(
        "configuration space has C(n+s-1, s-1) = {size} configurations, above the cap {cap}"
    )]
    SpaceTooLarge { size: BigInt, cap: usize },
}

/// Number of multisets of size `n` over `s` states: C(n+s−1, s−1).
pub fn configuration_space_size(n: u64, s: usize) -> BigInt {
    binomial(n + s as u64 - 1, s as u64 - 1)
}

/// Where the mass went.
#[derive(Debug, Clone)]
pub struct AbsorbReport {
    /// Mass retired into configurations with ≥ 2 leader-labeled nodes.
    pub violation: BigRational,
    /// Mass absorbed into all-sink configurations, by label multiset.
    pub profiles: BTreeMap<Profile, BigRational>,
    /// Mass still live when the walk stopped.
    pub unresolved: BigRational,
    /// Rounds actually stepped.
    pub rounds: u64,
    /// Largest live configuration count seen.
    pub peak_live: usize,
    /// True when the walk hit the horizon with live mass above the tail
    /// threshold — the report is then a truncation, not a full account.
    pub truncated: bool,
}

impl AbsorbReport {
    /// violation + Σ profiles + unresolved; exactly 1 for a valid walk.
    pub fn total(&self) -> BigRational {
        let profiles: BigRational =
            self.profiles.values().fold(BigRational::zero(), |a, m| a + m);
        &self.violation + profiles + &self.unresolved
    }

    /// Total mass on profiles satisfying a predicate.
    pub fn profile_mass(&self, pred: impl Fn(&Profile) -> bool) -> BigRational {
        self.profiles
            .iter()
            .filter(|(p, _)| pred(p))
            .fold(BigRational::zero(), |a, (_, m)| a + m)
    }
}

enum Class {
    Violation,
    Absorbed(Profile),
    Live,
}

fn classify(machine: &BeepMachine, leader: Option<StateId>, config: &Configuration) -> Class {
    if let Some(ls) = leader {
        if config.count_of(ls) >= 2 {
            return Class::Violation;
        }
    }
    if config.is_all_sink(machine) {
        Class::Absorbed(config.profile(machine))
    } else {
        Class::Live
    }
}

/// Push the configuration distribution forward from `start`, retiring mass
/// into the violation and profile buckets as it becomes absorbed, until live
/// mass drops to `tail`, the horizon is hit, or nothing is live.
pub fn absorb_exact(
    machine: &BeepMachine,
    start: &Configuration,
    opts: &AbsorbOptions,
) -> Result<AbsorbReport, AnalysisError> {
    let space = configuration_space_size(start.n_nodes(), machine.state_count());
    if space > BigInt::from(opts.config_cap) {
        return Err(AnalysisError::SpaceTooLarge { size: space, cap: opts.config_cap });
    }
    let leader = machine.finals().get(&FinalLabel::Leader).copied();
    let mut violation = BigRational::zero();
    let mut profiles: BTreeMap<Profile, BigRational> = BTreeMap::new();
    let mut live: BTreeMap<Configuration, BigRational> = BTreeMap::new();
    let mut live_mass = BigRational::zero();

    {
        let mass = BigRational::one();
        match classify(machine, leader, start) {
            Class::Violation => violation += &mass,
            Class::Absorbed(p) => *profiles.entry(p).or_insert_with(BigRational::zero) += &mass,
            Class::Live => {
                live.insert(start.clone(), mass.clone());
                live_mass += mass;
            }
        }
    }

    let mut rounds = 0;
    let mut peak_live = live.len();
    while !live.is_empty() && live_mass > opts.tail && rounds < opts.horizon {
        let mut next: BTreeMap<Configuration, BigRational> = BTreeMap::new();
        for (config, mass) in &live {
            for (target, weight) in step_exact(machine, config) {
                let moved = mass * weight;
                match classify(machine, leader, &target) {
                    Class::Violation => {
                        violation += &moved;
                        live_mass -= moved;
                    }
                    Class::Absorbed(p) => {
                        *profiles.entry(p).or_insert_with(BigRational::zero) += &moved;
                        live_mass -= moved;
                    }
                    Class::Live => {
                        *next.entry(target).or_insert_with(BigRational::zero) += moved;
                    }
                }
            }
        }
        rounds += 1;
        peak_live = peak_live.max(next.len());
        live = next;
    }

    let truncated = !live.is_empty() && live_mass > opts.tail;
    let unresolved = live.into_values().fold(BigRational::zero(), |a, m| a + m);
    Ok(AbsorbReport { violation, profiles, unresolved, rounds, peak_live, truncated })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::election::{ElectProgram, ElectionParams, SubKind, SubroutineProgram};
    use crate::machine::{extract_machine, TransitionDistribution};
    use crate::prob::Prob;

    fn ratio(n: u64, d: u64) -> BigRational {
        BigRational::new(BigInt::from(n), BigInt::from(d))
    }

    /// s0 listens and splits 1/2:1/2 into sinks s1, s2.
    fn coin_machine() -> BeepMachine {
        let half = Prob::from_u64(1, 2).unwrap();
        let split =
            TransitionDistribution::new(vec![(StateId(1), half.clone()), (StateId(2), half)]);
        BeepMachine::from_parts(
            vec![false, false, false],
            StateId(0),
            vec![split.clone(), TransitionDistribution::point(StateId(1)), TransitionDistribution::point(StateId(2))],
            vec![split, TransitionDistribution::point(StateId(1)), TransitionDistribution::point(StateId(2))],
            BTreeMap::new(),
        )
        .unwrap()
    }

    #[test]
    fn two_coin_nodes_split_binomially() {
        let m = coin_machine();
        let c = Configuration::uniform(StateId(0), 2);
        let next = step_exact(&m, &c);
        assert_eq!(next.len(), 3);
        let lookup = |cfg: &Configuration| {
            next.iter().find(|(c, _)| c == cfg).map(|(_, w)| w.clone()).unwrap()
        };
        assert_eq!(lookup(&Configuration::uniform(StateId(1), 2)), ratio(1, 4));
        assert_eq!(lookup(&Configuration::uniform(StateId(2), 2)), ratio(1, 4));
        assert_eq!(
            lookup(&Configuration::from_pairs([(StateId(1), 1), (StateId(2), 1)])),
            ratio(1, 2)
        );
    }

    #[test]
    fn step_preserves_mass_along_a_live_chain() {
        let params = ElectionParams::new(SubKind::ConstantState, 3, (1, 4), 1).unwrap();
        let machine = extract_machine(&SubroutineProgram::new(params), 256).unwrap().machine;
        let mut frontier = vec![(Configuration::uniform(machine.start(), 3), BigRational::one())];
        for _ in 0..12 {
            let mut next: BTreeMap<Configuration, BigRational> = BTreeMap::new();
            for (cfg, mass) in &frontier {
                for (tgt, w) in step_exact(&machine, cfg) {
                    *next.entry(tgt).or_insert_with(BigRational::zero) += mass * w;
                }
            }
            frontier = next.into_iter().collect();
            let total: BigRational =
                frontier.iter().fold(BigRational::zero(), |a, (_, m)| a + m);
            assert!(total.is_one(), "mass leaked: {total}");
        }
    }

    /// Ordered-pair brute force for n = 2: track the chain over *ordered*
    /// state pairs (which ignores anonymity entirely), then project onto
    /// multisets. Must match the configuration chain exactly.
    #[test]
    fn matches_ordered_pair_enumeration_at_n2() {
        let params = ElectionParams::new(SubKind::FixedError, 2, (1, 2), 1).unwrap();
        let machine = extract_machine(&SubroutineProgram::new(params), 64).unwrap().machine;
        let s0 = machine.start();

        let mut ordered: BTreeMap<(StateId, StateId), BigRational> = BTreeMap::new();
        ordered.insert((s0, s0), BigRational::one());
        let mut multi: BTreeMap<Configuration, BigRational> = BTreeMap::new();
        multi.insert(Configuration::uniform(s0, 2), BigRational::one());

        for _ in 0..6 {
            let mut next_o: BTreeMap<(StateId, StateId), BigRational> = BTreeMap::new();
            for (&(a, b), mass) in &ordered {
                let chan = if machine.is_beep_state(a) || machine.is_beep_state(b) {
                    Channel::Beep
                } else {
                    Channel::Silent
                };
                for (ta, pa) in machine.delta(chan, a).entries() {
                    for (tb, pb) in machine.delta(chan, b).entries() {
                        let w = mass * pa.ratio() * pb.ratio();
                        *next_o.entry((*ta, *tb)).or_insert_with(BigRational::zero) += w;
                    }
                }
            }
            ordered = next_o;

            let mut next_m: BTreeMap<Configuration, BigRational> = BTreeMap::new();
            for (cfg, mass) in &multi {
                for (tgt, w) in step_exact(&machine, cfg) {
                    *next_m.entry(tgt).or_insert_with(BigRational::zero) += mass * w;
                }
            }
            multi = next_m;

            let mut projected: BTreeMap<Configuration, BigRational> = BTreeMap::new();
            for (&(a, b), mass) in &ordered {
                let cfg = Configuration::from_pairs([(a, 1), (b, 1)]);
                *projected.entry(cfg).or_insert_with(BigRational::zero) += mass;
            }
            assert_eq!(projected, multi);
        }
    }

    #[test]
    fn state_optimal_accept_probability_is_exact() {
        // Ñ = 3 at ε = 1/2 gives δ = 2; three nodes beep-or-not for two
        // rounds, so P(all silent throughout) = (1/2)^6.
        let params = ElectionParams::new(SubKind::StateOptimal, 2, (1, 2), 3).unwrap();
        assert_eq!(params.delta, 2);
        let machine = extract_machine(&SubroutineProgram::new(params), 256).unwrap().machine;
        let opts = AbsorbOptions { horizon: 32, ..AbsorbOptions::default() };
        let report =
            absorb_exact(&machine, &Configuration::uniform(machine.start(), 3), &opts).unwrap();
        assert!(report.total().is_one());
        assert!(report.unresolved.is_zero());
        assert!(report.violation.is_zero());
        assert_eq!(report.profiles.len(), 2, "verdicts must be unanimous");
        let all = |label: FinalLabel| {
            let mut p = Profile::new();
            p.insert(Some(label), 3);
            p
        };
        assert_eq!(report.profiles[&all(FinalLabel::Accept)], ratio(1, 64));
        assert_eq!(report.profiles[&all(FinalLabel::Reject)], ratio(63, 64));
    }

    #[test]
    fn lone_fixed_error_call_accepts_with_certainty() {
        let params = ElectionParams::new(SubKind::FixedError, 2, (1, 16), 1).unwrap();
        let machine = extract_machine(&SubroutineProgram::new(params), 128).unwrap().machine;
        let opts = AbsorbOptions { horizon: 64, ..AbsorbOptions::default() };
        let report =
            absorb_exact(&machine, &Configuration::uniform(machine.start(), 1), &opts).unwrap();
        assert!(report.unresolved.is_zero());
        let mut accept = Profile::new();
        accept.insert(Some(FinalLabel::Accept), 1);
        assert!(report.profiles[&accept].is_one());
    }

    /// The flagship check: for the full election at n = 2, q = 2, ε = 1/2
    /// (so m = 2 solo-test rounds), the exact two-leader probability is 1/4.
    ///
    /// Both nodes survive to the vote of the *initial* detector call iff no
    /// solo-test round had exactly one beeper (each such round has
    /// probability 1/2, and a cross-beep marks only the listener's solo
    /// flag). Every later call with both nodes active starts with ko = 0 and
    /// aborts at the gate, and once a node is knocked out a two-leader
    /// outcome is impossible — so the initial call is the only risk.
    #[test]
    fn election_two_node_violation_mass_is_exactly_one_quarter() {
        let params = ElectionParams::new(SubKind::FixedError, 2, (1, 2), 1).unwrap();
        assert_eq!(params.m, 2);
        let machine = extract_machine(&ElectProgram::new(params), 512).unwrap().machine;
        let opts = AbsorbOptions {
            tail: BigRational::new(BigInt::one(), BigInt::from(10u64).pow(12)),
            horizon: 4_000,
            ..AbsorbOptions::default()
        };
        let report =
            absorb_exact(&machine, &Configuration::uniform(machine.start(), 2), &opts).unwrap();
        assert!(report.total().is_one());
        assert_eq!(report.violation, ratio(1, 4));
        assert!(report.violation.clone() * BigRational::from(BigInt::from(2)) <= BigRational::one());
        // Every absorbed profile is one leader plus one unlabeled sink.
        let mut good = Profile::new();
        good.insert(Some(FinalLabel::Leader), 1);
        good.insert(None, 1);
        for profile in report.profiles.keys() {
            assert_eq!(profile, &good);
        }
        assert!(report.unresolved < opts.tail);
    }

    #[test]
    fn oversized_configuration_space_is_an_error_not_a_truncation() {
        let params = ElectionParams::new(SubKind::FixedError, 2, (1, 16), 1).unwrap();
        let machine = extract_machine(&SubroutineProgram::new(params), 128).unwrap().machine;
        let opts = AbsorbOptions { config_cap: 100, horizon: 64, ..AbsorbOptions::default() };
        let err = absorb_exact(&machine, &Configuration::uniform(machine.start(), 4), &opts)
            .unwrap_err();
        match err {
            AnalysisError::SpaceTooLarge { cap, size } => {
                assert_eq!(cap, 100);
                assert_eq!(
                    size,
                    configuration_space_size(4, machine.state_count())
                );
            }
        }
    }

    #[test]
    fn horizon_exit_with_live_mass_is_flagged_truncated() {
        let params = ElectionParams::new(SubKind::FixedError, 2, (1, 2), 1).unwrap();
        let machine = extract_machine(&ElectProgram::new(params), 512).unwrap().machine;
        let opts = AbsorbOptions { horizon: 3, ..AbsorbOptions::default() };
        let report =
            absorb_exact(&machine, &Configuration::uniform(machine.start(), 2), &opts).unwrap();
        assert!(report.truncated);
        assert!(report.total().is_one());
        assert!(!report.unresolved.is_zero());
    }

    #[test]
    fn profile_formatting_is_stable() {
        let mut p = Profile::new();
        p.insert(Some(FinalLabel::Leader), 1);
        p.insert(None, 2);
        assert_eq!(format_profile(&p), "none:2,leader:1");
    }
}
