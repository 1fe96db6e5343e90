//! Synchronous single-hop execution engine.
//!
//! All nodes share one clock. Each round every node performs its state's
//! action; the channel carries a beep iff at least one node beeps; every node
//! then applies its transition to the observed channel bit. Per-node
//! randomness comes from `(seed, node, round)`-keyed streams, so executions
//! are deterministic and platform-independent.

mod trace;

pub use trace::{trace_to_csv_summary, write_trace_jsonl, RoundRecord, Trace, TraceEvent};

use crate::machine::{Action, Channel, FinalLabel, NodeEvent, NodeProgram};
use crate::rng::Stream;
use std::collections::BTreeMap;

/// A network to execute: one program, one start state per node. Heterogeneous
/// initial values (e.g. counter input bits) are per-node start-state
/// overrides of the same program.
#[derive(Debug, Clone)]
pub struct NetworkSpec<P: NodeProgram> {
    program: P,
    starts: Vec<P::State>,
}

impl<P: NodeProgram> NetworkSpec<P> {
    pub fn uniform(program: P, n: usize) -> Self {
        assert!(n >= 1, "a network needs at least one node");
        let starts = vec![program.start(); n];
        NetworkSpec { program, starts }
    }

    pub fn with_starts(program: P, starts: Vec<P::State>) -> Self {
        assert!(!starts.is_empty(), "a network needs at least one node");
        NetworkSpec { program, starts }
    }

    pub fn n(&self) -> usize {
        self.starts.len()
    }

    pub fn program(&self) -> &P {
        &self.program
    }
}

/// Channel semantics: a beep is heard iff at least one node beeps.
pub fn resolve_channel(actions: &[Action]) -> Channel {
    if actions.iter().any(|a| *a == Action::Beep) {
        Channel::Beep
    } else {
        Channel::Silent
    }
}

/// Lightweight result for Monte Carlo trials: no per-round storage.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Summary {
    pub terminated: bool,
    pub rounds: u64,
    pub label_counts: BTreeMap<FinalLabel, u32>,
    /// Subroutine invocations whose per-node return bits disagreed (or where
    /// only part of the network returned). Zero in every correct protocol.
    pub agreement_violations: u32,
}

impl Summary {
    pub fn count(&self, label: FinalLabel) -> usize {
        self.label_counts.get(&label).copied().unwrap_or(0) as usize
    }
}

enum Recording {
    Off,
    Full,
}

/// Full-fidelity execution: per-round actions and channel bits, protocol
/// events, final labels. Byte-identical for identical inputs.
pub fn run_execution<P: NodeProgram>(spec: &NetworkSpec<P>, seed: u64, cutoff: u64) -> Trace {
    run_core(spec, seed, cutoff, Recording::Full, &mut |_, _, _, _| {}).0
}

/// Execution with a per-round observer: called after each round's transitions
/// with (round, channel, actions, post-transition states).
pub fn run_execution_observed<P, F>(spec: &NetworkSpec<P>, seed: u64, cutoff: u64, hook: F) -> Trace
where
    P: NodeProgram,
    F: FnMut(u64, Channel, &[Action], &[P::State]),
{
    let mut hook = hook;
    run_core(spec, seed, cutoff, Recording::Full, &mut hook).0
}

/// Monte Carlo execution: folds agreement checking and final labels without
/// accumulating per-round data.
pub fn run_summary<P: NodeProgram>(spec: &NetworkSpec<P>, seed: u64, cutoff: u64) -> Summary {
    run_core(spec, seed, cutoff, Recording::Off, &mut |_, _, _, _| {}).1
}

fn run_core<P: NodeProgram>(
    spec: &NetworkSpec<P>,
    seed: u64,
    cutoff: u64,
    recording: Recording,
    observer: &mut dyn FnMut(u64, Channel, &[Action], &[P::State]),
) -> (Trace, Summary) {
    let program = &spec.program;
    let n = spec.n();
    let mut states: Vec<P::State> = spec.starts.clone();
    let mut terminal: Vec<bool> = states.iter().map(|s| program.is_terminal(s)).collect();
    let mut alive = terminal.iter().filter(|t| !**t).count();

    let mut rounds: Vec<RoundRecord> = Vec::new();
    let mut events: Vec<TraceEvent> = Vec::new();
    let record = matches!(recording, Recording::Full);

    let mut actions: Vec<Action> = vec![Action::Listen; n];
    let mut scratch: Vec<NodeEvent> = Vec::new();
    let mut agreement_violations: u32 = 0;
    let mut rounds_elapsed: u64 = 0;

    while alive > 0 && rounds_elapsed < cutoff {
        let r = rounds_elapsed + 1;
        for (i, s) in states.iter().enumerate() {
            actions[i] = program.act(s);
        }
        let chan = resolve_channel(&actions);

        // Per-round agreement fold over SubEnd events.
        let alive_before = alive;
        let mut sub_ends: usize = 0;
        let mut sub_first: Option<bool> = None;
        let mut sub_mismatch = false;

        for i in 0..n {
            if terminal[i] {
                continue;
            }
            let mut rng = Stream::for_node_round(seed, i as u64, r);
            let next = program.step(&states[i], chan, &mut rng);
            scratch.clear();
            program.events(&states[i], chan, &next, &mut scratch);
            for ev in &scratch {
                if let NodeEvent::SubEnd { result } = ev {
                    sub_ends += 1;
                    match sub_first {
                        None => sub_first = Some(*result),
                        Some(first) => sub_mismatch |= first != *result,
                    }
                }
                if record {
                    events.push(TraceEvent { round: r, node: i as u32, event: *ev });
                }
            }
            states[i] = next;
            if program.is_terminal(&states[i]) {
                terminal[i] = true;
                alive -= 1;
            }
        }
        if sub_ends > 0 && (sub_mismatch || sub_ends != alive_before) {
            agreement_violations += 1;
        }
        if record {
            rounds.push(RoundRecord {
                round: r,
                channel: chan,
                n_beeping: actions.iter().filter(|a| **a == Action::Beep).count() as u32,
                actions: actions.clone(),
            });
        }
        observer(r, chan, &actions, &states);
        rounds_elapsed = r;
    }

    let terminated = alive == 0;
    let final_labels: Vec<Option<FinalLabel>> = states.iter().map(|s| program.label(s)).collect();
    let mut label_counts = BTreeMap::new();
    for l in final_labels.iter().flatten() {
        *label_counts.entry(*l).or_insert(0u32) += 1;
    }
    let summary = Summary { terminated, rounds: rounds_elapsed, label_counts, agreement_violations };
    let trace = Trace {
        seed,
        n,
        cutoff,
        terminated,
        rounds_elapsed,
        rounds,
        events,
        final_labels,
        declared_labels: program.declared_labels(),
        agreement_violations,
    };
    (trace, summary)
}
