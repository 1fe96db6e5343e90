//! Execution traces and their export formats: JSON-lines (one record per
//! round, events interleaved, type discriminators) and a CSV round summary.

use crate::machine::{Action, Channel, FinalLabel, NodeEvent};
use serde_json::json;
use std::io::{self, Write};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RoundRecord {
    pub round: u64,
    pub channel: Channel,
    pub n_beeping: u32,
    pub actions: Vec<Action>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TraceEvent {
    pub round: u64,
    pub node: u32,
    pub event: NodeEvent,
}

/// A recorded execution. Event timestamps are nondecreasing and bounded by
/// `rounds_elapsed`; `terminated` means every node reached a terminal state
/// before the cutoff.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Trace {
    pub seed: u64,
    pub n: usize,
    pub cutoff: u64,
    pub terminated: bool,
    pub rounds_elapsed: u64,
    pub rounds: Vec<RoundRecord>,
    pub events: Vec<TraceEvent>,
    pub final_labels: Vec<Option<FinalLabel>>,
    pub declared_labels: Vec<FinalLabel>,
    pub agreement_violations: u32,
}

impl Trace {
    pub fn channel_bits(&self) -> Vec<Channel> {
        self.rounds.iter().map(|r| r.channel).collect()
    }

    pub fn label_count(&self, label: FinalLabel) -> usize {
        self.final_labels.iter().filter(|l| **l == Some(label)).count()
    }
}

fn actions_string(actions: &[Action]) -> String {
    actions
        .iter()
        .map(|a| match a {
            Action::Beep => 'B',
            Action::Listen => 'L',
        })
        .collect()
}

/// Write the JSON-lines export. When `action_window` is set, per-node action
/// vectors are elided after that many rounds (channel bits and counts stay).
pub fn write_trace_jsonl<W: Write>(
    t: &Trace,
    w: &mut W,
    action_window: Option<u64>,
) -> io::Result<()> {
    let meta = json!({
        "type": "meta",
        "seed": t.seed,
        "n": t.n,
        "cutoff": t.cutoff,
        "declared_labels": t.declared_labels,
    });
    writeln!(w, "{meta}")?;
    let mut ev = t.events.iter().peekable();
    for r in &t.rounds {
        let mut line = json!({
            "type": "round",
            "r": r.round,
            "chan": r.channel.to_string(),
            "n_beeping": r.n_beeping,
        });
        if action_window.map_or(true, |win| r.round <= win) {
            line["actions"] = json!(actions_string(&r.actions));
        }
        writeln!(w, "{line}")?;
        while let Some(e) = ev.peek() {
            if e.round != r.round {
                break;
            }
            let e = ev.next().unwrap();
            let line = json!({
                "type": "event",
                "r": e.round,
                "node": e.node,
                "event": e.event,
            });
            writeln!(w, "{line}")?;
        }
    }
    let end = json!({
        "type": "end",
        "terminated": t.terminated,
        "rounds": t.rounds_elapsed,
        "labels": t.final_labels,
        "agreement_violations": t.agreement_violations,
    });
    writeln!(w, "{end}")
}

/// CSV round summary: `round,channel,n_beeping` with channel as 0/1.
pub fn trace_to_csv_summary(t: &Trace) -> String {
    let mut out = String::from("round,channel,n_beeping\n");
    for r in &t.rounds {
        let bit = match r.channel {
            Channel::Silent => 0,
            Channel::Beep => 1,
        };
        out.push_str(&format!("{},{},{}\n", r.round, bit, r.n_beeping));
    }
    out
}
