//! Machine import/export: a JSON schema with probabilities as exact `num/den`
//! strings. Round-trips are lossless, including distribution entry order.

use super::{BeepMachine, FinalLabel, MachineError, StateId, TransitionDistribution};
use crate::prob::Prob;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum MachineImportError {
    #[error("json: {0}")]
    Syntax(#[from] serde_json::Error),
    #[error("state {state} ({chan} channel) -> {target}: bad probability `{text}`")]
    BadProb { state: u32, chan: &'static str, target: u32, text: String },
    #[error("states {0:?} must appear in exactly one of receive_states/beep_states")]
    NotPartition(Vec<u32>),
    #[error("unknown final label `{0}`")]
    UnknownLabel(String),
    #[error(transparent)]
    Machine(#[from] MachineError),
}

/// Serialized form. `delta_*` are dense arrays indexed by state id; each row
/// is an ordered list of `[target, "num/den"]` pairs.
#[derive(Serialize, Deserialize)]
struct MachineJson {
    receive_states: Vec<u32>,
    beep_states: Vec<u32>,
    start: u32,
    delta_silent: Vec<Vec<(u32, String)>>,
    delta_beep: Vec<Vec<(u32, String)>>,
    finals: BTreeMap<String, u32>,
}

pub fn machine_to_json(m: &BeepMachine) -> String {
    let row = |d: &TransitionDistribution| -> Vec<(u32, String)> {
        d.entries().iter().map(|(t, p)| (t.0, p.to_string())).collect()
    };
    let doc = MachineJson {
        receive_states: m.receive_states().map(|s| s.0).collect(),
        beep_states: m.beep_states().map(|s| s.0).collect(),
        start: m.start().0,
        delta_silent: (0..m.state_count() as u32)
            .map(|s| row(m.delta(super::Channel::Silent, StateId(s))))
            .collect(),
        delta_beep: (0..m.state_count() as u32)
            .map(|s| row(m.delta(super::Channel::Beep, StateId(s))))
            .collect(),
        finals: m.finals().iter().map(|(l, s)| (l.as_str().to_string(), s.0)).collect(),
    };
    serde_json::to_string_pretty(&doc).expect("machine serialization cannot fail")
}

pub fn machine_from_json(text: &str) -> Result<BeepMachine, MachineImportError> {
    let doc: MachineJson = serde_json::from_str(text)?;
    let count = doc.receive_states.len() + doc.beep_states.len();
    let mut seen = vec![0u8; count];
    let mut is_beep = vec![false; count];
    let mut odd = Vec::new();
    for &s in &doc.receive_states {
        if (s as usize) < count {
            seen[s as usize] += 1;
        } else {
            odd.push(s);
        }
    }
    for &s in &doc.beep_states {
        if (s as usize) < count {
            seen[s as usize] += 1;
            is_beep[s as usize] = true;
        } else {
            odd.push(s);
        }
    }
    odd.extend((0..count as u32).filter(|&s| seen[s as usize] != 1));
    if !odd.is_empty() {
        odd.sort_unstable();
        odd.dedup();
        return Err(MachineImportError::NotPartition(odd));
    }
    let parse_table = |rows: &[Vec<(u32, String)>],
                       chan: &'static str|
     -> Result<Vec<TransitionDistribution>, MachineImportError> {
        rows.iter()
            .enumerate()
            .map(|(i, row)| {
                let entries = row
                    .iter()
                    .map(|(t, text)| {
                        let p: Prob = text.parse().map_err(|_| MachineImportError::BadProb {
                            state: i as u32,
                            chan,
                            target: *t,
                            text: text.clone(),
                        })?;
                        Ok((StateId(*t), p))
                    })
                    .collect::<Result<Vec<_>, MachineImportError>>()?;
                Ok(TransitionDistribution::new(entries))
            })
            .collect()
    };
    let delta_silent = parse_table(&doc.delta_silent, "silent")?;
    let delta_beep = parse_table(&doc.delta_beep, "beep")?;
    let mut finals = BTreeMap::new();
    for (name, s) in &doc.finals {
        let label = FinalLabel::parse(name)
            .ok_or_else(|| MachineImportError::UnknownLabel(name.clone()))?;
        finals.insert(label, StateId(*s));
    }
    Ok(BeepMachine::from_parts(is_beep, StateId(doc.start), delta_silent, delta_beep, finals)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::machine::{extract_machine, Channel};

    #[test]
    fn round_trip_is_lossless() {
        let ex = extract_machine(&crate::machine::tests_support::coin_flip_program(), 100).unwrap();
        let text = machine_to_json(&ex.machine);
        let back = machine_from_json(&text).unwrap();
        assert_eq!(back, ex.machine);
        assert_eq!(machine_to_json(&back), text);
    }

    #[test]
    fn malformed_sum_is_distinct_error() {
        let ex = extract_machine(&crate::machine::tests_support::coin_flip_program(), 100).unwrap();
        let mut text = machine_to_json(&ex.machine);
        text = text.replace("\"1/2\"", "\"1/3\"");
        match machine_from_json(&text).unwrap_err() {
            MachineImportError::Machine(MachineError::Malformed(_)) => {}
            other => panic!("expected malformed, got {other:?}"),
        }
    }

    #[test]
    fn partition_violations_rejected() {
        let ex = extract_machine(&crate::machine::tests_support::coin_flip_program(), 100).unwrap();
        let text = machine_to_json(&ex.machine);
        // Claim state 0 is both a receive and a beep state.
        let doc: serde_json::Value = serde_json::from_str(&text).unwrap();
        let mut doc = doc;
        doc["beep_states"].as_array_mut().unwrap().push(serde_json::json!(0));
        doc["receive_states"] = serde_json::json!([0]);
        let bad = serde_json::to_string(&doc).unwrap();
        assert!(matches!(
            machine_from_json(&bad),
            Err(MachineImportError::NotPartition(_))
        ));
    }

    #[test]
    fn channel_tables_survive() {
        let ex = extract_machine(&crate::machine::tests_support::coin_flip_program(), 100).unwrap();
        let back = machine_from_json(&machine_to_json(&ex.machine)).unwrap();
        for s in 0..back.state_count() as u32 {
            for chan in [Channel::Silent, Channel::Beep] {
                assert_eq!(back.delta(chan, StateId(s)), ex.machine.delta(chan, StateId(s)));
            }
        }
    }
}
