//! Solo-execution reachability: the path a lone node can take.
//!
//! With one node the channel is an echo: the node hears a beep exactly when
//! it beeps. A solo-reachable path therefore follows `delta_beep` out of beep
//! states and `delta_silent` out of receive states, along nonzero-probability
//! edges only.

use super::{BeepMachine, Channel, FinalLabel, MachineError, StateId};
use std::collections::VecDeque;

/// Shortest solo-reachable path from the start state to `target`, inclusive
/// (BFS, so the path is loop-free and its length is at most the state count).
pub fn find_solo_reachable_path(
    m: &BeepMachine,
    target: StateId,
) -> Result<Option<Vec<StateId>>, MachineError> {
    if target.index() >= m.state_count() {
        return Err(MachineError::UnknownState(target.0));
    }
    let mut parent: Vec<Option<StateId>> = vec![None; m.state_count()];
    let mut seen = vec![false; m.state_count()];
    let mut queue = VecDeque::new();
    seen[m.start().index()] = true;
    queue.push_back(m.start());
    while let Some(s) = queue.pop_front() {
        if s == target {
            let mut path = vec![s];
            let mut cur = s;
            while let Some(prev) = parent[cur.index()] {
                path.push(prev);
                cur = prev;
            }
            path.reverse();
            return Ok(Some(path));
        }
        let chan = if m.is_beep_state(s) { Channel::Beep } else { Channel::Silent };
        for (t, _) in m.delta(chan, s).entries() {
            if !seen[t.index()] {
                seen[t.index()] = true;
                parent[t.index()] = Some(s);
                queue.push_back(*t);
            }
        }
    }
    Ok(None)
}

/// Path to the machine's final state carrying `label`.
pub fn solo_path_to_label(
    m: &BeepMachine,
    label: FinalLabel,
) -> Result<Option<Vec<StateId>>, MachineError> {
    let target = *m.finals().get(&label).ok_or(MachineError::UnknownLabel(label))?;
    find_solo_reachable_path(m, target)
}
