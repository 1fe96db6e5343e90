//! Canonical execution of a `BeepMachine` as a `NodeProgram`.
//!
//! Sampling convention: a transition with common denominator `D` consumes one
//! `uniform(D)` draw and walks the cumulative entry intervals in stored
//! order. Two-entry distributions go through `weighted` (bitwise identical on
//! real streams, and it keeps extraction of machine-backed programs to
//! two-way branches).

use super::{Action, BeepMachine, Channel, FinalLabel, MachineError, NodeProgram, StateId};
use crate::rng::DrawSource;
use num_traits::ToPrimitive;

#[derive(Debug, Clone)]
enum Compiled {
    Point(StateId),
    /// Two outcomes: `a` with probability `num/den`, else `b`.
    Pair { num: u64, den: u64, a: StateId, b: StateId },
    /// General case: ascending cumulative bounds over a common denominator.
    Walk { den: u64, cum: Vec<(u64, StateId)> },
}

#[derive(Debug, Clone)]
pub struct MachineProgram {
    machine: BeepMachine,
    silent: Vec<Compiled>,
    beep: Vec<Compiled>,
    labels: Vec<Option<FinalLabel>>,
}

impl MachineProgram {
    pub fn new(machine: BeepMachine) -> Result<Self, MachineError> {
        let compile_row = |chan: Channel| -> Result<Vec<Compiled>, MachineError> {
            (0..machine.state_count() as u32)
                .map(|s| compile(&machine, chan, StateId(s)))
                .collect()
        };
        let silent = compile_row(Channel::Silent)?;
        let beep = compile_row(Channel::Beep)?;
        let labels = (0..machine.state_count() as u32)
            .map(|s| machine.label_of(StateId(s)))
            .collect();
        Ok(MachineProgram { machine, silent, beep, labels })
    }

    pub fn machine(&self) -> &BeepMachine {
        &self.machine
    }
}

fn compile(m: &BeepMachine, chan: Channel, s: StateId) -> Result<Compiled, MachineError> {
    let dist = m.delta(chan, s);
    let entries = dist.entries();
    if entries.len() == 1 {
        return Ok(Compiled::Point(entries[0].0));
    }
    let den_big = dist.common_denominator();
    let den = den_big
        .to_u64()
        .ok_or_else(|| MachineError::Sampler(format!("common denominator {den_big} exceeds u64")))?;
    let mut cum = Vec::with_capacity(entries.len());
    let mut running: u64 = 0;
    for (t, p) in entries {
        let (num, d) = p
            .to_u64_parts()
            .ok_or_else(|| MachineError::Sampler(format!("probability {p} exceeds u64")))?;
        running += num * (den / d);
        cum.push((running, *t));
    }
    debug_assert_eq!(running, den, "distribution mass must fill [0, den)");
    if entries.len() == 2 {
        return Ok(Compiled::Pair { num: cum[0].0, den, a: cum[0].1, b: cum[1].1 });
    }
    Ok(Compiled::Walk { den, cum })
}

impl NodeProgram for MachineProgram {
    type State = StateId;

    fn start(&self) -> StateId {
        self.machine.start()
    }

    fn act(&self, s: &StateId) -> Action {
        if self.machine.is_beep_state(*s) {
            Action::Beep
        } else {
            Action::Listen
        }
    }

    fn step(&self, s: &StateId, chan: Channel, rng: &mut dyn DrawSource) -> StateId {
        let compiled = match chan {
            Channel::Silent => &self.silent[s.index()],
            Channel::Beep => &self.beep[s.index()],
        };
        match compiled {
            Compiled::Point(t) => *t,
            Compiled::Pair { num, den, a, b } => {
                if rng.weighted(*num, *den) {
                    *a
                } else {
                    *b
                }
            }
            Compiled::Walk { den, cum } => {
                let u = rng.uniform(*den);
                for (bound, t) in cum {
                    if u < *bound {
                        return *t;
                    }
                }
                cum.last().expect("nonempty distribution").1
            }
        }
    }

    fn label(&self, s: &StateId) -> Option<FinalLabel> {
        self.labels[s.index()]
    }

    fn declared_labels(&self) -> Vec<FinalLabel> {
        self.machine.finals().keys().copied().collect()
    }
}
