//! Reference interpreter for counter-machine programs.
//!
//! Mirrors the distributed execution exactly, including its resource limits:
//! counters saturate at the network size `cap` (the distributed encoding is
//! one bit per node, so a counter can never exceed `n`), decrements floor at
//! zero, and the sequence of network-visible instructions is recorded so a
//! simulated run can be checked frame-by-frame against it.

use super::asm::{CmProgram, Instr, Resolved};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InterpOutcome {
    Accept,
    Reject,
    /// A pure jump cycle: the machine spins without reaching a
    /// network-visible instruction.
    Stuck,
    /// Step budget exhausted.
    OutOfBudget,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InterpResult {
    pub outcome: InterpOutcome,
    pub counters: [u64; 4],
    /// `(opcode, counter)` of every announced instruction, in order.
    pub net_ops: Vec<(u8, u8)>,
}

pub fn run_reference(
    prog: &CmProgram,
    init: [u64; 4],
    cap: u64,
    max_net_ops: u64,
) -> InterpResult {
    let mut counters = init.map(|v| v.min(cap));
    let mut net_ops = Vec::new();
    let mut pc = 0usize;
    loop {
        let at = match prog.resolve(pc) {
            Resolved::At(at) => at as usize,
            Resolved::EndReject => {
                net_ops.push((5, 0));
                return InterpResult { outcome: InterpOutcome::Reject, counters, net_ops };
            }
            Resolved::Stuck => {
                return InterpResult { outcome: InterpOutcome::Stuck, counters, net_ops };
            }
        };
        if net_ops.len() as u64 >= max_net_ops {
            return InterpResult { outcome: InterpOutcome::OutOfBudget, counters, net_ops };
        }
        let instr = prog.instrs[at];
        net_ops.push(instr.opcode().expect("resolve() never lands on a jmp"));
        pc = at + 1;
        match instr {
            Instr::Inc(c) => {
                let v = &mut counters[c as usize];
                *v = (*v + 1).min(cap);
            }
            Instr::Dec(c) => {
                let v = &mut counters[c as usize];
                *v = v.saturating_sub(1);
            }
            Instr::Zero(c) => counters[c as usize] = 0,
            Instr::Jz(c, target) => {
                if counters[c as usize] == 0 {
                    pc = target as usize;
                }
            }
            Instr::Accept => {
                return InterpResult { outcome: InterpOutcome::Accept, counters, net_ops };
            }
            Instr::Reject => {
                return InterpResult { outcome: InterpOutcome::Reject, counters, net_ops };
            }
            Instr::Jmp(_) => unreachable!("resolve() never lands on a jmp"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::counterdist::asm::parse_program;

    const PARITY: &str = "\
loop: JZ 1 even
      DEC 1
      JZ 1 odd
      DEC 1
      JMP loop
even: ACCEPT
odd:  REJECT
";

    #[test]
    fn parity_hand_trace() {
        let p = parse_program(PARITY).unwrap();
        let r = run_reference(&p, [6, 0, 0, 0], 10, 1000);
        assert_eq!(r.outcome, InterpOutcome::Accept);
        assert_eq!(r.counters[0], 0);
        // 6 → three JZ/DEC/JZ/DEC cycles, then the accepting JZ:
        // each cycle announces 4 frames, plus the final JZ and ACCEPT.
        assert_eq!(r.net_ops.len(), 3 * 4 + 2);
        let r = run_reference(&p, [7, 0, 0, 0], 10, 1000);
        assert_eq!(r.outcome, InterpOutcome::Reject);
    }

    #[test]
    fn saturation_at_cap() {
        let p = parse_program("INC 1\nINC 1\nINC 1\nACCEPT\n").unwrap();
        let r = run_reference(&p, [0, 0, 0, 0], 2, 1000);
        assert_eq!(r.counters[0], 2, "counter saturates at the cap");
        // The skipped increment is still announced.
        assert_eq!(r.net_ops.len(), 4);
    }

    #[test]
    fn initial_values_clamp_to_cap() {
        let p = parse_program("ACCEPT\n").unwrap();
        let r = run_reference(&p, [9, 1, 0, 0], 3, 10);
        assert_eq!(r.counters, [3, 1, 0, 0]);
    }

    #[test]
    fn dec_floors_at_zero() {
        let p = parse_program("DEC 1\nACCEPT\n").unwrap();
        let r = run_reference(&p, [0, 0, 0, 0], 5, 10);
        assert_eq!(r.outcome, InterpOutcome::Accept);
        assert_eq!(r.counters[0], 0);
    }

    #[test]
    fn fall_off_end_rejects_with_frame() {
        let p = parse_program("INC 1\n").unwrap();
        let r = run_reference(&p, [0; 4], 5, 10);
        assert_eq!(r.outcome, InterpOutcome::Reject);
        assert_eq!(r.net_ops, vec![(0, 0), (5, 0)]);
    }

    #[test]
    fn jump_cycle_is_stuck() {
        let p = parse_program("a: JMP a\n").unwrap();
        let r = run_reference(&p, [0; 4], 5, 10);
        assert_eq!(r.outcome, InterpOutcome::Stuck);
        assert!(r.net_ops.is_empty());
    }

    #[test]
    fn budget_exhaustion() {
        let p = parse_program("a: INC 1\nJMP a\n").unwrap();
        let r = run_reference(&p, [0; 4], 5, 7);
        assert_eq!(r.outcome, InterpOutcome::OutOfBudget);
        assert_eq!(r.net_ops.len(), 7);
    }
}
