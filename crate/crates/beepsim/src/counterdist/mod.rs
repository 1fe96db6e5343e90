//! Distributed counter machines over the beeping channel.
//!
//! Executes a [`CmProgram`] on an anonymous network. Counter values are
//! represented in unary across the network — counter `c` equals the number of
//! nodes whose bit `c` is set — so values are bounded by `n` and increments
//! saturate there. Control is centralized: a boot-time leader election picks
//! a *coordinator*, which then walks the program and announces each
//! network-visible instruction in a fixed 7-round frame:
//!
//! ```text
//! round 0      framing beep (coordinator)
//! rounds 1..3  opcode, MSB first        INC=0 DEC=1 ZERO=2 CMPZ=3 ACCEPT=4 REJECT=5
//! rounds 4..5  counter index, MSB first
//! round 6      parity: XOR of the five payload bits
//! ```
//!
//! After a frame the network executes the instruction together:
//!
//! - `INC c` / `DEC c` — one *pre-round* in which eligible nodes (bit clear
//!   for `INC`, bit set for `DEC`) beep. Silence means the operation is a
//!   saturated no-op and is skipped. Otherwise an election runs among the
//!   eligible nodes (everyone else observes, which still matters: observers
//!   join the all-node rounds of the detectors) and the winner flips its bit.
//! - `ZERO c` — one silent round in which every node clears bit `c`.
//! - `JZ c t` (wire opcode `CMPZ`) — one compare round in which nodes with
//!   bit `c` set beep; the branch decision is coordinator-private.
//! - `ACCEPT` / `REJECT` — every node enters the corresponding terminal.
//!
//! `JMP` is resolved inside the coordinator between frames and costs no
//! rounds. A pure jump cycle parks the coordinator in an unlabeled `Stuck`
//! state; the network then idles until the round cutoff, which is reported
//! as a liveness failure rather than masked.
//!
//! Per-operation elections can fail (two winners) with the election error
//! probability, drifting a counter by one. [`run_counter_simulation`] runs
//! the reference interpreter alongside and reports whether the announced
//! frame sequence, final counter values and verdict all match it.

mod asm;
mod interp;

pub use asm::{parse_program, AsmError, CmProgram, Instr, Resolved, MAX_COUNTERS};
pub use interp::{run_reference, InterpOutcome, InterpResult};

use crate::election::{CoreState, ElectCore, ElectionParams};
use crate::engine::{run_execution_observed, NetworkSpec};
use crate::machine::{Action, Channel, FinalLabel, NodeEvent, NodeProgram};
use crate::rng::DrawSource;
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Role {
    Follower,
    Coord { pc: u16 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BitOp {
    Inc,
    Dec,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CPhase {
    /// Setup round; boot-election coins are drawn on the way out.
    Start,
    /// Coordinator election among all nodes.
    Boot(CoreState),
    /// Frame round `idx` (0..=6); `acc` holds the payload bits heard so far.
    Frame { idx: u8, acc: u8 },
    /// Skip-detection round for `INC`/`DEC`.
    Pre { op: BitOp, c: u8 },
    /// Election among eligible nodes; the winner applies the bit flip.
    Elect { op: BitOp, c: u8, core: CoreState },
    /// The one-round `ZERO` barrier.
    ZeroRound { c: u8 },
    /// The `CMPZ` compare round: bit holders beep.
    Compare { c: u8 },
    Accepted,
    Rejected,
    /// Dead end (jump cycle or corrupted frame); never labeled.
    Stuck,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct CounterState {
    /// Bit `c` contributes 1 to counter `c`.
    pub bits: u8,
    pub role: Role,
    pub phase: CPhase,
}

/// Payload bit `idx` (1..=6) of a frame announcing `(op, c)`.
fn payload_bit(op: u8, c: u8, idx: u8) -> bool {
    match idx {
        1 => op & 0b100 != 0,
        2 => op & 0b010 != 0,
        3 => op & 0b001 != 0,
        4 => c & 0b10 != 0,
        5 => c & 0b01 != 0,
        6 => ((op >> 2) ^ (op >> 1) ^ op ^ (c >> 1) ^ c) & 1 != 0,
        _ => unreachable!("payload indices are 1..=6"),
    }
}

fn eligible(bits: u8, op: BitOp, c: u8) -> bool {
    let set = bits & (1 << c) != 0;
    match op {
        BitOp::Inc => !set,
        BitOp::Dec => set,
    }
}

#[derive(Debug, Clone)]
pub struct CounterProgram {
    program: CmProgram,
    core: ElectCore,
}

impl CounterProgram {
    pub fn new(program: CmProgram, params: ElectionParams) -> Self {
        CounterProgram { program, core: ElectCore::new(params) }
    }

    pub fn cm(&self) -> &CmProgram {
        &self.program
    }

    /// Start state for a node whose initial bits are given (bit `c` set iff
    /// the node contributes 1 to counter `c`).
    pub fn start_with_bits(&self, bits: u8) -> CounterState {
        CounterState { bits, role: Role::Follower, phase: CPhase::Start }
    }

    /// Instruction announced at `pc`; one past the end is the implicit
    /// reject.
    fn wire_instr(&self, pc: u16) -> Instr {
        self.program.instrs.get(pc as usize).copied().unwrap_or(Instr::Reject)
    }

    /// Coordinator lands on the next announceable instruction (or sticks).
    fn seek(&self, pc: usize) -> (Role, Option<CPhase>) {
        match self.program.resolve(pc) {
            Resolved::At(p) => (Role::Coord { pc: p }, None),
            Resolved::EndReject => {
                (Role::Coord { pc: self.program.instrs.len() as u16 }, None)
            }
            Resolved::Stuck => (Role::Coord { pc: pc as u16 }, Some(CPhase::Stuck)),
        }
    }

    /// Post-instruction transition: the coordinator advances its pc (already
    /// jumped for branches) and everyone returns to the frame listener.
    fn advance(&self, s: &CounterState, next_pc: Option<usize>, bits: u8) -> CounterState {
        let fresh = CPhase::Frame { idx: 0, acc: 0 };
        match (s.role, next_pc) {
            (Role::Coord { .. }, Some(pc)) => {
                let (role, stuck) = self.seek(pc);
                CounterState { bits, role, phase: stuck.unwrap_or(fresh) }
            }
            _ => CounterState { bits, role: s.role, phase: fresh },
        }
    }

    fn dispatch(&self, s: &CounterState, op: u8, c: u8) -> CounterState {
        let phase = match op {
            0 => CPhase::Pre { op: BitOp::Inc, c },
            1 => CPhase::Pre { op: BitOp::Dec, c },
            2 => CPhase::ZeroRound { c },
            3 => CPhase::Compare { c },
            4 => CPhase::Accepted,
            5 => CPhase::Rejected,
            _ => CPhase::Stuck,
        };
        CounterState { phase, ..*s }
    }
}

impl NodeProgram for CounterProgram {
    type State = CounterState;

    fn start(&self) -> CounterState {
        self.start_with_bits(0)
    }

    fn act(&self, s: &CounterState) -> Action {
        match s.phase {
            CPhase::Start | CPhase::ZeroRound { .. } => Action::Listen,
            CPhase::Boot(cs) | CPhase::Elect { core: cs, .. } => self.core.act(&cs),
            CPhase::Frame { idx, .. } => match s.role {
                Role::Coord { pc } => {
                    if idx == 0 {
                        Action::Beep
                    } else {
                        let (op, c) = self.wire_instr(pc).opcode().unwrap_or((5, 0));
                        if payload_bit(op, c, idx) {
                            Action::Beep
                        } else {
                            Action::Listen
                        }
                    }
                }
                Role::Follower => Action::Listen,
            },
            CPhase::Pre { op, c } => {
                if eligible(s.bits, op, c) {
                    Action::Beep
                } else {
                    Action::Listen
                }
            }
            CPhase::Compare { c } => {
                if s.bits & (1 << c) != 0 {
                    Action::Beep
                } else {
                    Action::Listen
                }
            }
            CPhase::Accepted | CPhase::Rejected | CPhase::Stuck => Action::Listen,
        }
    }

    fn step(&self, s: &CounterState, chan: Channel, rng: &mut dyn DrawSource) -> CounterState {
        let heard = chan == Channel::Beep;
        match s.phase {
            CPhase::Start => CounterState {
                phase: CPhase::Boot(self.core.enter(true, rng)),
                ..*s
            },
            CPhase::Boot(cs) => {
                let next = self.core.step(&cs, chan, rng);
                if let CoreState::Done { leader } = next {
                    if leader {
                        let (role, stuck) = self.seek(0);
                        CounterState {
                            bits: s.bits,
                            role,
                            phase: stuck.unwrap_or(CPhase::Frame { idx: 0, acc: 0 }),
                        }
                    } else {
                        CounterState {
                            bits: s.bits,
                            role: Role::Follower,
                            phase: CPhase::Frame { idx: 0, acc: 0 },
                        }
                    }
                } else {
                    CounterState { phase: CPhase::Boot(next), ..*s }
                }
            }
            CPhase::Frame { idx: 0, .. } if !heard => {
                // No frame is coming (coordinator stuck); keep waiting.
                *s
            }
            CPhase::Frame { idx, acc } if idx < 6 => CounterState {
                phase: CPhase::Frame {
                    idx: idx + 1,
                    acc: if idx == 0 { 0 } else { (acc << 1) | heard as u8 },
                },
                ..*s
            },
            CPhase::Frame { acc, .. } => {
                // Final frame round: dispatch.
                match s.role {
                    Role::Coord { pc } => {
                        let (op, c) = self.wire_instr(pc).opcode().unwrap_or((5, 0));
                        self.dispatch(s, op, c)
                    }
                    Role::Follower => {
                        let word = (acc << 1) | heard as u8;
                        let op = (word >> 3) & 0b111;
                        let c = (word >> 1) & 0b11;
                        let parity = word & 1;
                        let expect = ((op >> 2) ^ (op >> 1) ^ op ^ (c >> 1) ^ c) & 1;
                        if parity != expect {
                            CounterState { phase: CPhase::Stuck, ..*s }
                        } else {
                            self.dispatch(s, op, c)
                        }
                    }
                }
            }
            CPhase::Pre { op, c } => {
                if heard {
                    CounterState {
                        phase: CPhase::Elect {
                            op,
                            c,
                            core: self.core.enter(eligible(s.bits, op, c), rng),
                        },
                        ..*s
                    }
                } else {
                    // Saturated no-op: skip the election entirely.
                    let pc = coord_pc(s).map(|pc| pc as usize + 1);
                    self.advance(s, pc, s.bits)
                }
            }
            CPhase::Elect { op, c, core } => {
                let next = self.core.step(&core, chan, rng);
                if let CoreState::Done { leader } = next {
                    let bits = if leader {
                        match op {
                            BitOp::Inc => s.bits | (1 << c),
                            BitOp::Dec => s.bits & !(1 << c),
                        }
                    } else {
                        s.bits
                    };
                    let pc = coord_pc(s).map(|pc| pc as usize + 1);
                    self.advance(s, pc, bits)
                } else {
                    CounterState { phase: CPhase::Elect { op, c, core: next }, ..*s }
                }
            }
            CPhase::ZeroRound { c } => {
                let pc = coord_pc(s).map(|pc| pc as usize + 1);
                self.advance(s, pc, s.bits & !(1 << c))
            }
            CPhase::Compare { .. } => {
                let pc = coord_pc(s).map(|pc| {
                    match self.wire_instr(pc) {
                        Instr::Jz(_, target) if !heard => target as usize,
                        _ => pc as usize + 1,
                    }
                });
                self.advance(s, pc, s.bits)
            }
            CPhase::Accepted | CPhase::Rejected | CPhase::Stuck => *s,
        }
    }

    fn label(&self, s: &CounterState) -> Option<FinalLabel> {
        match s.phase {
            CPhase::Accepted => Some(FinalLabel::Accept),
            CPhase::Rejected => Some(FinalLabel::Reject),
            _ => None,
        }
    }

    fn declared_labels(&self) -> Vec<FinalLabel> {
        vec![FinalLabel::Accept, FinalLabel::Reject]
    }

    fn events(
        &self,
        before: &CounterState,
        _chan: Channel,
        after: &CounterState,
        out: &mut Vec<NodeEvent>,
    ) {
        if matches!(before.phase, CPhase::Boot(_)) && !matches!(after.phase, CPhase::Boot(_)) {
            out.push(NodeEvent::Elected {
                winner: matches!(after.role, Role::Coord { .. }),
            });
        }
        if let (CPhase::Frame { idx: 6, .. }, Role::Coord { pc }) = (before.phase, before.role) {
            let (opcode, counter) = self.wire_instr(pc).opcode().unwrap_or((5, 0));
            out.push(NodeEvent::FrameSent { opcode, counter });
        }
        if before.bits != after.bits {
            for c in 0..MAX_COUNTERS as u8 {
                let (b, a) = (before.bits & (1 << c) != 0, after.bits & (1 << c) != 0);
                if b != a {
                    out.push(NodeEvent::BitSet { counter: c, value: a });
                }
            }
        }
        if let Some(label) = self.label(after) {
            if self.label(before).is_none() {
                out.push(NodeEvent::Entered { label });
            }
        }
    }
}

fn coord_pc(s: &CounterState) -> Option<u16> {
    match s.role {
        Role::Coord { pc } => Some(pc),
        Role::Follower => None,
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum CounterSetupError {
    #[error("counter {counter} starts at {value} but only {n} nodes exist")]
    InitTooLarge { counter: u8, value: u64, n: usize },
    #[error("a network needs at least one node")]
    NoNodes,
}

/// Outcome of one simulated counter-machine run, checked against the
/// reference interpreter.
#[derive(Debug, Clone)]
pub struct CounterRun {
    pub terminated: bool,
    pub rounds: u64,
    /// Unanimous verdict, when the run terminated with one.
    pub verdict: Option<FinalLabel>,
    /// `(opcode, counter)` frames announced by coordinators, in round order.
    pub frames: Vec<(u8, u8)>,
    /// Final counter values recovered from node bits.
    pub counters: [u64; 4],
    pub reference: InterpResult,
    /// True iff the run terminated, frames, counters and verdict all match
    /// the reference execution.
    pub matches_reference: bool,
    pub agreement_violations: u32,
}

pub fn run_counter_simulation(
    program: &CmProgram,
    n: usize,
    init: [u64; 4],
    params: ElectionParams,
    seed: u64,
    cutoff: u64,
) -> Result<CounterRun, CounterSetupError> {
    if n == 0 {
        return Err(CounterSetupError::NoNodes);
    }
    for (c, &v) in init.iter().enumerate() {
        if v > n as u64 {
            return Err(CounterSetupError::InitTooLarge { counter: c as u8, value: v, n });
        }
    }
    let prog = CounterProgram::new(program.clone(), params);
    let starts: Vec<CounterState> = (0..n)
        .map(|i| {
            let mut bits = 0u8;
            for (c, &v) in init.iter().enumerate() {
                if (i as u64) < v {
                    bits |= 1 << c;
                }
            }
            prog.start_with_bits(bits)
        })
        .collect();
    let spec = NetworkSpec::with_starts(prog, starts);

    let mut final_bits: Vec<u8> = Vec::new();
    let trace = run_execution_observed(&spec, seed, cutoff, |_, _, _, states| {
        final_bits.clear();
        final_bits.extend(states.iter().map(|s| s.bits));
    });

    let mut counters = [0u64; 4];
    for &bits in &final_bits {
        for (c, v) in counters.iter_mut().enumerate() {
            *v += ((bits >> c) & 1) as u64;
        }
    }
    let frames: Vec<(u8, u8)> = trace
        .events
        .iter()
        .filter_map(|e| match e.event {
            NodeEvent::FrameSent { opcode, counter } => Some((opcode, counter)),
            _ => None,
        })
        .collect();
    let verdict = match (
        trace.label_count(FinalLabel::Accept),
        trace.label_count(FinalLabel::Reject),
    ) {
        (a, 0) if a == n => Some(FinalLabel::Accept),
        (0, r) if r == n => Some(FinalLabel::Reject),
        _ => None,
    };

    // Budget the reference generously: the simulation announced
    // `frames.len()` ops, so anything beyond that plus slack means the
    // reference diverged long ago.
    let reference = run_reference(program, init, n as u64, frames.len() as u64 + 16);
    let ref_verdict = match reference.outcome {
        InterpOutcome::Accept => Some(FinalLabel::Accept),
        InterpOutcome::Reject => Some(FinalLabel::Reject),
        _ => None,
    };
    let matches_reference = trace.terminated
        && verdict == ref_verdict
        && frames == reference.net_ops
        && counters == reference.counters;

    Ok(CounterRun {
        terminated: trace.terminated,
        rounds: trace.rounds_elapsed,
        verdict,
        frames,
        counters,
        reference,
        matches_reference,
        agreement_violations: trace.agreement_violations,
    })
}
