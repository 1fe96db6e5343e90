//! Assembler for counter-machine programs.
//!
//! The language is a classic Minsky-style counter machine over up to four
//! counters, restricted to the operations the beeping network can carry out:
//!
//! ```text
//! # comments run to end of line
//! loop: JZ 1 even     # jump to `even` if counter 1 is zero
//!       DEC 1         # decrement counter 1 (no-op at zero)
//!       JZ 1 odd
//!       DEC 1
//!       JMP loop
//! even: ACCEPT
//! odd:  REJECT
//! ```
//!
//! Counter operands are 1-based in source (`1..=4`) and stored 0-based.
//! Labels may prefix an instruction or stand on their own line, binding to
//! the next instruction. Execution that runs past the final instruction
//! rejects implicitly.

use std::collections::HashMap;
use std::fmt;
use thiserror::Error;

pub const MAX_COUNTERS: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Instr {
    /// Increment counter (saturates at the network size).
    Inc(u8),
    /// Decrement counter (floors at zero).
    Dec(u8),
    /// Reset counter to zero.
    Zero(u8),
    /// Jump to the target if the counter is zero.
    Jz(u8, u16),
    /// Unconditional jump (costs no rounds on the network).
    Jmp(u16),
    Accept,
    Reject,
}

impl Instr {
    /// Wire opcode for instructions that are announced on the network.
    /// `Jmp` is coordinator-internal and has none.
    pub fn opcode(&self) -> Option<(u8, u8)> {
        match *self {
            Instr::Inc(c) => Some((0, c)),
            Instr::Dec(c) => Some((1, c)),
            Instr::Zero(c) => Some((2, c)),
            Instr::Jz(c, _) => Some((3, c)),
            Instr::Accept => Some((4, 0)),
            Instr::Reject => Some((5, 0)),
            Instr::Jmp(_) => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CmProgram {
    pub instrs: Vec<Instr>,
    /// Highest counter index used, as a count (0 if no instruction touches a
    /// counter).
    pub n_counters: u8,
}

/// Where a program counter lands after skipping coordinator-internal jumps.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Resolved {
    /// Next network-visible instruction.
    At(u16),
    /// Fell off the end of the program: implicit reject.
    EndReject,
    /// A pure jump cycle: no network-visible instruction is ever reached.
    Stuck,
}

impl CmProgram {
    /// Follow `Jmp` chains starting at `pc` until a network-visible
    /// instruction. Chains longer than the program must revisit an
    /// instruction and therefore loop forever.
    pub fn resolve(&self, mut pc: usize) -> Resolved {
        for _ in 0..=self.instrs.len() {
            match self.instrs.get(pc) {
                None => return Resolved::EndReject,
                Some(Instr::Jmp(t)) => pc = *t as usize,
                Some(_) => return Resolved::At(pc as u16),
            }
        }
        Resolved::Stuck
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum AsmError {
    #[error("line {line}: unknown mnemonic `{text}`")]
    UnknownMnemonic { line: usize, text: String },
    #[error("line {line}: {mnemonic} expects {expected}")]
    BadOperands { line: usize, mnemonic: String, expected: &'static str },
    #[error("line {line}: counter index `{text}` out of range 1..={MAX_COUNTERS}")]
    CounterRange { line: usize, text: String },
    #[error("line {line}: label `{name}` is not defined")]
    UnresolvedLabel { line: usize, name: String },
    #[error("line {line}: label `{name}` defined twice")]
    DuplicateLabel { line: usize, name: String },
    #[error("line {line}: label `{name}` points past the final instruction")]
    DanglingLabel { line: usize, name: String },
    #[error("program has no instructions")]
    Empty,
}

fn is_label_name(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

fn parse_counter(tok: &str, line: usize) -> Result<u8, AsmError> {
    match tok.parse::<i64>() {
        Ok(index) if (1..=MAX_COUNTERS as i64).contains(&index) => Ok((index - 1) as u8),
        _ => Err(AsmError::CounterRange { line, text: tok.to_string() }),
    }
}

pub fn parse_program(src: &str) -> Result<CmProgram, AsmError> {
    // First pass: strip comments, collect labels and raw instructions.
    enum Pending {
        Counter(&'static str, u8),
        Jz(u8, String),
        Jmp(String),
        Plain(Instr),
    }
    let mut labels: HashMap<String, (u16, usize)> = HashMap::new();
    let mut pending: Vec<(Pending, usize)> = Vec::new();

    for (i, raw) in src.lines().enumerate() {
        let line = i + 1;
        let mut rest = raw.split('#').next().unwrap_or("").trim();
        while let Some(colon) = rest.find(':') {
            let name = rest[..colon].trim();
            if !is_label_name(name) {
                break;
            }
            if labels.insert(name.to_string(), (pending.len() as u16, line)).is_some() {
                return Err(AsmError::DuplicateLabel { line, name: name.to_string() });
            }
            rest = rest[colon + 1..].trim();
        }
        if rest.is_empty() {
            continue;
        }
        let mut toks = rest.split_whitespace();
        let mnemonic = toks.next().unwrap().to_ascii_uppercase();
        let args: Vec<&str> = toks.collect();
        let bad = |expected| AsmError::BadOperands {
            line,
            mnemonic: mnemonic.clone(),
            expected,
        };
        let p = match mnemonic.as_str() {
            "INC" | "DEC" | "ZERO" => {
                let [k] = args[..] else { return Err(bad("one counter operand")) };
                let op = match mnemonic.as_str() {
                    "INC" => "inc",
                    "DEC" => "dec",
                    _ => "zero",
                };
                Pending::Counter(op, parse_counter(k, line)?)
            }
            "JZ" => {
                let [k, target] = args[..] else {
                    return Err(bad("a counter operand and a label"));
                };
                Pending::Jz(parse_counter(k, line)?, target.to_string())
            }
            "JMP" => {
                let [target] = args[..] else { return Err(bad("a label")) };
                Pending::Jmp(target.to_string())
            }
            "ACCEPT" => {
                if !args.is_empty() {
                    return Err(bad("no operands"));
                }
                Pending::Plain(Instr::Accept)
            }
            "REJECT" => {
                if !args.is_empty() {
                    return Err(bad("no operands"));
                }
                Pending::Plain(Instr::Reject)
            }
            _ => return Err(AsmError::UnknownMnemonic { line, text: mnemonic }),
        };
        pending.push((p, line));
    }

    if pending.is_empty() {
        return Err(AsmError::Empty);
    }
    for (name, (target, line)) in &labels {
        if *target as usize >= pending.len() {
            return Err(AsmError::DanglingLabel { line: *line, name: name.clone() });
        }
    }

    // Second pass: resolve label references.
    let mut instrs = Vec::with_capacity(pending.len());
    let mut n_counters = 0u8;
    for (p, line) in pending {
        let lookup = |name: &str| {
            labels
                .get(name)
                .map(|(t, _)| *t)
                .ok_or_else(|| AsmError::UnresolvedLabel { line, name: name.to_string() })
        };
        let instr = match p {
            Pending::Counter(op, c) => {
                n_counters = n_counters.max(c + 1);
                match op {
                    "inc" => Instr::Inc(c),
                    "dec" => Instr::Dec(c),
                    _ => Instr::Zero(c),
                }
            }
            Pending::Jz(c, name) => {
                n_counters = n_counters.max(c + 1);
                Instr::Jz(c, lookup(&name)?)
            }
            Pending::Jmp(name) => Instr::Jmp(lookup(&name)?),
            Pending::Plain(i) => i,
        };
        instrs.push(instr);
    }
    Ok(CmProgram { instrs, n_counters })
}

impl fmt::Display for Instr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Instr::Inc(c) => write!(f, "INC {}", c + 1),
            Instr::Dec(c) => write!(f, "DEC {}", c + 1),
            Instr::Zero(c) => write!(f, "ZERO {}", c + 1),
            Instr::Jz(c, t) => write!(f, "JZ {} @{t}", c + 1),
            Instr::Jmp(t) => write!(f, "JMP @{t}"),
            Instr::Accept => write!(f, "ACCEPT"),
            Instr::Reject => write!(f, "REJECT"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const PARITY: &str = "\
# accept iff counter 1 is even
loop: JZ 1 even
      DEC 1
      JZ 1 odd
      DEC 1
      JMP loop
even: ACCEPT
odd:  REJECT
";

    #[test]
    fn parses_parity() {
        let p = parse_program(PARITY).unwrap();
        assert_eq!(
            p.instrs,
            vec![
                Instr::Jz(0, 5),
                Instr::Dec(0),
                Instr::Jz(0, 6),
                Instr::Dec(0),
                Instr::Jmp(0),
                Instr::Accept,
                Instr::Reject,
            ]
        );
        assert_eq!(p.n_counters, 1);
    }

    #[test]
    fn standalone_label_lines_bind_forward() {
        let p = parse_program("start:\n  INC 2\n  JMP start\n").unwrap();
        assert_eq!(p.instrs, vec![Instr::Inc(1), Instr::Jmp(0)]);
        assert_eq!(p.n_counters, 2);
    }

    #[test]
    fn errors_carry_line_numbers() {
        assert_eq!(
            parse_program("INC 1\nFROB 2\n"),
            Err(AsmError::UnknownMnemonic { line: 2, text: "FROB".into() })
        );
        assert_eq!(
            parse_program("\n\nINC 5\n"),
            Err(AsmError::CounterRange { line: 3, text: "5".into() })
        );
        assert_eq!(
            parse_program("JZ 1 nowhere\nACCEPT\n"),
            Err(AsmError::UnresolvedLabel { line: 1, name: "nowhere".into() })
        );
        assert_eq!(
            parse_program("a: INC 1\na: ACCEPT\n"),
            Err(AsmError::DuplicateLabel { line: 2, name: "a".into() })
        );
        assert_eq!(
            parse_program("ACCEPT\nend:\n"),
            Err(AsmError::DanglingLabel { line: 2, name: "end".into() })
        );
        assert_eq!(
            parse_program("JMP\n"),
            Err(AsmError::BadOperands { line: 1, mnemonic: "JMP".into(), expected: "a label" })
        );
        assert_eq!(parse_program("# nothing\n"), Err(AsmError::Empty));
    }

    #[test]
    fn resolve_skips_jump_chains() {
        let p = parse_program("JMP b\nb: JMP c\nc: ACCEPT\n").unwrap();
        assert_eq!(p.resolve(0), Resolved::At(2));
        let p = parse_program("ACCEPT\n").unwrap();
        assert_eq!(p.resolve(1), Resolved::EndReject);
        let p = parse_program("a: JMP b\nb: JMP a\n").unwrap();
        assert_eq!(p.resolve(0), Resolved::Stuck);
    }

    #[test]
    fn opcodes_are_stable() {
        assert_eq!(Instr::Inc(3).opcode(), Some((0, 3)));
        assert_eq!(Instr::Dec(0).opcode(), Some((1, 0)));
        assert_eq!(Instr::Zero(1).opcode(), Some((2, 1)));
        assert_eq!(Instr::Jz(2, 9).opcode(), Some((3, 2)));
        assert_eq!(Instr::Accept.opcode(), Some((4, 0)));
        assert_eq!(Instr::Reject.opcode(), Some((5, 0)));
        assert_eq!(Instr::Jmp(0).opcode(), None);
    }
}
