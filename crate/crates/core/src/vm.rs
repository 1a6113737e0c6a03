//! Genomes and the tape machine that interprets them.
//!
//! Every byte decodes (mod 8) to one of eight instructions over an unbounded
//! tape of byte cells, with bit-granular input and output. Every byte string
//! is a runnable program: unmatched brackets are no-ops, and reads past the
//! end of the input yield 0.

use std::fmt;
use std::str::FromStr;

use rand::RngCore;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::bits::BitString;
use crate::error::{Error, Result};

pub const DEFAULT_STEP_LIMIT: usize = 4096;
pub const DEFAULT_GENOME_LENGTH: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Instruction {
    MoveRight,
    MoveLeft,
    Increment,
    Decrement,
    LoopOpen,
    LoopClose,
    ReadBit,
    WriteBit,
}

impl Instruction {
    pub fn decode(byte: u8) -> Self {
        match byte % 8 {
            0 => Instruction::MoveRight,
            1 => Instruction::MoveLeft,
            2 => Instruction::Increment,
            3 => Instruction::Decrement,
            4 => Instruction::LoopOpen,
            5 => Instruction::LoopClose,
            6 => Instruction::ReadBit,
            _ => Instruction::WriteBit,
        }
    }
}

/// A program: a nonempty byte sequence.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Genome(Vec<u8>);

impl Genome {
    pub fn new(code: Vec<u8>) -> Result<Self> {
        if code.is_empty() {
            return Err(Error::invalid("genome must contain at least one byte"));
        }
        Ok(Genome(code))
    }

    pub fn random<R: RngCore + ?Sized>(rng: &mut R, len: usize) -> Result<Self> {
        let mut code = vec![0u8; len];
        rng.fill_bytes(&mut code);
        Genome::new(code)
    }

    pub fn code(&self) -> &[u8] {
        &self.0
    }

    pub(crate) fn code_mut(&mut self) -> &mut [u8] {
        &mut self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn to_hex(&self) -> String {
        hex::encode(&self.0)
    }

    pub fn from_hex(s: &str) -> Result<Self> {
        if s.bytes().any(|b| b.is_ascii_uppercase()) {
            return Err(Error::parse("genome", "hex must be lowercase"));
        }
        let code = hex::decode(s).map_err(|e| Error::parse("genome", e.to_string()))?;
        Genome::new(code)
    }

    /// Conservative static check: true when the program can never read its
    /// input or can never write output.
    pub fn is_syntactically_trivial(&self) -> bool {
        let has = |ins| self.0.iter().any(|&b| Instruction::decode(b) == ins);
        !has(Instruction::ReadBit) || !has(Instruction::WriteBit)
    }
}

impl fmt::Display for Genome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_hex())
    }
}

impl FromStr for Genome {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Genome::from_hex(s)
    }
}

impl Serialize for Genome {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_hex())
    }
}

impl<'de> Deserialize<'de> for Genome {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        Genome::from_hex(&s).map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct VmOutcome {
    pub output: BitString,
    pub halted: bool,
    pub steps_used: usize,
}

/// A genome decoded once, with bracket targets resolved, ready to run on
/// many inputs.
#[derive(Debug, Clone)]
pub struct Program {
    ops: Vec<Instruction>,
    // Matching bracket position, or `usize::MAX` for unmatched brackets and
    // non-bracket instructions.
    jumps: Vec<usize>,
}

impl Program {
    pub fn compile(genome: &Genome) -> Self {
        let ops: Vec<Instruction> = genome
            .code()
            .iter()
            .map(|&b| Instruction::decode(b))
            .collect();
        let mut jumps = vec![usize::MAX; ops.len()];
        let mut open = Vec::new();
        for (pc, op) in ops.iter().enumerate() {
            match op {
                Instruction::LoopOpen => open.push(pc),
                Instruction::LoopClose => {
                    if let Some(start) = open.pop() {
                        jumps[start] = pc;
                        jumps[pc] = start;
                    }
                }
                _ => {}
            }
        }
        Program { ops, jumps }
    }

    pub fn run(&self, input: &BitString, step_limit: usize) -> VmOutcome {
        let mut tape = Tape::default();
        let mut output = BitString::new();
        let mut next_input = 0usize;
        let mut pc = 0usize;
        let mut steps = 0usize;
        while pc < self.ops.len() {
            if steps == step_limit {
                return VmOutcome {
                    output,
                    halted: false,
                    steps_used: steps,
                };
            }
            steps += 1;
            match self.ops[pc] {
                Instruction::MoveRight => tape.pos += 1,
                Instruction::MoveLeft => tape.pos -= 1,
                Instruction::Increment => {
                    let c = tape.cell();
                    *c = c.wrapping_add(1);
                }
                Instruction::Decrement => {
                    let c = tape.cell();
                    *c = c.wrapping_sub(1);
                }
                Instruction::LoopOpen => {
                    let target = self.jumps[pc];
                    if target != usize::MAX && *tape.cell() == 0 {
                        pc = target;
                    }
                }
                Instruction::LoopClose => {
                    let target = self.jumps[pc];
                    if target != usize::MAX && *tape.cell() != 0 {
                        // Land on the loop-open itself; it re-tests the cell.
                        pc = target;
                        continue;
                    }
                }
                Instruction::ReadBit => {
                    let bit = input.get(next_input).unwrap_or(false);
                    next_input += 1;
                    *tape.cell() = u8::from(bit);
                }
                Instruction::WriteBit => output.push(*tape.cell() % 2 == 1),
            }
            pc += 1;
        }
        VmOutcome {
            output,
            halted: true,
            steps_used: steps,
        }
    }
}

#[derive(Default)]
struct Tape {
    right: Vec<u8>,
    left: Vec<u8>,
    pos: isize,
}

impl Tape {
    fn cell(&mut self) -> &mut u8 {
        let (side, idx) = if self.pos >= 0 {
            (&mut self.right, self.pos as usize)
        } else {
            (&mut self.left, (-self.pos - 1) as usize)
        };
        if idx >= side.len() {
            side.resize(idx + 1, 0);
        }
        &mut side[idx]
    }
}

pub fn execute(genome: &Genome, input: &BitString, step_limit: usize) -> VmOutcome {
    Program::compile(genome).run(input, step_limit)
}

/// The function a genome encodes, under a fixed step limit.
#[derive(Debug, Clone)]
pub struct Phenotype {
    program: Program,
    step_limit: usize,
}

impl Phenotype {
    pub fn new(genome: &Genome, step_limit: usize) -> Self {
        Phenotype {
            program: Program::compile(genome),
            step_limit,
        }
    }

    /// Output on `input`; a run cut off by the step limit yields its partial output.
    pub fn call(&self, input: &BitString) -> BitString {
        self.program.run(input, self.step_limit).output
    }

    pub fn run(&self, input: &BitString) -> VmOutcome {
        self.program.run(input, self.step_limit)
    }
}

pub fn phenotype(genome: &Genome, step_limit: usize) -> Phenotype {
    Phenotype::new(genome, step_limit)
}
