//! The elite ledger: each generation's fittest program, kept only when it is
//! non-trivial and its signature (outputs on a persistent list of test
//! inputs) differs from every elite already recorded.

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use rand::RngCore;
use rayon::prelude::*;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::bits::BitString;
use crate::datasets::sample_universal_string;
use crate::error::{Error, Result};
use crate::fitness::ScoreVector;
use crate::vm::{Genome, Program};

pub const DEFAULT_TEST_INPUT_COUNT: usize = 32;

/// Test inputs generated once at start-up and never changed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TestInputs(Vec<BitString>);

impl TestInputs {
    pub fn new(inputs: Vec<BitString>) -> Result<Self> {
        if inputs.is_empty() {
            return Err(Error::invalid("test input list must be nonempty"));
        }
        Ok(TestInputs(inputs))
    }

    pub fn inputs(&self) -> &[BitString] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

pub fn make_test_inputs<R: RngCore + ?Sized>(
    count: usize,
    rng: &mut R,
    max_len: usize,
) -> Result<TestInputs> {
    if count < 1 {
        return Err(Error::invalid("test input count must be at least 1"));
    }
    TestInputs::new(
        (0..count)
            .map(|_| sample_universal_string(rng, max_len))
            .collect(),
    )
}

/// One program output in a signature. Encoded as ASCII bits, with a trailing
/// `!` when the run hit the step limit.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SignatureEntry {
    pub output: BitString,
    pub halted: bool,
}

impl fmt::Display for SignatureEntry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.output)?;
        if !self.halted {
            f.write_str("!")?;
        }
        Ok(())
    }
}

impl FromStr for SignatureEntry {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (bits, halted) = match s.strip_suffix('!') {
            Some(rest) => (rest, false),
            None => (s, true),
        };
        Ok(SignatureEntry {
            output: bits.parse()?,
            halted,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Signature(Vec<SignatureEntry>);

impl Signature {
    pub fn entries(&self) -> &[SignatureEntry] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl Serialize for Signature {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_seq(self.0.iter().map(|e| e.to_string()))
    }
}

impl<'de> Deserialize<'de> for Signature {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let raw = Vec::<String>::deserialize(d)?;
        raw.iter()
            .map(|s| s.parse())
            .collect::<Result<Vec<_>>>()
            .map(Signature)
            .map_err(serde::de::Error::custom)
    }
}

pub fn compute_signature(
    genome: &Genome,
    test_inputs: &TestInputs,
    step_limit: usize,
) -> Signature {
    let program = Program::compile(genome);
    let entries = test_inputs
        .inputs()
        .par_iter()
        .map(|input| {
            let out = program.run(input, step_limit);
            SignatureEntry {
                output: out.output,
                halted: out.halted,
            }
        })
        .collect();
    Signature(entries)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EliteEntry {
    pub genome: Genome,
    pub signature: Signature,
    pub generation_added: u64,
}

/// Append-only list of elites with pairwise-distinct signatures.
#[derive(Debug, Clone, Default)]
pub struct EliteLedger {
    entries: Vec<EliteEntry>,
    seen: HashSet<Signature>,
}

impl PartialEq for EliteLedger {
    fn eq(&self, other: &Self) -> bool {
        self.entries == other.entries
    }
}

impl Eq for EliteLedger {}

impl EliteLedger {
    pub fn new() -> Self {
        Self::default()
    }

    /// Rebuilds a ledger from stored entries, re-checking its invariants.
    pub fn from_entries(entries: Vec<EliteEntry>) -> Result<Self> {
        let mut ledger = EliteLedger::new();
        for entry in entries {
            if entry.genome.is_syntactically_trivial() {
                return Err(Error::invalid(format!(
                    "elite {} is syntactically trivial",
                    entry.genome
                )));
            }
            if let Some(last) = ledger.entries.last() {
                if entry.generation_added <= last.generation_added {
                    return Err(Error::invalid(
                        "elite generations must be strictly increasing",
                    ));
                }
            }
            if !ledger.seen.insert(entry.signature.clone()) {
                return Err(Error::invalid("duplicate elite signature"));
            }
            ledger.entries.push(entry);
        }
        Ok(ledger)
    }

    pub fn entries(&self) -> &[EliteEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn contains_signature(&self, signature: &Signature) -> bool {
        self.seen.contains(signature)
    }

    pub fn genomes(&self) -> Vec<Genome> {
        self.entries.iter().map(|e| e.genome.clone()).collect()
    }

    /// Considers the generation's fittest genome (lowest index on ties) for
    /// admission. Returns the new entry if one was added.
    pub fn maybe_add_elite(
        &mut self,
        population: &[Genome],
        scores: &ScoreVector,
        trivial_flags: &[bool],
        test_inputs: &TestInputs,
        step_limit: usize,
        generation: u64,
    ) -> Option<&EliteEntry> {
        let best = scores.fittest()?;
        if trivial_flags.get(best).copied().unwrap_or(true) {
            return None;
        }
        if let Some(last) = self.entries.last() {
            if generation <= last.generation_added {
                return None;
            }
        }
        let genome = &population[best];
        let signature = compute_signature(genome, test_inputs, step_limit);
        if self.seen.contains(&signature) {
            return None;
        }
        self.seen.insert(signature.clone());
        self.entries.push(EliteEntry {
            genome: genome.clone(),
            signature,
            generation_added: generation,
        });
        self.entries.last()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Stream;

    fn g(code: &[u8]) -> Genome {
        Genome::new(code.to_vec()).unwrap()
    }

    fn inputs(strs: &[&str]) -> TestInputs {
        TestInputs::new(strs.iter().map(|s| s.parse().unwrap()).collect()).unwrap()
    }

    fn scores(weak: &[f64]) -> ScoreVector {
        ScoreVector {
            raw: weak.to_vec(),
            differential: weak.to_vec(),
            weak: weak.to_vec(),
        }
    }

    #[test]
    fn test_input_generation() {
        let t = make_test_inputs(32, &mut Stream::new(1), 16).unwrap();
        assert_eq!(t.len(), 32);
        assert!(t.inputs().iter().all(|s| s.len() <= 16));
        assert_eq!(t, make_test_inputs(32, &mut Stream::new(1), 16).unwrap());
        let one = make_test_inputs(1, &mut Stream::new(2), 1).unwrap();
        assert_eq!(one.len(), 1);
        assert!(one.inputs()[0].len() <= 1);
        assert!(make_test_inputs(0, &mut Stream::new(2), 1).is_err());
    }

    #[test]
    fn signatures() {
        let t = inputs(&["", "1", "0", "10"]);
        let constant = compute_signature(&g(&[7]), &t, 100);
        assert!(constant
            .entries()
            .iter()
            .all(|e| e.output.to_string() == "0" && e.halted));
        let one = compute_signature(&g(&[2, 7]), &t, 100);
        assert_ne!(constant, one);
        let echo = compute_signature(&g(&[6, 7]), &t, 100);
        assert_ne!(echo, constant);
        assert_eq!(echo.entries()[1].output.to_string(), "1");

        let spin = compute_signature(&g(&[7, 2, 4, 5]), &t, 50);
        assert_eq!(spin.entries()[0].to_string(), "0!");
        assert_ne!(spin, constant);
    }

    #[test]
    fn entry_encoding() {
        for s in ["", "!", "0101", "11!"] {
            assert_eq!(s.parse::<SignatureEntry>().unwrap().to_string(), s);
        }
        assert!("01a".parse::<SignatureEntry>().is_err());
    }

    #[test]
    fn admission_rules() {
        let t = inputs(&["1", "0", "11"]);
        let pop = vec![g(&[2, 7]), g(&[6, 7]), g(&[6, 2, 7])];
        let flags: Vec<bool> = pop.iter().map(Genome::is_syntactically_trivial).collect();
        let mut ledger = EliteLedger::new();

        // Fittest is trivial.
        assert!(ledger
            .maybe_add_elite(&pop, &scores(&[1.1, 1.0, 0.9]), &flags, &t, 100, 1)
            .is_none());
        assert!(ledger.is_empty());

        // Fittest is admissible.
        assert!(ledger
            .maybe_add_elite(&pop, &scores(&[0.9, 1.1, 1.0]), &flags, &t, 100, 2)
            .is_some());
        assert_eq!(ledger.len(), 1);

        // Same phenotype under a different genome.
        let twin = vec![g(&[6, 0, 1, 7])];
        assert!(ledger
            .maybe_add_elite(&twin, &scores(&[1.0]), &[false], &t, 100, 3)
            .is_none());
        assert_eq!(ledger.len(), 1);

        // [6,2,7] complements the first input bit: a new phenotype.
        assert!(ledger
            .maybe_add_elite(&pop, &scores(&[0.9, 1.0, 1.1]), &flags, &t, 100, 4)
            .is_some());
        assert_eq!(ledger.len(), 2);
        assert_eq!(ledger.entries()[1].generation_added, 4);

        let rebuilt = EliteLedger::from_entries(ledger.entries().to_vec()).unwrap();
        assert_eq!(rebuilt, ledger);
        let mut dup = ledger.entries().to_vec();
        dup.push(EliteEntry {
            generation_added: 9,
            ..dup[0].clone()
        });
        assert!(EliteLedger::from_entries(dup).is_err());
    }
}
