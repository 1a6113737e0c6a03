//! Random target datasets, regenerated every generation.

use std::fmt;

use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::bits::BitString;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DatasetMode {
    /// Arbitrary-length strings under the density 2^(-2l-1).
    Universal,
    /// Fixed-length fair coin flips.
    Fixed,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DatasetConfig {
    pub mode: DatasetMode,
    pub num_examples: usize,
    pub fixed_input_len: usize,
    pub fixed_output_len: usize,
    pub universal_max_len: usize,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        DatasetConfig {
            mode: DatasetMode::Fixed,
            num_examples: 16,
            fixed_input_len: 32,
            fixed_output_len: 8,
            universal_max_len: 64,
        }
    }
}

impl DatasetConfig {
    pub fn validate(&self) -> Result<()> {
        if self.num_examples < 1 {
            return Err(Error::config("dataset.num_examples", "must be at least 1"));
        }
        match self.mode {
            DatasetMode::Universal if self.universal_max_len < 1 => Err(Error::config(
                "dataset.universal_max_len",
                "must be at least 1",
            )),
            DatasetMode::Fixed if self.fixed_input_len < 1 => Err(Error::config(
                "dataset.fixed_input_len",
                "must be at least 1",
            )),
            DatasetMode::Fixed if self.fixed_output_len < 1 => Err(Error::config(
                "dataset.fixed_output_len",
                "must be at least 1",
            )),
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Datum {
    pub input: BitString,
    pub output: BitString,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dataset {
    pub examples: Vec<Datum>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }
}

/// One line per datum: `<input-bits> -> <output-bits>`.
impl fmt::Display for Dataset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for d in &self.examples {
            writeln!(f, "{} -> {}", d.input, d.output)?;
        }
        Ok(())
    }
}

/// Draws a string with probability proportional to 2^(-2l-1), restricted to
/// lengths `<= max_len`.
///
/// The length is geometric, P(l) = 2^-(l+1), counted as the run of zero bits
/// before the first one bit; lengths above `max_len` are rejected and
/// redrawn. The bits themselves are fair coins.
pub fn sample_universal_string<R: RngCore + ?Sized>(rng: &mut R, max_len: usize) -> BitString {
    let len = loop {
        let mut zeros = 0usize;
        loop {
            let word = rng.next_u64();
            if word == 0 {
                zeros += 64;
                if zeros > max_len {
                    break;
                }
                continue;
            }
            zeros += word.trailing_zeros() as usize;
            break;
        }
        if zeros <= max_len {
            break zeros;
        }
    };
    BitString::random(rng, len)
}

pub fn generate_dataset<R: RngCore + ?Sized>(config: &DatasetConfig, rng: &mut R) -> Dataset {
    let examples = (0..config.num_examples)
        .map(|_| match config.mode {
            DatasetMode::Fixed => Datum {
                input: BitString::random(rng, config.fixed_input_len),
                output: BitString::random(rng, config.fixed_output_len),
            },
            DatasetMode::Universal => Datum {
                input: sample_universal_string(rng, config.universal_max_len),
                output: sample_universal_string(rng, config.universal_max_len),
            },
        })
        .collect();
    Dataset { examples }
}
