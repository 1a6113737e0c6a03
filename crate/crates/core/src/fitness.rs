//! Matching phenotypes against a target dataset, and the weak-selection
//! transform `F = 1 + eps * delta`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bits::BitString;
use crate::datasets::Dataset;
use crate::error::{Error, Result};
use crate::vm::{Genome, Phenotype};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FitnessParams {
    /// Selection strength, in (0, 1].
    pub selection_strength: f64,
    /// Score a bitwise complement of the target as well as an exact match.
    pub correlation_mode: bool,
    /// Set from the farm-wide step limit, not read from config files.
    #[serde(skip)]
    pub step_limit: usize,
}

impl Default for FitnessParams {
    fn default() -> Self {
        FitnessParams {
            selection_strength: 0.125,
            correlation_mode: true,
            step_limit: crate::vm::DEFAULT_STEP_LIMIT,
        }
    }
}

impl FitnessParams {
    pub fn validate(&self) -> Result<()> {
        let eps = self.selection_strength;
        if !(eps > 0.0 && eps <= 1.0) {
            return Err(Error::config(
                "fitness.selection_strength",
                format!("must lie in (0, 1], got {eps}"),
            ));
        }
        if self.step_limit < 1 {
            return Err(Error::config("fitness.step_limit", "must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ScoreVector {
    pub raw: Vec<f64>,
    /// In [-1, 1].
    pub differential: Vec<f64>,
    /// In [1 - eps, 1 + eps].
    pub weak: Vec<f64>,
}

impl ScoreVector {
    /// Rescales raw scores so that min maps to -1 and max to +1 (all zeros
    /// when they are equal), then applies `1 + eps * delta`.
    pub fn from_raw(raw: Vec<f64>, selection_strength: f64) -> Self {
        let min = raw.iter().copied().fold(f64::INFINITY, f64::min);
        let max = raw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let differential: Vec<f64> = if min != max {
            let a = 2.0 / (max - min);
            let b = 1.0 - a * max;
            raw.iter()
                .map(|&r| {
                    // Pin the endpoints exactly; the affine map can miss -1 by an ulp.
                    if r == min {
                        -1.0
                    } else if r == max {
                        1.0
                    } else {
                        (a * r + b).clamp(-1.0, 1.0)
                    }
                })
                .collect()
        } else {
            vec![0.0; raw.len()]
        };
        let weak = differential
            .iter()
            .map(|&d| 1.0 + selection_strength * d)
            .collect();
        ScoreVector {
            raw,
            differential,
            weak,
        }
    }

    pub fn len(&self) -> usize {
        self.weak.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weak.is_empty()
    }

    /// Index of the largest weak score, lowest index on ties.
    pub fn fittest(&self) -> Option<usize> {
        let mut best: Option<usize> = None;
        for (i, &w) in self.weak.iter().enumerate() {
            match best {
                Some(b) if self.weak[b] >= w => {}
                _ => best = Some(i),
            }
        }
        best
    }
}

/// Fraction of target positions matched. Output bits past the target are
/// ignored; missing output bits are mismatches. An empty target is matched
/// vacuously.
pub fn raw_match(output: &BitString, target: &BitString) -> f64 {
    if target.is_empty() {
        return 1.0;
    }
    let hits = target
        .iter()
        .enumerate()
        .filter(|&(i, t)| output.get(i) == Some(t))
        .count();
    hits as f64 / target.len() as f64
}

pub fn datum_score(raw: f64, correlation_mode: bool) -> f64 {
    if correlation_mode {
        raw.max(1.0 - raw)
    } else {
        raw
    }
}

/// Mean per-datum score of one genome. Syntactically trivial genomes get the
/// lowest possible score, 0.
pub fn raw_score(genome: &Genome, dataset: &Dataset, params: &FitnessParams) -> f64 {
    if genome.is_syntactically_trivial() {
        return 0.0;
    }
    let phenotype = Phenotype::new(genome, params.step_limit);
    let total: f64 = dataset
        .examples
        .iter()
        .map(|d| {
            datum_score(
                raw_match(&phenotype.call(&d.input), &d.output),
                params.correlation_mode,
            )
        })
        .sum();
    total / dataset.len() as f64
}

pub fn score_population(
    population: &[Genome],
    dataset: &Dataset,
    params: &FitnessParams,
) -> Result<ScoreVector> {
    if population.is_empty() {
        return Err(Error::invalid("cannot score an empty population"));
    }
    if dataset.is_empty() {
        return Err(Error::invalid("cannot score against an empty dataset"));
    }
    let raw: Vec<f64> = population
        .par_iter()
        .map(|g| raw_score(g, dataset, params))
        .collect();
    Ok(ScoreVector::from_raw(raw, params.selection_strength))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datasets::Datum;

    fn bits(s: &str) -> BitString {
        s.parse().unwrap()
    }

    #[test]
    fn matching() {
        assert_eq!(raw_match(&bits("1010"), &bits("1010")), 1.0);
        assert_eq!(raw_match(&bits("0101"), &bits("1010")), 0.0);
        assert_eq!(raw_match(&bits("10"), &bits("1010")), 0.5);
        assert_eq!(raw_match(&bits("101011"), &bits("1010")), 1.0);
        assert_eq!(raw_match(&bits("1"), &bits("")), 1.0);
    }

    #[test]
    fn correlation() {
        assert_eq!(datum_score(0.0, true), 1.0);
        assert_eq!(datum_score(0.3, false), 0.3);
        assert_eq!(datum_score(0.5, true), 0.5);
    }

    #[test]
    fn scaling_examples() {
        let s = ScoreVector::from_raw(vec![3.0 / 8.0, 5.0 / 8.0, 7.0 / 8.0], 0.125);
        assert_eq!(s.differential, vec![-1.0, 0.0, 1.0]);
        assert_eq!(s.weak, vec![0.875, 1.0, 1.125]);

        let s = ScoreVector::from_raw(vec![0.4; 5], 0.125);
        assert!(s.differential.iter().all(|&d| d == 0.0));
        assert!(s.weak.iter().all(|&w| w == 1.0));

        let s = ScoreVector::from_raw(vec![0.9], 0.5);
        assert_eq!(s.differential, vec![0.0]);
        assert_eq!(s.weak, vec![1.0]);
    }

    #[test]
    fn fittest_breaks_ties_low() {
        let s = ScoreVector {
            weak: vec![1.0, 1.125, 0.875],
            ..Default::default()
        };
        assert_eq!(s.fittest(), Some(1));
        let s = ScoreVector {
            weak: vec![1.0; 4],
            ..Default::default()
        };
        assert_eq!(s.fittest(), Some(0));
    }

    #[test]
    fn population_scoring() {
        let dataset = Dataset {
            examples: vec![
                Datum {
                    input: bits("10"),
                    output: bits("10"),
                },
                Datum {
                    input: bits("01"),
                    output: bits("01"),
                },
            ],
        };
        let params = FitnessParams {
            selection_strength: 0.125,
            correlation_mode: false,
            step_limit: 100,
        };
        let pop = vec![
            Genome::new(vec![6, 7, 6, 7]).unwrap(), // echo: perfect
            Genome::new(vec![2, 7]).unwrap(),       // trivial
            Genome::new(vec![6, 7, 7]).unwrap(),    // first bit twice
        ];
        let s = score_population(&pop, &dataset, &params).unwrap();
        assert_eq!(s.raw, vec![1.0, 0.0, 0.5]);
        assert_eq!(s.differential, vec![1.0, -1.0, 0.0]);
        assert_eq!(s.weak, vec![1.125, 0.875, 1.0]);

        assert!(score_population(&[], &dataset, &params).is_err());
        assert!(score_population(&pop, &Dataset { examples: vec![] }, &params).is_err());
    }

    #[test]
    fn complement_counts_under_correlation() {
        let dataset = Dataset {
            examples: vec![Datum {
                input: bits("1"),
                output: bits("0"),
            }],
        };
        let echo = Genome::new(vec![6, 7]).unwrap();
        let corr = FitnessParams {
            correlation_mode: true,
            ..Default::default()
        };
        let exact = FitnessParams {
            correlation_mode: false,
            ..Default::default()
        };
        assert_eq!(raw_score(&echo, &dataset, &corr), 1.0);
        assert_eq!(raw_score(&echo, &dataset, &exact), 0.0);
    }
}
