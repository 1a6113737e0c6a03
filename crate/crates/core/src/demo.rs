//! A minimal GP system in which one control-gene allele wins against random
//! targets purely through lower fitness variance.
//!
//! A genotype is `k + 1` bits. Gene 0 is a master control: allele 0 encodes
//! the constant-false function, allele 1 makes the remaining `k` genes an
//! input index (most significant bit first) whose bit is returned. Inputs
//! are `2^k` random bits and the target is one random bit per example.

use std::fmt::Write as _;

use rand::{Rng, RngCore};

use crate::error::{Error, Result};
use crate::evolution::{crossover_in_place, CrossoverMethod, Roulette};
use crate::fitness::ScoreVector;
use crate::rng::Stream;

#[derive(Debug, Clone, PartialEq)]
pub struct DemoConfig {
    pub crossover_method: CrossoverMethod,
    pub mutation_rate: f64,
    pub crossover_rate: f64,
    pub selection_strength: f64,
    pub num_genes: usize,
    pub num_inputs: usize,
    pub num_genotypes: usize,
    pub num_examples: usize,
    pub num_generations: usize,
    pub report_interval: usize,
    pub seed: u64,
}

impl Default for DemoConfig {
    fn default() -> Self {
        DemoConfig {
            crossover_method: CrossoverMethod::Single,
            mutation_rate: 1.0 / (1 << 11) as f64,
            crossover_rate: 1.0 / (1 << 1) as f64,
            selection_strength: 1.0 / (1 << 3) as f64,
            num_genes: 21,
            num_inputs: 1 << 20,
            num_genotypes: 1 << 10,
            num_examples: 1,
            num_generations: 800,
            report_interval: 20,
            seed: 0,
        }
    }
}

impl DemoConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.mutation_rate) {
            return Err(Error::config("mutation_rate", "must lie in [0, 1]"));
        }
        if !(0.0..=0.5).contains(&self.crossover_rate) {
            return Err(Error::config("crossover_rate", "must lie in [0, 0.5]"));
        }
        if self.selection_strength.is_nan() || self.selection_strength <= 0.0 {
            return Err(Error::config("selection_strength", "must be positive"));
        }
        if !(2..=31).contains(&self.num_genes) {
            return Err(Error::config("num_genes", "must lie in [2, 31]"));
        }
        if self.num_inputs != 1 << (self.num_genes - 1) {
            return Err(Error::config("num_inputs", "must equal 2^(num_genes - 1)"));
        }
        if self.num_genotypes < 2 {
            return Err(Error::config("num_genotypes", "must be greater than 1"));
        }
        if self.num_examples < 1 {
            return Err(Error::config("num_examples", "must be at least 1"));
        }
        if self.report_interval < 1 {
            return Err(Error::config("report_interval", "must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DemoGenotype(Vec<bool>);

impl DemoGenotype {
    pub fn new(bits: Vec<bool>) -> Result<Self> {
        if bits.len() < 2 {
            return Err(Error::invalid("a demo genotype has at least two genes"));
        }
        Ok(DemoGenotype(bits))
    }

    pub fn bits(&self) -> &[bool] {
        &self.0
    }

    pub fn control(&self) -> bool {
        self.0[0]
    }
}

/// A packed input of `len` bits.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DemoInput {
    words: Vec<u64>,
    len: usize,
}

impl DemoInput {
    pub fn random<R: RngCore + ?Sized>(rng: &mut R, len: usize) -> Self {
        let mut words: Vec<u64> = (0..len.div_ceil(64)).map(|_| rng.next_u64()).collect();
        if !len.is_multiple_of(64) {
            if let Some(last) = words.last_mut() {
                *last &= (1u64 << (len % 64)) - 1;
            }
        }
        DemoInput { words, len }
    }

    pub fn from_bits(bits: &[bool]) -> Self {
        let mut words = vec![0u64; bits.len().div_ceil(64)];
        for (i, &b) in bits.iter().enumerate() {
            if b {
                words[i / 64] |= 1 << (i % 64);
            }
        }
        DemoInput {
            words,
            len: bits.len(),
        }
    }

    pub fn get(&self, i: usize) -> bool {
        assert!(i < self.len, "input index {i} out of range {}", self.len);
        (self.words[i / 64] >> (i % 64)) & 1 == 1
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DemoDatum {
    pub input: DemoInput,
    pub output: bool,
}

/// The function a demo genotype encodes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DemoPhenotype {
    ConstantFalse,
    Select(usize),
}

impl DemoPhenotype {
    pub fn call(&self, input: &DemoInput) -> bool {
        match *self {
            DemoPhenotype::ConstantFalse => false,
            DemoPhenotype::Select(i) => input.get(i),
        }
    }
}

pub fn demo_decode(genotype: &DemoGenotype) -> DemoPhenotype {
    if !genotype.control() {
        return DemoPhenotype::ConstantFalse;
    }
    let index = genotype.0[1..]
        .iter()
        .fold(0usize, |acc, &b| (acc << 1) | usize::from(b));
    DemoPhenotype::Select(index)
}

/// Raw score is the sum over examples of +1 per match and -1 per mismatch,
/// then the usual min/max rescale and `1 + eps * delta`.
pub fn demo_fitness(
    population: &[DemoGenotype],
    dataset: &[DemoDatum],
    selection_strength: f64,
) -> Result<Vec<f64>> {
    if population.is_empty() || dataset.is_empty() {
        return Err(Error::invalid(
            "demo fitness needs a population and a dataset",
        ));
    }
    let raw = population
        .iter()
        .map(|g| {
            let phenotype = demo_decode(g);
            dataset
                .iter()
                .map(|d| {
                    if phenotype.call(&d.input) == d.output {
                        1.0
                    } else {
                        -1.0
                    }
                })
                .sum()
        })
        .collect();
    Ok(ScoreVector::from_raw(raw, selection_strength).weak)
}

fn mutate_bits<R: RngCore + ?Sized>(bits: &mut [bool], rate: f64, rng: &mut R) {
    for bit in bits {
        *bit ^= rng.gen_bool(rate);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DemoRow {
    pub generation: usize,
    pub allele_0: usize,
    pub allele_1: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DemoReport {
    pub num_genotypes: usize,
    pub rows: Vec<DemoRow>,
}

impl DemoReport {
    pub fn percent(&self, count: usize) -> usize {
        100 * count / self.num_genotypes
    }

    /// Average percentages over all reported rows, by integer division.
    pub fn averages(&self) -> (usize, usize) {
        let divisor = self.rows.len() * self.num_genotypes;
        if divisor == 0 {
            return (0, 0);
        }
        let sum0: usize = self.rows.iter().map(|r| r.allele_0).sum();
        let sum1: usize = self.rows.iter().map(|r| r.allele_1).sum();
        (100 * sum0 / divisor, 100 * sum1 / divisor)
    }

    /// Exact (unfloored) average allele percentages.
    pub fn mean_percentages(&self) -> (f64, f64) {
        let divisor = (self.rows.len() * self.num_genotypes) as f64;
        let sum0: usize = self.rows.iter().map(|r| r.allele_0).sum();
        let sum1: usize = self.rows.iter().map(|r| r.allele_1).sum();
        (100.0 * sum0 as f64 / divisor, 100.0 * sum1 as f64 / divisor)
    }

    /// `generation,allele0,allele1` rows of integer percentages, with header.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("generation,allele0,allele1\n");
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{}",
                r.generation,
                self.percent(r.allele_0),
                self.percent(r.allele_1)
            );
        }
        out
    }
}

const RULE: &str = "---------- -------- --------";

pub fn demo_report_format(report: &DemoReport) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "Generation Allele:0 Allele:1");
    let _ = writeln!(out, "{RULE}");
    for r in &report.rows {
        let _ = writeln!(
            out,
            "{:>10} {:>7}% {:>7}%",
            r.generation,
            report.percent(r.allele_0),
            report.percent(r.allele_1)
        );
    }
    let (avg0, avg1) = report.averages();
    let _ = writeln!(out, "{RULE}");
    let _ = writeln!(out, "   Average {avg0:>7}% {avg1:>7}%");
    out
}

fn count_alleles(population: &[DemoGenotype], generation: usize) -> DemoRow {
    let allele_1 = population.iter().filter(|g| g.control()).count();
    DemoRow {
        generation,
        allele_0: population.len() - allele_1,
        allele_1,
    }
}

pub fn run_demo(config: &DemoConfig) -> Result<DemoReport> {
    config.validate()?;
    let mut rng = Stream::new(config.seed);
    let c = config;

    let blank = DemoGenotype(vec![false; c.num_genes]);
    let mut populations = [
        vec![blank.clone(); c.num_genotypes],
        vec![blank; c.num_genotypes],
    ];
    let mut toggle = 0usize;
    for g in populations[toggle].iter_mut() {
        for bit in g.0.iter_mut() {
            *bit = rng.gen_bool(0.5);
        }
    }

    let mut rows = Vec::new();
    let mut generation = 0usize;
    loop {
        toggle = 1 - toggle;
        let (left, right) = populations.split_at_mut(1);
        let (new_population, old_population) = if toggle == 0 {
            (&mut left[0], &right[0])
        } else {
            (&mut right[0], &left[0])
        };
        if generation.is_multiple_of(c.report_interval) {
            rows.push(count_alleles(old_population, generation));
        }
        if generation >= c.num_generations {
            break;
        }
        generation += 1;

        let dataset: Vec<DemoDatum> = (0..c.num_examples)
            .map(|_| {
                let input = DemoInput::random(&mut rng, c.num_inputs);
                let output = rng.gen_bool(0.5);
                DemoDatum { input, output }
            })
            .collect();
        let scores = demo_fitness(old_population, &dataset, c.selection_strength)?;
        let roulette = Roulette::new(&scores)?;
        // An odd final slot keeps its stale genotype.
        let mut i = 0;
        while i + 1 < c.num_genotypes {
            let (head, tail) = new_population.split_at_mut(i + 1);
            let first = &mut head[i];
            let second = &mut tail[0];
            first
                .0
                .clone_from(&old_population[roulette.sample(&mut rng)].0);
            second
                .0
                .clone_from(&old_population[roulette.sample(&mut rng)].0);
            mutate_bits(&mut first.0, c.mutation_rate, &mut rng);
            mutate_bits(&mut second.0, c.mutation_rate, &mut rng);
            crossover_in_place(
                c.crossover_method,
                &mut first.0,
                &mut second.0,
                c.crossover_rate,
                &mut rng,
            )?;
            i += 2;
        }
    }
    Ok(DemoReport {
        num_genotypes: c.num_genotypes,
        rows,
    })
}
