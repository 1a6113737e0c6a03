//! Selection, mutation and crossover.

use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::vm::Genome;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CrossoverMethod {
    Single,
    Uniform,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvolutionParams {
    /// Per-locus replacement probability.
    pub mutation_rate: f64,
    pub crossover_rate: f64,
    pub crossover_method: CrossoverMethod,
    /// Probability that a parent is drawn uniformly from the elites.
    pub elite_probability: f64,
}

impl Default for EvolutionParams {
    fn default() -> Self {
        EvolutionParams {
            mutation_rate: 1.0 / 2048.0,
            crossover_rate: 0.5,
            crossover_method: CrossoverMethod::Single,
            elite_probability: 1.0 / 16.0,
        }
    }
}

impl EvolutionParams {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.mutation_rate) {
            return Err(Error::config(
                "evolution.mutation_rate",
                "must lie in [0, 1]",
            ));
        }
        if !(0.0..=0.5).contains(&self.crossover_rate) {
            return Err(Error::config(
                "evolution.crossover_rate",
                "must lie in [0, 0.5]",
            ));
        }
        if !(0.0..1.0).contains(&self.elite_probability) {
            return Err(Error::config(
                "evolution.elite_probability",
                "must lie in [0, 1)",
            ));
        }
        Ok(())
    }
}

/// Fitness-proportionate sampler over a fixed weight vector.
#[derive(Debug, Clone)]
pub struct Roulette {
    cumulative: Vec<f64>,
}

impl Roulette {
    pub fn new(weights: &[f64]) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::invalid("roulette needs at least one weight"));
        }
        let mut total = 0.0;
        let mut cumulative = Vec::with_capacity(weights.len());
        for (i, &w) in weights.iter().enumerate() {
            if !(w >= 0.0 && w.is_finite()) {
                return Err(Error::invalid(format!(
                    "weight {i} is {w}; weights must be finite and >= 0"
                )));
            }
            total += w;
            cumulative.push(total);
        }
        if total <= 0.0 {
            return Err(Error::invalid("roulette weights sum to zero"));
        }
        Ok(Roulette { cumulative })
    }

    pub fn sample<R: RngCore + ?Sized>(&self, rng: &mut R) -> usize {
        let total = *self.cumulative.last().expect("nonempty");
        let target = rng.gen::<f64>() * total;
        let i = self.cumulative.partition_point(|&c| c <= target);
        if i < self.cumulative.len() {
            i
        } else {
            // u * total rounded up to total: take the last positive-weight slot.
            self.cumulative.partition_point(|&c| c < total)
        }
    }
}

pub fn roulette_select<R: RngCore + ?Sized>(weights: &[f64], rng: &mut R) -> Result<usize> {
    Ok(Roulette::new(weights)?.sample(rng))
}

pub fn mutate_genome<R: RngCore + ?Sized>(genome: &Genome, rate: f64, rng: &mut R) -> Genome {
    let mut out = genome.clone();
    mutate_in_place(&mut out, rate, rng);
    out
}

pub(crate) fn mutate_in_place<R: RngCore + ?Sized>(genome: &mut Genome, rate: f64, rng: &mut R) {
    if rate <= 0.0 {
        return;
    }
    for byte in genome.code_mut() {
        if rng.gen_bool(rate) {
            *byte = rng.gen();
        }
    }
}

/// With probability `rate`, swaps the suffixes of `a` and `b` from a cut
/// index drawn uniformly in `[1, len - 1]`.
pub fn single_crossover_in_place<T, R: RngCore + ?Sized>(
    a: &mut [T],
    b: &mut [T],
    rate: f64,
    rng: &mut R,
) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::invalid(format!(
            "crossover of unequal lengths {} and {}",
            a.len(),
            b.len()
        )));
    }
    if !rng.gen_bool(rate) {
        return Ok(());
    }
    let len = a.len();
    let cut = rng.gen_range(1..=(len.saturating_sub(1)).max(1));
    swap_suffix(a, b, cut);
    Ok(())
}

pub(crate) fn swap_suffix<T>(a: &mut [T], b: &mut [T], cut: usize) {
    if cut < a.len() {
        a[cut..].swap_with_slice(&mut b[cut..]);
    }
}

/// Swaps each locus independently with probability `rate`.
pub fn uniform_crossover_in_place<T, R: RngCore + ?Sized>(
    a: &mut [T],
    b: &mut [T],
    rate: f64,
    rng: &mut R,
) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::invalid(format!(
            "crossover of unequal lengths {} and {}",
            a.len(),
            b.len()
        )));
    }
    for (x, y) in a.iter_mut().zip(b.iter_mut()) {
        if rng.gen_bool(rate) {
            std::mem::swap(x, y);
        }
    }
    Ok(())
}

pub fn crossover_in_place<T, R: RngCore + ?Sized>(
    method: CrossoverMethod,
    a: &mut [T],
    b: &mut [T],
    rate: f64,
    rng: &mut R,
) -> Result<()> {
    match method {
        CrossoverMethod::Single => single_crossover_in_place(a, b, rate, rng),
        CrossoverMethod::Uniform => uniform_crossover_in_place(a, b, rate, rng),
    }
}

pub fn single_crossover<R: RngCore + ?Sized>(
    g1: &Genome,
    g2: &Genome,
    rate: f64,
    rng: &mut R,
) -> Result<(Genome, Genome)> {
    if g1.len() < 2 || g1.len() != g2.len() {
        return Err(Error::invalid(format!(
            "single crossover needs equal lengths >= 2, got {} and {}",
            g1.len(),
            g2.len()
        )));
    }
    let (mut a, mut b) = (g1.clone(), g2.clone());
    single_crossover_in_place(a.code_mut(), b.code_mut(), rate, rng)?;
    Ok((a, b))
}

pub fn uniform_crossover<R: RngCore + ?Sized>(
    g1: &Genome,
    g2: &Genome,
    rate: f64,
    rng: &mut R,
) -> Result<(Genome, Genome)> {
    let (mut a, mut b) = (g1.clone(), g2.clone());
    uniform_crossover_in_place(a.code_mut(), b.code_mut(), rate, rng)?;
    Ok((a, b))
}

/// The random streams consumed by [`next_generation`], one per role.
pub struct OperatorRngs<'a, R: RngCore + ?Sized> {
    pub selection: &'a mut R,
    pub mutation: &'a mut R,
    pub crossover: &'a mut R,
    pub elite: &'a mut R,
}

/// Breeds a new population of the same size, pair by pair: pick two parents
/// (an elite with probability `elite_probability`, otherwise by roulette over
/// `weak_scores`), mutate each copy, then cross the pair over.
pub fn next_generation<R: RngCore + ?Sized>(
    old_population: &[Genome],
    weak_scores: &[f64],
    elites: &[Genome],
    params: &EvolutionParams,
    rngs: &mut OperatorRngs<'_, R>,
) -> Result<Vec<Genome>> {
    let n = old_population.len();
    if n < 2 || !n.is_multiple_of(2) {
        return Err(Error::invalid(format!(
            "population size must be even and at least 2, got {n}"
        )));
    }
    if weak_scores.len() != n {
        return Err(Error::invalid(format!(
            "{} scores for a population of {n}",
            weak_scores.len()
        )));
    }
    let roulette = Roulette::new(weak_scores)?;
    let pick = |rngs: &mut OperatorRngs<'_, R>| -> Genome {
        if !elites.is_empty()
            && params.elite_probability > 0.0
            && rngs.elite.gen_bool(params.elite_probability)
        {
            elites[rngs.elite.gen_range(0..elites.len())].clone()
        } else {
            old_population[roulette.sample(rngs.selection)].clone()
        }
    };
    let mut next = Vec::with_capacity(n);
    for _ in 0..n / 2 {
        let mut a = pick(rngs);
        let mut b = pick(rngs);
        mutate_in_place(&mut a, params.mutation_rate, rngs.mutation);
        mutate_in_place(&mut b, params.mutation_rate, rngs.mutation);
        crossover_in_place(
            params.crossover_method,
            a.code_mut(),
            b.code_mut(),
            params.crossover_rate,
            rngs.crossover,
        )?;
        next.push(a);
        next.push(b);
    }
    Ok(next)
}
