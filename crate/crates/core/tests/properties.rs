use codefarm::bits::BitString;
use codefarm::datasets::{Dataset, Datum};
use codefarm::evolution::{
    next_generation, single_crossover, uniform_crossover, CrossoverMethod, EvolutionParams,
    OperatorRngs,
};
use codefarm::fitness::{score_population, FitnessParams, ScoreVector};
use codefarm::replicator::{replicator_step, ReplicatorState};
use codefarm::{Genome, Stream};
use proptest::prelude::*;
use rand::Rng;

fn pair(len: std::ops::Range<usize>) -> impl Strategy<Value = (Vec<u8>, Vec<u8>)> {
    len.prop_flat_map(|n| {
        (
            prop::collection::vec(any::<u8>(), n),
            prop::collection::vec(any::<u8>(), n),
        )
    })
}

fn conserved(a: &Genome, b: &Genome, x: &Genome, y: &Genome) -> bool {
    (0..a.len()).all(|i| {
        let mut before = [a.code()[i], b.code()[i]];
        let mut after = [x.code()[i], y.code()[i]];
        before.sort_unstable();
        after.sort_unstable();
        before == after
    })
}

proptest! {
    #[test]
    fn crossover_conserves_loci((a, b) in pair(2..64), rate in 0.0f64..=0.5, seed: u64) {
        let (a, b) = (Genome::new(a).unwrap(), Genome::new(b).unwrap());
        let mut rng = Stream::new(seed);
        let (x, y) = single_crossover(&a, &b, rate, &mut rng).unwrap();
        prop_assert!(conserved(&a, &b, &x, &y));
        let (x, y) = uniform_crossover(&a, &b, rate, &mut rng).unwrap();
        prop_assert!(conserved(&a, &b, &x, &y));
    }

    #[test]
    fn weak_scores_bounded_and_monotone(raw in prop::collection::vec(0.0f64..=1.0, 1..40), eps in 0.001f64..=1.0) {
        let s = ScoreVector::from_raw(raw.clone(), eps);
        for (i, &w) in s.weak.iter().enumerate() {
            prop_assert!(w >= 1.0 - eps && w <= 1.0 + eps);
            prop_assert_eq!(w, 1.0 + eps * s.differential[i]);
        }
        for i in 0..raw.len() {
            for j in 0..raw.len() {
                if raw[i] > raw[j] {
                    prop_assert!(s.differential[i] > s.differential[j]);
                    prop_assert!(s.weak[i] > s.weak[j]);
                }
            }
        }
    }

    #[test]
    fn replicator_keeps_a_distribution(
        raw in prop::collection::vec(0.01f64..1.0, 2..6),
        steps in prop::collection::vec(prop::collection::vec(0.5f64..1.5, 6), 1..60),
    ) {
        let total: f64 = raw.iter().sum();
        let mut state = ReplicatorState::new(raw.iter().map(|x| x / total).collect()).unwrap();
        for row in steps {
            state = replicator_step(&state, &row[..state.len()]).unwrap();
            let sum: f64 = state.frequencies().iter().sum();
            prop_assert!((sum - 1.0).abs() < 1e-12);
            prop_assert!(state.frequencies().iter().all(|&x| x >= 0.0));
        }
    }
}

#[test]
fn trivial_genome_never_strictly_best() {
    let mut rng = Stream::new(23);
    for trial in 0..200 {
        let n = rng.gen_range(2..12);
        let population: Vec<Genome> = (0..n)
            .map(|_| {
                let len = rng.gen_range(1..24);
                Genome::new((0..len).map(|_| rng.gen_range(0u8..8)).collect()).unwrap()
            })
            .collect();
        let dataset = Dataset {
            examples: (0..4)
                .map(|_| Datum {
                    input: BitString::random(&mut rng, 6),
                    output: BitString::random(&mut rng, 3),
                })
                .collect(),
        };
        let params = FitnessParams {
            selection_strength: 0.125,
            correlation_mode: trial % 2 == 0,
            step_limit: 200,
        };
        let s = score_population(&population, &dataset, &params).unwrap();
        let trivial: Vec<bool> = population
            .iter()
            .map(Genome::is_syntactically_trivial)
            .collect();
        if trivial.iter().all(|&t| t) {
            continue;
        }
        let best = s.weak.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let strict_best: Vec<usize> = (0..n).filter(|&i| s.weak[i] == best).collect();
        if strict_best.len() == 1 {
            assert!(!trivial[strict_best[0]], "trial {trial}");
        }
    }
}

#[test]
fn neutral_selection_has_no_drift() {
    // Half the population carries a marked first byte; with uniform scores
    // and no variation operators its frequency is a martingale.
    let params = EvolutionParams {
        mutation_rate: 0.0,
        crossover_rate: 0.0,
        crossover_method: CrossoverMethod::Single,
        elite_probability: 0.0,
    };
    let population: Vec<Genome> = (0..64u8)
        .map(|i| Genome::new(vec![if i < 32 { 200 } else { 1 }, i]).unwrap())
        .collect();
    let mut total = 0.0;
    let trials = 200;
    for t in 0..trials {
        let mut s = ["selection", "mutation", "crossover", "elite"].map(|n| Stream::named(t, n));
        let [a, b, c, d] = &mut s;
        let mut rngs = OperatorRngs {
            selection: a,
            mutation: b,
            crossover: c,
            elite: d,
        };
        let next = next_generation(&population, &[1.0; 64], &[], &params, &mut rngs).unwrap();
        total += next.iter().filter(|g| g.code()[0] == 200).count() as f64 / 64.0;
    }
    let mean = total / trials as f64;
    assert!((mean - 0.5).abs() <= 0.05, "{mean}");
}
