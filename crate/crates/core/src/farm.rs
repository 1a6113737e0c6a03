//! The farming loop: regenerate a random target, score, record the fittest
//! program in the seed list, update the elites, breed, repeat.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::bits::BitString;
use crate::datasets::{generate_dataset, DatasetConfig, DatasetMode};
use crate::elites::{
    compute_signature, make_test_inputs, EliteLedger, TestInputs, DEFAULT_TEST_INPUT_COUNT,
};
use crate::error::{Error, Result};
use crate::evolution::{next_generation, EvolutionParams, OperatorRngs};
use crate::fitness::{score_population, FitnessParams, ScoreVector};
use crate::rng::Stream;
use crate::snapshot;
use crate::vm::{Genome, DEFAULT_GENOME_LENGTH, DEFAULT_STEP_LIMIT};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Termination {
    pub max_generations: u64,
    /// Stop once the ledger holds this many elites.
    pub elite_target: Option<usize>,
}

impl Default for Termination {
    fn default() -> Self {
        Termination {
            max_generations: 1000,
            elite_target: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FarmConfig {
    pub population_size: usize,
    pub genome_length: usize,
    pub step_limit: usize,
    pub test_input_count: usize,
    pub master_seed: u64,
    pub dataset: DatasetConfig,
    pub fitness: FitnessParams,
    pub evolution: EvolutionParams,
    pub termination: Termination,
}

impl Default for FarmConfig {
    fn default() -> Self {
        FarmConfig {
            population_size: 256,
            genome_length: DEFAULT_GENOME_LENGTH,
            step_limit: DEFAULT_STEP_LIMIT,
            test_input_count: DEFAULT_TEST_INPUT_COUNT,
            master_seed: 0,
            dataset: DatasetConfig::default(),
            fitness: FitnessParams::default(),
            evolution: EvolutionParams::default(),
            termination: Termination::default(),
        }
    }
}

impl FarmConfig {
    pub fn from_toml_str(src: &str) -> Result<Self> {
        let config: FarmConfig = toml::from_str(src).map_err(|e| {
            let field = e
                .span()
                .and_then(|span| src.get(span))
                .map(|s| s.trim().trim_matches('"').to_string())
                .filter(|s| !s.is_empty())
                .unwrap_or_else(|| "<document>".to_string());
            Error::config(field, e.message().to_string())
        })?;
        config.validate()?;
        Ok(config)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let src = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_toml_str(&src)
    }

    pub fn validate(&self) -> Result<()> {
        if self.population_size < 2 || !self.population_size.is_multiple_of(2) {
            return Err(Error::config(
                "population_size",
                format!("must be even and at least 2, got {}", self.population_size),
            ));
        }
        if self.genome_length < 1 {
            return Err(Error::config("genome_length", "must be at least 1"));
        }
        if self.step_limit < 1 {
            return Err(Error::config("step_limit", "must be at least 1"));
        }
        if self.test_input_count < 1 {
            return Err(Error::config("test_input_count", "must be at least 1"));
        }
        if self.termination.elite_target == Some(0) {
            return Err(Error::config(
                "termination.elite_target",
                "must be at least 1",
            ));
        }
        self.dataset.validate()?;
        self.fitness_params().validate()?;
        self.evolution.validate()
    }

    /// Fitness parameters with the farm-wide step limit applied.
    pub fn fitness_params(&self) -> FitnessParams {
        FitnessParams {
            step_limit: self.step_limit,
            ..self.fitness
        }
    }

    /// SHA-256 over every field that shapes the trajectory. Termination
    /// settings are left out so a run can be resumed with a later stop.
    pub fn digest(&self) -> String {
        let mut value = serde_json::to_value(self).expect("config serializes");
        if let Some(map) = value.as_object_mut() {
            map.remove("termination");
        }
        let canonical = serde_json::to_vec(&value).expect("config serializes");
        hex::encode(Sha256::digest(&canonical))
    }
}

pub const STREAM_NAMES: [&str; 7] = [
    "init",
    "dataset",
    "selection",
    "mutation",
    "crossover",
    "elite",
    "test_inputs",
];

/// The named random streams of one farm, each derived from the master seed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StreamSet {
    pub init: Stream,
    pub dataset: Stream,
    pub selection: Stream,
    pub mutation: Stream,
    pub crossover: Stream,
    pub elite: Stream,
    pub test_inputs: Stream,
}

impl StreamSet {
    pub fn derive(master_seed: u64) -> Self {
        let s = |name| Stream::named(master_seed, name);
        StreamSet {
            init: s("init"),
            dataset: s("dataset"),
            selection: s("selection"),
            mutation: s("mutation"),
            crossover: s("crossover"),
            elite: s("elite"),
            test_inputs: s("test_inputs"),
        }
    }

    pub fn to_map(&self) -> BTreeMap<String, Stream> {
        [
            ("init", self.init),
            ("dataset", self.dataset),
            ("selection", self.selection),
            ("mutation", self.mutation),
            ("crossover", self.crossover),
            ("elite", self.elite),
            ("test_inputs", self.test_inputs),
        ]
        .into_iter()
        .map(|(k, v)| (k.to_string(), v))
        .collect()
    }

    pub fn from_map(map: &BTreeMap<String, Stream>) -> Result<Self> {
        if let Some(extra) = map.keys().find(|k| !STREAM_NAMES.contains(&k.as_str())) {
            return Err(Error::parse(
                "rng_streams",
                format!("unknown stream `{extra}`"),
            ));
        }
        let get = |name: &str| {
            map.get(name)
                .copied()
                .ok_or_else(|| Error::parse("rng_streams", format!("missing stream `{name}`")))
        };
        Ok(StreamSet {
            init: get("init")?,
            dataset: get("dataset")?,
            selection: get("selection")?,
            mutation: get("mutation")?,
            crossover: get("crossover")?,
            elite: get("elite")?,
            test_inputs: get("test_inputs")?,
        })
    }
}

/// Append-only list of each completed generation's fittest program.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SeedList(Vec<Genome>);

impl SeedList {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_entries(entries: Vec<Genome>) -> Self {
        SeedList(entries)
    }

    pub fn entries(&self) -> &[Genome] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn push(&mut self, genome: Genome) {
        self.0.push(genome);
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FarmState {
    /// Number of completed generations.
    pub generation: u64,
    pub population: Vec<Genome>,
    /// Scores of the most recently evaluated population (the parents of
    /// `population`); empty before the first generation.
    pub scores: ScoreVector,
    pub seed_list: SeedList,
    pub elites: EliteLedger,
    pub test_inputs: TestInputs,
    pub streams: StreamSet,
}

/// What one generation did, for progress logging.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GenerationSummary {
    pub generation: u64,
    pub best_weak: f64,
    pub elite_added: bool,
}

/// Test inputs in the format of the dataset inputs: universal strings in
/// universal mode, fixed-length coin flips in fixed mode.
fn domain_test_inputs(config: &FarmConfig, rng: &mut Stream) -> Result<TestInputs> {
    match config.dataset.mode {
        DatasetMode::Universal => make_test_inputs(
            config.test_input_count,
            rng,
            config.dataset.universal_max_len,
        ),
        DatasetMode::Fixed => TestInputs::new(
            (0..config.test_input_count)
                .map(|_| BitString::random(rng, config.dataset.fixed_input_len))
                .collect(),
        ),
    }
}

pub fn init_farm(config: &FarmConfig) -> Result<FarmState> {
    config.validate()?;
    let mut streams = StreamSet::derive(config.master_seed);
    let population = (0..config.population_size)
        .map(|_| Genome::random(&mut streams.init, config.genome_length))
        .collect::<Result<Vec<_>>>()?;
    let test_inputs = domain_test_inputs(config, &mut streams.test_inputs)?;
    Ok(FarmState {
        generation: 0,
        population,
        scores: ScoreVector::default(),
        seed_list: SeedList::new(),
        elites: EliteLedger::new(),
        test_inputs,
        streams,
    })
}

/// Appends the genome with the largest weak score (lowest index on ties).
pub fn record_seed(
    population: &[Genome],
    scores: &ScoreVector,
    seed_list: &mut SeedList,
) -> Result<()> {
    let best = scores
        .fittest()
        .ok_or_else(|| Error::invalid("cannot record a seed from an unscored population"))?;
    let genome = population
        .get(best)
        .ok_or_else(|| Error::invalid("scores and population disagree in length"))?;
    seed_list.push(genome.clone());
    Ok(())
}

pub fn step_generation(state: &mut FarmState, config: &FarmConfig) -> Result<GenerationSummary> {
    let generation = state.generation + 1;
    let params = config.fitness_params();

    let dataset = generate_dataset(&config.dataset, &mut state.streams.dataset);
    let scores = score_population(&state.population, &dataset, &params)?;
    record_seed(&state.population, &scores, &mut state.seed_list)?;

    let trivial: Vec<bool> = state
        .population
        .iter()
        .map(Genome::is_syntactically_trivial)
        .collect();
    let elite_added = state
        .elites
        .maybe_add_elite(
            &state.population,
            &scores,
            &trivial,
            &state.test_inputs,
            config.step_limit,
            generation,
        )
        .is_some();

    let elite_genomes = state.elites.genomes();
    let streams = &mut state.streams;
    let mut rngs = OperatorRngs {
        selection: &mut streams.selection,
        mutation: &mut streams.mutation,
        crossover: &mut streams.crossover,
        elite: &mut streams.elite,
    };
    let next = next_generation(
        &state.population,
        &scores.weak,
        &elite_genomes,
        &config.evolution,
        &mut rngs,
    )?;

    let best_weak = scores.fittest().map(|i| scores.weak[i]).unwrap_or(1.0);
    state.population = next;
    state.scores = scores;
    state.generation = generation;
    Ok(GenerationSummary {
        generation,
        best_weak,
        elite_added,
    })
}

/// The last `n` seeds, oldest first. With `dedup`, walks back from the newest
/// seed and skips any whose signature was already taken.
pub fn export_seeds(
    seed_list: &SeedList,
    test_inputs: &TestInputs,
    step_limit: usize,
    n: usize,
    dedup: bool,
) -> Vec<Genome> {
    let entries = seed_list.entries();
    if !dedup {
        let start = entries.len().saturating_sub(n);
        return entries[start..].to_vec();
    }
    let mut seen = std::collections::HashSet::new();
    let mut picked = Vec::new();
    for genome in entries.iter().rev() {
        if picked.len() >= n {
            break;
        }
        if seen.insert(compute_signature(genome, test_inputs, step_limit)) {
            picked.push(genome.clone());
        }
    }
    picked.reverse();
    picked
}

/// Elites added per generation over the last `window` generations (clamped
/// to the number of completed generations).
pub fn progress_metric(elites: &EliteLedger, window: u64, current_generation: u64) -> f64 {
    let window = window.min(current_generation);
    if window == 0 {
        return 0.0;
    }
    let start = current_generation - window;
    let count = elites
        .entries()
        .iter()
        .filter(|e| e.generation_added > start && e.generation_added <= current_generation)
        .count();
    count as f64 / window as f64
}

pub fn should_stop(state: &FarmState, config: &FarmConfig) -> bool {
    state.generation >= config.termination.max_generations
        || config
            .termination
            .elite_target
            .is_some_and(|target| state.elites.len() >= target)
}

/// Runs (or resumes) the farm until a stop condition holds. `on_generation`
/// sees every completed generation.
pub fn run(
    config: &FarmConfig,
    snapshot_in: Option<&Path>,
    snapshot_out: Option<&Path>,
    mut on_generation: impl FnMut(&FarmState, &GenerationSummary),
) -> Result<FarmState> {
    config.validate()?;
    let mut state = match snapshot_in {
        Some(path) => snapshot::load_snapshot(path, config)?,
        None => init_farm(config)?,
    };
    while !should_stop(&state, config) {
        let summary = step_generation(&mut state, config)?;
        on_generation(&state, &summary);
    }
    if let Some(path) = snapshot_out {
        snapshot::save_snapshot(&state, config, path)?;
    }
    Ok(state)
}

pub fn progress_line(state: &FarmState, summary: &GenerationSummary) -> String {
    format!(
        "gen={} best={} elites={} seeds={}",
        summary.generation,
        summary.best_weak,
        state.elites.len(),
        state.seed_list.len()
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::elites::EliteEntry;

    fn small_config() -> FarmConfig {
        FarmConfig {
            population_size: 16,
            genome_length: 32,
            step_limit: 256,
            test_input_count: 8,
            master_seed: 3,
            dataset: DatasetConfig {
                num_examples: 4,
                fixed_input_len: 8,
                fixed_output_len: 4,
                ..Default::default()
            },
            termination: Termination {
                max_generations: 10,
                elite_target: None,
            },
            ..Default::default()
        }
    }

    #[test]
    fn init_shape_and_determinism() {
        let cfg = FarmConfig {
            population_size: 4,
            ..small_config()
        };
        let a = init_farm(&cfg).unwrap();
        assert_eq!(a.population.len(), 4);
        assert!(a.population.iter().all(|g| g.len() == 32));
        assert!(a.seed_list.is_empty());
        assert!(a.elites.is_empty());
        assert_eq!(a.generation, 0);
        assert_eq!(a, init_farm(&cfg).unwrap());
    }

    #[test]
    fn invalid_config_names_field() {
        let cfg = FarmConfig {
            population_size: 5,
            ..small_config()
        };
        match init_farm(&cfg) {
            Err(Error::Config { field, .. }) => assert_eq!(field, "population_size"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn stepping() {
        let cfg = small_config();
        let mut a = init_farm(&cfg).unwrap();
        let mut b = a.clone();
        step_generation(&mut a, &cfg).unwrap();
        assert_eq!(a.seed_list.len(), 1);
        assert_eq!(a.generation, 1);
        step_generation(&mut b, &cfg).unwrap();
        assert_eq!(a, b);
        for n in 2..=10 {
            step_generation(&mut a, &cfg).unwrap();
            assert_eq!(a.seed_list.len(), n);
            assert!(a.elites.len() <= n);
        }
    }

    #[test]
    fn seed_recording() {
        let pop: Vec<Genome> = (0..3).map(|i| Genome::new(vec![i]).unwrap()).collect();
        let mut seeds = SeedList::new();
        let s = ScoreVector::from_raw(vec![0.5, 1.0, 0.0], 0.125);
        assert_eq!(s.weak, vec![1.0, 1.125, 0.875]);
        record_seed(&pop, &s, &mut seeds).unwrap();
        assert_eq!(seeds.entries(), &pop[1..2]);
        record_seed(
            &pop,
            &ScoreVector::from_raw(vec![0.3; 3], 0.125),
            &mut seeds,
        )
        .unwrap();
        assert_eq!(seeds.len(), 2);
        assert_eq!(seeds.entries()[1], pop[0]);
    }

    #[test]
    fn seed_export() {
        let g = |c: &[u8]| Genome::new(c.to_vec()).unwrap();
        let (a, b, c) = (g(&[6, 7]), g(&[7]), g(&[6, 2, 7]));
        let seeds = SeedList::from_entries(vec![a.clone(), b.clone(), c.clone()]);
        let t = TestInputs::new(vec!["1".parse().unwrap(), "0".parse().unwrap()]).unwrap();
        assert_eq!(
            export_seeds(&seeds, &t, 100, 2, false),
            vec![b.clone(), c.clone()]
        );
        assert_eq!(export_seeds(&seeds, &t, 100, 10, false).len(), 3);

        // a and a_twin encode the same echo function.
        let a_twin = g(&[6, 0, 1, 7]);
        let seeds = SeedList::from_entries(vec![a.clone(), b.clone(), a_twin.clone()]);
        assert_eq!(
            export_seeds(&seeds, &t, 100, 3, true),
            vec![b.clone(), a_twin.clone()]
        );
        assert_eq!(export_seeds(&seeds, &t, 100, 1, true), vec![a_twin]);
        assert!(export_seeds(&SeedList::new(), &t, 100, 4, true).is_empty());
    }

    #[test]
    fn progress_rates() {
        let t = TestInputs::new(vec!["1".parse().unwrap()]).unwrap();
        let entry = |code: &[u8], generation| {
            let genome = Genome::new(code.to_vec()).unwrap();
            EliteEntry {
                signature: compute_signature(&genome, &t, 100),
                genome,
                generation_added: generation,
            }
        };
        assert_eq!(progress_metric(&EliteLedger::new(), 10, 10), 0.0);
        let ledger =
            EliteLedger::from_entries(vec![entry(&[6, 7], 5), entry(&[6, 2, 7], 9)]).unwrap();
        assert_eq!(progress_metric(&ledger, 10, 10), 0.2);
        assert_eq!(progress_metric(&ledger, 100, 10), 0.2);
        assert_eq!(progress_metric(&ledger, 5, 0), 0.0);
    }

    #[test]
    fn termination() {
        let cfg = FarmConfig {
            termination: Termination {
                max_generations: 0,
                elite_target: None,
            },
            ..small_config()
        };
        let state = run(&cfg, None, None, |_, _| {}).unwrap();
        assert_eq!(state, init_farm(&cfg).unwrap());

        let cfg = FarmConfig {
            termination: Termination {
                max_generations: 500,
                elite_target: Some(1),
            },
            ..small_config()
        };
        let mut elite_gens = Vec::new();
        let state = run(&cfg, None, None, |s, summary| {
            if summary.elite_added {
                elite_gens.push(s.generation);
            }
        })
        .unwrap();
        assert_eq!(state.elites.len(), 1);
        assert_eq!(elite_gens, vec![state.generation]);
    }

    #[test]
    fn config_file() {
        let cfg = FarmConfig::from_toml_str(
            r#"
            population_size = 8
            master_seed = 12
            [dataset]
            mode = "universal"
            universal_max_len = 16
            [termination]
            max_generations = 5
            "#,
        )
        .unwrap();
        assert_eq!(cfg.population_size, 8);
        assert_eq!(cfg.dataset.mode, DatasetMode::Universal);
        assert_eq!(cfg.termination.max_generations, 5);

        match FarmConfig::from_toml_str("population_size = 8\nbogus = 1\n") {
            Err(Error::Config { field, .. }) => assert_eq!(field, "bogus"),
            other => panic!("{other:?}"),
        }
        match FarmConfig::from_toml_str("[evolution]\ncrossover_rate = 0.9\n") {
            Err(Error::Config { field, .. }) => assert_eq!(field, "evolution.crossover_rate"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn digest_tracks_trajectory_fields() {
        let base = small_config();
        let d = base.digest();
        assert_eq!(d, small_config().digest());
        let mut other = base.clone();
        other.master_seed += 1;
        assert_ne!(other.digest(), d);
        let mut other = base.clone();
        other.evolution.mutation_rate = 0.01;
        assert_ne!(other.digest(), d);
        let mut other = base.clone();
        other.dataset.num_examples += 1;
        assert_ne!(other.digest(), d);
        let mut other = base;
        other.termination.max_generations += 1;
        assert_eq!(other.digest(), d);
    }
}
