//! `codefarm` command-line interface.
//!
//! Exit codes: 0 success, 2 usage or configuration error, 3 data or
//! snapshot error.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;

use codefarm::demo::{demo_report_format, run_demo, DemoConfig, DemoReport};
use codefarm::elites::EliteLedger;
use codefarm::farm::{self, export_seeds, progress_line, progress_metric, FarmConfig, SeedList};
use codefarm::replicator::{
    run_trace, variance_comparison, FitnessTrace, ReplicatorState, TraceStats, Winner,
};
use codefarm::snapshot::{read_document, SnapshotDocument};
use codefarm::vm::DEFAULT_STEP_LIMIT;
use codefarm::{elites::TestInputs, Error};

const EXIT_USAGE: u8 = 2;
const EXIT_DATA: u8 = 3;

#[derive(Debug, Parser)]
#[command(
    name = "codefarm",
    version,
    about = "Farm generic building blocks with genetic programming"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run or resume the farming process.
    Farm(FarmArgs),
    /// Reproduce the control-gene allele experiment.
    Demo(DemoArgs),
    /// Iterate the allele-frequency recurrence over a fitness trace.
    Replicator(ReplicatorArgs),
    /// Work with the seed list of a snapshot.
    Seeds {
        #[command(subcommand)]
        command: SeedsCommand,
    },
    /// Inspect snapshots.
    Snapshot {
        #[command(subcommand)]
        command: SnapshotCommand,
    },
    /// Elites found per generation over a recent window.
    Progress(ProgressArgs),
}

#[derive(Debug, Args)]
struct FarmArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    snapshot_in: Option<PathBuf>,
    #[arg(long)]
    snapshot_out: Option<PathBuf>,
    /// Overrides termination.max_generations.
    #[arg(long)]
    generations: Option<u64>,
    /// Overrides master_seed.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Debug, Args)]
struct DemoArgs {
    /// Seed of the first run; run i uses seed + i.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..))]
    runs: u64,
    /// Directory for per-run CSV files and an aggregate CSV.
    #[arg(long)]
    csv: Option<PathBuf>,
    /// Seed from OS entropy instead of --seed.
    #[arg(long, conflicts_with = "seed")]
    entropy: bool,
}

#[derive(Debug, Args)]
struct ReplicatorArgs {
    /// CSV trace: one column per allele, one row per generation.
    #[arg(long)]
    trace: PathBuf,
    /// Number of generations; the trace rows repeat cyclically.
    #[arg(long)]
    steps: Option<usize>,
    /// Comma-separated initial frequencies (default: uniform).
    #[arg(long)]
    initial: Option<String>,
}

#[derive(Debug, Subcommand)]
enum SeedsCommand {
    /// Print the most recent seeds as hex, one per line.
    Export(SeedsExportArgs),
}

#[derive(Debug, Args)]
struct SeedsExportArgs {
    #[arg(long)]
    snapshot: PathBuf,
    #[arg(long)]
    count: usize,
    /// Drop seeds whose signature repeats a more recent seed's.
    #[arg(long)]
    dedup: bool,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Config the snapshot was written with; checks the digest and supplies
    /// the step limit.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, conflicts_with = "config")]
    step_limit: Option<usize>,
}

#[derive(Debug, Subcommand)]
enum SnapshotCommand {
    /// Summarize a snapshot file.
    Info {
        #[arg(long)]
        file: PathBuf,
        /// Also check the snapshot against this config.
        #[arg(long)]
        config: Option<PathBuf>,
    },
}

#[derive(Debug, Args)]
struct ProgressArgs {
    #[arg(long)]
    snapshot: PathBuf,
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    window: u64,
}

/// A failure with its exit status.
struct Failure {
    code: u8,
    error: Error,
}

fn usage(error: Error) -> Failure {
    Failure {
        code: EXIT_USAGE,
        error,
    }
}

fn data(error: Error) -> Failure {
    Failure {
        code: EXIT_DATA,
        error,
    }
}

fn io_failure(path: &Path, source: io::Error) -> Error {
    Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn write_output(out: Option<&Path>, text: &str) -> Result<(), Failure> {
    match out {
        Some(path) => fs::write(path, text).map_err(|e| data(io_failure(path, e))),
        None => {
            let mut stdout = io::stdout().lock();
            stdout
                .write_all(text.as_bytes())
                .and_then(|_| stdout.flush())
                .map_err(|e| data(io_failure(Path::new("<stdout>"), e)))
        }
    }
}

fn cmd_farm(args: FarmArgs) -> Result<(), Failure> {
    let mut config = FarmConfig::from_file(&args.config).map_err(usage)?;
    if let Some(n) = args.generations {
        config.termination.max_generations = n;
    }
    if let Some(seed) = args.seed {
        config.master_seed = seed;
    }
    config.validate().map_err(usage)?;
    let stderr = io::stderr();
    let state = farm::run(
        &config,
        args.snapshot_in.as_deref(),
        args.snapshot_out.as_deref(),
        |state, summary| {
            let _ = writeln!(stderr.lock(), "{}", progress_line(state, summary));
        },
    )
    .map_err(|e| match e {
        Error::Config { .. } | Error::InvalidArgument(_) => usage(e),
        other => data(other),
    })?;
    let _ = writeln!(
        stderr.lock(),
        "finished at generation {} with {} elites and {} seeds",
        state.generation,
        state.elites.len(),
        state.seed_list.len()
    );
    Ok(())
}

fn cmd_demo(args: DemoArgs) -> Result<(), Failure> {
    let first_seed = if args.entropy {
        rand::random()
    } else {
        args.seed
    };
    let seeds: Vec<u64> = (0..args.runs).map(|i| first_seed.wrapping_add(i)).collect();
    let reports: Vec<DemoReport> = seeds
        .par_iter()
        .map(|&seed| {
            run_demo(&DemoConfig {
                seed,
                ..DemoConfig::default()
            })
        })
        .collect::<Result<_, _>>()
        .map_err(usage)?;

    let mut text = demo_report_format(&reports[0]);
    if reports.len() > 1 {
        text.push('\n');
        text.push_str("Run        Seed Allele:0 Allele:1\n");
        for (i, (seed, report)) in seeds.iter().zip(&reports).enumerate() {
            let (a0, a1) = report.averages();
            text.push_str(&format!("{i:>3} {seed:>11} {a0:>7}% {a1:>7}%\n"));
        }
        let (m0, m1) = mean_of_averages(&reports);
        text.push_str(&format!("Mean {:>10} {m0:>7.2}% {m1:>7.2}%\n", ""));
    }
    write_output(None, &text)?;

    if let Some(dir) = &args.csv {
        fs::create_dir_all(dir).map_err(|e| usage(io_failure(dir, e)))?;
        let mut aggregate = String::from("run,seed,allele0,allele1\n");
        for (i, (seed, report)) in seeds.iter().zip(&reports).enumerate() {
            let path = dir.join(format!("run-{i}.csv"));
            fs::write(&path, report.to_csv()).map_err(|e| data(io_failure(&path, e)))?;
            let (a0, a1) = report.averages();
            aggregate.push_str(&format!("{i},{seed},{a0},{a1}\n"));
        }
        let path = dir.join("aggregate.csv");
        fs::write(&path, aggregate).map_err(|e| data(io_failure(&path, e)))?;
    }
    Ok(())
}

fn mean_of_averages(reports: &[DemoReport]) -> (f64, f64) {
    let n = reports.len() as f64;
    let (s0, s1) = reports.iter().fold((0.0, 0.0), |(s0, s1), r| {
        let (a0, a1) = r.averages();
        (s0 + a0 as f64, s1 + a1 as f64)
    });
    (s0 / n, s1 / n)
}

fn parse_initial(text: &str) -> Result<ReplicatorState, Error> {
    let freqs = text
        .split(',')
        .enumerate()
        .map(|(i, s)| {
            s.trim().parse::<f64>().map_err(|_| Error::Parse {
                location: format!("--initial entry {}", i + 1),
                message: format!("not a number: {s:?}"),
            })
        })
        .collect::<Result<Vec<_>, _>>()?;
    ReplicatorState::new(freqs)
}

fn cmd_replicator(args: ReplicatorArgs) -> Result<(), Failure> {
    let file = fs::File::open(&args.trace).map_err(|e| usage(io_failure(&args.trace, e)))?;
    let trace = FitnessTrace::from_csv(file).map_err(|e| match e {
        Error::Parse { location, message } => usage(Error::Parse {
            location: format!("{}: {location}", args.trace.display()),
            message,
        }),
        other => usage(other),
    })?;
    if trace.is_empty() {
        return Err(usage(Error::InvalidArgument(format!(
            "{}: trace has no rows",
            args.trace.display()
        ))));
    }
    let trace = match args.steps {
        Some(steps) => trace.cycled(steps),
        None => trace,
    };
    let initial = match &args.initial {
        Some(text) => parse_initial(text).map_err(usage)?,
        None => ReplicatorState::uniform(trace.alleles()).map_err(usage)?,
    };
    let states = run_trace(&initial, &trace).map_err(usage)?;

    let alleles = initial.len();
    let mut text = String::from("generation");
    for j in 0..alleles {
        text.push_str(&format!(",x{j}"));
    }
    text.push('\n');
    for (t, s) in states.iter().enumerate() {
        text.push_str(&t.to_string());
        for x in s.frequencies() {
            text.push_str(&format!(",{x:.12}"));
        }
        text.push('\n');
    }

    if !trace.is_empty() {
        text.push_str("\nallele,arithmetic_mean,geometric_mean,variance\n");
        let stats = (0..alleles)
            .map(|j| TraceStats::of(&trace.column(j)))
            .collect::<Result<Vec<_>, _>>()
            .map_err(usage)?;
        for (j, s) in stats.iter().enumerate() {
            text.push_str(&format!(
                "{j},{:.12},{:.12},{:.12}\n",
                s.arithmetic_mean, s.geometric_mean, s.variance
            ));
        }
        let winner = if alleles == 2 {
            match variance_comparison(&trace.column(0), &trace.column(1))
                .map_err(usage)?
                .winner
            {
                Winner::A => Some(0),
                Winner::B => Some(1),
                Winner::Tie => None,
            }
        } else {
            let best = stats
                .iter()
                .map(|s| s.geometric_mean)
                .fold(f64::NEG_INFINITY, f64::max);
            let leaders: Vec<usize> = (0..alleles)
                .filter(|&j| stats[j].geometric_mean == best)
                .collect();
            (leaders.len() == 1).then(|| leaders[0])
        };
        match winner {
            Some(j) => text.push_str(&format!("predicted winner: allele {j}\n")),
            None => text.push_str("predicted winner: none (tie)\n"),
        }
    }
    write_output(None, &text)
}

fn load_config(path: &Path) -> Result<FarmConfig, Failure> {
    FarmConfig::from_file(path).map_err(usage)
}

fn read_snapshot(path: &Path, config: Option<&FarmConfig>) -> Result<SnapshotDocument, Failure> {
    let doc = read_document(path).map_err(data)?;
    if let Some(config) = config {
        doc.clone().into_state(config).map_err(data)?;
    }
    Ok(doc)
}

fn cmd_seeds(command: SeedsCommand) -> Result<(), Failure> {
    let SeedsCommand::Export(args) = command;
    let config = args.config.as_deref().map(load_config).transpose()?;
    let doc = read_snapshot(&args.snapshot, config.as_ref())?;
    let step_limit = config
        .as_ref()
        .map(|c| c.step_limit)
        .or(args.step_limit)
        .unwrap_or(DEFAULT_STEP_LIMIT);
    let test_inputs = TestInputs::new(doc.test_inputs).map_err(data)?;
    let seeds = SeedList::from_entries(doc.seed_list);
    let picked = export_seeds(&seeds, &test_inputs, step_limit, args.count, args.dedup);
    let text: String = picked.iter().map(|g| format!("{g}\n")).collect();
    write_output(args.out.as_deref(), &text)
}

fn cmd_snapshot(command: SnapshotCommand) -> Result<(), Failure> {
    let SnapshotCommand::Info { file, config } = command;
    let config = config.as_deref().map(load_config).transpose()?;
    let doc = read_snapshot(&file, config.as_ref())?;
    let text = format!(
        "version={}\ngeneration={}\npopulation={}\nseeds={}\nelites={}\ntest_inputs={}\nconfig_digest={}\n",
        doc.version,
        doc.generation,
        doc.population.len(),
        doc.seed_list.len(),
        doc.elites.len(),
        doc.test_inputs.len(),
        doc.config_digest
    );
    write_output(None, &text)
}

fn cmd_progress(args: ProgressArgs) -> Result<(), Failure> {
    let doc = read_snapshot(&args.snapshot, None)?;
    let ledger = EliteLedger::from_entries(doc.elites).map_err(data)?;
    let window = args.window.min(doc.generation);
    let rate = progress_metric(&ledger, args.window, doc.generation);
    let text = format!(
        "generation={} window={} elites={} rate={}\n",
        doc.generation,
        window,
        ledger.len(),
        rate
    );
    write_output(None, &text)
}

fn configure_threads() -> Result<(), Failure> {
    let Ok(value) = std::env::var("CODEFARM_THREADS") else {
        return Ok(());
    };
    let threads: usize = value.trim().parse().map_err(|_| {
        usage(Error::Config {
            field: "CODEFARM_THREADS".into(),
            message: format!("expected a thread count, got {value:?}"),
        })
    })?;
    // 0 lets rayon choose.
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| {
            usage(Error::Config {
                field: "CODEFARM_THREADS".into(),
                message: e.to_string(),
            })
        })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = configure_threads().and_then(|_| match cli.command {
        Command::Farm(args) => cmd_farm(args),
        Command::Demo(args) => cmd_demo(args),
        Command::Replicator(args) => cmd_replicator(args),
        Command::Seeds { command } => cmd_seeds(command),
        Command::Snapshot { command } => cmd_snapshot(command),
        Command::Progress(args) => cmd_progress(args),
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure { code, error }) => {
            eprintln!("codefarm: {error}");
            ExitCode::from(code)
        }
    }
}
