use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::bail;
use clap::{Args, Parser, Subcommand};
use molts::pareto::{effective_gap, pareto_gap};
use molts::policy::{c1, c_total, m_min, optimism_probability_trial, regret_bound};
use molts::rng::seeded;
use molts::{
    effective_front, pareto_front, run_experiment, write_outputs, ExperimentConfig, PolicyConfig,
    RewardTable, RlsState, SampleCount,
};

#[derive(Debug, Parser)]
#[command(
    name = "molts",
    version,
    about = "Multi-objective linear contextual bandit simulator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run an experiment and write summary.csv, instance files and optional plots.
    Run(RunArgs),
    /// Print the Pareto and effective Pareto fronts and all gaps of a reward table.
    Fronts {
        /// Plain-text matrix: one arm per line, objectives separated by whitespace.
        file: PathBuf,
    },
    /// Monte-Carlo estimate of the joint-optimism probability on a fresh estimator.
    Optimism(OptimismArgs),
    /// Print the confidence radii and the regret bound curve.
    Bound(BoundArgs),
}

#[derive(Debug, Args)]
struct RunArgs {
    /// Experiment config file (flat key = value).
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Algorithm entry, e.g. mol-ts, mol-ts:m=1, mol-ucb, eps-greedy. Repeatable; replaces
    /// the config's list.
    #[arg(long = "algo")]
    algos: Vec<String>,
    #[arg(long)]
    rounds: Option<usize>,
    #[arg(long)]
    instances: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Samples per objective for every algorithm: auto or a positive integer.
    #[arg(long)]
    m: Option<String>,
    /// Write SVG plots.
    #[arg(long)]
    plots: bool,
    /// Run instances one after another.
    #[arg(long)]
    sequential: bool,
}

#[derive(Debug, Args)]
struct OptimismArgs {
    /// Number of objectives.
    #[arg(long = "L", default_value_t = 4)]
    objectives: usize,
    /// Samples per objective: auto or a positive integer.
    #[arg(long, default_value = "auto")]
    m: String,
    #[arg(long, default_value_t = 100_000)]
    trials: usize,
    #[arg(long, default_value_t = 5)]
    dim: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 0.15)]
    p: f64,
}

#[derive(Debug, Args)]
struct BoundArgs {
    #[arg(long, default_value_t = 10_000)]
    rounds: usize,
    #[arg(long, default_value_t = 5)]
    dim: usize,
    #[arg(long = "L", default_value_t = 4)]
    objectives: usize,
    #[arg(long, default_value = "auto")]
    m: String,
    #[arg(long, default_value_t = 1.0)]
    lambda: f64,
    #[arg(long, default_value_t = 0.05)]
    delta: f64,
    #[arg(long, default_value_t = 0.15)]
    p: f64,
    /// Largest per-round gap used in the additive term.
    #[arg(long, default_value_t = 2.0)]
    max_gap: f64,
    /// Number of evenly spaced rounds to print.
    #[arg(long, default_value_t = 10)]
    points: usize,
}

fn run(args: RunArgs) -> anyhow::Result<()> {
    let mut config = match &args.config {
        Some(path) => ExperimentConfig::load(path).map_err(input_error)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = args.seed {
        config.master_seed = seed;
    }
    if let Some(rounds) = args.rounds {
        config.horizon = rounds;
    }
    if let Some(instances) = args.instances {
        config.num_instances = instances;
    }
    if let Some(out) = args.out {
        config.output_dir = out;
    }
    if let Some(m) = &args.m {
        let m: SampleCount = m.parse()?;
        config.policy_defaults.num_samples = m;
        for spec in &mut config.algorithms {
            spec.policy.num_samples = m;
        }
    }
    if !args.algos.is_empty() {
        config.set_algorithms(&args.algos)?;
    }
    config.emit_plots |= args.plots;
    config.parallel &= !args.sequential;
    config.validate()?;

    eprintln!(
        "running {} instance(s) x {} round(s): K={} d={} L={} sigma={}",
        config.num_instances,
        config.horizon,
        config.num_arms,
        config.dim,
        config.num_objectives,
        config.noise_sigma
    );
    let outcome = run_experiment(&config)?;
    let written = write_outputs(&config, &outcome)?;

    println!(
        "{:<24} {:>14} {:>14}",
        "algorithm", "mean PR(T)", "mean EPR(T)"
    );
    for spec in &config.algorithms {
        let ledgers: Vec<_> = outcome
            .ledgers()
            .into_iter()
            .filter(|l| l.label == spec.label)
            .collect();
        if ledgers.is_empty() {
            continue;
        }
        let n = ledgers.len() as f64;
        let pr = ledgers.iter().map(|l| l.final_pareto_regret()).sum::<f64>() / n;
        let epr = ledgers
            .iter()
            .map(|l| l.final_effective_regret())
            .sum::<f64>()
            / n;
        println!("{:<24} {pr:>14.4} {epr:>14.4}", spec.label);
    }
    for path in &written {
        eprintln!("wrote {}", path.display());
    }
    if !outcome.failures.is_empty() {
        for f in &outcome.failures {
            eprintln!("instance {} failed: {}", f.instance, f.message);
        }
        return Err(RuntimeFailure(outcome.failures.len()).into());
    }
    Ok(())
}

#[derive(Debug)]
struct RuntimeFailure(usize);

impl std::fmt::Display for RuntimeFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{} instance(s) failed", self.0)
    }
}

impl std::error::Error for RuntimeFailure {}

fn fmt_set(members: &[usize]) -> String {
    let items: Vec<String> = members.iter().map(|a| a.to_string()).collect();
    format!("{{{}}}", items.join(", "))
}

fn fronts(file: PathBuf) -> anyhow::Result<()> {
    let text = std::fs::read_to_string(&file).map_err(|e| {
        input_error(molts::Error::Io {
            path: file.clone(),
            source: e,
        })
    })?;
    let table: RewardTable = text
        .parse()
        .map_err(|e: molts::Error| molts::Error::Parse {
            path: file.clone(),
            message: e.to_string(),
        })?;
    let pareto = pareto_front(&table);
    let effective = effective_front(&table)?;
    println!(
        "arms: {}, objectives: {}",
        table.num_arms(),
        table.num_objectives()
    );
    println!("pareto front: {}", fmt_set(&pareto.members));
    println!("effective front: {}", fmt_set(&effective.members));
    println!("{:<6} {:>12} {:>14}", "arm", "pareto_gap", "effective_gap");
    for a in 0..table.num_arms() {
        println!(
            "{a:<6} {:>12.6} {:>14.6}",
            pareto_gap(&table, a)?,
            effective_gap(&table, a)?
        );
    }
    Ok(())
}

fn optimism(args: OptimismArgs) -> anyhow::Result<()> {
    let config = PolicyConfig {
        num_samples: args.m.parse()?,
        optimism_p: args.p,
        ..PolicyConfig::default()
    };
    config.validate()?;
    if args.trials == 0 {
        bail!(molts::Error::Argument("trials must be at least 1".into()));
    }
    let m = config.resolved_samples(args.objectives)?;
    let state = RlsState::new(args.dim, args.objectives, config.regularizer)?;
    let context = vec![1.0 / (args.dim as f64).sqrt(); args.dim];
    let freq = optimism_probability_trial(
        &state,
        &context,
        &config,
        args.trials,
        &mut seeded(args.seed),
    )?;
    let sigma = (args.p * (1.0 - args.p) / args.trials as f64).sqrt();
    let threshold = args.p - 3.0 * sigma;
    println!("L = {}", args.objectives);
    println!("M = {m} (m_min = {})", m_min(args.objectives, args.p)?);
    println!("d = {}, trials = {}", args.dim, args.trials);
    println!("frequency = {freq:.6}");
    println!("threshold = {threshold:.6} (p - 3 sigma)");
    println!("{}", if freq >= threshold { "PASS" } else { "FAIL" });
    Ok(())
}

fn bound(args: BoundArgs) -> anyhow::Result<()> {
    let config = PolicyConfig {
        num_samples: args.m.parse()?,
        regularizer: args.lambda,
        delta: args.delta,
        optimism_p: args.p,
        horizon: args.rounds,
        ..PolicyConfig::default()
    };
    config.validate()?;
    if args.dim == 0 || args.objectives == 0 || args.points == 0 {
        bail!(molts::Error::Argument(
            "dim, L and points must be positive".into()
        ));
    }
    let (d, l, t) = (args.dim, args.objectives, args.rounds);
    println!("M = {}", config.resolved_samples(l)?);
    println!("c1(1) = {:.6}", c1(1, &config, d, l));
    println!("c1(T) = {:.6}", c1(t, &config, d, l));
    println!("c_T = {:.6}", c_total(&config, d, l, t)?);
    println!("{:>10} {:>16}", "round", "bound");
    let points = args.points.min(t);
    for i in 1..=points {
        let round = (i * t).div_ceil(points);
        println!(
            "{round:>10} {:>16.4}",
            regret_bound(&config, d, l, t, round, args.max_gap)?
        );
    }
    Ok(())
}

/// Unreadable input files are usage errors; I/O failures while writing results are not.
fn input_error(err: molts::Error) -> molts::Error {
    match err {
        molts::Error::Io { path, source } => {
            molts::Error::Config(format!("cannot read {}: {source}", path.display()))
        }
        other => other,
    }
}

fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<molts::Error>() {
        Some(e) if e.is_config() => 1,
        _ => 2,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let result = match cli.command {
        Command::Run(args) => run(args),
        Command::Fronts { file } => fronts(file),
        Command::Optimism(args) => optimism(args),
        Command::Bound(args) => bound(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
