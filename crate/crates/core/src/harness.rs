//! Experiment runner: policy-versus-environment rollouts, regret ledgers, aggregation across
//! instances, and CSV / SVG output.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Deserialize;

use crate::env::{gen_contexts, gen_env_from_rng, ContextMode, EnvSpec};
use crate::error::{Error, Result};
use crate::pareto::GapProfile;
use crate::policy::{decide, regret_bound, Algorithm, PolicyConfig, SampleCount, ScaleMode};
use crate::rls::RlsState;
use crate::rng::{stream_rng, Stream};

/// One algorithm entry of an experiment, labelled by its config spelling (e.g. `mol-ts:m=1`).
#[derive(Debug, Clone, PartialEq)]
pub struct AlgorithmSpec {
    pub label: String,
    pub policy: PolicyConfig,
}

impl AlgorithmSpec {
    /// Parse `name[:key=value,...]` on top of `base`. Keys: `m` (auto or a positive integer),
    /// `c` (time or a non-negative number), `eps`, `lambda`, `delta`.
    pub fn parse(spec: &str, base: &PolicyConfig) -> Result<Self> {
        let (name, overrides) = match spec.split_once(':') {
            Some((name, rest)) => (name, Some(rest)),
            None => (spec, None),
        };
        let mut policy = PolicyConfig {
            algorithm: name.trim().parse()?,
            ..base.clone()
        };
        for pair in overrides.into_iter().flat_map(|o| o.split(',')) {
            let (key, value) = pair.split_once('=').ok_or_else(|| {
                Error::Config(format!(
                    "algorithm option {pair:?} in {spec:?} is not key=value"
                ))
            })?;
            let number = || {
                value.trim().parse::<f64>().map_err(|_| {
                    Error::Config(format!(
                        "option {key} in {spec:?} needs a number, got {value:?}"
                    ))
                })
            };
            match key.trim() {
                "m" => policy.num_samples = value.trim().parse()?,
                "c" => policy.scale_mode = parse_scale(value.trim())?,
                "eps" => policy.epsilon = number()?,
                "lambda" => policy.regularizer = number()?,
                "delta" => policy.delta = number()?,
                other => {
                    return Err(Error::Config(format!(
                        "unknown algorithm option {other:?} in {spec:?}"
                    )))
                }
            }
        }
        policy.validate()?;
        Ok(Self {
            label: spec.trim().to_string(),
            policy,
        })
    }
}

fn parse_scale(text: &str) -> Result<ScaleMode> {
    if text == "time" || text == "time-varying" {
        return Ok(ScaleMode::TimeVarying);
    }
    text.parse::<f64>()
        .ok()
        .filter(|c| c.is_finite() && *c >= 0.0)
        .map(ScaleMode::Constant)
        .ok_or_else(|| {
            Error::Config(format!(
                "scale must be \"time\" or a non-negative number, got {text:?}"
            ))
        })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub master_seed: u64,
    pub num_instances: usize,
    pub horizon: usize,
    pub num_arms: usize,
    pub dim: usize,
    pub num_objectives: usize,
    pub noise_sigma: f64,
    pub context_mode: ContextMode,
    /// Shared policy settings that algorithm entries override.
    pub policy_defaults: PolicyConfig,
    pub algorithms: Vec<AlgorithmSpec>,
    pub output_dir: PathBuf,
    pub emit_plots: bool,
    /// Run instances on the rayon pool. Results do not depend on this flag.
    pub parallel: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let base = PolicyConfig::default();
        Self {
            master_seed: 0,
            num_instances: 10,
            horizon: 10_000,
            num_arms: 50,
            dim: 5,
            num_objectives: 4,
            noise_sigma: 1.0,
            context_mode: ContextMode::PerRound,
            policy_defaults: base.clone(),
            algorithms: [Algorithm::MolTs, Algorithm::MolUcb, Algorithm::EpsGreedy]
                .into_iter()
                .map(|a| AlgorithmSpec {
                    label: a.name().to_string(),
                    policy: PolicyConfig {
                        algorithm: a,
                        ..base.clone()
                    },
                })
                .collect(),
            output_dir: PathBuf::from("results"),
            emit_plots: false,
            parallel: true,
        }
    }
}

/// Flat key-value config file. Every key is optional; missing keys take the defaults above.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    seed: Option<u64>,
    instances: Option<usize>,
    rounds: Option<usize>,
    arms: Option<usize>,
    dim: Option<usize>,
    objectives: Option<usize>,
    noise_sigma: Option<f64>,
    context_mode: Option<String>,
    algorithms: Option<Vec<String>>,
    lambda: Option<f64>,
    delta: Option<f64>,
    noise_bound: Option<f64>,
    optimism_p: Option<f64>,
    epsilon: Option<f64>,
    samples: Option<toml::Value>,
    scale: Option<toml::Value>,
    out: Option<PathBuf>,
    plots: Option<bool>,
    parallel: Option<bool>,
}

fn value_text(value: &toml::Value) -> String {
    match value {
        toml::Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let raw: RawConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        let defaults = Self::default();
        let mut base = PolicyConfig::default();
        if let Some(v) = raw.lambda {
            base.regularizer = v;
        }
        if let Some(v) = raw.delta {
            base.delta = v;
        }
        if let Some(v) = raw.noise_bound {
            base.noise_bound = v;
        }
        if let Some(v) = raw.optimism_p {
            base.optimism_p = v;
        }
        if let Some(v) = raw.epsilon {
            base.epsilon = v;
        }
        if let Some(v) = &raw.samples {
            base.num_samples = value_text(v).parse::<SampleCount>()?;
        }
        if let Some(v) = &raw.scale {
            base.scale_mode = parse_scale(&value_text(v))?;
        }
        let algorithms = match raw.algorithms {
            Some(list) => list
                .iter()
                .map(|s| AlgorithmSpec::parse(s, &base))
                .collect::<Result<Vec<_>>>()?,
            None => ["mol-ts", "mol-ucb", "eps-greedy"]
                .iter()
                .map(|s| AlgorithmSpec::parse(s, &base))
                .collect::<Result<Vec<_>>>()?,
        };
        let config = Self {
            master_seed: raw.seed.unwrap_or(defaults.master_seed),
            num_instances: raw.instances.unwrap_or(defaults.num_instances),
            horizon: raw.rounds.unwrap_or(defaults.horizon),
            num_arms: raw.arms.unwrap_or(defaults.num_arms),
            dim: raw.dim.unwrap_or(defaults.dim),
            num_objectives: raw.objectives.unwrap_or(defaults.num_objectives),
            noise_sigma: raw.noise_sigma.unwrap_or(defaults.noise_sigma),
            context_mode: match raw.context_mode {
                Some(m) => m.parse()?,
                None => defaults.context_mode,
            },
            policy_defaults: base,
            algorithms,
            output_dir: raw.out.unwrap_or(defaults.output_dir),
            emit_plots: raw.plots.unwrap_or(defaults.emit_plots),
            parallel: raw.parallel.unwrap_or(defaults.parallel),
        };
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text).map_err(|e| match e {
            Error::Config(msg) => Error::parse(path, msg),
            other => other,
        })
    }

    pub fn validate(&self) -> Result<()> {
        if self.horizon == 0 {
            return Err(Error::Config("rounds must be at least 1".into()));
        }
        if self.num_instances == 0 {
            return Err(Error::Config("instances must be at least 1".into()));
        }
        if self.num_arms == 0 || self.dim == 0 || self.num_objectives == 0 {
            return Err(Error::Config(
                "arms, dim and objectives must be positive".into(),
            ));
        }
        if !(self.noise_sigma.is_finite() && self.noise_sigma >= 0.0) {
            return Err(Error::Config("noise_sigma must be non-negative".into()));
        }
        if self.algorithms.is_empty() {
            return Err(Error::Config("at least one algorithm is required".into()));
        }
        let mut labels: Vec<&str> = self.algorithms.iter().map(|a| a.label.as_str()).collect();
        labels.sort_unstable();
        if labels.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::Config("algorithm labels must be distinct".into()));
        }
        for spec in &self.algorithms {
            spec.policy.validate()?;
        }
        Ok(())
    }

    /// Replace the algorithm list, parsing each entry over `policy_defaults`.
    pub fn set_algorithms<S: AsRef<str>>(&mut self, specs: &[S]) -> Result<()> {
        self.algorithms = specs
            .iter()
            .map(|s| AlgorithmSpec::parse(s.as_ref(), &self.policy_defaults))
            .collect::<Result<Vec<_>>>()?;
        Ok(())
    }

    /// Policy of `spec` with the experiment horizon.
    pub fn policy_for(&self, spec: &AlgorithmSpec) -> PolicyConfig {
        PolicyConfig {
            horizon: self.horizon,
            ..spec.policy.clone()
        }
    }

    /// The environment of instance `instance_index`.
    pub fn environment(&self, instance_index: usize) -> Result<EnvSpec> {
        let mut rng = stream_rng(self.master_seed, instance_index as u64, Stream::Environment);
        gen_env_from_rng(
            &mut rng,
            self.num_arms,
            self.dim,
            self.num_objectives,
            self.noise_sigma,
            self.context_mode,
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RoundRecord {
    pub round: usize,
    pub arm: usize,
    pub pareto_gap: f64,
    pub effective_gap: f64,
    pub cum_pareto: f64,
    pub cum_effective: f64,
    /// Cumulative true mean reward per objective.
    pub cum_reward: Vec<f64>,
    /// `‖x_{a_t}‖²` in the inverse Gram norm before the update.
    pub potential: f64,
    /// Sampling scale / width used this round.
    pub scale: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegretLedger {
    pub label: String,
    pub algorithm: Algorithm,
    pub instance: usize,
    pub records: Vec<RoundRecord>,
    /// Largest true effective gap over all rounds and arms.
    pub max_gap: f64,
    /// Regret bound at every round, computed with this ledger's policy and `max_gap`.
    pub bound: Vec<f64>,
}

impl RegretLedger {
    pub fn horizon(&self) -> usize {
        self.records.len()
    }

    pub fn final_effective_regret(&self) -> f64 {
        self.records.last().map_or(0.0, |r| r.cum_effective)
    }

    pub fn final_pareto_regret(&self) -> f64 {
        self.records.last().map_or(0.0, |r| r.cum_pareto)
    }

    /// Check the ledger invariants: nondecreasing cumulatives, `Δ^PR ≤ Δ^EPR` per round, the
    /// elliptical potential bound (λ ≥ 1), and, for time-varying MOL-TS, the regret bound.
    pub fn check(&self, dim: usize, policy: &PolicyConfig) -> Result<()> {
        let fail = |what: String| {
            Err(Error::Invariant(format!(
                "{} instance {}: {what}",
                self.label, self.instance
            )))
        };
        let mut prev_pr = 0.0;
        let mut prev_epr = 0.0;
        let mut potential = 0.0;
        for r in &self.records {
            if !(r.pareto_gap >= 0.0 && r.pareto_gap <= r.effective_gap) {
                return fail(format!(
                    "round {}: pareto gap {} exceeds effective gap {}",
                    r.round, r.pareto_gap, r.effective_gap
                ));
            }
            if r.cum_pareto < prev_pr || r.cum_effective < prev_epr {
                return fail(format!("round {}: cumulative regret decreased", r.round));
            }
            prev_pr = r.cum_pareto;
            prev_epr = r.cum_effective;
            potential += r.potential;
        }
        if policy.regularizer >= 1.0 {
            let cap = 2.0 * dim as f64 * (1.0 + self.horizon() as f64 / policy.regularizer).ln();
            if potential > cap {
                return fail(format!("elliptical potential {potential} exceeds {cap}"));
            }
        }
        if policy.algorithm == Algorithm::MolTs && policy.scale_mode == ScaleMode::TimeVarying {
            for (r, b) in self.records.iter().zip(&self.bound) {
                if r.cum_effective > *b {
                    return fail(format!(
                        "round {}: effective regret {} exceeds the bound {b}",
                        r.round, r.cum_effective
                    ));
                }
            }
        }
        Ok(())
    }
}

/// All ledgers of one instance, in config order.
#[derive(Debug, Clone, PartialEq)]
pub struct InstanceRun {
    pub instance: usize,
    pub env: EnvSpec,
    pub ledgers: Vec<RegretLedger>,
}

struct Runner {
    label: String,
    policy: PolicyConfig,
    state: RlsState,
    policy_rng: crate::rng::SimRng,
    noise_rng: crate::rng::SimRng,
    records: Vec<RoundRecord>,
    cum_pr: f64,
    cum_epr: f64,
    cum_reward: Vec<f64>,
}

/// Run every configured algorithm on instance `instance_index`. All algorithms see the same
/// environment, the same contexts and the same per-round noise stream; each has its own copy
/// of the policy stream. Regret is scored against the true table.
pub fn run_instance(config: &ExperimentConfig, instance_index: usize) -> Result<InstanceRun> {
    config.validate()?;
    let env = config.environment(instance_index)?;
    let seed = config.master_seed;
    let idx = instance_index as u64;
    let mut runners = config
        .algorithms
        .iter()
        .map(|spec| {
            let policy = config.policy_for(spec);
            Ok(Runner {
                label: spec.label.clone(),
                state: RlsState::new(config.dim, config.num_objectives, policy.regularizer)?,
                policy,
                policy_rng: stream_rng(seed, idx, Stream::Policy),
                noise_rng: stream_rng(seed, idx, Stream::Noise),
                records: Vec::with_capacity(config.horizon),
                cum_pr: 0.0,
                cum_epr: 0.0,
                cum_reward: vec![0.0; config.num_objectives],
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let mut context_rng = stream_rng(seed, idx, Stream::Contexts);
    let mut max_gap: f64 = 0.0;
    for t in 1..=config.horizon {
        let outcome = gen_contexts(&env, t, &mut context_rng);
        let profile = GapProfile::compute(&outcome.true_table)?;
        max_gap = max_gap.max(profile.max_effective_gap());
        for runner in runners.iter_mut() {
            let decision = decide(
                &runner.state,
                &outcome.contexts,
                &runner.policy,
                &mut runner.policy_rng,
            )?;
            let arm = decision.arm;
            let pareto_gap = profile.pareto_gaps[arm];
            let effective_gap = profile.effective_gaps[arm];
            runner.cum_pr += pareto_gap;
            runner.cum_epr += effective_gap;
            for (acc, mu) in runner
                .cum_reward
                .iter_mut()
                .zip(outcome.true_table.row(arm))
            {
                *acc += mu;
            }
            let reward = outcome.pull(arm, &mut runner.noise_rng)?;
            let norm = decision.diagnostics.norms[arm];
            runner.state.update(outcome.contexts.row(arm), &reward)?;
            runner.records.push(RoundRecord {
                round: t,
                arm,
                pareto_gap,
                effective_gap,
                cum_pareto: runner.cum_pr,
                cum_effective: runner.cum_epr,
                cum_reward: runner.cum_reward.clone(),
                potential: norm * norm,
                scale: decision.diagnostics.scale,
            });
        }
    }
    let ledgers = runners
        .into_iter()
        .map(|runner| {
            let bound = (1..=config.horizon)
                .map(|t| {
                    regret_bound(
                        &runner.policy,
                        config.dim,
                        config.num_objectives,
                        config.horizon,
                        t,
                        max_gap,
                    )
                })
                .collect::<Result<Vec<_>>>()?;
            let ledger = RegretLedger {
                label: runner.label,
                algorithm: runner.policy.algorithm,
                instance: instance_index,
                records: runner.records,
                max_gap,
                bound,
            };
            ledger.check(config.dim, &runner.policy)?;
            Ok(ledger)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(InstanceRun {
        instance: instance_index,
        env,
        ledgers,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct InstanceFailure {
    pub instance: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentOutcome {
    /// Successful instances in index order.
    pub runs: Vec<InstanceRun>,
    pub failures: Vec<InstanceFailure>,
}

impl ExperimentOutcome {
    /// Ledgers of every successful instance, instance-major.
    pub fn ledgers(&self) -> Vec<&RegretLedger> {
        self.runs.iter().flat_map(|r| r.ledgers.iter()).collect()
    }
}

/// Run all instances. A failing instance is recorded and the others continue.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentOutcome> {
    config.validate()?;
    let run = |i: usize| run_instance(config, i);
    let results: Vec<Result<InstanceRun>> = if config.parallel {
        (0..config.num_instances).into_par_iter().map(run).collect()
    } else {
        (0..config.num_instances).map(run).collect()
    };
    let mut runs = Vec::new();
    let mut failures = Vec::new();
    for (instance, result) in results.into_iter().enumerate() {
        match result {
            Ok(r) => runs.push(r),
            Err(e) => failures.push(InstanceFailure {
                instance,
                message: e.to_string(),
            }),
        }
    }
    Ok(ExperimentOutcome { runs, failures })
}

/// Mean and standard deviation of one metric for one algorithm, per round.
#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub algo: String,
    pub metric: String,
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Summary {
    pub horizon: usize,
    pub series: Vec<Series>,
}

impl Summary {
    pub fn get(&self, algo: &str, metric: &str) -> Option<&Series> {
        self.series
            .iter()
            .find(|s| s.algo == algo && s.metric == metric)
    }

    pub fn algorithms(&self) -> Vec<&str> {
        let mut out: Vec<&str> = Vec::new();
        for s in &self.series {
            if !out.contains(&s.algo.as_str()) {
                out.push(&s.algo);
            }
        }
        out
    }

    pub fn metrics(&self) -> Vec<&str> {
        let mut out: Vec<&str> = Vec::new();
        for s in &self.series {
            if !out.contains(&s.metric.as_str()) {
                out.push(&s.metric);
            }
        }
        out
    }
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

fn ledger_metric(ledger: &RegretLedger, metric: &Metric, round: usize) -> f64 {
    match metric {
        Metric::Pareto => ledger.records[round].cum_pareto,
        Metric::Effective => ledger.records[round].cum_effective,
        Metric::Reward(l) => ledger.records[round].cum_reward[*l],
        Metric::Bound => ledger.bound[round],
    }
}

enum Metric {
    Pareto,
    Effective,
    Reward(usize),
    Bound,
}

impl Metric {
    fn name(&self) -> String {
        match self {
            Metric::Pareto => "pr".into(),
            Metric::Effective => "epr".into(),
            Metric::Reward(l) => format!("reward_obj_{}", l + 1),
            Metric::Bound => "bound".into(),
        }
    }
}

/// Per-round mean and population standard deviation across instances of cumulative PR, EPR,
/// each objective's cumulative reward, and the bound curve. Algorithms keep first-appearance
/// order.
pub fn aggregate<'a, I>(ledgers: I) -> Result<Summary>
where
    I: IntoIterator<Item = &'a RegretLedger>,
{
    let ledgers: Vec<&RegretLedger> = ledgers.into_iter().collect();
    let first = ledgers
        .first()
        .ok_or_else(|| Error::Argument("aggregate needs at least one ledger".into()))?;
    let horizon = first.horizon();
    let num_objectives = first.records.first().map_or(0, |r| r.cum_reward.len());
    if ledgers.iter().any(|l| l.horizon() != horizon) {
        return Err(Error::Argument("ledgers have different horizons".into()));
    }
    if ledgers.iter().any(|l| {
        l.bound.len() != horizon
            || l.records
                .iter()
                .any(|r| r.cum_reward.len() != num_objectives)
    }) {
        return Err(Error::Argument("ledgers have inconsistent shapes".into()));
    }
    let mut order: Vec<&str> = Vec::new();
    let mut groups: BTreeMap<&str, Vec<&RegretLedger>> = BTreeMap::new();
    for l in &ledgers {
        if !order.contains(&l.label.as_str()) {
            order.push(&l.label);
        }
        groups.entry(&l.label).or_default().push(l);
    }
    let mut metrics = vec![Metric::Pareto, Metric::Effective];
    metrics.extend((0..num_objectives).map(Metric::Reward));
    metrics.push(Metric::Bound);
    let mut series = Vec::new();
    for algo in order {
        let group = &groups[algo];
        for metric in &metrics {
            let mut mean = Vec::with_capacity(horizon);
            let mut std = Vec::with_capacity(horizon);
            let mut column = Vec::with_capacity(group.len());
            for t in 0..horizon {
                column.clear();
                column.extend(group.iter().map(|l| ledger_metric(l, metric, t)));
                let (m, s) = mean_std(&column);
                mean.push(m);
                std.push(s);
            }
            series.push(Series {
                algo: algo.to_string(),
                metric: metric.name(),
                mean,
                std,
            });
        }
    }
    Ok(Summary { horizon, series })
}

pub const CSV_HEADER: [&str; 5] = ["round", "algo", "metric", "mean", "std"];

/// Write `round,algo,metric,mean,std`, round-major. Floats use the shortest representation
/// that parses back to the same value.
pub fn emit_csv(summary: &Summary, path: &Path) -> Result<()> {
    let mut writer = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
    writer
        .write_record(CSV_HEADER)
        .map_err(|e| csv_error(path, e))?;
    for t in 0..summary.horizon {
        let round = (t + 1).to_string();
        for s in &summary.series {
            writer
                .write_record([
                    round.as_str(),
                    &s.algo,
                    &s.metric,
                    &s.mean[t].to_string(),
                    &s.std[t].to_string(),
                ])
                .map_err(|e| csv_error(path, e))?;
        }
    }
    writer.flush().map_err(|e| Error::io(path, e))
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    if e.is_io_error() {
        match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::io(path, io),
            _ => unreachable!("checked is_io_error"),
        }
    } else {
        Error::parse(path, e)
    }
}

/// Inverse of [`emit_csv`].
pub fn parse_csv(path: &Path) -> Result<Summary> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| csv_error(path, e))?;
    let header = reader.headers().map_err(|e| csv_error(path, e))?.clone();
    if header.iter().ne(CSV_HEADER) {
        return Err(Error::parse(path, format!("unexpected header {header:?}")));
    }
    let mut index: Vec<(String, String)> = Vec::new();
    let mut series: Vec<Series> = Vec::new();
    let mut horizon = 0;
    for (line, record) in reader.records().enumerate() {
        let record = record.map_err(|e| csv_error(path, e))?;
        let bad = |what: &str| Error::parse(path, format!("row {}: {what}", line + 2));
        let round: usize = record[0].parse().map_err(|_| bad("bad round"))?;
        let mean: f64 = record[3].parse().map_err(|_| bad("bad mean"))?;
        let std: f64 = record[4].parse().map_err(|_| bad("bad std"))?;
        let key = (record[1].to_string(), record[2].to_string());
        let pos = match index.iter().position(|k| *k == key) {
            Some(p) => p,
            None => {
                index.push(key.clone());
                series.push(Series {
                    algo: key.0,
                    metric: key.1,
                    mean: Vec::new(),
                    std: Vec::new(),
                });
                series.len() - 1
            }
        };
        let s = &mut series[pos];
        if round != s.mean.len() + 1 {
            return Err(bad("rounds out of order"));
        }
        s.mean.push(mean);
        s.std.push(std);
        horizon = horizon.max(round);
    }
    if series.iter().any(|s| s.mean.len() != horizon) {
        return Err(Error::parse(path, "series have different lengths"));
    }
    Ok(Summary { horizon, series })
}

const PALETTE: [plotters::style::RGBColor; 6] = [
    plotters::style::RGBColor(31, 119, 180),
    plotters::style::RGBColor(214, 39, 40),
    plotters::style::RGBColor(44, 160, 44),
    plotters::style::RGBColor(148, 103, 189),
    plotters::style::RGBColor(255, 127, 14),
    plotters::style::RGBColor(140, 86, 75),
];

const MAX_PLOT_POINTS: usize = 500;

/// One SVG per metric (`<dir>/<metric>.svg`): a line per algorithm with a shaded ±1σ band.
pub fn emit_plots(summary: &Summary, dir: &Path) -> Result<Vec<PathBuf>> {
    use plotters::prelude::*;

    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let step = summary.horizon.div_ceil(MAX_PLOT_POINTS).max(1);
    let mut written = Vec::new();
    for metric in summary.metrics() {
        let path = dir.join(format!("{metric}.svg"));
        let series: Vec<&Series> = summary
            .series
            .iter()
            .filter(|s| s.metric == metric)
            .collect();
        let rounds: Vec<usize> = (0..summary.horizon)
            .step_by(step)
            .chain(summary.horizon.checked_sub(1))
            .collect::<std::collections::BTreeSet<_>>()
            .into_iter()
            .collect();
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for s in &series {
            for &t in &rounds {
                lo = lo.min(s.mean[t] - s.std[t]);
                hi = hi.max(s.mean[t] + s.std[t]);
            }
        }
        if !(lo.is_finite() && hi.is_finite()) {
            lo = 0.0;
            hi = 1.0;
        }
        if hi - lo < 1e-12 {
            hi = lo + 1.0;
        }
        let draw = || -> std::result::Result<(), Box<dyn std::error::Error>> {
            let root = SVGBackend::new(&path, (800, 500)).into_drawing_area();
            root.fill(&WHITE)?;
            let mut chart = ChartBuilder::on(&root)
                .caption(metric, ("sans-serif", 24))
                .margin(12)
                .x_label_area_size(40)
                .y_label_area_size(70)
                .build_cartesian_2d(1f64..summary.horizon.max(2) as f64, lo..hi)?;
            chart
                .configure_mesh()
                .x_desc("round")
                .y_desc(metric)
                .draw()?;
            for (i, s) in series.iter().enumerate() {
                let color = PALETTE[i % PALETTE.len()];
                let upper = rounds
                    .iter()
                    .map(|&t| ((t + 1) as f64, s.mean[t] + s.std[t]));
                let lower = rounds
                    .iter()
                    .rev()
                    .map(|&t| ((t + 1) as f64, s.mean[t] - s.std[t]));
                chart.draw_series(std::iter::once(Polygon::new(
                    upper.chain(lower).collect::<Vec<_>>(),
                    color.mix(0.2).filled(),
                )))?;
                chart
                    .draw_series(LineSeries::new(
                        rounds.iter().map(|&t| ((t + 1) as f64, s.mean[t])),
                        color.stroke_width(2),
                    ))?
                    .label(s.algo.clone())
                    .legend(move |(x, y)| {
                        PathElement::new(vec![(x, y), (x + 20, y)], color.stroke_width(2))
                    });
            }
            chart
                .configure_series_labels()
                .background_style(WHITE.mix(0.8))
                .border_style(BLACK)
                .position(SeriesLabelPosition::UpperLeft)
                .draw()?;
            root.present()?;
            Ok(())
        };
        draw().map_err(|e| Error::parse(&path, format!("plot failed: {e}")))?;
        written.push(path);
    }
    Ok(written)
}

/// Write `summary.csv`, one `instances/instance_<i>.json` per successful instance, and, when
/// enabled, `plots/<metric>.svg`. Returns the paths written.
pub fn write_outputs(
    config: &ExperimentConfig,
    outcome: &ExperimentOutcome,
) -> Result<Vec<PathBuf>> {
    let dir = &config.output_dir;
    let instances = dir.join("instances");
    fs::create_dir_all(&instances).map_err(|e| Error::io(&instances, e))?;
    let mut written = Vec::new();
    for run in &outcome.runs {
        let path = instances.join(format!("instance_{}.json", run.instance));
        run.env.save(&path)?;
        written.push(path);
    }
    let summary = if outcome.runs.is_empty() {
        Summary::default()
    } else {
        aggregate(outcome.ledgers())?
    };
    let csv_path = dir.join("summary.csv");
    emit_csv(&summary, &csv_path)?;
    written.push(csv_path);
    if config.emit_plots {
        written.extend(emit_plots(&summary, &dir.join("plots"))?);
    }
    Ok(written)
}
