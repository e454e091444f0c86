//! Bandit policies: multi-objective linear Thompson sampling with optimistic multi-sample
//! evaluation, a per-objective UCB baseline, and ε-greedy. Also the confidence-radius and
//! sample-count formulas used by the policies and the regret bound.

use std::fmt;
use std::str::FromStr;

use rand::Rng;

use crate::env::ContextMatrix;
use crate::error::{Error, Result};
use crate::pareto::{effective_front, pareto_front, FrontKind, FrontSet, RewardTable};
use crate::rls::{dot, RlsState, SampleBlock};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Algorithm {
    MolTs,
    MolUcb,
    EpsGreedy,
}

impl Algorithm {
    pub fn name(self) -> &'static str {
        match self {
            Algorithm::MolTs => "mol-ts",
            Algorithm::MolUcb => "mol-ucb",
            Algorithm::EpsGreedy => "eps-greedy",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mol-ts" => Ok(Algorithm::MolTs),
            "mol-ucb" => Ok(Algorithm::MolUcb),
            "eps-greedy" => Ok(Algorithm::EpsGreedy),
            other => Err(Error::Config(format!(
                "unknown algorithm {other:?} (expected mol-ts, mol-ucb or eps-greedy)"
            ))),
        }
    }
}

/// Number of posterior samples per objective.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SampleCount {
    /// Resolve to [`m_min`] for the instance's number of objectives.
    Auto,
    Fixed(usize),
}

impl fmt::Display for SampleCount {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SampleCount::Auto => f.write_str("auto"),
            SampleCount::Fixed(m) => write!(f, "{m}"),
        }
    }
}

impl FromStr for SampleCount {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "auto" {
            return Ok(SampleCount::Auto);
        }
        match s.parse::<usize>() {
            Ok(m) if m >= 1 => Ok(SampleCount::Fixed(m)),
            _ => Err(Error::Config(format!(
                "sample count must be \"auto\" or a positive integer, got {s:?}"
            ))),
        }
    }
}

/// How the sampling scale (and the UCB width) is chosen each round.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ScaleMode {
    /// `c = c1(t)`.
    TimeVarying,
    Constant(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolicyConfig {
    pub algorithm: Algorithm,
    /// Ridge regularizer λ.
    pub regularizer: f64,
    /// Confidence level δ.
    pub delta: f64,
    /// Sub-Gaussian noise constant R.
    pub noise_bound: f64,
    pub num_samples: SampleCount,
    /// Per-sample optimism probability p.
    pub optimism_p: f64,
    pub scale_mode: ScaleMode,
    pub epsilon: f64,
    pub horizon: usize,
}

impl Default for PolicyConfig {
    fn default() -> Self {
        Self {
            algorithm: Algorithm::MolTs,
            regularizer: 1.0,
            delta: 0.05,
            noise_bound: 1.0,
            num_samples: SampleCount::Auto,
            optimism_p: 0.15,
            scale_mode: ScaleMode::TimeVarying,
            epsilon: 0.05,
            horizon: 10_000,
        }
    }
}

impl PolicyConfig {
    pub fn with_algorithm(algorithm: Algorithm) -> Self {
        Self {
            algorithm,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let open_unit = |v: f64| v > 0.0 && v < 1.0;
        if !(self.regularizer.is_finite() && self.regularizer > 0.0) {
            return Err(Error::Config(format!(
                "lambda must be positive, got {}",
                self.regularizer
            )));
        }
        if !open_unit(self.delta) {
            return Err(Error::Config(format!(
                "delta must lie in (0,1), got {}",
                self.delta
            )));
        }
        if !(self.noise_bound.is_finite() && self.noise_bound > 0.0) {
            return Err(Error::Config(format!(
                "noise bound R must be positive, got {}",
                self.noise_bound
            )));
        }
        if !open_unit(self.optimism_p) {
            return Err(Error::Config(format!(
                "p must lie in (0,1), got {}",
                self.optimism_p
            )));
        }
        if !(0.0..=1.0).contains(&self.epsilon) {
            return Err(Error::Config(format!(
                "epsilon must lie in [0,1], got {}",
                self.epsilon
            )));
        }
        if self.horizon == 0 {
            return Err(Error::Config("horizon must be at least 1".into()));
        }
        if self.num_samples == SampleCount::Fixed(0) {
            return Err(Error::Config("number of samples must be at least 1".into()));
        }
        if let ScaleMode::Constant(c) = self.scale_mode {
            if !(c.is_finite() && c >= 0.0) {
                return Err(Error::Config(format!(
                    "scale must be non-negative, got {c}"
                )));
            }
        }
        Ok(())
    }

    /// Concrete `M` for `num_objectives` objectives.
    pub fn resolved_samples(&self, num_objectives: usize) -> Result<usize> {
        match self.num_samples {
            SampleCount::Auto => m_min(num_objectives, self.optimism_p),
            SampleCount::Fixed(0) => {
                Err(Error::Config("number of samples must be at least 1".into()))
            }
            SampleCount::Fixed(m) => Ok(m),
        }
    }

    /// Sampling scale / UCB width at `round`.
    pub fn scale(&self, round: usize, dim: usize, num_objectives: usize) -> f64 {
        match self.scale_mode {
            ScaleMode::TimeVarying => c1(round, self, dim, num_objectives),
            ScaleMode::Constant(c) => c,
        }
    }
}

/// Samples per objective needed for joint optimism across `L` objectives:
/// `⌈1 − ln L / ln(1−p)⌉`, at least 1.
pub fn m_min(num_objectives: usize, p: f64) -> Result<usize> {
    if num_objectives == 0 {
        return Err(Error::Argument(
            "number of objectives must be at least 1".into(),
        ));
    }
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::Argument(format!("p must lie in (0,1), got {p}")));
    }
    let raw = 1.0 - (num_objectives as f64).ln() / (1.0 - p).ln();
    Ok((raw.ceil() as usize).max(1))
}

/// Confidence radius `R·sqrt(d·ln((1 + (t−1)/(λd)) / (δ/L))) + sqrt(λ)`.
pub fn c1(round: usize, config: &PolicyConfig, dim: usize, num_objectives: usize) -> f64 {
    let t = round.max(1) as f64;
    let d = dim as f64;
    let lambda = config.regularizer;
    let ratio = (1.0 + (t - 1.0) / (lambda * d)) / (config.delta / num_objectives as f64);
    config.noise_bound * (d * ratio.ln()).sqrt() + lambda.sqrt()
}

fn sampling_log_factor(
    config: &PolicyConfig,
    dim: usize,
    num_objectives: usize,
    horizon: usize,
) -> Result<f64> {
    let m = config.resolved_samples(num_objectives)? as f64;
    let d = dim as f64;
    let arg = 2.0 * num_objectives as f64 * m * d * horizon as f64 / config.delta;
    Ok((2.0 * d * arg.ln()).sqrt())
}

/// Sample-deviation radius `c1(t)·sqrt(2d·ln(2LMdT/δ))`.
pub fn c2(round: usize, config: &PolicyConfig, dim: usize, num_objectives: usize) -> Result<f64> {
    Ok(c1(round, config, dim, num_objectives)
        * sampling_log_factor(config, dim, num_objectives, config.horizon)?)
}

/// `c_T = c1(T)·(1 + sqrt(2d·ln(2LMdT/δ)))`.
pub fn c_total(
    config: &PolicyConfig,
    dim: usize,
    num_objectives: usize,
    horizon: usize,
) -> Result<f64> {
    Ok(c1(horizon, config, dim, num_objectives)
        * (1.0 + sampling_log_factor(config, dim, num_objectives, horizon)?))
}

/// High-probability effective Pareto regret bound after `round` rounds of a `horizon`-round run:
/// `(1 + 2/(p − δ/T))·c_T·sqrt(2·t·d·ln(1 + t/λ)) + 2δ·Δ_max`.
pub fn regret_bound(
    config: &PolicyConfig,
    dim: usize,
    num_objectives: usize,
    horizon: usize,
    round: usize,
    max_gap: f64,
) -> Result<f64> {
    let slack = config.optimism_p - config.delta / horizon as f64;
    if slack <= 0.0 {
        return Err(Error::Config(format!(
            "bound undefined: p = {} does not exceed delta/T = {}",
            config.optimism_p,
            config.delta / horizon as f64
        )));
    }
    let t = round as f64;
    let d = dim as f64;
    let ct = c_total(config, dim, num_objectives, horizon)?;
    let potential = (2.0 * t * d * (1.0 + t / config.regularizer).ln()).sqrt();
    Ok((1.0 + 2.0 / slack) * ct * potential + 2.0 * config.delta * max_gap)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Diagnostics {
    /// `‖x_a‖_{V⁻¹}` for every arm.
    pub norms: Vec<f64>,
    /// Sampling scale or UCB width; 0 for ε-greedy.
    pub scale: f64,
    /// Samples per objective; 0 for policies that do not sample.
    pub num_samples: usize,
    pub samples: Option<SampleBlock>,
    /// ε-greedy took the exploration branch.
    pub explored: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Decision {
    pub arm: usize,
    /// The front the arm was drawn from.
    pub front: FrontSet,
    /// Optimistic sampled values (TS), UCB indices, or plug-in estimates (ε-greedy).
    pub estimated_rewards: RewardTable,
    pub diagnostics: Diagnostics,
}

fn check_shapes(state: &RlsState, contexts: &ContextMatrix) -> Result<()> {
    if contexts.dim() != state.dim() {
        return Err(Error::Argument(format!(
            "contexts have dimension {}, state has {}",
            contexts.dim(),
            state.dim()
        )));
    }
    Ok(())
}

fn norms(state: &RlsState, contexts: &ContextMatrix) -> Vec<f64> {
    contexts
        .rows()
        .map(|x| state.mahalanobis_norm_unchecked(x))
        .collect()
}

fn plug_in_table(state: &RlsState, contexts: &ContextMatrix) -> Result<RewardTable> {
    let values = contexts
        .rows()
        .flat_map(|x| {
            state
                .estimates()
                .iter()
                .map(move |theta| dot(x, theta.as_slice()))
        })
        .collect();
    RewardTable::from_flat(contexts.num_arms(), state.num_objectives(), values)
}

fn uniform_member<R: Rng + ?Sized>(front: &FrontSet, rng: &mut R) -> usize {
    front.members[rng.random_range(0..front.len())]
}

/// One round of multi-objective Thompson sampling: draw `M` samples per objective, score each
/// arm by its best sampled value per objective, and pick uniformly from the effective front
/// of the scored table.
pub fn mol_ts_step<R: Rng + ?Sized>(
    state: &RlsState,
    contexts: &ContextMatrix,
    config: &PolicyConfig,
    rng: &mut R,
) -> Result<Decision> {
    check_shapes(state, contexts)?;
    let round = state.rounds_seen() + 1;
    let num_objectives = state.num_objectives();
    let m = config.resolved_samples(num_objectives)?;
    let scale = config.scale(round, state.dim(), num_objectives);
    let block = state.sample_block(scale, m, rng)?;
    let values = contexts
        .rows()
        .flat_map(|x| {
            (0..num_objectives)
                .map(|l| block.optimistic_value(l, x))
                .collect::<Vec<_>>()
        })
        .collect();
    let table = RewardTable::from_flat(contexts.num_arms(), num_objectives, values)?;
    let front = effective_front(&table)?;
    let arm = uniform_member(&front, rng);
    Ok(Decision {
        arm,
        front,
        estimated_rewards: table,
        diagnostics: Diagnostics {
            norms: norms(state, contexts),
            scale,
            num_samples: m,
            samples: Some(block),
            explored: false,
        },
    })
}

/// One round of the per-objective UCB baseline: index `xᵀθ̂ + c·‖x‖_{V⁻¹}`, uniform choice
/// from the Pareto front of the index table.
pub fn mol_ucb_step<R: Rng + ?Sized>(
    state: &RlsState,
    contexts: &ContextMatrix,
    config: &PolicyConfig,
    rng: &mut R,
) -> Result<Decision> {
    check_shapes(state, contexts)?;
    let round = state.rounds_seen() + 1;
    let num_objectives = state.num_objectives();
    let width = config.scale(round, state.dim(), num_objectives);
    let norms = norms(state, contexts);
    let values = contexts
        .rows()
        .zip(&norms)
        .flat_map(|(x, &n)| {
            state
                .estimates()
                .iter()
                .map(move |theta| dot(x, theta.as_slice()) + width * n)
        })
        .collect();
    let table = RewardTable::from_flat(contexts.num_arms(), num_objectives, values)?;
    let front = pareto_front(&table);
    let arm = uniform_member(&front, rng);
    Ok(Decision {
        arm,
        front,
        estimated_rewards: table,
        diagnostics: Diagnostics {
            norms,
            scale: width,
            num_samples: 0,
            samples: None,
            explored: false,
        },
    })
}

/// One round of ε-greedy: with probability ε a uniform arm, otherwise a uniform member of the
/// plug-in Pareto front. Always consumes one uniform draw, then one index draw.
pub fn eps_greedy_step<R: Rng + ?Sized>(
    state: &RlsState,
    contexts: &ContextMatrix,
    config: &PolicyConfig,
    rng: &mut R,
) -> Result<Decision> {
    check_shapes(state, contexts)?;
    let table = plug_in_table(state, contexts)?;
    let explored = rng.random::<f64>() < config.epsilon;
    let front = if explored {
        FrontSet {
            members: (0..contexts.num_arms()).collect(),
            kind: FrontKind::AllArms,
        }
    } else {
        pareto_front(&table)
    };
    let arm = uniform_member(&front, rng);
    Ok(Decision {
        arm,
        front,
        estimated_rewards: table,
        diagnostics: Diagnostics {
            norms: norms(state, contexts),
            scale: 0.0,
            num_samples: 0,
            samples: None,
            explored,
        },
    })
}

/// Dispatch on `config.algorithm`.
pub fn decide<R: Rng + ?Sized>(
    state: &RlsState,
    contexts: &ContextMatrix,
    config: &PolicyConfig,
    rng: &mut R,
) -> Result<Decision> {
    match config.algorithm {
        Algorithm::MolTs => mol_ts_step(state, contexts, config, rng),
        Algorithm::MolUcb => mol_ucb_step(state, contexts, config, rng),
        Algorithm::EpsGreedy => eps_greedy_step(state, contexts, config, rng),
    }
}

/// Fraction of `trials` sample blocks (scale `c1(t)`) in which every objective has a sample
/// with `xᵀ(θ̃ − θ̂) ≥ c1(t)·‖x‖_{V⁻¹}`.
pub fn optimism_probability_trial<R: Rng + ?Sized>(
    state: &RlsState,
    context: &[f64],
    config: &PolicyConfig,
    trials: usize,
    rng: &mut R,
) -> Result<f64> {
    if context.len() != state.dim() {
        return Err(Error::Argument(format!(
            "context has length {}, state has dimension {}",
            context.len(),
            state.dim()
        )));
    }
    if trials == 0 {
        return Err(Error::Argument("trials must be at least 1".into()));
    }
    let num_objectives = state.num_objectives();
    let m = config.resolved_samples(num_objectives)?;
    let scale = c1(state.rounds_seen() + 1, config, state.dim(), num_objectives);
    let threshold = scale * state.mahalanobis_norm_unchecked(context);
    let sampler = state.sampler(scale)?;
    let centers: Vec<f64> = state
        .estimates()
        .iter()
        .map(|theta| dot(context, theta.as_slice()))
        .collect();
    let mut hits = 0usize;
    for _ in 0..trials {
        let block = sampler.draw_block(m, rng)?;
        let optimistic = (0..num_objectives).all(|l| {
            block
                .objective(l)
                .iter()
                .any(|theta| dot(context, theta.as_slice()) - centers[l] >= threshold)
        });
        hits += usize::from(optimistic);
    }
    Ok(hits as f64 / trials as f64)
}
