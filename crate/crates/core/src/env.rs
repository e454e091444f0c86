//! Synthetic multi-objective linear contextual bandit instances.
//!
//! Hidden parameters are uniform on the unit sphere; contexts are uniform on the unit ball;
//! rewards are `xᵀθ*⁽ℓ⁾` plus independent zero-mean Gaussian noise per objective.

use std::path::Path;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pareto::RewardTable;
use crate::rls::dot;
use crate::rng::{stream_rng, SimRng, Stream};

/// `K × d` matrix of per-arm context vectors, row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContextMatrix {
    num_arms: usize,
    dim: usize,
    data: Vec<f64>,
}

impl ContextMatrix {
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self> {
        let dim = rows
            .first()
            .ok_or_else(|| Error::Argument("context matrix needs at least one arm".into()))?
            .len();
        if dim == 0 {
            return Err(Error::Argument(
                "contexts must have positive dimension".into(),
            ));
        }
        let num_arms = rows.len();
        let mut data = Vec::with_capacity(num_arms * dim);
        for (a, row) in rows.into_iter().enumerate() {
            if row.len() != dim {
                return Err(Error::Argument(format!(
                    "context {a} has length {}, expected {dim}",
                    row.len()
                )));
            }
            data.extend(row);
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::Argument(
                "contexts contain non-finite entries".into(),
            ));
        }
        Ok(Self {
            num_arms,
            dim,
            data,
        })
    }

    pub fn num_arms(&self) -> usize {
        self.num_arms
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row(&self, arm: usize) -> &[f64] {
        &self.data[arm * self.dim..(arm + 1) * self.dim]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.dim)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ContextMode {
    /// Fresh contexts every round.
    PerRound,
    /// Round-1 contexts reused for the whole run (the non-contextual linear setting).
    Fixed,
}

impl std::str::FromStr for ContextMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "per-round" => Ok(ContextMode::PerRound),
            "fixed" => Ok(ContextMode::Fixed),
            other => Err(Error::Config(format!(
                "unknown context mode {other:?} (expected per-round or fixed)"
            ))),
        }
    }
}

/// A problem instance. Serializes to JSON for replay.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvSpec {
    pub num_arms: usize,
    pub dim: usize,
    pub num_objectives: usize,
    /// One unit-norm parameter vector per objective.
    pub true_params: Vec<Vec<f64>>,
    pub noise_sigma: f64,
    pub context_mode: ContextMode,
    /// Cached round-1 contexts in [`ContextMode::Fixed`].
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fixed_contexts: Option<ContextMatrix>,
}

fn unit_sphere(rng: &mut SimRng, dim: usize) -> Vec<f64> {
    loop {
        let g: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
        let norm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > 1e-12 {
            return g.into_iter().map(|v| v / norm).collect();
        }
    }
}

fn unit_ball(rng: &mut SimRng, dim: usize) -> Vec<f64> {
    let dir = unit_sphere(rng, dim);
    let radius = rng.random::<f64>().powf(1.0 / dim as f64);
    let mut x: Vec<f64> = dir.into_iter().map(|v| v * radius).collect();
    let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm > 1.0 {
        for v in x.iter_mut() {
            *v /= norm;
        }
    }
    x
}

fn draw_contexts(rng: &mut SimRng, num_arms: usize, dim: usize) -> ContextMatrix {
    let data = (0..num_arms).flat_map(|_| unit_ball(rng, dim)).collect();
    ContextMatrix {
        num_arms,
        dim,
        data,
    }
}

/// Draw an instance from `seed`. Fixed-mode contexts come from the same stream, right after
/// the parameters.
pub fn gen_env(
    seed: u64,
    num_arms: usize,
    dim: usize,
    num_objectives: usize,
    noise_sigma: f64,
    context_mode: ContextMode,
) -> Result<EnvSpec> {
    let mut rng = stream_rng(seed, 0, Stream::Environment);
    gen_env_from_rng(
        &mut rng,
        num_arms,
        dim,
        num_objectives,
        noise_sigma,
        context_mode,
    )
}

/// [`gen_env`] with an explicit generator.
pub fn gen_env_from_rng(
    rng: &mut SimRng,
    num_arms: usize,
    dim: usize,
    num_objectives: usize,
    noise_sigma: f64,
    context_mode: ContextMode,
) -> Result<EnvSpec> {
    if num_arms == 0 || dim == 0 || num_objectives == 0 {
        return Err(Error::Config(format!(
            "instance dimensions must be positive (K={num_arms}, d={dim}, L={num_objectives})"
        )));
    }
    if !(noise_sigma.is_finite() && noise_sigma >= 0.0) {
        return Err(Error::Config(format!(
            "noise sigma must be non-negative, got {noise_sigma}"
        )));
    }
    let true_params = (0..num_objectives).map(|_| unit_sphere(rng, dim)).collect();
    let fixed_contexts = match context_mode {
        ContextMode::Fixed => Some(draw_contexts(rng, num_arms, dim)),
        ContextMode::PerRound => None,
    };
    Ok(EnvSpec {
        num_arms,
        dim,
        num_objectives,
        true_params,
        noise_sigma,
        context_mode,
        fixed_contexts,
    })
}

impl EnvSpec {
    pub fn validate(&self) -> Result<()> {
        if self.num_arms == 0 || self.dim == 0 || self.num_objectives == 0 {
            return Err(Error::Config("instance dimensions must be positive".into()));
        }
        if self.true_params.len() != self.num_objectives
            || self.true_params.iter().any(|p| p.len() != self.dim)
        {
            return Err(Error::Config(
                "parameter vectors do not match K, d, L".into(),
            ));
        }
        for (l, p) in self.true_params.iter().enumerate() {
            let norm = p.iter().map(|v| v * v).sum::<f64>().sqrt();
            if (norm - 1.0).abs() > 1e-12 {
                return Err(Error::Config(format!(
                    "parameter {l} has norm {norm}, expected 1"
                )));
            }
        }
        if !(self.noise_sigma.is_finite() && self.noise_sigma >= 0.0) {
            return Err(Error::Config("noise sigma must be non-negative".into()));
        }
        match (&self.context_mode, &self.fixed_contexts) {
            (ContextMode::Fixed, None) => {
                return Err(Error::Config(
                    "fixed context mode without cached contexts".into(),
                ))
            }
            (ContextMode::Fixed, Some(c))
                if c.num_arms != self.num_arms
                    || c.dim != self.dim
                    || c.data.len() != c.num_arms * c.dim
                    || c.data.iter().any(|v| !v.is_finite()) =>
            {
                return Err(Error::Config("cached contexts do not match K and d".into()))
            }
            _ => {}
        }
        Ok(())
    }

    /// Mean reward table `μ_a⁽ℓ⁾ = x_aᵀθ*⁽ℓ⁾`.
    pub fn true_table(&self, contexts: &ContextMatrix) -> RewardTable {
        let values = contexts
            .rows()
            .flat_map(|x| self.true_params.iter().map(move |theta| dot(x, theta)))
            .collect();
        RewardTable::from_flat(self.num_arms, self.num_objectives, values)
            .expect("finite contexts and parameters give a finite table")
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self).map_err(|e| Error::parse(path, e))?;
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let env: EnvSpec = serde_json::from_str(&text).map_err(|e| Error::parse(path, e))?;
        env.validate()?;
        Ok(env)
    }
}

/// Contexts and ground truth for one round.
#[derive(Debug, Clone, PartialEq)]
pub struct RoundOutcome {
    pub round: usize,
    pub contexts: ContextMatrix,
    pub true_table: RewardTable,
    pub noise_sigma: f64,
}

/// Contexts for `round`. Per-round mode consumes `K·(d+1)` draws (plus rare rejections) from
/// `rng`; fixed mode returns the cached matrix and leaves `rng` untouched.
pub fn gen_contexts(env: &EnvSpec, round: usize, rng: &mut SimRng) -> RoundOutcome {
    let contexts = match (&env.context_mode, &env.fixed_contexts) {
        (ContextMode::Fixed, Some(c)) => c.clone(),
        _ => draw_contexts(rng, env.num_arms, env.dim),
    };
    let true_table = env.true_table(&contexts);
    RoundOutcome {
        round,
        contexts,
        true_table,
        noise_sigma: env.noise_sigma,
    }
}

impl RoundOutcome {
    /// Noisy reward vector for `arm`.
    pub fn pull(&self, arm: usize, rng: &mut SimRng) -> Result<Vec<f64>> {
        if arm >= self.true_table.num_arms() {
            return Err(Error::Argument(format!(
                "arm index {arm} out of range for {} arms",
                self.true_table.num_arms()
            )));
        }
        Ok(self
            .true_table
            .row(arm)
            .iter()
            .map(|&mu| {
                let xi: f64 = rng.sample(StandardNormal);
                mu + self.noise_sigma * xi
            })
            .collect())
    }
}
