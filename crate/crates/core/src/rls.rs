//! Ridge-regression sufficient statistics shared by every policy, plus Gaussian sampling
//! around the ridge estimate.
//!
//! One Gram matrix `V = λI + Σ x xᵀ` serves all objectives, because every objective observes
//! the same pulled context. The inverse is maintained with Sherman–Morrison rank-one updates
//! and rebuilt from a fresh Cholesky factorization of `V` every [`REFRESH_INTERVAL`] updates.

use nalgebra::{Cholesky, DMatrix, DVector, DVectorView};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

/// Number of rank-one updates between full re-inversions of the Gram matrix.
pub const REFRESH_INTERVAL: usize = 512;

#[derive(Debug, Clone)]
pub struct RlsState {
    dim: usize,
    num_objectives: usize,
    regularizer: f64,
    gram: DMatrix<f64>,
    gram_inv: DMatrix<f64>,
    moments: Vec<DVector<f64>>,
    estimates: Vec<DVector<f64>>,
    rounds_seen: usize,
}

impl RlsState {
    /// Fresh state with `V = λI` and all estimates at zero.
    pub fn new(dim: usize, num_objectives: usize, regularizer: f64) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Config("feature dimension must be at least 1".into()));
        }
        if num_objectives == 0 {
            return Err(Error::Config(
                "number of objectives must be at least 1".into(),
            ));
        }
        if !(regularizer.is_finite() && regularizer > 0.0) {
            return Err(Error::Config(format!(
                "regularizer must be positive and finite, got {regularizer}"
            )));
        }
        Ok(Self {
            dim,
            num_objectives,
            regularizer,
            gram: DMatrix::identity(dim, dim) * regularizer,
            gram_inv: DMatrix::identity(dim, dim) / regularizer,
            moments: vec![DVector::zeros(dim); num_objectives],
            estimates: vec![DVector::zeros(dim); num_objectives],
            rounds_seen: 0,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn num_objectives(&self) -> usize {
        self.num_objectives
    }

    pub fn regularizer(&self) -> f64 {
        self.regularizer
    }

    pub fn gram(&self) -> &DMatrix<f64> {
        &self.gram
    }

    pub fn gram_inv(&self) -> &DMatrix<f64> {
        &self.gram_inv
    }

    pub fn moments(&self) -> &[DVector<f64>] {
        &self.moments
    }

    /// Ridge estimates, one per objective.
    pub fn estimates(&self) -> &[DVector<f64>] {
        &self.estimates
    }

    /// Number of updates applied so far; the next round index is `rounds_seen + 1`.
    pub fn rounds_seen(&self) -> usize {
        self.rounds_seen
    }

    /// Incorporate one observation: the pulled context and its reward vector.
    pub fn update(&mut self, context: &[f64], rewards: &[f64]) -> Result<()> {
        self.check_context(context)?;
        if rewards.len() != self.num_objectives {
            return Err(Error::Argument(format!(
                "reward vector has length {}, expected {}",
                rewards.len(),
                self.num_objectives
            )));
        }
        if rewards.iter().any(|r| !r.is_finite()) {
            return Err(Error::Argument(
                "reward vector contains non-finite entries".into(),
            ));
        }
        let x = DVectorView::from_slice(context, self.dim);

        self.gram.ger(1.0, &x, &x, 1.0);

        // Sherman–Morrison: (V + xxᵀ)⁻¹ = V⁻¹ − (V⁻¹x)(V⁻¹x)ᵀ / (1 + xᵀV⁻¹x)
        let vx = &self.gram_inv * x;
        let denom = 1.0 + x.dot(&vx);
        self.gram_inv.ger(-1.0 / denom, &vx, &vx, 1.0);
        symmetrize(&mut self.gram_inv);

        for (moment, &r) in self.moments.iter_mut().zip(rewards) {
            moment.axpy(r, &x, 1.0);
        }
        self.rounds_seen += 1;

        if self.rounds_seen.is_multiple_of(REFRESH_INTERVAL) {
            self.refresh()?;
        } else {
            self.recompute_estimates();
        }
        Ok(())
    }

    /// Rebuild `V⁻¹` from `V` by Cholesky factorization, discarding accumulated drift.
    pub fn refresh(&mut self) -> Result<()> {
        let chol = Cholesky::new(self.gram.clone()).ok_or_else(|| {
            Error::Degenerate(format!(
                "Gram matrix lost positive definiteness after {} updates",
                self.rounds_seen
            ))
        })?;
        self.gram_inv = chol.inverse();
        symmetrize(&mut self.gram_inv);
        self.recompute_estimates();
        Ok(())
    }

    fn recompute_estimates(&mut self) {
        for (est, moment) in self.estimates.iter_mut().zip(&self.moments) {
            est.gemv(1.0, &self.gram_inv, moment, 0.0);
        }
    }

    fn check_context(&self, context: &[f64]) -> Result<()> {
        if context.len() != self.dim {
            return Err(Error::Argument(format!(
                "context has length {}, expected {}",
                context.len(),
                self.dim
            )));
        }
        if context.iter().any(|v| !v.is_finite()) {
            return Err(Error::Argument(
                "context contains non-finite entries".into(),
            ));
        }
        Ok(())
    }

    /// `‖x‖_{V⁻¹} = sqrt(xᵀ V⁻¹ x)`.
    pub fn mahalanobis_norm(&self, context: &[f64]) -> Result<f64> {
        self.check_context(context)?;
        Ok(self.mahalanobis_norm_unchecked(context))
    }

    pub(crate) fn mahalanobis_norm_unchecked(&self, context: &[f64]) -> f64 {
        let x = DVectorView::from_slice(context, self.dim);
        let q = (&self.gram_inv * x).dot(&x);
        q.max(0.0).sqrt()
    }

    /// Plug-in prediction `xᵀθ̂` for one objective.
    pub fn predict(&self, objective: usize, context: &[f64]) -> f64 {
        dot(self.estimates[objective].as_slice(), context)
    }

    /// Max-entry deviation of `V · V⁻¹` from the identity.
    pub fn inverse_residual(&self) -> f64 {
        let prod = &self.gram * &self.gram_inv;
        let mut worst: f64 = 0.0;
        for i in 0..self.dim {
            for j in 0..self.dim {
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((prod[(i, j)] - target).abs());
            }
        }
        worst
    }

    /// Sampler for `N(θ̂⁽ℓ⁾, scale² V⁻¹)`, with the Cholesky factor computed once.
    pub fn sampler(&self, scale: f64) -> Result<PosteriorSampler> {
        if !(scale.is_finite() && scale >= 0.0) {
            return Err(Error::Argument(format!(
                "sampling scale must be non-negative and finite, got {scale}"
            )));
        }
        let chol = Cholesky::new(self.gram_inv.clone()).ok_or_else(|| {
            Error::Degenerate("inverse Gram matrix is not positive definite".into())
        })?;
        Ok(PosteriorSampler {
            means: self.estimates.clone(),
            factor: chol.unpack() * scale,
        })
    }

    /// Draw `num_samples` parameter vectors per objective from `N(θ̂⁽ℓ⁾, scale² V⁻¹)`.
    pub fn sample_block<R: Rng + ?Sized>(
        &self,
        scale: f64,
        num_samples: usize,
        rng: &mut R,
    ) -> Result<SampleBlock> {
        self.sampler(scale)?.draw_block(num_samples, rng)
    }
}

/// Gaussian sampler around the ridge estimates.
#[derive(Debug, Clone)]
pub struct PosteriorSampler {
    means: Vec<DVector<f64>>,
    /// `scale · chol(V⁻¹)`, lower triangular.
    factor: DMatrix<f64>,
}

impl PosteriorSampler {
    /// Draws are made objective-major, sample-minor; each draw consumes `d` standard normals.
    pub fn draw_block<R: Rng + ?Sized>(
        &self,
        num_samples: usize,
        rng: &mut R,
    ) -> Result<SampleBlock> {
        if num_samples == 0 {
            return Err(Error::Argument(
                "number of samples must be at least 1".into(),
            ));
        }
        let dim = self.factor.nrows();
        let mut noise = DVector::zeros(dim);
        let samples = self
            .means
            .iter()
            .map(|mean| {
                (0..num_samples)
                    .map(|_| {
                        for g in noise.iter_mut() {
                            *g = rng.sample(StandardNormal);
                        }
                        let mut theta = mean.clone();
                        theta.gemv(1.0, &self.factor, &noise, 1.0);
                        theta
                    })
                    .collect()
            })
            .collect();
        Ok(SampleBlock { samples })
    }
}

/// `M × L` sampled parameter vectors, stored objective-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleBlock {
    samples: Vec<Vec<DVector<f64>>>,
}

impl SampleBlock {
    pub fn num_samples(&self) -> usize {
        self.samples.first().map_or(0, Vec::len)
    }

    pub fn num_objectives(&self) -> usize {
        self.samples.len()
    }

    pub fn get(&self, sample: usize, objective: usize) -> &DVector<f64> {
        &self.samples[objective][sample]
    }

    /// All samples of one objective.
    pub fn objective(&self, objective: usize) -> &[DVector<f64>] {
        &self.samples[objective]
    }

    /// Optimistic value `max_m xᵀθ̃_m` for one objective.
    pub fn optimistic_value(&self, objective: usize, context: &[f64]) -> f64 {
        self.samples[objective]
            .iter()
            .map(|theta| dot(theta.as_slice(), context))
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

fn symmetrize(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let avg = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = avg;
            m[(j, i)] = avg;
        }
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
