//! Expected improvement, Monte Carlo batch EI and greedy batch construction.
//!
//! Batch EI (`q-EI`) is estimated by reparameterization: joint posterior
//! draws are `μ + S ε` for fixed standard-normal base samples `ε`, where `S`
//! is the symmetric square root of the joint covariance. The symmetric root
//! makes the estimate independent of the order of the batch when the base
//! samples are permuted along with it. Batches are grown one point at a time,
//! each point maximizing the batch EI of the grown batch.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use statrs::function::erf::erfc;

use crate::error::{Error, Result};
use crate::linalg::symmetrize;
use crate::optim::pattern_search;
use crate::surrogate::Surrogate;
use crate::types::{lex_cmp, same_config, Query};

/// Smallest number of Monte Carlo samples accepted for batch EI.
pub const MIN_MC_SAMPLES: usize = 64;

pub fn norm_pdf(u: f64) -> f64 {
    (-0.5 * u * u).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

pub fn norm_cdf(u: f64) -> f64 {
    0.5 * erfc(-u / std::f64::consts::SQRT_2)
}

/// Closed-form `E[max(Y − y_best, 0)]` for `Y ~ N(mean, sd²)`.
pub fn expected_improvement(mean: f64, sd: f64, y_best: f64) -> f64 {
    if !(sd >= 1e-12) {
        return (mean - y_best).max(0.0);
    }
    let u = (mean - y_best) / sd;
    (sd * (u * norm_cdf(u) + norm_pdf(u))).max(0.0)
}

/// EI of a surrogate at `z`.
pub fn ei<S: Surrogate + ?Sized>(model: &S, z: &Query, y_best: f64) -> Result<f64> {
    let p = model.predict(z)?;
    Ok(expected_improvement(p.mean, p.std_dev(), y_best))
}

/// Monte Carlo estimate with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate {
    pub value: f64,
    pub std_error: f64,
}

/// Pending batch with the base samples shared across one greedy construction.
#[derive(Debug, Clone)]
pub struct FantasyBatch {
    pub pending: Vec<Query>,
    /// `n_mc × capacity` standard-normal draws.
    pub base_samples: DMatrix<f64>,
    pub y_best: f64,
}

impl FantasyBatch {
    pub fn new(y_best: f64, n_mc: usize, capacity: usize, seed: u64) -> Result<Self> {
        if n_mc < MIN_MC_SAMPLES {
            return Err(Error::ParameterDomain(format!(
                "batch EI needs at least {MIN_MC_SAMPLES} samples, got {n_mc}"
            )));
        }
        Ok(FantasyBatch {
            pending: Vec::new(),
            base_samples: base_samples(n_mc, capacity, seed),
            y_best,
        })
    }

    pub fn capacity(&self) -> usize {
        self.base_samples.ncols()
    }

    pub fn push(&mut self, z: Query) -> Result<()> {
        if self.pending.len() >= self.capacity() {
            return Err(Error::ParameterDomain("fantasy batch is full".into()));
        }
        self.pending.push(z);
        Ok(())
    }

    pub fn utility<S: Surrogate + ?Sized>(&self, model: &S) -> Result<McEstimate> {
        if self.pending.is_empty() {
            return Ok(McEstimate { value: 0.0, std_error: 0.0 });
        }
        qei(model, &self.pending, self.y_best, &self.base_samples)
    }
}

pub fn base_samples(n_mc: usize, capacity: usize, seed: u64) -> DMatrix<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    DMatrix::from_fn(n_mc, capacity, |_, _| StandardNormal.sample(&mut rng))
}

/// Symmetric PSD square root; negative eigenvalues are clipped to zero.
fn sqrt_psd(cov: &DMatrix<f64>) -> DMatrix<f64> {
    let mut c = cov.clone();
    symmetrize(&mut c);
    let eig = c.symmetric_eigen();
    let d = DMatrix::from_diagonal(&eig.eigenvalues.map(|v| v.max(0.0).sqrt()));
    &eig.eigenvectors * d * eig.eigenvectors.transpose()
}

/// Batch EI `E[max_i max(y_i − y_best, 0)]` from joint posterior moments.
pub fn qei_from_moments(mean: &DVector<f64>, cov: &DMatrix<f64>, y_best: f64, base: &DMatrix<f64>) -> Result<McEstimate> {
    let q = mean.len();
    if q == 0 {
        return Err(Error::ParameterDomain("empty batch".into()));
    }
    if base.ncols() < q {
        return Err(Error::ParameterDomain(format!(
            "{q} batch points but only {} base-sample columns",
            base.ncols()
        )));
    }
    if !cov.iter().all(|v| v.is_finite()) {
        return Err(Error::IllConditioned("non-finite joint covariance".into()));
    }
    let root = sqrt_psd(cov);
    let n = base.nrows();
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    let mut y = DVector::zeros(q);
    for r in 0..n {
        for i in 0..q {
            let mut v = mean[i];
            for j in 0..q {
                v += root[(i, j)] * base[(r, j)];
            }
            y[i] = v;
        }
        let gain = y.iter().fold(0.0_f64, |acc, v| acc.max(v - y_best));
        sum += gain;
        sum_sq += gain * gain;
    }
    let nf = n as f64;
    let value = sum / nf;
    let var = if n > 1 { (sum_sq / nf - value * value).max(0.0) * nf / (nf - 1.0) } else { 0.0 };
    Ok(McEstimate {
        value,
        std_error: (var / nf).sqrt(),
    })
}

/// Monte Carlo batch EI under the joint posterior of `batch`.
pub fn qei<S: Surrogate + ?Sized>(model: &S, batch: &[Query], y_best: f64, base: &DMatrix<f64>) -> Result<McEstimate> {
    if batch.is_empty() {
        return Err(Error::ParameterDomain("empty batch".into()));
    }
    let (mean, cov) = model.predict_joint(batch)?;
    qei_from_moments(&mean, &cov, y_best, base)
}

/// Where the next batch point may come from.
#[derive(Debug, Clone, PartialEq)]
pub enum CandidateDomain {
    /// The unit cube of the given dimension.
    Continuous { dim: usize },
    /// A finite set of configurations, searched exhaustively.
    Discrete(Vec<Vec<f64>>),
}

#[derive(Debug, Clone, Copy)]
pub struct AcqOptions {
    pub random_starts: usize,
    pub perturbed_starts: usize,
    pub perturbation_sd: f64,
    pub initial_step: f64,
    pub min_step: f64,
    pub max_evals_per_start: usize,
    pub seed: u64,
}

impl Default for AcqOptions {
    fn default() -> Self {
        AcqOptions {
            random_starts: 8,
            perturbed_starts: 2,
            perturbation_sd: 0.1,
            initial_step: 0.1,
            min_step: 5e-3,
            max_evals_per_start: 16,
            seed: 0,
        }
    }
}

/// Configuration with the best observed target in the model's data.
pub fn best_observed_config<S: Surrogate + ?Sized>(model: &S) -> Option<Vec<f64>> {
    let data = model.gp().data();
    data.targets
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, _)| data.inputs[i].x.clone())
}

/// Picks the configuration whose addition at epoch `t_fixed` maximizes the
/// batch EI of `partial`. Does not modify `partial`.
pub fn greedy_append<S: Surrogate + ?Sized>(
    model: &S,
    partial: &FantasyBatch,
    domain: &CandidateDomain,
    t_fixed: f64,
    opts: &AcqOptions,
) -> Result<Query> {
    greedy_append_where(model, partial, domain, t_fixed, opts, |_| true)
}

/// [`greedy_append`] restricted to configurations accepted by `allowed`.
/// Discrete candidates that are not allowed are dropped; in continuous
/// domains they score `-inf`.
pub fn greedy_append_where<S: Surrogate + ?Sized>(
    model: &S,
    partial: &FantasyBatch,
    domain: &CandidateDomain,
    t_fixed: f64,
    opts: &AcqOptions,
    allowed: impl Fn(&[f64]) -> bool,
) -> Result<Query> {
    let q = partial.pending.len() + 1;
    if q > partial.capacity() {
        return Err(Error::ParameterDomain("fantasy batch is full".into()));
    }
    let score = |x: &[f64]| -> f64 {
        if !allowed(x) {
            return f64::NEG_INFINITY;
        }
        let mut batch = partial.pending.clone();
        batch.push(Query::new(x.to_vec(), t_fixed));
        match qei(model, &batch, partial.y_best, &partial.base_samples) {
            Ok(e) => e.value,
            Err(_) => f64::NEG_INFINITY,
        }
    };

    let domain = match domain {
        CandidateDomain::Discrete(all) => {
            let configs: Vec<Vec<f64>> = all.iter().filter(|c| allowed(c)).cloned().collect();
            if configs.is_empty() {
                return Err(Error::ParameterDomain("no allowed candidate configuration".into()));
            }
            let fresh: Vec<Vec<f64>> = configs
                .iter()
                .filter(|c| !partial.pending.iter().any(|p| same_config(&p.x, c)))
                .cloned()
                .collect();
            // Every candidate already pending: fall back to the full set.
            CandidateDomain::Discrete(if fresh.is_empty() { configs } else { fresh })
        }
        d => d.clone(),
    };
    let anchor = best_observed_config(model);
    let (x, _) = maximize_over_domain(&domain, anchor.as_deref(), opts, score)?;
    Ok(Query::new(x, t_fixed))
}

/// Multi-start maximization of `score` over `domain`.
///
/// Discrete domains are searched exhaustively. Continuous ones use pattern
/// search from `random_starts` uniform points plus `perturbed_starts`
/// Gaussian perturbations of `anchor`. Ties go to the lexicographically
/// smallest point.
pub fn maximize_over_domain(
    domain: &CandidateDomain,
    anchor: Option<&[f64]>,
    opts: &AcqOptions,
    score: impl Fn(&[f64]) -> f64,
) -> Result<(Vec<f64>, f64)> {
    let mut best: Option<(Vec<f64>, f64)> = None;
    fn consider(best: &mut Option<(Vec<f64>, f64)>, x: Vec<f64>, v: f64) {
        let better = match best {
            None => true,
            Some((bx, bv)) => v > *bv || (v == *bv && lex_cmp(&x, bx).is_lt()),
        };
        if better {
            *best = Some((x, v));
        }
    }

    match domain {
        CandidateDomain::Discrete(configs) => {
            for c in configs {
                let v = score(c);
                consider(&mut best, c.clone(), v);
            }
        }
        CandidateDomain::Continuous { dim } => {
            let dim = *dim;
            let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
            let mut starts: Vec<Vec<f64>> = (0..opts.random_starts)
                .map(|_| (0..dim).map(|_| rng.random::<f64>()).collect())
                .collect();
            let jitter = Normal::new(0.0, opts.perturbation_sd).expect("positive sd");
            for _ in 0..opts.perturbed_starts {
                let s = match anchor.filter(|a| a.len() == dim) {
                    Some(a) => a.iter().map(|v| (v + jitter.sample(&mut rng)).clamp(0.0, 1.0)).collect(),
                    None => (0..dim).map(|_| rng.random::<f64>()).collect(),
                };
                starts.push(s);
            }
            let lower = vec![0.0; dim];
            let upper = vec![1.0; dim];
            for s in starts {
                let (x, neg) = pattern_search(
                    |x| -score(x),
                    &s,
                    &lower,
                    &upper,
                    opts.initial_step,
                    opts.min_step,
                    opts.max_evals_per_start,
                );
                consider(&mut best, x, -neg);
            }
        }
    }
    best.ok_or_else(|| Error::ParameterDomain("empty candidate domain".into()))
}
