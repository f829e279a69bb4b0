//! Exact Gaussian-process regression with a cached Cholesky factor.
//!
//! Targets are rescaled internally (see [`Scaling`]); the constant prior mean
//! is zero in the rescaled units, i.e. the empirical target mean for
//! [`Scaling::Standardize`]. All public predictions are in target units.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand::{Rng as _, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::KernelSpec;
use crate::linalg::jittered_cholesky;
use crate::optim::minimize_bfgs;
use crate::types::Query;

/// Lower bound on the fitted observation noise (rescaled units).
pub const NOISE_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Standardization {
    pub mean: f64,
    pub scale: f64,
}

impl Standardization {
    pub const IDENTITY: Standardization = Standardization { mean: 0.0, scale: 1.0 };

    pub fn apply(&self, y: f64) -> f64 {
        (y - self.mean) / self.scale
    }

    pub fn invert(&self, y: f64) -> f64 {
        y * self.scale + self.mean
    }
}

/// How targets are rescaled before fitting.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Scaling {
    /// Zero mean, unit (population) variance.
    Standardize,
    /// Divide by the largest absolute target; the mean is kept.
    MaxAbs,
    None,
}

impl Scaling {
    fn fit(self, targets: &[f64]) -> Standardization {
        if targets.is_empty() {
            return Standardization::IDENTITY;
        }
        match self {
            Scaling::Standardize => {
                let n = targets.len() as f64;
                let mean = targets.iter().sum::<f64>() / n;
                let var = targets.iter().map(|y| (y - mean).powi(2)).sum::<f64>() / n;
                let sd = var.sqrt();
                Standardization {
                    mean,
                    scale: if sd > 1e-12 { sd } else { 1.0 },
                }
            }
            Scaling::MaxAbs => {
                let m = targets.iter().fold(0.0_f64, |a, y| a.max(y.abs()));
                Standardization {
                    mean: 0.0,
                    scale: if m > 1e-12 { m } else { 1.0 },
                }
            }
            Scaling::None => Standardization::IDENTITY,
        }
    }
}

/// Training inputs, raw targets and observation noise (rescaled units).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub inputs: Vec<Query>,
    pub targets: Vec<f64>,
    pub noise_var: f64,
    pub standardization: Option<Standardization>,
}

impl Dataset {
    pub fn new(inputs: Vec<Query>, targets: Vec<f64>, noise_var: f64) -> Result<Self> {
        let d = Dataset {
            inputs,
            targets,
            noise_var,
            standardization: None,
        };
        d.validate()?;
        Ok(d)
    }

    pub fn empty(noise_var: f64) -> Self {
        Dataset {
            inputs: Vec::new(),
            targets: Vec::new(),
            noise_var,
            standardization: None,
        }
    }

    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    pub fn push(&mut self, z: Query, y: f64) {
        self.inputs.push(z);
        self.targets.push(y);
    }

    pub fn validate(&self) -> Result<()> {
        if self.inputs.len() != self.targets.len() {
            return Err(Error::ParameterDomain(format!(
                "{} inputs but {} targets",
                self.inputs.len(),
                self.targets.len()
            )));
        }
        if !self.targets.iter().all(|y| y.is_finite()) || !self.inputs.iter().all(Query::is_finite) {
            return Err(Error::ParameterDomain("non-finite training data".into()));
        }
        if !(self.noise_var.is_finite() && self.noise_var >= 0.0) {
            return Err(Error::ParameterDomain(format!("noise variance {}", self.noise_var)));
        }
        if let Some(s) = self.standardization {
            if !(s.scale > 0.0) {
                return Err(Error::ParameterDomain("standardization scale must be positive".into()));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PosteriorSummary {
    pub mean: f64,
    pub variance: f64,
}

impl PosteriorSummary {
    pub fn std_dev(&self) -> f64 {
        self.variance.max(0.0).sqrt()
    }
}

#[derive(Debug, Clone)]
struct Cache {
    chol: Cholesky<f64, Dyn>,
    /// `(K + σ²I)⁻¹ (y - m)` in rescaled units.
    alpha: DVector<f64>,
    /// Rescaled targets.
    ys: DVector<f64>,
}

/// A GP conditioned on a dataset. Immutable once built: changing the data or
/// the kernel produces a new model with a rebuilt factorization.
#[derive(Debug, Clone)]
pub struct GpModel {
    kernel: KernelSpec,
    data: Dataset,
    scaling: Scaling,
    std: Standardization,
    cache: Cache,
}

impl GpModel {
    pub fn new(kernel: KernelSpec, mut data: Dataset, scaling: Scaling) -> Result<Self> {
        kernel.validate()?;
        data.validate()?;
        let std = data.standardization.unwrap_or_else(|| scaling.fit(&data.targets));
        data.standardization = Some(std);
        let cache = Self::factorize(&kernel, &data, std)?;
        Ok(GpModel {
            kernel,
            data,
            scaling,
            std,
            cache,
        })
    }

    fn factorize(kernel: &KernelSpec, data: &Dataset, std: Standardization) -> Result<Cache> {
        let n = data.len();
        let mut k = gram(kernel, &data.inputs);
        for i in 0..n {
            k[(i, i)] += data.noise_var;
        }
        let (chol, _) = jittered_cholesky(&k)?;
        let ys = DVector::from_iterator(n, data.targets.iter().map(|y| std.apply(*y)));
        let alpha = chol.solve(&ys);
        Ok(Cache { chol, alpha, ys })
    }

    pub fn kernel(&self) -> &KernelSpec {
        &self.kernel
    }

    pub fn data(&self) -> &Dataset {
        &self.data
    }

    pub fn scaling(&self) -> Scaling {
        self.scaling
    }

    pub fn standardization(&self) -> Standardization {
        self.std
    }

    pub fn noise_var(&self) -> f64 {
        self.data.noise_var
    }

    /// Same hyperparameters, new data. The target rescaling is recomputed.
    pub fn with_data(&self, mut data: Dataset) -> Result<GpModel> {
        data.noise_var = self.data.noise_var;
        data.standardization = None;
        GpModel::new(self.kernel.clone(), data, self.scaling)
    }

    /// Same hyperparameters and rescaling, with extra observations appended.
    pub fn with_extra(&self, extra: &[(Query, f64)]) -> Result<GpModel> {
        let mut data = self.data.clone();
        for (z, y) in extra {
            data.push(z.clone(), *y);
        }
        GpModel::new(self.kernel.clone(), data, self.scaling)
    }

    pub fn with_hyperparams(&self, kernel: KernelSpec, noise_var: f64) -> Result<GpModel> {
        let mut data = self.data.clone();
        data.noise_var = noise_var;
        GpModel::new(kernel, data, self.scaling)
    }

    pub(crate) fn chol(&self) -> &Cholesky<f64, Dyn> {
        &self.cache.chol
    }

    /// Rescaled targets minus the (zero) prior mean.
    pub(crate) fn residuals(&self) -> &DVector<f64> {
        &self.cache.ys
    }

    pub(crate) fn cross_cov(&self, z: &Query) -> DVector<f64> {
        DVector::from_iterator(self.data.len(), self.data.inputs.iter().map(|zi| self.kernel.eval(zi, z)))
    }

    /// Posterior in rescaled units.
    pub(crate) fn posterior_scaled(&self, z: &Query) -> (f64, f64) {
        let k = self.cross_cov(z);
        let mean = k.dot(&self.cache.alpha);
        let prior = self.kernel.eval(z, z);
        if k.is_empty() {
            return (mean, prior);
        }
        let v = self
            .cache
            .chol
            .l_dirty()
            .solve_lower_triangular(&k)
            .expect("Cholesky factor has a nonzero diagonal");
        (mean, (prior - v.dot(&v)).max(0.0))
    }

    pub fn posterior(&self, z: &Query) -> PosteriorSummary {
        let (m, v) = self.posterior_scaled(z);
        PosteriorSummary {
            mean: self.std.invert(m),
            variance: v * self.std.scale * self.std.scale,
        }
    }

    /// Joint posterior mean and covariance at `zs`, in target units.
    pub fn posterior_joint(&self, zs: &[Query]) -> (DVector<f64>, DMatrix<f64>) {
        let q = zs.len();
        let n = self.data.len();
        let kzs = DMatrix::from_fn(n, q, |i, j| self.kernel.eval(&self.data.inputs[i], &zs[j]));
        let mut cov = gram(&self.kernel, zs);
        let mut mean = kzs.tr_mul(&self.cache.alpha);
        if n > 0 {
            let v = self
                .cache
                .chol
                .l_dirty()
                .solve_lower_triangular(&kzs)
                .expect("Cholesky factor has a nonzero diagonal");
            cov -= v.tr_mul(&v);
        }
        crate::linalg::symmetrize(&mut cov);
        let s = self.std.scale;
        mean.apply(|m| *m = self.std.invert(*m));
        cov *= s * s;
        (mean, cov)
    }

    /// Gaussian log marginal likelihood of the raw targets.
    pub fn log_marginal_likelihood(&self) -> f64 {
        let n = self.data.len() as f64;
        let fit = -0.5 * self.cache.ys.dot(&self.cache.alpha);
        let logdet: f64 = self.cache.chol.l_dirty().diagonal().iter().map(|d| d.ln()).sum();
        fit - logdet - 0.5 * n * (2.0 * std::f64::consts::PI).ln() - n * self.std.scale.ln()
    }
}

/// Gram matrix `K(zs, zs)` (no jitter).
pub fn gram(kernel: &KernelSpec, zs: &[Query]) -> DMatrix<f64> {
    kernel.gram(zs)
}

/// Box for hyperparameter search, in natural units, laid out as
/// `kernel.params()` followed by the noise variance.
#[derive(Debug, Clone, PartialEq)]
pub struct HyperBounds {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl HyperBounds {
    /// `[1e-3, 1e3]` for every kernel parameter, `[1e-6, 1]` for the noise.
    pub fn default_for(kernel: &KernelSpec) -> Self {
        let n = kernel.params().len();
        let mut lower = vec![1e-3; n];
        let mut upper = vec![1e3; n];
        lower.push(NOISE_FLOOR);
        upper.push(1.0);
        HyperBounds { lower, upper }
    }
}

#[derive(Debug, Clone)]
pub struct FitReport {
    pub model: GpModel,
    pub log_likelihood: f64,
    /// Set when no restart produced a usable likelihood.
    pub warning: Option<String>,
}

#[derive(Debug, Clone, Copy)]
pub struct FitOptions {
    pub restarts: usize,
    pub max_iter: usize,
    pub seed: u64,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            restarts: 5,
            max_iter: 60,
            seed: 0,
        }
    }
}

/// Maximizes the log marginal likelihood over log-hyperparameters with
/// multi-start BFGS. The incoming parameters are always one of the starts,
/// so the result is never worse than the input.
pub fn fit_hyperparams(model: &GpModel, bounds: &HyperBounds, opts: FitOptions) -> Result<FitReport> {
    if model.data.len() < 2 {
        return Err(Error::ParameterDomain(
            "hyperparameter fitting needs at least two observations".into(),
        ));
    }
    let n_kernel = model.kernel.params().len();
    if bounds.lower.len() != n_kernel + 1 || bounds.upper.len() != n_kernel + 1 {
        return Err(Error::ParameterDomain("hyperparameter bounds have the wrong length".into()));
    }
    let lo: Vec<f64> = bounds.lower.iter().map(|v| v.ln()).collect();
    let hi: Vec<f64> = bounds.upper.iter().map(|v| v.ln()).collect();

    let mut start = model.kernel.params();
    start.push(model.data.noise_var.max(NOISE_FLOOR));
    let start: Vec<f64> = start
        .iter()
        .zip(&lo)
        .zip(&hi)
        .map(|((v, l), h)| v.ln().clamp(*l, *h))
        .collect();

    let objective = |p: &[f64]| -> f64 {
        let natural: Vec<f64> = p.iter().map(|v| v.exp()).collect();
        let kernel = model.kernel.with_params(&natural[..n_kernel]);
        match model.with_hyperparams(kernel, natural[n_kernel]) {
            Ok(m) => -m.log_marginal_likelihood(),
            Err(_) => f64::NAN,
        }
    };

    let incoming = model.log_marginal_likelihood();
    let mut best: Option<(Vec<f64>, f64)> = None;
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut starts = vec![start];
    for _ in 0..opts.restarts {
        starts.push(lo.iter().zip(&hi).map(|(l, h)| rng.random_range(*l..=*h)).collect());
    }
    for s in &starts {
        let (p, f) = minimize_bfgs(objective, s, &lo, &hi, opts.max_iter);
        if f.is_finite() && best.as_ref().is_none_or(|(_, bf)| f < *bf) {
            best = Some((p, f));
        }
    }

    match best {
        Some((p, f)) if incoming.is_nan() || -f >= incoming => {
            let natural: Vec<f64> = p.iter().map(|v| v.exp()).collect();
            let kernel = model.kernel.with_params(&natural[..n_kernel]);
            let fitted = model.with_hyperparams(kernel, natural[n_kernel])?;
            let ll = fitted.log_marginal_likelihood();
            Ok(FitReport {
                model: fitted,
                log_likelihood: ll,
                warning: None,
            })
        }
        Some(_) => Ok(FitReport {
            model: model.clone(),
            log_likelihood: incoming,
            warning: None,
        }),
        None => {
            let msg = "all hyperparameter restarts failed; keeping incoming parameters".to_string();
            log::warn!("{msg}");
            Ok(FitReport {
                model: model.clone(),
                log_likelihood: incoming,
                warning: Some(msg),
            })
        }
    }
}
