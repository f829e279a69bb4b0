//! GP posterior conditioned on bounds for `∂f/∂t` at virtual locations.
//!
//! With `C = ∂f/∂t (Z^v)` observed with small noise `σ_v²`, the constrained
//! posterior at `z*` is
//!
//! ```text
//! f* | Y, C ~ N(μ* + A (C − Lμ^v) + B (Y − μ), Σ)
//! C  | Y    ~ TN(Lμ^v + A1 (Y − μ), B1, a, b)
//!
//! A1 = (L K_{Zv,Z}) (K + σ²I)⁻¹        A2 = K_{*,Z} (K + σ²I)⁻¹
//! B1 = L K_{Zv,Zv} Lᵀ + σ_v² I − A1 K_{Z,Zv} Lᵀ
//! B2 = K_{*,*} − A2 K_{Z,*}            B3 = K_{*,Zv} Lᵀ − A2 K_{Z,Zv} Lᵀ
//! A  = B3 B1⁻¹    B = A2 − A A1        Σ  = B2 − A B3ᵀ
//! ```
//!
//! `C` is integrated out by Monte Carlo: the mean uses the sample mean of `C`
//! (the posterior mean is linear in `C`) and the variance adds
//! `A Cov(C) Aᵀ` to `Σ`. With a constant prior mean, `Lμ^v = 0`.
//!
//! All computations happen in the base model's rescaled target units.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::gp::{GpModel, PosteriorSummary};
use crate::kernels::TimeKernel;
use crate::linalg::{jittered_cholesky, symmetrize};
use crate::truncnorm::{box_probability, sample_truncated_mvn, GibbsOptions};
use crate::types::{same_config, Query};

/// Default noise on the virtual derivative observations.
pub const VIRTUAL_NOISE: f64 = 1e-6;
/// Upper limit on virtual locations per configuration for RBF epoch kernels.
pub const MAX_RBF_LOCATIONS: usize = 10;

/// Bounds `lower ≤ ∂f/∂t ≤ upper` at virtual locations.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintSpec {
    pub locations: Vec<Query>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub virtual_noise: f64,
}

impl ConstraintSpec {
    /// Non-decreasing in `t` at every location.
    pub fn monotone(locations: Vec<Query>) -> Self {
        let k = locations.len();
        ConstraintSpec {
            locations,
            lower: vec![0.0; k],
            upper: vec![f64::INFINITY; k],
            virtual_noise: VIRTUAL_NOISE,
        }
    }

    /// Unbounded derivative: the constrained posterior reduces to the plain one.
    pub fn vacuous(locations: Vec<Query>) -> Self {
        let k = locations.len();
        ConstraintSpec {
            locations,
            lower: vec![f64::NEG_INFINITY; k],
            upper: vec![f64::INFINITY; k],
            virtual_noise: VIRTUAL_NOISE,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let k = self.locations.len();
        if k == 0 {
            return Err(Error::ParameterDomain("no virtual locations".into()));
        }
        if self.lower.len() != k || self.upper.len() != k {
            return Err(Error::ParameterDomain("bounds do not match virtual locations".into()));
        }
        if self.lower.iter().zip(&self.upper).any(|(a, b)| !(a <= b)) {
            return Err(Error::ParameterDomain("lower bound above upper bound".into()));
        }
        if !(self.virtual_noise > 0.0) {
            return Err(Error::ParameterDomain("virtual noise must be positive".into()));
        }
        Ok(())
    }
}

/// Virtual locations at configuration `x`, linearly spaced over `t_range`.
///
/// ED kernels get the two endpoints; RBF kernels get enough points that the
/// spacing does not exceed the lengthscale, `ceil(range / l) + 1`, capped at
/// [`MAX_RBF_LOCATIONS`].
pub fn build_virtual_locations(x: &[f64], time: &TimeKernel, t_range: (f64, f64)) -> Vec<Query> {
    let (lo, hi) = t_range;
    let count = match *time {
        TimeKernel::Rbf { lengthscale } => {
            let n = ((hi - lo) / lengthscale - 1e-12).ceil() as usize + 1;
            n.clamp(2, MAX_RBF_LOCATIONS)
        }
        _ => 2,
    };
    if hi <= lo {
        return vec![Query::new(x.to_vec(), lo)];
    }
    (0..count)
        .map(|i| Query::new(x.to_vec(), lo + (hi - lo) * i as f64 / (count - 1) as f64))
        .collect()
}

/// Constrained posterior at one query, with the intermediate matrices.
#[derive(Debug, Clone)]
pub struct ConstrainedPosterior {
    /// Mean in target units.
    pub mean: f64,
    /// Variance in squared target units.
    pub variance: f64,
    pub constraint_mean: DVector<f64>,
    pub constraint_cov: DMatrix<f64>,
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub a1: DMatrix<f64>,
    pub a2: DMatrix<f64>,
    pub b1: DMatrix<f64>,
    pub b2: DMatrix<f64>,
    pub b3: DMatrix<f64>,
    pub sigma: DMatrix<f64>,
}

/// The part of the constrained posterior that depends only on the data and
/// the virtual locations, shared by every prediction.
#[derive(Debug, Clone)]
pub struct ConstraintSystem<'m> {
    model: &'m GpModel,
    cs: ConstraintSpec,
    /// `L K_{Zv,Z}`, `s × n`.
    lk_vz: DMatrix<f64>,
    a1: DMatrix<f64>,
    b1: DMatrix<f64>,
    b1_chol: nalgebra::Cholesky<f64, nalgebra::Dyn>,
    samples: DMatrix<f64>,
    sample_mean: DVector<f64>,
    sample_cov: DMatrix<f64>,
}

#[allow(clippy::type_complexity)]
fn untruncated_moments(model: &GpModel, cs: &ConstraintSpec) -> Result<(DMatrix<f64>, DMatrix<f64>, DMatrix<f64>, DVector<f64>)> {
    cs.validate()?;
    let kernel = model.kernel();
    let data = &model.data().inputs;
    let s = cs.locations.len();
    let n = data.len();

    let mut lk_vz = DMatrix::zeros(s, n);
    for (j, zv) in cs.locations.iter().enumerate() {
        for (i, z) in data.iter().enumerate() {
            lk_vz[(j, i)] = kernel.grad_t(z, zv)?;
        }
    }
    let mut lkl = DMatrix::zeros(s, s);
    for i in 0..s {
        for j in 0..s {
            lkl[(i, j)] = kernel.hess_tt(&cs.locations[i], &cs.locations[j])?;
        }
        lkl[(i, i)] += cs.virtual_noise;
    }
    let (a1, mut b1) = if n > 0 {
        // A1ᵀ = (K + σ²I)⁻¹ (L K_{Zv,Z})ᵀ
        let a1 = model.chol().solve(&lk_vz.transpose()).transpose();
        let b1 = lkl - &a1 * lk_vz.transpose();
        (a1, b1)
    } else {
        (DMatrix::zeros(s, 0), lkl)
    };
    symmetrize(&mut b1);
    let c_mean = if n > 0 { &a1 * model.residuals() } else { DVector::zeros(s) };
    Ok((lk_vz, a1, b1, c_mean))
}

/// Samples of the constraint variable `C | Y` truncated to the bounds, rows
/// are samples. Values are in rescaled target units per unit normalized epoch.
pub fn sample_constraint(model: &GpModel, cs: &ConstraintSpec, n: usize, seed: u64) -> Result<DMatrix<f64>> {
    if n == 0 {
        return Err(Error::ParameterDomain("need at least one constraint sample".into()));
    }
    let (_, _, b1, c_mean) = untruncated_moments(model, cs)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    sample_truncated_mvn(&c_mean, &b1, &cs.lower, &cs.upper, n, GibbsOptions::default(), &mut rng)
}

/// Monte Carlo estimate of `p(a ≤ C ≤ b | Y)` for the untruncated `C`.
pub fn constraint_probability(model: &GpModel, cs: &ConstraintSpec, n_samples: usize, seed: u64) -> Result<f64> {
    let (_, _, b1, c_mean) = untruncated_moments(model, cs)?;
    if cs.lower.iter().all(|a| *a == f64::NEG_INFINITY) && cs.upper.iter().all(|b| *b == f64::INFINITY) {
        return Ok(1.0);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    box_probability(&c_mean, &b1, &cs.lower, &cs.upper, n_samples.max(1), &mut rng)
}

impl<'m> ConstraintSystem<'m> {
    pub fn new(model: &'m GpModel, cs: ConstraintSpec, n_samples: usize, seed: u64) -> Result<Self> {
        if n_samples == 0 {
            return Err(Error::ParameterDomain("need at least one constraint sample".into()));
        }
        let (lk_vz, a1, b1, c_mean) = untruncated_moments(model, &cs)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let samples = sample_truncated_mvn(&c_mean, &b1, &cs.lower, &cs.upper, n_samples, GibbsOptions::default(), &mut rng)?;
        let (b1_chol, _) = jittered_cholesky(&b1).map_err(|e| Error::IllConditionedConstraint(e.to_string()))?;
        let s = cs.locations.len();
        let ns = samples.nrows() as f64;
        let sample_mean = DVector::from_fn(s, |j, _| samples.column(j).sum() / ns);
        let mut sample_cov = DMatrix::zeros(s, s);
        if samples.nrows() > 1 {
            for r in 0..samples.nrows() {
                let d = samples.row(r).transpose() - &sample_mean;
                sample_cov += &d * d.transpose();
            }
            sample_cov /= ns - 1.0;
        }
        Ok(ConstraintSystem {
            model,
            cs,
            lk_vz,
            a1,
            b1,
            b1_chol,
            samples,
            sample_mean,
            sample_cov,
        })
    }

    pub fn spec(&self) -> &ConstraintSpec {
        &self.cs
    }

    pub fn samples(&self) -> &DMatrix<f64> {
        &self.samples
    }

    /// Matrices for a batch of queries, rescaled units:
    /// `(A2, B2, B3, A, B, Σ)`.
    #[allow(clippy::type_complexity)]
    fn parts(&self, zs: &[Query]) -> Result<(DMatrix<f64>, DMatrix<f64>, DMatrix<f64>, DMatrix<f64>, DMatrix<f64>, DMatrix<f64>)> {
        let kernel = self.model.kernel();
        let data = &self.model.data().inputs;
        let n = data.len();
        let q = zs.len();
        let s = self.cs.locations.len();

        let kzs = DMatrix::from_fn(n, q, |i, j| kernel.eval(&data[i], &zs[j]));
        let a2 = if n > 0 {
            self.model.chol().solve(&kzs).transpose()
        } else {
            DMatrix::zeros(q, 0)
        };
        let mut b2 = crate::gp::gram(kernel, zs);
        if n > 0 {
            b2 -= &a2 * &kzs;
        }
        let mut k_sv = DMatrix::zeros(q, s);
        for i in 0..q {
            for j in 0..s {
                k_sv[(i, j)] = kernel.grad_t(&zs[i], &self.cs.locations[j])?;
            }
        }
        let b3 = if n > 0 { k_sv - &a2 * self.lk_vz.transpose() } else { k_sv };
        // A = B3 B1⁻¹  ⇔  Aᵀ = B1⁻¹ B3ᵀ
        let a = self.b1_chol.solve(&b3.transpose()).transpose();
        let b = if n > 0 { &a2 - &a * &self.a1 } else { DMatrix::zeros(q, 0) };
        let mut sigma = &b2 - &a * b3.transpose();
        symmetrize(&mut sigma);
        Ok((a2, b2, b3, a, b, sigma))
    }

    /// Mean and covariance in rescaled units.
    #[allow(clippy::type_complexity)]
    fn joint_scaled(&self, zs: &[Query]) -> Result<(DVector<f64>, DMatrix<f64>, DMatrix<f64>, DMatrix<f64>)> {
        let (_, _, _, a, b, sigma) = self.parts(zs)?;
        let mut mean = &a * &self.sample_mean;
        if !self.model.data().is_empty() {
            mean += &b * self.model.residuals();
        }
        let mut cov = &sigma + &a * &self.sample_cov * a.transpose();
        symmetrize(&mut cov);
        Ok((mean, cov, a, b))
    }

    /// Joint constrained posterior at `zs`, target units.
    pub fn predict_joint(&self, zs: &[Query]) -> Result<(DVector<f64>, DMatrix<f64>)> {
        let (mut mean, mut cov, _, _) = self.joint_scaled(zs)?;
        let std = self.model.standardization();
        mean.apply(|m| *m = std.invert(*m));
        cov *= std.scale * std.scale;
        Ok((mean, cov))
    }

    pub fn predict(&self, z: &Query) -> Result<PosteriorSummary> {
        let (m, c) = self.predict_joint(std::slice::from_ref(z))?;
        Ok(PosteriorSummary {
            mean: m[0],
            variance: c[(0, 0)].max(0.0),
        })
    }

    /// Full posterior record at one query.
    pub fn posterior(&self, z: &Query) -> Result<ConstrainedPosterior> {
        let zs = std::slice::from_ref(z);
        let (a2, b2, b3, a, b, sigma) = self.parts(zs)?;
        let p = self.predict(z)?;
        Ok(ConstrainedPosterior {
            mean: p.mean,
            variance: p.variance,
            constraint_mean: self.sample_mean.clone(),
            constraint_cov: self.sample_cov.clone(),
            a,
            b,
            a1: self.a1.clone(),
            a2,
            b1: self.b1.clone(),
            b2,
            b3,
            sigma,
        })
    }
}

/// Constrained posterior at `z`, sampling `C` with `n_samples` Gibbs draws.
pub fn constrained_posterior(
    model: &GpModel,
    cs: &ConstraintSpec,
    z: &Query,
    n_samples: usize,
    seed: u64,
) -> Result<ConstrainedPosterior> {
    ConstraintSystem::new(model, cs.clone(), n_samples, seed)?.posterior(z)
}

/// Settings for [`MonotoneGp`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MonotoneSettings {
    pub n_samples: usize,
    pub seed: u64,
    pub virtual_noise: f64,
}

impl Default for MonotoneSettings {
    fn default() -> Self {
        MonotoneSettings {
            n_samples: 200,
            seed: 0,
            virtual_noise: VIRTUAL_NOISE,
        }
    }
}

/// A fitted GP whose predictions are constrained to be non-decreasing in `t`
/// at every configuration being predicted.
#[derive(Debug, Clone)]
pub struct MonotoneGp {
    base: GpModel,
    settings: MonotoneSettings,
}

impl MonotoneGp {
    pub fn new(base: GpModel, settings: MonotoneSettings) -> Result<Self> {
        match base.kernel().time_kernel() {
            Some(t) if t.supports_derivatives() => Ok(MonotoneGp { base, settings }),
            _ => Err(Error::Unsupported(
                "monotone constraints need an RBF or ED epoch kernel".into(),
            )),
        }
    }

    pub fn base(&self) -> &GpModel {
        &self.base
    }

    pub fn settings(&self) -> MonotoneSettings {
        self.settings
    }

    /// Virtual locations over `t ∈ [0, 1]` at each distinct configuration.
    pub fn constraint_for(&self, configs: &[&[f64]]) -> ConstraintSpec {
        let time = self.base.kernel().time_kernel().expect("checked at construction");
        let mut distinct: Vec<&[f64]> = Vec::new();
        for x in configs {
            if !distinct.iter().any(|d| same_config(d, x)) {
                distinct.push(x);
            }
        }
        let locations = distinct
            .iter()
            .flat_map(|x| build_virtual_locations(x, time, (0.0, 1.0)))
            .collect();
        let mut cs = ConstraintSpec::monotone(locations);
        cs.virtual_noise = self.settings.virtual_noise;
        cs
    }

    pub fn system(&self, configs: &[&[f64]]) -> Result<ConstraintSystem<'_>> {
        ConstraintSystem::new(&self.base, self.constraint_for(configs), self.settings.n_samples, self.settings.seed)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gp::{Dataset, Scaling};
    use crate::kernels::KernelSpec;

    fn rbf_time(l: f64) -> KernelSpec {
        KernelSpec::time_only(TimeKernel::Rbf { lengthscale: l })
    }

    #[test]
    fn virtual_location_rules() {
        let ed = TimeKernel::ExpDecay { alpha: 1.0, beta: 1.0, w: 0.0 };
        let v = build_virtual_locations(&[0.3], &ed, (0.0, 1.0));
        assert_eq!(v, vec![Query::new(vec![0.3], 0.0), Query::new(vec![0.3], 1.0)]);

        let v = build_virtual_locations(&[], &TimeKernel::Rbf { lengthscale: 0.5 }, (0.0, 1.0));
        let ts: Vec<f64> = v.iter().map(|q| q.t).collect();
        assert_eq!(ts, vec![0.0, 0.5, 1.0]);

        let v = build_virtual_locations(&[], &TimeKernel::Rbf { lengthscale: 0.05 }, (0.0, 1.0));
        assert_eq!(v.len(), MAX_RBF_LOCATIONS);
    }

    #[test]
    fn half_normal_constraint_probability() {
        // Empty data, RBF l = 1: ∂f/∂t at one location is N(0, 1 + σ_v²).
        let model = GpModel::new(rbf_time(1.0), Dataset::empty(1e-6), Scaling::None).unwrap();
        let cs = ConstraintSpec::monotone(vec![Query::time(0.5)]);
        let p = constraint_probability(&model, &cs, 2000, 1).unwrap();
        assert!((p - 0.5).abs() < 0.03, "p = {p}");
        let vac = ConstraintSpec::vacuous(vec![Query::time(0.5)]);
        assert_eq!(constraint_probability(&model, &vac, 2000, 1).unwrap(), 1.0);

        let s = sample_constraint(&model, &cs, 2000, 2).unwrap();
        let xs: Vec<f64> = s.column(0).iter().copied().collect();
        assert!(xs.iter().all(|v| *v >= 0.0));
        let m = xs.iter().sum::<f64>() / 2000.0;
        let sd = (xs.iter().map(|v| (v - m).powi(2)).sum::<f64>() / 1999.0).sqrt();
        assert!((m - (2.0 / std::f64::consts::PI).sqrt()).abs() < 3.0 * sd / 2000f64.sqrt());
    }

    fn line_data(values: impl Fn(f64) -> f64, n: usize) -> Dataset {
        let ts: Vec<Query> = (0..n).map(|i| Query::time(i as f64 / (n - 1) as f64)).collect();
        let ys = ts.iter().map(|q| values(q.t)).collect();
        Dataset::new(ts, ys, 1e-4).unwrap()
    }

    #[test]
    fn vacuous_sample_mean_matches_untruncated_mean() {
        let model = GpModel::new(rbf_time(0.4), line_data(|t| t, 6), Scaling::Standardize).unwrap();
        let locs = build_virtual_locations(&[], &TimeKernel::Rbf { lengthscale: 0.4 }, (0.0, 1.0));
        let cs = ConstraintSpec::vacuous(locs);
        let (_, _, b1, c_mean) = untruncated_moments(&model, &cs).unwrap();
        let s = sample_constraint(&model, &cs, 2000, 3).unwrap();
        for j in 0..c_mean.len() {
            let m = s.column(j).sum() / 2000.0;
            let se = (b1[(j, j)] / 2000.0).sqrt();
            assert!((m - c_mean[j]).abs() < 3.0 * se, "coordinate {j}");
        }
    }

    #[test]
    fn vacuous_posterior_matches_unconstrained() {
        let model = GpModel::new(rbf_time(0.3), line_data(|t| (3.0 * t).sin(), 7), Scaling::Standardize).unwrap();
        let locs = build_virtual_locations(&[], &TimeKernel::Rbf { lengthscale: 0.3 }, (0.0, 1.0));
        let cs = ConstraintSpec::vacuous(locs);
        for t in [0.15, 0.5, 0.85] {
            let z = Query::time(t);
            let c = constrained_posterior(&model, &cs, &z, 2000, 5).unwrap();
            let u = model.posterior(&z);
            assert!((c.mean - u.mean).abs() <= 1e-2 * u.mean.abs(), "mean at {t}: {} vs {}", c.mean, u.mean);
            assert!((c.variance - u.variance).abs() <= 1e-2 * u.variance, "var at {t}: {} vs {} sigma {}", c.variance, u.variance, c.sigma[(0,0)]);
        }
    }

    #[test]
    fn algebraic_identity_with_exact_constraint_moments() {
        // Replacing the sample moments by the exact untruncated ones recovers
        // the unconstrained posterior to machine precision.
        let model = GpModel::new(rbf_time(0.3), line_data(|t| t * t, 5), Scaling::Standardize).unwrap();
        let cs = ConstraintSpec::vacuous(build_virtual_locations(&[], &TimeKernel::Rbf { lengthscale: 0.3 }, (0.0, 1.0)));
        let sys = ConstraintSystem::new(&model, cs, 10, 0).unwrap();
        let z = Query::time(0.37);
        let (_, _, _, a, b, sigma) = sys.parts(std::slice::from_ref(&z)).unwrap();
        let c_mean = &sys.a1 * model.residuals();
        let mean = (&a * c_mean + &b * model.residuals())[0];
        let var = (sigma + &a * &sys.b1 * a.transpose())[(0, 0)];
        let (um, uv) = model.posterior_scaled(&z);
        assert!((mean - um).abs() < 1e-9);
        assert!((var - uv).abs() < 1e-9);
    }

    #[test]
    fn monotone_data_gives_monotone_mean() {
        let model = GpModel::new(rbf_time(0.3), line_data(|t| t, 6), Scaling::Standardize).unwrap();
        let gp = MonotoneGp::new(model, MonotoneSettings { n_samples: 2000, ..Default::default() }).unwrap();
        let sys = gp.system(&[&[]]).unwrap();
        let grid: Vec<Query> = (0..50).map(|i| Query::time(i as f64 / 49.0)).collect();
        let (mean, _) = sys.predict_joint(&grid).unwrap();
        for i in 1..50 {
            assert!(mean[i] >= mean[i - 1] - 1e-3, "drop at {i}");
        }
    }

    #[test]
    fn decreasing_segment_is_flattened() {
        // Rises, dips in the middle, rises again.
        let f = |t: f64| t - 0.25 * (-((t - 0.55) / 0.08).powi(2)).exp();
        let data = line_data(f, 12);
        let kernel = rbf_time(0.12);
        let model = GpModel::new(kernel, data, Scaling::Standardize).unwrap();
        let grid: Vec<Query> = (0..50).map(|i| Query::time(i as f64 / 49.0)).collect();
        let (um, _) = model.posterior_joint(&grid);
        assert!((1..50).any(|i| um[i] < um[i - 1] - 1e-3), "unconstrained mean should dip");
        let gp = MonotoneGp::new(model.with_hyperparams(model.kernel().clone(), 0.05).unwrap(), MonotoneSettings { n_samples: 2000, ..Default::default() }).unwrap();
        let (cm, _) = gp.system(&[&[]]).unwrap().predict_joint(&grid).unwrap();
        let worst = (1..50).map(|i| cm[i] - cm[i - 1]).fold(f64::INFINITY, f64::min);
        assert!(worst >= -1e-3, "constrained mean drops by {worst}");
    }

    #[test]
    fn strongly_increasing_data_satisfies_constraint() {
        let model = GpModel::new(rbf_time(0.5), line_data(|t| 2.0 * t, 6), Scaling::Standardize).unwrap();
        let cs = ConstraintSpec::monotone(build_virtual_locations(&[], &TimeKernel::Rbf { lengthscale: 0.5 }, (0.0, 1.0)));
        let p = constraint_probability(&model, &cs, 2000, 7).unwrap();
        assert!(p >= 0.9, "p = {p}");
    }

    #[test]
    fn deterministic_under_seed() {
        let model = GpModel::new(rbf_time(0.3), line_data(|t| t, 6), Scaling::Standardize).unwrap();
        let cs = ConstraintSpec::monotone(build_virtual_locations(&[], &TimeKernel::Rbf { lengthscale: 0.3 }, (0.0, 1.0)));
        let a = constrained_posterior(&model, &cs, &Query::time(0.4), 300, 11).unwrap();
        let b = constrained_posterior(&model, &cs, &Query::time(0.4), 300, 11).unwrap();
        assert_eq!(a.mean.to_bits(), b.mean.to_bits());
        assert_eq!(a.variance.to_bits(), b.variance.to_bits());
    }

    #[test]
    fn linear_epoch_kernel_rejected() {
        let k = KernelSpec::time_only(TimeKernel::Linear { bias_var: 0.1, slope_var: 1.0 });
        let model = GpModel::new(k, Dataset::empty(1e-6), Scaling::None).unwrap();
        assert!(matches!(MonotoneGp::new(model, MonotoneSettings::default()), Err(Error::Unsupported(_))));
    }
}
