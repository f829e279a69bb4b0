//! Sampling from Gaussians truncated to a hyper-rectangle.
//!
//! The univariate sampler is exact (rejection with uniform, Gaussian or
//! translated-exponential proposals depending on the interval). The
//! multivariate sampler is a coordinate-wise Gibbs chain driven by the
//! univariate sampler.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::linalg::jittered_cholesky;

/// Draws from `N(0, 1)` truncated to `[a, b]`.
pub fn sample_standard<R: Rng + ?Sized>(a: f64, b: f64, rng: &mut R) -> f64 {
    debug_assert!(a <= b);
    if a >= b {
        return a;
    }
    if a >= 0.0 {
        sample_right_of_zero(a, b, rng)
    } else if b <= 0.0 {
        -sample_right_of_zero(-b, -a, rng)
    } else if b - a < 2.0 {
        // Interval straddles zero: uniform proposal, density peak at 0.
        loop {
            let u = a + (b - a) * rng.random::<f64>();
            if rng.random::<f64>() <= (-0.5 * u * u).exp() {
                return u;
            }
        }
    } else {
        loop {
            let z: f64 = StandardNormal.sample(rng);
            if z >= a && z <= b {
                return z;
            }
        }
    }
}

/// `0 <= a < b`: translated exponential proposal truncated to `[a, b]`.
fn sample_right_of_zero<R: Rng + ?Sized>(a: f64, b: f64, rng: &mut R) -> f64 {
    let rate = 0.5 * (a + (a * a + 4.0).sqrt());
    let width = b - a;
    // Mass of the exponential on [0, width]; 1 when b is infinite.
    let mass = if width.is_finite() { -(-rate * width).exp_m1() } else { 1.0 };
    let peak = rate.clamp(a, b);
    loop {
        let u: f64 = rng.random();
        let z = a - (-u * mass).ln_1p() / rate;
        let z = z.min(b);
        let log_accept = -0.5 * (z - rate).powi(2) + 0.5 * (peak - rate).powi(2);
        if rng.random::<f64>().ln() <= log_accept {
            return z;
        }
    }
}

/// Draws from `N(mean, sd²)` truncated to `[a, b]`.
pub fn sample_univariate<R: Rng + ?Sized>(mean: f64, sd: f64, a: f64, b: f64, rng: &mut R) -> f64 {
    if sd <= 0.0 {
        return mean.clamp(a, b);
    }
    let z = sample_standard((a - mean) / sd, (b - mean) / sd, rng);
    (mean + sd * z).clamp(a, b)
}

#[derive(Debug, Clone, Copy)]
pub struct GibbsOptions {
    pub burn_in: usize,
    pub thin: usize,
}

impl Default for GibbsOptions {
    fn default() -> Self {
        GibbsOptions { burn_in: 100, thin: 5 }
    }
}

/// Draws `n` samples (rows of the result) from `N(mean, cov)` truncated to
/// `[lower, upper]`.
///
/// When every bound is infinite the distribution is an ordinary Gaussian and
/// is sampled directly from its Cholesky factor.
pub fn sample_truncated_mvn<R: Rng + ?Sized>(
    mean: &DVector<f64>,
    cov: &DMatrix<f64>,
    lower: &[f64],
    upper: &[f64],
    n: usize,
    opts: GibbsOptions,
    rng: &mut R,
) -> Result<DMatrix<f64>> {
    let k = mean.len();
    if cov.nrows() != k || cov.ncols() != k || lower.len() != k || upper.len() != k {
        return Err(Error::ParameterDomain("truncated normal dimensions disagree".into()));
    }
    if lower.iter().zip(upper).any(|(a, b)| !(a <= b)) {
        return Err(Error::ParameterDomain("lower bound exceeds upper bound".into()));
    }
    let (chol, _) = jittered_cholesky(cov).map_err(|e| Error::IllConditionedConstraint(e.to_string()))?;
    let mut out = DMatrix::zeros(n, k);

    let vacuous = lower.iter().all(|a| *a == f64::NEG_INFINITY) && upper.iter().all(|b| *b == f64::INFINITY);
    if vacuous {
        let l = chol.l();
        let eps = moment_matched_normals(n, k, rng);
        for r in 0..n {
            let s = mean + &l * eps.row(r).transpose();
            out.set_row(r, &s.transpose());
        }
        return Ok(out);
    }

    if let Some(accepted) = rejection(mean, &chol.l(), lower, upper, n, rng) {
        return Ok(accepted);
    }

    // Conditional of coordinate i given the rest: mean_i + Σ_j coef_ij d_j
    // with d = x − mean, and sd 1/√P_ii.
    let precision = chol.inverse();
    let mut coef = vec![0.0; k * k];
    for i in 0..k {
        for j in 0..k {
            if j != i {
                coef[i * k + j] = -precision[(i, j)] / precision[(i, i)];
            }
        }
    }
    let cond_sd: Vec<f64> = (0..k).map(|i| (1.0 / precision[(i, i)]).sqrt()).collect();
    let mean = mean.as_slice();
    let mut x: Vec<f64> = (0..k).map(|i| mean[i].clamp(lower[i], upper[i])).collect();
    let mut d: Vec<f64> = x.iter().zip(mean).map(|(x, m)| x - m).collect();

    let mut sweep = |x: &mut Vec<f64>, rng: &mut R| {
        for i in 0..k {
            let row = &coef[i * k..(i + 1) * k];
            let m = mean[i] + row.iter().zip(&d).map(|(c, d)| c * d).sum::<f64>();
            x[i] = sample_univariate(m, cond_sd[i], lower[i], upper[i], rng);
            d[i] = x[i] - mean[i];
        }
    };

    for _ in 0..opts.burn_in {
        sweep(&mut x, rng);
    }
    let thin = opts.thin.max(1);
    for r in 0..n {
        for _ in 0..thin {
            sweep(&mut x, rng);
        }
        for (c, v) in x.iter().enumerate() {
            out[(r, c)] = *v;
        }
    }
    Ok(out)
}

/// Proposals allowed per requested sample before rejection gives up. A
/// proposal costs about as much as a tenth of the Gibbs work per sample.
const REJECTION_PROPOSALS: usize = 10;

/// Exact draws by rejection from the untruncated Gaussian, or `None` when
/// fewer than `n` of `REJECTION_PROPOSALS · n` proposals would land in the
/// box. Gives up early once the first `n` proposals show that.
fn rejection<R: Rng + ?Sized>(
    mean: &DVector<f64>,
    l: &DMatrix<f64>,
    lower: &[f64],
    upper: &[f64],
    n: usize,
    rng: &mut R,
) -> Option<DMatrix<f64>> {
    let k = mean.len();
    let mut out = DMatrix::zeros(n, k);
    let mut eps = vec![0.0; k];
    let mut s = vec![0.0; k];
    let mut accepted = 0;
    for tried in 0..REJECTION_PROPOSALS * n {
        if tried == n && accepted * REJECTION_PROPOSALS < n {
            return None;
        }
        eps.iter_mut().for_each(|e| *e = StandardNormal.sample(rng));
        // Lower-triangular product, row by row, stopping at the first miss.
        let mut inside = true;
        for i in 0..k {
            let mut v = mean[i];
            for (j, e) in eps.iter().enumerate().take(i + 1) {
                v += l[(i, j)] * e;
            }
            if !(v >= lower[i] && v <= upper[i]) {
                inside = false;
                break;
            }
            s[i] = v;
        }
        if inside {
            for (c, v) in s.iter().enumerate() {
                out[(accepted, c)] = *v;
            }
            accepted += 1;
            if accepted == n {
                return Some(out);
            }
        }
    }
    None
}

/// `n × k` standard-normal draws transformed so that their sample mean is
/// exactly zero and their sample covariance exactly the identity. Falls back
/// to plain draws when `n <= k` or the sample covariance is singular.
fn moment_matched_normals<R: Rng + ?Sized>(n: usize, k: usize, rng: &mut R) -> DMatrix<f64> {
    let mut eps = DMatrix::from_fn(n, k, |_, _| StandardNormal.sample(rng));
    if n <= k {
        return eps;
    }
    for c in 0..k {
        let m = eps.column(c).sum() / n as f64;
        eps.column_mut(c).add_scalar_mut(-m);
    }
    let cov = eps.tr_mul(&eps) / (n as f64 - 1.0);
    match cov.cholesky() {
        // Rows e become L⁻¹ e, whose sample covariance is L⁻¹ cov L⁻ᵀ = I.
        Some(chol) => chol
            .l()
            .solve_lower_triangular(&eps.transpose())
            .map(|w| w.transpose())
            .unwrap_or(eps),
        None => eps,
    }
}

/// Fraction of `n` untruncated draws from `N(mean, cov)` inside the box.
pub fn box_probability<R: Rng + ?Sized>(
    mean: &DVector<f64>,
    cov: &DMatrix<f64>,
    lower: &[f64],
    upper: &[f64],
    n: usize,
    rng: &mut R,
) -> Result<f64> {
    let k = mean.len();
    let (chol, _) = jittered_cholesky(cov).map_err(|e| Error::IllConditionedConstraint(e.to_string()))?;
    let l = chol.l();
    let mut inside = 0usize;
    for _ in 0..n {
        let eps = DVector::from_fn(k, |_, _| StandardNormal.sample(rng));
        let s = mean + &l * eps;
        if s.iter().enumerate().all(|(i, v)| *v >= lower[i] && *v <= upper[i]) {
            inside += 1;
        }
    }
    Ok(inside as f64 / n.max(1) as f64)
}
