use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::Backend;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CurveFamily {
    /// `y∞ (1 − exp(−t / λ))`
    Exponential,
    /// `y∞ / (1 + exp(−(t − t_mid) / λ))`
    Logistic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct CosTerm {
    amp: f64,
    freq: Vec<f64>,
    phase: f64,
}

/// A smooth function from the unit cube onto `[lo, hi]`, built from a sum of
/// cosines of linear projections of `x`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Smooth {
    pub lo: f64,
    pub hi: f64,
    terms: Vec<CosTerm>,
}

impl Smooth {
    pub fn constant(v: f64) -> Self {
        Smooth { lo: v, hi: v, terms: Vec::new() }
    }

    /// `n_terms` random cosines with projection weights drawn from
    /// `N(0, bandwidth²)` per dimension.
    pub fn random<R: Rng + ?Sized>(dim: usize, lo: f64, hi: f64, n_terms: usize, bandwidth: f64, rng: &mut R) -> Self {
        let mut terms: Vec<CosTerm> = (0..n_terms)
            .map(|_| CosTerm {
                amp: 0.2 + rng.random::<f64>(),
                freq: (0..dim)
                    .map(|_| {
                        let z: f64 = StandardNormal.sample(&mut *rng);
                        bandwidth * z
                    })
                    .collect(),
                phase: std::f64::consts::TAU * rng.random::<f64>(),
            })
            .collect();
        let total: f64 = terms.iter().map(|t| t.amp).sum();
        for t in &mut terms {
            t.amp /= total;
        }
        Smooth { lo, hi, terms }
    }

    /// Position within `[0, 1]` before mapping onto `[lo, hi]`.
    pub fn unit(&self, x: &[f64]) -> f64 {
        let g: f64 = self
            .terms
            .iter()
            .map(|t| {
                let proj: f64 = t.freq.iter().zip(x).map(|(w, v)| w * v).sum();
                t.amp * (std::f64::consts::TAU * proj + t.phase).cos()
            })
            .sum();
        (0.5 * (1.0 + g)).clamp(0.0, 1.0)
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.map_unit(self.unit(x))
    }

    fn map_unit(&self, u: f64) -> f64 {
        self.lo + (self.hi - self.lo) * u
    }
}

/// Parameters for generating a random synthetic learner.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticSpec {
    pub dim: usize,
    pub t_max: u32,
    pub family: CurveFamily,
    pub noise_sd: f64,
    pub seed: u64,
    /// Range of the asymptotic value.
    pub asymptote: (f64, f64),
    /// Range of the rate constant λ, as a fraction of `t_max`.
    pub rate: (f64, f64),
    /// Range of the logistic midpoint, as a fraction of `t_max`.
    pub midpoint: (f64, f64),
    /// Range of the per-epoch cost.
    pub slope: (f64, f64),
    /// Range of the fixed start-up cost.
    pub overhead: (f64, f64),
    /// In `[0, 1]`: how strongly the per-epoch cost follows the asymptote.
    pub cost_coupling: f64,
    /// In `[0, 1]`: how strongly slow learning follows the asymptote.
    pub rate_coupling: f64,
    pub n_terms: usize,
    pub bandwidth: f64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec {
            dim: 3,
            t_max: 50,
            family: CurveFamily::Exponential,
            noise_sd: 0.0,
            seed: 0,
            asymptote: (0.3, 0.95),
            rate: (0.05, 0.4),
            midpoint: (0.2, 0.6),
            slope: (0.5, 2.0),
            overhead: (0.0, 1.0),
            cost_coupling: 0.0,
            rate_coupling: 0.0,
            n_terms: 4,
            bandwidth: 0.8,
        }
    }
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        let range_ok = |(lo, hi): (f64, f64)| lo.is_finite() && hi.is_finite() && lo <= hi;
        let bad = |m: &str| Err(Error::ParameterDomain(m.into()));
        if self.dim == 0 {
            return bad("synthetic problem needs at least one dimension");
        }
        if self.t_max == 0 {
            return bad("t_max must be positive");
        }
        if !(self.noise_sd >= 0.0 && self.noise_sd.is_finite()) {
            return bad("noise_sd must be nonnegative");
        }
        for (name, r) in [
            ("asymptote", self.asymptote),
            ("rate", self.rate),
            ("midpoint", self.midpoint),
            ("slope", self.slope),
            ("overhead", self.overhead),
        ] {
            if !range_ok(r) {
                return Err(Error::ParameterDomain(format!("{name} range must satisfy lo <= hi")));
            }
        }
        if !(self.rate.0 > 0.0 && self.slope.0 > 0.0 && self.overhead.0 >= 0.0) {
            return bad("rate and slope must be positive, overhead nonnegative");
        }
        if !(self.asymptote.0 >= 0.0 && self.asymptote.1 <= 1.0) {
            return bad("asymptote range must lie in [0, 1]");
        }
        for c in [self.cost_coupling, self.rate_coupling] {
            if !(0.0..=1.0).contains(&c) {
                return bad("couplings must lie in [0, 1]");
            }
        }
        Ok(())
    }
}

/// Deterministic simulator of an iterative learner with monotone curves and
/// costs linear in the epoch count.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticProblem {
    pub dim: usize,
    pub t_max: u32,
    pub family: CurveFamily,
    pub asymptote: Smooth,
    /// λ in epochs.
    pub rate: Smooth,
    /// Logistic midpoint in epochs.
    pub midpoint: Smooth,
    pub slope: Smooth,
    pub overhead: Smooth,
    pub cost_coupling: f64,
    pub rate_coupling: f64,
    pub noise_sd: f64,
    pub seed: u64,
}

impl SyntheticProblem {
    pub fn new(spec: &SyntheticSpec) -> Result<Self> {
        spec.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        let d = spec.dim;
        let tm = spec.t_max as f64;
        let mut smooth = |(lo, hi): (f64, f64)| Smooth::random(d, lo, hi, spec.n_terms, spec.bandwidth, &mut rng);
        Ok(SyntheticProblem {
            dim: d,
            t_max: spec.t_max,
            family: spec.family,
            asymptote: smooth(spec.asymptote),
            rate: smooth((spec.rate.0 * tm, spec.rate.1 * tm)),
            midpoint: smooth((spec.midpoint.0 * tm, spec.midpoint.1 * tm)),
            slope: smooth(spec.slope),
            overhead: smooth(spec.overhead),
            cost_coupling: spec.cost_coupling,
            rate_coupling: spec.rate_coupling,
            noise_sd: spec.noise_sd,
            seed: spec.seed,
        })
    }

    pub fn asymptote_at(&self, x: &[f64]) -> f64 {
        self.asymptote.eval(x)
    }

    pub fn rate_at(&self, x: &[f64]) -> f64 {
        let c = self.rate_coupling;
        let u = (1.0 - c) * self.rate.unit(x) + c * self.asymptote.unit(x);
        self.rate.map_unit(u)
    }

    pub fn midpoint_at(&self, x: &[f64]) -> f64 {
        self.midpoint.eval(x)
    }

    pub fn slope_at(&self, x: &[f64]) -> f64 {
        let c = self.cost_coupling;
        let u = (1.0 - c) * self.slope.unit(x) + c * self.asymptote.unit(x);
        self.slope.map_unit(u)
    }

    pub fn overhead_at(&self, x: &[f64]) -> f64 {
        self.overhead.eval(x)
    }

    /// Curve value without observation noise.
    pub fn clean_value(&self, x: &[f64], epoch: u32) -> f64 {
        let t = epoch as f64;
        let y_inf = self.asymptote_at(x);
        let lambda = self.rate_at(x);
        match self.family {
            CurveFamily::Exponential => y_inf * -(-t / lambda).exp_m1(),
            CurveFamily::Logistic => y_inf / (1.0 + (-(t - self.midpoint_at(x)) / lambda).exp()),
        }
    }

    pub fn cost(&self, x: &[f64], epoch: u32) -> f64 {
        self.slope_at(x) * epoch as f64 + self.overhead_at(x)
    }

    fn check(&self, x: &[f64], epoch: u32) -> Result<()> {
        if x.len() != self.dim {
            return Err(Error::Domain(format!("expected {} coordinates, got {}", self.dim, x.len())));
        }
        if x.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::Domain(format!("configuration {x:?} outside the unit cube")));
        }
        if epoch == 0 || epoch > self.t_max {
            return Err(Error::Domain(format!("epoch {epoch} outside 1..={}", self.t_max)));
        }
        Ok(())
    }

    /// Noise for `(x, epoch)`, drawn from a generator keyed on the inputs so
    /// that evaluation order never matters.
    fn noise(&self, x: &[f64], epoch: u32) -> f64 {
        if self.noise_sd == 0.0 {
            return 0.0;
        }
        let mut h = splitmix64(self.seed ^ 0x5eed_0fc0_ffee);
        for v in x {
            h = splitmix64(h ^ v.to_bits());
        }
        h = splitmix64(h ^ epoch as u64);
        let z: f64 = StandardNormal.sample(&mut ChaCha8Rng::seed_from_u64(h));
        self.noise_sd * z
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

impl Backend for SyntheticProblem {
    fn dim(&self) -> usize {
        self.dim
    }

    fn t_max(&self) -> u32 {
        self.t_max
    }

    fn evaluate(&self, x: &[f64], epoch: u32) -> Result<(f64, f64)> {
        self.check(x, epoch)?;
        Ok((self.clean_value(x, epoch) + self.noise(x, epoch), self.cost(x, epoch)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn fixed(family: CurveFamily, y_inf: f64, lambda: f64) -> SyntheticProblem {
        SyntheticProblem {
            dim: 1,
            t_max: 100,
            family,
            asymptote: Smooth::constant(y_inf),
            rate: Smooth::constant(lambda),
            midpoint: Smooth::constant(30.0),
            slope: Smooth::constant(2.0),
            overhead: Smooth::constant(1.0),
            cost_coupling: 0.0,
            rate_coupling: 0.0,
            noise_sd: 0.0,
            seed: 0,
        }
    }

    #[test]
    fn exponential_closed_form() {
        let p = fixed(CurveFamily::Exponential, 0.9, 20.0);
        let (y, c) = p.evaluate(&[0.5], 20).unwrap();
        assert!((y - 0.9 * (1.0 - (-1.0f64).exp())).abs() < 1e-12);
        // 0.9 (1 − e⁻¹) = 0.568908…
        assert!((y - 0.568_908).abs() < 1e-6);
        let (_, c10) = p.evaluate(&[0.5], 10).unwrap();
        assert_eq!(c10, 21.0);
        assert_eq!(c, 41.0);
    }

    #[test]
    fn logistic_closed_form() {
        let p = fixed(CurveFamily::Logistic, 0.8, 5.0);
        let (y, _) = p.evaluate(&[0.1], 30).unwrap();
        assert!((y - 0.4).abs() < 1e-12);
    }

    #[test]
    fn domain_errors() {
        let p = SyntheticProblem::new(&SyntheticSpec::default()).unwrap();
        assert!(matches!(p.evaluate(&[0.5, 0.5], 1), Err(Error::Domain(_))));
        assert!(matches!(p.evaluate(&[0.5, 1.5, 0.5], 1), Err(Error::Domain(_))));
        assert!(matches!(p.evaluate(&[0.5, 0.5, 0.5], 0), Err(Error::Domain(_))));
        assert!(matches!(p.evaluate(&[0.5, 0.5, 0.5], 51), Err(Error::Domain(_))));
    }

    #[test]
    fn noise_is_keyed_on_inputs() {
        let spec = SyntheticSpec { noise_sd: 0.05, seed: 9, ..Default::default() };
        let a = SyntheticProblem::new(&spec).unwrap();
        let b = SyntheticProblem::new(&spec).unwrap();
        let x = [0.2, 0.7, 0.4];
        let first = a.evaluate(&x, 12).unwrap();
        for e in 1..=50 {
            b.evaluate(&[0.9, 0.1, 0.3], e).unwrap();
        }
        let second = b.evaluate(&x, 12).unwrap();
        assert_eq!(first.0.to_bits(), second.0.to_bits());
        assert_ne!(a.evaluate(&x, 13).unwrap().0 - a.clean_value(&x, 13), first.0 - a.clean_value(&x, 12));
    }

    #[test]
    fn spec_validation() {
        let bad = SyntheticSpec { asymptote: (0.5, 1.5), ..Default::default() };
        assert!(bad.validate().is_err());
        let bad = SyntheticSpec { slope: (0.0, 1.0), ..Default::default() };
        assert!(bad.validate().is_err());
        let bad = SyntheticSpec { cost_coupling: 2.0, ..Default::default() };
        assert!(bad.validate().is_err());
    }

    proptest! {
        #[test]
        fn noiseless_curves_are_monotone_and_costs_linear(
            seed in 0u64..1000,
            logistic in any::<bool>(),
            x in prop::collection::vec(0.0f64..=1.0, 3),
        ) {
            let spec = SyntheticSpec {
                seed,
                family: if logistic { CurveFamily::Logistic } else { CurveFamily::Exponential },
                rate_coupling: 0.5,
                cost_coupling: 0.5,
                ..Default::default()
            };
            let p = SyntheticProblem::new(&spec).unwrap();
            let y_inf = p.asymptote_at(&x);
            prop_assert!((0.3..=0.95).contains(&y_inf));
            let mut prev = f64::NEG_INFINITY;
            for e in 1..=p.t_max {
                let (y, c) = p.evaluate(&x, e).unwrap();
                prop_assert!(y >= prev);
                prop_assert!(y <= y_inf + 1e-12);
                prop_assert_eq!(c, p.slope_at(&x) * e as f64 + p.overhead_at(&x));
                prev = y;
            }
        }
    }
}
