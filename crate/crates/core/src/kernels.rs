//! Covariance functions over joint `(configuration, epoch)` inputs.
//!
//! All kernels used by the optimizer are products of an ARD squared-exponential
//! factor over the configuration and a one-dimensional factor over the
//! normalized epoch. The epoch factor is one of
//!
//! * RBF: `exp(-(t - t')² / 2l²)`
//! * exponential decay (ED): `w + (t/β + t'/β + 1)^(-α)`
//! * linear: `σ_b² + σ_v² t t'`
//!
//! The constrained GP needs `∂K/∂t'` and `∂²K/∂t∂t'`; these are available for
//! the RBF and ED epoch factors. Derivatives with respect to configuration
//! coordinates are not provided.

use std::collections::HashMap;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::Query;

/// One-dimensional kernel over the normalized epoch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum TimeKernel {
    Rbf { lengthscale: f64 },
    ExpDecay { alpha: f64, beta: f64, w: f64 },
    Linear { bias_var: f64, slope_var: f64 },
}

/// ARD squared-exponential kernel over configuration coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigKernel {
    pub lengthscales: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum KernelSpec {
    /// Kernel over the epoch only; configuration coordinates are ignored.
    Time { time: TimeKernel, output_scale: f64 },
    /// Kernel over the configuration only; the epoch is ignored.
    Config { config: ConfigKernel, output_scale: f64 },
    /// `output_scale · K_x(x, x') · K_t(t, t')`.
    Product {
        config: ConfigKernel,
        time: TimeKernel,
        output_scale: f64,
    },
}

impl TimeKernel {
    pub fn eval(&self, t: f64, t2: f64) -> f64 {
        match *self {
            TimeKernel::Rbf { lengthscale } => {
                let r = (t - t2) / lengthscale;
                (-0.5 * r * r).exp()
            }
            TimeKernel::ExpDecay { alpha, beta, w } => w + (t / beta + t2 / beta + 1.0).powf(-alpha),
            TimeKernel::Linear { bias_var, slope_var } => bias_var + slope_var * t * t2,
        }
    }

    /// `∂K_t/∂t'`, derivative with respect to the second argument.
    pub fn grad(&self, t: f64, t2: f64) -> Result<f64> {
        match *self {
            TimeKernel::Rbf { lengthscale } => {
                let l2 = lengthscale * lengthscale;
                Ok((t - t2) / l2 * self.eval(t, t2))
            }
            TimeKernel::ExpDecay { alpha, beta, .. } => {
                Ok(-(alpha / beta) * (t / beta + t2 / beta + 1.0).powf(-alpha - 1.0))
            }
            TimeKernel::Linear { .. } => Err(Error::Unsupported(
                "epoch derivatives of the linear kernel".into(),
            )),
        }
    }

    /// `∂²K_t/∂t∂t'`.
    pub fn hess(&self, t: f64, t2: f64) -> Result<f64> {
        match *self {
            TimeKernel::Rbf { lengthscale } => {
                let l2 = lengthscale * lengthscale;
                let d = t - t2;
                Ok((1.0 - d * d / l2) / l2 * self.eval(t, t2))
            }
            TimeKernel::ExpDecay { alpha, beta, .. } => Ok(alpha * (alpha + 1.0) / (beta * beta)
                * (t / beta + t2 / beta + 1.0).powf(-alpha - 2.0)),
            TimeKernel::Linear { .. } => Err(Error::Unsupported(
                "epoch derivatives of the linear kernel".into(),
            )),
        }
    }

    pub fn supports_derivatives(&self) -> bool {
        !matches!(self, TimeKernel::Linear { .. })
    }

    fn validate(&self) -> Result<()> {
        let ok = match *self {
            TimeKernel::Rbf { lengthscale } => lengthscale.is_finite() && lengthscale > 0.0,
            TimeKernel::ExpDecay { alpha, beta, w } => {
                alpha.is_finite() && alpha > 0.0 && beta.is_finite() && beta > 0.0 && w.is_finite() && w >= 0.0
            }
            TimeKernel::Linear { bias_var, slope_var } => {
                bias_var.is_finite() && bias_var >= 0.0 && slope_var.is_finite() && slope_var >= 0.0
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::ParameterDomain(format!("invalid epoch kernel {self:?}")))
        }
    }

    fn params(&self) -> Vec<f64> {
        match *self {
            TimeKernel::Rbf { lengthscale } => vec![lengthscale],
            TimeKernel::ExpDecay { alpha, beta, w } => vec![alpha, beta, w],
            TimeKernel::Linear { bias_var, slope_var } => vec![bias_var, slope_var],
        }
    }

    fn with_params(&self, p: &[f64]) -> TimeKernel {
        match self {
            TimeKernel::Rbf { .. } => TimeKernel::Rbf { lengthscale: p[0] },
            TimeKernel::ExpDecay { .. } => TimeKernel::ExpDecay {
                alpha: p[0],
                beta: p[1],
                w: p[2],
            },
            TimeKernel::Linear { .. } => TimeKernel::Linear {
                bias_var: p[0],
                slope_var: p[1],
            },
        }
    }
}

impl ConfigKernel {
    pub fn isotropic(dim: usize, lengthscale: f64) -> Self {
        ConfigKernel {
            lengthscales: vec![lengthscale; dim],
        }
    }

    pub fn eval(&self, x: &[f64], x2: &[f64]) -> f64 {
        let mut s = 0.0;
        for ((a, b), l) in x.iter().zip(x2).zip(&self.lengthscales) {
            let r = (a - b) / l;
            s += r * r;
        }
        (-0.5 * s).exp()
    }

    fn validate(&self) -> Result<()> {
        if self.lengthscales.iter().all(|l| l.is_finite() && *l > 0.0) {
            Ok(())
        } else {
            Err(Error::ParameterDomain(format!(
                "lengthscales must be positive, got {:?}",
                self.lengthscales
            )))
        }
    }
}

impl KernelSpec {
    /// Product of an ARD RBF over `dim` configuration coordinates and `time`.
    pub fn product(dim: usize, lengthscale: f64, time: TimeKernel) -> Self {
        KernelSpec::Product {
            config: ConfigKernel::isotropic(dim, lengthscale),
            time,
            output_scale: 1.0,
        }
    }

    pub fn time_only(time: TimeKernel) -> Self {
        KernelSpec::Time {
            time,
            output_scale: 1.0,
        }
    }

    pub fn output_scale(&self) -> f64 {
        match *self {
            KernelSpec::Time { output_scale, .. }
            | KernelSpec::Config { output_scale, .. }
            | KernelSpec::Product { output_scale, .. } => output_scale,
        }
    }

    pub fn time_kernel(&self) -> Option<&TimeKernel> {
        match self {
            KernelSpec::Time { time, .. } | KernelSpec::Product { time, .. } => Some(time),
            KernelSpec::Config { .. } => None,
        }
    }

    pub fn config_kernel(&self) -> Option<&ConfigKernel> {
        match self {
            KernelSpec::Config { config, .. } | KernelSpec::Product { config, .. } => Some(config),
            KernelSpec::Time { .. } => None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let scale = self.output_scale();
        if !(scale.is_finite() && scale > 0.0) {
            return Err(Error::ParameterDomain(format!(
                "output scale must be positive, got {scale}"
            )));
        }
        if let Some(c) = self.config_kernel() {
            c.validate()?;
        }
        if let Some(t) = self.time_kernel() {
            t.validate()?;
        }
        Ok(())
    }

    fn config_factor(&self, z: &Query, z2: &Query) -> f64 {
        self.config_kernel().map_or(1.0, |c| c.eval(&z.x, &z2.x))
    }

    /// Covariance `K(z, z2)`. Parameters are assumed valid; see [`kernel_eval`]
    /// for the checked entry point.
    pub fn eval(&self, z: &Query, z2: &Query) -> f64 {
        let kt = self.time_kernel().map_or(1.0, |t| t.eval(z.t, z2.t));
        self.output_scale() * self.config_factor(z, z2) * kt
    }

    /// Gram matrix `K(zs, zs)`, bitwise equal to pairwise [`KernelSpec::eval`].
    ///
    /// Learning-curve data repeats few configurations and few epochs, so the
    /// factors are tabulated over distinct values and multiplied out.
    pub fn gram(&self, zs: &[Query]) -> DMatrix<f64> {
        fn index<K: std::hash::Hash + Eq>(keys: impl Iterator<Item = K>) -> (Vec<usize>, Vec<usize>) {
            let mut seen = HashMap::new();
            let mut reps = Vec::new();
            let idx = keys
                .enumerate()
                .map(|(i, k)| {
                    *seen.entry(k).or_insert_with(|| {
                        reps.push(i);
                        reps.len() - 1
                    })
                })
                .collect();
            (idx, reps)
        }
        let n = zs.len();
        let (xi, xr) = index(zs.iter().map(|z| z.x.iter().map(|v| v.to_bits()).collect::<Vec<_>>()));
        let (ti, tr) = index(zs.iter().map(|z| z.t.to_bits()));
        let kx = DMatrix::from_fn(xr.len(), xr.len(), |a, b| self.config_factor(&zs[xr[a]], &zs[xr[b]]));
        let kt = DMatrix::from_fn(tr.len(), tr.len(), |a, b| {
            self.time_kernel().map_or(1.0, |t| t.eval(zs[tr[a]].t, zs[tr[b]].t))
        });
        let scale = self.output_scale();
        let mut k = DMatrix::zeros(n, n);
        for j in 0..n {
            for i in j..n {
                let v = scale * kx[(xi[i], xi[j])] * kt[(ti[i], ti[j])];
                k[(i, j)] = v;
                k[(j, i)] = v;
            }
        }
        k
    }

    /// `∂K(z, z2)/∂t'` where `t'` is the epoch of `z2`.
    pub fn grad_t(&self, z: &Query, z2: &Query) -> Result<f64> {
        let time = self.derivative_factor()?;
        Ok(self.output_scale() * self.config_factor(z, z2) * time.grad(z.t, z2.t)?)
    }

    /// `∂²K(z, z2)/∂t∂t'`.
    pub fn hess_tt(&self, z: &Query, z2: &Query) -> Result<f64> {
        let time = self.derivative_factor()?;
        Ok(self.output_scale() * self.config_factor(z, z2) * time.hess(z.t, z2.t)?)
    }

    fn derivative_factor(&self) -> Result<&TimeKernel> {
        match self.time_kernel() {
            Some(t) if t.supports_derivatives() => Ok(t),
            Some(t) => Err(Error::Unsupported(format!("epoch derivatives for {t:?}"))),
            None => Err(Error::Unsupported(
                "epoch derivatives of a configuration-only kernel".into(),
            )),
        }
    }

    /// Hyperparameters in natural units: output scale, configuration
    /// lengthscales, then the epoch-factor parameters.
    pub fn params(&self) -> Vec<f64> {
        let mut p = vec![self.output_scale()];
        if let Some(c) = self.config_kernel() {
            p.extend_from_slice(&c.lengthscales);
        }
        if let Some(t) = self.time_kernel() {
            p.extend(t.params());
        }
        p
    }

    /// Rebuilds the spec from a vector laid out as [`KernelSpec::params`].
    pub fn with_params(&self, p: &[f64]) -> KernelSpec {
        let output_scale = p[0];
        let mut rest = &p[1..];
        let config = self.config_kernel().map(|c| {
            let n = c.lengthscales.len();
            let out = ConfigKernel {
                lengthscales: rest[..n].to_vec(),
            };
            rest = &rest[n..];
            out
        });
        let time = self.time_kernel().map(|t| t.with_params(rest));
        match (config, time) {
            (Some(config), Some(time)) => KernelSpec::Product {
                config,
                time,
                output_scale,
            },
            (Some(config), None) => KernelSpec::Config {
                config,
                output_scale,
            },
            (None, Some(time)) => KernelSpec::Time { time, output_scale },
            (None, None) => unreachable!("a kernel has at least one factor"),
        }
    }
}

fn check_inputs(spec: &KernelSpec, z: &Query, z2: &Query) -> Result<()> {
    spec.validate()?;
    if !z.is_finite() || !z2.is_finite() {
        return Err(Error::ParameterDomain("non-finite kernel input".into()));
    }
    Ok(())
}

/// Checked covariance evaluation.
pub fn kernel_eval(spec: &KernelSpec, z: &Query, z2: &Query) -> Result<f64> {
    check_inputs(spec, z, z2)?;
    Ok(spec.eval(z, z2))
}

/// Checked `∂K/∂t'`.
pub fn kernel_grad_t(spec: &KernelSpec, z: &Query, z2: &Query) -> Result<f64> {
    check_inputs(spec, z, z2)?;
    spec.grad_t(z, z2)
}

/// Checked `∂²K/∂t∂t'`.
pub fn kernel_hess_tt(spec: &KernelSpec, z: &Query, z2: &Query) -> Result<f64> {
    check_inputs(spec, z, z2)?;
    spec.hess_tt(z, z2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn ed(alpha: f64, beta: f64, w: f64) -> KernelSpec {
        KernelSpec::time_only(TimeKernel::ExpDecay { alpha, beta, w })
    }

    #[test]
    fn ed_identity_and_half() {
        let k = ed(1.0, 1.0, 0.0);
        assert_relative_eq!(kernel_eval(&k, &Query::time(0.0), &Query::time(0.0)).unwrap(), 1.0);
        assert_relative_eq!(kernel_eval(&k, &Query::time(1.0), &Query::time(0.0)).unwrap(), 0.5);
    }

    #[test]
    fn rbf_zero_distance_is_output_scale() {
        let k = KernelSpec::Time {
            time: TimeKernel::Rbf { lengthscale: 0.37 },
            output_scale: 2.5,
        };
        assert_relative_eq!(k.eval(&Query::time(0.4), &Query::time(0.4)), 2.5);
    }

    #[test]
    fn linear_bias_only() {
        let k = KernelSpec::time_only(TimeKernel::Linear {
            bias_var: 0.1,
            slope_var: 1.0,
        });
        assert_relative_eq!(k.eval(&Query::time(0.7), &Query::time(0.0)), 0.1);
    }

    #[test]
    fn derivative_closed_forms() {
        let rbf = KernelSpec::time_only(TimeKernel::Rbf { lengthscale: 0.3 });
        assert_eq!(kernel_grad_t(&rbf, &Query::time(0.2), &Query::time(0.2)).unwrap(), 0.0);
        let rbf1 = KernelSpec::time_only(TimeKernel::Rbf { lengthscale: 1.0 });
        assert_relative_eq!(kernel_hess_tt(&rbf1, &Query::time(0.5), &Query::time(0.5)).unwrap(), 1.0);

        let k = ed(1.0, 1.0, 0.0);
        assert_relative_eq!(kernel_grad_t(&k, &Query::time(0.0), &Query::time(0.0)).unwrap(), -1.0);
        assert_relative_eq!(kernel_hess_tt(&k, &Query::time(0.0), &Query::time(0.0)).unwrap(), 2.0);
    }

    #[test]
    fn linear_derivatives_unsupported() {
        let k = KernelSpec::time_only(TimeKernel::Linear {
            bias_var: 0.1,
            slope_var: 1.0,
        });
        let err = kernel_grad_t(&k, &Query::time(0.1), &Query::time(0.2)).unwrap_err();
        assert!(matches!(err, Error::Unsupported(_)));
        let cfg = KernelSpec::Config {
            config: ConfigKernel::isotropic(2, 0.5),
            output_scale: 1.0,
        };
        let q = Query::new(vec![0.1, 0.2], 0.3);
        assert!(matches!(kernel_hess_tt(&cfg, &q, &q), Err(Error::Unsupported(_))));
    }

    #[test]
    fn invalid_specs_and_inputs_rejected() {
        let bad = KernelSpec::time_only(TimeKernel::Rbf { lengthscale: -1.0 });
        assert!(matches!(
            kernel_eval(&bad, &Query::time(0.0), &Query::time(0.0)),
            Err(Error::ParameterDomain(_))
        ));
        let bad_w = ed(1.0, 1.0, -0.1);
        assert!(bad_w.validate().is_err());
        let k = ed(1.0, 1.0, 0.0);
        assert!(kernel_eval(&k, &Query::time(f64::NAN), &Query::time(0.0)).is_err());
    }

    #[test]
    fn params_round_trip() {
        let k = KernelSpec::Product {
            config: ConfigKernel {
                lengthscales: vec![0.2, 0.4],
            },
            time: TimeKernel::ExpDecay {
                alpha: 1.5,
                beta: 0.7,
                w: 0.1,
            },
            output_scale: 3.0,
        };
        let p = k.params();
        assert_eq!(p, vec![3.0, 0.2, 0.4, 1.5, 0.7, 0.1]);
        assert_eq!(k.with_params(&p), k);
    }
}
