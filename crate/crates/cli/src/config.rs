//! JSON run configuration.

use std::path::{Path, PathBuf};

use bapi_core::{BapiConfig, Method, SyntheticSpec};
use serde::{Deserialize, Deserializer, Serialize};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum BackendConfig {
    Synthetic(SyntheticSpec),
    /// Path of a curve-table CSV; its JSON sidecar sits next to it.
    Table { path: PathBuf },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub backend: BackendConfig,
    /// One method or a list, run in the given order.
    #[serde(alias = "method", deserialize_with = "one_or_many")]
    pub methods: Vec<Method>,
    pub budget: f64,
    /// Overrides the synthetic learner's epoch count; must match a table's.
    #[serde(default)]
    pub t_max: Option<u32>,
    #[serde(default = "defaults::epsilon")]
    pub epsilon: f64,
    #[serde(default = "defaults::tau")]
    pub tau: f64,
    /// Checkpoint block as a fraction of `t_max`.
    #[serde(default = "defaults::p")]
    pub p: f64,
    #[serde(default = "defaults::max_horizon")]
    pub max_horizon: usize,
    #[serde(default = "defaults::n_init")]
    pub n_init: usize,
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    /// Draw a fresh synthetic landscape per seed (`spec.seed + seed`).
    #[serde(default)]
    pub problem_per_seed: bool,
    #[serde(default)]
    pub tuning: Tuning,
}

/// Settings of the optimizer internals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tuning {
    pub n_mc: usize,
    pub constraint_samples: usize,
    pub refit_every: usize,
    pub fit_restarts: usize,
    pub fit_max_iter: usize,
}

impl Default for Tuning {
    fn default() -> Self {
        let d = BapiConfig::default();
        Tuning {
            n_mc: d.n_mc,
            constraint_samples: d.constraint_samples,
            refit_every: d.refit_every,
            fit_restarts: d.fit_restarts,
            fit_max_iter: d.fit_max_iter,
        }
    }
}

mod defaults {
    pub fn epsilon() -> f64 {
        0.01
    }
    pub fn tau() -> f64 {
        2.0
    }
    pub fn p() -> f64 {
        0.2
    }
    pub fn max_horizon() -> usize {
        4
    }
    pub fn n_init() -> usize {
        5
    }
}

fn one_or_many<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Method>, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum OneOrMany {
        One(Method),
        Many(Vec<Method>),
    }
    Ok(match OneOrMany::deserialize(d)? {
        OneOrMany::One(m) => vec![m],
        OneOrMany::Many(v) => v,
    })
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        let cfg: RunConfig = serde_json::from_str(text).map_err(|e| CliError::Config(format!("invalid run config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut cfg = Self::from_json(&text)?;
        // Table paths are relative to the config file.
        if let BackendConfig::Table { path: p } = &mut cfg.backend {
            if p.is_relative() {
                if let Some(dir) = path.parent() {
                    *p = dir.join(&*p);
                }
            }
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |m: &str| Err(CliError::Config(m.to_string()));
        if !(self.budget.is_finite() && self.budget > 0.0) {
            return bad("budget must be positive");
        }
        if !(self.p > 0.0 && self.p <= 1.0) {
            return bad("p must lie in (0, 1]");
        }
        if self.max_horizon < 1 {
            return bad("max_horizon must be at least 1");
        }
        if self.seeds.is_empty() {
            return bad("seeds must not be empty");
        }
        if self.methods.is_empty() {
            return bad("at least one method is required");
        }
        let mut seen = Vec::new();
        for m in &self.methods {
            if seen.contains(m) {
                return Err(CliError::Config(format!("method {m} listed twice")));
            }
            seen.push(*m);
        }
        if self.t_max == Some(0) {
            return bad("t_max must be positive");
        }
        if let BackendConfig::Synthetic(spec) = &self.backend {
            let mut s = spec.clone();
            if let Some(t) = self.t_max {
                s.t_max = t;
            }
            s.validate().map_err(|e| CliError::Config(e.to_string()))?;
        }
        self.optimizer(0).validate().map_err(|e| CliError::Config(e.to_string()))?;
        Ok(())
    }

    /// Optimizer settings for one seed.
    pub fn optimizer(&self, seed: u64) -> BapiConfig {
        BapiConfig {
            budget: self.budget,
            epsilon: self.epsilon,
            tau: self.tau,
            block_fraction: self.p,
            max_horizon: self.max_horizon,
            n_init: self.n_init,
            seed,
            n_mc: self.tuning.n_mc,
            constraint_samples: self.tuning.constraint_samples,
            refit_every: self.tuning.refit_every,
            fit_restarts: self.tuning.fit_restarts,
            fit_max_iter: self.tuning.fit_max_iter,
        }
    }
}
