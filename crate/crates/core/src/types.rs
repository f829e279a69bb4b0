use serde::{Deserialize, Serialize};

/// A point of the joint input domain: a configuration in the unit cube paired
/// with a normalized epoch `t / t_max` in `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Query {
    pub x: Vec<f64>,
    pub t: f64,
}

impl Query {
    pub fn new(x: Vec<f64>, t: f64) -> Self {
        Query { x, t }
    }

    /// A query over the epoch dimension only (zero configuration dims).
    pub fn time(t: f64) -> Self {
        Query { x: Vec::new(), t }
    }

    /// Query for integer epoch `epoch` out of `t_max`.
    pub fn at_epoch(x: &[f64], epoch: u32, t_max: u32) -> Self {
        Query {
            x: x.to_vec(),
            t: epoch as f64 / t_max as f64,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.t.is_finite() && self.x.iter().all(|v| v.is_finite())
    }
}

/// One point of a learning curve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveObservation {
    pub x: Vec<f64>,
    pub epoch: u32,
    pub value: f64,
    pub cumulative_cost: f64,
}

impl CurveObservation {
    pub fn query(&self, t_max: u32) -> Query {
        Query::at_epoch(&self.x, self.epoch, t_max)
    }
}

/// Equality of normalized configurations up to `1e-9` per coordinate.
pub fn same_config(a: &[f64], b: &[f64]) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(u, v)| (u - v).abs() <= 1e-9)
}

/// Lexicographic comparison of configurations, used for deterministic tie-breaks.
pub fn lex_cmp(a: &[f64], b: &[f64]) -> std::cmp::Ordering {
    for (u, v) in a.iter().zip(b) {
        match u.total_cmp(v) {
            std::cmp::Ordering::Equal => continue,
            o => return o,
        }
    }
    a.len().cmp(&b.len())
}
