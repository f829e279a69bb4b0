//! Mean ± standard error of incumbent value on a common cost grid.

use std::path::Path;

use bapi_core::Trace;
use serde::{Deserialize, Serialize};

use crate::CliError;

pub const GRID_POINTS: usize = 200;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    pub method: String,
    pub cost: f64,
    pub mean: f64,
    pub stderr: f64,
    /// Number of traces that have started by this cost.
    pub n: usize,
}

/// Incumbent value at cost `c`: linear interpolation between trace rows,
/// the last value beyond the end, `None` before the first row.
pub fn incumbent_at(curve: &[(f64, f64)], c: f64) -> Option<f64> {
    let first = curve.first()?;
    if c < first.0 {
        return None;
    }
    let i = curve.partition_point(|p| p.0 <= c);
    if i >= curve.len() {
        return Some(curve[curve.len() - 1].1);
    }
    let (c0, y0) = curve[i - 1];
    let (c1, y1) = curve[i];
    Some(y0 + (y1 - y0) * (c - c0) / (c1 - c0))
}

/// `GRID_POINTS` evenly spaced costs over `[0, budget]`.
pub fn cost_grid(budget: f64) -> Vec<f64> {
    (0..GRID_POINTS).map(|i| budget * i as f64 / (GRID_POINTS - 1) as f64).collect()
}

fn mean_stderr(values: &mut [f64]) -> (f64, f64) {
    // Sorting first makes the result independent of the order of the traces.
    values.sort_by(f64::total_cmp);
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Aggregates `(method, trace)` pairs. Methods keep their order of first
/// appearance; grid points before any trace of a method has started are
/// skipped.
pub fn aggregate(traces: &[(String, Trace)], budget: f64) -> Vec<AggregateRow> {
    let mut methods: Vec<&str> = Vec::new();
    for (m, _) in traces {
        if !methods.contains(&m.as_str()) {
            methods.push(m);
        }
    }
    let grid = cost_grid(budget);
    let mut rows = Vec::new();
    for m in methods {
        let curves: Vec<Vec<(f64, f64)>> = traces
            .iter()
            .filter(|(name, _)| name == m)
            .map(|(_, t)| t.incumbent_curve())
            .collect();
        for &c in &grid {
            let mut vals: Vec<f64> = curves.iter().filter_map(|curve| incumbent_at(curve, c)).collect();
            if vals.is_empty() {
                continue;
            }
            let (mean, stderr) = mean_stderr(&mut vals);
            rows.push(AggregateRow { method: m.to_string(), cost: c, mean, stderr, n: vals.len() });
        }
    }
    rows
}

pub fn write_aggregate(rows: &[AggregateRow], path: &Path) -> Result<(), CliError> {
    let mut w = csv::Writer::from_path(path).map_err(CliError::runtime)?;
    for r in rows {
        w.serialize(r).map_err(CliError::runtime)?;
    }
    if rows.is_empty() {
        w.write_record(["method", "cost", "mean", "stderr", "n"]).map_err(CliError::runtime)?;
    }
    w.flush().map_err(CliError::runtime)?;
    Ok(())
}

pub fn read_aggregate(path: &Path) -> Result<Vec<AggregateRow>, CliError> {
    let mut r = csv::Reader::from_path(path).map_err(|e| CliError::Parse(format!("{}: {e}", path.display())))?;
    let headers = r.headers().map_err(|e| CliError::Parse(e.to_string()))?.clone();
    if headers.iter().ne(["method", "cost", "mean", "stderr", "n"]) {
        return Err(CliError::Parse(format!("{}: row 1: unexpected header", path.display())));
    }
    let mut rows = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let line = i + 2;
        let row: AggregateRow = rec
            .and_then(|rec| rec.deserialize(Some(&headers)))
            .map_err(|e| CliError::Parse(format!("{}: row {line}: {e}", path.display())))?;
        if !(row.cost.is_finite() && row.mean.is_finite() && row.stderr.is_finite()) {
            return Err(CliError::Parse(format!("{}: row {line}: non-finite value", path.display())));
        }
        rows.push(row);
    }
    Ok(rows)
}

/// Parses `<method>_seed<k>.csv`.
pub fn parse_trace_name(name: &str) -> Option<(String, u64)> {
    let stem = name.strip_suffix(".csv")?;
    let (method, seed) = stem.rsplit_once("_seed")?;
    Some((method.to_string(), seed.parse().ok()?))
}

/// Reads every trace in `dir`, ordered by method name then seed.
pub fn read_trace_dir(dir: &Path) -> Result<Vec<(String, u64, Trace)>, CliError> {
    let mut out = Vec::new();
    let entries = std::fs::read_dir(dir).map_err(|e| CliError::Config(format!("cannot read {}: {e}", dir.display())))?;
    for entry in entries {
        let path = entry.map_err(CliError::runtime)?.path();
        let Some((method, seed)) = path.file_name().and_then(|n| n.to_str()).and_then(parse_trace_name) else {
            continue;
        };
        let file = std::fs::File::open(&path).map_err(CliError::runtime)?;
        let trace = Trace::read_csv(file).map_err(|e| CliError::Parse(format!("{}: {e}", path.display())))?;
        out.push((method, seed, trace));
    }
    out.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.cmp(&b.1)));
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use bapi_core::{TraceEvent, TraceRow};

    fn trace(points: &[(f64, f64)]) -> Trace {
        Trace {
            rows: points
                .iter()
                .enumerate()
                .map(|(i, &(c, y))| TraceRow {
                    iteration: i,
                    event: TraceEvent::Evaluate,
                    config: vec![0.5],
                    epochs_trained: 1,
                    actual_cost: 1.0,
                    cumulative_cost: c,
                    value: y,
                    incumbent_value: y,
                })
                .collect(),
        }
    }

    #[test]
    fn interpolation_and_carry_forward() {
        let c = [(1.0, 0.2), (3.0, 0.6)];
        assert_eq!(incumbent_at(&c, 0.5), None);
        assert_eq!(incumbent_at(&c, 1.0), Some(0.2));
        assert!((incumbent_at(&c, 2.0).unwrap() - 0.4).abs() < 1e-15);
        assert_eq!(incumbent_at(&c, 3.0), Some(0.6));
        assert_eq!(incumbent_at(&c, 99.0), Some(0.6));
    }

    #[test]
    fn mean_where_all_traces_exist() {
        let ts = vec![
            ("a".to_string(), trace(&[(0.0, 0.1), (10.0, 0.5)])),
            ("a".to_string(), trace(&[(0.0, 0.3), (10.0, 0.3)])),
        ];
        let rows = aggregate(&ts, 10.0);
        assert_eq!(rows.len(), GRID_POINTS);
        let last = rows.last().unwrap();
        assert_eq!((last.cost, last.n), (10.0, 2));
        assert!((last.mean - 0.4).abs() < 1e-15);
        assert!((last.stderr - 0.1).abs() < 1e-12);
    }

    #[test]
    fn seed_order_does_not_matter() {
        let a = trace(&[(1.0, 0.1), (4.0, 0.35), (9.0, 0.7)]);
        let b = trace(&[(2.0, 0.2), (5.0, 0.3)]);
        let c = trace(&[(0.5, 0.05), (7.0, 0.9)]);
        let fwd = vec![("m".into(), a.clone()), ("m".into(), b.clone()), ("m".into(), c.clone())];
        let rev = vec![("m".into(), c), ("m".into(), a), ("m".into(), b)];
        assert_eq!(aggregate(&fwd, 10.0), aggregate(&rev, 10.0));
    }

    #[test]
    fn csv_round_trip_and_errors() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("agg.csv");
        let rows = aggregate(&[("bapi".into(), trace(&[(0.0, 0.1), (1.0, 0.2)]))], 1.0);
        write_aggregate(&rows, &path).unwrap();
        assert_eq!(read_aggregate(&path).unwrap(), rows);

        std::fs::write(&path, "method,cost,mean,stderr,n\nbapi,0,0.1,0,1\nbapi,zero,0.1,0,1\n").unwrap();
        let err = read_aggregate(&path).unwrap_err().to_string();
        assert!(err.contains("row 3"), "{err}");
    }

    #[test]
    fn trace_names() {
        assert_eq!(parse_trace_name("ei_per_cost_seed12.csv"), Some(("ei_per_cost".into(), 12)));
        assert_eq!(parse_trace_name("aggregate.csv"), None);
    }
}
