//! Runs every (method, seed) pair of a configuration and writes traces,
//! a run summary and the aggregate.

use std::path::{Path, PathBuf};

use bapi_core::{run_method, Backend, CurveTable, Method, SyntheticProblem, Trace};
use log::{error, info};
use rayon::prelude::*;
use serde::Serialize;

use crate::aggregate::{aggregate, write_aggregate, AggregateRow};
use crate::config::{BackendConfig, RunConfig};
use crate::CliError;

pub const TRACE_DIR: &str = "traces";
pub const AGGREGATE_FILE: &str = "aggregate.csv";
pub const SUMMARY_FILE: &str = "runs.csv";

pub fn trace_file_name(method: Method, seed: u64) -> String {
    format!("{method}_seed{seed}.csv")
}

/// Per-run outcome, one row of the run summary.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunRecord {
    pub method: String,
    pub seed: u64,
    pub status: String,
    pub evaluations: usize,
    pub final_cost: f64,
    pub incumbent_value: f64,
    pub message: String,
}

#[derive(Debug, Clone)]
pub struct ExperimentSummary {
    pub records: Vec<RunRecord>,
    pub aggregate: Vec<AggregateRow>,
    pub out_dir: PathBuf,
}

impl ExperimentSummary {
    pub fn failures(&self) -> usize {
        self.records.iter().filter(|r| r.status != "ok").count()
    }
}

enum Problem {
    Synthetic(SyntheticProblem),
    Table(CurveTable),
}

impl Problem {
    fn backend(&self) -> &dyn Backend {
        match self {
            Problem::Synthetic(p) => p,
            Problem::Table(t) => t,
        }
    }
}

fn synthetic(cfg: &RunConfig, seed: u64) -> Result<Problem, CliError> {
    let BackendConfig::Synthetic(spec) = &cfg.backend else { unreachable!() };
    let mut spec = spec.clone();
    if let Some(t) = cfg.t_max {
        spec.t_max = t;
    }
    if cfg.problem_per_seed {
        spec.seed = spec.seed.wrapping_add(seed);
    }
    SyntheticProblem::new(&spec).map(Problem::Synthetic).map_err(|e| CliError::Config(e.to_string()))
}

fn load_table(cfg: &RunConfig, path: &Path) -> Result<Problem, CliError> {
    let table = CurveTable::read(path).map_err(|e| CliError::Config(format!("cannot load table {}: {e}", path.display())))?;
    if let Some(t) = cfg.t_max {
        if t != table.meta().t_max {
            return Err(CliError::Config(format!("t_max {t} disagrees with the table's {}", table.meta().t_max)));
        }
    }
    Ok(Problem::Table(table))
}

/// Runs the experiment into `out_dir`. Seeds are shifted by `seed_offset`;
/// up to `parallel` runs execute concurrently.
pub fn run_experiment(cfg: &RunConfig, out_dir: &Path, seed_offset: u64, parallel: usize) -> Result<ExperimentSummary, CliError> {
    let seeds: Vec<u64> = cfg.seeds.iter().map(|s| s.wrapping_add(seed_offset)).collect();
    let shared = match &cfg.backend {
        BackendConfig::Table { path } => Some(load_table(cfg, path)?),
        BackendConfig::Synthetic(_) if !cfg.problem_per_seed => Some(synthetic(cfg, 0)?),
        BackendConfig::Synthetic(_) => {
            // Validate every landscape up front so config errors surface early.
            for &s in &seeds {
                synthetic(cfg, s)?;
            }
            None
        }
    };
    let trace_dir = out_dir.join(TRACE_DIR);
    std::fs::create_dir_all(&trace_dir)
        .map_err(|e| CliError::Runtime(format!("cannot create {}: {e}", trace_dir.display())))?;

    let jobs: Vec<(Method, u64)> = cfg.methods.iter().flat_map(|&m| seeds.iter().map(move |&s| (m, s))).collect();
    let run_one = |&(method, seed): &(Method, u64)| -> (RunRecord, Option<Trace>) {
        let own;
        let problem = match &shared {
            Some(p) => p,
            None => {
                own = synthetic(cfg, seed).expect("validated above");
                &own
            }
        };
        info!("running {method} seed {seed}");
        let result = run_method(method, problem.backend(), &cfg.optimizer(seed));
        let mut record = RunRecord {
            method: method.to_string(),
            seed,
            status: "ok".into(),
            evaluations: 0,
            final_cost: 0.0,
            incumbent_value: f64::NAN,
            message: String::new(),
        };
        let trace = match result {
            Ok(r) => {
                if let Some(msg) = r.failure {
                    record.status = "failed".into();
                    record.message = msg;
                }
                record.evaluations = r.trace.rows.len();
                record.final_cost = r.ledger.spent();
                record.incumbent_value = r.incumbent.map_or(f64::NAN, |i| i.value);
                r.trace
            }
            Err(e) => {
                record.status = "failed".into();
                record.message = e.to_string();
                Trace::default()
            }
        };
        let path = trace_dir.join(trace_file_name(method, seed));
        let written = std::fs::File::create(&path)
            .map_err(bapi_core::Error::from)
            .and_then(|f| trace.write_csv(std::io::BufWriter::new(f)));
        if let Err(e) = written {
            record.status = "failed".into();
            record.message = format!("cannot write {}: {e}", path.display());
        }
        if record.status != "ok" {
            error!("{method} seed {seed} failed: {}", record.message);
        }
        (record, Some(trace))
    };

    let results: Vec<(RunRecord, Option<Trace>)> = if parallel > 1 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(parallel)
            .build()
            .map_err(|e| CliError::Runtime(e.to_string()))?;
        pool.install(|| jobs.par_iter().map(run_one).collect())
    } else {
        jobs.iter().map(run_one).collect()
    };

    let mut records = Vec::with_capacity(results.len());
    let mut traces = Vec::new();
    for (rec, trace) in results {
        if let Some(t) = trace.filter(|t| !t.rows.is_empty()) {
            traces.push((rec.method.clone(), t));
        }
        records.push(rec);
    }

    let summary_path = out_dir.join(SUMMARY_FILE);
    let mut w = csv::Writer::from_path(&summary_path).map_err(CliError::runtime)?;
    for r in &records {
        w.serialize(r).map_err(CliError::runtime)?;
    }
    w.flush().map_err(CliError::runtime)?;

    let agg = aggregate(&traces, cfg.budget);
    write_aggregate(&agg, &out_dir.join(AGGREGATE_FILE))?;
    Ok(ExperimentSummary { records, aggregate: agg, out_dir: out_dir.to_path_buf() })
}
