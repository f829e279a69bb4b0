//! Per-evaluation audit trail of an optimization run.

use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TraceEvent {
    Init,
    Evaluate,
    EarlyStop,
    /// The run ended because the budget was used up; the row's cumulative
    /// cost shows any overrun of the final checkpoint block.
    BudgetStop,
}

impl fmt::Display for TraceEvent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TraceEvent::Init => "init",
            TraceEvent::Evaluate => "evaluate",
            TraceEvent::EarlyStop => "early_stop",
            TraceEvent::BudgetStop => "budget_stop",
        })
    }
}

impl FromStr for TraceEvent {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "init" => TraceEvent::Init,
            "evaluate" => TraceEvent::Evaluate,
            "early_stop" => TraceEvent::EarlyStop,
            "budget_stop" => TraceEvent::BudgetStop,
            _ => return Err(Error::Parse(format!("unknown event {s:?}"))),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub iteration: usize,
    pub event: TraceEvent,
    pub config: Vec<f64>,
    /// Epoch the configuration has been trained to after this evaluation.
    pub epochs_trained: u32,
    /// Charge of this evaluation alone.
    pub actual_cost: f64,
    pub cumulative_cost: f64,
    /// Value at `epochs_trained`.
    pub value: f64,
    pub incumbent_value: f64,
}

pub const TRACE_HEADER: [&str; 8] = [
    "iteration",
    "event",
    "config_coords",
    "epochs_trained",
    "actual_cost",
    "cumulative_cost",
    "value",
    "incumbent_value",
];

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Trace {
    pub rows: Vec<TraceRow>,
}

impl Trace {
    pub fn push(&mut self, row: TraceRow) {
        self.rows.push(row);
    }

    pub fn last(&self) -> Option<&TraceRow> {
        self.rows.last()
    }

    /// `(cumulative_cost, incumbent_value)` pairs.
    pub fn incumbent_curve(&self) -> Vec<(f64, f64)> {
        self.rows.iter().map(|r| (r.cumulative_cost, r.incumbent_value)).collect()
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(w);
        w.write_record(TRACE_HEADER)?;
        for r in &self.rows {
            let coords = r.config.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(";");
            w.write_record([
                r.iteration.to_string(),
                r.event.to_string(),
                coords,
                r.epochs_trained.to_string(),
                r.actual_cost.to_string(),
                r.cumulative_cost.to_string(),
                r.value.to_string(),
                r.incumbent_value.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("csv output is utf-8")
    }

    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        let mut r = csv::Reader::from_reader(r);
        if r.headers()?.iter().ne(TRACE_HEADER) {
            return Err(Error::Parse("unexpected trace header".into()));
        }
        let mut rows = Vec::new();
        for (n, rec) in r.records().enumerate() {
            let rec = rec?;
            let line = n + 2;
            let bad = |what: &str| Error::Parse(format!("row {line}: bad {what}"));
            let num = |i: usize, what: &str| rec[i].parse::<f64>().map_err(|_| bad(what));
            let config = if rec[2].is_empty() {
                Vec::new()
            } else {
                rec[2]
                    .split(';')
                    .map(|v| v.parse::<f64>().map_err(|_| bad("config_coords")))
                    .collect::<Result<Vec<_>>>()?
            };
            rows.push(TraceRow {
                iteration: rec[0].parse().map_err(|_| bad("iteration"))?,
                event: rec[1].parse()?,
                config,
                epochs_trained: rec[3].parse().map_err(|_| bad("epochs_trained"))?,
                actual_cost: num(4, "actual_cost")?,
                cumulative_cost: num(5, "cumulative_cost")?,
                value: num(6, "value")?,
                incumbent_value: num(7, "incumbent_value")?,
            });
        }
        Ok(Trace { rows })
    }
}
