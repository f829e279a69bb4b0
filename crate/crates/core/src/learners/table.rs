use std::collections::HashMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::Backend;
use crate::error::{Error, Result};
use crate::types::same_config;

/// Sidecar metadata of a curve table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TableMeta {
    pub d: usize,
    pub t_max: u32,
    pub hp_names: Vec<String>,
    /// Raw `(lo, hi)` range per hyperparameter, used to normalize to the unit cube.
    pub ranges: Vec<(f64, f64)>,
}

impl TableMeta {
    pub fn validate(&self) -> Result<()> {
        if self.hp_names.len() != self.d || self.ranges.len() != self.d {
            return Err(Error::Parse(format!(
                "metadata declares d = {} but lists {} names and {} ranges",
                self.d,
                self.hp_names.len(),
                self.ranges.len()
            )));
        }
        if self.t_max == 0 {
            return Err(Error::Parse("t_max must be positive".into()));
        }
        if self.ranges.iter().any(|(lo, hi)| !(lo.is_finite() && hi.is_finite() && lo <= hi)) {
            return Err(Error::Parse("ranges must be finite with lo <= hi".into()));
        }
        Ok(())
    }

    pub fn normalize(&self, raw: &[f64]) -> Vec<f64> {
        raw.iter()
            .zip(&self.ranges)
            .map(|(v, (lo, hi))| if hi > lo { ((v - lo) / (hi - lo)).clamp(0.0, 1.0) } else { 0.5 })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableConfig {
    pub id: String,
    pub raw: Vec<f64>,
    pub coords: Vec<f64>,
}

/// Precomputed learning curves: per configuration, the value and cumulative
/// cost at every epoch `1..=t_max`.
#[derive(Debug, Clone, PartialEq)]
pub struct CurveTable {
    meta: TableMeta,
    configs: Vec<TableConfig>,
    values: Vec<Vec<f64>>,
    costs: Vec<Vec<f64>>,
}

impl CurveTable {
    /// `curves[i]` holds `(value, cumulative_cost)` for epochs `1..=t_max` of
    /// configuration `ids[i]` with raw hyperparameters `raws[i]`.
    pub fn new(meta: TableMeta, ids: Vec<String>, raws: Vec<Vec<f64>>, curves: Vec<Vec<(f64, f64)>>) -> Result<Self> {
        meta.validate()?;
        if ids.len() != raws.len() || ids.len() != curves.len() {
            return Err(Error::Parse("ids, raw values and curves differ in length".into()));
        }
        let mut configs = Vec::with_capacity(ids.len());
        let mut values = Vec::with_capacity(ids.len());
        let mut costs = Vec::with_capacity(ids.len());
        for ((id, raw), curve) in ids.into_iter().zip(raws).zip(curves) {
            if raw.len() != meta.d {
                return Err(Error::Parse(format!("config {id} has {} values, expected {}", raw.len(), meta.d)));
            }
            if curve.len() != meta.t_max as usize {
                return Err(Error::Parse(format!(
                    "config {id} has {} epochs, expected {}",
                    curve.len(),
                    meta.t_max
                )));
            }
            if curve.iter().any(|(v, c)| !v.is_finite() || !(c.is_finite() && *c >= 0.0)) {
                return Err(Error::Parse(format!("config {id} has a non-finite or negative entry")));
            }
            if curve.windows(2).any(|w| w[1].1 < w[0].1) {
                return Err(Error::Parse(format!("config {id} has decreasing cumulative cost")));
            }
            if configs.iter().any(|c: &TableConfig| c.id == id) {
                return Err(Error::Parse(format!("duplicate config id {id}")));
            }
            let coords = meta.normalize(&raw);
            if configs.iter().any(|c: &TableConfig| same_config(&c.coords, &coords)) {
                return Err(Error::Parse(format!("config {id} duplicates another configuration")));
            }
            configs.push(TableConfig { id, raw, coords });
            values.push(curve.iter().map(|p| p.0).collect());
            costs.push(curve.iter().map(|p| p.1).collect());
        }
        Ok(CurveTable { meta, configs, values, costs })
    }

    /// Tabulates another backend at the given raw configurations.
    pub fn from_backend<B: Backend + ?Sized>(backend: &B, meta: TableMeta, raws: Vec<Vec<f64>>) -> Result<Self> {
        if meta.t_max != backend.t_max() {
            return Err(Error::ParameterDomain("t_max disagrees with the backend".into()));
        }
        let ids = (0..raws.len()).map(|i| i.to_string()).collect();
        let curves = raws
            .iter()
            .map(|raw| {
                let x = meta.normalize(raw);
                (1..=meta.t_max).map(|e| backend.evaluate(&x, e)).collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(meta, ids, raws, curves)
    }

    pub fn meta(&self) -> &TableMeta {
        &self.meta
    }

    pub fn configs(&self) -> &[TableConfig] {
        &self.configs
    }

    fn index(&self, id: &str) -> Result<usize> {
        self.configs
            .iter()
            .position(|c| c.id == id)
            .ok_or_else(|| Error::NotFound(format!("config {id}")))
    }

    fn epoch_index(&self, epoch: u32) -> Result<usize> {
        if epoch == 0 || epoch > self.meta.t_max {
            return Err(Error::NotFound(format!("epoch {epoch}")));
        }
        Ok(epoch as usize - 1)
    }

    /// Stored `(value, cumulative_cost)` of `id` at `epoch`.
    pub fn lookup(&self, id: &str, epoch: u32) -> Result<(f64, f64)> {
        let i = self.index(id)?;
        let e = self.epoch_index(epoch)?;
        Ok((self.values[i][e], self.costs[i][e]))
    }

    /// Charge for resuming `id` from `from` (0 = fresh) to `to`.
    pub fn resume_charge(&self, id: &str, from: u32, to: u32) -> Result<f64> {
        let (_, c_to) = self.lookup(id, to)?;
        if from == 0 {
            return Ok(c_to);
        }
        let (_, c_from) = self.lookup(id, from)?;
        Ok((c_to - c_from).max(0.0))
    }

    pub fn meta_path(csv_path: &Path) -> PathBuf {
        csv_path.with_extension("json")
    }

    /// Writes the CSV and its JSON sidecar next to it.
    pub fn write(&self, csv_path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(csv_path)?;
        let mut header = vec!["config_id".to_string()];
        header.extend((1..=self.meta.d).map(|i| format!("hp_{i}")));
        header.extend(["epoch", "value", "cumulative_cost"].map(String::from));
        w.write_record(&header)?;
        for (i, c) in self.configs.iter().enumerate() {
            for e in 0..self.meta.t_max as usize {
                let mut rec = vec![c.id.clone()];
                rec.extend(c.raw.iter().map(|v| v.to_string()));
                rec.push((e + 1).to_string());
                rec.push(self.values[i][e].to_string());
                rec.push(self.costs[i][e].to_string());
                w.write_record(&rec)?;
            }
        }
        w.flush()?;
        std::fs::write(Self::meta_path(csv_path), serde_json::to_string_pretty(&self.meta)?)?;
        Ok(())
    }

    pub fn read(csv_path: &Path) -> Result<Self> {
        let meta: TableMeta = serde_json::from_str(&std::fs::read_to_string(Self::meta_path(csv_path))?)?;
        meta.validate()?;
        let d = meta.d;
        let mut r = csv::Reader::from_path(csv_path)?;
        let headers = r.headers()?.clone();
        let expected: Vec<String> = std::iter::once("config_id".to_string())
            .chain((1..=d).map(|i| format!("hp_{i}")))
            .chain(["epoch", "value", "cumulative_cost"].map(String::from))
            .collect();
        if headers.iter().ne(expected.iter().map(String::as_str)) {
            return Err(Error::Parse(format!("unexpected header {:?}", headers.iter().collect::<Vec<_>>())));
        }

        let mut order: Vec<String> = Vec::new();
        type Row = (Vec<f64>, Vec<Option<(f64, f64)>>);
        let mut by_id: HashMap<String, Row> = HashMap::new();
        for (n, rec) in r.records().enumerate() {
            let rec = rec?;
            let line = n + 2;
            let num = |i: usize| -> Result<f64> {
                rec[i]
                    .trim()
                    .parse::<f64>()
                    .map_err(|_| Error::Parse(format!("row {line}: bad number {:?}", &rec[i])))
            };
            let id = rec[0].to_string();
            let raw = (1..=d).map(&num).collect::<Result<Vec<_>>>()?;
            let epoch: u32 = rec[d + 1]
                .trim()
                .parse()
                .map_err(|_| Error::Parse(format!("row {line}: bad epoch {:?}", &rec[d + 1])))?;
            if epoch == 0 || epoch > meta.t_max {
                return Err(Error::Parse(format!("row {line}: epoch {epoch} outside 1..={}", meta.t_max)));
            }
            let (value, cost) = (num(d + 2)?, num(d + 3)?);
            let entry = by_id.entry(id.clone()).or_insert_with(|| {
                order.push(id.clone());
                (raw.clone(), vec![None; meta.t_max as usize])
            });
            if entry.0 != raw {
                return Err(Error::Parse(format!("row {line}: config {id} changes its hyperparameters")));
            }
            let slot = &mut entry.1[epoch as usize - 1];
            if slot.is_some() {
                return Err(Error::Parse(format!("row {line}: duplicate epoch {epoch} for config {id}")));
            }
            *slot = Some((value, cost));
        }

        let mut raws = Vec::new();
        let mut curves = Vec::new();
        for id in &order {
            let (raw, curve) = by_id.remove(id).expect("id recorded in order");
            let curve = curve
                .into_iter()
                .enumerate()
                .map(|(e, p)| p.ok_or_else(|| Error::Parse(format!("config {id} is missing epoch {}", e + 1))))
                .collect::<Result<Vec<_>>>()?;
            raws.push(raw);
            curves.push(curve);
        }
        Self::new(meta, order, raws, curves)
    }

    fn find_coords(&self, x: &[f64]) -> Result<usize> {
        self.configs
            .iter()
            .position(|c| same_config(&c.coords, x))
            .ok_or_else(|| Error::NotFound(format!("no table configuration at {x:?}")))
    }
}

impl Backend for CurveTable {
    fn dim(&self) -> usize {
        self.meta.d
    }

    fn t_max(&self) -> u32 {
        self.meta.t_max
    }

    fn evaluate(&self, x: &[f64], epoch: u32) -> Result<(f64, f64)> {
        let i = self.find_coords(x)?;
        let e = self.epoch_index(epoch)?;
        Ok((self.values[i][e], self.costs[i][e]))
    }

    fn candidates(&self) -> Option<Vec<Vec<f64>>> {
        Some(self.configs.iter().map(|c| c.coords.clone()).collect())
    }
}
