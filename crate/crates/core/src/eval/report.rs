use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::write_json;
use crate::error::{Error, Result};

/// Metrics of one evaluation run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub mode: String,
    pub metrics: BTreeMap<String, f64>,
    /// Number of evaluated instances (turns or episodes).
    pub n: usize,
    pub config: serde_json::Value,
    pub seed: u64,
}

impl EvalReport {
    pub fn new(mode: impl Into<String>, metrics: BTreeMap<String, f64>, n: usize) -> Result<Self> {
        if let Some((k, v)) = metrics.iter().find(|(_, v)| !v.is_finite()) {
            return Err(Error::domain(format!("metric {k} is not finite ({v})")));
        }
        Ok(EvalReport {
            mode: mode.into(),
            metrics,
            n,
            config: serde_json::Value::Null,
            seed: 0,
        })
    }

    pub fn with_config(mut self, config: serde_json::Value, seed: u64) -> Self {
        self.config = config;
        self.seed = seed;
        self
    }

    pub fn metric(&self, name: &str) -> Result<f64> {
        self.metrics
            .get(name)
            .copied()
            .ok_or_else(|| Error::domain(format!("report has no metric {name}")))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_json(path, self)
    }
}

/// Running mean keyed by metric name.
#[derive(Default)]
pub(crate) struct Means {
    sums: BTreeMap<String, (f64, usize)>,
}

impl Means {
    pub fn add(&mut self, name: impl Into<String>, v: f64) {
        let e = self.sums.entry(name.into()).or_insert((0.0, 0));
        e.0 += v;
        e.1 += 1;
    }

    pub fn finish(self) -> BTreeMap<String, f64> {
        self.sums.into_iter().map(|(k, (s, n))| (k, s / n as f64)).collect()
    }
}
