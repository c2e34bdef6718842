//! Line-oriented `key = value` documents used for configs and reports.

use std::fmt::Display;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::evaluator::EvalReport;
use crate::trainer::{TrainConfig, TrainReport};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Debug, Default, PartialEq)]
pub struct KvDocument {
    entries: Vec<(String, String)>,
}

impl KvDocument {
    pub fn new() -> Self {
        Self::default()
    }

    /// A report document starting with `schema_version` and `kind`.
    pub fn report(kind: &str) -> Self {
        let mut doc = Self::new();
        doc.push("schema_version", SCHEMA_VERSION);
        doc.push("kind", kind);
        doc
    }

    pub fn push(&mut self, key: impl Into<String>, value: impl Display) {
        self.entries.push((key.into(), value.to_string()));
    }

    /// Last value for `key`.
    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries
            .iter()
            .rev()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    pub fn entries(&self) -> &[(String, String)] {
        &self.entries
    }

    /// Parses `key = value` lines; `#` starts a comment line.
    pub fn parse(text: &str) -> Result<Self> {
        let mut doc = Self::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| Error::Ingest {
                line: idx + 1,
                reason: format!("expected `key = value`, found {line:?}"),
            })?;
            let key = key.trim();
            if key.is_empty() {
                return Err(Error::Ingest {
                    line: idx + 1,
                    reason: "empty key".into(),
                });
            }
            doc.push(key, value.trim());
        }
        Ok(doc)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::file(path, e))?;
        Self::parse(&text)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_string()).map_err(|e| Error::file(path, e))
    }

    pub fn append(&mut self, prefix: &str, other: &KvDocument) {
        for (k, v) in &other.entries {
            self.entries.push((format!("{prefix}{k}"), v.clone()));
        }
    }
}

impl std::fmt::Display for KvDocument {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for (k, v) in &self.entries {
            writeln!(f, "{k} = {v}")?;
        }
        Ok(())
    }
}

impl TrainConfig {
    pub fn to_kv(&self) -> KvDocument {
        let mut doc = KvDocument::new();
        doc.push("dim", self.dim);
        doc.push("negatives", self.negatives);
        doc.push("samples_per_user", self.samples_per_user);
        doc.push("learning_rate", self.learning_rate);
        doc.push("epochs", self.epochs);
        doc.push("gamma", self.gamma);
        doc.push("decay_base", self.decay_base);
        doc.push("workers", self.workers);
        doc.push("seed", self.seed);
        doc
    }
}

impl TrainReport {
    pub fn to_kv(&self) -> KvDocument {
        let mut doc = KvDocument::new();
        doc.push("active_users", self.active_users);
        doc.push("epochs_run", self.epochs.len());
        doc.push("total_positives", self.total_positives());
        doc.push("stale_reads", self.stale_reads);
        for e in &self.epochs {
            let p = format!("epoch.{}.", e.epoch);
            doc.push(format!("{p}mean_loss"), e.mean_loss);
            doc.push(format!("{p}seconds"), e.seconds);
            doc.push(format!("{p}positives"), e.positives);
            doc.push(format!("{p}row_updates"), e.row_updates);
        }
        doc
    }
}

impl EvalReport {
    pub fn to_kv(&self) -> KvDocument {
        let mut doc = KvDocument::new();
        doc.push("evaluated_pairs", self.evaluated_pairs);
        doc.push("dropped_users", self.dropped_users);
        doc.push("dropped_pairs", self.dropped_pairs);
        doc.push("seconds", self.seconds);
        for m in &self.metrics {
            doc.push(format!("hr@{}", m.k), m.hr);
            doc.push(format!("ndcg@{}", m.k), m.ndcg);
            doc.push(format!("mrr@{}", m.k), m.mrr);
        }
        doc
    }
}
