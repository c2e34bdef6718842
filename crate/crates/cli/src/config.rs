//! Run configuration: a `key = value` file overlaid by command-line flags.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use recnet_core::evaluator::DEFAULT_KS;
use recnet_core::{EmbeddingStore, Format, KvDocument, SplitSpec, TrainConfig};

/// Bad flags or configuration values. Exits with status 1.
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

pub fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    Serial,
    Ps,
}

impl FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "serial" => Ok(Mode::Serial),
            "ps" => Ok(Mode::Ps),
            _ => Err(format!("unknown mode {s:?}, expected serial or ps")),
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Serial => "serial",
            Mode::Ps => "ps",
        })
    }
}

pub fn parse_format(s: &str) -> Result<Format, String> {
    match s {
        "text" => Ok(Format::Text),
        "binary" => Ok(Format::Binary),
        _ => Err(format!("unknown format {s:?}, expected text or binary")),
    }
}

fn format_name(f: Format) -> &'static str {
    match f {
        Format::Text => "text",
        Format::Binary => "binary",
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub train: TrainConfig,
    pub split: SplitSpec,
    pub mode: Mode,
    pub shards: usize,
    pub ks: Vec<usize>,
    pub format: Format,
    pub edges: Option<PathBuf>,
    pub graph: Option<PathBuf>,
    pub embeddings: Option<PathBuf>,
    pub report: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        let train = TrainConfig::default();
        RunConfig {
            split: SplitSpec {
                seed: train.seed,
                ..Default::default()
            },
            train,
            mode: Mode::Serial,
            shards: 1,
            ks: DEFAULT_KS.to_vec(),
            format: Format::Text,
            edges: None,
            graph: None,
            embeddings: None,
            report: None,
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> anyhow::Result<T>
where
    T::Err: fmt::Display,
{
    value
        .parse()
        .map_err(|e| usage(format!("config key {key}: cannot parse {value:?}: {e}")))
}

pub fn parse_ks(value: &str) -> Result<Vec<usize>, String> {
    value
        .split(',')
        .map(|k| k.trim().parse::<usize>().map_err(|e| format!("bad cutoff {k:?}: {e}")))
        .collect()
}

impl RunConfig {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let doc = KvDocument::load(path).map_err(|e| usage(format!("config {}: {e}", path.display())))?;
        Self::from_kv(&doc)
    }

    pub fn from_kv(doc: &KvDocument) -> anyhow::Result<Self> {
        let mut cfg = RunConfig::default();
        for (key, value) in doc.entries() {
            let v = value.as_str();
            match key.as_str() {
                "dim" => cfg.train.dim = parse(key, v)?,
                "negatives" => cfg.train.negatives = parse(key, v)?,
                "samples_per_user" => cfg.train.samples_per_user = parse(key, v)?,
                "learning_rate" => cfg.train.learning_rate = parse(key, v)?,
                "epochs" => cfg.train.epochs = parse(key, v)?,
                "gamma" => cfg.train.gamma = parse(key, v)?,
                "decay_base" => cfg.train.decay_base = parse(key, v)?,
                "workers" => cfg.train.workers = parse(key, v)?,
                "seed" => cfg.set_seed(parse(key, v)?),
                "train_fraction" => cfg.split.train_fraction = parse(key, v)?,
                "mode" => cfg.mode = parse(key, v)?,
                "shards" => cfg.shards = parse(key, v)?,
                "ks" => cfg.ks = parse_ks(v).map_err(|e| usage(format!("config key ks: {e}")))?,
                "format" => cfg.format = parse_format(v).map_err(|e| usage(format!("config key format: {e}")))?,
                "edges" => cfg.edges = Some(v.into()),
                "graph" => cfg.graph = Some(v.into()),
                "embeddings" => cfg.embeddings = Some(v.into()),
                "report" => cfg.report = Some(v.into()),
                other => return Err(usage(format!("unknown config key {other:?}"))),
            }
        }
        Ok(cfg)
    }

    /// One seed drives every random stream, including the split.
    pub fn set_seed(&mut self, seed: u64) {
        self.train.seed = seed;
        self.split.seed = seed;
    }

    pub fn to_kv(&self) -> KvDocument {
        let mut doc = self.train.to_kv();
        doc.push("train_fraction", self.split.train_fraction);
        doc.push("mode", self.mode);
        doc.push("shards", self.shards);
        let ks: Vec<String> = self.ks.iter().map(|k| k.to_string()).collect();
        doc.push("ks", ks.join(","));
        doc.push("format", format_name(self.format));
        for (key, path) in [
            ("edges", &self.edges),
            ("graph", &self.graph),
            ("embeddings", &self.embeddings),
            ("report", &self.report),
        ] {
            if let Some(p) = path {
                doc.push(key, p.display());
            }
        }
        doc
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        self.train.validate().map_err(|e| usage(e.to_string()))?;
        if !(self.split.train_fraction > 0.0 && self.split.train_fraction < 1.0) {
            return Err(usage(format!("train_fraction {} outside (0, 1)", self.split.train_fraction)));
        }
        if self.shards == 0 {
            return Err(usage("shards must be at least 1"));
        }
        if self.ks.is_empty() || self.ks.contains(&0) {
            return Err(usage("ks must be a non-empty list of positive cutoffs"));
        }
        Ok(())
    }

    /// Report document: header, then the effective configuration under `config.`.
    pub fn report(&self, kind: &str) -> KvDocument {
        let mut doc = KvDocument::report(kind);
        doc.append("config.", &self.to_kv());
        doc
    }
}

pub fn require<'a>(path: &'a Option<PathBuf>, what: &str) -> anyhow::Result<&'a Path> {
    path.as_deref().ok_or_else(|| usage(format!("missing {what} path")))
}

pub fn check_input(path: &Path) -> anyhow::Result<()> {
    if path.is_file() {
        Ok(())
    } else {
        Err(usage(format!("input file {} does not exist", path.display())))
    }
}

pub fn check_output(path: &Path) -> anyhow::Result<()> {
    let parent = path.parent().filter(|p| !p.as_os_str().is_empty());
    match parent {
        Some(dir) if !dir.is_dir() => Err(usage(format!("output directory {} does not exist", dir.display()))),
        _ if path.is_dir() => Err(usage(format!("output path {} is a directory", path.display()))),
        _ => Ok(()),
    }
}

/// Embeddings and graph must describe the same id spaces in the same order.
pub fn check_alignment(store: &EmbeddingStore, graph: &recnet_core::InteractionGraph) -> anyhow::Result<()> {
    if store.user_ids() != graph.user_ids() || store.item_ids() != graph.item_ids() {
        return Err(recnet_core::Error::DimensionMismatch(
            "embedding ids do not match the graph; train on this graph first".into(),
        )
        .into());
    }
    Ok(())
}
