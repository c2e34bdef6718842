use std::io::Write;

use anyhow::Context;
use recnet_core::graph::{load_graph, read_edge_file};
use recnet_core::retrieval::{topk_for_item, topk_for_user};
use recnet_core::{
    cross_validate, evaluate, nested_subsamples, ps_train, split, EmbeddingStore, Error, InteractionGraph,
    KvDocument, TrainReport,
};

use crate::config::{check_alignment, check_input, check_output, require, usage, Mode, RunConfig};

pub enum QueryTarget {
    User(String),
    Item(String),
}

fn save_report(doc: &KvDocument, cfg: &RunConfig) -> anyhow::Result<()> {
    if let Some(path) = &cfg.report {
        doc.save(path)?;
    }
    Ok(())
}

fn check_report(cfg: &RunConfig) -> anyhow::Result<()> {
    match &cfg.report {
        Some(p) => check_output(p),
        None => Ok(()),
    }
}

pub fn ingest(cfg: &RunConfig, out: &mut dyn Write) -> anyhow::Result<()> {
    let edges = require(&cfg.edges, "edge file")?;
    let cache = require(&cfg.graph, "graph cache")?;
    check_input(edges)?;
    check_output(cache)?;
    let graph = InteractionGraph::ingest(read_edge_file(edges)?)?;
    graph.save_cache(cache)?;
    writeln!(
        out,
        "users={} items={} edges={}",
        graph.user_count(),
        graph.item_count(),
        graph.edge_count()
    )?;
    Ok(())
}

fn print_epochs(report: &TrainReport, out: &mut dyn Write) -> anyhow::Result<()> {
    for e in &report.epochs {
        writeln!(
            out,
            "epoch {}: mean_loss={:.6} positives={} seconds={:.3}",
            e.epoch, e.mean_loss, e.positives, e.seconds
        )?;
    }
    Ok(())
}

pub fn train_on(graph: &InteractionGraph, cfg: &RunConfig) -> anyhow::Result<(EmbeddingStore, TrainReport)> {
    Ok(match cfg.mode {
        Mode::Serial => recnet_core::train(graph, &cfg.train)?,
        Mode::Ps => ps_train(graph, &cfg.train, cfg.shards)?,
    })
}

pub fn train(cfg: &RunConfig, holdout: bool, out: &mut dyn Write) -> anyhow::Result<()> {
    cfg.validate()?;
    let graph_path = require(&cfg.graph, "graph")?;
    let emb_path = require(&cfg.embeddings, "embedding output")?;
    check_input(graph_path)?;
    check_output(emb_path)?;
    check_report(cfg)?;

    let mut graph = load_graph(graph_path)?;
    if holdout {
        graph = split(&graph, cfg.split)?.train;
    }
    let (store, report) = train_on(&graph, cfg)?;
    store.save(emb_path, cfg.format)?;
    print_epochs(&report, out)?;
    writeln!(
        out,
        "wrote {} user and {} item rows to {}",
        store.user_count(),
        store.item_count(),
        emb_path.display()
    )?;

    let mut doc = cfg.report("train");
    doc.push("holdout", holdout);
    doc.append("", &report.to_kv());
    save_report(&doc, cfg)
}

pub fn query(
    cfg: &RunConfig,
    target: &QueryTarget,
    k: usize,
    exclude_train: bool,
    out: &mut dyn Write,
) -> anyhow::Result<()> {
    if k == 0 {
        return Err(usage("--k must be at least 1"));
    }
    let emb_path = require(&cfg.embeddings, "embeddings")?;
    check_input(emb_path)?;
    let graph = if exclude_train {
        let p = require(&cfg.graph, "graph")?;
        check_input(p)?;
        Some(load_graph(p)?)
    } else {
        None
    };
    let store = EmbeddingStore::load(emb_path)?;
    if let Some(g) = &graph {
        check_alignment(&store, g)?;
    }
    let list = match target {
        QueryTarget::User(id) => {
            let u = store.user_index(id).ok_or_else(|| Error::UnknownId(id.clone()))?;
            topk_for_user(&store, graph.as_ref(), u, k, exclude_train)
        }
        QueryTarget::Item(id) => {
            let i = store.item_index(id).ok_or_else(|| Error::UnknownId(id.clone()))?;
            topk_for_item(&store, i, k)
        }
    };
    out.write_all(list.to_tsv().as_bytes())?;
    Ok(())
}

pub fn eval(cfg: &RunConfig, cv_folds: Option<usize>, out: &mut dyn Write) -> anyhow::Result<()> {
    cfg.validate()?;
    let graph_path = require(&cfg.graph, "graph")?;
    check_input(graph_path)?;
    check_report(cfg)?;
    let emb_path = match cv_folds {
        Some(_) => None,
        None => {
            let p = require(&cfg.embeddings, "embeddings")?;
            check_input(p)?;
            Some(p)
        }
    };

    let graph = load_graph(graph_path)?;
    let parts = split(&graph, cfg.split)?;
    let (kind, report) = match (cv_folds, emb_path) {
        (Some(folds), _) => (
            "cross_validation",
            cross_validate(&parts.train, &cfg.train, folds, cfg.split.seed, &cfg.ks)?,
        ),
        (None, Some(p)) => {
            let store = EmbeddingStore::load(p)?;
            check_alignment(&store, &graph)?;
            ("eval", evaluate(&store, &parts.train, &parts.test, &cfg.ks)?)
        }
        (None, None) => unreachable!("embeddings are required without --cv-folds"),
    };
    out.write_all(report.table().as_bytes())?;

    let mut doc = cfg.report(kind);
    if let Some(folds) = cv_folds {
        doc.push("folds", folds);
    }
    doc.append("", &report.to_kv());
    save_report(&doc, cfg)
}

pub fn bench(cfg: &RunConfig, fractions: &[f64], out: &mut dyn Write) -> anyhow::Result<()> {
    cfg.validate()?;
    if fractions.is_empty() {
        return Err(usage("--scale-series needs at least one fraction"));
    }
    let graph_path = require(&cfg.graph, "graph")?;
    check_input(graph_path)?;
    check_report(cfg)?;
    let graph = load_graph(graph_path)?;
    let subsamples = nested_subsamples(&graph, fractions, cfg.train.seed)?;

    let mut doc = cfg.report("bench");
    writeln!(
        out,
        "{:>8}  {:>10}  {:>12}  {:>12}  {:>12}",
        "fraction", "edges", "active_users", "positives", "epoch_s"
    )?;
    for (row, (&fraction, sub)) in fractions.iter().zip(&subsamples).enumerate() {
        let (_, report) = train_on(sub, cfg).with_context(|| format!("training on fraction {fraction}"))?;
        let expected = (cfg.train.samples_per_user * report.active_users) as u64;
        if let Some(e) = report.epochs.iter().find(|e| e.positives != expected) {
            anyhow::bail!(
                "epoch {} processed {} positives, expected m*|U_active| = {expected}",
                e.epoch,
                e.positives
            );
        }
        let epochs = report.epochs.len().max(1) as f64;
        let seconds = report.epochs.iter().map(|e| e.seconds).sum::<f64>() / epochs;
        writeln!(
            out,
            "{fraction:>8}  {:>10}  {:>12}  {expected:>12}  {seconds:>12.4}",
            sub.edge_count(),
            report.active_users
        )?;
        let p = format!("row.{row}.");
        doc.push(format!("{p}fraction"), fraction);
        doc.push(format!("{p}edges"), sub.edge_count());
        doc.push(format!("{p}active_users"), report.active_users);
        doc.push(format!("{p}positives_per_epoch"), expected);
        doc.push(format!("{p}mean_epoch_seconds"), seconds);
    }
    save_report(&doc, cfg)
}
