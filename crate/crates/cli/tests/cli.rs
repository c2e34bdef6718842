use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use recnet_core::{EmbeddingStore, InteractionGraph, KvDocument};
use tempfile::TempDir;

fn recnet(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_recnet"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn stderr(out: &Output) -> String {
    String::from_utf8(out.stderr.clone()).unwrap()
}

struct Workspace {
    dir: TempDir,
}

impl Workspace {
    /// Two blocks of 10 users and 10 items, fully connected inside each block.
    fn new() -> Self {
        let dir = TempDir::new().unwrap();
        let mut tsv = String::from("# user\titem\tweight\ttimestamp\tcluster\n");
        for u in 0..20 {
            let block = u / 10;
            for i in block * 10..block * 10 + 10 {
                tsv.push_str(&format!("u{u}\ti{i}\t1\t{}\tc{}\n", 3600 * (u + i), i % 3));
            }
        }
        fs::write(dir.path().join("edges.tsv"), tsv).unwrap();
        Workspace { dir }
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    fn arg(&self, name: &str) -> String {
        self.path(name).to_str().unwrap().to_owned()
    }

    fn ingest(&self) -> String {
        let out = recnet(&["ingest", &self.arg("edges.tsv"), &self.arg("graph.bin")]);
        assert_eq!(code(&out), 0, "{}", stderr(&out));
        stdout(&out)
    }

    fn train(&self, out_name: &str, extra: &[&str]) -> Output {
        let mut args = vec![
            "train".to_owned(),
            "--graph".into(),
            self.arg("graph.bin"),
            "--out".into(),
            self.arg(out_name),
            "--dim".into(),
            "8".into(),
        ];
        args.extend(extra.iter().map(|s| s.to_string()));
        let refs: Vec<&str> = args.iter().map(String::as_str).collect();
        recnet(&refs)
    }
}

fn read(p: &Path) -> Vec<u8> {
    fs::read(p).unwrap()
}

#[test]
fn ingest_reports_counts_and_is_deterministic() {
    let ws = Workspace::new();
    assert_eq!(ws.ingest(), "users=20 items=20 edges=200\n");
    let first = read(&ws.path("graph.bin"));
    ws.ingest();
    assert_eq!(first, read(&ws.path("graph.bin")));
    let g = InteractionGraph::load_cache(ws.path("graph.bin")).unwrap();
    assert_eq!(g.edge_count(), 200);
}

#[test]
fn ingest_errors_are_data_errors() {
    let ws = Workspace::new();
    fs::write(ws.path("empty.tsv"), "").unwrap();
    let out = recnet(&["ingest", &ws.arg("empty.tsv"), &ws.arg("g.bin")]);
    assert_eq!(code(&out), 2);

    fs::write(ws.path("bad.tsv"), "u1\ti1\t1\nu2\ti2\tlots\n").unwrap();
    let out = recnet(&["ingest", &ws.arg("bad.tsv"), &ws.arg("g.bin")]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("line 2"), "{}", stderr(&out));
}

#[test]
fn usage_errors_exit_with_one() {
    let ws = Workspace::new();
    assert_eq!(code(&recnet(&["frobnicate"])), 1);
    assert_eq!(code(&recnet(&["train", "--no-such-flag"])), 1);
    assert_eq!(code(&recnet(&["ingest", &ws.arg("missing.tsv"), &ws.arg("g.bin")])), 1);
    assert_eq!(code(&recnet(&["ingest", &ws.arg("edges.tsv"), &ws.arg("nodir/g.bin")])), 1);
    assert_eq!(code(&recnet(&["query", "--embeddings", &ws.arg("edges.tsv")])), 1);
    assert_eq!(code(&recnet(&["--help"])), 0);
    assert_eq!(code(&recnet(&["--version"])), 0);
}

#[test]
fn zero_epochs_writes_the_initial_store() {
    let ws = Workspace::new();
    ws.ingest();
    let out = ws.train("emb.txt", &["--epochs", "0", "--seed", "3"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let g = InteractionGraph::load_cache(ws.path("graph.bin")).unwrap();
    let stored = EmbeddingStore::load(ws.path("emb.txt")).unwrap();
    assert_eq!(stored, EmbeddingStore::init_for_graph(&g, 8, 3).unwrap());
}

#[test]
fn fixed_seed_training_writes_identical_files() {
    let ws = Workspace::new();
    ws.ingest();
    for name in ["a.bin", "b.bin"] {
        let out = ws.train(name, &["--seed", "7", "--format", "binary"]);
        assert_eq!(code(&out), 0, "{}", stderr(&out));
    }
    assert_eq!(read(&ws.path("a.bin")), read(&ws.path("b.bin")));
    let out = ws.train("c.bin", &["--seed", "8", "--format", "binary"]);
    assert_eq!(code(&out), 0);
    assert_ne!(read(&ws.path("a.bin")), read(&ws.path("c.bin")));
}

#[test]
fn parallel_and_server_modes_complete() {
    let ws = Workspace::new();
    ws.ingest();
    let out = ws.train("hog.txt", &["--workers", "8"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let out = ws.train("ps.txt", &["--mode", "ps", "--workers", "4", "--shards", "3", "--report", &ws.arg("ps.report")]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let report = KvDocument::load(ws.path("ps.report")).unwrap();
    assert_eq!(report.get("config.mode"), Some("ps"));
    assert_eq!(report.get("stale_reads"), Some("0"));
    assert!(EmbeddingStore::load(ws.path("ps.txt")).unwrap().is_finite());
}

#[test]
fn config_values_are_echoed_exactly_and_flags_win() {
    let ws = Workspace::new();
    ws.ingest();
    let config = "\
# training run
dim = 6
negatives = 3
samples_per_user = 7
learning_rate = 0.030000000000000002
epochs = 2
gamma = -0.35
decay_base = 0.995
seed = 42
train_fraction = 0.8
ks = 1,3
";
    fs::write(ws.path("run.conf"), config).unwrap();
    let out = recnet(&[
        "train",
        "--config",
        &ws.arg("run.conf"),
        "--graph",
        &ws.arg("graph.bin"),
        "--out",
        &ws.arg("emb.txt"),
        "--report",
        &ws.arg("train.report"),
        "--epochs",
        "3",
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let report = KvDocument::load(ws.path("train.report")).unwrap();
    assert_eq!(report.get("schema_version"), Some("1"));
    assert_eq!(report.get("kind"), Some("train"));
    let input = KvDocument::parse(config).unwrap();
    for (key, value) in input.entries() {
        if key == "epochs" {
            continue;
        }
        assert_eq!(report.get(&format!("config.{key}")), Some(value.as_str()), "{key}");
    }
    assert_eq!(report.get("config.epochs"), Some("3"));
    assert_eq!(report.get("epochs_run"), Some("3"));
    assert_eq!(report.get("epoch.0.positives"), Some("140"));

    fs::write(ws.path("bad.conf"), "dimension = 3\n").unwrap();
    let out = recnet(&["train", "--config", &ws.arg("bad.conf"), "--graph", &ws.arg("graph.bin"), "--out", &ws.arg("x")]);
    assert_eq!(code(&out), 1);
}

#[test]
fn query_prints_ranked_tsv() {
    let ws = Workspace::new();
    ws.ingest();
    assert_eq!(code(&ws.train("emb.txt", &["--epochs", "30"])), 0);

    let out = recnet(&["query", "--embeddings", &ws.arg("emb.txt"), "--user", "u3", "--k", "5"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let text = stdout(&out);
    let rows: Vec<Vec<&str>> = text.lines().map(|l| l.split('\t').collect()).collect();
    assert_eq!(rows.len(), 5);
    let mut last = f64::INFINITY;
    for (n, row) in rows.iter().enumerate() {
        assert_eq!(row.len(), 3);
        assert_eq!(row[0], (n + 1).to_string());
        assert!(row[1].starts_with('i'));
        assert_eq!(row[2].split('.').nth(1).map(str::len), Some(6), "{}", row[2]);
        let score: f64 = row[2].parse().unwrap();
        assert!(score <= last);
        last = score;
    }

    let out = recnet(&["query", "--embeddings", &ws.arg("emb.txt"), "--item", "i4"]);
    assert_eq!(code(&out), 0);
    let text = stdout(&out);
    assert_eq!(text.lines().count(), 8);
    assert!(text.lines().all(|l| l.split('\t').nth(1) != Some("i4")));

    let out = recnet(&[
        "query", "--embeddings", &ws.arg("emb.txt"), "--user", "u3", "--k", "20", "--graph", &ws.arg("graph.bin"),
        "--exclude-train",
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let text = stdout(&out);
    assert_eq!(text.lines().count(), 10);
    assert!(text.lines().all(|l| l.split('\t').nth(1).unwrap()[1..].parse::<usize>().unwrap() >= 10));

    let out = recnet(&["query", "--embeddings", &ws.arg("emb.txt"), "--user", "nobody"]);
    assert_eq!(code(&out), 2);
}

#[test]
fn eval_writes_report_and_table() {
    let ws = Workspace::new();
    ws.ingest();
    let out = ws.train("emb.txt", &["--split", "--seed", "5", "--epochs", "20"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let out = recnet(&[
        "eval",
        "--embeddings",
        &ws.arg("emb.txt"),
        "--graph",
        &ws.arg("graph.bin"),
        "--seed",
        "5",
        "--ks",
        "5,10,20",
        "--report",
        &ws.arg("eval.report"),
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert!(stdout(&out).contains("NDCG"));
    let report = KvDocument::load(ws.path("eval.report")).unwrap();
    assert_eq!(report.get("schema_version"), Some("1"));
    assert_eq!(report.get("config.ks"), Some("5,10,20"));
    let hr5: f64 = report.get("hr@5").unwrap().parse().unwrap();
    let hr10: f64 = report.get("hr@10").unwrap().parse().unwrap();
    let ndcg10: f64 = report.get("ndcg@10").unwrap().parse().unwrap();
    let mrr10: f64 = report.get("mrr@10").unwrap().parse().unwrap();
    assert!(hr5 <= hr10 && mrr10 <= ndcg10 && ndcg10 <= hr10);
    // Only 20 items exist, so every held-out pair ranks within 20.
    assert_eq!(report.get("hr@20"), Some("1"));
}

#[test]
fn eval_rejects_embeddings_for_another_graph() {
    let ws = Workspace::new();
    ws.ingest();
    fs::write(ws.path("other.tsv"), "a\tb\t1\nc\td\t1\n").unwrap();
    assert_eq!(code(&recnet(&["ingest", &ws.arg("other.tsv"), &ws.arg("other.bin")])), 0);
    let out = recnet(&["train", "--graph", &ws.arg("other.bin"), "--out", &ws.arg("o.txt"), "--dim", "4"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let out = recnet(&["eval", "--embeddings", &ws.arg("o.txt"), "--graph", &ws.arg("graph.bin")]);
    assert_eq!(code(&out), 2);
}

#[test]
fn cross_validation_runs_without_embeddings() {
    let ws = Workspace::new();
    ws.ingest();
    let out = recnet(&[
        "eval", "--graph", &ws.arg("graph.bin"), "--cv-folds", "3", "--dim", "4", "--epochs", "1", "--report",
        &ws.arg("cv.report"),
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let report = KvDocument::load(ws.path("cv.report")).unwrap();
    assert_eq!(report.get("kind"), Some("cross_validation"));
    assert_eq!(report.get("folds"), Some("3"));
}

#[test]
fn bench_emits_one_row_per_fraction() {
    let ws = Workspace::new();
    ws.ingest();
    let out = recnet(&[
        "bench", "--graph", &ws.arg("graph.bin"), "--scale-series", "0.5,1.0", "--epochs", "2", "--dim", "4",
        "--report", &ws.arg("bench.report"),
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let text = stdout(&out);
    assert_eq!(text.lines().count(), 3);
    let full: Vec<&str> = text.lines().nth(2).unwrap().split_whitespace().collect();
    assert_eq!(full[1..4], ["200", "20", "200"]);
    let report = KvDocument::load(ws.path("bench.report")).unwrap();
    assert_eq!(report.get("row.1.positives_per_epoch"), Some("200"));

    let out = recnet(&["bench", "--graph", &ws.arg("graph.bin"), "--scale-series", "1", "--epochs", "1", "--dim", "4"]);
    assert_eq!(code(&out), 0);
    assert_eq!(stdout(&out).lines().count(), 2);

    let out = recnet(&["bench", "--graph", &ws.arg("graph.bin"), "--scale-series", "0"]);
    assert_eq!(code(&out), 1);
}

#[test]
fn divergent_training_is_a_runtime_error() {
    let ws = Workspace::new();
    ws.ingest();
    let out = ws.train("emb.txt", &["--learning-rate", "1e38", "--epochs", "3"]);
    assert_eq!(code(&out), 3, "{}", stderr(&out));
}
