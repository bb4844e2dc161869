use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn wocd(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_wocd")).args(args).output().unwrap()
}

fn ok(args: &[&str]) -> Output {
    let out = wocd(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    out
}

fn synth_into(dir: &Path, extra: &[&str]) {
    let mut args = vec!["synth", "--nodes", "90", "--communities", "3", "--seed", "7", "--out"];
    args.push(dir.to_str().unwrap());
    args.extend_from_slice(extra);
    ok(&args);
}

fn path(dir: &Path, name: &str) -> String {
    dir.join(name).to_str().unwrap().to_string()
}

const QUICK: &[&str] = &["--hidden", "8", "--epochs", "10", "--lr", "0.01"];

#[test]
fn synth_is_byte_reproducible() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    synth_into(a.path(), &["--p-in", "0.2"]);
    synth_into(b.path(), &["--p-in", "0.2"]);
    for name in ["edges.tsv", "features.csv", "cover.txt", "manifest.json"] {
        assert_eq!(fs::read(a.path().join(name)).unwrap(), fs::read(b.path().join(name)).unwrap(), "{name}");
    }
    let manifest: serde_json::Value = serde_json::from_slice(&fs::read(a.path().join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["n_nodes"], 90);
    assert_eq!(manifest["seed"], 7);
}

#[test]
fn forced_structure_gives_complete_blocks() {
    let dir = tempfile::tempdir().unwrap();
    synth_into(dir.path(), &["--p-in", "1", "--p-out", "0", "--overlap", "0"]);
    let edges = fs::read_to_string(dir.path().join("edges.tsv")).unwrap();
    let cover = fs::read_to_string(dir.path().join("cover.txt")).unwrap();
    let community: Vec<usize> = cover
        .lines()
        .filter(|l| !l.starts_with('#'))
        .map(|l| l.split(':').nth(1).unwrap().trim().parse().unwrap())
        .collect();
    let mut n_edges = 0;
    for line in edges.lines().filter(|l| !l.starts_with('#')) {
        let mut it = line.split('\t').map(|t| t.parse::<usize>().unwrap());
        let (u, v) = (it.next().unwrap(), it.next().unwrap());
        assert_eq!(community[u], community[v]);
        n_edges += 1;
    }
    // Three complete blocks of 30 nodes.
    assert_eq!(n_edges, 3 * 30 * 29 / 2);
}

#[test]
fn missing_required_flag_is_a_usage_error() {
    let out = wocd(&["synth", "--nodes", "10"]);
    assert_eq!(out.status.code(), Some(2));
    let out = wocd(&["frobnicate"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn error_classes_have_stable_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let missing = path(dir.path(), "missing.txt");
    assert_eq!(wocd(&["cliques", "--edges", &missing]).status.code(), Some(3));

    let bad = path(dir.path(), "bad.tsv");
    fs::write(&bad, "0\t1\n1\tx\n").unwrap();
    assert_eq!(wocd(&["cliques", "--edges", &bad]).status.code(), Some(4));

    synth_into(dir.path(), &[]);
    let (e, f, c) = (path(dir.path(), "edges.tsv"), path(dir.path(), "features.csv"), path(dir.path(), "cover.txt"));
    let out = path(dir.path(), "run");
    let code = |extra: &[&str]| {
        let mut args = vec!["train", "--edges", &e, "--features", &f, "--truth", &c, "--out", &out];
        args.extend_from_slice(&["--hidden", "8", "--epochs", "10"]);
        args.extend_from_slice(extra);
        wocd(&args).status.code()
    };
    assert_eq!(code(&["--threshold", "1.5"]), Some(5));

    let config = path(dir.path(), "config.json");
    fs::write(&config, "{\"no_such_field\": 1}").unwrap();
    assert_eq!(code(&["--config", &config]), Some(4));

    assert_eq!(code(&["--lr", "1e300"]), Some(6));
}

#[test]
fn cliques_and_pseudo_labels() {
    let dir = tempfile::tempdir().unwrap();
    let edges = path(dir.path(), "tri.tsv");
    fs::write(&edges, "#nodes=4\n0\t1\n1\t2\n0\t2\n2\t3\n").unwrap();
    let out = ok(&["cliques", "--edges", &edges]);
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(!text.is_empty());
    for line in text.lines() {
        let (seed, members) = line.split_once(':').unwrap();
        assert_eq!(seed.split(' ').count(), 2);
        assert!(members.split_whitespace().count() >= 2);
    }

    synth_into(dir.path(), &[]);
    let pseudo = path(dir.path(), "pseudo.cover");
    let out = ok(&[
        "pseudo", "--edges", &path(dir.path(), "edges.tsv"), "--truth", &path(dir.path(), "cover.txt"),
        "--rho", "0.2", "--out", &pseudo,
    ]);
    let stats: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(stats["n_pseudo"].as_u64().unwrap() > 0);
    assert!(stats["cliques_used"].as_u64().unwrap() <= stats["n_cliques"].as_u64().unwrap());
    assert!(fs::read_to_string(&pseudo).unwrap().starts_with("#nodes=90"));
}

#[test]
fn train_then_eval() {
    let dir = tempfile::tempdir().unwrap();
    synth_into(dir.path(), &[]);
    let run = path(dir.path(), "run");
    let config = path(dir.path(), "config.json");
    fs::write(&config, "{\"hidden\": 64, \"lambda2\": 3.0}").unwrap();
    let (e, f, c) = (path(dir.path(), "edges.tsv"), path(dir.path(), "features.csv"), path(dir.path(), "cover.txt"));
    let mut args = vec!["train", "--edges", &e, "--features", &f, "--truth", &c, "--out", &run, "--config", &config];
    args.extend_from_slice(QUICK);
    ok(&args);

    let report: serde_json::Value = serde_json::from_slice(&fs::read(dir.path().join("run/report.json")).unwrap()).unwrap();
    let onmi = report["onmi"].as_f64().unwrap();
    assert!((0.0..=1.0).contains(&onmi));
    assert_eq!(report["loss_trace_initial"].as_array().unwrap().len(), 5);
    let ckpt: serde_json::Value = serde_json::from_slice(&fs::read(dir.path().join("run/model.json")).unwrap()).unwrap();
    // The flag overrides the config file's width.
    assert_eq!(ckpt["hidden"], 8);

    let out = ok(&["eval", "--predicted", &path(dir.path(), "run/final.cover"), "--truth", &path(dir.path(), "cover.txt")]);
    let metrics: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(metrics["onmi"].as_f64().unwrap(), onmi);
}

#[test]
fn ablation_arms_are_config_identities() {
    let dir = tempfile::tempdir().unwrap();
    synth_into(dir.path(), &[]);
    let (e, f, c) = (path(dir.path(), "edges.tsv"), path(dir.path(), "features.csv"), path(dir.path(), "cover.txt"));
    let train_onmi = |name: &str, extra: &[&str]| {
        let out = path(dir.path(), name);
        let mut args = vec!["train", "--edges", &e, "--features", &f, "--truth", &c, "--out", &out];
        args.extend_from_slice(&["--hidden", "8", "--lr", "0.01"]);
        args.extend_from_slice(extra);
        ok(&args);
        let report: serde_json::Value =
            serde_json::from_slice(&fs::read(dir.path().join(name).join("report.json")).unwrap()).unwrap();
        format!("{:.1}", report["onmi"].as_f64().unwrap() * 100.0)
    };
    let swept_onmi = |arm: &str| {
        let out = path(dir.path(), &format!("{arm}.csv"));
        let mut args = vec!["ablate", "--edges", &e, "--features", &f, "--truth", &c, "--out", &out, "--arms", arm];
        args.extend_from_slice(QUICK);
        ok(&args);
        let csv = fs::read_to_string(&out).unwrap();
        csv.lines().nth(1).unwrap().split(',').nth(4).unwrap().to_string()
    };
    // QUICK's `--epochs 10` gives 5 epochs per round.
    assert_eq!(
        train_onmi("np", &["--lambda2", "0", "--epochs-initial", "5", "--epochs-refined", "0"]),
        swept_onmi("no-pseudo")
    );
    assert_eq!(train_onmi("gcn", &["--beta", "0", "--epochs", "10"]), swept_onmi("gcn-only"));
}

#[test]
fn ablate_grid_rows_and_aggregates() {
    let dir = tempfile::tempdir().unwrap();
    synth_into(dir.path(), &[]);
    let (e, f, c) = (path(dir.path(), "edges.tsv"), path(dir.path(), "features.csv"), path(dir.path(), "cover.txt"));
    let out = path(dir.path(), "sweep.csv");
    let mut args = vec![
        "ablate", "--edges", &e, "--features", &f, "--truth", &c, "--out", &out, "--rho", "0.05,0.1,0.15,0.2",
        "--seeds", "0,1,2,3,4", "--hidden", "4", "--epochs", "2",
    ];
    ok(&args);
    let first = fs::read_to_string(&out).unwrap();
    let lines: Vec<&str> = first.lines().collect();
    assert!(lines[0].starts_with("kind,arm,seed,rho,onmi_pct"));
    assert_eq!(lines.iter().filter(|l| l.starts_with("run,")).count(), 20);
    let aggregates: Vec<&&str> = lines.iter().filter(|l| l.starts_with("aggregate,")).collect();
    assert_eq!(aggregates.len(), 4);
    assert!(aggregates.iter().all(|l| l.contains('±')));

    args.push("--sequential");
    ok(&args);
    assert_eq!(fs::read_to_string(&out).unwrap(), first);
}
