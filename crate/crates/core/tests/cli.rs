use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn disparity(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_disparity"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> Output {
    let out = disparity(args);
    assert!(
        out.status.success(),
        "{args:?} failed:\n{}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn json(path: PathBuf) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

/// Raw interaction files: `a` likes `b` three times, `c` and `d` trade
/// one like each way, `e` sends a single like.
fn raw_files(dir: &Path) -> (PathBuf, PathBuf) {
    let nodes = dir.join("users.csv");
    let edges = dir.join("interactions.csv");
    fs::write(&nodes, "id,gender\na,F\nb,M\nc,F\nd,M\ne,F\n").unwrap();
    fs::write(
        &edges,
        "sender,receiver,type,timestamp\n\
         a,b,like,1\na,b,like,2\na,b,like,3\n\
         c,d,like,4\nd,c,like,5\n\
         e,a,like,6\n\
         b,a,comment,7\n",
    )
    .unwrap();
    (nodes, edges)
}

#[test]
fn ingest_filters_and_writes_archive() {
    let dir = TempDir::new().unwrap();
    let (nodes, edges) = raw_files(dir.path());
    let out = dir.path().join("g");
    ok(&["ingest", "--nodes", s(&nodes), "--edges", s(&edges), "--out", s(&out)]);
    let kept = fs::read_to_string(out.join("nodes.csv")).unwrap();
    // e has one interaction and is dropped.
    assert!(!kept.contains("\ne,"), "{kept}");
    assert_eq!(kept.lines().count(), 5);
    let manifest = json(out.join("manifest.json"));
    assert_eq!(manifest["command"], "ingest");
    assert_eq!(manifest["inputs"].as_object().unwrap().len(), 2);
    assert_eq!(manifest["inputs"][s(&nodes)].as_str().unwrap().len(), 64);

    let all = dir.path().join("all");
    ok(&["ingest", "--nodes", s(&nodes), "--edges", s(&edges), "--min-total", "1", "--out", s(&all)]);
    assert_eq!(fs::read_to_string(all.join("nodes.csv")).unwrap().lines().count(), 6);
}

#[test]
fn ingest_reports_bad_line() {
    let dir = TempDir::new().unwrap();
    let (nodes, edges) = raw_files(dir.path());
    fs::write(&edges, "sender,receiver,type,timestamp\na,b,like,1\na,zz,like,2\n").unwrap();
    let out = disparity(&["ingest", "--nodes", s(&nodes), "--edges", s(&edges), "--out", s(&dir.path().join("g"))]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains(":3:") && err.contains("zz"), "{err}");
}

/// 2000 users; the ten most followed men and women get `male(i)` and
/// `female(i)` followers, everybody else one.
fn skewed_archive(dir: &Path, male: impl Fn(usize) -> usize, female: impl Fn(usize) -> usize) -> PathBuf {
    let out = dir.join("skewed");
    fs::create_dir_all(&out).unwrap();
    let mut nodes = String::from("id,gender\n");
    for i in 0..2000 {
        writeln!(nodes, "{i},{}", if i % 2 == 0 { "M" } else { "F" }).unwrap();
    }
    let mut edges = String::from("sender,receiver,type,timestamp\n");
    for i in 0..2000usize {
        writeln!(edges, "{i},{},like,", (i + 2) % 2000).unwrap();
    }
    for hub in 0..10 {
        let (m, f) = (2 * hub, 2 * hub + 1);
        for k in 0..male(hub) {
            writeln!(edges, "{},{m},like,", 100 + 7 * k).unwrap();
        }
        for k in 0..female(hub) {
            writeln!(edges, "{},{f},like,", 101 + 7 * k).unwrap();
        }
    }
    fs::write(out.join("nodes.csv"), nodes).unwrap();
    fs::write(out.join("edges.csv"), edges).unwrap();
    out
}

fn flagged(out: &Output) -> Vec<String> {
    String::from_utf8_lossy(&out.stdout)
        .lines()
        .filter_map(|l| l.strip_prefix("glass ceiling: ").map(str::to_string))
        .collect()
}

#[test]
fn analyze_flags_male_skew_only() {
    let dir = TempDir::new().unwrap();
    let skewed = skewed_archive(dir.path(), |i| 60 + i, |i| 10 + i);
    let out = ok(&["analyze", "--graph", s(&skewed), "--out", s(&dir.path().join("a"))]);
    let flags = flagged(&out);
    assert!(flags.contains(&"in-degree".to_string()), "{flags:?}");
    let grid = fs::read_to_string(dir.path().join("a/glass_ceiling.csv")).unwrap();
    assert!(grid.lines().any(|l| l.starts_with("in-degree,yes")), "{grid}");
    for name in ["utest.csv", "utest_details.csv", "ccdf_pagerank_female.csv", "manifest.json"] {
        assert!(dir.path().join("a").join(name).exists(), "{name}");
    }

    let even = skewed_archive(&dir.path().join("even"), |i| 30 + i, |i| 30 + i);
    let out = ok(&["analyze", "--graph", s(&even), "--measures", "in-degree,in-intensity", "--out", s(&dir.path().join("b"))]);
    assert!(flagged(&out).is_empty());
}

#[test]
fn analyze_rejects_unknown_measure() {
    let dir = TempDir::new().unwrap();
    let out = disparity(&["analyze", "--graph", s(dir.path()), "--measures", "fame", "--out", s(dir.path())]);
    assert_eq!(out.status.code(), Some(2));
    let out = disparity(&["analyze", "--graph", s(dir.path()), "--measures", "target-hi-index", "--out", s(dir.path())]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn synth_is_reproducible() {
    let dir = TempDir::new().unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    for d in [&a, &b] {
        ok(&["synth", "--n", "300", "--female-fraction", "0.3", "--seed", "4", "--out", s(d)]);
    }
    for f in ["nodes.csv", "edges.csv"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap());
    }
    let nodes = fs::read_to_string(a.join("nodes.csv")).unwrap();
    let females = nodes.lines().filter(|l| l.ends_with(",F")).count();
    assert!((females as f64 / 300.0 - 0.3).abs() <= 0.02, "{females}");

    let out = disparity(&["synth", "--n", "1", "--out", s(&dir.path().join("c"))]);
    assert_eq!(out.status.code(), Some(1));
}

fn synth(dir: &Path) -> PathBuf {
    let g = dir.join("g");
    ok(&["synth", "--n", "600", "--seed", "2", "--out", s(&g)]);
    g
}

#[test]
fn seed_outputs_and_repeatability() {
    let dir = TempDir::new().unwrap();
    let g = synth(dir.path());
    let args = |out: &Path| {
        vec![
            "seed".to_string(), "--graph".into(), s(&g).into(), "--zeta".into(), "0.5".into(), "--k".into(), "30".into(),
            "--sample-k".into(), "10".into(), "--samples".into(), "4000".into(), "--out".into(), s(out).into(),
        ]
    };
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    for out in [&a, &b] {
        let v = args(out);
        ok(&v.iter().map(String::as_str).collect::<Vec<_>>());
    }
    assert_eq!(fs::read(a.join("result.json")).unwrap(), fs::read(b.join("result.json")).unwrap());

    let res = json(a.join("result.json"));
    for key in ["measure", "zeta", "r", "K", "abs_error", "spread", "within_margin", "mode", "master_seed"] {
        assert!(res.get(key).is_some(), "missing {key}");
    }
    assert_eq!(res["K"], 30);
    assert_eq!(res["within_margin"], true, "{res}");
    assert_eq!(fs::read_to_string(a.join("seeds.csv")).unwrap().lines().count(), 31);
    let scaling = fs::read_to_string(a.join("scaling_target-hi-index.csv")).unwrap();
    assert_eq!(scaling.lines().next(), Some("r,s,spread"));
    assert_eq!(scaling.lines().count(), 12);
}

#[test]
fn seed_embedding_index_needs_scores() {
    let dir = TempDir::new().unwrap();
    let g = synth(dir.path());
    let out_dir = dir.path().join("s");
    let base = ["seed", "--graph", s(&g), "--zeta", "0.5", "--k", "20", "--samples", "500", "--out", s(&out_dir)];
    let out = disparity(&[&base[..], &["--measures", "embedding-index"]].concat());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("--scores"));

    // A synthetic score file covering every node.
    let ids: Vec<String> = fs::read_to_string(g.join("nodes.csv"))
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.split(',').next().unwrap().to_string())
        .collect();
    let scores = dir.path().join("scores.tsv");
    let body: String = ids.iter().enumerate().map(|(i, id)| format!("{id}\t{}\n", (i % 10) as f64 / 10.0)).collect();
    fs::write(&scores, body).unwrap();
    ok(&[&base[..], &["--measures", "target-hi-index,embedding-index", "--scores", s(&scores)]].concat());
    let all = json(out_dir.join("measures.json"));
    assert_eq!(all.as_array().unwrap().len(), 2);
    assert!(out_dir.join("scaling_embedding-index.csv").exists());
}

#[test]
fn baselines_write_one_result_each() {
    let dir = TempDir::new().unwrap();
    let g = synth(dir.path());
    let one = dir.path().join("one");
    ok(&["baselines", "--graph", s(&g), "--zeta", "0.4", "--k", "10", "--which", "agnostic", "--samples", "500", "--out", s(&one)]);
    let files: Vec<_> = fs::read_dir(&one).unwrap().map(|e| e.unwrap().file_name().into_string().unwrap()).collect();
    assert_eq!(files.iter().filter(|f| f.ends_with(".json") && *f != "manifest.json").count(), 1);

    let all = dir.path().join("all");
    ok(&[
        "baselines", "--graph", s(&g), "--zeta", "0.4", "--k", "10", "--samples", "500", "--greedy-samples", "100",
        "--candidate-pool", "60", "--out", s(&all),
    ]);
    for name in ["agnostic", "diversity", "im-balanced"] {
        let v = json(all.join(format!("{name}.json")));
        assert_eq!(v["K"], 10, "{name}");
    }
    assert!(json(all.join("im-balanced.json")).get("feasible").is_some());
}

#[test]
fn baselines_im_balanced_reports_feasibility() {
    let dir = TempDir::new().unwrap();
    let g = dir.path().join("g");
    fs::create_dir_all(&g).unwrap();
    fs::write(g.join("nodes.csv"), "id,gender\n1,F\n2,F\n3,M\n4,M\n5,M\n6,M\n").unwrap();
    fs::write(
        g.join("edges.csv"),
        "sender,receiver,type,timestamp\n1,2,like,\n3,4,like,\n4,5,like,\n5,6,like,\n6,3,like,\n4,1,like,\n",
    )
    .unwrap();
    let out = ok(&[
        "baselines", "--graph", s(&g), "--zeta", "1", "--k", "1", "--which", "im-balanced", "--samples", "200",
        "--greedy-samples", "200", "--out", s(&dir.path().join("b")),
    ]);
    let v = json(dir.path().join("b/im-balanced.json"));
    let warned = String::from_utf8_lossy(&out.stderr).contains("warning");
    assert_eq!(v["feasible"] == false, warned, "{v}");
}

#[test]
fn simulate_prints_estimate() {
    let dir = TempDir::new().unwrap();
    let g = synth(dir.path());
    let out = ok(&["simulate", "--graph", s(&g), "--seeds", "0,1", "--samples", "1000", "--mode", "weighted-cascade"]);
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    for key in ["mean_spread", "female_ratio", "std_spread", "num_samples", "master_seed", "mode"] {
        assert!(v.get(key).is_some(), "missing {key}");
    }
    assert_eq!(v["mode"], "weighted-cascade");
    assert!(v["mean_spread"].as_f64().unwrap() >= 2.0);

    let out = disparity(&["simulate", "--graph", s(&g), "--seeds", "nobody"]);
    assert_eq!(out.status.code(), Some(1));
}
