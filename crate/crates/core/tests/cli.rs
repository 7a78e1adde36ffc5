use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn treehist(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_treehist")).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn three_path_set_takes_tied_ends() {
    let dir = tempfile::tempdir().unwrap();
    let f = write(dir.path(), "path.txt", "A B\nB C\n");
    let out = treehist(&["infer-root", p(&f), "--eps", "0.4"]);
    assert!(out.status.success());
    assert_eq!(
        stdout(&out),
        "node,log_hist,root_prob,in_confset_0.6\nB,0.69314718056,0.5,1\nA,0,0.25,1\nC,0,0.25,1\n"
    );
    let summary = String::from_utf8(out.stderr).unwrap();
    assert!(summary.contains("size=3"), "{summary}");
}

#[test]
fn star_center_alone_at_half_mass() {
    let dir = tempfile::tempdir().unwrap();
    let f = write(dir.path(), "star.txt", "hub x\nhub y\nz hub\n");
    let out = treehist(&["infer-root", p(&f), "--eps", "0.51", "--eps", "0.45"]);
    assert!(out.status.success());
    let text = stdout(&out);
    let rows: Vec<&str> = text.lines().collect();
    assert_eq!(rows[0], "node,log_hist,root_prob,in_confset_0.49,in_confset_0.55");
    assert!(rows[1].starts_with("hub,") && rows[1].ends_with(",1,1"));
    for r in &rows[2..] {
        assert!(r.ends_with(",0,1"), "{r}");
    }
    let json = treehist(&["infer-root", p(&f), "--eps", "0.51", "--format", "json"]);
    let v: serde_json::Value = serde_json::from_slice(&json.stdout).unwrap();
    assert_eq!(v["sets"][0]["nodes"], serde_json::json!(["hub"]));
    assert_eq!(v["nodes"][0]["root_prob"], 0.5);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("g");
    assert_eq!(treehist(&["generate", "--n", "0", "--out", p(&out)]).status.code(), Some(2));
    assert_eq!(treehist(&["generate", "--n", "5", "--kernel", "cubic", "--out", p(&out)]).status.code(), Some(2));
    assert_eq!(treehist(&["bounds", "--eps", "1.5"]).status.code(), Some(2));
    assert_eq!(treehist(&["no-such-command"]).status.code(), Some(2));

    let bad = write(dir.path(), "bad.txt", "a b\n# comment\nb c d\n");
    let o = treehist(&["infer-root", p(&bad)]);
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 3"));
    let cyc = write(dir.path(), "cyc.txt", "a b\nb c\nc a\n");
    assert_eq!(treehist(&["infer-root", p(&cyc)]).status.code(), Some(3));
    let missing = dir.path().join("missing.txt");
    assert_eq!(treehist(&["infer-root", p(&missing)]).status.code(), Some(3));

    let path = write(dir.path(), "path.txt", "A B\nB C\n");
    assert_eq!(treehist(&["arrival", p(&path), "--node", "B", "--samples", "0"]).status.code(), Some(2));
    assert_eq!(treehist(&["arrival", p(&path), "--node", "Q"]).status.code(), Some(3));
    assert_eq!(treehist(&["sample", p(&path), "--samples", "0"]).status.code(), Some(2));
    let split = write(dir.path(), "split.txt", "a b\nc d\n");
    assert_eq!(treehist(&["mst-root", p(&split)]).status.code(), Some(3));
}

#[test]
fn generate_writes_tree_edges_and_root() {
    let dir = tempfile::tempdir().unwrap();
    let prefix = dir.path().join("t");
    assert!(treehist(&["generate", "--kernel", "linear", "--n", "1000", "--seed", "7", "--out", p(&prefix)]).status.success());
    let edges = std::fs::read_to_string(dir.path().join("t.edges")).unwrap();
    assert_eq!(edges.lines().count(), 999);
    let parents = std::fs::read_to_string(dir.path().join("t.parents")).unwrap();
    let truth = tree_history::GrownTree::parse_text(&parents).unwrap();
    assert_eq!(truth.len(), 1000);
    let root = tree_history::experiments::read_true_root(&dir.path().join("t.meta")).unwrap();
    let tree = tree_history::LabeledTree::parse_edge_list(&edges).unwrap();
    assert!(tree.index_of(&root).is_some());

    let again = dir.path().join("u");
    treehist(&["generate", "--kernel", "linear", "--n", "1000", "--seed", "7", "--out", p(&again)]);
    assert_eq!(edges, std::fs::read_to_string(dir.path().join("u.edges")).unwrap());
}

#[test]
fn arrival_of_path_middle() {
    let dir = tempfile::tempdir().unwrap();
    let f = write(dir.path(), "path.txt", "A B\nB C\n");
    let out = treehist(&["arrival", p(&f), "--node", "B", "--samples", "10000", "--eps", "0.4", "--seed", "3"]);
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let m: Vec<f64> = v["masses"].as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).collect();
    assert!((m[0] - 0.5).abs() < 0.01 && (m[1] - 0.5).abs() < 0.01 && m[2] == 0.0, "{m:?}");
    assert_eq!(v["confset"]["times"], serde_json::json!([1, 2]));
    assert_eq!(v["node"], "B");
}

#[test]
fn samples_are_histories() {
    let dir = tempfile::tempdir().unwrap();
    let f = write(dir.path(), "star.txt", "c a\nc b\nc d\n");
    for sampler in ["forward", "fast", "backward"] {
        let out = treehist(&["sample", p(&f), "--samples", "200", "--sampler", sampler, "--seed", "1"]);
        assert!(out.status.success());
        let text = stdout(&out);
        assert_eq!(text.lines().count(), 200);
        for line in text.lines() {
            let (order, w) = line.split_once('\t').unwrap();
            let nodes: Vec<&str> = order.split(',').collect();
            assert_eq!(nodes.len(), 4);
            assert!(nodes[0] == "c" || nodes[1] == "c", "{line}");
            assert_eq!(w, "0");
        }
    }
    let weighted = stdout(&treehist(&["sample", p(&f), "--samples", "5", "--kernel", "sublinear:0.5"]));
    assert!(weighted.lines().all(|l| l.split_once('\t').unwrap().1.parse::<f64>().unwrap() < 0.0));
}

#[test]
fn mst_of_a_tree_matches_infer_root() {
    let dir = tempfile::tempdir().unwrap();
    let prefix = dir.path().join("t");
    treehist(&["generate", "--kernel", "uniform", "--n", "400", "--seed", "2", "--out", p(&prefix)]);
    let edges = dir.path().join("t.edges");
    let meta = tree_history::experiments::read_true_root(&dir.path().join("t.meta")).unwrap();
    let inferred = stdout(&treehist(&["infer-root", p(&edges), "--eps", "0.05", "--eps", "0.2"]));
    let col = |k: usize| -> usize {
        inferred.lines().skip(1).filter(|l| l.split(',').nth(k).unwrap() == "1").count()
    };
    let covered = |k: usize| inferred.lines().skip(1).any(|l| {
        let f: Vec<&str> = l.split(',').collect();
        f[0] == meta && f[k] == "1"
    });
    let mst = stdout(&treehist(&[
        "mst-root", p(&edges), "--trials", "6", "--seed", "1", "--eps", "0.05", "--eps", "0.2", "--true-root", &meta,
    ]));
    let rows: Vec<Vec<&str>> = mst.lines().skip(1).map(|l| l.split(',').collect()).collect();
    for (i, k) in [(0, 3), (1, 4)] {
        assert_eq!(rows[i][3], col(k).to_string(), "{mst}");
        assert_eq!(rows[i][4], "0");
        assert_eq!(rows[i][2], if covered(k) { "1" } else { "0" });
    }
}

#[test]
fn mst_on_triangle_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let f = write(dir.path(), "tri.txt", "a b\nb c\nc a\n");
    let a = treehist(&["mst-root", p(&f), "--trials", "3", "--seed", "9", "--format", "json"]);
    let b = treehist(&["mst-root", p(&f), "--trials", "3", "--seed", "9", "--format", "json"]);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn coverage_matches_its_trial_log() {
    let dir = tempfile::tempdir().unwrap();
    let log = dir.path().join("trials.csv");
    let out = treehist(&[
        "coverage", "--kernel", "uniform", "--n", "200", "--trials", "50", "--eps", "0.1", "--eps", "0.3", "--seed", "4",
        "--trial-log", p(&log),
    ]);
    assert!(out.status.success());
    let summary = stdout(&out);
    let log = std::fs::read_to_string(&log).unwrap();
    let mut trial_ids = Vec::new();
    for (row, eps) in summary.lines().skip(1).zip(["0.1", "0.3"]) {
        let f: Vec<&str> = row.split(',').collect();
        assert_eq!(f[0], eps);
        let ind: Vec<u32> = log
            .lines()
            .skip(1)
            .filter(|l| l.split(',').nth(1) == Some(eps))
            .map(|l| l.split(',').nth(3).unwrap().parse().unwrap())
            .collect();
        assert_eq!(ind.len(), 50);
        let mean = ind.iter().sum::<u32>() as f64 / 50.0;
        assert_eq!(f[2].parse::<f64>().unwrap(), mean);
    }
    for l in log.lines().skip(1) {
        trial_ids.push(l.split(',').next().unwrap().parse::<usize>().unwrap());
    }
    assert!(trial_ids.windows(2).all(|w| w[0] <= w[1]));
}

#[test]
fn sizes_and_bounds_tables() {
    let out = stdout(&treehist(&["sizes", "--kernel", "linear", "--n", "300", "--trials", "20", "--eps", "0.1"]));
    let row: Vec<&str> = out.lines().nth(1).unwrap().split(',').collect();
    assert_eq!(row[5], "12194");
    assert!(row[2].parse::<f64>().unwrap() >= 1.0);
    let bounds = stdout(&treehist(&["bounds", "--eps", "0.05", "--eps", "0.1", "--eps", "0.01"]));
    assert_eq!(bounds, "epsilon,ua,lpa\n0.05,149,330258\n0.1,57,12194\n0.01,1151,487774626\n");
}

#[test]
fn seed_tree_and_oracle_check() {
    let dir = tempfile::tempdir().unwrap();
    let f = write(dir.path(), "path.txt", "A B\nB C\n");
    let out = treehist(&["seed-tree", p(&f), "--k", "2", "--samples", "20000", "--seed", "1"]);
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let pairs = v["pairs"].as_array().unwrap();
    assert_eq!(pairs.len(), 2);
    for pair in pairs {
        assert!((pair["prob"].as_f64().unwrap() - 0.5).abs() < 0.01);
        assert!(pair["set"].as_array().unwrap().contains(&serde_json::json!("B")));
    }
    let check = treehist(&["oracle-check", "--n", "7", "--trials", "40"]);
    assert!(check.status.success());
    assert!(stdout(&check).contains("mismatches=0"));
    let single = treehist(&["oracle-check", p(&f)]);
    assert_eq!(stdout(&single), "trees=1 nodes=3 mismatches=0\n");
}
