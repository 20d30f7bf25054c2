use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use flow_eval::datasets::write_archive;
use flow_eval::{Dataset, FlowField, Grid, Sample, SignedDistanceField};
use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_flow-eval"))
}

fn run(args: &[&str], paths: &[(&str, &Path)]) -> Output {
    let mut cmd = bin();
    cmd.args(args);
    for (flag, p) in paths {
        cmd.arg(flag).arg(p);
    }
    cmd.output().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn ok(o: Output) -> Output {
    assert!(o.status.success(), "exit {:?}: {}", o.status.code(), stderr(&o));
    o
}

/// `n` small samples with Re = 10, 20, ... and a centred obstacle.
fn tiny_dataset(dir: &Path, n: usize) -> PathBuf {
    let g = Grid::unit_square(17).unwrap();
    let sdf = SignedDistanceField::from_fn(g, |x, y| (x - 0.5).hypot(y - 0.5) - 0.2).unwrap();
    let samples = (0..n)
        .map(|k| {
            let a = k as f64 * 0.01;
            let flow = FlowField::from_fns(g, move |x, _| x + a, |_, y| -y, |x, y| x * y);
            Sample::new(format!("s{k:04}"), 10.0 * (k + 1) as f64, None, Some(sdf.clone()), flow, None).unwrap()
        })
        .collect();
    let path = dir.join(format!("tiny{n}.zip"));
    write_archive(&Dataset::in_memory(samples).unwrap(), &path).unwrap();
    path
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn identity_prediction_scores_100() {
    let dir = tempfile::tempdir().unwrap();
    let data = tiny_dataset(dir.path(), 4);
    let out = dir.path().join("r.json");
    ok(run(&["evaluate"], &[("--data", &data), ("--pred", &data), ("--out", &out)]));
    let r = json(&out);
    for m in ["m1", "m2"] {
        assert_eq!(r[m]["raw"], 0.0);
        assert_eq!(r[m]["score"], 100.0);
    }
    assert_eq!(r["n_samples"], 4);
}

#[test]
fn missing_prediction_names_the_path() {
    let dir = tempfile::tempdir().unwrap();
    let data = tiny_dataset(dir.path(), 2);
    let missing = dir.path().join("nope.zip");
    let out = dir.path().join("r.json");
    let o = run(&["evaluate"], &[("--data", &data), ("--pred", &missing), ("--out", &out)]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("nope.zip"), "{}", stderr(&o));
    assert!(!out.exists());
}

#[test]
fn random_split_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let data = tiny_dataset(dir.path(), 3000);
    let (a, b) = (dir.path().join("a.json"), dir.path().join("b.json"));
    for out in [&a, &b] {
        ok(run(&["split", "--protocol", "random", "--fraction", "0.2", "--seed", "42"], &[("--data", &data), ("--out", out)]));
    }
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    let s = json(&a);
    assert_eq!(s["test_ids"].as_array().unwrap().len(), 600);
    assert_eq!(s["train_ids"].as_array().unwrap().len(), 2400);
}

#[test]
fn subset_ladder_keeps_the_test_set() {
    let dir = tempfile::tempdir().unwrap();
    let data = tiny_dataset(dir.path(), 100);
    let parent = dir.path().join("extra.json");
    ok(run(&["split", "--protocol", "extrapolatory", "--fraction", "0.1"], &[("--data", &data), ("--out", &parent)]));
    let p = json(&parent);
    assert_eq!(p["test_ids"].as_array().unwrap().len(), 20);
    for n in ["40", "20", "10"] {
        let sub = dir.path().join(format!("sub{n}.json"));
        ok(run(&["split", "--subset", n], &[("--data", &data), ("--parent", &parent), ("--out", &sub)]));
        let s = json(&sub);
        assert_eq!(s["test_ids"], p["test_ids"]);
        assert_eq!(s["train_ids"].as_array().unwrap().len(), n.parse::<usize>().unwrap());
    }
}

fn report(dir: &Path, data: &Path, model: &str, extra: &[&str]) -> PathBuf {
    let out = dir.join(format!("{model}{}.json", extra.join("")));
    let mut args = vec!["evaluate", "--model", model];
    args.extend_from_slice(extra);
    ok(run(&args, &[("--data", data), ("--pred", data), ("--out", &out)]));
    out
}

#[test]
fn table_merges_reports_and_rejects_conflicts() {
    let dir = tempfile::tempdir().unwrap();
    let data = tiny_dataset(dir.path(), 4);
    let a = report(dir.path(), &data, "alpha", &[]);
    let b = report(dir.path(), &data, "beta", &["--difficulty", "extrapolatory"]);
    let md = ok(bin().arg("table").arg(&a).arg(&b).output().unwrap());
    let md = String::from_utf8(md.stdout).unwrap();
    assert!(md.contains("| alpha |") && md.contains("| beta |"), "{md}");
    let csv = ok(bin().args(["table", "--format", "csv"]).arg(&a).arg(&b).output().unwrap());
    assert_eq!(String::from_utf8(csv.stdout).unwrap().lines().count(), 3);

    let c = report(dir.path(), &data, "gamma", &["--band", "0:0.4"]);
    let o = bin().arg("table").arg(&a).arg(&c).output().unwrap();
    assert_eq!(o.status.code(), Some(8), "{}", stderr(&o));
}

#[test]
fn verify_passes_and_catches_injected_fault() {
    ok(bin().args(["verify", "--filter", "score"]).output().unwrap());
    let o = bin().args(["verify", "--filter", "gradient", "--inject-fault", "first-order-gradient"]).output().unwrap();
    assert_eq!(o.status.code(), Some(1));
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.contains("FAIL"), "{text}");
}

#[test]
fn bad_band_is_rejected_without_output() {
    let dir = tempfile::tempdir().unwrap();
    let data = tiny_dataset(dir.path(), 2);
    let out = dir.path().join("r.json");
    for (band, code) in [("abc", 2), ("0.2:0.1", 5)] {
        let o = run(&["evaluate", "--band", band], &[("--data", &data), ("--pred", &data), ("--out", &out)]);
        assert_eq!(o.status.code(), Some(code), "{}", stderr(&o));
        assert!(!out.exists());
    }
}
