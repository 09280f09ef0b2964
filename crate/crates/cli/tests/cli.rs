use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use streamsig_cli::commands::{Checkpoint, EvalOutput, LogsigOutput};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_streamsig"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn ok(args: &[&str]) -> Output {
    let out = run(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn metrics(dir: &Path) -> Vec<Vec<String>> {
    let text = fs::read_to_string(dir.join("metrics.csv")).unwrap();
    text.lines().skip(1).map(|l| l.split(',').map(str::to_string).collect()).collect()
}

#[test]
fn gen_writes_a_dataset() {
    let tmp = tempfile::tempdir().unwrap();
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    for d in [&a, &b] {
        ok(&["gen", "--task", "sinusoid", "--regime", "sync_regular", "--n", "8", "--n-test", "2", "--out", p(d)]);
    }
    assert_eq!(fs::read_dir(a.join("train/streams")).unwrap().count(), 8);
    assert!(a.join("manifest.json").exists());
    assert!(a.join("run.json").exists());
    for f in ["manifest.json", "train/targets.jsonl", "train/streams/sample_00003.jsonl", "test/partitions/sample_00001.json"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
}

#[test]
fn usage_errors_exit_2() {
    let tmp = tempfile::tempdir().unwrap();
    let out = p(tmp.path());
    assert_eq!(run(&["gen", "--task", "sinusoid", "--regime", "weekly", "--out", out]).status.code(), Some(2));
    assert_eq!(run(&["gen", "--task", "brownian", "--out", out]).status.code(), Some(2));
    assert_eq!(run(&["gen", "--task", "brownian", "--m", "3", "--out", out]).status.code(), Some(2));
    assert_eq!(run(&["frobnicate"]).status.code(), Some(2));
}

#[test]
fn logsig_of_an_empty_stream() {
    let tmp = tempfile::tempdir().unwrap();
    let s = tmp.path().join("s.jsonl");
    fs::write(&s, "{\"T\": 2.5, \"d_disc\": 2, \"d_cont\": 1, \"continuous_knots\": [{\"t\": 0.0, \"values\": [0.0]}, {\"t\": 2.5, \"values\": [2.5]}], \"time_channel\": 0}\n").unwrap();
    let out = ok(&["logsig", "--stream", p(&s), "--depth", "2"]);
    let parsed: LogsigOutput = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(parsed.logsigs.len(), 1);
    assert_eq!(parsed.d_x, 5);
    let phi = &parsed.logsigs[0];
    assert_eq!(phi.coeffs()[4], 2.5);
    assert!(phi.coeffs().iter().enumerate().all(|(i, &c)| i == 4 || c == 0.0));
    // round trip through the output format
    let again: LogsigOutput = serde_json::from_str(&serde_json::to_string(&parsed).unwrap()).unwrap();
    assert_eq!(again.logsigs, parsed.logsigs);

    let out = ok(&["logsig", "--stream", p(&s), "--no-counts"]);
    let parsed: LogsigOutput = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(parsed.d_x, 3);
}

#[test]
fn malformed_stream_names_the_line() {
    let tmp = tempfile::tempdir().unwrap();
    let s = tmp.path().join("s.jsonl");
    fs::write(&s, "{\"T\": 1.0, \"d_disc\": 1, \"d_cont\": 0}\n{\"t\": 0.5, \"channels\": [0], \"values\": [1.0]}\n{\"t\": 0.7, \"channels\": [0]\n").unwrap();
    let out = run(&["logsig", "--stream", p(&s)]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 3"));
}

#[test]
fn train_and_evaluate() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    ok(&["gen", "--task", "sinusoid", "--regime", "async_irregular", "--n", "32", "--n-test", "8", "--seed", "3", "--out", p(&data)]);
    let scan = tmp.path().join("scan");
    let seq = tmp.path().join("seq");
    ok(&["train", "--data", p(&data), "--epochs", "4", "--mode", "scan", "--out", p(&scan)]);
    ok(&["train", "--data", p(&data), "--epochs", "4", "--mode", "sequential", "--out", p(&seq)]);
    let ms = metrics(&scan);
    let mq = metrics(&seq);
    assert_eq!(ms.len(), 4);
    let last = |m: &Vec<Vec<String>>| m.last().unwrap()[2].parse::<f64>().unwrap();
    assert!((last(&ms) - last(&mq)).abs() <= 1e-6);

    let ck = scan.join("checkpoint.json");
    let out = ok(&["eval", "--checkpoint", p(&ck), "--data", p(&data)]);
    let e: EvalOutput = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(e.labels, vec!["async_irregular"]);
    assert!((e.mse[0][0] - last(&ms)).abs() <= 1e-9);

    let missing = tmp.path().join("missing.json");
    let out = run(&["eval", "--checkpoint", p(&missing), "--data", p(&data)]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("missing.json"));
}

#[test]
fn cross_regime_matrix() {
    let tmp = tempfile::tempdir().unwrap();
    let regimes = ["sync_regular", "sync_irregular", "async_irregular", "async_sparse"];
    let mut data = Vec::new();
    let mut ckpts = Vec::new();
    for r in regimes {
        let d = tmp.path().join(r);
        ok(&["gen", "--task", "sinusoid", "--regime", r, "--n", "8", "--n-test", "4", "--out", p(&d)]);
        let o = tmp.path().join(format!("run_{r}"));
        ok(&["train", "--data", p(&d), "--epochs", "1", "--out", p(&o)]);
        data.push(d);
        ckpts.push(o.join("checkpoint.json"));
    }
    let mut args: Vec<String> = vec!["eval".into()];
    for c in &ckpts {
        args.extend(["--checkpoint".into(), p(c).into()]);
    }
    for d in &data {
        args.extend(["--data".into(), p(d).into()]);
    }
    let csv = tmp.path().join("matrix.csv");
    let json = tmp.path().join("matrix.json");
    args.extend(["--csv".into(), p(&csv).into(), "--out".into(), p(&json).into()]);
    let refs: Vec<&str> = args.iter().map(String::as_str).collect();
    ok(&refs);
    let e: EvalOutput = serde_json::from_str(&fs::read_to_string(&json).unwrap()).unwrap();
    assert_eq!(e.mse.len(), 4);
    assert!(e.mse.iter().all(|row| row.len() == 4));
    assert_eq!(fs::read_to_string(&csv).unwrap().lines().count(), 5);
    assert!(tmp.path().join("matrix.json.run.json").exists());
}

#[test]
fn brownian_arms() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("b");
    ok(&["gen", "--task", "brownian", "--m", "2", "--n", "4", "--n-test", "2", "--subgrid", "4", "--out", p(&data)]);
    for depth in ["1", "2"] {
        let out = tmp.path().join(format!("level{depth}"));
        ok(&["train", "--data", p(&data), "--depth", depth, "--no-counts", "--epochs", "1", "--out", p(&out)]);
        let ck: Checkpoint = serde_json::from_str(&fs::read_to_string(out.join("checkpoint.json")).unwrap()).unwrap();
        assert_eq!(ck.features.depth, depth.parse::<usize>().unwrap());
        assert_eq!(ck.model.d_x, 5);
    }
}

#[test]
fn numerical_failure_exits_4() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("d");
    ok(&["gen", "--task", "sinusoid", "--regime", "sync_regular", "--n", "4", "--n-test", "2", "--out", p(&data)]);
    let run_dir = tmp.path().join("r");
    ok(&["train", "--data", p(&data), "--epochs", "1", "--out", p(&run_dir)]);
    let path = run_dir.join("checkpoint.json");
    let mut ck: Checkpoint = serde_json::from_str(&fs::read_to_string(&path).unwrap()).unwrap();
    for c in &mut ck.model.channels {
        c.scale(1e200);
    }
    fs::write(&path, serde_json::to_string(&ck).unwrap()).unwrap();
    assert_eq!(run(&["eval", "--checkpoint", p(&path), "--data", p(&data)]).status.code(), Some(4));
}

#[test]
fn inspect_round_trip() {
    let tmp = tempfile::tempdir().unwrap();
    let s = tmp.path().join("s.jsonl");
    fs::write(&s, "{\"T\": 2.0, \"d_disc\": 2, \"d_cont\": 1, \"continuous_knots\": [{\"t\": 0.0, \"values\": [0.0]}, {\"t\": 2.0, \"values\": [2.0]}], \"time_channel\": 0}\n{\"t\": 0.5, \"channels\": [0], \"values\": [3.0]}\n{\"t\": 1.25, \"channels\": [0, 1], \"values\": [3.0, -1.0]}\n").unwrap();
    let path = tmp.path().join("path.json");
    ok(&["inspect", "--stream", p(&s), "--out", p(&path)]);
    let out = ok(&["inspect", "--decode", p(&path)]);
    let (a, _) = streamsig::format::read_stream(&fs::read_to_string(&s).unwrap()).unwrap();
    let (b, _) = streamsig::format::read_stream(&String::from_utf8(out.stdout).unwrap()).unwrap();
    assert_eq!(a, b);
    assert_eq!(run(&["inspect"]).status.code(), Some(2));
}
