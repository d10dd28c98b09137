use std::path::Path;
use std::process::{Command, Output};

fn gazehead(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gazehead"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str], cwd: &Path) -> String {
    let out = gazehead(args, cwd);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn files(dir: &Path) -> Vec<String> {
    let mut v: Vec<String> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    v.sort();
    v
}

#[test]
fn generate_one_task_two_participants() {
    let dir = tempfile::tempdir().unwrap();
    ok(
        &["generate", "--task", "linear-pursuit", "--participants", "2", "--seed", "7", "--duration", "2", "--out", "d/"],
        dir.path(),
    );
    let names = files(&dir.path().join("d"));
    assert_eq!(names.len(), 24);
    assert!(names.iter().all(|n| n.contains("linear-pursuit") && n.ends_with(".jsonl")));
}

#[test]
fn evaluate_without_controllers_is_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = gazehead(&["evaluate", "--data", "d", "--out", "e"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(!dir.path().join("e").exists());
}

#[test]
fn unknown_task_is_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = gazehead(&["generate", "--task", "juggling", "--out", "d"], dir.path());
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn missing_data_is_runtime_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = gazehead(&["train", "--family", "mlp", "--data", "nope", "--out", "m.json"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("nope"));
    assert!(files(dir.path()).is_empty());
}

#[test]
fn help_lists_defaults() {
    let dir = tempfile::tempdir().unwrap();
    let help = ok(&["exosim", "--help"], dir.path());
    for d in ["[default: 25]", "[default: -3]", "[default: 30]", "[default: 0.1]", "[default: 200]", "[default: 50]"] {
        assert!(help.contains(d), "missing {d}");
    }
}

/// generate -> train every trainable family -> evaluate with the quadrant
/// baseline -> report, all under `root`.
fn pipeline(root: &Path, jobs: &str) {
    let g = |a: &[&str]| {
        let mut v = vec!["--seed", "11", "--jobs", jobs];
        v.extend_from_slice(a);
        ok(&v, root)
    };
    g(&["generate", "--participants", "3", "--trials", "4", "--duration", "3", "--out", "data"]);
    std::fs::write(root.join("split.json"), r#"{"train_ids":[0,1],"test_ids":[2]}"#).unwrap();
    for (family, extra) in [("vector", None), ("mlp", Some("8")), ("lstm", Some("4"))] {
        let out = format!("ck/{family}.json");
        let mut a = vec!["train", "--family", family, "--data", "data", "--split", "split.json", "--epochs", "3", "--out", &out];
        if let Some(h) = extra {
            a.extend(["--hidden", h]);
        }
        let line = g(&a);
        let report: serde_json::Value = serde_json::from_str(line.trim()).unwrap();
        assert!(report["test_mse"].as_f64().unwrap().is_finite());
    }
    let table = g(&[
        "evaluate", "--controller", "quadrant", "--controller", "ck/vector.json", "--controller", "ck/mlp.json",
        "--controller", "ck/lstm.json", "--data", "data", "--split", "split.json", "--keep-steps", "--out", "eval",
    ]);
    assert_eq!(table.lines().count(), 5, "{table}");
    g(&["report", "eval/scores.csv", "--out", "report"]);
    g(&["exosim", "--controller", "ck/vector.json", "--task", "rapid-search", "--duration", "2", "--out", "exo/pose.csv"]);
}

#[test]
fn full_pipeline_is_reproducible_across_thread_counts() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    pipeline(a.path(), "1");
    pipeline(b.path(), "3");

    let table = std::fs::read_to_string(a.path().join("report/summary.csv")).unwrap();
    assert_eq!(table.lines().count(), 5);
    assert!(table.starts_with("controller,linear-pursuit,arc-pursuit,rapid-search,rapid-avoidance,overall"));

    for sub in ["data", "ck", "eval", "report", "exo"] {
        let names = files(&a.path().join(sub));
        assert_eq!(names, files(&b.path().join(sub)));
        for n in names {
            let x = std::fs::read(a.path().join(sub).join(&n)).unwrap();
            let y = std::fs::read(b.path().join(sub).join(&n)).unwrap();
            assert!(x == y, "{sub}/{n} differs between runs");
        }
    }
}

#[test]
fn summary_matches_recomputation_from_steps() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();
    ok(&["generate", "--participants", "1", "--trials", "4", "--duration", "2", "--out", "data"], root);
    ok(&["evaluate", "--controller", "quadrant", "--data", "data", "--keep-steps", "--out", "eval"], root);
    ok(&["report", "eval/steps.csv", "--out", "from_steps"], root);
    ok(&["report", "eval/suite.json", "--out", "from_suite"], root);
    let read = |p: &str| -> serde_json::Value {
        serde_json::from_str(&std::fs::read_to_string(root.join(p)).unwrap()).unwrap()
    };
    let a = read("from_steps/summary.json");
    let b = read("from_suite/summary.json");
    let x = a["rows"][0]["overall"].as_f64().unwrap();
    let y = b["rows"][0]["overall"].as_f64().unwrap();
    assert!((x - y).abs() <= 1e-9 * y.abs().max(1e-12), "{x} vs {y}");
}

#[test]
fn report_lists_bad_inputs_and_keeps_going() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();
    std::fs::write(root.join("good.csv"), "controller,task,trajectory,mse,steps\nA,arc-pursuit,t,0.5,3\n").unwrap();
    std::fs::write(root.join("bad.json"), "{").unwrap();
    let text = ok(&["report", "good.csv", "bad.json", "missing.csv", "--out", "r"], root);
    assert_eq!(text.matches("skipped").count(), 2);
    assert_eq!(std::fs::read_to_string(root.join("r/summary.csv")).unwrap().lines().count(), 2);
}

#[test]
fn exosim_pose_stays_in_custom_limits() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();
    ok(
        &[
            "exosim", "--controller", "quadrant", "--task", "rapid-avoidance", "--duration", "10", "--flexion-max", "10",
            "--extension-max", "-2", "--yaw-max", "5", "--out", "pose.csv",
        ],
        root,
    );
    let mut rdr = csv::Reader::from_path(root.join("pose.csv")).unwrap();
    let mut n = 0;
    for rec in rdr.records() {
        let rec = rec.unwrap();
        let pitch: f64 = rec[1].parse().unwrap();
        let yaw: f64 = rec[2].parse().unwrap();
        assert!((-2.0..=10.0).contains(&pitch) && yaw.abs() <= 5.0);
        n += 1;
    }
    // 900 samples span 9.989 s: 1998 sensor samples, 499 full ticks.
    assert_eq!(n, 499);
}
