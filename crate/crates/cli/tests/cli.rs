use std::fs;
use std::io::Write;
use std::path::Path;
use std::process::{Command, Output, Stdio};

use serde_json::Value;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_csi-graphlab"));
    c.env_remove("CSI_GRAPHLAB_SEED");
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn run_stdin(args: &[&str], input: &[u8]) -> Output {
    let mut child = bin()
        .args(args)
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .unwrap();
    child.stdin.take().unwrap().write_all(input).unwrap();
    child.wait_with_output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

fn export(name: &str, dir: &Path) -> String {
    let o = run(&["corpus", "export", name]);
    assert!(o.status.success(), "{}", stderr(&o));
    let p = dir.join(format!("{}.scm", name.replace(['(', ')', '/'], "_")));
    fs::write(&p, &o.stdout).unwrap();
    p.to_str().unwrap().to_string()
}

#[test]
fn corpus_list_has_all_examples() {
    let o = run(&["corpus", "list"]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert_eq!(text.lines().count(), 11);
    for name in ["intro", "non-markov(1/3)", "p1-limit", "fig1-change-gated"] {
        assert!(text.lines().any(|l| l.split('\t').next() == Some(name)), "{name}");
    }
}

#[test]
fn ground_truth_writes_dot_files_and_membership() {
    let dir = tempfile::tempdir().unwrap();
    let scm = export("intro", dir.path());
    let out = dir.path().join("gt");
    let o = run(&["ground-truth", &scm, "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let dots: Vec<_> = fs::read_dir(&out)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .filter(|n| n.ends_with(".dot"))
        .collect();
    // two regimes
    assert_eq!(dots.len(), 2 * 2 + 3, "{dots:?}");
    let phys = fs::read_to_string(out.join("physical_0.dot")).unwrap();
    let descr = fs::read_to_string(out.join("descriptive_0.dot")).unwrap();
    assert!(phys.contains("\"T\" -> \"Y\""), "{phys}");
    assert!(!descr.contains("\"T\" -> \"Y\""), "{descr}");

    let csv = fs::read_to_string(out.join("membership.csv")).unwrap();
    let header: Vec<&str> = csv.lines().next().unwrap().split(',').collect();
    let row: Vec<&str> = csv.lines().find(|l| l.starts_with("T->Y,")).unwrap().split(',').collect();
    let col = |name: &str| header.iter().position(|h| *h == name).unwrap();
    assert_eq!(row[col("union")], "1");
    assert_eq!(row[col("physical[0]")], "1");
    assert_eq!(row[col("descriptive[0]")], "0");

    let report: Value = serde_json::from_str(&fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["context"], "R");
    assert_eq!(report["predicates"]["weakly_regime_acyclic"], true);
}

#[test]
fn all_graphs_adds_counterfactual_and_ident() {
    let dir = tempfile::tempdir().unwrap();
    let scm = export("cf-example", dir.path());
    let out = dir.path().join("gt");
    let o = run(&["ground-truth", &scm, "--all-graphs", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let cf = fs::read_to_string(out.join("counterfactual_1.dot")).unwrap();
    let union = fs::read_to_string(out.join("union.dot")).unwrap();
    assert!(cf.contains("\"X\" -> \"Y\""));
    assert!(!union.contains("\"X\" -> \"Y\""));
    assert!(out.join("ident_0.dot").exists());
}

#[test]
fn out_refuses_to_overwrite_without_force() {
    let dir = tempfile::tempdir().unwrap();
    let scm = export("intro", dir.path());
    let out = dir.path().join("gt");
    let out = out.to_str().unwrap();
    assert!(run(&["ground-truth", &scm, "--out", out]).status.success());
    let before = fs::read_to_string(Path::new(out).join("report.json")).unwrap();
    fs::write(Path::new(out).join("report.json"), "sentinel").unwrap();

    let o = run(&["ground-truth", &scm, "--out", out]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("--force"), "{}", stderr(&o));
    assert_eq!(fs::read_to_string(Path::new(out).join("report.json")).unwrap(), "sentinel");

    let o = run(&["ground-truth", &scm, "--out", out, "--force"]);
    assert!(o.status.success());
    assert_eq!(fs::read_to_string(Path::new(out).join("report.json")).unwrap(), before);
}

#[test]
fn export_pipes_into_ground_truth() {
    let doc = run(&["corpus", "export", "non-markov(1/3)"]);
    assert!(doc.status.success());
    let o = run_stdin(&["ground-truth", "-"], &doc.stdout);
    assert!(o.status.success(), "{}", stderr(&o));
    let report: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert!(report["regimes"].as_array().unwrap().contains(&serde_json::json!("b0")));
    let again = run_stdin(&["ground-truth", "-"], &doc.stdout);
    assert_eq!(o.stdout, again.stdout);
}

#[test]
fn discover_then_classify_intro_mediator() {
    let dir = tempfile::tempdir().unwrap();
    let scm = export("intro-mediator", dir.path());
    let d = run(&["discover", "--exact", &scm]);
    assert!(d.status.success(), "{}", stderr(&d));
    let report: Value = serde_json::from_slice(&d.stdout).unwrap();
    assert!(report["ground_truth_union"].is_object());

    let c = run_stdin(&["classify", "-"], &d.stdout);
    assert!(c.status.success(), "{}", stderr(&c));
    let changes: Value = serde_json::from_slice(&c.stdout).unwrap();
    let at0 = changes["per_regime"]["0"].as_array().unwrap();
    let find = |a: &str, b: &str| {
        at0.iter()
            .find(|e| {
                let (x, y) = (&e["edge"][0], &e["edge"][1]);
                (x == a && y == b) || (x == b && y == a)
            })
            .unwrap()["classification"]
            .clone()
    };
    assert_eq!(find("T", "Y"), "non_physical");
    assert_eq!(find("M", "T"), "undetermined");

    let o = run_stdin(&["classify", "-", "--mode", "oriented"], &d.stdout);
    assert!(o.status.success(), "{}", stderr(&o));
}

#[test]
fn oriented_classify_needs_ground_truth_union() {
    let dir = tempfile::tempdir().unwrap();
    let scm = export("intro", dir.path());
    let s = run(&["sample", &scm, "--n", "3000", "--seed", "5"]);
    assert!(s.status.success());
    let csv = dir.path().join("intro.csv");
    fs::write(&csv, &s.stdout).unwrap();
    let d = run(&["discover", "--data", csv.to_str().unwrap(), "--alpha", "0.01"]);
    assert!(d.status.success(), "{}", stderr(&d));
    let o = run_stdin(&["classify", "-", "--mode", "oriented"], &d.stdout);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("ground_truth_union"), "{}", stderr(&o));
    assert!(run_stdin(&["classify", "-"], &d.stdout).status.success());
}

#[test]
fn sample_is_byte_stable_and_reads_seed_from_env() {
    let dir = tempfile::tempdir().unwrap();
    let scm = export("exo-gate", dir.path());
    let a = run(&["sample", &scm, "--n", "200", "--seed", "9"]);
    let b = run(&["sample", &scm, "--n", "200", "--seed", "9"]);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    assert_eq!(stdout(&a).lines().count(), 201);
    let env = bin()
        .args(["sample", &scm, "--n", "200"])
        .env("CSI_GRAPHLAB_SEED", "9")
        .output()
        .unwrap();
    assert_eq!(env.stdout, a.stdout);
}

#[test]
fn transfer_test_writes_verdict_and_replicates() {
    let dir = tempfile::tempdir().unwrap();
    let scm = export("fig1-change-overlap", dir.path());
    let s = run(&["sample", &scm, "--n", "4000", "--seed", "2"]);
    let csv = dir.path().join("d.csv");
    fs::write(&csv, &s.stdout).unwrap();
    let out = dir.path().join("t");
    let args = [
        "transfer-test",
        csv.to_str().unwrap(),
        "--x",
        "X",
        "--y",
        "Y",
        "--context",
        "C",
        "--r0",
        "0",
        "--K",
        "50",
        "--seed",
        "4",
        "--out",
        out.to_str().unwrap(),
    ];
    let o = run(&args);
    assert!(o.status.success(), "{}", stderr(&o));
    let v: Value = serde_json::from_str(&fs::read_to_string(out.join("transfer.json")).unwrap()).unwrap();
    assert_eq!(v["evidence_physical"], true);
    let reps = fs::read_to_string(out.join("replicates.csv")).unwrap();
    assert_eq!(reps.lines().count(), 51);
}

#[test]
fn verify_small_run_passes() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("spec.json");
    fs::write(&spec, r#"{"n_vars": 3, "max_domain": 2}"#).unwrap();
    let o = run(&["verify", "--count", "10", "--seed", "3", "--spec", spec.to_str().unwrap(), "--no-corpus"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let s: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(s["spec"]["n_vars"], 3);
    assert!(s["failures"].as_array().unwrap().is_empty());
    assert!(s["models"].as_array().unwrap().is_empty());
}

#[test]
fn validation_errors_exit_2_and_name_the_culprit() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope.scm");
    let missing = missing.to_str().unwrap();
    let cases: Vec<(Vec<&str>, &str)> = vec![
        (vec!["ground-truth", missing], "nope.scm"),
        (vec!["corpus", "export", "winter"], "winter"),
        (vec!["classify", missing, "--mode", "sideways"], "--mode"),
        (vec!["sample", "--n", "3"], "SCM"),
        (vec!["discover", "--exact", "a", "--data", "b"], "--data"),
        (vec!["verify", "--spec", missing], "--spec"),
    ];
    for (args, needle) in cases {
        let o = run(&args);
        assert_eq!(o.status.code(), Some(2), "{args:?}: {}", stderr(&o));
        assert!(stderr(&o).contains(needle), "{args:?}: {}", stderr(&o));
    }

    let bad = dir.path().join("bad.json");
    fs::write(&bad, r#"{"n_vars": 3, "colour": 1}"#).unwrap();
    let o = run(&["verify", "--spec", bad.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("colour"), "{}", stderr(&o));

    let scm = dir.path().join("broken.scm");
    fs::write(&scm, "variables:\n  Y: [0, 1]\n").unwrap();
    let o = run(&["ground-truth", scm.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("broken.scm"), "{}", stderr(&o));
}
