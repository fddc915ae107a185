use std::path::{Path, PathBuf};
use std::process::Command;

use serde_json::Value;

fn data(name: &str) -> String {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("tests/data")
        .join(name)
        .display()
        .to_string()
}

struct Run {
    code: i32,
    out: String,
    err: String,
}

fn fcplan(args: &[&str]) -> Run {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let argv = std::iter::once("fcplan").chain(args.iter().copied());
    let code = fcp_cli::run(argv, &mut out, &mut err);
    Run {
        code,
        out: String::from_utf8(out).unwrap(),
        err: String::from_utf8(err).unwrap(),
    }
}

fn kitchen() -> (String, String) {
    (data("kitchen.domain.json"), data("kitchen.problem.json"))
}

fn plan_to(dir: &Path, extra: &[&str]) -> (Run, PathBuf) {
    let (d, p) = kitchen();
    let out = dir.join("plan.json");
    let o = out.display().to_string();
    let mut args = vec!["plan", "--domain", &d, "--problem", &p, "--out", &o];
    args.extend_from_slice(extra);
    (fcplan(&args), out)
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn binary_exit_codes() {
    let (d, p) = kitchen();
    let bin = env!("CARGO_BIN_EXE_fcplan");
    let ok = Command::new(bin)
        .args(["plan", "--domain", &d, "--problem", &p])
        .output()
        .unwrap();
    assert_eq!(ok.status.code(), Some(0));
    let plan: Value = serde_json::from_slice(&ok.stdout).unwrap();
    assert_eq!(plan["accepted"], true);

    let strict = Command::new(bin)
        .args(["plan", "--domain", &d, "--problem", &p, "--alpha", "1.0"])
        .output()
        .unwrap();
    assert_eq!(strict.status.code(), Some(2));
    let plan: Value = serde_json::from_slice(&strict.stdout).unwrap();
    assert_eq!(plan["failure_reason"], "BelowAlpha");

    let usage = Command::new(bin).args(["plan", "--problem", &p]).output().unwrap();
    assert_eq!(usage.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&usage.stderr).contains("--domain"));

    let help = Command::new(bin).arg("--help").output().unwrap();
    assert_eq!(help.status.code(), Some(0));
}

#[test]
fn alpha_and_adaptive_conflict() {
    let (d, p) = kitchen();
    let r = fcplan(&["plan", "--domain", &d, "--problem", &p, "--alpha", "0.4", "--adaptive"]);
    assert_eq!(r.code, 1);
    assert!(r.err.contains("cannot be used with"), "{}", r.err);
}

#[test]
fn adaptive_threshold_is_recorded() {
    let dir = tempfile::tempdir().unwrap();
    let (r, path) = plan_to(dir.path(), &["--adaptive", "--criticality", "casual"]);
    assert_eq!(r.code, 0, "{}", r.err);
    let plan = read_json(&path);
    assert!(plan["alpha_used"].as_f64().unwrap() < 0.5);
}

#[test]
fn validate_reproduces_planner_degrees() {
    let dir = tempfile::tempdir().unwrap();
    let (r, path) = plan_to(dir.path(), &["--seed", "7"]);
    assert_eq!(r.code, 0);
    let plan = read_json(&path);
    let (d, p) = kitchen();
    let plan_path = path.display().to_string();
    let v = fcplan(&["validate", "--domain", &d, "--problem", &p, "--plan", &plan_path]);
    assert_eq!(v.code, 0, "{}{}", v.out, v.err);
    let degrees: Vec<f64> = v
        .out
        .lines()
        .filter(|l| l.starts_with("step "))
        .map(|l| l.rsplit('\t').next().unwrap().parse().unwrap())
        .collect();
    let expected: Vec<f64> = plan["step_degrees"]
        .as_array()
        .unwrap()
        .iter()
        .map(|x| x.as_f64().unwrap())
        .collect();
    assert_eq!(degrees, expected);
    let mu: f64 = v
        .out
        .lines()
        .find_map(|l| l.strip_prefix("mu\t"))
        .unwrap()
        .parse()
        .unwrap();
    assert_eq!(mu, plan["plan_mu"].as_f64().unwrap());
    assert!(v.out.trim_end().ends_with("accepted"));
}

#[test]
fn validate_reports_the_violating_step() {
    let dir = tempfile::tempdir().unwrap();
    let (_, path) = plan_to(dir.path(), &[]);
    let mut plan = read_json(&path);
    plan["actions"] = serde_json::json!(["mix-almond", "knead", "bake"]);
    plan["chunks"] = serde_json::json!([]);
    std::fs::write(&path, plan.to_string()).unwrap();
    let (d, p) = kitchen();
    let plan_path = path.display().to_string();
    let v = fcplan(&["validate", "--domain", &d, "--problem", &p, "--plan", &plan_path]);
    assert_eq!(v.code, 2, "{}{}", v.out, v.err);
    assert!(v.out.contains("violation\tLogic at step 1"), "{}", v.out);
}

#[test]
fn validate_warns_on_tnorm_mismatch_and_fails_on_unknown_actions() {
    let dir = tempfile::tempdir().unwrap();
    let (_, path) = plan_to(dir.path(), &[]);
    let (d, p) = kitchen();
    let plan_path = path.display().to_string();
    let v = fcplan(&[
        "validate",
        "--domain",
        &d,
        "--problem",
        &p,
        "--plan",
        &plan_path,
        "--tnorm",
        "godel",
    ]);
    assert!(v.err.contains("warning"), "{}", v.err);
    // Gödel composes to the weakest step
    assert!(v.out.contains("mu\t0.8"), "{}", v.out);

    let mut plan = read_json(&path);
    plan["actions"] = serde_json::json!(["mix-rye", "knead", "bake"]);
    plan["chunks"] = serde_json::json!([]);
    std::fs::write(&path, plan.to_string()).unwrap();
    let v = fcplan(&["validate", "--domain", &d, "--problem", &p, "--plan", &plan_path]);
    assert_eq!(v.code, 1);
    assert!(v.err.contains("mix-rye"));
}

#[test]
fn trace_and_audit_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let trace = dir.path().join("trace.jsonl").display().to_string();
    let (r, path) = plan_to(dir.path(), &["--trace", &trace, "--audit"]);
    assert_eq!(r.code, 0);
    let text = std::fs::read_to_string(&trace).unwrap();
    assert!(text.lines().count() > 1);
    for line in text.lines() {
        let v: Value = serde_json::from_str(line).unwrap();
        assert!(v["direction"].is_string());
    }
    let plan = read_json(&path);
    let samples = plan["provenance"]["samples"].as_array().unwrap();
    assert_eq!(samples.len(), plan["step_degrees"].as_array().unwrap().len());
    assert_eq!(samples[0]["samples"].as_array().unwrap().len(), 5);
}

#[test]
fn ground_table_and_noisy_oracles() {
    let d = data("kitchen.domain.json");
    let s = data("kitchen.state.json");
    let args = [
        "ground",
        "--domain",
        &d,
        "--state",
        &s,
        "--action",
        "knead",
        "--predicate",
        "suitable",
    ];
    let r = fcplan(&args);
    assert_eq!(r.code, 0, "{}", r.err);
    assert_eq!(r.out, "samples\t0.8 0.8 0.8 0.8 0.8\nmedian\t0.8\n");

    let dir = tempfile::tempdir().unwrap();
    let mut domain = read_json(Path::new(&d));
    domain["oracle"]["noise_std"] = serde_json::json!(0.1);
    let noisy = dir.path().join("noisy.json");
    std::fs::write(&noisy, domain.to_string()).unwrap();
    let n = noisy.display().to_string();
    let args = [
        "ground",
        "--domain",
        &n,
        "--state",
        &s,
        "--action",
        "knead",
        "--predicate",
        "suitable",
        "--seed",
        "3",
    ];
    let a = fcplan(&args);
    let b = fcplan(&args);
    assert_eq!(a.code, 0);
    assert_eq!(a.out, b.out);
    let samples: Vec<&str> = a.out.lines().next().unwrap().split(['\t', ' ']).skip(1).collect();
    assert_eq!(samples.len(), 5);
    assert!(samples.windows(2).any(|w| w[0] != w[1]));

    let p = data("kitchen.problem.json");
    let from_problem = fcplan(&[
        "ground",
        "--domain",
        &d,
        "--problem",
        &p,
        "--action",
        "mix-wheat",
        "--predicate",
        "suitable",
        "--k",
        "1",
    ]);
    assert_eq!(from_problem.out, "samples\t0.9\nmedian\t0.9\n");

    let unknown = fcplan(&[
        "ground",
        "--domain",
        &d,
        "--state",
        &s,
        "--action",
        "knead",
        "--predicate",
        "tasty",
    ]);
    assert_eq!(unknown.code, 1);
    assert!(unknown.err.contains("tasty"));
}

#[test]
fn bench_over_a_generated_suite() {
    let dir = tempfile::tempdir().unwrap();
    let suite = dir.path().join("suite").display().to_string();
    let g = fcplan(&[
        "gen-suite",
        "--out",
        &suite,
        "--lengths",
        "3",
        "--missing",
        "1",
        "--candidates",
        "3",
        "--replicates",
        "1",
    ]);
    assert_eq!(g.code, 0, "{}", g.err);
    let b = fcplan(&["bench", "--suite", &suite]);
    assert_eq!(b.code, 0, "{}", b.err);
    let rows: Vec<&str> = b.out.lines().collect();
    assert_eq!(rows.len(), 2);
    assert!(rows[0].starts_with("instance,config,"));
    assert!(rows[1].starts_with("recipe-l3-m1-c3-r0,lukasiewicz/k5/chunk/fixed/max,"));
    assert!(b.err.contains("config"));

    let ablated = fcplan(&["bench", "--suite", &suite, "--ablate", "k,chunking"]);
    assert_eq!(ablated.out.lines().count(), 1 + 8);

    let bad = fcplan(&["bench", "--suite", &suite, "--ablate", "beam"]);
    assert_eq!(bad.code, 1);

    let empty = dir.path().join("empty");
    std::fs::create_dir(&empty).unwrap();
    let e = fcplan(&["bench", "--suite", &empty.display().to_string()]);
    assert_eq!(e.code, 1);
    assert!(e.err.contains("empty") || e.err.contains("no instances"), "{}", e.err);
}

#[test]
fn import_then_plan() {
    let dir = tempfile::tempdir().unwrap();
    let od = dir.path().join("d.json").display().to_string();
    let op = dir.path().join("p.json").display().to_string();
    let r = fcplan(&[
        "import",
        &data("rooms.domain.pddl"),
        &data("rooms.problem.pddl"),
        "--out-domain",
        &od,
        "--out-problem",
        &op,
    ]);
    assert_eq!(r.code, 0, "{}", r.err);
    let p = fcplan(&["plan", "--domain", &od, "--problem", &op]);
    assert_eq!(p.code, 0, "{}", p.err);
    let plan: Value = serde_json::from_str(&p.out).unwrap();
    assert_eq!(plan["actions"].as_array().unwrap().last().unwrap(), "commit");
    assert_eq!(plan["provenance"]["oracle"], "rule");
}

#[test]
fn import_errors_name_the_file_and_line() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.pddl");
    std::fs::write(
        &bad,
        "(define (problem p) (:domain rooms)\n  (:objects a - room)\n  (:init (at a))\n  (:goal (or (at a) (at a))))\n",
    )
    .unwrap();
    let od = dir.path().join("d.json").display().to_string();
    let op = dir.path().join("p.json").display().to_string();
    let r = fcplan(&[
        "import",
        &data("rooms.domain.pddl"),
        &bad.display().to_string(),
        "--out-domain",
        &od,
        "--out-problem",
        &op,
    ]);
    assert_eq!(r.code, 1);
    assert!(r.err.contains("bad.pddl: line 4"), "{}", r.err);
}
