use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use jsonschema::JSONSchema;
use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_entropy-phase"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn schema(name: &str) -> JSONSchema {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../schemas").join(name);
    let value: Value = serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap();
    JSONSchema::compile(&value).expect("schema compiles")
}

fn assert_valid(schema: &JSONSchema, doc: &Value) {
    if let Err(errors) = schema.validate(doc) {
        let msgs: Vec<String> = errors.map(|e| format!("{} at {}", e, e.instance_path)).collect();
        panic!("schema violations: {msgs:?}");
    }
}

/// Runs `args` writing CSV/JSON (and SVG for analyze) into `dir`; returns
/// the paths.
fn run_to(dir: &Path, tag: &str, args: &[&str], svg: bool) -> (Output, Vec<PathBuf>) {
    let csv = dir.join(format!("{tag}.csv"));
    let json = dir.join(format!("{tag}.json"));
    let mut full: Vec<String> = args.iter().map(|s| s.to_string()).collect();
    full.extend(["--out".into(), csv.display().to_string(), "--json".into(), json.display().to_string()]);
    let mut paths = vec![csv, json];
    if svg {
        let p = dir.join(format!("{tag}.svg"));
        full.extend(["--svg".into(), p.display().to_string()]);
        paths.push(p);
    }
    (bin().args(&full).output().unwrap(), paths)
}

#[test]
fn analyze_writes_csv_summary_svg_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let (out, paths) =
        run_to(dir.path(), "a", &["analyze", "--model", "xor", "--a", "1", "--tau", "0.5", "--eps", "0:1:101"], true);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(&paths[0]).unwrap();
    assert!(csv.starts_with("eps,h_data,h_diag,hprime_data,hprime_diag\n"));
    assert!(!csv.contains('\r'));
    let summary: Value = serde_json::from_str(&fs::read_to_string(&paths[1]).unwrap()).unwrap();
    assert_valid(&schema("analyze-summary.schema.json"), &summary);
    assert!((summary["mutual_info"].as_f64().unwrap() - 0.393469).abs() < 1e-6);
    assert!(fs::read_to_string(&paths[2]).unwrap().starts_with("<svg"));

    let sidecar: Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("a.csv.manifest.json")).unwrap()).unwrap();
    assert_valid(&schema("manifest.schema.json"), &sidecar);
    assert_eq!(sidecar["command"], "analyze");
    assert_eq!(sidecar["parameters"]["tau"], "0.5");
}

#[test]
fn non_xor_summaries_validate() {
    let dir = tempfile::tempdir().unwrap();
    for model in ["iid", "repetition", "oscillation", "spike"] {
        let (out, paths) = run_to(dir.path(), model, &["analyze", "--model", model], false);
        assert!(out.status.success(), "{model}: {}", String::from_utf8_lossy(&out.stderr));
        let summary: Value = serde_json::from_str(&fs::read_to_string(&paths[1]).unwrap()).unwrap();
        assert_valid(&schema("analyze-summary.schema.json"), &summary);
        assert!(summary["tau_opt"].is_null());
    }
    for which in ["1", "2", "3", "4"] {
        let (out, paths) =
            run_to(dir.path(), &format!("ex{which}"), &["examples", "--which", which, "--T", "200"], false);
        assert!(out.status.success());
        let summary: Value = serde_json::from_str(&fs::read_to_string(&paths[1]).unwrap()).unwrap();
        assert_valid(&schema("examples-summary.schema.json"), &summary);
    }
}

#[test]
fn reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cases: [(&[&str], bool); 5] = [
        (&["analyze", "--model", "spike", "--tau", "0.4"], true),
        (&["optimize", "--a-list", "0.01,1/e,3"], false),
        (&["simulate", "--T", "50", "--trials", "5000", "--seed", "11"], false),
        (
            &[
                "code",
                "--B",
                "200",
                "--tau",
                "0.5",
                "--rate-list",
                "0.1,0.2",
                "--blocks",
                "3",
                "--trials",
                "6",
                "--seed",
                "2",
            ],
            false,
        ),
        (&["examples", "--which", "4", "--T", "100"], false),
    ];
    for (i, (args, svg)) in cases.iter().enumerate() {
        let (o1, first) = run_to(dir.path(), &format!("r{i}a"), args, *svg);
        let (o2, second) = run_to(dir.path(), &format!("r{i}b"), args, *svg);
        assert!(o1.status.success() && o2.status.success(), "{args:?}");
        for (p, q) in first.iter().zip(&second) {
            assert_eq!(fs::read(p).unwrap(), fs::read(q).unwrap(), "{args:?}: {} differs", p.display());
        }
    }
}

#[test]
fn stdout_is_the_csv_when_no_out_is_given() {
    let out = run(&["optimize", "--a-list", "1"]);
    assert!(out.status.success());
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.starts_with("a,tau_opt,r_opt,i_at_opt,tau_asymptotic\n1,0.44"));
    let summary: Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(summary["model"], "xor");
}

#[test]
fn exit_codes() {
    assert_eq!(run(&["analyze", "--model", "xor", "--tau", "1.1"]).status.code(), Some(1));
    assert_eq!(run(&["analyze", "--model", "nonsense"]).status.code(), Some(1));
    assert_eq!(run(&["analyze", "--model", "gain"]).status.code(), Some(2));
    assert_eq!(run(&["simulate", "--trials", "0"]).status.code(), Some(1));
    assert_eq!(run(&["code", "--tau", "0.5", "--rate-list", "0.6"]).status.code(), Some(1));
    assert_eq!(run(&["examples", "--which", "7"]).status.code(), Some(1));
    assert_eq!(run(&["optimize", "--a-list", "-1"]).status.code(), Some(1));
    assert_eq!(run(&["--help"]).status.code(), Some(0));
    assert_eq!(run(&[]).status.code(), Some(1));
}

#[test]
fn simulate_small_system_matches_oracles() {
    let out = run(&["simulate", "--T", "2", "--tau", "0.5", "--a", "1", "--quantity", "distinct", "--t-list", "1,2"]);
    assert!(out.status.success());
    let csv = String::from_utf8(out.stdout).unwrap();
    let rows: Vec<Vec<f64>> = csv.lines().skip(1).map(|l| l.split(',').map(|c| c.parse().unwrap()).collect()).collect();
    assert_eq!(rows[0][1], 1.0);
    assert_eq!(rows[1][1], 1.75);
    for r in &rows {
        assert!(r[3] <= r[1] && r[1] <= r[4], "{r:?}");
    }
}

#[test]
fn selftest_json_reports_every_criterion() {
    let out = run(&["selftest", "--json"]);
    let report: Value = serde_json::from_slice(&out.stdout).unwrap();
    let criteria = report["criteria"].as_array().unwrap();
    assert_eq!(criteria.len(), 10);
    assert_eq!(out.status.code(), Some(if report["passed"] == true { 0 } else { 3 }));
    assert!(criteria.iter().all(|c| c["passed"].is_boolean() && c["detail"].is_string()));
}
