use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn corpus(file: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/corpus").join(file)
}

fn rlplift(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rlplift"))
        .args(args)
        .env_remove("RLPLIFT_EXTERNAL_SOLVER")
        .output()
        .expect("runs")
}

fn model_args(model: &str, kb: &str) -> Vec<String> {
    vec![
        "--rlp".into(),
        corpus(&format!("{model}.rlp")).display().to_string(),
        "--lkb".into(),
        corpus(&format!("{kb}.lkb")).display().to_string(),
    ]
}

fn run_json(model: &str, kb: &str, extra: &[&str]) -> (i32, Value, String) {
    let mut args = vec!["run".to_string()];
    args.extend(model_args(model, kb));
    args.extend(["--json", "-"].map(String::from));
    args.extend(extra.iter().map(|s| s.to_string()));
    let out = rlplift(&args.iter().map(String::as_str).collect::<Vec<_>>());
    let text = String::from_utf8(out.stdout).unwrap();
    let json = serde_json::from_str(&text).unwrap_or(Value::Null);
    (out.status.code().unwrap(), json, text)
}

#[test]
fn flow_run_reports_max_flow() {
    let (code, json, _) = run_json("flow", "flow_fig4", &[]);
    assert_eq!(code, 0);
    assert_eq!(json["status"], "optimal");
    assert_eq!(json["objective"], "5");
    assert_eq!(json["lift"]["verified"], true);
    assert!(json.get("times_ms").is_none());
}

#[test]
fn json_output_is_repeatable_and_timings_are_opt_in() {
    let (_, _, first) = run_json("mdp", "grid5_4goal", &[]);
    let (_, _, second) = run_json("mdp", "grid5_4goal", &[]);
    assert_eq!(first, second);
    let (_, timed, _) = run_json("mdp", "grid5_4goal", &["--timings"]);
    assert!(timed["times_ms"].is_object());
    assert!(timed["lift"]["times_ms"]["colorpass"].is_number());
}

#[test]
fn ground_and_lifted_modes_agree() {
    let (_, lifted, _) = run_json("mdp", "grid5_1goal", &["--lift"]);
    let (_, ground, _) = run_json("mdp", "grid5_1goal", &["--no-lift"]);
    assert_eq!(lifted["objective"], ground["objective"]);
    assert_eq!(lifted["solution"], ground["solution"]);
    assert!(ground.get("lift").is_none());
}

#[test]
fn json_file_and_text_summary() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("toy.json");
    let mut args = vec!["run".to_string()];
    args.extend(model_args("toy", "toy"));
    args.extend(["--json".to_string(), path.display().to_string()]);
    let out = rlplift(&args.iter().map(String::as_str).collect::<Vec<_>>());
    assert!(out.status.success());
    let summary = String::from_utf8(out.stdout).unwrap();
    assert!(summary.contains("objective: 1"), "{summary}");
    let json: Value = serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap();
    assert_eq!(json["solution"]["p(z)"], "1");
    assert_eq!(json["lift"]["lifted"]["vars"], 2);
}

fn write_model(dir: &Path, rlp: &str, lkb: &str) -> (String, String) {
    let (m, k) = (dir.join("m.rlp"), dir.join("m.lkb"));
    std::fs::write(&m, rlp).unwrap();
    std::fs::write(&k, lkb).unwrap();
    (m.display().to_string(), k.display().to_string())
}

#[test]
fn exit_codes_distinguish_outcomes() {
    let dir = tempfile::tempdir().unwrap();
    let (m, k) = write_model(dir.path(), "var x/1;\nminimize: sum{item(I)} x(I);\nsubject to {item(I)}: x(I) >= 2;\nsubject to {item(I)}: x(I) <= 1;\n", "item(a).\n");
    assert_eq!(rlplift(&["run", "--rlp", &m, "--lkb", &k]).status.code(), Some(3));
    let (m, k) = write_model(dir.path(), "var x/1;\nminimize: sum{item(I)} x(I);\nsubject to {item(I)}: x(I) <= 1;\n", "item(a).\n");
    assert_eq!(rlplift(&["run", "--rlp", &m, "--lkb", &k]).status.code(), Some(4));
    let (m, k) = write_model(dir.path(), "var x/1;\nminimize: sum{item(I)} x(I)\n", "item(a).\n");
    let out = rlplift(&["run", "--rlp", &m, "--lkb", &k]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("m.rlp") && err.contains("3:1"), "{err}");
    assert_eq!(err.matches("expected").count(), 1, "{err}");
}

#[test]
fn stats_prints_csv_and_json() {
    let mut args = vec!["stats".to_string()];
    args.extend(model_args("mdp", "grid10_4goal"));
    args.push("--csv".into());
    let out = rlplift(&args.iter().map(String::as_str).collect::<Vec<_>>());
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 2);
    assert!(lines[1].starts_with("mdp+grid10_4goal,"), "{text}");
    let mut args = vec!["stats".to_string()];
    args.extend(model_args("toy", "toy"));
    args.extend(["--json", "-"].map(String::from));
    let out = rlplift(&args.iter().map(String::as_str).collect::<Vec<_>>());
    let json: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(json["ground"]["vars"], 3);
    assert_eq!(json["lifted"]["vars"], 2);
}

#[test]
fn export_writes_model_and_name_map() {
    let dir = tempfile::tempdir().unwrap();
    let (out_path, names) = (dir.path().join("flow.mps"), dir.path().join("names.txt"));
    let mut args = vec!["export".to_string()];
    args.extend(model_args("flow", "flow_fig4"));
    args.extend(["--format", "mps", "--out"].map(String::from));
    args.push(out_path.display().to_string());
    args.push("--names".into());
    args.push(names.display().to_string());
    let out = rlplift(&args.iter().map(String::as_str).collect::<Vec<_>>());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let mps = std::fs::read_to_string(out_path).unwrap();
    assert!(mps.starts_with("NAME") && mps.trim_end().ends_with("ENDATA"));
    let names = std::fs::read_to_string(names).unwrap();
    assert_eq!(names.lines().count(), 8);
    assert!(names.lines().any(|l| l.ends_with(" flow(s,a)")), "{names}");

    let mut args = vec!["export".to_string()];
    args.extend(model_args("frucht", "frucht"));
    args.push("--lift".into());
    let out = rlplift(&args.iter().map(String::as_str).collect::<Vec<_>>());
    let lp = String::from_utf8(out.stdout).unwrap();
    assert!(lp.contains("Subject To"), "{lp}");
}

#[test]
fn external_solver_needs_a_command() {
    let mut args = vec!["run".to_string()];
    args.extend(model_args("toy", "toy"));
    args.extend(["--solver", "external"].map(String::from));
    let out = rlplift(&args.iter().map(String::as_str).collect::<Vec<_>>());
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8(out.stderr).unwrap().contains("RLPLIFT_EXTERNAL_SOLVER"));
}

#[test]
fn unknown_solver_is_rejected() {
    let mut args = vec!["run".to_string()];
    args.extend(model_args("toy", "toy"));
    args.extend(["--solver", "cplex"].map(String::from));
    assert_eq!(rlplift(&args.iter().map(String::as_str).collect::<Vec<_>>()).status.code(), Some(1));
}
