use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

const BIRTHPLACE: &str =
    "Find <arg> Quincy <func> Relate <arg> place of birth <arg> backward <func> QueryName";
const BIRTHPLACE_MISALIGNED: &str =
    "Find <arg> Quincy <func> Relate <arg> location of birth <arg> backward <func> QueryName";

fn fixture() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/tests/data/fixture_a.json")
}

fn kopl(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_kopl"))
        .args(args)
        .env_remove("KOPL_KB")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn write(dir: &TempDir, name: &str, body: &str) -> String {
    let p = dir.path().join(name);
    fs::write(&p, body).unwrap();
    p.to_str().unwrap().to_string()
}

fn kb_arg() -> String {
    fixture().to_str().unwrap().to_string()
}

#[test]
fn validate_fixture() {
    let o = kopl(&["validate", "--kb", &kb_arg()]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o), "3 entities, 4 concepts, 6 facts, ok\n");
}

#[test]
fn validate_rejects_dangling_references() {
    let dir = TempDir::new().unwrap();
    let kb = write(
        &dir,
        "bad.json",
        r#"{"entities": {"E1": {"name": "x", "relations": [{"predicate": "p", "object": "E9", "direction": "forward"}]}}}"#,
    );
    let o = kopl(&["validate", "--kb", &kb]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("E9"));
}

#[test]
fn validate_empty_kb() {
    let dir = TempDir::new().unwrap();
    let kb = write(&dir, "empty.json", "{}");
    let o = kopl(&["validate", "--kb", &kb]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o), "0 entities, 0 concepts, 0 facts, ok\n");
}

#[test]
fn run_with_and_without_alignment() {
    let kb = kb_arg();
    let o = kopl(&["run", "--kb", &kb, BIRTHPLACE]);
    assert_eq!(stdout(&o), "John Quincy Adams\n");
    let o = kopl(&["run", "--kb", &kb, "--align", "off", BIRTHPLACE_MISALIGNED]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o), "\n");
    let o = kopl(&["run", "--kb", &kb, "--align", "on", BIRTHPLACE_MISALIGNED]);
    assert_eq!(stdout(&o), "John Quincy Adams\n");
}

#[test]
fn run_trace_prints_context_then_answer() {
    let o = kopl(&["run", "--kb", &kb_arg(), "--trace", BIRTHPLACE_MISALIGNED]);
    let out = stdout(&o);
    let lines: Vec<_> = out.lines().collect();
    assert_eq!(
        lines,
        [
            "Find <arg> Quincy <return> Quincy <func> Relate <arg> place of birth <arg> backward \
             <return> John Quincy Adams <func> QueryName <return> John Quincy Adams",
            "John Quincy Adams"
        ]
    );
    let err = String::from_utf8(o.stderr).unwrap();
    assert!(err.starts_with("step\targ\tpool"));
    assert!(err.contains("location of birth\tplace of birth\t1/2\ttrue"));
}

#[test]
fn kb_from_environment() {
    let o = Command::new(env!("CARGO_BIN_EXE_kopl"))
        .args(["run", "FindAll <func> Count"])
        .env("KOPL_KB", fixture())
        .output()
        .unwrap();
    assert_eq!(stdout(&o), "3\n");
}

#[test]
fn exit_codes() {
    let kb = kb_arg();
    assert_eq!(kopl(&["run", "--kb", &kb, "Count"]).status.code(), Some(2));
    assert_eq!(
        kopl(&["run", "--kb", &kb, "Launch <arg> x"]).status.code(),
        Some(2)
    );
    assert_eq!(
        kopl(&["run", "--kb", &kb, "FindAll <func> Count <func> Count"])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(
        kopl(&["run", "--kb", "/nonexistent.json", "FindAll"])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(kopl(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(kopl(&["run", "FindAll"]).status.code(), Some(1));
    assert_eq!(
        kopl(&["run", "--kb", &kb, "--align", "maybe", "FindAll"])
            .status
            .code(),
        Some(1)
    );
    assert_eq!(kopl(&["--help"]).status.code(), Some(0));
}

const DATASET: &str = concat!(
    r#"{"question": "How many things?", "program": "FindAll <func> Count", "answer": "3"}"#,
    "\n",
    r#"{"question": "Who was born in Quincy?", "program": "Find <arg> Quincy <func> Relate <arg> location of birth <arg> backward <func> QueryName", "answer": "John Quincy Adams"}"#,
    "\n",
    r#"{"question": "Population of Massachusetts?", "program": [{"function": "Find", "inputs": ["Massachusetts"]}, {"function": "QueryAttr", "inputs": ["population"]}], "answer": "6981974"}"#,
    "\n"
);

fn batch(dir: &TempDir, extra: &[&str]) -> (Output, Vec<serde_json::Value>) {
    let data = write(dir, "data.jsonl", DATASET);
    let out = dir.path().join("out.jsonl");
    let kb = kb_arg();
    let mut args = vec!["batch", "--kb", &kb, &data, "--out", out.to_str().unwrap()];
    args.extend_from_slice(extra);
    let o = kopl(&args);
    let lines = fs::read_to_string(&out)
        .unwrap_or_default()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    (o, lines)
}

#[test]
fn batch_writes_one_line_per_record() {
    let dir = TempDir::new().unwrap();
    let (o, lines) = batch(&dir, &[]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(lines.len(), 3);
    for l in &lines {
        for field in ["question", "context", "input", "answer", "masked"] {
            assert!(l.get(field).is_some(), "{field}");
        }
    }
    assert!(stdout(&o).contains("executed-answer accuracy: 1.0000 (3/3)"));
}

#[test]
fn batch_without_masking() {
    let dir = TempDir::new().unwrap();
    let (_, lines) = batch(&dir, &["--mask-prob", "0", "--mode", "train"]);
    assert!(lines.iter().all(|l| l["masked"] == false));
    let (_, lines) = batch(&dir, &["--mask-prob", "1", "--mode", "infer"]);
    assert!(lines
        .iter()
        .all(|l| l["masked"] == false && l["answer"] == ""));
    let (_, lines) = batch(&dir, &["--mask-prob", "1"]);
    assert!(lines.iter().all(|l| l["masked"] == true));
}

#[test]
fn batch_is_byte_stable() {
    let dir = TempDir::new().unwrap();
    batch(&dir, &["--seed", "9"]);
    let a = fs::read(dir.path().join("out.jsonl")).unwrap();
    batch(&dir, &["--seed", "9"]);
    let b = fs::read(dir.path().join("out.jsonl")).unwrap();
    assert_eq!(a, b);
}

#[test]
fn batch_rejects_bad_probability() {
    let dir = TempDir::new().unwrap();
    let (o, _) = batch(&dir, &["--mask-prob", "1.5"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn recall_metrics() {
    let dir = TempDir::new().unwrap();
    let data = write(&dir, "data.jsonl", DATASET);
    let o = kopl(&["recall", "--kb", &kb_arg(), &data]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(
        stdout(&o),
        "executed answer recall: 1.0000 (3/3)\nquestion+context recall: 1.0000 (3/3)\n"
    );

    let broken = write(
        &dir,
        "broken.jsonl",
        r#"{"question": "Who?", "program": "Find <arg> Quincy <func> Relate <arg> place of birth <arg> backward <func> Count", "answer": "John Quincy Adams"}"#,
    );
    let o = kopl(&["recall", "--kb", &kb_arg(), &broken]);
    assert_eq!(
        stdout(&o),
        "executed answer recall: 0.0000 (0/1)\nquestion+context recall: 1.0000 (1/1)\n"
    );
}

#[test]
fn recall_on_empty_dataset_fails() {
    let dir = TempDir::new().unwrap();
    let data = write(&dir, "empty.jsonl", "");
    let o = kopl(&["recall", "--kb", &kb_arg(), &data]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("empty"));
}
