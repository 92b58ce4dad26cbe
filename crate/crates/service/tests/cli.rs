use std::io::Write;
use std::process::{Command, Stdio};

fn persuade() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_persuade"));
    c.env("RUST_LOG", "error");
    c
}

#[test]
fn unknown_subcommand_exits_with_usage_error() {
    let out = persuade().arg("frobnicate").output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn stub_chat_reads_stdin_and_persists_one_record() {
    let dir = tempfile::tempdir().unwrap();
    let records = dir.path().join("records.jsonl");
    let mut child = persuade()
        .args(["chat", "--stub"])
        .env("PERSUADE_RECORDS_PATH", &records)
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .spawn()
        .unwrap();
    let script = "Hi! I'm good, how are you?\n\nHow do I donate?\n".repeat(6);
    child.stdin.take().unwrap().write_all(script.as_bytes()).unwrap();
    let out = child.wait_with_output().unwrap();
    assert!(out.status.success());
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert_eq!(stdout.lines().filter(|l| l.starts_with("USER: ")).count(), 11);
    assert_eq!(stdout.lines().filter(|l| l.starts_with("SYSTEM: ")).count(), 11);
    let saved = std::fs::read_to_string(&records).unwrap();
    assert_eq!(saved.lines().count(), 1);
}

#[test]
fn training_pipeline_on_a_synthetic_corpus() {
    let dir = tempfile::tempdir().unwrap();
    let p = |name: &str| dir.path().join(name).to_string_lossy().into_owned();
    let ok = |args: &[&str]| {
        let out = persuade().args(args).output().unwrap();
        assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
        String::from_utf8(out.stdout).unwrap()
    };
    ok(&["synthesize", "--out", &p("c.jsonl"), "--conversations", "30"]);
    let metrics = ok(&["train-classifier", "--corpus", &p("c.jsonl"), "--side", "persuader", "--out", &p("clf.json")]);
    assert!(serde_json::from_str::<serde_json::Value>(&metrics).unwrap()["macro_f1"].is_number());
    ok(&["train-pusher", "--corpus", &p("c.jsonl"), "--classifier", &p("clf.json"), "--epochs", "1", "--out", &p("ckpt")]);
    let acc = ok(&["eval-da-accuracy", "--corpus", &p("c.jsonl"), "--checkpoint", &p("ckpt"), "--classifier", &p("clf.json"), "--passes", "2"]);
    let acc: serde_json::Value = serde_json::from_str(acc.trim()).unwrap();
    let v = acc["da_accuracy"].as_f64().unwrap();
    assert!((0.0..=1.0).contains(&v));
    let table = ok(&["eval-engagement", "--group", &format!("a={}", p("c.jsonl")), "--group", &format!("b={}", p("c.jsonl")), "--json", &p("e.json")]);
    assert!(table.contains("# User Words"));
    let report: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(p("e.json")).unwrap()).unwrap();
    assert_eq!(report["comparisons"].as_array().unwrap().len(), 4);
}

#[test]
fn missing_artifacts_fail_at_startup() {
    let out = persuade().arg("chat").env("PERSUADE_STUB", "false").stdin(Stdio::null()).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("user_classifier"));
}
