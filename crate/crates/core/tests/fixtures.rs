use std::path::{Path, PathBuf};

use persuasion_core::corpus::{build_training_instances, load_corpus, to_record, Utterance};
use persuasion_core::eval::{engagement_metrics, format_table};
use persuasion_core::pusher::{build_model_input, instance_input};
use serde::Deserialize;

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

#[derive(Deserialize)]
struct Golden {
    history: Vec<Utterance>,
    previous_act: String,
    planned_act: String,
    target: String,
}

#[test]
fn golden_instances() {
    let conv = load_corpus(fixture("social_only.jsonl")).unwrap().conversations.remove(0);
    let built = build_training_instances(&conv);
    let golden: Vec<Golden> = serde_json::from_str(&std::fs::read_to_string(fixture("social_only.instances.json")).unwrap()).unwrap();
    assert_eq!(built.len(), golden.len());
    for (b, g) in built.iter().zip(&golden) {
        assert_eq!(b.history, g.history);
        assert_eq!(b.previous_act.name, g.previous_act);
        assert_eq!(b.planned_act.name, g.planned_act);
        assert_eq!(b.target, g.target);
    }
    assert_eq!(instance_input(&built[0]), "[PREV=none] [ACT=greeting]");
}

#[test]
fn golden_turn4_input() {
    let conv = load_corpus(fixture("social_only.jsonl")).unwrap().conversations.remove(0);
    let inst = &build_training_instances(&conv)[4];
    let resp = "I agree. There is a lack of support for children in developing countries, especially in war zones.";
    let got = build_model_input(&inst.history, &inst.previous_act, &inst.planned_act, Some(resp));
    assert_eq!(got, std::fs::read_to_string(fixture("social_only.turn4.input.txt")).unwrap());
}

#[test]
fn fixtures_round_trip_through_the_record_format() {
    for name in ["social_only.jsonl", "social_and_factual.jsonl", "baseline_a.jsonl", "baseline_b.jsonl"] {
        let loaded = load_corpus(fixture(name)).unwrap();
        assert_eq!(loaded.unknown_label_warnings, 0, "{name}");
        let conv = &loaded.conversations[0];
        let line = to_record(conv);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.jsonl");
        std::fs::write(&path, format!("{line}\n")).unwrap();
        let again = load_corpus(&path).unwrap().conversations.remove(0);
        assert_eq!(&again, conv, "{name}");
        assert_eq!(to_record(&again), line);
    }
}

#[test]
fn engagement_table_of_fixtures() {
    let a = engagement_metrics(&load_corpus(fixture("social_only.jsonl")).unwrap().conversations).unwrap();
    let b = engagement_metrics(&load_corpus(fixture("baseline_a.jsonl")).unwrap().conversations).unwrap();
    assert_eq!(a.avg_user_words, 128.0 / 7.0);
    assert_eq!(b.avg_system_sentences, 9.0 / 8.0);
    let table = format_table(&[("full", &a), ("base", &b)]);
    assert_eq!(table.lines().count(), 5);
    assert!(table.contains("# User Words"));
}
