use persuasion_core::acts;
use persuasion_core::corpus::{load_corpus, ResponseSource};
use persuasion_core::orchestrator::{append_record, OrchestratorConfig, OrchestratorError, SessionStatus, POLITE_CLOSURES};
use persuasion_core::stub::stub_orchestrator;

fn config(max: usize) -> OrchestratorConfig {
    OrchestratorConfig { min_user_turns: 7.min(max), max_user_turns: max, seed: 4, ..Default::default() }
}

#[test]
fn first_turn_is_the_greeting() {
    let orch = stub_orchestrator(config(10)).unwrap();
    let (session, turn) = orch.start_session().unwrap();
    assert_eq!(turn.agenda_act.name, acts::GREETING);
    assert_eq!(turn.response_part, None);
    assert_eq!(turn.turn_number, 0);
    assert_eq!(session.history.len(), 1);
    assert_eq!(session.status, SessionStatus::Active);
}

#[test]
fn session_ids_are_distinct_and_reproducible() {
    let a = stub_orchestrator(config(10)).unwrap();
    let b = stub_orchestrator(config(10)).unwrap();
    let ids_a: Vec<String> = (0..3).map(|_| a.start_session().unwrap().0.id).collect();
    let ids_b: Vec<String> = (0..3).map(|_| b.start_session().unwrap().0.id).collect();
    assert_eq!(ids_a, ids_b);
    assert_ne!(ids_a[0], ids_a[1]);
}

#[test]
fn factual_question_is_answered_from_the_index() {
    let orch = stub_orchestrator(config(10)).unwrap();
    let (mut s, _) = orch.start_session().unwrap();
    let t = orch.handle_user_message(&mut s, "Do you have a link or something I could directly go to?").unwrap();
    assert_eq!(t.response_source, ResponseSource::Factual);
    assert_eq!(t.response_part.as_deref(), Some("I sure do as a matter of fact it's <URL>."));
    assert!(t.full_text.starts_with("I sure do"));
}

#[test]
fn acknowledgement_gets_no_response_part() {
    let orch = stub_orchestrator(config(10)).unwrap();
    let (mut s, _) = orch.start_session().unwrap();
    let t = orch.handle_user_message(&mut s, "Okay.").unwrap();
    assert_eq!(t.response_source, ResponseSource::None);
    assert_eq!(t.full_text, t.agenda_part);
}

#[test]
fn empty_message_is_rejected_without_consuming_a_turn() {
    let orch = stub_orchestrator(config(10)).unwrap();
    let (mut s, _) = orch.start_session().unwrap();
    assert!(matches!(orch.handle_user_message(&mut s, "   "), Err(OrchestratorError::EmptyMessage)));
    assert_eq!(s.user_turns, 0);
}

#[test]
fn closing_then_polite_closures_then_limit() {
    let orch = stub_orchestrator(config(7)).unwrap();
    let (mut s, _) = orch.start_session().unwrap();
    let mut acts_seen = Vec::new();
    for _ in 0..7 {
        let t = orch.handle_user_message(&mut s, "Sure.").unwrap();
        acts_seen.push(t.agenda_act.name.clone());
    }
    assert!(acts_seen.contains(&acts::PROPOSE_DONATION.to_string()), "{acts_seen:?}");
    assert_eq!(acts_seen.last().map(String::as_str), Some(acts::CLOSING));
    assert_eq!(s.status, SessionStatus::ClosingEmitted);
    assert!(matches!(orch.handle_user_message(&mut s, "Bye."), Err(OrchestratorError::TurnLimit(7))));

    let orch = stub_orchestrator(config(10)).unwrap();
    let (mut s, _) = orch.start_session().unwrap();
    let mut closed_at = None;
    for i in 0..10 {
        let t = orch.handle_user_message(&mut s, "Sure.").unwrap();
        if closed_at.is_some() {
            assert!(t.agenda_act.is_none());
            assert!(POLITE_CLOSURES.contains(&t.agenda_part.as_str()));
        } else if t.agenda_act.name == acts::CLOSING {
            closed_at = Some(i);
        }
    }
    assert!(closed_at.is_some());
}

#[test]
fn end_is_idempotent_and_records_round_trip() {
    let orch = stub_orchestrator(config(10)).unwrap();
    let (mut s, _) = orch.start_session().unwrap();
    orch.handle_user_message(&mut s, "Hi! I'm good, how are you?").unwrap();
    orch.handle_user_message(&mut s, "How do I donate?").unwrap();
    let first = orch.end_session(&mut s);
    let second = orch.end_session(&mut s);
    assert_eq!(first, second);
    assert_eq!(first.turns.len(), 5);
    assert!(matches!(orch.handle_user_message(&mut s, "hello"), Err(OrchestratorError::SessionEnded)));
    assert!(!s.can_accept_message(10));

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("r.jsonl");
    append_record(&path, &first).unwrap();
    let loaded = load_corpus(&path).unwrap().conversations;
    assert_eq!(loaded, vec![first]);
}

#[test]
fn bad_turn_limits_are_rejected() {
    assert!(stub_orchestrator(OrchestratorConfig { min_user_turns: 9, max_user_turns: 8, ..Default::default() }).is_err());
    assert!(stub_orchestrator(OrchestratorConfig { min_user_turns: 0, max_user_turns: 0, ..Default::default() }).is_err());
}
