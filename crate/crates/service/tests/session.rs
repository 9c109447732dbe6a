use std::sync::Arc;

use myoimp::session::{plan_trials, EventKind, Protocol, System};
use myoimp_service::wire::{ClientMessage, Command, EventFrame, ServerMessage, StateFrame};
use myoimp_service::{Session, SessionSettings};

mod common;

fn session(client_clock: bool) -> Session {
    let settings = SessionSettings {
        client_clock,
        ..Default::default()
    };
    Session::new(Arc::new(common::models()), Protocol::default(), settings, 7).unwrap()
}

fn cmd(cmd: Command) -> ClientMessage {
    ClientMessage::Cmd { cmd }
}

fn start(target: f64) -> ClientMessage {
    cmd(Command::StartTrial {
        target: Some(target),
        seed: None,
    })
}

fn activation(t: f64, a: [f64; 2]) -> ClientMessage {
    ClientMessage::Activation { t, ch1: a[0], ch2: a[1] }
}

fn split(out: Vec<ServerMessage>) -> (Vec<StateFrame>, Vec<EventFrame>, Vec<String>) {
    let (mut s, mut e, mut x) = (Vec::new(), Vec::new(), Vec::new());
    for m in out {
        match m {
            ServerMessage::State(f) => s.push(f),
            ServerMessage::Event(f) => e.push(f),
            ServerMessage::Error { message } => x.push(message),
        }
    }
    (s, e, x)
}

/// Feeds 25 Hz activation frames holding `target` until the trial ends or
/// `limit` seconds pass.
fn drive(s: &mut Session, target: f64, field: bool, limit: f64) -> Vec<ServerMessage> {
    s.handle(cmd(Command::SelectCondition {
        system: System::Framework,
        field,
    }));
    s.handle(start(target));
    let a = common::hold(target);
    let mut out = s.take_output();
    let mut t = s.time();
    while s.trial_running() && t < limit {
        t += 0.04;
        s.handle(activation(t, a));
        out.extend(s.take_output());
    }
    out
}

#[test]
fn framework_trial_succeeds_and_hides_the_field() {
    let mut s = session(true);
    let (states, events, errors) = split(drive(&mut s, 0.35, true, 30.0));
    assert!(errors.is_empty(), "{errors:?}");
    let kinds: Vec<EventKind> = events.iter().map(|e| e.event).collect();
    assert_eq!(kinds.first(), Some(&EventKind::TrialStarted));
    assert_eq!(kinds.last(), Some(&EventKind::Success));
    let last = events.last().unwrap();
    let outcome = last.outcome.unwrap();
    assert!(outcome.success && outcome.tr < 20.0);
    assert!(last.field.is_some());
    assert!(events[..events.len() - 1].iter().all(|e| e.outcome.is_none() && e.field.is_none()));

    let in_trial: Vec<&StateFrame> = states.iter().filter(|f| f.target.is_some()).collect();
    assert!(!in_trial.is_empty());
    assert!(in_trial.iter().all(|f| f.tau_ext.is_none()));
    assert!(in_trial.windows(2).all(|w| w[1].hold_progress >= w[0].hold_progress || w[1].hold_progress == 0.0));

    let records = s.take_records();
    assert_eq!(records.len(), 1);
    assert!(records[0].valid && records[0].outcome.success);
    assert_eq!(records[0].recompute().unwrap(), records[0].outcome);

    s.advance_to(s.time() + 0.1);
    let (after, _, _) = split(s.take_output());
    assert!(after.iter().all(|f| f.target.is_none() && f.tau_ext.is_some()));
}

#[test]
fn state_frames_follow_the_configured_rate() {
    let mut s = session(false);
    s.advance_to(1.0);
    let (states, _, _) = split(s.take_output());
    assert_eq!(states.len(), 50);
    assert!((states[0].t - 0.02).abs() < 1e-9);
}

#[test]
fn silence_during_a_trial_aborts_it() {
    let mut s = session(false);
    s.handle(activation(0.0, [0.02, 0.02]));
    s.handle(start(0.35));
    s.advance_to(2.0);
    let (_, events, errors) = split(s.take_output());
    assert_eq!(events.last().unwrap().event, EventKind::Aborted);
    assert!(errors.iter().any(|e| e.contains("underrun")), "{errors:?}");
    let records = s.take_records();
    assert_eq!(records.len(), 1);
    assert!(!records[0].valid);
    assert!(!s.trial_running());
}

#[test]
fn rejected_messages_keep_the_session() {
    let mut s = session(true);
    s.handle(cmd(Command::Abort));
    s.handle(cmd(Command::SelectCondition {
        system: System::Baseline,
        field: false,
    }));
    s.handle(start(3.0));
    let (_, events, errors) = split(s.take_output());
    assert!(events.is_empty());
    assert_eq!(errors.len(), 3);
    assert_eq!(s.condition().system, System::Framework);

    s.handle(activation(0.1, [0.02, 0.02]));
    s.handle(start(0.35));
    s.handle(start(0.7));
    s.handle(cmd(Command::SelectCondition {
        system: System::Framework,
        field: true,
    }));
    s.handle(activation(0.05, [0.02, 0.02]));
    s.handle(activation(100.0, [0.02, 0.02]));
    let (_, events, errors) = split(s.take_output());
    assert_eq!(events.len(), 1);
    assert_eq!(errors.len(), 4, "{errors:?}");
    assert!(s.trial_running());
    assert!(!s.condition().field);

    s.handle(cmd(Command::Abort));
    let (_, events, _) = split(s.take_output());
    assert_eq!(events.last().unwrap().event, EventKind::Aborted);
    assert!(!s.take_records()[0].valid);
}

#[test]
fn disconnect_records_an_aborted_trial() {
    let mut s = session(true);
    s.handle(activation(0.0, [0.02, 0.02]));
    s.handle(start(-0.35));
    s.handle(activation(0.5, [0.02, 0.02]));
    s.disconnect();
    let records = s.take_records();
    assert_eq!(records.len(), 1);
    assert!(!records[0].valid);
    assert_eq!(records[0].events.last().unwrap().kind, EventKind::Aborted);
    assert_eq!(records[0].telemetry.len(), 501);
}

#[test]
fn unspecified_targets_follow_the_session_plan() {
    let mut s = session(true);
    let plan = plan_trials(s.protocol(), 6, s.seed());
    for (i, (target, seed)) in plan.into_iter().enumerate() {
        s.handle(cmd(Command::StartTrial { target: None, seed: None }));
        s.handle(cmd(Command::Abort));
        let (_, events, _) = split(s.take_output());
        assert_eq!(events[0].target, target, "trial {i}");
        assert_eq!(s.take_records()[0].seed, seed);
    }
}
