//! JSON frames exchanged with a client over the socket.
//!
//! Client to server: `{"type":"activation","t":..,"ch1":..,"ch2":..}` with
//! activations in `[0, 1]`, or `{"type":"cmd","cmd":..}` where `cmd` is
//! `start_trial` (optional `target`, `seed`), `abort` or `select_condition`
//! (`system`, `field`). Server to client: `state`, `event` and `error` frames.
//! Angles are in rad, torques in N·m and times in s.

use serde::{Deserialize, Serialize};

use myoimp::metrics::TrialOutcome;
use myoimp::plant::ForceField;
use myoimp::session::{Condition, EventKind, System};

use crate::error::{Result, ServiceError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ClientMessage {
    Activation { t: f64, ch1: f64, ch2: f64 },
    Cmd {
        #[serde(flatten)]
        cmd: Command,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "cmd", rename_all = "snake_case")]
pub enum Command {
    StartTrial {
        /// Target angle; the session's shuffled plan when absent.
        #[serde(default)]
        target: Option<f64>,
        /// Seed stored with the record; derived from the session seed when absent.
        #[serde(default)]
        seed: Option<u64>,
    },
    Abort,
    SelectCondition { system: System, field: bool },
}

impl ClientMessage {
    /// Parses and range-checks one text frame.
    pub fn parse(text: &str) -> Result<Self> {
        let msg: ClientMessage = serde_json::from_str(text).map_err(|e| ServiceError::Malformed(e.to_string()))?;
        if let ClientMessage::Activation { t, ch1, ch2 } = msg {
            if !t.is_finite() {
                return Err(ServiceError::Malformed(format!("activation time {t} is not finite")));
            }
            for (name, a) in [("ch1", ch1), ("ch2", ch2)] {
                if !(0.0..=1.0).contains(&a) {
                    return Err(ServiceError::Malformed(format!("{name} = {a} is outside [0, 1]")));
                }
            }
        }
        if let ClientMessage::Cmd {
            cmd: Command::StartTrial { target: Some(q), .. },
        } = msg
        {
            if !q.is_finite() {
                return Err(ServiceError::Malformed(format!("target {q} is not finite")));
            }
        }
        Ok(msg)
    }
}

/// Plant and controller state at one instant of session time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StateFrame {
    pub t: f64,
    pub q_f: f64,
    pub q_r: f64,
    pub k: f64,
    pub d: f64,
    pub tau_f: f64,
    /// Withheld while a trial runs so the perturbation stays hidden.
    pub tau_ext: Option<f64>,
    /// Target of the running trial, if any.
    pub target: Option<f64>,
    pub hold_progress: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventFrame {
    pub event: EventKind,
    /// Session time (s).
    pub t: f64,
    /// Time since the trial started (s).
    pub trial_t: f64,
    pub target: f64,
    pub condition: Condition,
    /// Set on the event that ends a trial.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub outcome: Option<TrialOutcome>,
    /// The field region, revealed once the trial has ended.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub field: Option<ForceField>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ServerMessage {
    State(StateFrame),
    Event(EventFrame),
    Error { message: String },
}

impl ServerMessage {
    pub fn is_state(&self) -> bool {
        matches!(self, ServerMessage::State(_))
    }

    pub fn to_json(&self) -> String {
        // Non-finite metrics serialize as null; nothing else here can fail.
        serde_json::to_string(self).expect("server frames serialize")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_client_frames() {
        assert_eq!(
            ClientMessage::parse(r#"{"type":"activation","t":0.04,"ch1":0.1,"ch2":0.5}"#).unwrap(),
            ClientMessage::Activation {
                t: 0.04,
                ch1: 0.1,
                ch2: 0.5
            }
        );
        assert_eq!(
            ClientMessage::parse(r#"{"type":"cmd","cmd":"start_trial"}"#).unwrap(),
            ClientMessage::Cmd {
                cmd: Command::StartTrial { target: None, seed: None }
            }
        );
        assert_eq!(
            ClientMessage::parse(r#"{"type":"cmd","cmd":"select_condition","system":"baseline","field":true}"#).unwrap(),
            ClientMessage::Cmd {
                cmd: Command::SelectCondition {
                    system: System::Baseline,
                    field: true
                }
            }
        );
        assert!(matches!(
            ClientMessage::parse(r#"{"type":"cmd","cmd":"abort"}"#),
            Ok(ClientMessage::Cmd { cmd: Command::Abort })
        ));
    }

    #[test]
    fn rejects_malformed_frames() {
        for text in [
            "not json",
            r#"{"type":"activation","t":0,"ch1":0.1}"#,
            r#"{"type":"activation","t":0,"ch1":1.5,"ch2":0.1}"#,
            r#"{"type":"activation","t":0,"ch1":-0.1,"ch2":0.1}"#,
            r#"{"type":"cmd","cmd":"jump"}"#,
            r#"{"type":"telemetry"}"#,
        ] {
            assert!(matches!(ClientMessage::parse(text), Err(ServiceError::Malformed(_))), "{text}");
        }
    }

    #[test]
    fn state_frame_shape() {
        let s = ServerMessage::State(StateFrame {
            t: 1.0,
            q_f: 0.1,
            q_r: 0.2,
            k: 100.0,
            d: 5.0,
            tau_f: 1.0,
            tau_ext: None,
            target: Some(0.35),
            hold_progress: 0.5,
        });
        let v: serde_json::Value = serde_json::from_str(&s.to_json()).unwrap();
        assert_eq!(v["type"], "state");
        assert!(v["tau_ext"].is_null());
        assert_eq!(v["target"], 0.35);
        let e = ServerMessage::Error { message: "x".into() };
        assert_eq!(e.to_json(), r#"{"type":"error","message":"x"}"#);
    }
}
