//! Wire types for the teleoperation session and the text framing used on
//! the socket.
//!
//! Inbound frames may be line-delimited JSON or length-prefixed
//! (`<len>:<json>`, optionally followed by `,` or a newline). Outbound
//! frames are always one JSON object per line.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::Point2;
use crate::harness::{Condition, TrialResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrialStatus {
    Idle,
    Running,
    Done,
}

/// Tactor positions of one station.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StationTactors {
    pub upper_mm: Point2,
    pub lower_mm: Point2,
}

/// Snapshot of the simulation at one control tick.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateMessage {
    pub sequence: u64,
    pub t_s: f64,
    pub trial_time_s: f64,
    pub trial_status: TrialStatus,
    pub condition: Condition,
    pub trial_index: Option<usize>,
    pub mass_kg: f64,
    pub object_angle_deg: f64,
    pub target_angle_deg: f64,
    pub grip_force_n: f64,
    pub fixture_force_n: f64,
    pub aperture_m: f64,
    pub aperture_cmd_m: f64,
    /// Index station then thumb station.
    pub tactors: [StationTactors; 2],
    /// θ1..θ4 of the index station, then of the thumb station.
    pub joint_angles_deg: [f64; 8],
}

/// Trial selection for `start_trial`. Both fields or neither: without them
/// the next case of the seeded schedule is used.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct StartTrial {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mass_kg: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target_deg: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Command {
    Aperture { aperture_m: f64 },
    StartTrial(StartTrial),
    Abort,
    SetCondition { condition: Condition },
    SetSeed { seed: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CommandKind {
    SetSeed,
    SetCondition,
    Abort,
    StartTrial,
    Aperture,
}

impl Command {
    pub fn kind(&self) -> CommandKind {
        match self {
            Command::Aperture { .. } => CommandKind::Aperture,
            Command::StartTrial(_) => CommandKind::StartTrial,
            Command::Abort => CommandKind::Abort,
            Command::SetCondition { .. } => CommandKind::SetCondition,
            Command::SetSeed { .. } => CommandKind::SetSeed,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CommandMessage {
    #[serde(flatten)]
    pub command: Command,
    #[serde(default)]
    pub client_time: f64,
}

impl CommandMessage {
    pub fn new(command: Command, client_time: f64) -> Self {
        Self { command, client_time }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Warning {
    StaleClient,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ack {
    pub kind: CommandKind,
    /// Sequence number of the tick at which the command takes effect.
    pub sequence: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub warning: Option<Warning>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error, Serialize, Deserialize)]
#[serde(tag = "error", content = "message", rename_all = "snake_case")]
pub enum CommandError {
    #[error("malformed message: {0}")]
    MalformedMessage(String),
    #[error("illegal transition: {0}")]
    IllegalTransition(String),
}

/// Everything the server sends.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ServerMessage {
    State(StateMessage),
    Ack(Ack),
    Error(CommandError),
    TrialResult(TrialResult),
}

impl ServerMessage {
    /// One line of JSON, newline-terminated.
    pub fn to_line(&self) -> String {
        let mut s = serde_json::to_string(self).expect("server messages serialise");
        s.push('\n');
        s
    }
}

/// Parses one JSON command.
pub fn parse_command(text: &str) -> Result<CommandMessage, CommandError> {
    let msg: CommandMessage = serde_json::from_str(text).map_err(|e| CommandError::MalformedMessage(e.to_string()))?;
    if let Command::Aperture { aperture_m } = msg.command {
        if !aperture_m.is_finite() || aperture_m < 0.0 {
            return Err(CommandError::MalformedMessage(format!(
                "aperture_m must be finite and non-negative, got {aperture_m}"
            )));
        }
    }
    if !msg.client_time.is_finite() {
        return Err(CommandError::MalformedMessage("client_time must be finite".into()));
    }
    Ok(msg)
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FrameError {
    #[error("bad length prefix `{0}`")]
    BadLength(String),
    #[error("frame is not valid UTF-8")]
    Utf8,
}

/// Incremental decoder for inbound text. Feed arbitrary chunks; complete
/// frames come out in order.
#[derive(Debug, Default, Clone)]
pub struct FrameDecoder {
    buf: Vec<u8>,
}

impl FrameDecoder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, chunk: &str) -> Vec<Result<String, FrameError>> {
        self.buf.extend_from_slice(chunk.as_bytes());
        let mut out = Vec::new();
        loop {
            let start = self
                .buf
                .iter()
                .position(|b| !matches!(b, b' ' | b'\t' | b'\r' | b'\n' | b','))
                .unwrap_or(self.buf.len());
            self.buf.drain(..start);
            if self.buf.is_empty() {
                break;
            }
            if self.buf[0].is_ascii_digit() {
                // Length-prefixed frame, unless the whole line is a bare number.
                let Some(colon) = self.buf.iter().position(|&b| b == b':') else {
                    if self.buf.iter().all(u8::is_ascii_digit) {
                        break;
                    }
                    out.push(self.take_line());
                    continue;
                };
                let prefix = &self.buf[..colon];
                if !prefix.iter().all(u8::is_ascii_digit) {
                    out.push(self.take_line());
                    continue;
                }
                let text = String::from_utf8_lossy(prefix).into_owned();
                let Ok(len) = text.parse::<usize>() else {
                    self.buf.drain(..=colon);
                    out.push(Err(FrameError::BadLength(text)));
                    continue;
                };
                if self.buf.len() < colon + 1 + len {
                    break;
                }
                let body: Vec<u8> = self.buf.drain(..colon + 1 + len).skip(colon + 1).collect();
                out.push(String::from_utf8(body).map_err(|_| FrameError::Utf8));
            } else {
                if !self.buf.contains(&b'\n') {
                    break;
                }
                out.push(self.take_line());
            }
        }
        out
    }

    /// Completes a trailing unterminated line, as at end of input or the
    /// end of a self-contained message.
    pub fn finish(&mut self) -> Option<Result<String, FrameError>> {
        let rest = std::mem::take(&mut self.buf);
        let text = String::from_utf8(rest).map_err(|_| FrameError::Utf8);
        match text {
            Ok(t) if t.trim().is_empty() => None,
            Ok(t) => Some(Ok(t.trim().to_string())),
            Err(e) => Some(Err(e)),
        }
    }

    fn take_line(&mut self) -> Result<String, FrameError> {
        let end = self.buf.iter().position(|&b| b == b'\n').unwrap_or(self.buf.len());
        let line: Vec<u8> = self.buf.drain(..end).collect();
        String::from_utf8(line)
            .map(|s| s.trim().to_string())
            .map_err(|_| FrameError::Utf8)
    }
}

/// Splits one self-contained message (e.g. a WebSocket text frame) into frames.
pub fn decode_frames(text: &str) -> Vec<Result<String, FrameError>> {
    let mut decoder = FrameDecoder::new();
    let mut frames = decoder.push(text);
    frames.extend(decoder.finish());
    frames
}

/// Length-prefixed encoding of `json`.
pub fn encode_netstring(json: &str) -> String {
    format!("{}:{}", json.len(), json)
}
