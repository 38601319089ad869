//! JSON messages exchanged over `/ws`, one per text frame, tagged by `type`.

use aurastage_core::mix::MixState;
use aurastage_core::scene::{Scene, SourceEdit};
use aurastage_core::ZoneEvent;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ClientMessage {
    Pose { x: f64, y: f64, heading_deg: f64 },
    EditSource(SourceEdit),
    LoadScene { scene: Scene },
    ResetClock {},
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorCode {
    /// The requested scene change was rejected; nothing changed.
    Validation,
    /// The frame could not be understood.
    Protocol,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ServerMessage {
    Mix {
        /// Version of the scene the mix was computed against.
        scene_version: u64,
        #[serde(flatten)]
        mix: MixState,
    },
    Scene {
        version: u64,
        scene: Scene,
    },
    Events {
        events: Vec<ZoneEvent>,
    },
    Error {
        code: ErrorCode,
        message: String,
    },
}

impl ServerMessage {
    pub fn protocol_error(message: impl Into<String>) -> Self {
        ServerMessage::Error {
            code: ErrorCode::Protocol,
            message: message.into(),
        }
    }

    pub fn validation_error(message: impl Into<String>) -> Self {
        ServerMessage::Error {
            code: ErrorCode::Validation,
            message: message.into(),
        }
    }
}

/// Parses a text frame; the error text is meant for a protocol error reply.
pub fn parse_client(text: &str) -> Result<ClientMessage, String> {
    serde_json::from_str(text).map_err(|e| e.to_string())
}
