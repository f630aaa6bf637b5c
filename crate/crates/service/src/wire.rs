//! Websocket message schema, version 1. Every frame is one JSON object tagged by `"type"`.

use serde::{Deserialize, Serialize};

pub const WIRE_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WireSegment {
    pub link: usize,
    pub p0: [f64; 3],
    pub p1: [f64; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WireObstacle {
    pub id: String,
    pub center: [f64; 3],
    pub radius: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WireContact {
    pub link: usize,
    pub obstacle_id: String,
    pub psi: f64,
    pub epsilon: f64,
    pub lambda: f64,
    pub predicted: f64,
    pub normal: [f64; 3],
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ControlAction {
    Pause,
    Resume,
    Reset,
    SetGoal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ServerState {
    pub tick: u64,
    pub t: f64,
    pub q: Vec<f64>,
    pub ee: [f64; 3],
    pub goal: [f64; 3],
    pub link_segments: Vec<WireSegment>,
    pub obstacles: Vec<WireObstacle>,
    pub contacts: Vec<WireContact>,
    /// Status of the last planner step, `Idle` before the first one.
    pub solver_status: String,
    pub step_time_us: f64,
    pub paused: bool,
    /// Some step since the previous broadcast started inside an ε shell or failed the safety check.
    pub violation: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", deny_unknown_fields)]
pub enum WireMessage {
    ServerState(ServerState),
    ClientObstacleUpdate {
        id: String,
        center: [f64; 3],
    },
    ClientControl {
        action: ControlAction,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        goal: Option<[f64; 3]>,
    },
}

#[derive(Debug, thiserror::Error)]
pub enum ProtocolError {
    #[error("malformed message: {0}")]
    Malformed(#[from] serde_json::Error),
    #[error("clients may not send ServerState")]
    ServerOnly,
    #[error("unknown obstacle {0}")]
    UnknownObstacle(String),
    #[error("set_goal needs a goal")]
    MissingGoal,
    #[error("non-finite coordinates")]
    NonFinite,
    #[error("binary frames are not part of the protocol")]
    Binary,
}

/// A validated client request.
#[derive(Debug, Clone, PartialEq)]
pub enum ClientMessage {
    ObstacleUpdate { index: usize, center: [f64; 3] },
    Pause,
    Resume,
    Reset,
    SetGoal([f64; 3]),
}

/// Parse a client frame, checking it against the session's obstacle ids.
pub fn parse_client(text: &str, obstacle_ids: &[String]) -> Result<ClientMessage, ProtocolError> {
    let finite = |v: &[f64; 3]| v.iter().all(|x| x.is_finite());
    match serde_json::from_str::<WireMessage>(text)? {
        WireMessage::ServerState(_) => Err(ProtocolError::ServerOnly),
        WireMessage::ClientObstacleUpdate { id, center } => {
            if !finite(&center) {
                return Err(ProtocolError::NonFinite);
            }
            let index = obstacle_ids
                .iter()
                .position(|o| *o == id)
                .ok_or(ProtocolError::UnknownObstacle(id))?;
            Ok(ClientMessage::ObstacleUpdate { index, center })
        }
        WireMessage::ClientControl { action, goal } => match action {
            ControlAction::Pause => Ok(ClientMessage::Pause),
            ControlAction::Resume => Ok(ClientMessage::Resume),
            ControlAction::Reset => Ok(ClientMessage::Reset),
            ControlAction::SetGoal => {
                let g = goal.ok_or(ProtocolError::MissingGoal)?;
                if !finite(&g) {
                    return Err(ProtocolError::NonFinite);
                }
                Ok(ClientMessage::SetGoal(g))
            }
        },
    }
}
