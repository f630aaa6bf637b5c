//! Interactive planning session served over a websocket.
//!
//! `GET /ws` streams a `ServerState` frame per tick and accepts obstacle updates and
//! control messages; `GET /healthz` answers 200; `GET /state` returns the latest frame.
//! The message schema is in `docs/wire_schema_v1.json`.

pub mod server;
pub mod session;
pub mod wire;

pub use server::{spawn, Running, ServiceError};
pub use session::{Session, SessionConfig};
pub use wire::{ClientMessage, ControlAction, ProtocolError, ServerState, WireMessage, WIRE_VERSION};
