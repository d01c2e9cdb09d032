//! Client side of the line-delimited JSON backend protocol.
//!
//! A backend is an external process speaking protocol v1 over its standard
//! streams. Each request is one line
//! `{"id":<u64>,"op":"hello"|"fill"|"classify","payload":...}` and each reply
//! is `{"id":<u64>,"ok":true,"result":...}` or
//! `{"id":<u64>,"ok":false,"error":"<msg>"}`.
//!
//! Payloads:
//!
//! | op       | payload                              | result                                   |
//! |----------|--------------------------------------|------------------------------------------|
//! | hello    | `{"version":1}`                      | `{"version":1,"capabilities":["fill"]}`  |
//! | fill     | `{"text":"the [MASK] sat"}`          | `{"tokens":["cat"]}`                     |
//! | classify | `{"texts":[..],"labels":[..]}`       | `{"scores":[[..],..]}`                   |

mod handle;
mod registry;

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use handle::{BackendHandle, DEFAULT_TIMEOUT};
pub use registry::{Registry, RegistryEntry, MULTILINGUAL};

pub const PROTOCOL_VERSION: u64 = 1;

/// Mask sentinel inside `fill` texts.
pub const MASK: &str = "[MASK]";

#[derive(Debug, Error)]
pub enum BackendError {
    #[error("cannot start backend {program:?}: {source}")]
    Spawn {
        program: String,
        #[source]
        source: std::io::Error,
    },
    #[error("backend i/o error: {0}")]
    Io(String),
    #[error("backend did not answer {op} request {id} within {timeout_ms} ms")]
    Timeout { op: Op, id: u64, timeout_ms: u128 },
    #[error("backend exited while {op} request {id} was pending")]
    Closed { op: Op, id: u64 },
    #[error("protocol version mismatch: client speaks v{client}, backend speaks v{backend}")]
    VersionMismatch { client: u64, backend: u64 },
    #[error("backend rejected {op} request: {message}")]
    Remote { op: Op, message: String },
    #[error("protocol error: {0}")]
    Protocol(String),
    #[error("backend lacks the {0} capability")]
    MissingCapability(Capability),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Op {
    Hello,
    Fill,
    Classify,
}

impl fmt::Display for Op {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Op::Hello => "hello",
            Op::Fill => "fill",
            Op::Classify => "classify",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Capability {
    Fill,
    Classify,
}

impl fmt::Display for Capability {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Capability::Fill => "fill",
            Capability::Classify => "classify",
        })
    }
}

/// One request line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Request {
    pub id: u64,
    pub op: Op,
    pub payload: serde_json::Value,
}

/// One reply line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Response {
    pub id: u64,
    pub ok: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub result: Option<serde_json::Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl Response {
    pub fn success(id: u64, result: serde_json::Value) -> Self {
        Self {
            id,
            ok: true,
            result: Some(result),
            error: None,
        }
    }

    pub fn failure(id: u64, message: impl Into<String>) -> Self {
        Self {
            id,
            ok: false,
            result: None,
            error: Some(message.into()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HelloPayload {
    pub version: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HelloResult {
    pub version: u64,
    pub capabilities: Vec<Capability>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FillPayload {
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FillResult {
    pub tokens: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifyPayload {
    pub texts: Vec<String>,
    pub labels: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifyResult {
    pub scores: Vec<Vec<f64>>,
}

/// Anything that can fill `[MASK]` sentinels with one token each.
pub trait MaskFiller: Sync {
    fn fill(&self, masked_text: &str) -> Result<Vec<String>, BackendError>;
}

impl MaskFiller for BackendHandle {
    fn fill(&self, masked_text: &str) -> Result<Vec<String>, BackendError> {
        self.request_fill(masked_text)
    }
}
