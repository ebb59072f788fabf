//! Line-framed JSON messages between the session server and a walkthrough
//! client. One UTF-8 JSON object per LF-terminated line.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::worldgen::{PlayerStart, Room};

pub const PROTOCOL_VERSION: u64 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Effect {
    BlowUp,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EventKind {
    PaneRemoved { pane_id: String, effect: Effect },
    RoomUpdated { room: Box<Room> },
    Teleport { room_id: String, pos: [i64; 3] },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventMsg {
    pub seq: u64,
    #[serde(flatten)]
    pub kind: EventKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorCode {
    BadCommand,
    NotFound,
    InvalidName,
    Cycle,
    Sandbox,
    EmptyClipboard,
    EmptySelection,
    Io,
}

impl ErrorCode {
    pub fn as_str(&self) -> &'static str {
        match self {
            ErrorCode::BadCommand => "bad_command",
            ErrorCode::NotFound => "not_found",
            ErrorCode::InvalidName => "invalid_name",
            ErrorCode::Cycle => "cycle",
            ErrorCode::Sandbox => "sandbox",
            ErrorCode::EmptyClipboard => "empty_clipboard",
            ErrorCode::EmptySelection => "empty_selection",
            ErrorCode::Io => "io",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FpsBand {
    Pass,
    Marginal,
    Fail,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "t", rename_all = "snake_case")]
pub enum ServerMessage {
    Welcome {
        proto: u64,
        root: PathBuf,
    },
    World {
        seq: u64,
        rooms: Vec<Room>,
        player_start: PlayerStart,
        root_room_id: String,
    },
    Event(EventMsg),
    Inventory {
        id: u64,
        mode: String,
        items: Vec<PathBuf>,
    },
    /// Reply to `select_all`.
    Selection {
        id: u64,
        room: PathBuf,
        items: Vec<PathBuf>,
    },
    Ack {
        id: u64,
    },
    Err {
        id: u64,
        code: ErrorCode,
        msg: String,
    },
    FpsReport {
        mean_fps: f64,
        band: FpsBand,
    },
    ProtocolError {
        msg: String,
    },
}

impl ServerMessage {
    pub fn to_line(&self) -> String {
        let mut s = serde_json::to_string(self).expect("server messages always serialize");
        s.push('\n');
        s
    }

    pub fn seq(&self) -> Option<u64> {
        match self {
            ServerMessage::World { seq, .. } | ServerMessage::Event(EventMsg { seq, .. }) => {
                Some(*seq)
            }
            _ => None,
        }
    }

    pub fn reply_id(&self) -> Option<u64> {
        match self {
            ServerMessage::Ack { id } | ServerMessage::Err { id, .. } => Some(*id),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Op {
    Mkdir { name: String },
    Rename { path: PathBuf, new_name: String },
    Cut { paths: Vec<PathBuf> },
    Copy { paths: Vec<PathBuf> },
    Paste,
    Delete { paths: Vec<PathBuf> },
    SelectAll,
    Refresh,
    ReturnToRoot,
    Inventory,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Command {
    pub id: u64,
    /// Directory the client stands in. Defaults to the root when omitted.
    pub room: Option<PathBuf>,
    pub op: Op,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FrameStats {
    pub window_ms: u64,
    pub frames: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Inbound {
    Hello {
        proto: u64,
    },
    Cmd(Command),
    /// A command with a usable id whose body is malformed.
    BadCmd {
        id: u64,
        msg: String,
    },
    FrameStats(FrameStats),
}

fn str_arg(args: &Map<String, Value>, key: &str) -> Result<String, String> {
    args.get(key)
        .and_then(Value::as_str)
        .map(str::to_owned)
        .ok_or_else(|| format!("args.{key} must be a string"))
}

fn paths_arg(args: &Map<String, Value>) -> Result<Vec<PathBuf>, String> {
    let list = args
        .get("paths")
        .and_then(Value::as_array)
        .ok_or("args.paths must be an array of strings")?;
    list.iter()
        .map(|v| {
            v.as_str()
                .map(PathBuf::from)
                .ok_or_else(|| "args.paths must be an array of strings".to_owned())
        })
        .collect()
}

fn parse_op(op: &str, args: &Map<String, Value>) -> Result<Op, String> {
    Ok(match op {
        "mkdir" => Op::Mkdir {
            name: str_arg(args, "name")?,
        },
        "rename" => Op::Rename {
            path: PathBuf::from(str_arg(args, "path")?),
            new_name: str_arg(args, "new_name")?,
        },
        "cut" => Op::Cut {
            paths: paths_arg(args)?,
        },
        "copy" => Op::Copy {
            paths: paths_arg(args)?,
        },
        "delete" => Op::Delete {
            paths: paths_arg(args)?,
        },
        "paste" => Op::Paste,
        "select_all" => Op::SelectAll,
        "refresh" => Op::Refresh,
        "return_to_root" => Op::ReturnToRoot,
        "inventory" => Op::Inventory,
        other => return Err(format!("unknown op {other:?}")),
    })
}

fn parse_cmd(obj: &Map<String, Value>) -> Result<Inbound, String> {
    let id = obj
        .get("id")
        .and_then(Value::as_u64)
        .ok_or("cmd without a non-negative integer id")?;
    let body = || -> Result<Command, String> {
        let op = obj
            .get("op")
            .and_then(Value::as_str)
            .ok_or("cmd.op must be a string")?;
        let room = match obj.get("room") {
            None | Some(Value::Null) => None,
            Some(Value::String(s)) => Some(PathBuf::from(s)),
            Some(_) => return Err("cmd.room must be a string".into()),
        };
        let empty = Map::new();
        let args = match obj.get("args") {
            None | Some(Value::Null) => &empty,
            Some(Value::Object(m)) => m,
            Some(_) => return Err("cmd.args must be an object".into()),
        };
        Ok(Command {
            id,
            room,
            op: parse_op(op, args)?,
        })
    };
    Ok(match body() {
        Ok(cmd) => Inbound::Cmd(cmd),
        Err(msg) => Inbound::BadCmd { id, msg },
    })
}

/// Parses one client line. `Err` carries a protocol_error message.
pub fn parse_inbound(line: &str) -> Result<Inbound, String> {
    let value: Value = serde_json::from_str(line).map_err(|e| format!("invalid JSON: {e}"))?;
    let obj = value.as_object().ok_or("message must be a JSON object")?;
    let t = obj
        .get("t")
        .and_then(Value::as_str)
        .ok_or("message without a string \"t\"")?;
    let uint = |key: &str| -> Result<u64, String> {
        obj.get(key)
            .and_then(Value::as_u64)
            .ok_or_else(|| format!("{t}.{key} must be a non-negative integer"))
    };
    match t {
        "hello" => Ok(Inbound::Hello {
            proto: uint("proto")?,
        }),
        "cmd" => parse_cmd(obj),
        "frame_stats" => Ok(Inbound::FrameStats(FrameStats {
            window_ms: uint("window_ms")?,
            frames: uint("frames")?,
        })),
        other => Err(format!("unknown message type {other:?}")),
    }
}
