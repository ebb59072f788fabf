//! Transport for a [`Session`]: handshake, line framing and a local TCP
//! listener. One client at a time; commands are handled strictly in order.

use std::io::{self, BufRead, BufReader, Write};
use std::net::{SocketAddr, TcpListener, TcpStream};

use thiserror::Error;

use crate::protocol::{parse_inbound, ErrorCode, Inbound, ServerMessage, PROTOCOL_VERSION};
use crate::session::{evaluate_frame_stats, Session};
use crate::vfs::Vfs;

pub const DEFAULT_PORT: u16 = 7337;

#[derive(Debug, Error)]
#[error("cannot bind {addr}: {source}")]
pub struct BindFailure {
    pub addr: String,
    #[source]
    pub source: io::Error,
}

#[derive(Debug, Default)]
pub struct Reply {
    pub messages: Vec<ServerMessage>,
    pub close: bool,
}

/// Per-connection handshake state.
#[derive(Debug, Default)]
pub struct Connection {
    greeted: bool,
}

impl Connection {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn is_greeted(&self) -> bool {
        self.greeted
    }

    pub fn handle_line<V: Vfs>(&mut self, session: &mut Session<V>, line: &str) -> Reply {
        let violation = |msg: String, close: bool| Reply {
            messages: vec![ServerMessage::ProtocolError { msg }],
            close,
        };
        let inbound = match parse_inbound(line) {
            Ok(m) => m,
            Err(msg) => return violation(msg, !self.greeted),
        };
        match inbound {
            Inbound::Hello { proto } => {
                if self.greeted {
                    return violation("duplicate hello".into(), true);
                }
                if proto != PROTOCOL_VERSION {
                    return violation(format!("unsupported protocol version {proto}"), true);
                }
                self.greeted = true;
                let welcome = ServerMessage::Welcome {
                    proto: PROTOCOL_VERSION,
                    root: session.root().to_path_buf(),
                };
                Reply {
                    messages: vec![welcome, session.world_message()],
                    close: false,
                }
            }
            _ if !self.greeted => violation("expected hello first".into(), true),
            Inbound::Cmd(cmd) => Reply {
                messages: session.handle_command(cmd),
                close: false,
            },
            Inbound::BadCmd { id, msg } => Reply {
                messages: vec![ServerMessage::Err {
                    id,
                    code: ErrorCode::BadCommand,
                    msg,
                }],
                close: false,
            },
            Inbound::FrameStats(stats) => match evaluate_frame_stats(stats) {
                Ok(v) => Reply {
                    messages: vec![ServerMessage::FpsReport {
                        mean_fps: v.mean_fps,
                        band: v.band,
                    }],
                    close: false,
                },
                Err(e) => violation(e.to_string(), false),
            },
        }
    }
}

/// Drives one connection over any byte stream until EOF or a closing
/// protocol error.
pub fn serve_stream<V: Vfs, R: BufRead, W: Write>(
    session: &mut Session<V>,
    mut reader: R,
    mut writer: W,
) -> io::Result<()> {
    let mut conn = Connection::new();
    let mut line = String::new();
    loop {
        line.clear();
        if reader.read_line(&mut line)? == 0 {
            return Ok(());
        }
        let trimmed = line.trim_end_matches(['\n', '\r']);
        if trimmed.is_empty() {
            continue;
        }
        let reply = conn.handle_line(session, trimmed);
        for msg in &reply.messages {
            writer.write_all(msg.to_line().as_bytes())?;
        }
        writer.flush()?;
        if reply.close {
            return Ok(());
        }
    }
}

pub struct Server {
    listener: TcpListener,
}

impl Server {
    pub fn bind(addr: &str) -> Result<Self, BindFailure> {
        TcpListener::bind(addr)
            .map(|listener| Self { listener })
            .map_err(|source| BindFailure {
                addr: addr.to_owned(),
                source,
            })
    }

    pub fn local_addr(&self) -> io::Result<SocketAddr> {
        self.listener.local_addr()
    }

    /// Serves one connection to completion.
    pub fn serve_one<V: Vfs>(&self, session: &mut Session<V>) -> io::Result<()> {
        let (stream, _) = self.listener.accept()?;
        serve_tcp(session, stream)
    }

    /// Serves connections one after another, forever.
    pub fn run<V: Vfs>(&self, session: &mut Session<V>) -> io::Result<()> {
        loop {
            if let Err(e) = self.serve_one(session) {
                eprintln!("connection ended: {e}");
            }
        }
    }
}

fn serve_tcp<V: Vfs>(session: &mut Session<V>, stream: TcpStream) -> io::Result<()> {
    stream.set_nodelay(true)?;
    let reader = BufReader::new(stream.try_clone()?);
    serve_stream(session, reader, stream)
}
