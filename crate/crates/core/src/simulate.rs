//! Headless scripted sessions that count transporter hops.
//!
//! Script lines (shell-style quoting, `#` comments):
//!
//! ```text
//! goto new1
//! op cut "new1/New Text Document.txt"
//! goto new3
//! op paste
//! op return_to_root
//! ```
//!
//! Relative paths resolve against the session root.

use std::path::{Component, Path, PathBuf};

use thiserror::Error;

use crate::protocol::{Command, Op, ServerMessage};
use crate::session::Session;
use crate::vfs::Vfs;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Step {
    Goto(PathBuf),
    Op(Op),
}

#[derive(Debug, Error, PartialEq, Eq)]
#[error("script line {line}: {reason}")]
pub struct ScriptError {
    pub line: usize,
    pub reason: String,
}

#[derive(Debug, Error, PartialEq, Eq)]
#[error("step at line {line} failed: {code}: {msg}")]
pub struct StepFailure {
    pub line: usize,
    pub code: String,
    pub msg: String,
}

fn resolve(root: &Path, raw: &str) -> PathBuf {
    let joined = if Path::new(raw).is_absolute() {
        PathBuf::from(raw)
    } else {
        root.join(raw)
    };
    joined
        .components()
        .filter(|c| !matches!(c, Component::CurDir))
        .collect()
}

pub fn parse_script(text: &str, root: &Path) -> Result<Vec<(usize, Step)>, ScriptError> {
    let mut steps = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let trimmed = raw.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let err = |reason: &str| ScriptError {
            line,
            reason: reason.to_owned(),
        };
        let toks = shlex::split(trimmed).ok_or_else(|| err("unbalanced quotes"))?;
        let toks: Vec<&str> = toks.iter().map(String::as_str).collect();
        let paths =
            |args: &[&str]| -> Vec<PathBuf> { args.iter().map(|a| resolve(root, a)).collect() };
        let step = match toks.as_slice() {
            ["goto", dir] => Step::Goto(resolve(root, dir)),
            ["goto", ..] => return Err(err("goto takes exactly one directory")),
            ["op", "mkdir", name] => Step::Op(Op::Mkdir {
                name: (*name).to_owned(),
            }),
            ["op", "rename", path, new_name] => Step::Op(Op::Rename {
                path: resolve(root, path),
                new_name: (*new_name).to_owned(),
            }),
            ["op", "cut", rest @ ..] => Step::Op(Op::Cut { paths: paths(rest) }),
            ["op", "copy", rest @ ..] => Step::Op(Op::Copy { paths: paths(rest) }),
            ["op", "delete", rest @ ..] => Step::Op(Op::Delete { paths: paths(rest) }),
            ["op", "paste"] => Step::Op(Op::Paste),
            ["op", "select_all"] => Step::Op(Op::SelectAll),
            ["op", "refresh"] => Step::Op(Op::Refresh),
            ["op", "return_to_root"] => Step::Op(Op::ReturnToRoot),
            ["op", "inventory"] => Step::Op(Op::Inventory),
            ["op", ..] => return Err(err("unknown op or wrong argument count")),
            _ => return Err(err("expected `goto <dir>` or `op <name> ...`")),
        };
        steps.push((line, step));
    }
    Ok(steps)
}

/// Transporter hops between two directories: up to their lowest common
/// ancestor, then down.
pub fn tree_hops(from: &Path, to: &Path) -> usize {
    let a: Vec<_> = from.components().collect();
    let b: Vec<_> = to.components().collect();
    let common = a.iter().zip(&b).take_while(|(x, y)| x == y).count();
    (a.len() - common) + (b.len() - common)
}

#[derive(Debug, Default, PartialEq, Eq)]
pub struct SimReport {
    pub lines: Vec<String>,
    pub total_hops: usize,
}

fn rel(root: &Path, p: &Path) -> String {
    match p.strip_prefix(root) {
        Ok(r) if r.as_os_str().is_empty() => ".".to_owned(),
        Ok(r) => r.display().to_string(),
        Err(_) => p.display().to_string(),
    }
}

/// Runs steps in order, stopping at the first failure. Output lines produced
/// before a failure are kept in `report`.
pub fn run_script<V: Vfs>(
    session: &mut Session<V>,
    steps: &[(usize, Step)],
    report: &mut SimReport,
) -> Result<(), StepFailure> {
    let root = session.root().to_path_buf();
    for (n, (line, step)) in steps.iter().enumerate() {
        match step {
            Step::Goto(dir) => {
                let from = session.current_dir().to_path_buf();
                if !session.enter_room(dir) {
                    return Err(StepFailure {
                        line: *line,
                        code: "not_found".into(),
                        msg: format!("no room for {}", dir.display()),
                    });
                }
                let hops = tree_hops(&from, dir);
                report.total_hops += hops;
                report
                    .lines
                    .push(format!("goto {} hops={hops}", rel(&root, dir)));
            }
            Step::Op(op) => {
                let cmd = Command {
                    id: n as u64 + 1,
                    room: Some(session.current_dir().to_path_buf()),
                    op: op.clone(),
                };
                let name = op_name(op);
                match session.handle_command(cmd).pop() {
                    Some(ServerMessage::Err { code, msg, .. }) => {
                        return Err(StepFailure {
                            line: *line,
                            code: code.as_str().to_owned(),
                            msg,
                        })
                    }
                    _ => report.lines.push(format!("op {name} ok")),
                }
            }
        }
    }
    report
        .lines
        .push(format!("total_hops={}", report.total_hops));
    Ok(())
}

pub fn op_name(op: &Op) -> &'static str {
    match op {
        Op::Mkdir { .. } => "mkdir",
        Op::Rename { .. } => "rename",
        Op::Cut { .. } => "cut",
        Op::Copy { .. } => "copy",
        Op::Paste => "paste",
        Op::Delete { .. } => "delete",
        Op::SelectAll => "select_all",
        Op::Refresh => "refresh",
        Op::ReturnToRoot => "return_to_root",
        Op::Inventory => "inventory",
    }
}
