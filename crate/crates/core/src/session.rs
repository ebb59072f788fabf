//! Server-side session: owns the snapshot, world and clipboard, executes
//! commands in arrival order and produces the outbound message stream.
//!
//! Items under a pending cut are hidden from the served world, so the room
//! loses the pane at cut time even though the move only happens at paste.

use std::collections::HashSet;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::fileops::{self, Clipboard, FileOps, FileOpsError, OpResult, Selection};
use crate::fs_model::{snapshot_from, FsSnapshot, SnapshotError, SnapshotLimits};
use crate::protocol::{
    Command, Effect, ErrorCode, EventKind, EventMsg, FpsBand, FrameStats, Op, ServerMessage,
};
use crate::vfs::Vfs;
use crate::worldgen::{generate_world, LayoutParams, World, WorldGenError};

/// Shortest accepted telemetry window.
pub const MIN_WINDOW_MS: u64 = 250;
pub const PASS_FPS: u64 = 20;
pub const FAIL_FPS: u64 = 10;

#[derive(Debug, Error)]
pub enum SessionError {
    #[error(transparent)]
    Snapshot(#[from] SnapshotError),
    #[error(transparent)]
    WorldGen(#[from] WorldGenError),
    #[error(transparent)]
    FileOps(#[from] FileOpsError),
}

#[derive(Debug, Error, PartialEq, Eq)]
#[error("frame window of {0} ms is shorter than {MIN_WINDOW_MS} ms")]
pub struct BadWindow(pub u64);

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FpsVerdict {
    pub mean_fps: f64,
    pub band: FpsBand,
}

/// PASS at >= 20 fps, FAIL at <= 10 fps, MARGINAL in between. Bands are
/// decided in integer arithmetic so the boundaries are exact.
pub fn evaluate_frame_stats(stats: FrameStats) -> Result<FpsVerdict, BadWindow> {
    if stats.window_ms < MIN_WINDOW_MS {
        return Err(BadWindow(stats.window_ms));
    }
    let scaled = u128::from(stats.frames) * 1000;
    let window = u128::from(stats.window_ms);
    let band = if scaled >= u128::from(PASS_FPS) * window {
        FpsBand::Pass
    } else if scaled <= u128::from(FAIL_FPS) * window {
        FpsBand::Fail
    } else {
        FpsBand::Marginal
    };
    Ok(FpsVerdict {
        mean_fps: stats.frames as f64 * 1000.0 / stats.window_ms as f64,
        band,
    })
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SessionConfig {
    pub limits: SnapshotLimits,
    pub params: LayoutParams,
}

type Failure = (ErrorCode, String);

fn failure(e: &FileOpsError) -> Failure {
    let code = match e {
        FileOpsError::InvalidName(_) => ErrorCode::InvalidName,
        FileOpsError::SandboxViolation(_) => ErrorCode::Sandbox,
        FileOpsError::NotFound(_)
        | FileOpsError::NotADirectory(_)
        | FileOpsError::NotInSnapshot(_) => ErrorCode::NotFound,
        FileOpsError::EmptySelection => ErrorCode::EmptySelection,
        FileOpsError::InvalidSelection(_) => ErrorCode::BadCommand,
        FileOpsError::EmptyClipboard => ErrorCode::EmptyClipboard,
        FileOpsError::Cycle { .. } => ErrorCode::Cycle,
        FileOpsError::Io { .. } => ErrorCode::Io,
    };
    (code, e.to_string())
}

pub struct Session<V: Vfs> {
    ops: FileOps<V>,
    config: SessionConfig,
    snapshot: FsSnapshot,
    world: World,
    clipboard: Clipboard,
    current_dir: PathBuf,
    seq: u64,
}

impl<V: Vfs> Session<V> {
    pub fn new(vfs: V, root: &Path, config: SessionConfig) -> Result<Self, SessionError> {
        let ops = FileOps::new(vfs, root)?;
        let snapshot = snapshot_from(ops.vfs(), ops.root(), config.limits)?;
        let world = generate_world(&snapshot, &config.params)?;
        let current_dir = ops.root().to_path_buf();
        Ok(Self {
            ops,
            config,
            snapshot,
            world,
            clipboard: Clipboard::empty(),
            current_dir,
            seq: 0,
        })
    }

    pub fn root(&self) -> &Path {
        self.ops.root()
    }

    pub fn world(&self) -> &World {
        &self.world
    }

    pub fn snapshot(&self) -> &FsSnapshot {
        &self.snapshot
    }

    pub fn clipboard(&self) -> &Clipboard {
        &self.clipboard
    }

    pub fn config(&self) -> &SessionConfig {
        &self.config
    }

    pub fn vfs(&self) -> &V {
        self.ops.vfs()
    }

    /// The snapshot the world is generated from: disk minus pending cuts.
    pub fn visible_snapshot(&self) -> FsSnapshot {
        self.snapshot.without(self.clipboard.pending_cut())
    }

    pub fn current_room_id(&self) -> &str {
        self.world
            .room_by_dir(&self.current_dir)
            .map(|r| r.id.as_str())
            .unwrap_or(&self.world.root_room_id)
    }

    pub fn current_dir(&self) -> &Path {
        &self.current_dir
    }

    /// Client-local navigation. Returns false if `dir` has no room.
    pub fn enter_room(&mut self, dir: &Path) -> bool {
        if self.world.room_by_dir(dir).is_some() {
            self.current_dir = dir.to_path_buf();
            true
        } else {
            false
        }
    }

    fn next_seq(&mut self) -> u64 {
        self.seq += 1;
        self.seq
    }

    pub fn last_seq(&self) -> u64 {
        self.seq
    }

    pub fn world_message(&mut self) -> ServerMessage {
        let seq = self.next_seq();
        ServerMessage::World {
            seq,
            rooms: self.world.rooms.clone(),
            player_start: self.world.player_start.clone(),
            root_room_id: self.world.root_room_id.clone(),
        }
    }

    fn event(&mut self, kind: EventKind) -> ServerMessage {
        let seq = self.next_seq();
        ServerMessage::Event(EventMsg { seq, kind })
    }

    /// Re-reads the disk and regenerates the world. Returns the old world.
    fn resync(&mut self) -> Result<World, Failure> {
        let snapshot = snapshot_from(self.ops.vfs(), self.ops.root(), self.config.limits)
            .map_err(|e| (ErrorCode::Io, e.to_string()))?;
        let visible = snapshot.without(self.clipboard.pending_cut());
        let world = generate_world(&visible, &self.config.params)
            .map_err(|e| (ErrorCode::Io, e.to_string()))?;
        self.snapshot = snapshot;
        if self.world.room_by_dir(&self.current_dir).is_none()
            || world.room_by_dir(&self.current_dir).is_none()
        {
            self.current_dir = self.ops.root().to_path_buf();
        }
        Ok(std::mem::replace(&mut self.world, world))
    }

    /// Full world when the room set changed, else one room_updated per
    /// changed room.
    fn world_updates(&mut self, old: &World, out: &mut Vec<ServerMessage>) {
        let same_layout = old.rooms.len() == self.world.rooms.len()
            && old
                .rooms
                .iter()
                .zip(&self.world.rooms)
                .all(|(a, b)| a.dir_path == b.dir_path)
            && old.player_start == self.world.player_start;
        if !same_layout {
            let msg = self.world_message();
            out.push(msg);
            return;
        }
        let changed: Vec<usize> = (0..old.rooms.len())
            .filter(|&i| old.rooms[i] != self.world.rooms[i])
            .collect();
        for i in changed {
            let room = Box::new(self.world.rooms[i].clone());
            let msg = self.event(EventKind::RoomUpdated { room });
            out.push(msg);
        }
    }

    fn resync_and_report(&mut self, out: &mut Vec<ServerMessage>) -> Result<World, Failure> {
        let old = self.resync()?;
        self.world_updates(&old, out);
        Ok(old)
    }

    fn selection(&self, room: &Path, paths: &[PathBuf]) -> Result<Selection, Failure> {
        Selection::new(room, paths.to_vec()).map_err(|e| failure(&e))
    }

    pub fn return_to_root(&mut self) -> Vec<ServerMessage> {
        self.current_dir = self.ops.root().to_path_buf();
        let kind = EventKind::Teleport {
            room_id: self.world.root_room_id.clone(),
            pos: self.world.player_start.position,
        };
        vec![self.event(kind)]
    }

    /// Runs one command. The last message is always the ack or err for it.
    pub fn handle_command(&mut self, cmd: Command) -> Vec<ServerMessage> {
        let mut out = Vec::new();
        let room = cmd
            .room
            .clone()
            .unwrap_or_else(|| self.ops.root().to_path_buf());
        if self.world.room_by_dir(&room).is_some() {
            self.current_dir = room.clone();
        }
        let outcome = self.run_op(cmd.id, &cmd.op, &room, &mut out);
        out.push(match outcome {
            Ok(()) => ServerMessage::Ack { id: cmd.id },
            Err((code, msg)) => ServerMessage::Err {
                id: cmd.id,
                code,
                msg,
            },
        });
        out
    }

    fn run_op(
        &mut self,
        id: u64,
        op: &Op,
        room: &Path,
        out: &mut Vec<ServerMessage>,
    ) -> Result<(), Failure> {
        match op {
            Op::Mkdir { name } => {
                let result = self.ops.mkdir(room, name);
                self.finish_mutation(result.map(|_| ()), out)
            }
            Op::Rename { path, new_name } => {
                let result = self.ops.rename(path, new_name);
                if let Ok(r) = &result {
                    for change in &r.changed_paths {
                        if let (Some(from), Some(to)) = (&change.from, &change.to) {
                            self.clipboard.retarget(from, Some(to));
                        }
                    }
                }
                self.finish_mutation(result.map(|_| ()), out)
            }
            Op::Cut { paths } | Op::Copy { paths } => {
                let sel = self.selection(room, paths)?;
                let clip = match op {
                    Op::Cut { .. } => self.ops.cut(&sel),
                    _ => self.ops.copy(&sel),
                }
                .map_err(|e| failure(&e))?;
                self.clipboard = clip;
                let old = self.resync()?;
                if matches!(op, Op::Cut { .. }) {
                    let still: HashSet<&Path> = self
                        .world
                        .rooms
                        .iter()
                        .flat_map(|r| r.panes.iter().map(|p| p.file_path.as_path()))
                        .collect();
                    let removed: Vec<String> = old
                        .rooms
                        .iter()
                        .flat_map(|r| r.panes.iter())
                        .filter(|p| !still.contains(p.file_path.as_path()))
                        .map(|p| p.id.clone())
                        .collect();
                    for pane_id in removed {
                        let msg = self.event(EventKind::PaneRemoved {
                            pane_id,
                            effect: Effect::BlowUp,
                        });
                        out.push(msg);
                    }
                }
                self.world_updates(&old, out);
                Ok(())
            }
            Op::Paste => {
                let mut clip = self.clipboard.clone();
                let result = self.ops.paste(&mut clip, room);
                if result.is_ok() {
                    self.clipboard = clip;
                }
                self.resync_and_report(out)?;
                result
                    .map_err(|e| failure(&e))
                    .and_then(|r| paste_outcome(&r))
            }
            Op::Delete { paths } => {
                let sel = self.selection(room, paths)?;
                let result = self.ops.delete(&sel);
                if let Ok(r) = &result {
                    for change in &r.changed_paths {
                        if let Some(from) = &change.from {
                            self.clipboard.retarget(from, None);
                        }
                    }
                }
                self.resync_and_report(out)?;
                result
                    .map_err(|e| failure(&e))
                    .and_then(|r| failed_items(&r))
            }
            Op::SelectAll => {
                let visible = self.visible_snapshot();
                let sel = fileops::select_all(room, &visible).map_err(|e| failure(&e))?;
                out.push(ServerMessage::Selection {
                    id,
                    room: sel.dir_path().to_path_buf(),
                    items: sel.items().to_vec(),
                });
                Ok(())
            }
            Op::Refresh => {
                self.resync()?;
                let msg = self.world_message();
                out.push(msg);
                Ok(())
            }
            Op::ReturnToRoot => {
                out.extend(self.return_to_root());
                Ok(())
            }
            Op::Inventory => {
                out.push(ServerMessage::Inventory {
                    id,
                    mode: self.clipboard.mode().as_str().to_owned(),
                    items: self.clipboard.items().to_vec(),
                });
                Ok(())
            }
        }
    }

    fn finish_mutation(
        &mut self,
        result: Result<(), FileOpsError>,
        out: &mut Vec<ServerMessage>,
    ) -> Result<(), Failure> {
        match result {
            Ok(()) => {
                self.resync_and_report(out)?;
                Ok(())
            }
            Err(e) => Err(failure(&e)),
        }
    }
}

fn failed_items(r: &OpResult) -> Result<(), Failure> {
    match r.failed.first() {
        Some((path, why)) => Err((ErrorCode::Io, format!("{}: {why}", path.display()))),
        None => Ok(()),
    }
}

fn paste_outcome(r: &OpResult) -> Result<(), Failure> {
    failed_items(r)?;
    if !r.vanished.is_empty() && r.changed_paths.is_empty() {
        return Err((
            ErrorCode::NotFound,
            "every clipboard item has vanished".to_owned(),
        ));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn stats(frames: u64, window_ms: u64) -> FrameStats {
        FrameStats { window_ms, frames }
    }

    #[test]
    fn verdict_bands() {
        let band = |f, w| evaluate_frame_stats(stats(f, w)).unwrap().band;
        assert_eq!(band(30, 1000), FpsBand::Pass);
        assert_eq!(band(20, 1000), FpsBand::Pass);
        assert_eq!(band(15, 1000), FpsBand::Marginal);
        assert_eq!(band(10, 1000), FpsBand::Fail);
        assert_eq!(band(0, 1000), FpsBand::Fail);
        assert_eq!(band(5, 250), FpsBand::Pass);
        assert_eq!(
            evaluate_frame_stats(stats(30, 1000)).unwrap().mean_fps,
            30.0
        );
        assert_eq!(evaluate_frame_stats(stats(1, 249)), Err(BadWindow(249)));
    }
}
