//! `roomfs` command line: `gen`, `validate`, `serve`, `simulate`.
//!
//! Exit codes: 0 success, 1 unreadable input / bind or I/O failure,
//! 2 invalid map or failed simulation step.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

use crate::fs_model::{snapshot, SnapshotLimits};
use crate::mapformat::{self, emit, parse_with_lines, validate};
use crate::server::{Server, DEFAULT_PORT};
use crate::session::{Session, SessionConfig};
use crate::simulate::{parse_script, run_script, SimReport};
use crate::vfs::{DiskFs, ShadowFs, Vfs};
use crate::worldgen::{generate_world, world_to_map, LayoutParams};

#[derive(Debug, Parser)]
#[command(
    name = "roomfs",
    version,
    about = "Walk through a directory tree as 3D rooms"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: CliCommand,
}

#[derive(Debug, Clone, Copy, Args)]
pub struct LimitArgs {
    #[arg(long, default_value_t = 6, value_parser = clap::value_parser!(u32).range(1..))]
    pub max_depth: u32,
    #[arg(long, default_value_t = 512, value_parser = clap::value_parser!(u32).range(1..))]
    pub max_dirs: u32,
    #[arg(long, default_value_t = 256, value_parser = clap::value_parser!(u32).range(1..))]
    pub max_files_per_dir: u32,
}

impl LimitArgs {
    pub fn limits(&self) -> SnapshotLimits {
        SnapshotLimits {
            max_depth: self.max_depth as usize,
            max_dirs: self.max_dirs as usize,
            max_files_per_dir: self.max_files_per_dir as usize,
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum CliCommand {
    /// Generate an .rmap map file from a directory tree
    Gen {
        root: PathBuf,
        #[arg(short, long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        limits: LimitArgs,
        /// Suppress timing output
        #[arg(long)]
        deterministic: bool,
    },
    /// Parse and validate an .rmap file
    Validate { file: PathBuf },
    /// Serve the world over the line-framed JSON protocol on localhost
    Serve {
        root: PathBuf,
        #[arg(long, default_value_t = DEFAULT_PORT)]
        port: u16,
        /// Apply file operations to an in-memory copy only
        #[arg(long)]
        dry_run: bool,
        #[command(flatten)]
        limits: LimitArgs,
    },
    /// Run a goto/op script against an in-process session
    Simulate {
        root: PathBuf,
        #[arg(long)]
        script: PathBuf,
        #[arg(long)]
        dry_run: bool,
        #[command(flatten)]
        limits: LimitArgs,
    },
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = if code == 0 {
                write!(out, "{e}")
            } else {
                write!(err, "{e}")
            };
            return code;
        }
    };
    match cli.command {
        CliCommand::Gen {
            root,
            out: target,
            limits,
            deterministic,
        } => cmd_gen(&root, target, limits.limits(), deterministic, out, err),
        CliCommand::Validate { file } => cmd_validate(&file, out, err),
        CliCommand::Serve {
            root,
            port,
            dry_run,
            limits,
        } => cmd_serve(&root, port, dry_run, limits.limits(), out, err),
        CliCommand::Simulate {
            root,
            script,
            dry_run,
            limits,
        } => cmd_simulate(&root, &script, dry_run, limits.limits(), out, err),
    }
}

fn default_out(root: &Path) -> PathBuf {
    let stem = fs::canonicalize(root)
        .ok()
        .and_then(|p| p.file_name().map(|n| n.to_string_lossy().into_owned()))
        .unwrap_or_else(|| "world".to_owned());
    PathBuf::from(format!("{stem}.rmap"))
}

pub fn cmd_gen(
    root: &Path,
    target: Option<PathBuf>,
    limits: SnapshotLimits,
    deterministic: bool,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> i32 {
    let started = Instant::now();
    let params = LayoutParams::default();
    let result = snapshot(root, limits)
        .map_err(|e| e.to_string())
        .and_then(|snap| generate_world(&snap, &params).map_err(|e| e.to_string()))
        .and_then(|world| {
            let doc = world_to_map(&world, &params);
            emit(&doc)
                .map(|text| (world, doc, text))
                .map_err(|e| e.to_string())
        });
    let (world, doc, text) = match result {
        Ok(v) => v,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            return 1;
        }
    };
    let target = target.unwrap_or_else(|| default_out(root));
    if let Err(e) = fs::write(&target, text) {
        let _ = writeln!(err, "error: cannot write {}: {e}", target.display());
        return 1;
    }
    let _ = writeln!(
        out,
        "wrote {} ({} entities)",
        target.display(),
        doc.entities.len()
    );
    let _ = writeln!(
        out,
        "rooms={} portals={} panes={}",
        world.rooms.len(),
        world.portal_count(),
        world.pane_count()
    );
    if !deterministic {
        let _ = writeln!(out, "generated in {} ms", started.elapsed().as_millis());
    }
    0
}

pub fn cmd_validate(file: &Path, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let bytes = match fs::read(file) {
        Ok(b) => b,
        Err(e) => {
            let _ = writeln!(err, "error: cannot read {}: {e}", file.display());
            return 1;
        }
    };
    let Ok(text) = String::from_utf8(bytes) else {
        let _ = writeln!(out, "line 1: file is not valid UTF-8");
        return 2;
    };
    let (doc, starts) = match parse_with_lines(&text) {
        Ok(v) => v,
        Err(e) => {
            let kind = match e {
                mapformat::MapError::OrderingError { .. } => "OrderingError",
                mapformat::MapError::DuplicateKey { .. } => "DuplicateKey",
                _ => "SyntaxError",
            };
            let _ = writeln!(out, "{kind}: {e}");
            return 2;
        }
    };
    let diagnostics = validate(&doc);
    if diagnostics.is_empty() {
        let _ = writeln!(out, "OK");
        return 0;
    }
    for d in &diagnostics {
        match d.entity().and_then(|i| starts.get(i)) {
            Some(line) => {
                let _ = writeln!(out, "line {line}: {d}");
            }
            None => {
                let _ = writeln!(out, "{d}");
            }
        }
    }
    2
}

fn session_for<V: Vfs>(
    vfs: V,
    root: &Path,
    limits: SnapshotLimits,
    err: &mut dyn Write,
) -> Option<Session<V>> {
    let config = SessionConfig {
        limits,
        params: LayoutParams::default(),
    };
    match Session::new(vfs, root, config) {
        Ok(s) => Some(s),
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            None
        }
    }
}

fn serve_with<V: Vfs>(
    vfs: V,
    root: &Path,
    port: u16,
    limits: SnapshotLimits,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> i32 {
    let Some(mut session) = session_for(vfs, root, limits, err) else {
        return 1;
    };
    let server = match Server::bind(&format!("127.0.0.1:{port}")) {
        Ok(s) => s,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            return 1;
        }
    };
    if let Ok(addr) = server.local_addr() {
        let _ = writeln!(out, "listening on {addr}");
        let _ = out.flush();
    }
    match server.run(&mut session) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            1
        }
    }
}

pub fn cmd_serve(
    root: &Path,
    port: u16,
    dry_run: bool,
    limits: SnapshotLimits,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> i32 {
    if dry_run {
        match ShadowFs::load(root) {
            Ok(shadow) => serve_with(shadow, root, port, limits, out, err),
            Err(e) => {
                let _ = writeln!(err, "error: cannot load {}: {e}", root.display());
                1
            }
        }
    } else {
        serve_with(DiskFs, root, port, limits, out, err)
    }
}

fn simulate_with<V: Vfs>(
    vfs: V,
    root: &Path,
    script: &str,
    limits: SnapshotLimits,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> i32 {
    let Some(mut session) = session_for(vfs, root, limits, err) else {
        return 1;
    };
    let steps = match parse_script(script, session.root()) {
        Ok(s) => s,
        Err(e) => {
            let _ = writeln!(out, "{e}");
            return 2;
        }
    };
    let mut report = SimReport::default();
    let outcome = run_script(&mut session, &steps, &mut report);
    for line in &report.lines {
        let _ = writeln!(out, "{line}");
    }
    match outcome {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(out, "{e}");
            2
        }
    }
}

pub fn cmd_simulate(
    root: &Path,
    script_path: &Path,
    dry_run: bool,
    limits: SnapshotLimits,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> i32 {
    let script = match fs::read_to_string(script_path) {
        Ok(s) => s,
        Err(e) => {
            let _ = writeln!(err, "error: cannot read {}: {e}", script_path.display());
            return 1;
        }
    };
    if dry_run {
        match ShadowFs::load(root) {
            Ok(shadow) => simulate_with(shadow, root, &script, limits, out, err),
            Err(e) => {
                let _ = writeln!(err, "error: cannot load {}: {e}", root.display());
                1
            }
        }
    } else {
        simulate_with(DiskFs, root, &script, limits, out, err)
    }
}
