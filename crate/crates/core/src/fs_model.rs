//! Immutable snapshots of a directory subtree.
//!
//! Traversal is breadth-first and spends the directory budget in BFS order,
//! so shallow structure survives truncation. Symlinks are recorded as plain
//! files and never followed. Directories that cannot be listed become
//! truncated empty nodes.

use std::cmp::Ordering;
use std::collections::{HashSet, VecDeque};
use std::path::{Path, PathBuf};
use std::time::SystemTime;

use thiserror::Error;

use crate::vfs::{DiskFs, EntryKind, FsRead};

#[derive(Debug, Error)]
pub enum SnapshotError {
    #[error("root {0} does not exist or is not a directory")]
    RootNotFound(PathBuf),
    #[error("snapshot limits must all be at least 1")]
    InvalidLimits,
}

/// Traversal caps. `max_depth` counts directory levels including the root,
/// so `max_depth = 1` captures the root's files only.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SnapshotLimits {
    pub max_depth: usize,
    pub max_dirs: usize,
    pub max_files_per_dir: usize,
}

impl SnapshotLimits {
    pub fn new(
        max_depth: usize,
        max_dirs: usize,
        max_files_per_dir: usize,
    ) -> Result<Self, SnapshotError> {
        let limits = Self {
            max_depth,
            max_dirs,
            max_files_per_dir,
        };
        limits.check()?;
        Ok(limits)
    }

    fn check(&self) -> Result<(), SnapshotError> {
        if self.max_depth == 0 || self.max_dirs == 0 || self.max_files_per_dir == 0 {
            Err(SnapshotError::InvalidLimits)
        } else {
            Ok(())
        }
    }
}

impl Default for SnapshotLimits {
    fn default() -> Self {
        Self {
            max_depth: 6,
            max_dirs: 512,
            max_files_per_dir: 256,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FileNode {
    pub path: PathBuf,
    pub name: String,
    pub size_bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DirNode {
    pub path: PathBuf,
    pub name: String,
    pub subdirs: Vec<DirNode>,
    pub files: Vec<FileNode>,
    /// Set iff traversal limits (or an unreadable directory) cut off children.
    pub truncated: bool,
}

#[derive(Debug, Clone, Copy)]
pub enum NodeRef<'a> {
    Dir(&'a DirNode),
    File(&'a FileNode),
}

impl NodeRef<'_> {
    pub fn path(&self) -> &Path {
        match self {
            NodeRef::Dir(d) => &d.path,
            NodeRef::File(f) => &f.path,
        }
    }
}

/// Captured tree. Equality ignores `captured_at`.
#[derive(Debug, Clone)]
pub struct FsSnapshot {
    pub root: DirNode,
    pub captured_at: SystemTime,
    pub limits: SnapshotLimits,
}

impl PartialEq for FsSnapshot {
    fn eq(&self, other: &Self) -> bool {
        self.root == other.root && self.limits == other.limits
    }
}

impl Eq for FsSnapshot {}

/// Directories first, then files; each group case-insensitive with a
/// case-sensitive tiebreak.
pub fn name_order(a: &str, b: &str) -> Ordering {
    a.to_lowercase()
        .cmp(&b.to_lowercase())
        .then_with(|| a.cmp(b))
}

fn display_name(path: &Path) -> String {
    path.file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.to_string_lossy().into_owned())
}

/// Snapshot of the real filesystem.
pub fn snapshot(root_path: &Path, limits: SnapshotLimits) -> Result<FsSnapshot, SnapshotError> {
    snapshot_from(&DiskFs, root_path, limits)
}

struct Pending {
    path: PathBuf,
    depth: usize,
    files: Vec<FileNode>,
    children: Vec<usize>,
    truncated: bool,
}

/// Snapshot through any [`FsRead`] source (disk or shadow tree).
pub fn snapshot_from<F: FsRead + ?Sized>(
    source: &F,
    root_path: &Path,
    limits: SnapshotLimits,
) -> Result<FsSnapshot, SnapshotError> {
    limits.check()?;
    let not_found = || SnapshotError::RootNotFound(root_path.to_path_buf());
    let root = source.real_path(root_path).map_err(|_| not_found())?;
    if source.entry_kind(&root).ok().flatten() != Some(EntryKind::Dir) {
        return Err(not_found());
    }

    let mut arena = vec![Pending {
        path: root,
        depth: 1,
        files: Vec::new(),
        children: Vec::new(),
        truncated: false,
    }];
    let mut queue = VecDeque::from([0usize]);

    while let Some(idx) = queue.pop_front() {
        let dir_path = arena[idx].path.clone();
        let depth = arena[idx].depth;
        let entries = match source.read_dir(&dir_path) {
            Ok(entries) => entries,
            Err(_) => {
                arena[idx].truncated = true;
                continue;
            }
        };
        let mut dirs = Vec::new();
        let mut files = Vec::new();
        for entry in entries {
            let path = dir_path.join(&entry.name);
            let name = entry.name.to_string_lossy().into_owned();
            match entry.kind {
                EntryKind::Dir => dirs.push((name, path)),
                EntryKind::File | EntryKind::Symlink => files.push(FileNode {
                    path,
                    name,
                    size_bytes: entry.size,
                }),
            }
        }
        dirs.sort_by(|a, b| name_order(&a.0, &b.0));
        files.sort_by(|a, b| name_order(&a.name, &b.name));

        let mut truncated = false;
        if files.len() > limits.max_files_per_dir {
            files.truncate(limits.max_files_per_dir);
            truncated = true;
        }
        if !dirs.is_empty() && depth >= limits.max_depth {
            truncated = true;
            dirs.clear();
        }
        let mut children = Vec::new();
        for (_, path) in dirs {
            if arena.len() >= limits.max_dirs {
                truncated = true;
                break;
            }
            let child = arena.len();
            arena.push(Pending {
                path,
                depth: depth + 1,
                files: Vec::new(),
                children: Vec::new(),
                truncated: false,
            });
            children.push(child);
            queue.push_back(child);
        }
        let node = &mut arena[idx];
        node.files = files;
        node.children = children;
        node.truncated = truncated;
    }

    let mut slots: Vec<Option<Pending>> = arena.into_iter().map(Some).collect();
    let root = assemble(&mut slots, 0);
    Ok(FsSnapshot {
        root,
        captured_at: SystemTime::now(),
        limits,
    })
}

fn assemble(slots: &mut [Option<Pending>], idx: usize) -> DirNode {
    let pending = slots[idx].take().expect("each node assembled once");
    let subdirs = pending
        .children
        .iter()
        .map(|&c| assemble(slots, c))
        .collect();
    DirNode {
        name: display_name(&pending.path),
        path: pending.path,
        subdirs,
        files: pending.files,
        truncated: pending.truncated,
    }
}

impl DirNode {
    /// Number of directories in this subtree, itself included.
    pub fn dir_count(&self) -> usize {
        1 + self.subdirs.iter().map(DirNode::dir_count).sum::<usize>()
    }

    pub fn file_count(&self) -> usize {
        self.files.len() + self.subdirs.iter().map(DirNode::file_count).sum::<usize>()
    }

    pub fn child_count(&self) -> usize {
        self.subdirs.len() + self.files.len()
    }

    fn retain_paths(&mut self, hidden: &HashSet<&Path>) {
        self.subdirs.retain(|d| !hidden.contains(d.path.as_path()));
        self.files.retain(|f| !hidden.contains(f.path.as_path()));
        for d in &mut self.subdirs {
            d.retain_paths(hidden);
        }
    }
}

impl FsSnapshot {
    pub fn node_at(&self, path: &Path) -> Option<NodeRef<'_>> {
        let rel = path.strip_prefix(&self.root.path).ok()?;
        let mut dir = &self.root;
        let mut comps = rel.components().peekable();
        if comps.peek().is_none() {
            return Some(NodeRef::Dir(dir));
        }
        while let Some(comp) = comps.next() {
            let name = comp.as_os_str();
            let last = comps.peek().is_none();
            if let Some(sub) = dir
                .subdirs
                .iter()
                .find(|d| d.path.file_name() == Some(name))
            {
                if last {
                    return Some(NodeRef::Dir(sub));
                }
                dir = sub;
                continue;
            }
            if last {
                return dir
                    .files
                    .iter()
                    .find(|f| f.path.file_name() == Some(name))
                    .map(NodeRef::File);
            }
            return None;
        }
        None
    }

    pub fn dir_at(&self, path: &Path) -> Option<&DirNode> {
        match self.node_at(path)? {
            NodeRef::Dir(d) => Some(d),
            NodeRef::File(_) => None,
        }
    }

    /// All directories in breadth-first order, root first.
    pub fn dirs_bfs(&self) -> Vec<&DirNode> {
        let mut out = vec![&self.root];
        let mut i = 0;
        while i < out.len() {
            let d = out[i];
            out.extend(d.subdirs.iter());
            i += 1;
        }
        out
    }

    pub fn dir_count(&self) -> usize {
        self.root.dir_count()
    }

    pub fn file_count(&self) -> usize {
        self.root.file_count()
    }

    /// Copy of the snapshot with the given nodes (and their subtrees) removed.
    /// The root itself cannot be hidden.
    pub fn without<P: AsRef<Path>>(&self, hidden: &[P]) -> FsSnapshot {
        let mut copy = self.clone();
        if !hidden.is_empty() {
            let set: HashSet<&Path> = hidden.iter().map(AsRef::as_ref).collect();
            copy.root.retain_paths(&set);
        }
        copy
    }
}
