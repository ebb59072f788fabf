//! Filesystem access behind a small trait, so the same snapshot and file
//! operation code runs against the real disk or an in-memory shadow tree
//! (dry-run mode).

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fs;
use std::io;
use std::path::{Component, Path, PathBuf};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EntryKind {
    Dir,
    File,
    /// Never followed. Treated as a plain file everywhere except when copying.
    Symlink,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EntryInfo {
    pub name: OsString,
    pub kind: EntryKind,
    pub size: u64,
}

/// Read-only view used by snapshots and sandbox checks.
pub trait FsRead {
    /// Kind of the entry at `path` without following a final symlink.
    /// `Ok(None)` means nothing exists there.
    fn entry_kind(&self, path: &Path) -> io::Result<Option<EntryKind>>;

    /// Immediate children of a directory, in no particular order.
    fn read_dir(&self, path: &Path) -> io::Result<Vec<EntryInfo>>;

    /// Fully resolved path (symlinks followed). The path must exist.
    fn real_path(&self, path: &Path) -> io::Result<PathBuf>;

    /// Size in bytes of a file entry.
    fn file_size(&self, path: &Path) -> io::Result<u64>;
}

/// Mutating primitives. Callers are responsible for sandboxing.
pub trait Vfs: FsRead {
    fn create_dir(&mut self, path: &Path) -> io::Result<()>;
    fn rename(&mut self, from: &Path, to: &Path) -> io::Result<()>;
    /// Copies one file. Symlinks are copied as links, not followed.
    fn copy_file(&mut self, from: &Path, to: &Path) -> io::Result<()>;
    fn remove_file(&mut self, path: &Path) -> io::Result<()>;
    fn remove_dir_all(&mut self, path: &Path) -> io::Result<()>;
}

impl<T: FsRead + ?Sized> FsRead for &T {
    fn entry_kind(&self, path: &Path) -> io::Result<Option<EntryKind>> {
        (**self).entry_kind(path)
    }
    fn read_dir(&self, path: &Path) -> io::Result<Vec<EntryInfo>> {
        (**self).read_dir(path)
    }
    fn real_path(&self, path: &Path) -> io::Result<PathBuf> {
        (**self).real_path(path)
    }
    fn file_size(&self, path: &Path) -> io::Result<u64> {
        (**self).file_size(path)
    }
}

/// The real filesystem.
#[derive(Debug, Clone, Copy, Default)]
pub struct DiskFs;

fn kind_of(meta: &fs::Metadata) -> EntryKind {
    let ft = meta.file_type();
    if ft.is_symlink() {
        EntryKind::Symlink
    } else if ft.is_dir() {
        EntryKind::Dir
    } else {
        EntryKind::File
    }
}

impl FsRead for DiskFs {
    fn entry_kind(&self, path: &Path) -> io::Result<Option<EntryKind>> {
        match fs::symlink_metadata(path) {
            Ok(meta) => Ok(Some(kind_of(&meta))),
            Err(e) if e.kind() == io::ErrorKind::NotFound => Ok(None),
            Err(e) => Err(e),
        }
    }

    fn read_dir(&self, path: &Path) -> io::Result<Vec<EntryInfo>> {
        let mut out = Vec::new();
        for entry in fs::read_dir(path)? {
            let entry = entry?;
            let meta = fs::symlink_metadata(entry.path())?;
            out.push(EntryInfo {
                name: entry.file_name(),
                kind: kind_of(&meta),
                size: meta.len(),
            });
        }
        Ok(out)
    }

    fn real_path(&self, path: &Path) -> io::Result<PathBuf> {
        fs::canonicalize(path)
    }

    fn file_size(&self, path: &Path) -> io::Result<u64> {
        Ok(fs::symlink_metadata(path)?.len())
    }
}

impl Vfs for DiskFs {
    fn create_dir(&mut self, path: &Path) -> io::Result<()> {
        fs::create_dir(path)
    }

    fn rename(&mut self, from: &Path, to: &Path) -> io::Result<()> {
        fs::rename(from, to)
    }

    fn copy_file(&mut self, from: &Path, to: &Path) -> io::Result<()> {
        let meta = fs::symlink_metadata(from)?;
        if meta.file_type().is_symlink() {
            let target = fs::read_link(from)?;
            return make_symlink(&target, to);
        }
        if to.exists() {
            return Err(io::Error::new(
                io::ErrorKind::AlreadyExists,
                "copy destination exists",
            ));
        }
        fs::copy(from, to).map(|_| ())
    }

    fn remove_file(&mut self, path: &Path) -> io::Result<()> {
        fs::remove_file(path)
    }

    fn remove_dir_all(&mut self, path: &Path) -> io::Result<()> {
        fs::remove_dir_all(path)
    }
}

#[cfg(unix)]
fn make_symlink(target: &Path, link: &Path) -> io::Result<()> {
    std::os::unix::fs::symlink(target, link)
}

#[cfg(not(unix))]
fn make_symlink(_target: &Path, _link: &Path) -> io::Result<()> {
    Err(io::Error::new(
        io::ErrorKind::Unsupported,
        "symlink copy unsupported on this platform",
    ))
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum ShadowNode {
    Dir,
    File { size: u64 },
}

/// In-memory tree standing in for the disk under one root. Dry-run sessions
/// mutate this instead of the real filesystem. No file contents are kept.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ShadowFs {
    root: PathBuf,
    nodes: BTreeMap<PathBuf, ShadowNode>,
}

fn not_found(path: &Path) -> io::Error {
    io::Error::new(
        io::ErrorKind::NotFound,
        format!("{} not found", path.display()),
    )
}

fn lexical(path: &Path) -> PathBuf {
    let mut out = PathBuf::new();
    for c in path.components() {
        match c {
            Component::CurDir => {}
            Component::ParentDir => {
                out.pop();
            }
            other => out.push(other.as_os_str()),
        }
    }
    out
}

impl ShadowFs {
    /// An empty root directory. `root` should be absolute.
    pub fn new(root: impl Into<PathBuf>) -> Self {
        let root = lexical(&root.into());
        let mut nodes = BTreeMap::new();
        nodes.insert(root.clone(), ShadowNode::Dir);
        Self { root, nodes }
    }

    /// Mirrors the structure (names, kinds, sizes) of a real directory tree.
    /// Symlinks become plain files.
    pub fn load(root: &Path) -> io::Result<Self> {
        let root = fs::canonicalize(root)?;
        if !fs::metadata(&root)?.is_dir() {
            return Err(io::Error::new(
                io::ErrorKind::NotADirectory,
                "shadow root is not a directory",
            ));
        }
        let mut shadow = Self::new(root.clone());
        let mut stack = vec![root];
        while let Some(dir) = stack.pop() {
            for entry in DiskFs.read_dir(&dir)? {
                let path = dir.join(&entry.name);
                match entry.kind {
                    EntryKind::Dir => {
                        shadow.nodes.insert(path.clone(), ShadowNode::Dir);
                        stack.push(path);
                    }
                    EntryKind::File | EntryKind::Symlink => {
                        shadow
                            .nodes
                            .insert(path, ShadowNode::File { size: entry.size });
                    }
                }
            }
        }
        Ok(shadow)
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    /// Adds a directory, creating missing ancestors below the root.
    pub fn add_dir(&mut self, path: impl AsRef<Path>) {
        let path = lexical(path.as_ref());
        self.ensure_parents(&path);
        self.nodes.insert(path, ShadowNode::Dir);
    }

    /// Adds a file, creating missing ancestors below the root.
    pub fn add_file(&mut self, path: impl AsRef<Path>, size: u64) {
        let path = lexical(path.as_ref());
        self.ensure_parents(&path);
        self.nodes.insert(path, ShadowNode::File { size });
    }

    fn ensure_parents(&mut self, path: &Path) {
        let mut missing: Vec<PathBuf> = path
            .ancestors()
            .skip(1)
            .take_while(|a| a.starts_with(&self.root) && !self.nodes.contains_key(*a))
            .map(Path::to_path_buf)
            .collect();
        while let Some(dir) = missing.pop() {
            self.nodes.insert(dir, ShadowNode::Dir);
        }
    }

    fn descendants(&self, path: &Path) -> Vec<PathBuf> {
        self.nodes
            .range(path.to_path_buf()..)
            .take_while(|(p, _)| p.starts_with(path))
            .map(|(p, _)| p.clone())
            .collect()
    }

    fn require_parent_dir(&self, path: &Path) -> io::Result<()> {
        let parent = path.parent().ok_or_else(|| not_found(path))?;
        match self.nodes.get(parent) {
            Some(ShadowNode::Dir) => Ok(()),
            Some(_) => Err(io::Error::new(
                io::ErrorKind::NotADirectory,
                "parent is not a directory",
            )),
            None => Err(not_found(parent)),
        }
    }

    fn require_vacant(&self, path: &Path) -> io::Result<()> {
        if self.nodes.contains_key(path) {
            Err(io::Error::new(
                io::ErrorKind::AlreadyExists,
                format!("{} exists", path.display()),
            ))
        } else {
            Ok(())
        }
    }
}

impl FsRead for ShadowFs {
    fn entry_kind(&self, path: &Path) -> io::Result<Option<EntryKind>> {
        Ok(self.nodes.get(&lexical(path)).map(|n| match n {
            ShadowNode::Dir => EntryKind::Dir,
            ShadowNode::File { .. } => EntryKind::File,
        }))
    }

    fn read_dir(&self, path: &Path) -> io::Result<Vec<EntryInfo>> {
        let path = lexical(path);
        match self.nodes.get(&path) {
            Some(ShadowNode::Dir) => {}
            Some(_) => {
                return Err(io::Error::new(
                    io::ErrorKind::NotADirectory,
                    "not a directory",
                ))
            }
            None => return Err(not_found(&path)),
        }
        let out = self
            .nodes
            .range(path.clone()..)
            .skip(1)
            .take_while(|(p, _)| p.starts_with(&path))
            .filter(|(p, _)| p.parent() == Some(path.as_path()))
            .map(|(p, n)| EntryInfo {
                name: p.file_name().map(OsString::from).unwrap_or_default(),
                kind: match n {
                    ShadowNode::Dir => EntryKind::Dir,
                    ShadowNode::File { .. } => EntryKind::File,
                },
                size: match n {
                    ShadowNode::Dir => 0,
                    ShadowNode::File { size } => *size,
                },
            })
            .collect();
        Ok(out)
    }

    fn real_path(&self, path: &Path) -> io::Result<PathBuf> {
        let path = lexical(path);
        if self.nodes.contains_key(&path) {
            Ok(path)
        } else {
            Err(not_found(&path))
        }
    }

    fn file_size(&self, path: &Path) -> io::Result<u64> {
        match self.nodes.get(&lexical(path)) {
            Some(ShadowNode::File { size }) => Ok(*size),
            Some(ShadowNode::Dir) => Ok(0),
            None => Err(not_found(path)),
        }
    }
}

impl Vfs for ShadowFs {
    fn create_dir(&mut self, path: &Path) -> io::Result<()> {
        let path = lexical(path);
        self.require_parent_dir(&path)?;
        self.require_vacant(&path)?;
        self.nodes.insert(path, ShadowNode::Dir);
        Ok(())
    }

    fn rename(&mut self, from: &Path, to: &Path) -> io::Result<()> {
        let (from, to) = (lexical(from), lexical(to));
        if !self.nodes.contains_key(&from) {
            return Err(not_found(&from));
        }
        if from == to {
            return Ok(());
        }
        if to.starts_with(&from) {
            return Err(io::Error::new(
                io::ErrorKind::InvalidInput,
                "cannot move a directory into itself",
            ));
        }
        self.require_parent_dir(&to)?;
        self.require_vacant(&to)?;
        for old in self.descendants(&from) {
            let node = self.nodes.remove(&old).expect("listed");
            let rel = old.strip_prefix(&from).expect("descendant");
            let new = if rel.as_os_str().is_empty() {
                to.clone()
            } else {
                to.join(rel)
            };
            self.nodes.insert(new, node);
        }
        Ok(())
    }

    fn copy_file(&mut self, from: &Path, to: &Path) -> io::Result<()> {
        let (from, to) = (lexical(from), lexical(to));
        let size = match self.nodes.get(&from) {
            Some(ShadowNode::File { size }) => *size,
            Some(ShadowNode::Dir) => {
                return Err(io::Error::new(
                    io::ErrorKind::IsADirectory,
                    "copy_file on a directory",
                ))
            }
            None => return Err(not_found(&from)),
        };
        self.require_parent_dir(&to)?;
        self.require_vacant(&to)?;
        self.nodes.insert(to, ShadowNode::File { size });
        Ok(())
    }

    fn remove_file(&mut self, path: &Path) -> io::Result<()> {
        let path = lexical(path);
        match self.nodes.get(&path) {
            Some(ShadowNode::File { .. }) => {
                self.nodes.remove(&path);
                Ok(())
            }
            Some(ShadowNode::Dir) => Err(io::Error::new(
                io::ErrorKind::IsADirectory,
                "remove_file on a directory",
            )),
            None => Err(not_found(&path)),
        }
    }

    fn remove_dir_all(&mut self, path: &Path) -> io::Result<()> {
        let path = lexical(path);
        if !self.nodes.contains_key(&path) {
            return Err(not_found(&path));
        }
        for p in self.descendants(&path) {
            self.nodes.remove(&p);
        }
        Ok(())
    }
}
