//! File-manager operations confined to a sandbox root.
//!
//! Collisions are resolved by renaming with a `(n)` suffix, never by
//! overwriting. Cut is deferred: nothing moves until paste.

use std::collections::HashSet;
use std::ffi::OsString;
use std::io;
use std::path::{Component, Path, PathBuf};

use thiserror::Error;

use crate::fs_model::FsSnapshot;
use crate::vfs::{EntryKind, Vfs};

#[derive(Debug, Error)]
pub enum FileOpsError {
    #[error("invalid name {0:?}")]
    InvalidName(String),
    #[error("{0} is outside the sandbox")]
    SandboxViolation(PathBuf),
    #[error("{0} not found")]
    NotFound(PathBuf),
    #[error("{0} is not a directory")]
    NotADirectory(PathBuf),
    #[error("selection is empty")]
    EmptySelection,
    #[error("{0} is not directly inside the selection directory")]
    InvalidSelection(PathBuf),
    #[error("clipboard is empty")]
    EmptyClipboard,
    #[error("cannot paste {item} into itself or its descendant {dest}")]
    Cycle { item: PathBuf, dest: PathBuf },
    #[error("{0} is not in the snapshot")]
    NotInSnapshot(PathBuf),
    #[error("i/o failure on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
}

pub type Result<T, E = FileOpsError> = std::result::Result<T, E>;

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> FileOpsError + '_ {
    move |source| FileOpsError::Io {
        path: path.to_path_buf(),
        source,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ClipMode {
    Cut,
    Copy,
    #[default]
    Empty,
}

impl ClipMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            ClipMode::Cut => "cut",
            ClipMode::Copy => "copy",
            ClipMode::Empty => "empty",
        }
    }
}

/// The inventory. `mode == Empty` iff `items` is empty.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Clipboard {
    mode: ClipMode,
    items: Vec<PathBuf>,
}

impl Clipboard {
    pub fn empty() -> Self {
        Self::default()
    }

    pub fn mode(&self) -> ClipMode {
        self.mode
    }

    pub fn items(&self) -> &[PathBuf] {
        &self.items
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn clear(&mut self) {
        self.mode = ClipMode::Empty;
        self.items.clear();
    }

    /// Follows a rename (`to = Some`) or deletion (`to = None`) of `from`,
    /// which may be an item or one of its ancestors.
    pub fn retarget(&mut self, from: &Path, to: Option<&Path>) {
        self.items = std::mem::take(&mut self.items)
            .into_iter()
            .filter_map(|item| match item.strip_prefix(from) {
                Ok(rest) => to.map(|to| {
                    if rest.as_os_str().is_empty() {
                        to.to_path_buf()
                    } else {
                        to.join(rest)
                    }
                }),
                Err(_) => Some(item),
            })
            .collect();
        if self.items.is_empty() {
            self.mode = ClipMode::Empty;
        }
    }

    /// Items pending a move; hidden from the world until pasted.
    pub fn pending_cut(&self) -> &[PathBuf] {
        match self.mode {
            ClipMode::Cut => &self.items,
            _ => &[],
        }
    }
}

/// Items directly inside one directory.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Selection {
    dir_path: PathBuf,
    items: Vec<PathBuf>,
}

impl Selection {
    pub fn new(dir_path: impl Into<PathBuf>, items: Vec<PathBuf>) -> Result<Self> {
        let dir_path = dir_path.into();
        let mut seen = HashSet::new();
        let mut kept = Vec::with_capacity(items.len());
        for item in items {
            if item.parent() != Some(dir_path.as_path()) || item.file_name().is_none() {
                return Err(FileOpsError::InvalidSelection(item));
            }
            if seen.insert(item.clone()) {
                kept.push(item);
            }
        }
        Ok(Self {
            dir_path,
            items: kept,
        })
    }

    pub fn dir_path(&self) -> &Path {
        &self.dir_path
    }

    pub fn items(&self) -> &[PathBuf] {
        &self.items
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PathChange {
    pub from: Option<PathBuf>,
    pub to: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct OpResult {
    pub changed_paths: Vec<PathChange>,
    /// (intended name, final name)
    pub collisions_renamed: Vec<(String, String)>,
    /// Clipboard items that no longer existed at paste time.
    pub vanished: Vec<PathBuf>,
    /// Items whose operation failed; disk state for them was rolled back
    /// where possible.
    pub failed: Vec<(PathBuf, String)>,
}

impl OpResult {
    fn change(&mut self, from: Option<&Path>, to: Option<&Path>) {
        self.changed_paths.push(PathChange {
            from: from.map(Path::to_path_buf),
            to: to.map(Path::to_path_buf),
        });
    }
}

/// Splits at the last dot: `"a.tar.gz"` is `("a.tar", ".gz")`.
fn split_ext(name: &str) -> (&str, &str) {
    match name.rfind('.') {
        Some(i) => name.split_at(i),
        None => (name, ""),
    }
}

/// `desired` if free, else `stem(n)ext` for the smallest free n >= 2.
pub fn unique_name_among(taken: &HashSet<String>, desired: &str) -> String {
    if !taken.contains(desired) {
        return desired.to_owned();
    }
    let (stem, ext) = split_ext(desired);
    (2u64..)
        .map(|n| format!("{stem}({n}){ext}"))
        .find(|c| !taken.contains(c))
        .expect("unbounded search")
}

pub fn validate_name(name: &str) -> Result<()> {
    let bad = name.is_empty()
        || name == "."
        || name == ".."
        || name.len() > 255
        || name
            .chars()
            .any(|c| c == '/' || c == '\\' || c.is_control());
    if bad {
        Err(FileOpsError::InvalidName(name.to_owned()))
    } else {
        Ok(())
    }
}

/// Every file and subdirectory directly inside `dir`, in snapshot order.
pub fn select_all(dir: &Path, snapshot: &FsSnapshot) -> Result<Selection> {
    let node = snapshot
        .dir_at(dir)
        .ok_or_else(|| FileOpsError::NotInSnapshot(dir.to_path_buf()))?;
    let items = node
        .subdirs
        .iter()
        .map(|d| d.path.clone())
        .chain(node.files.iter().map(|f| f.path.clone()))
        .collect();
    Ok(Selection {
        dir_path: node.path.clone(),
        items,
    })
}

/// Operations over a [`Vfs`], all confined to `root`.
#[derive(Debug)]
pub struct FileOps<V> {
    vfs: V,
    root: PathBuf,
}

impl<V: Vfs> FileOps<V> {
    pub fn new(vfs: V, root: &Path) -> Result<Self> {
        let root = vfs
            .real_path(root)
            .map_err(|_| FileOpsError::NotFound(root.to_path_buf()))?;
        if vfs.entry_kind(&root).map_err(io_err(&root))? != Some(EntryKind::Dir) {
            return Err(FileOpsError::NotADirectory(root));
        }
        Ok(Self { vfs, root })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn vfs(&self) -> &V {
        &self.vfs
    }

    /// Lexical normalization plus the root-prefix check. `..` is rejected.
    fn normalize(&self, path: &Path) -> Result<PathBuf> {
        let violation = || FileOpsError::SandboxViolation(path.to_path_buf());
        if !path.is_absolute() {
            return Err(violation());
        }
        let mut out = PathBuf::new();
        for c in path.components() {
            match c {
                Component::ParentDir => return Err(violation()),
                Component::CurDir => {}
                other => out.push(other.as_os_str()),
            }
        }
        if !out.starts_with(&self.root) {
            return Err(violation());
        }
        Ok(out)
    }

    /// The deepest existing ancestor (or the path itself when `include_self`)
    /// must resolve inside the root, catching symlinked escapes.
    fn check_resolved(&self, path: &Path, include_self: bool) -> Result<()> {
        let skip = usize::from(!include_self);
        for anc in path.ancestors().skip(skip) {
            if !anc.starts_with(&self.root) {
                break;
            }
            if self.vfs.entry_kind(anc).map_err(io_err(anc))?.is_some() {
                let real = self.vfs.real_path(anc).map_err(io_err(anc))?;
                if real.starts_with(&self.root) {
                    return Ok(());
                }
                return Err(FileOpsError::SandboxViolation(path.to_path_buf()));
            }
        }
        Err(FileOpsError::SandboxViolation(path.to_path_buf()))
    }

    /// A directory inside the sandbox (the root included).
    pub fn confine_dir(&self, path: &Path) -> Result<PathBuf> {
        let p = self.normalize(path)?;
        self.check_resolved(&p, true)?;
        match self.vfs.entry_kind(&p).map_err(io_err(&p))? {
            Some(EntryKind::Dir) => Ok(p),
            Some(_) => Err(FileOpsError::NotADirectory(p)),
            None => Err(FileOpsError::NotFound(p)),
        }
    }

    /// An entry strictly below the root. The entry itself may be a symlink.
    pub fn confine_entry(&self, path: &Path) -> Result<PathBuf> {
        let p = self.normalize(path)?;
        if p == self.root {
            return Err(FileOpsError::SandboxViolation(p));
        }
        self.check_resolved(&p, false)?;
        Ok(p)
    }

    fn kind(&self, path: &Path) -> Result<Option<EntryKind>> {
        self.vfs.entry_kind(path).map_err(io_err(path))
    }

    fn existing_entry(&self, path: &Path) -> Result<(PathBuf, EntryKind)> {
        let p = self.confine_entry(path)?;
        match self.kind(&p)? {
            Some(k) => Ok((p, k)),
            None => Err(FileOpsError::NotFound(p)),
        }
    }

    fn names_in(&self, dir: &Path) -> HashSet<String> {
        self.vfs
            .read_dir(dir)
            .map(|entries| {
                entries
                    .into_iter()
                    .map(|e| e.name.to_string_lossy().into_owned())
                    .collect()
            })
            .unwrap_or_default()
    }

    pub fn unique_name(&self, dir: &Path, desired: &str) -> String {
        unique_name_among(&self.names_in(dir), desired)
    }

    fn place(&self, dir: &Path, desired: &str, result: &mut OpResult) -> PathBuf {
        let name = self.unique_name(dir, desired);
        if name != desired {
            result
                .collisions_renamed
                .push((desired.to_owned(), name.clone()));
        }
        dir.join(name)
    }

    pub fn mkdir(&mut self, parent: &Path, name: &str) -> Result<OpResult> {
        validate_name(name)?;
        let parent = self.confine_dir(parent)?;
        let mut result = OpResult::default();
        let target = self.place(&parent, name, &mut result);
        self.vfs.create_dir(&target).map_err(io_err(&target))?;
        result.change(None, Some(&target));
        Ok(result)
    }

    pub fn rename(&mut self, path: &Path, new_name: &str) -> Result<OpResult> {
        validate_name(new_name)?;
        let (path, _) = self.existing_entry(path)?;
        let mut result = OpResult::default();
        if path.file_name() == Some(OsString::from(new_name).as_os_str()) {
            return Ok(result);
        }
        let parent = path.parent().expect("below root").to_path_buf();
        let target = self.place(&parent, new_name, &mut result);
        self.vfs.rename(&path, &target).map_err(io_err(&path))?;
        result.change(Some(&path), Some(&target));
        Ok(result)
    }

    fn clip(&self, sel: &Selection, mode: ClipMode) -> Result<Clipboard> {
        if sel.is_empty() {
            return Err(FileOpsError::EmptySelection);
        }
        let items = sel
            .items
            .iter()
            .map(|p| self.existing_entry(p).map(|(p, _)| p))
            .collect::<Result<Vec<_>>>()?;
        Ok(Clipboard { mode, items })
    }

    /// Marks items for a move at the next paste. The disk is not touched.
    pub fn cut(&self, sel: &Selection) -> Result<Clipboard> {
        self.clip(sel, ClipMode::Cut)
    }

    pub fn copy(&self, sel: &Selection) -> Result<Clipboard> {
        self.clip(sel, ClipMode::Copy)
    }

    /// CUT moves the items and empties the clipboard; COPY leaves it intact
    /// so it can be pasted again.
    pub fn paste(&mut self, clip: &mut Clipboard, dest: &Path) -> Result<OpResult> {
        if clip.is_empty() {
            return Err(FileOpsError::EmptyClipboard);
        }
        let dest = self.confine_dir(dest)?;
        let mut plan = Vec::with_capacity(clip.items.len());
        for item in &clip.items {
            let item = self.confine_entry(item)?;
            let kind = self.kind(&item)?;
            if kind == Some(EntryKind::Dir) && dest.starts_with(&item) {
                return Err(FileOpsError::Cycle { item, dest });
            }
            plan.push((item, kind));
        }

        let mut result = OpResult::default();
        for (item, kind) in plan {
            let Some(kind) = kind else {
                result.vanished.push(item);
                continue;
            };
            if clip.mode == ClipMode::Cut && item.parent() == Some(dest.as_path()) {
                continue;
            }
            let name = item
                .file_name()
                .expect("below root")
                .to_string_lossy()
                .into_owned();
            let target = self.place(&dest, &name, &mut result);
            let outcome = match clip.mode {
                ClipMode::Cut => self.move_entry(&item, &target, kind),
                _ => self.copy_entry(&item, &target, kind),
            };
            match outcome {
                Ok(()) => {
                    let from = (clip.mode == ClipMode::Cut).then_some(item.as_path());
                    result.change(from, Some(&target));
                }
                Err(e) => result.failed.push((item, e.to_string())),
            }
        }
        if clip.mode == ClipMode::Cut {
            clip.clear();
        }
        Ok(result)
    }

    fn move_entry(&mut self, from: &Path, to: &Path, kind: EntryKind) -> io::Result<()> {
        match self.vfs.rename(from, to) {
            Ok(()) => Ok(()),
            Err(e) if e.kind() == io::ErrorKind::CrossesDevices => {
                self.copy_entry(from, to, kind)?;
                match kind {
                    EntryKind::Dir => self.vfs.remove_dir_all(from),
                    _ => self.vfs.remove_file(from),
                }
            }
            Err(e) => Err(e),
        }
    }

    /// Recursive copy. On failure the partial copy is removed.
    fn copy_entry(&mut self, from: &Path, to: &Path, kind: EntryKind) -> io::Result<()> {
        let outcome = self.copy_tree(from, to, kind);
        if outcome.is_err() && self.vfs.entry_kind(to).ok().flatten().is_some() {
            let _ = match kind {
                EntryKind::Dir => self.vfs.remove_dir_all(to),
                _ => self.vfs.remove_file(to),
            };
        }
        outcome
    }

    fn copy_tree(&mut self, from: &Path, to: &Path, kind: EntryKind) -> io::Result<()> {
        if kind != EntryKind::Dir {
            return self.vfs.copy_file(from, to);
        }
        self.vfs.create_dir(to)?;
        for entry in self.vfs.read_dir(from)? {
            self.copy_tree(&from.join(&entry.name), &to.join(&entry.name), entry.kind)?;
        }
        Ok(())
    }

    pub fn delete(&mut self, sel: &Selection) -> Result<OpResult> {
        if sel.is_empty() {
            return Err(FileOpsError::EmptySelection);
        }
        let targets = sel
            .items
            .iter()
            .map(|p| self.existing_entry(p))
            .collect::<Result<Vec<_>>>()?;
        let mut result = OpResult::default();
        for (path, kind) in targets {
            let outcome = match kind {
                EntryKind::Dir => self.vfs.remove_dir_all(&path),
                _ => self.vfs.remove_file(&path),
            };
            match outcome {
                Ok(()) => result.change(Some(&path), None),
                Err(e) => result.failed.push((path, e.to_string())),
            }
        }
        Ok(result)
    }
}
