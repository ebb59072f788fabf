//! Fixtures and independent oracles shared by the integration tests. Nothing
//! here calls into the code paths it is used to check.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::Rng;

pub const FIXTURE_FILES: [&str; 8] = [
    "New Text Document.txt",
    "New Text Document(2).txt",
    "New Text Document(3).txt",
    "New Text Document(4).txt",
    "New Text Document(5).txt",
    "New Text Document(6).txt",
    "New Text Document(7).txt",
    "New Text Document(8).txt",
];

/// The "new" directory: new1..new4 and eight text documents.
pub fn make_new_fixture(parent: &Path) -> PathBuf {
    let root = parent.join("new");
    fs::create_dir(&root).unwrap();
    for i in 1..=4 {
        fs::create_dir(root.join(format!("new{i}"))).unwrap();
    }
    for (i, name) in FIXTURE_FILES.iter().enumerate() {
        fs::write(root.join(name), format!("document {i}\n")).unwrap();
    }
    fs::canonicalize(root).unwrap()
}

fn random_name(rng: &mut impl Rng) -> String {
    const ALPHA: &[u8] = b"abcdeABCDE0123_ -";
    let len = rng.gen_range(1..=6);
    let mut s: String = (0..len)
        .map(|_| ALPHA[rng.gen_range(0..ALPHA.len())] as char)
        .collect();
    if s.trim().is_empty() {
        s = "x".into();
    }
    if rng.gen_bool(0.3) {
        s.push_str(".txt");
    }
    s
}

/// Random tree with exactly `dirs` directories below `root` (which must
/// exist), nested at most `max_depth` levels below it, and up to
/// `max_files` files in total.
pub fn random_tree(
    root: &Path,
    rng: &mut impl Rng,
    dirs: usize,
    max_depth: usize,
    max_files: usize,
) {
    let mut all: Vec<(PathBuf, usize)> = vec![(root.to_path_buf(), 0)];
    let mut made = 0;
    while made < dirs {
        let candidates: Vec<&(PathBuf, usize)> =
            all.iter().filter(|(_, d)| *d < max_depth).collect();
        let (parent, depth) = (*candidates.choose(rng).unwrap()).clone();
        let p = parent.join(random_name(rng));
        if p.exists() {
            continue;
        }
        fs::create_dir(&p).unwrap();
        all.push((p, depth + 1));
        made += 1;
    }
    let files = if max_files == 0 {
        0
    } else {
        rng.gen_range(0..=max_files)
    };
    for _ in 0..files {
        let (dir, _) = all.choose(rng).unwrap();
        let p = dir.join(random_name(rng));
        if p.exists() {
            continue;
        }
        let len = rng.gen_range(0..64);
        let bytes: Vec<u8> = (0..len).map(|_| rng.gen()).collect();
        fs::write(p, bytes).unwrap();
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Kind {
    Dir,
    File,
}

fn listing_order(a: &str, b: &str) -> std::cmp::Ordering {
    (a.to_lowercase(), a).cmp(&(b.to_lowercase(), b))
}

/// Directory listing sorted by lowercase name then name, computed straight from disk.
pub fn sorted_children(dir: &Path) -> (Vec<PathBuf>, Vec<PathBuf>) {
    let mut dirs = Vec::new();
    let mut files = Vec::new();
    for e in fs::read_dir(dir).unwrap() {
        let e = e.unwrap();
        let ft = fs::symlink_metadata(e.path()).unwrap().file_type();
        if ft.is_dir() {
            dirs.push(e.path());
        } else {
            files.push(e.path());
        }
    }
    let key = |p: &PathBuf| p.file_name().unwrap().to_string_lossy().into_owned();
    dirs.sort_by(|a, b| listing_order(&key(a), &key(b)));
    files.sort_by(|a, b| listing_order(&key(a), &key(b)));
    (dirs, files)
}

/// Independent breadth-first walk: every directory (root first, BFS order)
/// and every file.
pub struct Walk {
    pub dirs: Vec<PathBuf>,
    pub files: Vec<PathBuf>,
    pub edges: BTreeSet<(PathBuf, PathBuf)>,
}

pub fn walk(root: &Path) -> Walk {
    let mut out = Walk {
        dirs: Vec::new(),
        files: Vec::new(),
        edges: BTreeSet::new(),
    };
    let mut queue = VecDeque::from([root.to_path_buf()]);
    while let Some(d) = queue.pop_front() {
        let (subdirs, files) = sorted_children(&d);
        for s in &subdirs {
            out.edges.insert((d.clone(), s.clone()));
        }
        queue.extend(subdirs);
        out.files.extend(files);
        out.dirs.push(d);
    }
    out
}

/// (relative path, kind, contents) for the whole tree.
pub fn tree_state(root: &Path) -> BTreeMap<PathBuf, (Kind, Vec<u8>)> {
    let mut out = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            let rel = p.strip_prefix(root).unwrap().to_path_buf();
            if fs::symlink_metadata(&p).unwrap().is_dir() {
                out.insert(rel, (Kind::Dir, Vec::new()));
                stack.push(p);
            } else {
                out.insert(rel, (Kind::File, fs::read(&p).unwrap()));
            }
        }
    }
    out
}

pub fn copy_tree(from: &Path, to: &Path) {
    fs::create_dir_all(to).unwrap();
    for e in fs::read_dir(from).unwrap() {
        let p = e.unwrap().path();
        let target = to.join(p.file_name().unwrap());
        if p.is_dir() {
            copy_tree(&p, &target);
        } else {
            fs::copy(&p, &target).unwrap();
        }
    }
}

/// Straight-line reference interpreter for the file-manager operations,
/// using std::fs calls directly. Returns the expected error code, if any.
pub struct Reference {
    pub root: PathBuf,
    pub cut: bool,
    pub clip: Vec<PathBuf>,
}

fn bad_name(name: &str) -> bool {
    name.is_empty()
        || name == "."
        || name == ".."
        || name.len() > 255
        || name.contains('/')
        || name.contains('\\')
        || name.chars().any(char::is_control)
}

impl Reference {
    pub fn new(root: &Path) -> Self {
        Self {
            root: root.to_path_buf(),
            cut: false,
            clip: Vec::new(),
        }
    }

    pub fn free_name(dir: &Path, desired: &str) -> String {
        let taken: BTreeSet<String> = fs::read_dir(dir)
            .unwrap()
            .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
            .collect();
        if !taken.contains(desired) {
            return desired.to_owned();
        }
        let (stem, ext) = match desired.rfind('.') {
            Some(i) => (&desired[..i], &desired[i..]),
            None => (desired, ""),
        };
        let mut n = 2;
        loop {
            let c = format!("{stem}({n}){ext}");
            if !taken.contains(&c) {
                return c;
            }
            n += 1;
        }
    }

    pub fn mkdir(&mut self, parent: &Path, name: &str) -> Option<&'static str> {
        if bad_name(name) {
            return Some("invalid_name");
        }
        if !parent.is_dir() {
            return Some("not_found");
        }
        let n = Self::free_name(parent, name);
        fs::create_dir(parent.join(n)).unwrap();
        None
    }

    pub fn rename(&mut self, path: &Path, new_name: &str) -> Option<&'static str> {
        if bad_name(new_name) {
            return Some("invalid_name");
        }
        if path == self.root {
            return Some("sandbox");
        }
        if fs::symlink_metadata(path).is_err() {
            return Some("not_found");
        }
        if path.file_name().unwrap() == new_name {
            return None;
        }
        let parent = path.parent().unwrap();
        let target = parent.join(Self::free_name(parent, new_name));
        fs::rename(path, &target).unwrap();
        for item in &mut self.clip {
            if let Ok(rest) = item.strip_prefix(path) {
                *item = if rest.as_os_str().is_empty() {
                    target.clone()
                } else {
                    target.join(rest)
                };
            }
        }
        None
    }

    pub fn mark(&mut self, paths: &[PathBuf], cut: bool) -> Option<&'static str> {
        if paths.is_empty() {
            return Some("empty_selection");
        }
        if paths.iter().any(|p| fs::symlink_metadata(p).is_err()) {
            return Some("not_found");
        }
        let mut uniq = Vec::new();
        for p in paths {
            if !uniq.contains(p) {
                uniq.push(p.clone());
            }
        }
        self.cut = cut;
        self.clip = uniq;
        None
    }

    pub fn paste(&mut self, dest: &Path) -> Option<&'static str> {
        if self.clip.is_empty() {
            return Some("empty_clipboard");
        }
        if !dest.is_dir() {
            return Some("not_found");
        }
        for item in &self.clip {
            if item.is_dir() && dest.starts_with(item) {
                return Some("cycle");
            }
        }
        let mut moved = 0;
        let mut vanished = 0;
        for item in self.clip.clone() {
            if fs::symlink_metadata(&item).is_err() {
                vanished += 1;
                continue;
            }
            if self.cut && item.parent() == Some(dest) {
                continue;
            }
            let name = item.file_name().unwrap().to_string_lossy().into_owned();
            let target = dest.join(Self::free_name(dest, &name));
            if self.cut {
                fs::rename(&item, &target).unwrap();
            } else if item.is_dir() {
                copy_tree(&item, &target);
            } else {
                fs::copy(&item, &target).unwrap();
            }
            moved += 1;
        }
        if self.cut {
            self.clip.clear();
            self.cut = false;
        }
        if vanished > 0 && moved == 0 {
            return Some("not_found");
        }
        None
    }

    pub fn delete(&mut self, paths: &[PathBuf]) -> Option<&'static str> {
        if paths.is_empty() {
            return Some("empty_selection");
        }
        if paths.iter().any(|p| fs::symlink_metadata(p).is_err()) {
            return Some("not_found");
        }
        for p in paths {
            if !p.exists() {
                continue;
            }
            if p.is_dir() {
                fs::remove_dir_all(p).unwrap();
            } else {
                fs::remove_file(p).unwrap();
            }
        }
        self.clip
            .retain(|c| !paths.iter().any(|p| c.starts_with(p)));
        if self.clip.is_empty() {
            self.cut = false;
        }
        None
    }
}

/// One scripted step, with paths relative to the root.
#[derive(Debug, Clone)]
pub enum ScriptOp {
    Mkdir { room: PathBuf, name: String },
    Rename { path: PathBuf, new_name: String },
    Cut { room: PathBuf, items: Vec<PathBuf> },
    Copy { room: PathBuf, items: Vec<PathBuf> },
    Paste { room: PathBuf },
    Delete { room: PathBuf, items: Vec<PathBuf> },
}

const NAME_POOL: [&str; 7] = ["x", "x.txt", "doc.txt", "new1", "A", "a", "bad/name"];

fn rel_entries(root: &Path) -> (Vec<PathBuf>, Vec<PathBuf>) {
    let state = tree_state(root);
    let mut dirs = vec![PathBuf::new()];
    let mut all = Vec::new();
    for (p, (k, _)) in state {
        if k == Kind::Dir {
            dirs.push(p.clone());
        }
        all.push(p);
    }
    (dirs, all)
}

fn children_of(root: &Path, rel_dir: &Path) -> Vec<PathBuf> {
    let mut v: Vec<PathBuf> = fs::read_dir(root.join(rel_dir))
        .unwrap()
        .map(|e| rel_dir.join(e.unwrap().file_name()))
        .collect();
    v.sort();
    v
}

/// Picks a plausible next step from the current state of `root`.
pub fn random_step(root: &Path, rng: &mut impl Rng) -> ScriptOp {
    let (dirs, all) = rel_entries(root);
    let room = dirs.choose(rng).unwrap().clone();
    let name = NAME_POOL[rng.gen_range(0..NAME_POOL.len())].to_owned();
    let pick_children = |rng: &mut dyn rand::RngCore| {
        let kids = children_of(root, &room);
        let mut picked: Vec<PathBuf> = kids.iter().filter(|_| rng.gen_bool(0.4)).cloned().collect();
        if picked.is_empty() && !kids.is_empty() && rng.gen_bool(0.85) {
            picked.push(kids[rng.gen_range(0..kids.len())].clone());
        }
        picked
    };
    match rng.gen_range(0..10) {
        0 | 1 => ScriptOp::Mkdir { room, name },
        2 if !all.is_empty() => ScriptOp::Rename {
            path: all.choose(rng).unwrap().clone(),
            new_name: name,
        },
        3 | 4 => ScriptOp::Cut {
            items: pick_children(rng),
            room,
        },
        5 => ScriptOp::Copy {
            items: pick_children(rng),
            room,
        },
        6 | 7 => ScriptOp::Paste { room },
        8 => ScriptOp::Delete {
            items: pick_children(rng),
            room,
        },
        _ => ScriptOp::Copy {
            items: pick_children(rng),
            room,
        },
    }
}

pub fn apply_reference(r: &mut Reference, op: &ScriptOp) -> Option<&'static str> {
    let abs = |p: &Path| {
        if p.as_os_str().is_empty() {
            r.root.clone()
        } else {
            r.root.join(p)
        }
    };
    match op {
        ScriptOp::Mkdir { room, name } => {
            let parent = abs(room);
            r.mkdir(&parent, name)
        }
        ScriptOp::Rename { path, new_name } => {
            let p = abs(path);
            r.rename(&p, new_name)
        }
        ScriptOp::Cut { items, .. } => {
            let v: Vec<PathBuf> = items.iter().map(|p| abs(p)).collect();
            r.mark(&v, true)
        }
        ScriptOp::Copy { items, .. } => {
            let v: Vec<PathBuf> = items.iter().map(|p| abs(p)).collect();
            r.mark(&v, false)
        }
        ScriptOp::Paste { room } => {
            let d = abs(room);
            r.paste(&d)
        }
        ScriptOp::Delete { items, .. } => {
            let v: Vec<PathBuf> = items.iter().map(|p| abs(p)).collect();
            r.delete(&v)
        }
    }
}

/// The step as a protocol command line against `root`.
pub fn to_cmd_json(op: &ScriptOp, root: &Path, id: u64) -> String {
    let abs = |p: &Path| {
        if p.as_os_str().is_empty() {
            root.to_string_lossy().into_owned()
        } else {
            root.join(p).to_string_lossy().into_owned()
        }
    };
    let v = match op {
        ScriptOp::Mkdir { room, name } => serde_json::json!({
            "t": "cmd", "id": id, "op": "mkdir", "room": abs(room), "args": {"name": name}
        }),
        ScriptOp::Rename { path, new_name } => serde_json::json!({
            "t": "cmd", "id": id, "op": "rename", "room": root, "args": {"path": abs(path), "new_name": new_name}
        }),
        ScriptOp::Cut { room, items }
        | ScriptOp::Copy { room, items }
        | ScriptOp::Delete { room, items } => {
            let name = match op {
                ScriptOp::Cut { .. } => "cut",
                ScriptOp::Copy { .. } => "copy",
                _ => "delete",
            };
            let paths: Vec<String> = items.iter().map(|p| abs(p)).collect();
            serde_json::json!({
                "t": "cmd", "id": id, "op": name, "room": abs(room), "args": {"paths": paths}
            })
        }
        ScriptOp::Paste { room } => serde_json::json!({
            "t": "cmd", "id": id, "op": "paste", "room": abs(room)
        }),
    };
    v.to_string()
}

/// BFS shortest path over an undirected edge list.
pub fn bfs_hops(edges: &[(String, String)], from: &str, to: &str) -> Option<usize> {
    let mut adj: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
    for (a, b) in edges {
        adj.entry(a).or_default().push(b);
        adj.entry(b).or_default().push(a);
    }
    let mut dist = BTreeMap::from([(from, 0usize)]);
    let mut q = VecDeque::from([from]);
    while let Some(n) = q.pop_front() {
        if n == to {
            return Some(dist[n]);
        }
        for &m in adj.get(n).map(Vec::as_slice).unwrap_or(&[]) {
            if !dist.contains_key(m) {
                dist.insert(m, dist[n] + 1);
                q.push_back(m);
            }
        }
    }
    None
}
