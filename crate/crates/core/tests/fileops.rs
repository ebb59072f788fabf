mod common;

use std::collections::hash_map::DefaultHasher;
use std::collections::HashSet;
use std::fs;
use std::hash::{Hash, Hasher};
use std::path::{Path, PathBuf};

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use roomfs::fileops::{
    select_all, unique_name_among, validate_name, ClipMode, Clipboard, FileOps, FileOpsError,
    Selection,
};
use roomfs::fs_model::{snapshot, SnapshotLimits};
use roomfs::vfs::{DiskFs, ShadowFs};

use common::*;

fn sandbox() -> (tempfile::TempDir, PathBuf) {
    let tmp = tempfile::tempdir().unwrap();
    let root = fs::canonicalize(tmp.path()).unwrap();
    (tmp, root)
}

fn code(e: &FileOpsError) -> &'static str {
    match e {
        FileOpsError::InvalidName(_) => "invalid_name",
        FileOpsError::SandboxViolation(_) => "sandbox",
        FileOpsError::NotFound(_) | FileOpsError::NotADirectory(_) => "not_found",
        FileOpsError::EmptySelection => "empty_selection",
        FileOpsError::EmptyClipboard => "empty_clipboard",
        FileOpsError::Cycle { .. } => "cycle",
        other => panic!("unexpected {other}"),
    }
}

/// Library-level replay: FileOps plus caller-side clipboard bookkeeping
/// against the straight-line reference interpreter.
#[test]
fn random_scripts_match_reference() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    for s in 0..60 {
        let (_tmp, base) = sandbox();
        let live = base.join("live");
        let reference = base.join("ref");
        fs::create_dir(&live).unwrap();
        let nd = rng.gen_range(0..5);
        random_tree(&live, &mut rng, nd, 3, 6);
        copy_tree(&live, &reference);
        let mut ops = FileOps::new(DiskFs, &live).unwrap();
        let mut clip = Clipboard::empty();
        let mut oracle = Reference::new(&reference);
        for k in 0..rng.gen_range(1..20) {
            let step = random_step(&reference, &mut rng);
            let want = apply_reference(&mut oracle, &step);
            let abs = |p: &Path| {
                if p.as_os_str().is_empty() {
                    live.clone()
                } else {
                    live.join(p)
                }
            };
            let got = match &step {
                ScriptOp::Mkdir { room, name } => ops.mkdir(&abs(room), name).map(|_| ()),
                ScriptOp::Rename { path, new_name } => ops.rename(&abs(path), new_name).map(|r| {
                    for c in r.changed_paths {
                        clip.retarget(c.from.as_deref().unwrap(), c.to.as_deref());
                    }
                }),
                ScriptOp::Cut { room, items } | ScriptOp::Copy { room, items } => {
                    let sel =
                        Selection::new(abs(room), items.iter().map(|p| abs(p)).collect()).unwrap();
                    let r = if matches!(step, ScriptOp::Cut { .. }) {
                        ops.cut(&sel)
                    } else {
                        ops.copy(&sel)
                    };
                    r.map(|c| clip = c)
                }
                ScriptOp::Paste { room } => {
                    let mut c = clip.clone();
                    let r = ops.paste(&mut c, &abs(room));
                    match r {
                        Ok(res) => {
                            clip = c;
                            if !res.vanished.is_empty() && res.changed_paths.is_empty() {
                                Err(FileOpsError::NotFound(abs(room)))
                            } else {
                                Ok(())
                            }
                        }
                        Err(e) => Err(e),
                    }
                }
                ScriptOp::Delete { room, items } => {
                    let sel =
                        Selection::new(abs(room), items.iter().map(|p| abs(p)).collect()).unwrap();
                    ops.delete(&sel).map(|r| {
                        for c in r.changed_paths {
                            clip.retarget(c.from.as_deref().unwrap(), None);
                        }
                    })
                }
            };
            let got = got.err().map(|e| code(&e));
            assert_eq!(got, want, "script {s} step {k}: {step:?}");
        }
        assert_eq!(tree_state(&live), tree_state(&reference), "script {s}");
    }
}

fn tree_hash(root: &Path) -> u64 {
    let mut h = DefaultHasher::new();
    tree_state(root).hash(&mut h);
    h.finish()
}

#[test]
fn copy_paste_twice_duplicates_content() {
    let (_tmp, root) = sandbox();
    let src = root.join("src");
    fs::create_dir(&src).unwrap();
    random_tree(&src, &mut ChaCha8Rng::seed_from_u64(32), 6, 3, 20);
    let dest = root.join("dest");
    fs::create_dir(&dest).unwrap();
    let expected = tree_hash(&src);

    let mut ops = FileOps::new(DiskFs, &root).unwrap();
    let mut clip = ops
        .copy(&Selection::new(&root, vec![src.clone()]).unwrap())
        .unwrap();
    let first = ops.paste(&mut clip, &dest).unwrap();
    let second = ops.paste(&mut clip, &dest).unwrap();
    assert_eq!(clip.mode(), ClipMode::Copy);
    assert_eq!(clip.items(), std::slice::from_ref(&src));
    assert_eq!(
        first.changed_paths[0].to.as_deref(),
        Some(dest.join("src").as_path())
    );
    assert_eq!(
        second.changed_paths[0].to.as_deref(),
        Some(dest.join("src(2)").as_path())
    );
    assert_eq!(
        second.collisions_renamed,
        [("src".to_owned(), "src(2)".to_owned())]
    );
    assert_eq!(tree_hash(&dest.join("src")), expected);
    assert_eq!(tree_hash(&dest.join("src(2)")), expected);
    assert_eq!(tree_hash(&src), expected);
}

#[test]
fn cut_is_deferred_until_paste() {
    let (_tmp, parent) = sandbox();
    let root = make_new_fixture(&parent);
    let file = root.join("New Text Document.txt");
    let mut ops = FileOps::new(DiskFs, &root).unwrap();
    let before = tree_state(&root);
    let mut clip = ops
        .cut(&Selection::new(&root, vec![file.clone()]).unwrap())
        .unwrap();
    assert_eq!(tree_state(&root), before);
    assert_eq!(clip.pending_cut(), std::slice::from_ref(&file));
    ops.paste(&mut clip, &root.join("new1")).unwrap();
    assert!(clip.is_empty());
    assert!(!file.exists());
    assert!(root.join("new1/New Text Document.txt").exists());
    assert!(matches!(
        ops.paste(&mut clip, &root),
        Err(FileOpsError::EmptyClipboard)
    ));
}

#[test]
fn collisions_never_overwrite() {
    let (_tmp, parent) = sandbox();
    let root = make_new_fixture(&parent);
    let mut ops = FileOps::new(DiskFs, &root).unwrap();
    fs::write(root.join("new1/New Text Document.txt"), b"keep me").unwrap();
    let file = root.join("New Text Document.txt");
    let mut clip = ops
        .copy(&Selection::new(&root, vec![file.clone()]).unwrap())
        .unwrap();
    ops.paste(&mut clip, &root.join("new1")).unwrap();
    ops.paste(&mut clip, &root.join("new1")).unwrap();
    assert_eq!(
        fs::read(root.join("new1/New Text Document.txt")).unwrap(),
        b"keep me"
    );
    assert_eq!(
        fs::read(root.join("new1/New Text Document(2).txt")).unwrap(),
        fs::read(&file).unwrap()
    );
    assert!(root.join("new1/New Text Document(3).txt").exists());
    let r = ops.mkdir(&root, "new1").unwrap();
    assert_eq!(
        r.changed_paths[0].to.as_deref(),
        Some(root.join("new1(2)").as_path())
    );
}

#[test]
fn cycles_and_vanished_items() {
    let (_tmp, root) = sandbox();
    fs::create_dir_all(root.join("a/b")).unwrap();
    fs::write(root.join("f"), b"x").unwrap();
    let mut ops = FileOps::new(DiskFs, &root).unwrap();
    let before = tree_state(&root);
    let mut clip = ops
        .copy(&Selection::new(&root, vec![root.join("a")]).unwrap())
        .unwrap();
    for dest in [root.join("a"), root.join("a/b")] {
        assert!(matches!(
            ops.paste(&mut clip, &dest),
            Err(FileOpsError::Cycle { .. })
        ));
    }
    assert_eq!(tree_state(&root), before);

    let mut clip = ops
        .copy(&Selection::new(&root, vec![root.join("f")]).unwrap())
        .unwrap();
    fs::remove_file(root.join("f")).unwrap();
    let r = ops.paste(&mut clip, &root.join("a")).unwrap();
    assert_eq!(r.vanished, [root.join("f")]);
    assert!(r.changed_paths.is_empty());
}

#[test]
fn select_all_matches_listing() {
    let mut rng = ChaCha8Rng::seed_from_u64(33);
    let (_tmp, root) = sandbox();
    random_tree(&root, &mut rng, 15, 3, 40);
    let snap = snapshot(&root, SnapshotLimits::default()).unwrap();
    for dir in walk(&root).dirs {
        let sel = select_all(&dir, &snap).unwrap();
        let (dirs, files) = sorted_children(&dir);
        let want: Vec<PathBuf> = dirs.into_iter().chain(files).collect();
        assert_eq!(sel.items(), want.as_slice());
        assert_eq!(sel.dir_path(), dir);
    }
    assert!(matches!(
        select_all(&root.join("missing"), &snap),
        Err(FileOpsError::NotInSnapshot(_))
    ));
}

#[test]
fn sandbox_escapes_are_rejected() {
    let (_tmp, base) = sandbox();
    let root = base.join("root");
    let outside = base.join("outside");
    fs::create_dir(&root).unwrap();
    fs::create_dir(&outside).unwrap();
    fs::write(outside.join("secret"), b"s").unwrap();
    let mut ops = FileOps::new(DiskFs, &root).unwrap();
    let sandboxed =
        |r: Result<(), FileOpsError>| matches!(r, Err(FileOpsError::SandboxViolation(_)));

    assert!(sandboxed(ops.mkdir(&root.join(".."), "x").map(|_| ())));
    assert!(sandboxed(ops.mkdir(&outside, "x").map(|_| ())));
    assert!(sandboxed(
        ops.rename(&root.join("../outside/secret"), "y").map(|_| ())
    ));
    assert!(sandboxed(ops.rename(&root, "y").map(|_| ())));
    let sel = Selection::new(&outside, vec![outside.join("secret")]).unwrap();
    assert!(sandboxed(ops.delete(&sel).map(|_| ())));
    assert!(sandboxed(ops.copy(&sel).map(|_| ())));
    #[cfg(unix)]
    {
        std::os::unix::fs::symlink(&outside, root.join("link")).unwrap();
        assert!(sandboxed(ops.mkdir(&root.join("link"), "x").map(|_| ())));
        let sel = Selection::new(root.join("link"), vec![root.join("link/secret")]).unwrap();
        assert!(sandboxed(ops.delete(&sel).map(|_| ())));
        // The link itself lives inside the sandbox and may be removed.
        let sel = Selection::new(&root, vec![root.join("link")]).unwrap();
        ops.delete(&sel).unwrap();
    }
    assert!(outside.join("secret").exists());
    assert_eq!(fs::read_dir(&outside).unwrap().count(), 1);
}

#[test]
fn invalid_names() {
    for bad in [
        "",
        ".",
        "..",
        "a/b",
        "a\\b",
        "tab\there",
        "nl\n",
        &"x".repeat(256),
    ] {
        assert!(validate_name(bad).is_err(), "{bad:?}");
    }
    for good in [
        "a",
        "New Text Document.txt",
        ".bashrc",
        "é",
        &"x".repeat(255),
    ] {
        assert!(validate_name(good).is_ok(), "{good:?}");
    }
}

#[test]
fn dry_run_leaves_disk_untouched() {
    let (_tmp, parent) = sandbox();
    let root = make_new_fixture(&parent);
    let before = tree_state(&root);
    let shadow = ShadowFs::load(&root).unwrap();
    let mut ops = FileOps::new(shadow, &root).unwrap();
    ops.mkdir(&root, "made").unwrap();
    ops.rename(&root.join("new2"), "renamed").unwrap();
    let sel = Selection::new(
        &root,
        vec![root.join("new3"), root.join("New Text Document.txt")],
    )
    .unwrap();
    ops.delete(&sel).unwrap();
    let mut clip = ops
        .copy(&Selection::new(&root, vec![root.join("new1")]).unwrap())
        .unwrap();
    ops.paste(&mut clip, &root.join("renamed")).unwrap();
    assert_eq!(tree_state(&root), before);
    let snap =
        roomfs::fs_model::snapshot_from(ops.vfs(), &root, SnapshotLimits::default()).unwrap();
    let names: Vec<&str> = snap.root.subdirs.iter().map(|d| d.name.as_str()).collect();
    assert_eq!(names, ["made", "new1", "new4", "renamed"]);
    assert_eq!(snap.file_count(), 7);
    assert!(snap.dir_at(&root.join("renamed/new1")).is_some());
}

#[test]
fn unique_name_examples() {
    let taken: HashSet<String> = ["x", "x(2)", "a.tar.gz", ".bashrc", "New Text Document.txt"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    assert_eq!(unique_name_among(&taken, "y"), "y");
    assert_eq!(unique_name_among(&taken, "x"), "x(3)");
    assert_eq!(unique_name_among(&taken, "a.tar.gz"), "a.tar(2).gz");
    assert_eq!(unique_name_among(&taken, ".bashrc"), "(2).bashrc");
    assert_eq!(
        unique_name_among(&taken, "New Text Document.txt"),
        "New Text Document(2).txt"
    );
}

proptest! {
    #[test]
    fn unique_name_is_smallest_free(
        desired in "[a-c]{1,2}(\\.[a-c]{1,2})?",
        taken_n in prop::collection::btree_set(2u64..8, 0..6),
        include_desired in any::<bool>(),
    ) {
        let (stem, ext) = match desired.rfind('.') {
            Some(i) => desired.split_at(i),
            None => (desired.as_str(), ""),
        };
        let mut taken: HashSet<String> = taken_n.iter().map(|n| format!("{stem}({n}){ext}")).collect();
        if include_desired {
            taken.insert(desired.clone());
        }
        let got = unique_name_among(&taken, &desired);
        prop_assert!(!taken.contains(&got));
        let want = if !include_desired {
            desired.clone()
        } else {
            let n = (2u64..).find(|n| !taken_n.contains(n)).unwrap();
            format!("{stem}({n}){ext}")
        };
        prop_assert_eq!(got, want);
    }
}
