//! Plain-text brush/entity map files (`.rmap`).
//!
//! ```text
//! // roomfs-map v1
//! {
//! "classname" "worldspawn"
//! [0 0 0|64 64 64|wall_default]
//! }
//! ```
//!
//! One construct per line. Key/value lines come before brush lines inside an
//! entity. Output is LF-only with one trailing newline; CRLF and blank lines
//! are accepted on input.

use std::collections::{BTreeSet, HashSet};
use std::fmt::{self, Write as _};

use thiserror::Error;

use crate::par::{self, Execution};

pub const HEADER: &str = "// roomfs-map v1";
pub const FORMAT_VERSION: u32 = 1;
const HEADER_PREFIX: &str = "// roomfs-map v";

pub const CLASS_WORLDSPAWN: &str = "worldspawn";
pub const CLASS_PLAYER_START: &str = "info_player_start";
pub const CLASS_ROOM_META: &str = "room_meta";
pub const CLASS_PORTAL: &str = "portal";
pub const CLASS_FILE_PANE: &str = "file_pane";
pub const CLASS_TRUNC_MARKER: &str = "trunc_marker";

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Brush {
    pub min: [i64; 3],
    pub max: [i64; 3],
    pub texture: String,
}

impl Brush {
    pub fn new(min: [i64; 3], max: [i64; 3], texture: impl Into<String>) -> Self {
        Self {
            min,
            max,
            texture: texture.into(),
        }
    }

    pub fn is_closed_box(&self) -> bool {
        (0..3).all(|i| self.min[i] < self.max[i])
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Entity {
    pub kv: Vec<(String, String)>,
    pub brushes: Vec<Brush>,
}

impl Entity {
    pub fn new(classname: &str) -> Self {
        Self {
            kv: vec![("classname".to_owned(), classname.to_owned())],
            brushes: Vec::new(),
        }
    }

    pub fn with(mut self, key: &str, value: impl Into<String>) -> Self {
        self.kv.push((key.to_owned(), value.into()));
        self
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.kv
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    pub fn classname(&self) -> Option<&str> {
        self.get("classname")
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MapDocument {
    pub version: u32,
    pub entities: Vec<Entity>,
}

impl MapDocument {
    pub fn new(entities: Vec<Entity>) -> Self {
        Self {
            version: FORMAT_VERSION,
            entities,
        }
    }

    pub fn count_class(&self, classname: &str) -> usize {
        self.entities
            .iter()
            .filter(|e| e.classname() == Some(classname))
            .count()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MapError {
    #[error("invalid document: {0}")]
    InvalidDocument(String),
    #[error("line {line}: {reason}")]
    SyntaxError { line: usize, reason: String },
    #[error("line {line}: worldspawn must be the first and only worldspawn entity")]
    OrderingError { line: usize },
    #[error("line {line}: duplicate key \"{key}\"")]
    DuplicateKey { line: usize, key: String },
}

impl MapError {
    pub fn line(&self) -> Option<usize> {
        match self {
            MapError::InvalidDocument(_) => None,
            MapError::SyntaxError { line, .. }
            | MapError::OrderingError { line }
            | MapError::DuplicateKey { line, .. } => Some(*line),
        }
    }
}

fn valid_key(k: &str) -> bool {
    !k.is_empty() && k.bytes().all(|b| b.is_ascii_alphanumeric() || b == b'_')
}

fn valid_value(v: &str) -> bool {
    !v.contains(['"', '\n', '\r'])
}

fn valid_texture(t: &str) -> bool {
    !t.is_empty()
        && t.bytes()
            .all(|b| b.is_ascii_alphanumeric() || b == b'_' || b == b'/')
}

/// Escapes text so it can sit inside a quoted value (`%`, `"`, CR, LF).
pub fn escape_value(raw: &str) -> String {
    let mut out = String::with_capacity(raw.len());
    for ch in raw.chars() {
        match ch {
            '%' => out.push_str("%25"),
            '"' => out.push_str("%22"),
            '\n' => out.push_str("%0A"),
            '\r' => out.push_str("%0D"),
            c => out.push(c),
        }
    }
    out
}

pub fn unescape_value(escaped: &str) -> String {
    let mut out = String::with_capacity(escaped.len());
    let mut rest = escaped;
    while let Some(pos) = rest.find('%') {
        out.push_str(&rest[..pos]);
        let code = rest.get(pos + 1..pos + 3);
        let decoded = match code {
            Some("25") => Some('%'),
            Some("22") => Some('"'),
            Some("0A") => Some('\n'),
            Some("0D") => Some('\r'),
            _ => None,
        };
        match decoded {
            Some(c) => {
                out.push(c);
                rest = &rest[pos + 3..];
            }
            None => {
                out.push('%');
                rest = &rest[pos + 1..];
            }
        }
    }
    out.push_str(rest);
    out
}

/// Structural checks that emit and parse both rely on.
fn check_structure(doc: &MapDocument) -> Result<(), String> {
    if doc.version != FORMAT_VERSION {
        return Err(format!("unsupported version {}", doc.version));
    }
    if doc.entities.is_empty() {
        return Err("document has no entities".into());
    }
    for (i, e) in doc.entities.iter().enumerate() {
        let mut seen = HashSet::new();
        for (k, v) in &e.kv {
            if !valid_key(k) {
                return Err(format!("entity {i}: invalid key {k:?}"));
            }
            if !valid_value(v) {
                return Err(format!("entity {i}: invalid value for {k}"));
            }
            if !seen.insert(k.as_str()) {
                return Err(format!("entity {i}: duplicate key {k}"));
            }
        }
        if e.classname().is_none() {
            return Err(format!("entity {i}: missing classname"));
        }
        for b in &e.brushes {
            if !valid_texture(&b.texture) {
                return Err(format!("entity {i}: invalid texture {:?}", b.texture));
            }
            if !b.is_closed_box() {
                return Err(format!("entity {i}: degenerate brush"));
            }
        }
        let is_world = e.classname() == Some(CLASS_WORLDSPAWN);
        if is_world != (i == 0) {
            return Err("worldspawn must be the first and only worldspawn entity".into());
        }
    }
    Ok(())
}

fn write_entity(out: &mut String, e: &Entity) {
    out.push_str("{\n");
    for (k, v) in &e.kv {
        let _ = writeln!(out, "\"{k}\" \"{v}\"");
    }
    for b in &e.brushes {
        let _ = writeln!(
            out,
            "[{} {} {}|{} {} {}|{}]",
            b.min[0], b.min[1], b.min[2], b.max[0], b.max[1], b.max[2], b.texture
        );
    }
    out.push_str("}\n");
}

pub fn emit(doc: &MapDocument) -> Result<String, MapError> {
    emit_with(doc, Execution::default())
}

pub fn emit_with(doc: &MapDocument, exec: Execution) -> Result<String, MapError> {
    check_structure(doc).map_err(MapError::InvalidDocument)?;
    let chunks = par::map(exec, &doc.entities, |e| {
        let mut s = String::new();
        write_entity(&mut s, e);
        s
    });
    let mut out =
        String::with_capacity(HEADER.len() + 1 + chunks.iter().map(String::len).sum::<usize>());
    out.push_str(HEADER);
    out.push('\n');
    for c in chunks {
        out.push_str(&c);
    }
    Ok(out)
}

pub fn parse(text: &str) -> Result<MapDocument, MapError> {
    parse_with_lines(text).map(|(doc, _)| doc)
}

/// Parses and also returns the 1-based line of each entity's opening brace.
pub fn parse_with_lines(text: &str) -> Result<(MapDocument, Vec<usize>), MapError> {
    let syntax = |line: usize, reason: &str| MapError::SyntaxError {
        line,
        reason: reason.to_owned(),
    };

    let mut lines = text
        .split('\n')
        .enumerate()
        .map(|(i, l)| (i + 1, l.strip_suffix('\r').unwrap_or(l)))
        .filter(|(_, l)| !l.is_empty());

    let (hline, header) = lines
        .next()
        .ok_or_else(|| syntax(1, "empty file, expected header"))?;
    let version = match header.strip_prefix(HEADER_PREFIX) {
        Some("1") => FORMAT_VERSION,
        Some(_) => return Err(syntax(hline, "unsupported format version")),
        None => return Err(syntax(hline, "expected header \"// roomfs-map v1\"")),
    };

    let mut entities = Vec::new();
    let mut starts = Vec::new();
    let mut current: Option<(Entity, HashSet<String>)> = None;
    let mut last_line = hline;

    for (n, line) in lines {
        last_line = n;
        match current.as_mut() {
            None => {
                if line != "{" {
                    return Err(syntax(n, "expected '{'"));
                }
                current = Some((Entity::default(), HashSet::new()));
                starts.push(n);
            }
            Some((entity, keys)) => {
                if line == "}" {
                    let (entity, _) = current.take().expect("open entity");
                    if entity.kv.is_empty() {
                        return Err(syntax(n, "entity has no key/value lines"));
                    }
                    let Some(class) = entity.classname() else {
                        return Err(syntax(n, "entity has no classname"));
                    };
                    let is_world = class == CLASS_WORLDSPAWN;
                    if is_world != entities.is_empty() {
                        return Err(MapError::OrderingError {
                            line: starts[entities.len()],
                        });
                    }
                    entities.push(entity);
                } else if line.starts_with('"') {
                    if !entity.brushes.is_empty() {
                        return Err(syntax(n, "key/value line after brush lines"));
                    }
                    let (k, v) = parse_kv(line).map_err(|r| syntax(n, r))?;
                    if !keys.insert(k.clone()) {
                        return Err(MapError::DuplicateKey { line: n, key: k });
                    }
                    entity.kv.push((k, v));
                } else if line.starts_with('[') {
                    if entity.kv.is_empty() {
                        return Err(syntax(n, "brush before any key/value line"));
                    }
                    entity
                        .brushes
                        .push(parse_brush(line).map_err(|r| syntax(n, r))?);
                } else {
                    return Err(syntax(n, "unrecognized line"));
                }
            }
        }
    }
    if current.is_some() {
        return Err(syntax(last_line, "unterminated entity"));
    }
    if entities.is_empty() {
        return Err(syntax(last_line, "file has no entities"));
    }
    Ok((MapDocument { version, entities }, starts))
}

fn parse_kv(line: &str) -> Result<(String, String), &'static str> {
    let body = line
        .strip_prefix('"')
        .and_then(|l| l.strip_suffix('"'))
        .ok_or("malformed key/value line")?;
    let (key, value) = body.split_once("\" \"").ok_or("malformed key/value line")?;
    if !valid_key(key) {
        return Err("invalid key");
    }
    if !valid_value(value) {
        return Err("invalid value");
    }
    Ok((key.to_owned(), value.to_owned()))
}

fn parse_int(tok: &str) -> Option<i64> {
    let digits = tok.strip_prefix('-').unwrap_or(tok);
    let canonical = match digits.as_bytes() {
        [] => false,
        [b'0'] => digits.len() == tok.len(),
        [first, rest @ ..] => (b'1'..=b'9').contains(first) && rest.iter().all(u8::is_ascii_digit),
    };
    if canonical {
        tok.parse().ok()
    } else {
        None
    }
}

fn parse_triple(part: &str) -> Result<[i64; 3], &'static str> {
    let mut it = part.split(' ');
    let mut out = [0; 3];
    for slot in &mut out {
        *slot = it
            .next()
            .and_then(parse_int)
            .ok_or("brush coordinates must be three integers")?;
    }
    if it.next().is_some() {
        return Err("brush coordinates must be three integers");
    }
    Ok(out)
}

fn parse_brush(line: &str) -> Result<Brush, &'static str> {
    let body = line
        .strip_prefix('[')
        .and_then(|l| l.strip_suffix(']'))
        .ok_or("malformed brush line")?;
    let mut parts = body.split('|');
    let (Some(min), Some(max), Some(texture), None) =
        (parts.next(), parts.next(), parts.next(), parts.next())
    else {
        return Err("malformed brush line");
    };
    let brush = Brush {
        min: parse_triple(min)?,
        max: parse_triple(max)?,
        texture: texture.to_owned(),
    };
    if !valid_texture(&brush.texture) {
        return Err("invalid texture name");
    }
    if !brush.is_closed_box() {
        return Err("brush min must be below max on every axis");
    }
    Ok(brush)
}

/// A validation finding. `entity` is the zero-based entity index.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Diagnostic {
    UnsupportedVersion(u32),
    NoEntities,
    MissingWorldspawn,
    WorldspawnNotFirst { entity: usize },
    ExtraWorldspawn { entity: usize },
    MissingClassname { entity: usize },
    InvalidKey { entity: usize, key: String },
    InvalidValue { entity: usize, key: String },
    DuplicateKey { entity: usize, key: String },
    InvalidTexture { entity: usize, brush: usize },
    DegenerateBrush { entity: usize, brush: usize },
    UnknownClass { entity: usize, classname: String },
    MissingKey { entity: usize, key: &'static str },
    MalformedValue { entity: usize, key: &'static str },
    OutOfOrder { entity: usize },
    DuplicateRoom { entity: usize, dir_path: String },
    DanglingPortal { entity: usize, target_dir: String },
    DanglingMarker { entity: usize, dir_path: String },
    PlayerStartCount { count: usize },
}

impl Diagnostic {
    pub fn entity(&self) -> Option<usize> {
        use Diagnostic::*;
        match self {
            UnsupportedVersion(_) | NoEntities | MissingWorldspawn | PlayerStartCount { .. } => {
                None
            }
            WorldspawnNotFirst { entity }
            | ExtraWorldspawn { entity }
            | MissingClassname { entity }
            | InvalidKey { entity, .. }
            | InvalidValue { entity, .. }
            | DuplicateKey { entity, .. }
            | InvalidTexture { entity, .. }
            | DegenerateBrush { entity, .. }
            | UnknownClass { entity, .. }
            | MissingKey { entity, .. }
            | MalformedValue { entity, .. }
            | OutOfOrder { entity }
            | DuplicateRoom { entity, .. }
            | DanglingPortal { entity, .. }
            | DanglingMarker { entity, .. } => Some(*entity),
        }
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        use Diagnostic::*;
        match self {
            UnsupportedVersion(v) => write!(f, "unsupported format version {v}"),
            NoEntities => write!(f, "document has no entities"),
            MissingWorldspawn => write!(f, "no worldspawn entity"),
            WorldspawnNotFirst { entity } => {
                write!(f, "entity {entity}: worldspawn is not the first entity")
            }
            ExtraWorldspawn { entity } => write!(f, "entity {entity}: second worldspawn"),
            MissingClassname { entity } => write!(f, "entity {entity}: missing classname"),
            InvalidKey { entity, key } => write!(f, "entity {entity}: invalid key {key:?}"),
            InvalidValue { entity, key } => {
                write!(
                    f,
                    "entity {entity}: value of {key} contains a quote or newline"
                )
            }
            DuplicateKey { entity, key } => write!(f, "entity {entity}: duplicate key {key}"),
            InvalidTexture { entity, brush } => {
                write!(
                    f,
                    "entity {entity}: brush {brush} has an invalid texture name"
                )
            }
            DegenerateBrush { entity, brush } => {
                write!(f, "entity {entity}: brush {brush} is not a closed box")
            }
            UnknownClass { entity, classname } => {
                write!(f, "entity {entity}: unknown classname {classname}")
            }
            MissingKey { entity, key } => write!(f, "entity {entity}: missing key {key}"),
            MalformedValue { entity, key } => {
                write!(f, "entity {entity}: malformed value for {key}")
            }
            OutOfOrder { entity } => {
                write!(f, "entity {entity}: out of canonical class order")
            }
            DuplicateRoom { entity, dir_path } => {
                write!(f, "entity {entity}: duplicate room_meta for {dir_path}")
            }
            DanglingPortal { entity, target_dir } => {
                write!(
                    f,
                    "entity {entity}: portal target {target_dir} has no room_meta"
                )
            }
            DanglingMarker { entity, dir_path } => {
                write!(
                    f,
                    "entity {entity}: trunc_marker for {dir_path} has no room_meta"
                )
            }
            PlayerStartCount { count } => {
                write!(f, "expected exactly one info_player_start, found {count}")
            }
        }
    }
}

fn class_rank(class: &str) -> Option<u8> {
    Some(match class {
        CLASS_WORLDSPAWN => 0,
        CLASS_PLAYER_START => 1,
        CLASS_ROOM_META => 2,
        CLASS_PORTAL => 3,
        CLASS_FILE_PANE => 4,
        CLASS_TRUNC_MARKER => 5,
        _ => return None,
    })
}

fn required_keys(class: &str) -> &'static [&'static str] {
    match class {
        CLASS_PLAYER_START => &["origin"],
        CLASS_ROOM_META => &["dir_path", "cell", "bounds", "label"],
        CLASS_PORTAL => &["origin", "wall", "kind", "target_dir", "label"],
        CLASS_FILE_PANE => &["origin", "file_path", "label"],
        CLASS_TRUNC_MARKER => &["origin", "dir_path"],
        _ => &[],
    }
}

fn int_list(v: &str, n: usize) -> bool {
    let toks: Vec<&str> = v.split(' ').collect();
    toks.len() == n && toks.iter().all(|t| parse_int(t).is_some())
}

fn value_well_formed(key: &str, value: &str) -> bool {
    match key {
        "origin" => int_list(value, 3),
        "cell" => int_list(value, 2),
        "bounds" => {
            int_list(value, 6) && {
                let v: Vec<i64> = value.split(' ').filter_map(parse_int).collect();
                (0..3).all(|i| v[i] < v[i + 3])
            }
        }
        "wall" => matches!(value, "north" | "east" | "west"),
        "kind" => matches!(value, "child" | "parent"),
        "truncated" => value == "1",
        _ => true,
    }
}

/// Structural and cross-entity checks. Empty iff the document is valid.
pub fn validate(doc: &MapDocument) -> Vec<Diagnostic> {
    use Diagnostic::*;
    let mut out = Vec::new();
    if doc.version != FORMAT_VERSION {
        out.push(UnsupportedVersion(doc.version));
    }
    if doc.entities.is_empty() {
        out.push(NoEntities);
        return out;
    }

    let worldspawns: Vec<usize> = doc
        .entities
        .iter()
        .enumerate()
        .filter(|(_, e)| e.classname() == Some(CLASS_WORLDSPAWN))
        .map(|(i, _)| i)
        .collect();
    match worldspawns.split_first() {
        None => out.push(MissingWorldspawn),
        Some((&first, rest)) => {
            if first != 0 {
                out.push(WorldspawnNotFirst { entity: first });
            }
            out.extend(rest.iter().map(|&entity| ExtraWorldspawn { entity }));
        }
    }

    let mut rooms = BTreeSet::new();
    let mut last_rank = 0u8;
    let mut player_starts = 0;
    for (i, e) in doc.entities.iter().enumerate() {
        let mut seen = HashSet::new();
        for (k, v) in &e.kv {
            if !valid_key(k) {
                out.push(InvalidKey {
                    entity: i,
                    key: k.clone(),
                });
            }
            if !valid_value(v) {
                out.push(InvalidValue {
                    entity: i,
                    key: k.clone(),
                });
            }
            if !seen.insert(k.as_str()) {
                out.push(DuplicateKey {
                    entity: i,
                    key: k.clone(),
                });
            }
        }
        for (b, brush) in e.brushes.iter().enumerate() {
            if !valid_texture(&brush.texture) {
                out.push(InvalidTexture {
                    entity: i,
                    brush: b,
                });
            }
            if !brush.is_closed_box() {
                out.push(DegenerateBrush {
                    entity: i,
                    brush: b,
                });
            }
        }
        let Some(class) = e.classname() else {
            out.push(MissingClassname { entity: i });
            continue;
        };
        let Some(rank) = class_rank(class) else {
            out.push(UnknownClass {
                entity: i,
                classname: class.to_owned(),
            });
            continue;
        };
        if rank < last_rank {
            out.push(OutOfOrder { entity: i });
        }
        last_rank = last_rank.max(rank);
        if class == CLASS_PLAYER_START {
            player_starts += 1;
        }
        for &key in required_keys(class) {
            match e.get(key) {
                None => out.push(MissingKey { entity: i, key }),
                Some(v) if !value_well_formed(key, v) => {
                    out.push(MalformedValue { entity: i, key })
                }
                Some(_) => {}
            }
        }
        if let Some(v) = e.get("truncated") {
            if class == CLASS_ROOM_META && !value_well_formed("truncated", v) {
                out.push(MalformedValue {
                    entity: i,
                    key: "truncated",
                });
            }
        }
        if class == CLASS_ROOM_META {
            if let Some(dir) = e.get("dir_path") {
                if !rooms.insert(dir) {
                    out.push(DuplicateRoom {
                        entity: i,
                        dir_path: dir.to_owned(),
                    });
                }
            }
        }
    }

    for (i, e) in doc.entities.iter().enumerate() {
        match e.classname() {
            Some(CLASS_PORTAL) => {
                if let Some(t) = e.get("target_dir") {
                    if !rooms.contains(t) {
                        out.push(DanglingPortal {
                            entity: i,
                            target_dir: t.to_owned(),
                        });
                    }
                }
            }
            Some(CLASS_TRUNC_MARKER) => {
                if let Some(d) = e.get("dir_path") {
                    if !rooms.contains(d) {
                        out.push(DanglingMarker {
                            entity: i,
                            dir_path: d.to_owned(),
                        });
                    }
                }
            }
            _ => {}
        }
    }

    if player_starts != 1 {
        out.push(PlayerStartCount {
            count: player_starts,
        });
    }
    out
}
