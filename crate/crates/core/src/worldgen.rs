//! Snapshot to world geometry, and world to map document.
//!
//! Axes: +x east, +y north, +z up, integer world units. Every room's floor
//! sits at z = 0. Child transporters go on the NORTH and EAST walls, the
//! parent transporter on WEST, SOUTH stays empty. Files hover as panes in a
//! near-square grid east of a clear aisle along the west wall. Rooms occupy
//! uniform cells of a row-major grid in BFS order.

use std::collections::HashMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fs_model::{DirNode, FsSnapshot};
use crate::mapformat::{
    escape_value, Brush, Entity, MapDocument, CLASS_FILE_PANE, CLASS_PLAYER_START, CLASS_PORTAL,
    CLASS_ROOM_META, CLASS_TRUNC_MARKER, CLASS_WORLDSPAWN,
};
use crate::par::{self, Execution};

pub const PORTAL_WIDTH: i64 = 64;
pub const PORTAL_HEIGHT: i64 = 96;
/// How far a transporter's trigger volume reaches into the room.
pub const PORTAL_DEPTH: i64 = 8;
pub const PANE_WIDTH: i64 = 48;
pub const PANE_HEIGHT: i64 = 64;
pub const PANE_CENTER_HEIGHT: i64 = 64;
/// Eye-level-ish spawn height above the floor.
pub const SPAWN_HEIGHT: i64 = 40;
/// Clearance kept between the pane grid and the north, south and east walls.
pub const PANE_WALL_CLEARANCE: i64 = 2 * PORTAL_DEPTH;
pub const MAX_ROOM_SIDE: i64 = 1 << 16;

pub const TEXTURE_FLOOR: &str = "floor_default";
pub const TEXTURE_CEILING: &str = "ceiling_default";
pub const TEXTURE_WALL: &str = "wall_default";

#[derive(Debug, Error, PartialEq, Eq)]
pub enum WorldGenError {
    #[error("invalid layout parameters: {0}")]
    InvalidParams(String),
    #[error("contents of {dir} need a {side}-unit wall, above the {max} limit")]
    LayoutOverflow { dir: PathBuf, side: i64, max: i64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayoutParams {
    pub portal_pitch: i64,
    pub pane_pitch: i64,
    pub wall_thickness: i64,
    pub ceiling_height: i64,
    pub min_interior_side: i64,
    pub cell_margin: i64,
}

impl Default for LayoutParams {
    fn default() -> Self {
        Self {
            portal_pitch: 128,
            pane_pitch: 96,
            wall_thickness: 16,
            ceiling_height: 192,
            min_interior_side: 256,
            cell_margin: 128,
        }
    }
}

impl LayoutParams {
    pub fn validate(&self) -> Result<(), WorldGenError> {
        let bad = |m: &str| Err(WorldGenError::InvalidParams(m.to_owned()));
        let all = [
            self.portal_pitch,
            self.pane_pitch,
            self.wall_thickness,
            self.ceiling_height,
            self.min_interior_side,
            self.cell_margin,
        ];
        if all.iter().any(|&v| v <= 0) {
            return bad("all dimensions must be positive");
        }
        if self.portal_pitch < PORTAL_WIDTH {
            return bad("portal_pitch is narrower than a portal");
        }
        if self.pane_pitch < PANE_WIDTH {
            return bad("pane_pitch is narrower than a pane");
        }
        if self.ceiling_height <= PORTAL_HEIGHT.max(PANE_CENTER_HEIGHT + PANE_HEIGHT / 2) {
            return bad("ceiling_height must clear portals and panes");
        }
        Ok(())
    }
}

/// Closed axis-aligned box.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Aabb {
    pub min: [i64; 3],
    pub max: [i64; 3],
}

impl Aabb {
    pub fn new(min: [i64; 3], max: [i64; 3]) -> Self {
        Self { min, max }
    }

    pub fn translated(&self, by: [i64; 3]) -> Self {
        Self {
            min: add(self.min, by),
            max: add(self.max, by),
        }
    }

    /// Closed-interval overlap on every axis (touching counts).
    pub fn intersects(&self, other: &Aabb) -> bool {
        (0..3).all(|i| self.min[i] <= other.max[i] && other.min[i] <= self.max[i])
    }

    /// `self` lies inside `outer` with no face touching.
    pub fn strictly_inside(&self, outer: &Aabb) -> bool {
        (0..3).all(|i| self.min[i] > outer.min[i] && self.max[i] < outer.max[i])
    }

    pub fn contains_point_strictly(&self, p: [i64; 3]) -> bool {
        (0..3).all(|i| p[i] > self.min[i] && p[i] < self.max[i])
    }

    /// Integer center (floor division on odd extents).
    pub fn center(&self) -> [i64; 3] {
        [0, 1, 2].map(|i| (self.min[i] + self.max[i]).div_euclid(2))
    }

    pub fn size(&self) -> [i64; 3] {
        [0, 1, 2].map(|i| self.max[i] - self.min[i])
    }
}

fn add(a: [i64; 3], b: [i64; 3]) -> [i64; 3] {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Wall {
    North,
    East,
    West,
}

impl Wall {
    pub fn as_str(&self) -> &'static str {
        match self {
            Wall::North => "north",
            Wall::East => "east",
            Wall::West => "west",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PortalKind {
    Child,
    Parent,
}

impl PortalKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            PortalKind::Child => "child",
            PortalKind::Parent => "parent",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Portal {
    pub id: String,
    pub wall: Wall,
    pub kind: PortalKind,
    pub footprint: Aabb,
    pub target_dir: PathBuf,
    pub target_room: String,
    pub label: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FilePane {
    pub id: String,
    pub file_path: PathBuf,
    pub center: [i64; 3],
    pub width: i64,
    pub height: i64,
    pub label: String,
}

impl FilePane {
    /// Zero-thickness quad in the x/z plane.
    pub fn bounds(&self) -> Aabb {
        let [x, y, z] = self.center;
        Aabb::new(
            [x - self.width / 2, y, z - self.height / 2],
            [x + self.width / 2, y, z + self.height / 2],
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Room {
    pub id: String,
    pub dir_path: PathBuf,
    /// (row, col) in the room grid.
    pub cell: (usize, usize),
    pub interior: Aabb,
    /// Arrival point just inside the west wall.
    pub entry: [i64; 3],
    pub child_portals: Vec<Portal>,
    pub parent_portal: Option<Portal>,
    pub panes: Vec<FilePane>,
    pub label: String,
    pub truncated_marker: bool,
}

impl Room {
    pub fn portals(&self) -> impl Iterator<Item = &Portal> {
        self.child_portals.iter().chain(self.parent_portal.iter())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlayerStart {
    pub room_id: String,
    pub position: [i64; 3],
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct World {
    pub rooms: Vec<Room>,
    pub player_start: PlayerStart,
    pub root_room_id: String,
}

impl World {
    pub fn room(&self, id: &str) -> Option<&Room> {
        self.rooms.iter().find(|r| r.id == id)
    }

    pub fn room_by_dir(&self, dir: &Path) -> Option<&Room> {
        self.rooms.iter().find(|r| r.dir_path == dir)
    }

    pub fn root_room(&self) -> &Room {
        &self.rooms[0]
    }

    pub fn portal_count(&self) -> usize {
        self.rooms.iter().map(|r| r.portals().count()).sum()
    }

    pub fn pane_count(&self) -> usize {
        self.rooms.iter().map(|r| r.panes.len()).sum()
    }
}

/// Children split across the two child walls.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WallSplit<'a> {
    pub north: Vec<&'a DirNode>,
    pub east: Vec<&'a DirNode>,
}

/// First ceil(n/2) children on NORTH, the rest on EAST, order preserved.
pub fn assign_portal_walls(children: &[DirNode]) -> WallSplit<'_> {
    let split = children.len().div_ceil(2);
    WallSplit {
        north: children[..split].iter().collect(),
        east: children[split..].iter().collect(),
    }
}

/// Room geometry relative to an interior whose min corner is the origin.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RoomLayout {
    pub size: [i64; 3],
    pub north: Vec<Aabb>,
    pub east: Vec<Aabb>,
    /// Parent slot; only used for non-root rooms.
    pub west: Aabb,
    pub pane_centers: Vec<[i64; 3]>,
    /// (cols, rows) of the pane grid.
    pub pane_grid: (usize, usize),
    pub entry: [i64; 3],
}

fn round_up(v: i64, step: i64) -> i64 {
    (v + step - 1).div_euclid(step) * step
}

fn ceil_sqrt(n: usize) -> usize {
    let mut c = 0;
    while c * c < n {
        c += 1;
    }
    c
}

/// Centers of `n` evenly pitched slots centered on a wall of length `len`.
fn slot_centers(len: i64, n: usize, pitch: i64) -> impl Iterator<Item = i64> {
    let start = (len - n as i64 * pitch).div_euclid(2);
    (0..n as i64).map(move |i| start + i * pitch + pitch / 2)
}

pub fn layout_room(
    dir: &DirNode,
    split: &WallSplit<'_>,
    params: &LayoutParams,
) -> Result<RoomLayout, WorldGenError> {
    let files = dir.files.len();
    let cols = ceil_sqrt(files);
    let rows = if cols == 0 { 0 } else { files.div_ceil(cols) };
    let pitch = params.pane_pitch;
    let north_slots = split.north.len().max(1) as i64;
    let east_slots = split.east.len().max(1) as i64;

    let need_x = (north_slots * params.portal_pitch)
        .max(pitch + cols as i64 * pitch + PANE_WALL_CLEARANCE)
        .max(params.min_interior_side);
    let need_y = (east_slots * params.portal_pitch)
        .max(rows as i64 * pitch + 2 * PANE_WALL_CLEARANCE)
        .max(params.min_interior_side);
    let sx = round_up(need_x, params.portal_pitch);
    let sy = round_up(need_y, params.portal_pitch);
    let side = sx.max(sy);
    if side > MAX_ROOM_SIDE {
        return Err(WorldGenError::LayoutOverflow {
            dir: dir.path.clone(),
            side,
            max: MAX_ROOM_SIDE,
        });
    }
    let sz = params.ceiling_height;
    let half = PORTAL_WIDTH / 2;

    let north = slot_centers(sx, split.north.len(), params.portal_pitch)
        .map(|cx| {
            Aabb::new(
                [cx - half, sy - PORTAL_DEPTH, 0],
                [cx + half, sy, PORTAL_HEIGHT],
            )
        })
        .collect();
    // Listed left to right for someone facing the wall, i.e. north to south.
    let east = slot_centers(sy, split.east.len(), params.portal_pitch)
        .map(|c| sy - c)
        .map(|cy| {
            Aabb::new(
                [sx - PORTAL_DEPTH, cy - half, 0],
                [sx, cy + half, PORTAL_HEIGHT],
            )
        })
        .collect();
    let wy = sy / 2;
    let west = Aabb::new([0, wy - half, 0], [PORTAL_DEPTH, wy + half, PORTAL_HEIGHT]);

    let grid_x0 = pitch;
    let grid_w = cols as i64 * pitch;
    let off_x = grid_x0 + (sx - PANE_WALL_CLEARANCE - grid_x0 - grid_w).div_euclid(2);
    let grid_h = rows as i64 * pitch;
    let off_y = PANE_WALL_CLEARANCE + (sy - 2 * PANE_WALL_CLEARANCE - grid_h).div_euclid(2);
    let pane_centers = (0..files)
        .map(|k| {
            let (row, col) = (k / cols, k % cols);
            [
                off_x + col as i64 * pitch + pitch / 2,
                off_y + row as i64 * pitch + pitch / 2,
                PANE_CENTER_HEIGHT,
            ]
        })
        .collect();

    Ok(RoomLayout {
        size: [sx, sy, sz],
        north,
        east,
        west,
        pane_centers,
        pane_grid: (cols, rows),
        entry: [pitch / 2, wy, SPAWN_HEIGHT],
    })
}

pub fn generate_world(
    snapshot: &FsSnapshot,
    params: &LayoutParams,
) -> Result<World, WorldGenError> {
    generate_world_with(snapshot, params, Execution::default())
}

pub fn generate_world_with(
    snapshot: &FsSnapshot,
    params: &LayoutParams,
    exec: Execution,
) -> Result<World, WorldGenError> {
    params.validate()?;
    let dirs = snapshot.dirs_bfs();
    let index: HashMap<&Path, usize> = dirs
        .iter()
        .enumerate()
        .map(|(i, d)| (d.path.as_path(), i))
        .collect();
    let mut parent: Vec<Option<usize>> = vec![None; dirs.len()];
    for (i, d) in dirs.iter().enumerate() {
        for sub in &d.subdirs {
            parent[index[sub.path.as_path()]] = Some(i);
        }
    }

    let layouts = par::map(exec, &dirs, |d| {
        layout_room(d, &assign_portal_walls(&d.subdirs), params)
    })
    .into_iter()
    .collect::<Result<Vec<_>, _>>()?;

    let grid_cols = ceil_sqrt(dirs.len()).max(1);
    let pad = 2 * params.wall_thickness + params.cell_margin;
    let cell_w = layouts.iter().map(|l| l.size[0]).max().unwrap_or(0) + pad;
    let cell_d = layouts.iter().map(|l| l.size[1]).max().unwrap_or(0) + pad;

    let indices: Vec<usize> = (0..dirs.len()).collect();
    let room_id = |i: usize| format!("r{i}");
    let rooms = par::map(exec, &indices, |&i| {
        let dir = dirs[i];
        let layout = &layouts[i];
        let cell = (i / grid_cols, i % grid_cols);
        let origin = [cell.1 as i64 * cell_w, cell.0 as i64 * cell_d, 0];
        let id = room_id(i);
        let split = assign_portal_walls(&dir.subdirs);

        let child = |wall: Wall, tag: char, k: usize, target: &DirNode, fp: &Aabb| Portal {
            id: format!("{id}.{tag}{k}"),
            wall,
            kind: PortalKind::Child,
            footprint: fp.translated(origin),
            target_dir: target.path.clone(),
            target_room: room_id(index[target.path.as_path()]),
            label: target.name.clone(),
        };
        let mut child_portals: Vec<Portal> = split
            .north
            .iter()
            .zip(&layout.north)
            .enumerate()
            .map(|(k, (t, fp))| child(Wall::North, 'n', k, t, fp))
            .collect();
        child_portals.extend(
            split
                .east
                .iter()
                .zip(&layout.east)
                .enumerate()
                .map(|(k, (t, fp))| child(Wall::East, 'e', k, t, fp)),
        );
        let parent_portal = parent[i].map(|p| Portal {
            id: format!("{id}.w"),
            wall: Wall::West,
            kind: PortalKind::Parent,
            footprint: layout.west.translated(origin),
            target_dir: dirs[p].path.clone(),
            target_room: room_id(p),
            label: dirs[p].name.clone(),
        });
        let panes = dir
            .files
            .iter()
            .zip(&layout.pane_centers)
            .enumerate()
            .map(|(k, (f, c))| FilePane {
                id: format!("{id}.f{k}"),
                file_path: f.path.clone(),
                center: add(*c, origin),
                width: PANE_WIDTH,
                height: PANE_HEIGHT,
                label: f.name.clone(),
            })
            .collect();

        Room {
            interior: Aabb::new(origin, add(origin, layout.size)),
            entry: add(layout.entry, origin),
            id,
            dir_path: dir.path.clone(),
            cell,
            child_portals,
            parent_portal,
            panes,
            label: dir.name.clone(),
            truncated_marker: dir.truncated,
        }
    });

    let root_room_id = rooms[0].id.clone();
    Ok(World {
        player_start: PlayerStart {
            room_id: root_room_id.clone(),
            position: rooms[0].entry,
        },
        root_room_id,
        rooms,
    })
}

/// Floor, ceiling, then north, south, east and west walls around `interior`.
pub fn room_shell(interior: &Aabb, wall: i64) -> [Brush; 6] {
    let [x0, y0, z0] = interior.min;
    let [x1, y1, z1] = interior.max;
    let (ox0, oy0, ox1, oy1) = (x0 - wall, y0 - wall, x1 + wall, y1 + wall);
    [
        Brush::new([ox0, oy0, z0 - wall], [ox1, oy1, z0], TEXTURE_FLOOR),
        Brush::new([ox0, oy0, z1], [ox1, oy1, z1 + wall], TEXTURE_CEILING),
        Brush::new([ox0, y1, z0], [ox1, oy1, z1], TEXTURE_WALL),
        Brush::new([ox0, oy0, z0], [ox1, y0, z1], TEXTURE_WALL),
        Brush::new([x1, y0, z0], [ox1, y1, z1], TEXTURE_WALL),
        Brush::new([ox0, y0, z0], [x0, y1, z1], TEXTURE_WALL),
    ]
}

fn triple(p: [i64; 3]) -> String {
    format!("{} {} {}", p[0], p[1], p[2])
}

fn text(path: &Path) -> String {
    escape_value(&path.to_string_lossy())
}

struct LoweredRoom {
    brushes: [Brush; 6],
    meta: Entity,
    portals: Vec<Entity>,
    panes: Vec<Entity>,
    marker: Option<Entity>,
}

fn lower_room(room: &Room, params: &LayoutParams) -> LoweredRoom {
    let b = &room.interior;
    let mut meta = Entity::new(CLASS_ROOM_META)
        .with("dir_path", text(&room.dir_path))
        .with("cell", format!("{} {}", room.cell.0, room.cell.1))
        .with("bounds", format!("{} {}", triple(b.min), triple(b.max)))
        .with("label", escape_value(&room.label));
    if room.truncated_marker {
        meta = meta.with("truncated", "1");
    }
    let mut portals: Vec<&Portal> = room.child_portals.iter().collect();
    portals.sort_by_key(|p| match p.wall {
        Wall::North => 0,
        Wall::East => 1,
        Wall::West => 2,
    });
    let portals = portals
        .into_iter()
        .chain(room.parent_portal.iter())
        .map(|p| {
            Entity::new(CLASS_PORTAL)
                .with("origin", triple(p.footprint.center()))
                .with("wall", p.wall.as_str())
                .with("kind", p.kind.as_str())
                .with("target_dir", text(&p.target_dir))
                .with("label", escape_value(&p.label))
        })
        .collect();
    let panes = room
        .panes
        .iter()
        .map(|p| {
            Entity::new(CLASS_FILE_PANE)
                .with("origin", triple(p.center))
                .with("file_path", text(&p.file_path))
                .with("label", escape_value(&p.label))
        })
        .collect();
    let marker = room.truncated_marker.then(|| {
        let c = b.center();
        Entity::new(CLASS_TRUNC_MARKER)
            .with(
                "origin",
                triple([
                    c[0],
                    b.min[1] + PANE_WALL_CLEARANCE,
                    b.min[2] + PORTAL_HEIGHT,
                ]),
            )
            .with("dir_path", text(&room.dir_path))
    });
    LoweredRoom {
        brushes: room_shell(b, params.wall_thickness),
        meta,
        portals,
        panes,
        marker,
    }
}

pub fn world_to_map(world: &World, params: &LayoutParams) -> MapDocument {
    world_to_map_with(world, params, Execution::default())
}

/// Entity order: worldspawn, player start, room_meta (BFS), portals (by room,
/// NORTH, EAST, WEST), file panes (by room, grid order), truncation markers.
pub fn world_to_map_with(world: &World, params: &LayoutParams, exec: Execution) -> MapDocument {
    let lowered = par::map(exec, &world.rooms, |r| lower_room(r, params));
    let mut worldspawn = Entity::new(CLASS_WORLDSPAWN);
    worldspawn.brushes = lowered
        .iter()
        .flat_map(|l| l.brushes.iter().cloned())
        .collect();

    let mut entities = Vec::with_capacity(
        2 + lowered
            .iter()
            .map(|l| 2 + l.portals.len() + l.panes.len())
            .sum::<usize>(),
    );
    entities.push(worldspawn);
    entities
        .push(Entity::new(CLASS_PLAYER_START).with("origin", triple(world.player_start.position)));
    let mut portals = Vec::new();
    let mut panes = Vec::new();
    let mut markers = Vec::new();
    for l in lowered {
        entities.push(l.meta);
        portals.extend(l.portals);
        panes.extend(l.panes);
        markers.extend(l.marker);
    }
    entities.extend(portals);
    entities.extend(panes);
    entities.extend(markers);
    MapDocument::new(entities)
}
