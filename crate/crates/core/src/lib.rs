//! Directory trees as walkable 3D worlds.
//!
//! A directory becomes a rectangular room, subdirectories become transporters
//! on its north and east walls, the parent directory a transporter on the
//! west wall, and files hover as glass panes. The crate captures snapshots
//! ([`fs_model`]), turns them into geometry and `.rmap` map files
//! ([`worldgen`], [`mapformat`]), runs file-manager operations inside a
//! sandbox ([`fileops`]) and serves the world to a first-person client over
//! a line-framed JSON protocol ([`session`], [`server`], [`protocol`]).

pub mod cli;
pub mod fileops;
pub mod fs_model;
pub mod mapformat;
pub mod par;
pub mod protocol;
pub mod server;
pub mod session;
pub mod simulate;
pub mod vfs;
pub mod worldgen;

pub use par::Execution;
