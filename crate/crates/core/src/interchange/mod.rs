//! Shared-memory transform table: one writer process overwrites every node's
//! world matrix each tick, one reader process takes consistent snapshots.
//!
//! Byte layout (all little-endian):
//!
//! ```text
//! 0   u32  magic 0x41564931
//! 4   u32  version (1)
//! 8   u32  node_count
//! 12  u32  reserved (0)
//! 16  u64  generation (even = stable, odd = write in progress)
//! 24  40 B lock slot (u32 owner pid at 24, rest zero)
//! 64  node_count × 128 B records: 64 B zero-padded UTF-8 name, 16 × f32 column-major matrix
//! ```

mod lock;
mod region;

use std::fmt::Write as _;
use std::path::PathBuf;

use crate::math::Mat4;

pub use region::{attach_table, create_table, CreateMode, TableReader, TableWriter, READ_ATTEMPTS};

pub const MAGIC: u32 = 0x4156_4931;
pub const VERSION: u32 = 1;
pub const HEADER_SIZE: usize = 64;
pub const RECORD_SIZE: usize = 128;
pub const NAME_SIZE: usize = 64;
pub(crate) const GENERATION_OFFSET: usize = 16;
pub(crate) const LOCK_OFFSET: usize = 24;

pub fn region_size(node_count: usize) -> usize {
    HEADER_SIZE + RECORD_SIZE * node_count
}

/// Backing file of a named region.
pub fn region_path(name: &str) -> PathBuf {
    PathBuf::from("/dev/shm").join(name)
}

#[derive(Debug, thiserror::Error)]
pub enum InterchangeError {
    #[error("invalid region name {0:?}")]
    InvalidRegionName(String),
    #[error("invalid node name {0:?}: must be 1..=64 bytes of UTF-8 without NUL")]
    InvalidNodeName(String),
    #[error("duplicate node name {0:?}")]
    DuplicateName(String),
    #[error("node {0:?} is not in the table roster")]
    UnknownName(String),
    #[error("region {path} already exists")]
    Exists { path: String },
    #[error("region {path}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("incompatible region: {0}")]
    Incompatible(String),
    #[error("no consistent snapshot after {0} attempts")]
    Contention(usize),
    #[error("timed out waiting for the region lock")]
    LockTimeout,
}

/// A consistent copy of the table at one generation.
#[derive(Debug, Clone, PartialEq)]
pub struct TransformSnapshot {
    pub generation: u64,
    pub transforms: Vec<(String, Mat4)>,
}

impl TransformSnapshot {
    pub fn get(&self, name: &str) -> Option<&Mat4> {
        self.transforms.iter().find(|(n, _)| n == name).map(|(_, m)| m)
    }
}

/// Deterministic pose script: node `k` gets `Translate(k, 0, 0) · RotateZ(0.1·t + k)`.
pub fn physics_stub_step(t: u64, roster: &[String]) -> Vec<(String, Mat4)> {
    roster
        .iter()
        .enumerate()
        .map(|(k, name)| {
            let k = k as f64;
            let m = Mat4::translation(crate::math::Vec3::new(k, 0.0, 0.0)) * Mat4::rotation_z(0.1 * t as f64 + k);
            (name.clone(), m)
        })
        .collect()
}

/// Tick whose poses were published at `generation`, assuming the writer
/// started at tick 0 and wrote once per tick.
pub fn tick_for_generation(generation: u64) -> Option<u64> {
    (generation >= 2 && generation.is_multiple_of(2)).then(|| generation / 2 - 1)
}

/// `offset: xx xx ...` lines, 16 bytes each.
pub fn hex_dump(bytes: &[u8]) -> String {
    let mut out = String::new();
    for (i, chunk) in bytes.chunks(16).enumerate() {
        let _ = write!(out, "{:08x}:", i * 16);
        for b in chunk {
            let _ = write!(out, " {b:02x}");
        }
        out.push('\n');
    }
    out
}

pub(crate) fn validate_roster(names: &[String]) -> Result<(), InterchangeError> {
    let mut seen = std::collections::HashSet::new();
    for n in names {
        if n.is_empty() || n.len() > NAME_SIZE || n.contains('\0') {
            return Err(InterchangeError::InvalidNodeName(n.clone()));
        }
        if !seen.insert(n.as_str()) {
            return Err(InterchangeError::DuplicateName(n.clone()));
        }
    }
    Ok(())
}

pub(crate) fn validate_region_name(name: &str) -> Result<(), InterchangeError> {
    if name.is_empty() || name.contains('/') || name == "." || name == ".." || name.contains('\0') {
        return Err(InterchangeError::InvalidRegionName(name.to_string()));
    }
    Ok(())
}
