use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::os::unix::fs::MetadataExt;
use std::path::PathBuf;
use std::sync::atomic::{fence, AtomicU64, Ordering};
use std::time::Duration;

use memmap2::MmapMut;

use super::lock::LockWord;
use super::{
    region_path, region_size, validate_region_name, validate_roster, InterchangeError, TransformSnapshot, GENERATION_OFFSET, HEADER_SIZE,
    LOCK_OFFSET, MAGIC, NAME_SIZE, RECORD_SIZE, VERSION,
};
use crate::math::Mat4;

/// Bounded number of snapshot attempts per `read_frame`.
pub const READ_ATTEMPTS: usize = 1000;
/// Lock spins within one read attempt.
const READ_SPINS: usize = 2048;
const WRITE_LOCK_TIMEOUT: Duration = Duration::from_secs(2);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CreateMode {
    /// Fail if the region already exists.
    Exclusive,
    /// Take over and reinitialise an existing region.
    Reclaim,
}

fn io_err(path: &std::path::Path, source: std::io::Error) -> InterchangeError {
    InterchangeError::Io { path: path.display().to_string(), source }
}

struct Mapping {
    map: MmapMut,
    path: PathBuf,
}

impl Mapping {
    fn generation(&self) -> &AtomicU64 {
        // SAFETY: the mapping is page aligned and at least HEADER_SIZE long; offset 16 is 8-byte aligned.
        unsafe { AtomicU64::from_ptr(self.map.as_ptr().add(GENERATION_OFFSET) as *mut u64) }
    }

    fn lock(&self) -> LockWord<'_> {
        // SAFETY: as above; offset 24 is 4-byte aligned and lives as long as the mapping.
        unsafe { LockWord::from_ptr(self.map.as_ptr().add(LOCK_OFFSET) as *mut u8) }
    }
}

/// Writer side. Owns the region and removes it on drop.
pub struct TableWriter {
    mapping: Mapping,
    roster: Vec<String>,
    index: HashMap<String, usize>,
    /// Current matrix of every record, rewritten in full on each frame.
    current: Vec<[f32; 16]>,
}

fn identity_f32() -> [f32; 16] {
    Mat4::IDENTITY.m.map(|v| v as f32)
}

pub fn create_table(name: &str, roster: &[String], mode: CreateMode) -> Result<TableWriter, InterchangeError> {
    validate_region_name(name)?;
    validate_roster(roster)?;
    let path = region_path(name);
    let mut opts = OpenOptions::new();
    opts.read(true).write(true);
    match mode {
        CreateMode::Exclusive => opts.create_new(true),
        CreateMode::Reclaim => opts.create(true).truncate(true),
    };
    let file = opts.open(&path).map_err(|e| {
        if e.kind() == std::io::ErrorKind::AlreadyExists {
            InterchangeError::Exists { path: path.display().to_string() }
        } else {
            io_err(&path, e)
        }
    })?;
    let size = region_size(roster.len());
    file.set_len(size as u64).map_err(|e| io_err(&path, e))?;
    // SAFETY: the file was just sized by us; other processes only map it through this module.
    let map = unsafe { MmapMut::map_mut(&file) }.map_err(|e| io_err(&path, e))?;
    let mut w = TableWriter {
        mapping: Mapping { map, path },
        index: roster.iter().enumerate().map(|(i, n)| (n.clone(), i)).collect(),
        roster: roster.to_vec(),
        current: vec![identity_f32(); roster.len()],
    };
    w.initialise();
    Ok(w)
}

impl TableWriter {
    fn initialise(&mut self) {
        let m = &mut self.mapping.map;
        m.fill(0);
        m[0..4].copy_from_slice(&MAGIC.to_le_bytes());
        m[4..8].copy_from_slice(&VERSION.to_le_bytes());
        m[8..12].copy_from_slice(&(self.roster.len() as u32).to_le_bytes());
        for (i, name) in self.roster.iter().enumerate() {
            let at = HEADER_SIZE + i * RECORD_SIZE;
            m[at..at + name.len()].copy_from_slice(name.as_bytes());
        }
        self.write_records();
        self.mapping.map.flush_async().ok();
    }

    fn write_records(&mut self) {
        let m = &mut self.mapping.map;
        for (i, mat) in self.current.iter().enumerate() {
            let at = HEADER_SIZE + i * RECORD_SIZE + NAME_SIZE;
            for (j, v) in mat.iter().enumerate() {
                m[at + 4 * j..at + 4 * j + 4].copy_from_slice(&v.to_le_bytes());
            }
        }
    }

    pub fn roster(&self) -> &[String] {
        &self.roster
    }

    pub fn generation(&self) -> u64 {
        self.mapping.generation().load(Ordering::Acquire)
    }

    /// Updates the named matrices and rewrites the whole table under the lock.
    /// Unknown names are rejected before anything is touched.
    pub fn write_frame<S: AsRef<str>>(&mut self, transforms: &[(S, Mat4)]) -> Result<(), InterchangeError> {
        let mut slots = Vec::with_capacity(transforms.len());
        for (name, _) in transforms {
            let name = name.as_ref();
            let &i = self.index.get(name).ok_or_else(|| InterchangeError::UnknownName(name.to_string()))?;
            slots.push(i);
        }
        if !self.mapping.lock().lock_timeout(WRITE_LOCK_TIMEOUT) {
            return Err(InterchangeError::LockTimeout);
        }
        for (&i, (_, m)) in slots.iter().zip(transforms) {
            self.current[i] = m.m.map(|v| v as f32);
        }
        let g = self.mapping.generation().load(Ordering::Relaxed);
        self.mapping.generation().store(g + 1, Ordering::Relaxed);
        fence(Ordering::Release);
        self.write_records();
        self.mapping.generation().store(g + 2, Ordering::Release);
        self.mapping.lock().unlock();
        Ok(())
    }

    /// Raw bytes of the whole region.
    pub fn region_bytes(&self) -> Vec<u8> {
        self.mapping.map.to_vec()
    }
}

impl Drop for TableWriter {
    fn drop(&mut self) {
        let _ = std::fs::remove_file(&self.mapping.path);
    }
}

/// Reader side. Never writes anything but the lock word.
pub struct TableReader {
    mapping: Mapping,
    names: Vec<String>,
    identity: (u64, u64),
}

pub fn attach_table(name: &str) -> Result<TableReader, InterchangeError> {
    validate_region_name(name)?;
    let path = region_path(name);
    let file: File = OpenOptions::new().read(true).write(true).open(&path).map_err(|e| io_err(&path, e))?;
    let meta = file.metadata().map_err(|e| io_err(&path, e))?;
    if (meta.len() as usize) < HEADER_SIZE {
        return Err(InterchangeError::Incompatible(format!("region is {} bytes, smaller than the header", meta.len())));
    }
    // SAFETY: see create_table.
    let map = unsafe { MmapMut::map_mut(&file) }.map_err(|e| io_err(&path, e))?;
    let u32_at = |o: usize| u32::from_le_bytes(map[o..o + 4].try_into().unwrap());
    let magic = u32_at(0);
    if magic != MAGIC {
        return Err(InterchangeError::Incompatible(format!("magic {magic:#010x}, expected {MAGIC:#010x}")));
    }
    let version = u32_at(4);
    if version != VERSION {
        return Err(InterchangeError::Incompatible(format!("version {version}, expected {VERSION}")));
    }
    let count = u32_at(8) as usize;
    if map.len() != region_size(count) {
        return Err(InterchangeError::Incompatible(format!("region is {} bytes but header declares {count} nodes", map.len())));
    }
    let mut names = Vec::with_capacity(count);
    for i in 0..count {
        let at = HEADER_SIZE + i * RECORD_SIZE;
        let raw = &map[at..at + NAME_SIZE];
        let len = raw.iter().position(|&b| b == 0).unwrap_or(NAME_SIZE);
        let name = std::str::from_utf8(&raw[..len]).map_err(|_| InterchangeError::Incompatible(format!("record {i} name is not UTF-8")))?;
        names.push(name.to_string());
    }
    Ok(TableReader { mapping: Mapping { map, path }, names, identity: (meta.dev(), meta.ino()) })
}

impl TableReader {
    pub fn names(&self) -> &[String] {
        &self.names
    }

    /// False once the writer has removed or replaced the region.
    pub fn is_attached(&self) -> bool {
        std::fs::metadata(&self.mapping.path).is_ok_and(|m| (m.dev(), m.ino()) == self.identity)
    }

    pub fn generation(&self) -> u64 {
        self.mapping.generation().load(Ordering::Acquire)
    }

    /// Copies the table under the lock, accepting only a stable generation
    /// that is unchanged across the copy.
    pub fn read_frame(&self) -> Result<TransformSnapshot, InterchangeError> {
        let count = self.names.len();
        let mut buf = vec![0u8; count * RECORD_SIZE];
        let gen = self.mapping.generation();
        let lock = self.mapping.lock();
        for _ in 0..READ_ATTEMPTS {
            if !lock.lock_spinning(READ_SPINS) {
                continue;
            }
            let g1 = gen.load(Ordering::Acquire);
            if g1 % 2 == 1 {
                lock.unlock();
                std::thread::yield_now();
                continue;
            }
            // SAFETY: in-bounds copy out of the mapping; the lock excludes the writer.
            unsafe {
                std::ptr::copy_nonoverlapping(self.mapping.map.as_ptr().add(HEADER_SIZE), buf.as_mut_ptr(), buf.len());
            }
            fence(Ordering::Acquire);
            let g2 = gen.load(Ordering::Relaxed);
            lock.unlock();
            if g1 != g2 {
                continue;
            }
            return Ok(TransformSnapshot { generation: g1, transforms: self.decode(&buf) });
        }
        Err(InterchangeError::Contention(READ_ATTEMPTS))
    }

    fn decode(&self, buf: &[u8]) -> Vec<(String, Mat4)> {
        self.names
            .iter()
            .enumerate()
            .map(|(i, name)| {
                let at = i * RECORD_SIZE + NAME_SIZE;
                let mut m = [0.0f64; 16];
                for (j, v) in m.iter_mut().enumerate() {
                    let o = at + 4 * j;
                    *v = f32::from_le_bytes(buf[o..o + 4].try_into().unwrap()) as f64;
                }
                (name.clone(), Mat4::from_cols_array(m))
            })
            .collect()
    }

    /// Raw bytes of the whole region.
    pub fn region_bytes(&self) -> Vec<u8> {
        self.mapping.map.to_vec()
    }
}
