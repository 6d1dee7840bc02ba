//! On-disk cache of overlap matrices.
//!
//! A file holds one [`OverlapMatrix`] together with the key text it was
//! stored under; the file name is a 64-bit FNV-1a hash of that text. Bumping
//! [`CACHE_VERSION`] invalidates every existing entry.

use std::fs;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::overlap::{OverlapMatrix, OverlapSource, Spectrum};

pub const CACHE_VERSION: u32 = 1;
const MAGIC: &[u8; 8] = b"SQOVLP\0\0";

#[derive(Debug, Clone)]
pub struct OverlapCache {
    dir: PathBuf,
}

impl OverlapCache {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        Self { dir: dir.into() }
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    /// Loads the matrix stored under `key`, or builds and stores it. The
    /// flag is true on a hit.
    pub fn get_or_build<K, F>(&self, key: &K, source: OverlapSource, build: F) -> Result<(OverlapMatrix, bool)>
    where
        K: Serialize,
        F: FnOnce() -> Result<OverlapMatrix>,
    {
        let text = key_text(key)?;
        let path = self.dir.join(format!("{:016x}.ovl", fnv1a(text.as_bytes())));
        if let Ok(Some(u)) = load(&path, &text, source) {
            return Ok((u, true));
        }
        let u = build()?;
        fs::create_dir_all(&self.dir)?;
        // write then rename so a concurrent reader never sees half a file
        let tmp = path.with_extension("tmp");
        store(&tmp, &text, &u)?;
        fs::rename(&tmp, &path)?;
        Ok((u, false))
    }
}

fn key_text<K: Serialize>(key: &K) -> Result<String> {
    let body = serde_json::to_string(key).map_err(|e| Error::Io(std::io::Error::other(e)))?;
    Ok(format!("v{CACHE_VERSION}/{}/{body}", env!("CARGO_PKG_VERSION")))
}

fn fnv1a(bytes: &[u8]) -> u64 {
    bytes.iter().fold(0xcbf2_9ce4_8422_2325, |h, &b| (h ^ b as u64).wrapping_mul(0x0100_0000_01b3))
}

fn store(path: &Path, key: &str, u: &OverlapMatrix) -> Result<()> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    w.write_all(MAGIC)?;
    w.write_all(&CACHE_VERSION.to_le_bytes())?;
    w.write_all(&(key.len() as u64).to_le_bytes())?;
    w.write_all(key.as_bytes())?;
    for v in [u.rows() as u64, u.cols() as u64, u.rule_order as u64, u.initial.shift as u64, u.final_spectrum.shift as u64] {
        w.write_all(&v.to_le_bytes())?;
    }
    let scalars = [u.initial.scale, u.final_spectrum.scale];
    let blocks = [&scalars[..], u.entries.as_slice(), &u.completeness_defect, u.tail_weight.as_slice(), u.tail_energy.as_slice()];
    for block in blocks {
        for v in block {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

/// `Ok(None)` when the file is absent, stale or stored under another key.
fn load(path: &Path, key: &str, source: OverlapSource) -> Result<Option<OverlapMatrix>> {
    let Ok(file) = fs::File::open(path) else { return Ok(None) };
    let mut r = BufReader::new(file);
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Ok(None);
    }
    let mut b4 = [0u8; 4];
    r.read_exact(&mut b4)?;
    if u32::from_le_bytes(b4) != CACHE_VERSION {
        return Ok(None);
    }
    let len = read_u64(&mut r)? as usize;
    if len != key.len() {
        return Ok(None);
    }
    let mut stored = vec![0u8; len];
    r.read_exact(&mut stored)?;
    if stored != key.as_bytes() {
        return Ok(None);
    }
    let rows = read_u64(&mut r)? as usize;
    let cols = read_u64(&mut r)? as usize;
    let rule_order = read_u64(&mut r)? as usize;
    let initial_shift = read_u64(&mut r)? as usize;
    let final_shift = read_u64(&mut r)? as usize;
    let scales = read_f64s(&mut r, 2)?;
    let entries = DMatrix::from_vec(rows, cols, read_f64s(&mut r, rows * cols)?);
    let completeness_defect = read_f64s(&mut r, rows)?;
    let tail_weight = DMatrix::from_vec(rows, rows, read_f64s(&mut r, rows * rows)?);
    let tail_energy = DMatrix::from_vec(rows, rows, read_f64s(&mut r, rows * rows)?);
    Ok(Some(OverlapMatrix {
        source,
        entries,
        completeness_defect,
        initial: Spectrum { scale: scales[0], shift: initial_shift },
        final_spectrum: Spectrum { scale: scales[1], shift: final_shift },
        tail_weight,
        tail_energy,
        rule_order,
    }))
}

fn read_u64(r: &mut impl Read) -> Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

fn read_f64s(r: &mut impl Read, count: usize) -> Result<Vec<f64>> {
    let mut bytes = vec![0u8; count * 8];
    r.read_exact(&mut bytes)?;
    Ok(bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect())
}
