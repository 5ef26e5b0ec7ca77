//! Byte layout of `vectors.gpvs`. All integers are little-endian.
//!
//! ```text
//! magic        4 bytes   "GPVS"
//! version      u32
//! dim          u32
//! frame_count  u64
//! id_len       u32       byte length of the embedder id
//! embedder_id  id_len bytes, UTF-8
//! frame table  frame_count x { video_id u32, frame_index u32, timestamp_ms u32 }
//! vectors      frame_count x dim x f32
//! ```

use std::io::{self, Write};
use std::path::Path;

use super::{FrameRecord, Store};
use crate::error::{Error, Result};

pub const MAGIC: [u8; 4] = *b"GPVS";
pub const FORMAT_VERSION: u32 = 1;
pub const FRAME_RECORD_LEN: usize = 12;

const FIXED_HEADER_LEN: usize = 4 + 4 + 4 + 8 + 4;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Layout {
    pub version: u32,
    pub dim: usize,
    pub count: usize,
    pub embedder_id: String,
    pub table_offset: usize,
    pub vectors_offset: usize,
}

pub fn encoded_len(embedder_id: &str, count: usize, dim: usize) -> usize {
    FIXED_HEADER_LEN + embedder_id.len() + count * FRAME_RECORD_LEN + count * dim * 4
}

pub fn write_vectors_file<W: Write>(w: &mut W, store: &Store) -> io::Result<()> {
    let id = store.embedder().backend_id.as_bytes();
    w.write_all(&MAGIC)?;
    w.write_all(&FORMAT_VERSION.to_le_bytes())?;
    w.write_all(&(store.dim() as u32).to_le_bytes())?;
    w.write_all(&(store.total_frames() as u64).to_le_bytes())?;
    w.write_all(&(id.len() as u32).to_le_bytes())?;
    w.write_all(id)?;
    let mut rec = [0u8; FRAME_RECORD_LEN];
    for f in store.frames() {
        rec[0..4].copy_from_slice(&f.video_id.to_le_bytes());
        rec[4..8].copy_from_slice(&f.frame_index.to_le_bytes());
        rec[8..12].copy_from_slice(&f.timestamp_ms.to_le_bytes());
        w.write_all(&rec)?;
    }
    if cfg!(target_endian = "little") {
        w.write_all(bytemuck::cast_slice(store.vectors()))?;
    } else {
        for x in store.vectors() {
            w.write_all(&x.to_le_bytes())?;
        }
    }
    Ok(())
}

fn u32_at(b: &[u8], at: usize) -> u32 {
    u32::from_le_bytes(b[at..at + 4].try_into().unwrap())
}

fn u64_at(b: &[u8], at: usize) -> u64 {
    u64::from_le_bytes(b[at..at + 8].try_into().unwrap())
}

/// Validates the header and that the file length matches it exactly.
pub fn parse_header(bytes: &[u8], path: &Path) -> Result<Layout> {
    if bytes.len() < 4 || bytes[..4] != MAGIC {
        return Err(Error::BadMagic(path.to_path_buf()));
    }
    if bytes.len() < 8 {
        return Err(Error::CorruptManifest("truncated header".into()));
    }
    let version = u32_at(bytes, 4);
    if version != FORMAT_VERSION {
        return Err(Error::VersionUnsupported(version));
    }
    if bytes.len() < FIXED_HEADER_LEN {
        return Err(Error::CorruptManifest("truncated header".into()));
    }
    let dim = u32_at(bytes, 8) as usize;
    let count = usize::try_from(u64_at(bytes, 12))
        .map_err(|_| Error::CorruptManifest("frame count overflows usize".into()))?;
    let id_len = u32_at(bytes, 20) as usize;
    if dim == 0 {
        return Err(Error::CorruptManifest("dim is zero".into()));
    }
    let table_offset = FIXED_HEADER_LEN
        .checked_add(id_len)
        .filter(|&o| o <= bytes.len())
        .ok_or_else(|| Error::CorruptManifest("truncated embedder id".into()))?;
    let embedder_id = std::str::from_utf8(&bytes[FIXED_HEADER_LEN..table_offset])
        .map_err(|_| Error::CorruptManifest("embedder id is not UTF-8".into()))?
        .to_string();
    let expected = count
        .checked_mul(FRAME_RECORD_LEN)
        .and_then(|t| count.checked_mul(dim)?.checked_mul(4)?.checked_add(t))
        .and_then(|body| body.checked_add(table_offset))
        .ok_or_else(|| Error::CorruptManifest("header sizes overflow".into()))?;
    if bytes.len() != expected {
        return Err(Error::CorruptManifest(format!(
            "vector file is {} bytes, header implies {expected}",
            bytes.len()
        )));
    }
    Ok(Layout {
        version,
        dim,
        count,
        embedder_id,
        table_offset,
        vectors_offset: table_offset + count * FRAME_RECORD_LEN,
    })
}

pub fn read_frame_table(bytes: &[u8], layout: &Layout) -> Vec<FrameRecord> {
    bytes[layout.table_offset..layout.vectors_offset]
        .chunks_exact(FRAME_RECORD_LEN)
        .map(|r| FrameRecord {
            video_id: u32_at(r, 0),
            frame_index: u32_at(r, 4),
            timestamp_ms: u32_at(r, 8),
        })
        .collect()
}

pub fn decode_f32_le(bytes: &[u8]) -> Vec<f32> {
    bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
        .collect()
}
