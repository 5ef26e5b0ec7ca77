//! Immutable frame store: a binary vector file plus a JSON manifest.
//!
//! A store is a directory holding two files:
//!
//! - `vectors.gpvs`: header, fixed-width frame table and a contiguous
//!   little-endian `f32` vector block (see [`format`]).
//! - `manifest.json`: videos, embedder provenance and ingest filter counts.
//!
//! Stores are written once by [`build_store`] and never mutated. An opened
//! store is read-only and can be shared across threads freely.

pub mod format;

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::embedding::{normalize, EmbedderSpec};
use crate::error::{Error, Result};
use crate::ingest::FilterStats;

pub use format::{FORMAT_VERSION, MAGIC};

pub const VECTORS_FILE: &str = "vectors.gpvs";
pub const MANIFEST_FILE: &str = "manifest.json";

/// One row of the frame table. The frame's embedding lives at the same
/// position in the vector block.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct FrameRecord {
    pub video_id: u32,
    pub frame_index: u32,
    pub timestamp_ms: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VideoEntry {
    pub video_id: u32,
    pub submission_id: String,
    pub game: String,
    pub frame_count: u64,
    pub fps: f64,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub title: String,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub url: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub format_version: u32,
    pub embedder: EmbedderSpec,
    pub total_frames: u64,
    pub videos: Vec<VideoEntry>,
    pub filter_stats: FilterStats,
}

/// Build input for one video: its metadata and raw frame embeddings.
#[derive(Debug, Clone)]
pub struct VideoFrames {
    pub submission_id: String,
    pub game: String,
    pub fps: f64,
    pub title: String,
    pub url: String,
    /// `(frame_index, raw embedding)`, frame indices strictly increasing.
    pub frames: Vec<(u32, Vec<f32>)>,
}

/// Milliseconds from the start of the video for a frame at native rate.
pub fn frame_timestamp_ms(frame_index: u32, fps: f64) -> u32 {
    (f64::from(frame_index) / fps * 1000.0).round() as u32
}

pub(crate) enum Vectors {
    Owned(Vec<f32>),
    #[cfg(feature = "mmap")]
    Mapped {
        map: memmap2::Mmap,
        offset: usize,
        len: usize,
    },
}

impl Vectors {
    fn as_slice(&self) -> &[f32] {
        match self {
            Vectors::Owned(v) => v,
            #[cfg(feature = "mmap")]
            Vectors::Mapped { map, offset, len } => {
                bytemuck::cast_slice(&map[*offset..*offset + len * 4])
            }
        }
    }
}

pub struct Store {
    manifest: Manifest,
    frames: Vec<FrameRecord>,
    vectors: Vectors,
}

impl std::fmt::Debug for Store {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Store")
            .field("dim", &self.dim())
            .field("total_frames", &self.total_frames())
            .field("videos", &self.manifest.videos.len())
            .field("embedder", &self.manifest.embedder.backend_id)
            .finish()
    }
}

impl Store {
    /// Assembles an in-memory store and checks that the frame table, the
    /// vector block and the video list agree. Vectors are taken as given.
    pub fn from_parts(
        embedder: EmbedderSpec,
        videos: Vec<VideoEntry>,
        frames: Vec<FrameRecord>,
        vectors: Vec<f32>,
        filter_stats: FilterStats,
    ) -> Result<Self> {
        let manifest = Manifest {
            format_version: FORMAT_VERSION,
            total_frames: frames.len() as u64,
            embedder,
            videos,
            filter_stats,
        };
        let store = Store {
            manifest,
            frames,
            vectors: Vectors::Owned(vectors),
        };
        store.check_consistency()?;
        Ok(store)
    }

    fn check_consistency(&self) -> Result<()> {
        let dim = self.dim();
        let n = self.frames.len();
        let m = &self.manifest;
        if dim == 0 {
            return Err(Error::CorruptManifest("dim is zero".into()));
        }
        if m.format_version != FORMAT_VERSION {
            return Err(Error::VersionUnsupported(m.format_version));
        }
        if m.total_frames != n as u64 {
            return Err(Error::CorruptManifest(format!(
                "manifest lists {} frames, frame table has {n}",
                m.total_frames
            )));
        }
        if self.vectors.as_slice().len() != n * dim {
            return Err(Error::CorruptManifest(format!(
                "vector block holds {} floats, expected {n} x {dim}",
                self.vectors.as_slice().len()
            )));
        }
        let mut counts = vec![0u64; m.videos.len()];
        for f in &self.frames {
            let slot = counts.get_mut(f.video_id as usize).ok_or_else(|| {
                Error::CorruptManifest(format!("frame references unknown video {}", f.video_id))
            })?;
            *slot += 1;
        }
        for (i, (v, &c)) in m.videos.iter().zip(&counts).enumerate() {
            if v.video_id as usize != i {
                return Err(Error::CorruptManifest(format!(
                    "video ids must be dense: position {i} holds id {}",
                    v.video_id
                )));
            }
            if v.frame_count != c {
                return Err(Error::CorruptManifest(format!(
                    "video {i} declares {} frames, frame table has {c}",
                    v.frame_count
                )));
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.manifest.embedder.dim
    }

    pub fn total_frames(&self) -> usize {
        self.frames.len()
    }

    pub fn embedder(&self) -> &EmbedderSpec {
        &self.manifest.embedder
    }

    pub fn manifest(&self) -> &Manifest {
        &self.manifest
    }

    pub fn videos(&self) -> &[VideoEntry] {
        &self.manifest.videos
    }

    pub fn video(&self, video_id: u32) -> Option<&VideoEntry> {
        self.manifest.videos.get(video_id as usize)
    }

    pub fn frames(&self) -> &[FrameRecord] {
        &self.frames
    }

    /// The whole vector block, row-major `total_frames x dim`.
    pub fn vectors(&self) -> &[f32] {
        self.vectors.as_slice()
    }

    pub fn vector(&self, i: usize) -> &[f32] {
        let dim = self.dim();
        &self.vectors()[i * dim..(i + 1) * dim]
    }

    /// `true` if the vector block is served straight from the mapped file.
    pub fn is_mapped(&self) -> bool {
        !matches!(self.vectors, Vectors::Owned(_))
    }

    pub fn has_game(&self, game: &str) -> bool {
        self.manifest.videos.iter().any(|v| v.game == game)
    }

    /// `(game, video_count)` sorted by count descending, then name.
    pub fn game_counts(&self) -> Vec<(String, u64)> {
        let mut counts = std::collections::BTreeMap::<&str, u64>::new();
        for v in &self.manifest.videos {
            *counts.entry(v.game.as_str()).or_default() += 1;
        }
        let mut out: Vec<_> = counts
            .into_iter()
            .map(|(g, c)| (g.to_string(), c))
            .collect();
        out.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        out
    }

    /// Serializes the vector file exactly as [`build_store`] writes it.
    pub fn encode_vectors(&self) -> Vec<u8> {
        let mut buf = Vec::with_capacity(format::encoded_len(
            &self.manifest.embedder.backend_id,
            self.frames.len(),
            self.dim(),
        ));
        format::write_vectors_file(&mut buf, self).expect("writing to a Vec cannot fail");
        buf
    }

    pub fn encode_manifest(&self) -> Vec<u8> {
        let mut buf = serde_json::to_vec_pretty(&self.manifest).expect("manifest serializes");
        buf.push(b'\n');
        buf
    }

    /// Writes `vectors.gpvs` and `manifest.json` into `dir`, creating it.
    pub fn write_to(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let vec_path = dir.join(VECTORS_FILE);
        let file = fs::File::create(&vec_path).map_err(|e| Error::io(&vec_path, e))?;
        let mut w = std::io::BufWriter::with_capacity(1 << 20, file);
        format::write_vectors_file(&mut w, self).map_err(|e| Error::io(&vec_path, e))?;
        std::io::Write::flush(&mut w).map_err(|e| Error::io(&vec_path, e))?;
        let man_path = dir.join(MANIFEST_FILE);
        fs::write(&man_path, self.encode_manifest()).map_err(|e| Error::io(&man_path, e))?;
        Ok(())
    }
}

/// Normalizes every frame, assigns dense video ids in input order and
/// assembles the store in memory without touching the filesystem.
pub fn assemble_store(
    videos: Vec<VideoFrames>,
    embedder: &EmbedderSpec,
    filter_stats: FilterStats,
) -> Result<Store> {
    let dim = embedder.dim;
    let total: usize = videos.iter().map(|v| v.frames.len()).sum();
    let mut entries = Vec::with_capacity(videos.len());
    let mut frames = Vec::with_capacity(total);
    let mut vectors = Vec::with_capacity(total * dim);
    for (vid, video) in videos.into_iter().enumerate() {
        let video_id = u32::try_from(vid)
            .map_err(|_| Error::InvalidInput("more than u32::MAX videos".into()))?;
        if video.frames.is_empty() {
            return Err(Error::EmptyVideo {
                submission_id: video.submission_id,
            });
        }
        if !(video.fps.is_finite() && video.fps > 0.0) {
            return Err(Error::InvalidInput(format!(
                "video {:?}: fps must be positive, got {}",
                video.submission_id, video.fps
            )));
        }
        let mut prev: Option<u32> = None;
        for (frame_index, raw) in &video.frames {
            if let Some(p) = prev {
                if *frame_index <= p {
                    return Err(Error::FrameOrder {
                        submission_id: video.submission_id.clone(),
                        prev: p,
                        next: *frame_index,
                    });
                }
            }
            prev = Some(*frame_index);
            if raw.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    actual: raw.len(),
                });
            }
            let unit = normalize(raw)?;
            vectors.extend_from_slice(unit.as_slice());
            frames.push(FrameRecord {
                video_id,
                frame_index: *frame_index,
                timestamp_ms: frame_timestamp_ms(*frame_index, video.fps),
            });
        }
        entries.push(VideoEntry {
            video_id,
            submission_id: video.submission_id,
            game: video.game,
            frame_count: video.frames.len() as u64,
            fps: video.fps,
            title: video.title,
            url: video.url,
        });
    }
    Store::from_parts(embedder.clone(), entries, frames, vectors, filter_stats)
}

/// Builds a store from per-video frame embeddings and writes it to `dir`.
/// Vectors are re-normalized at write time.
pub fn build_store(
    videos: Vec<VideoFrames>,
    embedder: &EmbedderSpec,
    filter_stats: FilterStats,
    dir: &Path,
) -> Result<Store> {
    let store = assemble_store(videos, embedder, filter_stats)?;
    store.write_to(dir)?;
    Ok(store)
}

/// Opens a store directory, validating the vector-file header and the
/// manifest cross-references. Where the platform allows, the vector block
/// is served zero-copy from a memory map.
pub fn open_store(dir: &Path) -> Result<Store> {
    let man_path = dir.join(MANIFEST_FILE);
    let vec_path = dir.join(VECTORS_FILE);

    let man_bytes = fs::read(&man_path).map_err(|e| Error::io(&man_path, e))?;
    let manifest: Manifest = serde_json::from_slice(&man_bytes)
        .map_err(|e| Error::CorruptManifest(format!("{}: {e}", man_path.display())))?;

    let file = fs::File::open(&vec_path).map_err(|e| Error::io(&vec_path, e))?;
    let layout;
    let vectors;
    let frames;
    #[cfg(feature = "mmap")]
    {
        // SAFETY: stores are immutable once written; nothing in this crate
        // writes to an existing store file.
        let map = unsafe { memmap2::Mmap::map(&file) }.map_err(|e| Error::io(&vec_path, e))?;
        layout = format::parse_header(&map, &vec_path)?;
        frames = format::read_frame_table(&map, &layout);
        let bytes = &map[layout.vectors_offset..];
        vectors = if cfg!(target_endian = "little")
            && bytemuck::try_cast_slice::<u8, f32>(bytes).is_ok()
        {
            Vectors::Mapped {
                offset: layout.vectors_offset,
                len: layout.count * layout.dim,
                map,
            }
        } else {
            Vectors::Owned(format::decode_f32_le(bytes))
        };
    }
    #[cfg(not(feature = "mmap"))]
    {
        use std::io::Read;
        let mut bytes = Vec::new();
        let mut file = file;
        file.read_to_end(&mut bytes)
            .map_err(|e| Error::io(&vec_path, e))?;
        layout = format::parse_header(&bytes, &vec_path)?;
        frames = format::read_frame_table(&bytes, &layout);
        vectors = Vectors::Owned(format::decode_f32_le(&bytes[layout.vectors_offset..]));
    }

    if manifest.format_version != layout.version {
        return Err(Error::CorruptManifest(format!(
            "manifest version {} but vector file version {}",
            manifest.format_version, layout.version
        )));
    }
    if manifest.embedder.dim != layout.dim {
        return Err(Error::CorruptManifest(format!(
            "manifest dim {} but vector file dim {}",
            manifest.embedder.dim, layout.dim
        )));
    }
    if manifest.embedder.backend_id != layout.embedder_id {
        return Err(Error::CorruptManifest(format!(
            "manifest embedder {:?} but vector file embedder {:?}",
            manifest.embedder.backend_id, layout.embedder_id
        )));
    }
    let store = Store {
        manifest,
        frames,
        vectors,
    };
    store.check_consistency()?;
    Ok(store)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(dim: usize) -> EmbedderSpec {
        EmbedderSpec::new("test", dim, 224).unwrap()
    }

    fn video(id: &str, game: &str, frames: Vec<Vec<f32>>) -> VideoFrames {
        VideoFrames {
            submission_id: id.into(),
            game: game.into(),
            fps: 30.0,
            title: String::new(),
            url: String::new(),
            frames: frames
                .into_iter()
                .enumerate()
                .map(|(i, v)| (i as u32, v))
                .collect(),
        }
    }

    #[test]
    fn two_videos_three_frames() {
        let f = |x: f32| vec![x, 1.0, 0.0, 0.0];
        let store = assemble_store(
            vec![
                video("a", "G", vec![f(1.0), f(2.0), f(3.0)]),
                video("b", "H", vec![f(4.0), f(5.0), f(6.0)]),
            ],
            &spec(4),
            FilterStats::default(),
        )
        .unwrap();
        assert_eq!(store.total_frames(), 6);
        assert_eq!(store.videos()[1].frame_count, 3);
        assert_eq!(store.frames()[4].video_id, 1);
        assert_eq!(store.frames()[2].timestamp_ms, 67);
    }

    #[test]
    fn rejects_empty_video_bad_dim_and_order() {
        let err = assemble_store(
            vec![video("a", "G", vec![])],
            &spec(4),
            FilterStats::default(),
        );
        assert!(matches!(err, Err(Error::EmptyVideo { .. })));

        let err = assemble_store(
            vec![video("a", "G", vec![vec![1.0, 0.0, 0.0]])],
            &spec(4),
            FilterStats::default(),
        );
        assert!(matches!(
            err,
            Err(Error::DimensionMismatch {
                expected: 4,
                actual: 3
            })
        ));

        let mut v = video("a", "G", vec![vec![1.0, 0.0], vec![0.0, 1.0]]);
        v.frames[1].0 = 0;
        let err = assemble_store(vec![v], &spec(2), FilterStats::default());
        assert!(matches!(err, Err(Error::FrameOrder { .. })));

        let err = assemble_store(
            vec![video("a", "G", vec![vec![0.0, 0.0]])],
            &spec(2),
            FilterStats::default(),
        );
        assert!(matches!(err, Err(Error::ZeroVector)));
    }

    #[test]
    fn timestamps_follow_fps() {
        assert_eq!(frame_timestamp_ms(0, 30.0), 0);
        assert_eq!(frame_timestamp_ms(1, 30.0), 33);
        assert_eq!(frame_timestamp_ms(90, 30.0), 3000);
        assert_eq!(frame_timestamp_ms(1, 29.97), 33);
        assert_eq!(frame_timestamp_ms(2, 60.0), 33);
    }

    #[test]
    fn game_counts_sorted_by_count() {
        let f = vec![vec![1.0, 0.0]];
        let store = assemble_store(
            vec![
                video("a", "Red Dead Redemption 2", f.clone()),
                video("b", "Grand Theft Auto V", f.clone()),
                video("c", "Grand Theft Auto V", f.clone()),
            ],
            &spec(2),
            FilterStats::default(),
        )
        .unwrap();
        assert_eq!(
            store.game_counts(),
            vec![
                ("Grand Theft Auto V".to_string(), 2),
                ("Red Dead Redemption 2".to_string(), 1)
            ]
        );
    }
}
