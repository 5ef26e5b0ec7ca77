//! Builds a store from a metadata file and a directory of extracted frames.
//!
//! Frames for submission `S` live in `<frames_dir>/S/`. Each frame is one
//! file named `<frame_index>.<ext>` (any extension). An optional
//! `video.json` with `{"fps": <float>}` sets the frame rate, otherwise
//! [`DEFAULT_FPS`] is assumed.

use std::fs;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use gpvs_core::catalog::UNRESOLVED;
use gpvs_core::ingest::read_submissions;
use gpvs_core::store::VideoFrames;
use gpvs_core::{
    build_store, validate_submission, Embedder, FilterStats, GameCatalog, RejectReason, Verdict,
};
use serde::{Deserialize, Serialize};

pub const DEFAULT_FPS: f64 = 30.0;
pub const VIDEO_META_FILE: &str = "video.json";
const EMBED_BATCH: usize = 32;

#[derive(Debug, Clone)]
pub struct IngestOptions {
    /// Keep every `stride`-th frame, counting from the first.
    pub stride: usize,
}

impl Default for IngestOptions {
    fn default() -> Self {
        Self { stride: 1 }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestSummary {
    pub accepted: u64,
    pub spam: u64,
    pub low_score: u64,
    pub duration: u64,
    /// Accepted submissions whose title matched no catalog game. Not stored.
    pub unresolved: u64,
    pub videos: u64,
    pub frames: u64,
}

#[derive(Deserialize)]
struct VideoMeta {
    fps: f64,
}

/// Frame files of one submission, sorted by frame index.
pub fn list_frames(dir: &Path) -> anyhow::Result<Vec<(u32, PathBuf)>> {
    let mut out = Vec::new();
    let entries = fs::read_dir(dir).with_context(|| format!("reading {}", dir.display()))?;
    for entry in entries {
        let path = entry?.path();
        if !path.is_file() {
            continue;
        }
        let Some(stem) = path.file_stem().and_then(|s| s.to_str()) else {
            continue;
        };
        if stem.is_empty() || !stem.bytes().all(|b| b.is_ascii_digit()) {
            continue;
        }
        let idx: u32 = stem
            .parse()
            .with_context(|| format!("frame index out of range: {}", path.display()))?;
        out.push((idx, path));
    }
    out.sort();
    if let Some(w) = out.windows(2).find(|w| w[0].0 == w[1].0) {
        bail!("duplicate frame index {} in {}", w[0].0, dir.display());
    }
    Ok(out)
}

fn read_fps(dir: &Path) -> anyhow::Result<f64> {
    let path = dir.join(VIDEO_META_FILE);
    if !path.exists() {
        tracing::warn!(dir = %dir.display(), "no {VIDEO_META_FILE}, assuming {DEFAULT_FPS} fps");
        return Ok(DEFAULT_FPS);
    }
    let text = fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
    let meta: VideoMeta =
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
    Ok(meta.fps)
}

fn embed_frames(
    embedder: &dyn Embedder,
    files: &[(u32, PathBuf)],
) -> anyhow::Result<Vec<(u32, Vec<f32>)>> {
    let mut out = Vec::with_capacity(files.len());
    for chunk in files.chunks(EMBED_BATCH) {
        let bytes = chunk
            .iter()
            .map(|(_, p)| fs::read(p).with_context(|| format!("reading {}", p.display())))
            .collect::<anyhow::Result<Vec<_>>>()?;
        let refs: Vec<&[u8]> = bytes.iter().map(Vec::as_slice).collect();
        let vectors = embedder.embed_images(&refs)?;
        out.extend(
            chunk
                .iter()
                .zip(vectors)
                .map(|((i, _), v)| (*i, v.into_inner())),
        );
    }
    Ok(out)
}

/// Filters, resolves, embeds and writes. Fails when no video survives.
pub fn run_ingest(
    metadata: &Path,
    frames_dir: &Path,
    catalog: &GameCatalog,
    out: &Path,
    embedder: &dyn Embedder,
    opts: &IngestOptions,
) -> anyhow::Result<IngestSummary> {
    if opts.stride == 0 {
        bail!("stride must be at least 1");
    }
    let file = fs::File::open(metadata)
        .with_context(|| format!("opening metadata {}", metadata.display()))?;
    let subs = read_submissions(BufReader::new(file))
        .with_context(|| format!("reading metadata {}", metadata.display()))?;

    let mut stats = FilterStats::default();
    let mut summary = IngestSummary::default();
    let mut videos = Vec::new();
    for meta in subs {
        let verdict = validate_submission(&meta);
        stats.record(verdict);
        match verdict {
            Verdict::Accepted => summary.accepted += 1,
            Verdict::Rejected(RejectReason::Spam) => summary.spam += 1,
            Verdict::Rejected(RejectReason::LowScore) => summary.low_score += 1,
            Verdict::Rejected(RejectReason::Duration) => summary.duration += 1,
        }
        if verdict != Verdict::Accepted {
            continue;
        }
        let game = catalog.resolve(&meta.title);
        if game == UNRESOLVED {
            tracing::warn!(submission = %meta.submission_id, title = %meta.title, "game unresolved, skipped");
            summary.unresolved += 1;
            continue;
        }
        let game = game.to_string();
        let dir = frames_dir.join(&meta.submission_id);
        let files: Vec<_> = list_frames(&dir)?
            .into_iter()
            .step_by(opts.stride)
            .collect();
        let fps = read_fps(&dir)?;
        let frames = embed_frames(embedder, &files)
            .with_context(|| format!("embedding frames of {}", meta.submission_id))?;
        tracing::debug!(submission = %meta.submission_id, frames = frames.len(), "embedded");
        summary.frames += frames.len() as u64;
        videos.push(VideoFrames {
            submission_id: meta.submission_id,
            game,
            fps,
            title: meta.title,
            url: meta.url,
            frames,
        });
    }
    if videos.is_empty() {
        bail!("zero accepted videos");
    }
    summary.videos = videos.len() as u64;
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    build_store(videos, embedder.spec(), stats, out)?;
    Ok(summary)
}
