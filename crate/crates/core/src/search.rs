//! Exhaustive frame retrieval and per-video score aggregation.
//!
//! A query is scored against every eligible frame exactly once
//! ([`QueryScores`]); both aggregation methods then work from those cached
//! scores without rescanning the store.
//!
//! Ordering is total and independent of storage order: frames sort by score
//! descending, then `video_id` ascending, then `frame_index` ascending.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashMap};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::embedding::{dot, Embedder, EmbeddingVector};
use crate::error::{Error, Result};
use crate::store::Store;

pub const DEFAULT_POOL_SIZE: usize = 1000;
pub const DEFAULT_K: usize = 5;
pub const DEFAULT_EVIDENCE: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Method {
    /// Rank videos by their single best frame.
    #[serde(rename = "max")]
    MaxScore,
    /// Rank videos by how many of their frames land in the global top pool.
    #[serde(rename = "pool")]
    PoolCount,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::MaxScore => "max",
            Method::PoolCount => "pool",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "max" => Ok(Method::MaxScore),
            "pool" => Ok(Method::PoolCount),
            other => Err(Error::InvalidInput(format!(
                "unknown method {other:?}; allowed values are \"max\" and \"pool\""
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrameHit {
    pub video_id: u32,
    pub frame_index: u32,
    pub timestamp_ms: u32,
    pub score: f32,
}

/// Best-first order for frame hits.
pub fn compare_hits(a: &FrameHit, b: &FrameHit) -> Ordering {
    b.score
        .total_cmp(&a.score)
        .then(a.video_id.cmp(&b.video_id))
        .then(a.frame_index.cmp(&b.frame_index))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedVideo {
    pub video_id: u32,
    /// Best frame similarity for `max`, frame count in the pool for `pool`.
    pub agg_score: f64,
    pub best_score: f32,
    pub evidence: Vec<FrameHit>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchRequest {
    pub query_text: String,
    pub game: Option<String>,
    pub method: Method,
    pub k: usize,
    pub pool_size: usize,
    pub evidence: usize,
}

impl SearchRequest {
    pub fn new(query_text: impl Into<String>, method: Method) -> Self {
        Self {
            query_text: query_text.into(),
            game: None,
            method,
            k: DEFAULT_K,
            pool_size: DEFAULT_POOL_SIZE,
            evidence: DEFAULT_EVIDENCE,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::InvalidInput("k must be at least 1".into()));
        }
        if self.pool_size == 0 {
            return Err(Error::InvalidInput("pool_size must be at least 1".into()));
        }
        Ok(())
    }
}

/// How the scan is split. Results never depend on these settings.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ScanOptions {
    /// Number of contiguous frame ranges scored and ranked independently.
    pub shards: usize,
}

impl Default for ScanOptions {
    fn default() -> Self {
        #[cfg(feature = "parallel")]
        let shards = rayon::current_num_threads();
        #[cfg(not(feature = "parallel"))]
        let shards = 1;
        Self { shards }
    }
}

impl ScanOptions {
    pub fn single_threaded() -> Self {
        Self { shards: 1 }
    }

    pub fn with_shards(shards: usize) -> Self {
        Self {
            shards: shards.max(1),
        }
    }
}

/// Similarity of one query against every eligible frame of a store.
pub struct QueryScores<'s> {
    store: &'s Store,
    scores: Vec<f32>,
    eligible_videos: Option<Vec<bool>>,
    shards: usize,
}

impl<'s> QueryScores<'s> {
    /// Scores `query` against every frame whose video matches `game`
    /// (every frame when `game` is `None`).
    pub fn compute(
        store: &'s Store,
        query: &[f32],
        game: Option<&str>,
        opts: ScanOptions,
    ) -> Result<Self> {
        if query.len() != store.dim() {
            return Err(Error::DimensionMismatch {
                expected: store.dim(),
                actual: query.len(),
            });
        }
        let eligible_videos = match game {
            None => None,
            Some(g) => {
                if !store.has_game(g) {
                    return Err(Error::UnknownGame(g.to_string()));
                }
                Some(
                    store
                        .videos()
                        .iter()
                        .map(|v| v.game == g)
                        .collect::<Vec<_>>(),
                )
            }
        };
        let n = store.total_frames();
        let shards = opts.shards.max(1).min(n.max(1));
        let mut scores = vec![0.0f32; n];
        let dim = store.dim();
        let vectors = store.vectors();
        let frames = store.frames();
        let chunk = n.div_ceil(shards).max(1);
        let mask = eligible_videos.as_deref();
        let score_range = |start: usize, out: &mut [f32]| {
            for (j, slot) in out.iter_mut().enumerate() {
                let i = start + j;
                if mask.is_none_or(|m| m[frames[i].video_id as usize]) {
                    *slot = dot(query, &vectors[i * dim..(i + 1) * dim]);
                }
            }
        };
        #[cfg(feature = "parallel")]
        {
            use rayon::prelude::*;
            scores
                .par_chunks_mut(chunk)
                .enumerate()
                .for_each(|(c, out)| score_range(c * chunk, out));
        }
        #[cfg(not(feature = "parallel"))]
        for (c, out) in scores.chunks_mut(chunk).enumerate() {
            score_range(c * chunk, out);
        }
        Ok(Self {
            store,
            scores,
            eligible_videos,
            shards,
        })
    }

    pub fn store(&self) -> &'s Store {
        self.store
    }

    fn is_eligible(&self, i: usize) -> bool {
        match &self.eligible_videos {
            None => true,
            Some(m) => m[self.store.frames()[i].video_id as usize],
        }
    }

    fn hit(&self, i: usize) -> FrameHit {
        let f = self.store.frames()[i];
        FrameHit {
            video_id: f.video_id,
            frame_index: f.frame_index,
            timestamp_ms: f.timestamp_ms,
            score: self.scores[i],
        }
    }

    /// Score of store row `i`, or `None` if the row is filtered out.
    pub fn score(&self, i: usize) -> Option<f32> {
        self.is_eligible(i).then(|| self.scores[i])
    }

    pub fn eligible_frames(&self) -> usize {
        (0..self.scores.len())
            .filter(|&i| self.is_eligible(i))
            .count()
    }

    /// Every eligible frame, in storage order.
    pub fn hits(&self) -> impl Iterator<Item = FrameHit> + '_ {
        (0..self.scores.len())
            .filter(|&i| self.is_eligible(i))
            .map(|i| self.hit(i))
    }

    fn shard_top(&self, lo: usize, hi: usize, n: usize) -> Vec<FrameHit> {
        let mut hits: Vec<FrameHit> = (lo..hi)
            .filter(|&i| self.is_eligible(i))
            .map(|i| self.hit(i))
            .collect();
        if hits.len() > n {
            hits.select_nth_unstable_by(n - 1, compare_hits);
            hits.truncate(n);
        }
        hits.sort_unstable_by(compare_hits);
        hits
    }

    /// The `n` best eligible frames, best first. Each contiguous shard keeps
    /// its own top `n`, then the sorted shard lists are k-way merged.
    pub fn top_frames(&self, n: usize) -> Vec<FrameHit> {
        let total = self.scores.len();
        if n == 0 || total == 0 {
            return Vec::new();
        }
        let chunk = total.div_ceil(self.shards).max(1);
        let ranges: Vec<(usize, usize)> = (0..total)
            .step_by(chunk)
            .map(|lo| (lo, (lo + chunk).min(total)))
            .collect();
        #[cfg(feature = "parallel")]
        let lists: Vec<Vec<FrameHit>> = {
            use rayon::prelude::*;
            ranges
                .par_iter()
                .map(|&(lo, hi)| self.shard_top(lo, hi, n))
                .collect()
        };
        #[cfg(not(feature = "parallel"))]
        let lists: Vec<Vec<FrameHit>> = ranges
            .iter()
            .map(|&(lo, hi)| self.shard_top(lo, hi, n))
            .collect();
        merge_sorted(lists, n)
    }

    pub fn rank(
        &self,
        method: Method,
        k: usize,
        pool_size: usize,
        evidence: usize,
    ) -> Vec<RankedVideo> {
        match method {
            Method::MaxScore => aggregate_max(self.hits(), k, evidence),
            Method::PoolCount => {
                aggregate_pool_count(&self.top_frames(pool_size), pool_size, k, evidence)
            }
        }
    }
}

struct Head {
    hit: FrameHit,
    list: usize,
    pos: usize,
}

impl PartialEq for Head {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Head {}

impl PartialOrd for Head {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Head {
    // BinaryHeap is a max-heap; the best hit must compare greatest.
    fn cmp(&self, other: &Self) -> Ordering {
        compare_hits(&other.hit, &self.hit)
    }
}

fn merge_sorted(lists: Vec<Vec<FrameHit>>, n: usize) -> Vec<FrameHit> {
    let mut heap: BinaryHeap<Head> = lists
        .iter()
        .enumerate()
        .filter_map(|(list, l)| l.first().map(|&hit| Head { hit, list, pos: 0 }))
        .collect();
    let mut out = Vec::with_capacity(n.min(lists.iter().map(Vec::len).sum()));
    while out.len() < n {
        let Some(Head { hit, list, pos }) = heap.pop() else {
            break;
        };
        out.push(hit);
        if let Some(&next) = lists[list].get(pos + 1) {
            heap.push(Head {
                hit: next,
                list,
                pos: pos + 1,
            });
        }
    }
    out
}

fn sort_ranked(videos: &mut [RankedVideo]) {
    videos.sort_by(|a, b| {
        b.agg_score
            .total_cmp(&a.agg_score)
            .then(b.best_score.total_cmp(&a.best_score))
            .then(a.video_id.cmp(&b.video_id))
    });
}

/// Ranks videos by their best frame score. Input order does not matter.
/// Evidence is each video's `evidence` best frames.
pub fn aggregate_max(
    hits: impl IntoIterator<Item = FrameHit>,
    k: usize,
    evidence: usize,
) -> Vec<RankedVideo> {
    struct Acc {
        best: FrameHit,
        evidence: Vec<FrameHit>,
    }
    let mut per_video: HashMap<u32, Acc> = HashMap::new();
    for hit in hits {
        let acc = per_video.entry(hit.video_id).or_insert_with(|| Acc {
            best: hit,
            evidence: Vec::new(),
        });
        if compare_hits(&hit, &acc.best) == Ordering::Less {
            acc.best = hit;
        }
        let ev = &mut acc.evidence;
        if evidence > 0
            && (ev.len() < evidence || compare_hits(&hit, ev.last().unwrap()) == Ordering::Less)
        {
            let at = ev.partition_point(|e| compare_hits(e, &hit) == Ordering::Less);
            ev.insert(at, hit);
            ev.truncate(evidence);
        }
    }
    let mut out: Vec<RankedVideo> = per_video
        .into_iter()
        .map(|(video_id, acc)| RankedVideo {
            video_id,
            agg_score: f64::from(acc.best.score),
            best_score: acc.best.score,
            evidence: acc.evidence,
        })
        .collect();
    sort_ranked(&mut out);
    out.truncate(k);
    out
}

/// Counts each video's frames among the first `pool_size` entries of a
/// best-first global `ranking`. Videos absent from the pool are dropped.
/// Equal counts order by best frame score, then `video_id`.
pub fn aggregate_pool_count(
    ranking: &[FrameHit],
    pool_size: usize,
    k: usize,
    evidence: usize,
) -> Vec<RankedVideo> {
    debug_assert!(ranking
        .windows(2)
        .all(|w| compare_hits(&w[0], &w[1]) != Ordering::Greater));
    let pool = &ranking[..pool_size.min(ranking.len())];
    let mut order: Vec<u32> = Vec::new();
    let mut per_video: HashMap<u32, RankedVideo> = HashMap::new();
    for hit in pool {
        let entry = per_video.entry(hit.video_id).or_insert_with(|| {
            order.push(hit.video_id);
            RankedVideo {
                video_id: hit.video_id,
                agg_score: 0.0,
                best_score: hit.score,
                evidence: Vec::new(),
            }
        });
        entry.agg_score += 1.0;
        if entry.evidence.len() < evidence {
            entry.evidence.push(*hit);
        }
    }
    let mut out: Vec<RankedVideo> = order
        .into_iter()
        .map(|id| per_video.remove(&id).unwrap())
        .collect();
    sort_ranked(&mut out);
    out.truncate(k);
    out
}

/// The `n` best frames for `query` among frames of `game` (or all frames).
pub fn top_frames(
    query: &[f32],
    store: &Store,
    n: usize,
    game: Option<&str>,
    opts: ScanOptions,
) -> Result<Vec<FrameHit>> {
    if n == 0 {
        return Err(Error::InvalidInput("N must be at least 1".into()));
    }
    Ok(QueryScores::compute(store, query, game, opts)?.top_frames(n))
}

/// Embeds the query text verbatim, scores every eligible frame once and
/// applies the requested aggregation.
pub fn search(
    req: &SearchRequest,
    store: &Store,
    embedder: &dyn Embedder,
    opts: ScanOptions,
) -> Result<Vec<RankedVideo>> {
    Ok(score_query(req, store, embedder, opts)?.rank(
        req.method,
        req.k,
        req.pool_size,
        req.evidence,
    ))
}

/// The scoring half of [`search`]: validate, embed and scan. Callers that
/// want both aggregations for one query rank the returned scores twice.
pub fn score_query<'s>(
    req: &SearchRequest,
    store: &'s Store,
    embedder: &dyn Embedder,
    opts: ScanOptions,
) -> Result<QueryScores<'s>> {
    req.validate()?;
    if embedder.spec().dim != store.dim() {
        return Err(Error::DimensionMismatch {
            expected: store.dim(),
            actual: embedder.spec().dim,
        });
    }
    if let Some(g) = &req.game {
        if !store.has_game(g) {
            return Err(Error::UnknownGame(g.clone()));
        }
    }
    let query = embed_query(embedder, &req.query_text)?;
    QueryScores::compute(store, query.as_slice(), req.game.as_deref(), opts)
}

/// Embeds query text verbatim (no prompt template). Any embedder failure
/// surfaces as [`Error::EmbedderUnavailable`].
pub fn embed_query(embedder: &dyn Embedder, text: &str) -> Result<EmbeddingVector> {
    let query = embedder.embed_text(text).map_err(|e| match e {
        Error::EmbedderUnavailable(_) => e,
        other => Error::EmbedderUnavailable(other.to_string()),
    })?;
    if query.dim() != embedder.spec().dim {
        return Err(Error::DimensionMismatch {
            expected: embedder.spec().dim,
            actual: query.dim(),
        });
    }
    Ok(query)
}
