//! JSON shapes shared by `gpvs search --json` and the HTTP service.

use gpvs_core::search::{DEFAULT_K, DEFAULT_POOL_SIZE};
use gpvs_core::{Method, RankedVideo, SearchRequest, Store};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApiSearchRequest {
    pub query: String,
    #[serde(default)]
    pub game: Option<String>,
    #[serde(default = "default_method")]
    pub method: String,
    #[serde(default = "default_k")]
    pub k: usize,
    #[serde(default = "default_pool_size")]
    pub pool_size: usize,
}

fn default_method() -> String {
    Method::MaxScore.as_str().to_string()
}

fn default_k() -> usize {
    DEFAULT_K
}

fn default_pool_size() -> usize {
    DEFAULT_POOL_SIZE
}

impl ApiSearchRequest {
    pub fn into_search_request(self, evidence: usize) -> gpvs_core::Result<SearchRequest> {
        let method: Method = self.method.parse()?;
        let req = SearchRequest {
            query_text: self.query,
            game: self.game,
            method,
            k: self.k,
            pool_size: self.pool_size,
            evidence,
        };
        req.validate()?;
        Ok(req)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApiEvidence {
    pub frame_index: u32,
    pub timestamp_ms: u32,
    pub score: f32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApiResult {
    pub video_id: u32,
    pub submission_id: String,
    pub game: String,
    pub agg_score: f64,
    pub evidence: Vec<ApiEvidence>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApiSearchResponse {
    pub results: Vec<ApiResult>,
    pub timing_ms: u64,
}

pub fn to_api_results(store: &Store, ranked: &[RankedVideo]) -> Vec<ApiResult> {
    ranked
        .iter()
        .map(|r| {
            let video = store
                .video(r.video_id)
                .expect("ranked video exists in store");
            ApiResult {
                video_id: r.video_id,
                submission_id: video.submission_id.clone(),
                game: video.game.clone(),
                agg_score: r.agg_score,
                evidence: r
                    .evidence
                    .iter()
                    .map(|e| ApiEvidence {
                        frame_index: e.frame_index,
                        timestamp_ms: e.timestamp_ms,
                        score: e.score,
                    })
                    .collect(),
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GameCount {
    pub game: String,
    pub video_count: u64,
}

pub fn game_counts(store: &Store) -> Vec<GameCount> {
    store
        .game_counts()
        .into_iter()
        .map(|(game, video_count)| GameCount { game, video_count })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VideoDetail {
    pub video_id: u32,
    pub submission_id: String,
    pub game: String,
    pub title: String,
    pub url: String,
    pub fps: f64,
    pub frame_count: u64,
    pub frame_timestamps_ms: Vec<u32>,
}

pub fn video_detail(store: &Store, video_id: u32) -> Option<VideoDetail> {
    let v = store.video(video_id)?;
    let mut frames: Vec<(u32, u32)> = store
        .frames()
        .iter()
        .filter(|f| f.video_id == video_id)
        .map(|f| (f.frame_index, f.timestamp_ms))
        .collect();
    frames.sort_unstable();
    Some(VideoDetail {
        video_id,
        submission_id: v.submission_id.clone(),
        game: v.game.clone(),
        title: v.title.clone(),
        url: v.url.clone(),
        fps: v.fps,
        frame_count: v.frame_count,
        frame_timestamps_ms: frames.into_iter().map(|(_, t)| t).collect(),
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ApiError {
    pub code: String,
    pub message: String,
}
