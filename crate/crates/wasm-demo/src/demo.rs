//! Plain-Rust half of the demo so it can be tested natively.

use gpvs_core::ingest::FilterStats;
use gpvs_core::store::{assemble_store, VideoFrames};
use gpvs_core::{
    mock_embed, search, Embedder, Method, MockEmbedder, QueryScores, RankedVideo, ScanOptions,
    SearchRequest, Store,
};
use serde::Serialize;

pub const GAMES: [&str; 4] = [
    "Grand Theft Auto V",
    "Red Dead Redemption 2",
    "Just Cause 3",
    "Cyberpunk 2077",
];

/// Scene captions planted into the synthetic store. The mock embedder only
/// matches byte-identical text, so these are the queries that hit.
pub const SCENES: [&str; 6] = [
    "a car flying in the air",
    "a horse stuck on a roof",
    "a person falling through the ground",
    "a helicopter spinning out of control",
    "a boat sailing on land",
    "a character stretching like rubber",
];

#[derive(Debug, Clone, Serialize)]
pub struct Summary {
    pub videos: usize,
    pub frames: usize,
    pub dim: usize,
    pub scenes: Vec<&'static str>,
    pub games: Vec<(String, u64)>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Hit {
    pub video_id: u32,
    pub label: String,
    pub game: String,
    pub agg_score: f64,
    pub evidence_ms: Vec<u32>,
}

pub struct Demo {
    store: Store,
    embedder: MockEmbedder,
}

/// xorshift64; the demo only needs a repeatable spread.
fn next(state: &mut u64) -> u64 {
    *state ^= *state << 13;
    *state ^= *state >> 7;
    *state ^= *state << 17;
    *state
}

impl Demo {
    /// `videos` videos of `frames` frames each. Every scene is planted as a
    /// run of consecutive frames in a few pseudo-random videos.
    pub fn build(videos: u32, frames: u32, dim: u32, seed: u64) -> Result<Demo, String> {
        if videos == 0 || frames == 0 {
            return Err("need at least one video and one frame".into());
        }
        if !(2..=1024).contains(&dim) {
            return Err("dim must be between 2 and 1024".into());
        }
        let dim = dim as usize;
        let embedder = MockEmbedder::new(dim, seed).map_err(|e| e.to_string())?;
        let mut rng = seed | 1;
        let mut payloads: Vec<Vec<String>> = (0..videos)
            .map(|v| {
                (0..frames)
                    .map(|f| format!("video {v} frame {f}"))
                    .collect()
            })
            .collect();
        for (s, scene) in SCENES.iter().enumerate() {
            for _ in 0..=(s % 3) {
                let v = (next(&mut rng) % videos as u64) as usize;
                let run = 1 + (next(&mut rng) % frames.min(8) as u64) as u32;
                let start = (next(&mut rng) % (frames - run + 1) as u64) as u32;
                for f in start..start + run {
                    payloads[v][f as usize] = scene.to_string();
                }
            }
        }
        let input = payloads
            .into_iter()
            .enumerate()
            .map(|(v, ps)| VideoFrames {
                submission_id: format!("clip-{v:04}"),
                game: GAMES[v % GAMES.len()].to_string(),
                fps: 30.0,
                title: String::new(),
                url: String::new(),
                frames: ps
                    .iter()
                    .enumerate()
                    .map(|(f, p)| (f as u32, mock_embed(p.as_bytes(), dim, seed).into_inner()))
                    .collect(),
            })
            .collect();
        let store = assemble_store(input, embedder.spec(), FilterStats::default())
            .map_err(|e| e.to_string())?;
        Ok(Demo { store, embedder })
    }

    pub fn summary(&self) -> Summary {
        Summary {
            videos: self.store.videos().len(),
            frames: self.store.total_frames(),
            dim: self.store.dim(),
            scenes: SCENES.to_vec(),
            games: self.store.game_counts(),
        }
    }

    pub fn search(
        &self,
        query: &str,
        method: &str,
        k: usize,
        pool_size: usize,
        game: Option<&str>,
    ) -> Result<Vec<Hit>, String> {
        let method: Method = method
            .parse()
            .map_err(|e: gpvs_core::Error| e.to_string())?;
        let mut req = SearchRequest::new(query, method);
        req.k = k;
        req.pool_size = pool_size;
        req.game = game.filter(|g| !g.is_empty()).map(str::to_string);
        let ranked = search(
            &req,
            &self.store,
            &self.embedder,
            ScanOptions::single_threaded(),
        )
        .map_err(|e| e.to_string())?;
        Ok(ranked.iter().map(|r| self.hit(r)).collect())
    }

    fn hit(&self, r: &RankedVideo) -> Hit {
        let v = &self.store.videos()[r.video_id as usize];
        Hit {
            video_id: r.video_id,
            label: v.submission_id.clone(),
            game: v.game.clone(),
            agg_score: r.agg_score,
            evidence_ms: r.evidence.iter().map(|e| e.timestamp_ms).collect(),
        }
    }

    /// Similarity of every frame of `video_id` to the query, in frame order.
    pub fn frame_scores(&self, query: &str, video_id: u32) -> Result<Vec<f32>, String> {
        if self.store.video(video_id).is_none() {
            return Err(format!("no video {video_id}"));
        }
        let q = self.embedder.embed_text(query).map_err(|e| e.to_string())?;
        let scores = QueryScores::compute(
            &self.store,
            q.as_slice(),
            None,
            ScanOptions::single_threaded(),
        )
        .map_err(|e| e.to_string())?;
        Ok(self
            .store
            .frames()
            .iter()
            .enumerate()
            .filter(|(_, f)| f.video_id == video_id)
            .filter_map(|(i, _)| scores.score(i))
            .collect())
    }
}
