#![allow(dead_code)]

use std::collections::BTreeMap;

use gpvs_core::ingest::FilterStats;
use gpvs_core::store::{FrameRecord, VideoEntry};
use gpvs_core::{dot, EmbedderSpec, FrameHit, RankedVideo, Store};
use rand::rngs::StdRng;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};

pub const GAMES: [&str; 3] = [
    "Grand Theft Auto V",
    "Red Dead Redemption 2",
    "Just Cause 3",
];

pub fn unit(rng: &mut StdRng, dim: usize) -> Vec<f32> {
    loop {
        let v: Vec<f32> = (0..dim).map(|_| rng.random_range(-1.0f32..1.0)).collect();
        let n = v.iter().map(|&x| f64::from(x).powi(2)).sum::<f64>().sqrt();
        if n > 1e-6 {
            return v.iter().map(|&x| (f64::from(x) / n) as f32).collect();
        }
    }
}

/// Random store of `frames` frames spread over `videos` videos. About one
/// frame in twenty copies an earlier vector, so exact score ties occur and
/// the tie-breaking rule gets exercised.
pub fn random_store(seed: u64, videos: usize, frames: usize, dim: usize) -> Store {
    let mut rng = StdRng::seed_from_u64(seed);
    assert!(frames >= videos);
    let mut owner: Vec<u32> = (0..videos as u32).collect();
    owner.extend((videos..frames).map(|_| rng.random_range(0..videos as u32)));
    owner.sort_unstable();
    let mut next_index = vec![0u32; videos];
    let mut records = Vec::with_capacity(frames);
    let mut vectors: Vec<f32> = Vec::with_capacity(frames * dim);
    for &vid in &owner {
        let fi = next_index[vid as usize];
        next_index[vid as usize] += 1 + rng.random_range(0..3);
        records.push(FrameRecord {
            video_id: vid,
            frame_index: fi,
            timestamp_ms: fi * 33,
        });
        if !records.is_empty() && records.len() > 1 && rng.random_bool(0.05) {
            let src = rng.random_range(0..records.len() - 1);
            let copy = vectors[src * dim..(src + 1) * dim].to_vec();
            vectors.extend_from_slice(&copy);
        } else {
            vectors.extend(unit(&mut rng, dim));
        }
    }
    let mut counts = vec![0u64; videos];
    for r in &records {
        counts[r.video_id as usize] += 1;
    }
    let entries = (0..videos)
        .map(|v| VideoEntry {
            video_id: v as u32,
            submission_id: format!("s{v}"),
            game: GAMES[rng.random_range(0..GAMES.len())].to_string(),
            frame_count: counts[v],
            fps: 30.0,
            title: String::new(),
            url: String::new(),
        })
        .collect();
    Store::from_parts(
        EmbedderSpec::new("test", dim, 224).unwrap(),
        entries,
        records,
        vectors,
        FilterStats::default(),
    )
    .unwrap()
}

/// Same content as `store` with the frame table and vector rows shuffled.
pub fn shuffled(store: &Store, seed: u64) -> Store {
    let mut rng = StdRng::seed_from_u64(seed);
    let mut order: Vec<usize> = (0..store.total_frames()).collect();
    order.shuffle(&mut rng);
    let frames = order.iter().map(|&i| store.frames()[i]).collect();
    let vectors = order
        .iter()
        .flat_map(|&i| store.vector(i).to_vec())
        .collect();
    Store::from_parts(
        store.embedder().clone(),
        store.videos().to_vec(),
        frames,
        vectors,
        FilterStats::default(),
    )
    .unwrap()
}

/// Brute force: score every frame, sort everything, truncate.
pub fn oracle_top_frames(
    store: &Store,
    query: &[f32],
    n: usize,
    game: Option<&str>,
) -> Vec<(u32, u32, f32)> {
    let mut all: Vec<(u32, u32, f32)> = (0..store.total_frames())
        .filter(|&i| {
            game.is_none_or(|g| store.videos()[store.frames()[i].video_id as usize].game == g)
        })
        .map(|i| {
            let f = store.frames()[i];
            (f.video_id, f.frame_index, dot(query, store.vector(i)))
        })
        .collect();
    all.sort_by(|a, b| {
        b.2.partial_cmp(&a.2)
            .unwrap()
            .then(a.0.cmp(&b.0))
            .then(a.1.cmp(&b.1))
    });
    all.truncate(n);
    all
}

pub fn as_triples(hits: &[FrameHit]) -> Vec<(u32, u32, f32)> {
    hits.iter()
        .map(|h| (h.video_id, h.frame_index, h.score))
        .collect()
}

/// Group-by-max over `(video, score)` pairs, sorted by max desc, id asc.
pub fn oracle_group_max(pairs: &[(u32, f32)], k: usize) -> Vec<(u32, f64)> {
    let mut best: BTreeMap<u32, f32> = BTreeMap::new();
    for &(v, s) in pairs {
        let e = best.entry(v).or_insert(s);
        if s > *e {
            *e = s;
        }
    }
    let mut out: Vec<(u32, f64)> = best.into_iter().map(|(v, s)| (v, f64::from(s))).collect();
    out.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
    out.truncate(k);
    out
}

/// Sort all frames, keep the first `pool`, count per video; ties on count
/// go to the better best-frame score, then the smaller id.
pub fn oracle_pool_count(triples: &[(u32, u32, f32)], pool: usize, k: usize) -> Vec<(u32, f64)> {
    let mut sorted = triples.to_vec();
    sorted.sort_by(|a, b| {
        b.2.partial_cmp(&a.2)
            .unwrap()
            .then(a.0.cmp(&b.0))
            .then(a.1.cmp(&b.1))
    });
    sorted.truncate(pool);
    let mut count: BTreeMap<u32, (u64, f32)> = BTreeMap::new();
    for &(v, _, s) in &sorted {
        let e = count.entry(v).or_insert((0, s));
        e.0 += 1;
        if s > e.1 {
            e.1 = s;
        }
    }
    let mut out: Vec<(u32, u64, f32)> = count.into_iter().map(|(v, (c, s))| (v, c, s)).collect();
    out.sort_by(|a, b| {
        b.1.cmp(&a.1)
            .then(b.2.partial_cmp(&a.2).unwrap())
            .then(a.0.cmp(&b.0))
    });
    out.truncate(k);
    out.into_iter().map(|(v, c, _)| (v, c as f64)).collect()
}

pub fn ranked_pairs(r: &[RankedVideo]) -> Vec<(u32, f64)> {
    r.iter().map(|v| (v.video_id, v.agg_score)).collect()
}
