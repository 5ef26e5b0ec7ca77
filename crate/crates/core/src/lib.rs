//! Frame-level semantic search over large collections of gameplay videos.
//!
//! Every frame of every video is stored as a unit-norm embedding. A text query
//! is embedded into the same space, scored against every frame with cosine
//! similarity, and the frame scores are folded into per-video rankings with
//! either the max-score or the pool-count aggregation.
//!
//! Module map:
//!
//! - [`embedding`]: vectors, normalization, cosine similarity, the embedder
//!   contract and a deterministic mock embedder.
//! - [`ingest`] and [`catalog`]: dataset curation filters and game-name
//!   resolution.
//! - [`store`]: the immutable binary frame store and its JSON manifest.
//! - [`search`]: exhaustive top-N frame retrieval and video aggregation.
//! - [`eval`]: query sets, judgments, top-k accuracy and recall@5 reports.

pub mod catalog;
pub mod embedding;
pub mod error;
pub mod eval;
pub mod ingest;
pub mod search;
pub mod store;

pub use catalog::{GameCatalog, UNRESOLVED};
pub use embedding::{
    cosine_similarity, dot, mock_embed, normalize, Embedder, EmbedderSpec, EmbeddingVector,
    MockEmbedder,
};
pub use error::{Error, Result};
pub use ingest::{validate_submission, FilterStats, RejectReason, SubmissionMeta, Verdict};
pub use search::{
    aggregate_max, aggregate_pool_count, search, top_frames, FrameHit, Method, QueryScores,
    RankedVideo, ScanOptions, SearchRequest, DEFAULT_EVIDENCE, DEFAULT_POOL_SIZE,
};
pub use store::{build_store, open_store, FrameRecord, Manifest, Store, VideoEntry, VideoFrames};
