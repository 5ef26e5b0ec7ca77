//! Embedding vectors and the embedder contract.
//!
//! Vectors are normalized once when they enter the system, so cosine
//! similarity is a plain dot product everywhere downstream.

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Vectors with an L2 norm below this are rejected as degenerate.
pub const MIN_NORM: f64 = 1e-12;

/// A unit-norm `f32` vector for a frame or a text query.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EmbeddingVector {
    values: Vec<f32>,
}

impl EmbeddingVector {
    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn as_slice(&self) -> &[f32] {
        &self.values
    }

    pub fn into_inner(self) -> Vec<f32> {
        self.values
    }
}

impl AsRef<[f32]> for EmbeddingVector {
    fn as_ref(&self) -> &[f32] {
        &self.values
    }
}

/// Identifies an encoder variant and the shape of what it produces.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EmbedderSpec {
    pub backend_id: String,
    pub dim: usize,
    pub input_image_side: usize,
}

impl EmbedderSpec {
    pub fn new(backend_id: impl Into<String>, dim: usize, input_image_side: usize) -> Result<Self> {
        if dim == 0 || input_image_side == 0 {
            return Err(Error::InvalidInput(format!(
                "embedder dim and input_image_side must be positive (got {dim}, {input_image_side})"
            )));
        }
        Ok(Self {
            backend_id: backend_id.into(),
            dim,
            input_image_side,
        })
    }
}

/// Bytes in, unit vector out. Implementations never expose model internals.
pub trait Embedder: Send + Sync {
    fn spec(&self) -> &EmbedderSpec;

    fn embed_text(&self, text: &str) -> Result<EmbeddingVector>;

    fn embed_image(&self, image: &[u8]) -> Result<EmbeddingVector>;

    /// Batch form of [`Embedder::embed_image`]; results are element-wise
    /// identical to single calls.
    fn embed_images(&self, images: &[&[u8]]) -> Result<Vec<EmbeddingVector>> {
        images.iter().map(|img| self.embed_image(img)).collect()
    }
}

/// Scales `v` to unit L2 norm.
pub fn normalize(v: &[f32]) -> Result<EmbeddingVector> {
    if v.is_empty() {
        return Err(Error::InvalidInput(
            "cannot normalize an empty vector".into(),
        ));
    }
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidInput(
            "vector contains non-finite values".into(),
        ));
    }
    let norm = v
        .iter()
        .map(|&x| f64::from(x) * f64::from(x))
        .sum::<f64>()
        .sqrt();
    if norm < MIN_NORM {
        return Err(Error::ZeroVector);
    }
    let values = v.iter().map(|&x| (f64::from(x) / norm) as f32).collect();
    Ok(EmbeddingVector { values })
}

/// Dot product with a fixed eight-lane summation order.
///
/// The order depends only on the element positions, so `dot(a, b)` and
/// `dot(b, a)` are bitwise equal. Callers must pass equal-length slices.
#[inline]
pub fn dot(a: &[f32], b: &[f32]) -> f32 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [0.0f32; 8];
    let ca = a.chunks_exact(8);
    let cb = b.chunks_exact(8);
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        for lane in 0..8 {
            acc[lane] += x[lane] * y[lane];
        }
    }
    let mut tail = 0.0f32;
    for (x, y) in ra.iter().zip(rb) {
        tail += x * y;
    }
    let s = ((acc[0] + acc[4]) + (acc[1] + acc[5])) + ((acc[2] + acc[6]) + (acc[3] + acc[7]));
    // `+ 0.0` folds -0.0 into 0.0 so exact ties compare equal under total_cmp.
    s + tail + 0.0
}

/// Cosine similarity of two unit vectors.
pub fn cosine_similarity(a: &EmbeddingVector, b: &EmbeddingVector) -> Result<f32> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch {
            expected: a.dim(),
            actual: b.dim(),
        });
    }
    Ok(dot(&a.values, &b.values))
}

/// Deterministic pseudo-embedding of an arbitrary payload.
///
/// SHA-256 over `payload || seed_le` keys a ChaCha20 stream, whose output is
/// mapped to `[-1, 1)` and normalized. Text and image payloads go through
/// the same function, so an image whose bytes equal a query string embeds
/// to exactly the query vector.
pub fn mock_embed(payload: &[u8], dim: usize, seed: u64) -> EmbeddingVector {
    assert!(dim >= 2, "mock_embed requires dim >= 2");
    let mut hasher = Sha256::new();
    hasher.update(payload);
    hasher.update(seed.to_le_bytes());
    let key: [u8; 32] = hasher.finalize().into();
    let mut rng = ChaCha20Rng::from_seed(key);
    let mut raw = vec![0.0f32; dim];
    loop {
        for x in raw.iter_mut() {
            *x = (rng.next_u32() >> 8) as f32 / (1u32 << 23) as f32 - 1.0;
        }
        if let Ok(v) = normalize(&raw) {
            return v;
        }
    }
}

/// Model-free embedder backed by [`mock_embed`].
#[derive(Debug, Clone)]
pub struct MockEmbedder {
    spec: EmbedderSpec,
    seed: u64,
}

impl MockEmbedder {
    pub const BACKEND_ID: &'static str = "mock";

    pub fn new(dim: usize, seed: u64) -> Result<Self> {
        if dim < 2 {
            return Err(Error::InvalidInput(format!(
                "mock embedder needs dim >= 2, got {dim}"
            )));
        }
        Ok(Self {
            spec: EmbedderSpec::new(Self::BACKEND_ID, dim, 224)?,
            seed,
        })
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }
}

impl Embedder for MockEmbedder {
    fn spec(&self) -> &EmbedderSpec {
        &self.spec
    }

    fn embed_text(&self, text: &str) -> Result<EmbeddingVector> {
        Ok(mock_embed(text.as_bytes(), self.spec.dim, self.seed))
    }

    fn embed_image(&self, image: &[u8]) -> Result<EmbeddingVector> {
        Ok(mock_embed(image, self.spec.dim, self.seed))
    }
}
