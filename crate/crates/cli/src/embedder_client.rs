//! Client for an out-of-process embedding worker.
//!
//! Contract: `GET /info` returns an [`EmbedderSpec`]; `POST /encode` takes
//! `{kind, payload, backend}` and returns `{vector, dim, backend}`;
//! `POST /encode_batch` takes `{items: [...]}` and returns `{vectors: [...]}`.
//! Image payloads travel base64-encoded.

use std::time::Duration;

use base64::engine::general_purpose::STANDARD as B64;
use base64::Engine as _;
use gpvs_core::embedding::normalize;
use gpvs_core::{Embedder, EmbedderSpec, EmbeddingVector, Error, Result};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EncodeRequest {
    pub kind: String,
    pub payload: String,
    pub backend: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncodeResponse {
    pub vector: Vec<f32>,
    pub dim: usize,
    pub backend: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EncodeBatchRequest {
    pub items: Vec<EncodeRequest>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncodeBatchResponse {
    pub vectors: Vec<EncodeResponse>,
}

pub struct HttpEmbedder {
    base: String,
    agent: ureq::Agent,
    spec: EmbedderSpec,
}

fn unavailable(what: &str, e: impl std::fmt::Display) -> Error {
    Error::EmbedderUnavailable(format!("{what}: {e}"))
}

impl HttpEmbedder {
    /// Fetches `/info` and checks the worker serves `backend` when given.
    pub fn connect(base_url: &str, backend: Option<&str>, timeout: Duration) -> Result<Self> {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(timeout))
            .build()
            .into();
        let base = base_url.trim_end_matches('/').to_string();
        let spec: EmbedderSpec = agent
            .get(format!("{base}/info"))
            .call()
            .map_err(|e| unavailable("GET /info", e))?
            .body_mut()
            .read_json()
            .map_err(|e| unavailable("GET /info", e))?;
        if spec.dim == 0 {
            return Err(unavailable("GET /info", "worker reported dim 0"));
        }
        if let Some(b) = backend {
            if b != spec.backend_id {
                return Err(unavailable(
                    "GET /info",
                    format!("worker serves {:?}, wanted {b:?}", spec.backend_id),
                ));
            }
        }
        Ok(Self { base, agent, spec })
    }

    fn request(&self, kind: &str, payload: String) -> EncodeRequest {
        EncodeRequest {
            kind: kind.to_string(),
            payload,
            backend: self.spec.backend_id.clone(),
        }
    }

    fn check(&self, resp: EncodeResponse) -> Result<EmbeddingVector> {
        if resp.vector.len() != self.spec.dim || resp.dim != self.spec.dim {
            return Err(unavailable(
                "encode",
                format!(
                    "vector length {} (declared {}), /info says {}",
                    resp.vector.len(),
                    resp.dim,
                    self.spec.dim
                ),
            ));
        }
        normalize(&resp.vector).map_err(|e| unavailable("encode", e))
    }

    fn encode(&self, req: EncodeRequest) -> Result<EmbeddingVector> {
        let resp: EncodeResponse = self
            .agent
            .post(format!("{}/encode", self.base))
            .send_json(&req)
            .map_err(|e| unavailable("POST /encode", e))?
            .body_mut()
            .read_json()
            .map_err(|e| unavailable("POST /encode", e))?;
        self.check(resp)
    }
}

impl Embedder for HttpEmbedder {
    fn spec(&self) -> &EmbedderSpec {
        &self.spec
    }

    fn embed_text(&self, text: &str) -> Result<EmbeddingVector> {
        self.encode(self.request("text", text.to_string()))
    }

    fn embed_image(&self, image: &[u8]) -> Result<EmbeddingVector> {
        self.encode(self.request("image", B64.encode(image)))
    }

    fn embed_images(&self, images: &[&[u8]]) -> Result<Vec<EmbeddingVector>> {
        if images.is_empty() {
            return Ok(Vec::new());
        }
        let body = EncodeBatchRequest {
            items: images
                .iter()
                .map(|img| self.request("image", B64.encode(img)))
                .collect(),
        };
        let resp: EncodeBatchResponse = self
            .agent
            .post(format!("{}/encode_batch", self.base))
            .send_json(&body)
            .map_err(|e| unavailable("POST /encode_batch", e))?
            .body_mut()
            .read_json()
            .map_err(|e| unavailable("POST /encode_batch", e))?;
        if resp.vectors.len() != images.len() {
            return Err(unavailable(
                "POST /encode_batch",
                format!("{} vectors for {} images", resp.vectors.len(), images.len()),
            ));
        }
        resp.vectors.into_iter().map(|v| self.check(v)).collect()
    }
}
