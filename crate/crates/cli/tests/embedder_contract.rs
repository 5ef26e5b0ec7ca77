//! The worker contract exercised against an in-test fake worker whose
//! vectors come from the mock embedding function.

mod common;

use std::net::SocketAddr;
use std::time::Duration;

use axum::routing::{get, post};
use axum::{Json, Router};
use base64::engine::general_purpose::STANDARD as B64;
use base64::Engine as _;
use common::*;
use gpvs_cli::embedder_client::{
    EncodeBatchRequest, EncodeBatchResponse, EncodeRequest, EncodeResponse, HttpEmbedder,
};
use gpvs_core::{mock_embed, open_store, Embedder, EmbedderSpec, MockEmbedder};

const DIM: usize = 48;
const BACKEND: &str = "ViT-B/32";

fn encode(req: EncodeRequest) -> EncodeResponse {
    let bytes = match req.kind.as_str() {
        "text" => req.payload.into_bytes(),
        _ => B64.decode(req.payload).unwrap(),
    };
    // Scaled on purpose: the client must re-normalize.
    let vector = mock_embed(&bytes, DIM, 0)
        .into_inner()
        .into_iter()
        .map(|x| x * 3.0)
        .collect();
    EncodeResponse {
        vector,
        dim: DIM,
        backend: req.backend,
    }
}

fn fake_worker() -> SocketAddr {
    let listener = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
    listener.set_nonblocking(true).unwrap();
    let addr = listener.local_addr().unwrap();
    std::thread::spawn(move || {
        let rt = tokio::runtime::Runtime::new().unwrap();
        rt.block_on(async move {
            let app = Router::new()
                .route(
                    "/info",
                    get(|| async { Json(EmbedderSpec::new(BACKEND, DIM, 224).unwrap()) }),
                )
                .route(
                    "/encode",
                    post(|Json(r): Json<EncodeRequest>| async { Json(encode(r)) }),
                )
                .route(
                    "/encode_batch",
                    post(|Json(r): Json<EncodeBatchRequest>| async {
                        Json(EncodeBatchResponse {
                            vectors: r.items.into_iter().map(encode).collect(),
                        })
                    }),
                );
            let listener = tokio::net::TcpListener::from_std(listener).unwrap();
            axum::serve(listener, app).await.unwrap();
        });
    });
    addr
}

fn dead_url() -> String {
    let l = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = l.local_addr().unwrap();
    drop(l);
    format!("http://{addr}")
}

#[test]
fn client_matches_local_function() {
    let url = format!("http://{}", fake_worker());
    let client = HttpEmbedder::connect(&url, Some(BACKEND), Duration::from_secs(10)).unwrap();
    assert_eq!(client.spec().dim, DIM);
    assert_eq!(client.spec().input_image_side, 224);
    let local = MockEmbedder::new(DIM, 0).unwrap();

    let a = client.embed_text("a car flying").unwrap();
    let b = local.embed_text("a car flying").unwrap();
    for (x, y) in a.as_slice().iter().zip(b.as_slice()) {
        assert!((x - y).abs() < 1e-6);
    }
    assert_eq!(client.embed_text("a car flying").unwrap(), a);

    let images: Vec<Vec<u8>> = (0..5u8).map(|i| vec![i, 255, i ^ 7]).collect();
    let refs: Vec<&[u8]> = images.iter().map(Vec::as_slice).collect();
    let batch = client.embed_images(&refs).unwrap();
    assert_eq!(batch.len(), 5);
    for (img, v) in refs.iter().zip(&batch) {
        let single = client.embed_image(img).unwrap();
        for (x, y) in v.as_slice().iter().zip(single.as_slice()) {
            assert!((x - y).abs() < 1e-5);
        }
        let norm: f32 = v.as_slice().iter().map(|x| x * x).sum::<f32>().sqrt();
        assert!((norm - 1.0).abs() < 1e-5);
    }
}

#[test]
fn wrong_backend_or_dead_worker_is_unavailable() {
    let url = format!("http://{}", fake_worker());
    let err = HttpEmbedder::connect(&url, Some("RN101"), Duration::from_secs(10))
        .err()
        .unwrap();
    assert!(matches!(err, gpvs_core::Error::EmbedderUnavailable(_)));
    let err = HttpEmbedder::connect(&dead_url(), None, Duration::from_secs(2))
        .err()
        .unwrap();
    assert!(matches!(err, gpvs_core::Error::EmbedderUnavailable(_)));
}

#[test]
fn ingest_and_search_through_worker() {
    let url = format!("http://{}", fake_worker());
    let tmp = tempfile::tempdir().unwrap();
    let (meta, frames) = planted_inputs(tmp.path());
    let out = tmp.path().join("store");
    let o = ingest(
        &meta,
        &frames,
        &out,
        &["--embedder", "http", "--embedder-url", &url],
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let store = open_store(&out).unwrap();
    assert_eq!(store.embedder().backend_id, BACKEND);
    assert_eq!(store.dim(), DIM);

    let o = gpvs(&[
        "search",
        "--store",
        out.to_str().unwrap(),
        PLANTED_QUERY,
        "--json",
        "--embedder",
        "http",
        "--embedder-url",
        &url,
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let resp: gpvs_cli::ApiSearchResponse = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(resp.results[0].submission_id, PLANTED_ID);

    // The store records which backend built it; a mock query is refused.
    let o = gpvs(&["search", "--store", out.to_str().unwrap(), "q"]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("ViT-B/32"), "{}", stderr(&o));
}

#[test]
fn ingest_fails_when_worker_is_down() {
    let tmp = tempfile::tempdir().unwrap();
    let (meta, frames) = planted_inputs(tmp.path());
    let url = dead_url();
    let o = ingest(
        &meta,
        &frames,
        &tmp.path().join("store"),
        &["--embedder", "http", "--embedder-url", &url],
    );
    assert!(!o.status.success());
    assert!(
        stderr(&o).contains("embedder unavailable"),
        "{}",
        stderr(&o)
    );
}
