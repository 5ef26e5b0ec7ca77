//! Command-line and HTTP front ends for `gpvs-core`.

pub mod api;
pub mod embedder_client;
pub mod ingest;
pub mod service;

use gpvs_core::{Embedder, ScanOptions, Store};

pub use api::{ApiSearchRequest, ApiSearchResponse};

/// The search both surfaces run. `timing_ms` is measured around the scan.
pub fn run_search(
    store: &Store,
    embedder: &dyn Embedder,
    req: ApiSearchRequest,
    evidence: usize,
    scan: ScanOptions,
) -> gpvs_core::Result<ApiSearchResponse> {
    let req = req.into_search_request(evidence)?;
    let started = std::time::Instant::now();
    let ranked = gpvs_core::search(&req, store, embedder, scan)?;
    Ok(ApiSearchResponse {
        results: api::to_api_results(store, &ranked),
        timing_ms: started.elapsed().as_millis() as u64,
    })
}
