mod common;

use common::*;
use gpvs_cli::api::{to_api_results, ApiSearchResponse};
use gpvs_core::{open_store, search, Method, MockEmbedder, ScanOptions, SearchRequest};

fn cli_search(store: &std::path::Path, query: &str, extra: &[&str]) -> std::process::Output {
    let mut args = vec!["search", "--store", store.to_str().unwrap(), query];
    args.extend_from_slice(extra);
    gpvs(&args)
}

#[test]
fn planted_video_first_under_both_methods() {
    let tmp = tempfile::tempdir().unwrap();
    let store = planted_store(tmp.path());
    for method in ["max", "pool"] {
        let o = cli_search(&store, PLANTED_QUERY, &["--method", method, "--json"]);
        assert!(o.status.success(), "{}", stderr(&o));
        let resp: ApiSearchResponse = serde_json::from_str(&stdout(&o)).unwrap();
        assert_eq!(resp.results[0].submission_id, PLANTED_ID, "{method}");
        if method == "max" {
            assert!((resp.results[0].agg_score - 1.0).abs() < 1e-5);
            let idx: Vec<u32> = resp.results[0]
                .evidence
                .iter()
                .map(|e| e.frame_index)
                .collect();
            assert_eq!(idx, [0, 2, 4, 6, 8]);
            assert_eq!(resp.results[0].evidence[4].timestamp_ms, 267);
        }
    }
}

#[test]
fn json_output_matches_in_process_search() {
    let tmp = tempfile::tempdir().unwrap();
    let path = planted_store(tmp.path());
    let store = open_store(&path).unwrap();
    let emb = MockEmbedder::new(store.dim(), 0).unwrap();
    for (method, game) in [
        (Method::MaxScore, None),
        (Method::PoolCount, None),
        (Method::MaxScore, Some("Red Dead Redemption 2")),
        (Method::PoolCount, Some("Grand Theft Auto V")),
    ] {
        let mut req = SearchRequest::new("a car flying over a bridge", method);
        req.game = game.map(str::to_string);
        req.pool_size = 20;
        let want = to_api_results(
            &store,
            &search(&req, &store, &emb, ScanOptions::default()).unwrap(),
        );

        let mut extra = vec!["--json", "--method", method.as_str(), "--pool-size", "20"];
        if let Some(g) = game {
            extra.extend(["--game", g]);
        }
        let o = cli_search(&path, &req.query_text, &extra);
        assert!(o.status.success(), "{}", stderr(&o));
        let got: ApiSearchResponse = serde_json::from_str(&stdout(&o)).unwrap();
        assert_eq!(got.results, want);
    }
}

#[test]
fn default_k_is_five() {
    let tmp = tempfile::tempdir().unwrap();
    let store = planted_store(tmp.path());
    let o = cli_search(&store, "anything", &["--json"]);
    let resp: ApiSearchResponse = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(resp.results.len(), 5);
    assert!(resp
        .results
        .windows(2)
        .all(|w| w[0].agg_score >= w[1].agg_score));
    assert!(resp.results.iter().all(|r| r.evidence.len() <= 5));
}

#[test]
fn table_output() {
    let tmp = tempfile::tempdir().unwrap();
    let store = planted_store(tmp.path());
    let o = cli_search(&store, PLANTED_QUERY, &["--k", "2"]);
    assert!(o.status.success());
    let text = stdout(&o);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 2);
    assert!(
        lines[0].contains(PLANTED_ID) && lines[0].contains("0.267s"),
        "{text}"
    );
}

#[test]
fn error_exits() {
    let tmp = tempfile::tempdir().unwrap();
    let store = planted_store(tmp.path());

    let o = cli_search(&tmp.path().join("missing"), "q", &[]);
    assert!(!o.status.success());

    let o = cli_search(&store, "q", &["--game", "Halo"]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("unknown game"), "{}", stderr(&o));

    let o = cli_search(&store, "q", &["--mock-dim", "32"]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("dimension mismatch"), "{}", stderr(&o));

    let o = cli_search(&store, "q", &["--method", "avg"]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("max") && stderr(&o).contains("pool"));

    let o = cli_search(&store, "q", &["--k", "0"]);
    assert!(!o.status.success());
}

#[test]
fn store_info() {
    let tmp = tempfile::tempdir().unwrap();
    let store = planted_store(tmp.path());
    let o = gpvs(&["store-info", "--store", store.to_str().unwrap()]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert!(text.contains("videos        8"), "{text}");
    assert!(text.contains("frames        100"), "{text}");
    assert!(text.contains("     3  Grand Theft Auto V"), "{text}");

    let o = gpvs(&["store-info", "--store", store.to_str().unwrap(), "--json"]);
    let m: gpvs_core::Manifest = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(m.total_frames, 100);
}

#[test]
fn store_path_env() {
    let tmp = tempfile::tempdir().unwrap();
    let store = planted_store(tmp.path());
    let o = std::process::Command::new(env!("CARGO_BIN_EXE_gpvs"))
        .args(["store-info"])
        .env("STORE_PATH", &store)
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
}
