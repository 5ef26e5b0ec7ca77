use gpvs_wasm::demo::{Demo, SCENES};

#[test]
fn every_scene_is_found_under_both_methods() {
    let demo = Demo::build(60, 40, 32, 7).unwrap();
    let s = demo.summary();
    assert_eq!((s.videos, s.frames, s.dim), (60, 2400, 32));
    assert_eq!(s.games.iter().map(|g| g.1).sum::<u64>(), 60);
    for scene in SCENES {
        let max = demo.search(scene, "max", 5, 1000, None).unwrap();
        assert!((max[0].agg_score - 1.0).abs() < 1e-5, "{scene}");
        let pool = demo.search(scene, "pool", 5, 8, None).unwrap();
        let curve = demo.frame_scores(scene, pool[0].video_id).unwrap();
        assert_eq!(curve.len(), 40);
        assert!(curve.iter().any(|&x| (x - 1.0).abs() < 1e-5));
    }
}

#[test]
fn game_scope_and_errors() {
    let demo = Demo::build(12, 10, 16, 1).unwrap();
    let hits = demo
        .search("anything", "max", 50, 1000, Some("Just Cause 3"))
        .unwrap();
    assert_eq!(hits.len(), 3);
    assert!(hits.iter().all(|h| h.game == "Just Cause 3"));
    assert!(demo
        .search("x", "avg", 5, 10, None)
        .unwrap_err()
        .contains("pool"));
    assert!(demo.search("x", "max", 0, 10, None).is_err());
    assert!(demo.search("x", "max", 5, 10, Some("Halo")).is_err());
    assert!(demo.frame_scores("x", 12).is_err());
    assert!(Demo::build(0, 10, 16, 1).is_err());
    assert!(Demo::build(2, 10, 1, 1).is_err());
}

#[test]
fn same_seed_same_store() {
    let a = Demo::build(20, 15, 24, 3).unwrap();
    let b = Demo::build(20, 15, 24, 3).unwrap();
    let q = SCENES[2];
    assert_eq!(
        serde_json::to_string(&a.search(q, "pool", 10, 30, None).unwrap()).unwrap(),
        serde_json::to_string(&b.search(q, "pool", 10, 30, None).unwrap()).unwrap()
    );
}
