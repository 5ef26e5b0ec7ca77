#![allow(dead_code)]

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::json;

pub const PLANTED_QUERY: &str = "a horse stuck inside a barn roof";
pub const PLANTED_ID: &str = "p_planted";

pub fn catalog_path() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/catalog.json")
}

pub fn gpvs(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gpvs"))
        .args(args)
        .env_remove("STORE_PATH")
        .env_remove("EMBEDDER_URL")
        .env("RUST_LOG", "warn")
        .output()
        .expect("spawn gpvs")
}

pub fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

pub fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

pub struct Submission<'a> {
    pub id: &'a str,
    pub title: &'a str,
    pub score: i64,
    pub duration_s: f64,
    pub spam: bool,
    /// Raw bytes of each frame file, written as `<index>.jpg`.
    pub frames: Vec<(u32, Vec<u8>)>,
    pub fps: Option<f64>,
}

pub fn valid<'a>(id: &'a str, title: &'a str, frames: Vec<(u32, Vec<u8>)>) -> Submission<'a> {
    Submission {
        id,
        title,
        score: 10,
        duration_s: 12.0,
        spam: false,
        frames,
        fps: Some(30.0),
    }
}

pub fn noise_frames(id: &str, n: u32) -> Vec<(u32, Vec<u8>)> {
    (0..n)
        .map(|i| (i * 2, format!("{id}/frame/{i}").into_bytes()))
        .collect()
}

/// Writes `metadata.ndjson` and `frames/` under `root`.
pub fn write_inputs(root: &Path, subs: &[Submission]) -> (PathBuf, PathBuf) {
    let meta = root.join("metadata.ndjson");
    let frames = root.join("frames");
    fs::create_dir_all(&frames).unwrap();
    let mut lines = String::new();
    for s in subs {
        let rec = json!({
            "submission_id": s.id,
            "title": s.title,
            "score": s.score,
            "duration_s": s.duration_s,
            "spam_flag": s.spam,
            "url": format!("https://example.org/v/{}", s.id),
        });
        lines.push_str(&rec.to_string());
        lines.push('\n');
        let dir = frames.join(s.id);
        fs::create_dir_all(&dir).unwrap();
        for (idx, bytes) in &s.frames {
            fs::write(dir.join(format!("{idx}.jpg")), bytes).unwrap();
        }
        if let Some(fps) = s.fps {
            fs::write(dir.join("video.json"), json!({ "fps": fps }).to_string()).unwrap();
        }
    }
    fs::write(&meta, lines).unwrap();
    (meta, frames)
}

/// Eight valid videos over three games. Every frame of `p_planted` holds
/// exactly the planted query text; the others hold distinct noise.
pub fn planted_inputs(root: &Path) -> (PathBuf, PathBuf) {
    let ids = ["a1", "a2", "a3", "b1", "b2", "c1", "c2"];
    let titles = [
        "GTA V ragdoll fail",
        "gta 5 car launch",
        "GTAV bike glitch",
        "RDR2 horse physics",
        "Red Dead 2 wagon bug",
        "Just Cause 3 grapple",
        "JC3 tether madness",
    ];
    let mut subs: Vec<Submission> = ids
        .iter()
        .zip(titles)
        .map(|(id, t)| valid(id, t, noise_frames(id, 12)))
        .collect();
    let planted = (0..16)
        .map(|i| (i * 2, PLANTED_QUERY.as_bytes().to_vec()))
        .collect();
    subs.push(valid(PLANTED_ID, "Red Dead Redemption 2 barn", planted));
    write_inputs(root, &subs)
}

pub fn ingest(meta: &Path, frames: &Path, out: &Path, extra: &[&str]) -> Output {
    let catalog = catalog_path();
    let mut args = vec![
        "ingest",
        "--metadata",
        meta.to_str().unwrap(),
        "--frames-dir",
        frames.to_str().unwrap(),
        "--catalog",
        catalog.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ];
    args.extend_from_slice(extra);
    gpvs(&args)
}

/// Builds the planted store under `root/store` and returns its path.
pub fn planted_store(root: &Path) -> PathBuf {
    let (meta, frames) = planted_inputs(root);
    let out = root.join("store");
    let o = ingest(&meta, &frames, &out, &[]);
    assert!(o.status.success(), "ingest failed: {}", stderr(&o));
    out
}

pub struct Server {
    pub child: std::process::Child,
    pub base: String,
}

impl Server {
    /// Starts `gpvs serve` on a free port and waits until search is ready.
    pub fn start(store: &Path) -> Server {
        let port = {
            let l = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
            l.local_addr().unwrap().port()
        };
        let child = Command::new(env!("CARGO_BIN_EXE_gpvs"))
            .args(["serve", "--store", store.to_str().unwrap()])
            .env("BIND_ADDR", format!("127.0.0.1:{port}"))
            .env("RUST_LOG", "warn")
            .spawn()
            .expect("spawn gpvs serve");
        let server = Server {
            child,
            base: format!("http://127.0.0.1:{port}"),
        };
        for _ in 0..200 {
            if let Ok(mut r) = ureq::get(format!("{}/healthz", server.base)).call() {
                let v: serde_json::Value = r.body_mut().read_json().unwrap();
                if v["store_loaded"] == true && v["embedder_ready"] == true {
                    return server;
                }
            }
            std::thread::sleep(std::time::Duration::from_millis(50));
        }
        panic!("server did not become ready");
    }

    pub fn post(&self, path: &str, body: &serde_json::Value) -> (u16, String) {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .http_status_as_error(false)
            .build()
            .into();
        let mut r = agent
            .post(format!("{}{path}", self.base))
            .send_json(body)
            .unwrap();
        (r.status().as_u16(), r.body_mut().read_to_string().unwrap())
    }

    /// SIGTERM, then wait; returns whether the process exited cleanly.
    pub fn stop(mut self) -> bool {
        let pid = self.child.id().to_string();
        let _ = Command::new("kill").args(["-TERM", &pid]).status();
        self.child.wait().map(|s| s.success()).unwrap_or(false)
    }
}

impl Drop for Server {
    fn drop(&mut self) {
        let _ = self.child.kill();
    }
}
