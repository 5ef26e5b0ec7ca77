use std::io::Write;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use gpvs_cli::api::ApiSearchRequest;
use gpvs_cli::embedder_client::HttpEmbedder;
use gpvs_cli::ingest::{run_ingest, IngestOptions};
use gpvs_cli::service::{router, AppState};
use gpvs_core::eval::{ExperimentConfig, Judgments, QuerySet};
use gpvs_core::{open_store, Embedder, GameCatalog, Method, MockEmbedder, ScanOptions, Store};

#[derive(Parser)]
#[command(
    name = "gpvs",
    version,
    about = "Search gameplay videos by describing what happens in them"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Filter submissions, embed their frames and write a store
    Ingest(IngestArgs),
    /// Rank videos in a store against a text query
    Search(SearchArgs),
    /// Run a query set against a store and print the accuracy table
    Eval(EvalArgs),
    /// Serve the HTTP API
    Serve(ServeArgs),
    /// Print a store's manifest summary
    StoreInfo(StoreInfoArgs),
}

#[derive(Args, Clone)]
struct EmbedderArgs {
    /// `mock` runs the deterministic in-process embedder, `http` talks to a worker
    #[arg(long, default_value = "mock", value_parser = ["mock", "http"])]
    embedder: String,
    #[arg(long, env = "EMBEDDER_URL", default_value = "http://127.0.0.1:8700")]
    embedder_url: String,
    /// Backend the worker must serve, e.g. ViT-B/32
    #[arg(long)]
    backend: Option<String>,
    /// Mock vector size; defaults to the store's dim, or 64 when building
    #[arg(long)]
    mock_dim: Option<usize>,
    #[arg(long, default_value_t = 0)]
    mock_seed: u64,
    /// Worker request timeout in seconds
    #[arg(long, default_value_t = 30)]
    embedder_timeout: u64,
}

impl EmbedderArgs {
    fn build(&self, store_dim: Option<usize>) -> anyhow::Result<Arc<dyn Embedder>> {
        Ok(match self.embedder.as_str() {
            "mock" => {
                let dim = self.mock_dim.or(store_dim).unwrap_or(64);
                Arc::new(MockEmbedder::new(dim, self.mock_seed)?)
            }
            _ => Arc::new(HttpEmbedder::connect(
                &self.embedder_url,
                self.backend.as_deref(),
                Duration::from_secs(self.embedder_timeout),
            )?),
        })
    }
}

fn check_backend(store: &Store, embedder: &dyn Embedder) -> anyhow::Result<()> {
    let (have, want) = (&embedder.spec().backend_id, &store.embedder().backend_id);
    if have != want {
        bail!("store was built with embedder {want:?} but {have:?} is configured");
    }
    Ok(())
}

#[derive(Args)]
struct IngestArgs {
    /// Newline-delimited JSON, one submission per line
    #[arg(long)]
    metadata: PathBuf,
    /// Directory with one sub-directory of frame files per submission
    #[arg(long)]
    frames_dir: PathBuf,
    #[arg(long, default_value = "data/catalog.json")]
    catalog: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 1)]
    stride: usize,
    #[command(flatten)]
    embedder: EmbedderArgs,
}

#[derive(Args)]
struct SearchArgs {
    #[arg(long, env = "STORE_PATH")]
    store: PathBuf,
    query: String,
    #[arg(long)]
    game: Option<String>,
    #[arg(long, default_value = "max")]
    method: String,
    #[arg(long, default_value_t = gpvs_core::search::DEFAULT_K)]
    k: usize,
    #[arg(long, default_value_t = gpvs_core::DEFAULT_POOL_SIZE)]
    pool_size: usize,
    #[arg(long, default_value_t = gpvs_core::DEFAULT_EVIDENCE)]
    evidence: usize,
    #[arg(long)]
    json: bool,
    #[command(flatten)]
    embedder: EmbedderArgs,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long, env = "STORE_PATH")]
    store: PathBuf,
    /// Query set file such as data/queries/simple.json
    #[arg(long)]
    queries: PathBuf,
    /// Newline-delimited relevance judgments
    #[arg(long)]
    judgments: PathBuf,
    #[arg(long, default_value = "max")]
    method: String,
    /// Top-k cut-off; the bug set always reports recall@5
    #[arg(long, default_value_t = 1)]
    k: usize,
    #[arg(long, default_value_t = gpvs_core::DEFAULT_POOL_SIZE)]
    pool_size: usize,
    /// Used for the short game keys in the table header
    #[arg(long)]
    catalog: Option<PathBuf>,
    #[arg(long)]
    json: bool,
    #[command(flatten)]
    embedder: EmbedderArgs,
}

#[derive(Args)]
struct ServeArgs {
    #[arg(long, env = "STORE_PATH")]
    store: PathBuf,
    #[arg(long, env = "BIND_ADDR", default_value = "127.0.0.1:8080")]
    bind: SocketAddr,
    #[arg(long, default_value_t = gpvs_core::DEFAULT_EVIDENCE)]
    evidence: usize,
    #[command(flatten)]
    embedder: EmbedderArgs,
}

#[derive(Args)]
struct StoreInfoArgs {
    #[arg(long, env = "STORE_PATH")]
    store: PathBuf,
    /// Print the full manifest
    #[arg(long)]
    json: bool,
}

fn open(path: &Path) -> anyhow::Result<Store> {
    open_store(path).with_context(|| format!("opening store {}", path.display()))
}

fn ingest(args: IngestArgs) -> anyhow::Result<()> {
    let catalog = GameCatalog::load(&args.catalog)
        .with_context(|| format!("loading catalog {}", args.catalog.display()))?;
    let embedder = args.embedder.build(None)?;
    let summary = run_ingest(
        &args.metadata,
        &args.frames_dir,
        &catalog,
        &args.out,
        embedder.as_ref(),
        &IngestOptions {
            stride: args.stride,
        },
    )?;
    println!("{}", serde_json::to_string(&summary)?);
    Ok(())
}

fn search(args: SearchArgs) -> anyhow::Result<()> {
    let store = open(&args.store)?;
    let embedder = args.embedder.build(Some(store.dim()))?;
    check_backend(&store, embedder.as_ref())?;
    let req = ApiSearchRequest {
        query: args.query,
        game: args.game,
        method: args.method,
        k: args.k,
        pool_size: args.pool_size,
    };
    let resp = gpvs_cli::run_search(
        &store,
        embedder.as_ref(),
        req,
        args.evidence,
        ScanOptions::default(),
    )?;
    let mut out = std::io::stdout().lock();
    if args.json {
        serde_json::to_writer(&mut out, &resp)?;
        writeln!(out)?;
        return Ok(());
    }
    if resp.results.is_empty() {
        writeln!(out, "no results")?;
    }
    for (rank, r) in resp.results.iter().enumerate() {
        let stamps: Vec<String> = r
            .evidence
            .iter()
            .map(|e| format!("{:.3}s", e.timestamp_ms as f64 / 1000.0))
            .collect();
        writeln!(
            out,
            "{:>3}  {:<10.4}  {:<12}  {}  [{}]",
            rank + 1,
            r.agg_score,
            r.submission_id,
            r.game,
            stamps.join(" ")
        )?;
    }
    Ok(())
}

fn eval(args: EvalArgs) -> anyhow::Result<()> {
    let store = open(&args.store)?;
    let embedder = args.embedder.build(Some(store.dim()))?;
    check_backend(&store, embedder.as_ref())?;
    let qs = QuerySet::load(&args.queries)
        .with_context(|| format!("loading queries {}", args.queries.display()))?;
    let judgments = Judgments::load(&args.judgments)
        .with_context(|| format!("loading judgments {}", args.judgments.display()))?;
    let catalog = args.catalog.as_deref().map(GameCatalog::load).transpose()?;
    let method: Method = args.method.parse()?;
    let cfg = ExperimentConfig {
        method,
        k: args.k,
        pool_size: args.pool_size,
        scan: ScanOptions::default(),
    };
    let report = gpvs_core::eval::run_experiment(&qs, &store, embedder.as_ref(), &cfg, &judgments)?;
    if args.json {
        println!("{}", report.to_json());
    } else {
        print!("{}", report.render_table(catalog.as_ref()));
    }
    Ok(())
}

fn store_info(args: StoreInfoArgs) -> anyhow::Result<()> {
    let store = open(&args.store)?;
    let m = store.manifest();
    if args.json {
        println!("{}", serde_json::to_string_pretty(m)?);
        return Ok(());
    }
    let r = &m.filter_stats.rejected_by_reason;
    println!(
        "embedder      {} (dim {})",
        m.embedder.backend_id, m.embedder.dim
    );
    println!("videos        {}", m.videos.len());
    println!("frames        {}", m.total_frames);
    println!("memory-mapped {}", store.is_mapped());
    println!(
        "ingest        accepted {} spam {} low_score {} duration {}",
        m.filter_stats.accepted, r.spam, r.low_score, r.duration
    );
    for (game, n) in store.game_counts() {
        println!("  {n:>6}  {game}");
    }
    Ok(())
}

async fn serve(args: ServeArgs) -> anyhow::Result<()> {
    let state = AppState::empty(ScanOptions::default(), args.evidence);
    let loader = state.clone();
    let store_path = args.store.clone();
    let emb_args = args.embedder.clone();
    tokio::task::spawn_blocking(move || {
        let store = match open(&store_path) {
            Ok(s) => s,
            Err(e) => {
                tracing::error!("{e:#}");
                std::process::exit(1);
            }
        };
        let dim = store.dim();
        tracing::info!(
            frames = store.total_frames(),
            videos = store.videos().len(),
            "store loaded"
        );
        let want = store.embedder().backend_id.clone();
        loader.set_store(store);
        loop {
            match emb_args.build(Some(dim)) {
                Ok(e) if e.spec().backend_id != want => {
                    tracing::error!(have = %e.spec().backend_id, want = %want, "embedder backend does not match store");
                    std::process::exit(1);
                }
                Ok(e) => {
                    tracing::info!(backend = %e.spec().backend_id, "embedder ready");
                    loader.set_embedder(e);
                    return;
                }
                Err(e) => {
                    tracing::warn!("embedder not ready, retrying: {e}");
                    std::thread::sleep(Duration::from_secs(2));
                }
            }
        }
    });
    let listener = tokio::net::TcpListener::bind(args.bind)
        .await
        .with_context(|| format!("binding {}", args.bind))?;
    tracing::info!(addr = %args.bind, "listening");
    axum::serve(listener, router(state))
        .with_graceful_shutdown(shutdown_signal())
        .await?;
    Ok(())
}

async fn shutdown_signal() {
    let ctrl_c = async {
        let _ = tokio::signal::ctrl_c().await;
    };
    #[cfg(unix)]
    let term = async {
        match tokio::signal::unix::signal(tokio::signal::unix::SignalKind::terminate()) {
            Ok(mut s) => {
                s.recv().await;
            }
            Err(_) => std::future::pending().await,
        }
    };
    #[cfg(not(unix))]
    let term = std::future::pending::<()>();
    tokio::select! {
        _ = ctrl_c => {}
        _ = term => {}
    }
    tracing::info!("shutting down, finishing in-flight requests");
}

fn main() -> anyhow::Result<()> {
    tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env()
                .unwrap_or_else(|_| tracing_subscriber::EnvFilter::new("info")),
        )
        .with_writer(std::io::stderr)
        .init();
    match Cli::parse().command {
        Command::Ingest(a) => ingest(a),
        Command::Search(a) => search(a),
        Command::Eval(a) => eval(a),
        Command::StoreInfo(a) => store_info(a),
        Command::Serve(a) => tokio::runtime::Runtime::new()?.block_on(serve(a)),
    }
}
