//! Retrieval evaluation: query sets, relevance judgments, binary top-k
//! accuracy, recall@5 and per-game / per-query report tables.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt::Write as _;
use std::io::BufRead;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::catalog::GameCatalog;
use crate::embedding::Embedder;
use crate::error::{Error, Result};
use crate::search::{embed_query, Method, QueryScores, ScanOptions};
use crate::store::Store;

/// Depth of the bug-query metric.
pub const RECALL_DEPTH: usize = 5;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QueryEntry {
    pub query: String,
    pub games: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuerySet {
    /// `simple`, `compound` or `bug`.
    pub name: String,
    pub entries: Vec<QueryEntry>,
}

impl QuerySet {
    pub fn from_json(text: &str) -> Result<Self> {
        let qs: QuerySet = serde_json::from_str(text)?;
        qs.validate()?;
        Ok(qs)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<()> {
        let mut seen = HashSet::new();
        for e in &self.entries {
            if e.games.is_empty() {
                return Err(Error::InvalidInput(format!(
                    "query {:?} lists no games",
                    e.query
                )));
            }
            if !seen.insert(e.query.as_str()) {
                return Err(Error::InvalidInput(format!(
                    "query {:?} listed twice",
                    e.query
                )));
            }
        }
        Ok(())
    }

    /// Bug queries are scored with recall@5, everything else with top-k.
    pub fn metric(&self, k: usize) -> Metric {
        if self.name == "bug" {
            Metric::RecallAt5
        } else {
            Metric::TopK(k)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "k", rename_all = "snake_case")]
pub enum Metric {
    TopK(usize),
    RecallAt5,
}

impl Metric {
    pub fn depth(self) -> usize {
        match self {
            Metric::TopK(k) => k,
            Metric::RecallAt5 => RECALL_DEPTH,
        }
    }

    pub fn label(self) -> String {
        match self {
            Metric::TopK(k) => format!("Top-{k} accuracy (%)"),
            Metric::RecallAt5 => "Recall@5 (%)".to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RelevanceJudgment {
    #[serde(alias = "query")]
    pub query_text: String,
    pub game: String,
    pub video_id: u32,
    pub relevant: bool,
}

/// Judgments indexed by `(query, game)`.
#[derive(Debug, Clone, Default)]
pub struct Judgments {
    cells: HashMap<(String, String), HashMap<u32, bool>>,
}

impl Judgments {
    pub fn new(records: impl IntoIterator<Item = RelevanceJudgment>) -> Result<Self> {
        let mut cells: HashMap<(String, String), HashMap<u32, bool>> = HashMap::new();
        for j in records {
            let cell = cells
                .entry((j.query_text.clone(), j.game.clone()))
                .or_default();
            if cell.insert(j.video_id, j.relevant).is_some() {
                return Err(Error::InvalidInput(format!(
                    "duplicate judgment for query {:?}, game {:?}, video {}",
                    j.query_text, j.game, j.video_id
                )));
            }
        }
        Ok(Self { cells })
    }

    /// Reads newline-delimited JSON judgments.
    pub fn read<R: BufRead>(reader: R) -> Result<Self> {
        let mut records = Vec::new();
        for (lineno, line) in reader.lines().enumerate() {
            let line = line.map_err(|e| Error::io("<judgments>", e))?;
            if line.trim().is_empty() {
                continue;
            }
            records.push(
                serde_json::from_str(&line).map_err(|e| {
                    Error::InvalidInput(format!("judgments line {}: {e}", lineno + 1))
                })?,
            );
        }
        Self::new(records)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read(std::io::BufReader::new(file))
    }

    /// Relevant videos for a cell, or `None` if the cell was never judged.
    pub fn relevant(&self, query: &str, game: &str) -> Option<HashSet<u32>> {
        self.cells
            .get(&(query.to_string(), game.to_string()))
            .map(|c| c.iter().filter(|(_, &r)| r).map(|(&v, _)| v).collect())
    }
}

/// 100 if any of the first `k` results is relevant, otherwise 0.
pub fn top_k_accuracy(results: &[u32], relevant: &HashSet<u32>, k: usize) -> f64 {
    if results.iter().take(k).any(|v| relevant.contains(v)) {
        100.0
    } else {
        0.0
    }
}

/// Percentage of the five result slots holding a relevant video. Slots
/// beyond the end of a short result list count as misses.
pub fn recall_at_5(top5: &[u32], relevant: &HashSet<u32>) -> f64 {
    let hits = top5
        .iter()
        .take(RECALL_DEPTH)
        .filter(|v| relevant.contains(v))
        .count();
    (100 * hits / RECALL_DEPTH) as f64
}

pub fn round2(x: f64) -> f64 {
    (x * 100.0).round() / 100.0
}

fn mean(values: &[f64]) -> f64 {
    round2(values.iter().sum::<f64>() / values.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub query: String,
    pub game: String,
    pub method: Method,
    pub backend: String,
    pub value: f64,
    /// Number of videos the search returned.
    pub returned: usize,
    /// Set when fewer than five videos were available for recall@5.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub short_list: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CellKey {
    pub query: String,
    pub game: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Average {
    pub name: String,
    pub cells: usize,
    pub mean: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportConfig {
    pub query_set: String,
    pub metric: Metric,
    pub k: usize,
    pub pool_size: usize,
    pub aggregation: Method,
    pub embedder: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub config: ReportConfig,
    pub cells: Vec<Cell>,
    pub missing_judgments: Vec<CellKey>,
    pub per_game: Vec<Average>,
    pub per_query: Vec<Average>,
    pub overall: Option<f64>,
}

/// Per-game and per-query unweighted means over `cells`, in first-seen
/// order, plus the overall mean.
pub fn averages(cells: &[Cell]) -> (Vec<Average>, Vec<Average>, Option<f64>) {
    fn group<'a>(cells: &'a [Cell], key: impl Fn(&'a Cell) -> &'a str) -> Vec<Average> {
        let mut order: Vec<&str> = Vec::new();
        let mut values: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
        for c in cells {
            let k = key(c);
            values
                .entry(k)
                .or_insert_with(|| {
                    order.push(k);
                    Vec::new()
                })
                .push(c.value);
        }
        order
            .into_iter()
            .map(|k| Average {
                name: k.to_string(),
                cells: values[k].len(),
                mean: mean(&values[k]),
            })
            .collect()
    }
    let per_game = group(cells, |c| c.game.as_str());
    let per_query = group(cells, |c| c.query.as_str());
    let all: Vec<f64> = cells.iter().map(|c| c.value).collect();
    let overall = (!all.is_empty()).then(|| mean(&all));
    (per_game, per_query, overall)
}

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub method: Method,
    /// Cut-off for top-k accuracy; ignored for recall@5.
    pub k: usize,
    pub pool_size: usize,
    pub scan: ScanOptions,
}

/// Runs every `(query, game)` cell of a query set and assembles the report.
///
/// Each query is embedded once; each cell restricts the scan to its game.
/// Cells without any judgments are listed in `missing_judgments` and left
/// out of every average.
pub fn run_experiment(
    qs: &QuerySet,
    store: &Store,
    embedder: &dyn Embedder,
    cfg: &ExperimentConfig,
    judgments: &Judgments,
) -> Result<EvalReport> {
    qs.validate()?;
    if cfg.k == 0 || cfg.pool_size == 0 {
        return Err(Error::InvalidInput(
            "k and pool_size must be at least 1".into(),
        ));
    }
    for e in &qs.entries {
        if let Some(g) = e.games.iter().find(|g| !store.has_game(g)) {
            return Err(Error::UnknownGame(g.clone()));
        }
    }
    if embedder.spec().dim != store.dim() {
        return Err(Error::DimensionMismatch {
            expected: store.dim(),
            actual: embedder.spec().dim,
        });
    }
    let metric = qs.metric(cfg.k);
    let backend = embedder.spec().backend_id.clone();
    let mut cells = Vec::new();
    let mut missing = Vec::new();
    for entry in &qs.entries {
        let query = embed_query(embedder, &entry.query)?;
        for game in &entry.games {
            let scores = QueryScores::compute(store, query.as_slice(), Some(game), cfg.scan)?;
            let ranked = scores.rank(cfg.method, metric.depth(), cfg.pool_size, 0);
            let ids: Vec<u32> = ranked.iter().map(|r| r.video_id).collect();
            let Some(relevant) = judgments.relevant(&entry.query, game) else {
                missing.push(CellKey {
                    query: entry.query.clone(),
                    game: game.clone(),
                });
                continue;
            };
            let (value, short_list) = match metric {
                Metric::TopK(k) => (top_k_accuracy(&ids, &relevant, k), false),
                Metric::RecallAt5 => (recall_at_5(&ids, &relevant), ids.len() < RECALL_DEPTH),
            };
            cells.push(Cell {
                query: entry.query.clone(),
                game: game.clone(),
                method: cfg.method,
                backend: backend.clone(),
                value,
                returned: ids.len(),
                short_list,
            });
        }
    }
    let (per_game, per_query, overall) = averages(&cells);
    Ok(EvalReport {
        config: ReportConfig {
            query_set: qs.name.clone(),
            metric,
            k: metric.depth(),
            pool_size: cfg.pool_size,
            aggregation: cfg.method,
            embedder: backend,
        },
        cells,
        missing_judgments: missing,
        per_game,
        per_query,
        overall,
    })
}

impl EvalReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// Plain-text table: one row per query, one column per game, `-` where
    /// a query does not apply, an `N` column and an `Average` row. Values
    /// print as integers.
    pub fn render_table(&self, catalog: Option<&GameCatalog>) -> String {
        let label = |g: &str| -> String {
            catalog.map_or_else(|| g.to_string(), |c| c.key_for(g).to_string())
        };
        let games: Vec<&str> = self.per_game.iter().map(|a| a.name.as_str()).collect();
        let lookup: HashMap<(&str, &str), f64> = self
            .cells
            .iter()
            .map(|c| ((c.query.as_str(), c.game.as_str()), c.value))
            .collect();
        let qw = self
            .per_query
            .iter()
            .map(|a| a.name.chars().count())
            .chain(["Average".len(), "Query".len()])
            .max()
            .unwrap_or(5);
        let cw = games
            .iter()
            .map(|g| label(g).chars().count())
            .max()
            .unwrap_or(3)
            .max(4);

        let mut out = String::new();
        let _ = writeln!(
            out,
            "{} | {} | {} | aggregation={} embedder={}",
            self.config.query_set,
            self.config.metric.label(),
            format_args!("pool_size={}", self.config.pool_size),
            self.config.aggregation,
            self.config.embedder
        );
        let _ = write!(out, "{:<qw$} {:>3}", "Query", "N");
        for g in &games {
            let _ = write!(out, " {:>cw$}", label(g));
        }
        let _ = writeln!(out, " {:>7}", "Average");
        for q in &self.per_query {
            let _ = write!(out, "{:<qw$} {:>3}", q.name, q.cells);
            for g in &games {
                match lookup.get(&(q.name.as_str(), *g)) {
                    Some(v) => {
                        let _ = write!(out, " {:>cw$.0}", v);
                    }
                    None => {
                        let _ = write!(out, " {:>cw$}", "-");
                    }
                }
            }
            let _ = writeln!(out, " {:>7.0}", q.mean);
        }
        let mean_n = if self.per_query.is_empty() {
            0.0
        } else {
            self.cells.len() as f64 / self.per_query.len() as f64
        };
        let _ = write!(out, "{:<qw$} {:>3.1}", "Average", mean_n);
        for a in &self.per_game {
            let _ = write!(out, " {:>cw$.0}", a.mean);
        }
        match self.overall {
            Some(o) => {
                let _ = writeln!(out, " {:>7.2}", o);
            }
            None => {
                let _ = writeln!(out, " {:>7}", "-");
            }
        }
        if !self.missing_judgments.is_empty() {
            let _ = writeln!(
                out,
                "unjudged cells (excluded): {}",
                self.missing_judgments.len()
            );
            for m in &self.missing_judgments {
                let _ = writeln!(out, "  {} / {}", m.query, m.game);
            }
        }
        let short = self.cells.iter().filter(|c| c.short_list).count();
        if short > 0 {
            let _ = writeln!(
                out,
                "cells with fewer than 5 videos (missing slots scored as misses): {short}"
            );
        }
        out
    }
}
