//! Submission metadata and the dataset curation filters.

use std::collections::HashSet;
use std::fmt;
use std::io::BufRead;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Posts scoring below this are treated as low-quality content.
pub const MIN_SCORE: i64 = 1;
/// Exclusive lower bound on video duration, in seconds.
pub const MIN_DURATION_S: f64 = 2.0;
/// Exclusive upper bound on video duration, in seconds.
pub const MAX_DURATION_S: f64 = 60.0;

/// One crawled post, as read from the newline-delimited ingest file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubmissionMeta {
    pub submission_id: String,
    #[serde(default)]
    pub title: String,
    pub score: i64,
    pub duration_s: f64,
    #[serde(default)]
    pub spam_flag: bool,
    #[serde(default)]
    pub url: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RejectReason {
    Spam,
    LowScore,
    Duration,
}

impl fmt::Display for RejectReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RejectReason::Spam => "spam",
            RejectReason::LowScore => "low_score",
            RejectReason::Duration => "duration",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Accepted,
    Rejected(RejectReason),
}

/// Applies the filters in fixed order: spam, then score, then duration.
/// The first failing rule is the one reported.
pub fn validate_submission(meta: &SubmissionMeta) -> Verdict {
    if meta.spam_flag {
        Verdict::Rejected(RejectReason::Spam)
    } else if meta.score < MIN_SCORE {
        Verdict::Rejected(RejectReason::LowScore)
    } else if !(meta.duration_s > MIN_DURATION_S && meta.duration_s < MAX_DURATION_S) {
        Verdict::Rejected(RejectReason::Duration)
    } else {
        Verdict::Accepted
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RejectCounts {
    pub spam: u64,
    pub low_score: u64,
    pub duration: u64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FilterStats {
    pub accepted: u64,
    pub rejected_by_reason: RejectCounts,
}

impl FilterStats {
    pub fn record(&mut self, verdict: Verdict) {
        match verdict {
            Verdict::Accepted => self.accepted += 1,
            Verdict::Rejected(RejectReason::Spam) => self.rejected_by_reason.spam += 1,
            Verdict::Rejected(RejectReason::LowScore) => self.rejected_by_reason.low_score += 1,
            Verdict::Rejected(RejectReason::Duration) => self.rejected_by_reason.duration += 1,
        }
    }

    pub fn rejected(&self) -> u64 {
        let r = &self.rejected_by_reason;
        r.spam + r.low_score + r.duration
    }
}

/// Reads newline-delimited JSON submissions. Blank lines are skipped;
/// duplicate submission ids and empty ids are rejected.
pub fn read_submissions<R: BufRead>(reader: R) -> Result<Vec<SubmissionMeta>> {
    let mut out = Vec::new();
    let mut seen = HashSet::new();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io("<metadata>", e))?;
        if line.trim().is_empty() {
            continue;
        }
        let meta: SubmissionMeta = serde_json::from_str(&line)
            .map_err(|e| Error::InvalidInput(format!("metadata line {}: {e}", lineno + 1)))?;
        if meta.submission_id.is_empty() {
            return Err(Error::InvalidInput(format!(
                "metadata line {}: empty submission_id",
                lineno + 1
            )));
        }
        if !seen.insert(meta.submission_id.clone()) {
            return Err(Error::InvalidInput(format!(
                "metadata line {}: duplicate submission_id {:?}",
                lineno + 1,
                meta.submission_id
            )));
        }
        out.push(meta);
    }
    Ok(out)
}
