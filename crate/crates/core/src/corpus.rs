//! Post ingestion, engagement scores and per-page normalization.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fs;
use std::io::{self, BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::biasdetect::BiasKind;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("page has degenerate scores ({0}): needs at least 2 posts and non-zero spread")]
    DegeneratePage(String),
    #[error("schema error: {0}")]
    Schema(String),
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CorpusFormat {
    Csv,
    Jsonlines,
}

impl CorpusFormat {
    pub fn from_path(path: &Path) -> Option<Self> {
        match path.extension()?.to_str()? {
            "csv" => Some(CorpusFormat::Csv),
            "jsonl" | "jsonlines" | "ndjson" => Some(CorpusFormat::Jsonlines),
            _ => None,
        }
    }
}

/// One promotional image post.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PostRecord {
    pub post_id: String,
    pub page_id: String,
    pub image_path: PathBuf,
    pub likes: u64,
    pub retweets: u64,
    pub timestamp: DateTime<Utc>,
    pub text: String,
    pub external_bias_labels: BTreeSet<BiasKind>,
    pub followers: Option<u64>,
}

impl PostRecord {
    pub fn engagement(&self) -> f64 {
        compute_engagement(self.likes, self.retweets)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PageStats {
    pub page_id: String,
    pub mu: f64,
    pub sigma: f64,
    pub n_posts: usize,
    pub followers: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredPost {
    pub post: PostRecord,
    pub epsilon: f64,
    pub epsilon_n: f64,
    pub epsilon_nt: Option<f64>,
}

impl ScoredPost {
    /// The score used as a training label: transformed if available, else normalized.
    pub fn label(&self) -> f64 {
        self.epsilon_nt.unwrap_or(self.epsilon_n)
    }
}

/// Raw engagement: likes plus retweets.
pub fn compute_engagement(likes: u64, retweets: u64) -> f64 {
    (likes as f64) + (retweets as f64)
}

/// Mean and population standard deviation.
pub(crate) fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Z-scores one page's engagement scores.
pub fn normalize_page(page_id: &str, scores: &[f64]) -> Result<(PageStats, Vec<f64>), CorpusError> {
    if scores.len() < 2 {
        return Err(CorpusError::DegeneratePage(format!(
            "{page_id}: {} post(s)",
            scores.len()
        )));
    }
    let (mu, sigma) = mean_std(scores);
    if !(sigma > 0.0) || !sigma.is_finite() {
        return Err(CorpusError::DegeneratePage(format!("{page_id}: zero variance")));
    }
    let z = scores.iter().map(|s| (s - mu) / sigma).collect();
    Ok((
        PageStats {
            page_id: page_id.to_string(),
            mu,
            sigma,
            n_posts: scores.len(),
            followers: None,
        },
        z,
    ))
}

/// Result of scoring a whole corpus page by page.
#[derive(Debug, Clone, Default)]
pub struct ScoredCorpus {
    pub posts: Vec<ScoredPost>,
    pub pages: Vec<PageStats>,
    /// Page ids dropped because they could not be normalized.
    pub excluded_pages: Vec<String>,
}

/// Groups posts by page, normalizes each page and drops degenerate pages with a warning.
pub fn score_corpus(posts: &[PostRecord]) -> ScoredCorpus {
    let mut by_page: BTreeMap<&str, Vec<&PostRecord>> = BTreeMap::new();
    for p in posts {
        by_page.entry(p.page_id.as_str()).or_default().push(p);
    }
    let mut out = ScoredCorpus::default();
    for (page_id, page_posts) in by_page {
        let eps: Vec<f64> = page_posts.iter().map(|p| p.engagement()).collect();
        match normalize_page(page_id, &eps) {
            Ok((mut stats, z)) => {
                stats.followers = page_posts.iter().find_map(|p| p.followers);
                for ((post, e), zn) in page_posts.iter().zip(&eps).zip(z) {
                    out.posts.push(ScoredPost {
                        post: (*post).clone(),
                        epsilon: *e,
                        epsilon_n: zn,
                        epsilon_nt: None,
                    });
                }
                out.pages.push(stats);
            }
            Err(e) => {
                log::warn!("excluding page: {e}");
                out.excluded_pages.push(page_id.to_string());
            }
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Reject {
    pub line: usize,
    pub reason: String,
}

#[derive(Debug, Clone, Default)]
pub struct LoadedCorpus {
    pub records: Vec<PostRecord>,
    pub rejects: Vec<Reject>,
}

impl LoadedCorpus {
    pub fn write_rejects(&self, path: &Path) -> io::Result<()> {
        let mut f = io::BufWriter::new(fs::File::create(path)?);
        for r in &self.rejects {
            serde_json::to_writer(&mut f, r)?;
            f.write_all(b"\n")?;
        }
        f.flush()
    }
}

#[derive(Debug, Deserialize)]
struct JsonRow {
    post_id: Option<String>,
    page_id: Option<String>,
    image: Option<String>,
    likes: Option<serde_json::Value>,
    retweets: Option<serde_json::Value>,
    timestamp: Option<String>,
    text: Option<String>,
    #[serde(default)]
    bias_labels: Option<Vec<String>>,
    #[serde(default)]
    followers: Option<serde_json::Value>,
}

const REQUIRED_FIELDS: [&str; 7] = [
    "post_id",
    "page_id",
    "image",
    "likes",
    "retweets",
    "timestamp",
    "text",
];

fn parse_count(field: &str, v: Option<&serde_json::Value>) -> Result<u64, String> {
    let v = v.ok_or_else(|| format!("missing field `{field}`"))?;
    v.as_u64()
        .ok_or_else(|| format!("field `{field}` must be a non-negative integer, got {v}"))
}

fn parse_count_str(field: &str, v: Option<&str>) -> Result<u64, String> {
    let v = v.ok_or_else(|| format!("missing field `{field}`"))?;
    v.trim()
        .parse::<u64>()
        .map_err(|_| format!("field `{field}` must be a non-negative integer, got {v:?}"))
}

fn parse_timestamp(v: Option<&str>) -> Result<DateTime<Utc>, String> {
    let v = v.ok_or_else(|| "missing field `timestamp`".to_string())?;
    DateTime::parse_from_rfc3339(v.trim())
        .map(|t| t.with_timezone(&Utc))
        .map_err(|e| format!("bad timestamp {v:?}: {e}"))
}

fn parse_labels<'a>(labels: impl Iterator<Item = &'a str>) -> Result<BTreeSet<BiasKind>, String> {
    labels
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<BiasKind>().map_err(|e| e.to_string()))
        .collect()
}

fn required<'a>(field: &str, v: Option<&'a str>) -> Result<&'a str, String> {
    v.ok_or_else(|| format!("missing field `{field}`"))
}

fn json_row(line: &str) -> Result<PostRecord, String> {
    let row: JsonRow = serde_json::from_str(line).map_err(|e| format!("invalid JSON: {e}"))?;
    Ok(PostRecord {
        post_id: required("post_id", row.post_id.as_deref())?.to_string(),
        page_id: required("page_id", row.page_id.as_deref())?.to_string(),
        image_path: PathBuf::from(required("image", row.image.as_deref())?),
        likes: parse_count("likes", row.likes.as_ref())?,
        retweets: parse_count("retweets", row.retweets.as_ref())?,
        timestamp: parse_timestamp(row.timestamp.as_deref())?,
        text: required("text", row.text.as_deref())?.to_string(),
        external_bias_labels: parse_labels(
            row.bias_labels.iter().flatten().map(String::as_str),
        )?,
        followers: match row.followers {
            None | Some(serde_json::Value::Null) => None,
            Some(v) => Some(parse_count("followers", Some(&v))?),
        },
    })
}

/// Loads a corpus file. Malformed rows become rejects; a CSV missing a
/// required header column is a schema error for the whole file.
pub fn load_corpus(path: &Path, format: CorpusFormat) -> Result<LoadedCorpus, CorpusError> {
    let file = fs::File::open(path)?;
    let mut out = LoadedCorpus::default();
    let mut seen = HashSet::new();
    let mut push = |out: &mut LoadedCorpus, line: usize, rec: Result<PostRecord, String>| match rec {
        Ok(r) if !seen.insert(r.post_id.clone()) => out.rejects.push(Reject {
            line,
            reason: format!("duplicate post_id {:?}", r.post_id),
        }),
        Ok(r) => out.records.push(r),
        Err(reason) => out.rejects.push(Reject { line, reason }),
    };
    match format {
        CorpusFormat::Jsonlines => {
            for (i, line) in BufReader::new(file).lines().enumerate() {
                let line = line?;
                if line.trim().is_empty() {
                    continue;
                }
                push(&mut out, i + 1, json_row(&line));
            }
        }
        CorpusFormat::Csv => {
            let mut rdr = csv::ReaderBuilder::new().flexible(true).from_reader(file);
            let headers = rdr
                .headers()
                .map_err(|e| CorpusError::Schema(e.to_string()))?
                .clone();
            let col = |name: &str| headers.iter().position(|h| h.trim() == name);
            for name in REQUIRED_FIELDS {
                if col(name).is_none() {
                    return Err(CorpusError::Schema(format!("missing column `{name}`")));
                }
            }
            let (labels_col, followers_col) = (col("bias_labels"), col("followers"));
            for (i, rec) in rdr.records().enumerate() {
                // header is line 1
                let line = i + 2;
                let rec = match rec {
                    Ok(r) => r,
                    Err(e) => {
                        push(&mut out, line, Err(format!("invalid CSV row: {e}")));
                        continue;
                    }
                };
                let get = |name: &str| col(name).and_then(|c| rec.get(c));
                let parsed = (|| -> Result<PostRecord, String> {
                    Ok(PostRecord {
                        post_id: required("post_id", get("post_id"))?.to_string(),
                        page_id: required("page_id", get("page_id"))?.to_string(),
                        image_path: PathBuf::from(required("image", get("image"))?),
                        likes: parse_count_str("likes", get("likes").filter(|s| !s.is_empty()))?,
                        retweets: parse_count_str(
                            "retweets",
                            get("retweets").filter(|s| !s.is_empty()),
                        )?,
                        timestamp: parse_timestamp(get("timestamp"))?,
                        text: required("text", get("text"))?.to_string(),
                        external_bias_labels: parse_labels(
                            labels_col
                                .and_then(|c| rec.get(c))
                                .unwrap_or("")
                                .split(';'),
                        )?,
                        followers: match followers_col.and_then(|c| rec.get(c)) {
                            None => None,
                            Some(s) if s.trim().is_empty() => None,
                            Some(s) => Some(parse_count_str("followers", Some(s))?),
                        },
                    })
                })();
                push(&mut out, line, parsed);
            }
        }
    }
    Ok(out)
}

/// Writes records in the JSON-lines corpus schema.
pub fn write_jsonlines(path: &Path, records: &[PostRecord]) -> io::Result<()> {
    let mut f = io::BufWriter::new(fs::File::create(path)?);
    for r in records {
        let mut obj = serde_json::json!({
            "post_id": r.post_id,
            "page_id": r.page_id,
            "image": r.image_path.to_string_lossy(),
            "likes": r.likes,
            "retweets": r.retweets,
            "timestamp": r.timestamp.to_rfc3339(),
            "text": r.text,
            "bias_labels": r.external_bias_labels.iter().map(|b| b.as_str()).collect::<Vec<_>>(),
        });
        if let Some(fl) = r.followers {
            obj["followers"] = fl.into();
        }
        serde_json::to_writer(&mut f, &obj)?;
        f.write_all(b"\n")?;
    }
    f.flush()
}

/// Writes records in the CSV corpus schema.
pub fn write_csv(path: &Path, records: &[PostRecord]) -> io::Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record([
        "post_id",
        "page_id",
        "image",
        "likes",
        "retweets",
        "timestamp",
        "text",
        "bias_labels",
        "followers",
    ])?;
    for r in records {
        let labels: Vec<&str> = r.external_bias_labels.iter().map(|b| b.as_str()).collect();
        w.write_record([
            r.post_id.clone(),
            r.page_id.clone(),
            r.image_path.to_string_lossy().into_owned(),
            r.likes.to_string(),
            r.retweets.to_string(),
            r.timestamp.to_rfc3339(),
            r.text.clone(),
            labels.join(";"),
            r.followers.map(|f| f.to_string()).unwrap_or_default(),
        ])?;
    }
    w.flush()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PageSummary {
    pub followers: u64,
    pub mean: f64,
    pub median: f64,
    pub variance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationReport {
    pub pearson: f64,
    pub spearman: f64,
    pub pages: Vec<PageSummary>,
}

pub(crate) fn pearson(x: &[f64], y: &[f64]) -> f64 {
    let (mx, sx) = mean_std(x);
    let (my, sy) = mean_std(y);
    if sx == 0.0 || sy == 0.0 {
        return 0.0;
    }
    let cov = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum::<f64>() / x.len() as f64;
    (cov / (sx * sy)).clamp(-1.0, 1.0)
}

/// Fractional ranks (ties share their average rank), 1-based.
pub(crate) fn ranks(values: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut out = vec![0.0; values.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && values[idx[j + 1]] == values[idx[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            out[k] = r;
        }
        i = j + 1;
    }
    out
}

pub fn spearman(x: &[f64], y: &[f64]) -> f64 {
    pearson(&ranks(x), &ranks(y))
}

fn median(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    }
}

/// Correlation between page follower counts and mean page engagement, plus
/// per-page median/variance for plotting.
pub fn page_correlation_report(
    pages: &[(u64, Vec<f64>)],
) -> Result<CorrelationReport, CorpusError> {
    let usable: Vec<&(u64, Vec<f64>)> = pages.iter().filter(|(_, s)| !s.is_empty()).collect();
    if usable.len() < 3 {
        return Err(CorpusError::InsufficientData(format!(
            "need at least 3 pages with followers, got {}",
            usable.len()
        )));
    }
    let mut summaries = Vec::with_capacity(usable.len());
    for (followers, scores) in usable {
        let (mean, sd) = mean_std(scores);
        let mut sorted = scores.clone();
        sorted.sort_by(f64::total_cmp);
        summaries.push(PageSummary {
            followers: *followers,
            mean,
            median: median(&sorted),
            variance: sd * sd,
        });
    }
    let f: Vec<f64> = summaries.iter().map(|s| s.followers as f64).collect();
    let m: Vec<f64> = summaries.iter().map(|s| s.mean).collect();
    Ok(CorrelationReport {
        pearson: pearson(&f, &m),
        spearman: spearman(&f, &m),
        pages: summaries,
    })
}

/// Builds the report input from a scored corpus, skipping pages without follower counts.
pub fn correlation_input(scored: &ScoredCorpus) -> Vec<(u64, Vec<f64>)> {
    scored
        .pages
        .iter()
        .filter_map(|p| {
            let f = p.followers?;
            let scores = scored
                .posts
                .iter()
                .filter(|s| s.post.page_id == p.page_id)
                .map(|s| s.epsilon)
                .collect();
            Some((f, scores))
        })
        .collect()
}
