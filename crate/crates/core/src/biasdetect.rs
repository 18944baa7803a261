//! Bias labeling: local outlier factors over engagement scores, lexicon
//! classifiers with embedding-based keyword expansion, holiday windows and
//! externally supplied visual labels.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fmt;
use std::fs;
use std::io::{self, BufRead, BufReader};
use std::path::Path;
use std::str::FromStr;

use chrono::{DateTime, Datelike, Duration, NaiveDate, Utc};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::corpus::ScoredPost;

#[derive(Debug, Error)]
pub enum BiasError {
    #[error("k must be in 1..n (k = {k}, n = {n})")]
    BadK { k: usize, n: usize },
    #[error("points have inconsistent dimensions")]
    RaggedPoints,
    #[error("none of the seed words are in the embedding vocabulary")]
    NoSeedInVocabulary,
    #[error("embedding dimension mismatch on line {line}: expected {expected}, got {got}")]
    DimensionMismatch {
        line: usize,
        expected: usize,
        got: usize,
    },
    #[error("embedding file is empty")]
    EmptyVocabulary,
    #[error("malformed embedding line {line}: {reason}")]
    MalformedEmbedding { line: usize, reason: String },
    #[error("bad lexicon config: {0}")]
    Config(String),
    #[error("unknown bias kind {0:?}")]
    UnknownKind(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// The machine-assignable bias categories.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum BiasKind {
    HumanPresence,
    AnimalPresence,
    Holiday,
    Discount,
}

impl BiasKind {
    pub const ALL: [BiasKind; 4] = [
        BiasKind::HumanPresence,
        BiasKind::AnimalPresence,
        BiasKind::Holiday,
        BiasKind::Discount,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            BiasKind::HumanPresence => "human_presence",
            BiasKind::AnimalPresence => "animal_presence",
            BiasKind::Holiday => "holiday",
            BiasKind::Discount => "discount",
        }
    }
}

impl fmt::Display for BiasKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for BiasKind {
    type Err = BiasError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let key: String = s
            .chars()
            .filter(|c| c.is_alphanumeric())
            .flat_map(char::to_lowercase)
            .collect();
        match key.as_str() {
            "humanpresence" | "human" => Ok(BiasKind::HumanPresence),
            "animalpresence" | "animal" => Ok(BiasKind::AnimalPresence),
            "holiday" | "specialdays" | "specialday" => Ok(BiasKind::Holiday),
            "discount" | "discounts" => Ok(BiasKind::Discount),
            _ => Err(BiasError::UnknownKind(s.to_string())),
        }
    }
}

impl Serialize for BiasKind {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.as_str())
    }
}

impl<'de> Deserialize<'de> for BiasKind {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

// ---------------------------------------------------------------------------
// Local outlier factor

const LRD_FLOOR: f64 = 1e-12;

fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Raw LOF_k per point. Neighborhoods include every point tied with the
/// k-th nearest neighbor.
pub fn lof_raw(points: &[Vec<f64>], k: usize) -> Result<Vec<f64>, BiasError> {
    let n = points.len();
    if k == 0 || k >= n {
        return Err(BiasError::BadK { k, n });
    }
    let dim = points[0].len();
    if points.iter().any(|p| p.len() != dim) {
        return Err(BiasError::RaggedPoints);
    }

    // sorted (distance, index) lists, self excluded
    let neighbors: Vec<Vec<(f64, usize)>> = points
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let mut d: Vec<(f64, usize)> = points
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != i)
                .map(|(j, q)| (euclidean(p, q), j))
                .collect();
            d.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            let kdist = d[k - 1].0;
            let cut = d.partition_point(|&(dist, _)| dist <= kdist);
            d.truncate(cut);
            d
        })
        .collect();
    let kdist: Vec<f64> = neighbors.iter().map(|nb| nb.last().unwrap().0).collect();

    let lrd: Vec<f64> = neighbors
        .iter()
        .map(|nb| {
            let mean_reach =
                nb.iter().map(|&(d, o)| d.max(kdist[o])).sum::<f64>() / nb.len() as f64;
            1.0 / mean_reach.max(LRD_FLOOR)
        })
        .collect();

    Ok(neighbors
        .iter()
        .enumerate()
        .map(|(i, nb)| nb.iter().map(|&(_, o)| lrd[o]).sum::<f64>() / (nb.len() as f64 * lrd[i]))
        .collect())
}

/// LOF min-max normalized to [0, 1] across the batch. A batch with no spread maps to zeros.
pub fn lof_scores(points: &[Vec<f64>], k: usize) -> Result<Vec<f64>, BiasError> {
    let raw = lof_raw(points, k)?;
    let lo = raw.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = raw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let span = hi - lo;
    Ok(raw
        .into_iter()
        .map(|v| if span > 0.0 { (v - lo) / span } else { 0.0 })
        .collect())
}

/// LOF over one page's 1-D scores with the default neighborhood size
/// (20, capped at n - 1).
pub fn page_score_outliers(scores: &[f64]) -> Result<Vec<f64>, BiasError> {
    let pts: Vec<Vec<f64>> = scores.iter().map(|&s| vec![s]).collect();
    let k = 20.min(scores.len().saturating_sub(1));
    lof_scores(&pts, k)
}

// ---------------------------------------------------------------------------
// Embeddings

#[derive(Debug, Clone)]
pub struct EmbeddingTable {
    dimension: usize,
    words: Vec<String>,
    vectors: Vec<f32>,
    index: HashMap<String, usize>,
}

impl EmbeddingTable {
    pub fn new(dimension: usize) -> Self {
        EmbeddingTable {
            dimension,
            words: Vec::new(),
            vectors: Vec::new(),
            index: HashMap::new(),
        }
    }

    /// Inserts or replaces a word. Returns true when the word was already present.
    pub fn insert(&mut self, word: &str, vector: &[f32]) -> Result<bool, BiasError> {
        if vector.len() != self.dimension {
            return Err(BiasError::DimensionMismatch {
                line: 0,
                expected: self.dimension,
                got: vector.len(),
            });
        }
        if let Some(&i) = self.index.get(word) {
            self.vectors[i * self.dimension..(i + 1) * self.dimension].copy_from_slice(vector);
            return Ok(true);
        }
        self.index.insert(word.to_string(), self.words.len());
        self.words.push(word.to_string());
        self.vectors.extend_from_slice(vector);
        Ok(false)
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn get(&self, word: &str) -> Option<&[f32]> {
        let i = *self.index.get(word)?;
        Some(&self.vectors[i * self.dimension..(i + 1) * self.dimension])
    }

    pub fn words(&self) -> impl Iterator<Item = &str> {
        self.words.iter().map(String::as_str)
    }

    fn row(&self, i: usize) -> &[f32] {
        &self.vectors[i * self.dimension..(i + 1) * self.dimension]
    }
}

fn cosine(a: &[f32], b: &[f32]) -> f64 {
    let (mut dot, mut na, mut nb) = (0.0f64, 0.0f64, 0.0f64);
    for (&x, &y) in a.iter().zip(b) {
        let (x, y) = (x as f64, y as f64);
        dot += x * y;
        na += x * x;
        nb += y * y;
    }
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot / (na.sqrt() * nb.sqrt())
    }
}

#[derive(Debug, Clone, Default)]
pub struct LoadReport {
    pub duplicate_words: Vec<String>,
}

/// Reads "word v1 v2 ... vd" lines. Duplicate words keep their last vector.
pub fn load_embeddings(path: &Path) -> Result<(EmbeddingTable, LoadReport), BiasError> {
    let reader = BufReader::new(fs::File::open(path)?);
    let mut table: Option<EmbeddingTable> = None;
    let mut report = LoadReport::default();
    let mut buf: Vec<f32> = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let mut parts = line.split_whitespace();
        let Some(word) = parts.next() else { continue };
        buf.clear();
        for tok in parts {
            let v = tok.parse::<f32>().map_err(|e| BiasError::MalformedEmbedding {
                line: i + 1,
                reason: format!("{tok:?}: {e}"),
            })?;
            buf.push(v);
        }
        if buf.is_empty() {
            return Err(BiasError::MalformedEmbedding {
                line: i + 1,
                reason: "no vector components".into(),
            });
        }
        let t = table.get_or_insert_with(|| EmbeddingTable::new(buf.len()));
        if buf.len() != t.dimension {
            return Err(BiasError::DimensionMismatch {
                line: i + 1,
                expected: t.dimension,
                got: buf.len(),
            });
        }
        if t.insert(word, &buf)? {
            log::warn!("duplicate embedding for {word:?} on line {}; keeping the last one", i + 1);
            report.duplicate_words.push(word.to_string());
        }
    }
    table.map(|t| (t, report)).ok_or(BiasError::EmptyVocabulary)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Expansion {
    pub words: Vec<String>,
    pub missing_seeds: Vec<String>,
}

/// Seeds plus, for each seed found in the table, its `m` nearest vocabulary
/// words by cosine similarity. Ties break lexicographically.
pub fn expand_keywords(
    seeds: &[String],
    table: &EmbeddingTable,
    m: usize,
) -> Result<Expansion, BiasError> {
    let seeds: Vec<String> = seeds.iter().map(|s| s.to_lowercase()).collect();
    let mut missing = Vec::new();
    let mut present = Vec::new();
    for s in &seeds {
        match table.index.get(s) {
            Some(&i) => present.push(i),
            None => missing.push(s.clone()),
        }
    }
    if present.is_empty() {
        return Err(BiasError::NoSeedInVocabulary);
    }
    let mut out = Vec::new();
    let mut seen = HashSet::new();
    for s in &seeds {
        if seen.insert(s.clone()) {
            out.push(s.clone());
        }
    }
    if m > 0 {
        for &si in &present {
            let sv = table.row(si);
            let mut scored: Vec<(f64, &str)> = (0..table.len())
                .filter(|&j| j != si)
                .map(|j| (cosine(sv, table.row(j)), table.words[j].as_str()))
                .collect();
            scored.sort_by(|a, b| b.0.total_cmp(&a.0).then_with(|| a.1.cmp(b.1)));
            for (_, w) in scored.into_iter().take(m) {
                let w = w.to_lowercase();
                if seen.insert(w.clone()) {
                    out.push(w);
                }
            }
        }
    }
    if !missing.is_empty() {
        log::warn!("seed words not in vocabulary: {missing:?}");
    }
    Ok(Expansion {
        words: out,
        missing_seeds: missing,
    })
}

// ---------------------------------------------------------------------------
// Lexicons

/// A recurring date window around a holiday.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HolidayWindow {
    pub name: String,
    pub month: u32,
    pub day: u32,
    pub pre_days: i64,
    pub post_days: i64,
}

impl HolidayWindow {
    pub fn new(name: &str, month: u32, day: u32) -> Self {
        HolidayWindow {
            name: name.to_string(),
            month,
            day,
            pre_days: 7,
            post_days: 7,
        }
    }

    /// The concrete (start, end) dates of this window for the holiday in `year`.
    pub fn span(&self, year: i32) -> Option<(NaiveDate, NaiveDate)> {
        let d = NaiveDate::from_ymd_opt(year, self.month, self.day)?;
        Some((d - Duration::days(self.pre_days), d + Duration::days(self.post_days)))
    }

    pub fn contains(&self, date: NaiveDate) -> bool {
        (date.year() - 1..=date.year() + 1)
            .filter_map(|y| self.span(y))
            .any(|(start, end)| start <= date && date <= end)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Lexicon {
    pub kind: BiasKind,
    pub seed_words: Vec<String>,
    pub expanded_words: Vec<String>,
    pub holiday_windows: Vec<HolidayWindow>,
    /// Multi-word entries, pre-split into tokens.
    phrases: Vec<Vec<String>>,
    singles: HashSet<String>,
}

impl Lexicon {
    /// Builds a lexicon from seeds alone; expanded words equal the seeds.
    pub fn from_seeds(kind: BiasKind, seeds: &[&str]) -> Self {
        let seeds: Vec<String> = seeds.iter().map(|s| s.to_lowercase()).collect();
        Self::with_words(kind, seeds.clone(), seeds, Vec::new())
    }

    pub fn with_words(
        kind: BiasKind,
        seed_words: Vec<String>,
        expanded: Vec<String>,
        holiday_windows: Vec<HolidayWindow>,
    ) -> Self {
        let mut expanded_words: Vec<String> = Vec::new();
        let mut seen = HashSet::new();
        for w in seed_words.iter().chain(&expanded) {
            let w = w.to_lowercase();
            if seen.insert(w.clone()) {
                expanded_words.push(w);
            }
        }
        let mut phrases = Vec::new();
        let mut singles = HashSet::new();
        for w in &expanded_words {
            let toks = tokenize(w);
            match toks.len() {
                0 => {}
                1 => {
                    singles.insert(toks.into_iter().next().unwrap());
                }
                _ => phrases.push(toks),
            }
        }
        Lexicon {
            kind,
            seed_words: seed_words.iter().map(|s| s.to_lowercase()).collect(),
            expanded_words,
            holiday_windows,
            phrases,
            singles,
        }
    }

    pub fn with_windows(mut self, windows: Vec<HolidayWindow>) -> Self {
        self.holiday_windows = windows;
        self
    }

    fn matches(&self, tokens: &[String]) -> bool {
        tokens.iter().any(|t| self.singles.contains(t))
            || self
                .phrases
                .iter()
                .any(|p| tokens.windows(p.len()).any(|w| w == p.as_slice()))
    }

    fn in_window(&self, date: NaiveDate) -> bool {
        self.holiday_windows.iter().any(|w| w.contains(date))
    }
}

/// Lowercases and splits on anything that is not alphanumeric.
pub fn tokenize(text: &str) -> Vec<String> {
    text.to_lowercase()
        .split(|c: char| !c.is_alphanumeric())
        .filter(|s| !s.is_empty())
        .map(str::to_string)
        .collect()
}

/// Text/date classifier. Only Discount and Holiday are ever assigned here.
pub fn classify_text_bias(
    text: &str,
    timestamp: DateTime<Utc>,
    lexicons: &[Lexicon],
) -> BTreeSet<BiasKind> {
    let tokens = tokenize(text);
    let date = timestamp.date_naive();
    let mut out = BTreeSet::new();
    for lex in lexicons {
        match lex.kind {
            BiasKind::Discount if lex.matches(&tokens) => {
                out.insert(BiasKind::Discount);
            }
            BiasKind::Holiday if lex.in_window(date) && lex.matches(&tokens) => {
                out.insert(BiasKind::Holiday);
            }
            _ => {}
        }
    }
    out
}

#[derive(Debug, Clone, Default)]
pub struct LabeledCorpus {
    pub unbiased: Vec<ScoredPost>,
    pub biased: BTreeMap<BiasKind, Vec<ScoredPost>>,
    pub excluded_multibias: Vec<ScoredPost>,
}

impl LabeledCorpus {
    pub fn len(&self) -> usize {
        self.unbiased.len()
            + self.biased.values().map(Vec::len).sum::<usize>()
            + self.excluded_multibias.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Hook for visual bias detectors run outside this crate (face or animal
/// classifiers). Implementations return the labels they detect for a post.
pub trait ExternalDetector: Send + Sync {
    fn detect(&self, post: &ScoredPost) -> BTreeSet<BiasKind>;
}

/// Unions ingested labels, detector output and text classification; keeps
/// only posts with at most one bias.
pub fn assign_bias_labels(
    posts: &[ScoredPost],
    lexicons: &[Lexicon],
    detectors: &[&dyn ExternalDetector],
) -> LabeledCorpus {
    let mut out = LabeledCorpus::default();
    for p in posts {
        let mut labels = p.post.external_bias_labels.clone();
        for d in detectors {
            labels.extend(d.detect(p));
        }
        labels.extend(classify_text_bias(&p.post.text, p.post.timestamp, lexicons));
        let mut it = labels.iter();
        match (it.next(), it.next()) {
            (None, _) => out.unbiased.push(p.clone()),
            (Some(&k), None) => out.biased.entry(k).or_default().push(p.clone()),
            _ => out.excluded_multibias.push(p.clone()),
        }
    }
    out
}

// ---------------------------------------------------------------------------
// Lexicon configuration

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HolidayConfig {
    pub name: String,
    /// "MM-DD"
    pub date: String,
    #[serde(default = "default_window_days")]
    pub pre_days: i64,
    #[serde(default = "default_window_days")]
    pub post_days: i64,
}

fn default_window_days() -> i64 {
    7
}

impl HolidayConfig {
    pub fn window(&self) -> Result<HolidayWindow, BiasError> {
        let (m, d) = self
            .date
            .split_once('-')
            .ok_or_else(|| BiasError::Config(format!("holiday date {:?} is not MM-DD", self.date)))?;
        let month: u32 = m.parse().map_err(|_| BiasError::Config(format!("bad month in {:?}", self.date)))?;
        let day: u32 = d.parse().map_err(|_| BiasError::Config(format!("bad day in {:?}", self.date)))?;
        // 2000 is a leap year, so 02-29 validates
        if NaiveDate::from_ymd_opt(2000, month, day).is_none() {
            return Err(BiasError::Config(format!("invalid holiday date {:?}", self.date)));
        }
        if self.pre_days < 0 || self.post_days < 0 {
            return Err(BiasError::Config(format!("negative window for {:?}", self.name)));
        }
        Ok(HolidayWindow {
            name: self.name.clone(),
            month,
            day,
            pre_days: self.pre_days,
            post_days: self.post_days,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LexiconConfig {
    pub kind: BiasKind,
    pub seeds: Vec<String>,
    #[serde(default)]
    pub stoplist: Vec<String>,
    #[serde(default)]
    pub holidays: Vec<HolidayConfig>,
}

impl LexiconConfig {
    /// Expands seeds with `table` (when given), removes stop-listed expansions and
    /// attaches holiday windows.
    pub fn build(&self, table: Option<&EmbeddingTable>, m: usize) -> Result<Lexicon, BiasError> {
        let seeds: Vec<String> = self.seeds.iter().map(|s| s.to_lowercase()).collect();
        let expanded = match table {
            Some(t) => match expand_keywords(&seeds, t, m) {
                Ok(e) => e.words,
                Err(BiasError::NoSeedInVocabulary) => {
                    log::warn!("{}: no seed in vocabulary, using seeds only", self.kind);
                    seeds.clone()
                }
                Err(e) => return Err(e),
            },
            None => seeds.clone(),
        };
        let stop: HashSet<String> = self.stoplist.iter().map(|s| s.to_lowercase()).collect();
        let seed_set: HashSet<&String> = seeds.iter().collect();
        let expanded: Vec<String> = expanded
            .into_iter()
            .filter(|w| seed_set.contains(w) || !stop.contains(w))
            .collect();
        let windows = self
            .holidays
            .iter()
            .map(HolidayConfig::window)
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Lexicon::with_words(self.kind, seeds, expanded, windows))
    }
}

/// Reads a lexicon config file: one object or an array of objects.
pub fn load_lexicon_configs(path: &Path) -> Result<Vec<LexiconConfig>, BiasError> {
    let text = fs::read_to_string(path)?;
    let value: serde_json::Value =
        serde_json::from_str(&text).map_err(|e| BiasError::Config(e.to_string()))?;
    let configs: Vec<LexiconConfig> = match value {
        serde_json::Value::Array(_) => serde_json::from_value(value),
        _ => serde_json::from_value(value).map(|c| vec![c]),
    }
    .map_err(|e| BiasError::Config(e.to_string()))?;
    let mut kinds = HashSet::new();
    for c in &configs {
        if !kinds.insert(c.kind) {
            return Err(BiasError::Config(format!("duplicate lexicon for {}", c.kind)));
        }
    }
    Ok(configs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::PostRecord;
    use chrono::TimeZone;

    fn toy_table() -> EmbeddingTable {
        let mut t = EmbeddingTable::new(3);
        t.insert("christmas", &[1.0, 0.0, 0.0]).unwrap();
        t.insert("xmas", &[0.95, 0.1, 0.0]).unwrap();
        t.insert("holiday", &[0.7, 0.7, 0.0]).unwrap();
        t.insert("sale", &[0.0, 0.0, 1.0]).unwrap();
        t.insert("car", &[0.0, 1.0, 0.1]).unwrap();
        t
    }

    #[test]
    fn expansion_picks_nearest() {
        let t = toy_table();
        let e = expand_keywords(&["christmas".into()], &t, 1).unwrap();
        assert_eq!(e.words, vec!["christmas", "xmas"]);
        let e = expand_keywords(&["christmas".into()], &t, 0).unwrap();
        assert_eq!(e.words, vec!["christmas"]);
        assert!(matches!(
            expand_keywords(&["qqqq".into()], &t, 3),
            Err(BiasError::NoSeedInVocabulary)
        ));
    }

    #[test]
    fn expansion_ties_are_lexicographic() {
        let mut t = EmbeddingTable::new(2);
        t.insert("seed", &[1.0, 0.0]).unwrap();
        t.insert("zeta", &[2.0, 0.0]).unwrap();
        t.insert("alpha", &[3.0, 0.0]).unwrap();
        let e = expand_keywords(&["seed".into()], &t, 1).unwrap();
        assert_eq!(e.words, vec!["seed", "alpha"]);
    }

    #[test]
    fn missing_seeds_reported() {
        let t = toy_table();
        let e = expand_keywords(&["qqqq".into(), "sale".into()], &t, 0).unwrap();
        assert_eq!(e.missing_seeds, vec!["qqqq"]);
        assert_eq!(e.words, vec!["qqqq", "sale"]);
    }

    fn ts(y: i32, m: u32, d: u32) -> DateTime<Utc> {
        Utc.with_ymd_and_hms(y, m, d, 12, 0, 0).unwrap()
    }

    fn lexicons() -> Vec<Lexicon> {
        vec![
            Lexicon::from_seeds(BiasKind::Discount, &["free", "discount", "sale", "offer"]),
            Lexicon::from_seeds(BiasKind::Holiday, &["christmas", "black friday"])
                .with_windows(vec![HolidayWindow::new("christmas", 12, 25)]),
        ]
    }

    #[test]
    fn text_classification() {
        let lex = lexicons();
        assert_eq!(
            classify_text_bias("Huge SALE today only!", ts(2017, 3, 1), &lex),
            BTreeSet::from([BiasKind::Discount])
        );
        assert_eq!(
            classify_text_bias("Merry Christmas to all", ts(2017, 12, 24), &lex),
            BTreeSet::from([BiasKind::Holiday])
        );
        assert!(classify_text_bias("Merry Christmas", ts(2017, 7, 4), &lex).is_empty());
        // whole tokens only
        assert!(classify_text_bias("big sales", ts(2017, 3, 1), &lex).is_empty());
    }

    #[test]
    fn holiday_window_wraps_year() {
        let w = HolidayWindow::new("christmas", 12, 25);
        assert!(w.contains(NaiveDate::from_ymd_opt(2018, 1, 1).unwrap()));
        assert!(w.contains(NaiveDate::from_ymd_opt(2017, 12, 18).unwrap()));
        assert!(!w.contains(NaiveDate::from_ymd_opt(2017, 12, 17).unwrap()));
        assert!(!w.contains(NaiveDate::from_ymd_opt(2018, 1, 2).unwrap()));
    }

    #[test]
    fn phrase_entries_match_consecutive_tokens() {
        let lex = lexicons();
        let w = Lexicon::from_seeds(BiasKind::Holiday, &["black friday"])
            .with_windows(vec![HolidayWindow::new("bf", 11, 24)]);
        assert_eq!(
            classify_text_bias("Black-Friday deals", ts(2017, 11, 24), &[w]),
            BTreeSet::from([BiasKind::Holiday])
        );
        assert!(classify_text_bias("black cat friday", ts(2017, 12, 24), &lex).is_empty());
    }

    fn post(id: &str, text: &str, labels: &[BiasKind]) -> ScoredPost {
        ScoredPost {
            post: PostRecord {
                post_id: id.into(),
                page_id: "p".into(),
                image_path: "x.png".into(),
                likes: 1,
                retweets: 1,
                timestamp: ts(2017, 5, 5),
                text: text.into(),
                external_bias_labels: labels.iter().copied().collect(),
                followers: None,
            },
            epsilon: 2.0,
            epsilon_n: 0.0,
            epsilon_nt: None,
        }
    }

    #[test]
    fn labeling_partitions() {
        let lex = lexicons();
        let posts = vec![
            post("a", "hello", &[BiasKind::HumanPresence]),
            post("b", "free stuff", &[BiasKind::AnimalPresence]),
            post("c", "nice day", &[]),
        ];
        let lc = assign_bias_labels(&posts, &lex, &[]);
        assert_eq!(lc.biased[&BiasKind::HumanPresence][0].post.post_id, "a");
        assert_eq!(lc.excluded_multibias[0].post.post_id, "b");
        assert_eq!(lc.unbiased[0].post.post_id, "c");
        assert_eq!(lc.len(), 3);

        let neutral: Vec<ScoredPost> = (0..10).map(|i| post(&i.to_string(), "hi", &[])).collect();
        let lc = assign_bias_labels(&neutral, &lex, &[]);
        assert_eq!(lc.unbiased.len(), 10);
        assert!(lc.biased.is_empty());
    }

    struct AlwaysHuman;
    impl ExternalDetector for AlwaysHuman {
        fn detect(&self, _: &ScoredPost) -> BTreeSet<BiasKind> {
            BTreeSet::from([BiasKind::HumanPresence])
        }
    }

    #[test]
    fn detector_hook_contributes_labels() {
        let lc = assign_bias_labels(&[post("a", "hi", &[])], &[], &[&AlwaysHuman]);
        assert_eq!(lc.biased[&BiasKind::HumanPresence].len(), 1);
    }

    #[test]
    fn lof_degenerate_pair() {
        let raw = lof_raw(&[vec![1.0], vec![1.0]], 1).unwrap();
        assert_eq!(raw, vec![1.0, 1.0]);
        assert!(matches!(lof_raw(&[vec![1.0], vec![2.0]], 2), Err(BiasError::BadK { .. })));
    }

    #[test]
    fn lexicon_config_roundtrip() {
        let json = r#"{"kind": "holiday", "seeds": ["Christmas", "xmas"], "stoplist": ["car"],
            "holidays": [{"name": "christmas", "date": "12-25", "pre_days": 7, "post_days": 7}]}"#;
        let c: LexiconConfig = serde_json::from_str(json).unwrap();
        let t = toy_table();
        let lex = c.build(Some(&t), 3).unwrap();
        assert!(lex.expanded_words.starts_with(&["christmas".to_string(), "xmas".to_string()]));
        assert!(!lex.expanded_words.contains(&"car".to_string()));
        assert_eq!(lex.holiday_windows[0].month, 12);
        let bad = HolidayConfig {
            name: "x".into(),
            date: "13-01".into(),
            pre_days: 1,
            post_days: 1,
        };
        assert!(bad.window().is_err());
    }

    #[test]
    fn bias_kind_parsing() {
        assert_eq!("HumanPresence".parse::<BiasKind>().unwrap(), BiasKind::HumanPresence);
        assert_eq!("animal_presence".parse::<BiasKind>().unwrap(), BiasKind::AnimalPresence);
        assert!("hashtags".parse::<BiasKind>().is_err());
    }
}
