//! Pipeline configuration file.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::aesthetics::{ExtractionParams, RagParams, SegmentParams};
use crate::biasdetect::HolidayConfig;
use crate::corpus::CorpusFormat;
use crate::debias::{DegreeChoice, FitOptions};
use crate::model::{GridSpec, SvmParams};
use crate::tuner::TunerParams;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("invalid config: {0}")]
    Parse(String),
    #[error("{field}: {path} does not exist")]
    MissingPath { field: &'static str, path: PathBuf },
    #[error("{field}: {message}")]
    OutOfRange { field: &'static str, message: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DebiasConfig {
    pub enabled: bool,
    pub degree: DegreeChoice,
    pub n_bins: usize,
    pub bandwidth: Option<f64>,
    pub learn_rate: f64,
    pub max_iters: usize,
    pub tol: f64,
    pub line_search: bool,
}

impl Default for DebiasConfig {
    fn default() -> Self {
        let f = FitOptions::default();
        DebiasConfig {
            enabled: true,
            degree: DegreeChoice::default(),
            n_bins: f.n_bins,
            bandwidth: f.bandwidth,
            learn_rate: f.learn_rate,
            max_iters: f.max_iters,
            tol: f.tol,
            line_search: f.line_search,
        }
    }
}

impl DebiasConfig {
    pub fn fit_options(&self) -> FitOptions {
        FitOptions {
            n_bins: self.n_bins,
            bandwidth: self.bandwidth,
            learn_rate: self.learn_rate,
            max_iters: self.max_iters,
            tol: self.tol,
            line_search: self.line_search,
            ..FitOptions::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RegistryConfig {
    pub segment_k: usize,
    pub min_area_frac: f64,
    pub merge_threshold: f64,
    pub ncut_stop: f64,
    pub max_side: usize,
}

impl Default for RegistryConfig {
    fn default() -> Self {
        let p = ExtractionParams::default();
        RegistryConfig {
            segment_k: p.segment.k,
            min_area_frac: p.segment.min_area_frac,
            merge_threshold: p.rag.merge_threshold,
            ncut_stop: p.rag.ncut_stop,
            max_side: p.max_side,
        }
    }
}

impl RegistryConfig {
    /// Extraction parameters with the pipeline seed driving segmentation.
    pub fn params(&self, seed: u64) -> ExtractionParams {
        ExtractionParams {
            max_side: self.max_side,
            segment: SegmentParams {
                k: self.segment_k,
                min_area_frac: self.min_area_frac,
                seed,
            },
            rag: RagParams {
                merge_threshold: self.merge_threshold,
                ncut_stop: self.ncut_stop,
            },
            ..ExtractionParams::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub regressor: SvmParams,
    pub classifier: SvmParams,
    /// Cross-validated search over the classifier's C and gamma.
    pub grid_search: Option<GridSpec>,
    pub significance_top: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            regressor: SvmParams::default(),
            classifier: SvmParams::default(),
            grid_search: None,
            significance_top: 5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServiceConfig {
    pub bind: String,
    pub port: u16,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        ServiceConfig {
            bind: "127.0.0.1".into(),
            port: 8080,
        }
    }
}

/// Every path is resolved relative to the directory holding the config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub corpus: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub corpus_format: Option<CorpusFormat>,
    pub lexicons: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub embeddings: Option<PathBuf>,
    /// Neighbours added per seed word during lexicon expansion.
    #[serde(default = "default_expansion")]
    pub expansion: usize,
    /// Extra holiday windows attached to the holiday lexicon.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub holidays: Vec<HolidayConfig>,
    #[serde(default)]
    pub debias: DebiasConfig,
    #[serde(default)]
    pub registry: RegistryConfig,
    #[serde(default)]
    pub model: ModelConfig,
    #[serde(default = "default_tuner")]
    pub tuner: TunerParams,
    pub artifact_dir: PathBuf,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_test_fraction")]
    pub test_fraction: f64,
    #[serde(default)]
    pub service: ServiceConfig,
    #[serde(skip)]
    base_dir: PathBuf,
}

fn default_expansion() -> usize {
    20
}

fn default_tuner() -> TunerParams {
    TunerParams::new(2, 20.0, 4.0)
}

fn default_seed() -> u64 {
    42
}

fn default_test_fraction() -> f64 {
    0.2
}

impl PipelineConfig {
    pub fn new(corpus: impl Into<PathBuf>, lexicons: impl Into<PathBuf>, artifact_dir: impl Into<PathBuf>) -> Self {
        PipelineConfig {
            corpus: corpus.into(),
            corpus_format: None,
            lexicons: lexicons.into(),
            embeddings: None,
            expansion: default_expansion(),
            holidays: Vec::new(),
            debias: DebiasConfig::default(),
            registry: RegistryConfig::default(),
            model: ModelConfig::default(),
            tuner: default_tuner(),
            artifact_dir: artifact_dir.into(),
            seed: default_seed(),
            test_fraction: default_test_fraction(),
            service: ServiceConfig::default(),
            base_dir: PathBuf::new(),
        }
    }

    /// Reads and validates a config file.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.to_path_buf(),
            source,
        })?;
        let mut c: PipelineConfig = serde_json::from_str(&text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        c.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        c.validate()?;
        Ok(c)
    }

    pub fn with_base_dir(mut self, dir: impl Into<PathBuf>) -> Self {
        self.base_dir = dir.into();
        self
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    pub fn corpus_path(&self) -> PathBuf {
        self.resolve(&self.corpus)
    }

    pub fn corpus_format(&self) -> Option<CorpusFormat> {
        self.corpus_format.or_else(|| CorpusFormat::from_path(&self.corpus))
    }

    pub fn artifact_path(&self) -> PathBuf {
        self.resolve(&self.artifact_dir)
    }

    pub fn extraction_params(&self) -> ExtractionParams {
        self.registry.params(self.seed)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let must_exist = |field: &'static str, p: &Path| {
            let full = self.resolve(p);
            if full.exists() {
                Ok(())
            } else {
                Err(ConfigError::MissingPath { field, path: full })
            }
        };
        must_exist("corpus", &self.corpus)?;
        must_exist("lexicons", &self.lexicons)?;
        if let Some(e) = &self.embeddings {
            must_exist("embeddings", e)?;
        }
        let range = |field: &'static str, ok: bool, message: &str| {
            if ok {
                Ok(())
            } else {
                Err(ConfigError::OutOfRange {
                    field,
                    message: message.to_string(),
                })
            }
        };
        range("corpus_format", self.corpus_format().is_some(), "cannot infer format; set corpus_format")?;
        for h in &self.holidays {
            h.window().map_err(|e| ConfigError::OutOfRange {
                field: "holidays",
                message: e.to_string(),
            })?;
        }
        let d = &self.debias;
        let degree_ok = match d.degree {
            DegreeChoice::Fixed(k) => (1..=10).contains(&k),
            DegreeChoice::Auto { max } => (1..=10).contains(&max),
        };
        range("debias.degree", degree_ok, "must be between 1 and 10")?;
        range("debias.n_bins", (2..=10_000).contains(&d.n_bins), "must be between 2 and 10000")?;
        range(
            "debias.bandwidth",
            d.bandwidth.is_none_or(|b| b > 0.0 && b.is_finite()),
            "must be positive",
        )?;
        range("debias.learn_rate", d.learn_rate > 0.0 && d.learn_rate.is_finite(), "must be positive")?;
        range("debias.max_iters", d.max_iters >= 1, "must be at least 1")?;
        range("debias.tol", d.tol > 0.0, "must be positive")?;
        let r = &self.registry;
        range("registry.segment_k", (2..=64).contains(&r.segment_k), "must be between 2 and 64")?;
        range("registry.min_area_frac", (0.0..0.5).contains(&r.min_area_frac), "must be in [0, 0.5)")?;
        range("registry.merge_threshold", (0.0..=1.0).contains(&r.merge_threshold), "must be in [0, 1]")?;
        range("registry.ncut_stop", r.ncut_stop > 0.0, "must be positive")?;
        range("registry.max_side", r.max_side >= 8, "must be at least 8")?;
        for (field, m) in [("model.regressor", &self.model.regressor), ("model.classifier", &self.model.classifier)] {
            range(field, m.c > 0.0 && m.epsilon >= 0.0 && m.tol > 0.0, "C and tol must be positive, epsilon non-negative")?;
            range(field, m.gamma.is_none_or(|g| g > 0.0), "gamma must be positive")?;
        }
        let t = &self.tuner;
        range("tuner.k", t.k >= 1, "must be at least 1")?;
        range("tuner.s", t.s > 0.0 && t.s.is_finite(), "must be positive")?;
        range("tuner.t", t.t > 0.0 && t.t <= t.s, "must be positive and at most s")?;
        range("test_fraction", self.test_fraction > 0.0 && self.test_fraction < 1.0, "must be in (0, 1)")?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn missing_embedding_file_fails_validation() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("c.jsonl"), "").unwrap();
        fs::write(dir.path().join("l.json"), "[]").unwrap();
        let mut c = PipelineConfig::new("c.jsonl", "l.json", "out");
        c.embeddings = Some("nope.txt".into());
        let path = dir.path().join("config.json");
        fs::write(&path, c.to_json()).unwrap();
        assert!(matches!(
            PipelineConfig::load(&path),
            Err(ConfigError::MissingPath { field: "embeddings", .. })
        ));
        c.embeddings = None;
        fs::write(&path, c.to_json()).unwrap();
        let loaded = PipelineConfig::load(&path).unwrap();
        assert_eq!(loaded.seed, 42);
        assert_eq!(loaded.corpus_path(), dir.path().join("c.jsonl"));
    }

    #[test]
    fn ranges_are_checked() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("c.jsonl"), "").unwrap();
        fs::write(dir.path().join("l.json"), "[]").unwrap();
        let mut c = PipelineConfig::new("c.jsonl", "l.json", "out").with_base_dir(dir.path());
        c.tuner.t = 50.0;
        assert!(matches!(c.validate(), Err(ConfigError::OutOfRange { field: "tuner.t", .. })));
    }
}
