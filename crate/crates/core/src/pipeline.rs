//! Stage runner: ingest, debias, features, train and evaluate, each reading
//! the previous stage's artifacts from the artifact directory.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::fs;
use std::io::{self, BufRead, Write};
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::aesthetics::{
    decode_image, default_descriptors, extract_features, read_feature_dump, write_feature_dump, FeatureRegistry,
    FeatureVector,
};
use crate::biasdetect::{assign_bias_labels, load_embeddings, load_lexicon_configs, BiasKind, Lexicon};
use crate::config::{ConfigError, PipelineConfig};
use crate::corpus::{
    correlation_input, load_corpus, page_correlation_report, score_corpus, CorrelationReport, PageStats,
    ScoredPost,
};
use crate::debias::{debias_corpus, FitReport, TransformArtifact};
use crate::model::{
    evaluate, grid_search, quartile_labels, significance, train_svc, train_svr, Confusion, EngagementModel,
    FeatureWeight, KernelKind, SvmParams, Targets,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Ingest,
    Debias,
    Features,
    Train,
    Evaluate,
}

impl Stage {
    pub const ALL: [Stage; 5] = [Stage::Ingest, Stage::Debias, Stage::Features, Stage::Train, Stage::Evaluate];

    pub fn as_str(self) -> &'static str {
        match self {
            Stage::Ingest => "ingest",
            Stage::Debias => "debias",
            Stage::Features => "features",
            Stage::Train => "train",
            Stage::Evaluate => "evaluate",
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{stage}: bad input data: {message}")]
    Data { stage: Stage, message: String },
    #[error("{stage}: {message}")]
    Stage { stage: Stage, message: String },
}

impl PipelineError {
    /// Process exit code: 2 config, 3 data, 4 stage failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::Config(_) => 2,
            PipelineError::Data { .. } => 3,
            PipelineError::Stage { .. } => 4,
        }
    }

    fn data(stage: Stage, e: impl fmt::Display) -> Self {
        PipelineError::Data {
            stage,
            message: e.to_string(),
        }
    }

    fn stage(stage: Stage, e: impl fmt::Display) -> Self {
        PipelineError::Stage {
            stage,
            message: e.to_string(),
        }
    }
}

/// Artifact file names under the artifact directory.
pub mod layout {
    pub const SCORED: &str = "ingest/scored.jsonl";
    pub const CORPUS_REJECTS: &str = "ingest/rejects.jsonl";
    pub const PAGES: &str = "ingest/pages.json";
    pub const LABELED: &str = "debias/labeled.jsonl";
    pub const TRANSFORMS: &str = "debias/transforms";
    pub const DEBIAS_REPORT: &str = "debias/report.json";
    pub const REGISTRY: &str = "features/registry.json";
    pub const FEATURES: &str = "features/features.csv";
    pub const FEATURE_REJECTS: &str = "features/rejects.jsonl";
    pub const MODEL: &str = "model/model.json";
    pub const CLASSIFIER: &str = "model/classifier.json";
    pub const LINEAR: &str = "model/linear.json";
    pub const MODEL_REGISTRY: &str = "model/registry.json";
    pub const SPLIT: &str = "model/split.json";
    pub const EVALUATION: &str = "evaluation.json";
    pub const STALE: &str = "STALE";
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageCounts {
    pub stage: Stage,
    pub counts: BTreeMap<String, usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassificationMetrics {
    pub n: usize,
    pub accuracy: f64,
    pub confusion: Confusion,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationSummary {
    pub registry_hash: String,
    pub debiased: bool,
    pub regression_rmse: f64,
    pub regression_n: usize,
    pub classification: ClassificationMetrics,
    pub significance: Vec<FeatureWeight>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineReport {
    pub stages: Vec<StageCounts>,
    pub evaluation: EvaluationSummary,
}

/// One post after bias labelling, with its training target.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledRow {
    pub post_id: String,
    pub image: PathBuf,
    pub bias: Option<BiasKind>,
    pub epsilon_n: f64,
    pub epsilon_nt: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct PagesArtifact {
    pages: Vec<PageStats>,
    excluded_pages: Vec<String>,
    correlation: Option<CorrelationReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct ClassReport {
    posts: usize,
    transform: Option<TransformArtifact>,
    fit: Option<FitSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct FitSummary {
    identity_kl: f64,
    initial_kl: f64,
    final_kl: f64,
    iterations: usize,
    converged: bool,
}

impl From<&FitReport> for FitSummary {
    fn from(r: &FitReport) -> Self {
        FitSummary {
            identity_kl: r.identity_kl,
            initial_kl: r.initial_kl,
            final_kl: r.final_kl,
            iterations: r.iterations,
            converged: r.converged,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct DebiasReport {
    enabled: bool,
    unbiased: usize,
    excluded_multibias: usize,
    classes: BTreeMap<BiasKind, ClassReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Split {
    pub train: Vec<String>,
    pub test: Vec<String>,
    pub lower_threshold: f64,
    pub upper_threshold: f64,
    pub successful: Vec<String>,
    pub unsuccessful: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct FeatureReject {
    post_id: String,
    reason: String,
}

fn io_err(stage: Stage) -> impl Fn(io::Error) -> PipelineError {
    move |e| PipelineError::stage(stage, e)
}

fn write_file(path: &Path, contents: &[u8], stage: Stage) -> Result<(), PipelineError> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(io_err(stage))?;
    }
    fs::write(path, contents).map_err(io_err(stage))
}

fn write_json<T: Serialize>(path: &Path, value: &T, stage: Stage) -> Result<(), PipelineError> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| PipelineError::stage(stage, e))?;
    text.push('\n');
    write_file(path, text.as_bytes(), stage)
}

fn write_jsonl<T: Serialize>(path: &Path, rows: &[T], stage: Stage) -> Result<(), PipelineError> {
    let mut buf = Vec::new();
    for r in rows {
        serde_json::to_writer(&mut buf, r).map_err(|e| PipelineError::stage(stage, e))?;
        buf.push(b'\n');
    }
    write_file(path, &buf, stage)
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path, stage: Stage) -> Result<T, PipelineError> {
    let text = fs::read_to_string(path).map_err(|e| missing(stage, path, e))?;
    serde_json::from_str(&text).map_err(|e| PipelineError::data(stage, format!("{}: {e}", path.display())))
}

fn read_jsonl<T: for<'de> Deserialize<'de>>(path: &Path, stage: Stage) -> Result<Vec<T>, PipelineError> {
    let f = fs::File::open(path).map_err(|e| missing(stage, path, e))?;
    let mut out = Vec::new();
    for (i, line) in io::BufReader::new(f).lines().enumerate() {
        let line = line.map_err(io_err(stage))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(
            serde_json::from_str(&line)
                .map_err(|e| PipelineError::data(stage, format!("{}:{}: {e}", path.display(), i + 1)))?,
        );
    }
    Ok(out)
}

fn missing(stage: Stage, path: &Path, e: io::Error) -> PipelineError {
    PipelineError::stage(stage, format!("cannot read {} (run the earlier stages first?): {e}", path.display()))
}

/// The pipeline bound to one validated configuration.
pub struct Pipeline {
    config: PipelineConfig,
    dir: PathBuf,
}

impl Pipeline {
    pub fn new(config: PipelineConfig) -> Result<Self, PipelineError> {
        config.validate()?;
        let dir = config.artifact_path();
        Ok(Pipeline { config, dir })
    }

    pub fn from_config_file(path: &Path) -> Result<Self, PipelineError> {
        Self::new(PipelineConfig::load(path)?)
    }

    pub fn config(&self) -> &PipelineConfig {
        &self.config
    }

    pub fn artifact(&self, rel: &str) -> PathBuf {
        self.dir.join(rel)
    }

    /// The registry implied by the configuration.
    pub fn registry(&self) -> FeatureRegistry {
        FeatureRegistry::new(default_descriptors(), self.config.extraction_params()).expect("catalog ids are unique")
    }

    /// Runs one stage; on failure a `STALE` marker names the stage.
    pub fn run_stage(&self, stage: Stage) -> Result<StageCounts, PipelineError> {
        log::info!("stage {stage}");
        let result = match stage {
            Stage::Ingest => self.ingest(),
            Stage::Debias => self.debias(),
            Stage::Features => self.features(),
            Stage::Train => self.train(),
            Stage::Evaluate => self.evaluate().map(|(c, _)| c),
        };
        let stale = self.artifact(layout::STALE);
        match &result {
            Err(e) => {
                let _ = fs::create_dir_all(&self.dir);
                let _ = fs::write(&stale, format!("{stage}\n{e}\n"));
            }
            Ok(_) => {
                let marked = fs::read_to_string(&stale).ok();
                if marked.is_some_and(|m| m.lines().next() == Some(stage.as_str())) {
                    let _ = fs::remove_file(&stale);
                }
            }
        }
        result
    }

    /// Every stage in order.
    pub fn run(&self) -> Result<PipelineReport, PipelineError> {
        let mut stages = Vec::new();
        for stage in &Stage::ALL[..4] {
            stages.push(self.run_stage(*stage)?);
        }
        let (counts, evaluation) = match self.evaluate() {
            Ok(v) => v,
            Err(e) => {
                let _ = fs::write(self.artifact(layout::STALE), format!("evaluate\n{e}\n"));
                return Err(e);
            }
        };
        stages.push(counts);
        Ok(PipelineReport { stages, evaluation })
    }

    fn ingest(&self) -> Result<StageCounts, PipelineError> {
        const S: Stage = Stage::Ingest;
        let format = self.config.corpus_format().expect("validated");
        let loaded = load_corpus(&self.config.corpus_path(), format).map_err(|e| PipelineError::data(S, e))?;
        let scored = score_corpus(&loaded.records);
        if scored.posts.is_empty() {
            return Err(PipelineError::data(S, "no post survived page normalization"));
        }
        let correlation = match page_correlation_report(&correlation_input(&scored)) {
            Ok(r) => Some(r),
            Err(e) => {
                log::info!("no follower correlation report: {e}");
                None
            }
        };
        let mut posts = scored.posts.clone();
        posts.sort_by(|a, b| a.post.post_id.cmp(&b.post.post_id));
        write_jsonl(&self.artifact(layout::SCORED), &posts, S)?;
        write_jsonl(&self.artifact(layout::CORPUS_REJECTS), &loaded.rejects, S)?;
        write_json(
            &self.artifact(layout::PAGES),
            &PagesArtifact {
                pages: scored.pages.clone(),
                excluded_pages: scored.excluded_pages.clone(),
                correlation,
            },
            S,
        )?;
        Ok(StageCounts {
            stage: S,
            counts: [
                ("records".to_string(), loaded.records.len()),
                ("rejects".to_string(), loaded.rejects.len()),
                ("scored".to_string(), posts.len()),
                ("pages".to_string(), scored.pages.len()),
                ("excluded_pages".to_string(), scored.excluded_pages.len()),
            ]
            .into(),
        })
    }

    fn lexicons(&self) -> Result<Vec<Lexicon>, PipelineError> {
        const S: Stage = Stage::Debias;
        let configs = load_lexicon_configs(&self.config.resolve(&self.config.lexicons)).map_err(|e| PipelineError::data(S, e))?;
        let table = match &self.config.embeddings {
            Some(p) => Some(load_embeddings(&self.config.resolve(p)).map_err(|e| PipelineError::data(S, e))?.0),
            None => None,
        };
        configs
            .into_iter()
            .map(|mut c| {
                if c.kind == BiasKind::Holiday {
                    c.holidays.extend(self.config.holidays.iter().cloned());
                }
                c.build(table.as_ref(), self.config.expansion)
            })
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| PipelineError::data(S, e))
    }

    fn debias(&self) -> Result<StageCounts, PipelineError> {
        const S: Stage = Stage::Debias;
        let posts: Vec<ScoredPost> = read_jsonl(&self.artifact(layout::SCORED), S)?;
        let lexicons = self.lexicons()?;
        let labeled = assign_bias_labels(&posts, &lexicons, &[]);
        let mut bias_of: BTreeMap<String, BiasKind> = BTreeMap::new();
        for (&k, ps) in &labeled.biased {
            for p in ps {
                bias_of.insert(p.post.post_id.clone(), k);
            }
        }
        let mut classes: BTreeMap<BiasKind, ClassReport> = labeled
            .biased
            .iter()
            .map(|(&k, ps)| {
                (
                    k,
                    ClassReport {
                        posts: ps.len(),
                        transform: None,
                        fit: None,
                    },
                )
            })
            .collect();
        let transforms_dir = self.artifact(layout::TRANSFORMS);
        if transforms_dir.exists() {
            fs::remove_dir_all(&transforms_dir).map_err(io_err(S))?;
        }
        let out_posts: Vec<ScoredPost> = if self.config.debias.enabled {
            let outcome = debias_corpus(&labeled, self.config.debias.degree, &self.config.debias.fit_options())
                .map_err(|e| PipelineError::stage(S, e))?;
            for (k, art) in &outcome.artifacts {
                write_json(&transforms_dir.join(format!("{k}.json")), art, S)?;
                let c = classes.get_mut(k).expect("fitted class exists");
                c.transform = Some(art.clone());
                c.fit = outcome.reports.get(k).map(FitSummary::from);
            }
            outcome.posts
        } else {
            labeled
                .unbiased
                .iter()
                .chain(labeled.biased.values().flatten())
                .map(|p| ScoredPost {
                    epsilon_nt: Some(p.epsilon_n),
                    ..p.clone()
                })
                .collect()
        };
        let mut rows: Vec<LabeledRow> = out_posts
            .iter()
            .map(|p| LabeledRow {
                post_id: p.post.post_id.clone(),
                image: p.post.image_path.clone(),
                bias: bias_of.get(&p.post.post_id).copied(),
                epsilon_n: p.epsilon_n,
                epsilon_nt: p.label(),
            })
            .collect();
        rows.sort_by(|a, b| a.post_id.cmp(&b.post_id));
        write_jsonl(&self.artifact(layout::LABELED), &rows, S)?;
        write_json(
            &self.artifact(layout::DEBIAS_REPORT),
            &DebiasReport {
                enabled: self.config.debias.enabled,
                unbiased: labeled.unbiased.len(),
                excluded_multibias: labeled.excluded_multibias.len(),
                classes,
            },
            S,
        )?;
        let mut counts: BTreeMap<String, usize> = [
            ("unbiased".to_string(), labeled.unbiased.len()),
            ("excluded_multibias".to_string(), labeled.excluded_multibias.len()),
            ("labeled".to_string(), rows.len()),
        ]
        .into();
        for (k, ps) in &labeled.biased {
            counts.insert(k.to_string(), ps.len());
        }
        Ok(StageCounts { stage: S, counts })
    }

    fn image_path(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            return p.to_path_buf();
        }
        let corpus = self.config.corpus_path();
        corpus.parent().map_or_else(|| p.to_path_buf(), |d| d.join(p))
    }

    fn features(&self) -> Result<StageCounts, PipelineError> {
        const S: Stage = Stage::Features;
        let rows: Vec<LabeledRow> = read_jsonl(&self.artifact(layout::LABELED), S)?;
        let registry = self.registry();
        let results: Vec<Result<FeatureVector, String>> = rows
            .par_iter()
            .map(|r| {
                let bytes = fs::read(self.image_path(&r.image)).map_err(|e| format!("{}: {e}", r.image.display()))?;
                let img = decode_image(&bytes).map_err(|e| e.to_string())?;
                extract_features(&img, &registry).map_err(|e| e.to_string())
            })
            .collect();
        let mut ok = Vec::new();
        let mut rejects = Vec::new();
        for (r, res) in rows.iter().zip(results) {
            match res {
                Ok(fv) => ok.push((r.post_id.clone(), fv)),
                Err(reason) => {
                    log::warn!("{}: {reason}", r.post_id);
                    rejects.push(FeatureReject {
                        post_id: r.post_id.clone(),
                        reason,
                    })
                }
            }
        }
        write_file(&self.artifact(layout::REGISTRY), registry.to_manifest_json().as_bytes(), S)?;
        let mut buf = Vec::new();
        write_feature_dump(&mut buf, &registry, &ok).map_err(|e| PipelineError::stage(S, e))?;
        write_file(&self.artifact(layout::FEATURES), &buf, S)?;
        write_jsonl(&self.artifact(layout::FEATURE_REJECTS), &rejects, S)?;
        Ok(StageCounts {
            stage: S,
            counts: [
                ("extracted".to_string(), ok.len()),
                ("rejects".to_string(), rejects.len()),
                ("features".to_string(), registry.len()),
            ]
            .into(),
        })
    }

    /// Loads the feature dump after checking its manifest against the config.
    fn load_features(&self, stage: Stage) -> Result<(FeatureRegistry, Vec<(String, FeatureVector)>), PipelineError> {
        let text = fs::read_to_string(self.artifact(layout::REGISTRY)).map_err(|e| missing(stage, &self.artifact(layout::REGISTRY), e))?;
        let stored = FeatureRegistry::from_manifest_json(&text).map_err(|e| PipelineError::data(stage, e))?;
        let expected = self.registry();
        if stored.hash() != expected.hash() {
            return Err(PipelineError::data(
                stage,
                format!("feature registry {} does not match the configuration ({})", stored.hash(), expected.hash()),
            ));
        }
        let f = fs::File::open(self.artifact(layout::FEATURES)).map_err(|e| missing(stage, &self.artifact(layout::FEATURES), e))?;
        let rows = read_feature_dump(f, &stored).map_err(|e| PipelineError::data(stage, e))?;
        Ok((stored, rows))
    }

    fn targets(&self, stage: Stage) -> Result<BTreeMap<String, f64>, PipelineError> {
        let rows: Vec<LabeledRow> = read_jsonl(&self.artifact(layout::LABELED), stage)?;
        Ok(rows.into_iter().map(|r| (r.post_id, r.epsilon_nt)).collect())
    }

    fn train(&self) -> Result<StageCounts, PipelineError> {
        const S: Stage = Stage::Train;
        let (registry, rows) = self.load_features(S)?;
        let targets = self.targets(S)?;
        let rows: Vec<(String, FeatureVector)> = rows.into_iter().filter(|(id, _)| targets.contains_key(id)).collect();
        let scores: BTreeMap<String, f64> = rows.iter().map(|(id, _)| (id.clone(), targets[id])).collect();
        let quartiles = quartile_labels(&scores).map_err(|e| PipelineError::data(S, e))?;

        let mut ids: Vec<String> = scores.keys().cloned().collect();
        ids.shuffle(&mut ChaCha8Rng::seed_from_u64(self.config.seed));
        let n_test = ((ids.len() as f64) * self.config.test_fraction).round() as usize;
        let n_test = n_test.clamp(1, ids.len().saturating_sub(2).max(1));
        let mut test: Vec<String> = ids[..n_test].to_vec();
        let mut train: Vec<String> = ids[n_test..].to_vec();
        test.sort();
        train.sort();

        let by_id: BTreeMap<&str, &FeatureVector> = rows.iter().map(|(id, fv)| (id.as_str(), fv)).collect();
        let xs: Vec<FeatureVector> = train.iter().map(|id| by_id[id.as_str()].clone()).collect();
        let ys: Vec<f64> = train.iter().map(|id| scores[id]).collect();
        let regressor = train_svr(&xs, &ys, &self.config.model.regressor).map_err(|e| PipelineError::stage(S, e))?;

        let successful: BTreeSet<&str> = quartiles.successful_ids.iter().map(String::as_str).collect();
        let unsuccessful: BTreeSet<&str> = quartiles.unsuccessful_ids.iter().map(String::as_str).collect();
        let class_ids: Vec<&String> = train
            .iter()
            .filter(|id| successful.contains(id.as_str()) || unsuccessful.contains(id.as_str()))
            .collect();
        let cx: Vec<FeatureVector> = class_ids.iter().map(|id| by_id[id.as_str()].clone()).collect();
        let cl: Vec<bool> = class_ids.iter().map(|id| successful.contains(id.as_str())).collect();
        let mut svc_params = self.config.model.classifier;
        if let Some(grid) = &self.config.model.grid_search {
            let (best, _) = grid_search(&cx, Targets::Labels(&cl), &svc_params, grid, self.config.seed)
                .map_err(|e| PipelineError::stage(S, e))?;
            svc_params = best;
        }
        let classifier = train_svc(&cx, &cl, &svc_params).map_err(|e| PipelineError::stage(S, e))?;
        let linear_params = SvmParams {
            kernel: KernelKind::Linear,
            ..svc_params
        };
        let linear = train_svc(&cx, &cl, &linear_params).map_err(|e| PipelineError::stage(S, e))?;

        write_file(&self.artifact(layout::MODEL), regressor.to_json().as_bytes(), S)?;
        write_file(&self.artifact(layout::CLASSIFIER), classifier.to_json().as_bytes(), S)?;
        write_file(&self.artifact(layout::LINEAR), linear.to_json().as_bytes(), S)?;
        write_file(&self.artifact(layout::MODEL_REGISTRY), registry.to_manifest_json().as_bytes(), S)?;
        let split = Split {
            train: train.clone(),
            test: test.clone(),
            lower_threshold: quartiles.lower_threshold,
            upper_threshold: quartiles.upper_threshold,
            successful: quartiles.successful_ids.clone(),
            unsuccessful: quartiles.unsuccessful_ids.clone(),
        };
        write_json(&self.artifact(layout::SPLIT), &split, S)?;
        Ok(StageCounts {
            stage: S,
            counts: [
                ("train".to_string(), train.len()),
                ("test".to_string(), test.len()),
                ("classifier_train".to_string(), cx.len()),
                ("support_vectors".to_string(), regressor.support_vectors.len()),
            ]
            .into(),
        })
    }

    fn load_model(&self, rel: &str, registry: &FeatureRegistry, stage: Stage) -> Result<EngagementModel, PipelineError> {
        let path = self.artifact(rel);
        let text = fs::read_to_string(&path).map_err(|e| missing(stage, &path, e))?;
        let m = EngagementModel::from_json(&text).map_err(|e| PipelineError::data(stage, e))?;
        if m.registry_hash != registry.hash() {
            return Err(PipelineError::data(stage, format!("{} was trained on another feature registry", path.display())));
        }
        Ok(m)
    }

    fn evaluate(&self) -> Result<(StageCounts, EvaluationSummary), PipelineError> {
        const S: Stage = Stage::Evaluate;
        let (registry, rows) = self.load_features(S)?;
        let targets = self.targets(S)?;
        let split: Split = read_json(&self.artifact(layout::SPLIT), S)?;
        let regressor = self.load_model(layout::MODEL, &registry, S)?;
        let classifier = self.load_model(layout::CLASSIFIER, &registry, S)?;
        let linear = self.load_model(layout::LINEAR, &registry, S)?;
        let by_id: BTreeMap<&str, &FeatureVector> = rows.iter().map(|(id, fv)| (id.as_str(), fv)).collect();

        let test: Vec<&String> = split.test.iter().filter(|id| by_id.contains_key(id.as_str())).collect();
        let xs: Vec<FeatureVector> = test.iter().map(|id| by_id[id.as_str()].clone()).collect();
        let ys: Vec<f64> = test.iter().map(|id| targets[*id]).collect();
        let reg = evaluate(&regressor, &xs, Targets::Scores(&ys)).map_err(|e| PipelineError::data(S, e))?;

        let successful: BTreeSet<&str> = split.successful.iter().map(String::as_str).collect();
        let unsuccessful: BTreeSet<&str> = split.unsuccessful.iter().map(String::as_str).collect();
        let class_ids: Vec<&&String> = test
            .iter()
            .filter(|id| successful.contains(id.as_str()) || unsuccessful.contains(id.as_str()))
            .collect();
        let cx: Vec<FeatureVector> = class_ids.iter().map(|id| by_id[id.as_str()].clone()).collect();
        let cl: Vec<bool> = class_ids.iter().map(|id| successful.contains(id.as_str())).collect();
        let cls = evaluate(&classifier, &cx, Targets::Labels(&cl)).map_err(|e| PipelineError::data(S, e))?;
        let top = significance(&linear, &registry, self.config.model.significance_top).unwrap_or_default();

        let summary = EvaluationSummary {
            registry_hash: registry.hash().to_string(),
            debiased: self.config.debias.enabled,
            regression_rmse: reg.rmse.unwrap_or(f64::NAN),
            regression_n: reg.n,
            classification: ClassificationMetrics {
                n: cls.n,
                accuracy: cls.accuracy.unwrap_or(f64::NAN),
                confusion: cls.confusion.unwrap_or_default(),
            },
            significance: top,
        };
        write_json(&self.artifact(layout::EVALUATION), &summary, S)?;
        Ok((
            StageCounts {
                stage: S,
                counts: [("regression_test".to_string(), reg.n), ("classification_test".to_string(), cls.n)].into(),
            },
            summary,
        ))
    }
}

/// Registry and regression model loaded for serving or tuning.
#[derive(Debug, Clone)]
pub struct ServingArtifacts {
    pub registry: FeatureRegistry,
    pub model: EngagementModel,
}

impl ServingArtifacts {
    /// Loads `model/registry.json` and `model/model.json`, rejecting a hash mismatch.
    pub fn load(artifact_dir: &Path) -> Result<Self, PipelineError> {
        const S: Stage = Stage::Evaluate;
        let reg_path = artifact_dir.join(layout::MODEL_REGISTRY);
        let text = fs::read_to_string(&reg_path).map_err(|e| missing(S, &reg_path, e))?;
        let registry = FeatureRegistry::from_manifest_json(&text).map_err(|e| PipelineError::data(S, e))?;
        let model_path = artifact_dir.join(layout::MODEL);
        let text = fs::read_to_string(&model_path).map_err(|e| missing(S, &model_path, e))?;
        let model = EngagementModel::from_json(&text).map_err(|e| PipelineError::data(S, e))?;
        if model.registry_hash != registry.hash() {
            return Err(PipelineError::data(S, "model and registry hashes differ"));
        }
        Ok(ServingArtifacts { registry, model })
    }
}

/// Writes a report as pretty JSON to any sink.
pub fn write_report<W: Write>(mut out: W, report: &PipelineReport) -> io::Result<()> {
    serde_json::to_writer_pretty(&mut out, report)?;
    writeln!(out)
}
