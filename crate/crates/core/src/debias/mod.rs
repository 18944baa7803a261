//! Distribution-aligning score transforms.
//!
//! For each bias class, a monotone polynomial is fitted so that the soft
//! histogram of transformed biased scores matches the unbiased score
//! histogram in KL divergence. Applying it yields bias-free scores that keep
//! the biased posts' relative order.

mod distribution;
mod fit;
mod transform;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use distribution::{
    build_distribution, build_distribution_on, edges_for, kl_divergence, silverman_bandwidth,
    uniform_edges, ScoreDistribution, SMOOTHING,
};
pub use fit::{
    fit_transform, fit_transform_auto, fit_with_start, kl_gradient, kl_objective,
    kl_value_and_gradient, raw_kl, FitOptions, FitReport,
};
pub use transform::{apply_transform, DesignMatrix, PolynomialTransform};

use crate::biasdetect::{BiasKind, LabeledCorpus};
use crate::corpus::ScoredPost;

#[derive(Debug, Error)]
pub enum DebiasError {
    #[error("too few scores: need {need}, got {got}")]
    TooFewScores { need: usize, got: usize },
    #[error("bin edges differ between distributions")]
    SupportMismatch,
    #[error("loss became non-finite; check bandwidth and bin settings")]
    NonFiniteLoss,
    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),
    #[error("invalid transform: {0}")]
    InvalidTransform(String),
    #[error("polynomial degree must be at least 1, got {0}")]
    BadDegree(usize),
}

/// Persisted form of a fitted transform.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransformArtifact {
    pub bias: BiasKind,
    pub degree: usize,
    #[serde(rename = "W")]
    pub w: Vec<f64>,
    pub shift: f64,
    pub scale: f64,
    pub final_kl: f64,
    pub initial_kl: f64,
}

impl TransformArtifact {
    pub fn new(bias: BiasKind, t: &PolynomialTransform, report: &FitReport) -> Self {
        TransformArtifact {
            bias,
            degree: t.degree(),
            w: t.coefficients.clone(),
            shift: t.input_shift,
            scale: t.input_scale,
            final_kl: report.final_kl,
            initial_kl: report.initial_kl,
        }
    }

    pub fn transform(&self) -> Result<PolynomialTransform, DebiasError> {
        if self.w.len() != self.degree + 1 {
            return Err(DebiasError::InvalidTransform(format!(
                "degree {} with {} coefficients",
                self.degree,
                self.w.len()
            )));
        }
        PolynomialTransform::new(self.w.clone(), self.shift, self.scale)
    }
}

/// How the polynomial degree is chosen per bias class.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DegreeChoice {
    Fixed(usize),
    /// Raise the degree up to `max` while each step improves KL by at least 1e-3.
    Auto { max: usize },
}

impl Default for DegreeChoice {
    fn default() -> Self {
        DegreeChoice::Fixed(3)
    }
}

pub const AUTO_DEGREE_MIN_GAIN: f64 = 1e-3;

#[derive(Debug, Clone, Default)]
pub struct DebiasOutcome {
    pub artifacts: BTreeMap<BiasKind, TransformArtifact>,
    pub reports: BTreeMap<BiasKind, FitReport>,
    /// Unbiased posts (epsilon_nt = epsilon_n) followed by transformed biased posts.
    pub posts: Vec<ScoredPost>,
    /// Bias classes left out because they had too few posts to fit.
    pub skipped: Vec<(BiasKind, usize)>,
}

/// Fits and applies one transform per bias class. The target distribution is
/// built globally over all unbiased normalized scores.
pub fn debias_corpus(
    labeled: &LabeledCorpus,
    degree: DegreeChoice,
    opts: &FitOptions,
) -> Result<DebiasOutcome, DebiasError> {
    let unbiased: Vec<f64> = labeled.unbiased.iter().map(|p| p.epsilon_n).collect();
    let mut out = DebiasOutcome::default();
    for p in &labeled.unbiased {
        let mut p = p.clone();
        p.epsilon_nt = Some(p.epsilon_n);
        out.posts.push(p);
    }
    for (&kind, posts) in &labeled.biased {
        if posts.len() < 10 {
            log::warn!("{kind}: only {} posts, not fitting a transform", posts.len());
            out.skipped.push((kind, posts.len()));
            continue;
        }
        let scores: Vec<f64> = posts.iter().map(|p| p.epsilon_n).collect();
        let (t, report) = match degree {
            DegreeChoice::Fixed(d) => fit_transform(&unbiased, &scores, d, opts)?,
            DegreeChoice::Auto { max } => {
                fit_transform_auto(&unbiased, &scores, max, AUTO_DEGREE_MIN_GAIN, opts)?
            }
        };
        let transformed = apply_transform(&t, &scores);
        for (p, y) in posts.iter().zip(transformed) {
            let mut p = p.clone();
            p.epsilon_nt = Some(y);
            out.posts.push(p);
        }
        out.artifacts.insert(kind, TransformArtifact::new(kind, &t, &report));
        out.reports.insert(kind, report);
    }
    Ok(out)
}
