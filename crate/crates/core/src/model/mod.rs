//! Kernel support vector regression and classification over feature vectors.

mod cv;
mod smo;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::aesthetics::{FeatureRegistry, FeatureVector};
use smo::DualProblem;

pub use cv::{grid_search, GridPoint, GridSpec};

pub const ARTIFACT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("feature dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("need {need} training samples, got {got}")]
    TooFewSamples { need: usize, got: usize },
    #[error("training labels contain a single class")]
    SingleClass,
    #[error("registry hash mismatch: model {expected}, features {got}")]
    RegistryMismatch { expected: String, got: String },
    #[error("empty test set")]
    EmptyTestSet,
    #[error("need at least {need} scores, got {got}")]
    TooFewScores { need: usize, got: usize },
    #[error("quartile thresholds leave an empty class")]
    DegenerateQuartiles,
    #[error("invalid hyperparameter: {0}")]
    BadHyperparameter(String),
    #[error("non-finite feature value")]
    NonFinite,
    #[error("bad model artifact: {0}")]
    Artifact(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KernelKind {
    Rbf,
    Linear,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    pub kind: KernelKind,
    pub gamma: f64,
}

impl KernelSpec {
    pub fn rbf(gamma: f64) -> Self {
        KernelSpec {
            kind: KernelKind::Rbf,
            gamma,
        }
    }

    pub fn linear() -> Self {
        KernelSpec {
            kind: KernelKind::Linear,
            gamma: 1.0,
        }
    }

    pub fn eval(&self, a: &[f64], b: &[f64]) -> f64 {
        match self.kind {
            KernelKind::Rbf => {
                let d2: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
                (-self.gamma * d2).exp()
            }
            KernelKind::Linear => a.iter().zip(b).map(|(x, y)| x * y).sum(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Svr,
    Svc,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Standardize {
    /// Learn per-feature means and standard deviations from the training set.
    #[default]
    Learn,
    /// Use the features as given.
    Identity,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SvmParams {
    pub kernel: KernelKind,
    #[serde(rename = "C")]
    pub c: f64,
    pub epsilon: f64,
    /// `None` picks `1 / (n_features * variance)` of the standardized data.
    pub gamma: Option<f64>,
    pub tol: f64,
    pub standardize: Standardize,
    pub max_iter: Option<usize>,
}

impl Default for SvmParams {
    fn default() -> Self {
        SvmParams {
            kernel: KernelKind::Rbf,
            c: 10.0,
            epsilon: 0.1,
            gamma: None,
            tol: 1e-3,
            standardize: Standardize::Learn,
            max_iter: None,
        }
    }
}

impl SvmParams {
    fn validate(&self) -> Result<(), ModelError> {
        let bad = |m: &str| Err(ModelError::BadHyperparameter(m.to_string()));
        if !(self.c > 0.0 && self.c.is_finite()) {
            return bad("C must be positive");
        }
        if !(self.epsilon >= 0.0 && self.epsilon.is_finite()) {
            return bad("epsilon must be non-negative");
        }
        if let Some(g) = self.gamma {
            if !(g > 0.0 && g.is_finite()) {
                return bad("gamma must be positive");
            }
        }
        if !(self.tol > 0.0) {
            return bad("tol must be positive");
        }
        Ok(())
    }
}

/// A trained kernel expansion `f(x) = sum_i coef_i k(sv_i, z(x)) + b` where
/// `z` standardizes with the stored constants.
#[derive(Debug, Clone, PartialEq)]
pub struct EngagementModel {
    pub kind: ModelKind,
    pub kernel: KernelSpec,
    pub c: f64,
    pub epsilon: f64,
    pub support_vectors: Vec<Vec<f64>>,
    pub dual_coefs: Vec<f64>,
    pub bias: f64,
    pub feature_means: Vec<f64>,
    pub feature_stds: Vec<f64>,
    pub registry_hash: String,
}

/// Solver diagnostics for one training run.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverReport {
    pub iterations: usize,
    pub converged: bool,
    /// Optimality gap recomputed from a fresh gradient after solving.
    pub kkt_gap: f64,
    /// Signed dual coefficient of every training point, in input order.
    pub coefficients: Vec<f64>,
    pub objective_trace: Vec<f64>,
}

impl EngagementModel {
    pub fn n_features(&self) -> usize {
        self.feature_means.len()
    }

    pub fn standardize(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(&self.feature_means)
            .zip(&self.feature_stds)
            .map(|((v, m), s)| (v - m) / s)
            .collect()
    }

    /// Decision value on raw feature values (no registry check).
    pub fn predict_values(&self, x: &[f64]) -> f64 {
        let z = self.standardize(x);
        let mut acc = 0.0;
        for (sv, a) in self.support_vectors.iter().zip(&self.dual_coefs) {
            acc += a * self.kernel.eval(sv, &z);
        }
        acc + self.bias
    }

    pub fn check(&self, x: &FeatureVector) -> Result<(), ModelError> {
        if x.registry_hash != self.registry_hash {
            return Err(ModelError::RegistryMismatch {
                expected: self.registry_hash.clone(),
                got: x.registry_hash.clone(),
            });
        }
        if x.values.len() != self.n_features() {
            return Err(ModelError::DimensionMismatch {
                expected: self.n_features(),
                got: x.values.len(),
            });
        }
        Ok(())
    }

    /// Linear weights in standardized feature space (linear kernel only).
    pub fn linear_weights(&self) -> Option<Vec<f64>> {
        if self.kernel.kind != KernelKind::Linear {
            return None;
        }
        let mut w = vec![0.0; self.n_features()];
        for (sv, a) in self.support_vectors.iter().zip(&self.dual_coefs) {
            for (wi, v) in w.iter_mut().zip(sv) {
                *wi += a * v;
            }
        }
        Some(w)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&Artifact::from(self)).expect("model serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, ModelError> {
        let a: Artifact = serde_json::from_str(text).map_err(|e| ModelError::Artifact(e.to_string()))?;
        if a.version != ARTIFACT_VERSION {
            return Err(ModelError::Artifact(format!("unsupported version {}", a.version)));
        }
        let d = a.standardize.mean.len();
        if a.standardize.std.len() != d
            || a.sv.len() != a.alpha.len()
            || a.sv.iter().any(|s| s.len() != d)
            || a.standardize.std.iter().any(|s| !(*s > 0.0))
        {
            return Err(ModelError::Artifact("inconsistent shapes".into()));
        }
        Ok(EngagementModel {
            kind: a.kind,
            kernel: a.kernel,
            c: a.c,
            epsilon: a.epsilon,
            support_vectors: a.sv,
            dual_coefs: a.alpha,
            bias: a.b,
            feature_means: a.standardize.mean,
            feature_stds: a.standardize.std,
            registry_hash: a.registry_hash,
        })
    }
}

#[derive(Serialize, Deserialize)]
struct StandardizeConstants {
    mean: Vec<f64>,
    std: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct Artifact {
    version: u32,
    kind: ModelKind,
    kernel: KernelSpec,
    #[serde(rename = "C")]
    c: f64,
    epsilon: f64,
    sv: Vec<Vec<f64>>,
    alpha: Vec<f64>,
    b: f64,
    standardize: StandardizeConstants,
    registry_hash: String,
}

impl From<&EngagementModel> for Artifact {
    fn from(m: &EngagementModel) -> Self {
        Artifact {
            version: ARTIFACT_VERSION,
            kind: m.kind,
            kernel: m.kernel,
            c: m.c,
            epsilon: m.epsilon,
            sv: m.support_vectors.clone(),
            alpha: m.dual_coefs.clone(),
            b: m.bias,
            standardize: StandardizeConstants {
                mean: m.feature_means.clone(),
                std: m.feature_stds.clone(),
            },
            registry_hash: m.registry_hash.clone(),
        }
    }
}

/// Prediction with registry and dimension checks.
pub fn predict(model: &EngagementModel, x: &FeatureVector) -> Result<f64, ModelError> {
    model.check(x)?;
    Ok(model.predict_values(&x.values))
}

/// Class decision of a classifier: `true` for the positive class.
pub fn classify(model: &EngagementModel, x: &FeatureVector) -> Result<bool, ModelError> {
    Ok(predict(model, x)? > 0.0)
}

struct Prepared {
    z: Vec<Vec<f64>>,
    means: Vec<f64>,
    stds: Vec<f64>,
    hash: String,
    kernel: KernelSpec,
}

fn prepare(xs: &[FeatureVector], params: &SvmParams) -> Result<Prepared, ModelError> {
    params.validate()?;
    let first = xs.first().ok_or(ModelError::TooFewSamples { need: 1, got: 0 })?;
    let d = first.values.len();
    for x in xs {
        if x.values.len() != d {
            return Err(ModelError::DimensionMismatch {
                expected: d,
                got: x.values.len(),
            });
        }
        if x.registry_hash != first.registry_hash {
            return Err(ModelError::RegistryMismatch {
                expected: first.registry_hash.clone(),
                got: x.registry_hash.clone(),
            });
        }
        if x.values.iter().any(|v| !v.is_finite()) {
            return Err(ModelError::NonFinite);
        }
    }
    let n = xs.len() as f64;
    let (means, stds) = match params.standardize {
        Standardize::Identity => (vec![0.0; d], vec![1.0; d]),
        Standardize::Learn => {
            let means: Vec<f64> = (0..d).map(|j| xs.iter().map(|x| x.values[j]).sum::<f64>() / n).collect();
            let stds = (0..d)
                .map(|j| {
                    let var = xs.iter().map(|x| (x.values[j] - means[j]).powi(2)).sum::<f64>() / n;
                    // constant columns keep unit scale so later perturbations stay finite
                    if var.sqrt() > 1e-12 {
                        var.sqrt()
                    } else {
                        1.0
                    }
                })
                .collect();
            (means, stds)
        }
    };
    let z: Vec<Vec<f64>> = xs
        .iter()
        .map(|x| x.values.iter().zip(&means).zip(&stds).map(|((v, m), s)| (v - m) / s).collect())
        .collect();
    let kernel = match params.kernel {
        KernelKind::Linear => KernelSpec::linear(),
        KernelKind::Rbf => KernelSpec::rbf(params.gamma.unwrap_or_else(|| default_gamma(&z))),
    };
    Ok(Prepared {
        z,
        means,
        stds,
        hash: first.registry_hash.clone(),
        kernel,
    })
}

/// `1 / (n_features * variance of all standardized entries)`.
pub fn default_gamma(z: &[Vec<f64>]) -> f64 {
    let d = z.first().map_or(1, |r| r.len()).max(1);
    let all: Vec<f64> = z.iter().flatten().copied().collect();
    if all.is_empty() {
        return 1.0 / d as f64;
    }
    let m = all.iter().sum::<f64>() / all.len() as f64;
    let var = all.iter().map(|v| (v - m).powi(2)).sum::<f64>() / all.len() as f64;
    if var > 0.0 {
        1.0 / (d as f64 * var)
    } else {
        1.0 / d as f64
    }
}

fn kernel_matrix(kernel: &KernelSpec, z: &[Vec<f64>]) -> Vec<f64> {
    let n = z.len();
    let mut k = vec![0.0; n * n];
    for i in 0..n {
        for j in i..n {
            let v = kernel.eval(&z[i], &z[j]);
            k[i * n + j] = v;
            k[j * n + i] = v;
        }
    }
    k
}

fn max_iter(params: &SvmParams, n: usize) -> usize {
    params.max_iter.unwrap_or_else(|| (100 * n).max(10_000_000))
}

fn assemble(
    kind: ModelKind,
    prep: Prepared,
    coefs: &[f64],
    bias: f64,
    params: &SvmParams,
) -> EngagementModel {
    let (mut svs, mut alphas) = (Vec::new(), Vec::new());
    for (z, &a) in prep.z.into_iter().zip(coefs) {
        if a != 0.0 {
            svs.push(z);
            alphas.push(a);
        }
    }
    EngagementModel {
        kind,
        kernel: prep.kernel,
        c: params.c,
        epsilon: if kind == ModelKind::Svr { params.epsilon } else { 0.0 },
        support_vectors: svs,
        dual_coefs: alphas,
        bias,
        feature_means: prep.means,
        feature_stds: prep.stds,
        registry_hash: prep.hash,
    }
}

/// Epsilon-insensitive regression; returns the model and solver diagnostics.
pub fn train_svr_report(
    xs: &[FeatureVector],
    ys: &[f64],
    params: &SvmParams,
    trace: bool,
) -> Result<(EngagementModel, SolverReport), ModelError> {
    if xs.len() != ys.len() {
        return Err(ModelError::DimensionMismatch {
            expected: xs.len(),
            got: ys.len(),
        });
    }
    let prep = prepare(xs, params)?;
    if ys.iter().any(|v| !v.is_finite()) {
        return Err(ModelError::NonFinite);
    }
    let n = xs.len();
    if ys.iter().all(|&v| v == ys[0]) {
        log::warn!("all {n} regression targets equal {}; returning a constant model", ys[0]);
        let report = SolverReport {
            iterations: 0,
            converged: true,
            kkt_gap: 0.0,
            coefficients: vec![0.0; n],
            objective_trace: Vec::new(),
        };
        return Ok((assemble(ModelKind::Svr, prep, &vec![0.0; n], ys[0], params), report));
    }
    let k = kernel_matrix(&prep.kernel, &prep.z);
    let mut y = vec![1.0; 2 * n];
    y[n..].fill(-1.0);
    let p: Vec<f64> = (0..2 * n)
        .map(|i| if i < n { params.epsilon - ys[i] } else { params.epsilon + ys[i - n] })
        .collect();
    let prob = DualProblem {
        kernel: &k,
        n_base: n,
        y,
        p,
        c: vec![params.c; 2 * n],
    };
    let sol = prob.solve(params.tol, max_iter(params, 2 * n), trace);
    if !sol.converged {
        log::warn!("SVR solver stopped after {} iterations without converging", sol.iterations);
    }
    let gap = prob.violation(&sol.alpha, &prob.gradient(&sol.alpha));
    let coefs: Vec<f64> = (0..n).map(|i| sol.alpha[i] - sol.alpha[i + n]).collect();
    let report = SolverReport {
        iterations: sol.iterations,
        converged: sol.converged,
        kkt_gap: gap,
        coefficients: coefs.clone(),
        objective_trace: sol.objective_trace,
    };
    Ok((assemble(ModelKind::Svr, prep, &coefs, -sol.rho, params), report))
}

pub fn train_svr(xs: &[FeatureVector], ys: &[f64], params: &SvmParams) -> Result<EngagementModel, ModelError> {
    train_svr_report(xs, ys, params, false).map(|(m, _)| m)
}

/// C-support vector classification; `true` labels are the positive class.
pub fn train_svc_report(
    xs: &[FeatureVector],
    labels: &[bool],
    params: &SvmParams,
    trace: bool,
) -> Result<(EngagementModel, SolverReport), ModelError> {
    if xs.len() != labels.len() {
        return Err(ModelError::DimensionMismatch {
            expected: xs.len(),
            got: labels.len(),
        });
    }
    if !(labels.iter().any(|&l| l) && labels.iter().any(|&l| !l)) {
        return Err(ModelError::SingleClass);
    }
    let prep = prepare(xs, params)?;
    let n = xs.len();
    let k = kernel_matrix(&prep.kernel, &prep.z);
    let y: Vec<f64> = labels.iter().map(|&l| if l { 1.0 } else { -1.0 }).collect();
    let prob = DualProblem {
        kernel: &k,
        n_base: n,
        y: y.clone(),
        p: vec![-1.0; n],
        c: vec![params.c; n],
    };
    let sol = prob.solve(params.tol, max_iter(params, n), trace);
    if !sol.converged {
        log::warn!("SVC solver stopped after {} iterations without converging", sol.iterations);
    }
    let gap = prob.violation(&sol.alpha, &prob.gradient(&sol.alpha));
    let coefs: Vec<f64> = sol.alpha.iter().zip(&y).map(|(a, y)| a * y).collect();
    let report = SolverReport {
        iterations: sol.iterations,
        converged: sol.converged,
        kkt_gap: gap,
        coefficients: coefs.clone(),
        objective_trace: sol.objective_trace,
    };
    Ok((assemble(ModelKind::Svc, prep, &coefs, -sol.rho, params), report))
}

pub fn train_svc(xs: &[FeatureVector], labels: &[bool], params: &SvmParams) -> Result<EngagementModel, ModelError> {
    train_svc_report(xs, labels, params, false).map(|(m, _)| m)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuccessLabeling {
    pub successful_ids: Vec<String>,
    pub unsuccessful_ids: Vec<String>,
    pub lower_threshold: f64,
    pub upper_threshold: f64,
}

/// Percentile with linear interpolation between order statistics.
pub fn percentile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

pub const MIN_QUARTILE_SCORES: usize = 8;

/// Bottom quartile unsuccessful, top quartile successful; scores equal to a
/// threshold belong to neither class.
pub fn quartile_labels(scores: &BTreeMap<String, f64>) -> Result<SuccessLabeling, ModelError> {
    if scores.len() < MIN_QUARTILE_SCORES {
        return Err(ModelError::TooFewScores {
            need: MIN_QUARTILE_SCORES,
            got: scores.len(),
        });
    }
    let mut sorted: Vec<f64> = scores.values().copied().collect();
    sorted.sort_by(f64::total_cmp);
    let lower = percentile(&sorted, 0.25);
    let upper = percentile(&sorted, 0.75);
    let successful_ids: Vec<String> = scores.iter().filter(|(_, &s)| s > upper).map(|(k, _)| k.clone()).collect();
    let unsuccessful_ids: Vec<String> = scores.iter().filter(|(_, &s)| s < lower).map(|(k, _)| k.clone()).collect();
    if successful_ids.is_empty() || unsuccessful_ids.is_empty() {
        return Err(ModelError::DegenerateQuartiles);
    }
    Ok(SuccessLabeling {
        successful_ids,
        unsuccessful_ids,
        lower_threshold: lower,
        upper_threshold: upper,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Confusion {
    pub true_positive: usize,
    pub false_positive: usize,
    pub true_negative: usize,
    pub false_negative: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureWeight {
    pub feature: String,
    pub name: String,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub n: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub accuracy: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rmse: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub confusion: Option<Confusion>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub significance: Vec<FeatureWeight>,
}

pub enum Targets<'a> {
    Scores(&'a [f64]),
    Labels(&'a [bool]),
}

/// Accuracy and confusion counts for labels, RMSE for scores.
pub fn evaluate(model: &EngagementModel, xs: &[FeatureVector], targets: Targets<'_>) -> Result<EvaluationReport, ModelError> {
    if xs.is_empty() {
        return Err(ModelError::EmptyTestSet);
    }
    let preds = xs.iter().map(|x| predict(model, x)).collect::<Result<Vec<_>, _>>()?;
    let n = xs.len();
    match targets {
        Targets::Scores(ys) => {
            if ys.len() != n {
                return Err(ModelError::DimensionMismatch { expected: n, got: ys.len() });
            }
            let mse = preds.iter().zip(ys).map(|(p, y)| (p - y).powi(2)).sum::<f64>() / n as f64;
            Ok(EvaluationReport {
                n,
                accuracy: None,
                rmse: Some(mse.sqrt()),
                confusion: None,
                significance: Vec::new(),
            })
        }
        Targets::Labels(ls) => {
            if ls.len() != n {
                return Err(ModelError::DimensionMismatch { expected: n, got: ls.len() });
            }
            let mut c = Confusion::default();
            for (p, &l) in preds.iter().zip(ls) {
                match (*p > 0.0, l) {
                    (true, true) => c.true_positive += 1,
                    (true, false) => c.false_positive += 1,
                    (false, false) => c.true_negative += 1,
                    (false, true) => c.false_negative += 1,
                }
            }
            Ok(EvaluationReport {
                n,
                accuracy: Some((c.true_positive + c.true_negative) as f64 / n as f64),
                rmse: None,
                confusion: Some(c),
                significance: Vec::new(),
            })
        }
    }
}

/// Top features by absolute weight of a linear-kernel model; ties keep
/// registry order.
pub fn significance(model: &EngagementModel, registry: &FeatureRegistry, top: usize) -> Option<Vec<FeatureWeight>> {
    let w = model.linear_weights()?;
    let mut idx: Vec<usize> = (0..w.len()).collect();
    idx.sort_by(|&a, &b| w[b].abs().total_cmp(&w[a].abs()).then(a.cmp(&b)));
    Some(
        idx.into_iter()
            .take(top)
            .map(|i| FeatureWeight {
                feature: registry.features()[i].id.clone(),
                name: registry.features()[i].human_name.clone(),
                weight: w[i],
            })
            .collect(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fv(v: Vec<f64>) -> FeatureVector {
        FeatureVector {
            registry_hash: "h".into(),
            values: v,
        }
    }

    #[test]
    fn single_point_interpolates() {
        let xs = vec![fv(vec![0.3, -2.0])];
        for eps in [0.0, 0.1, 1.0] {
            let p = SvmParams {
                epsilon: eps,
                ..Default::default()
            };
            let m = train_svr(&xs, &[5.0], &p).unwrap();
            assert!((predict(&m, &xs[0]).unwrap() - 5.0).abs() <= eps + 1e-12);
        }
    }

    #[test]
    fn smooth_target_fits() {
        let xs: Vec<FeatureVector> = (0..50).map(|i| fv(vec![i as f64 / 49.0])).collect();
        let ys: Vec<f64> = xs.iter().map(|x| (2.0 * x.values[0]).tanh()).collect();
        let p = SvmParams {
            c: 10.0,
            epsilon: 0.01,
            ..Default::default()
        };
        let (m, r) = train_svr_report(&xs, &ys, &p, true).unwrap();
        assert!(r.converged && r.kkt_gap < p.tol);
        assert!(r.objective_trace.windows(2).all(|w| w[1] <= w[0] + 1e-12));
        let ev = evaluate(&m, &xs, Targets::Scores(&ys)).unwrap();
        assert!(ev.rmse.unwrap() < 0.05, "{ev:?}");
        assert!(m.dual_coefs.iter().all(|a| a.abs() <= p.c + 1e-12));
    }

    #[test]
    fn xor_and_label_flip() {
        let xs: Vec<FeatureVector> = [[0.0, 0.0], [1.0, 1.0], [0.0, 1.0], [1.0, 0.0]].iter().map(|v| fv(v.to_vec())).collect();
        let labels = [false, false, true, true];
        let p = SvmParams {
            c: 100.0,
            gamma: Some(1.0),
            standardize: Standardize::Identity,
            ..Default::default()
        };
        let m = train_svc(&xs, &labels, &p).unwrap();
        let ev = evaluate(&m, &xs, Targets::Labels(&labels)).unwrap();
        assert_eq!(ev.accuracy, Some(1.0));
        let flipped: Vec<bool> = labels.iter().map(|l| !l).collect();
        let mf = train_svc(&xs, &flipped, &p).unwrap();
        for x in &xs {
            assert_ne!(classify(&m, x).unwrap(), classify(&mf, x).unwrap());
        }
        assert!(matches!(train_svc(&xs, &[true; 4], &p), Err(ModelError::SingleClass)));
    }

    #[test]
    fn quartiles_of_one_to_eight() {
        let scores: BTreeMap<String, f64> = (1..=8).map(|i| (format!("{i}"), i as f64)).collect();
        let q = quartile_labels(&scores).unwrap();
        assert_eq!(q.unsuccessful_ids, vec!["1", "2"]);
        assert_eq!(q.successful_ids, vec!["7", "8"]);
        let flat: BTreeMap<String, f64> = (1..=8).map(|i| (format!("{i}"), 3.0)).collect();
        assert!(matches!(quartile_labels(&flat), Err(ModelError::DegenerateQuartiles)));
        let few: BTreeMap<String, f64> = (1..=7).map(|i| (format!("{i}"), i as f64)).collect();
        assert!(matches!(quartile_labels(&few), Err(ModelError::TooFewScores { .. })));
    }

    #[test]
    fn constant_model_and_registry_check() {
        let m = EngagementModel {
            kind: ModelKind::Svc,
            kernel: KernelSpec::rbf(1.0),
            c: 1.0,
            epsilon: 0.0,
            support_vectors: vec![],
            dual_coefs: vec![],
            bias: 1.0,
            feature_means: vec![0.0],
            feature_stds: vec![1.0],
            registry_hash: "h".into(),
        };
        let xs: Vec<FeatureVector> = (0..4).map(|i| fv(vec![i as f64])).collect();
        let ev = evaluate(&m, &xs, Targets::Labels(&[true, false, true, false])).unwrap();
        assert_eq!(ev.accuracy, Some(0.5));
        let other = FeatureVector {
            registry_hash: "x".into(),
            values: vec![0.0],
        };
        assert!(matches!(predict(&m, &other), Err(ModelError::RegistryMismatch { .. })));
        assert_eq!(EngagementModel::from_json(&m.to_json()).unwrap(), m);
        assert!(matches!(evaluate(&m, &[], Targets::Scores(&[])), Err(ModelError::EmptyTestSet)));
    }
}
