//! Exhaustive bounded what-if search over feature perturbations.

use std::cmp::Ordering;
use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::aesthetics::{FeatureRegistry, FeatureVector};
use crate::model::{EngagementModel, ModelError};

pub const DEFAULT_BUDGET: u64 = 10_000_000;
/// Values this close to zero move additively by a share of the feature's std.
pub const ZERO_VALUE: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum TunerError {
    #[error("unknown feature id {0:?}")]
    UnknownFeature(String),
    #[error("{combinations} combinations exceed the budget of {cap}; lower k or raise t")]
    BudgetExceeded { combinations: u128, cap: u64 },
    #[error("invalid tuner parameters: {0}")]
    BadParams(String),
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TunerParams {
    pub k: usize,
    pub s: f64,
    pub t: f64,
    /// Feature indices that may change; defaults to the registry's tunable set.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tunable_mask: Option<Vec<bool>>,
    #[serde(default = "default_budget")]
    pub budget: u64,
}

fn default_budget() -> u64 {
    DEFAULT_BUDGET
}

impl TunerParams {
    pub fn new(k: usize, s: f64, t: f64) -> Self {
        TunerParams {
            k,
            s,
            t,
            tunable_mask: None,
            budget: DEFAULT_BUDGET,
        }
    }

    /// Percent steps: every multiple of `t` within `[-s, s]`, plus `±s`.
    pub fn grid(&self) -> Vec<f64> {
        let m = (self.s / self.t + 1e-9).floor() as i64;
        let mut g: Vec<f64> = (-m..=m).map(|i| i as f64 * self.t).collect();
        if (m as f64 * self.t - self.s).abs() > 1e-9 * self.s.max(1.0) {
            g.insert(0, -self.s);
            g.push(self.s);
        }
        g
    }

    fn validate(&self) -> Result<(), TunerError> {
        if !(self.s > 0.0 && self.s.is_finite()) {
            return Err(TunerError::BadParams("s must be positive".into()));
        }
        if !(self.t > 0.0 && self.t <= self.s) {
            return Err(TunerError::BadParams("t must be positive and at most s".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Change {
    pub feature: String,
    pub name: String,
    pub percent: f64,
    pub old: f64,
    pub new: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuningSuggestion {
    pub changes: Vec<Change>,
    #[serde(rename = "before")]
    pub predicted_before: f64,
    #[serde(rename = "after")]
    pub predicted_after: f64,
}

impl TuningSuggestion {
    pub fn deltas(&self) -> BTreeMap<String, f64> {
        self.changes.iter().map(|c| (c.feature.clone(), c.percent)).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WhatIf {
    pub predicted: f64,
    pub adjusted: FeatureVector,
}

/// Moves a value by `pct` percent, clamped to the descriptor bounds.
pub fn apply_percent(value: f64, pct: f64, feature_std: f64, registry: &FeatureRegistry, index: usize) -> f64 {
    if pct == 0.0 {
        return value;
    }
    let moved = if value.abs() < ZERO_VALUE {
        value + pct / 100.0 * feature_std
    } else {
        value * (1.0 + pct / 100.0)
    };
    registry.features()[index].clamp(moved)
}

fn check(model: &EngagementModel, registry: &FeatureRegistry, x: &FeatureVector) -> Result<(), TunerError> {
    model.check(x)?;
    if registry.hash() != model.registry_hash {
        return Err(ModelError::RegistryMismatch {
            expected: model.registry_hash.clone(),
            got: registry.hash().to_string(),
        }
        .into());
    }
    Ok(())
}

/// Prediction after applying percent changes to the named features.
pub fn whatif(
    model: &EngagementModel,
    registry: &FeatureRegistry,
    x: &FeatureVector,
    deltas: &BTreeMap<String, f64>,
) -> Result<WhatIf, TunerError> {
    check(model, registry, x)?;
    let mut values = x.values.clone();
    for (id, &pct) in deltas {
        let i = registry.index_of(id).ok_or_else(|| TunerError::UnknownFeature(id.clone()))?;
        values[i] = apply_percent(x.values[i], pct, model.feature_stds[i], registry, i);
    }
    Ok(WhatIf {
        predicted: model.predict_values(&values),
        adjusted: FeatureVector {
            registry_hash: x.registry_hash.clone(),
            values,
        },
    })
}

#[derive(Debug, Clone)]
struct Candidate {
    predicted: f64,
    /// (feature index, percent), sorted by feature id.
    changes: Vec<(usize, f64)>,
}

/// Total order where `Less` means "better".
fn rank(a: &Candidate, b: &Candidate, registry: &FeatureRegistry) -> Ordering {
    let ids = |c: &Candidate| c.changes.iter().map(|&(i, _)| registry.features()[i].id.as_str()).collect::<Vec<_>>();
    let l1 = |c: &Candidate| c.changes.iter().map(|&(_, p)| p.abs()).sum::<f64>();
    b.predicted
        .total_cmp(&a.predicted)
        .then(a.changes.len().cmp(&b.changes.len()))
        .then(l1(a).total_cmp(&l1(b)))
        .then_with(|| ids(a).cmp(&ids(b)))
        .then_with(|| {
            let pa = a.changes.iter().map(|c| c.1);
            let pb = b.changes.iter().map(|c| c.1);
            pa.zip(pb).map(|(x, y)| x.total_cmp(&y)).find(|o| o.is_ne()).unwrap_or(Ordering::Equal)
        })
}

fn binomial(n: u128, k: u128) -> u128 {
    (0..k).fold(1u128, |acc, i| acc.saturating_mul(n - i) / (i + 1))
}

/// Number of candidates `sum_{j<=k} C(m, j) * g^j`.
pub fn combination_count(m: usize, k: usize, nonzero_steps: usize) -> u128 {
    (0..=k.min(m) as u128)
        .map(|j| binomial(m as u128, j).saturating_mul((nonzero_steps as u128).saturating_pow(j as u32)))
        .fold(0u128, |a, b| a.saturating_add(b))
}

fn subsets(items: &[usize], k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = Vec::new();
    fn rec(items: &[usize], start: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if !cur.is_empty() {
            out.push(cur.clone());
        }
        if cur.len() == k {
            return;
        }
        for i in start..items.len() {
            cur.push(items[i]);
            rec(items, i + 1, k, cur, out);
            cur.pop();
        }
    }
    rec(items, 0, k, &mut cur, &mut out);
    out
}

/// Exhaustive search for the change set with the highest prediction.
pub fn suggest(
    model: &EngagementModel,
    registry: &FeatureRegistry,
    x: &FeatureVector,
    params: &TunerParams,
) -> Result<TuningSuggestion, TunerError> {
    check(model, registry, x)?;
    params.validate()?;
    let tunable: Vec<usize> = match &params.tunable_mask {
        Some(mask) => {
            if mask.len() != registry.len() {
                return Err(TunerError::BadParams("mask length differs from registry".into()));
            }
            (0..registry.len()).filter(|&i| mask[i]).collect()
        }
        None => (0..registry.len()).filter(|&i| registry.features()[i].tunable).collect(),
    };
    if params.k > tunable.len() {
        return Err(TunerError::BadParams(format!(
            "k = {} exceeds the {} tunable features",
            params.k,
            tunable.len()
        )));
    }
    let steps: Vec<f64> = params.grid().into_iter().filter(|&p| p != 0.0).collect();
    let combinations = combination_count(tunable.len(), params.k, steps.len());
    if combinations > params.budget as u128 {
        return Err(TunerError::BudgetExceeded {
            combinations,
            cap: params.budget,
        });
    }

    let before = model.predict_values(&x.values);
    let baseline = Candidate {
        predicted: before,
        changes: Vec::new(),
    };
    let mut by_id = tunable.clone();
    by_id.sort_by(|&a, &b| registry.features()[a].id.cmp(&registry.features()[b].id));
    let best = subsets(&by_id, params.k)
        .into_par_iter()
        .map(|subset| {
            let mut values = x.values.clone();
            let mut local: Option<Candidate> = None;
            let mut digits = vec![0usize; subset.len()];
            loop {
                for (&f, &d) in subset.iter().zip(&digits) {
                    values[f] = apply_percent(x.values[f], steps[d], model.feature_stds[f], registry, f);
                }
                let cand = Candidate {
                    predicted: model.predict_values(&values),
                    changes: subset.iter().zip(&digits).map(|(&f, &d)| (f, steps[d])).collect(),
                };
                if local.as_ref().is_none_or(|l| rank(&cand, l, registry).is_lt()) {
                    local = Some(cand);
                }
                // odometer over step indices
                let mut pos = 0;
                loop {
                    if pos == digits.len() {
                        return local;
                    }
                    digits[pos] += 1;
                    if digits[pos] < steps.len() {
                        break;
                    }
                    digits[pos] = 0;
                    pos += 1;
                }
            }
        })
        .flatten()
        .reduce(
            || baseline.clone(),
            |a, b| if rank(&b, &a, registry).is_lt() { b } else { a },
        );

    let changes = best
        .changes
        .iter()
        .map(|&(i, pct)| {
            let d = &registry.features()[i];
            Change {
                feature: d.id.clone(),
                name: d.human_name.clone(),
                percent: pct,
                old: x.values[i],
                new: apply_percent(x.values[i], pct, model.feature_stds[i], registry, i),
            }
        })
        .collect();
    Ok(TuningSuggestion {
        changes,
        predicted_before: before,
        predicted_after: best.predicted,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::aesthetics::{ExtractionParams, FeatureDescriptor, FeatureFamily};
    use crate::model::{KernelSpec, ModelKind};

    fn registry(n: usize) -> FeatureRegistry {
        let f = (0..n)
            .map(|i| FeatureDescriptor::new(&format!("f{i:02}"), FeatureFamily::ColorExposure, &format!("feature {i}")))
            .collect();
        FeatureRegistry::new(f, ExtractionParams::default()).unwrap()
    }

    /// Linear model `sum w_i x_i` expressed through a linear kernel.
    fn linear(reg: &FeatureRegistry, w: Vec<f64>) -> EngagementModel {
        let n = w.len();
        EngagementModel {
            kind: ModelKind::Svr,
            kernel: KernelSpec::linear(),
            c: 1.0,
            epsilon: 0.0,
            support_vectors: vec![w],
            dual_coefs: vec![1.0],
            bias: 0.0,
            feature_means: vec![0.0; n],
            feature_stds: vec![1.0; n],
            registry_hash: reg.hash().to_string(),
        }
    }

    fn fv(reg: &FeatureRegistry, v: Vec<f64>) -> FeatureVector {
        FeatureVector {
            registry_hash: reg.hash().to_string(),
            values: v,
        }
    }

    #[test]
    fn grid_contains_zero_and_bounds() {
        assert_eq!(TunerParams::new(1, 20.0, 4.0).grid().len(), 11);
        assert_eq!(TunerParams::new(1, 10.0, 4.0).grid(), vec![-10.0, -8.0, -4.0, 0.0, 4.0, 8.0, 10.0]);
    }

    #[test]
    fn increasing_feature_goes_to_the_top() {
        let reg = registry(3);
        let m = linear(&reg, vec![0.0, 2.0, 0.0]);
        let x = fv(&reg, vec![1.0, 1.0, 1.0]);
        let s = suggest(&m, &reg, &x, &TunerParams::new(1, 20.0, 4.0)).unwrap();
        assert_eq!(s.changes.len(), 1);
        assert_eq!((s.changes[0].feature.as_str(), s.changes[0].percent), ("f01", 20.0));
        let w = whatif(&m, &reg, &x, &s.deltas()).unwrap();
        assert_eq!(w.predicted, s.predicted_after);
    }

    #[test]
    fn constant_model_suggests_nothing() {
        let reg = registry(4);
        let m = linear(&reg, vec![0.0; 4]);
        let x = fv(&reg, vec![1.0, 2.0, 3.0, 4.0]);
        let s = suggest(&m, &reg, &x, &TunerParams::new(2, 8.0, 4.0)).unwrap();
        assert!(s.changes.is_empty());
        assert_eq!(s.predicted_after, s.predicted_before);
    }

    #[test]
    fn whatif_identity_and_errors() {
        let reg = registry(2);
        let m = linear(&reg, vec![1.0, -1.0]);
        let x = fv(&reg, vec![0.5, 0.0]);
        let base = m.predict_values(&x.values);
        assert_eq!(whatif(&m, &reg, &x, &BTreeMap::new()).unwrap().predicted, base);
        let zero: BTreeMap<String, f64> = [("f00".to_string(), 0.0)].into();
        assert_eq!(whatif(&m, &reg, &x, &zero).unwrap().predicted, base);
        // additive fallback on a zero value
        let d: BTreeMap<String, f64> = [("f01".to_string(), 50.0)].into();
        assert_eq!(whatif(&m, &reg, &x, &d).unwrap().adjusted.values[1], 0.5);
        let bad: BTreeMap<String, f64> = [("nope".to_string(), 1.0)].into();
        assert!(matches!(whatif(&m, &reg, &x, &bad), Err(TunerError::UnknownFeature(_))));
    }

    #[test]
    fn budget_is_enforced() {
        let reg = registry(40);
        let m = linear(&reg, vec![1.0; 40]);
        let x = fv(&reg, vec![1.0; 40]);
        let mut p = TunerParams::new(3, 50.0, 1.0);
        assert!(matches!(suggest(&m, &reg, &x, &p), Err(TunerError::BudgetExceeded { .. })));
        p.budget = u64::MAX;
        assert_eq!(combination_count(40, 3, 100), 1 + 40 * 100 + 780 * 10_000 + 9880 * 1_000_000);
    }
}
