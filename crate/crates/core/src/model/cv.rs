use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{evaluate, prepare, train_svc, train_svr, ModelError, SvmParams, Targets};
use crate::aesthetics::FeatureVector;

/// Candidate values; `gamma_scale` multiplies the data-driven default gamma.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GridSpec {
    #[serde(rename = "C")]
    pub c: Vec<f64>,
    pub gamma_scale: Vec<f64>,
    pub epsilon: Vec<f64>,
    pub folds: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec {
            c: vec![1.0, 10.0, 100.0],
            gamma_scale: vec![0.25, 1.0, 4.0],
            epsilon: vec![0.1],
            folds: 5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridPoint {
    pub params: SvmParams,
    /// Mean held-out accuracy (labels) or negated RMSE (scores).
    pub score: f64,
}

/// K-fold cross-validated grid search; the first best point in grid order wins.
pub fn grid_search(
    xs: &[FeatureVector],
    targets: Targets<'_>,
    base: &SvmParams,
    grid: &GridSpec,
    seed: u64,
) -> Result<(SvmParams, Vec<GridPoint>), ModelError> {
    let n = xs.len();
    let folds = grid.folds.max(2);
    if n < folds {
        return Err(ModelError::TooFewSamples { need: folds, got: n });
    }
    let base_gamma = prepare(xs, base)?.kernel.gamma;
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let fold_of: Vec<usize> = {
        let mut f = vec![0; n];
        for (rank, &i) in order.iter().enumerate() {
            f[i] = rank % folds;
        }
        f
    };
    let epsilons: &[f64] = match targets {
        Targets::Scores(_) => &grid.epsilon,
        Targets::Labels(_) => &[f64::NAN],
    };
    let mut points = Vec::new();
    for &c in &grid.c {
        for &gs in &grid.gamma_scale {
            for &eps in epsilons {
                let mut p = SvmParams {
                    c,
                    gamma: Some(base_gamma * gs),
                    ..*base
                };
                if !eps.is_nan() {
                    p.epsilon = eps;
                }
                let mut total = 0.0;
                for f in 0..folds {
                    let (tr, te): (Vec<usize>, Vec<usize>) = (0..n).partition(|&i| fold_of[i] != f);
                    let pick = |idx: &[usize]| idx.iter().map(|&i| xs[i].clone()).collect::<Vec<_>>();
                    let (xtr, xte) = (pick(&tr), pick(&te));
                    total += match targets {
                        Targets::Scores(ys) => {
                            let ytr: Vec<f64> = tr.iter().map(|&i| ys[i]).collect();
                            let yte: Vec<f64> = te.iter().map(|&i| ys[i]).collect();
                            let m = train_svr(&xtr, &ytr, &p)?;
                            -evaluate(&m, &xte, Targets::Scores(&yte))?.rmse.unwrap_or(0.0)
                        }
                        Targets::Labels(ls) => {
                            let ltr: Vec<bool> = tr.iter().map(|&i| ls[i]).collect();
                            let lte: Vec<bool> = te.iter().map(|&i| ls[i]).collect();
                            match train_svc(&xtr, &ltr, &p) {
                                Ok(m) => evaluate(&m, &xte, Targets::Labels(&lte))?.accuracy.unwrap_or(0.0),
                                Err(ModelError::SingleClass) => {
                                    let major = ltr[0];
                                    lte.iter().filter(|&&l| l == major).count() as f64 / lte.len() as f64
                                }
                                Err(e) => return Err(e),
                            }
                        }
                    };
                }
                points.push(GridPoint {
                    params: p,
                    score: total / folds as f64,
                });
            }
        }
    }
    let best = points
        .iter()
        .fold(None::<&GridPoint>, |acc, p| match acc {
            Some(b) if b.score >= p.score => Some(b),
            _ => Some(p),
        })
        .ok_or_else(|| ModelError::BadHyperparameter("empty grid".into()))?;
    Ok((best.params, points))
}
