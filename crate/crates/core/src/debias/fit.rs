//! KL objective, its analytic gradient and the projected-gradient fit.

use serde::{Deserialize, Serialize};

use super::distribution::{
    build_distribution_on, edge_window, edges_for, raw_mass, silverman_bandwidth, std_normal_pdf, ScoreDistribution, SMOOTHING,
};
use super::transform::{DesignMatrix, PolynomialTransform};
use super::DebiasError;
use crate::corpus::mean_std;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitOptions {
    pub n_bins: usize,
    /// `None` picks Silverman's rule on the unbiased scores.
    pub bandwidth: Option<f64>,
    /// Initial step; also the fixed step when line search is off.
    pub learn_rate: f64,
    pub max_iters: usize,
    pub w_floor: f64,
    /// Stop once the projected-gradient norm falls below this.
    pub tol: f64,
    pub line_search: bool,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            n_bins: 50,
            bandwidth: None,
            learn_rate: 1.0,
            max_iters: 1000,
            w_floor: 1e-6,
            tol: 1e-8,
            line_search: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    /// KL with the biased scores left untouched.
    pub identity_kl: f64,
    /// KL at the starting point of the descent.
    pub initial_kl: f64,
    pub final_kl: f64,
    pub iterations: usize,
    pub converged: bool,
    /// `final_kl <= initial_kl <= identity_kl`.
    pub no_worse: bool,
    pub kl_trace: Vec<f64>,
    pub bandwidth: f64,
}

/// Objective value `J(W) = KL(P || soft-hist(W^T X))`.
pub fn kl_objective(w: &[f64], x: &DesignMatrix, p: &ScoreDistribution) -> f64 {
    let o = x.outputs(w);
    let raw = raw_mass(&p.bin_edges, p.bandwidth, &o);
    let z: f64 = raw.iter().map(|r| r + SMOOTHING).sum();
    p.probabilities
        .iter()
        .zip(&raw)
        .map(|(&pb, &rb)| pb * (pb * z / (rb + SMOOTHING)).ln())
        .sum()
}

/// Analytic gradient of [`kl_objective`] with respect to `W`.
pub fn kl_gradient(w: &[f64], x: &DesignMatrix, p: &ScoreDistribution) -> Vec<f64> {
    kl_value_and_gradient(w, x, p).1
}

pub fn kl_value_and_gradient(
    w: &[f64],
    x: &DesignMatrix,
    p: &ScoreDistribution,
) -> (f64, Vec<f64>) {
    let edges = &p.bin_edges;
    let h = p.bandwidth;
    let n = x.cols();
    let o = x.outputs(w);
    let raw = raw_mass(edges, h, &o);
    let z: f64 = raw.iter().map(|r| r + SMOOTHING).sum();
    let value: f64 = p
        .probabilities
        .iter()
        .zip(&raw)
        .map(|(&pb, &rb)| pb * (pb * z / (rb + SMOOTHING)).ln())
        .sum();

    // dJ/dr_b
    let c: Vec<f64> = p
        .probabilities
        .iter()
        .zip(&raw)
        .map(|(&pb, &rb)| 1.0 / z - pb / (rb + SMOOTHING))
        .collect();
    let n_bins = c.len();
    let scale = 1.0 / (n as f64 * h);

    let mut grad = vec![0.0; w.len()];
    for (i, &oi) in o.iter().enumerate() {
        let (lo, hi) = edge_window(edges, oi, h);
        // dr_b/do_i = (pdf(z_b) - pdf(z_{b+1})) / (n h); regroup by edge
        let mut d_o = 0.0;
        for e in lo..hi {
            let phi = std_normal_pdf((edges[e] - oi) / h);
            let right = if e < n_bins { c[e] } else { 0.0 };
            let left = if e > 0 { c[e - 1] } else { 0.0 };
            d_o += phi * (right - left);
        }
        d_o *= scale;
        for (pidx, g) in grad.iter_mut().enumerate() {
            *g += d_o * x.get(pidx, i);
        }
    }
    (value, grad)
}

fn project(w: &mut [f64], floor: f64) {
    if w.len() > 1 {
        w[1] = w[1].max(floor);
    }
    for v in w.iter_mut().skip(2) {
        *v = v.max(0.0);
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

struct Problem {
    target: ScoreDistribution,
    design: DesignMatrix,
    shift: f64,
    scale: f64,
}

impl Problem {
    fn new(
        unbiased: &[f64],
        biased: &[f64],
        degree: usize,
        opts: &FitOptions,
    ) -> Result<Self, DebiasError> {
        for (name, s) in [("unbiased", unbiased), ("biased", biased)] {
            if s.len() < 10 {
                return Err(DebiasError::TooFewScores {
                    need: 10,
                    got: s.len(),
                });
            }
            if s.iter().any(|v| !v.is_finite()) {
                return Err(DebiasError::InvalidDistribution(format!("non-finite {name} score")));
            }
        }
        if degree < 1 {
            return Err(DebiasError::BadDegree(degree));
        }
        if opts.n_bins == 0 {
            return Err(DebiasError::InvalidDistribution("zero bins".into()));
        }
        let h = opts.bandwidth.unwrap_or_else(|| silverman_bandwidth(unbiased));
        let edges = edges_for(unbiased, opts.n_bins, h);
        let target = build_distribution_on(unbiased, &edges, h)?;
        let lo = biased.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = biased.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let scale = if hi > lo { hi - lo } else { 1.0 };
        let u: Vec<f64> = biased.iter().map(|y| (y - lo) / scale).collect();
        Ok(Problem {
            target,
            design: DesignMatrix::new(&u, degree),
            shift: lo,
            scale,
        })
    }

    fn value(&self, w: &[f64]) -> f64 {
        kl_objective(w, &self.design, &self.target)
    }
}

/// Learns the monotone polynomial that best aligns the biased score
/// distribution with the unbiased one.
pub fn fit_transform(
    unbiased: &[f64],
    biased: &[f64],
    degree: usize,
    opts: &FitOptions,
) -> Result<(PolynomialTransform, FitReport), DebiasError> {
    fit_with_start(unbiased, biased, degree, opts, None)
}

/// As [`fit_transform`], additionally trying `warm` (coefficients in the same
/// pre-mapped space, padded with zeros) as a starting point.
pub fn fit_with_start(
    unbiased: &[f64],
    biased: &[f64],
    degree: usize,
    opts: &FitOptions,
    warm: Option<&[f64]>,
) -> Result<(PolynomialTransform, FitReport), DebiasError> {
    let prob = Problem::new(unbiased, biased, degree, opts)?;
    let d1 = degree + 1;
    let floor = opts.w_floor;

    // leaving scores untouched: tau(u) = shift + scale * u
    let mut identity = vec![0.0; d1];
    identity[0] = prob.shift;
    identity[1] = prob.scale.max(floor);
    let identity_kl = prob.value(&identity);
    if !identity_kl.is_finite() {
        return Err(DebiasError::NonFiniteLoss);
    }

    // moment matching of the pre-mapped biased scores onto the unbiased ones
    let (mu_p, sd_p) = mean_std(unbiased);
    let (mu_u, sd_u) = mean_std(prob.design.row(1));
    let mut affine = vec![0.0; d1];
    affine[1] = if sd_u > 0.0 { sd_p / sd_u } else { 1.0 }.max(floor);
    affine[0] = mu_p - affine[1] * mu_u;

    let mut start = identity.clone();
    let mut start_kl = identity_kl;
    let mut candidates = vec![affine];
    if let Some(w) = warm {
        let mut c = vec![0.0; d1];
        for (dst, src) in c.iter_mut().zip(w) {
            *dst = *src;
        }
        project(&mut c, floor);
        candidates.push(c);
    }
    for c in candidates {
        let v = prob.value(&c);
        if v.is_finite() && v < start_kl {
            start = c;
            start_kl = v;
        }
    }

    let (w, trace, iterations, converged) = descend(&prob, start, opts)?;
    let final_kl = *trace.last().unwrap();
    let t = PolynomialTransform::new(w, prob.shift, prob.scale)?;
    let report = FitReport {
        identity_kl,
        initial_kl: start_kl,
        final_kl,
        iterations,
        converged,
        no_worse: final_kl <= start_kl && start_kl <= identity_kl,
        kl_trace: trace,
        bandwidth: prob.target.bandwidth,
    };
    Ok((t, report))
}

/// Projected gradient descent with Barzilai-Borwein steps and Armijo backtracking.
fn descend(
    prob: &Problem,
    mut w: Vec<f64>,
    opts: &FitOptions,
) -> Result<(Vec<f64>, Vec<f64>, usize, bool), DebiasError> {
    let floor = opts.w_floor;
    project(&mut w, floor);
    let (mut j, mut g) = kl_value_and_gradient(&w, &prob.design, &prob.target);
    if !j.is_finite() || g.iter().any(|v| !v.is_finite()) {
        return Err(DebiasError::NonFiniteLoss);
    }
    let mut trace = vec![j];
    let mut step = opts.learn_rate;
    let mut converged = false;
    let mut iters = 0;

    while iters < opts.max_iters {
        let mut probe: Vec<f64> = w.iter().zip(&g).map(|(wi, gi)| wi - gi).collect();
        project(&mut probe, floor);
        let pg_norm = w.iter().zip(&probe).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        if pg_norm < opts.tol {
            converged = true;
            break;
        }

        let (w_new, j_new) = if opts.line_search {
            let mut accepted = None;
            let mut s = step;
            for _ in 0..60 {
                let mut cand: Vec<f64> = w.iter().zip(&g).map(|(wi, gi)| wi - s * gi).collect();
                project(&mut cand, floor);
                let decrease: f64 = dot(&g, &w.iter().zip(&cand).map(|(a, b)| a - b).collect::<Vec<_>>());
                let v = prob.value(&cand);
                if v.is_finite() && v <= j - 1e-4 * decrease {
                    accepted = Some((cand, v));
                    break;
                }
                s *= 0.5;
            }
            match accepted {
                Some(a) => a,
                // no descent direction left at machine precision
                None => {
                    converged = true;
                    break;
                }
            }
        } else {
            let mut cand: Vec<f64> =
                w.iter().zip(&g).map(|(wi, gi)| wi - opts.learn_rate * gi).collect();
            project(&mut cand, floor);
            let v = prob.value(&cand);
            (cand, v)
        };
        if !j_new.is_finite() {
            return Err(DebiasError::NonFiniteLoss);
        }

        let (_, g_new) = kl_value_and_gradient(&w_new, &prob.design, &prob.target);
        let s_vec: Vec<f64> = w_new.iter().zip(&w).map(|(a, b)| a - b).collect();
        let y_vec: Vec<f64> = g_new.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s_vec, &y_vec);
        step = if sy > 0.0 {
            (dot(&s_vec, &s_vec) / sy).clamp(1e-12, 1e12)
        } else {
            (step * 2.0).min(1e12)
        };

        // plateau: less than 1e-10 gained over the last 25 accepted steps
        let plateau = trace.len() > 25 && trace[trace.len() - 25] - j_new < 1e-10;
        let stalled = j_new >= j || plateau;
        w = w_new;
        j = j_new;
        g = g_new;
        trace.push(j);
        iters += 1;
        if stalled {
            converged = true;
            break;
        }
    }
    Ok((w, trace, iters, converged))
}

/// Fits degrees 1..=max_degree, keeping a higher degree only while it
/// improves the final KL by at least `min_gain` over the previous one.
pub fn fit_transform_auto(
    unbiased: &[f64],
    biased: &[f64],
    max_degree: usize,
    min_gain: f64,
    opts: &FitOptions,
) -> Result<(PolynomialTransform, FitReport), DebiasError> {
    let mut best = fit_transform(unbiased, biased, 1, opts)?;
    for d in 2..=max_degree.max(1) {
        let cand = fit_with_start(unbiased, biased, d, opts, Some(&best.0.coefficients))?;
        if best.1.final_kl - cand.1.final_kl >= min_gain {
            best = cand;
        } else {
            break;
        }
    }
    Ok(best)
}

/// KL between the unbiased scores and raw (untransformed) biased scores on the
/// same binning a fit would use.
pub fn raw_kl(unbiased: &[f64], biased: &[f64], opts: &FitOptions) -> Result<f64, DebiasError> {
    let h = opts.bandwidth.unwrap_or_else(|| silverman_bandwidth(unbiased));
    let edges = edges_for(unbiased, opts.n_bins, h);
    let p = build_distribution_on(unbiased, &edges, h)?;
    let q = build_distribution_on(biased, &edges, h)?;
    super::distribution::kl_divergence(&p, &q)
}
