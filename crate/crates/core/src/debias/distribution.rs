//! Shared-edge soft histograms and the KL divergence between them.

use serde::{Deserialize, Serialize};

use super::DebiasError;

/// Added to every bin before renormalizing so no probability is ever zero.
pub const SMOOTHING: f64 = 1e-9;

/// Kernel mass beyond this many bandwidths is treated as exactly zero.
const KERNEL_REACH: f64 = 9.0;

const FRAC_1_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

pub(crate) fn std_normal_cdf(z: f64) -> f64 {
    0.5 * libm::erfc(-z * std::f64::consts::FRAC_1_SQRT_2)
}

pub(crate) fn std_normal_pdf(z: f64) -> f64 {
    FRAC_1_SQRT_2PI * (-0.5 * z * z).exp()
}

/// A discrete score distribution over fixed, strictly increasing bin edges.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreDistribution {
    pub bin_edges: Vec<f64>,
    pub probabilities: Vec<f64>,
    pub bandwidth: f64,
}

impl ScoreDistribution {
    /// Wraps explicit probabilities, checking the shape invariants.
    pub fn from_parts(
        bin_edges: Vec<f64>,
        probabilities: Vec<f64>,
        bandwidth: f64,
    ) -> Result<Self, DebiasError> {
        validate_edges(&bin_edges)?;
        if probabilities.len() + 1 != bin_edges.len() {
            return Err(DebiasError::InvalidDistribution(format!(
                "{} probabilities for {} edges",
                probabilities.len(),
                bin_edges.len()
            )));
        }
        if probabilities.iter().any(|&p| !(p > 0.0) || !p.is_finite()) {
            return Err(DebiasError::InvalidDistribution(
                "probabilities must be strictly positive".into(),
            ));
        }
        let total: f64 = probabilities.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(DebiasError::InvalidDistribution(format!(
                "probabilities sum to {total}"
            )));
        }
        Ok(ScoreDistribution {
            bin_edges,
            probabilities,
            bandwidth,
        })
    }

    pub fn n_bins(&self) -> usize {
        self.probabilities.len()
    }
}

fn validate_edges(edges: &[f64]) -> Result<(), DebiasError> {
    if edges.len() < 2 || edges.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(DebiasError::InvalidDistribution(
            "bin edges must be strictly increasing with at least one bin".into(),
        ));
    }
    Ok(())
}

/// `n_bins` equal-width bins spanning `[lo, hi]`.
pub fn uniform_edges(lo: f64, hi: f64, n_bins: usize) -> Vec<f64> {
    let w = (hi - lo) / n_bins as f64;
    (0..=n_bins)
        .map(|i| if i == n_bins { hi } else { lo + w * i as f64 })
        .collect()
}

/// Edges spanning the scores padded by three bandwidths on either side.
pub fn edges_for(scores: &[f64], n_bins: usize, bandwidth: f64) -> Vec<f64> {
    let lo = scores.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    uniform_edges(lo - 3.0 * bandwidth, hi + 3.0 * bandwidth, n_bins)
}

/// Index range of edges within kernel reach of `x`.
pub(crate) fn edge_window(edges: &[f64], x: f64, h: f64) -> (usize, usize) {
    let lo = edges.partition_point(|&e| e < x - KERNEL_REACH * h);
    let hi = edges.partition_point(|&e| e <= x + KERNEL_REACH * h);
    (lo, hi)
}

/// Adds `weight` times the Gaussian mass of `x` in each bin to `acc`.
pub(crate) fn accumulate_mass(edges: &[f64], h: f64, x: f64, weight: f64, acc: &mut [f64]) {
    let (lo, hi) = edge_window(edges, x, h);
    // edges below `lo` have cdf 0, edges at or above `hi` have cdf 1
    let cdf = |e: usize| -> f64 {
        if e < lo {
            0.0
        } else if e >= hi {
            1.0
        } else {
            std_normal_cdf((edges[e] - x) / h)
        }
    };
    let first = lo.saturating_sub(1);
    let last = hi.min(acc.len());
    let mut prev = cdf(first);
    for (b, slot) in acc.iter_mut().enumerate().take(last).skip(first) {
        let next = cdf(b + 1);
        *slot += weight * (next - prev);
        prev = next;
    }
}

/// Raw (unsmoothed) per-bin mass averaged over scores.
pub(crate) fn raw_mass(edges: &[f64], h: f64, scores: &[f64]) -> Vec<f64> {
    let mut acc = vec![0.0; edges.len() - 1];
    let w = 1.0 / scores.len() as f64;
    for &s in scores {
        accumulate_mass(edges, h, s, w, &mut acc);
    }
    acc
}

pub(crate) fn smooth(raw: &[f64]) -> (Vec<f64>, f64) {
    let z: f64 = raw.iter().map(|r| r + SMOOTHING).sum();
    (raw.iter().map(|r| (r + SMOOTHING) / z).collect(), z)
}

/// Soft histogram on caller-supplied edges.
pub fn build_distribution_on(
    scores: &[f64],
    edges: &[f64],
    bandwidth: f64,
) -> Result<ScoreDistribution, DebiasError> {
    validate_edges(edges)?;
    if !(bandwidth > 0.0) || !bandwidth.is_finite() {
        return Err(DebiasError::InvalidDistribution(format!("bandwidth {bandwidth}")));
    }
    if scores.is_empty() {
        return Err(DebiasError::TooFewScores { need: 1, got: 0 });
    }
    let (probabilities, _) = smooth(&raw_mass(edges, bandwidth, scores));
    Ok(ScoreDistribution {
        bin_edges: edges.to_vec(),
        probabilities,
        bandwidth,
    })
}

/// Soft histogram whose edges span the scores padded by three bandwidths.
/// Each score spreads Gaussian mass over the bins it overlaps.
pub fn build_distribution(
    scores: &[f64],
    n_bins: usize,
    bandwidth: f64,
) -> Result<ScoreDistribution, DebiasError> {
    if scores.len() < 2 {
        return Err(DebiasError::TooFewScores {
            need: 2,
            got: scores.len(),
        });
    }
    if n_bins == 0 {
        return Err(DebiasError::InvalidDistribution("zero bins".into()));
    }
    if !(bandwidth > 0.0) || !bandwidth.is_finite() {
        return Err(DebiasError::InvalidDistribution(format!("bandwidth {bandwidth}")));
    }
    let edges = edges_for(scores, n_bins, bandwidth);
    build_distribution_on(scores, &edges, bandwidth)
}

/// D_KL(p || q) in nats.
pub fn kl_divergence(p: &ScoreDistribution, q: &ScoreDistribution) -> Result<f64, DebiasError> {
    if p.bin_edges != q.bin_edges {
        return Err(DebiasError::SupportMismatch);
    }
    Ok(kl_terms(&p.probabilities, &q.probabilities))
}

pub(crate) fn kl_terms(p: &[f64], q: &[f64]) -> f64 {
    p.iter()
        .zip(q)
        .filter(|(&pi, _)| pi > 0.0)
        .map(|(&pi, &qi)| pi * (pi / qi).ln())
        .sum::<f64>()
        .max(0.0)
}

/// Silverman's rule of thumb: 0.9 * min(sd, IQR / 1.34) * n^(-1/5).
pub fn silverman_bandwidth(scores: &[f64]) -> f64 {
    let n = scores.len() as f64;
    let (_, sd) = crate::corpus::mean_std(scores);
    let mut sorted = scores.to_vec();
    sorted.sort_by(f64::total_cmp);
    let q = |p: f64| {
        let pos = p * (sorted.len() - 1) as f64;
        let (i, f) = (pos.floor() as usize, pos.fract());
        if i + 1 < sorted.len() {
            sorted[i] * (1.0 - f) + sorted[i + 1] * f
        } else {
            sorted[i]
        }
    };
    let iqr = q(0.75) - q(0.25);
    let spread = if iqr > 0.0 { sd.min(iqr / 1.34) } else { sd };
    let h = 0.9 * spread * n.powf(-0.2);
    if h > 0.0 {
        h
    } else {
        1e-3
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn two_bin(p: [f64; 2]) -> ScoreDistribution {
        ScoreDistribution::from_parts(vec![0.0, 1.0, 2.0], p.to_vec(), 1.0).unwrap()
    }

    #[test]
    fn kl_hand_values() {
        let p = two_bin([0.5, 0.5]);
        let q = two_bin([0.25, 0.75]);
        let expected_pq = 0.5 * 2f64.ln() + 0.5 * (2.0f64 / 3.0).ln();
        let expected_qp = 0.25 * 0.5f64.ln() + 0.75 * 1.5f64.ln();
        assert!((kl_divergence(&p, &q).unwrap() - expected_pq).abs() < 1e-12);
        assert!((kl_divergence(&q, &p).unwrap() - expected_qp).abs() < 1e-12);
        assert!((expected_pq - 0.14384).abs() < 1e-5);
        assert!((expected_qp - 0.13081).abs() < 1e-5);
        assert_eq!(kl_divergence(&p, &p).unwrap(), 0.0);
    }

    #[test]
    fn kl_rejects_mismatched_edges() {
        let p = two_bin([0.5, 0.5]);
        let q = ScoreDistribution::from_parts(vec![0.0, 1.0, 3.0], vec![0.5, 0.5], 1.0).unwrap();
        assert!(matches!(kl_divergence(&p, &q), Err(DebiasError::SupportMismatch)));
    }

    #[test]
    fn point_mass_peaks_in_its_bin() {
        let c = 1.7;
        for n_bins in [1usize, 3, 7, 50] {
            let d = build_distribution(&[c; 20], n_bins, 0.5).unwrap();
            assert!(d.probabilities.iter().all(|&p| p > 0.0));
            let total: f64 = d.probabilities.iter().sum();
            assert!((total - 1.0).abs() < 1e-12);
            let home = d.bin_edges.partition_point(|&e| e <= c) - 1;
            let mode = (0..n_bins)
                .max_by(|&a, &b| d.probabilities[a].total_cmp(&d.probabilities[b]))
                .unwrap();
            // for even counts c sits on an edge, shared by two equal bins
            assert!(mode == home || mode + 1 == home, "n_bins {n_bins}");
        }
        let one = build_distribution(&[c; 5], 1, 0.5).unwrap();
        assert!((one.probabilities[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn soft_histogram_matches_normal_bins() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let xs: Vec<f64> = (0..10_000).map(|_| StandardNormal.sample(&mut rng)).collect();
        let d = build_distribution(&xs, 50, 0.1).unwrap();
        let total_in = std_normal_cdf(*d.bin_edges.last().unwrap()) - std_normal_cdf(d.bin_edges[0]);
        let max_dev = d
            .bin_edges
            .windows(2)
            .zip(&d.probabilities)
            .map(|(e, p)| {
                let expected = (std_normal_cdf(e[1]) - std_normal_cdf(e[0])) / total_in;
                (expected - p).abs()
            })
            .fold(0.0, f64::max);
        assert!(max_dev < 0.01, "max deviation {max_dev}");
    }

    #[test]
    fn probabilities_sum_to_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for n in [2usize, 17, 300] {
            let xs: Vec<f64> = (0..n)
                .map(|_| 3.0 * <StandardNormal as Distribution<f64>>::sample(&StandardNormal, &mut rng))
                .collect();
            let d = build_distribution(&xs, 33, 0.2).unwrap();
            let total: f64 = d.probabilities.iter().sum();
            assert!((total - 1.0).abs() < 1e-12);
        }
        assert!(matches!(
            build_distribution(&[1.0], 10, 0.1),
            Err(DebiasError::TooFewScores { .. })
        ));
    }

    #[test]
    fn cdf_and_pdf_sanity() {
        assert!((std_normal_cdf(0.0) - 0.5).abs() < 1e-15);
        assert!((std_normal_cdf(1.959963984540054) - 0.975).abs() < 1e-12);
        assert!((std_normal_pdf(0.0) - 0.3989422804014327).abs() < 1e-15);
    }
}
