//! Fits a monotone polynomial that maps a biased score distribution onto an unbiased one.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use adlens::debias::{apply_transform, fit_transform, FitOptions};

fn normals(seed: u64, n: usize) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| StandardNormal.sample(&mut rng)).collect()
}

fn main() -> anyhow::Result<()> {
    let unbiased = normals(1, 4000);
    // boosted and compressed, as a holiday effect might look
    let biased: Vec<f64> = normals(2, 4000).iter().map(|z| 1.2 + 0.6 * z).collect();
    for degree in [1, 3] {
        let (t, report) = fit_transform(&unbiased, &biased, degree, &FitOptions::default())?;
        println!(
            "degree {degree}: KL {:.4} -> {:.4} in {} iterations, W = {:?}",
            report.identity_kl, report.final_kl, report.iterations, t.coefficients
        );
        let moved = apply_transform(&t, &[0.0, 1.2, 2.4]);
        println!("  0.0, 1.2, 2.4 map to {moved:.3?}");
    }
    Ok(())
}
