//! Extracts the feature catalog from an image file, or from a procedural image.
//!
//! `cargo run --example aesthetic_features -- photo.jpg`

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use adlens::aesthetics::{decode_image, extract_features, FeatureRegistry};
use adlens::synth::procedural_image;

fn main() -> anyhow::Result<()> {
    let img = match std::env::args().nth(1) {
        Some(path) => decode_image(&std::fs::read(path)?)?,
        None => procedural_image(&mut ChaCha8Rng::seed_from_u64(5), 160, 240),
    };
    let registry = FeatureRegistry::default_catalog();
    let x = extract_features(&img, &registry)?;
    println!("registry {}", registry.hash());
    for (d, v) in registry.features().iter().zip(&x.values) {
        println!("{:<8?} {:<34} {:>12.5}  {}", d.family, d.id, v, d.human_name);
    }
    Ok(())
}
