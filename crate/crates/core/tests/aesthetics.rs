use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use adlens::aesthetics::{
    build_rag, decode_image, encode_png, extract_features, segment_image, FeatureRegistry, ImageBuffer, RagParams,
};
use adlens::synth::procedural_image;

fn images(n: usize, seed: u64) -> Vec<ImageBuffer> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| procedural_image(&mut rng, 24, 120)).collect()
}

#[test]
fn segment_areas_cover_every_pixel() {
    for (i, img) in images(100, 21).iter().enumerate() {
        let seg = segment_image(img, 6, 0.005, 42);
        let total: usize = seg.segments.iter().map(|s| s.area).sum();
        assert_eq!(total, img.pixel_count(), "image {i}");
        assert_eq!(seg.labels.len(), img.pixel_count());
        for (id, s) in seg.segments.iter().enumerate() {
            assert_eq!(seg.labels.iter().filter(|&&l| l == id).count(), s.area, "image {i} segment {id}");
            let c = seg.convexity(id);
            assert!(c > 0.0 && c <= 1.0 + 1e-12, "image {i} convexity {c}");
        }
        let rag = build_rag(&seg, RagParams::default());
        assert!(rag.best_ncut >= 0.0 && rag.best_ncut <= 2.0 + 1e-12);
        assert!(rag.merged_count >= 1 && rag.merged_count <= seg.segments.len());
    }
}

#[test]
fn hundred_images_give_finite_features() {
    let registry = FeatureRegistry::default_catalog();
    for (i, img) in images(100, 22).iter().enumerate() {
        let x = extract_features(img, &registry).unwrap();
        assert_eq!(x.values.len(), registry.len());
        assert_eq!(x.registry_hash, registry.hash());
        for (d, v) in registry.features().iter().zip(&x.values) {
            assert!(v.is_finite(), "image {i} {}: {v}", d.id);
        }
    }
}

#[test]
fn quantized_images_survive_png_round_trip() {
    let registry = FeatureRegistry::default_catalog();
    for img in images(5, 23) {
        // the first encode quantizes to 8 bits; after that PNG is lossless
        let once = decode_image(&encode_png(&img)).unwrap();
        let twice = decode_image(&encode_png(&once)).unwrap();
        assert_eq!(once.rgb(), twice.rgb());
        let a = extract_features(&once, &registry).unwrap();
        let b = extract_features(&twice, &registry).unwrap();
        assert_eq!(a, b);
    }
}

#[test]
fn undecodable_bytes_are_an_error() {
    assert!(decode_image(b"definitely not an image").is_err());
}
