//! Procedural corpora with planted aesthetic effects and injected biases,
//! used by the examples, the fixture generator and the end-to-end tests.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use chrono::{Duration, TimeZone, Utc};
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use crate::aesthetics::{encode_png, extract_features, hsv_to_rgb, AestheticsError, FeatureRegistry, ImageBuffer};
use crate::biasdetect::{BiasKind, HolidayConfig, LexiconConfig};
use crate::config::PipelineConfig;
use crate::corpus::{write_jsonlines, PostRecord};

/// Features the planted score depends on, with their weights.
pub const PLANTED: [(&str, f64); 5] = [
    ("mean_saturation", 1.0),
    ("wavelet_v_l1", -1.0),
    ("aspect_ratio", 1.0),
    ("hue_count", 1.0),
    ("largest_segment_convexity", 1.0),
];

#[derive(Debug, Clone, PartialEq)]
pub struct SynthSpec {
    pub n_posts: usize,
    pub n_pages: usize,
    pub seed: u64,
    pub min_side: usize,
    pub max_side: usize,
    /// Probability that a post carries one bias.
    pub bias_fraction: f64,
    /// Additive boost per bias, in units of the planted score's spread.
    pub boosts: BTreeMap<BiasKind, f64>,
    /// Std of the score noise independent of the image.
    pub noise: f64,
    pub page_mu: f64,
    pub page_sigma: f64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            n_posts: 600,
            n_pages: 10,
            seed: 42,
            min_side: 96,
            max_side: 160,
            bias_fraction: 0.5,
            boosts: [
                (BiasKind::HumanPresence, 2.25),
                (BiasKind::AnimalPresence, 1.8),
                (BiasKind::Holiday, 3.0),
                (BiasKind::Discount, 2.7),
            ]
            .into(),
            noise: 0.25,
            page_mu: 1000.0,
            page_sigma: 100.0,
        }
    }
}

fn random_colour(rng: &mut ChaCha8Rng) -> [f64; 3] {
    hsv_to_rgb([
        rng.random_range(0.0..360.0),
        rng.random_range(0.0..1.0),
        rng.random_range(0.2..1.0),
    ])
}

/// A random composition: flat background, a few rectangles and ellipses,
/// optional stripes and optional pixel noise.
pub fn procedural_image(rng: &mut ChaCha8Rng, min_side: usize, max_side: usize) -> ImageBuffer {
    let w = rng.random_range(min_side..=max_side);
    let h = rng.random_range(min_side..=max_side);
    let bg = random_colour(rng);
    let mut px = vec![bg; w * h];
    let n_shapes = rng.random_range(0..=4);
    for _ in 0..n_shapes {
        let c = random_colour(rng);
        let (cx, cy) = (rng.random_range(0.0..w as f64), rng.random_range(0.0..h as f64));
        let (rx, ry) = (rng.random_range(0.05..0.35) * w as f64, rng.random_range(0.05..0.35) * h as f64);
        let ellipse = rng.random_bool(0.5);
        for y in 0..h {
            for x in 0..w {
                let (dx, dy) = ((x as f64 - cx) / rx, (y as f64 - cy) / ry);
                let inside = if ellipse {
                    dx * dx + dy * dy <= 1.0
                } else {
                    dx.abs() <= 1.0 && dy.abs() <= 1.0
                };
                if inside {
                    px[y * w + x] = c;
                }
            }
        }
    }
    if rng.random_bool(0.5) {
        let amp = rng.random_range(0.02..0.25);
        let period = rng.random_range(4.0..24.0);
        let vertical = rng.random_bool(0.5);
        for y in 0..h {
            for x in 0..w {
                let t = if vertical { x } else { y } as f64;
                let s = amp * (std::f64::consts::TAU * t / period).sin();
                for c in px[y * w + x].iter_mut() {
                    *c += s;
                }
            }
        }
    }
    if rng.random_bool(0.5) {
        let amp = rng.random_range(0.01..0.15);
        for p in px.iter_mut() {
            for c in p.iter_mut() {
                *c += rng.random_range(-amp..amp);
            }
        }
    }
    ImageBuffer::from_rgb(w, h, px).expect("non-empty image")
}

/// Generated posts plus the ground truth behind them.
#[derive(Debug, Clone)]
pub struct SynthCorpus {
    pub records: Vec<PostRecord>,
    pub images: Vec<ImageBuffer>,
    /// Standardized planted score per post (before biases and noise).
    pub planted_scores: Vec<f64>,
    pub biases: Vec<Option<BiasKind>>,
}

const NEUTRAL_TEXT: [&str; 6] = [
    "New arrivals in store this week",
    "Our latest collection is here",
    "Fresh looks for your weekend",
    "Meet the team behind the product",
    "Designed with care, made to last",
    "Check out what is new on the shelves",
];
const DISCOUNT_TEXT: [&str; 3] = [
    "Huge sale today only",
    "Get a discount on every order",
    "Free shipping offer this week",
];
const HOLIDAY_TEXT: [&str; 3] = [
    "Merry christmas from all of us",
    "Christmas gifts for everyone",
    "Celebrate the holidays with us",
];

/// Lexicons matching the generated texts.
pub fn lexicon_configs() -> Vec<LexiconConfig> {
    vec![
        LexiconConfig {
            kind: BiasKind::Discount,
            seeds: ["sale", "discount", "free", "offer"].map(String::from).to_vec(),
            stoplist: other_words(0),
            holidays: Vec::new(),
        },
        LexiconConfig {
            kind: BiasKind::Holiday,
            seeds: ["christmas", "holidays"].map(String::from).to_vec(),
            stoplist: other_words(1),
            holidays: vec![HolidayConfig {
                name: "christmas".into(),
                date: "12-25".into(),
                pre_days: 7,
                post_days: 7,
            }],
        },
    ]
}

const WORD_GROUPS: [&[&str]; 4] = [
    &["sale", "sales", "discount", "discounts", "offer", "offers", "free", "deal", "deals", "bargain"],
    &["christmas", "xmas", "holidays", "holiday", "festive", "santa", "gifts"],
    &["store", "collection", "shelves", "weekend", "team", "product", "arrivals"],
    &["dog", "cat", "puppy", "kitten", "people", "family", "smile"],
];

/// Every table word outside `group`, used as the stop-list after expansion.
fn other_words(group: usize) -> Vec<String> {
    WORD_GROUPS
        .iter()
        .enumerate()
        .filter(|&(g, _)| g != group)
        .flat_map(|(_, ws)| ws.iter().map(|w| w.to_string()))
        .collect()
}

/// A small embedding table in which every seed has near neighbours.
pub fn embedding_lines(seed: u64) -> Vec<String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let groups = WORD_GROUPS;
    let dim = 16;
    let mut lines = Vec::new();
    for group in groups {
        let centre: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
        for word in group {
            let v: Vec<String> = centre
                .iter()
                .map(|c| format!("{:.6}", c + rng.random_range(-0.15..0.15)))
                .collect();
            lines.push(format!("{word} {}", v.join(" ")));
        }
    }
    lines
}

/// Generates images, computes the planted score from their features and
/// derives engagement counts with injected bias boosts.
pub fn generate(spec: &SynthSpec, registry: &FeatureRegistry) -> Result<SynthCorpus, AestheticsError> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let images: Vec<ImageBuffer> = (0..spec.n_posts)
        .map(|_| procedural_image(&mut rng, spec.min_side, spec.max_side))
        .collect();
    let features = images
        .par_iter()
        .map(|img| extract_features(img, registry))
        .collect::<Result<Vec<_>, _>>()?;
    let mut planted = vec![0.0; spec.n_posts];
    for (id, weight) in PLANTED {
        let j = registry
            .index_of(id)
            .ok_or_else(|| AestheticsError::UnknownFeature(id.to_string()))?;
        let col: Vec<f64> = features.iter().map(|f| f.values[j]).collect();
        let m = col.iter().sum::<f64>() / col.len() as f64;
        let sd = (col.iter().map(|v| (v - m).powi(2)).sum::<f64>() / col.len() as f64).sqrt().max(1e-12);
        for (p, v) in planted.iter_mut().zip(&col) {
            *p += weight * (v - m) / sd;
        }
    }
    let pm = planted.iter().sum::<f64>() / planted.len() as f64;
    let psd = (planted.iter().map(|v| (v - pm).powi(2)).sum::<f64>() / planted.len() as f64).sqrt().max(1e-12);
    for p in planted.iter_mut() {
        *p = (*p - pm) / psd;
    }

    let kinds: Vec<BiasKind> = spec.boosts.keys().copied().collect();
    let noise = Normal::new(0.0, spec.noise.max(0.0)).expect("finite noise");
    let base = Utc.with_ymd_and_hms(2017, 3, 1, 12, 0, 0).unwrap();
    let mut records = Vec::with_capacity(spec.n_posts);
    let mut biases = Vec::with_capacity(spec.n_posts);
    for (i, &score) in planted.iter().enumerate() {
        let bias = if !kinds.is_empty() && rng.random_bool(spec.bias_fraction) {
            Some(*kinds.choose(&mut rng).unwrap())
        } else {
            None
        };
        let boost = bias.map_or(0.0, |b| spec.boosts[&b]);
        let z = score + boost + noise.sample(&mut rng);
        let page = i % spec.n_pages.max(1);
        let eps = (spec.page_mu + spec.page_sigma * z).round().max(0.0) as u64;
        let likes = eps * 4 / 5;
        let (text, timestamp) = match bias {
            Some(BiasKind::Discount) => (
                *DISCOUNT_TEXT.choose(&mut rng).unwrap(),
                base + Duration::days(rng.random_range(0..200)),
            ),
            Some(BiasKind::Holiday) => (
                *HOLIDAY_TEXT.choose(&mut rng).unwrap(),
                Utc.with_ymd_and_hms(2017, 12, 20, 12, 0, 0).unwrap() + Duration::days(rng.random_range(0..10)),
            ),
            _ => (
                *NEUTRAL_TEXT.choose(&mut rng).unwrap(),
                base + Duration::days(rng.random_range(0..200)),
            ),
        };
        let external: BTreeSet<BiasKind> = match bias {
            Some(b @ (BiasKind::HumanPresence | BiasKind::AnimalPresence)) => [b].into(),
            _ => BTreeSet::new(),
        };
        records.push(PostRecord {
            post_id: format!("post{i:05}"),
            page_id: format!("page{page:02}"),
            image_path: PathBuf::from(format!("images/post{i:05}.png")),
            likes,
            retweets: eps - likes,
            timestamp: timestamp + Duration::minutes(i as i64),
            text: text.to_string(),
            external_bias_labels: external,
            followers: Some(10_000 + 1_000 * page as u64),
        });
        biases.push(bias);
    }
    Ok(SynthCorpus {
        records,
        images,
        planted_scores: planted,
        biases,
    })
}

/// Paths of a fixture written by [`write_fixture`].
#[derive(Debug, Clone)]
pub struct Fixture {
    pub dir: PathBuf,
    pub config_path: PathBuf,
    pub corpus: SynthCorpus,
}

/// Writes images, corpus, lexicons, embeddings and a pipeline config under `dir`.
pub fn write_fixture(dir: &Path, spec: &SynthSpec) -> io::Result<Fixture> {
    let registry = FeatureRegistry::default_catalog();
    let corpus = generate(spec, &registry).map_err(io::Error::other)?;
    fs::create_dir_all(dir.join("images"))?;
    corpus
        .records
        .par_iter()
        .zip(&corpus.images)
        .try_for_each(|(r, img)| fs::write(dir.join(&r.image_path), encode_png(img)))?;
    write_jsonlines(&dir.join("corpus.jsonl"), &corpus.records)?;
    fs::write(
        dir.join("lexicons.json"),
        serde_json::to_string_pretty(&lexicon_configs()).expect("lexicons serialize"),
    )?;
    fs::write(dir.join("embeddings.txt"), embedding_lines(spec.seed).join("\n") + "\n")?;
    let mut config = PipelineConfig::new("corpus.jsonl", "lexicons.json", "artifacts");
    config.embeddings = Some("embeddings.txt".into());
    config.seed = spec.seed;
    let config_path = dir.join("config.json");
    fs::write(&config_path, config.to_json())?;
    Ok(Fixture {
        dir: dir.to_path_buf(),
        config_path,
        corpus,
    })
}

/// The 60-post mini corpus bundled with the examples.
pub fn mini_spec() -> SynthSpec {
    SynthSpec {
        n_posts: 60,
        n_pages: 3,
        ..SynthSpec::default()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::biasdetect::{classify_text_bias, EmbeddingTable};

    fn table() -> EmbeddingTable {
        let lines = embedding_lines(1);
        let dim = lines[0].split_whitespace().count() - 1;
        let mut t = EmbeddingTable::new(dim);
        for l in &lines {
            let mut parts = l.split_whitespace();
            let w = parts.next().unwrap();
            let v: Vec<f32> = parts.map(|x| x.parse().unwrap()).collect();
            t.insert(w, &v).unwrap();
        }
        t
    }

    #[test]
    fn text_labels_recover_injected_text_biases() {
        let spec = SynthSpec {
            n_posts: 80,
            min_side: 24,
            max_side: 32,
            ..SynthSpec::default()
        };
        let corpus = generate(&spec, &FeatureRegistry::default_catalog()).unwrap();
        let t = table();
        let lexicons: Vec<_> = lexicon_configs().into_iter().map(|c| c.build(Some(&t), 20).unwrap()).collect();
        for (r, b) in corpus.records.iter().zip(&corpus.biases) {
            let got = classify_text_bias(&r.text, r.timestamp, &lexicons);
            let want: BTreeSet<BiasKind> = b.iter().copied().filter(|k| matches!(k, BiasKind::Discount | BiasKind::Holiday)).collect();
            assert_eq!(got, want, "{}: {:?}", r.post_id, r.text);
        }
    }

    #[test]
    fn generation_is_seeded() {
        let spec = SynthSpec {
            n_posts: 12,
            min_side: 24,
            max_side: 32,
            ..SynthSpec::default()
        };
        let reg = FeatureRegistry::default_catalog();
        let a = generate(&spec, &reg).unwrap();
        let b = generate(&spec, &reg).unwrap();
        assert_eq!(a.records, b.records);
        assert_eq!(a.planted_scores, b.planted_scores);
        let m = a.planted_scores.iter().sum::<f64>() / 12.0;
        assert!(m.abs() < 1e-12);
    }
}
