use std::collections::BTreeSet;
use std::io::Write;

use chrono::{Duration, TimeZone, Utc};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use adlens::biasdetect::{load_embeddings, BiasKind};
use adlens::corpus::{load_corpus, write_csv, write_jsonlines, CorpusFormat, PostRecord};

fn records(n: usize) -> Vec<PostRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let kinds = [BiasKind::HumanPresence, BiasKind::AnimalPresence, BiasKind::Holiday, BiasKind::Discount];
    (0..n)
        .map(|i| {
            let labels: BTreeSet<BiasKind> = kinds.iter().copied().filter(|_| rng.random_bool(0.2)).collect();
            PostRecord {
                post_id: format!("id-{i}"),
                page_id: format!("page {}", i % 4),
                image_path: format!("imgs/{i}.jpg").into(),
                likes: rng.random_range(0..100_000),
                retweets: rng.random_range(0..5_000),
                timestamp: Utc.with_ymd_and_hms(2016, 1, 1, 0, 0, 0).unwrap() + Duration::seconds(rng.random_range(0..40_000_000)),
                text: ["plain", "with, comma", "with \"quotes\"", "multi\nline", "ünïcödé 🎉", ""][i % 6].to_string(),
                external_bias_labels: labels,
                followers: (i % 3 != 0).then(|| rng.random_range(0..1_000_000)),
            }
        })
        .collect()
}

#[test]
fn fifty_records_round_trip_both_formats() {
    let dir = tempfile::tempdir().unwrap();
    let recs = records(50);
    let j = dir.path().join("c.jsonl");
    let c = dir.path().join("c.csv");
    write_jsonlines(&j, &recs).unwrap();
    write_csv(&c, &recs).unwrap();
    for (path, fmt) in [(j, CorpusFormat::Jsonlines), (c, CorpusFormat::Csv)] {
        let loaded = load_corpus(&path, fmt).unwrap();
        assert!(loaded.rejects.is_empty(), "{fmt:?}: {:?}", loaded.rejects);
        assert_eq!(loaded.records, recs, "{fmt:?}");
    }
}

#[test]
fn malformed_rows_become_rejects() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("c.jsonl");
    write_jsonlines(&path, &records(3)).unwrap();
    let mut f = std::fs::OpenOptions::new().append(true).open(&path).unwrap();
    writeln!(f, "{{\"post_id\": \"x\"}}").unwrap();
    writeln!(f, "not json").unwrap();
    let loaded = load_corpus(&path, CorpusFormat::Jsonlines).unwrap();
    assert_eq!(loaded.records.len(), 3);
    assert_eq!(loaded.rejects.iter().map(|r| r.line).collect::<Vec<_>>(), vec![4, 5]);
}

#[test]
fn fifty_thousand_embeddings_load_bit_exact() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("emb.txt");
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let dim = 25;
    let mut expected = Vec::with_capacity(50_000);
    let mut out = std::io::BufWriter::new(std::fs::File::create(&path).unwrap());
    for i in 0..50_000 {
        let v: Vec<f32> = (0..dim).map(|_| rng.random_range(-1.0f32..1.0) * 10f32.powi(rng.random_range(-8..3))).collect();
        let word = format!("w{i}");
        write!(out, "{word}").unwrap();
        for x in &v {
            write!(out, " {x}").unwrap();
        }
        writeln!(out).unwrap();
        expected.push((word, v));
    }
    drop(out);
    let (table, report) = load_embeddings(&path).unwrap();
    assert_eq!(table.len(), 50_000);
    assert_eq!(table.dimension(), dim);
    assert!(report.duplicate_words.is_empty());
    for (word, v) in &expected {
        let got = table.get(word).unwrap();
        assert!(got.iter().zip(v).all(|(a, b)| a.to_bits() == b.to_bits()), "{word}");
    }
}
