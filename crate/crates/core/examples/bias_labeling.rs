//! Lexicon expansion, text/date bias labels and LOF outlier scores.

use chrono::{TimeZone, Utc};

use adlens::biasdetect::{classify_text_bias, load_embeddings, lof_scores};
use adlens::synth::{embedding_lines, lexicon_configs};

fn main() -> anyhow::Result<()> {
    let dir = tempfile::tempdir()?;
    let path = dir.path().join("embeddings.txt");
    std::fs::write(&path, embedding_lines(7).join("\n"))?;
    let (table, report) = load_embeddings(&path)?;
    println!("embeddings: {} words, {} duplicates", table.len(), report.duplicate_words.len());

    let lexicons = lexicon_configs()
        .into_iter()
        .map(|c| c.build(Some(&table), 20))
        .collect::<Result<Vec<_>, _>>()?;
    for l in &lexicons {
        println!("{:?}: {}", l.kind, l.expanded_words.join(", "));
    }

    // holiday needs both a lexicon word and a date inside a window
    let samples = [
        ("Big bargain on boots", Utc.with_ymd_and_hms(2017, 4, 2, 10, 0, 0).unwrap()),
        ("Festive jumpers are back", Utc.with_ymd_and_hms(2017, 11, 2, 10, 0, 0).unwrap()),
        ("Festive jumpers are back", Utc.with_ymd_and_hms(2017, 12, 22, 10, 0, 0).unwrap()),
        ("Our new shelves", Utc.with_ymd_and_hms(2017, 7, 1, 10, 0, 0).unwrap()),
    ];
    for (text, when) in samples {
        println!("{text:<28} {} -> {:?}", when.date_naive(), classify_text_bias(text, when, &lexicons));
    }

    let page_scores: Vec<Vec<f64>> = [0.1, -0.3, 0.2, 0.0, -0.1, 3.5, 0.15].iter().map(|&s| vec![s]).collect();
    let lof = lof_scores(&page_scores, 3)?;
    println!("LOF (normalized): {:?}", lof.iter().map(|v| format!("{v:.2}")).collect::<Vec<_>>());
    Ok(())
}
