//! Writes a synthetic corpus, lexicons, embeddings and a config to a directory.
//!
//! `cargo run --example make_fixture -- /tmp/adlens-demo [n_posts]`

use adlens::synth::{mini_spec, write_fixture, SynthSpec};

fn main() -> anyhow::Result<()> {
    let mut args = std::env::args().skip(1);
    let dir = args.next().unwrap_or_else(|| "adlens-fixture".into());
    let spec = match args.next() {
        Some(n) => SynthSpec {
            n_posts: n.parse()?,
            ..SynthSpec::default()
        },
        None => mini_spec(),
    };
    let fx = write_fixture(dir.as_ref(), &spec)?;
    println!("{} posts written; run `adlens run --config {}`", fx.corpus.records.len(), fx.config_path.display());
    Ok(())
}
