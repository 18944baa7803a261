//! What-if predictions and the exhaustive tuning search for one image.

use std::collections::BTreeMap;

use adlens::aesthetics::{extract_features, FeatureRegistry};
use adlens::model::{train_svr, SvmParams};
use adlens::synth::{generate, SynthSpec};
use adlens::tuner::{suggest, whatif, TunerParams};

fn main() -> anyhow::Result<()> {
    let registry = FeatureRegistry::default_catalog();
    let spec = SynthSpec {
        n_posts: 150,
        boosts: Default::default(),
        ..SynthSpec::default()
    };
    let corpus = generate(&spec, &registry)?;
    let xs: Vec<_> = corpus.images.iter().map(|i| extract_features(i, &registry)).collect::<Result<_, _>>()?;
    let model = train_svr(&xs, &corpus.planted_scores, &SvmParams::default())?;

    let x = &xs[0];
    let deltas: BTreeMap<String, f64> = [("mean_saturation".to_string(), 20.0)].into();
    let w = whatif(&model, &registry, x, &deltas)?;
    println!("saturation +20%: predicted {:.3}", w.predicted);

    let s = suggest(&model, &registry, x, &TunerParams::new(2, 20.0, 5.0))?;
    println!("before {:.3}, after {:.3}", s.predicted_before, s.predicted_after);
    for c in &s.changes {
        println!("  {:<30} {:+5.1}%  {:.4} -> {:.4}", c.name, c.percent, c.old, c.new);
    }
    Ok(())
}
