//! Trains SVR and SVC models on a small synthetic corpus and prints the
//! linear significance ranking.

use adlens::aesthetics::FeatureRegistry;
use adlens::model::{
    evaluate, quartile_labels, significance, train_svc, train_svr, KernelKind, SvmParams, Targets,
};
use adlens::synth::{generate, SynthSpec, PLANTED};

fn main() -> anyhow::Result<()> {
    let registry = FeatureRegistry::default_catalog();
    let spec = SynthSpec {
        n_posts: 240,
        boosts: Default::default(),
        ..SynthSpec::default()
    };
    let corpus = generate(&spec, &registry)?;
    let xs: Vec<_> = corpus
        .images
        .iter()
        .map(|img| adlens::aesthetics::extract_features(img, &registry))
        .collect::<Result<_, _>>()?;
    let ys = &corpus.planted_scores;
    let (train, test) = xs.split_at(180);

    let svr = train_svr(train, &ys[..180], &SvmParams::default())?;
    let r = evaluate(&svr, test, Targets::Scores(&ys[180..]))?;
    println!("SVR test RMSE {:.3} over {} posts", r.rmse.unwrap_or(f64::NAN), r.n);

    let scores = (0..xs.len()).map(|i| (format!("{i:04}"), ys[i])).collect();
    let q = quartile_labels(&scores)?;
    let pick = |ids: &[String]| ids.iter().map(|id| id.parse::<usize>().unwrap()).collect::<Vec<_>>();
    let (pos, neg) = (pick(&q.successful_ids), pick(&q.unsuccessful_ids));
    let cx: Vec<_> = pos.iter().chain(&neg).map(|&i| xs[i].clone()).collect();
    let cl: Vec<bool> = pos.iter().map(|_| true).chain(neg.iter().map(|_| false)).collect();
    let linear = train_svc(&cx, &cl, &SvmParams { kernel: KernelKind::Linear, ..SvmParams::default() })?;
    println!("top features (planted: {:?})", PLANTED.map(|p| p.0));
    for w in significance(&linear, &registry, 5).unwrap_or_default() {
        println!("  {:<28} {:+.3}  {}", w.feature, w.weight, w.name);
    }
    Ok(())
}
