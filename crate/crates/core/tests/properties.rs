use std::collections::BTreeMap;

use proptest::prelude::*;

use adlens::aesthetics::{
    wavelet_decompose, wavelet_reconstruct, ExtractionParams, FeatureDescriptor, FeatureFamily, FeatureRegistry,
    FeatureVector, Plane,
};
use adlens::biasdetect::lof_scores;
use adlens::corpus::normalize_page;
use adlens::debias::{build_distribution, kl_divergence, PolynomialTransform};
use adlens::model::{quartile_labels, train_svr, KernelKind, SvmParams};
use adlens::tuner::{apply_percent, suggest, whatif, TunerParams};

fn spread_scores() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.0f64..1e6, 2..80).prop_filter("needs spread", |v| v.iter().any(|&x| x != v[0]))
}

fn registry(d: usize) -> FeatureRegistry {
    let f = (0..d)
        .map(|i| {
            let f = FeatureDescriptor::new(&format!("f{i}"), FeatureFamily::Region, &format!("feature {i}"));
            if i % 2 == 0 {
                f.bounded(0.0, 1.0)
            } else {
                f
            }
        })
        .collect();
    FeatureRegistry::new(f, ExtractionParams::default()).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn normalized_pages_have_zero_mean_unit_std(scores in spread_scores()) {
        let (_, z) = normalize_page("p", &scores).unwrap();
        let n = z.len() as f64;
        let m = z.iter().sum::<f64>() / n;
        let s = (z.iter().map(|v| (v - m).powi(2)).sum::<f64>() / n).sqrt();
        prop_assert!(m.abs() < 1e-9);
        prop_assert!((s - 1.0).abs() < 1e-9);
    }

    #[test]
    fn normalization_ignores_positive_affine_maps(scores in spread_scores(), a in 0.1f64..100.0, b in -1e3f64..1e3) {
        let (_, z1) = normalize_page("p", &scores).unwrap();
        let moved: Vec<f64> = scores.iter().map(|x| a * x + b).collect();
        let (_, z2) = normalize_page("p", &moved).unwrap();
        for (x, y) in z1.iter().zip(&z2) {
            prop_assert!((x - y).abs() < 1e-6);
        }
    }

    #[test]
    fn lof_is_bounded_and_scale_free(
        pts in prop::collection::vec(prop::collection::vec(-10.0f64..10.0, 2), 12..40),
        k in 1usize..8,
        scale in 0.01f64..100.0,
    ) {
        let a = lof_scores(&pts, k).unwrap();
        let scaled: Vec<Vec<f64>> = pts.iter().map(|p| p.iter().map(|v| v * scale).collect()).collect();
        let b = lof_scores(&scaled, k).unwrap();
        for (x, y) in a.iter().zip(&b) {
            prop_assert!((0.0..=1.0).contains(x));
            prop_assert!((x - y).abs() < 1e-6, "{} vs {}", x, y);
        }
    }

    #[test]
    fn valid_transforms_preserve_order(
        w0 in -5.0f64..5.0,
        w1 in 1e-6f64..10.0,
        higher in prop::collection::vec(0.0f64..5.0, 0..4),
        shift in -3.0f64..3.0,
        scale in 0.1f64..10.0,
        mut ys in prop::collection::vec(-20.0f64..20.0, 2..50),
    ) {
        let mut w = vec![w0, w1];
        w.extend(higher);
        let t = PolynomialTransform::new(w, shift, scale).unwrap();
        ys.sort_by(f64::total_cmp);
        let out: Vec<f64> = ys.iter().map(|&y| t.eval(y)).collect();
        for i in 1..ys.len() {
            prop_assert!(out[i] >= out[i - 1]);
            if ys[i] > ys[i - 1] && ys[i - 1] >= shift && ys[i] <= shift + scale {
                prop_assert!(out[i] > out[i - 1]);
            }
        }
    }

    #[test]
    fn kl_is_non_negative_and_zero_on_self(xs in prop::collection::vec(-5.0f64..5.0, 5..100), h in 0.05f64..1.0) {
        let p = build_distribution(&xs, 30, h).unwrap();
        prop_assert!(kl_divergence(&p, &p).unwrap().abs() < 1e-12);
        let q = adlens::debias::build_distribution_on(&xs.iter().map(|x| x + 0.5).collect::<Vec<_>>(), &p.bin_edges, h).unwrap();
        prop_assert!(kl_divergence(&p, &q).unwrap() >= 0.0);
    }

    #[test]
    fn wavelet_round_trips_any_size(w in 1usize..40, h in 1usize..40, seed in any::<u64>()) {
        let data: Vec<f64> = (0..w * h).map(|i| ((i as u64).wrapping_mul(seed | 1) % 1000) as f64 / 1000.0).collect();
        let plane = Plane::new(w, h, data).padded_to_multiple(8);
        let dec = wavelet_decompose(&plane, 3).unwrap();
        prop_assert!((dec.energy() - plane.energy()).abs() <= 1e-9 * plane.energy().max(1.0));
        let back = wavelet_reconstruct(&dec);
        for (a, b) in back.data.iter().zip(&plane.data) {
            prop_assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn quartile_classes_are_separated(scores in prop::collection::vec(-3.0f64..3.0, 8..100)) {
        let m: BTreeMap<String, f64> = scores.iter().enumerate().map(|(i, &s)| (format!("{i:03}"), s)).collect();
        if let Ok(q) = quartile_labels(&m) {
            prop_assert!(q.successful_ids.iter().all(|id| m[id] >= q.upper_threshold));
            prop_assert!(q.unsuccessful_ids.iter().all(|id| m[id] <= q.lower_threshold));
            prop_assert!(q.successful_ids.iter().all(|id| !q.unsuccessful_ids.contains(id)));
        }
    }

    #[test]
    fn tuner_grid_is_symmetric(s in 1.0f64..60.0, ratio in 0.05f64..1.0) {
        let p = TunerParams::new(1, s, s * ratio);
        let g = p.grid();
        prop_assert!(g.windows(2).all(|w| w[0] < w[1]));
        prop_assert!(g.contains(&0.0));
        prop_assert!((g[0] + s).abs() < 1e-9 && (g[g.len() - 1] - s).abs() < 1e-9);
        for (a, b) in g.iter().zip(g.iter().rev()) {
            prop_assert!((a + b).abs() < 1e-9);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn suggestions_never_lose_and_replay_through_whatif(
        seed in any::<u64>(),
        k in 1usize..3,
        linear in any::<bool>(),
        row in 0usize..20,
    ) {
        let reg = registry(5);
        let mut state = seed | 1;
        let mut next = || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            (state % 10_000) as f64 / 10_000.0
        };
        let xs: Vec<FeatureVector> = (0..20)
            .map(|_| FeatureVector { registry_hash: reg.hash().into(), values: (0..5).map(|_| next()).collect() })
            .collect();
        let ys: Vec<f64> = xs.iter().map(|x| x.values[0] - x.values[1] * x.values[3] + next() * 0.1).collect();
        let params = SvmParams { kernel: if linear { KernelKind::Linear } else { KernelKind::Rbf }, ..SvmParams::default() };
        let model = train_svr(&xs, &ys, &params).unwrap();
        let x = &xs[row];
        let s = suggest(&model, &reg, x, &TunerParams::new(k, 20.0, 5.0)).unwrap();
        prop_assert!(s.predicted_after >= s.predicted_before);
        prop_assert!(s.changes.len() <= k);
        let w = whatif(&model, &reg, x, &s.deltas()).unwrap();
        prop_assert_eq!(w.predicted, s.predicted_after);
        for (i, d) in reg.features().iter().enumerate() {
            let v = apply_percent(x.values[i], 37.0, model.feature_stds[i], &reg, i);
            prop_assert_eq!(v, d.clamp(v));
            prop_assert_eq!(apply_percent(x.values[i], 0.0, 1.0, &reg, i), x.values[i]);
        }
    }

    #[test]
    fn registry_manifest_round_trips(n in 1usize..12, k in 2usize..10) {
        let f = (0..n).map(|i| FeatureDescriptor::new(&format!("x{i}"), FeatureFamily::Rag, "x").at_least(0.0)).collect();
        let mut p = ExtractionParams::default();
        p.segment.k = k;
        let reg = FeatureRegistry::new(f, p).unwrap();
        let back = FeatureRegistry::from_manifest_json(&reg.to_manifest_json()).unwrap();
        prop_assert_eq!(back.hash(), reg.hash());
        prop_assert_eq!(back, reg);
    }
}
