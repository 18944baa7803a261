use std::collections::HashMap;
use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use super::image::ImageBuffer;
use super::rag::build_rag;
use super::registry::{ExtractionParams, FeatureRegistry, FeatureVector};
use super::segment::segment_image;
use super::stats::{circular_mean_deg, mean};
use super::wavelet::{wavelet_decompose, Plane, WaveletDecomposition};
use super::AestheticsError;

/// Segments below this fraction of the image are not counted as "large".
const LARGE_SEGMENT_FRAC: f64 = 0.01;
const HUE_BINS: usize = 18;

/// Computes every feature of `registry` for one image.
pub fn extract_features(img: &ImageBuffer, registry: &FeatureRegistry) -> Result<FeatureVector, AestheticsError> {
    let params = registry.params();
    let img = img.downscaled(params.max_side);
    let all = catalog_values(&img, params)?;
    let values = registry
        .ids()
        .map(|id| {
            all.get(id)
                .copied()
                .ok_or_else(|| AestheticsError::UnknownFeature(id.to_string()))
        })
        .collect::<Result<Vec<f64>, _>>()?;
    Ok(FeatureVector {
        registry_hash: registry.hash().to_string(),
        values,
    })
}

fn catalog_values(img: &ImageBuffer, params: &ExtractionParams) -> Result<HashMap<&'static str, f64>, AestheticsError> {
    let (w, h) = (img.width(), img.height());
    let hsv = img.hsv();
    let rgb = img.rgb();
    let lum = img.luminance();
    let mut out: HashMap<&'static str, f64> = HashMap::new();

    // colour and exposure
    out.insert("mean_value", mean(hsv.iter().map(|p| p[2])));
    out.insert("mean_saturation", mean(hsv.iter().map(|p| p[1])));
    out.insert("mean_hue", circular_mean_deg(hsv.iter().map(|p| (p[0], p[1]))));
    out.insert("colorfulness", colorfulness(rgb));
    out.insert("log_avg_luminance", mean(lum.iter().map(|l| (1e-4 + l).ln())).exp());

    // central ninth
    let (x0, x1) = (w / 3, (2 * w).div_ceil(3).max(w / 3 + 1));
    let (y0, y1) = (h / 3, (2 * h).div_ceil(3).max(h / 3 + 1));
    let centre: Vec<[f64; 3]> = (y0..y1).flat_map(|y| (x0..x1).map(move |x| hsv[y * w + x])).collect();
    out.insert("thirds_hue", circular_mean_deg(centre.iter().map(|p| (p[0], p[1]))));
    out.insert("thirds_saturation", mean(centre.iter().map(|p| p[1])));
    out.insert("thirds_value", mean(centre.iter().map(|p| p[2])));

    // wavelet texture and depth of field
    let planes = [
        Plane::new(w, h, hsv.iter().map(|p| p[0] / 360.0).collect()),
        Plane::new(w, h, hsv.iter().map(|p| p[1]).collect()),
        Plane::new(w, h, hsv.iter().map(|p| p[2]).collect()),
    ];
    const WAVELET_IDS: [[&str; 4]; 3] = [
        ["wavelet_h_l1", "wavelet_h_l2", "wavelet_h_l3", "wavelet_h_sum"],
        ["wavelet_s_l1", "wavelet_s_l2", "wavelet_s_l3", "wavelet_s_sum"],
        ["wavelet_v_l1", "wavelet_v_l2", "wavelet_v_l3", "wavelet_v_sum"],
    ];
    const DOF_IDS: [&str; 3] = ["dof_hue", "dof_saturation", "dof_value"];
    for (c, plane) in planes.iter().enumerate() {
        let dec = wavelet_decompose(plane, params.wavelet_levels)?;
        let total = dec.energy();
        let mut sum = 0.0;
        for (l, id) in WAVELET_IDS[c][..3].iter().enumerate() {
            let frac = match dec.levels.get(l) {
                Some(lvl) if total > 0.0 => lvl.detail_energy() / total,
                _ => 0.0,
            };
            sum += frac;
            out.insert(id, frac);
        }
        out.insert(WAVELET_IDS[c][3], sum);
        out.insert(DOF_IDS[c], depth_of_field(&dec));
    }

    let (sw, sh) = img.source_dimensions();
    out.insert("size_sum", (sw + sh) as f64);
    out.insert("aspect_ratio", sw as f64 / sh as f64);

    // regions
    let seg = segment_image(img, params.segment.k, params.segment.min_area_frac, params.segment.seed);
    let n_px = seg.pixel_count() as f64;
    let large = seg
        .segments
        .iter()
        .filter(|s| s.area as f64 >= LARGE_SEGMENT_FRAC * n_px)
        .count();
    out.insert("segment_count", large as f64);
    const SIZE_IDS: [&str; 5] = ["segment_size_1", "segment_size_2", "segment_size_3", "segment_size_4", "segment_size_5"];
    for (i, id) in SIZE_IDS.iter().enumerate() {
        out.insert(id, seg.segments.get(i).map_or(0.0, |s| s.area as f64 / n_px));
    }
    let top = &seg.segments[0];
    out.insert("largest_segment_value", top.mean_value);
    out.insert("largest_segment_hue", top.mean_hue);
    out.insert("largest_segment_saturation", top.mean_saturation);
    out.insert("largest_segment_convexity", seg.convexity(0));

    // composition
    out.insert("edge_bbox_area", edge_bbox_area(&lum, w, h, params.edge_energy));
    out.insert("hue_count", hue_count(hsv));
    out.insert("blur", high_frequency_fraction(&lum, w, h, params.blur_cutoff));
    out.insert("contrast", contrast(&lum));
    out.insert("brightness", mean(lum.iter().copied()));

    let rag = build_rag(&seg, params.rag);
    out.insert("rag_segment_count", rag.merged_count as f64);
    out.insert("rag_best_ncut", rag.best_ncut);
    out.insert("rag_cut_depth", rag.cut_depth as f64);

    debug_assert!(out.values().all(|v| v.is_finite()));
    Ok(out)
}

/// Opponent-space colourfulness: `sqrt(sd_rg^2 + sd_yb^2) + 0.3 sqrt(mu_rg^2 + mu_yb^2)`.
pub fn colorfulness(rgb: &[[f64; 3]]) -> f64 {
    let rg: Vec<f64> = rgb.iter().map(|p| p[0] - p[1]).collect();
    let yb: Vec<f64> = rgb.iter().map(|p| 0.5 * (p[0] + p[1]) - p[2]).collect();
    let (mrg, myb) = (mean(rg.iter().copied()), mean(yb.iter().copied()));
    let var = |v: &[f64], m: f64| mean(v.iter().map(|x| (x - m) * (x - m)));
    (var(&rg, mrg) + var(&yb, myb)).sqrt() + 0.3 * (mrg * mrg + myb * myb).sqrt()
}

/// Coarsest-level detail energy inside the central rectangle (half width,
/// half height) over the whole coarsest-level detail energy.
fn depth_of_field(dec: &WaveletDecomposition) -> f64 {
    let lvl = dec.levels.last().expect("at least one level");
    let (w, h) = (lvl.lh.width, lvl.lh.height);
    let (x0, x1) = (w / 4, (3 * w).div_ceil(4));
    let (y0, y1) = (h / 4, (3 * h).div_ceil(4));
    let total = lvl.detail_energy();
    if total <= 0.0 {
        return 0.0;
    }
    let mut inner = 0.0;
    for y in y0..y1 {
        for x in x0..x1 {
            for band in [&lvl.lh, &lvl.hl, &lvl.hh] {
                inner += band.at(x, y).powi(2);
            }
        }
    }
    inner / total
}

/// Area fraction of the box holding the central `energy` share of absolute
/// Laplacian response along each axis.
fn edge_bbox_area(lum: &[f64], w: usize, h: usize, energy: f64) -> f64 {
    let at = |x: usize, y: usize| lum[y * w + x];
    let mut col = vec![0.0; w];
    let mut row = vec![0.0; h];
    for y in 0..h {
        for x in 0..w {
            let c = at(x, y);
            let lap = (at(x.saturating_sub(1), y) - c)
                + (at((x + 1).min(w - 1), y) - c)
                + (at(x, y.saturating_sub(1)) - c)
                + (at(x, (y + 1).min(h - 1)) - c);
            col[x] += lap.abs();
            row[y] += lap.abs();
        }
    }
    let total: f64 = col.iter().sum();
    if total <= 1e-12 {
        return 0.0;
    }
    let trim = (1.0 - energy) / 2.0 * total;
    let span = |m: &[f64]| -> f64 {
        let mut acc = 0.0;
        let mut lo = 0;
        while lo < m.len() && acc + m[lo] <= trim {
            acc += m[lo];
            lo += 1;
        }
        acc = 0.0;
        let mut hi = m.len();
        while hi > lo + 1 && acc + m[hi - 1] <= trim {
            acc += m[hi - 1];
            hi -= 1;
        }
        (hi - lo) as f64 / m.len() as f64
    };
    span(&col) * span(&row)
}

/// Number of 20-degree hue bins holding more than 5% of the fullest bin's
/// mass, among reasonably saturated mid-value pixels; at least 1.
fn hue_count(hsv: &[[f64; 3]]) -> f64 {
    let mut bins = [0usize; HUE_BINS];
    for p in hsv {
        if p[1] > 0.2 && p[2] > 0.15 && p[2] < 0.95 {
            bins[((p[0] / 20.0) as usize).min(HUE_BINS - 1)] += 1;
        }
    }
    let max = *bins.iter().max().unwrap() as f64;
    let n = bins.iter().filter(|&&b| b > 0 && b as f64 > 0.05 * max).count();
    n.max(1) as f64
}

/// Share of non-DC spectral magnitude above `cutoff` times Nyquist.
fn high_frequency_fraction(lum: &[f64], w: usize, h: usize, cutoff: f64) -> f64 {
    let m = mean(lum.iter().copied());
    let mut data: Vec<Complex<f64>> = lum.iter().map(|&v| Complex::new(v - m, 0.0)).collect();
    if data.iter().all(|c| c.re == 0.0) {
        return 0.0;
    }
    let mut planner = FftPlanner::new();
    let row_fft: Arc<dyn Fft<f64>> = planner.plan_fft_forward(w);
    for r in data.chunks_exact_mut(w) {
        row_fft.process(r);
    }
    let col_fft = planner.plan_fft_forward(h);
    let mut column = vec![Complex::new(0.0, 0.0); h];
    for x in 0..w {
        for y in 0..h {
            column[y] = data[y * w + x];
        }
        col_fft.process(&mut column);
        for y in 0..h {
            data[y * w + x] = column[y];
        }
    }
    let freq = |i: usize, n: usize| {
        let k = if i <= n / 2 { i as f64 } else { i as f64 - n as f64 };
        k / n as f64
    };
    let limit = cutoff * 0.5;
    let (mut high, mut total) = (0.0, 0.0);
    for y in 0..h {
        for x in 0..w {
            if x == 0 && y == 0 {
                continue;
            }
            let mag = data[y * w + x].norm();
            total += mag;
            if freq(x, w).hypot(freq(y, h)) > limit {
                high += mag;
            }
        }
    }
    if total <= 0.0 {
        0.0
    } else {
        high / total
    }
}

/// Width of the luminance range holding the middle 98% of pixels.
fn contrast(lum: &[f64]) -> f64 {
    let mut v = lum.to_vec();
    v.sort_by(f64::total_cmp);
    let q = |p: f64| {
        let pos = p * (v.len() - 1) as f64;
        let (lo, hi) = (pos.floor() as usize, pos.ceil() as usize);
        v[lo] + (v[hi] - v[lo]) * (pos - lo as f64)
    };
    (q(0.99) - q(0.01)).max(0.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn value(reg: &FeatureRegistry, fv: &FeatureVector, id: &str) -> f64 {
        fv.values[reg.index_of(id).unwrap()]
    }

    #[test]
    fn flat_gray() {
        let reg = FeatureRegistry::default_catalog();
        let img = ImageBuffer::from_fn(64, 48, |_, _| [0.5; 3]).unwrap();
        let fv = extract_features(&img, &reg).unwrap();
        assert_eq!(fv.values.len(), reg.len());
        assert_eq!(value(&reg, &fv, "colorfulness"), 0.0);
        assert_eq!(value(&reg, &fv, "hue_count"), 1.0);
        assert_eq!(value(&reg, &fv, "segment_count"), 1.0);
        assert_eq!(value(&reg, &fv, "edge_bbox_area"), 0.0);
        assert_eq!(value(&reg, &fv, "blur"), 0.0);
        for f in reg.features() {
            if f.id.starts_with("wavelet_") || f.id.starts_with("dof_") {
                assert_eq!(value(&reg, &fv, &f.id), 0.0, "{}", f.id);
            }
        }
        assert_eq!(value(&reg, &fv, "thirds_value"), value(&reg, &fv, "mean_value"));
    }

    #[test]
    fn pure_red() {
        let reg = FeatureRegistry::default_catalog();
        let img = ImageBuffer::from_fn(32, 32, |_, _| [1.0, 0.0, 0.0]).unwrap();
        let fv = extract_features(&img, &reg).unwrap();
        assert_eq!(value(&reg, &fv, "mean_saturation"), 1.0);
        assert_eq!(value(&reg, &fv, "mean_value"), 1.0);
    }

    #[test]
    fn red_blue_halves() {
        let reg = FeatureRegistry::default_catalog();
        let img = ImageBuffer::from_fn(64, 32, |x, _| if x < 32 { [1.0, 0.0, 0.0] } else { [0.0, 0.0, 1.0] }).unwrap();
        let fv = extract_features(&img, &reg).unwrap();
        assert_eq!(value(&reg, &fv, "rag_segment_count"), 2.0);
        assert_eq!(value(&reg, &fv, "segment_size_1"), 0.5);
        assert_eq!(value(&reg, &fv, "segment_size_2"), 0.5);
        assert!(value(&reg, &fv, "edge_bbox_area") > 0.0);
    }

    #[test]
    fn size_features_use_source_dimensions() {
        let reg = FeatureRegistry::default_catalog();
        let img = ImageBuffer::from_fn(600, 300, |x, y| [(x % 7) as f64 / 7.0, (y % 5) as f64 / 5.0, 0.3]).unwrap();
        let fv = extract_features(&img, &reg).unwrap();
        assert_eq!(value(&reg, &fv, "size_sum"), 900.0);
        assert_eq!(value(&reg, &fv, "aspect_ratio"), 2.0);
    }

    #[test]
    fn too_small_is_reported() {
        let reg = FeatureRegistry::default_catalog();
        let img = ImageBuffer::from_fn(4, 40, |_, _| [0.1; 3]).unwrap();
        assert!(matches!(extract_features(&img, &reg), Err(AestheticsError::TooSmall { .. })));
    }
}
