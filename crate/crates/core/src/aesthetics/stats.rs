//! Small statistics helpers that return the input value exactly on constant data.

/// Mean computed as offsets from the first value.
pub fn mean(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut it = values.into_iter();
    let Some(first) = it.next() else { return 0.0 };
    let (mut acc, mut n) = (0.0, 1usize);
    for v in it {
        acc += v - first;
        n += 1;
    }
    first + acc / n as f64
}

/// Population standard deviation.
pub fn std(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    let m = mean(values.iter().copied());
    (values.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / values.len() as f64).sqrt()
}

/// Weighted circular mean of hues in degrees, returned in [0, 360).
/// Angles are taken relative to the first weighted sample so identical
/// hues return that hue exactly. Zero total weight gives 0.
pub fn circular_mean_deg(samples: impl IntoIterator<Item = (f64, f64)>) -> f64 {
    let mut it = samples.into_iter().filter(|&(_, w)| w > 0.0);
    let Some((h0, w0)) = it.next() else { return 0.0 };
    let (mut s, mut c) = (0.0, w0);
    for (h, w) in it {
        let d = (h - h0).to_radians();
        s += w * d.sin();
        c += w * d.cos();
    }
    if s == 0.0 && c <= 0.0 {
        return if c == 0.0 { 0.0 } else { (h0 + 180.0).rem_euclid(360.0) };
    }
    let offset = if s == 0.0 { 0.0 } else { s.atan2(c).to_degrees() };
    let h = h0 + offset;
    let h = h.rem_euclid(360.0);
    if h >= 360.0 {
        0.0
    } else {
        h
    }
}
