//! K-means colour segmentation in CIE L*u*v* followed by connected
//! components and small-region merging.

use std::collections::{BTreeSet, VecDeque};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::image::ImageBuffer;
use super::stats::{circular_mean_deg, mean};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentInfo {
    pub id: usize,
    pub area: usize,
    pub mean_hue: f64,
    pub mean_saturation: f64,
    pub mean_value: f64,
    pub mean_rgb: [f64; 3],
    pub centroid: (f64, f64),
}

/// Per-pixel segment labels with segments sorted by descending area;
/// a segment's id is its index in `segments`.
#[derive(Debug, Clone, PartialEq)]
pub struct Segmentation {
    pub width: usize,
    pub height: usize,
    pub labels: Vec<usize>,
    pub segments: Vec<SegmentInfo>,
}

impl Segmentation {
    pub fn pixel_count(&self) -> usize {
        self.width * self.height
    }

    /// Area of the segment divided by the area of its pixel-square convex hull.
    pub fn convexity(&self, id: usize) -> f64 {
        let mut rows: Vec<Option<(usize, usize)>> = vec![None; self.height];
        let mut area = 0usize;
        for (i, &l) in self.labels.iter().enumerate() {
            if l != id {
                continue;
            }
            area += 1;
            let (x, y) = (i % self.width, i / self.width);
            rows[y] = Some(match rows[y] {
                None => (x, x),
                Some((lo, hi)) => (lo.min(x), hi.max(x)),
            });
        }
        if area == 0 {
            return 0.0;
        }
        let mut pts: Vec<(i64, i64)> = Vec::new();
        for (y, r) in rows.iter().enumerate() {
            if let Some((lo, hi)) = *r {
                let (y, lo, hi) = (y as i64, lo as i64, hi as i64 + 1);
                pts.extend([(lo, y), (hi, y), (lo, y + 1), (hi, y + 1)]);
            }
        }
        let hull_area = convex_hull_area(&mut pts);
        if hull_area <= 0.0 {
            1.0
        } else {
            (area as f64 / hull_area).min(1.0)
        }
    }
}

fn cross(o: (i64, i64), a: (i64, i64), b: (i64, i64)) -> i64 {
    (a.0 - o.0) * (b.1 - o.1) - (a.1 - o.1) * (b.0 - o.0)
}

fn convex_hull_area(pts: &mut Vec<(i64, i64)>) -> f64 {
    pts.sort_unstable();
    pts.dedup();
    if pts.len() < 3 {
        return 0.0;
    }
    let mut hull: Vec<(i64, i64)> = Vec::with_capacity(2 * pts.len());
    for &p in pts.iter() {
        while hull.len() >= 2 && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0 {
            hull.pop();
        }
        hull.push(p);
    }
    let lower = hull.len() + 1;
    for &p in pts.iter().rev().skip(1) {
        while hull.len() >= lower && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0 {
            hull.pop();
        }
        hull.push(p);
    }
    hull.pop();
    let twice: i64 = (0..hull.len())
        .map(|i| {
            let (a, b) = (hull[i], hull[(i + 1) % hull.len()]);
            a.0 * b.1 - b.0 * a.1
        })
        .sum();
    twice.abs() as f64 / 2.0
}

fn srgb_to_linear(c: f64) -> f64 {
    if c <= 0.04045 {
        c / 12.92
    } else {
        ((c + 0.055) / 1.055).powf(2.4)
    }
}

/// sRGB (D65) to CIE L*u*v*.
pub fn rgb_to_luv(p: [f64; 3]) -> [f64; 3] {
    let [r, g, b] = p.map(srgb_to_linear);
    let x = 0.4124564 * r + 0.3575761 * g + 0.1804375 * b;
    let y = 0.2126729 * r + 0.7151522 * g + 0.0721750 * b;
    let z = 0.0193339 * r + 0.1191920 * g + 0.9503041 * b;
    const XN: f64 = 0.95047;
    const ZN: f64 = 1.08883;
    let un = 4.0 * XN / (XN + 15.0 + 3.0 * ZN);
    let vn = 9.0 / (XN + 15.0 + 3.0 * ZN);
    let l = if y > 216.0 / 24389.0 {
        116.0 * y.cbrt() - 16.0
    } else {
        24389.0 / 27.0 * y
    };
    let d = x + 15.0 * y + 3.0 * z;
    if d == 0.0 {
        return [l, 0.0, 0.0];
    }
    let (u, v) = (4.0 * x / d, 9.0 * y / d);
    [l, 13.0 * l * (u - un), 13.0 * l * (v - vn)]
}

fn dist2(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    (a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)
}

const KMEANS_MAX_ITERS: usize = 30;

/// Lloyd's k-means with k-means++ seeding. Clusters that end up empty are
/// dropped, so fewer than `k` labels may be used.
fn kmeans(points: &[[f64; 3]], k: usize, seed: u64) -> Vec<usize> {
    let n = points.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centers: Vec<[f64; 3]> = vec![points[rng.random_range(0..n)]];
    let mut d2: Vec<f64> = points.iter().map(|p| dist2(p, &centers[0])).collect();
    while centers.len() < k {
        let total: f64 = d2.iter().sum();
        if total <= 0.0 {
            break;
        }
        let target = rng.random::<f64>() * total;
        let mut acc = 0.0;
        let mut pick = n - 1;
        for (i, &d) in d2.iter().enumerate() {
            acc += d;
            if acc > target && d > 0.0 {
                pick = i;
                break;
            }
        }
        let c = points[pick];
        centers.push(c);
        for (di, p) in d2.iter_mut().zip(points) {
            *di = di.min(dist2(p, &c));
        }
    }

    let mut labels = vec![usize::MAX; n];
    for _ in 0..KMEANS_MAX_ITERS {
        let mut changed = false;
        for (l, p) in labels.iter_mut().zip(points) {
            let best = centers
                .iter()
                .enumerate()
                .map(|(j, c)| (dist2(p, c), j))
                .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)))
                .map(|(_, j)| j)
                .unwrap();
            if *l != best {
                *l = best;
                changed = true;
            }
        }
        if !changed {
            break;
        }
        let mut sums = vec![[0.0; 3]; centers.len()];
        let mut counts = vec![0usize; centers.len()];
        for (&l, p) in labels.iter().zip(points) {
            counts[l] += 1;
            for c in 0..3 {
                sums[l][c] += p[c];
            }
        }
        for (j, c) in centers.iter_mut().enumerate() {
            if counts[j] > 0 {
                *c = sums[j].map(|s| s / counts[j] as f64);
            }
        }
    }
    labels
}

/// 4-connected components of equal labels; returns per-pixel component ids.
fn connected_components(labels: &[usize], width: usize, height: usize) -> (Vec<usize>, usize) {
    let mut comp = vec![usize::MAX; labels.len()];
    let mut next = 0;
    let mut queue = VecDeque::new();
    for start in 0..labels.len() {
        if comp[start] != usize::MAX {
            continue;
        }
        comp[start] = next;
        queue.push_back(start);
        while let Some(i) = queue.pop_front() {
            let (x, y) = (i % width, i / width);
            let mut visit = |j: usize| {
                if comp[j] == usize::MAX && labels[j] == labels[i] {
                    comp[j] = next;
                    queue.push_back(j);
                }
            };
            if x > 0 {
                visit(i - 1);
            }
            if x + 1 < width {
                visit(i + 1);
            }
            if y > 0 {
                visit(i - width);
            }
            if y + 1 < height {
                visit(i + width);
            }
        }
        next += 1;
    }
    (comp, next)
}

/// Pairs of distinct labels that touch horizontally or vertically.
pub(crate) fn adjacent_pairs(labels: &[usize], width: usize, height: usize) -> BTreeSet<(usize, usize)> {
    let mut out = BTreeSet::new();
    for y in 0..height {
        for x in 0..width {
            let i = y * width + x;
            let a = labels[i];
            if x + 1 < width && labels[i + 1] != a {
                let b = labels[i + 1];
                out.insert((a.min(b), a.max(b)));
            }
            if y + 1 < height && labels[i + width] != a {
                let b = labels[i + width];
                out.insert((a.min(b), a.max(b)));
            }
        }
    }
    out
}

struct Region {
    area: usize,
    luv_sum: [f64; 3],
    neighbors: BTreeSet<usize>,
    alive: bool,
}

impl Region {
    fn mean(&self) -> [f64; 3] {
        self.luv_sum.map(|s| s / self.area as f64)
    }
}

/// Merges regions smaller than `min_area` into their colour-nearest neighbour
/// (ties go to the larger neighbour, then the lower id). Returns the
/// representative region of each original component.
fn merge_small(
    comp: &[usize],
    n_comp: usize,
    luv: &[[f64; 3]],
    width: usize,
    height: usize,
    min_area: usize,
) -> Vec<usize> {
    let mut regions: Vec<Region> = (0..n_comp)
        .map(|_| Region {
            area: 0,
            luv_sum: [0.0; 3],
            neighbors: BTreeSet::new(),
            alive: true,
        })
        .collect();
    for (&c, p) in comp.iter().zip(luv) {
        regions[c].area += 1;
        for k in 0..3 {
            regions[c].luv_sum[k] += p[k];
        }
    }
    for (a, b) in adjacent_pairs(comp, width, height) {
        regions[a].neighbors.insert(b);
        regions[b].neighbors.insert(a);
    }
    let mut parent: Vec<usize> = (0..n_comp).collect();
    let mut small: BTreeSet<(usize, usize)> = regions
        .iter()
        .enumerate()
        .filter(|(_, r)| r.area < min_area)
        .map(|(i, r)| (r.area, i))
        .collect();

    while let Some((area, i)) = small.pop_first() {
        if !regions[i].alive || regions[i].area != area || regions[i].neighbors.is_empty() {
            continue;
        }
        let mi = regions[i].mean();
        let target = *regions[i]
            .neighbors
            .iter()
            .min_by(|&&a, &&b| {
                dist2(&regions[a].mean(), &mi)
                    .total_cmp(&dist2(&regions[b].mean(), &mi))
                    .then(regions[b].area.cmp(&regions[a].area))
                    .then(a.cmp(&b))
            })
            .unwrap();
        let moved = std::mem::take(&mut regions[i].neighbors);
        regions[i].alive = false;
        parent[i] = target;
        let old_target_area = regions[target].area;
        regions[target].area += regions[i].area;
        for k in 0..3 {
            regions[target].luv_sum[k] += regions[i].luv_sum[k];
        }
        for nb in moved {
            regions[nb].neighbors.remove(&i);
            if nb != target {
                regions[nb].neighbors.insert(target);
                regions[target].neighbors.insert(nb);
            }
        }
        if old_target_area < min_area {
            small.remove(&(old_target_area, target));
        }
        if regions[target].area < min_area {
            small.insert((regions[target].area, target));
        }
    }

    (0..n_comp)
        .map(|mut c| {
            while parent[c] != c {
                c = parent[c];
            }
            c
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SegmentParams {
    pub k: usize,
    pub min_area_frac: f64,
    pub seed: u64,
}

impl Default for SegmentParams {
    fn default() -> Self {
        SegmentParams {
            k: 6,
            min_area_frac: 0.005,
            seed: 42,
        }
    }
}

/// Segments an image: k-means on L*u*v* colour, connected components, then
/// merging of components below `min_area_frac` of the image.
pub fn segment_image(img: &ImageBuffer, k: usize, min_area_frac: f64, seed: u64) -> Segmentation {
    let (w, h) = (img.width(), img.height());
    let luv: Vec<[f64; 3]> = img.rgb().iter().map(|&p| rgb_to_luv(p)).collect();
    let clusters = kmeans(&luv, k.max(1), seed);
    let (comp, n_comp) = connected_components(&clusters, w, h);
    let min_area = (min_area_frac * (w * h) as f64).ceil() as usize;
    let root = merge_small(&comp, n_comp, &luv, w, h, min_area);

    // gather pixels per surviving region
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); n_comp];
    for (i, &c) in comp.iter().enumerate() {
        members[root[c]].push(i);
    }
    let mut order: Vec<usize> = (0..n_comp).filter(|&r| !members[r].is_empty()).collect();
    // larger first; equal areas by first pixel
    order.sort_by(|&a, &b| members[b].len().cmp(&members[a].len()).then(members[a][0].cmp(&members[b][0])));
    let mut new_id = vec![usize::MAX; n_comp];
    for (id, &r) in order.iter().enumerate() {
        new_id[r] = id;
    }
    let labels: Vec<usize> = comp.iter().map(|&c| new_id[root[c]]).collect();

    let hsv = img.hsv();
    let rgb = img.rgb();
    let segments = order
        .iter()
        .enumerate()
        .map(|(id, &r)| {
            let px = &members[r];
            SegmentInfo {
                id,
                area: px.len(),
                mean_hue: circular_mean_deg(px.iter().map(|&i| (hsv[i][0], hsv[i][1]))),
                mean_saturation: mean(px.iter().map(|&i| hsv[i][1])),
                mean_value: mean(px.iter().map(|&i| hsv[i][2])),
                mean_rgb: [0, 1, 2].map(|c| mean(px.iter().map(|&i| rgb[i][c]))),
                centroid: (
                    mean(px.iter().map(|&i| (i % w) as f64)),
                    mean(px.iter().map(|&i| (i / w) as f64)),
                ),
            }
        })
        .collect();
    Segmentation {
        width: w,
        height: h,
        labels,
        segments,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn halves() -> ImageBuffer {
        ImageBuffer::from_fn(40, 20, |x, _| if x < 20 { [1.0, 0.0, 0.0] } else { [0.0, 0.0, 1.0] }).unwrap()
    }

    #[test]
    fn two_colour_split() {
        let s = segment_image(&halves(), 2, 0.005, 42);
        assert_eq!(s.segments.len(), 2);
        assert_eq!(s.segments[0].area, 400);
        assert_eq!(s.segments[1].area, 400);
    }

    #[test]
    fn flat_image_is_one_segment() {
        let img = ImageBuffer::from_fn(30, 30, |_, _| [0.2, 0.6, 0.3]).unwrap();
        let s = segment_image(&img, 3, 0.005, 42);
        assert_eq!(s.segments.len(), 1);
        assert_eq!(s.segments[0].area, 900);
        assert!((s.convexity(0) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn small_specks_are_merged() {
        let img = ImageBuffer::from_fn(50, 50, |x, y| {
            if x == 10 && y == 10 {
                [0.0, 1.0, 0.0]
            } else if x < 25 {
                [1.0, 1.0, 1.0]
            } else {
                [0.0, 0.0, 0.0]
            }
        })
        .unwrap();
        let s = segment_image(&img, 3, 0.01, 7);
        assert_eq!(s.segments.len(), 2);
        assert_eq!(s.segments.iter().map(|s| s.area).sum::<usize>(), 2500);
    }

    #[test]
    fn convexity_of_l_shape() {
        // L-shape: 3x3 block minus the top-right 2x2 corner has 5 pixels
        let labels = vec![0, 1, 1, 0, 1, 1, 0, 0, 0];
        let seg = Segmentation {
            width: 3,
            height: 3,
            labels,
            segments: vec![],
        };
        // hull of the L is the 3x3 square minus a triangle of area 2
        assert!((seg.convexity(0) - 5.0 / 7.0).abs() < 1e-12);
    }

    #[test]
    fn luv_white_and_black() {
        let w = rgb_to_luv([1.0, 1.0, 1.0]);
        assert!((w[0] - 100.0).abs() < 1e-3 && w[1].abs() < 1e-2 && w[2].abs() < 1e-2);
        assert_eq!(rgb_to_luv([0.0, 0.0, 0.0]), [0.0, 0.0, 0.0]);
    }
}
