//! Region adjacency graph over segments, threshold merging and normalized cuts.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use super::segment::{adjacent_pairs, Segmentation};

/// Colour scale in the edge weight `exp(-|dc|^2 / sigma^2)`, RGB in [0, 1].
pub const COLOR_SIGMA: f64 = 0.25;
/// Graphs up to this size get an exhaustive bipartition search.
pub const EXHAUSTIVE_MAX_NODES: usize = 12;
const MAX_CUT_DEPTH: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RagParams {
    pub merge_threshold: f64,
    pub ncut_stop: f64,
}

impl Default for RagParams {
    fn default() -> Self {
        RagParams {
            merge_threshold: 0.9,
            ncut_stop: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RagEdge {
    pub i: usize,
    pub j: usize,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionAdjacencyGraph {
    pub node_colors: Vec<[f64; 3]>,
    pub edges: Vec<RagEdge>,
    pub merged_count: usize,
    pub best_ncut: f64,
    pub cut_depth: usize,
}

impl RegionAdjacencyGraph {
    pub fn node_count(&self) -> usize {
        self.node_colors.len()
    }

    pub fn weight_matrix(&self) -> Vec<Vec<f64>> {
        weight_matrix(self.node_count(), &self.edges)
    }
}

pub fn edge_weight(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    let d2: f64 = (0..3).map(|c| (a[c] - b[c]).powi(2)).sum();
    (-d2 / (COLOR_SIGMA * COLOR_SIGMA)).exp()
}

fn weight_matrix(n: usize, edges: &[RagEdge]) -> Vec<Vec<f64>> {
    let mut w = vec![vec![0.0; n]; n];
    for e in edges {
        w[e.i][e.j] = e.weight;
        w[e.j][e.i] = e.weight;
    }
    w
}

/// Two-way normalized cut of `side` (true = A) on a dense weight matrix.
/// A side with zero association contributes nothing when its cut is zero.
pub fn ncut_value(w: &[Vec<f64>], side: &[bool]) -> f64 {
    let n = w.len();
    let (mut cut, mut assoc_a, mut assoc_b) = (0.0, 0.0, 0.0);
    for i in 0..n {
        for j in 0..n {
            let wij = w[i][j];
            if side[i] {
                assoc_a += wij;
                if !side[j] {
                    cut += wij;
                }
            } else {
                assoc_b += wij;
            }
        }
    }
    let term = |assoc: f64| if cut == 0.0 { 0.0 } else { cut / assoc };
    term(assoc_a) + term(assoc_b)
}

/// Minimum normalized cut over every non-trivial bipartition.
pub fn exhaustive_min_ncut(w: &[Vec<f64>]) -> (f64, Vec<bool>) {
    let n = w.len();
    assert!(n >= 2 && n <= 24, "exhaustive search is for small graphs");
    let mut best = (f64::INFINITY, vec![false; n]);
    // node n-1 stays on side B so each bipartition is visited once
    for mask in 1u32..(1u32 << (n - 1)) {
        let side: Vec<bool> = (0..n).map(|i| mask >> i & 1 == 1).collect();
        let v = ncut_value(w, &side);
        if v < best.0 {
            best = (v, side);
        }
    }
    best
}

/// Sweep cuts along the Fiedler vector of the normalized Laplacian.
pub fn fiedler_sweep_ncut(w: &[Vec<f64>]) -> (f64, Vec<bool>) {
    let n = w.len();
    let deg: Vec<f64> = w.iter().map(|r| r.iter().sum::<f64>().max(1e-12)).collect();
    let lap = DMatrix::from_fn(n, n, |i, j| {
        let delta = if i == j { 1.0 } else { 0.0 };
        delta - w[i][j] / (deg[i] * deg[j]).sqrt()
    });
    let eig = SymmetricEigen::new(lap);
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]).then(a.cmp(&b)));
    let v = eig.eigenvectors.column(idx[1]);
    let y: Vec<f64> = (0..n).map(|i| v[i] / deg[i].sqrt()).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| y[a].total_cmp(&y[b]).then(a.cmp(&b)));
    let mut best = (f64::INFINITY, vec![false; n]);
    let mut side = vec![false; n];
    for &node in &order[..n - 1] {
        side[node] = true;
        let val = ncut_value(w, &side);
        if val < best.0 {
            best = (val, side.clone());
        }
    }
    best
}

/// Best two-way Ncut; fewer than two nodes has no cut and scores 2.
pub fn best_ncut(w: &[Vec<f64>]) -> (f64, Vec<bool>) {
    match w.len() {
        0 | 1 => (2.0, vec![false; w.len()]),
        n if n <= EXHAUSTIVE_MAX_NODES => exhaustive_min_ncut(w),
        _ => fiedler_sweep_ncut(w),
    }
}

fn subgraph(w: &[Vec<f64>], keep: &[usize]) -> Vec<Vec<f64>> {
    keep.iter().map(|&i| keep.iter().map(|&j| w[i][j]).collect()).collect()
}

fn cut_depth(w: &[Vec<f64>], stop: f64, depth: usize) -> usize {
    if w.len() < 2 || depth >= MAX_CUT_DEPTH {
        return 0;
    }
    let (val, side) = best_ncut(w);
    if val > stop {
        return 0;
    }
    let a: Vec<usize> = (0..w.len()).filter(|&i| side[i]).collect();
    let b: Vec<usize> = (0..w.len()).filter(|&i| !side[i]).collect();
    1 + cut_depth(&subgraph(w, &a), stop, depth + 1).max(cut_depth(&subgraph(w, &b), stop, depth + 1))
}

fn find(parent: &mut [usize], mut x: usize) -> usize {
    while parent[x] != x {
        parent[x] = parent[parent[x]];
        x = parent[x];
    }
    x
}

/// Contracts every edge heavier than `threshold`; returns the component count.
pub fn threshold_merge_count(n: usize, edges: &[RagEdge], threshold: f64) -> usize {
    let mut parent: Vec<usize> = (0..n).collect();
    let mut count = n;
    for e in edges.iter().filter(|e| e.weight > threshold) {
        let (a, b) = (find(&mut parent, e.i), find(&mut parent, e.j));
        if a != b {
            parent[a.max(b)] = a.min(b);
            count -= 1;
        }
    }
    count
}

/// Builds the graph from explicit node colours and adjacency pairs.
pub fn rag_from_parts(node_colors: Vec<[f64; 3]>, pairs: impl IntoIterator<Item = (usize, usize)>, params: RagParams) -> RegionAdjacencyGraph {
    let mut dedup = BTreeMap::new();
    for (a, b) in pairs {
        if a != b {
            dedup.insert((a.min(b), a.max(b)), ());
        }
    }
    let edges: Vec<RagEdge> = dedup
        .into_keys()
        .map(|(i, j)| RagEdge {
            i,
            j,
            weight: edge_weight(&node_colors[i], &node_colors[j]).max(f64::MIN_POSITIVE),
        })
        .collect();
    let n = node_colors.len();
    let w = weight_matrix(n, &edges);
    RegionAdjacencyGraph {
        merged_count: threshold_merge_count(n, &edges, params.merge_threshold),
        best_ncut: best_ncut(&w).0,
        cut_depth: cut_depth(&w, params.ncut_stop, 0),
        node_colors,
        edges,
    }
}

pub fn build_rag(seg: &Segmentation, params: RagParams) -> RegionAdjacencyGraph {
    let colors = seg.segments.iter().map(|s| s.mean_rgb).collect();
    rag_from_parts(colors, adjacent_pairs(&seg.labels, seg.width, seg.height), params)
}
