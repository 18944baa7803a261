//! Orthonormal 2-D Haar decomposition.

use super::AestheticsError;

/// Row-major 2-D array of reals.
#[derive(Debug, Clone, PartialEq)]
pub struct Plane {
    pub width: usize,
    pub height: usize,
    pub data: Vec<f64>,
}

impl Plane {
    pub fn new(width: usize, height: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), width * height, "plane data length");
        Plane { width, height, data }
    }

    pub fn zeros(width: usize, height: usize) -> Self {
        Plane::new(width, height, vec![0.0; width * height])
    }

    pub fn at(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }

    pub fn energy(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum()
    }

    /// Edge-replicating pad up to the next multiple of `m` in each direction.
    pub fn padded_to_multiple(&self, m: usize) -> Plane {
        let w = self.width.div_ceil(m) * m;
        let h = self.height.div_ceil(m) * m;
        if w == self.width && h == self.height {
            return self.clone();
        }
        let mut data = Vec::with_capacity(w * h);
        for y in 0..h {
            let sy = y.min(self.height - 1);
            for x in 0..w {
                data.push(self.at(x.min(self.width - 1), sy));
            }
        }
        Plane::new(w, h, data)
    }
}

/// Sub-bands produced by one decomposition level.
#[derive(Debug, Clone, PartialEq)]
pub struct WaveletLevel {
    pub ll: Plane,
    pub lh: Plane,
    pub hl: Plane,
    pub hh: Plane,
}

impl WaveletLevel {
    pub fn detail_energy(&self) -> f64 {
        self.lh.energy() + self.hl.energy() + self.hh.energy()
    }
}

/// `levels[0]` is the finest level; the final approximation is `levels.last().ll`.
#[derive(Debug, Clone, PartialEq)]
pub struct WaveletDecomposition {
    pub levels: Vec<WaveletLevel>,
}

impl WaveletDecomposition {
    pub fn approximation(&self) -> &Plane {
        &self.levels.last().expect("at least one level").ll
    }

    /// Energy of the final approximation plus every detail band.
    pub fn energy(&self) -> f64 {
        self.approximation().energy() + self.levels.iter().map(WaveletLevel::detail_energy).sum::<f64>()
    }
}

fn split(p: &Plane) -> WaveletLevel {
    let (w, h) = (p.width / 2, p.height / 2);
    let mut ll = Plane::zeros(w, h);
    let mut lh = Plane::zeros(w, h);
    let mut hl = Plane::zeros(w, h);
    let mut hh = Plane::zeros(w, h);
    for y in 0..h {
        for x in 0..w {
            let a = p.at(2 * x, 2 * y);
            let b = p.at(2 * x + 1, 2 * y);
            let c = p.at(2 * x, 2 * y + 1);
            let d = p.at(2 * x + 1, 2 * y + 1);
            let i = y * w + x;
            ll.data[i] = 0.5 * (a + b + c + d);
            lh.data[i] = 0.5 * (a + b - c - d);
            hl.data[i] = 0.5 * (a - b + c - d);
            hh.data[i] = 0.5 * (a - b - c + d);
        }
    }
    WaveletLevel { ll, lh, hl, hh }
}

fn merge(ll: &Plane, lh: &Plane, hl: &Plane, hh: &Plane) -> Plane {
    let (w, h) = (ll.width, ll.height);
    let mut out = Plane::zeros(2 * w, 2 * h);
    let ow = 2 * w;
    for y in 0..h {
        for x in 0..w {
            let i = y * w + x;
            let (s, v, u, t) = (ll.data[i], lh.data[i], hl.data[i], hh.data[i]);
            out.data[2 * y * ow + 2 * x] = 0.5 * (s + v + u + t);
            out.data[2 * y * ow + 2 * x + 1] = 0.5 * (s + v - u - t);
            out.data[(2 * y + 1) * ow + 2 * x] = 0.5 * (s - v + u - t);
            out.data[(2 * y + 1) * ow + 2 * x + 1] = 0.5 * (s - v - u + t);
        }
    }
    out
}

/// Multi-level Haar decomposition. Dimensions that are not multiples of
/// `2^levels` are padded by edge replication first.
pub fn wavelet_decompose(channel: &Plane, levels: usize) -> Result<WaveletDecomposition, AestheticsError> {
    let block = 1usize << levels;
    if levels == 0 || channel.width < block || channel.height < block {
        return Err(AestheticsError::TooSmall {
            width: channel.width,
            height: channel.height,
            min: block,
        });
    }
    let mut current = channel.padded_to_multiple(block);
    let mut out = Vec::with_capacity(levels);
    for _ in 0..levels {
        let lvl = split(&current);
        current = lvl.ll.clone();
        out.push(lvl);
    }
    Ok(WaveletDecomposition { levels: out })
}

/// Inverse of [`wavelet_decompose`] (on the padded grid).
pub fn wavelet_reconstruct(dec: &WaveletDecomposition) -> Plane {
    let mut current = dec.approximation().clone();
    for lvl in dec.levels.iter().rev() {
        current = merge(&current, &lvl.lh, &lvl.hl, &lvl.hh);
    }
    current
}
