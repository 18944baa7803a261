use image::ImageFormat;

use super::AestheticsError;

/// Longest side kept for feature extraction.
pub const MAX_SIDE: usize = 512;

/// Decoded RGB pixels in [0, 1] with the HSV view computed once.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageBuffer {
    width: usize,
    height: usize,
    rgb: Vec<[f64; 3]>,
    hsv: Vec<[f64; 3]>,
    source_width: usize,
    source_height: usize,
}

impl ImageBuffer {
    /// Builds a buffer from row-major RGB triples in [0, 1].
    pub fn from_rgb(width: usize, height: usize, rgb: Vec<[f64; 3]>) -> Result<Self, AestheticsError> {
        if width == 0 || height == 0 || rgb.len() != width * height {
            return Err(AestheticsError::BadDimensions { width, height });
        }
        let rgb: Vec<[f64; 3]> = rgb
            .into_iter()
            .map(|p| p.map(|c| if c.is_finite() { c.clamp(0.0, 1.0) } else { 0.0 }))
            .collect();
        let hsv = rgb.iter().map(|&p| rgb_to_hsv(p)).collect();
        Ok(ImageBuffer {
            width,
            height,
            rgb,
            hsv,
            source_width: width,
            source_height: height,
        })
    }

    pub fn from_fn(
        width: usize,
        height: usize,
        f: impl Fn(usize, usize) -> [f64; 3],
    ) -> Result<Self, AestheticsError> {
        let mut px = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                px.push(f(x, y));
            }
        }
        Self::from_rgb(width, height, px)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    /// Dimensions before any downscaling.
    pub fn source_dimensions(&self) -> (usize, usize) {
        (self.source_width, self.source_height)
    }

    pub fn rgb(&self) -> &[[f64; 3]] {
        &self.rgb
    }

    pub fn hsv(&self) -> &[[f64; 3]] {
        &self.hsv
    }

    pub fn pixel_count(&self) -> usize {
        self.width * self.height
    }

    /// Rec. 601 luma per pixel.
    pub fn luminance(&self) -> Vec<f64> {
        self.rgb.iter().map(|&p| luma(p)).collect()
    }

    /// Area-averaging resize so the long side is at most `max_side`.
    pub fn downscaled(&self, max_side: usize) -> ImageBuffer {
        let long = self.width.max(self.height);
        if long <= max_side {
            return self.clone();
        }
        let scale = max_side as f64 / long as f64;
        let nw = ((self.width as f64 * scale).round() as usize).max(1);
        let nh = ((self.height as f64 * scale).round() as usize).max(1);
        let xs = spans(self.width, nw);
        let ys = spans(self.height, nh);
        let mut out = Vec::with_capacity(nw * nh);
        for yspan in &ys {
            for xspan in &xs {
                let mut acc = [0.0; 3];
                let mut total = 0.0;
                for &(sy, wy) in yspan {
                    for &(sx, wx) in xspan {
                        let w = wx * wy;
                        let p = self.rgb[sy * self.width + sx];
                        for c in 0..3 {
                            acc[c] += w * p[c];
                        }
                        total += w;
                    }
                }
                out.push(acc.map(|v| v / total));
            }
        }
        let mut buf = ImageBuffer::from_rgb(nw, nh, out).expect("non-empty resize");
        buf.source_width = self.source_width;
        buf.source_height = self.source_height;
        buf
    }
}

/// For each destination cell, the source indices it covers and their overlap.
fn spans(src: usize, dst: usize) -> Vec<Vec<(usize, f64)>> {
    let ratio = src as f64 / dst as f64;
    (0..dst)
        .map(|i| {
            let start = i as f64 * ratio;
            let end = (i + 1) as f64 * ratio;
            let mut cells = Vec::new();
            let mut s = start.floor() as usize;
            while (s as f64) < end && s < src {
                let lo = start.max(s as f64);
                let hi = end.min(s as f64 + 1.0);
                if hi > lo {
                    cells.push((s, hi - lo));
                }
                s += 1;
            }
            cells
        })
        .collect()
}

pub(crate) fn luma(p: [f64; 3]) -> f64 {
    0.299 * p[0] + 0.587 * p[1] + 0.114 * p[2]
}

/// Standard RGB to HSV; hue in degrees [0, 360), zero for greys.
pub fn rgb_to_hsv([r, g, b]: [f64; 3]) -> [f64; 3] {
    let max = r.max(g).max(b);
    let min = r.min(g).min(b);
    let delta = max - min;
    let h = if delta == 0.0 {
        0.0
    } else if max == r {
        60.0 * ((g - b) / delta).rem_euclid(6.0)
    } else if max == g {
        60.0 * ((b - r) / delta + 2.0)
    } else {
        60.0 * ((r - g) / delta + 4.0)
    };
    let h = if h >= 360.0 { h - 360.0 } else { h };
    let s = if max == 0.0 { 0.0 } else { delta / max };
    [h, s, max]
}

pub fn hsv_to_rgb([h, s, v]: [f64; 3]) -> [f64; 3] {
    let c = v * s;
    let hp = (h / 60.0).rem_euclid(6.0);
    let x = c * (1.0 - (hp % 2.0 - 1.0).abs());
    let (r, g, b) = match hp as u32 {
        0 => (c, x, 0.0),
        1 => (x, c, 0.0),
        2 => (0.0, c, x),
        3 => (0.0, x, c),
        4 => (x, 0.0, c),
        _ => (c, 0.0, x),
    };
    let m = v - c;
    [r + m, g + m, b + m]
}

/// Decodes a PNG or JPEG payload and downscales it to the working size.
pub fn decode_image(bytes: &[u8]) -> Result<ImageBuffer, AestheticsError> {
    let format = image::guess_format(bytes).map_err(|_| AestheticsError::UnsupportedFormat)?;
    if !matches!(format, ImageFormat::Png | ImageFormat::Jpeg) {
        return Err(AestheticsError::UnsupportedFormat);
    }
    let img = image::load_from_memory_with_format(bytes, format)
        .map_err(|e| AestheticsError::Decode(e.to_string()))?
        .to_rgb8();
    let (w, h) = (img.width() as usize, img.height() as usize);
    let px: Vec<[f64; 3]> = img
        .pixels()
        .map(|p| [p[0] as f64 / 255.0, p[1] as f64 / 255.0, p[2] as f64 / 255.0])
        .collect();
    Ok(ImageBuffer::from_rgb(w, h, px)?.downscaled(MAX_SIDE))
}

/// Encodes a buffer as PNG (8 bits per channel).
pub fn encode_png(img: &ImageBuffer) -> Vec<u8> {
    let mut raw = Vec::with_capacity(img.pixel_count() * 3);
    for p in img.rgb() {
        for c in p {
            raw.push((c * 255.0).round().clamp(0.0, 255.0) as u8);
        }
    }
    let buf = image::RgbImage::from_raw(img.width() as u32, img.height() as u32, raw)
        .expect("buffer size matches");
    let mut out = std::io::Cursor::new(Vec::new());
    buf.write_to(&mut out, ImageFormat::Png).expect("in-memory PNG encode");
    out.into_inner()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hsv_roundtrip() {
        let mut state = 12345u64;
        let mut next = || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (state >> 11) as f64 / (1u64 << 53) as f64
        };
        for _ in 0..10_000 {
            let p = [next(), next(), next()];
            let back = hsv_to_rgb(rgb_to_hsv(p));
            for c in 0..3 {
                assert!((back[c] - p[c]).abs() < 1e-6);
            }
            let h = rgb_to_hsv(p)[0];
            assert!((0.0..360.0).contains(&h));
        }
    }

    #[test]
    fn red_png_decodes_to_pure_hue() {
        let img = ImageBuffer::from_fn(2, 2, |_, _| [1.0, 0.0, 0.0]).unwrap();
        let back = decode_image(&encode_png(&img)).unwrap();
        assert!(back.hsv().iter().all(|&p| p == [0.0, 1.0, 1.0]));
    }

    #[test]
    fn downscale_long_side() {
        let img = ImageBuffer::from_fn(1024, 512, |x, _| [(x % 2) as f64, 0.0, 0.0]).unwrap();
        let png = encode_png(&img);
        let d = decode_image(&png).unwrap();
        assert_eq!((d.width(), d.height()), (512, 256));
        assert_eq!(d.source_dimensions(), (1024, 512));
        // 2x2 blocks average alternating columns
        assert!(d.rgb().iter().all(|p| (p[0] - 0.5).abs() < 1e-12));
    }

    #[test]
    fn truncated_and_foreign_payloads() {
        let img = ImageBuffer::from_fn(16, 16, |x, y| [x as f64 / 16.0, y as f64 / 16.0, 0.5]).unwrap();
        let mut jpeg = std::io::Cursor::new(Vec::new());
        let raw: Vec<u8> = img
            .rgb()
            .iter()
            .flat_map(|p| p.map(|c| (c * 255.0) as u8))
            .collect();
        image::RgbImage::from_raw(16, 16, raw)
            .unwrap()
            .write_to(&mut jpeg, ImageFormat::Jpeg)
            .unwrap();
        let jpeg = jpeg.into_inner();
        assert!(decode_image(&jpeg).is_ok());
        assert!(matches!(
            decode_image(&jpeg[..jpeg.len() / 3]),
            Err(AestheticsError::Decode(_))
        ));
        assert!(matches!(
            decode_image(b"GIF89a......"),
            Err(AestheticsError::UnsupportedFormat)
        ));
        assert!(matches!(decode_image(b"hello"), Err(AestheticsError::UnsupportedFormat)));
    }
}
