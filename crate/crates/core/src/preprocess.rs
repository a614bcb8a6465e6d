//! Preprocessing chain: grayscale, bilateral denoise, CLAHE, binarize, dilate.
//!
//! Every stage is a standalone pure function so it can be checked against a
//! brute-force reference; [`preprocess`] simply composes them.

use serde::{Deserialize, Serialize};

use crate::error::ConfigError;
use crate::image::{AnyImage, BinaryImage, GrayImage, Polarity, RgbImage};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreprocessConfig {
    /// Side of the square bilateral window; odd and at least 3.
    pub bilateral_kernel: usize,
    pub bilateral_sigma_space: f64,
    pub bilateral_sigma_range: f64,
    /// CLAHE tile side in pixels.
    pub clahe_tile: usize,
    /// Histogram clip limit as a multiple of the mean bin height.
    pub clahe_clip: f64,
    pub binarize_threshold: u8,
    pub dilate_radius: usize,
    pub dilate_iterations: usize,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        Self {
            bilateral_kernel: 5,
            bilateral_sigma_space: 2.0,
            bilateral_sigma_range: 50.0,
            clahe_tile: 8,
            clahe_clip: 2.0,
            binarize_threshold: 128,
            dilate_radius: 1,
            dilate_iterations: 1,
        }
    }
}

impl PreprocessConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |field, reason: &str| {
            Err(ConfigError::Invalid {
                field,
                reason: reason.to_string(),
            })
        };
        if self.bilateral_kernel < 3 || self.bilateral_kernel.is_multiple_of(2) {
            return bad("bilateral_kernel", "must be odd and at least 3");
        }
        if !(self.bilateral_sigma_space > 0.0 && self.bilateral_sigma_space.is_finite()) {
            return bad("bilateral_sigma_space", "must be positive");
        }
        if !(self.bilateral_sigma_range > 0.0 && self.bilateral_sigma_range.is_finite()) {
            return bad("bilateral_sigma_range", "must be positive");
        }
        if self.clahe_tile < 2 {
            return bad("clahe_tile", "must be at least 2");
        }
        if self.clahe_clip.is_nan() || self.clahe_clip < 1.0 {
            return bad("clahe_clip", "must be at least 1");
        }
        if self.dilate_radius < 1 {
            return bad("dilate_radius", "must be at least 1");
        }
        Ok(())
    }
}

/// ITU-R 601 luma, rounded.
pub fn to_grayscale(img: &RgbImage) -> GrayImage {
    let data = img
        .pixels()
        .map(|[r, g, b]| {
            let y = 0.299 * f64::from(r) + 0.587 * f64::from(g) + 0.114 * f64::from(b);
            y.round().clamp(0.0, 255.0) as u8
        })
        .collect();
    GrayImage::new(img.width(), img.height(), data).expect("same dimensions")
}

/// Edge-preserving smoothing over a `k x k` window with clamped borders.
pub fn bilateral_filter(img: &GrayImage, cfg: &PreprocessConfig) -> GrayImage {
    let k = cfg.bilateral_kernel;
    let half = (k / 2) as isize;
    let ss = cfg.bilateral_sigma_space;
    let sr = cfg.bilateral_sigma_range;

    let mut spatial = Vec::with_capacity(k * k);
    for dy in -half..=half {
        for dx in -half..=half {
            let d2 = (dx * dx + dy * dy) as f64;
            spatial.push((-d2 / (2.0 * ss * ss)).exp());
        }
    }
    let range: Vec<f64> = (0..256)
        .map(|d: i32| (-f64::from(d * d) / (2.0 * sr * sr)).exp())
        .collect();

    let (w, h) = (img.width() as isize, img.height() as isize);
    let src = img.data();
    let mut out = Vec::with_capacity(src.len());
    for y in 0..h {
        for x in 0..w {
            let center = src[(y * w + x) as usize];
            let mut acc = 0.0;
            let mut norm = 0.0;
            let mut si = 0;
            for dy in -half..=half {
                let qy = (y + dy).clamp(0, h - 1);
                let row = &src[(qy * w) as usize..((qy + 1) * w) as usize];
                for dx in -half..=half {
                    let q = row[(x + dx).clamp(0, w - 1) as usize];
                    let weight = spatial[si] * range[usize::from(center.abs_diff(q))];
                    acc += weight * f64::from(q);
                    norm += weight;
                    si += 1;
                }
            }
            out.push((acc / norm).round().clamp(0.0, 255.0) as u8);
        }
    }
    GrayImage::new(img.width(), img.height(), out).expect("same dimensions")
}

/// Per-tile gray-level mapping for CLAHE. Public so tests can inspect it.
pub fn clahe_tile_mapping(values: &[u8], clip: f64) -> [u8; 256] {
    let mut identity = [0u8; 256];
    for (v, m) in identity.iter_mut().enumerate() {
        *m = v as u8;
    }
    if values.iter().all(|&v| v == values[0]) {
        return identity;
    }
    let n = values.len() as f64;
    let mut hist = [0.0f64; 256];
    for &v in values {
        hist[usize::from(v)] += 1.0;
    }
    let limit = clip * n / 256.0;
    let mut excess = 0.0;
    for bin in hist.iter_mut() {
        if *bin > limit {
            excess += *bin - limit;
            *bin = limit;
        }
    }
    let share = excess / 256.0;
    let mut cdf = [0.0f64; 256];
    let mut run = 0.0;
    for (c, bin) in cdf.iter_mut().zip(hist.iter()) {
        run += bin + share;
        *c = run;
    }
    let cdf_min = cdf.iter().copied().find(|&c| c > 0.0).unwrap_or(0.0);
    let denom = n - cdf_min;
    if denom <= 0.0 {
        return identity;
    }
    let mut map = [0u8; 256];
    for (m, c) in map.iter_mut().zip(cdf.iter()) {
        *m = ((c - cdf_min) / denom * 255.0).round().clamp(0.0, 255.0) as u8;
    }
    map
}

/// Locates the two tile centres bracketing coordinate `p` along one axis.
/// Returns `(lower tile, upper tile, offset)` with the offset in units of
/// `1 / (2 * tile)` of a tile spacing.
fn bracket(p: usize, tile: usize, tiles: usize) -> (usize, usize, usize) {
    let span = 2 * tile as isize;
    let d = 2 * p as isize + 1 - tile as isize;
    if d < 0 {
        return (0, 0, 0);
    }
    let i0 = (d / span) as usize;
    if i0 >= tiles - 1 {
        return (tiles - 1, tiles - 1, 0);
    }
    (i0, i0 + 1, (d - i0 as isize * span) as usize)
}

/// Contrast-limited adaptive histogram equalization.
///
/// The image is padded by edge replication to whole tiles; each tile gets a
/// clipped-histogram equalization map and output pixels blend the maps of
/// the four nearest tile centres bilinearly.
pub fn clahe(img: &GrayImage, cfg: &PreprocessConfig) -> GrayImage {
    let t = cfg.clahe_tile;
    let (w, h) = (img.width(), img.height());
    let tx = w.div_ceil(t);
    let ty = h.div_ceil(t);

    let mut maps = Vec::with_capacity(tx * ty);
    let mut buf = Vec::with_capacity(t * t);
    for j in 0..ty {
        for i in 0..tx {
            buf.clear();
            for y in j * t..(j + 1) * t {
                for x in i * t..(i + 1) * t {
                    buf.push(img.get(x.min(w - 1), y.min(h - 1)));
                }
            }
            maps.push(clahe_tile_mapping(&buf, cfg.clahe_clip));
        }
    }

    let span = (2 * t) as u64;
    let denom = span * span;
    let cols: Vec<_> = (0..w).map(|x| bracket(x, t, tx)).collect();
    let mut out = Vec::with_capacity(w * h);
    for y in 0..h {
        let (j0, j1, ry) = bracket(y, t, ty);
        let ry = ry as u64;
        for (x, &(i0, i1, rx)) in cols.iter().enumerate() {
            let v = usize::from(img.get(x, y));
            let rx = rx as u64;
            let m = |i: usize, j: usize| u64::from(maps[j * tx + i][v]);
            let top = (span - rx) * m(i0, j0) + rx * m(i1, j0);
            let bottom = (span - rx) * m(i0, j1) + rx * m(i1, j1);
            let num = (span - ry) * top + ry * bottom;
            out.push(((num + denom / 2) / denom).min(255) as u8);
        }
    }
    GrayImage::new(w, h, out).expect("same dimensions")
}

/// Pixels darker than `threshold` become ink; everything else is background.
pub fn binarize(img: &GrayImage, threshold: u8) -> BinaryImage {
    let bits = img.data().iter().map(|&v| v < threshold).collect();
    BinaryImage::new(img.width(), img.height(), bits, Polarity::Ink).expect("same dimensions")
}

fn dilate_once(bits: &[bool], w: usize, h: usize, r: usize) -> Vec<bool> {
    // square element = horizontal pass followed by vertical pass
    let mut horiz = vec![false; w * h];
    for y in 0..h {
        let row = &bits[y * w..(y + 1) * w];
        let mut count = row[..r.min(w - 1) + 1].iter().filter(|&&b| b).count();
        for x in 0..w {
            horiz[y * w + x] = count > 0;
            if x + r + 1 < w && row[x + r + 1] {
                count += 1;
            }
            if x >= r && row[x - r] {
                count -= 1;
            }
        }
    }
    let mut out = vec![false; w * h];
    for x in 0..w {
        let mut count = (0..=r.min(h - 1)).filter(|&y| horiz[y * w + x]).count();
        for y in 0..h {
            out[y * w + x] = count > 0;
            if y + r + 1 < h && horiz[(y + r + 1) * w + x] {
                count += 1;
            }
            if y >= r && horiz[(y - r) * w + x] {
                count -= 1;
            }
        }
    }
    out
}

/// Binary dilation with a `(2r+1) x (2r+1)` square, repeated `iterations` times.
/// The neighbourhood is clipped at the image border.
pub fn dilate(img: &BinaryImage, radius: usize, iterations: usize) -> BinaryImage {
    let (w, h) = (img.width(), img.height());
    let mut bits = img.bits().to_vec();
    for _ in 0..iterations {
        bits = dilate_once(&bits, w, h, radius);
    }
    BinaryImage::new(w, h, bits, img.polarity()).expect("same dimensions")
}

/// Binary erosion with the same square element (outside the image counts as clear).
pub fn erode(img: &BinaryImage, radius: usize) -> BinaryImage {
    let (w, h) = (img.width() as isize, img.height() as isize);
    let r = radius as isize;
    BinaryImage::from_fn(img.width(), img.height(), img.polarity(), |x, y| {
        let (x, y) = (x as isize, y as isize);
        (-r..=r).all(|dy| {
            (-r..=r).all(|dx| {
                let (qx, qy) = (x + dx, y + dy);
                qx >= 0 && qy >= 0 && qx < w && qy < h && img.get(qx as usize, qy as usize)
            })
        })
    })
}

/// Runs the full chain and returns `(binary, dilated)`.
pub fn preprocess(img: &AnyImage, cfg: &PreprocessConfig) -> Result<(BinaryImage, BinaryImage), ConfigError> {
    cfg.validate()?;
    let gray = match img {
        AnyImage::Rgb(rgb) => to_grayscale(rgb),
        AnyImage::Gray(g) => g.clone(),
        AnyImage::Binary(b) => b.to_gray(),
    };
    let smoothed = bilateral_filter(&gray, cfg);
    let equalized = clahe(&smoothed, cfg);
    let binary = binarize(&equalized, cfg.binarize_threshold);
    let dilated = dilate(&binary, cfg.dilate_radius, cfg.dilate_iterations);
    Ok((binary, dilated))
}
