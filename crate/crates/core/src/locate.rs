//! Plate localization: vertical-edge map plus a sliding-window search for the
//! rectangle with the highest edge density.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::error::{ConfigError, LocateError};
use crate::image::{BinaryImage, BoundingBox, GrayImage, Polarity};

/// Binary map of vertical-edge responses (polarity [`Polarity::Edge`]).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EdgeMap(BinaryImage);

impl EdgeMap {
    pub fn new(bits: BinaryImage) -> Self {
        assert_eq!(bits.polarity(), Polarity::Edge, "edge map needs edge polarity");
        Self(bits)
    }

    pub fn image(&self) -> &BinaryImage {
        &self.0
    }

    pub fn into_image(self) -> BinaryImage {
        self.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocateConfig {
    /// Threshold on `|Gx| / 4`.
    pub edge_threshold: u8,
    /// Candidate window widths as fractions of the image width.
    pub window_width_fracs: Vec<f64>,
    /// Window width / height.
    pub plate_aspect: f64,
    pub stride: usize,
}

impl Default for LocateConfig {
    fn default() -> Self {
        Self {
            edge_threshold: 128,
            window_width_fracs: vec![0.25, 0.33, 0.45],
            plate_aspect: 4.6,
            stride: 4,
        }
    }
}

impl LocateConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.window_width_fracs.is_empty() || self.window_width_fracs.iter().any(|f| !(*f > 0.0 && *f <= 1.0)) {
            return Err(ConfigError::Invalid {
                field: "window_width_fracs",
                reason: "need at least one fraction, each in (0, 1]".into(),
            });
        }
        if !(self.plate_aspect > 1.0 && self.plate_aspect.is_finite()) {
            return Err(ConfigError::Invalid {
                field: "plate_aspect",
                reason: "must be greater than 1".into(),
            });
        }
        if self.stride == 0 {
            return Err(ConfigError::Invalid {
                field: "stride",
                reason: "must be at least 1".into(),
            });
        }
        Ok(())
    }
}

/// Horizontal-gradient Sobel response, thresholded.
///
/// `m = round(|Gx| / 4)`; a bit is set iff `m >= edge_threshold`. The
/// one-pixel frame is never set.
pub fn sobel_vertical(img: &GrayImage, edge_threshold: u8) -> Result<EdgeMap, LocateError> {
    let (w, h) = (img.width(), img.height());
    if w < 3 || h < 3 {
        return Err(LocateError::TooSmall { width: w, height: h });
    }
    let src = img.data();
    let px = |x: usize, y: usize| i32::from(src[y * w + x]);
    let mut bits = vec![false; w * h];
    for y in 1..h - 1 {
        for x in 1..w - 1 {
            let gx = (px(x + 1, y - 1) - px(x - 1, y - 1))
                + 2 * (px(x + 1, y) - px(x - 1, y))
                + (px(x + 1, y + 1) - px(x - 1, y + 1));
            let m = (gx.unsigned_abs() + 2) / 4;
            bits[y * w + x] = m >= u32::from(edge_threshold);
        }
    }
    Ok(EdgeMap(
        BinaryImage::new(w, h, bits, Polarity::Edge).expect("same dimensions"),
    ))
}

/// [`sobel_vertical`] on a binary image promoted to a 0/255 gray image.
pub fn sobel_vertical_binary(img: &BinaryImage, edge_threshold: u8) -> Result<EdgeMap, LocateError> {
    sobel_vertical(&img.to_gray(), edge_threshold)
}

/// Summed-area table over the set bits of a binary image.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IntegralImage {
    width: usize,
    height: usize,
    table: Vec<u32>,
}

impl IntegralImage {
    /// `S(x, y)`: set bits in `[0, x) x [0, y)`.
    pub fn at(&self, x: usize, y: usize) -> u32 {
        self.table[y * (self.width + 1) + x]
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn total(&self) -> u32 {
        self.at(self.width, self.height)
    }

    pub fn window_count(&self, b: &BoundingBox) -> u32 {
        let (x1, y1) = (b.right(), b.bottom());
        self.at(x1, y1) + self.at(b.x, b.y) - self.at(b.x, y1) - self.at(x1, b.y)
    }
}

pub fn integral(img: &BinaryImage) -> IntegralImage {
    let (w, h) = (img.width(), img.height());
    let stride = w + 1;
    let mut table = vec![0u32; stride * (h + 1)];
    for y in 0..h {
        let mut row_sum = 0u32;
        for x in 0..w {
            row_sum += u32::from(img.get(x, y));
            table[(y + 1) * stride + x + 1] = table[y * stride + x + 1] + row_sum;
        }
    }
    IntegralImage {
        width: w,
        height: h,
        table,
    }
}

/// Window sizes actually scanned for an image of the given dimensions.
pub fn window_sizes(cfg: &LocateConfig, width: usize, height: usize) -> Vec<(usize, usize)> {
    let mut sizes: Vec<(usize, usize)> = cfg
        .window_width_fracs
        .iter()
        .filter_map(|f| {
            let w = (f * width as f64).round() as usize;
            let h = (w as f64 / cfg.plate_aspect).round() as usize;
            (w >= 1 && h >= 1 && w <= width && h <= height).then_some((w, h))
        })
        .collect();
    sizes.dedup();
    sizes
}

#[derive(Debug, Clone, Copy)]
struct Candidate {
    bbox: BoundingBox,
    count: u32,
}

/// Total order where `Greater` means "better": higher density, then smaller
/// y, then smaller x, then smaller area.
fn rank(a: &Candidate, b: &Candidate) -> Ordering {
    let da = u64::from(a.count) * b.bbox.area() as u64;
    let db = u64::from(b.count) * a.bbox.area() as u64;
    da.cmp(&db)
        .then_with(|| b.bbox.y.cmp(&a.bbox.y))
        .then_with(|| b.bbox.x.cmp(&a.bbox.x))
        .then_with(|| b.bbox.area().cmp(&a.bbox.area()))
}

/// Slides each configured window over the edge map and returns the box with
/// the highest edge density.
pub fn locate_plate(edges: &EdgeMap, cfg: &LocateConfig) -> Result<BoundingBox, LocateError> {
    cfg.validate()?;
    let img = edges.image();
    let sat = integral(img);
    if sat.total() == 0 {
        return Err(LocateError::NoEdges);
    }
    let (iw, ih) = (img.width(), img.height());
    let mut best: Option<Candidate> = None;
    for (w, h) in window_sizes(cfg, iw, ih) {
        for y in (0..=ih - h).step_by(cfg.stride) {
            for x in (0..=iw - w).step_by(cfg.stride) {
                let bbox = BoundingBox::new(x, y, w, h);
                let cand = Candidate {
                    bbox,
                    count: sat.window_count(&bbox),
                };
                if best.is_none_or(|b| rank(&cand, &b) == Ordering::Greater) {
                    best = Some(cand);
                }
            }
        }
    }
    best.map(|c| c.bbox).ok_or(LocateError::NoEdges)
}

/// Crops the plate from the dilated ink image.
pub fn extract_plate(dilated: &BinaryImage, bbox: &BoundingBox) -> Result<BinaryImage, LocateError> {
    Ok(dilated.crop(bbox)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn edge_map(w: usize, h: usize, f: impl FnMut(usize, usize) -> bool) -> EdgeMap {
        EdgeMap::new(BinaryImage::from_fn(w, h, Polarity::Edge, f))
    }

    #[test]
    fn uniform_has_no_edges() {
        let e = sobel_vertical(&GrayImage::filled(8, 8, 90), 128).unwrap();
        assert_eq!(e.image().count_set(), 0);
    }

    #[test]
    fn vertical_step_marks_both_columns() {
        let img = GrayImage::from_fn(8, 6, |x, _| if x <= 3 { 0 } else { 255 });
        let e = sobel_vertical(&img, 128).unwrap();
        for y in 0..6 {
            for x in 0..8 {
                let interior = (1..=4).contains(&y);
                assert_eq!(e.image().get(x, y), interior && (x == 3 || x == 4), "({x},{y})");
            }
        }
    }

    #[test]
    fn horizontal_step_vanishes() {
        let img = GrayImage::from_fn(8, 6, |_, y| if y < 3 { 0 } else { 255 });
        assert_eq!(sobel_vertical(&img, 128).unwrap().image().count_set(), 0);
        let img = GrayImage::from_fn(8, 6, |_, y| if y < 3 { 0 } else { 255 });
        assert_eq!(sobel_vertical(&img, 1).unwrap().image().count_set(), 0);
    }

    #[test]
    fn too_small_for_kernel() {
        assert!(matches!(
            sobel_vertical(&GrayImage::filled(2, 5, 0), 128),
            Err(LocateError::TooSmall { .. })
        ));
    }

    #[test]
    fn integral_small_cases() {
        let sat = integral(&BinaryImage::cleared(3, 4, Polarity::Edge));
        assert!(sat.table.iter().all(|&v| v == 0));
        let sat = integral(&BinaryImage::from_fn(2, 2, Polarity::Edge, |_, _| true));
        assert_eq!(sat.at(2, 2), 4);
        assert_eq!(sat.at(1, 1), 1);
        assert_eq!(sat.at(0, 2), 0);
    }

    #[test]
    fn window_counts_match_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(64);
        let img = BinaryImage::from_fn(64, 64, Polarity::Edge, |_, _| rng.random_bool(0.3));
        let sat = integral(&img);
        for _ in 0..1000 {
            let x = rng.random_range(0..64);
            let y = rng.random_range(0..64);
            let w = rng.random_range(0..=64 - x);
            let h = rng.random_range(0..=64 - y);
            let b = BoundingBox::new(x, y, w, h);
            let brute = (y..y + h)
                .flat_map(|yy| (x..x + w).map(move |xx| (xx, yy)))
                .filter(|&(xx, yy)| img.get(xx, yy))
                .count() as u32;
            assert_eq!(sat.window_count(&b), brute);
        }
    }

    #[test]
    fn unique_dense_region_wins() {
        let cfg = LocateConfig {
            window_width_fracs: vec![0.25],
            plate_aspect: 4.0,
            stride: 4,
            ..LocateConfig::default()
        };
        // 160 wide -> window 40x10
        let e = edge_map(160, 80, |x, y| (48..88).contains(&x) && (20..30).contains(&y));
        assert_eq!(locate_plate(&e, &cfg).unwrap(), BoundingBox::new(48, 20, 40, 10));
    }

    #[test]
    fn dense_cluster_beats_sparse_noise() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let cluster = BoundingBox::new(70, 50, 40, 10);
        let e = edge_map(200, 120, |x, y| {
            if cluster.contains(x, y) {
                rng.random_bool(0.7)
            } else {
                rng.random_bool(0.03)
            }
        });
        let cfg = LocateConfig {
            window_width_fracs: vec![0.25],
            plate_aspect: 5.0,
            stride: 1,
            ..LocateConfig::default()
        };
        let found = locate_plate(&e, &cfg).unwrap();
        let overlap = found.intersection(&cluster).map_or(0, |b| b.area());
        assert!(overlap * 10 >= cluster.area() * 8, "{found:?}");
    }

    #[test]
    fn all_clear_is_no_edges() {
        let e = edge_map(50, 40, |_, _| false);
        assert!(matches!(
            locate_plate(&e, &LocateConfig::default()),
            Err(LocateError::NoEdges)
        ));
    }

    #[test]
    fn ties_prefer_top_left() {
        let e = edge_map(40, 20, |_, _| true);
        let cfg = LocateConfig {
            window_width_fracs: vec![0.5],
            plate_aspect: 2.0,
            stride: 1,
            ..LocateConfig::default()
        };
        assert_eq!(locate_plate(&e, &cfg).unwrap(), BoundingBox::new(0, 0, 20, 10));
    }

    #[test]
    fn extract_is_crop() {
        let img = BinaryImage::from_fn(9, 7, Polarity::Ink, |x, y| (x ^ y) & 1 == 0);
        let b = BoundingBox::new(2, 1, 5, 4);
        assert_eq!(extract_plate(&img, &b).unwrap(), img.crop(&b).unwrap());
        assert_eq!(extract_plate(&img, &BoundingBox::full(9, 7)).unwrap(), img);
        assert!(extract_plate(&img, &BoundingBox::new(5, 5, 5, 5)).is_err());
    }

    proptest! {
        #[test]
        fn row_only_images_have_no_vertical_edges(profile in proptest::collection::vec(any::<u8>(), 3..30), w in 3usize..30) {
            let img = GrayImage::from_fn(w, profile.len(), |_, y| profile[y]);
            prop_assert_eq!(sobel_vertical(&img, 1).unwrap().image().count_set(), 0);
        }

        #[test]
        fn locate_is_translation_consistent(seed in any::<u64>(), sx in 0usize..6, sy in 0usize..6) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let (dx, dy) = (sx * 4, sy * 4);
            let blob = BoundingBox::new(30, 30, 36, 10);
            let pattern: Vec<bool> = (0..blob.area()).map(|_| rng.random_bool(0.5)).collect();
            let draw = |ox: usize, oy: usize| {
                edge_map(200, 120, |x, y| {
                    x >= blob.x + ox && x < blob.right() + ox && y >= blob.y + oy && y < blob.bottom() + oy
                        && pattern[(y - blob.y - oy) * blob.w + (x - blob.x - ox)]
                })
            };
            let cfg = LocateConfig { window_width_fracs: vec![0.2], plate_aspect: 4.0, ..LocateConfig::default() };
            prop_assume!(draw(0, 0).image().count_set() > 0);
            let a = locate_plate(&draw(0, 0), &cfg).unwrap();
            let b = locate_plate(&draw(dx, dy), &cfg).unwrap();
            prop_assert_eq!(BoundingBox::new(a.x + dx, a.y + dy, a.w, a.h), b);
        }
    }
}
