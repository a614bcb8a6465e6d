//! Character segmentation by projection profiles.
//!
//! Rows are trimmed with the vertical-edge profile (the character band is the
//! one with the largest area), then characters are split on zero runs of the
//! column ink profile and resampled to 20x20.

use serde::{Deserialize, Serialize};

use crate::error::{ConfigError, SegmentError};
use crate::glyph::{GlyphSample, GLYPH_SIDE};
use crate::image::{BinaryImage, BoundingBox};
use crate::locate::sobel_vertical_binary;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Axis {
    /// One count per row.
    Rows,
    /// One count per column.
    Columns,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Projection {
    pub axis: Axis,
    pub counts: Vec<u32>,
}

pub fn project(img: &BinaryImage, axis: Axis) -> Projection {
    let (w, h) = (img.width(), img.height());
    let counts = match axis {
        Axis::Rows => (0..h)
            .map(|y| (0..w).filter(|&x| img.get(x, y)).count() as u32)
            .collect(),
        Axis::Columns => {
            let mut c = vec![0u32; w];
            for y in 0..h {
                for (x, slot) in c.iter_mut().enumerate() {
                    *slot += u32::from(img.get(x, y));
                }
            }
            c
        }
    };
    Projection { axis, counts }
}

/// Maximal run of strictly positive projection counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Band {
    /// First index, inclusive.
    pub start: usize,
    /// Last index, inclusive.
    pub end: usize,
    pub width: usize,
    pub area: u64,
    pub peak: u32,
}

pub fn find_bands(p: &Projection) -> Vec<Band> {
    let mut bands = Vec::new();
    let mut open: Option<Band> = None;
    for (i, &c) in p.counts.iter().enumerate() {
        if c > 0 {
            let b = open.get_or_insert(Band {
                start: i,
                end: i,
                width: 0,
                area: 0,
                peak: 0,
            });
            b.end = i;
            b.width += 1;
            b.area += u64::from(c);
            b.peak = b.peak.max(c);
        } else if let Some(b) = open.take() {
            bands.push(b);
        }
    }
    bands.extend(open);
    bands
}

/// Picks the character band: largest area, then widest, then highest peak,
/// then topmost.
pub fn select_character_band(bands: &[Band]) -> Option<Band> {
    bands.iter().copied().reduce(|best, b| {
        let better = (b.area, b.width, b.peak) > (best.area, best.width, best.peak);
        if better {
            b
        } else {
            best
        }
    })
}

/// A plate trimmed to its character rows.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StrippedPlate {
    pub image: BinaryImage,
    /// Row band of the input plate that was kept.
    pub band: Band,
}

/// Removes rows above and below the character band.
pub fn strip_noise_rows(plate: &BinaryImage, edge_threshold: u8) -> Result<StrippedPlate, SegmentError> {
    let edges = sobel_vertical_binary(plate, edge_threshold)?;
    let profile = project(edges.image(), Axis::Rows);
    let band = select_character_band(&find_bands(&profile)).ok_or(SegmentError::EmptyPlate)?;
    let rows = BoundingBox::new(0, band.start, plate.width(), band.width);
    Ok(StrippedPlate {
        image: plate.crop(&rows)?,
        band,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SegmentConfig {
    pub min_char_width: usize,
    pub min_char_ink: u64,
    pub glyph_size: usize,
    /// Drop column bands touching the left or right edge of the plate crop.
    /// These are background slivers from a window that overlaps the plate
    /// frame, or characters the window has already cut.
    pub drop_edge_bands: bool,
}

impl Default for SegmentConfig {
    fn default() -> Self {
        Self {
            min_char_width: 3,
            min_char_ink: 10,
            glyph_size: GLYPH_SIDE,
            drop_edge_bands: true,
        }
    }
}

impl SegmentConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.glyph_size != GLYPH_SIDE {
            return Err(ConfigError::Invalid {
                field: "glyph_size",
                reason: format!("glyphs are always {GLYPH_SIDE} px"),
            });
        }
        if self.min_char_width == 0 || self.min_char_ink == 0 {
            return Err(ConfigError::Invalid {
                field: "min_char_width",
                reason: "character minimums must be at least 1".into(),
            });
        }
        Ok(())
    }
}

/// Splits a noise-stripped plate into character boxes, left to right.
pub fn split_characters(plate: &BinaryImage, cfg: &SegmentConfig) -> Vec<BoundingBox> {
    let profile = project(plate, Axis::Columns);
    find_bands(&profile)
        .into_iter()
        .filter(|b| b.width >= cfg.min_char_width && b.area >= cfg.min_char_ink)
        .filter(|b| !cfg.drop_edge_bands || (b.start > 0 && b.end + 1 < plate.width()))
        .map(|b| {
            let rows: Vec<usize> = (0..plate.height())
                .filter(|&y| (b.start..=b.end).any(|x| plate.get(x, y)))
                .collect();
            let top = rows[0];
            let bottom = rows[rows.len() - 1];
            BoundingBox::new(b.start, top, b.width, bottom - top + 1)
        })
        .collect()
}

/// Nearest-neighbour resample to exactly 20x20 (aspect ratio is not kept).
pub fn normalize_glyph(glyph: &BinaryImage, cfg: &SegmentConfig) -> Result<GlyphSample, SegmentError> {
    let (w, h) = (glyph.width(), glyph.height());
    if w == 0 || h == 0 {
        return Err(SegmentError::EmptyGlyph);
    }
    let n = cfg.glyph_size;
    // source index floor((i + 0.5) * len / n) in integer form
    let src = |i: usize, len: usize| ((2 * i + 1) * len) / (2 * n);
    Ok(GlyphSample::from_fn(None, |i, j| glyph.get(src(i, w), src(j, h))))
}
