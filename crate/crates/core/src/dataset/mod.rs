//! Synthetic training data: augmented glyphs from the bundled atlas, full
//! plate scenes with exact ground truth, train/validation/test splits and
//! rejection-threshold calibration.

mod atlas;
mod calibrate;
mod scene;
mod store;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use atlas::{GlyphAtlas, Symbol};
pub use calibrate::{calibrate_scores, calibrate_thresholds, CalibrationReport, ScoredGlyph};
pub use scene::{layout, render_scene, Placement, Scene, SceneSpec, SceneTruth, INK_GRAY, PLATE_GRAY};
pub use store::{
    format_truth, parse_truth, read_glyphs, read_scenes, write_glyphs, write_scene, SceneRecord, TruthFile,
};

use crate::classify::child_seed;
use crate::error::{ConfigError, DatasetError};
use crate::glyph::{GlyphSample, ALPHABET};
use crate::image::BinaryImage;
use crate::preprocess::dilate;
use crate::segment::{normalize_glyph, SegmentConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AugmentSpec {
    /// Maximum |dx| and |dy| of the random translation.
    pub shift: usize,
    /// Per-pixel flip probability.
    pub noise_p: f64,
    /// Probability of one extra 3x3 dilation.
    pub bold_p: f64,
    pub seed: u64,
}

impl Default for AugmentSpec {
    fn default() -> Self {
        Self {
            shift: 2,
            noise_p: 0.02,
            bold_p: 0.2,
            seed: 0,
        }
    }
}

impl AugmentSpec {
    /// No shift, no dilation, no noise.
    pub fn none() -> Self {
        Self {
            shift: 0,
            noise_p: 0.0,
            bold_p: 0.0,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        for (field, p) in [("noise_p", self.noise_p), ("bold_p", self.bold_p)] {
            if !(0.0..=1.0).contains(&p) {
                return Err(ConfigError::Invalid {
                    field,
                    reason: format!("probability {p} is outside [0, 1]"),
                });
            }
        }
        Ok(())
    }

    /// Generator seeded from `self.seed`.
    pub fn rng(&self) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.seed)
    }
}

/// Native-resolution result of augmentation, before resampling.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Augmented {
    pub image: BinaryImage,
    /// Pixels flipped by salt-and-pepper noise.
    pub flips: usize,
}

/// Shift within the frame (vacated pixels clear), maybe embolden, then flip
/// pixels independently with probability `noise_p`.
pub fn augment<R: Rng + ?Sized>(bitmap: &BinaryImage, aug: &AugmentSpec, rng: &mut R) -> Augmented {
    let s = aug.shift as i64;
    let dx = rng.random_range(-s..=s);
    let dy = rng.random_range(-s..=s);
    let (w, h) = (bitmap.width() as i64, bitmap.height() as i64);
    let mut img = BinaryImage::from_fn(bitmap.width(), bitmap.height(), bitmap.polarity(), |x, y| {
        let (sx, sy) = (x as i64 - dx, y as i64 - dy);
        sx >= 0 && sy >= 0 && sx < w && sy < h && bitmap.get(sx as usize, sy as usize)
    });
    if rng.random_bool(aug.bold_p) {
        img = dilate(&img, 1, 1);
    }
    let mut flips = 0;
    let img = BinaryImage::from_fn(img.width(), img.height(), img.polarity(), |x, y| {
        let flip = rng.random_bool(aug.noise_p);
        flips += usize::from(flip);
        img.get(x, y) ^ flip
    });
    Augmented { image: img, flips }
}

/// An augmented, normalized sample of `symbol`; specials come back unlabeled.
pub fn render_glyph<R: Rng + ?Sized>(
    atlas: &GlyphAtlas,
    symbol: Symbol,
    aug: &AugmentSpec,
    rng: &mut R,
) -> Result<GlyphSample, DatasetError> {
    aug.validate()?;
    let bitmap = atlas.get(symbol)?;
    let out = augment(bitmap, aug, rng);
    let g = normalize_glyph(&out.image, &SegmentConfig::default()).expect("atlas glyphs are nonempty");
    Ok(g.with_label(symbol.label()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitCounts {
    /// Samples per real class in each split.
    pub train: usize,
    pub validation: usize,
    pub test: usize,
    /// Samples of each special symbol in validation and in test.
    pub specials: usize,
}

impl Default for SplitCounts {
    fn default() -> Self {
        Self {
            train: 220,
            validation: 30,
            test: 100,
            specials: 60,
        }
    }
}

impl SplitCounts {
    /// Divides `n` samples per class 220 : 30 : 100.
    pub fn from_per_class(n: usize) -> Self {
        let train = n * 220 / 350;
        let validation = (n * 30 / 350).max(1);
        Self {
            train,
            validation,
            test: n.saturating_sub(train + validation),
            specials: 60,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabeledGlyph {
    /// Unique across all splits, e.g. `val-00042`.
    pub id: String,
    pub symbol: Symbol,
    pub glyph: GlyphSample,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct DatasetSplit {
    pub train: Vec<LabeledGlyph>,
    pub validation: Vec<LabeledGlyph>,
    pub test: Vec<LabeledGlyph>,
}

impl DatasetSplit {
    pub fn iter(&self) -> impl Iterator<Item = &LabeledGlyph> {
        self.train.iter().chain(&self.validation).chain(&self.test)
    }

    /// Labeled glyphs of the real symbols in one split.
    pub fn real_samples(part: &[LabeledGlyph]) -> Vec<GlyphSample> {
        part.iter()
            .filter(|g| !g.symbol.is_special())
            .map(|g| g.glyph.clone())
            .collect()
    }
}

pub const SPLIT_NAMES: [&str; 3] = ["train", "val", "test"];

/// Renders a class-balanced split. Sample `i` (in generation order) draws
/// from its own generator seeded with `child_seed(seed, i)`.
pub fn build_split(
    atlas: &GlyphAtlas,
    counts: &SplitCounts,
    aug: &AugmentSpec,
    seed: u64,
) -> Result<DatasetSplit, DatasetError> {
    aug.validate()?;
    let mut next = 0usize;
    let mut make = |split: &str, symbol: Symbol| -> Result<LabeledGlyph, DatasetError> {
        let i = next;
        next += 1;
        let mut rng = ChaCha8Rng::seed_from_u64(child_seed(seed, i));
        Ok(LabeledGlyph {
            id: format!("{split}-{i:05}"),
            symbol,
            glyph: render_glyph(atlas, symbol, aug, &mut rng)?,
        })
    };
    let mut out = DatasetSplit::default();
    let parts = [
        (&mut out.train, counts.train, 0),
        (&mut out.validation, counts.validation, counts.specials),
        (&mut out.test, counts.test, counts.specials),
    ];
    for ((part, per_class, specials), name) in parts.into_iter().zip(SPLIT_NAMES) {
        for &c in &ALPHABET {
            for _ in 0..per_class {
                part.push(make(name, Symbol::Char(c))?);
            }
        }
        for sym in Symbol::SPECIALS {
            for _ in 0..specials {
                part.push(make(name, sym)?);
            }
        }
    }
    Ok(out)
}
