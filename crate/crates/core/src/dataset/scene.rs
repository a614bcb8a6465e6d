//! Synthetic 640x480 plate scenes with exact ground truth.
//!
//! Glyphs are painted eroded by one pixel: the pipeline's 3x3 dilation
//! restores the atlas stroke weight, so segmented glyphs look like the
//! training glyphs. Gray levels of every region stay clear of the default
//! binarization threshold after the illumination change.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::atlas::{GlyphAtlas, Symbol};
use crate::error::DatasetError;
use crate::glyph::{class_index, ALPHABET};
use crate::image::{BinaryImage, BoundingBox, GrayImage, Polarity};
use crate::preprocess::erode;

pub const PLATE_GRAY: u8 = 235;
pub const INK_GRAY: u8 = 25;

const PLATE_W: usize = 168;
const PLATE_H: usize = 37;
/// Text is spread to about this width when it is narrower.
const TEXT_SPAN: usize = 140;
const MIN_GAP: usize = 4;
const SIDE_MARGIN: usize = 8;
/// Blobs keep at least this distance from the plate.
const CLEARANCE: usize = 24;
const DARK: (u8, u8) = (15, 75);
const LIGHT: (u8, u8) = (205, 250);

#[derive(Debug, Clone, PartialEq)]
pub struct SceneSpec {
    pub text: String,
    pub width: usize,
    pub height: usize,
    pub plate: BoundingBox,
    /// Full-width horizontal bars (bumper, windshield edges).
    pub bars: usize,
    /// Rectangles and ellipses away from the plate.
    pub blobs: usize,
    pub gain: f64,
    pub bias: f64,
    pub noise_sigma: f64,
    /// `(i, s)` draws special `s` just before text character `i`
    /// (after the last one when `i == text.len()`).
    pub specials: Vec<(usize, Symbol)>,
    pub seed: u64,
}

impl SceneSpec {
    /// Centered plate, plain background, no noise.
    pub fn clean(text: &str) -> Self {
        let (width, height) = (640, 480);
        Self {
            text: text.to_string(),
            width,
            height,
            plate: BoundingBox::new((width - PLATE_W) / 2, (height - PLATE_H) / 2, PLATE_W, PLATE_H),
            bars: 0,
            blobs: 0,
            gain: 1.0,
            bias: 0.0,
            noise_sigma: 0.0,
            specials: Vec::new(),
            seed: 0,
        }
    }

    /// Clutter level in `[0, 1]`: up to 3 bars and 10 blobs.
    pub fn with_clutter(mut self, level: f64) -> Self {
        let level = level.clamp(0.0, 1.0);
        self.bars = (3.0 * level).round() as usize;
        self.blobs = (10.0 * level).round() as usize;
        self
    }

    /// Random 5-8 symbol text, plate position, lighting and noise; one
    /// scene in four with at most 7 symbols carries a special symbol inside
    /// the text.
    pub fn random(seed: u64, clutter: f64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let len = rng.random_range(5..=8);
        let text: String = (0..len)
            .map(|_| ALPHABET[rng.random_range(0..ALPHABET.len())])
            .collect();
        let mut spec = Self::clean(&text).with_clutter(clutter);
        spec.seed = seed;
        spec.plate.x = rng.random_range(16..=spec.width - PLATE_W - 16);
        spec.plate.y = rng.random_range(16..=spec.height - PLATE_H - 16);
        spec.gain = rng.random_range(0.8..=1.1);
        spec.bias = rng.random_range(-15.0..=15.0);
        spec.noise_sigma = rng.random_range(0.0..=4.0);
        if rng.random_bool(0.25) && len < 8 {
            let kind = Symbol::SPECIALS[rng.random_range(0..2)];
            spec.specials.push((rng.random_range(1..len), kind));
        }
        spec
    }

    pub fn validate(&self) -> Result<(), DatasetError> {
        let bad = |m: String| Err(DatasetError::InvalidScene(m));
        if self.text.is_empty() {
            return bad("text is empty".into());
        }
        if let Some(c) = self.text.chars().find(|&c| class_index(c).is_none()) {
            return Err(DatasetError::UnknownSymbol(c.to_string()));
        }
        if self.width == 0 || self.height == 0 {
            return bad("image size must be positive".into());
        }
        if !self.plate.fits_within(self.width, self.height) || self.plate.area() == 0 {
            return bad(format!(
                "plate box {} does not fit {}x{}",
                self.plate, self.width, self.height
            ));
        }
        if !(self.gain > 0.0 && self.gain.is_finite() && self.bias.is_finite()) {
            return bad("illumination gain must be positive".into());
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return bad("noise sigma must be nonnegative".into());
        }
        let n = self.text.chars().count();
        for &(i, s) in &self.specials {
            if i > n || !s.is_special() {
                return bad(format!("special {s} at {i} is invalid"));
            }
        }
        Ok(())
    }
}

/// Where one atlas bitmap goes, in scene coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Placement {
    pub symbol: Symbol,
    /// Native frame of the bitmap.
    pub frame: BoundingBox,
}

/// Positions the text (and specials) centered in the plate with even gaps.
pub fn layout(atlas: &GlyphAtlas, spec: &SceneSpec) -> Result<Vec<Placement>, DatasetError> {
    spec.validate()?;
    let chars: Vec<char> = spec.text.chars().collect();
    let mut order = Vec::new();
    for i in 0..=chars.len() {
        order.extend(spec.specials.iter().filter(|(at, _)| *at == i).map(|&(_, s)| s));
        if let Some(&c) = chars.get(i) {
            order.push(Symbol::Char(c));
        }
    }
    let mut sizes = Vec::with_capacity(order.len());
    for &sym in &order {
        let b = atlas.get(sym)?;
        sizes.push((b.width(), b.height()));
    }
    let glyph_w: usize = sizes.iter().map(|s| s.0).sum();
    let gaps = order.len() - 1;
    let gap = TEXT_SPAN
        .saturating_sub(glyph_w)
        .checked_div(gaps)
        .map_or(0, |g| g.max(MIN_GAP));
    let needed = glyph_w + gap * gaps;
    let available = spec.plate.w.saturating_sub(2 * SIDE_MARGIN);
    let tallest = sizes.iter().map(|s| s.1).max().unwrap_or(0);
    if needed > available || tallest > spec.plate.h {
        return Err(DatasetError::Layout { needed, available });
    }
    let mut x = spec.plate.x + (spec.plate.w - needed) / 2;
    let mut out = Vec::with_capacity(order.len());
    for (&symbol, &(w, h)) in order.iter().zip(&sizes) {
        let y = spec.plate.y + (spec.plate.h - h) / 2;
        out.push(Placement {
            symbol,
            frame: BoundingBox::new(x, y, w, h),
        });
        x += w + gap;
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SceneTruth {
    pub text: String,
    pub plate: BoundingBox,
    /// Tight ink box of each text character, left to right.
    pub chars: Vec<BoundingBox>,
    pub specials: Vec<(Symbol, BoundingBox)>,
    /// Every painted glyph pixel.
    pub ink: BinaryImage,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Scene {
    pub image: GrayImage,
    pub truth: SceneTruth,
}

impl Scene {
    /// `SceneSpec::random(seed, clutter)` rendered with a generator derived
    /// from the same seed.
    pub fn generate(atlas: &GlyphAtlas, seed: u64, clutter: f64) -> Result<Self, DatasetError> {
        let spec = SceneSpec::random(seed, clutter);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(1);
        render_scene(atlas, &spec, &mut rng)
    }
}

fn palette_gray<R: Rng + ?Sized>(rng: &mut R) -> u8 {
    let (lo, hi) = if rng.random_bool(0.5) { DARK } else { LIGHT };
    rng.random_range(lo..=hi)
}

fn grow(b: &BoundingBox, by: usize, width: usize, height: usize) -> BoundingBox {
    let x = b.x.saturating_sub(by);
    let y = b.y.saturating_sub(by);
    let right = (b.x + b.w + by).min(width);
    let bottom = (b.y + b.h + by).min(height);
    BoundingBox::new(x, y, right - x, bottom - y)
}

pub fn render_scene<R: Rng + ?Sized>(atlas: &GlyphAtlas, spec: &SceneSpec, rng: &mut R) -> Result<Scene, DatasetError> {
    let placements = layout(atlas, spec)?;
    let (w, h) = (spec.width, spec.height);
    let mut canvas = vec![palette_gray(rng); w * h];
    let fill = |canvas: &mut Vec<u8>, b: &BoundingBox, v: u8| {
        for y in b.y..b.bottom() {
            canvas[y * w + b.x..y * w + b.right()].fill(v);
        }
    };

    for _ in 0..spec.bars {
        let y = rng.random_range(0..h);
        let bh = rng.random_range(6..=30).min(h - y);
        let v = palette_gray(rng);
        fill(&mut canvas, &BoundingBox::new(0, y, w, bh), v);
    }

    let keep_out = grow(&spec.plate, CLEARANCE, w, h);
    for _ in 0..spec.blobs {
        for _attempt in 0..30 {
            let bw = rng.random_range(15..=120).min(w);
            let bh = rng.random_range(10..=80).min(h);
            let b = BoundingBox::new(rng.random_range(0..=w - bw), rng.random_range(0..=h - bh), bw, bh);
            if b.intersection(&keep_out).is_some() {
                continue;
            }
            let v = palette_gray(rng);
            if rng.random_bool(0.5) {
                fill(&mut canvas, &b, v);
            } else {
                let (cx, cy) = (b.x as f64 + b.w as f64 / 2.0, b.y as f64 + b.h as f64 / 2.0);
                let (rx, ry) = (b.w as f64 / 2.0, b.h as f64 / 2.0);
                for y in b.y..b.bottom() {
                    for x in b.x..b.right() {
                        let (dx, dy) = ((x as f64 + 0.5 - cx) / rx, (y as f64 + 0.5 - cy) / ry);
                        if dx * dx + dy * dy <= 1.0 {
                            canvas[y * w + x] = v;
                        }
                    }
                }
            }
            break;
        }
    }

    fill(&mut canvas, &spec.plate, PLATE_GRAY);

    let mut ink = vec![false; w * h];
    let mut chars = Vec::new();
    let mut specials = Vec::new();
    for p in &placements {
        let painted = erode(atlas.get(p.symbol)?, 1);
        for y in 0..painted.height() {
            for x in 0..painted.width() {
                if painted.get(x, y) {
                    let i = (p.frame.y + y) * w + p.frame.x + x;
                    canvas[i] = INK_GRAY;
                    ink[i] = true;
                }
            }
        }
        let bounds = painted
            .ink_bounds()
            .ok_or_else(|| DatasetError::InvalidScene(format!("glyph {} vanishes when eroded", p.symbol)))?
            .offset_by(&p.frame);
        match p.symbol {
            Symbol::Char(_) => chars.push(bounds),
            s => specials.push((s, bounds)),
        }
    }

    let noise = Normal::new(0.0, spec.noise_sigma).expect("sigma validated");
    let data = canvas
        .iter()
        .map(|&v| {
            let n = if spec.noise_sigma > 0.0 { noise.sample(rng) } else { 0.0 };
            (spec.gain * f64::from(v) + spec.bias + n).round().clamp(0.0, 255.0) as u8
        })
        .collect();

    Ok(Scene {
        image: GrayImage::new(w, h, data)?,
        truth: SceneTruth {
            text: spec.text.clone(),
            plate: spec.plate,
            chars,
            specials,
            ink: BinaryImage::new(w, h, ink, Polarity::Ink)?,
        },
    })
}
