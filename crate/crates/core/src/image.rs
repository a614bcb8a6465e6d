//! Pixel buffers shared by every pipeline stage.
//!
//! Coordinates follow the usual raster convention: `x` grows to the right
//! (columns) and `y` grows downward (rows). All buffers are row-major.

use serde::{Deserialize, Serialize};

use crate::error::ImageError;

/// Axis-aligned rectangle in pixel coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BoundingBox {
    pub x: usize,
    pub y: usize,
    pub w: usize,
    pub h: usize,
}

impl BoundingBox {
    pub const fn new(x: usize, y: usize, w: usize, h: usize) -> Self {
        Self { x, y, w, h }
    }

    pub fn full(width: usize, height: usize) -> Self {
        Self::new(0, 0, width, height)
    }

    pub fn area(&self) -> usize {
        self.w * self.h
    }

    pub fn right(&self) -> usize {
        self.x + self.w
    }

    pub fn bottom(&self) -> usize {
        self.y + self.h
    }

    pub fn fits_within(&self, width: usize, height: usize) -> bool {
        self.right() <= width && self.bottom() <= height
    }

    pub fn contains(&self, x: usize, y: usize) -> bool {
        x >= self.x && x < self.right() && y >= self.y && y < self.bottom()
    }

    /// Moves `self` (expressed relative to `origin`) into `origin`'s frame.
    pub fn offset_by(&self, origin: &BoundingBox) -> Self {
        Self::new(self.x + origin.x, self.y + origin.y, self.w, self.h)
    }

    pub fn intersection(&self, other: &BoundingBox) -> Option<BoundingBox> {
        let x0 = self.x.max(other.x);
        let y0 = self.y.max(other.y);
        let x1 = self.right().min(other.right());
        let y1 = self.bottom().min(other.bottom());
        (x0 < x1 && y0 < y1).then(|| BoundingBox::new(x0, y0, x1 - x0, y1 - y0))
    }
}

impl std::fmt::Display for BoundingBox {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{} {} {} {}", self.x, self.y, self.w, self.h)
    }
}

fn check_dims(width: usize, height: usize, len: usize, per_pixel: usize) -> Result<(), ImageError> {
    if width == 0 || height == 0 {
        return Err(ImageError::EmptyImage);
    }
    if len != width * height * per_pixel {
        return Err(ImageError::SizeMismatch {
            expected: width * height * per_pixel,
            actual: len,
        });
    }
    Ok(())
}

fn crop_rows<T: Copy>(
    data: &[T],
    width: usize,
    height: usize,
    per_pixel: usize,
    b: &BoundingBox,
) -> Result<Vec<T>, ImageError> {
    if b.w == 0 || b.h == 0 || !b.fits_within(width, height) {
        return Err(ImageError::OutOfBounds {
            bbox: *b,
            width,
            height,
        });
    }
    let mut out = Vec::with_capacity(b.w * b.h * per_pixel);
    for y in b.y..b.bottom() {
        let start = (y * width + b.x) * per_pixel;
        out.extend_from_slice(&data[start..start + b.w * per_pixel]);
    }
    Ok(out)
}

/// Single-channel 8-bit image.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrayImage {
    width: usize,
    height: usize,
    data: Vec<u8>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, data: Vec<u8>) -> Result<Self, ImageError> {
        check_dims(width, height, data.len(), 1)?;
        Ok(Self { width, height, data })
    }

    pub fn filled(width: usize, height: usize, value: u8) -> Self {
        assert!(width > 0 && height > 0, "image dimensions must be positive");
        Self {
            width,
            height,
            data: vec![value; width * height],
        }
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> u8) -> Self {
        assert!(width > 0 && height > 0, "image dimensions must be positive");
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self { width, height, data }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.data[y * self.width + x]
    }

    pub fn crop(&self, b: &BoundingBox) -> Result<Self, ImageError> {
        let data = crop_rows(&self.data, self.width, self.height, 1, b)?;
        Ok(Self {
            width: b.w,
            height: b.h,
            data,
        })
    }
}

/// Three-channel 8-bit image, stored as interleaved `r, g, b`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RgbImage {
    width: usize,
    height: usize,
    data: Vec<u8>,
}

impl RgbImage {
    pub fn new(width: usize, height: usize, data: Vec<u8>) -> Result<Self, ImageError> {
        check_dims(width, height, data.len(), 3)?;
        Ok(Self { width, height, data })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn get(&self, x: usize, y: usize) -> [u8; 3] {
        let i = (y * self.width + x) * 3;
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    pub fn pixels(&self) -> impl Iterator<Item = [u8; 3]> + '_ {
        self.data.chunks_exact(3).map(|p| [p[0], p[1], p[2]])
    }

    pub fn crop(&self, b: &BoundingBox) -> Result<Self, ImageError> {
        let data = crop_rows(&self.data, self.width, self.height, 3, b)?;
        Ok(Self {
            width: b.w,
            height: b.h,
            data,
        })
    }
}

/// What a set bit in a [`BinaryImage`] stands for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Polarity {
    /// Set bits are dark character ink.
    Ink,
    /// Set bits are edge responses.
    Edge,
}

/// Bi-level image. The polarity is fixed at construction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryImage {
    width: usize,
    height: usize,
    bits: Vec<bool>,
    polarity: Polarity,
}

impl BinaryImage {
    pub fn new(width: usize, height: usize, bits: Vec<bool>, polarity: Polarity) -> Result<Self, ImageError> {
        check_dims(width, height, bits.len(), 1)?;
        Ok(Self {
            width,
            height,
            bits,
            polarity,
        })
    }

    pub fn cleared(width: usize, height: usize, polarity: Polarity) -> Self {
        assert!(width > 0 && height > 0, "image dimensions must be positive");
        Self {
            width,
            height,
            bits: vec![false; width * height],
            polarity,
        }
    }

    pub fn from_fn(width: usize, height: usize, polarity: Polarity, mut f: impl FnMut(usize, usize) -> bool) -> Self {
        assert!(width > 0 && height > 0, "image dimensions must be positive");
        let mut bits = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                bits.push(f(x, y));
            }
        }
        Self {
            width,
            height,
            bits,
            polarity,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn polarity(&self) -> Polarity {
        self.polarity
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> bool {
        self.bits[y * self.width + x]
    }

    pub fn count_set(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    /// Tight box around all set bits, `None` when the image is clear.
    pub fn ink_bounds(&self) -> Option<BoundingBox> {
        let mut x0 = usize::MAX;
        let mut y0 = usize::MAX;
        let mut x1 = 0;
        let mut y1 = 0;
        for y in 0..self.height {
            for x in 0..self.width {
                if self.get(x, y) {
                    x0 = x0.min(x);
                    y0 = y0.min(y);
                    x1 = x1.max(x);
                    y1 = y1.max(y);
                }
            }
        }
        (x0 != usize::MAX).then(|| BoundingBox::new(x0, y0, x1 - x0 + 1, y1 - y0 + 1))
    }

    pub fn crop(&self, b: &BoundingBox) -> Result<Self, ImageError> {
        let bits = crop_rows(&self.bits, self.width, self.height, 1, b)?;
        Ok(Self {
            width: b.w,
            height: b.h,
            bits,
            polarity: self.polarity,
        })
    }

    /// Gray rendering: ink is drawn black on white, edges white on black.
    pub fn to_gray(&self) -> GrayImage {
        let (on, off) = match self.polarity {
            Polarity::Ink => (0, 255),
            Polarity::Edge => (255, 0),
        };
        GrayImage {
            width: self.width,
            height: self.height,
            data: self.bits.iter().map(|&b| if b { on } else { off }).collect(),
        }
    }
}

/// Any image Netpbm can carry.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AnyImage {
    Rgb(RgbImage),
    Gray(GrayImage),
    Binary(BinaryImage),
}

impl AnyImage {
    pub fn width(&self) -> usize {
        match self {
            AnyImage::Rgb(i) => i.width(),
            AnyImage::Gray(i) => i.width(),
            AnyImage::Binary(i) => i.width(),
        }
    }

    pub fn height(&self) -> usize {
        match self {
            AnyImage::Rgb(i) => i.height(),
            AnyImage::Gray(i) => i.height(),
            AnyImage::Binary(i) => i.height(),
        }
    }

    pub fn crop(&self, b: &BoundingBox) -> Result<Self, ImageError> {
        Ok(match self {
            AnyImage::Rgb(i) => AnyImage::Rgb(i.crop(b)?),
            AnyImage::Gray(i) => AnyImage::Gray(i.crop(b)?),
            AnyImage::Binary(i) => AnyImage::Binary(i.crop(b)?),
        })
    }
}

impl From<GrayImage> for AnyImage {
    fn from(i: GrayImage) -> Self {
        AnyImage::Gray(i)
    }
}

impl From<RgbImage> for AnyImage {
    fn from(i: RgbImage) -> Self {
        AnyImage::Rgb(i)
    }
}

impl From<BinaryImage> for AnyImage {
    fn from(i: BinaryImage) -> Self {
        AnyImage::Binary(i)
    }
}
