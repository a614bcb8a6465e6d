//! Netpbm (P1-P6) reader and writer.
//!
//! Reading accepts any maxval up to 65535 and rescales samples to 0..=255.
//! Writing always emits the binary variants (P4/P5/P6) at maxval 255.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::ImageError;
use crate::image::{AnyImage, BinaryImage, GrayImage, Polarity, RgbImage};

pub fn read_netpbm(path: impl AsRef<Path>) -> Result<AnyImage, ImageError> {
    let bytes = fs::read(path)?;
    parse_netpbm(&bytes)
}

pub fn write_netpbm(image: &AnyImage, path: impl AsRef<Path>) -> Result<(), ImageError> {
    let mut file = fs::File::create(path)?;
    file.write_all(&encode_netpbm(image))?;
    Ok(())
}

/// Encodes to P4 (binary), P5 (gray) or P6 (rgb).
pub fn encode_netpbm(image: &AnyImage) -> Vec<u8> {
    match image {
        AnyImage::Gray(g) => {
            let mut out = format!("P5\n{} {}\n255\n", g.width(), g.height()).into_bytes();
            out.extend_from_slice(g.data());
            out
        }
        AnyImage::Rgb(c) => {
            let mut out = format!("P6\n{} {}\n255\n", c.width(), c.height()).into_bytes();
            out.extend_from_slice(c.data());
            out
        }
        AnyImage::Binary(b) => {
            let mut out = format!("P4\n{} {}\n", b.width(), b.height()).into_bytes();
            let row_bytes = b.width().div_ceil(8);
            for y in 0..b.height() {
                let mut row = vec![0u8; row_bytes];
                for x in 0..b.width() {
                    if b.get(x, y) {
                        row[x / 8] |= 0x80 >> (x % 8);
                    }
                }
                out.extend_from_slice(&row);
            }
            out
        }
    }
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn err(&self, reason: impl Into<String>) -> ImageError {
        ImageError::Parse {
            offset: self.pos,
            reason: reason.into(),
        }
    }

    fn skip_space(&mut self) {
        while self.pos < self.bytes.len() {
            match self.bytes[self.pos] {
                b'#' => {
                    while self.pos < self.bytes.len() && self.bytes[self.pos] != b'\n' {
                        self.pos += 1;
                    }
                }
                c if c.is_ascii_whitespace() => self.pos += 1,
                _ => break,
            }
        }
    }

    fn number(&mut self, what: &str) -> Result<u32, ImageError> {
        self.skip_space();
        let start = self.pos;
        let mut value: u64 = 0;
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_digit() {
            value = value * 10 + u64::from(self.bytes[self.pos] - b'0');
            if value > u64::from(u32::MAX) {
                return Err(self.err(format!("{what} is too large")));
            }
            self.pos += 1;
        }
        if self.pos == start {
            return Err(if self.pos >= self.bytes.len() {
                self.err(format!("truncated data: expected {what}"))
            } else {
                self.err(format!("expected {what}"))
            });
        }
        Ok(value as u32)
    }

    fn pbm_bit(&mut self) -> Result<bool, ImageError> {
        self.skip_space();
        match self.bytes.get(self.pos) {
            Some(b'0') => {
                self.pos += 1;
                Ok(false)
            }
            Some(b'1') => {
                self.pos += 1;
                Ok(true)
            }
            Some(_) => Err(self.err("expected PBM bit 0 or 1")),
            None => Err(self.err("truncated data: expected PBM bit")),
        }
    }

    /// Binary variants separate the header from the raster with one whitespace byte.
    fn raster_start(&mut self) -> Result<(), ImageError> {
        match self.bytes.get(self.pos) {
            Some(c) if c.is_ascii_whitespace() => {
                self.pos += 1;
                Ok(())
            }
            Some(_) => Err(self.err("expected whitespace before raster")),
            None => Err(self.err("truncated data: missing raster")),
        }
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8], ImageError> {
        if self.bytes.len() - self.pos < n {
            return Err(self.err(format!(
                "truncated data: need {n} raster bytes, {} remain",
                self.bytes.len() - self.pos
            )));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }
}

fn rescale(v: u32, maxval: u32) -> u8 {
    if maxval == 255 {
        return v.min(255) as u8;
    }
    ((f64::from(v) * 255.0 / f64::from(maxval)).round() as u32).min(255) as u8
}

pub fn parse_netpbm(bytes: &[u8]) -> Result<AnyImage, ImageError> {
    let mut cur = Cursor { bytes, pos: 0 };
    if bytes.len() < 2 || bytes[0] != b'P' || !(b'1'..=b'6').contains(&bytes[1]) {
        return Err(cur.err("missing P1-P6 magic number"));
    }
    let kind = bytes[1] - b'0';
    cur.pos = 2;
    let width = cur.number("width")? as usize;
    let height = cur.number("height")? as usize;
    if width == 0 || height == 0 {
        return Err(cur.err("width and height must be positive"));
    }
    let maxval = if matches!(kind, 1 | 4) {
        1
    } else {
        let m = cur.number("maxval")?;
        if m == 0 || m > 65535 {
            return Err(cur.err(format!("maxval {m} outside 1..=65535")));
        }
        m
    };
    let n = width * height;

    match kind {
        1 => {
            let mut bits = Vec::with_capacity(n);
            for _ in 0..n {
                bits.push(cur.pbm_bit()?);
            }
            Ok(BinaryImage::new(width, height, bits, Polarity::Ink)?.into())
        }
        4 => {
            cur.raster_start()?;
            let row_bytes = width.div_ceil(8);
            let raw = cur.take(row_bytes * height)?;
            let mut bits = Vec::with_capacity(n);
            for row in raw.chunks_exact(row_bytes) {
                for x in 0..width {
                    bits.push(row[x / 8] & (0x80 >> (x % 8)) != 0);
                }
            }
            Ok(BinaryImage::new(width, height, bits, Polarity::Ink)?.into())
        }
        2 | 3 => {
            let channels = if kind == 2 { 1 } else { 3 };
            let mut data = Vec::with_capacity(n * channels);
            for _ in 0..n * channels {
                let v = cur.number("sample")?;
                if v > maxval {
                    return Err(cur.err(format!("sample {v} exceeds maxval {maxval}")));
                }
                data.push(rescale(v, maxval));
            }
            Ok(if kind == 2 {
                GrayImage::new(width, height, data)?.into()
            } else {
                RgbImage::new(width, height, data)?.into()
            })
        }
        _ => {
            let channels = if kind == 5 { 1 } else { 3 };
            cur.raster_start()?;
            let sample_bytes = if maxval > 255 { 2 } else { 1 };
            let start = cur.pos;
            let raw = cur.take(n * channels * sample_bytes)?;
            let mut data = Vec::with_capacity(n * channels);
            for (i, s) in raw.chunks_exact(sample_bytes).enumerate() {
                let v = if sample_bytes == 2 {
                    u32::from(u16::from_be_bytes([s[0], s[1]]))
                } else {
                    u32::from(s[0])
                };
                if v > maxval {
                    return Err(ImageError::Parse {
                        offset: start + i * sample_bytes,
                        reason: format!("sample {v} exceeds maxval {maxval}"),
                    });
                }
                data.push(rescale(v, maxval));
            }
            Ok(if kind == 5 {
                GrayImage::new(width, height, data)?.into()
            } else {
                RgbImage::new(width, height, data)?.into()
            })
        }
    }
}
