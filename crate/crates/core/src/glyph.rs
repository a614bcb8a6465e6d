//! 20x20 binary glyphs and their 400-bit feature vectors.

use std::fmt;

use crate::image::{BinaryImage, Polarity};

pub const GLYPH_SIDE: usize = 20;
pub const FEATURE_COUNT: usize = GLYPH_SIDE * GLYPH_SIDE;
const WORDS: usize = FEATURE_COUNT.div_ceil(64);

/// The 36 plate symbols, in label order.
pub const ALPHABET: [char; 36] = [
    '0', '1', '2', '3', '4', '5', '6', '7', '8', '9', 'A', 'B', 'C', 'D', 'E', 'F', 'G', 'H', 'I', 'J', 'K', 'L', 'M',
    'N', 'O', 'P', 'Q', 'R', 'S', 'T', 'U', 'V', 'W', 'X', 'Y', 'Z',
];

pub const CLASS_COUNT: usize = ALPHABET.len();

pub fn class_index(symbol: char) -> Option<usize> {
    match symbol {
        '0'..='9' => Some(symbol as usize - '0' as usize),
        'A'..='Z' => Some(symbol as usize - 'A' as usize + 10),
        _ => None,
    }
}

/// 400 binary features packed into machine words, row-major.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct FeatureVector([u64; WORDS]);

impl FeatureVector {
    #[inline]
    pub fn get(&self, i: usize) -> bool {
        debug_assert!(i < FEATURE_COUNT);
        self.0[i / 64] >> (i % 64) & 1 == 1
    }

    #[inline]
    pub fn set(&mut self, i: usize, on: bool) {
        let mask = 1u64 << (i % 64);
        if on {
            self.0[i / 64] |= mask;
        } else {
            self.0[i / 64] &= !mask;
        }
    }

    pub fn count_ones(&self) -> u32 {
        self.0.iter().map(|w| w.count_ones()).sum()
    }

    /// Squared Euclidean distance between 0/1 vectors (the Hamming distance).
    pub fn squared_distance(&self, other: &Self) -> u32 {
        self.0
            .iter()
            .zip(other.0.iter())
            .map(|(a, b)| (a ^ b).count_ones())
            .sum()
    }

    pub fn values(&self) -> impl Iterator<Item = u8> + '_ {
        (0..FEATURE_COUNT).map(|i| u8::from(self.get(i)))
    }

    /// `'0'`/`'1'` characters, one per feature.
    pub fn to_bit_string(&self) -> String {
        self.values().map(|v| if v == 1 { '1' } else { '0' }).collect()
    }

    pub fn from_bit_string(s: &str) -> Option<Self> {
        if s.len() != FEATURE_COUNT {
            return None;
        }
        let mut fv = Self::default();
        for (i, c) in s.bytes().enumerate() {
            match c {
                b'0' => {}
                b'1' => fv.set(i, true),
                _ => return None,
            }
        }
        Some(fv)
    }

    pub fn from_values(values: &[u8]) -> Option<Self> {
        if values.len() != FEATURE_COUNT || values.iter().any(|&v| v > 1) {
            return None;
        }
        let mut fv = Self::default();
        for (i, &v) in values.iter().enumerate() {
            fv.set(i, v == 1);
        }
        Some(fv)
    }
}

impl fmt::Debug for FeatureVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "FeatureVector({})", self.to_bit_string())
    }
}

/// A normalized 20x20 glyph with an optional class label.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct GlyphSample {
    cells: FeatureVector,
    label: Option<char>,
}

impl GlyphSample {
    pub fn from_fn(label: Option<char>, mut f: impl FnMut(usize, usize) -> bool) -> Self {
        let mut cells = FeatureVector::default();
        for y in 0..GLYPH_SIDE {
            for x in 0..GLYPH_SIDE {
                cells.set(y * GLYPH_SIDE + x, f(x, y));
            }
        }
        Self { cells, label }
    }

    /// Inverse of [`featurize`].
    pub fn from_features(cells: FeatureVector, label: Option<char>) -> Self {
        Self { cells, label }
    }

    pub fn from_image(img: &BinaryImage, label: Option<char>) -> Option<Self> {
        (img.width() == GLYPH_SIDE && img.height() == GLYPH_SIDE).then(|| Self::from_fn(label, |x, y| img.get(x, y)))
    }

    pub fn get(&self, x: usize, y: usize) -> bool {
        self.cells.get(y * GLYPH_SIDE + x)
    }

    pub fn label(&self) -> Option<char> {
        self.label
    }

    pub fn with_label(mut self, label: Option<char>) -> Self {
        self.label = label;
        self
    }

    pub fn to_image(&self) -> BinaryImage {
        BinaryImage::from_fn(GLYPH_SIDE, GLYPH_SIDE, Polarity::Ink, |x, y| self.get(x, y))
    }
}

/// Row-major flattening of the glyph's cells.
pub fn featurize(g: &GlyphSample) -> FeatureVector {
    g.cells
}

/// Number of ink cells.
pub fn ink_count(g: &GlyphSample) -> u32 {
    g.cells.count_ones()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn alphabet_indices() {
        for (i, &c) in ALPHABET.iter().enumerate() {
            assert_eq!(class_index(c), Some(i));
        }
        assert_eq!(class_index('a'), None);
        assert_eq!(class_index('#'), None);
    }

    #[test]
    fn blank_glyph_features() {
        let g = GlyphSample::from_fn(None, |_, _| false);
        assert!(featurize(&g).values().all(|v| v == 0));
        assert_eq!(featurize(&g).values().count(), 400);
        assert_eq!(ink_count(&g), 0);
        let full = GlyphSample::from_fn(None, |_, _| true);
        assert_eq!(ink_count(&full), 400);
    }

    #[test]
    fn row_major_indexing() {
        let g = GlyphSample::from_fn(None, |x, y| x == 1 && y == 0);
        let fv = featurize(&g);
        let set: Vec<usize> = (0..400).filter(|&i| fv.get(i)).collect();
        assert_eq!(set, vec![1]);
        let g = GlyphSample::from_fn(None, |x, y| x == 0 && y == 1);
        assert!(featurize(&g).get(20));
    }

    #[test]
    fn bit_strings() {
        let g = GlyphSample::from_fn(Some('A'), |x, y| (x + y) % 3 == 0);
        let s = featurize(&g).to_bit_string();
        assert_eq!(FeatureVector::from_bit_string(&s), Some(featurize(&g)));
        assert_eq!(FeatureVector::from_bit_string("01"), None);
        assert_eq!(FeatureVector::from_values(&[2; 400]), None);
    }

    proptest! {
        #[test]
        fn featurize_round_trips(bits in proptest::collection::vec(any::<bool>(), 400)) {
            let g = GlyphSample::from_fn(Some('Q'), |x, y| bits[y * 20 + x]);
            let back = GlyphSample::from_features(featurize(&g), g.label());
            prop_assert_eq!(&back, &g);
            let vals: Vec<u8> = featurize(&g).values().collect();
            prop_assert_eq!(FeatureVector::from_values(&vals), Some(featurize(&g)));
        }

        #[test]
        fn distance_is_hamming(a in proptest::collection::vec(0u8..2, 400), b in proptest::collection::vec(0u8..2, 400)) {
            let fa = FeatureVector::from_values(&a).unwrap();
            let fb = FeatureVector::from_values(&b).unwrap();
            let brute: u32 = a.iter().zip(&b).map(|(x, y)| (*x as i32 - *y as i32).unsigned_abs()).sum();
            prop_assert_eq!(fa.squared_distance(&fb), brute);
        }
    }
}
