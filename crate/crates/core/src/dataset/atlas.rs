//! Bundled glyph bitmaps for the 36 plate symbols and two non-characters.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use crate::error::DatasetError;
use crate::glyph::{class_index, ALPHABET};
use crate::image::{AnyImage, BinaryImage};
use crate::netpbm::{parse_netpbm, read_netpbm};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Symbol {
    Char(char),
    /// Sparse blot, rejected by ink count.
    SpecialA,
    /// Dense emblem, rejected by classifier confidence.
    SpecialB,
}

impl Symbol {
    pub const SPECIALS: [Symbol; 2] = [Symbol::SpecialA, Symbol::SpecialB];

    pub fn parse(name: &str) -> Option<Self> {
        match name {
            "SPECIAL_A" => Some(Symbol::SpecialA),
            "SPECIAL_B" => Some(Symbol::SpecialB),
            _ => {
                let mut chars = name.chars();
                let c = chars.next()?;
                (chars.next().is_none() && class_index(c).is_some()).then_some(Symbol::Char(c))
            }
        }
    }

    /// Classifier label; `None` for the specials.
    pub fn label(&self) -> Option<char> {
        match self {
            Symbol::Char(c) => Some(*c),
            _ => None,
        }
    }

    pub fn is_special(&self) -> bool {
        !matches!(self, Symbol::Char(_))
    }
}

impl fmt::Display for Symbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Symbol::Char(c) => write!(f, "{c}"),
            Symbol::SpecialA => f.write_str("SPECIAL_A"),
            Symbol::SpecialB => f.write_str("SPECIAL_B"),
        }
    }
}

macro_rules! bundled {
    ($($name:literal),* $(,)?) => {
        &[$(($name, include_bytes!(concat!("../../assets/atlas/", $name, ".pbm")).as_slice())),*]
    };
}

const BUNDLED: &[(&str, &[u8])] = bundled!(
    "0",
    "1",
    "2",
    "3",
    "4",
    "5",
    "6",
    "7",
    "8",
    "9",
    "A",
    "B",
    "C",
    "D",
    "E",
    "F",
    "G",
    "H",
    "I",
    "J",
    "K",
    "L",
    "M",
    "N",
    "O",
    "P",
    "Q",
    "R",
    "S",
    "T",
    "U",
    "V",
    "W",
    "X",
    "Y",
    "Z",
    "SPECIAL_A",
    "SPECIAL_B",
);

/// Native-resolution bitmap per symbol.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GlyphAtlas {
    glyphs: BTreeMap<Symbol, BinaryImage>,
}

fn as_bitmap(name: &str, img: AnyImage) -> Result<BinaryImage, DatasetError> {
    match img {
        AnyImage::Binary(b) => Ok(b),
        _ => Err(DatasetError::InvalidScene(format!(
            "atlas glyph {name} is not a PBM bitmap"
        ))),
    }
}

impl GlyphAtlas {
    /// The atlas compiled into the library.
    pub fn bundled() -> Self {
        let glyphs = BUNDLED
            .iter()
            .map(|(name, bytes)| {
                let sym = Symbol::parse(name).expect("bundled names are valid");
                let img = parse_netpbm(bytes).expect("bundled atlas parses");
                (sym, as_bitmap(name, img).expect("bundled atlas is PBM"))
            })
            .collect();
        Self { glyphs }
    }

    /// Reads `<dir>/<SYMBOL>.pbm` for every real symbol and both specials.
    pub fn from_dir(dir: impl AsRef<Path>) -> Result<Self, DatasetError> {
        let mut glyphs = BTreeMap::new();
        let symbols = ALPHABET.iter().map(|&c| Symbol::Char(c)).chain(Symbol::SPECIALS);
        for sym in symbols {
            let path = dir.as_ref().join(format!("{sym}.pbm"));
            let img = read_netpbm(&path)?;
            glyphs.insert(sym, as_bitmap(&sym.to_string(), img)?);
        }
        Ok(Self { glyphs })
    }

    pub fn get(&self, sym: Symbol) -> Result<&BinaryImage, DatasetError> {
        self.glyphs
            .get(&sym)
            .ok_or_else(|| DatasetError::UnknownSymbol(sym.to_string()))
    }

    pub fn symbols(&self) -> impl Iterator<Item = Symbol> + '_ {
        self.glyphs.keys().copied()
    }
}
