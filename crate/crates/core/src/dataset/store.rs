//! Dataset directory layout.
//!
//! ```text
//! glyphs/<LABEL>/<split>-<n>.pbm     LABEL is a symbol or SPECIAL_A / SPECIAL_B
//! scenes/<id>.pgm
//! scenes/<id>.truth                  plate text, plate box, one box per character
//! ```
//!
//! Glyph files named without a `val-` or `test-` prefix count as training
//! data, so hand-labeled glyphs in the same layout are accepted.

use std::fs;
use std::path::{Path, PathBuf};

use super::atlas::Symbol;
use super::scene::Scene;
use super::{DatasetSplit, LabeledGlyph};
use crate::error::DatasetError;
use crate::glyph::{class_index, GlyphSample, GLYPH_SIDE};
use crate::image::{AnyImage, BinaryImage, BoundingBox};
use crate::netpbm::{read_netpbm, write_netpbm};
use crate::preprocess::{binarize, to_grayscale};
use crate::segment::{normalize_glyph, SegmentConfig};

/// Writes every glyph of the split; returns the number of files.
pub fn write_glyphs(root: impl AsRef<Path>, split: &DatasetSplit) -> Result<usize, DatasetError> {
    let mut n = 0;
    for g in split.iter() {
        let dir = root.as_ref().join("glyphs").join(g.symbol.to_string());
        fs::create_dir_all(&dir)?;
        write_netpbm(&g.glyph.to_image().into(), dir.join(format!("{}.pbm", g.id)))?;
        n += 1;
    }
    Ok(n)
}

fn sorted_entries(dir: &Path) -> Result<Vec<PathBuf>, DatasetError> {
    let mut out = fs::read_dir(dir)?
        .map(|e| e.map(|e| e.path()))
        .collect::<Result<Vec<_>, _>>()?;
    out.sort();
    Ok(out)
}

fn to_bitmap(img: AnyImage) -> BinaryImage {
    match img {
        AnyImage::Binary(b) => b,
        AnyImage::Gray(g) => binarize(&g, 128),
        AnyImage::Rgb(c) => binarize(&to_grayscale(&c), 128),
    }
}

/// Loads `glyphs/` in sorted path order. Images of any size are resampled
/// to 20x20.
pub fn read_glyphs(root: impl AsRef<Path>) -> Result<DatasetSplit, DatasetError> {
    let mut split = DatasetSplit::default();
    for dir in sorted_entries(&root.as_ref().join("glyphs"))? {
        if !dir.is_dir() {
            continue;
        }
        let name = dir.file_name().and_then(|n| n.to_str()).unwrap_or_default();
        let symbol = Symbol::parse(name).ok_or_else(|| DatasetError::UnknownSymbol(name.to_string()))?;
        for file in sorted_entries(&dir)? {
            if file.extension().and_then(|e| e.to_str()) != Some("pbm") {
                continue;
            }
            let id = file
                .file_stem()
                .and_then(|s| s.to_str())
                .unwrap_or_default()
                .to_string();
            let bitmap = to_bitmap(read_netpbm(&file)?);
            let glyph = if bitmap.width() == GLYPH_SIDE && bitmap.height() == GLYPH_SIDE {
                GlyphSample::from_image(&bitmap, None).expect("size checked")
            } else {
                normalize_glyph(&bitmap, &SegmentConfig::default()).expect("decoded images are nonempty")
            };
            let g = LabeledGlyph {
                id: id.clone(),
                symbol,
                glyph: glyph.with_label(symbol.label()),
            };
            if id.starts_with("val-") {
                split.validation.push(g);
            } else if id.starts_with("test-") {
                split.test.push(g);
            } else {
                split.train.push(g);
            }
        }
    }
    Ok(split)
}

/// Contents of a `.truth` file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TruthFile {
    pub text: String,
    pub plate: BoundingBox,
    pub chars: Vec<BoundingBox>,
}

impl From<&Scene> for TruthFile {
    fn from(s: &Scene) -> Self {
        Self {
            text: s.truth.text.clone(),
            plate: s.truth.plate,
            chars: s.truth.chars.clone(),
        }
    }
}

pub fn format_truth(t: &TruthFile) -> String {
    let mut s = format!("{}\n{}\n", t.text, t.plate);
    for b in &t.chars {
        s.push_str(&format!("{b}\n"));
    }
    s
}

fn parse_box(line: &str) -> Option<BoundingBox> {
    let v: Vec<usize> = line.split_whitespace().map(str::parse).collect::<Result<_, _>>().ok()?;
    match v.as_slice() {
        &[x, y, w, h] => Some(BoundingBox::new(x, y, w, h)),
        _ => None,
    }
}

pub fn parse_truth(text: &str, path: &str) -> Result<TruthFile, DatasetError> {
    let err = |reason: &str| DatasetError::Truth {
        path: path.to_string(),
        reason: reason.to_string(),
    };
    let mut lines = text.lines();
    let plate_text = lines.next().ok_or_else(|| err("empty file"))?.trim().to_string();
    if plate_text.chars().any(|c| class_index(c).is_none()) {
        return Err(err("plate text has symbols outside 0-9 A-Z"));
    }
    let plate = lines
        .next()
        .and_then(parse_box)
        .ok_or_else(|| err("line 2 is not a box"))?;
    let chars = lines
        .filter(|l| !l.trim().is_empty())
        .map(|l| parse_box(l).ok_or_else(|| err("character line is not a box")))
        .collect::<Result<Vec<_>, _>>()?;
    if chars.len() != plate_text.chars().count() {
        return Err(err("number of character boxes differs from the text length"));
    }
    Ok(TruthFile {
        text: plate_text,
        plate,
        chars,
    })
}

pub fn write_scene(root: impl AsRef<Path>, id: &str, scene: &Scene) -> Result<(), DatasetError> {
    let dir = root.as_ref().join("scenes");
    fs::create_dir_all(&dir)?;
    write_netpbm(&scene.image.clone().into(), dir.join(format!("{id}.pgm")))?;
    fs::write(dir.join(format!("{id}.truth")), format_truth(&TruthFile::from(scene)))?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct SceneRecord {
    pub id: String,
    pub path: PathBuf,
    pub image: AnyImage,
    pub truth: TruthFile,
}

/// Loads every `<id>.pgm` / `.ppm` / `.pbm` in `dir` that has a matching
/// `.truth`, sorted by id. `dir` may be a dataset root or its `scenes/`.
pub fn read_scenes(dir: impl AsRef<Path>) -> Result<Vec<SceneRecord>, DatasetError> {
    let nested = dir.as_ref().join("scenes");
    let dir = if nested.is_dir() {
        nested
    } else {
        dir.as_ref().to_path_buf()
    };
    let mut out = Vec::new();
    for path in sorted_entries(&dir)? {
        let ext = path.extension().and_then(|e| e.to_str()).unwrap_or_default();
        if !matches!(ext, "pgm" | "ppm" | "pbm") {
            continue;
        }
        let truth_path = path.with_extension("truth");
        if !truth_path.is_file() {
            continue;
        }
        let truth = parse_truth(&fs::read_to_string(&truth_path)?, &truth_path.display().to_string())?;
        out.push(SceneRecord {
            id: path
                .file_stem()
                .and_then(|s| s.to_str())
                .unwrap_or_default()
                .to_string(),
            image: read_netpbm(&path)?,
            path,
            truth,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{build_split, AugmentSpec, GlyphAtlas, SplitCounts};

    #[test]
    fn glyph_directory_round_trip() {
        let atlas = GlyphAtlas::bundled();
        let counts = SplitCounts {
            train: 2,
            validation: 1,
            test: 1,
            specials: 2,
        };
        let split = build_split(&atlas, &counts, &AugmentSpec::default(), 3).unwrap();
        let dir = tempfile::tempdir().unwrap();
        assert_eq!(write_glyphs(dir.path(), &split).unwrap(), split.iter().count());
        assert!(dir.path().join("glyphs/SPECIAL_A").is_dir());
        let back = read_glyphs(dir.path()).unwrap();
        let key = |v: &[LabeledGlyph]| {
            let mut v: Vec<(String, Symbol, GlyphSample)> =
                v.iter().map(|g| (g.id.clone(), g.symbol, g.glyph.clone())).collect();
            v.sort_by(|a, b| a.0.cmp(&b.0));
            v
        };
        assert_eq!(key(&back.train), key(&split.train));
        assert_eq!(key(&back.validation), key(&split.validation));
        assert_eq!(key(&back.test), key(&split.test));
    }

    #[test]
    fn foreign_glyph_sizes_are_resampled() {
        let dir = tempfile::tempdir().unwrap();
        let d = dir.path().join("glyphs/7");
        fs::create_dir_all(&d).unwrap();
        let img = BinaryImage::from_fn(8, 30, crate::image::Polarity::Ink, |x, _| x < 4);
        write_netpbm(&img.into(), d.join("mine.pbm")).unwrap();
        let split = read_glyphs(dir.path()).unwrap();
        assert_eq!(split.train.len(), 1);
        assert_eq!(split.train[0].glyph.label(), Some('7'));
        assert_eq!(crate::glyph::ink_count(&split.train[0].glyph), 200);
    }

    #[test]
    fn unknown_label_directory() {
        let dir = tempfile::tempdir().unwrap();
        fs::create_dir_all(dir.path().join("glyphs/lower")).unwrap();
        assert!(matches!(read_glyphs(dir.path()), Err(DatasetError::UnknownSymbol(_))));
    }

    #[test]
    fn truth_format() {
        let t = TruthFile {
            text: "AB1".into(),
            plate: BoundingBox::new(10, 20, 204, 52),
            chars: vec![
                BoundingBox::new(1, 2, 3, 4),
                BoundingBox::new(5, 6, 7, 8),
                BoundingBox::new(9, 9, 9, 9),
            ],
        };
        let s = format_truth(&t);
        assert_eq!(s, "AB1\n10 20 204 52\n1 2 3 4\n5 6 7 8\n9 9 9 9\n");
        assert_eq!(parse_truth(&s, "x").unwrap(), t);
        assert!(parse_truth("AB\n1 2 3 4\n1 1 1 1\n", "x").is_err());
        assert!(parse_truth("ab\n1 2 3 4\n", "x").is_err());
        assert!(parse_truth("", "x").is_err());
    }

    #[test]
    fn scene_round_trip() {
        let atlas = GlyphAtlas::bundled();
        let scene = Scene::generate(&atlas, 12, 0.5).unwrap();
        let dir = tempfile::tempdir().unwrap();
        write_scene(dir.path(), "s0001", &scene).unwrap();
        let recs = read_scenes(dir.path()).unwrap();
        assert_eq!(recs.len(), 1);
        assert_eq!(recs[0].id, "s0001");
        assert_eq!(recs[0].image, AnyImage::Gray(scene.image.clone()));
        assert_eq!(recs[0].truth, TruthFile::from(&scene));
        assert_eq!(read_scenes(dir.path().join("scenes")).unwrap().len(), 1);
    }
}
