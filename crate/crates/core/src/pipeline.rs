//! End-to-end recognition and the character-accuracy metric.

use std::time::Instant;

use serde::Serialize;

use crate::classify::{Classifier, ClassifierKind, Prediction, RejectionThresholds};
use crate::error::{ConfigError, LocateError, PipelineError, SegmentError};
use crate::glyph::GlyphSample;
use crate::image::{AnyImage, BinaryImage, BoundingBox};
use crate::locate::{extract_plate, locate_plate, sobel_vertical_binary, EdgeMap, LocateConfig};
use crate::preprocess::{preprocess, PreprocessConfig};
use crate::segment::{normalize_glyph, split_characters, strip_noise_rows, SegmentConfig};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PipelineConfig {
    pub preprocess: PreprocessConfig,
    pub locate: LocateConfig,
    pub segment: SegmentConfig,
    /// Kind trained by default; recognition uses whatever model it is given.
    pub classifier: ClassifierKind,
    /// Replaces individual thresholds stored in the model.
    pub thresholds: ThresholdOverrides,
    pub seed: u64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            preprocess: PreprocessConfig::default(),
            locate: LocateConfig::default(),
            segment: SegmentConfig::default(),
            classifier: ClassifierKind::Forest,
            thresholds: ThresholdOverrides::default(),
            seed: 0,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        self.preprocess.validate()?;
        self.locate.validate()?;
        self.segment.validate()?;
        self.thresholds.apply(RejectionThresholds::default()).validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct ThresholdOverrides {
    pub t_c: Option<u32>,
    pub t_s: Option<f64>,
    pub p_e: Option<f64>,
}

impl ThresholdOverrides {
    pub fn is_empty(&self) -> bool {
        self.t_c.is_none() && self.t_s.is_none() && self.p_e.is_none()
    }

    pub fn apply(&self, base: RejectionThresholds) -> RejectionThresholds {
        RejectionThresholds {
            t_c: self.t_c.unwrap_or(base.t_c),
            t_s: self.t_s.unwrap_or(base.t_s),
            p_e: self.p_e.unwrap_or(base.p_e),
        }
    }
}

/// Wall-clock milliseconds per stage.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct StageTimings {
    pub preprocess_ms: f64,
    pub locate_ms: f64,
    pub segment_ms: f64,
    pub classify_ms: f64,
    pub total_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CharReading {
    /// In image coordinates.
    pub bbox: BoundingBox,
    pub prediction: Prediction,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PlateReading {
    /// Accepted labels, left to right.
    pub text: String,
    pub per_char: Vec<CharReading>,
    pub plate_box: BoundingBox,
    /// Not serialized, so the JSON form is reproducible.
    #[serde(skip)]
    pub timings: StageTimings,
}

/// Intermediate images, kept for `--debug` output.
#[derive(Debug, Clone)]
pub struct Artifacts {
    pub binary: BinaryImage,
    pub dilated: BinaryImage,
    pub edges: EdgeMap,
    pub plate: Option<BinaryImage>,
    pub stripped: Option<BinaryImage>,
    pub glyphs: Vec<GlyphSample>,
}

fn no_plate(e: LocateError) -> PipelineError {
    match e {
        LocateError::NoEdges => PipelineError::NoPlate("no vertical edges in the image".into()),
        LocateError::TooSmall { width, height } => PipelineError::NoPlate(format!("image is only {width}x{height}")),
        LocateError::Config(c) => PipelineError::Config(c),
        LocateError::Image(i) => PipelineError::Image(i),
    }
}

fn ms(since: Instant) -> f64 {
    since.elapsed().as_secs_f64() * 1e3
}

/// Runs the whole chain and keeps the intermediate images. On a
/// "no plate" failure the artifacts gathered so far are still returned.
pub fn recognize_with_artifacts(
    image: &AnyImage,
    model: &Classifier,
    cfg: &PipelineConfig,
) -> (Result<PlateReading, PipelineError>, Option<Artifacts>) {
    if let Err(e) = cfg.validate() {
        return (Err(e.into()), None);
    }
    let start = Instant::now();
    let mut timings = StageTimings::default();

    let t = Instant::now();
    let (binary, dilated) = match preprocess(image, &cfg.preprocess) {
        Ok(v) => v,
        Err(e) => return (Err(e.into()), None),
    };
    timings.preprocess_ms = ms(t);

    let t = Instant::now();
    let edges = match sobel_vertical_binary(&dilated, cfg.locate.edge_threshold) {
        Ok(e) => e,
        Err(e) => return (Err(no_plate(e)), None),
    };
    let mut art = Artifacts {
        binary,
        dilated,
        edges,
        plate: None,
        stripped: None,
        glyphs: Vec::new(),
    };
    let plate_box = match locate_plate(&art.edges, &cfg.locate) {
        Ok(b) => b,
        Err(e) => return (Err(no_plate(e)), Some(art)),
    };
    let plate = match extract_plate(&art.dilated, &plate_box) {
        Ok(p) => p,
        Err(e) => return (Err(no_plate(e)), Some(art)),
    };
    timings.locate_ms = ms(t);

    let t = Instant::now();
    let stripped = match strip_noise_rows(&plate, cfg.locate.edge_threshold) {
        Ok(s) => s,
        Err(SegmentError::EmptyPlate) => {
            art.plate = Some(plate);
            return (
                Err(PipelineError::NoPlate("located region has no edge bands".into())),
                Some(art),
            );
        }
        Err(SegmentError::Locate(e)) => {
            art.plate = Some(plate);
            return (Err(no_plate(e)), Some(art));
        }
        Err(e) => return (Err(e.into()), Some(art)),
    };
    let boxes = split_characters(&stripped.image, &cfg.segment);
    let mut glyphs = Vec::with_capacity(boxes.len());
    for b in &boxes {
        let crop = match stripped.image.crop(b) {
            Ok(c) => c,
            Err(e) => return (Err(e.into()), Some(art)),
        };
        match normalize_glyph(&crop, &cfg.segment) {
            Ok(g) => glyphs.push(g),
            Err(e) => return (Err(e.into()), Some(art)),
        }
    }
    timings.segment_ms = ms(t);

    let t = Instant::now();
    let model_view;
    let model = if cfg.thresholds.is_empty() {
        model
    } else {
        model_view = model.clone().with_thresholds(cfg.thresholds.apply(model.thresholds()));
        &model_view
    };
    let origin = BoundingBox::new(plate_box.x, plate_box.y + stripped.band.start, 0, 0);
    let per_char: Vec<CharReading> = boxes
        .iter()
        .zip(&glyphs)
        .map(|(b, g)| CharReading {
            bbox: b.offset_by(&origin),
            prediction: model.predict(g),
        })
        .collect();
    timings.classify_ms = ms(t);
    timings.total_ms = ms(start);

    let text = per_char.iter().filter_map(|c| c.prediction.label()).collect();
    art.plate = Some(plate);
    art.stripped = Some(stripped.image);
    art.glyphs = glyphs;
    (
        Ok(PlateReading {
            text,
            per_char,
            plate_box,
            timings,
        }),
        Some(art),
    )
}

/// preprocess, vertical Sobel, plate search, row stripping, column split,
/// then classify each glyph. Rejected glyphs stay in `per_char` only.
pub fn recognize(image: &AnyImage, model: &Classifier, cfg: &PipelineConfig) -> Result<PlateReading, PipelineError> {
    recognize_with_artifacts(image, model, cfg).0
}

/// Per-image tallies for [`character_accuracy`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct CharScore {
    pub correct: usize,
    /// Accepted glyphs that match no ground-truth character.
    pub spurious: usize,
    pub truth: usize,
}

fn horizontal_overlap(a: &BoundingBox, b: &BoundingBox) -> usize {
    let vertical = a.y < b.bottom() && b.y < a.bottom();
    if !vertical {
        return 0;
    }
    a.right().min(b.right()).saturating_sub(a.x.max(b.x))
}

/// Matches read boxes to truth boxes one-to-one, greedily by largest
/// horizontal overlap. A truth character is correct when its matched box
/// was accepted with the right label; accepted boxes left unmatched are
/// spurious.
pub fn score_reading(reading: Option<&PlateReading>, truth_text: &str, truth_boxes: &[BoundingBox]) -> CharScore {
    let truth_chars: Vec<char> = truth_text.chars().collect();
    let mut score = CharScore {
        truth: truth_chars.len(),
        ..CharScore::default()
    };
    let Some(reading) = reading else {
        return score;
    };
    let mut pairs: Vec<(usize, usize, usize)> = Vec::new();
    for (i, c) in reading.per_char.iter().enumerate() {
        for (j, t) in truth_boxes.iter().enumerate() {
            let o = horizontal_overlap(&c.bbox, t);
            if o > 0 {
                pairs.push((o, i, j));
            }
        }
    }
    pairs.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let mut read_used = vec![false; reading.per_char.len()];
    let mut truth_used = vec![false; truth_boxes.len()];
    for (_, i, j) in pairs {
        if read_used[i] || truth_used[j] {
            continue;
        }
        read_used[i] = true;
        truth_used[j] = true;
        if reading.per_char[i].prediction.label() == truth_chars.get(j).copied() {
            score.correct += 1;
        }
    }
    score.spurious = reading
        .per_char
        .iter()
        .zip(&read_used)
        .filter(|(c, used)| !**used && !c.prediction.is_rejected())
        .count();
    score
}

/// `max(0, correct - spurious) / truth`, summed over images.
pub fn character_accuracy(scores: &[CharScore]) -> f64 {
    let correct: usize = scores.iter().map(|s| s.correct).sum();
    let spurious: usize = scores.iter().map(|s| s.spurious).sum();
    let truth: usize = scores.iter().map(|s| s.truth).sum();
    if truth == 0 {
        return 0.0;
    }
    correct.saturating_sub(spurious) as f64 / truth as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classify::{train_forest, train_knn, DEFAULT_K};
    use crate::dataset::{build_split, AugmentSpec, DatasetSplit, GlyphAtlas, Scene, SceneSpec, SplitCounts, Symbol};
    use crate::image::GrayImage;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::sync::OnceLock;

    fn reading(items: &[(BoundingBox, Prediction)]) -> PlateReading {
        PlateReading {
            text: items.iter().filter_map(|(_, p)| p.label()).collect(),
            per_char: items
                .iter()
                .map(|&(bbox, prediction)| CharReading { bbox, prediction })
                .collect(),
            plate_box: BoundingBox::new(0, 0, 100, 30),
            timings: StageTimings::default(),
        }
    }

    fn acc(label: char) -> Prediction {
        Prediction::Accepted { label, confidence: 1.0 }
    }

    fn b(x: usize) -> BoundingBox {
        BoundingBox::new(x, 5, 10, 20)
    }

    #[test]
    fn scoring_counts_matches_and_insertions() {
        let truth = [b(0), b(20), b(40)];
        let r = reading(&[(b(0), acc('A')), (b(20), acc('X')), (b(40), acc('C'))]);
        assert_eq!(
            score_reading(Some(&r), "ABC", &truth),
            CharScore {
                correct: 2,
                spurious: 0,
                truth: 3
            }
        );
        // an extra accepted box between characters is an insertion
        let r = reading(&[
            (b(0), acc('A')),
            (b(11), acc('I')),
            (b(20), acc('B')),
            (b(40), acc('C')),
        ]);
        assert_eq!(
            score_reading(Some(&r), "ABC", &truth),
            CharScore {
                correct: 3,
                spurious: 1,
                truth: 3
            }
        );
        // rejected extra boxes cost nothing
        let r = reading(&[(b(0), acc('A')), (b(11), Prediction::RejectedClassA), (b(20), acc('B'))]);
        assert_eq!(
            score_reading(Some(&r), "ABC", &truth),
            CharScore {
                correct: 2,
                spurious: 0,
                truth: 3
            }
        );
        assert_eq!(
            score_reading(None, "ABC", &truth),
            CharScore {
                correct: 0,
                spurious: 0,
                truth: 3
            }
        );
    }

    #[test]
    fn accuracy_formula() {
        let s = [
            CharScore {
                correct: 7,
                spurious: 1,
                truth: 8,
            },
            CharScore {
                correct: 0,
                spurious: 3,
                truth: 2,
            },
        ];
        assert!((character_accuracy(&s) - 0.3).abs() < 1e-12);
        assert_eq!(
            character_accuracy(&[CharScore {
                correct: 0,
                spurious: 5,
                truth: 5
            }]),
            0.0
        );
        assert_eq!(character_accuracy(&[]), 0.0);
    }

    fn small_models() -> &'static (Classifier, Classifier) {
        static MODELS: OnceLock<(Classifier, Classifier)> = OnceLock::new();
        MODELS.get_or_init(|| {
            let atlas = GlyphAtlas::bundled();
            let counts = SplitCounts {
                train: 40,
                validation: 0,
                test: 0,
                specials: 0,
            };
            let split = build_split(&atlas, &counts, &AugmentSpec::default(), 1).unwrap();
            let train = DatasetSplit::real_samples(&split.train);
            let t = RejectionThresholds {
                t_c: 50,
                t_s: 200.0,
                p_e: 0.0,
            };
            (
                Classifier::Forest(train_forest(&train, 40, 20, 2, t).unwrap()),
                Classifier::Knn(train_knn(&train, DEFAULT_K, t).unwrap()),
            )
        })
    }

    #[test]
    fn clean_scene_reads_back() {
        let atlas = GlyphAtlas::bundled();
        let (rf, knn) = small_models();
        let scene =
            crate::dataset::render_scene(&atlas, &SceneSpec::clean("ZG1234AB"), &mut ChaCha8Rng::seed_from_u64(0))
                .unwrap();
        for model in [rf, knn] {
            let r = recognize(&scene.image.clone().into(), model, &PipelineConfig::default()).unwrap();
            assert_eq!(r.text, "ZG1234AB");
            assert_eq!(r.per_char.len(), 8);
            let s = score_reading(Some(&r), &scene.truth.text, &scene.truth.chars);
            assert_eq!(s.correct, 8);
        }
    }

    #[test]
    fn blot_is_rejected_not_read() {
        let atlas = GlyphAtlas::bundled();
        let (rf, _) = small_models();
        let mut spec = SceneSpec::clean("ZG123");
        spec.specials.push((2, Symbol::SpecialA));
        let scene: Scene = crate::dataset::render_scene(&atlas, &spec, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        let r = recognize(&scene.image.clone().into(), rf, &PipelineConfig::default()).unwrap();
        assert_eq!(r.text, "ZG123");
        assert_eq!(r.per_char.len(), 6);
        assert_eq!(r.per_char[2].prediction, Prediction::RejectedClassA);
    }

    #[test]
    fn blank_image_is_no_plate() {
        let (rf, _) = small_models();
        let img: AnyImage = GrayImage::filled(640, 480, 200).into();
        assert!(matches!(
            recognize(&img, rf, &PipelineConfig::default()),
            Err(PipelineError::NoPlate(_))
        ));
        let tiny: AnyImage = GrayImage::filled(2, 2, 0).into();
        assert!(matches!(
            recognize(&tiny, rf, &PipelineConfig::default()),
            Err(PipelineError::NoPlate(_))
        ));
    }

    #[test]
    fn invalid_config_is_reported() {
        let (rf, _) = small_models();
        let mut cfg = PipelineConfig::default();
        cfg.preprocess.bilateral_kernel = 4;
        let img: AnyImage = GrayImage::filled(64, 48, 200).into();
        assert!(matches!(recognize(&img, rf, &cfg), Err(PipelineError::Config(_))));
    }

    #[test]
    fn threshold_override_applies() {
        let atlas = GlyphAtlas::bundled();
        let (rf, _) = small_models();
        let scene = crate::dataset::render_scene(&atlas, &SceneSpec::clean("HELLO"), &mut ChaCha8Rng::seed_from_u64(0))
            .unwrap();
        let cfg = PipelineConfig {
            thresholds: ThresholdOverrides {
                t_c: Some(400),
                ..Default::default()
            },
            ..Default::default()
        };
        let r = recognize(&scene.image.clone().into(), rf, &cfg).unwrap();
        assert_eq!(r.text, "");
        assert!(r.per_char.iter().all(|c| c.prediction == Prediction::RejectedClassA));
    }

    #[test]
    fn recognition_is_deterministic() {
        let atlas = GlyphAtlas::bundled();
        let (rf, _) = small_models();
        let scene = Scene::generate(&atlas, 3, 0.5).unwrap();
        let img: AnyImage = scene.image.into();
        let a = recognize(&img, rf, &PipelineConfig::default());
        let b = recognize(&img, rf, &PipelineConfig::default());
        let strip = |r: Result<PlateReading, PipelineError>| r.ok().map(|r| (r.text, r.per_char, r.plate_box));
        assert_eq!(strip(a), strip(b));
    }
}
