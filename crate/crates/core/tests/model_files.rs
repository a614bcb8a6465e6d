//! Model files: round trips, corruption and truncation.

use std::sync::OnceLock;

use anpr_core::classify::{
    encode_model, load_model, parse_model, save_model, train_forest, train_knn, Classifier, RejectionThresholds,
};
use anpr_core::dataset::{build_split, AugmentSpec, DatasetSplit, GlyphAtlas, SplitCounts};
use anpr_core::{GlyphSample, ModelFormatError};
use proptest::prelude::*;

fn models() -> Vec<Classifier> {
    static MODELS: OnceLock<Vec<Classifier>> = OnceLock::new();
    MODELS.get_or_init(train_models).clone()
}

fn train_models() -> Vec<Classifier> {
    let s = build_split(
        &GlyphAtlas::bundled(),
        &SplitCounts::from_per_class(20),
        &AugmentSpec::default(),
        9,
    )
    .unwrap();
    let samples = DatasetSplit::real_samples(&s.train);
    let t = RejectionThresholds {
        t_c: 30,
        t_s: 90.0,
        p_e: 0.25,
    };
    vec![
        Classifier::Forest(train_forest(&samples, 8, 20, 2, t).unwrap()),
        Classifier::Knn(train_knn(&samples, 3, t).unwrap()),
    ]
}

#[test]
fn saved_models_load_identically() {
    let dir = tempfile::tempdir().unwrap();
    for (i, m) in models().into_iter().enumerate() {
        let path = dir.path().join(format!("m{i}"));
        save_model(&m, &path).unwrap();
        let back = load_model(&path).unwrap();
        assert_eq!(back, m);
        assert_eq!(back.thresholds(), m.thresholds());
        save_model(&back, dir.path().join("again")).unwrap();
        assert_eq!(
            std::fs::read(&path).unwrap(),
            std::fs::read(dir.path().join("again")).unwrap()
        );
    }
}

#[test]
fn corrupted_tree_lines_fail_the_checksum() {
    let text = encode_model(&models()[0]);
    let lines: Vec<&str> = text.lines().collect();
    let nodes: Vec<usize> = (0..lines.len())
        .filter(|&i| lines[i].starts_with("S ") || lines[i].starts_with("L "))
        .collect();
    assert!(!nodes.is_empty());
    for &i in nodes.iter().step_by(nodes.len() / 50 + 1) {
        let mut bad: Vec<String> = lines.iter().map(|l| l.to_string()).collect();
        let pos = bad[i].rfind(|c: char| c.is_ascii_digit()).unwrap();
        let digit = bad[i].as_bytes()[pos];
        let swapped = if digit == b'9' { '8' } else { (digit + 1) as char };
        bad[i].replace_range(pos..pos + 1, &swapped.to_string());
        let bad = bad.join("\n") + "\n";
        assert!(parse_model(&bad).is_err(), "edit on line {} accepted", i + 1);
    }
}

#[test]
fn truncated_files_are_rejected() {
    let text = encode_model(&models()[1]);
    for cut in [0, 1, text.len() / 3, text.len() - 1] {
        assert!(parse_model(&text[..cut]).is_err(), "cut at {cut}");
    }
}

#[test]
fn missing_file_is_an_io_error() {
    let dir = tempfile::tempdir().unwrap();
    assert!(matches!(
        load_model(dir.path().join("absent")),
        Err(ModelFormatError::Io(_))
    ));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn loaded_models_predict_like_the_original(bits in proptest::collection::vec(any::<bool>(), 400)) {
        let dir = tempfile::tempdir().unwrap();
        let g = GlyphSample::from_fn(None, |x, y| bits[y * 20 + x]);
        for (i, m) in models().into_iter().enumerate() {
            let path = dir.path().join(format!("m{i}"));
            save_model(&m, &path).unwrap();
            prop_assert_eq!(load_model(&path).unwrap().predict(&g), m.predict(&g));
        }
    }
}
