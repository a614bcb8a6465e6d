//! `anpr`: synthesize data, train glyph classifiers, read plates and score
//! readings against ground truth.

use std::fmt::Write as _;
use std::fs;
use std::io::{self, ErrorKind};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anpr_core::classify::{
    child_seed, load_model, save_model, train_forest, train_knn, Classifier, ClassifierKind, RejectionThresholds,
    DEFAULT_FEATURES_PER_SPLIT, DEFAULT_K, DEFAULT_TREES,
};
use anpr_core::config::load_config;
use anpr_core::dataset::{
    build_split, calibrate_thresholds, read_glyphs, read_scenes, write_glyphs, write_scene, AugmentSpec, DatasetSplit,
    GlyphAtlas, Scene, SplitCounts,
};
use anpr_core::locate::sobel_vertical_binary;
use anpr_core::netpbm::write_netpbm;
use anpr_core::pipeline::{
    character_accuracy, recognize, recognize_with_artifacts, score_reading, Artifacts, CharScore, PipelineConfig,
};
use anpr_core::segment::{project, Axis, Projection};
use anpr_core::{DatasetError, ModelFormatError, PipelineError};
use clap::{Parser, Subcommand};
use serde::Serialize;

const EXIT_NO_PLATE: u8 = 2;
const EXIT_USAGE: u8 = 64;
const EXIT_NO_INPUT: u8 = 66;
const EXIT_SOFTWARE: u8 = 70;

#[derive(Parser)]
#[command(name = "anpr", version, about = "Number-plate recognition from Netpbm images")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic dataset: labeled glyphs and plate scenes.
    Synth {
        #[arg(long)]
        out: PathBuf,
        /// Glyphs per class, split 220:30:100 into train, validation and test.
        #[arg(long, default_value_t = 350)]
        per_class: usize,
        #[arg(long, default_value_t = 100)]
        scenes: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Background clutter in [0, 1].
        #[arg(long, default_value_t = 0.5)]
        clutter: f64,
    },
    /// Train a classifier on `glyphs/` and calibrate it on the validation glyphs.
    Train {
        #[arg(long)]
        data: PathBuf,
        /// `forest` or `knn`; defaults to the config file's classifier, then forest.
        #[arg(long)]
        classifier: Option<String>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = DEFAULT_TREES)]
        trees: usize,
        /// Features tried per split (forest).
        #[arg(long, default_value_t = DEFAULT_FEATURES_PER_SPLIT)]
        features: usize,
        /// Neighbours (kNN).
        #[arg(long, default_value_t = DEFAULT_K)]
        k: usize,
        /// Defaults to the config file's seed, then 0.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Read the plate in one image.
    Recognize {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        image: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Directory for intermediate images, projections and glyph crops.
        #[arg(long)]
        debug: Option<PathBuf>,
        #[arg(long)]
        json: bool,
    },
    /// Character accuracy and latency of each model over a scene directory.
    Evaluate {
        /// Comma-separated model files.
        #[arg(long, value_delimiter = ',', required = true)]
        models: Vec<PathBuf>,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        json: bool,
    },
}

#[derive(Debug)]
enum Failure {
    NoPlate(String),
    Usage(String),
    NoInput(String),
    Internal(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::NoPlate(_) => EXIT_NO_PLATE,
            Failure::Usage(_) => EXIT_USAGE,
            Failure::NoInput(_) => EXIT_NO_INPUT,
            Failure::Internal(_) => EXIT_SOFTWARE,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::NoPlate(m) | Failure::Usage(m) | Failure::NoInput(m) | Failure::Internal(m) => m,
        }
    }
}

fn io_failure(path: &Path, e: &io::Error) -> Failure {
    let m = format!("{}: {e}", path.display());
    if e.kind() == ErrorKind::NotFound {
        Failure::NoInput(m)
    } else {
        Failure::Internal(m)
    }
}

fn dataset_failure(path: &Path, e: DatasetError) -> Failure {
    match e {
        DatasetError::Io(e) => io_failure(path, &e),
        DatasetError::Image(anpr_core::ImageError::Io(e)) => io_failure(path, &e),
        DatasetError::Config(e) => Failure::Usage(format!("{}: {e}", path.display())),
        other => Failure::Internal(format!("{}: {other}", path.display())),
    }
}

fn model_failure(path: &Path, e: ModelFormatError) -> Failure {
    match e {
        ModelFormatError::Io(e) => io_failure(path, &e),
        other => Failure::Internal(format!("{}: {other}", path.display())),
    }
}

fn pipeline_config(path: Option<&Path>) -> Result<PipelineConfig, Failure> {
    match path {
        Some(p) => load_config(p).map_err(|e| dataset_failure(p, e)),
        None => Ok(PipelineConfig::default()),
    }
}

fn write_text(path: &Path, text: &str) -> Result<(), Failure> {
    fs::write(path, text).map_err(|e| io_failure(path, &e))
}

fn synth(out: &Path, per_class: usize, scenes: usize, seed: u64, clutter: f64) -> Result<(), Failure> {
    if per_class < 3 {
        return Err(Failure::Usage("--per-class must be at least 3".into()));
    }
    if !(0.0..=1.0).contains(&clutter) {
        return Err(Failure::Usage("--clutter must be in [0, 1]".into()));
    }
    let atlas = GlyphAtlas::bundled();
    let aug = AugmentSpec {
        seed,
        ..AugmentSpec::default()
    };
    let split = build_split(&atlas, &SplitCounts::from_per_class(per_class), &aug, seed)
        .map_err(|e| Failure::Internal(e.to_string()))?;
    let glyphs = write_glyphs(out, &split).map_err(|e| dataset_failure(out, e))?;
    for i in 0..scenes {
        // scene seeds come from a separate stream so they never coincide with glyph seeds
        let scene =
            Scene::generate(&atlas, child_seed(!seed, i), clutter).map_err(|e| Failure::Internal(e.to_string()))?;
        write_scene(out, &format!("scene-{i:04}"), &scene).map_err(|e| dataset_failure(out, e))?;
    }
    println!("wrote {glyphs} glyphs and {scenes} scenes to {}", out.display());
    Ok(())
}

struct TrainArgs<'a> {
    data: &'a Path,
    classifier: Option<&'a str>,
    out: &'a Path,
    trees: usize,
    features: usize,
    k: usize,
    seed: Option<u64>,
    config: Option<&'a Path>,
}

fn train(a: TrainArgs<'_>) -> Result<(), Failure> {
    let cfg = pipeline_config(a.config)?;
    let kind: ClassifierKind = match a.classifier {
        Some(name) => name
            .parse()
            .map_err(|e: anpr_core::ConfigError| Failure::Usage(e.to_string()))?,
        None => cfg.classifier,
    };
    let seed = a.seed.unwrap_or(cfg.seed);
    let split = read_glyphs(a.data).map_err(|e| dataset_failure(a.data, e))?;
    let samples = DatasetSplit::real_samples(&split.train);
    let base = cfg.thresholds.apply(RejectionThresholds::default());
    let model = match kind {
        ClassifierKind::Forest => train_forest(&samples, a.trees, a.features, seed, base).map(Classifier::Forest),
        ClassifierKind::Knn => train_knn(&samples, a.k, base).map(Classifier::Knn),
    }
    .map_err(|e| Failure::Usage(format!("cannot train on {}: {e}", a.data.display())))?;

    let (model, report) = match calibrate_thresholds(&model, &split.validation) {
        Ok((t, report)) => (model.with_thresholds(t), Some(report)),
        Err(e @ (DatasetError::NoSpecials | DatasetError::NoRealGlyphs)) => {
            eprintln!("warning: thresholds not calibrated ({e}); keeping {base:?}");
            (model, None)
        }
        Err(e) => return Err(Failure::Internal(e.to_string())),
    };
    save_model(&model, a.out).map_err(|e| model_failure(a.out, e))?;
    println!(
        "trained {kind} on {} glyphs; model written to {}",
        samples.len(),
        a.out.display()
    );
    if let Some(report) = report {
        let path = PathBuf::from(format!("{}.calibration.txt", a.out.display()));
        write_text(&path, &report.to_string())?;
        print!("{report}");
    }
    Ok(())
}

fn projection_text(p: &Projection) -> String {
    let mut s = String::new();
    for c in &p.counts {
        let _ = writeln!(s, "{c}");
    }
    s
}

fn write_debug(dir: &Path, image: &Path, art: &Artifacts) -> Result<(), Failure> {
    fs::create_dir_all(dir).map_err(|e| io_failure(dir, &e))?;
    let stem = image.file_stem().and_then(|s| s.to_str()).unwrap_or("image");
    let pbm = |stage: &str, img: &anpr_core::BinaryImage| -> Result<(), Failure> {
        let path = dir.join(format!("{stem}.{stage}.pbm"));
        write_netpbm(&img.clone().into(), &path).map_err(|e| Failure::Internal(format!("{}: {e}", path.display())))
    };
    pbm("binary", &art.binary)?;
    pbm("dilated", &art.dilated)?;
    pbm("edges", art.edges.image())?;
    if let Some(plate) = &art.plate {
        pbm("plate", plate)?;
        if let Ok(edges) = sobel_vertical_binary(plate, 128) {
            write_text(
                &dir.join(format!("{stem}.rows.txt")),
                &projection_text(&project(edges.image(), Axis::Rows)),
            )?;
        }
    }
    if let Some(stripped) = &art.stripped {
        pbm("stripped", stripped)?;
        write_text(
            &dir.join(format!("{stem}.columns.txt")),
            &projection_text(&project(stripped, Axis::Columns)),
        )?;
    }
    for (i, g) in art.glyphs.iter().enumerate() {
        pbm(&format!("char{i:02}"), &g.to_image())?;
    }
    Ok(())
}

fn load(path: &Path) -> Result<Classifier, Failure> {
    load_model(path).map_err(|e| model_failure(path, e))
}

fn read_image(path: &Path) -> Result<anpr_core::AnyImage, Failure> {
    anpr_core::netpbm::read_netpbm(path).map_err(|e| match e {
        anpr_core::ImageError::Io(io) => io_failure(path, &io),
        other => Failure::Internal(format!("{}: {other}", path.display())),
    })
}

fn json<T: Serialize>(value: &T) -> Result<String, Failure> {
    serde_json::to_string(value).map_err(|e| Failure::Internal(e.to_string()))
}

fn recognize_cmd(
    model: &Path,
    image: &Path,
    config: Option<&Path>,
    debug: Option<&Path>,
    as_json: bool,
) -> Result<(), Failure> {
    let cfg = pipeline_config(config)?;
    let model = load(model)?;
    let img = read_image(image)?;
    let (result, art) = recognize_with_artifacts(&img, &model, &cfg);
    if let (Some(dir), Some(art)) = (debug, &art) {
        write_debug(dir, image, art)?;
    }
    match result {
        Ok(reading) => {
            if as_json {
                println!("{}", json(&reading)?);
            } else {
                println!("{}", reading.text);
                let t = &reading.timings;
                eprintln!(
                    "plate {} | {} glyphs, {} rejected | {:.1} ms (preprocess {:.1}, locate {:.1}, segment {:.1}, classify {:.1})",
                    reading.plate_box,
                    reading.per_char.len(),
                    reading.per_char.iter().filter(|c| c.prediction.is_rejected()).count(),
                    t.total_ms,
                    t.preprocess_ms,
                    t.locate_ms,
                    t.segment_ms,
                    t.classify_ms
                );
            }
            Ok(())
        }
        Err(PipelineError::NoPlate(why)) => Err(Failure::NoPlate(format!("no plate found: {why}"))),
        Err(PipelineError::Config(e)) => Err(Failure::Usage(e.to_string())),
        Err(e) => Err(Failure::Internal(e.to_string())),
    }
}

#[derive(Debug, Serialize)]
struct EvalRow {
    model: String,
    classifier: ClassifierKind,
    images: usize,
    no_plate: usize,
    #[serde(flatten)]
    score: CharScore,
    accuracy: f64,
    seconds_per_image: f64,
}

#[derive(Debug, Serialize)]
struct Evaluation {
    scenes: usize,
    rows: Vec<EvalRow>,
}

fn display_name(kind: ClassifierKind) -> &'static str {
    match kind {
        ClassifierKind::Forest => "RF",
        ClassifierKind::Knn => "kNN",
    }
}

fn evaluate(models: &[PathBuf], data: &Path, config: Option<&Path>, as_json: bool) -> Result<(), Failure> {
    let cfg = pipeline_config(config)?;
    let loaded = models.iter().map(|p| load(p)).collect::<Result<Vec<_>, _>>()?;
    let scenes = read_scenes(data).map_err(|e| dataset_failure(data, e))?;
    if scenes.is_empty() {
        return Err(Failure::NoInput(format!(
            "{}: no scenes with .truth files",
            data.display()
        )));
    }
    let mut rows = Vec::with_capacity(models.len());
    for (path, model) in models.iter().zip(&loaded) {
        let mut scores = Vec::with_capacity(scenes.len());
        let mut no_plate = 0;
        let mut seconds = 0.0;
        for rec in &scenes {
            let start = Instant::now();
            let result = recognize(&rec.image, model, &cfg);
            seconds += start.elapsed().as_secs_f64();
            let reading = match result {
                Ok(r) => Some(r),
                Err(PipelineError::NoPlate(_)) => {
                    no_plate += 1;
                    None
                }
                Err(PipelineError::Config(e)) => return Err(Failure::Usage(e.to_string())),
                Err(e) => return Err(Failure::Internal(format!("{}: {e}", rec.path.display()))),
            };
            scores.push(score_reading(reading.as_ref(), &rec.truth.text, &rec.truth.chars));
        }
        let total = scores.iter().fold(CharScore::default(), |a, s| CharScore {
            correct: a.correct + s.correct,
            spurious: a.spurious + s.spurious,
            truth: a.truth + s.truth,
        });
        rows.push(EvalRow {
            model: path.display().to_string(),
            classifier: model.kind(),
            images: scenes.len(),
            no_plate,
            score: total,
            accuracy: character_accuracy(&scores),
            seconds_per_image: seconds / scenes.len() as f64,
        });
    }
    if as_json {
        println!(
            "{}",
            json(&Evaluation {
                scenes: scenes.len(),
                rows
            })?
        );
        return Ok(());
    }
    let names: Vec<String> = rows
        .iter()
        .map(|r| {
            let file = Path::new(&r.model)
                .file_name()
                .and_then(|f| f.to_str())
                .unwrap_or(&r.model);
            format!("{} ({file})", display_name(r.classifier))
        })
        .collect();
    let width = names.iter().map(String::len).max().unwrap_or(0).max("Classifier".len());
    println!("{:<width$} | Accuracy | s/image", "Classifier");
    println!("{}-|----------|--------", "-".repeat(width));
    for (name, r) in names.iter().zip(&rows) {
        println!(
            "{name:<width$} | {:>7.2}% | {:.4}",
            100.0 * r.accuracy,
            r.seconds_per_image
        );
    }
    for r in rows.iter().filter(|r| r.no_plate > 0) {
        eprintln!("{}: no plate found in {} of {} images", r.model, r.no_plate, r.images);
    }
    Ok(())
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Synth {
            out,
            per_class,
            scenes,
            seed,
            clutter,
        } => synth(&out, per_class, scenes, seed, clutter),
        Command::Train {
            data,
            classifier,
            out,
            trees,
            features,
            k,
            seed,
            config,
        } => train(TrainArgs {
            data: &data,
            classifier: classifier.as_deref(),
            out: &out,
            trees,
            features,
            k,
            seed,
            config: config.as_deref(),
        }),
        Command::Recognize {
            model,
            image,
            config,
            debug,
            json,
        } => recognize_cmd(&model, &image, config.as_deref(), debug.as_deref(), json),
        Command::Evaluate {
            models,
            data,
            config,
            json,
        } => evaluate(&models, &data, config.as_deref(), json),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("anpr: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}
