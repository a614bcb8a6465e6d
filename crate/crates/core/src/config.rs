//! `key = value` pipeline configuration files.
//!
//! ```text
//! # comments and blank lines are ignored
//! preprocess.bilateral_kernel = 5
//! locate.window_width_fracs = 0.25, 0.33, 0.45
//! segment.min_char_width = 3
//! classifier = forest
//! thresholds.p_e = 0.4
//! seed = 7
//! ```
//!
//! Keys not present keep their defaults. The result is validated as a whole.

use std::fmt::Display;
use std::path::Path;
use std::str::FromStr;

use crate::error::{ConfigError, DatasetError};
use crate::pipeline::PipelineConfig;

fn value<T: FromStr>(line: usize, key: &str, raw: &str) -> Result<T, ConfigError>
where
    T::Err: Display,
{
    raw.parse().map_err(|e: T::Err| ConfigError::Syntax {
        line,
        reason: format!("{key}: `{raw}`: {e}"),
    })
}

fn set(cfg: &mut PipelineConfig, line: usize, key: &str, raw: &str) -> Result<(), ConfigError> {
    let p = &mut cfg.preprocess;
    let l = &mut cfg.locate;
    let s = &mut cfg.segment;
    let t = &mut cfg.thresholds;
    match key {
        "preprocess.bilateral_kernel" => p.bilateral_kernel = value(line, key, raw)?,
        "preprocess.bilateral_sigma_space" => p.bilateral_sigma_space = value(line, key, raw)?,
        "preprocess.bilateral_sigma_range" => p.bilateral_sigma_range = value(line, key, raw)?,
        "preprocess.clahe_tile" => p.clahe_tile = value(line, key, raw)?,
        "preprocess.clahe_clip" => p.clahe_clip = value(line, key, raw)?,
        "preprocess.binarize_threshold" => p.binarize_threshold = value(line, key, raw)?,
        "preprocess.dilate_radius" => p.dilate_radius = value(line, key, raw)?,
        "preprocess.dilate_iterations" => p.dilate_iterations = value(line, key, raw)?,
        "locate.edge_threshold" => l.edge_threshold = value(line, key, raw)?,
        "locate.window_width_fracs" => {
            l.window_width_fracs = raw
                .split(',')
                .map(|f| value(line, key, f.trim()))
                .collect::<Result<_, _>>()?
        }
        "locate.plate_aspect" => l.plate_aspect = value(line, key, raw)?,
        "locate.stride" => l.stride = value(line, key, raw)?,
        "segment.min_char_width" => s.min_char_width = value(line, key, raw)?,
        "segment.min_char_ink" => s.min_char_ink = value(line, key, raw)?,
        "segment.glyph_size" => s.glyph_size = value(line, key, raw)?,
        "segment.drop_edge_bands" => s.drop_edge_bands = value(line, key, raw)?,
        "classifier" => cfg.classifier = value(line, key, raw)?,
        "thresholds.t_c" => t.t_c = Some(value(line, key, raw)?),
        "thresholds.t_s" => t.t_s = Some(value(line, key, raw)?),
        "thresholds.p_e" => t.p_e = Some(value(line, key, raw)?),
        "seed" => cfg.seed = value(line, key, raw)?,
        _ => return Err(ConfigError::UnknownKey(key.to_string())),
    }
    Ok(())
}

pub fn parse_config(text: &str) -> Result<PipelineConfig, ConfigError> {
    let mut cfg = PipelineConfig::default();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or_default().trim();
        if line.is_empty() {
            continue;
        }
        let (key, val) = line.split_once('=').ok_or_else(|| ConfigError::Syntax {
            line: i + 1,
            reason: format!("expected `key = value`, got `{line}`"),
        })?;
        set(&mut cfg, i + 1, key.trim(), val.trim())?;
    }
    cfg.validate()?;
    Ok(cfg)
}

pub fn load_config(path: impl AsRef<Path>) -> Result<PipelineConfig, DatasetError> {
    Ok(parse_config(&std::fs::read_to_string(path)?)?)
}
