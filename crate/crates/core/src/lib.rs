//! License-plate recognition from first principles: Netpbm I/O, image
//! preprocessing, edge-density plate location, projection segmentation and
//! random-forest / kNN glyph classification with two-stage rejection.

pub mod classify;
pub mod config;
pub mod dataset;
pub mod error;
pub mod glyph;
pub mod image;
pub mod locate;
pub mod netpbm;
pub mod pipeline;
pub mod preprocess;
pub mod segment;

pub use error::*;
pub use glyph::{featurize, ink_count, FeatureVector, GlyphSample, ALPHABET};
pub use image::{AnyImage, BinaryImage, BoundingBox, GrayImage, Polarity, RgbImage};
pub use pipeline::{recognize, PipelineConfig, PlateReading};
