//! Choosing rejection thresholds on a validation set.
//!
//! `t_c` is half the sparsest real glyph's ink. The classifier threshold is
//! then the loosest value that still rejects at least 95% of the special
//! symbols; it sits halfway between the deciding special's score and the
//! next observed score, so every validation glyph is on a definite side.

use std::fmt;

use serde::Serialize;

use super::LabeledGlyph;
use crate::classify::{Classifier, ClassifierKind, Prediction, RejectionThresholds};
use crate::error::DatasetError;
use crate::glyph::{featurize, ink_count};

const SPECIAL_REJECT_TARGET: f64 = 0.95;

/// Ink count and classifier score (forest vote fraction or kNN mean
/// neighbour distance) of one validation glyph.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoredGlyph {
    pub ink: u32,
    pub score: f64,
}

/// Thresholds from raw scores; `base` supplies the value of the threshold
/// the classifier kind does not use.
pub fn calibrate_scores(
    kind: ClassifierKind,
    base: RejectionThresholds,
    reals: &[ScoredGlyph],
    specials: &[ScoredGlyph],
) -> Result<RejectionThresholds, DatasetError> {
    let min_ink = reals.iter().map(|g| g.ink).min().ok_or(DatasetError::NoRealGlyphs)?;
    if specials.is_empty() {
        return Err(DatasetError::NoSpecials);
    }
    let t_c = min_ink / 2;
    let survivors: Vec<f64> = specials.iter().filter(|g| g.ink >= t_c).map(|g| g.score).collect();
    let required = (SPECIAL_REJECT_TARGET * specials.len() as f64).ceil() as usize;
    let need = required.saturating_sub(specials.len() - survivors.len());
    let observed: Vec<f64> = reals
        .iter()
        .filter(|g| g.ink >= t_c)
        .map(|g| g.score)
        .chain(survivors.iter().copied())
        .collect();
    let mut t = RejectionThresholds { t_c, ..base };
    match kind {
        ClassifierKind::Forest => {
            t.p_e = if need == 0 {
                0.0
            } else {
                let mut s = survivors;
                s.sort_by(f64::total_cmp);
                let crit = s[need - 1];
                let next = observed.iter().copied().filter(|&v| v > crit).min_by(f64::total_cmp);
                match next {
                    Some(next) => (crit + next) / 2.0,
                    None => (crit + 1.0) / 2.0,
                }
            };
        }
        ClassifierKind::Knn => {
            t.t_s = if need == 0 {
                observed.iter().copied().fold(0.0, f64::max)
            } else {
                let mut s = survivors;
                s.sort_by(|a, b| b.total_cmp(a));
                let crit = s[need - 1];
                let next = observed.iter().copied().filter(|&v| v < crit).max_by(f64::total_cmp);
                (crit + next.unwrap_or(0.0)) / 2.0
            };
        }
    }
    Ok(t)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CalibrationReport {
    pub classifier: ClassifierKind,
    pub thresholds: RejectionThresholds,
    pub min_real_ink: u32,
    pub real: usize,
    pub special_a: usize,
    pub special_b: usize,
    /// Real glyphs rejected by ink count / by classifier score.
    pub real_rejected_a: usize,
    pub real_rejected_b: usize,
    /// Specials rejected by either stage.
    pub special_a_rejected: usize,
    pub special_b_rejected: usize,
    pub real_reject_rate: f64,
    pub special_reject_rate: f64,
}

impl fmt::Display for CalibrationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let t = &self.thresholds;
        writeln!(f, "classifier           {}", self.classifier)?;
        writeln!(f, "t_c                  {}", t.t_c)?;
        writeln!(f, "t_s                  {}", t.t_s)?;
        writeln!(f, "p_e                  {}", t.p_e)?;
        writeln!(f, "min real ink         {}", self.min_real_ink)?;
        writeln!(
            f,
            "real rejected        {} + {} of {} ({:.2}%)",
            self.real_rejected_a,
            self.real_rejected_b,
            self.real,
            100.0 * self.real_reject_rate
        )?;
        writeln!(
            f,
            "SPECIAL_A rejected   {} of {}",
            self.special_a_rejected, self.special_a
        )?;
        writeln!(
            f,
            "SPECIAL_B rejected   {} of {}",
            self.special_b_rejected, self.special_b
        )?;
        writeln!(f, "special reject rate  {:.2}%", 100.0 * self.special_reject_rate)
    }
}

fn score(model: &Classifier, g: &LabeledGlyph) -> ScoredGlyph {
    let fv = featurize(&g.glyph);
    ScoredGlyph {
        ink: ink_count(&g.glyph),
        score: match model {
            Classifier::Forest(m) => m.vote(&fv).fraction,
            Classifier::Knn(m) => m.vote(&fv).mean_distance,
        },
    }
}

/// Calibrates on the validation glyphs and reports the resulting operating
/// point. Deterministic in `(model, validation)`.
pub fn calibrate_thresholds(
    model: &Classifier,
    validation: &[LabeledGlyph],
) -> Result<(RejectionThresholds, CalibrationReport), DatasetError> {
    let (specials, reals): (Vec<&LabeledGlyph>, Vec<&LabeledGlyph>) =
        validation.iter().partition(|g| g.symbol.is_special());
    let real_scores: Vec<ScoredGlyph> = reals.iter().map(|g| score(model, g)).collect();
    let special_scores: Vec<ScoredGlyph> = specials.iter().map(|g| score(model, g)).collect();
    let t = calibrate_scores(model.kind(), model.thresholds(), &real_scores, &special_scores)?;

    let tuned = model.clone().with_thresholds(t);
    let mut report = CalibrationReport {
        classifier: model.kind(),
        thresholds: t,
        min_real_ink: real_scores.iter().map(|g| g.ink).min().unwrap_or(0),
        real: reals.len(),
        special_a: 0,
        special_b: 0,
        real_rejected_a: 0,
        real_rejected_b: 0,
        special_a_rejected: 0,
        special_b_rejected: 0,
        real_reject_rate: 0.0,
        special_reject_rate: 0.0,
    };
    for g in &reals {
        match tuned.predict(&g.glyph) {
            Prediction::RejectedClassA => report.real_rejected_a += 1,
            Prediction::RejectedClassB => report.real_rejected_b += 1,
            Prediction::Accepted { .. } => {}
        }
    }
    for g in &specials {
        let rejected = tuned.predict(&g.glyph).is_rejected();
        match g.symbol {
            super::Symbol::SpecialA => {
                report.special_a += 1;
                report.special_a_rejected += usize::from(rejected);
            }
            _ => {
                report.special_b += 1;
                report.special_b_rejected += usize::from(rejected);
            }
        }
    }
    report.real_reject_rate = (report.real_rejected_a + report.real_rejected_b) as f64 / reals.len() as f64;
    report.special_reject_rate = (report.special_a_rejected + report.special_b_rejected) as f64 / specials.len() as f64;
    Ok((t, report))
}
