//! Ingestion, labelling, splitting and synthetic EEG generation.

mod io;
mod split;
mod synth;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::Tensor;
use crate::signal::LabelInfo;

pub use io::{
    load_manifest, load_recording, read_manifest, save_recording, write_manifest, ManifestEntry, RecordingFormat,
};
pub use split::{split, SplitMode, SplitSpec};
pub use synth::{synth_audit, synth_generate, AuditEntry, BandBoost, SynthClass, SynthSpec};

/// Ratings at or above this value are "high".
pub const RATING_THRESHOLD: f64 = 5.5;

/// How recording labels map to class indices.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind", deny_unknown_fields)]
pub enum LabelScheme {
    /// positive = 0, negative = 1, neutral = 2.
    ThreeClass,
    ValenceBinary,
    ArousalBinary,
    /// HVHA = 0, HVLA = 1, LVHA = 2, LVLA = 3.
    FourQuadrant,
    /// Class tags matched by name, in the listed order.
    Categorical {
        classes: Vec<String>,
    },
}

impl LabelScheme {
    pub fn n_classes(&self) -> usize {
        match self {
            LabelScheme::ThreeClass => 3,
            LabelScheme::ValenceBinary | LabelScheme::ArousalBinary => 2,
            LabelScheme::FourQuadrant => 4,
            LabelScheme::Categorical { classes } => classes.len(),
        }
    }

    pub fn class_names(&self) -> Vec<String> {
        let names: &[&str] = match self {
            LabelScheme::ThreeClass => &["positive", "negative", "neutral"],
            LabelScheme::ValenceBinary => &["low-valence", "high-valence"],
            LabelScheme::ArousalBinary => &["low-arousal", "high-arousal"],
            LabelScheme::FourQuadrant => &["HVHA", "HVLA", "LVHA", "LVLA"],
            LabelScheme::Categorical { classes } => return classes.clone(),
        };
        names.iter().map(|s| s.to_string()).collect()
    }
}

impl fmt::Display for LabelScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LabelScheme::ThreeClass => f.write_str("three-class"),
            LabelScheme::ValenceBinary => f.write_str("valence-binary"),
            LabelScheme::ArousalBinary => f.write_str("arousal-binary"),
            LabelScheme::FourQuadrant => f.write_str("four-quadrant"),
            LabelScheme::Categorical { classes } => write!(f, "categorical[{}]", classes.join(",")),
        }
    }
}

impl FromStr for LabelScheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "three-class" | "threeclass" => Ok(LabelScheme::ThreeClass),
            "valence-binary" | "valence" => Ok(LabelScheme::ValenceBinary),
            "arousal-binary" | "arousal" => Ok(LabelScheme::ArousalBinary),
            "four-quadrant" | "quadrant" => Ok(LabelScheme::FourQuadrant),
            other => Err(Error::invalid(format!("unknown label scheme '{other}'"))),
        }
    }
}

fn is_high(rating: f64) -> bool {
    rating >= RATING_THRESHOLD
}

/// Maps a recording's label metadata to a class index under `scheme`.
pub fn assign_label(label: &LabelInfo, scheme: &LabelScheme) -> Result<usize> {
    let rating =
        || label.rating.ok_or_else(|| Error::invalid(format!("{scheme} labels need a valence/arousal rating")));
    let tag = || label.class_tag.as_deref().ok_or_else(|| Error::invalid(format!("{scheme} labels need a class tag")));
    match scheme {
        LabelScheme::ThreeClass => match tag()?.trim().to_ascii_lowercase().as_str() {
            "positive" | "1" => Ok(0),
            "negative" | "-1" => Ok(1),
            "neutral" | "0" => Ok(2),
            other => Err(Error::invalid(format!("unknown three-class tag '{other}'"))),
        },
        LabelScheme::ValenceBinary => Ok(is_high(rating()?.valence) as usize),
        LabelScheme::ArousalBinary => Ok(is_high(rating()?.arousal) as usize),
        LabelScheme::FourQuadrant => {
            let r = rating()?;
            Ok(match (is_high(r.valence), is_high(r.arousal)) {
                (true, true) => 0,
                (true, false) => 1,
                (false, true) => 2,
                (false, false) => 3,
            })
        }
        LabelScheme::Categorical { classes } => {
            let t = tag()?;
            classes
                .iter()
                .position(|c| c == t)
                .ok_or_else(|| Error::invalid(format!("class tag '{t}' is not one of {classes:?}")))
        }
    }
}

/// One classifier example: a per-window feature tensor and its label.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledWindow {
    pub features: Tensor,
    pub class_index: usize,
    pub trial_id: String,
    pub subject_id: String,
    pub window_index: usize,
}

/// Number of windows per class; classes beyond the largest index seen are
/// omitted unless `n_classes` is larger.
pub fn class_counts(windows: &[LabeledWindow], n_classes: usize) -> Vec<usize> {
    let n = windows.iter().map(|w| w.class_index + 1).max().unwrap_or(0).max(n_classes);
    let mut counts = vec![0; n];
    for w in windows {
        counts[w.class_index] += 1;
    }
    counts
}
