//! Flat DE and the pair-based asymmetry baselines (DASM, RASM, DCAU).
//!
//! Every feature vector is band-major: all pairs (or channels) of the first
//! selected band, then the next band, and so on.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{BandSelection, WindowedDeTensor};
use crate::error::{Error, Result};

const SEED62_CHANNELS: &str = include_str!("../../data/pairings/seed62_channels.txt");
const SEED62_HEMISPHERIC: &str = include_str!("../../data/pairings/seed62_hemispheric.txt");
const SEED62_FRONTAL_POSTERIOR: &str = include_str!("../../data/pairings/seed62_frontal_posterior.txt");
const DEAP32_CHANNELS: &str = include_str!("../../data/pairings/deap32_channels.txt");
const DEAP32_HEMISPHERIC: &str = include_str!("../../data/pairings/deap32_hemispheric.txt");
const DEAP32_FRONTAL_POSTERIOR: &str = include_str!("../../data/pairings/deap32_frontal_posterior.txt");

/// RASM denominators smaller than this in magnitude are replaced by ±this.
const RASM_MIN_DENOMINATOR: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PairingKind {
    Hemispheric,
    FrontalPosterior,
}

/// Electrode layouts with shipped default pairings.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Montage {
    Seed62,
    Deap32,
    /// Unnamed layout: the first half of the channels is taken as the left
    /// hemisphere, and within each half the first quarter as frontal.
    Generic(usize),
}

impl Montage {
    pub fn channel_labels(&self) -> Vec<String> {
        match self {
            Montage::Seed62 => tokens(SEED62_CHANNELS),
            Montage::Deap32 => tokens(DEAP32_CHANNELS),
            Montage::Generic(n) => (0..*n).map(|i| format!("CH{i:02}")).collect(),
        }
    }

    /// Recognises the shipped montages by label (case-insensitive, any order).
    pub fn detect(labels: &[String]) -> Montage {
        let matches = |reference: &str| {
            let mut want: Vec<String> = tokens(reference).iter().map(|s| s.to_uppercase()).collect();
            let mut have: Vec<String> = labels.iter().map(|s| s.to_uppercase()).collect();
            want.sort();
            have.sort();
            want == have
        };
        if matches(SEED62_CHANNELS) {
            Montage::Seed62
        } else if matches(DEAP32_CHANNELS) {
            Montage::Deap32
        } else {
            Montage::Generic(labels.len())
        }
    }
}

fn tokens(text: &str) -> Vec<String> {
    text.lines()
        .map(|l| l.split('#').next().unwrap_or(""))
        .flat_map(str::split_whitespace)
        .map(str::to_string)
        .collect()
}

/// Named list of channel index pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelPairing {
    pub name: String,
    pub kind: PairingKind,
    pub pairs: Vec<(usize, usize)>,
}

impl ChannelPairing {
    pub fn new(name: impl Into<String>, kind: PairingKind, pairs: Vec<(usize, usize)>) -> Result<Self> {
        if let Some((a, b)) = pairs.iter().find(|(a, b)| a == b) {
            return Err(Error::invalid(format!("pair ({a}, {b}) repeats a channel")));
        }
        Ok(Self { name: name.into(), kind, pairs })
    }

    /// Parses `LABEL_A LABEL_B` lines against the recording's labels.
    /// Matching is case-insensitive; `#` starts a comment.
    pub fn parse(text: &str, labels: &[String], kind: PairingKind, name: &str) -> Result<Self> {
        let lookup = |label: &str, line: usize| {
            labels
                .iter()
                .position(|l| l.eq_ignore_ascii_case(label))
                .ok_or_else(|| Error::invalid(format!("pairing {name} line {line}: unknown channel label '{label}'")))
        };
        let mut pairs = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.len() != 2 {
                return Err(Error::invalid(format!(
                    "pairing {name} line {}: expected two labels, got '{line}'",
                    i + 1
                )));
            }
            pairs.push((lookup(fields[0], i + 1)?, lookup(fields[1], i + 1)?));
        }
        Self::new(name, kind, pairs)
    }

    pub fn from_file(path: &Path, labels: &[String], kind: PairingKind) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, labels, kind, &path.display().to_string())
    }

    /// Shipped default pairing for the montage the labels describe.
    pub fn default_for(labels: &[String], kind: PairingKind) -> Result<Self> {
        let text = match (Montage::detect(labels), kind) {
            (Montage::Seed62, PairingKind::Hemispheric) => SEED62_HEMISPHERIC,
            (Montage::Seed62, PairingKind::FrontalPosterior) => SEED62_FRONTAL_POSTERIOR,
            (Montage::Deap32, PairingKind::Hemispheric) => DEAP32_HEMISPHERIC,
            (Montage::Deap32, PairingKind::FrontalPosterior) => DEAP32_FRONTAL_POSTERIOR,
            (Montage::Generic(n), kind) => return Self::generic(n, kind),
        };
        Self::parse(text, labels, kind, "default")
    }

    /// Positional pairing for unnamed layouts; see [`Montage::Generic`].
    pub fn generic(n_channels: usize, kind: PairingKind) -> Result<Self> {
        let half = n_channels / 2;
        let pairs: Vec<(usize, usize)> = match kind {
            PairingKind::Hemispheric => (0..half).map(|i| (i, i + half)).collect(),
            PairingKind::FrontalPosterior => {
                let quarter = half / 2;
                (0..quarter)
                    .map(|i| (i, i + quarter))
                    .chain((0..quarter).map(|i| (half + i, half + i + quarter)))
                    .collect()
            }
        };
        if pairs.is_empty() {
            return Err(Error::invalid(format!("{n_channels} channels are too few for a {kind:?} pairing")));
        }
        Self::new("generic", kind, pairs)
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    fn check(&self, kind: PairingKind, n_channels: usize) -> Result<()> {
        if self.kind != kind {
            return Err(Error::invalid(format!("pairing {} is {:?}, expected {kind:?}", self.name, self.kind)));
        }
        if let Some((a, b)) = self.pairs.iter().find(|(a, b)| *a >= n_channels || *b >= n_channels) {
            return Err(Error::invalid(format!("pair ({a}, {b}) out of range for {n_channels} channels")));
        }
        Ok(())
    }
}

fn pairwise(
    wde: &WindowedDeTensor,
    pairs: &ChannelPairing,
    kind: PairingKind,
    selection: &BandSelection,
    op: impl Fn(f64, f64) -> f64,
) -> Result<Vec<Vec<f64>>> {
    pairs.check(kind, wde.n_channels)?;
    let bands = selection.indices(&wde.bands)?;
    Ok((0..wde.n_windows)
        .map(|w| {
            bands
                .iter()
                .flat_map(|&b| {
                    pairs.pairs.iter().map(|&(a, c)| op(wde.get(a, w, b), wde.get(c, w, b))).collect::<Vec<_>>()
                })
                .collect()
        })
        .collect())
}

/// Differential asymmetry, `DE[left] − DE[right]`, one vector per window.
pub fn feature_dasm(
    wde: &WindowedDeTensor,
    pairs: &ChannelPairing,
    selection: &BandSelection,
) -> Result<Vec<Vec<f64>>> {
    pairwise(wde, pairs, PairingKind::Hemispheric, selection, |l, r| l - r)
}

/// Rational asymmetry, `DE[left] / DE[right]`.
pub fn feature_rasm(
    wde: &WindowedDeTensor,
    pairs: &ChannelPairing,
    selection: &BandSelection,
) -> Result<Vec<Vec<f64>>> {
    pairwise(wde, pairs, PairingKind::Hemispheric, selection, |l, r| {
        let denom = if r.abs() < RASM_MIN_DENOMINATOR { RASM_MIN_DENOMINATOR.copysign(r) } else { r };
        l / denom
    })
}

/// Differential caudality, `DE[frontal] − DE[posterior]`.
pub fn feature_dcau(
    wde: &WindowedDeTensor,
    pairs: &ChannelPairing,
    selection: &BandSelection,
) -> Result<Vec<Vec<f64>>> {
    pairwise(wde, pairs, PairingKind::FrontalPosterior, selection, |f, p| f - p)
}

/// Raw DE values of all channels, band-major.
pub fn feature_de_flat(wde: &WindowedDeTensor, selection: &BandSelection) -> Result<Vec<Vec<f64>>> {
    let bands = selection.indices(&wde.bands)?;
    Ok((0..wde.n_windows).map(|w| bands.iter().flat_map(|&b| wde.column(w, b)).collect()).collect())
}
