//! Time-domain segmentation and spectral estimation.

mod fft;
mod spectrum;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use fft::{fft_real, Fft};
pub use spectrum::{band_power, hanning_window, periodogram, EpochPeriodogram, SpectralEstimator};

/// Self-reported valence/arousal on the 1–9 scale.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rating {
    pub valence: f64,
    pub arousal: f64,
}

/// Label metadata carried by a recording: a discrete class tag, a rating
/// pair, or both.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LabelInfo {
    pub class_tag: Option<String>,
    pub rating: Option<Rating>,
}

impl LabelInfo {
    pub fn tag(tag: impl Into<String>) -> Self {
        Self { class_tag: Some(tag.into()), rating: None }
    }

    pub fn rating(valence: f64, arousal: f64) -> Self {
        Self { class_tag: None, rating: Some(Rating { valence, arousal }) }
    }
}

/// A multichannel time-domain EEG trial.
#[derive(Debug, Clone, PartialEq)]
pub struct Recording {
    pub trial_id: String,
    pub subject_id: String,
    pub channel_labels: Vec<String>,
    pub sample_rate_hz: u32,
    /// `[channels][time]`, microvolts.
    pub samples: Vec<Vec<f64>>,
    pub label: LabelInfo,
}

impl Recording {
    pub fn new(
        trial_id: impl Into<String>,
        subject_id: impl Into<String>,
        channel_labels: Vec<String>,
        sample_rate_hz: u32,
        samples: Vec<Vec<f64>>,
        label: LabelInfo,
    ) -> Result<Self> {
        let rec = Self {
            trial_id: trial_id.into(),
            subject_id: subject_id.into(),
            channel_labels,
            sample_rate_hz,
            samples,
            label,
        };
        rec.validate()?;
        Ok(rec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.sample_rate_hz == 0 {
            return Err(Error::invalid("sample rate must be positive"));
        }
        if self.samples.len() < 2 {
            return Err(Error::invalid(format!("a recording needs at least 2 channels, got {}", self.samples.len())));
        }
        if self.channel_labels.len() != self.samples.len() {
            return Err(Error::shape(
                format!("{} channel labels", self.samples.len()),
                format!("{}", self.channel_labels.len()),
            ));
        }
        let len = self.samples[0].len();
        if let Some((i, row)) = self.samples.iter().enumerate().find(|(_, r)| r.len() != len) {
            return Err(Error::shape(
                format!("{len} samples in every channel"),
                format!("{} samples in channel {i}", row.len()),
            ));
        }
        Ok(())
    }

    pub fn n_channels(&self) -> usize {
        self.samples.len()
    }

    pub fn n_samples(&self) -> usize {
        self.samples.first().map_or(0, Vec::len)
    }

    pub fn duration_seconds(&self) -> f64 {
        self.n_samples() as f64 / self.sample_rate_hz as f64
    }
}

/// STFT parameters. The window is always Hanning, epochs never overlap.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SpectralConfig {
    pub fft_len: usize,
    pub epoch_seconds: f64,
}

impl Default for SpectralConfig {
    fn default() -> Self {
        Self { fft_len: 256, epoch_seconds: 1.0 }
    }
}

impl SpectralConfig {
    /// Samples per epoch at `fs`, checking that the epoch fits the FFT
    /// (zero-padding only, never truncation).
    pub fn samples_per_epoch(&self, fs: u32) -> Result<usize> {
        if !self.fft_len.is_power_of_two() {
            return Err(Error::invalid(format!("fft_len must be a power of two, got {}", self.fft_len)));
        }
        if !(self.epoch_seconds > 0.0) {
            return Err(Error::invalid("epoch_seconds must be positive"));
        }
        let exact = self.epoch_seconds * fs as f64;
        let m = exact.round();
        if (exact - m).abs() > 1e-9 || m < 1.0 {
            return Err(Error::invalid(format!(
                "epoch of {} s at {fs} Hz is not a whole number of samples",
                self.epoch_seconds
            )));
        }
        let m = m as usize;
        if m > self.fft_len {
            return Err(Error::invalid(format!("epoch of {m} samples exceeds fft_len {}", self.fft_len)));
        }
        Ok(m)
    }
}

/// The five canonical EEG bands.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BandName {
    Delta,
    Theta,
    Alpha,
    Beta,
    Gamma,
}

impl BandName {
    pub const ALL: [BandName; 5] = [BandName::Delta, BandName::Theta, BandName::Alpha, BandName::Beta, BandName::Gamma];

    pub fn as_str(self) -> &'static str {
        match self {
            BandName::Delta => "delta",
            BandName::Theta => "theta",
            BandName::Alpha => "alpha",
            BandName::Beta => "beta",
            BandName::Gamma => "gamma",
        }
    }

    pub fn bounds(self) -> (f64, f64) {
        match self {
            BandName::Delta => (1.0, 3.0),
            BandName::Theta => (4.0, 7.0),
            BandName::Alpha => (8.0, 13.0),
            BandName::Beta => (14.0, 30.0),
            BandName::Gamma => (31.0, 50.0),
        }
    }

    pub fn band(self) -> Band {
        let (lo, hi) = self.bounds();
        Band { name: self.as_str().to_string(), lo_hz: lo, hi_hz: hi }
    }
}

impl fmt::Display for BandName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for BandName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        BandName::ALL
            .into_iter()
            .find(|b| b.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::invalid(format!("unknown band '{s}'")))
    }
}

/// A frequency band with inclusive bounds in Hz.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Band {
    pub name: String,
    pub lo_hz: f64,
    pub hi_hz: f64,
}

impl Band {
    pub fn new(name: impl Into<String>, lo_hz: f64, hi_hz: f64) -> Result<Self> {
        if !(lo_hz >= 0.0 && lo_hz < hi_hz) {
            return Err(Error::invalid(format!("band bounds must satisfy 0 <= lo < hi, got [{lo_hz}, {hi_hz}]")));
        }
        Ok(Self { name: name.into(), lo_hz, hi_hz })
    }

    /// delta, theta, alpha, beta, gamma in that order.
    pub fn canonical() -> Vec<Band> {
        BandName::ALL.iter().map(|b| b.band()).collect()
    }

    pub fn contains(&self, freq_hz: f64) -> bool {
        freq_hz >= self.lo_hz && freq_hz <= self.hi_hz
    }
}

/// One non-overlapping segment of a recording, `[channels][samples]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Epoch {
    pub index: usize,
    pub samples: Vec<Vec<f64>>,
}

/// Cuts a recording into contiguous, non-overlapping epochs in time order.
/// A trailing partial epoch is discarded.
pub fn segment_epochs(rec: &Recording, cfg: &SpectralConfig) -> Result<Vec<Epoch>> {
    let m = cfg.samples_per_epoch(rec.sample_rate_hz)?;
    let total = rec.n_samples();
    if total < m {
        return Err(Error::TooShort { available: total, required: m });
    }
    Ok((0..total / m)
        .map(|e| Epoch { index: e, samples: rec.samples.iter().map(|row| row[e * m..(e + 1) * m].to_vec()).collect() })
        .collect())
}
