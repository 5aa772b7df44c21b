use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signal::{segment_epochs, Band, BandName, Recording, SpectralConfig, SpectralEstimator};

/// Band powers are floored here before the log so silent channels stay finite.
pub const DE_POWER_FLOOR: f64 = 1e-12;

/// `½·ln(2πe)`, the DE of a unit-variance Gaussian in nats.
const HALF_LN_2PI_E: f64 = 1.418_938_533_204_672_7;

/// DE values `[channels × epochs × bands]` for one trial.
#[derive(Debug, Clone, PartialEq)]
pub struct DeTensor {
    pub trial_id: String,
    pub n_channels: usize,
    pub n_epochs: usize,
    pub bands: Vec<Band>,
    pub epoch_seconds: f64,
    values: Vec<f64>,
}

impl DeTensor {
    pub fn from_values(
        trial_id: impl Into<String>,
        n_channels: usize,
        n_epochs: usize,
        bands: Vec<Band>,
        epoch_seconds: f64,
        values: Vec<f64>,
    ) -> Result<Self> {
        let expected = n_channels * n_epochs * bands.len();
        if values.len() != expected {
            return Err(Error::shape(
                format!("{n_channels}×{n_epochs}×{} = {expected} values", bands.len()),
                format!("{}", values.len()),
            ));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("DE values must be finite"));
        }
        Ok(Self { trial_id: trial_id.into(), n_channels, n_epochs, bands, epoch_seconds, values })
    }

    pub fn n_bands(&self) -> usize {
        self.bands.len()
    }

    fn idx(&self, channel: usize, epoch: usize, band: usize) -> usize {
        (channel * self.n_epochs + epoch) * self.bands.len() + band
    }

    pub fn get(&self, channel: usize, epoch: usize, band: usize) -> f64 {
        self.values[self.idx(channel, epoch, band)]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// The epoch series for one (channel, band).
    pub fn series(&self, channel: usize, band: usize) -> Vec<f64> {
        (0..self.n_epochs).map(|e| self.get(channel, e, band)).collect()
    }
}

/// Band-wise DE of every channel and epoch: `½·ln(2πe·P)` with `P` the
/// epoch band power floored at [`DE_POWER_FLOOR`].
pub fn compute_de(rec: &Recording, bands: &[Band], cfg: &SpectralConfig) -> Result<DeTensor> {
    if bands.is_empty() {
        return Err(Error::invalid("at least one band is required"));
    }
    let estimator = SpectralEstimator::new(cfg, rec.sample_rate_hz)?;
    let epochs = segment_epochs(rec, cfg)?;
    let n_channels = rec.n_channels();
    let n_epochs = epochs.len();
    let mut values = vec![0.0; n_channels * n_epochs * bands.len()];

    let mut bin_ranges = None;
    for epoch in &epochs {
        let pg = estimator.periodogram(&epoch.samples)?;
        let ranges = match &bin_ranges {
            Some(r) => r,
            None => bin_ranges.insert(bands.iter().map(|b| pg.band_bins(b)).collect::<Result<Vec<_>>>()?),
        };
        for (c, power) in pg.power.iter().enumerate() {
            for (b, bins) in ranges.iter().enumerate() {
                let p: f64 = power[bins.clone()].iter().sum();
                values[(c * n_epochs + epoch.index) * bands.len() + b] = differential_entropy(p);
            }
        }
    }
    DeTensor::from_values(rec.trial_id.clone(), n_channels, n_epochs, bands.to_vec(), cfg.epoch_seconds, values)
}

fn differential_entropy(power: f64) -> f64 {
    HALF_LN_2PI_E + 0.5 * power.max(DE_POWER_FLOOR).ln()
}

/// Centered moving average along the epoch axis. Near the ends the window
/// shrinks to the epochs that exist.
pub fn smooth_moving_average(de: &DeTensor, span: usize) -> Result<DeTensor> {
    if span == 0 || span.is_multiple_of(2) {
        return Err(Error::invalid(format!("moving-average span must be odd and positive, got {span}")));
    }
    let half = span / 2;
    let mut out = de.clone();
    if span == 1 {
        return Ok(out);
    }
    for c in 0..de.n_channels {
        for b in 0..de.n_bands() {
            let series = de.series(c, b);
            for e in 0..de.n_epochs {
                let lo = e.saturating_sub(half);
                let hi = (e + half).min(de.n_epochs - 1);
                let mean = series[lo..=hi].iter().sum::<f64>() / (hi - lo + 1) as f64;
                let i = out.idx(c, e, b);
                out.values[i] = mean;
            }
        }
    }
    Ok(out)
}

/// DE values `[channels × windows × bands]` after averaging each group of
/// `window_seconds / epoch_seconds` epochs.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowedDeTensor {
    pub trial_id: String,
    pub n_channels: usize,
    pub n_windows: usize,
    pub bands: Vec<Band>,
    pub window_seconds: f64,
    values: Vec<f64>,
}

impl WindowedDeTensor {
    pub fn from_values(
        trial_id: impl Into<String>,
        n_channels: usize,
        n_windows: usize,
        bands: Vec<Band>,
        window_seconds: f64,
        values: Vec<f64>,
    ) -> Result<Self> {
        let expected = n_channels * n_windows * bands.len();
        if values.len() != expected {
            return Err(Error::shape(
                format!("{n_channels}×{n_windows}×{} = {expected} values", bands.len()),
                format!("{}", values.len()),
            ));
        }
        Ok(Self { trial_id: trial_id.into(), n_channels, n_windows, bands, window_seconds, values })
    }

    pub fn n_bands(&self) -> usize {
        self.bands.len()
    }

    pub fn get(&self, channel: usize, window: usize, band: usize) -> f64 {
        self.values[(channel * self.n_windows + window) * self.bands.len() + band]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// DE of every channel for one window and band.
    pub fn column(&self, window: usize, band: usize) -> Vec<f64> {
        (0..self.n_channels).map(|c| self.get(c, window, band)).collect()
    }

    /// `[channel][band]` slice for one window.
    pub fn window_slice(&self, window: usize) -> Vec<Vec<f64>> {
        (0..self.n_channels).map(|c| (0..self.n_bands()).map(|b| self.get(c, window, b)).collect()).collect()
    }
}

/// Averages non-overlapping groups of epochs; a trailing partial window is
/// dropped.
pub fn window_average(de: &DeTensor, window_seconds: f64) -> Result<WindowedDeTensor> {
    let per_window = epochs_per_window(window_seconds, de.epoch_seconds)?;
    let n_windows = de.n_epochs / per_window;
    let n_bands = de.n_bands();
    let mut values = Vec::with_capacity(de.n_channels * n_windows * n_bands);
    for c in 0..de.n_channels {
        for w in 0..n_windows {
            for b in 0..n_bands {
                let sum: f64 = (w * per_window..(w + 1) * per_window).map(|e| de.get(c, e, b)).sum();
                values.push(sum / per_window as f64);
            }
        }
    }
    WindowedDeTensor::from_values(
        de.trial_id.clone(),
        de.n_channels,
        n_windows,
        de.bands.clone(),
        window_seconds,
        values,
    )
}

/// Number of epochs in a window, requiring an exact integer multiple.
pub(crate) fn epochs_per_window(window_seconds: f64, epoch_seconds: f64) -> Result<usize> {
    if !(window_seconds > 0.0) || !(epoch_seconds > 0.0) {
        return Err(Error::invalid("window and epoch durations must be positive"));
    }
    let ratio = window_seconds / epoch_seconds;
    let n = ratio.round();
    if n < 1.0 || (ratio - n).abs() > 1e-9 {
        return Err(Error::invalid(format!(
            "window of {window_seconds} s is not an integer multiple of the {epoch_seconds} s epoch"
        )));
    }
    Ok(n as usize)
}

/// Which bands feed a feature: one canonical band, or all five.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum BandSelection {
    Single(BandName),
    All,
}

impl BandSelection {
    /// The delta..gamma singles followed by `All`, the column order of the
    /// accuracy tables.
    pub const TABLE_ORDER: [BandSelection; 6] = [
        BandSelection::Single(BandName::Delta),
        BandSelection::Single(BandName::Theta),
        BandSelection::Single(BandName::Alpha),
        BandSelection::Single(BandName::Beta),
        BandSelection::Single(BandName::Gamma),
        BandSelection::All,
    ];

    /// Positions of the selected bands within `bands`.
    pub fn indices(&self, bands: &[Band]) -> Result<Vec<usize>> {
        match self {
            BandSelection::All => Ok((0..bands.len()).collect()),
            BandSelection::Single(name) => bands
                .iter()
                .position(|b| b.name == name.as_str())
                .map(|i| vec![i])
                .ok_or_else(|| Error::invalid(format!("band {name} is not in the tensor"))),
        }
    }

    pub fn len(&self) -> usize {
        match self {
            BandSelection::All => BandName::ALL.len(),
            BandSelection::Single(_) => 1,
        }
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

impl fmt::Display for BandSelection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BandSelection::All => f.write_str("all"),
            BandSelection::Single(b) => f.write_str(b.as_str()),
        }
    }
}

impl FromStr for BandSelection {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s.eq_ignore_ascii_case("all") || s.eq_ignore_ascii_case("allband") {
            Ok(BandSelection::All)
        } else {
            s.parse().map(BandSelection::Single)
        }
    }
}

impl TryFrom<String> for BandSelection {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<BandSelection> for String {
    fn from(b: BandSelection) -> String {
        b.to_string()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::LabelInfo;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    fn noise_recording(sigma: f64, seconds: usize, seed: u64) -> Recording {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let normal = Normal::new(0.0, sigma).unwrap();
        let samples = (0..2).map(|_| (0..seconds * 200).map(|_| normal.sample(&mut rng)).collect()).collect();
        Recording::new("n", "s", vec!["A".into(), "B".into()], 200, samples, LabelInfo::default()).unwrap()
    }

    fn tensor_1d(series: &[f64]) -> DeTensor {
        DeTensor::from_values("t", 1, series.len(), vec![BandName::Gamma.band()], 1.0, series.to_vec()).unwrap()
    }

    #[test]
    fn unit_gaussian_de() {
        let rec = noise_recording(1.0, 60, 1);
        let full = Band::new("full", 0.5, 100.0).unwrap();
        let de = compute_de(&rec, &[full], &SpectralConfig::default()).unwrap();
        let mean = de.series(0, 0).iter().sum::<f64>() / de.n_epochs as f64;
        assert!((mean - HALF_LN_2PI_E).abs() < 0.1, "mean DE {mean}");
    }

    #[test]
    fn constant_matches_closed_form() {
        let expected = 0.5 * (2.0 * std::f64::consts::PI * std::f64::consts::E).ln();
        assert!((HALF_LN_2PI_E - expected).abs() < 1e-15);
    }

    #[test]
    fn zero_signal_uses_floor() {
        let rec =
            Recording::new("z", "s", vec!["A".into(), "B".into()], 200, vec![vec![0.0; 400]; 2], LabelInfo::default())
                .unwrap();
        let de = compute_de(&rec, &Band::canonical(), &SpectralConfig::default()).unwrap();
        let floor = 0.5 * (2.0 * std::f64::consts::PI * std::f64::consts::E * 1e-12).ln();
        assert!(de.values().iter().all(|&v| (v - floor).abs() < 1e-12));
    }

    #[test]
    fn smoothing_examples() {
        let t = tensor_1d(&[0.0, 3.0, 0.0, 3.0, 0.0]);
        assert_eq!(smooth_moving_average(&t, 1).unwrap(), t);
        let s = smooth_moving_average(&t, 3).unwrap();
        let expected = [1.5, 1.0, 2.0, 1.0, 1.5];
        for (a, b) in s.series(0, 0).iter().zip(expected) {
            assert!((a - b).abs() < 1e-12);
        }
        let c = tensor_1d(&[2.5; 7]);
        assert_eq!(smooth_moving_average(&c, 5).unwrap().series(0, 0), vec![2.5; 7]);
        assert!(smooth_moving_average(&t, 4).is_err());
        assert!(smooth_moving_average(&t, 0).is_err());
    }

    #[test]
    fn window_examples() {
        let t = tensor_1d(&[1.0, 2.0, 3.0, 4.0]);
        let w = window_average(&t, 2.0).unwrap();
        assert_eq!(w.column(0, 0), vec![1.5]);
        assert_eq!(w.column(1, 0), vec![3.5]);

        let long = tensor_1d(&vec![0.0; 185]);
        assert_eq!(window_average(&long, 3.0).unwrap().n_windows, 61);
        let deap = tensor_1d(&vec![0.0; 60]);
        assert_eq!(window_average(&deap, 30.0).unwrap().n_windows, 2);
        assert!(window_average(&deap, 2.5).is_err());
    }

    #[test]
    fn band_selection_round_trip() {
        for sel in BandSelection::TABLE_ORDER {
            assert_eq!(sel.to_string().parse::<BandSelection>().unwrap(), sel);
        }
        let bands = Band::canonical();
        assert_eq!(BandSelection::All.indices(&bands).unwrap(), vec![0, 1, 2, 3, 4]);
        assert_eq!(BandSelection::Single(BandName::Beta).indices(&bands).unwrap(), vec![3]);
    }
}
