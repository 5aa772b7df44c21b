//! Hanning-windowed periodograms and band power.
//!
//! Bin powers are variance-calibrated: for a real epoch `x` of `m` samples,
//! `y = x ⊙ w` zero-padded to `n`, the one-sided bin power is
//!
//! ```text
//! P[k] = c(k) · |Y[k]|² / (n · m · U),   U = mean(w²)
//! ```
//!
//! with `c(k) = 2` for interior bins and 1 at DC and Nyquist. Summing over
//! all bins gives `Σ y² / (m · U)`, the mean power of the epoch corrected
//! for the energy the window removes.

use super::{Band, Epoch, Fft, SpectralConfig};
use crate::error::{Error, Result};

/// Symmetric Hanning window, `w[k] = 0.5·(1 − cos(2πk/(n−1)))`.
pub fn hanning_window(n: usize) -> Result<Vec<f64>> {
    if n < 2 {
        return Err(Error::invalid(format!("Hanning window needs at least 2 points, got {n}")));
    }
    let denom = (n - 1) as f64;
    Ok((0..n).map(|k| 0.5 * (1.0 - (2.0 * std::f64::consts::PI * k as f64 / denom).cos())).collect())
}

/// Per-channel one-sided power spectrum of one epoch.
#[derive(Debug, Clone, PartialEq)]
pub struct EpochPeriodogram {
    pub sample_rate_hz: f64,
    pub fft_len: usize,
    /// `[channel][bin]`, bins `0..=fft_len/2`, µV².
    pub power: Vec<Vec<f64>>,
}

impl EpochPeriodogram {
    pub fn n_bins(&self) -> usize {
        self.fft_len / 2 + 1
    }

    /// Center frequency of bin `k` in Hz.
    pub fn bin_frequency(&self, k: usize) -> f64 {
        k as f64 * self.sample_rate_hz / self.fft_len as f64
    }

    pub fn nyquist(&self) -> f64 {
        self.sample_rate_hz / 2.0
    }

    /// Bins whose center frequency lies in the band (inclusive bounds).
    pub fn band_bins(&self, band: &Band) -> Result<std::ops::RangeInclusive<usize>> {
        if band.lo_hz > self.nyquist() {
            return Err(Error::invalid(format!(
                "band {} [{}, {}] Hz lies above the Nyquist frequency {} Hz",
                band.name,
                band.lo_hz,
                band.hi_hz,
                self.nyquist()
            )));
        }
        let bins: Vec<usize> = (0..self.n_bins()).filter(|&k| band.contains(self.bin_frequency(k))).collect();
        match (bins.first(), bins.last()) {
            (Some(&a), Some(&b)) => Ok(a..=b),
            _ => Err(Error::invalid(format!(
                "band {} [{}, {}] Hz contains no FFT bin centers",
                band.name, band.lo_hz, band.hi_hz
            ))),
        }
    }
}

/// Reusable periodogram machinery for a fixed epoch length and FFT size.
#[derive(Debug, Clone)]
pub struct SpectralEstimator {
    fft: Fft,
    window: Vec<f64>,
    window_power: f64,
    sample_rate_hz: f64,
}

impl SpectralEstimator {
    pub fn new(cfg: &SpectralConfig, sample_rate_hz: u32) -> Result<Self> {
        let m = cfg.samples_per_epoch(sample_rate_hz)?;
        let window = hanning_window(m)?;
        let window_power = window.iter().map(|w| w * w).sum::<f64>() / m as f64;
        Ok(Self { fft: Fft::new(cfg.fft_len)?, window, window_power, sample_rate_hz: sample_rate_hz as f64 })
    }

    pub fn epoch_len(&self) -> usize {
        self.window.len()
    }

    /// Power spectrum of a single channel's samples.
    pub fn channel_power(&self, x: &[f64]) -> Result<Vec<f64>> {
        let m = self.window.len();
        if x.len() != m {
            return Err(Error::shape(format!("{m} samples"), format!("{}", x.len())));
        }
        let y: Vec<f64> = x.iter().zip(&self.window).map(|(a, w)| a * w).collect();
        let spectrum = self.fft.real_forward(&y)?;
        let n = self.fft.len();
        let norm = 1.0 / (n as f64 * m as f64 * self.window_power);
        let last = spectrum.len() - 1;
        Ok(spectrum
            .iter()
            .enumerate()
            .map(|(k, c)| {
                let one_sided = if k == 0 || k == last { 1.0 } else { 2.0 };
                one_sided * c.norm_sqr() * norm
            })
            .collect())
    }

    pub fn periodogram(&self, epoch: &[Vec<f64>]) -> Result<EpochPeriodogram> {
        let power = epoch.iter().map(|ch| self.channel_power(ch)).collect::<Result<Vec<_>>>()?;
        Ok(EpochPeriodogram { sample_rate_hz: self.sample_rate_hz, fft_len: self.fft.len(), power })
    }
}

/// Periodogram of every channel in an epoch.
pub fn periodogram(epoch: &Epoch, cfg: &SpectralConfig, fs: u32) -> Result<EpochPeriodogram> {
    SpectralEstimator::new(cfg, fs)?.periodogram(&epoch.samples)
}

/// Per-channel sum of bin powers whose center frequency falls in `band`.
pub fn band_power(pg: &EpochPeriodogram, band: &Band) -> Result<Vec<f64>> {
    let bins = pg.band_bins(band)?;
    Ok(pg.power.iter().map(|ch| ch[bins.clone()].iter().sum()).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::BandName;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    fn sine_epoch(amp: f64, freq: f64, fs: u32) -> Epoch {
        let x: Vec<f64> =
            (0..fs).map(|t| amp * (2.0 * std::f64::consts::PI * freq * t as f64 / fs as f64).sin()).collect();
        Epoch { index: 0, samples: vec![x] }
    }

    #[test]
    fn hanning_closed_forms() {
        let w = hanning_window(4).unwrap();
        let expected = [0.0, 0.75, 0.75, 0.0];
        for (a, b) in w.iter().zip(expected) {
            assert!((a - b).abs() < 1e-15);
        }
        assert!((hanning_window(5).unwrap()[2] - 1.0).abs() < 1e-15);
        assert!(hanning_window(1).is_err());
    }

    #[test]
    fn hanning_energy_by_summation() {
        // Frozen from an independent float summation of the closed form:
        // Σ w² = 0.375·(n−1) = 74.625 for the symmetric window, n = 200.
        let w = hanning_window(200).unwrap();
        let energy: f64 = w.iter().map(|v| v * v).sum();
        assert!((energy - 74.625).abs() < 1e-9, "energy {energy}");
        for k in 0..200 {
            assert!((w[k] - w[199 - k]).abs() < 1e-15);
        }
    }

    #[test]
    fn zero_epoch_has_zero_power() {
        let epoch = Epoch { index: 0, samples: vec![vec![0.0; 200]; 3] };
        let pg = periodogram(&epoch, &SpectralConfig::default(), 200).unwrap();
        assert_eq!(pg.power.len(), 3);
        assert!(pg.power.iter().flatten().all(|&p| p == 0.0));
        assert_eq!(pg.n_bins(), 129);
    }

    #[test]
    fn sinusoid_total_power() {
        let pg = periodogram(&sine_epoch(2.0, 10.0, 200), &SpectralConfig::default(), 200).unwrap();
        let total: f64 = pg.power[0].iter().sum();
        assert!((total - 2.0).abs() / 2.0 < 0.05, "total {total}");
    }

    #[test]
    fn white_noise_total_power() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let normal = Normal::new(0.0, 2.0).unwrap();
        let est = SpectralEstimator::new(&SpectralConfig::default(), 200).unwrap();
        let mean: f64 = (0..50)
            .map(|_| {
                let x: Vec<f64> = (0..200).map(|_| normal.sample(&mut rng)).collect();
                est.channel_power(&x).unwrap().iter().sum::<f64>()
            })
            .sum::<f64>()
            / 50.0;
        assert!((mean - 4.0).abs() / 4.0 < 0.10, "mean {mean}");
    }

    #[test]
    fn band_membership_by_bin_inspection() {
        let cfg = SpectralConfig::default();
        let pg = periodogram(&sine_epoch(1.0, 40.0, 200), &cfg, 200).unwrap();
        let total: f64 = pg.power[0].iter().sum();
        let gamma = band_power(&pg, &BandName::Gamma.band()).unwrap()[0];
        assert!(gamma / total >= 0.95);

        let pg = periodogram(&sine_epoch(1.0, 10.0, 200), &cfg, 200).unwrap();
        let alpha = band_power(&pg, &BandName::Alpha.band()).unwrap()[0];
        let gamma = band_power(&pg, &BandName::Gamma.band()).unwrap()[0];
        assert!(alpha / gamma > 100.0);
    }

    #[test]
    fn gamma_above_nyquist_rejected() {
        let cfg = SpectralConfig { fft_len: 64, epoch_seconds: 1.0 };
        let epoch = Epoch { index: 0, samples: vec![vec![1.0; 60]] };
        let pg = periodogram(&epoch, &cfg, 60).unwrap();
        assert!(matches!(band_power(&pg, &BandName::Gamma.band()), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn narrow_band_between_bins_rejected() {
        let pg = periodogram(&sine_epoch(1.0, 10.0, 200), &SpectralConfig::default(), 200).unwrap();
        // bins are 0.78125 Hz apart; [10.0, 10.1] holds no bin center
        let band = Band::new("narrow", 10.0, 10.1).unwrap();
        assert!(band_power(&pg, &band).is_err());
    }
}
