use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::Montage;
use crate::signal::Fft;
use crate::signal::{segment_epochs, BandName, LabelInfo, Rating, Recording, SpectralConfig, SpectralEstimator};

/// Multiplies the power of `band` on `channels` by `gain`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BandBoost {
    pub channels: Vec<usize>,
    pub band: BandName,
    pub gain: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthClass {
    /// Used as the recordings' class tag.
    pub name: String,
    #[serde(default)]
    pub valence: Option<f64>,
    #[serde(default)]
    pub arousal: Option<f64>,
    #[serde(default)]
    pub boosts: Vec<BandBoost>,
}

/// Spectrally shaped Gaussian noise dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthSpec {
    pub n_channels: usize,
    pub sample_rate_hz: u32,
    pub trial_seconds: f64,
    pub n_trials_per_class: usize,
    pub classes: Vec<SynthClass>,
    #[serde(default = "default_sigma")]
    pub noise_sigma: f64,
    #[serde(default)]
    pub seed: u64,
}

fn default_sigma() -> f64 {
    1.0
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n_channels < 2 {
            return Err(Error::invalid("synthetic data needs at least 2 channels"));
        }
        if self.sample_rate_hz == 0 {
            return Err(Error::invalid("sample_rate_hz must be positive"));
        }
        if !(self.trial_seconds > 0.0) || self.n_samples() == 0 {
            return Err(Error::invalid(format!("trial_seconds {} gives no samples", self.trial_seconds)));
        }
        if self.n_trials_per_class == 0 || self.classes.is_empty() {
            return Err(Error::invalid("need at least one class and one trial per class"));
        }
        if !(self.noise_sigma > 0.0 && self.noise_sigma.is_finite()) {
            return Err(Error::invalid("noise_sigma must be positive"));
        }
        let nyquist = self.sample_rate_hz as f64 / 2.0;
        for (i, c) in self.classes.iter().enumerate() {
            if c.name.is_empty() || !c.name.chars().all(|ch| ch.is_ascii_alphanumeric() || ch == '_' || ch == '-') {
                return Err(Error::invalid(format!("class name '{}' must be nonempty [A-Za-z0-9_-]", c.name)));
            }
            if self.classes[..i].iter().any(|o| o.name == c.name) {
                return Err(Error::invalid(format!("duplicate class name '{}'", c.name)));
            }
            if c.valence.is_some() != c.arousal.is_some() {
                return Err(Error::invalid(format!("class '{}' must set both valence and arousal or neither", c.name)));
            }
            for b in &c.boosts {
                if !(b.gain > 0.0 && b.gain.is_finite()) {
                    return Err(Error::invalid(format!("class '{}': gain {} must be positive", c.name, b.gain)));
                }
                if let Some(&ch) = b.channels.iter().find(|&&ch| ch >= self.n_channels) {
                    return Err(Error::invalid(format!(
                        "class '{}': channel {ch} out of range for {} channels",
                        c.name, self.n_channels
                    )));
                }
                if b.band.bounds().0 > nyquist {
                    return Err(Error::invalid(format!(
                        "class '{}': {} band lies above the {nyquist} Hz Nyquist frequency",
                        c.name, b.band
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn n_samples(&self) -> usize {
        (self.trial_seconds * self.sample_rate_hz as f64).round() as usize
    }

    pub fn n_trials(&self) -> usize {
        self.classes.len() * self.n_trials_per_class
    }

    /// Product of all gains that apply to `(class, channel, band)`.
    pub fn gain(&self, class: usize, channel: usize, band: BandName) -> f64 {
        self.classes[class]
            .boosts
            .iter()
            .filter(|b| b.band == band && b.channels.contains(&channel))
            .map(|b| b.gain)
            .product()
    }
}

/// Generates `n_trials_per_class` recordings per class, classes in order.
/// Trial `t` draws from stream `t` of the seeded generator, so output does
/// not depend on thread scheduling.
pub fn synth_generate(spec: &SynthSpec) -> Result<Vec<Recording>> {
    spec.validate()?;
    let n = spec.n_samples();
    let fft = Fft::new(n.next_power_of_two())?;
    let labels = Montage::Generic(spec.n_channels).channel_labels();
    (0..spec.n_trials())
        .into_par_iter()
        .map(|t| {
            let class_idx = t / spec.n_trials_per_class;
            let class = &spec.classes[class_idx];
            let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
            rng.set_stream(t as u64);
            let samples = (0..spec.n_channels).map(|ch| shaped_noise(spec, class_idx, ch, &fft, n, &mut rng)).collect();
            let label = LabelInfo {
                class_tag: Some(class.name.clone()),
                rating: class.valence.zip(class.arousal).map(|(valence, arousal)| Rating { valence, arousal }),
            };
            Recording::new(
                format!("{}-{:03}", class.name, t % spec.n_trials_per_class),
                "synth",
                labels.clone(),
                spec.sample_rate_hz,
                samples,
                label,
            )
        })
        .collect()
}

fn shaped_noise(spec: &SynthSpec, class: usize, channel: usize, fft: &Fft, n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let normal = Normal::new(0.0, spec.noise_sigma).expect("sigma validated");
    let len = fft.len();
    let mut buf: Vec<Complex64> = (0..len).map(|_| Complex64::new(normal.sample(rng), 0.0)).collect();
    let boosts: Vec<_> =
        BandName::ALL.iter().map(|&b| (b.bounds(), spec.gain(class, channel, b))).filter(|&(_, g)| g != 1.0).collect();
    if !boosts.is_empty() {
        fft.forward(&mut buf);
        let df = spec.sample_rate_hz as f64 / len as f64;
        for k in 1..=len / 2 {
            let f = k as f64 * df;
            if let Some(&(_, g)) = boosts.iter().find(|((lo, hi), _)| f >= *lo && f <= *hi) {
                let s = g.sqrt();
                buf[k] *= s;
                if k != len - k {
                    buf[len - k] *= s;
                }
            }
        }
        fft.inverse(&mut buf);
    }
    buf.into_iter().take(n).map(|c| c.re).collect()
}

/// Realized versus specified band-power gain for one `(class, channel, band)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AuditEntry {
    pub class: String,
    pub channel: usize,
    pub band: BandName,
    pub specified_gain: f64,
    pub realized_gain: f64,
}

impl AuditEntry {
    pub fn relative_error(&self) -> f64 {
        (self.realized_gain - self.specified_gain).abs() / self.specified_gain
    }
}

/// Measures band power in every epoch of `recordings` and divides the
/// class-average by the expected white-noise band power
/// `σ² Σ_k c(k) / fft_len`. Bands above Nyquist are skipped.
pub fn synth_audit(spec: &SynthSpec, recordings: &[Recording], cfg: &SpectralConfig) -> Result<Vec<AuditEntry>> {
    let est = SpectralEstimator::new(cfg, spec.sample_rate_hz)?;
    let nyquist = spec.sample_rate_hz as f64 / 2.0;
    let bands: Vec<BandName> = BandName::ALL.iter().copied().filter(|b| b.bounds().1 <= nyquist).collect();
    let n_bands = bands.len();
    let mut sums = vec![vec![vec![0.0; n_bands]; spec.n_channels]; spec.classes.len()];
    let mut counts = vec![0usize; spec.classes.len()];
    let mut baseline = vec![0.0; n_bands];

    for rec in recordings {
        let class = spec
            .classes
            .iter()
            .position(|c| Some(&c.name) == rec.label.class_tag.as_ref())
            .ok_or_else(|| Error::invalid(format!("recording {} has no class of this spec", rec.trial_id)))?;
        for epoch in segment_epochs(rec, cfg)? {
            let pg = est.periodogram(&epoch.samples)?;
            for (bi, b) in bands.iter().enumerate() {
                let bins = pg.band_bins(&b.band())?;
                if baseline[bi] == 0.0 {
                    let weight: f64 =
                        bins.clone().map(|k| if k == 0 || k == cfg.fft_len / 2 { 1.0 } else { 2.0 }).sum();
                    baseline[bi] = spec.noise_sigma.powi(2) * weight / cfg.fft_len as f64;
                }
                for (ch, row) in pg.power.iter().enumerate() {
                    sums[class][ch][bi] += bins.clone().map(|k| row[k]).sum::<f64>();
                }
            }
            counts[class] += 1;
        }
    }

    let mut out = Vec::new();
    for (ci, class) in spec.classes.iter().enumerate() {
        if counts[ci] == 0 {
            continue;
        }
        for ch in 0..spec.n_channels {
            for (bi, &b) in bands.iter().enumerate() {
                out.push(AuditEntry {
                    class: class.name.clone(),
                    channel: ch,
                    band: b,
                    specified_gain: spec.gain(ci, ch, b),
                    realized_gain: sums[ci][ch][bi] / counts[ci] as f64 / baseline[bi],
                });
            }
        }
    }
    Ok(out)
}
