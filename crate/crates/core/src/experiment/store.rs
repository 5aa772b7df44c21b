//! On-disk feature archive: windowed DE and normalized AsMaps per trial.
//!
//! `features.bin` is a tensor container (magic `ASMAPFT1`) with records
//! `meta.selection`, `meta.window_s`, `meta.bands` (`[n, 2]` band bounds),
//! and per trial `trial.<i>.de` (`[windows, channels, bands]`) and
//! `trial.<i>.asmap` (`[windows, bands, channels, channels]`).
//! `features_index.csv` carries the string metadata of each trial.

use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;

use super::{prepare_trial, selection_code, selection_from_code, FeatureMethod, PairingFiles};
use crate::dataset::{assign_label, LabelScheme, LabeledWindow};
use crate::error::{Error, Result};
use crate::features::{normalize_asmap, window_average, AsMapTensor, BandSelection, WindowedDeTensor};
use crate::nn::{Tensor, TensorArchive, FEATURE_MAGIC};
use crate::signal::{Band, LabelInfo, Rating, Recording, SpectralConfig};

pub const FEATURE_ARCHIVE_FILE: &str = "features.bin";
pub const FEATURE_INDEX_FILE: &str = "features_index.csv";

#[derive(Debug, Clone, PartialEq)]
pub struct TrialFeatures {
    pub trial_id: String,
    pub subject_id: String,
    pub label: LabelInfo,
    pub de: WindowedDeTensor,
    pub asmaps: Vec<AsMapTensor>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureSet {
    pub selection: BandSelection,
    pub window_seconds: f64,
    pub channel_labels: Vec<String>,
    pub trials: Vec<TrialFeatures>,
}

/// Extracts every trial independently. Trials that fail are returned with
/// their error instead of aborting the batch.
pub fn extract_features(
    recordings: &[Recording],
    spectral: &SpectralConfig,
    smoothing_span: usize,
    window_seconds: f64,
    selection: BandSelection,
) -> Result<(FeatureSet, Vec<(String, Error)>)> {
    crate::features::epochs_per_window(window_seconds, spectral.epoch_seconds)?;
    let results: Vec<Result<TrialFeatures>> = recordings
        .par_iter()
        .map(|rec| {
            let t = prepare_trial(rec, spectral, smoothing_span)?;
            let de = window_average(&t.de, window_seconds)?;
            if de.n_windows == 0 {
                return Err(Error::invalid(format!(
                    "trial {} ({} s) is shorter than one {window_seconds} s window",
                    rec.trial_id,
                    rec.duration_seconds()
                )));
            }
            let asmaps =
                (0..de.n_windows).map(|w| normalize_asmap(&de.asmap(w, &selection)?)).collect::<Result<_>>()?;
            Ok(TrialFeatures { trial_id: t.trial_id, subject_id: t.subject_id, label: t.label, de, asmaps })
        })
        .collect();

    let mut trials = Vec::new();
    let mut failures = Vec::new();
    let mut labels: Option<&Vec<String>> = None;
    for (rec, r) in recordings.iter().zip(results) {
        match r {
            Ok(t) => match labels {
                Some(l) if *l != rec.channel_labels => failures.push((
                    rec.trial_id.clone(),
                    Error::invalid(format!("trial {} has a different channel layout", rec.trial_id)),
                )),
                _ => {
                    labels = Some(&rec.channel_labels);
                    trials.push(t);
                }
            },
            Err(e) => failures.push((rec.trial_id.clone(), e)),
        }
    }
    let set = FeatureSet { selection, window_seconds, channel_labels: labels.cloned().unwrap_or_default(), trials };
    Ok((set, failures))
}

fn archive_error(path: &Path, message: impl Into<String>) -> Error {
    Error::Parse { path: path.to_path_buf(), location: "archive".into(), message: message.into() }
}

fn check_field(s: &str, what: &str) -> Result<()> {
    if s.contains([',', '\n', '\r']) {
        return Err(Error::invalid(format!("{what} '{s}' contains a comma or newline")));
    }
    Ok(())
}

impl FeatureSet {
    pub fn n_windows(&self) -> usize {
        self.trials.iter().map(|t| t.de.n_windows).sum()
    }

    /// Writes `features.bin` and `features_index.csv` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let mut ar = TensorArchive::default();
        ar.push("meta.selection", Tensor::from_vec(vec![selection_code(self.selection) as f64]));
        ar.push("meta.window_s", Tensor::from_vec(vec![self.window_seconds]));
        let bands = self.trials.first().map_or_else(Vec::new, |t| t.de.bands.clone());
        let bounds = bands.iter().flat_map(|b| [b.lo_hz, b.hi_hz]).collect();
        ar.push(
            "meta.bands",
            Tensor::new(vec![bands.len().max(1), 2], bounds).unwrap_or_else(|_| Tensor::zeros(&[1, 2])),
        );

        for l in &self.channel_labels {
            check_field(l, "channel label")?;
        }
        let mut index = format!(
            "#channels={}\nindex,trial_id,subject_id,class,valence,arousal,n_windows\n",
            self.channel_labels.join(";")
        );
        for (i, t) in self.trials.iter().enumerate() {
            let (c, w, b) = (t.de.n_channels, t.de.n_windows, t.de.n_bands());
            ar.push(format!("trial.{i}.de"), Tensor::new(vec![w, c, b], de_window_major(&t.de))?);
            let planes = t.asmaps.first().map_or(0, AsMapTensor::n_bands);
            let data = t.asmaps.iter().flat_map(|m| m.values().iter().copied()).collect();
            ar.push(format!("trial.{i}.asmap"), Tensor::new(vec![w, planes, c, c], data)?);

            check_field(&t.trial_id, "trial id")?;
            check_field(&t.subject_id, "subject id")?;
            let tag = t.label.class_tag.clone().unwrap_or_default();
            check_field(&tag, "class tag")?;
            let (v, a) = t
                .label
                .rating
                .map_or((String::new(), String::new()), |r| (r.valence.to_string(), r.arousal.to_string()));
            let _ = writeln!(index, "{i},{},{},{tag},{v},{a},{w}", t.trial_id, t.subject_id);
        }
        ar.write(&dir.join(FEATURE_ARCHIVE_FILE), FEATURE_MAGIC)?;
        let path = dir.join(FEATURE_INDEX_FILE);
        std::fs::write(&path, index).map_err(|e| Error::io(&path, e))
    }

    /// Reads an archive written by [`FeatureSet::write`]; `path` may name
    /// the directory or `features.bin` inside it.
    pub fn read(path: &Path) -> Result<Self> {
        let (bin, idx) = if path.is_dir() {
            (path.join(FEATURE_ARCHIVE_FILE), path.join(FEATURE_INDEX_FILE))
        } else {
            (path.to_path_buf(), path.with_file_name(FEATURE_INDEX_FILE))
        };
        let ar = TensorArchive::read(&bin, FEATURE_MAGIC)?;
        let scalar = |name: &str| {
            ar.get(name)
                .and_then(|t| t.data().first().copied())
                .ok_or_else(|| archive_error(&bin, format!("missing {name}")))
        };
        let selection = selection_from_code(scalar("meta.selection")? as usize)
            .ok_or_else(|| archive_error(&bin, "bad meta.selection"))?;
        let window_seconds = scalar("meta.window_s")?;
        let canonical = Band::canonical();
        let bands: Vec<Band> = ar
            .get("meta.bands")
            .ok_or_else(|| archive_error(&bin, "missing meta.bands"))?
            .data()
            .chunks(2)
            .filter(|b| b[1] > b[0])
            .map(|b| {
                canonical
                    .iter()
                    .find(|c| c.lo_hz == b[0] && c.hi_hz == b[1])
                    .cloned()
                    .ok_or_else(|| archive_error(&bin, format!("band [{}, {}] is not canonical", b[0], b[1])))
            })
            .collect::<Result<_>>()?;
        let band_names: Vec<String> = selection
            .indices(&bands)
            .map_err(|e| archive_error(&bin, e.to_string()))?
            .into_iter()
            .map(|k| bands[k].name.clone())
            .collect();

        let text = std::fs::read_to_string(&idx).map_err(|e| Error::io(&idx, e))?;
        let mut lines = text.lines().enumerate();
        let perr =
            |n: usize, m: String| Error::Parse { path: idx.clone(), location: format!("line {}", n + 1), message: m };
        let channel_labels: Vec<String> = match lines.next() {
            Some((_, l)) if l.starts_with("#channels=") => {
                l["#channels=".len()..].split(';').filter(|s| !s.is_empty()).map(String::from).collect()
            }
            _ => return Err(perr(0, "missing #channels header".into())),
        };
        lines.next();
        let mut trials = Vec::new();
        for (n, line) in lines {
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 7 {
                return Err(perr(n, format!("expected 7 fields, found {}", f.len())));
            }
            let i: usize = f[0].parse().map_err(|_| perr(n, "bad index".into()))?;
            let num = |s: &str| s.parse::<f64>().map_err(|_| perr(n, format!("'{s}' is not a number")));
            let rating = match (f[4], f[5]) {
                ("", "") => None,
                (v, a) => Some(Rating { valence: num(v)?, arousal: num(a)? }),
            };
            let label = LabelInfo { class_tag: (!f[3].is_empty()).then(|| f[3].to_string()), rating };

            let de =
                ar.get(&format!("trial.{i}.de")).ok_or_else(|| archive_error(&bin, format!("missing trial.{i}.de")))?;
            let &[w, c, b] = de.shape() else {
                return Err(archive_error(&bin, format!("trial.{i}.de has shape {:?}", de.shape())));
            };
            if b != bands.len() || c != channel_labels.len() {
                return Err(archive_error(
                    &bin,
                    format!("trial.{i}.de shape {:?} disagrees with the index", de.shape()),
                ));
            }
            let mut values = vec![0.0; w * c * b];
            for wi in 0..w {
                for ci in 0..c {
                    for bi in 0..b {
                        values[(ci * w + wi) * b + bi] = de.data()[(wi * c + ci) * b + bi];
                    }
                }
            }
            let wde = WindowedDeTensor::from_values(f[1], c, w, bands.clone(), window_seconds, values)?;
            let maps = ar
                .get(&format!("trial.{i}.asmap"))
                .ok_or_else(|| archive_error(&bin, format!("missing trial.{i}.asmap")))?;
            if maps.shape() != [w, band_names.len(), c, c] {
                return Err(archive_error(&bin, format!("trial.{i}.asmap has shape {:?}", maps.shape())));
            }
            let asmaps = maps
                .data()
                .chunks(band_names.len() * c * c)
                .map(|chunk| AsMapTensor::from_values(c, band_names.clone(), true, chunk.to_vec()))
                .collect::<Result<_>>()?;
            trials.push(TrialFeatures { trial_id: f[1].into(), subject_id: f[2].into(), label, de: wde, asmaps });
        }
        Ok(Self { selection, window_seconds, channel_labels, trials })
    }

    /// Classifier windows for `method` over `band`. AsMap inputs come from
    /// the stored maps, so `band` must be covered by the extracted
    /// selection; baseline vectors are derived from the stored DE.
    pub fn windows(
        &self,
        method: FeatureMethod,
        band: BandSelection,
        scheme: &LabelScheme,
        pairings: &PairingFiles,
    ) -> Result<Vec<LabeledWindow>> {
        let planes = if method.uses_cnn() {
            Some(match (self.selection, band) {
                (s, b) if s == b => None,
                (BandSelection::All, BandSelection::Single(name)) => Some(name),
                (s, b) => {
                    return Err(Error::invalid(format!(
                        "features were extracted for band '{s}' but the run asks for band '{b}'"
                    )))
                }
            })
        } else {
            None
        };
        let mut out = Vec::new();
        for t in &self.trials {
            let class_index =
                assign_label(&t.label, scheme).map_err(|e| Error::invalid(format!("trial {}: {e}", t.trial_id)))?;
            let feats: Vec<Tensor> = match &planes {
                Some(sel) => t
                    .asmaps
                    .iter()
                    .map(|m| {
                        let m = match sel {
                            Some(name) => {
                                let k = m
                                    .band_names
                                    .iter()
                                    .position(|n| n == name.as_str())
                                    .ok_or_else(|| Error::invalid(format!("stored maps lack band {name}")))?;
                                m.select_bands(&[k])?
                            }
                            None => m.clone(),
                        };
                        Tensor::new(m.shape().to_vec(), m.into_values())
                    })
                    .collect::<Result<_>>()?,
                None => super::window_features(&t.de, &self.channel_labels, method, band, pairings)?,
            };
            out.extend(feats.into_iter().enumerate().map(|(w, features)| LabeledWindow {
                features,
                class_index,
                trial_id: t.trial_id.clone(),
                subject_id: t.subject_id.clone(),
                window_index: w,
            }));
        }
        if out.is_empty() {
            return Err(Error::invalid("feature archive holds no windows"));
        }
        Ok(out)
    }
}

fn de_window_major(de: &WindowedDeTensor) -> Vec<f64> {
    let mut v = Vec::with_capacity(de.values().len());
    for w in 0..de.n_windows {
        for c in 0..de.n_channels {
            for b in 0..de.n_bands() {
                v.push(de.get(c, w, b));
            }
        }
    }
    v
}
