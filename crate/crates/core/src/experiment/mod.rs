//! Feature extraction → training → evaluation, and band × window × method
//! sweeps.

mod report;
mod store;
mod sweep;

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{
    assign_label, class_counts, load_manifest, split, synth_generate, LabelScheme, LabeledWindow, SplitSpec, SynthSpec,
};
use crate::error::{Error, Result, StageContext};
use crate::features::{
    compute_de, feature_dasm, feature_dcau, feature_de_flat, feature_rasm, normalize_asmap, smooth_moving_average,
    window_average, BandSelection, ChannelPairing, DeTensor, PairingKind, WindowedDeTensor,
};
use crate::nn::{train, ModelSpec, Network, Tensor, TensorArchive, TrainConfig};
use crate::signal::{Band, LabelInfo, Recording, SpectralConfig};

pub use report::{evaluate, EvaluationReport};
pub use store::{extract_features, FeatureSet, TrialFeatures, FEATURE_ARCHIVE_FILE, FEATURE_INDEX_FILE};
pub use sweep::{run_sweep, CellOutcome, SeedOverride, SweepCell, SweepResult, SweepSpec};

/// Default sweep window lengths, in seconds.
pub const STANDARD_WINDOWS: [f64; 4] = [3.0, 6.0, 12.0, 30.0];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum FeatureMethod {
    De,
    Dasm,
    Rasm,
    Dcau,
    AsMapCnn,
}

impl FeatureMethod {
    /// Row order of the accuracy tables.
    pub const ALL: [FeatureMethod; 5] =
        [FeatureMethod::De, FeatureMethod::Dasm, FeatureMethod::Rasm, FeatureMethod::Dcau, FeatureMethod::AsMapCnn];

    pub fn as_str(self) -> &'static str {
        match self {
            FeatureMethod::De => "de",
            FeatureMethod::Dasm => "dasm",
            FeatureMethod::Rasm => "rasm",
            FeatureMethod::Dcau => "dcau",
            FeatureMethod::AsMapCnn => "asmap-cnn",
        }
    }

    pub fn uses_cnn(self) -> bool {
        self == FeatureMethod::AsMapCnn
    }

    pub(crate) fn code(self) -> usize {
        Self::ALL.iter().position(|&m| m == self).expect("listed")
    }

    pub(crate) fn from_code(code: usize) -> Option<Self> {
        Self::ALL.get(code).copied()
    }
}

impl fmt::Display for FeatureMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FeatureMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "de" => Ok(FeatureMethod::De),
            "dasm" => Ok(FeatureMethod::Dasm),
            "rasm" => Ok(FeatureMethod::Rasm),
            "dcau" => Ok(FeatureMethod::Dcau),
            "asmap-cnn" | "asmap" | "asmap+cnn" => Ok(FeatureMethod::AsMapCnn),
            other => Err(Error::invalid(format!("unknown feature method '{other}'"))),
        }
    }
}

impl TryFrom<String> for FeatureMethod {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<FeatureMethod> for String {
    fn from(m: FeatureMethod) -> String {
        m.as_str().to_string()
    }
}

pub(crate) fn selection_code(sel: BandSelection) -> usize {
    BandSelection::TABLE_ORDER.iter().position(|&s| s == sel).expect("listed")
}

pub(crate) fn selection_from_code(code: usize) -> Option<BandSelection> {
    BandSelection::TABLE_ORDER.get(code).copied()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DataSource {
    Manifest(PathBuf),
    Synth(SynthSpec),
    /// Pre-extracted feature archive; holds windows, not recordings.
    Features(PathBuf),
}

impl DataSource {
    pub fn load(&self) -> Result<Vec<Recording>> {
        match self {
            DataSource::Manifest(path) => load_manifest(path),
            DataSource::Synth(spec) => synth_generate(spec),
            DataSource::Features(path) => {
                Err(Error::invalid(format!("{} is a feature archive and holds no recordings", path.display())))
            }
        }
    }
}

/// Feature settings a checkpoint was trained with, stored as `meta.*`
/// records next to the parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelMeta {
    pub method: FeatureMethod,
    pub band: BandSelection,
    pub window_seconds: f64,
}

impl ModelMeta {
    pub fn records(&self) -> Vec<(String, Tensor)> {
        vec![
            ("meta.method".into(), Tensor::from_vec(vec![self.method.code() as f64])),
            ("meta.band".into(), Tensor::from_vec(vec![selection_code(self.band) as f64])),
            ("meta.window_s".into(), Tensor::from_vec(vec![self.window_seconds])),
        ]
    }

    pub fn from_archive(archive: &TensorArchive) -> Result<Self> {
        let scalar = |name: &str| {
            archive
                .get(name)
                .and_then(|t| t.data().first().copied())
                .ok_or_else(|| Error::invalid(format!("checkpoint lacks {name}")))
        };
        Ok(Self {
            method: FeatureMethod::from_code(scalar("meta.method")? as usize)
                .ok_or_else(|| Error::invalid("checkpoint has an unknown meta.method"))?,
            band: selection_from_code(scalar("meta.band")? as usize)
                .ok_or_else(|| Error::invalid("checkpoint has an unknown meta.band"))?,
            window_seconds: scalar("meta.window_s")?,
        })
    }
}

impl fmt::Display for ModelMeta {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "method={} band={} window_s={}", self.method, self.band, self.window_seconds)
    }
}

/// Optional pairing files overriding the shipped montage defaults.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PairingFiles {
    pub hemispheric: Option<PathBuf>,
    pub frontal_posterior: Option<PathBuf>,
}

impl PairingFiles {
    pub fn resolve(&self, labels: &[String], kind: PairingKind) -> Result<ChannelPairing> {
        let file = match kind {
            PairingKind::Hemispheric => &self.hemispheric,
            PairingKind::FrontalPosterior => &self.frontal_posterior,
        };
        match file {
            Some(path) => ChannelPairing::from_file(path, labels, kind),
            None => ChannelPairing::default_for(labels, kind),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub source: DataSource,
    pub label_scheme: LabelScheme,
    pub method: FeatureMethod,
    pub band: BandSelection,
    pub window_seconds: f64,
    /// Odd moving-average span over epochs; 1 disables smoothing.
    pub smoothing_span: usize,
    pub spectral: SpectralConfig,
    pub split: SplitSpec,
    pub train: TrainConfig,
    pub pairings: PairingFiles,
    pub output_dir: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn new(source: DataSource, label_scheme: LabelScheme) -> Self {
        Self {
            source,
            label_scheme,
            method: FeatureMethod::AsMapCnn,
            band: BandSelection::All,
            window_seconds: 3.0,
            smoothing_span: 5,
            spectral: SpectralConfig::default(),
            split: SplitSpec::default(),
            train: TrainConfig::default(),
            pairings: PairingFiles::default(),
            output_dir: None,
        }
    }

    /// Uses `seed` for initialization, shuffling, dropout and the split.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.train.seed = seed;
        self.split.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.smoothing_span == 0 || self.smoothing_span.is_multiple_of(2) {
            return Err(Error::invalid(format!(
                "smoothing_span must be odd and positive, got {}",
                self.smoothing_span
            )));
        }
        crate::features::epochs_per_window(self.window_seconds, self.spectral.epoch_seconds)?;
        self.split.validate()?;
        self.train.validate()?;
        if self.label_scheme.n_classes() < 2 {
            return Err(Error::invalid("label scheme needs at least 2 classes"));
        }
        if let DataSource::Synth(spec) = &self.source {
            spec.validate()?;
        }
        Ok(())
    }
}

/// Smoothed all-band DE of one trial, the reusable input of every cell.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialDe {
    pub trial_id: String,
    pub subject_id: String,
    pub channel_labels: Vec<String>,
    pub label: LabelInfo,
    pub de: DeTensor,
}

/// Canonical bands, in order, that fit below Nyquist.
pub fn bands_for(sample_rate_hz: u32) -> Vec<Band> {
    let nyquist = sample_rate_hz as f64 / 2.0;
    Band::canonical().into_iter().filter(|b| b.hi_hz <= nyquist).collect()
}

/// Per-trial DE over every canonical band, smoothed along time.
pub fn prepare_trials(
    recordings: &[Recording],
    spectral: &SpectralConfig,
    smoothing_span: usize,
) -> Result<Vec<TrialDe>> {
    recordings.par_iter().map(|rec| prepare_trial(rec, spectral, smoothing_span)).collect()
}

pub(crate) fn prepare_trial(rec: &Recording, spectral: &SpectralConfig, smoothing_span: usize) -> Result<TrialDe> {
    let de = compute_de(rec, &bands_for(rec.sample_rate_hz), spectral)
        .and_then(|de| smooth_moving_average(&de, smoothing_span))
        .map_err(|e| Error::invalid(format!("trial {}: {e}", rec.trial_id)))?;
    Ok(TrialDe {
        trial_id: rec.trial_id.clone(),
        subject_id: rec.subject_id.clone(),
        channel_labels: rec.channel_labels.clone(),
        label: rec.label.clone(),
        de,
    })
}

/// Per-window classifier inputs: normalized AsMaps `[bands, ch, ch]` for
/// the CNN, flat vectors for the baselines.
pub fn window_features(
    wde: &WindowedDeTensor,
    labels: &[String],
    method: FeatureMethod,
    band: BandSelection,
    pairings: &PairingFiles,
) -> Result<Vec<Tensor>> {
    let flat = |vs: Vec<Vec<f64>>| vs.into_iter().map(Tensor::from_vec).collect();
    match method {
        FeatureMethod::AsMapCnn => (0..wde.n_windows)
            .map(|w| {
                let map = normalize_asmap(&wde.asmap(w, &band)?)?;
                let shape = map.shape().to_vec();
                Tensor::new(shape, map.into_values())
            })
            .collect(),
        FeatureMethod::De => Ok(flat(feature_de_flat(wde, &band)?)),
        FeatureMethod::Dasm => {
            Ok(flat(feature_dasm(wde, &pairings.resolve(labels, PairingKind::Hemispheric)?, &band)?))
        }
        FeatureMethod::Rasm => {
            Ok(flat(feature_rasm(wde, &pairings.resolve(labels, PairingKind::Hemispheric)?, &band)?))
        }
        FeatureMethod::Dcau => {
            Ok(flat(feature_dcau(wde, &pairings.resolve(labels, PairingKind::FrontalPosterior)?, &band)?))
        }
    }
}

/// Windows every trial and attaches trial labels.
pub fn build_windows(trials: &[TrialDe], cfg: &ExperimentConfig) -> Result<Vec<LabeledWindow>> {
    let per_trial: Vec<Vec<LabeledWindow>> = trials
        .par_iter()
        .map(|t| {
            let class_index = assign_label(&t.label, &cfg.label_scheme)
                .map_err(|e| Error::invalid(format!("trial {}: {e}", t.trial_id)))?;
            let wde = window_average(&t.de, cfg.window_seconds)?;
            let feats = window_features(&wde, &t.channel_labels, cfg.method, cfg.band, &cfg.pairings)
                .map_err(|e| Error::invalid(format!("trial {}: {e}", t.trial_id)))?;
            Ok(feats
                .into_iter()
                .enumerate()
                .map(|(w, features)| LabeledWindow {
                    features,
                    class_index,
                    trial_id: t.trial_id.clone(),
                    subject_id: t.subject_id.clone(),
                    window_index: w,
                })
                .collect())
        })
        .collect::<Result<_>>()?;
    let windows: Vec<LabeledWindow> = per_trial.into_iter().flatten().collect();
    if windows.is_empty() {
        return Err(Error::invalid(format!("no trial is long enough for a {} s window", cfg.window_seconds)));
    }
    if let Some(w) = windows.iter().find(|w| w.features.shape() != windows[0].features.shape()) {
        return Err(Error::shape(
            format!("{:?} features in every window", windows[0].features.shape()),
            format!("{:?} in trial {}", w.features.shape(), w.trial_id),
        ));
    }
    Ok(windows)
}

/// Classifier for a feature method and a representative window.
pub fn model_spec(method: FeatureMethod, sample: &Tensor, n_classes: usize) -> Result<ModelSpec> {
    match (method.uses_cnn(), sample.shape()) {
        (true, &[bands, h, w]) => Ok(ModelSpec::Cnn { in_bands: bands, height: h, width: w, n_classes }),
        (false, &[dim]) => Ok(ModelSpec::Mlp { input_dim: dim, n_classes }),
        (_, shape) => Err(Error::shape(
            if method.uses_cnn() { "[bands, channels, channels]" } else { "[dim]" },
            format!("{shape:?}"),
        )),
    }
}

/// Errors unless every class of the scheme appears among the training
/// windows.
pub fn check_train_classes(train: &[LabeledWindow], scheme: &LabelScheme) -> Result<()> {
    let counts = class_counts(train, scheme.n_classes());
    let names = scheme.class_names();
    if let Some(c) = (0..scheme.n_classes()).find(|&c| counts[c] == 0) {
        return Err(Error::InvalidSplit(format!("class {c} ({}) is absent from the training set", names[c])));
    }
    Ok(())
}

/// Split, train and evaluate on prepared windows.
pub fn train_and_evaluate(windows: &[LabeledWindow], cfg: &ExperimentConfig) -> Result<(Network, EvaluationReport)> {
    let started = Instant::now();
    let (train_set, test_set) = split(windows, &cfg.split).stage("split")?;
    check_train_classes(&train_set, &cfg.label_scheme).stage("split")?;

    let n_classes = cfg.label_scheme.n_classes();
    let spec = model_spec(cfg.method, &train_set[0].features, n_classes).stage("train")?;
    let mut net = Network::build(spec, cfg.train.seed).stage("train")?;
    let data: Vec<(&Tensor, usize)> = train_set.iter().map(|w| (&w.features, w.class_index)).collect();
    let history = train(&mut net, &data, &cfg.train).stage("train")?;

    let mut report = evaluate(&net, &test_set, &cfg.label_scheme.class_names()).stage("evaluate")?;
    report.n_train = train_set.len();
    report.history = history;
    report.seed = cfg.train.seed;
    report.split_seed = cfg.split.seed;
    report.config = Some(cfg.clone());
    report.wall_clock_seconds = started.elapsed().as_secs_f64();
    Ok((net, report))
}

/// Full pipeline. Writes `report.json` (and `timing.txt`) when an output
/// directory is configured.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<EvaluationReport> {
    let started = Instant::now();
    cfg.validate().stage("config")?;
    let recordings = cfg.source.load().stage("load")?;
    let trials = prepare_trials(&recordings, &cfg.spectral, cfg.smoothing_span).stage("features")?;
    let windows = build_windows(&trials, cfg).stage("features")?;
    let (_, mut report) = train_and_evaluate(&windows, cfg)?;
    report.wall_clock_seconds = started.elapsed().as_secs_f64();
    if let Some(dir) = &cfg.output_dir {
        report.write(dir).stage("write")?;
    }
    Ok(report)
}
