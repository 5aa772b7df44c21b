//! TOML run configuration. Every section rejects unknown keys.

use std::path::{Path, PathBuf};

use asmap::dataset::{LabelScheme, SplitSpec, SynthSpec};
use asmap::experiment::{DataSource, ExperimentConfig, FeatureMethod, PairingFiles, SweepSpec};
use asmap::features::BandSelection;
use asmap::nn::TrainConfig;
use asmap::signal::SpectralConfig;
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub experiment: Option<ExperimentSection>,
    #[serde(default)]
    pub spectral: SpectralConfig,
    #[serde(default)]
    pub split: SplitSpec,
    #[serde(default)]
    pub train: TrainConfig,
    #[serde(default)]
    pub pairings: PairingFiles,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub synth: Option<SynthSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSection {
    #[serde(default = "default_method")]
    pub method: FeatureMethod,
    #[serde(default = "default_band")]
    pub band: BandSelection,
    #[serde(default = "default_window")]
    pub window_seconds: f64,
    #[serde(default = "default_span")]
    pub smoothing_span: usize,
    /// `three-class`, `valence-binary`, `arousal-binary`, `four-quadrant`
    /// or `categorical`; defaults to categorical over the synth classes.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label_scheme: Option<String>,
    /// Class tags for the categorical scheme.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub classes: Option<Vec<String>>,
    /// Data source when no `[synth]` section is given.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub manifest: Option<PathBuf>,
    /// Sets both the split and the training seed.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

fn default_method() -> FeatureMethod {
    FeatureMethod::AsMapCnn
}

fn default_band() -> BandSelection {
    BandSelection::All
}

fn default_window() -> f64 {
    3.0
}

fn default_span() -> usize {
    5
}

impl Default for ExperimentSection {
    fn default() -> Self {
        Self {
            method: default_method(),
            band: default_band(),
            window_seconds: default_window(),
            smoothing_span: default_span(),
            label_scheme: None,
            classes: None,
            manifest: None,
            seed: None,
        }
    }
}

impl ConfigFile {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    /// Loads a config and anchors relative paths at the file's directory.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Io(format!("reading config {}: {e}", path.display())))?;
        let mut cfg = Self::parse(&text).map_err(|e| match e {
            CliError::Config(m) => CliError::Config(format!("{}: {m}", path.display())),
            other => other,
        })?;
        let base = path.parent().unwrap_or_else(|| Path::new(""));
        let anchor = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        if let Some(m) = cfg.experiment.as_mut().and_then(|e| e.manifest.as_mut()) {
            anchor(m);
        }
        if let Some(p) = cfg.pairings.hemispheric.as_mut() {
            anchor(p);
        }
        if let Some(p) = cfg.pairings.frontal_posterior.as_mut() {
            anchor(p);
        }
        Ok(cfg)
    }

    /// Applies `--seed` to every seeded section.
    pub fn override_seed(&mut self, seed: Option<u64>) {
        let Some(seed) = seed else { return };
        self.experiment.get_or_insert_with(Default::default).seed = Some(seed);
        if let Some(s) = self.synth.as_mut() {
            s.seed = seed;
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn synth_spec(&self) -> Result<&SynthSpec, CliError> {
        let spec = self.synth.as_ref().ok_or_else(|| CliError::Config("config has no [synth] section".into()))?;
        spec.validate().map_err(|e| CliError::Config(format!("[synth]: {e}")))?;
        Ok(spec)
    }

    pub fn experiment(&self) -> ExperimentSection {
        self.experiment.clone().unwrap_or_default()
    }

    pub fn label_scheme(&self) -> Result<LabelScheme, CliError> {
        let e = self.experiment();
        let categorical = |classes: Option<Vec<String>>| {
            classes
                .or_else(|| self.synth.as_ref().map(|s| s.classes.iter().map(|c| c.name.clone()).collect()))
                .map(|classes| LabelScheme::Categorical { classes })
                .ok_or_else(|| CliError::Config("the categorical scheme needs `classes` or a [synth] section".into()))
        };
        match e.label_scheme.as_deref() {
            None | Some("categorical") => categorical(e.classes),
            Some(s) => {
                if e.classes.is_some() {
                    return Err(CliError::Config("`classes` only applies to the categorical label scheme".into()));
                }
                s.parse().map_err(|err: asmap::Error| CliError::Config(err.to_string()))
            }
        }
    }

    /// Resolves the run configuration. `manifest` overrides the configured
    /// source; otherwise `[experiment].manifest` wins over `[synth]`.
    pub fn experiment_config(&self, manifest: Option<&Path>) -> Result<ExperimentConfig, CliError> {
        let e = self.experiment();
        let source = match (manifest, &e.manifest, &self.synth) {
            (Some(m), _, _) => DataSource::Manifest(m.to_path_buf()),
            (None, Some(m), _) => DataSource::Manifest(m.clone()),
            (None, None, Some(s)) => DataSource::Synth(s.clone()),
            (None, None, None) => {
                return Err(CliError::Config("no data source: give a manifest or a [synth] section".into()))
            }
        };
        let mut cfg = ExperimentConfig::new(source, self.label_scheme()?);
        cfg.method = e.method;
        cfg.band = e.band;
        cfg.window_seconds = e.window_seconds;
        cfg.smoothing_span = e.smoothing_span;
        cfg.spectral = self.spectral;
        cfg.split = self.split;
        cfg.train = self.train.clone();
        cfg.pairings = self.pairings.clone();
        if let Some(seed) = e.seed {
            cfg = cfg.with_seed(seed);
        }
        cfg.validate().map_err(|err| CliError::Config(err.to_string()))?;
        Ok(cfg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = r#"
# comment
[experiment]
method = "dasm"
band = "gamma"
window_seconds = 6
seed = 3

[train]
epochs = 4

[synth]
n_channels = 12
sample_rate_hz = 128
trial_seconds = 30
n_trials_per_class = 2

[[synth.classes]]
name = "a"
[[synth.classes.boosts]]
channels = [0, 1]
band = "gamma"
gain = 4.0

[[synth.classes]]
name = "b"
"#;

    #[test]
    fn parses_and_resolves() {
        let cfg = ConfigFile::parse(SAMPLE).unwrap();
        let run = cfg.experiment_config(None).unwrap();
        assert_eq!(run.method, FeatureMethod::Dasm);
        assert_eq!(run.window_seconds, 6.0);
        assert_eq!(run.train.seed, 3);
        assert_eq!(run.split.seed, 3);
        assert_eq!(run.train.epochs, 4);
        assert_eq!(run.label_scheme, LabelScheme::Categorical { classes: vec!["a".into(), "b".into()] });
        assert!(matches!(run.source, DataSource::Synth(_)));
    }

    #[test]
    fn resolved_copy_round_trips() {
        let mut cfg = ConfigFile::parse(SAMPLE).unwrap();
        cfg.override_seed(Some(11));
        let back = ConfigFile::parse(&cfg.to_toml()).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(back.synth.unwrap().seed, 11);
    }

    #[test]
    fn unknown_keys_rejected() {
        for bad in ["[train]\nlr = 1\n", "[experiment]\nwindow = 3\n", "[bogus]\n", "top = 1\n"] {
            assert!(matches!(ConfigFile::parse(bad), Err(CliError::Config(_))), "{bad}");
        }
    }

    #[test]
    fn label_scheme_names() {
        let cfg = ConfigFile::parse("[experiment]\nlabel_scheme = \"four-quadrant\"\n").unwrap();
        assert_eq!(cfg.label_scheme().unwrap(), LabelScheme::FourQuadrant);
        let cfg = ConfigFile::parse("[experiment]\nlabel_scheme = \"categorical\"\n").unwrap();
        assert!(cfg.label_scheme().is_err());
    }

    #[test]
    fn non_multiple_window_is_a_config_error() {
        let text = SAMPLE.replace("window_seconds = 6", "window_seconds = 2.5");
        let cfg = ConfigFile::parse(&text).unwrap();
        assert!(matches!(cfg.experiment_config(None), Err(CliError::Config(_))));
    }
}
