use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use asmap::dataset::{
    save_recording, split, synth_audit, synth_generate, write_manifest, ManifestEntry, RecordingFormat,
};
use asmap::experiment::{
    check_train_classes, evaluate, extract_features, model_spec, run_sweep, DataSource, ExperimentConfig, FeatureSet,
    ModelMeta,
};
use asmap::nn::{grad_check, toy_case, train as fit, Network, Tensor, ToyCase};

use crate::config::ConfigFile;
use crate::{CliError, GradLayers, TrialFormat};

const RESOLVED_CONFIG: &str = "resolved_config.toml";
const GRADCHECK_THRESHOLD: f64 = 1e-4;
const DENSE_GRADCHECK_THRESHOLD: f64 = 1e-7;

fn io_err(what: &str, path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Io(format!("{what} {}: {e}", path.display()))
}

fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> Result<(), CliError> {
    std::fs::write(path, contents).map_err(|e| io_err("writing", path, e))
}

fn create_dir(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(|e| io_err("creating", dir, e))
}

fn load_config(path: &Path, seed: Option<u64>) -> Result<ConfigFile, CliError> {
    let mut cfg = ConfigFile::load(path)?;
    cfg.override_seed(seed);
    Ok(cfg)
}

fn config_err(e: asmap::Error) -> CliError {
    CliError::Config(e.to_string())
}

pub fn synth(config: &Path, out: &Path, force: bool, seed: Option<u64>, format: TrialFormat) -> Result<(), CliError> {
    let cfg = load_config(config, seed)?;
    let spec = cfg.synth_spec()?;
    if !force && out.read_dir().is_ok_and(|mut d| d.next().is_some()) {
        return Err(CliError::Io(format!(
            "refusing to write into non-empty directory {} (use --force)",
            out.display()
        )));
    }
    let trials_dir = out.join("trials");
    create_dir(&trials_dir)?;
    let recordings = synth_generate(spec)?;
    let (fmt, ext) = match format {
        TrialFormat::Rawbin => (RecordingFormat::Rawbin, "bin"),
        TrialFormat::Csv => (RecordingFormat::Csv, "csv"),
    };
    let mut entries = Vec::with_capacity(recordings.len());
    for rec in &recordings {
        let path = trials_dir.join(format!("{}.{ext}", rec.trial_id));
        save_recording(rec, &path, fmt)?;
        entries.push(ManifestEntry { path, subject_id: rec.subject_id.clone(), trial_id: rec.trial_id.clone() });
    }
    let manifest = out.join("manifest.csv");
    write_manifest(&manifest, &entries)?;

    let audit = synth_audit(spec, &recordings, &cfg.spectral)?;
    let mut csv = String::from("class,channel,band,specified_gain,realized_gain,relative_error\n");
    for a in &audit {
        let _ = writeln!(
            csv,
            "{},{},{},{},{:.6},{:.6}",
            a.class,
            a.channel,
            a.band,
            a.specified_gain,
            a.realized_gain,
            a.relative_error()
        );
    }
    write_file(&out.join("audit.csv"), csv)?;
    write_file(&out.join(RESOLVED_CONFIG), cfg.to_toml())?;

    let worst = audit.iter().map(|a| a.relative_error()).fold(0.0, f64::max);
    println!("trials={}", recordings.len());
    println!("manifest={}", manifest.display());
    println!("max_gain_rel_error={worst:.4}");
    Ok(())
}

pub fn extract(config: &Path, manifest: Option<&Path>, out: &Path) -> Result<(), CliError> {
    let cfg = load_config(config, None)?;
    let run = cfg.experiment_config(manifest)?;
    let recordings = run.source.load()?;
    let (set, failures) =
        extract_features(&recordings, &run.spectral, run.smoothing_span, run.window_seconds, run.band)
            .map_err(config_err)?;
    for t in &set.trials {
        println!("trial={} windows={}", t.trial_id, t.de.n_windows);
    }
    create_dir(out)?;
    set.write(out)?;
    write_file(&out.join(RESOLVED_CONFIG), cfg.to_toml())?;
    println!("trials={} windows={} failed={}", set.trials.len(), set.n_windows(), failures.len());
    if failures.is_empty() {
        return Ok(());
    }
    for (trial, e) in &failures {
        eprintln!("failed trial={trial}: {e}");
    }
    Err(CliError::Run(format!("{} of {} trials failed", failures.len(), recordings.len())))
}

/// Resolved config for runs on a feature archive, with the archive as the
/// data source.
fn feature_run(cfg: &ConfigFile, features: &Path) -> Result<(ExperimentConfig, FeatureSet), CliError> {
    let mut shadow = cfg.clone();
    if let Some(e) = shadow.experiment.as_mut() {
        e.manifest = Some(features.to_path_buf());
    } else {
        shadow.experiment =
            Some(crate::config::ExperimentSection { manifest: Some(features.to_path_buf()), ..Default::default() });
    }
    let mut run = shadow.experiment_config(None)?;
    run.source = DataSource::Features(features.to_path_buf());
    let set = FeatureSet::read(features)?;
    if set.window_seconds != run.window_seconds {
        return Err(CliError::Config(format!(
            "features were extracted with {} s windows but the config asks for {} s",
            set.window_seconds, run.window_seconds
        )));
    }
    Ok((run, set))
}

fn out_dir(out: Option<&Path>, model: &Path) -> PathBuf {
    out.map(Path::to_path_buf)
        .unwrap_or_else(|| model.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new(".")).to_path_buf())
}

pub fn train(
    config: &Path,
    features: &Path,
    model_out: &Path,
    out: Option<&Path>,
    seed: Option<u64>,
) -> Result<(), CliError> {
    let cfg = load_config(config, seed)?;
    let (run, set) = feature_run(&cfg, features)?;
    let windows = set.windows(run.method, run.band, &run.label_scheme, &run.pairings).map_err(config_err)?;
    let (train_set, _) = split(&windows, &run.split).map_err(config_err)?;
    check_train_classes(&train_set, &run.label_scheme)?;
    let spec = model_spec(run.method, &train_set[0].features, run.label_scheme.n_classes()).map_err(config_err)?;
    let mut net = Network::build(spec, run.train.seed)?;
    let data: Vec<(&Tensor, usize)> = train_set.iter().map(|w| (&w.features, w.class_index)).collect();
    let history = fit(&mut net, &data, &run.train)?;

    let dir = out_dir(out, model_out);
    create_dir(&dir)?;
    if let Some(parent) = model_out.parent().filter(|p| !p.as_os_str().is_empty()) {
        create_dir(parent)?;
    }
    let meta = ModelMeta { method: run.method, band: run.band, window_seconds: run.window_seconds };
    net.save(model_out, &meta.records())?;
    let mut csv = String::from("epoch,batch_loss,loss,accuracy\n");
    for e in &history.epochs {
        let _ = writeln!(csv, "{},{},{},{}", e.epoch, e.batch_loss, e.loss, e.accuracy);
    }
    write_file(&dir.join("history.csv"), csv)?;
    write_file(&dir.join("train_config.toml"), cfg.to_toml())?;

    println!("train_windows={} parameters={}", train_set.len(), net.parameter_count());
    println!("epochs={} final_train_accuracy={:.4}", history.epochs.len(), history.final_accuracy());
    if history.diverged {
        return Err(CliError::Run("training diverged".into()));
    }
    Ok(())
}

pub fn eval(
    config: &Path,
    features: &Path,
    model_in: &Path,
    out: Option<&Path>,
    seed: Option<u64>,
) -> Result<(), CliError> {
    let cfg = load_config(config, seed)?;
    let (run, set) = feature_run(&cfg, features)?;
    let (net, archive) = Network::load(model_in)?;
    let meta = ModelMeta::from_archive(&archive).map_err(config_err)?;
    let wanted = ModelMeta { method: run.method, band: run.band, window_seconds: run.window_seconds };
    if meta != wanted {
        return Err(CliError::Config(format!(
            "checkpoint {} was trained with {meta}, config {} asks for {wanted}",
            model_in.display(),
            config.display()
        )));
    }
    let windows = set.windows(run.method, run.band, &run.label_scheme, &run.pairings).map_err(config_err)?;
    let (_, test_set) = split(&windows, &run.split).map_err(config_err)?;
    let input = net.input_shape();
    if test_set[0].features.shape() != input.as_slice() {
        return Err(CliError::Config(format!(
            "shape mismatch: checkpoint expects input {input:?}, features have {:?}",
            test_set[0].features.shape()
        )));
    }
    let mut report = evaluate(&net, &test_set, &run.label_scheme.class_names()).map_err(config_err)?;
    report.n_train = windows.len() - test_set.len();
    report.seed = run.train.seed;
    report.split_seed = run.split.seed;
    report.config = Some(run);
    let dir = out_dir(out, model_in);
    report.write(&dir)?;
    write_file(&dir.join("eval_config.toml"), cfg.to_toml())?;
    println!("test_windows={}", report.n_test);
    println!("accuracy={:.4}", report.accuracy);
    Ok(())
}

pub fn sweep(config: &Path, out: &Path, seed: Option<u64>) -> Result<(), CliError> {
    let cfg = load_config(config, seed)?;
    let spec = cfg.sweep.clone().ok_or_else(|| CliError::Config("config has no [sweep] section".into()))?;
    spec.cells().map_err(config_err)?;
    let base = cfg.experiment_config(None)?;
    let result = run_sweep(&base, &spec)?;
    for w in &result.warnings {
        eprintln!("warning: {w}");
    }
    result.write(out)?;
    write_file(&out.join(RESOLVED_CONFIG), cfg.to_toml())?;
    print!("{}", result.summary_table());
    let failures = result.failures();
    println!("cells={} failed={}", result.cells.len(), failures.len());
    if failures.is_empty() {
        return Ok(());
    }
    for c in &failures {
        if let asmap::experiment::CellOutcome::Failed { error } = &c.outcome {
            eprintln!("failed cell method={} band={} window_s={}: {error}", c.method, c.band, c.window_s);
        }
    }
    Err(CliError::Run(format!("{} of {} sweep cells failed", failures.len(), result.cells.len())))
}

pub fn gradcheck(layers: GradLayers, eps: f64, seed: u64) -> Result<(), CliError> {
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(CliError::Config(format!("--eps must be positive, got {eps}")));
    }
    let case = match layers {
        GradLayers::Full => ToyCase::FullCnn,
        GradLayers::Dense => ToyCase::DenseOnly,
    };
    let (net, x, class) = toy_case(case, seed).map_err(config_err)?;
    let report = grad_check(&net, &x, class, eps)?;
    for p in &report.parameters {
        println!(
            "param={} checked={} skipped={} max_rel_err={:.3e} tensor_rel_err={:.3e}",
            p.name, p.checked, p.skipped, p.max_rel_error, p.tensor_rel_error
        );
    }
    println!("max_rel_err={:.3e}", report.max_rel_error);
    println!("max_tensor_rel_err={:.3e}", report.max_tensor_rel_error);
    let (error, threshold) = match layers {
        GradLayers::Full => (report.max_rel_error, GRADCHECK_THRESHOLD),
        GradLayers::Dense => (report.max_tensor_rel_error, DENSE_GRADCHECK_THRESHOLD),
    };
    if error < threshold {
        println!("gradcheck=pass");
        Ok(())
    } else {
        println!("gradcheck=fail");
        Err(CliError::Run(format!("relative error {error:.3e} is not below {threshold:e}")))
    }
}
