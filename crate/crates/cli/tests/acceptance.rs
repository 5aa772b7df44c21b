//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any fails. Pass criterion numbers as arguments to run a
//! subset, e.g. `cargo test -p asmap-cli --test acceptance -- 4 7`.

use std::collections::BTreeMap;
use std::f64::consts::{LN_2, PI};
use std::panic::{self, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use asmap::dataset::{split, synth_generate, BandBoost, LabelScheme, SplitMode, SynthClass, SynthSpec};
use asmap::experiment::{
    build_windows, prepare_trials, train_and_evaluate, DataSource, ExperimentConfig, FeatureMethod,
};
use asmap::features::{asmap, compute_de, normalize_asmap, BandSelection};
use asmap::nn::{cnn_flat_dim, grad_check, toy_case, train, ModelSpec, Network, Tensor, ToyCase, TrainConfig};
use asmap::signal::{hanning_window, Band, BandName, Fft, LabelInfo, Recording, SpectralConfig, SpectralEstimator};
use num_complex::Complex64;
use proptest::prelude::*;
use proptest::test_runner::{Config as PropConfig, TestRunner};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

struct Criterion {
    number: u32,
    name: &'static str,
    budget: Option<Duration>,
    run: fn() -> Outcome,
}

fn main() {
    let only: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let secs = |s| Some(Duration::from_secs(s));
    let criteria = [
        Criterion { number: 1, name: "DE analytic oracle", budget: secs(5), run: de_oracle },
        Criterion { number: 2, name: "FFT and periodogram oracles", budget: secs(30), run: fft_oracles },
        Criterion { number: 3, name: "AsMap invariants", budget: None, run: asmap_invariants },
        Criterion { number: 4, name: "gradient check", budget: secs(60), run: gradient_check },
        Criterion { number: 5, name: "overfit oracle", budget: secs(120), run: overfit_oracle },
        Criterion { number: 6, name: "separability oracle", budget: secs(600), run: separability_oracle },
        Criterion { number: 7, name: "shape contracts", budget: None, run: shape_contracts },
        Criterion { number: 8, name: "determinism", budget: None, run: determinism },
        Criterion { number: 9, name: "sweep shapes", budget: None, run: sweep_shapes },
    ];
    panic::set_hook(Box::new(|_| {}));
    let (mut ran, mut failed) = (0, 0);
    for c in criteria.iter().filter(|c| only.is_empty() || only.contains(&c.number)) {
        let started = Instant::now();
        let result = panic::catch_unwind(AssertUnwindSafe(c.run)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            outcome(false, format!("panicked: {msg}"))
        });
        let elapsed = started.elapsed();
        let in_budget = c.budget.is_none_or(|b| elapsed <= b);
        let pass = result.pass && in_budget;
        let budget = c.budget.map_or(String::new(), |b| format!(", budget {} s", b.as_secs()));
        println!(
            "[{}] criterion {}: {} | {} | {:.1} s{budget}",
            if pass { "PASS" } else { "FAIL" },
            c.number,
            c.name,
            result.detail,
            elapsed.as_secs_f64()
        );
        ran += 1;
        failed += usize::from(!pass);
    }
    println!("acceptance: {} of {ran} criteria passed", ran - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}

fn gaussian(rng: &mut ChaCha8Rng, sigma: f64) -> f64 {
    let z: f64 = StandardNormal.sample(rng);
    sigma * z
}

fn de_oracle() -> Outcome {
    let (fs, seconds, channels) = (200usize, 100usize, 4usize);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let samples: Vec<Vec<f64>> =
        (0..channels).map(|_| (0..fs * seconds).map(|_| gaussian(&mut rng, 1.0)).collect()).collect();
    let labels: Vec<String> = (0..channels).map(|c| format!("C{c}")).collect();
    let full = Band::new("full", 0.0, fs as f64 / 2.0).unwrap();
    let cfg = SpectralConfig::default();
    let rec = Recording::new("noise", "s", labels.clone(), fs as u32, samples.clone(), LabelInfo::default()).unwrap();
    let de = compute_de(&rec, std::slice::from_ref(&full), &cfg).unwrap();
    let mean = de.values().iter().sum::<f64>() / de.values().len() as f64;
    let expected = 0.5 * (2.0 * PI * std::f64::consts::E).ln();

    let doubled = samples.iter().map(|r| r.iter().map(|v| 2.0 * v).collect()).collect();
    let rec2 = Recording::new("noise2", "s", labels, fs as u32, doubled, LabelInfo::default()).unwrap();
    let de2 = compute_de(&rec2, &[full], &cfg).unwrap();
    let shift_err = de.values().iter().zip(de2.values()).map(|(a, b)| (b - a - LN_2).abs()).fold(0.0, f64::max);
    outcome(
        (mean - expected).abs() <= 0.1 && shift_err <= 1e-6,
        format!(
            "{} epochs × {channels} ch: mean DE {mean:.4} vs {expected:.4} (|Δ| {:.4} ≤ 0.1); doubling shift error {shift_err:.1e} ≤ 1e-6",
            de.n_epochs,
            (mean - expected).abs()
        ),
    )
}

fn naive_dft(x: &[f64], n: usize) -> Vec<Complex64> {
    (0..=n / 2)
        .map(|k| {
            x.iter()
                .enumerate()
                .map(|(t, &v)| v * Complex64::from_polar(1.0, -2.0 * PI * ((k * t) % n) as f64 / n as f64))
                .sum()
        })
        .collect()
}

fn fft_oracles() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst_fft: f64 = 0.0;
    for _ in 0..1000 {
        let n = 1usize << rng.random_range(1..=9);
        let len = rng.random_range(1..=n);
        let x: Vec<f64> = (0..len).map(|_| rng.random_range(-10.0..10.0)).collect();
        let fast = Fft::new(n).unwrap().real_forward(&x).unwrap();
        let slow = naive_dft(&x, n);
        let scale = slow.iter().map(|c| c.norm()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
        let err = fast.iter().zip(&slow).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max) / scale;
        worst_fft = worst_fft.max(err);
    }

    let fs = 200u32;
    let est = SpectralEstimator::new(&SpectralConfig::default(), fs).unwrap();
    let w = hanning_window(200).unwrap();
    let u = w.iter().map(|v| v * v).sum::<f64>() / w.len() as f64;
    let mut worst_parseval: f64 = 0.0;
    for trial in 0..200 {
        let sigma = 0.1 + trial as f64 * 0.05;
        let x: Vec<f64> = (0..200).map(|_| gaussian(&mut rng, sigma)).collect();
        let total: f64 = est.channel_power(&x).unwrap().iter().sum();
        let time_domain = x.iter().zip(&w).map(|(a, b)| (a * b).powi(2)).sum::<f64>() / (200.0 * u);
        worst_parseval = worst_parseval.max((total - time_domain).abs() / time_domain);
    }
    outcome(
        worst_fft < 1e-9 && worst_parseval < 1e-6,
        format!(
            "1000 random vectors (n = 2..512): max rel error {worst_fft:.1e} < 1e-9; 200 epochs: Parseval rel error {worst_parseval:.1e} < 1e-6"
        ),
    )
}

fn asmap_invariants() -> Outcome {
    let cases = 1000;
    let mut runner = TestRunner::new(PropConfig { cases, failure_persistence: None, ..PropConfig::default() });
    let strategy = (prop::collection::vec(-50.0f64..50.0, 2..=64), -100.0f64..100.0);
    let bands = [BandName::Gamma.band()];
    let sel = BandSelection::Single(BandName::Gamma);
    let result = runner.run(&strategy, |(column, shift)| {
        let n = column.len();
        let as_rows = |c: &[f64]| c.iter().map(|&v| vec![v]).collect::<Vec<_>>();
        let raw = asmap(&as_rows(&column), &bands, &sel).unwrap();
        let shifted: Vec<f64> = column.iter().map(|v| v + shift).collect();
        let raw_s = asmap(&as_rows(&shifted), &bands, &sel).unwrap();
        let norm = normalize_asmap(&raw).unwrap();
        for i in 0..n {
            prop_assert_eq!(raw.get(i, i, 0), 0.0);
            prop_assert!((norm.get(i, i, 0) - 0.5).abs() <= 1e-12);
            for j in 0..n {
                prop_assert_eq!(raw.get(i, j, 0), -raw.get(j, i, 0));
                prop_assert!((raw_s.get(i, j, 0) - raw.get(i, j, 0)).abs() <= 1e-9);
                let v = norm.get(i, j, 0);
                prop_assert!((0.0..=1.0).contains(&v));
                prop_assert!((v + norm.get(j, i, 0) - 1.0).abs() <= 1e-12);
            }
        }
        let flat = asmap(&as_rows(&vec![column[0]; n]), &bands, &sel).unwrap();
        prop_assert!(normalize_asmap(&flat).unwrap().values().iter().all(|&v| v == 0.5));
        Ok(())
    });
    match result {
        Ok(()) => outcome(
            true,
            format!(
                "{cases} random DE columns (2..64 channels): antisymmetry, zero diagonal, translation invariance, \
                 range [0,1], N+Nᵀ=1 (1e-12), diagonal 0.5, degenerate plane 0.5"
            ),
        ),
        Err(e) => outcome(false, format!("property failed: {e}")),
    }
}

fn gradient_check() -> Outcome {
    let tiny = Network::build(ModelSpec::Cnn { in_bands: 2, height: 8, width: 8, n_classes: 3 }, 0);
    let (net, x, class) = toy_case(ToyCase::FullCnn, 0).unwrap();
    let full = grad_check(&net, &x, class, 1e-3).unwrap();
    let (net, x, class) = toy_case(ToyCase::DenseOnly, 0).unwrap();
    let dense = grad_check(&net, &x, class, 1e-3).unwrap();
    let checked: usize = full.parameters.iter().map(|p| p.checked).sum();
    outcome(
        full.max_rel_error < 1e-4 && dense.max_tensor_rel_error < 1e-7,
        format!(
            "8×8×2 input {} by the stack (8→6→3→1, second pool empty), so the full CNN is checked on {:?}: \
             elementwise max rel error {:.1e} < 1e-4 over {checked} parameters; dense-only per-tensor rel error \
             {:.1e} < 1e-7 (elementwise {:.1e}, set by near-zero gradients) at ε = 1e-3",
            if tiny.is_err() { "rejected" } else { "accepted" },
            x_shape(ToyCase::FullCnn),
            full.max_rel_error,
            dense.max_tensor_rel_error,
            dense.max_rel_error
        ),
    )
}

fn x_shape(case: ToyCase) -> Vec<usize> {
    toy_case(case, 0).unwrap().1.shape().to_vec()
}

fn hemisphere_spec(n_trials_per_class: usize, trial_seconds: f64, gain: f64, seed: u64) -> SynthSpec {
    let boost = |channels: Vec<usize>| vec![BandBoost { channels, band: BandName::Gamma, gain }];
    SynthSpec {
        n_channels: 16,
        sample_rate_hz: 200,
        trial_seconds,
        n_trials_per_class,
        classes: vec![
            SynthClass { name: "left".into(), valence: None, arousal: None, boosts: boost((0..8).collect()) },
            SynthClass { name: "right".into(), valence: None, arousal: None, boosts: boost((8..16).collect()) },
        ],
        noise_sigma: 1.0,
        seed,
    }
}

fn hemisphere_config(spec: SynthSpec, method: FeatureMethod) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::new(
        DataSource::Synth(spec),
        LabelScheme::Categorical { classes: vec!["left".into(), "right".into()] },
    );
    cfg.method = method;
    cfg.band = BandSelection::Single(BandName::Gamma);
    cfg.window_seconds = 3.0;
    cfg.split.mode = SplitMode::WindowStratified;
    cfg.split.test_fraction = 0.25;
    cfg
}

fn overfit_oracle() -> Outcome {
    let defaults = TrainConfig { epochs: 200, ..TrainConfig::default() };

    let cfg = hemisphere_config(hemisphere_spec(2, 30.0, 4.0, 11), FeatureMethod::AsMapCnn);
    let recs = synth_generate(match &cfg.source {
        DataSource::Synth(s) => s,
        _ => unreachable!(),
    })
    .unwrap();
    let windows = build_windows(&prepare_trials(&recs, &cfg.spectral, cfg.smoothing_span).unwrap(), &cfg).unwrap();
    let data: Vec<(&Tensor, usize)> = windows.iter().map(|w| (&w.features, w.class_index)).collect();
    let mut cnn = Network::build(ModelSpec::Cnn { in_bands: 1, height: 16, width: 16, n_classes: 2 }, 0).unwrap();
    let h_cnn = train(&mut cnn, &data, &defaults).unwrap();

    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let xs: Vec<Tensor> =
        (0..40).map(|_| Tensor::from_vec((0..16).map(|_| gaussian(&mut rng, 1.0)).collect())).collect();
    let noise: Vec<(&Tensor, usize)> = xs.iter().enumerate().map(|(i, x)| (x, i % 2)).collect();
    let mut mlp = Network::build(ModelSpec::Mlp { input_dim: 16, n_classes: 2 }, 0).unwrap();
    let h_mlp = train(&mut mlp, &noise, &defaults).unwrap();

    let summary = |h: &asmap::nn::TrainHistory| {
        format!(
            "100% at epoch {}, diverged={}, strictly non-increasing after epoch 10={}",
            h.first_epoch_reaching(1.0).map_or("never".into(), |e| e.to_string()),
            h.diverged,
            h.loss_non_increasing_after(10)
        )
    };
    let ok = |h: &asmap::nn::TrainHistory| h.first_epoch_reaching(1.0).is_some() && !h.diverged;
    outcome(
        data.len() == 40 && ok(&h_cnn) && ok(&h_mlp),
        format!(
            "AsMap CNN on {} synthetic windows: {}; MLP on 40 random Gaussian vectors: {}",
            data.len(),
            summary(&h_cnn),
            summary(&h_mlp)
        ),
    )
}

fn separability_oracle() -> Outcome {
    let run = |spec: SynthSpec, methods: &[FeatureMethod]| {
        let recs = synth_generate(&spec).unwrap();
        let base = hemisphere_config(spec, methods[0]);
        let trials = prepare_trials(&recs, &base.spectral, base.smoothing_span).unwrap();
        methods
            .iter()
            .map(|&m| {
                let mut cfg = base.clone();
                cfg.method = m;
                let windows = build_windows(&trials, &cfg).unwrap();
                let test_ids: Vec<(String, usize)> = split(&windows, &cfg.split)
                    .unwrap()
                    .1
                    .iter()
                    .map(|w| (w.trial_id.clone(), w.window_index))
                    .collect();
                let (_, report) = train_and_evaluate(&windows, &cfg).unwrap();
                (report, test_ids)
            })
            .collect::<Vec<_>>()
    };
    let signal = run(hemisphere_spec(20, 60.0, 4.0, 0), &[FeatureMethod::AsMapCnn, FeatureMethod::De]);
    let null = run(hemisphere_spec(20, 60.0, 1.0, 0), &[FeatureMethod::AsMapCnn]);
    let (cnn, de, nul) = (&signal[0].0, &signal[1].0, &null[0].0);
    let same_split = signal[0].1 == signal[1].1;
    outcome(
        cnn.accuracy >= 0.90 && (nul.accuracy - 0.5).abs() <= 0.10 && cnn.accuracy >= de.accuracy - 0.02 && same_split,
        format!(
            "AsMap+CNN {:.4} ≥ 0.90 on {} test windows; null {:.4} within 0.5 ± 0.10 on {}; flat-DE MLP {:.4} on the same split ({same_split}), CNN − DE = {:+.4} ≥ −0.02",
            cnn.accuracy, cnn.n_test, nul.accuracy, nul.n_test, de.accuracy, cnn.accuracy - de.accuracy
        ),
    )
}

fn shape_contracts() -> Outcome {
    let mut ok = cnn_flat_dim(62, 62, 16).ok() == Some(3136) && cnn_flat_dim(32, 32, 16).ok() == Some(576);
    let mut parts = Vec::new();
    for (side, want) in [(62usize, 3136usize), (32, 576)] {
        let net = Network::build(ModelSpec::Cnn { in_bands: 5, height: side, width: side, n_classes: 3 }, 0).unwrap();
        let logits = net.forward(&Tensor::zeros(&[5, side, side]), None).unwrap().logits;
        ok &= net.flat_dim() == want && logits.len() == 3;
        parts.push(format!("{side}×{side}×5 flattens to {}", net.flat_dim()));
    }
    ok &= Network::build(ModelSpec::Cnn { in_bands: 5, height: 9, width: 9, n_classes: 3 }, 0).is_err();
    outcome(ok, format!("{}; 9×9 input rejected at build", parts.join(", ")))
}

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_asmap")
}

fn asmap_cli(args: &[&str]) -> (i32, String) {
    let out = Command::new(bin()).args(args).output().expect("run asmap");
    (out.status.code().unwrap_or(-1), String::from_utf8_lossy(&out.stdout).into_owned())
}

/// Relative path → bytes for every file under `dir`.
fn snapshot(dir: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in std::fs::read_dir(&d).unwrap() {
            let p = entry.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else if p.file_name().is_some_and(|n| n != "timing.txt") {
                out.insert(p.strip_prefix(dir).unwrap().to_path_buf(), std::fs::read(&p).unwrap());
            }
        }
    }
    out
}

const SMALL_CONFIG: &str = r#"
[experiment]
method = "asmap-cnn"
band = "gamma"
window_seconds = 3

[split]
mode = "window-stratified"

[train]
epochs = 3

[synth]
n_channels = 12
sample_rate_hz = 128
trial_seconds = 24
n_trials_per_class = 4

[[synth.classes]]
name = "left"
[[synth.classes.boosts]]
channels = [0, 1, 2, 3, 4, 5]
band = "gamma"
gain = 4.0

[[synth.classes]]
name = "right"
[[synth.classes.boosts]]
channels = [6, 7, 8, 9, 10, 11]
band = "gamma"
gain = 4.0

[sweep]
methods = ["de", "asmap-cnn"]
bands = ["gamma", "all"]
windows = [3, 6]
"#;

fn determinism() -> Outcome {
    let tmp = tempfile::tempdir().unwrap();
    let root = tmp.path();
    let config = root.join("config.toml");
    std::fs::write(&config, SMALL_CONFIG).unwrap();
    let p = |sub: &str| root.join(sub).to_string_lossy().into_owned();
    let c = config.to_string_lossy().into_owned();
    let manifest = format!("{}/manifest.csv", p("data"));
    let features = format!("{}/features.bin", p("feat"));
    let model = format!("{}/model.bin", p("model"));

    let steps: Vec<(&str, Vec<String>, String)> = vec![
        (
            "synth",
            vec!["synth".into(), "--config".into(), c.clone(), "--out".into(), p("data"), "--seed".into(), "7".into()],
            p("data"),
        ),
        (
            "extract",
            vec![
                "extract".into(),
                "--config".into(),
                c.clone(),
                "--manifest".into(),
                manifest,
                "--out".into(),
                p("feat"),
            ],
            p("feat"),
        ),
        (
            "train",
            vec![
                "train".into(),
                "--config".into(),
                c.clone(),
                "--features".into(),
                features.clone(),
                "--model-out".into(),
                model.clone(),
                "--seed".into(),
                "7".into(),
            ],
            p("model"),
        ),
        (
            "eval",
            vec![
                "eval".into(),
                "--config".into(),
                c.clone(),
                "--features".into(),
                features,
                "--model-in".into(),
                model,
                "--out".into(),
                p("eval"),
                "--seed".into(),
                "7".into(),
            ],
            p("eval"),
        ),
        (
            "sweep",
            vec!["sweep".into(), "--config".into(), c.clone(), "--out".into(), p("sweep"), "--seed".into(), "7".into()],
            p("sweep"),
        ),
    ];
    let mut notes = Vec::new();
    let mut ok = true;
    for (name, args, out) in &steps {
        let args: Vec<&str> = args.iter().map(String::as_str).collect();
        let (code1, stdout1) = asmap_cli(&args);
        let first = snapshot(Path::new(out));
        let keep = root.join(format!("{name}.first"));
        std::fs::rename(out, &keep).unwrap();
        let (code2, stdout2) = asmap_cli(&args);
        let second = snapshot(Path::new(out));
        let same = code1 == 0 && code2 == 0 && first == second && stdout1 == stdout2 && !first.is_empty();
        ok &= same;
        notes.push(format!("{name} {} files {}", first.len(), if same { "identical" } else { "DIFFER" }));
        std::fs::remove_dir_all(out).unwrap();
        std::fs::rename(&keep, out).unwrap();
    }
    let (g1, s1) = asmap_cli(&["gradcheck"]);
    let (g2, s2) = asmap_cli(&["gradcheck"]);
    ok &= g1 == 0 && g2 == 0 && s1 == s2;
    notes.push(format!("gradcheck stdout {}", if s1 == s2 { "identical" } else { "DIFFER" }));
    outcome(ok, format!("each command run twice with identical config and seed: {}", notes.join(", ")))
}

const SWEEP_DATA: &str = r#"
[experiment]
window_seconds = 3

[split]
mode = "window-stratified"
test_fraction = 0.25

[train]
epochs = 10

[synth]
n_channels = 16
sample_rate_hz = 200
trial_seconds = 90
n_trials_per_class = 4

[[synth.classes]]
name = "left"
[[synth.classes.boosts]]
channels = [0, 1, 2, 3, 4, 5, 6, 7]
band = "gamma"
gain = 4.0

[[synth.classes]]
name = "right"
[[synth.classes.boosts]]
channels = [8, 9, 10, 11, 12, 13, 14, 15]
band = "gamma"
gain = 4.0
"#;

/// Validates `sweep.csv` and the curve files; returns (ok, failed cells, message).
fn check_sweep_dir(dir: &Path, methods: &[&str], windows: &[&str]) -> (bool, usize, String) {
    let bands = ["delta", "theta", "alpha", "beta", "gamma", "all"];
    let csv = std::fs::read_to_string(dir.join("sweep.csv")).unwrap_or_default();
    let mut lines = csv.lines();
    let mut ok = lines.next() == Some("method,band,window_s,accuracy,seed,status");
    let mut seen = Vec::new();
    let mut failed = 0;
    for line in lines {
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 6 {
            ok = false;
            continue;
        }
        let acc_ok = match f[5] {
            "ok" | "diverged" => f[3].len() == 6 && f[3].parse::<f64>().is_ok_and(|a| (0.0..=1.0).contains(&a)),
            "failed" => {
                failed += 1;
                f[3] == "NaN"
            }
            _ => false,
        };
        ok &= acc_ok
            && methods.contains(&f[0])
            && bands.contains(&f[1])
            && windows.contains(&f[2])
            && f[4].parse::<u64>().is_ok();
        seen.push((f[0].to_string(), f[1].to_string(), f[2].to_string()));
    }
    let expected = methods.len() * bands.len() * windows.len();
    let mut unique = seen.clone();
    unique.sort();
    unique.dedup();
    ok &= seen.len() == expected && unique.len() == expected;

    let mut curve_files = 0;
    for m in methods {
        for b in bands {
            let body = std::fs::read_to_string(dir.join("curves").join(format!("{m}_{b}.csv"))).unwrap_or_default();
            let mut l = body.lines();
            let header = l.next() == Some("window_s,accuracy");
            let points: Vec<&str> = l.map(|p| p.split(',').next().unwrap_or("")).collect();
            ok &= header && points == windows;
            curve_files += usize::from(header);
        }
    }
    (ok, failed, format!("{} rows, {curve_files} curve files × {} points", seen.len(), windows.len()))
}

fn sweep_shapes() -> Outcome {
    let tmp = tempfile::tempdir().unwrap();
    let mut notes = Vec::new();
    let mut all_ok = true;
    let grid = "[sweep]\nmethods = [\"de\", \"dasm\", \"rasm\", \"dcau\", \"asmap-cnn\"]\nbands = [\"delta\", \"theta\", \"alpha\", \"beta\", \"gamma\", \"all\"]\nwindows = [3]\n";
    let curves = "[sweep]\nmethods = [\"asmap-cnn\"]\nbands = [\"delta\", \"theta\", \"alpha\", \"beta\", \"gamma\", \"all\"]\nwindows = [3, 6, 12, 30]\n";
    let cases: [(&str, &str, &[&str], &[&str]); 2] = [
        ("method-band grid", grid, &["de", "dasm", "rasm", "dcau", "asmap-cnn"], &["3"]),
        ("window curves", curves, &["asmap-cnn"], &["3", "6", "12", "30"]),
    ];
    for (name, sweep, methods, windows) in cases {
        let stem = name.replace(' ', "_");
        let config = tmp.path().join(format!("{stem}.toml"));
        std::fs::write(&config, format!("{SWEEP_DATA}{sweep}")).unwrap();
        let out = tmp.path().join(&stem);
        let (code, _) = asmap_cli(&["sweep", "--config", config.to_str().unwrap(), "--out", out.to_str().unwrap()]);
        let (ok, failed, msg) = check_sweep_dir(&out, methods, windows);
        let code_ok = code == if failed == 0 { 0 } else { 1 };
        all_ok &= ok && code_ok;
        notes.push(format!("{name}: {msg}, {failed} failed, exit {code}"));
    }
    outcome(all_ok, notes.join("; "))
}
