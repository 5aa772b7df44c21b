use std::collections::HashSet;
use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{build_windows, prepare_trials, train_and_evaluate, EvaluationReport, ExperimentConfig, FeatureMethod};
use crate::error::{Error, Result, StageContext};
use crate::features::BandSelection;

pub const SWEEP_FILE: &str = "sweep.csv";
pub const CURVES_DIR: &str = "curves";
pub const CELLS_DIR: &str = "cells";

/// Replaces the shared seed for one cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SeedOverride {
    pub method: FeatureMethod,
    pub band: BandSelection,
    pub window_s: f64,
    pub seed: u64,
}

/// Axes of a sweep; the grid is their cross product.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub methods: Vec<FeatureMethod>,
    pub bands: Vec<BandSelection>,
    pub windows: Vec<f64>,
    #[serde(default)]
    pub seed_overrides: Vec<SeedOverride>,
}

impl SweepSpec {
    pub fn new(methods: Vec<FeatureMethod>, bands: Vec<BandSelection>, windows: Vec<f64>) -> Self {
        Self { methods, bands, windows, seed_overrides: Vec::new() }
    }

    /// Unique cells in request order and a warning per dropped duplicate.
    pub fn cells(&self) -> Result<(Vec<(FeatureMethod, BandSelection, f64)>, Vec<String>)> {
        if self.methods.is_empty() || self.bands.is_empty() || self.windows.is_empty() {
            return Err(Error::invalid("sweep axes (methods, bands, windows) must all be nonempty"));
        }
        let mut seen = HashSet::new();
        let mut cells = Vec::new();
        let mut warnings = Vec::new();
        for &m in &self.methods {
            for &b in &self.bands {
                for &w in &self.windows {
                    if seen.insert((m, b, w.to_bits())) {
                        cells.push((m, b, w));
                    } else {
                        warnings.push(format!("duplicate sweep cell ({m}, {b}, {w} s) ignored"));
                    }
                }
            }
        }
        Ok((cells, warnings))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "lowercase")]
pub enum CellOutcome {
    Ok { accuracy: f64, diverged: bool },
    Failed { error: String },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepCell {
    pub method: FeatureMethod,
    pub band: BandSelection,
    pub window_s: f64,
    pub seed: u64,
    pub outcome: CellOutcome,
    #[serde(skip)]
    pub report: Option<EvaluationReport>,
}

impl SweepCell {
    pub fn accuracy(&self) -> Option<f64> {
        match self.outcome {
            CellOutcome::Ok { accuracy, .. } => Some(accuracy),
            CellOutcome::Failed { .. } => None,
        }
    }

    pub fn status(&self) -> &'static str {
        match self.outcome {
            CellOutcome::Ok { diverged: false, .. } => "ok",
            CellOutcome::Ok { diverged: true, .. } => "diverged",
            CellOutcome::Failed { .. } => "failed",
        }
    }

    fn accuracy_field(&self) -> String {
        self.accuracy().map_or_else(|| "NaN".to_string(), |a| format!("{a:.4}"))
    }

    fn file_stem(&self) -> String {
        format!("{}_{}", self.method, self.band)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepResult {
    pub cells: Vec<SweepCell>,
    pub warnings: Vec<String>,
}

/// Runs every cell of the grid. DE is computed once per trial and shared;
/// a failing cell is recorded without stopping the others.
pub fn run_sweep(base: &ExperimentConfig, spec: &SweepSpec) -> Result<SweepResult> {
    let (cells, warnings) = spec.cells()?;
    for o in &spec.seed_overrides {
        if !cells.iter().any(|&(m, b, w)| (m, b, w) == (o.method, o.band, o.window_s)) {
            return Err(Error::invalid(format!(
                "seed override for ({}, {}, {} s) matches no cell",
                o.method, o.band, o.window_s
            )));
        }
    }
    let recordings = base.source.load().stage("load")?;
    let trials = prepare_trials(&recordings, &base.spectral, base.smoothing_span).stage("features")?;

    let cells = cells
        .into_par_iter()
        .map(|(method, band, window_s)| {
            let seed = spec
                .seed_overrides
                .iter()
                .find(|o| (o.method, o.band, o.window_s) == (method, band, window_s))
                .map_or(base.train.seed, |o| o.seed);
            let mut cfg = base.clone();
            cfg.method = method;
            cfg.band = band;
            cfg.window_seconds = window_s;
            cfg.output_dir = None;
            if seed != base.train.seed {
                cfg = cfg.with_seed(seed);
            }
            let run = cfg
                .validate()
                .stage("config")
                .and_then(|_| build_windows(&trials, &cfg).stage("features"))
                .and_then(|windows| train_and_evaluate(&windows, &cfg));
            let (outcome, report) = match run {
                Ok((_, report)) => {
                    (CellOutcome::Ok { accuracy: report.accuracy, diverged: report.history.diverged }, Some(report))
                }
                Err(e) => (CellOutcome::Failed { error: e.to_string() }, None),
            };
            SweepCell { method, band, window_s, seed, outcome, report }
        })
        .collect();
    Ok(SweepResult { cells, warnings })
}

impl SweepResult {
    pub fn failures(&self) -> Vec<&SweepCell> {
        self.cells.iter().filter(|c| matches!(c.outcome, CellOutcome::Failed { .. })).collect()
    }

    /// `method,band,window_s,accuracy,seed,status`; failed cells carry
    /// `NaN` accuracy.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("method,band,window_s,accuracy,seed,status\n");
        for c in &self.cells {
            let _ =
                writeln!(s, "{},{},{},{},{},{}", c.method, c.band, c.window_s, c.accuracy_field(), c.seed, c.status());
        }
        s
    }

    /// One `window_s,accuracy` series per (method, band), windows ascending.
    pub fn curves(&self) -> Vec<(String, String)> {
        let mut keys: Vec<(FeatureMethod, BandSelection)> = Vec::new();
        for c in &self.cells {
            if !keys.contains(&(c.method, c.band)) {
                keys.push((c.method, c.band));
            }
        }
        keys.into_iter()
            .map(|(m, b)| {
                let mut points: Vec<&SweepCell> = self.cells.iter().filter(|c| c.method == m && c.band == b).collect();
                points.sort_by(|x, y| x.window_s.total_cmp(&y.window_s));
                let mut body = String::from("window_s,accuracy\n");
                for p in &points {
                    let _ = writeln!(body, "{},{}", p.window_s, p.accuracy_field());
                }
                (format!("{}.csv", points[0].file_stem()), body)
            })
            .collect()
    }

    /// Writes `sweep.csv`, `curves/<method>_<band>.csv` and one report per
    /// successful cell under `cells/`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        let write = |path: &Path, contents: &str| std::fs::write(path, contents).map_err(|e| Error::io(path, e));
        let curves = dir.join(CURVES_DIR);
        let cells = dir.join(CELLS_DIR);
        for d in [dir, &curves, &cells] {
            std::fs::create_dir_all(d).map_err(|e| Error::io(d, e))?;
        }
        write(&dir.join(SWEEP_FILE), &self.to_csv())?;
        for (name, body) in self.curves() {
            write(&curves.join(name), &body)?;
        }
        for c in &self.cells {
            if let Some(r) = &c.report {
                write(&cells.join(format!("{}_{}s.json", c.file_stem(), c.window_s)), &r.to_json()?)?;
            }
        }
        Ok(())
    }

    /// Grid with one row per (method, band) and one column per window.
    pub fn summary_table(&self) -> String {
        let mut windows: Vec<f64> = self.cells.iter().map(|c| c.window_s).collect();
        windows.sort_by(f64::total_cmp);
        windows.dedup();
        let mut s = format!("{:<10} {:<6}", "method", "band");
        for w in &windows {
            let _ = write!(s, " {:>8}", format!("{w}s"));
        }
        s.push('\n');
        let mut rows: Vec<(FeatureMethod, BandSelection)> = Vec::new();
        for c in &self.cells {
            if !rows.contains(&(c.method, c.band)) {
                rows.push((c.method, c.band));
            }
        }
        for (m, b) in rows {
            let _ = write!(s, "{:<10} {:<6}", m.as_str(), b.to_string());
            for &w in &windows {
                let cell = self.cells.iter().find(|c| c.method == m && c.band == b && c.window_s == w);
                let text = match cell {
                    Some(c) => c.accuracy().map_or_else(|| "failed".to_string(), |a| format!("{a:.4}")),
                    None => "-".to_string(),
                };
                let _ = write!(s, " {text:>8}");
            }
            s.push('\n');
        }
        s
    }
}
