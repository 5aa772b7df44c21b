use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::ExperimentConfig;
use crate::dataset::LabeledWindow;
use crate::error::{Error, Result};
use crate::nn::{argmax, Network, TrainHistory};

pub const REPORT_FILE: &str = "report.json";
pub const TIMING_FILE: &str = "timing.txt";

/// Test-set metrics plus the training history and configuration that
/// produced them. `confusion[i][j]` counts windows of true class `i`
/// predicted as `j`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub class_names: Vec<String>,
    pub n_train: usize,
    pub n_test: usize,
    pub accuracy: f64,
    pub confusion: Vec<Vec<usize>>,
    /// `None` where the class was never predicted.
    pub precision: Vec<Option<f64>>,
    /// `None` where the class is absent from the test set.
    pub recall: Vec<Option<f64>>,
    pub history: TrainHistory,
    pub seed: u64,
    pub split_seed: u64,
    pub config: Option<ExperimentConfig>,
    /// Kept out of `report.json` so reports stay byte-identical across runs.
    #[serde(skip)]
    pub wall_clock_seconds: f64,
}

impl EvaluationReport {
    /// Metrics derived from a confusion matrix.
    pub fn from_confusion(class_names: Vec<String>, confusion: Vec<Vec<usize>>) -> Result<Self> {
        let n = class_names.len();
        if confusion.len() != n || confusion.iter().any(|r| r.len() != n) {
            return Err(Error::shape(format!("{n}×{n} confusion matrix"), "ragged or resized matrix"));
        }
        let total: usize = confusion.iter().flatten().sum();
        if total == 0 {
            return Err(Error::invalid("confusion matrix is empty"));
        }
        let trace: usize = (0..n).map(|i| confusion[i][i]).sum();
        let ratio = |num: usize, den: usize| (den > 0).then(|| num as f64 / den as f64);
        let precision = (0..n).map(|j| ratio(confusion[j][j], (0..n).map(|i| confusion[i][j]).sum())).collect();
        let recall = (0..n).map(|i| ratio(confusion[i][i], confusion[i].iter().sum())).collect();
        Ok(Self {
            class_names,
            n_train: 0,
            n_test: total,
            accuracy: trace as f64 / total as f64,
            confusion,
            precision,
            recall,
            history: TrainHistory::default(),
            seed: 0,
            split_seed: 0,
            config: None,
            wall_clock_seconds: 0.0,
        })
    }

    /// Per-class test counts (confusion row sums).
    pub fn class_totals(&self) -> Vec<usize> {
        self.confusion.iter().map(|r| r.iter().sum()).collect()
    }

    /// Recomputes accuracy and the total from the confusion matrix.
    pub fn check_consistency(&self) -> Result<()> {
        let total: usize = self.class_totals().iter().sum();
        let trace: usize = (0..self.confusion.len()).map(|i| self.confusion[i][i]).sum();
        if total != self.n_test || self.accuracy != trace as f64 / total as f64 {
            return Err(Error::invalid(format!(
                "report inconsistent: accuracy {} and {} test windows vs confusion trace {trace}/{total}",
                self.accuracy, self.n_test
            )));
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        self.check_consistency()?;
        let mut s =
            serde_json::to_string_pretty(self).map_err(|e| Error::invalid(format!("serializing report: {e}")))?;
        s.push('\n');
        Ok(s)
    }

    /// Writes `report.json` and `timing.txt` into `dir`, creating it.
    pub fn write(&self, dir: &Path) -> Result<()> {
        let json = self.to_json()?;
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let path = dir.join(REPORT_FILE);
        std::fs::write(&path, json).map_err(|e| Error::io(&path, e))?;
        let path = dir.join(TIMING_FILE);
        std::fs::write(&path, format!("wall_clock_seconds={:.3}\n", self.wall_clock_seconds))
            .map_err(|e| Error::io(&path, e))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            location: format!("line {}, column {}", e.line(), e.column()),
            message: e.to_string(),
        })
    }
}

/// Classifies every test window. Inference runs in parallel on the frozen
/// model; counts do not depend on scheduling.
pub fn evaluate(net: &Network, test: &[LabeledWindow], class_names: &[String]) -> Result<EvaluationReport> {
    if test.is_empty() {
        return Err(Error::invalid("test set is empty"));
    }
    let n = class_names.len();
    if n != net.n_classes() {
        return Err(Error::shape(format!("{} class names", net.n_classes()), format!("{n}")));
    }
    let predictions = test
        .par_iter()
        .map(|w| {
            if w.class_index >= n {
                return Err(Error::invalid(format!("window class {} out of range", w.class_index)));
            }
            Ok(argmax(&net.forward(&w.features, None)?.logits))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut confusion = vec![vec![0; n]; n];
    for (w, p) in test.iter().zip(predictions) {
        confusion[w.class_index][p] += 1;
    }
    EvaluationReport::from_confusion(class_names.to_vec(), confusion)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn names(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("c{i}")).collect()
    }

    #[test]
    fn perfect_predictions() {
        let r = EvaluationReport::from_confusion(names(3), vec![vec![4, 0, 0], vec![0, 2, 0], vec![0, 0, 5]]).unwrap();
        assert_eq!(r.accuracy, 1.0);
        assert_eq!(r.class_totals(), vec![4, 2, 5]);
        assert!(r.precision.iter().all(|p| *p == Some(1.0)));
    }

    #[test]
    fn constant_predictor_balanced_four_class() {
        let confusion = (0..4).map(|_| vec![5, 0, 0, 0]).collect();
        let r = EvaluationReport::from_confusion(names(4), confusion).unwrap();
        assert_eq!(r.accuracy, 0.25);
        assert_eq!(r.precision[0], Some(0.25));
        assert_eq!(r.precision[1], None);
        assert_eq!(r.recall[1], Some(0.0));
    }

    #[test]
    fn consistency_check_catches_tampering() {
        let mut r = EvaluationReport::from_confusion(names(2), vec![vec![3, 1], vec![2, 4]]).unwrap();
        r.check_consistency().unwrap();
        r.accuracy = 0.9;
        assert!(r.to_json().is_err());
    }

    #[test]
    fn empty_test_set_rejected() {
        let net = Network::build(crate::nn::ModelSpec::Mlp { input_dim: 2, n_classes: 2 }, 0).unwrap();
        assert!(evaluate(&net, &[], &names(2)).is_err());
    }
}
