use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::LabeledWindow;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SplitMode {
    /// Windows shuffled within each class; windows of one trial may land on
    /// both sides.
    WindowStratified,
    /// Whole trials assigned to one side, stratified by trial label.
    TrialHoldout,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SplitSpec {
    pub test_fraction: f64,
    pub mode: SplitMode,
    pub seed: u64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        Self { test_fraction: 0.2, mode: SplitMode::TrialHoldout, seed: 0 }
    }
}

impl SplitSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.test_fraction > 0.0 && self.test_fraction < 1.0) {
            return Err(Error::invalid(format!(
                "test_fraction must lie strictly between 0 and 1, got {}",
                self.test_fraction
            )));
        }
        Ok(())
    }
}

/// Number of items sent to the test side, keeping both sides nonempty.
fn test_count(n: usize, fraction: f64) -> usize {
    ((n as f64 * fraction).round() as usize).clamp(1, n - 1)
}

/// Partitions windows into `(train, test)`, preserving input order on each
/// side. Deterministic for a given seed.
pub fn split(windows: &[LabeledWindow], spec: &SplitSpec) -> Result<(Vec<LabeledWindow>, Vec<LabeledWindow>)> {
    spec.validate()?;
    let mut by_class: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, w) in windows.iter().enumerate() {
        by_class.entry(w.class_index).or_default().push(i);
    }
    if let Some((class, idx)) = by_class.iter().find(|(_, v)| v.len() < 2) {
        return Err(Error::invalid(format!(
            "class {class} has {} window(s); splitting needs at least 2 per class",
            idx.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut is_test = vec![false; windows.len()];

    match spec.mode {
        SplitMode::WindowStratified => {
            for idx in by_class.values() {
                let mut idx = idx.clone();
                idx.shuffle(&mut rng);
                for &i in &idx[..test_count(idx.len(), spec.test_fraction)] {
                    is_test[i] = true;
                }
            }
        }
        SplitMode::TrialHoldout => {
            let mut trial_class: BTreeMap<&str, usize> = BTreeMap::new();
            for w in windows {
                if let Some(&c) = trial_class.get(w.trial_id.as_str()) {
                    if c != w.class_index {
                        return Err(Error::InvalidSplit(format!(
                            "trial {} has windows of classes {c} and {}",
                            w.trial_id, w.class_index
                        )));
                    }
                }
                trial_class.insert(&w.trial_id, w.class_index);
            }
            let mut trials_by_class: BTreeMap<usize, Vec<&str>> = BTreeMap::new();
            for (t, c) in &trial_class {
                trials_by_class.entry(*c).or_default().push(t);
            }
            let mut test_trials = BTreeSet::new();
            for (class, trials) in &mut trials_by_class {
                if trials.len() < 2 {
                    return Err(Error::InvalidSplit(format!(
                        "class {class} has a single trial; trial holdout needs at least 2"
                    )));
                }
                trials.shuffle(&mut rng);
                test_trials.extend(trials[..test_count(trials.len(), spec.test_fraction)].iter().copied());
            }
            for (i, w) in windows.iter().enumerate() {
                is_test[i] = test_trials.contains(w.trial_id.as_str());
            }
        }
    }

    let (mut train, mut test) = (Vec::new(), Vec::new());
    for (w, t) in windows.iter().zip(is_test) {
        if t {
            test.push(w.clone())
        } else {
            train.push(w.clone())
        }
    }
    Ok((train, test))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::class_counts;
    use crate::nn::Tensor;

    fn windows(per_class: &[usize], windows_per_trial: usize) -> Vec<LabeledWindow> {
        let mut out = Vec::new();
        for (class, &n) in per_class.iter().enumerate() {
            for k in 0..n {
                out.push(LabeledWindow {
                    features: Tensor::from_vec(vec![k as f64]),
                    class_index: class,
                    trial_id: format!("c{class}t{}", k / windows_per_trial),
                    subject_id: "s".into(),
                    window_index: k % windows_per_trial,
                });
            }
        }
        out
    }

    #[test]
    fn stratified_counts() {
        let w = windows(&[50, 50], 5);
        let spec = SplitSpec { mode: SplitMode::WindowStratified, ..Default::default() };
        let (train, test) = split(&w, &spec).unwrap();
        assert_eq!(class_counts(&test, 2), vec![10, 10]);
        assert_eq!(train.len(), 80);
    }

    #[test]
    fn holdout_keeps_trials_whole() {
        let w = windows(&[40, 40], 4);
        let (train, test) = split(&w, &SplitSpec::default()).unwrap();
        let train_trials: BTreeSet<_> = train.iter().map(|w| &w.trial_id).collect();
        assert!(test.iter().all(|w| !train_trials.contains(&w.trial_id)));
        assert_eq!(train.len() + test.len(), 80);
        assert_eq!(test.len(), 16);
    }

    #[test]
    fn same_seed_same_split() {
        let w = windows(&[30, 20, 10], 2);
        let spec = SplitSpec { mode: SplitMode::WindowStratified, seed: 9, ..Default::default() };
        assert_eq!(split(&w, &spec).unwrap(), split(&w, &spec).unwrap());
        let other = SplitSpec { seed: 10, ..spec };
        assert_ne!(split(&w, &spec).unwrap().1, split(&w, &other).unwrap().1);
    }

    #[test]
    fn rejects_tiny_classes_and_bad_fraction() {
        assert!(split(&windows(&[10, 1], 2), &SplitSpec::default()).is_err());
        let spec = SplitSpec { test_fraction: 1.0, ..Default::default() };
        assert!(split(&windows(&[10, 10], 2), &spec).is_err());
        assert!(matches!(split(&windows(&[4, 4], 4), &SplitSpec::default()), Err(Error::InvalidSplit(_))));
    }
}
