use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::layers::softmax_cross_entropy;
use super::{Adam, Network, Tensor};
use crate::error::{Error, Result};

pub(crate) const SHUFFLE_STREAM: u64 = 1;
pub(crate) const DROPOUT_STREAM: u64 = 2;

/// Epochs after which a rising loss counts towards divergence.
pub const DIVERGENCE_WARMUP_EPOCHS: usize = 10;
/// Allowed rise above the post-warmup minimum, as a fraction of the
/// chance-level loss `ln(n_classes)`.
pub const DIVERGENCE_RISE_FRACTION: f64 = 0.1;

/// Optimizer and schedule settings. The seed fixes shuffling and dropout
/// masks; initialization takes its seed at model build time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub shuffle: bool,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            epochs: 30,
            batch_size: 32,
            seed: 0,
            shuffle: true,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate >= 0.0) || !self.learning_rate.is_finite() {
            return Err(Error::invalid("learning_rate must be finite and non-negative"));
        }
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::invalid("epochs and batch_size must be positive"));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) || !(self.epsilon > 0.0) {
            return Err(Error::invalid("Adam betas must lie in [0, 1) and epsilon must be positive"));
        }
        Ok(())
    }
}

/// Statistics for one training epoch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    /// Mean mini-batch loss with dropout active.
    pub batch_loss: f64,
    /// Loss over the training set after the epoch, dropout off.
    pub loss: f64,
    /// Training accuracy after the epoch, dropout off.
    pub accuracy: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainHistory {
    pub epochs: Vec<EpochStats>,
    /// Set when a loss went non-finite (training stops there) or when,
    /// after the warmup, the post-epoch loss rose above its running minimum
    /// by more than `DIVERGENCE_RISE_FRACTION · ln(n_classes)`.
    pub diverged: bool,
}

impl TrainHistory {
    pub fn final_accuracy(&self) -> f64 {
        self.epochs.last().map_or(0.0, |e| e.accuracy)
    }

    /// First epoch (1-based) whose post-epoch accuracy reached `target`.
    pub fn first_epoch_reaching(&self, target: f64) -> Option<usize> {
        self.epochs.iter().find(|e| e.accuracy >= target).map(|e| e.epoch)
    }

    /// Whether the post-epoch loss never rises from epoch `after` onward.
    pub fn loss_non_increasing_after(&self, after: usize) -> bool {
        self.epochs.iter().skip(after.saturating_sub(1)).collect::<Vec<_>>().windows(2).all(|w| w[1].loss <= w[0].loss)
    }
}

/// Mini-batch Adam on softmax cross-entropy. Single-threaded, so results
/// depend only on the model, data and config.
pub fn train(net: &mut Network, data: &[(&Tensor, usize)], cfg: &TrainConfig) -> Result<TrainHistory> {
    cfg.validate()?;
    if data.is_empty() {
        return Err(Error::invalid("training set is empty"));
    }
    let input_shape = net.input_shape();
    for (i, (x, y)) in data.iter().enumerate() {
        if x.shape() != input_shape.as_slice() {
            return Err(Error::shape(
                format!("example shape {input_shape:?}"),
                format!("{:?} at example {i}", x.shape()),
            ));
        }
        if *y >= net.n_classes() {
            return Err(Error::invalid(format!("example {i} has class {y}, model has {} classes", net.n_classes())));
        }
    }

    let mut shuffle_rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    shuffle_rng.set_stream(SHUFFLE_STREAM);
    let mut dropout_rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    dropout_rng.set_stream(DROPOUT_STREAM);
    let mut adam = Adam::new(cfg.learning_rate, cfg.beta1, cfg.beta2, cfg.epsilon);
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut history = TrainHistory::default();
    let rise_limit = DIVERGENCE_RISE_FRACTION * (net.n_classes() as f64).ln();
    let mut min_loss = f64::INFINITY;

    for epoch in 1..=cfg.epochs {
        if cfg.shuffle {
            order.shuffle(&mut shuffle_rng);
        }
        let mut batch_loss_sum = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            let mut grads = net.zero_grads();
            for &i in batch {
                let (x, y) = data[i];
                let trace = net.forward(x, Some(&mut dropout_rng))?;
                let (loss, grad) = softmax_cross_entropy(&trace.logits, y)?;
                batch_loss_sum += loss;
                net.backward(&trace, &grad, &mut grads)?;
            }
            let scale = 1.0 / batch.len() as f64;
            for g in &mut grads {
                g.data_mut().iter_mut().for_each(|v| *v *= scale);
            }
            adam.step(&mut net.parameters_mut(), &grads);
        }
        let (loss, accuracy) = clean_pass(net, data)?;
        let batch_loss = batch_loss_sum / data.len() as f64;
        history.epochs.push(EpochStats { epoch, batch_loss, loss, accuracy });
        if !loss.is_finite() || !batch_loss.is_finite() {
            history.diverged = true;
            break;
        }
        if epoch >= DIVERGENCE_WARMUP_EPOCHS {
            min_loss = min_loss.min(loss);
            if loss - min_loss > rise_limit {
                history.diverged = true;
            }
        }
    }
    Ok(history)
}

fn clean_pass(net: &Network, data: &[(&Tensor, usize)]) -> Result<(f64, f64)> {
    let mut loss = 0.0;
    let mut correct = 0usize;
    for &(x, y) in data {
        let logits = net.forward(x, None)?.logits;
        loss += softmax_cross_entropy(&logits, y)?.0;
        if argmax(&logits) == y {
            correct += 1;
        }
    }
    Ok((loss / data.len() as f64, correct as f64 / data.len() as f64))
}

/// Index of the largest value; the first one wins ties.
pub fn argmax(values: &[f64]) -> usize {
    values.iter().enumerate().fold((0, f64::NEG_INFINITY), |(bi, bv), (i, &v)| if v > bv { (i, v) } else { (bi, bv) }).0
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::ModelSpec;
    use rand_distr::{Distribution, StandardNormal};

    fn toy_set(n: usize, dim: usize, seed: u64) -> Vec<(Tensor, usize)> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|i| {
                let label = i % 2;
                let data = (0..dim)
                    .map(|_| { let z: f64 = StandardNormal.sample(&mut rng); z } + if label == 1 { 0.5 } else { -0.5 })
                    .collect();
                (Tensor::from_vec(data), label)
            })
            .collect()
    }

    #[test]
    fn zero_learning_rate_keeps_parameters() {
        let set = toy_set(20, 5, 1);
        let refs: Vec<_> = set.iter().map(|(x, y)| (x, *y)).collect();
        let mut net = Network::build(ModelSpec::Mlp { input_dim: 5, n_classes: 2 }, 4).unwrap();
        let before = net.clone();
        let cfg = TrainConfig { learning_rate: 0.0, epochs: 3, ..Default::default() };
        train(&mut net, &refs, &cfg).unwrap();
        assert_eq!(net, before);
    }

    #[test]
    fn identical_seeds_give_identical_history() {
        let set = toy_set(24, 5, 2);
        let refs: Vec<_> = set.iter().map(|(x, y)| (x, *y)).collect();
        let cfg = TrainConfig { epochs: 4, batch_size: 8, seed: 5, ..Default::default() };
        let run = || {
            let mut net = Network::build(ModelSpec::Mlp { input_dim: 5, n_classes: 2 }, 4).unwrap();
            let h = train(&mut net, &refs, &cfg).unwrap();
            (net, h)
        };
        let (a, ha) = run();
        let (b, hb) = run();
        assert_eq!(ha, hb);
        assert_eq!(a, b);
    }

    #[test]
    fn rejects_bad_inputs() {
        let mut net = Network::build(ModelSpec::Mlp { input_dim: 5, n_classes: 2 }, 4).unwrap();
        assert!(train(&mut net, &[], &TrainConfig::default()).is_err());
        let wrong = Tensor::from_vec(vec![0.0; 4]);
        assert!(train(&mut net, &[(&wrong, 0)], &TrainConfig::default()).is_err());
        let ok = Tensor::from_vec(vec![0.0; 5]);
        assert!(train(&mut net, &[(&ok, 2)], &TrainConfig::default()).is_err());
        let cfg = TrainConfig { batch_size: 0, ..Default::default() };
        assert!(train(&mut net, &[(&ok, 0)], &cfg).is_err());
    }

    #[test]
    fn huge_learning_rate_flags_divergence() {
        let set = toy_set(64, 5, 3);
        let refs: Vec<_> = set.iter().map(|(x, y)| (x, *y)).collect();
        let mut net = Network::build(ModelSpec::Mlp { input_dim: 5, n_classes: 2 }, 4).unwrap();
        let cfg = TrainConfig { learning_rate: 5.0, epochs: 40, batch_size: 8, ..Default::default() };
        assert!(train(&mut net, &refs, &cfg).unwrap().diverged);

        let mut net = Network::build(ModelSpec::Mlp { input_dim: 5, n_classes: 2 }, 4).unwrap();
        let cfg = TrainConfig { epochs: 15, batch_size: 8, ..Default::default() };
        assert!(!train(&mut net, &refs, &cfg).unwrap().diverged);
    }

    #[test]
    fn argmax_first_wins() {
        assert_eq!(argmax(&[1.0, 3.0, 3.0]), 1);
        assert_eq!(argmax(&[0.5, 0.5]), 0);
    }
}
