use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::nn::ops::softmax_cross_entropy;
use crate::nn::{AdamConfig, AdamState, LrSchedule, Network};
use crate::seed::derive_seed;
use crate::tensor::Tensor;

/// Stop once the smoothed training loss has failed to improve by
/// `min_delta` for `patience` consecutive iterations.
#[derive(Clone, Debug, PartialEq)]
pub struct EarlyStop {
    pub patience: usize,
    pub min_delta: f64,
    /// Running-mean length over minibatch losses; `None` uses one epoch.
    pub window: Option<usize>,
}

impl Default for EarlyStop {
    fn default() -> Self {
        Self {
            patience: 25,
            min_delta: 1e-4,
            window: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub lr: f64,
    pub decay: f64,
    pub schedule: LrSchedule,
    pub batch_size: usize,
    pub max_iterations: usize,
    pub early_stop: Option<EarlyStop>,
    /// Weight each trial's loss by `n / (classes * n_class)` so the
    /// training prior is flat even when a held-out trial unbalances it.
    pub class_balanced: bool,
    pub seed: u64,
}

impl TrainConfig {
    /// Long-run settings: lr 1e-5 with linear decay 1e-6 per iteration.
    pub fn full_scale() -> Self {
        Self {
            lr: 1e-5,
            decay: 1e-6,
            schedule: LrSchedule::Linear,
            batch_size: 4,
            max_iterations: 500,
            early_stop: Some(EarlyStop::default()),
            class_balanced: false,
            seed: 0,
        }
    }

    /// Settings for the desk-scale network: a larger step and a shorter
    /// budget, which also limits overfitting on 47 training trials.
    pub fn desk() -> Self {
        Self {
            lr: 2e-3,
            max_iterations: 100,
            class_balanced: true,
            ..Self::full_scale()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 || self.max_iterations == 0 {
            return Err(Error::Config("batch_size and max_iterations must be at least 1".into()));
        }
        if let Some(es) = &self.early_stop {
            if es.patience == 0 || es.window == Some(0) || !(es.min_delta >= 0.0) {
                return Err(Error::Config("early stop needs patience >= 1, window >= 1, min_delta >= 0".into()));
            }
        }
        Ok(())
    }
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self::desk()
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrainHistory {
    /// Mean minibatch loss, one entry per iteration.
    pub losses: Vec<f64>,
    pub stopped_early: bool,
}

impl TrainHistory {
    pub fn iterations(&self) -> usize {
        self.losses.len()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainedNetwork {
    pub network: Network,
    pub history: TrainHistory,
}

/// Per-class loss weights; all ones when unbalanced or already balanced.
fn loss_weights(labels: &[usize], classes: usize, balanced: bool) -> Vec<f64> {
    let mut counts = vec![0usize; classes];
    for &l in labels {
        counts[l] += 1;
    }
    let present = counts.iter().filter(|&&c| c > 0).count();
    counts
        .iter()
        .map(|&c| match c {
            _ if !balanced || c == 0 => 1.0,
            c if c * present == labels.len() => 1.0,
            c => labels.len() as f64 / (present * c) as f64,
        })
        .collect()
}

/// Minibatch Adam on softmax cross-entropy. Each iteration draws the next
/// `batch_size` indices of a per-epoch random permutation.
pub fn train(mut network: Network, images: &[&Tensor], labels: &[usize], cfg: &TrainConfig) -> Result<TrainedNetwork> {
    cfg.validate()?;
    if images.len() != labels.len() {
        return Err(Error::Usage(format!("{} images but {} labels", images.len(), labels.len())));
    }
    if images.len() < cfg.batch_size {
        return Err(Error::Usage(format!(
            "{} training trials is fewer than the batch size {}",
            images.len(),
            cfg.batch_size
        )));
    }
    if let Some(&bad) = labels.iter().find(|&&l| l >= network.class_count()) {
        return Err(Error::Usage(format!("label {bad} outside {} classes", network.class_count())));
    }
    let mut order_rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, &[0]));
    let mut dropout_rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, &[1]));
    let mut adam = {
        let mut config = AdamConfig::new(cfg.lr, cfg.decay);
        config.schedule = cfg.schedule;
        AdamState::new(config, &network.params())?
    };
    let n = images.len();
    let weights = loss_weights(labels, network.class_count(), cfg.class_balanced);
    let window = cfg
        .early_stop
        .as_ref()
        .map(|es| es.window.unwrap_or(n.div_ceil(cfg.batch_size)));
    let mut order: Vec<usize> = (0..n).collect();
    let mut cursor = n;
    let mut history = TrainHistory::default();
    let mut best = f64::INFINITY;
    let mut stale = 0;
    let mut running = 0.0;

    for iteration in 0..cfg.max_iterations {
        let mut batch = Vec::with_capacity(cfg.batch_size);
        while batch.len() < cfg.batch_size {
            if cursor == n {
                order.shuffle(&mut order_rng);
                cursor = 0;
            }
            batch.push(order[cursor]);
            cursor += 1;
        }
        let mut grad_sum: Option<Vec<Tensor>> = None;
        let mut loss = 0.0;
        for &i in &batch {
            let pass = network.forward(images[i], Some(&mut dropout_rng))?;
            let sce = softmax_cross_entropy(&pass.logits, labels[i])?;
            let w = weights[labels[i]];
            loss += w * sce.loss;
            let mut grads = network.param_gradients(&pass, &sce.grad_logits)?;
            match &mut grad_sum {
                None => {
                    if w != 1.0 {
                        grads.iter_mut().for_each(|g| g.scale(w));
                    }
                    grad_sum = Some(grads)
                }
                Some(acc) => {
                    for (a, g) in acc.iter_mut().zip(&grads) {
                        a.add_scaled(g, w)?;
                    }
                }
            }
        }
        let scale = 1.0 / batch.len() as f64;
        loss *= scale;
        if !loss.is_finite() {
            return Err(Error::Diverged { iteration, loss });
        }
        let mut grads = grad_sum.expect("non-empty batch");
        for g in &mut grads {
            g.scale(scale);
        }
        let grad_refs: Vec<&Tensor> = grads.iter().collect();
        adam.step(&mut network.params_mut(), &grad_refs)?;
        history.losses.push(loss);

        if let (Some(es), Some(w)) = (&cfg.early_stop, window) {
            running += loss;
            if history.losses.len() > w {
                running -= history.losses[history.losses.len() - 1 - w];
            }
            let smoothed = running / history.losses.len().min(w) as f64;
            if smoothed < best - es.min_delta {
                best = smoothed;
                stale = 0;
            } else {
                stale += 1;
                if stale >= es.patience {
                    history.stopped_early = true;
                    break;
                }
            }
        }
    }
    if !network.is_finite() {
        return Err(Error::Diverged {
            iteration: history.iterations(),
            loss: history.losses.last().copied().unwrap_or(f64::NAN),
        });
    }
    Ok(TrainedNetwork { network, history })
}

/// Evaluation-mode class decision and probabilities.
pub fn predict(network: &Network, image: &Tensor) -> Result<(usize, Tensor)> {
    let probs = network.probabilities(image)?;
    Ok((probs.argmax(), probs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::arch::{build_network, ArchitectureConfig};
    use crate::data::{generate_synthetic, SynthConfig};

    fn separable_set(n_per_class: usize) -> (Vec<Tensor>, Vec<usize>) {
        let cfg = SynthConfig {
            trials_per_class: n_per_class,
            snr: f64::INFINITY,
            ..SynthConfig::default()
        };
        let set = generate_synthetic(&cfg, 9).unwrap();
        (set.trials.iter().map(|t| t.image()).collect(), set.trials.iter().map(|t| t.label).collect())
    }

    fn desk_net(seed: u64) -> Network {
        build_network(&ArchitectureConfig::desk(), 16, 128, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap()
    }

    #[test]
    fn separable_trials_are_fit() {
        let (images, labels) = separable_set(2);
        let refs: Vec<&Tensor> = images.iter().collect();
        let cfg = TrainConfig {
            max_iterations: 200,
            early_stop: None,
            ..TrainConfig::desk()
        };
        let trained = train(desk_net(3), &refs, &labels, &cfg).unwrap();
        let correct = refs
            .iter()
            .zip(&labels)
            .filter(|(x, &l)| predict(&trained.network, x).unwrap().0 == l)
            .count();
        assert_eq!(correct, labels.len());
    }

    #[test]
    fn zero_lr_leaves_parameters_unchanged() {
        let (images, labels) = separable_set(1);
        let refs: Vec<&Tensor> = images.iter().collect();
        let cfg = TrainConfig {
            lr: 0.0,
            max_iterations: 5,
            ..TrainConfig::desk()
        };
        let net = desk_net(1);
        let trained = train(net.clone(), &refs, &labels, &cfg).unwrap();
        assert_eq!(trained.network, net);
    }

    #[test]
    fn same_seed_same_history() {
        let (images, labels) = separable_set(1);
        let refs: Vec<&Tensor> = images.iter().collect();
        let cfg = TrainConfig {
            max_iterations: 15,
            ..TrainConfig::desk()
        };
        let a = train(desk_net(2), &refs, &labels, &cfg).unwrap();
        let b = train(desk_net(2), &refs, &labels, &cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.history.iterations(), 15);
    }

    #[test]
    fn early_stop_bounds_iterations() {
        let (images, labels) = separable_set(1);
        let refs: Vec<&Tensor> = images.iter().collect();
        let cfg = TrainConfig {
            lr: 0.0,
            max_iterations: 100,
            early_stop: Some(EarlyStop {
                patience: 3,
                min_delta: 1e-4,
                window: Some(1),
            }),
            ..TrainConfig::desk()
        };
        let t = train(desk_net(4), &refs, &labels, &cfg).unwrap();
        assert!(t.history.stopped_early);
        assert!(t.history.iterations() < 100);
    }

    #[test]
    fn diverging_run_names_iteration() {
        let (images, labels) = separable_set(1);
        let refs: Vec<&Tensor> = images.iter().collect();
        let mut net = desk_net(5);
        let head_bias = net.params_mut().pop().unwrap();
        head_bias.data_mut()[0] = f64::NAN;
        let err = train(net, &refs, &labels, &TrainConfig::desk()).unwrap_err();
        assert!(matches!(err, Error::Diverged { iteration: 0, .. }), "{err}");
    }

    #[test]
    fn balanced_weights_flatten_the_prior() {
        assert_eq!(loss_weights(&[0, 1, 2, 0, 1, 2], 3, true), vec![1.0; 3]);
        assert_eq!(loss_weights(&[0, 0, 0, 1], 2, false), vec![1.0; 2]);
        let w = loss_weights(&[0, 0, 0, 1], 3, true);
        // weighted class mass is equal across present classes
        assert!((3.0 * w[0] - w[1]).abs() < 1e-12);
        assert!((3.0 * w[0] + w[1] - 4.0).abs() < 1e-12);
        assert_eq!(w[2], 1.0);
    }

    #[test]
    fn too_few_trials_is_usage_error() {
        let x = Tensor::zeros(&[1, 16, 128]);
        let err = train(desk_net(0), &[&x], &[0], &TrainConfig::desk()).unwrap_err();
        assert!(matches!(err, Error::Usage(_)));
    }
}
