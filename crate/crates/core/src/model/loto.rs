use log::warn;
use rayon::prelude::*;

use super::arch::{build_network, ArchitectureConfig};
use super::train::{predict, train, TrainConfig, TrainedNetwork};
use crate::data::EegTrial;
use crate::error::{Error, Result};
use crate::seed::{derive_seed, rng_for};
use crate::stats::{macro_metrics, ConfusionMatrix, MacroMetrics};
use crate::tensor::Tensor;

#[derive(Clone, Debug, PartialEq)]
pub struct FoldResult {
    /// Index of the held-out trial within the subject's trials.
    pub fold: usize,
    pub trial_id: String,
    pub label: usize,
    /// `None` when training failed; see `error`.
    pub predicted: Option<usize>,
    pub probs: Option<Tensor>,
    pub iterations_used: usize,
    pub stopped_early: bool,
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LotoOutcome {
    pub folds: Vec<FoldResult>,
    pub confusion: ConfusionMatrix,
}

impl LotoOutcome {
    /// Accuracy over the folds that trained successfully.
    pub fn accuracy(&self) -> f64 {
        let total = self.confusion.total();
        if total == 0 {
            0.0
        } else {
            self.confusion.trace() as f64 / total as f64
        }
    }

    pub fn failed(&self) -> usize {
        self.folds.iter().filter(|f| f.error.is_some()).count()
    }

    pub fn is_partial(&self) -> bool {
        self.failed() > 0
    }

    pub fn metrics(&self) -> Result<MacroMetrics> {
        macro_metrics(&self.confusion)
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct LotoOptions {
    /// Run only this many folds, picked round-robin across classes in
    /// trial order. `None` runs every fold.
    pub fold_limit: Option<usize>,
}

/// What an inspection callback sees after a fold has trained.
pub struct FoldContext<'a> {
    pub fold: usize,
    pub trained: &'a TrainedNetwork,
    pub held_out: &'a EegTrial,
    pub training: Vec<&'a EegTrial>,
}

/// Fold indices to run under `limit`.
pub fn select_folds(labels: &[usize], limit: Option<usize>) -> Vec<usize> {
    let n = labels.len();
    let Some(limit) = limit.filter(|&l| l < n) else {
        return (0..n).collect();
    };
    let classes = labels.iter().copied().max().map_or(0, |m| m + 1);
    let mut by_class: Vec<std::collections::VecDeque<usize>> = vec![Default::default(); classes];
    for (i, &l) in labels.iter().enumerate() {
        by_class[l].push_back(i);
    }
    let mut picked = Vec::with_capacity(limit);
    while picked.len() < limit {
        for queue in &mut by_class {
            if picked.len() < limit {
                if let Some(i) = queue.pop_front() {
                    picked.push(i);
                }
            }
        }
    }
    picked.sort_unstable();
    picked
}

/// Seed owned by fold `fold` under master seed `seed`.
pub fn fold_seed(seed: u64, fold: usize) -> u64 {
    derive_seed(seed, &[fold as u64])
}

/// Leave-one-trial-out evaluation over one subject's trials.
pub fn run_loto(
    trials: &[EegTrial],
    class_count: usize,
    arch: &ArchitectureConfig,
    cfg: &TrainConfig,
    opts: &LotoOptions,
) -> Result<LotoOutcome> {
    Ok(run_loto_with(trials, class_count, arch, cfg, opts, |_| Ok(()))?.0)
}

/// As [`run_loto`], calling `inspect` on every successfully trained fold.
/// Folds run on the current rayon pool; results are in fold order.
pub fn run_loto_with<T: Send>(
    trials: &[EegTrial],
    class_count: usize,
    arch: &ArchitectureConfig,
    cfg: &TrainConfig,
    opts: &LotoOptions,
    inspect: impl Fn(&FoldContext) -> Result<T> + Sync,
) -> Result<(LotoOutcome, Vec<Option<T>>)> {
    if trials.len() < 2 {
        return Err(Error::Usage(format!("LOTO needs at least 2 trials, got {}", trials.len())));
    }
    cfg.validate()?;
    let arch = ArchitectureConfig {
        classes: class_count,
        ..arch.clone()
    };
    let (channels, samples) = (trials[0].channels(), trials[0].samples());
    // the architecture must fit before any fold starts
    arch.flatten_width(channels, samples)?;
    let images: Vec<Tensor> = trials.iter().map(EegTrial::image).collect();
    let labels: Vec<usize> = trials.iter().map(|t| t.label).collect();
    let folds = select_folds(&labels, opts.fold_limit);

    let results: Vec<Result<(FoldResult, Option<T>)>> = folds
        .par_iter()
        .map(|&k| {
            let seed = fold_seed(cfg.seed, k);
            let train_idx: Vec<usize> = (0..trials.len()).filter(|&i| i != k).collect();
            let x: Vec<&Tensor> = train_idx.iter().map(|&i| &images[i]).collect();
            let y: Vec<usize> = train_idx.iter().map(|&i| labels[i]).collect();
            let mut fold = FoldResult {
                fold: k,
                trial_id: trials[k].trial_id.clone(),
                label: labels[k],
                predicted: None,
                probs: None,
                iterations_used: 0,
                stopped_early: false,
                error: None,
            };
            let fold_cfg = TrainConfig {
                seed: derive_seed(seed, &[1]),
                ..cfg.clone()
            };
            let trained = build_network(&arch, channels, samples, &mut rng_for(seed, &[0]))
                .and_then(|net| train(net, &x, &y, &fold_cfg));
            let trained = match trained {
                Ok(t) => t,
                Err(e) => {
                    warn!("fold {k} ({}) failed: {e}", trials[k].trial_id);
                    fold.error = Some(e.to_string());
                    return Ok((fold, None));
                }
            };
            let (pred, probs) = predict(&trained.network, &images[k])?;
            fold.predicted = Some(pred);
            fold.probs = Some(probs);
            fold.iterations_used = trained.history.iterations();
            fold.stopped_early = trained.history.stopped_early;
            let extra = inspect(&FoldContext {
                fold: k,
                trained: &trained,
                held_out: &trials[k],
                training: train_idx.iter().map(|&i| &trials[i]).collect(),
            })?;
            Ok((fold, Some(extra)))
        })
        .collect();

    let mut confusion = ConfusionMatrix::new(class_count);
    let mut fold_results = Vec::with_capacity(results.len());
    let mut extras = Vec::with_capacity(results.len());
    for r in results {
        let (fold, extra) = r?;
        if let Some(p) = fold.predicted {
            confusion.record(fold.label, p);
        }
        fold_results.push(fold);
        extras.push(extra);
    }
    Ok((
        LotoOutcome {
            folds: fold_results,
            confusion,
        },
        extras,
    ))
}
