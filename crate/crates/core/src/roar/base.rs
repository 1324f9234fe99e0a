use crate::attribution::{
    attribute, average_relevance, estimate_patterns, normalize_relevance, AttributionConfig, Grouping, Method,
    RelevanceMap, SmoothGradConfig,
};
use crate::data::EegTrial;
use crate::error::Result;
use crate::nn::Network;
use crate::model::{run_loto_with, ArchitectureConfig, LotoOptions, LotoOutcome, TrainConfig};
use crate::seed::derive_seed;
use crate::tensor::Tensor;

/// Held-out relevance for one method across the base folds.
#[derive(Clone, Debug, PartialEq)]
pub struct MethodRelevance {
    pub method: Method,
    /// One normalized map per successful fold, targeting the true label.
    pub per_trial: Vec<RelevanceMap>,
    /// Normalized equal-weight mean over classes.
    pub averaged: RelevanceMap,
}

/// The unmasked LOTO run that masks are derived from.
#[derive(Clone, Debug, PartialEq)]
pub struct BaseRun {
    pub outcome: LotoOutcome,
    pub relevance: Vec<MethodRelevance>,
}

impl BaseRun {
    pub fn averaged(&self, method: Method) -> Option<&RelevanceMap> {
        self.relevance.iter().find(|m| m.method == method).map(|m| &m.averaged)
    }
}

/// Normalized relevance of `held_out` for each method under the trained
/// `net` of fold `fold`. Patterns come from the fold's training trials.
pub fn fold_relevance(
    net: &Network,
    fold: usize,
    held_out: &EegTrial,
    training: &[&EegTrial],
    methods: &[Method],
    attr: &AttributionConfig,
) -> Result<Vec<RelevanceMap>> {
    let patterns = if methods.iter().any(|m| m.needs_patterns()) {
        let images: Vec<Tensor> = training.iter().map(|t| t.image()).collect();
        let refs: Vec<&Tensor> = images.iter().collect();
        Some(estimate_patterns(net, &refs, attr.regime)?)
    } else {
        None
    };
    let cfg = AttributionConfig {
        smooth_grad: SmoothGradConfig {
            seed: derive_seed(attr.smooth_grad.seed, &[fold as u64]),
            ..attr.smooth_grad.clone()
        },
        ..attr.clone()
    };
    let image = held_out.image();
    methods
        .iter()
        .map(|&m| Ok(normalize_relevance(&attribute(m, net, patterns.as_ref(), &image, held_out.label, &cfg)?)))
        .collect()
}

/// Collects per-fold maps (one list per fold, in `methods` order) into
/// per-method averages.
pub fn summarize_relevance(methods: &[Method], folds: &[Vec<RelevanceMap>]) -> Result<Vec<MethodRelevance>> {
    methods
        .iter()
        .enumerate()
        .map(|(k, &method)| {
            let per_trial: Vec<RelevanceMap> = folds.iter().map(|maps| maps[k].clone()).collect();
            let mean = average_relevance(&per_trial, Grouping::AcrossClasses)?.remove(0);
            Ok(MethodRelevance {
                method,
                per_trial,
                averaged: normalize_relevance(&mean),
            })
        })
        .collect()
}

/// Runs LOTO and attributes every held-out trial with each of `methods`.
pub fn base_run(
    trials: &[EegTrial],
    class_count: usize,
    arch: &ArchitectureConfig,
    train: &TrainConfig,
    methods: &[Method],
    attr: &AttributionConfig,
    opts: &LotoOptions,
) -> Result<BaseRun> {
    let (outcome, extras) = run_loto_with(trials, class_count, arch, train, opts, |ctx| {
        fold_relevance(&ctx.trained.network, ctx.fold, ctx.held_out, &ctx.training, methods, attr)
    })?;
    let done: Vec<Vec<RelevanceMap>> = extras.into_iter().flatten().collect();
    Ok(BaseRun {
        outcome,
        relevance: summarize_relevance(methods, &done)?,
    })
}
