use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use log::{info, warn};

use super::base::BaseRun;
use super::mask::{apply_mask, default_slice_len, make_mask, slice_masks, uniform_random_mask, BinaryMask, Fill, MaskRule, SliceMode};
use crate::attribution::{Method, RelevanceMap};
use crate::data::EegTrial;
use crate::error::{Error, Result};
use crate::model::{run_loto, ArchitectureConfig, FoldResult, LotoOptions, LotoOutcome, TrainConfig};
use crate::seed::{label_hash, rng_for};
use crate::tensor::Tensor;

pub const DEFAULT_REMOVAL_RATES: [f64; 8] = [0.0, 0.1, 0.2, 0.35, 0.5, 0.7, 0.9, 1.0];

/// What decides which pixels a mask removes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Condition {
    Method(Method),
    /// The planted signal mask of a synthetic set, as an oracle ranking.
    GroundTruth,
    Uniform,
    RandomSlices,
    /// Slices ranked by a method's mean relevance.
    MethodSlices(Method),
}

impl Condition {
    pub fn name(&self) -> String {
        match self {
            Condition::Method(m) => m.name().to_string(),
            Condition::GroundTruth => "ground_truth".into(),
            Condition::Uniform => "uniform".into(),
            Condition::RandomSlices => "random_slices".into(),
            Condition::MethodSlices(m) => format!("method_slices:{}", m.name()),
        }
    }

    pub fn is_baseline(&self) -> bool {
        !matches!(self, Condition::Method(_))
    }
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

impl FromStr for Condition {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "ground_truth" => Condition::GroundTruth,
            "uniform" => Condition::Uniform,
            "random_slices" => Condition::RandomSlices,
            _ => match s.strip_prefix("method_slices:") {
                Some(m) => Condition::MethodSlices(m.parse()?),
                None => Condition::Method(s.parse()?),
            },
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RoarConfig {
    pub removal_rates: Vec<f64>,
    pub fill: Fill,
    pub rule: MaskRule,
    /// Defaults to [`default_slice_len`] of the trial length.
    pub slice_len: Option<usize>,
    /// Must match the base run for `r = 0` to reproduce it.
    pub loto: LotoOptions,
    /// Seeds the random baseline masks.
    pub seed: u64,
}

impl Default for RoarConfig {
    fn default() -> Self {
        Self {
            removal_rates: DEFAULT_REMOVAL_RATES.to_vec(),
            fill: Fill::Zero,
            rule: MaskRule::Rank,
            slice_len: None,
            loto: LotoOptions::default(),
            seed: 0,
        }
    }
}

/// One retrained LOTO under one mask.
#[derive(Clone, Debug, PartialEq)]
pub struct RoarPoint {
    pub condition: Condition,
    pub r: f64,
    pub subject: String,
    pub accuracy: f64,
    pub removed_fraction: f64,
    /// Some folds failed to train.
    pub partial: bool,
    pub folds: Vec<FoldResult>,
}

/// One subject's inputs to [`run_roar`].
pub struct RoarSubject<'a> {
    pub subject: &'a str,
    pub trials: &'a [EegTrial],
    pub base: &'a BaseRun,
    pub ground_truth: Option<&'a Tensor>,
}

fn relevance_for<'a>(base: &'a BaseRun, m: Method) -> Result<&'a RelevanceMap> {
    base.averaged(m)
        .ok_or_else(|| Error::Usage(format!("base run has no relevance for {m}")))
}

/// Builds the mask `condition` prescribes at rate `r`.
pub fn condition_mask(
    condition: Condition,
    r: f64,
    subject: &RoarSubject,
    cfg: &RoarConfig,
) -> Result<BinaryMask> {
    let first = subject.trials.first().ok_or_else(|| Error::Usage("ROAR needs trials".into()))?;
    let shape = [first.channels(), first.samples()];
    let slice_len = cfg.slice_len.unwrap_or_else(|| default_slice_len(shape[1]));
    let mut rng = rng_for(cfg.seed, &[label_hash(&condition.name()), label_hash(subject.subject), r.to_bits()]);
    match condition {
        Condition::Method(m) => make_mask(relevance_for(subject.base, m)?, r, cfg.rule),
        Condition::GroundTruth => {
            let gt = subject
                .ground_truth
                .ok_or_else(|| Error::Usage("ground_truth condition needs a planted mask".into()))?;
            make_mask(&RelevanceMap::from_mask(gt, "ground_truth")?, r, cfg.rule)
        }
        Condition::Uniform => uniform_random_mask(&shape, r, &mut rng),
        Condition::RandomSlices => slice_masks(&shape, slice_len, SliceMode::Random, None, r, &mut rng),
        Condition::MethodSlices(m) => {
            let rel = relevance_for(subject.base, m)?;
            slice_masks(&shape, slice_len, SliceMode::MethodSorted, Some(rel), r, &mut rng)
        }
    }
}

/// Masks every trial with each condition's mask at each rate and reruns
/// LOTO. Identical masks share one retrain.
pub fn run_roar(
    subject: &RoarSubject,
    class_count: usize,
    arch: &ArchitectureConfig,
    train: &TrainConfig,
    conditions: &[Condition],
    cfg: &RoarConfig,
) -> Result<Vec<RoarPoint>> {
    let mut cache: HashMap<Vec<bool>, LotoOutcome> = HashMap::new();
    let mut points = Vec::new();
    for &condition in conditions {
        for &r in &cfg.removal_rates {
            let mask = condition_mask(condition, r, subject, cfg)?;
            let key: Vec<bool> = mask.data.data().iter().map(|&v| v != 0.0).collect();
            if !cache.contains_key(&key) {
                info!("{}: retraining {condition} at r={r}", subject.subject);
                let masked: Vec<EegTrial> = subject
                    .trials
                    .iter()
                    .map(|t| t.with_data(apply_mask(&t.data, &mask, cfg.fill)?))
                    .collect::<Result<_>>()?;
                cache.insert(key.clone(), run_loto(&masked, class_count, arch, train, &cfg.loto)?);
            }
            let outcome = &cache[&key];
            if outcome.is_partial() {
                warn!("{}: {condition} at r={r}: {} folds failed", subject.subject, outcome.failed());
            }
            points.push(RoarPoint {
                condition,
                r,
                subject: subject.subject.to_string(),
                accuracy: outcome.accuracy(),
                removed_fraction: mask.removed_fraction(),
                partial: outcome.is_partial(),
                folds: outcome.folds.clone(),
            });
        }
    }
    Ok(points)
}

#[derive(Clone, Debug, PartialEq)]
pub struct CurvePoint {
    pub r: f64,
    pub mean: f64,
    /// Sample standard deviation over subjects; 0 for one subject.
    pub std: f64,
    pub per_subject: Vec<(String, f64)>,
    pub partial: bool,
}

/// Accuracy against removal rate for one condition.
#[derive(Clone, Debug, PartialEq)]
pub struct RoarCurve {
    pub condition: Condition,
    pub points: Vec<CurvePoint>,
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Groups points by condition (first-seen order) and rate (ascending).
pub fn roar_curves(points: &[RoarPoint]) -> Vec<RoarCurve> {
    let mut curves: Vec<RoarCurve> = Vec::new();
    for p in points {
        let curve = match curves.iter_mut().position(|c| c.condition == p.condition) {
            Some(i) => &mut curves[i],
            None => {
                curves.push(RoarCurve {
                    condition: p.condition,
                    points: Vec::new(),
                });
                curves.last_mut().expect("just pushed")
            }
        };
        match curve.points.iter_mut().find(|c| c.r == p.r) {
            Some(c) => {
                c.per_subject.push((p.subject.clone(), p.accuracy));
                c.partial |= p.partial;
            }
            None => curve.points.push(CurvePoint {
                r: p.r,
                mean: 0.0,
                std: 0.0,
                per_subject: vec![(p.subject.clone(), p.accuracy)],
                partial: p.partial,
            }),
        }
    }
    for curve in &mut curves {
        curve.points.sort_by(|a, b| a.r.total_cmp(&b.r));
        for c in &mut curve.points {
            let acc: Vec<f64> = c.per_subject.iter().map(|(_, a)| *a).collect();
            (c.mean, c.std) = mean_std(&acc);
        }
    }
    curves
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::attribution::AttributionConfig;
    use crate::data::{generate_synthetic, SynthConfig};
    use crate::roar::base_run;

    #[test]
    fn condition_names_round_trip() {
        for c in [
            Condition::Method(Method::LrpB),
            Condition::GroundTruth,
            Condition::Uniform,
            Condition::RandomSlices,
            Condition::MethodSlices(Method::SmoothGradSquared),
        ] {
            assert_eq!(c.name().parse::<Condition>().unwrap(), c);
        }
        assert!("method_slices:nope".parse::<Condition>().is_err());
    }

    #[test]
    fn curves_aggregate_subjects() {
        let pt = |subject: &str, r: f64, accuracy: f64| RoarPoint {
            condition: Condition::Uniform,
            r,
            subject: subject.into(),
            accuracy,
            removed_fraction: r,
            partial: false,
            folds: vec![],
        };
        let curves = roar_curves(&[pt("a", 0.5, 0.5), pt("a", 0.0, 1.0), pt("b", 0.5, 0.7), pt("b", 0.0, 1.0)]);
        assert_eq!(curves.len(), 1);
        let p = &curves[0].points;
        assert_eq!(p[0].r, 0.0);
        assert_eq!((p[0].mean, p[0].std), (1.0, 0.0));
        assert!((p[1].mean - 0.6).abs() < 1e-12);
        assert!((p[1].std - 0.02f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn small_sweep_endpoints_and_reuse() {
        let set = generate_synthetic(&SynthConfig { samples: 64, trials_per_class: 3, ..Default::default() }, 4).unwrap();
        let arch = ArchitectureConfig::desk();
        let train = TrainConfig { max_iterations: 8, ..TrainConfig::desk() };
        let loto = LotoOptions { fold_limit: Some(4) };
        let methods = [Method::Gradient];
        let base = base_run(&set.trials, 4, &arch, &train, &methods, &AttributionConfig::default(), &loto).unwrap();
        let subject = RoarSubject {
            subject: "s01",
            trials: &set.trials,
            base: &base,
            ground_truth: set.ground_truth_mask.as_ref(),
        };
        let cfg = RoarConfig { removal_rates: vec![0.0, 0.5, 1.0], loto, seed: 2, ..Default::default() };
        let conds = [Condition::Method(Method::Gradient), Condition::GroundTruth, Condition::Uniform];
        let points = run_roar(&subject, 4, &arch, &train, &conds, &cfg).unwrap();
        assert_eq!(points.len(), 9);
        for p in points.iter().filter(|p| p.r == 0.0) {
            assert_eq!(p.accuracy.to_bits(), base.outcome.accuracy().to_bits());
            assert_eq!(p.folds, base.outcome.folds);
        }
        let ones: Vec<&RoarPoint> = points.iter().filter(|p| p.r == 1.0).collect();
        assert!(ones.iter().all(|p| p.folds == ones[0].folds && p.removed_fraction == 1.0));
        assert_eq!(points, run_roar(&subject, 4, &arch, &train, &conds, &cfg).unwrap());
        let no_gt = RoarSubject { ground_truth: None, ..subject };
        assert!(run_roar(&no_gt, 4, &arch, &train, &[Condition::GroundTruth], &cfg).is_err());
    }
}
