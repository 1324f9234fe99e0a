use std::ops::Range;

use super::detrend::linear_detrend;
use super::trial::{EegTrial, TrialSet};
use super::zca::{fit_zca, WhiteningMode};
use crate::error::Result;

/// Optional steps applied per subject before training.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct PreprocessConfig {
    /// Remove the linear trend fitted on these samples.
    pub detrend_baseline: Option<Range<usize>>,
    /// Whitening mode and epsilon; the transform is fitted on the subject's trials.
    pub whitening: Option<(WhiteningMode, f64)>,
}

impl PreprocessConfig {
    pub fn is_identity(&self) -> bool {
        self.detrend_baseline.is_none() && self.whitening.is_none()
    }
}

/// Detrends, then whitens, one subject's trials.
pub fn preprocess_subject(trials: &[EegTrial], cfg: &PreprocessConfig) -> Result<Vec<EegTrial>> {
    let mut out = trials.to_vec();
    if let Some(baseline) = &cfg.detrend_baseline {
        out = out
            .iter()
            .map(|t| t.with_data(linear_detrend(&t.data, baseline.clone())?))
            .collect::<Result<_>>()?;
    }
    if let Some((mode, eps)) = cfg.whitening {
        let w = fit_zca(&out, eps, mode)?;
        out = out.iter().map(|t| t.with_data(w.apply(&t.data)?)).collect::<Result<_>>()?;
    }
    Ok(out)
}

/// Applies [`preprocess_subject`] to every subject, keeping trial order.
pub fn preprocess(set: &TrialSet, cfg: &PreprocessConfig) -> Result<TrialSet> {
    if cfg.is_identity() {
        return Ok(set.clone());
    }
    let mut out = set.clone();
    for subject in set.subjects() {
        let idx: Vec<usize> = (0..set.trials.len()).filter(|&i| set.trials[i].subject_id == subject).collect();
        let trials: Vec<EegTrial> = idx.iter().map(|&i| set.trials[i].clone()).collect();
        for (i, t) in idx.into_iter().zip(preprocess_subject(&trials, cfg)?) {
            out.trials[i] = t;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{generate_synthetic, SynthConfig};

    #[test]
    fn identity_and_whitening() {
        let set = generate_synthetic(&SynthConfig { subjects: 2, channels: 4, samples: 32, ..Default::default() }, 3).unwrap();
        assert_eq!(preprocess(&set, &PreprocessConfig::default()).unwrap(), set);
        let cfg = PreprocessConfig {
            detrend_baseline: Some(0..8),
            whitening: Some((WhiteningMode::PerChannel, 0.01)),
        };
        let out = preprocess(&set, &cfg).unwrap();
        assert_eq!(out.trials.len(), set.trials.len());
        for (a, b) in out.trials.iter().zip(&set.trials) {
            assert_eq!(a.trial_id, b.trial_id);
            assert_ne!(a.data, b.data);
        }
    }
}
