use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::tensor::Tensor;

pub const DEFAULT_CLASS_NAMES: [&str; 4] = ["happy", "sad", "anger", "fear"];
pub const DEFAULT_SAMPLE_RATE: f64 = 500.0;

/// One `[channels, samples]` trial image.
#[derive(Clone, Debug, PartialEq)]
pub struct EegTrial {
    pub data: Tensor,
    pub label: usize,
    pub subject_id: String,
    pub trial_id: String,
    pub sample_rate: f64,
}

impl EegTrial {
    pub fn new(
        data: Tensor,
        label: usize,
        subject_id: impl Into<String>,
        trial_id: impl Into<String>,
        sample_rate: f64,
    ) -> Result<Self> {
        if data.ndim() != 2 {
            return Err(Error::Shape(format!(
                "trial data must be [channels, samples], got {:?}",
                data.shape()
            )));
        }
        Ok(Self {
            data,
            label,
            subject_id: subject_id.into(),
            trial_id: trial_id.into(),
            sample_rate,
        })
    }

    pub fn channels(&self) -> usize {
        self.data.shape()[0]
    }

    pub fn samples(&self) -> usize {
        self.data.shape()[1]
    }

    /// Same metadata, new data of identical extents.
    pub fn with_data(&self, data: Tensor) -> Result<Self> {
        self.data.check_same_shape(&data)?;
        Ok(Self {
            data,
            ..self.clone()
        })
    }

    /// The trial as a single-channel network image `[1, channels, samples]`.
    pub fn image(&self) -> Tensor {
        let (c, s) = (self.channels(), self.samples());
        self.data.clone().reshape(&[1, c, s]).expect("same element count")
    }
}

/// An ordered collection of trials sharing extents and class vocabulary.
#[derive(Clone, Debug, PartialEq)]
pub struct TrialSet {
    pub trials: Vec<EegTrial>,
    pub class_names: Vec<String>,
    pub ground_truth_mask: Option<Tensor>,
}

impl TrialSet {
    pub fn new(
        trials: Vec<EegTrial>,
        class_names: Vec<String>,
        ground_truth_mask: Option<Tensor>,
    ) -> Result<Self> {
        if class_names.len() < 2 {
            return Err(Error::Usage("a trial set needs at least 2 classes".into()));
        }
        if let Some(first) = trials.first() {
            for t in &trials {
                if t.data.shape() != first.data.shape() {
                    return Err(Error::Shape(format!(
                        "trial {} has extents {:?}, expected {:?}",
                        t.trial_id,
                        t.data.shape(),
                        first.data.shape()
                    )));
                }
                if t.label >= class_names.len() {
                    return Err(Error::Usage(format!(
                        "trial {} has label {} but only {} classes",
                        t.trial_id,
                        t.label,
                        class_names.len()
                    )));
                }
            }
            if let Some(mask) = &ground_truth_mask {
                if mask.shape() != first.data.shape() {
                    return Err(Error::Shape("ground-truth mask extents differ from trials".into()));
                }
            }
        }
        if let Some(mask) = &ground_truth_mask {
            if mask.data().iter().any(|&v| v != 0.0 && v != 1.0) {
                return Err(Error::Usage("ground-truth mask must be binary".into()));
            }
        }
        Ok(Self {
            trials,
            class_names,
            ground_truth_mask,
        })
    }

    pub fn empty(class_names: Vec<String>) -> Self {
        Self {
            trials: Vec::new(),
            class_names,
            ground_truth_mask: None,
        }
    }

    pub fn class_count(&self) -> usize {
        self.class_names.len()
    }

    pub fn len(&self) -> usize {
        self.trials.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trials.is_empty()
    }

    /// `(channels, samples)` of the trials, if any.
    pub fn extents(&self) -> Option<(usize, usize)> {
        self.trials.first().map(|t| (t.channels(), t.samples()))
    }

    /// Subject ids in order of first appearance.
    pub fn subjects(&self) -> Vec<String> {
        let mut seen = Vec::new();
        for t in &self.trials {
            if !seen.contains(&t.subject_id) {
                seen.push(t.subject_id.clone());
            }
        }
        seen
    }

    pub fn subject_trials(&self, subject: &str) -> Vec<EegTrial> {
        self.trials
            .iter()
            .filter(|t| t.subject_id == subject)
            .cloned()
            .collect()
    }

    pub fn class_counts(&self) -> BTreeMap<usize, usize> {
        let mut counts = BTreeMap::new();
        for t in &self.trials {
            *counts.entry(t.label).or_insert(0) += 1;
        }
        counts
    }

    /// Applies `f` to every trial's data, keeping metadata.
    pub fn map_data(&self, mut f: impl FnMut(&EegTrial) -> Result<Tensor>) -> Result<Self> {
        let trials = self
            .trials
            .iter()
            .map(|t| f(t).and_then(|d| t.with_data(d)))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            trials,
            ..self.clone()
        })
    }
}
