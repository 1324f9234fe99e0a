//! Flat `section.key = value` run configuration.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::ops::Range;
use std::path::Path;
use std::str::FromStr;

use crate::attribution::{AttributionConfig, LrpConfig, Method, PatternRegime, SmoothGradConfig};
use crate::data::{PreprocessConfig, SynthConfig, WhiteningMode};
use crate::error::{Error, Result};
use crate::model::{ArchitectureConfig, EarlyStop, LotoOptions, TrainConfig};
use crate::nn::LrSchedule;
use crate::roar::{Condition, Fill, MaskRule, RoarConfig};

/// Every accepted key with its default.
pub const DEFAULTS: &[(&str, &str)] = &[
    ("seed", "0"),
    ("synth.channels", "16"),
    ("synth.samples", "128"),
    ("synth.classes", "4"),
    ("synth.trials_per_class", "12"),
    ("synth.subjects", "1"),
    ("synth.snr", "8"),
    ("synth.bursts_per_class", "2"),
    ("synth.burst_channels", "2"),
    ("synth.burst_samples", "24"),
    ("synth.amplitude_jitter", "0.2"),
    ("synth.sample_rate", "500"),
    ("preprocess.detrend", "none"),
    ("preprocess.whitening", "none"),
    ("preprocess.epsilon", "0.01"),
    ("arch.kernels", "16x4,8x2,4x2"),
    ("arch.filters", "8,16,32"),
    ("arch.pools", "2x2,2x2,2x1"),
    ("arch.fc_units", "64"),
    ("arch.dropout", "0.25"),
    ("arch.amplitude_norm", "true"),
    ("train.lr", "0.002"),
    ("train.decay", "0.000001"),
    ("train.schedule", "linear"),
    ("train.batch_size", "4"),
    ("train.max_iterations", "100"),
    ("train.early_stop", "true"),
    ("train.patience", "25"),
    ("train.min_delta", "0.0001"),
    ("train.window", "epoch"),
    ("train.class_balanced", "true"),
    ("train.save_models", "true"),
    ("loto.fold_limit", "none"),
    ("attribute.methods", "smoothgrad,smoothgrad2,lrp_b,patternnet,patternattr"),
    ("attribute.windows", "default"),
    ("smoothgrad.samples", "25"),
    ("smoothgrad.noise_sigma", "0.1"),
    ("lrp.epsilon", "1e-7"),
    ("lrp.alpha", "2"),
    ("lrp.beta", "1"),
    ("pattern.regime", "positive"),
    ("roar.rates", "0,0.1,0.2,0.35,0.5,0.7,0.9,1"),
    ("roar.baselines", "uniform,random_slices,method_slices"),
    ("roar.fill", "zero"),
    ("roar.rule", "rank"),
    ("roar.slice_len", "auto"),
    ("roar.export_masks", "true"),
    ("report.alpha", "0.05"),
];

/// Raw key-value settings, defaults filled in.
#[derive(Clone, Debug, PartialEq)]
pub struct Settings {
    values: BTreeMap<String, String>,
}

impl Default for Settings {
    fn default() -> Self {
        Self {
            values: DEFAULTS.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect(),
        }
    }
}

impl Settings {
    /// Defaults overridden by `text`; `origin` names the source in errors.
    pub fn parse(text: &str, origin: &Path) -> Result<Self> {
        let mut s = Self::default();
        for (n, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("{}:{}: expected key = value", origin.display(), n + 1)))?;
            s.set(k.trim(), v.trim())
                .map_err(|e| Error::Config(format!("{}:{}: {}", origin.display(), n + 1, strip(e))))?;
        }
        Ok(s)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, path)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match self.values.get_mut(key) {
            Some(slot) => {
                *slot = value.to_string();
                Ok(())
            }
            None => Err(Error::Config(format!("unknown key {key:?}"))),
        }
    }

    /// Applies a `key=value` override.
    pub fn set_pair(&mut self, pair: &str) -> Result<()> {
        let (k, v) = pair
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("override {pair:?} is not key=value")))?;
        self.set(k.trim(), v.trim())
    }

    pub fn get(&self, key: &str) -> &str {
        self.values.get(key).map(String::as_str).unwrap_or_else(|| panic!("no default for {key}"))
    }

    /// The resolved settings in the file format, sorted by key.
    pub fn render(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.values {
            writeln!(out, "{k} = {v}").expect("string write");
        }
        out
    }

    fn parsed<T: FromStr>(&self, key: &str) -> Result<T> {
        let v = self.get(key);
        v.parse()
            .map_err(|_| Error::Config(format!("{key}: cannot parse {v:?}")))
    }

    fn optional<T: FromStr>(&self, key: &str, none: &str) -> Result<Option<T>> {
        if self.get(key) == none {
            Ok(None)
        } else {
            self.parsed(key).map(Some)
        }
    }

    fn list<T: FromStr>(&self, key: &str) -> Result<Vec<T>> {
        let v = self.get(key);
        v.split(',')
            .map(|item| {
                item.trim()
                    .parse()
                    .map_err(|_| Error::Config(format!("{key}: cannot parse {item:?} in {v:?}")))
            })
            .collect()
    }

    fn pairs(&self, key: &str) -> Result<Vec<(usize, usize)>> {
        let v = self.get(key);
        v.split(',')
            .map(|item| {
                let bad = || Error::Config(format!("{key}: expected TIMExCHANNELS, got {item:?}"));
                let (a, b) = item.trim().split_once('x').ok_or_else(bad)?;
                Ok((a.parse().map_err(|_| bad())?, b.parse().map_err(|_| bad())?))
            })
            .collect()
    }

    fn choice<T: Copy>(&self, key: &str, options: &[(&str, T)]) -> Result<T> {
        let v = self.get(key);
        options.iter().find(|(name, _)| *name == v).map(|(_, t)| *t).ok_or_else(|| {
            let names: Vec<&str> = options.iter().map(|(n, _)| *n).collect();
            Error::Config(format!("{key}: {v:?} is not one of {}", names.join(", ")))
        })
    }

    fn range(&self, key: &str, text: &str) -> Result<Range<usize>> {
        let bad = || Error::Config(format!("{key}: expected START..END, got {text:?}"));
        let (a, b) = text.trim().split_once("..").ok_or_else(bad)?;
        let r = a.parse().map_err(|_| bad())?..b.parse().map_err(|_| bad())?;
        if r.is_empty() {
            return Err(bad());
        }
        Ok(r)
    }
}

// error text without the "config error: " prefix, for re-wrapping
fn strip(e: Error) -> String {
    match e {
        Error::Config(m) => m,
        other => other.to_string(),
    }
}

/// Typed view of [`Settings`].
#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub seed: u64,
    pub synth: SynthConfig,
    pub preprocess: PreprocessConfig,
    pub arch: ArchitectureConfig,
    pub train: TrainConfig,
    pub save_models: bool,
    pub loto: LotoOptions,
    pub methods: Vec<Method>,
    /// `None` uses the default five windows.
    pub windows: Option<Vec<Range<usize>>>,
    pub attribution: AttributionConfig,
    pub roar: RoarConfig,
    /// Baseline conditions; `method_slices` expands per method.
    pub baselines: Vec<Condition>,
    pub export_masks: bool,
    pub alpha: f64,
}

impl RunConfig {
    pub fn from_settings(s: &Settings) -> Result<Self> {
        let seed: u64 = s.parsed("seed")?;
        let synth = SynthConfig {
            channels: s.parsed("synth.channels")?,
            samples: s.parsed("synth.samples")?,
            classes: s.parsed("synth.classes")?,
            trials_per_class: s.parsed("synth.trials_per_class")?,
            subjects: s.parsed("synth.subjects")?,
            snr: s.parsed("synth.snr")?,
            bursts_per_class: s.parsed("synth.bursts_per_class")?,
            burst_channels: s.parsed("synth.burst_channels")?,
            burst_samples: s.parsed("synth.burst_samples")?,
            amplitude_jitter: s.parsed("synth.amplitude_jitter")?,
            sample_rate: s.parsed("synth.sample_rate")?,
        };
        let detrend = s.get("preprocess.detrend");
        let whitening = s.choice(
            "preprocess.whitening",
            &[("none", None), ("per_channel", Some(WhiteningMode::PerChannel)), ("joint", Some(WhiteningMode::Joint))],
        )?;
        let epsilon: f64 = s.parsed("preprocess.epsilon")?;
        let preprocess = PreprocessConfig {
            detrend_baseline: if detrend == "none" { None } else { Some(s.range("preprocess.detrend", detrend)?) },
            whitening: whitening.map(|m| (m, epsilon)),
        };
        let arch = ArchitectureConfig {
            kernels: s.pairs("arch.kernels")?,
            filters: s.list("arch.filters")?,
            pools: s.pairs("arch.pools")?,
            fc_units: s.parsed("arch.fc_units")?,
            classes: 4,
            dropout_p: s.parsed("arch.dropout")?,
            amplitude_norm: s.parsed("arch.amplitude_norm")?,
        };
        arch.validate()?;
        let early_stop = if s.parsed("train.early_stop")? {
            Some(EarlyStop {
                patience: s.parsed("train.patience")?,
                min_delta: s.parsed("train.min_delta")?,
                window: s.optional("train.window", "epoch")?,
            })
        } else {
            None
        };
        let train = TrainConfig {
            lr: s.parsed("train.lr")?,
            decay: s.parsed("train.decay")?,
            schedule: s.choice(
                "train.schedule",
                &[("linear", LrSchedule::Linear), ("inverse_time", LrSchedule::InverseTime)],
            )?,
            batch_size: s.parsed("train.batch_size")?,
            max_iterations: s.parsed("train.max_iterations")?,
            early_stop,
            class_balanced: s.parsed("train.class_balanced")?,
            seed,
        };
        train.validate()?;
        let loto = LotoOptions {
            fold_limit: s.optional("loto.fold_limit", "none")?,
        };
        let methods: Vec<Method> = s.list("attribute.methods")?;
        let windows = match s.get("attribute.windows") {
            "default" => None,
            w => Some(w.split(',').map(|r| s.range("attribute.windows", r)).collect::<Result<_>>()?),
        };
        let attribution = AttributionConfig {
            smooth_grad: SmoothGradConfig {
                samples: s.parsed("smoothgrad.samples")?,
                noise_sigma: s.parsed("smoothgrad.noise_sigma")?,
                squared: false,
                seed,
            },
            lrp: LrpConfig {
                epsilon: s.parsed("lrp.epsilon")?,
                alpha: s.parsed("lrp.alpha")?,
                beta: s.parsed("lrp.beta")?,
                ..LrpConfig::default()
            },
            regime: s.choice(
                "pattern.regime",
                &[("positive", PatternRegime::Positive), ("linear", PatternRegime::Linear)],
            )?,
        };
        attribution.lrp.validate()?;
        let rates: Vec<f64> = s.list("roar.rates")?;
        if let Some(r) = rates.iter().find(|r| !(0.0..=1.0).contains(*r)) {
            return Err(Error::Config(format!("roar.rates: {r} outside [0, 1]")));
        }
        let mut baselines = Vec::new();
        for name in s.get("roar.baselines").split(',').map(str::trim).filter(|n| !n.is_empty()) {
            match name {
                "uniform" => baselines.push(Condition::Uniform),
                "random_slices" => baselines.push(Condition::RandomSlices),
                "ground_truth" => baselines.push(Condition::GroundTruth),
                "method_slices" => baselines.extend(methods.iter().map(|&m| Condition::MethodSlices(m))),
                other => {
                    return Err(Error::Config(format!(
                        "roar.baselines: unknown baseline {other:?} (known: uniform, random_slices, method_slices, ground_truth)"
                    )))
                }
            }
        }
        let roar = RoarConfig {
            removal_rates: rates,
            fill: s.choice("roar.fill", &[("zero", Fill::Zero), ("channel_mean", Fill::ChannelMean)])?,
            rule: s.choice("roar.rule", &[("rank", MaskRule::Rank), ("threshold", MaskRule::Threshold)])?,
            slice_len: s.optional("roar.slice_len", "auto")?,
            loto: loto.clone(),
            seed,
        };
        let alpha: f64 = s.parsed("report.alpha")?;
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::Config(format!("report.alpha: {alpha} outside (0, 1)")));
        }
        Ok(Self {
            seed,
            synth,
            preprocess,
            arch,
            train,
            save_models: s.parsed("train.save_models")?,
            loto,
            methods,
            windows,
            attribution,
            roar,
            baselines,
            export_masks: s.parsed("roar.export_masks")?,
            alpha,
        })
    }

    /// Method curves followed by baselines.
    pub fn conditions(&self) -> Vec<Condition> {
        let mut c: Vec<Condition> = self.methods.iter().map(|&m| Condition::Method(m)).collect();
        c.extend(self.baselines.iter().copied());
        c
    }
}
