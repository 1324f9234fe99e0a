//! Synthetic EEG-like trials with planted class-specific components.
//!
//! Each class owns a few loci (a channel group and a time window). A trial
//! of that class carries a Gaussian-windowed oscillatory burst at each of
//! its loci on top of pink (1/f) noise. The union of all loci is recorded
//! as the set's ground-truth mask, and bursts are exactly zero outside it.

use log::warn;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rustfft::{num_complex::Complex, FftPlanner};

use super::trial::{EegTrial, TrialSet, DEFAULT_CLASS_NAMES, DEFAULT_SAMPLE_RATE};
use crate::error::{Error, Result};
use crate::seed::derive_seed;
use crate::tensor::Tensor;

#[derive(Clone, Debug, PartialEq)]
pub struct SynthConfig {
    pub channels: usize,
    pub samples: usize,
    pub classes: usize,
    pub trials_per_class: usize,
    pub subjects: usize,
    /// Peak burst amplitude over noise standard deviation; `inf` is noiseless.
    pub snr: f64,
    pub bursts_per_class: usize,
    pub burst_channels: usize,
    pub burst_samples: usize,
    /// Relative per-trial burst amplitude jitter.
    pub amplitude_jitter: f64,
    pub sample_rate: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            channels: 16,
            samples: 128,
            classes: 4,
            trials_per_class: 12,
            subjects: 1,
            snr: 8.0,
            bursts_per_class: 2,
            burst_channels: 2,
            burst_samples: 24,
            amplitude_jitter: 0.2,
            sample_rate: DEFAULT_SAMPLE_RATE,
        }
    }
}

/// One planted component.
#[derive(Clone, Debug, PartialEq)]
pub struct Locus {
    pub class: usize,
    pub first_channel: usize,
    pub start: usize,
    /// `[burst_channels, burst_samples]` waveform at unit amplitude.
    pub template: Tensor,
}

impl SynthConfig {
    fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Usage(format!("synthetic config: {m}")));
        if self.channels == 0 || self.samples == 0 {
            return bad("channels and samples must be positive");
        }
        if self.classes < 2 {
            return bad("need at least 2 classes");
        }
        if self.trials_per_class == 0 || self.subjects == 0 {
            return bad("trials_per_class and subjects must be positive");
        }
        if !(1..=3).contains(&self.bursts_per_class) {
            return bad("bursts_per_class must be 1, 2 or 3");
        }
        if self.burst_channels == 0 || self.burst_channels > self.channels {
            return bad("burst_channels must be in 1..=channels");
        }
        if self.burst_samples < 2 || self.burst_samples > self.samples {
            return bad("burst_samples must be in 2..=samples");
        }
        if !(self.snr > 0.0) {
            return bad("snr must be positive");
        }
        if !(0.0..1.0).contains(&self.amplitude_jitter) {
            return bad("amplitude_jitter must lie in [0, 1)");
        }
        Ok(())
    }

    pub fn class_names(&self) -> Vec<String> {
        (0..self.classes)
            .map(|k| {
                DEFAULT_CLASS_NAMES
                    .get(k)
                    .map(|s| s.to_string())
                    .unwrap_or_else(|| format!("class{k}"))
            })
            .collect()
    }
}

fn overlaps(a: &Locus, b: &Locus, cfg: &SynthConfig) -> bool {
    let ch = a.first_channel < b.first_channel + cfg.burst_channels
        && b.first_channel < a.first_channel + cfg.burst_channels;
    let t = a.start < b.start + cfg.burst_samples && b.start < a.start + cfg.burst_samples;
    ch && t
}

fn burst_template(cfg: &SynthConfig, class: usize, rng: &mut ChaCha8Rng) -> Tensor {
    let len = cfg.burst_samples as f64;
    let center = (len - 1.0) / 2.0;
    let width = len / 5.0;
    let cycles = 1.0 + 0.5 * class as f64;
    let phase = rng.random_range(0.0..std::f64::consts::TAU);
    let gains: Vec<f64> = (0..cfg.burst_channels).map(|_| rng.random_range(0.6..1.0)).collect();
    Tensor::from_fn(&[cfg.burst_channels, cfg.burst_samples], |i| {
        let (c, t) = (i / cfg.burst_samples, (i % cfg.burst_samples) as f64);
        let window = (-0.5 * ((t - center) / width).powi(2)).exp();
        gains[c] * window * (std::f64::consts::TAU * cycles * t / len + phase).cos()
    })
}

/// Class loci drawn from `seed`; retries placements to avoid overlap.
pub fn plan_loci(cfg: &SynthConfig, seed: u64) -> Result<Vec<Locus>> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &[0]));
    let mut loci: Vec<Locus> = Vec::new();
    for class in 0..cfg.classes {
        for _ in 0..cfg.bursts_per_class {
            let mut candidate = None;
            for _ in 0..200 {
                let l = Locus {
                    class,
                    first_channel: rng.random_range(0..=cfg.channels - cfg.burst_channels),
                    start: rng.random_range(0..=cfg.samples - cfg.burst_samples),
                    template: Tensor::zeros(&[1]),
                };
                let clash = loci.iter().any(|o| overlaps(o, &l, cfg));
                candidate = Some((l, clash));
                if !clash {
                    break;
                }
            }
            let (mut locus, clash) = candidate.expect("at least one attempt");
            if clash {
                warn!(
                    "class {class} locus at channel {} sample {} overlaps another class",
                    locus.first_channel, locus.start
                );
            }
            locus.template = burst_template(cfg, class, &mut rng);
            loci.push(locus);
        }
    }
    Ok(loci)
}

/// Unit-variance pink noise of length `n` by 1/f amplitude shaping.
pub fn pink_noise(n: usize, planner: &mut FftPlanner<f64>, rng: &mut impl Rng) -> Vec<f64> {
    if n < 2 {
        return vec![0.0; n];
    }
    let mut buf: Vec<Complex<f64>> = (0..n)
        .map(|_| Complex::new(rng.sample(StandardNormal), 0.0))
        .collect();
    planner.plan_fft_forward(n).process(&mut buf);
    for (k, v) in buf.iter_mut().enumerate() {
        let f = k.min(n - k);
        *v *= if f == 0 { 0.0 } else { 1.0 / (f as f64).sqrt() };
    }
    planner.plan_fft_inverse(n).process(&mut buf);
    let mut out: Vec<f64> = buf.iter().map(|c| c.re).collect();
    let mean = out.iter().sum::<f64>() / n as f64;
    let var = out.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64;
    let sd = var.sqrt();
    for v in &mut out {
        *v = if sd > 0.0 { (*v - mean) / sd } else { 0.0 };
    }
    out
}

pub fn ground_truth_mask(cfg: &SynthConfig, loci: &[Locus]) -> Tensor {
    let mut mask = Tensor::zeros(&[cfg.channels, cfg.samples]);
    for l in loci {
        for c in 0..cfg.burst_channels {
            for t in 0..cfg.burst_samples {
                mask.set(&[l.first_channel + c, l.start + t], 1.0);
            }
        }
    }
    mask
}

/// Generates a labeled trial set. Trials cycle through classes; subject
/// `i` is named `s{i+1:02}`. Identical seeds give identical sets.
pub fn generate_synthetic(cfg: &SynthConfig, seed: u64) -> Result<TrialSet> {
    let loci = plan_loci(cfg, seed)?;
    let noise_scale = if cfg.snr.is_finite() { 1.0 / cfg.snr } else { 0.0 };
    let mut planner = FftPlanner::new();
    let per_subject = cfg.classes * cfg.trials_per_class;
    let mut trials = Vec::with_capacity(per_subject * cfg.subjects);
    for s in 0..cfg.subjects {
        let subject = format!("s{:02}", s + 1);
        for i in 0..per_subject {
            let label = i % cfg.classes;
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &[1, s as u64, i as u64]));
            let mut data = Vec::with_capacity(cfg.channels * cfg.samples);
            for _ in 0..cfg.channels {
                if noise_scale > 0.0 {
                    data.extend(pink_noise(cfg.samples, &mut planner, &mut rng).iter().map(|v| v * noise_scale));
                } else {
                    data.extend(std::iter::repeat_n(0.0, cfg.samples));
                }
            }
            let mut data = Tensor::new(&[cfg.channels, cfg.samples], data)?;
            for l in loci.iter().filter(|l| l.class == label) {
                let gain = 1.0 + cfg.amplitude_jitter * rng.random_range(-1.0..=1.0);
                for c in 0..cfg.burst_channels {
                    for t in 0..cfg.burst_samples {
                        let idx = [l.first_channel + c, l.start + t];
                        let v = data.get(&idx) + gain * l.template.get(&[c, t]);
                        data.set(&idx, v);
                    }
                }
            }
            trials.push(EegTrial::new(
                data,
                label,
                subject.clone(),
                format!("{subject}_t{:03}", i + 1),
                cfg.sample_rate,
            )?);
        }
    }
    TrialSet::new(trials, cfg.class_names(), Some(ground_truth_mask(cfg, &loci)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_shape_and_determinism() {
        let cfg = SynthConfig::default();
        let a = generate_synthetic(&cfg, 5).unwrap();
        assert_eq!(a.len(), 48);
        assert_eq!(a.extents(), Some((16, 128)));
        assert_eq!(a.class_count(), 4);
        assert!(a.class_counts().values().all(|&n| n == 12));
        let b = generate_synthetic(&cfg, 5).unwrap();
        assert_eq!(a, b);
        let c = generate_synthetic(&cfg, 6).unwrap();
        assert_ne!(a.trials[0].data, c.trials[0].data);
    }

    #[test]
    fn mask_coverage_below_thirty_percent() {
        for seed in 0..20 {
            let set = generate_synthetic(&SynthConfig::default(), seed).unwrap();
            let mask = set.ground_truth_mask.unwrap();
            assert!(mask.mean() < 0.3, "seed {seed}: {}", mask.mean());
            assert!(mask.mean() > 0.0);
        }
    }

    #[test]
    fn noiseless_signal_lives_inside_mask() {
        let cfg = SynthConfig {
            snr: f64::INFINITY,
            ..SynthConfig::default()
        };
        let set = generate_synthetic(&cfg, 3).unwrap();
        let mask = set.ground_truth_mask.as_ref().unwrap();
        for t in &set.trials {
            for (v, m) in t.data.data().iter().zip(mask.data()) {
                if *m == 0.0 {
                    assert_eq!(*v, 0.0);
                }
            }
        }
    }

    #[test]
    fn noiseless_classes_are_linearly_separable_on_mask() {
        let cfg = SynthConfig {
            snr: f64::INFINITY,
            ..SynthConfig::default()
        };
        let set = generate_synthetic(&cfg, 11).unwrap();
        let mask = set.ground_truth_mask.as_ref().unwrap();
        let masked = |t: &EegTrial| -> Vec<f64> {
            t.data.data().iter().zip(mask.data()).filter(|(_, m)| **m > 0.0).map(|(v, _)| *v).collect()
        };
        // nearest class centroid, a linear probe
        let k = set.class_count();
        let dim = masked(&set.trials[0]).len();
        let mut centroids = vec![vec![0.0; dim]; k];
        for t in &set.trials {
            for (c, v) in centroids[t.label].iter_mut().zip(masked(t)) {
                *c += v / cfg.trials_per_class as f64;
            }
        }
        for t in &set.trials {
            let x = masked(t);
            let score = |c: &Vec<f64>| -> f64 {
                x.iter().zip(c).map(|(a, b)| a * b).sum::<f64>() - 0.5 * c.iter().map(|v| v * v).sum::<f64>()
            };
            let best = (0..k).max_by(|&a, &b| score(&centroids[a]).total_cmp(&score(&centroids[b]))).unwrap();
            assert_eq!(best, t.label);
        }
    }

    #[test]
    fn pink_noise_has_falling_spectrum() {
        let mut planner = FftPlanner::new();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let n = 256;
        let mut low = 0.0;
        let mut high = 0.0;
        for _ in 0..50 {
            let x = pink_noise(n, &mut planner, &mut rng);
            let mut buf: Vec<Complex<f64>> = x.iter().map(|&v| Complex::new(v, 0.0)).collect();
            planner.plan_fft_forward(n).process(&mut buf);
            low += buf[1..9].iter().map(|c| c.norm_sqr()).sum::<f64>();
            high += buf[100..108].iter().map(|c| c.norm_sqr()).sum::<f64>();
        }
        assert!(low > 10.0 * high);
    }

    #[test]
    fn rejects_bad_config() {
        let cfg = SynthConfig {
            bursts_per_class: 4,
            ..SynthConfig::default()
        };
        assert!(generate_synthetic(&cfg, 0).is_err());
    }
}
