//! Adam with a per-iteration learning-rate decay, and weight initializers.

use rand::Rng;

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// How the learning rate shrinks with the step count `t`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum LrSchedule {
    /// `max(lr - decay * t, 0)`.
    Linear,
    /// `lr / (1 + decay * t)`.
    InverseTime,
}

#[derive(Clone, Debug)]
pub struct AdamConfig {
    pub lr: f64,
    pub decay: f64,
    pub schedule: LrSchedule,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamConfig {
    pub fn new(lr: f64, decay: f64) -> Self {
        Self {
            lr,
            decay,
            schedule: LrSchedule::Linear,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.lr >= 0.0) || !(self.decay >= 0.0) {
            return Err(Error::Usage(format!(
                "adam lr {} and decay {} must be non-negative",
                self.lr, self.decay
            )));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return Err(Error::Usage("adam betas must lie in [0, 1)".into()));
        }
        Ok(())
    }

    /// Learning rate in effect for the step following `step` completed steps.
    pub fn lr_at(&self, step: u64) -> f64 {
        let t = step as f64;
        match self.schedule {
            LrSchedule::Linear => (self.lr - self.decay * t).max(0.0),
            LrSchedule::InverseTime => self.lr / (1.0 + self.decay * t),
        }
    }
}

#[derive(Clone, Debug)]
pub struct AdamState {
    pub config: AdamConfig,
    pub step: u64,
    pub first_moment: Vec<Tensor>,
    pub second_moment: Vec<Tensor>,
}

impl AdamState {
    pub fn new(config: AdamConfig, params: &[&Tensor]) -> Result<Self> {
        config.validate()?;
        let zeros: Vec<Tensor> = params.iter().map(|p| Tensor::zeros(p.shape())).collect();
        Ok(Self {
            config,
            step: 0,
            first_moment: zeros.clone(),
            second_moment: zeros,
        })
    }

    /// One bias-corrected Adam update of `params` in place.
    pub fn step(&mut self, params: &mut [&mut Tensor], grads: &[&Tensor]) -> Result<()> {
        if params.len() != self.first_moment.len() || grads.len() != params.len() {
            return Err(Error::Shape(format!(
                "adam tracks {} parameters, got {} params and {} grads",
                self.first_moment.len(),
                params.len(),
                grads.len()
            )));
        }
        let lr = self.config.lr_at(self.step);
        self.step += 1;
        let (b1, b2, eps) = (self.config.beta1, self.config.beta2, self.config.eps);
        let c1 = 1.0 - b1.powi(self.step as i32);
        let c2 = 1.0 - b2.powi(self.step as i32);
        for (((p, g), m), v) in params
            .iter_mut()
            .zip(grads)
            .zip(&mut self.first_moment)
            .zip(&mut self.second_moment)
        {
            p.check_same_shape(g)?;
            p.check_same_shape(m)?;
            for (((pv, &gv), mv), vv) in p
                .data_mut()
                .iter_mut()
                .zip(g.data())
                .zip(m.data_mut())
                .zip(v.data_mut())
            {
                *mv = b1 * *mv + (1.0 - b1) * gv;
                *vv = b2 * *vv + (1.0 - b2) * gv * gv;
                let mhat = *mv / c1;
                let vhat = *vv / c2;
                *pv -= lr * mhat / (vhat.sqrt() + eps);
            }
        }
        Ok(())
    }
}

/// Fan-in and fan-out of a dense `[out, in]` or conv `[f, c, kh, kw]` weight shape.
pub fn fans(shape: &[usize]) -> Result<(usize, usize)> {
    match *shape {
        [out, inp] => Ok((inp, out)),
        [f, c, kh, kw] => Ok((c * kh * kw, f * kh * kw)),
        _ => Err(Error::Shape(format!("cannot derive fans from {shape:?}"))),
    }
}

/// Glorot (Xavier) uniform initialization on `±sqrt(6 / (fan_in + fan_out))`.
pub fn glorot_uniform(shape: &[usize], rng: &mut impl Rng) -> Result<Tensor> {
    let (fan_in, fan_out) = fans(shape)?;
    let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
    Ok(Tensor::from_fn(shape, |_| rng.random_range(-limit..=limit)))
}

/// Uniform initialization with zero mean and the given standard deviation.
pub fn uniform_with_std(shape: &[usize], std: f64, rng: &mut impl Rng) -> Tensor {
    let half_width = std * 3.0_f64.sqrt();
    if half_width == 0.0 {
        return Tensor::zeros(shape);
    }
    Tensor::from_fn(shape, |_| rng.random_range(-half_width..=half_width))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn first_step_moves_by_lr() {
        let mut w = Tensor::vector(vec![0.5]);
        let g = Tensor::vector(vec![1.0]);
        let mut state = AdamState::new(AdamConfig::new(1e-5, 0.0), &[&w]).unwrap();
        state.step(&mut [&mut w], &[&g]).unwrap();
        // mhat = 1, vhat = 1 => delta = lr / (1 + eps)
        let delta = 0.5 - w.data()[0];
        assert!((delta - 1e-5 / (1.0 + 1e-8)).abs() < 1e-15);
    }

    #[test]
    fn zero_gradient_leaves_params() {
        let mut w = Tensor::vector(vec![0.3, -0.1]);
        let g = Tensor::zeros(&[2]);
        let mut state = AdamState::new(AdamConfig::new(1e-3, 1e-6), &[&w]).unwrap();
        for _ in 0..10 {
            state.step(&mut [&mut w], &[&g]).unwrap();
        }
        assert_eq!(w.data(), &[0.3, -0.1]);
        assert!((state.config.lr_at(state.step) - (1e-3 - 1e-5)).abs() < 1e-18);
    }

    #[test]
    fn linear_decay_floors_at_zero() {
        let cfg = AdamConfig::new(1e-5, 1e-6);
        assert!(cfg.lr_at(10) < 1e-18);
        assert_eq!(cfg.lr_at(11), 0.0);
        assert_eq!(cfg.lr_at(1000), 0.0);
        let inv = AdamConfig {
            schedule: LrSchedule::InverseTime,
            ..cfg
        };
        assert!((inv.lr_at(1_000_000) - 5e-6).abs() < 1e-18);
    }

    #[test]
    fn converges_on_quadratic() {
        let mut w = Tensor::vector(vec![1.0]);
        let mut state = AdamState::new(AdamConfig::new(0.1, 0.0), &[&w]).unwrap();
        for _ in 0..500 {
            let g = w.map(|v| 2.0 * v);
            state.step(&mut [&mut w], &[&g]).unwrap();
        }
        assert!(w.data()[0].abs() < 0.05, "w = {}", w.data()[0]);
    }

    #[test]
    fn glorot_bounds_and_determinism() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let t = glorot_uniform(&[3, 3], &mut rng).unwrap();
        assert!(t.data().iter().all(|v| v.abs() <= 1.0));

        let a = glorot_uniform(&[4, 2, 3, 3], &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        let b = glorot_uniform(&[4, 2, 3, 3], &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn glorot_mean_is_centered() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let t = glorot_uniform(&[100, 1000], &mut rng).unwrap();
        let limit = (6.0 / 1100.0_f64).sqrt();
        // std of U(-a, a) is a / sqrt(3)
        let se = limit / 3.0_f64.sqrt() / (t.len() as f64).sqrt();
        assert!(t.mean().abs() < 3.0 * se);
    }

    #[test]
    fn uniform_std_matches() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let t = uniform_with_std(&[20000], 0.1, &mut rng);
        let var = t.data().iter().map(|v| v * v).sum::<f64>() / t.len() as f64;
        assert!((var.sqrt() - 0.1).abs() < 0.003);
    }
}
