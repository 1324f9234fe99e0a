use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::map::RelevanceMap;
use crate::error::{Error, Result};
use crate::nn::Network;
use crate::tensor::Tensor;

pub(crate) fn one_hot(k: usize, index: usize, value: f64) -> Result<Tensor> {
    if index >= k {
        return Err(Error::Usage(format!("target class {index} outside {k} classes")));
    }
    let mut t = Tensor::zeros(&[k]);
    t.data_mut()[index] = value;
    Ok(t)
}

fn logit_gradient(net: &Network, image: &Tensor, target: usize) -> Result<Tensor> {
    let pass = net.forward(image, None)?;
    net.input_gradient(&pass, &one_hot(net.class_count(), target, 1.0)?)
}

/// Gradient of the target logit with respect to the input, dropout off.
pub fn gradient_saliency(net: &Network, image: &Tensor, target: usize) -> Result<RelevanceMap> {
    RelevanceMap::from_input(logit_gradient(net, image, target)?, target, "gradient")
}

#[derive(Clone, Debug, PartialEq)]
pub struct SmoothGradConfig {
    pub samples: usize,
    /// Noise standard deviation as a fraction of the trial's value range.
    pub noise_sigma: f64,
    /// Square each gradient before averaging.
    pub squared: bool,
    pub seed: u64,
}

impl Default for SmoothGradConfig {
    fn default() -> Self {
        Self {
            samples: 25,
            noise_sigma: 0.1,
            squared: false,
            seed: 0,
        }
    }
}

impl SmoothGradConfig {
    pub fn validate(&self) -> Result<()> {
        if self.samples == 0 || !(self.noise_sigma >= 0.0) {
            return Err(Error::Config("smooth-grad needs samples >= 1 and noise_sigma >= 0".into()));
        }
        Ok(())
    }
}

/// Mean (or mean square) of gradients at Gaussian-perturbed copies of the input.
pub fn smooth_grad(net: &Network, image: &Tensor, target: usize, cfg: &SmoothGradConfig) -> Result<RelevanceMap> {
    cfg.validate()?;
    let sigma = cfg.noise_sigma * (image.max() - image.min());
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let noise = if sigma > 0.0 {
        Some(Normal::new(0.0, sigma).map_err(|e| Error::Numeric(e.to_string()))?)
    } else {
        None
    };
    let mut acc: Option<Tensor> = None;
    for _ in 0..cfg.samples {
        let x = match &noise {
            Some(n) => Tensor::new(image.shape(), image.data().iter().map(|v| v + n.sample(&mut rng)).collect())?,
            None => image.clone(),
        };
        let mut g = logit_gradient(net, &x, target)?;
        if cfg.squared {
            g = g.map(|v| v * v);
        }
        match &mut acc {
            None => acc = Some(g),
            Some(a) => a.add_scaled(&g, 1.0)?,
        }
    }
    let mut mean = acc.expect("samples >= 1");
    if cfg.samples > 1 {
        mean.scale(1.0 / cfg.samples as f64);
    }
    let tag = if cfg.squared { "smoothgrad2" } else { "smoothgrad" };
    RelevanceMap::from_input(mean, target, tag)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{LayerSpec, Params};
    use crate::model::{build_network, ArchitectureConfig};
    use crate::seed::rng_for;

    fn linear_net() -> Network {
        let w = Tensor::new(&[2, 3], vec![1.0, -2.0, 0.5, 3.0, 0.0, -1.0]).unwrap();
        Network::from_parts(
            &[3],
            &[LayerSpec::dense(2)],
            vec![Some(Params {
                weights: w,
                bias: Tensor::new(&[2], vec![0.1, -0.3]).unwrap(),
            })],
        )
        .unwrap()
    }

    #[test]
    fn linear_map_is_weight_row() {
        let m = gradient_saliency(&linear_net(), &Tensor::vector(vec![0.3, 1.0, -2.0]), 1).unwrap();
        assert_eq!(m.data.data(), &[3.0, 0.0, -1.0]);
        assert_eq!(m.data.shape(), &[1, 3]);
    }

    #[test]
    fn matches_central_differences() {
        let net = build_network(&ArchitectureConfig::desk(), 16, 128, &mut rng_for(5, &[])).unwrap();
        let mut rng = rng_for(6, &[]);
        let x = Tensor::new(&[1, 16, 128], (0..2048).map(|_| rand::Rng::random_range(&mut rng, -1.0..1.0)).collect()).unwrap();
        let g = gradient_saliency(&net, &x, 2).unwrap();
        let h = 1e-5;
        for idx in [0usize, 17, 300, 1025, 2047] {
            let mut xp = x.clone();
            xp.data_mut()[idx] += h;
            let mut xm = x.clone();
            xm.data_mut()[idx] -= h;
            let fd = (net.logits(&xp).unwrap().data()[2] - net.logits(&xm).unwrap().data()[2]) / (2.0 * h);
            let an = g.data.data()[idx];
            assert!((fd - an).abs() <= 1e-4 * an.abs().max(1e-6), "{idx}: {fd} vs {an}");
        }
    }

    #[test]
    fn zero_head_gives_zero_map() {
        let mut net = linear_net();
        net.layers_mut()[0].params.as_mut().unwrap().weights = Tensor::zeros(&[2, 3]);
        let m = gradient_saliency(&net, &Tensor::vector(vec![1.0, 2.0, 3.0]), 0).unwrap();
        assert!(m.data.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn degenerate_smooth_grad_is_gradient() {
        let net = build_network(&ArchitectureConfig::desk(), 16, 128, &mut rng_for(6, &[])).unwrap();
        let x = Tensor::from_fn(&[1, 16, 128], |i| (i as f64 * 0.01).sin());
        let cfg = SmoothGradConfig {
            samples: 1,
            noise_sigma: 0.0,
            ..Default::default()
        };
        let s = smooth_grad(&net, &x, 1, &cfg).unwrap();
        let g = gradient_saliency(&net, &x, 1).unwrap();
        let bits = |t: &Tensor| t.data().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&s.data), bits(&g.data));
    }

    #[test]
    fn squared_variant_is_nonnegative_and_seeded() {
        let net = build_network(&ArchitectureConfig::desk(), 16, 128, &mut rng_for(6, &[])).unwrap();
        let x = Tensor::from_fn(&[1, 16, 128], |i| (i as f64 * 0.01).cos());
        let cfg = SmoothGradConfig {
            samples: 4,
            squared: true,
            ..Default::default()
        };
        let a = smooth_grad(&net, &x, 0, &cfg).unwrap();
        assert!(a.data.data().iter().all(|&v| v >= 0.0));
        assert_eq!(a, smooth_grad(&net, &x, 0, &cfg).unwrap());
        assert_eq!(a.method, "smoothgrad2");
    }

    #[test]
    fn monte_carlo_mean_matches_expectation() {
        // f(x) = relu(x): the expected gradient under N(0, s^2) noise is Phi(x / s)
        // the second input is ignored by the weights; it only widens the
        // value range to 1 so that noise_sigma 0.5 is an absolute 0.5
        let net = Network::from_parts(
            &[2],
            &[LayerSpec::dense(1), LayerSpec::relu(), LayerSpec::dense(1)],
            vec![
                Some(Params { weights: Tensor::new(&[1, 2], vec![1.0, 0.0]).unwrap(), bias: Tensor::vector(vec![0.0]) }),
                None,
                Some(Params { weights: Tensor::new(&[1, 1], vec![1.0]).unwrap(), bias: Tensor::vector(vec![0.0]) }),
            ],
        )
        .unwrap();
        let x = Tensor::vector(vec![0.3, -0.7]);
        let cfg = SmoothGradConfig {
            samples: 100,
            noise_sigma: 0.5,
            squared: false,
            seed: 11,
        };
        let s = 0.5;
        let m = smooth_grad(&net, &x, 0, &cfg).unwrap();
        let p = phi(0.3 / s);
        let se = (p * (1.0 - p) / 100.0).sqrt();
        assert!((m.data.data()[0] - p).abs() < 3.0 * se, "{} vs {p}", m.data.data()[0]);
    }

    fn phi(z: f64) -> f64 {
        0.5 * (1.0 + erf(z / std::f64::consts::SQRT_2))
    }

    // Abramowitz-Stegun 7.1.26, ample for a 3-standard-error check
    fn erf(x: f64) -> f64 {
        let t = 1.0 / (1.0 + 0.3275911 * x.abs());
        let y = 1.0
            - (((((1.061405429 * t - 1.453152027) * t) + 1.421413741) * t - 0.284496736) * t + 0.254829592)
                * t
                * (-x * x).exp();
        y.copysign(x)
    }
}
