use rand::Rng;

use crate::error::{Error, Result};
use crate::nn::{LayerSpec, Network};

/// A stack of conv-pool blocks followed by a sigmoid FC layer, dropout and
/// a softmax head. Kernel and pool extents are given as `(time, channels)`.
#[derive(Clone, Debug, PartialEq)]
pub struct ArchitectureConfig {
    pub kernels: Vec<(usize, usize)>,
    pub filters: Vec<usize>,
    pub pools: Vec<(usize, usize)>,
    pub fc_units: usize,
    pub classes: usize,
    pub dropout_p: f64,
    /// Insert a per-feature-map amplitude normalization after each block.
    pub amplitude_norm: bool,
}

impl ArchitectureConfig {
    /// Full-size network for 30 x 752 trials.
    pub fn full_scale() -> Self {
        Self {
            kernels: vec![(100, 10), (20, 5), (10, 2)],
            filters: vec![32, 64, 128],
            pools: vec![(5, 2), (2, 2), (2, 2)],
            fc_units: 1024,
            classes: 4,
            dropout_p: 0.25,
            amplitude_norm: true,
        }
    }

    /// Scaled variant for 16 x 128 trials.
    pub fn desk() -> Self {
        Self {
            kernels: vec![(16, 4), (8, 2), (4, 2)],
            filters: vec![8, 16, 32],
            pools: vec![(2, 2), (2, 2), (2, 1)],
            fc_units: 64,
            classes: 4,
            dropout_p: 0.25,
            amplitude_norm: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.kernels.len();
        if n == 0 || self.filters.len() != n || self.pools.len() != n {
            return Err(Error::Config(format!(
                "architecture needs matching non-empty kernel, filter and pool lists (got {}, {}, {})",
                n,
                self.filters.len(),
                self.pools.len()
            )));
        }
        if self.classes < 2 {
            return Err(Error::Config("architecture needs at least 2 classes".into()));
        }
        Ok(())
    }

    /// Layer stack in image layout, where rows are channels and columns time.
    pub fn layer_specs(&self) -> Result<Vec<LayerSpec>> {
        self.validate()?;
        let mut specs = Vec::new();
        for ((&(kt, kc), &f), &(pt, pc)) in self.kernels.iter().zip(&self.filters).zip(&self.pools) {
            specs.push(LayerSpec::conv((kc, kt), f));
            specs.push(LayerSpec::relu());
            specs.push(LayerSpec::maxpool((pc, pt)));
            if self.amplitude_norm {
                specs.push(LayerSpec::amplitude_norm());
            }
        }
        specs.push(LayerSpec::dense(self.fc_units));
        specs.push(LayerSpec::sigmoid());
        specs.push(LayerSpec::dropout(self.dropout_p));
        specs.push(LayerSpec::dense(self.classes));
        specs.push(LayerSpec::softmax());
        Ok(specs)
    }

    /// Width of the flattened feature vector entering the FC layer.
    pub fn flatten_width(&self, channels: usize, samples: usize) -> Result<usize> {
        let specs = self.layer_specs()?;
        let trace = Network::trace(&[1, channels, samples], &specs)?;
        let fc = specs
            .iter()
            .position(|s| s.kind == crate::nn::LayerKind::Dense)
            .expect("FC layer present");
        Ok(trace[fc].0.iter().product())
    }
}

/// Builds the network for `channels x samples` trials with Glorot weights.
pub fn build_network(
    arch: &ArchitectureConfig,
    channels: usize,
    samples: usize,
    rng: &mut impl Rng,
) -> Result<Network> {
    Network::build(&[1, channels, samples], &arch.layer_specs()?, rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::LayerKind;
    use crate::tensor::Tensor;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn full_scale_trace_matches_hand_extents() {
        let arch = ArchitectureConfig::full_scale();
        let trace = Network::trace(&[1, 30, 752], &arch.layer_specs().unwrap()).unwrap();
        let conv_out: Vec<Vec<usize>> = arch
            .layer_specs()
            .unwrap()
            .iter()
            .zip(&trace)
            .filter(|(s, _)| matches!(s.kind, LayerKind::Conv2d | LayerKind::MaxPool2d))
            .map(|(_, (_, out))| out.clone())
            .collect();
        // rows are channels, columns time
        let expected = [
            [32, 21, 653],
            [32, 10, 130],
            [64, 6, 111],
            [64, 3, 55],
            [128, 2, 46],
            [128, 1, 23],
        ];
        for (got, want) in conv_out.iter().zip(expected) {
            assert_eq!(got.as_slice(), want.as_slice());
        }
        assert_eq!(arch.flatten_width(30, 752).unwrap(), 2944);
    }

    #[test]
    fn desk_network_builds_and_emits_class_vector() {
        let arch = ArchitectureConfig::desk();
        assert_eq!(arch.flatten_width(16, 128).unwrap(), 320);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let net = build_network(&arch, 16, 128, &mut rng).unwrap();
        let x = Tensor::from_fn(&[1, 16, 128], |i| (i as f64 * 0.37).sin());
        let p = net.probabilities(&x).unwrap();
        assert_eq!(p.shape(), &[4]);
        assert!((p.sum() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn oversized_kernel_is_a_build_error() {
        let mut arch = ArchitectureConfig::desk();
        arch.kernels[0] = (16, 20);
        let err = build_network(&arch, 16, 128, &mut ChaCha8Rng::seed_from_u64(0)).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("layer 0") && msg.contains("conv2d"), "{msg}");
    }
}
