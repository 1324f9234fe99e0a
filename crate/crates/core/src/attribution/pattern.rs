//! Signal-pattern estimation and the two pattern-based attributions.

use log::warn;

use super::gradient::one_hot;
use super::map::RelevanceMap;
use crate::error::{Error, Result};
use crate::nn::{LayerKind, Network};
use crate::tensor::Tensor;

/// Which samples enter a neuron's statistics.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PatternRegime {
    /// For layers feeding a ReLU, only samples where the neuron's output is
    /// positive; other layers use every sample.
    Positive,
    /// Every sample, for every layer.
    Linear,
}

/// One pattern per weighted layer, congruent with its weights.
#[derive(Clone, Debug, PartialEq)]
pub struct PatternSet {
    /// Aligned with the network's layers; `None` for parameter-free layers.
    pub patterns: Vec<Option<Tensor>>,
    /// Per weighted layer, how many samples each neuron's statistics used.
    pub active_counts: Vec<Option<Vec<u64>>>,
    /// Neurons whose variance term fell below 1e-12 (pattern set to 0).
    pub degenerate: usize,
}

impl PatternSet {
    fn shaped_like(net: &Network, f: impl Fn(&Tensor) -> Tensor) -> Self {
        let patterns: Vec<Option<Tensor>> = net
            .layers()
            .iter()
            .map(|l| l.params.as_ref().map(|p| f(&p.weights)))
            .collect();
        Self {
            active_counts: patterns.iter().map(|_| None).collect(),
            patterns,
            degenerate: 0,
        }
    }

    /// Patterns equal to the weights.
    pub fn from_weights(net: &Network) -> Self {
        Self::shaped_like(net, Tensor::clone)
    }

    pub fn constant(net: &Network, value: f64) -> Self {
        Self::shaped_like(net, |w| Tensor::filled(w.shape(), value))
    }

    fn check(&self, net: &Network) -> Result<()> {
        for (i, layer) in net.layers()[..net.logit_layer_count()].iter().enumerate() {
            if let Some(p) = &layer.params {
                match self.patterns.get(i).and_then(Option::as_ref) {
                    Some(a) if a.shape() == p.weights.shape() => {}
                    Some(a) => {
                        return Err(Error::Usage(format!(
                            "pattern for layer {i} has shape {:?}, weights {:?}",
                            a.shape(),
                            p.weights.shape()
                        )))
                    }
                    None => return Err(Error::Usage(format!("no pattern for weighted layer {i} ({})", layer.spec.kind))),
                }
            }
        }
        Ok(())
    }
}

struct NeuronStats {
    dim: usize,
    count: Vec<u64>,
    sum_x: Vec<f64>,
    sum_y: Vec<f64>,
    sum_xy: Vec<f64>,
}

impl NeuronStats {
    fn new(neurons: usize, dim: usize) -> Self {
        Self {
            dim,
            count: vec![0; neurons],
            sum_x: vec![0.0; neurons * dim],
            sum_y: vec![0.0; neurons],
            sum_xy: vec![0.0; neurons * dim],
        }
    }

    fn add(&mut self, j: usize, x: &[f64], y: f64) {
        self.count[j] += 1;
        self.sum_y[j] += y;
        let d = self.dim;
        for ((sx, sxy), &v) in self.sum_x[j * d..(j + 1) * d]
            .iter_mut()
            .zip(&mut self.sum_xy[j * d..(j + 1) * d])
            .zip(x)
        {
            *sx += v;
            *sxy += v * y;
        }
    }

    /// `a = (E[xy] - E[x]E[y]) / (w'E[xy] - w'E[x]E[y])` per neuron.
    fn patterns(&self, weights: &Tensor, degenerate: &mut usize) -> Tensor {
        let d = self.dim;
        let mut out = vec![0.0; weights.len()];
        for (j, w) in weights.data().chunks_exact(d).enumerate() {
            let n = self.count[j];
            if n == 0 {
                continue;
            }
            let inv = 1.0 / n as f64;
            let ey = self.sum_y[j] * inv;
            let cov: Vec<f64> = self.sum_xy[j * d..(j + 1) * d]
                .iter()
                .zip(&self.sum_x[j * d..(j + 1) * d])
                .map(|(sxy, sx)| sxy * inv - sx * inv * ey)
                .collect();
            let denom: f64 = w.iter().zip(&cov).map(|(a, b)| a * b).sum();
            if denom.abs() < 1e-12 {
                *degenerate += 1;
                continue;
            }
            for (o, c) in out[j * d..(j + 1) * d].iter_mut().zip(&cov) {
                *o = c / denom;
            }
        }
        Tensor::new(weights.shape(), out).expect("weight-shaped")
    }
}

/// Estimates patterns from the network's activations on `images`.
pub fn estimate_patterns(net: &Network, images: &[&Tensor], regime: PatternRegime) -> Result<PatternSet> {
    if images.len() < 2 {
        return Err(Error::Usage(format!("pattern estimation needs at least 2 inputs, got {}", images.len())));
    }
    let n = net.logit_layer_count();
    let layers = net.layers();
    let mut stats: Vec<Option<NeuronStats>> = layers
        .iter()
        .map(|l| {
            l.params.as_ref().map(|p| {
                let s = p.weights.shape();
                NeuronStats::new(s[0], s[1..].iter().product())
            })
        })
        .collect();
    let gated: Vec<bool> = (0..layers.len())
        .map(|i| regime == PatternRegime::Positive && layers.get(i + 1).is_some_and(|l| l.spec.kind == LayerKind::Relu))
        .collect();
    for image in images {
        let pass = net.forward(image, None)?;
        for i in 0..n {
            let (Some(st), Some(p)) = (stats[i].as_mut(), layers[i].params.as_ref()) else {
                continue;
            };
            let cache = &pass.caches[i];
            let (w, b) = (p.weights.data(), p.bias.data());
            match layers[i].spec.kind {
                LayerKind::Dense => {
                    let x = cache.input.data();
                    for (j, row) in w.chunks_exact(st.dim).enumerate() {
                        let y: f64 = row.iter().zip(x).map(|(a, b)| a * b).sum();
                        if !gated[i] || y + b[j] > 0.0 {
                            st.add(j, x, y);
                        }
                    }
                }
                LayerKind::Conv2d => {
                    let [c, h, wd] = *cache.input.shape() else { unreachable!("conv input") };
                    let [f, _, kh, kw] = *p.weights.shape() else { unreachable!("conv weights") };
                    let [_, oh, ow] = *cache.output.shape() else { unreachable!("conv output") };
                    let (sr, sc) = layers[i].spec.stride;
                    let xs = cache.input.data();
                    let mut patch = vec![0.0; c * kh * kw];
                    for oy in 0..oh {
                        for ox in 0..ow {
                            for ci in 0..c {
                                for ki in 0..kh {
                                    let row = (ci * h + oy * sr + ki) * wd + ox * sc;
                                    for kj in 0..kw {
                                        patch[(ci * kh + ki) * kw + kj] = xs[row + kj];
                                    }
                                }
                            }
                            for fi in 0..f {
                                let z = cache.output.data()[(fi * oh + oy) * ow + ox];
                                if !gated[i] || z > 0.0 {
                                    let kernel = &w[fi * st.dim..(fi + 1) * st.dim];
                                    let y: f64 = kernel.iter().zip(&patch).map(|(a, b)| a * b).sum();
                                    st.add(fi, &patch, y);
                                }
                            }
                        }
                    }
                }
                _ => {}
            }
        }
    }
    let mut degenerate = 0;
    let mut patterns = Vec::with_capacity(layers.len());
    let mut active_counts = Vec::with_capacity(layers.len());
    for (layer, st) in layers.iter().zip(&stats) {
        match (layer.params.as_ref(), st) {
            (Some(p), Some(st)) => {
                patterns.push(Some(st.patterns(&p.weights, &mut degenerate)));
                active_counts.push(Some(st.count.clone()));
            }
            _ => {
                patterns.push(None);
                active_counts.push(None);
            }
        }
    }
    if degenerate > 0 {
        warn!("{degenerate} neurons had a vanishing variance term; their patterns are zero");
    }
    Ok(PatternSet {
        patterns,
        active_counts,
        degenerate,
    })
}

/// Gradient-style backward pass with each layer's weights replaced by its pattern.
pub fn patternnet(net: &Network, patterns: &PatternSet, image: &Tensor, target: usize) -> Result<RelevanceMap> {
    patterns.check(net)?;
    let pass = net.forward(image, None)?;
    let seed = one_hot(net.class_count(), target, 1.0)?;
    let r = net.backward_input_with(&pass, &seed, |i| {
        patterns.patterns[i].as_ref().ok_or_else(|| Error::Usage(format!("no pattern for layer {i}")))
    })?;
    RelevanceMap::from_input(r, target, "patternnet")
}

/// As [`patternnet`] with weights replaced by `weights * pattern` elementwise.
pub fn pattern_attribution(net: &Network, patterns: &PatternSet, image: &Tensor, target: usize) -> Result<RelevanceMap> {
    patterns.check(net)?;
    let products: Vec<Option<Tensor>> = net
        .layers()
        .iter()
        .zip(&patterns.patterns)
        .map(|(l, a)| match (&l.params, a) {
            (Some(p), Some(a)) => p.weights.zip_map(a, |w, a| w * a).map(Some),
            _ => Ok(None),
        })
        .collect::<Result<_>>()?;
    let pass = net.forward(image, None)?;
    let seed = one_hot(net.class_count(), target, 1.0)?;
    let r = net.backward_input_with(&pass, &seed, |i| {
        products[i].as_ref().ok_or_else(|| Error::Usage(format!("no pattern for layer {i}")))
    })?;
    RelevanceMap::from_input(r, target, "patternattr")
}
