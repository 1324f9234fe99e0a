//! Sequential layer graphs with cached forward passes.

use std::fmt;

use rand::{Rng, RngCore};

use super::ops;
use super::optim::{glorot_uniform, uniform_with_std};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Standard deviation of the uniform bias initializer.
pub const BIAS_INIT_STD: f64 = 0.1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum LayerKind {
    Conv2d,
    MaxPool2d,
    AmplitudeNorm,
    Dense,
    Relu,
    Sigmoid,
    Dropout,
    Softmax,
}

impl LayerKind {
    pub fn name(self) -> &'static str {
        match self {
            LayerKind::Conv2d => "conv2d",
            LayerKind::MaxPool2d => "maxpool2d",
            LayerKind::AmplitudeNorm => "amplitude_norm",
            LayerKind::Dense => "dense",
            LayerKind::Relu => "relu",
            LayerKind::Sigmoid => "sigmoid",
            LayerKind::Dropout => "dropout",
            LayerKind::Softmax => "softmax",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Some(match name {
            "conv2d" => LayerKind::Conv2d,
            "maxpool2d" => LayerKind::MaxPool2d,
            "amplitude_norm" => LayerKind::AmplitudeNorm,
            "dense" => LayerKind::Dense,
            "relu" => LayerKind::Relu,
            "sigmoid" => LayerKind::Sigmoid,
            "dropout" => LayerKind::Dropout,
            "softmax" => LayerKind::Softmax,
            _ => return None,
        })
    }

    pub fn has_params(self) -> bool {
        matches!(self, LayerKind::Conv2d | LayerKind::Dense)
    }
}

impl fmt::Display for LayerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Parameter-free description of one layer. `kernel` is `(rows, cols)` of
/// the image layout; for dense layers `filters` is the unit count.
#[derive(Clone, Debug, PartialEq)]
pub struct LayerSpec {
    pub kind: LayerKind,
    pub kernel: (usize, usize),
    pub filters: usize,
    pub stride: (usize, usize),
    pub dropout_p: f64,
}

impl LayerSpec {
    fn plain(kind: LayerKind) -> Self {
        Self {
            kind,
            kernel: (1, 1),
            filters: 0,
            stride: (1, 1),
            dropout_p: 0.0,
        }
    }

    pub fn conv(kernel: (usize, usize), filters: usize) -> Self {
        Self {
            kernel,
            filters,
            ..Self::plain(LayerKind::Conv2d)
        }
    }

    pub fn conv_strided(kernel: (usize, usize), filters: usize, stride: (usize, usize)) -> Self {
        Self {
            stride,
            ..Self::conv(kernel, filters)
        }
    }

    pub fn maxpool(window: (usize, usize)) -> Self {
        Self {
            kernel: window,
            stride: window,
            ..Self::plain(LayerKind::MaxPool2d)
        }
    }

    pub fn dense(units: usize) -> Self {
        Self {
            filters: units,
            ..Self::plain(LayerKind::Dense)
        }
    }

    pub fn dropout(p: f64) -> Self {
        Self {
            dropout_p: p,
            ..Self::plain(LayerKind::Dropout)
        }
    }

    pub fn relu() -> Self {
        Self::plain(LayerKind::Relu)
    }

    pub fn sigmoid() -> Self {
        Self::plain(LayerKind::Sigmoid)
    }

    pub fn amplitude_norm() -> Self {
        Self::plain(LayerKind::AmplitudeNorm)
    }

    pub fn softmax() -> Self {
        Self::plain(LayerKind::Softmax)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Params {
    pub weights: Tensor,
    pub bias: Tensor,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Layer {
    pub spec: LayerSpec,
    pub params: Option<Params>,
    pub input_shape: Vec<usize>,
    pub output_shape: Vec<usize>,
}

/// Per-layer state recorded by a cached forward pass.
#[derive(Clone, Debug)]
pub struct LayerCache {
    pub input: Tensor,
    pub output: Tensor,
    pub pool_argmax: Vec<usize>,
    pub norm_pivots: Vec<Option<usize>>,
    pub dropout_mask: Option<Vec<f64>>,
}

/// Result of a forward pass that kept every layer's cache.
#[derive(Clone, Debug)]
pub struct ForwardPass {
    pub caches: Vec<LayerCache>,
    pub logits: Tensor,
}

#[derive(Clone, Debug)]
pub struct Gradients {
    /// Aligned with [`Network::params`].
    pub params: Vec<Tensor>,
    pub input: Tensor,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Network {
    input_shape: Vec<usize>,
    layers: Vec<Layer>,
    class_count: usize,
}

fn build_err(layer: usize, kind: LayerKind, reason: impl Into<String>) -> Error {
    Error::Build {
        layer,
        kind: kind.name().into(),
        reason: reason.into(),
    }
}

/// Output shape of `spec` applied to `input`, or the reason it cannot apply.
fn trace_shape(spec: &LayerSpec, input: &[usize]) -> std::result::Result<Vec<usize>, String> {
    let as_image = || match *input {
        [c, h, w] => Ok((c, h, w)),
        _ => Err(format!("needs a [channels, rows, cols] input, got {input:?}")),
    };
    match spec.kind {
        LayerKind::Conv2d => {
            let (_, h, w) = as_image()?;
            let (kh, kw) = spec.kernel;
            if spec.filters == 0 {
                return Err("filter count must be positive".into());
            }
            if spec.stride.0 == 0 || spec.stride.1 == 0 {
                return Err("stride must be at least 1".into());
            }
            match (
                ops::sweep_extent(h, kh, spec.stride.0),
                ops::sweep_extent(w, kw, spec.stride.1),
            ) {
                (Some(oh), Some(ow)) => Ok(vec![spec.filters, oh, ow]),
                _ => Err(format!("kernel {kh}x{kw} does not fit input {h}x{w}")),
            }
        }
        LayerKind::MaxPool2d => {
            let (c, h, w) = as_image()?;
            let (ph, pw) = spec.kernel;
            match (ops::sweep_extent(h, ph, ph), ops::sweep_extent(w, pw, pw)) {
                (Some(oh), Some(ow)) => Ok(vec![c, oh, ow]),
                _ => Err(format!("window {ph}x{pw} does not fit input {h}x{w}")),
            }
        }
        LayerKind::AmplitudeNorm => as_image().map(|_| input.to_vec()),
        LayerKind::Dense => {
            if spec.filters == 0 {
                Err("unit count must be positive".into())
            } else {
                Ok(vec![spec.filters])
            }
        }
        LayerKind::Dropout => {
            if (0.0..1.0).contains(&spec.dropout_p) {
                Ok(input.to_vec())
            } else {
                Err(format!("dropout p {} outside [0, 1)", spec.dropout_p))
            }
        }
        LayerKind::Relu | LayerKind::Sigmoid | LayerKind::Softmax => Ok(input.to_vec()),
    }
}

fn weight_shape(spec: &LayerSpec, input: &[usize]) -> Vec<usize> {
    match spec.kind {
        LayerKind::Conv2d => vec![spec.filters, input[0], spec.kernel.0, spec.kernel.1],
        LayerKind::Dense => vec![spec.filters, input.iter().product()],
        _ => unreachable!("parameter-free layer"),
    }
}

impl Network {
    /// Builds a network with Glorot-uniform weights and uniform biases
    /// (zero mean, standard deviation [`BIAS_INIT_STD`]).
    pub fn build(input_shape: &[usize], specs: &[LayerSpec], rng: &mut impl Rng) -> Result<Self> {
        let shapes = Self::trace(input_shape, specs)?;
        let mut params = Vec::with_capacity(specs.len());
        for (spec, shape) in specs.iter().zip(&shapes) {
            if spec.kind.has_params() {
                let ws = weight_shape(spec, &shape.0);
                let weights = glorot_uniform(&ws, rng)?;
                let bias = uniform_with_std(&[ws[0]], BIAS_INIT_STD, rng);
                params.push(Some(Params { weights, bias }));
            } else {
                params.push(None);
            }
        }
        Self::from_parts(input_shape, specs, params)
    }

    /// Assembles a network from explicit parameters, validating every shape.
    pub fn from_parts(
        input_shape: &[usize],
        specs: &[LayerSpec],
        params: Vec<Option<Params>>,
    ) -> Result<Self> {
        if params.len() != specs.len() {
            return Err(Error::Usage(format!(
                "{} layer specs but {} parameter slots",
                specs.len(),
                params.len()
            )));
        }
        let shapes = Self::trace(input_shape, specs)?;
        let mut layers = Vec::with_capacity(specs.len());
        for (i, ((spec, (inp, out)), p)) in specs.iter().zip(shapes).zip(params).enumerate() {
            match (&p, spec.kind.has_params()) {
                (Some(p), true) => {
                    let ws = weight_shape(spec, &inp);
                    if p.weights.shape() != ws.as_slice() || p.bias.shape() != [ws[0]] {
                        return Err(build_err(
                            i,
                            spec.kind,
                            format!(
                                "expected weights {ws:?} and bias [{}], got {:?} and {:?}",
                                ws[0],
                                p.weights.shape(),
                                p.bias.shape()
                            ),
                        ));
                    }
                }
                (None, false) => {}
                (None, true) => return Err(build_err(i, spec.kind, "missing parameters")),
                (Some(_), false) => {
                    return Err(build_err(i, spec.kind, "layer takes no parameters"))
                }
            }
            layers.push(Layer {
                spec: spec.clone(),
                params: p,
                input_shape: inp,
                output_shape: out,
            });
        }
        let class_count = layers
            .iter()
            .rev()
            .find(|l| l.spec.kind != LayerKind::Softmax)
            .map(|l| l.output_shape.iter().product())
            .unwrap_or_else(|| input_shape.iter().product());
        Ok(Self {
            input_shape: input_shape.to_vec(),
            layers,
            class_count,
        })
    }

    /// Input/output shape of every layer, or an error naming the first
    /// layer whose extents do not fit.
    pub fn trace(input_shape: &[usize], specs: &[LayerSpec]) -> Result<Vec<(Vec<usize>, Vec<usize>)>> {
        if input_shape.is_empty() || input_shape.iter().any(|&d| d == 0) {
            return Err(Error::Shape(format!("invalid input shape {input_shape:?}")));
        }
        let mut current = input_shape.to_vec();
        let mut shapes = Vec::with_capacity(specs.len());
        for (i, spec) in specs.iter().enumerate() {
            if spec.kind == LayerKind::Softmax && i + 1 != specs.len() {
                return Err(build_err(i, spec.kind, "softmax must be the final layer"));
            }
            let out = trace_shape(spec, &current)
                .map_err(|reason| build_err(i, spec.kind, format!("{reason} (input {current:?})")))?;
            shapes.push((current, out.clone()));
            current = out;
        }
        Ok(shapes)
    }

    pub fn input_shape(&self) -> &[usize] {
        &self.input_shape
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Layer] {
        &mut self.layers
    }

    pub fn class_count(&self) -> usize {
        self.class_count
    }

    pub fn specs(&self) -> Vec<LayerSpec> {
        self.layers.iter().map(|l| l.spec.clone()).collect()
    }

    /// Layers up to (excluding) a trailing softmax.
    fn logit_layers(&self) -> usize {
        match self.layers.last() {
            Some(l) if l.spec.kind == LayerKind::Softmax => self.layers.len() - 1,
            _ => self.layers.len(),
        }
    }

    /// Index range producing logits.
    pub fn logit_layer_count(&self) -> usize {
        self.logit_layers()
    }

    /// Weights then bias of every parameterized layer, in layer order.
    pub fn params(&self) -> Vec<&Tensor> {
        self.layers
            .iter()
            .filter_map(|l| l.params.as_ref())
            .flat_map(|p| [&p.weights, &p.bias])
            .collect()
    }

    pub fn params_mut(&mut self) -> Vec<&mut Tensor> {
        self.layers
            .iter_mut()
            .filter_map(|l| l.params.as_mut())
            .flat_map(|p| [&mut p.weights, &mut p.bias])
            .collect()
    }

    pub fn is_finite(&self) -> bool {
        self.params().iter().all(|p| p.is_finite())
    }

    fn check_input(&self, x: &Tensor) -> Result<()> {
        if x.shape() != self.input_shape.as_slice() {
            return Err(Error::Usage(format!(
                "input shape {:?} does not match network input {:?}",
                x.shape(),
                self.input_shape
            )));
        }
        Ok(())
    }

    /// Evaluation-mode logits (dropout disabled, no caches kept).
    pub fn logits(&self, x: &Tensor) -> Result<Tensor> {
        Ok(self.forward(x, None)?.logits)
    }

    pub fn probabilities(&self, x: &Tensor) -> Result<Tensor> {
        Ok(ops::softmax(&self.logits(x)?))
    }

    /// Forward pass keeping per-layer caches. Passing a random source
    /// enables training-mode dropout with inverted scaling.
    pub fn forward(&self, x: &Tensor, mut dropout_rng: Option<&mut dyn RngCore>) -> Result<ForwardPass> {
        self.check_input(x)?;
        let n = self.logit_layers();
        let mut caches = Vec::with_capacity(n);
        let mut current = x.clone();
        for layer in &self.layers[..n] {
            let mut cache = LayerCache {
                input: current,
                output: Tensor::zeros(&[1]),
                pool_argmax: Vec::new(),
                norm_pivots: Vec::new(),
                dropout_mask: None,
            };
            let input = &cache.input;
            let output = match layer.spec.kind {
                LayerKind::Conv2d => {
                    let p = layer.params.as_ref().expect("validated");
                    ops::conv2d_forward(input, &p.weights, &p.bias, layer.spec.stride)?
                }
                LayerKind::MaxPool2d => {
                    let (out, argmax) = ops::maxpool2d_forward(input, layer.spec.kernel)?;
                    cache.pool_argmax = argmax;
                    out
                }
                LayerKind::AmplitudeNorm => {
                    let (out, pivots) = ops::amplitude_norm_forward(input)?;
                    cache.norm_pivots = pivots;
                    out
                }
                LayerKind::Dense => {
                    let p = layer.params.as_ref().expect("validated");
                    ops::dense_forward(input, &p.weights, &p.bias)?
                }
                LayerKind::Relu => ops::relu(input),
                LayerKind::Sigmoid => ops::sigmoid(input),
                LayerKind::Dropout => match dropout_rng.as_deref_mut() {
                    Some(rng) if layer.spec.dropout_p > 0.0 => {
                        let keep = 1.0 - layer.spec.dropout_p;
                        let mask: Vec<f64> = (0..input.len())
                            .map(|_| if rng.random::<f64>() < keep { 1.0 / keep } else { 0.0 })
                            .collect();
                        let mut out = input.clone();
                        for (v, m) in out.data_mut().iter_mut().zip(&mask) {
                            *v *= m;
                        }
                        cache.dropout_mask = Some(mask);
                        out
                    }
                    _ => input.clone(),
                },
                LayerKind::Softmax => unreachable!("softmax only as trailing layer"),
            };
            cache.output = output.clone();
            current = output;
            caches.push(cache);
        }
        let logits = current.reshape(&[self.class_count])?;
        Ok(ForwardPass { caches, logits })
    }

    fn check_pass(&self, pass: &ForwardPass, grad_logits: &Tensor) -> Result<()> {
        if pass.caches.len() != self.logit_layers() {
            return Err(Error::Usage(format!(
                "forward cache holds {} layers, network has {}",
                pass.caches.len(),
                self.logit_layers()
            )));
        }
        if grad_logits.len() != self.class_count {
            return Err(Error::Shape(format!(
                "upstream gradient has {} entries for {} outputs",
                grad_logits.len(),
                self.class_count
            )));
        }
        Ok(())
    }

    /// Backward through a parameter-free layer, or through a weighted
    /// layer's input path using `weights`.
    fn backward_layer_input(
        &self,
        index: usize,
        cache: &LayerCache,
        grad: &Tensor,
        weights: Option<&Tensor>,
    ) -> Result<Tensor> {
        let layer = &self.layers[index];
        let grad = if grad.shape() == layer.output_shape.as_slice() {
            grad.clone()
        } else {
            grad.clone().reshape(&layer.output_shape)?
        };
        match layer.spec.kind {
            LayerKind::Conv2d => ops::conv2d_backward_input(
                weights.expect("weighted layer"),
                layer.spec.stride,
                &grad,
                &layer.input_shape,
            ),
            LayerKind::Dense => {
                ops::dense_backward_input(weights.expect("weighted layer"), &grad, &layer.input_shape)
            }
            LayerKind::MaxPool2d => {
                ops::maxpool2d_backward(&cache.pool_argmax, &layer.input_shape, &grad)
            }
            LayerKind::AmplitudeNorm => {
                ops::amplitude_norm_backward(&cache.input, &cache.norm_pivots, &grad)
            }
            LayerKind::Relu => ops::relu_backward(&cache.input, &grad),
            LayerKind::Sigmoid => ops::sigmoid_backward(&cache.output, &grad),
            LayerKind::Dropout => match &cache.dropout_mask {
                Some(mask) => {
                    let mut g = grad;
                    for (v, m) in g.data_mut().iter_mut().zip(mask) {
                        *v *= m;
                    }
                    Ok(g)
                }
                None => Ok(grad),
            },
            LayerKind::Softmax => Err(Error::UnsupportedLayer {
                layer: index,
                kind: layer.spec.kind.name().into(),
            }),
        }
    }

    /// Full backward pass: parameter gradients and the input gradient.
    pub fn backward(&self, pass: &ForwardPass, grad_logits: &Tensor) -> Result<Gradients> {
        self.backward_impl(pass, grad_logits, true)
    }

    /// Parameter gradients only; skips the input gradient of the first
    /// layer. `Gradients::input` is then the gradient at layer 1's input.
    pub fn param_gradients(&self, pass: &ForwardPass, grad_logits: &Tensor) -> Result<Vec<Tensor>> {
        Ok(self.backward_impl(pass, grad_logits, false)?.params)
    }

    fn backward_impl(&self, pass: &ForwardPass, grad_logits: &Tensor, full: bool) -> Result<Gradients> {
        self.check_pass(pass, grad_logits)?;
        let mut grad = grad_logits.clone();
        let mut param_grads: Vec<Tensor> = Vec::new();
        for i in (0..pass.caches.len()).rev() {
            let cache = &pass.caches[i];
            let layer = &self.layers[i];
            match (&layer.params, layer.spec.kind) {
                (Some(p), LayerKind::Conv2d) if i == 0 && !full => {
                    let g = grad.clone().reshape(&layer.output_shape)?;
                    let (gw, gb) = ops::conv2d_backward_params(&cache.input, &p.weights, layer.spec.stride, &g)?;
                    param_grads.push(gb);
                    param_grads.push(gw);
                }
                (Some(p), LayerKind::Conv2d) => {
                    let g = grad.clone().reshape(&layer.output_shape)?;
                    let r = ops::conv2d_backward(&cache.input, &p.weights, layer.spec.stride, &g)?;
                    param_grads.push(r.bias);
                    param_grads.push(r.weights);
                    grad = r.input;
                }
                (Some(p), LayerKind::Dense) => {
                    let g = grad.clone().reshape(&layer.output_shape)?;
                    let r = ops::dense_backward(&cache.input, &p.weights, &g)?;
                    param_grads.push(r.bias);
                    param_grads.push(r.weights);
                    grad = r.input;
                }
                _ => grad = self.backward_layer_input(i, cache, &grad, None)?,
            }
        }
        param_grads.reverse();
        Ok(Gradients {
            params: param_grads,
            input: grad,
        })
    }

    /// Input-only backward pass in which weighted layer `i` uses
    /// `substitute(i)` in place of its own weights. All gates (ReLU,
    /// pooling winners, normalization pivots) come from the forward pass.
    pub fn backward_input_with<'a>(
        &'a self,
        pass: &ForwardPass,
        grad_logits: &Tensor,
        substitute: impl Fn(usize) -> Result<&'a Tensor>,
    ) -> Result<Tensor> {
        self.check_pass(pass, grad_logits)?;
        let mut grad = grad_logits.clone();
        for i in (0..pass.caches.len()).rev() {
            let weights = if self.layers[i].spec.kind.has_params() {
                Some(substitute(i)?)
            } else {
                None
            };
            grad = self.backward_layer_input(i, &pass.caches[i], &grad, weights)?;
        }
        Ok(grad)
    }

    /// Gradient of the logits, contracted with `grad_logits`, with
    /// respect to the input.
    pub fn input_gradient(&self, pass: &ForwardPass, grad_logits: &Tensor) -> Result<Tensor> {
        self.backward_input_with(pass, grad_logits, |i| {
            Ok(&self.layers[i].params.as_ref().expect("weighted layer").weights)
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::ops::softmax_cross_entropy;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn small_specs() -> Vec<LayerSpec> {
        vec![
            LayerSpec::conv((2, 3), 3),
            LayerSpec::relu(),
            LayerSpec::maxpool((2, 2)),
            LayerSpec::amplitude_norm(),
            LayerSpec::conv_strided((2, 2), 2, (1, 2)),
            LayerSpec::relu(),
            LayerSpec::dense(5),
            LayerSpec::sigmoid(),
            LayerSpec::dropout(0.25),
            LayerSpec::dense(3),
            LayerSpec::softmax(),
        ]
    }

    #[test]
    fn trace_reports_failing_layer() {
        let specs = vec![LayerSpec::conv((2, 2), 1), LayerSpec::conv((5, 1), 1)];
        match Network::trace(&[1, 4, 4], &specs) {
            Err(Error::Build { layer, kind, .. }) => {
                assert_eq!(layer, 1);
                assert_eq!(kind, "conv2d");
            }
            other => panic!("unexpected {other:?}"),
        }
        let bad_softmax = vec![LayerSpec::softmax(), LayerSpec::dense(2)];
        assert!(Network::trace(&[4], &bad_softmax).is_err());
    }

    #[test]
    fn build_and_forward_shapes() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let net = Network::build(&[2, 7, 9], &small_specs(), &mut rng).unwrap();
        assert_eq!(net.class_count(), 3);
        let x = Tensor::from_fn(&[2, 7, 9], |i| (i as f64 * 0.37).sin());
        let p = net.probabilities(&x).unwrap();
        assert!((p.sum() - 1.0).abs() < 1e-12);
        assert!(net.logits(&Tensor::zeros(&[2, 7, 8])).is_err());
    }

    #[test]
    fn backward_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let net = Network::build(&[2, 7, 9], &small_specs(), &mut rng).unwrap();
        let x = Tensor::from_fn(&[2, 7, 9], |_| rng.random_range(-1.0..1.0));
        let label = 1;
        let loss = |n: &Network, x: &Tensor| {
            softmax_cross_entropy(&n.logits(x).unwrap(), label).unwrap().loss
        };
        let pass = net.forward(&x, None).unwrap();
        let ce = softmax_cross_entropy(&pass.logits, label).unwrap();
        let grads = net.backward(&pass, &ce.grad_logits).unwrap();
        let h = 1e-5;
        let rel = |a: f64, b: f64| (a - b).abs() / a.abs().max(b.abs()).max(1e-6);

        for i in 0..x.len() {
            let mut up = x.clone();
            up.data_mut()[i] += h;
            let mut dn = x.clone();
            dn.data_mut()[i] -= h;
            let fd = (loss(&net, &up) - loss(&net, &dn)) / (2.0 * h);
            assert!(rel(grads.input.data()[i], fd) < 1e-4, "input {i}");
        }
        let n_params = net.params().len();
        for p in 0..n_params {
            for j in 0..net.params()[p].len() {
                let mut up = net.clone();
                up.params_mut()[p].data_mut()[j] += h;
                let mut dn = net.clone();
                dn.params_mut()[p].data_mut()[j] -= h;
                let fd = (loss(&up, &x) - loss(&dn, &x)) / (2.0 * h);
                assert!(rel(grads.params[p].data()[j], fd) < 1e-4, "param {p}[{j}]");
            }
        }
    }

    #[test]
    fn dropout_only_in_training_mode() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let specs = vec![LayerSpec::dropout(0.5)];
        let net = Network::build(&[1000], &specs, &mut rng).unwrap();
        let x = Tensor::filled(&[1000], 1.0);
        assert_eq!(net.logits(&x).unwrap(), x);
        let train = net.forward(&x, Some(&mut rng)).unwrap().logits;
        assert!(train.data().iter().all(|&v| v == 0.0 || v == 2.0));
        let kept = train.data().iter().filter(|&&v| v > 0.0).count();
        assert!((400..600).contains(&kept));
    }

    #[test]
    fn mismatched_pass_is_usage_error() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let a = Network::build(&[4], &[LayerSpec::dense(2)], &mut rng).unwrap();
        let b = Network::build(&[4], &[LayerSpec::dense(3), LayerSpec::dense(2)], &mut rng).unwrap();
        let pass = a.forward(&Tensor::zeros(&[4]), None).unwrap();
        assert!(matches!(
            b.backward(&pass, &Tensor::zeros(&[2])),
            Err(Error::Usage(_))
        ));
    }
}
