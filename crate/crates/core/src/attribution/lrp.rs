//! Layer-wise relevance propagation: epsilon rule on dense layers and the
//! alpha-beta rule on convolutions.

use super::gradient::one_hot;
use super::map::RelevanceMap;
use crate::error::{Error, Result};
use crate::nn::{LayerKind, Network};
use crate::tensor::Tensor;

#[derive(Clone, Debug, PartialEq)]
pub struct LrpConfig {
    pub epsilon: f64,
    pub alpha: f64,
    pub beta: f64,
    /// Layers that hand relevance through unchanged besides ReLU. Any other
    /// layer outside conv, pool, dense and ReLU is rejected.
    pub pass_through: Vec<LayerKind>,
}

impl Default for LrpConfig {
    /// Preset B: alpha 2, beta 1.
    fn default() -> Self {
        Self {
            epsilon: 1e-7,
            alpha: 2.0,
            beta: 1.0,
            pass_through: vec![LayerKind::Sigmoid, LayerKind::AmplitudeNorm, LayerKind::Dropout],
        }
    }
}

impl LrpConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0) {
            return Err(Error::Config("lrp epsilon must be positive".into()));
        }
        if !(self.beta >= 0.0) || ((self.alpha - self.beta) - 1.0).abs() > 1e-12 {
            return Err(Error::Config(format!(
                "lrp needs beta >= 0 and alpha - beta = 1, got alpha {} beta {}",
                self.alpha, self.beta
            )));
        }
        Ok(())
    }
}

/// `R_i = sum_j x_i w_ji R_j / (z_j + eps * sign(z_j))`, bias inside `z_j`.
fn dense_epsilon(x: &Tensor, w: &Tensor, b: &Tensor, r: &Tensor, eps: f64) -> Tensor {
    let n = x.len();
    let xs = x.data();
    let mut out = vec![0.0; n];
    for ((row, &bj), &rj) in w.data().chunks_exact(n).zip(b.data()).zip(r.data()) {
        if rj == 0.0 {
            continue;
        }
        let z: f64 = row.iter().zip(xs).map(|(w, x)| w * x).sum::<f64>() + bj;
        let denom = z + if z >= 0.0 { eps } else { -eps };
        let s = rj / denom;
        for ((o, &wv), &xv) in out.iter_mut().zip(row).zip(xs) {
            *o += xv * wv * s;
        }
    }
    Tensor::new(x.shape(), out).expect("input-shaped")
}

/// Alpha-beta redistribution over each output's receptive field, bias
/// excluded. When one side of an output's contributions is empty the other
/// side carries weight `alpha - beta` so that relevance is conserved.
fn conv_alpha_beta(x: &Tensor, w: &Tensor, stride: (usize, usize), r: &Tensor, alpha: f64, beta: f64) -> Tensor {
    let [c, h, wd] = *x.shape() else { unreachable!("validated conv input") };
    let [f, _, kh, kw] = *w.shape() else { unreachable!("validated conv weights") };
    let [_, oh, ow] = *r.shape() else { unreachable!("validated conv output") };
    let (xs, ws, rs) = (x.data(), w.data(), r.data());
    let mut out = vec![0.0; xs.len()];
    for fi in 0..f {
        let kernel = &ws[fi * c * kh * kw..(fi + 1) * c * kh * kw];
        for oy in 0..oh {
            for ox in 0..ow {
                let rj = rs[(fi * oh + oy) * ow + ox];
                if rj == 0.0 {
                    continue;
                }
                let field = |ci: usize, ki: usize, kj: usize| (ci * h + oy * stride.0 + ki) * wd + ox * stride.1 + kj;
                let (mut zp, mut zn) = (0.0, 0.0);
                for ci in 0..c {
                    for ki in 0..kh {
                        for kj in 0..kw {
                            let z = xs[field(ci, ki, kj)] * kernel[(ci * kh + ki) * kw + kj];
                            if z > 0.0 {
                                zp += z;
                            } else {
                                zn += z;
                            }
                        }
                    }
                }
                let (cp, cn) = match (zp > 0.0, zn < 0.0) {
                    (true, true) => (alpha * rj / zp, beta * rj / zn),
                    (true, false) => ((alpha - beta) * rj / zp, 0.0),
                    (false, true) => (0.0, -(alpha - beta) * rj / zn),
                    (false, false) => continue,
                };
                for ci in 0..c {
                    for ki in 0..kh {
                        for kj in 0..kw {
                            let idx = field(ci, ki, kj);
                            let z = xs[idx] * kernel[(ci * kh + ki) * kw + kj];
                            if z > 0.0 {
                                out[idx] += cp * z;
                            } else if z < 0.0 {
                                out[idx] -= cn * z;
                            }
                        }
                    }
                }
            }
        }
    }
    Tensor::new(x.shape(), out).expect("input-shaped")
}

/// Input relevance for `target`, starting from the target logit's value.
pub fn lrp(net: &Network, image: &Tensor, target: usize, cfg: &LrpConfig) -> Result<RelevanceMap> {
    cfg.validate()?;
    let n = net.logit_layer_count();
    for (i, layer) in net.layers()[..n].iter().enumerate() {
        let k = layer.spec.kind;
        let core = matches!(k, LayerKind::Conv2d | LayerKind::MaxPool2d | LayerKind::Dense | LayerKind::Relu);
        if !core && !cfg.pass_through.contains(&k) {
            return Err(Error::UnsupportedLayer {
                layer: i,
                kind: k.name().into(),
            });
        }
    }
    let pass = net.forward(image, None)?;
    let mut r = one_hot(net.class_count(), target, 0.0)?;
    r.data_mut()[target] = pass.logits.data()[target];
    for i in (0..n).rev() {
        let layer = &net.layers()[i];
        let cache = &pass.caches[i];
        let rl = r.reshape(&layer.output_shape)?;
        r = match layer.spec.kind {
            LayerKind::Dense => {
                let p = layer.params.as_ref().expect("weighted layer");
                dense_epsilon(&cache.input, &p.weights, &p.bias, &rl, cfg.epsilon)
            }
            LayerKind::Conv2d => {
                let p = layer.params.as_ref().expect("weighted layer");
                conv_alpha_beta(&cache.input, &p.weights, layer.spec.stride, &rl, cfg.alpha, cfg.beta)
            }
            LayerKind::MaxPool2d => crate::nn::ops::maxpool2d_backward(&cache.pool_argmax, &layer.input_shape, &rl)?,
            _ => rl.reshape(&layer.input_shape)?,
        };
    }
    let mut map = RelevanceMap::from_input(r, target, "lrp_b")?;
    if (cfg.alpha, cfg.beta) != (2.0, 1.0) {
        map.method = format!("lrp_a{}b{}", cfg.alpha, cfg.beta);
    }
    Ok(map)
}
