//! Layer primitives with explicit forward and backward passes.
//!
//! Image tensors are `[channels, rows, cols]`; convolution kernels are
//! `[filters, channels, rows, cols]`. Convolutions are valid
//! cross-correlations (no padding).

use crate::error::{Error, Result};
use crate::tensor::Tensor;

fn dims3(t: &Tensor, what: &str) -> Result<(usize, usize, usize)> {
    match *t.shape() {
        [c, h, w] => Ok((c, h, w)),
        ref s => Err(Error::Shape(format!("{what} must be rank 3, got {s:?}"))),
    }
}

fn dims4(t: &Tensor, what: &str) -> Result<(usize, usize, usize, usize)> {
    match *t.shape() {
        [f, c, h, w] => Ok((f, c, h, w)),
        ref s => Err(Error::Shape(format!("{what} must be rank 4, got {s:?}"))),
    }
}

/// Dot product with four interleaved accumulators, which lets the compiler
/// vectorize; summation order is fixed, so results are reproducible.
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [0.0; 4];
    let (ca, cb) = (a.chunks_exact(4), b.chunks_exact(4));
    let tail: f64 = ca.remainder().iter().zip(cb.remainder()).map(|(x, y)| x * y).sum();
    for (x, y) in ca.zip(cb) {
        for i in 0..4 {
            acc[i] += x[i] * y[i];
        }
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// Output extent of a valid window sweep.
pub fn sweep_extent(input: usize, window: usize, stride: usize) -> Option<usize> {
    if window == 0 || stride == 0 || window > input {
        None
    } else {
        Some((input - window) / stride + 1)
    }
}

pub fn conv2d_forward(
    input: &Tensor,
    weights: &Tensor,
    bias: &Tensor,
    stride: (usize, usize),
) -> Result<Tensor> {
    let (c, h, w) = dims3(input, "conv input")?;
    let (f, wc, kh, kw) = dims4(weights, "conv weights")?;
    if wc != c {
        return Err(Error::Shape(format!(
            "conv weights expect {wc} input channels, input has {c}"
        )));
    }
    if bias.len() != f {
        return Err(Error::Shape(format!(
            "conv bias has {} entries for {f} filters",
            bias.len()
        )));
    }
    let (oh, ow) = match (sweep_extent(h, kh, stride.0), sweep_extent(w, kw, stride.1)) {
        (Some(oh), Some(ow)) => (oh, ow),
        _ => {
            return Err(Error::Shape(format!(
                "kernel {kh}x{kw} stride {stride:?} does not fit input {h}x{w}"
            )))
        }
    };
    let (sr, sc) = stride;
    let x = input.data();
    let k = weights.data();
    let mut out = vec![0.0; f * oh * ow];
    for fi in 0..f {
        let plane = &mut out[fi * oh * ow..(fi + 1) * oh * ow];
        plane.fill(bias.data()[fi]);
        for ci in 0..c {
            for ki in 0..kh {
                for kj in 0..kw {
                    let wv = k[((fi * c + ci) * kh + ki) * kw + kj];
                    for oy in 0..oh {
                        let row = &x[(ci * h + oy * sr + ki) * w..][..w];
                        let orow = &mut plane[oy * ow..(oy + 1) * ow];
                        if sc == 1 {
                            for (o, &xv) in orow.iter_mut().zip(&row[kj..kj + ow]) {
                                *o += wv * xv;
                            }
                        } else {
                            for (ox, o) in orow.iter_mut().enumerate() {
                                *o += wv * row[ox * sc + kj];
                            }
                        }
                    }
                }
            }
        }
    }
    Tensor::new(&[f, oh, ow], out)
}

/// Gradient of a convolution with respect to its input, using `weights`
/// as the backward operator (a transposed convolution).
pub fn conv2d_backward_input(
    weights: &Tensor,
    stride: (usize, usize),
    grad_out: &Tensor,
    input_shape: &[usize],
) -> Result<Tensor> {
    let (f, c, kh, kw) = dims4(weights, "conv weights")?;
    let (gf, oh, ow) = dims3(grad_out, "conv grad_out")?;
    let [ic, h, w] = *input_shape else {
        return Err(Error::Shape(format!("conv input shape {input_shape:?}")));
    };
    if gf != f || ic != c {
        return Err(Error::Shape(format!(
            "conv backward: weights {:?}, grad_out {:?}, input {input_shape:?}",
            weights.shape(),
            grad_out.shape()
        )));
    }
    let (sr, sc) = stride;
    let k = weights.data();
    let g = grad_out.data();
    let mut gx = vec![0.0; c * h * w];
    for fi in 0..f {
        let plane = &g[fi * oh * ow..(fi + 1) * oh * ow];
        for ci in 0..c {
            for ki in 0..kh {
                for kj in 0..kw {
                    let wv = k[((fi * c + ci) * kh + ki) * kw + kj];
                    for oy in 0..oh {
                        let row = &mut gx[(ci * h + oy * sr + ki) * w..][..w];
                        let grow = &plane[oy * ow..(oy + 1) * ow];
                        if sc == 1 {
                            for (xg, &gv) in row[kj..kj + ow].iter_mut().zip(grow) {
                                *xg += wv * gv;
                            }
                        } else {
                            for (ox, &gv) in grow.iter().enumerate() {
                                row[ox * sc + kj] += wv * gv;
                            }
                        }
                    }
                }
            }
        }
    }
    Tensor::new(input_shape, gx)
}

pub struct ConvGrads {
    pub input: Tensor,
    pub weights: Tensor,
    pub bias: Tensor,
}

pub fn conv2d_backward(
    input: &Tensor,
    weights: &Tensor,
    stride: (usize, usize),
    grad_out: &Tensor,
) -> Result<ConvGrads> {
    let grad_input = conv2d_backward_input(weights, stride, grad_out, input.shape())?;
    let (gw, gb) = conv2d_backward_params(input, weights, stride, grad_out)?;
    Ok(ConvGrads {
        input: grad_input,
        weights: gw,
        bias: gb,
    })
}

/// Weight and bias gradients of a convolution.
pub fn conv2d_backward_params(
    input: &Tensor,
    weights: &Tensor,
    stride: (usize, usize),
    grad_out: &Tensor,
) -> Result<(Tensor, Tensor)> {
    let (f, c, kh, kw) = dims4(weights, "conv weights")?;
    let (_, h, w) = dims3(input, "conv input")?;
    let (_, oh, ow) = dims3(grad_out, "conv grad_out")?;
    let (sr, sc) = stride;
    let x = input.data();
    let g = grad_out.data();
    let mut gw = vec![0.0; f * c * kh * kw];
    let mut gb = vec![0.0; f];
    for fi in 0..f {
        let plane = &g[fi * oh * ow..(fi + 1) * oh * ow];
        gb[fi] = plane.iter().sum();
        for ci in 0..c {
            for ki in 0..kh {
                for kj in 0..kw {
                    let mut acc = 0.0;
                    for oy in 0..oh {
                        let row = &x[(ci * h + oy * sr + ki) * w..][..w];
                        let grow = &plane[oy * ow..(oy + 1) * ow];
                        if sc == 1 {
                            acc += dot(grow, &row[kj..kj + ow]);
                        } else {
                            for (ox, &gv) in grow.iter().enumerate() {
                                acc += gv * row[ox * sc + kj];
                            }
                        }
                    }
                    gw[((fi * c + ci) * kh + ki) * kw + kj] = acc;
                }
            }
        }
    }
    Ok((Tensor::new(weights.shape(), gw)?, Tensor::new(&[f], gb)?))
}

/// Non-overlapping max pooling. Returns the pooled tensor and, for each
/// output cell, the flat index of the winning input cell. Ties go to the
/// first cell in row-major order; trailing rows/cols that do not fill a
/// window are dropped.
pub fn maxpool2d_forward(input: &Tensor, window: (usize, usize)) -> Result<(Tensor, Vec<usize>)> {
    let (c, h, w) = dims3(input, "pool input")?;
    let (pr, pc) = window;
    let (oh, ow) = match (sweep_extent(h, pr, pr), sweep_extent(w, pc, pc)) {
        (Some(oh), Some(ow)) => (oh, ow),
        _ => {
            return Err(Error::Shape(format!(
                "pool window {pr}x{pc} does not fit input {h}x{w}"
            )))
        }
    };
    let x = input.data();
    let mut out = Vec::with_capacity(c * oh * ow);
    let mut argmax = Vec::with_capacity(c * oh * ow);
    for ci in 0..c {
        for oy in 0..oh {
            for ox in 0..ow {
                let mut best = (ci * h + oy * pr) * w + ox * pc;
                for i in 0..pr {
                    for j in 0..pc {
                        let idx = (ci * h + oy * pr + i) * w + ox * pc + j;
                        if x[idx] > x[best] {
                            best = idx;
                        }
                    }
                }
                out.push(x[best]);
                argmax.push(best);
            }
        }
    }
    Ok((Tensor::new(&[c, oh, ow], out)?, argmax))
}

/// Routes each output value to its recorded argmax position.
pub fn maxpool2d_backward(argmax: &[usize], input_shape: &[usize], grad_out: &Tensor) -> Result<Tensor> {
    if argmax.len() != grad_out.len() {
        return Err(Error::Shape(format!(
            "pool argmax has {} entries, grad_out {}",
            argmax.len(),
            grad_out.len()
        )));
    }
    let mut gx = Tensor::zeros(input_shape);
    let buf = gx.data_mut();
    for (&idx, &g) in argmax.iter().zip(grad_out.data()) {
        if idx >= buf.len() {
            return Err(Error::Shape(format!("pool argmax {idx} out of range")));
        }
        buf[idx] += g;
    }
    Ok(gx)
}

/// `weights · flatten(input) + bias` with `weights` of shape `[m, n]`.
pub fn dense_forward(input: &Tensor, weights: &Tensor, bias: &Tensor) -> Result<Tensor> {
    let [m, n] = *weights.shape() else {
        return Err(Error::Shape(format!("dense weights {:?}", weights.shape())));
    };
    if input.len() != n || bias.len() != m {
        return Err(Error::Shape(format!(
            "dense layer {m}x{n}: input has {} values, bias {}",
            input.len(),
            bias.len()
        )));
    }
    let x = input.data();
    let out = weights
        .data()
        .chunks_exact(n)
        .zip(bias.data())
        .map(|(row, &b)| dot(row, x) + b)
        .collect();
    Tensor::new(&[m], out)
}

/// Input gradient of a dense layer: `weightsᵀ · grad_out`, reshaped to `input_shape`.
pub fn dense_backward_input(weights: &Tensor, grad_out: &Tensor, input_shape: &[usize]) -> Result<Tensor> {
    let [m, n] = *weights.shape() else {
        return Err(Error::Shape(format!("dense weights {:?}", weights.shape())));
    };
    if grad_out.len() != m || input_shape.iter().product::<usize>() != n {
        return Err(Error::Shape(format!(
            "dense backward {m}x{n}: grad_out {}, input {input_shape:?}",
            grad_out.len()
        )));
    }
    let mut gx = vec![0.0; n];
    for (row, &g) in weights.data().chunks_exact(n).zip(grad_out.data()) {
        for (o, &w) in gx.iter_mut().zip(row) {
            *o += w * g;
        }
    }
    Tensor::new(input_shape, gx)
}

pub struct DenseGrads {
    pub input: Tensor,
    pub weights: Tensor,
    pub bias: Tensor,
}

pub fn dense_backward(input: &Tensor, weights: &Tensor, grad_out: &Tensor) -> Result<DenseGrads> {
    let grad_input = dense_backward_input(weights, grad_out, input.shape())?;
    let x = input.data();
    let mut gw = Vec::with_capacity(weights.len());
    for &g in grad_out.data() {
        gw.extend(x.iter().map(|&v| g * v));
    }
    Ok(DenseGrads {
        input: grad_input,
        weights: Tensor::new(weights.shape(), gw)?,
        bias: grad_out.clone(),
    })
}

pub fn relu(x: &Tensor) -> Tensor {
    x.map(|v| v.max(0.0))
}

pub fn relu_backward(input: &Tensor, grad_out: &Tensor) -> Result<Tensor> {
    input.zip_map(grad_out, |x, g| if x > 0.0 { g } else { 0.0 })
}

pub fn sigmoid(x: &Tensor) -> Tensor {
    x.map(|v| 1.0 / (1.0 + (-v).exp()))
}

pub fn sigmoid_backward(output: &Tensor, grad_out: &Tensor) -> Result<Tensor> {
    output.zip_map(grad_out, |y, g| g * y * (1.0 - y))
}

/// Per-feature-map amplitude normalization: each `[rows, cols]` map is
/// divided by its maximum absolute value. Returns the output and, per
/// map, the index (within the map) of the scaling element, or `None`
/// for an all-zero map, which passes through unchanged.
pub fn amplitude_norm_forward(input: &Tensor) -> Result<(Tensor, Vec<Option<usize>>)> {
    let (c, h, w) = dims3(input, "normalization input")?;
    let mut out = input.clone();
    let mut pivots = Vec::with_capacity(c);
    for map in out.data_mut().chunks_exact_mut(h * w) {
        let mut pivot = 0;
        for (i, v) in map.iter().enumerate() {
            if v.abs() > map[pivot].abs() {
                pivot = i;
            }
        }
        let m = map[pivot].abs();
        if m > 0.0 {
            map.iter_mut().for_each(|v| *v /= m);
            pivots.push(Some(pivot));
        } else {
            pivots.push(None);
        }
    }
    Ok((out, pivots))
}

pub fn amplitude_norm_backward(
    input: &Tensor,
    pivots: &[Option<usize>],
    grad_out: &Tensor,
) -> Result<Tensor> {
    let (c, h, w) = dims3(input, "normalization input")?;
    input.check_same_shape(grad_out)?;
    if pivots.len() != c {
        return Err(Error::Shape("normalization pivots do not match maps".into()));
    }
    let mut gx = grad_out.clone();
    let size = h * w;
    for (ci, pivot) in pivots.iter().enumerate() {
        let Some(p) = *pivot else { continue };
        let x = &input.data()[ci * size..(ci + 1) * size];
        let g = &grad_out.data()[ci * size..(ci + 1) * size];
        let m = x[p].abs();
        let gx_map = &mut gx.data_mut()[ci * size..(ci + 1) * size];
        let gdotx: f64 = g.iter().zip(x).map(|(a, b)| a * b).sum();
        for (o, &gv) in gx_map.iter_mut().zip(g) {
            *o = gv / m;
        }
        gx_map[p] -= x[p].signum() * gdotx / (m * m);
    }
    Ok(gx)
}

pub fn softmax(logits: &Tensor) -> Tensor {
    let max = logits.max();
    let mut p = logits.map(|v| (v - max).exp());
    let total = p.sum();
    p.scale(1.0 / total);
    p
}

pub struct SoftmaxCrossEntropy {
    pub loss: f64,
    pub probs: Tensor,
    pub grad_logits: Tensor,
}

pub fn softmax_cross_entropy(logits: &Tensor, label: usize) -> Result<SoftmaxCrossEntropy> {
    let k = logits.len();
    if k < 2 {
        return Err(Error::Usage(format!("softmax needs at least 2 classes, got {k}")));
    }
    if label >= k {
        return Err(Error::Usage(format!("label {label} out of range for {k} classes")));
    }
    let top = logits.argmax();
    let max = logits.data()[top];
    let shifted: Vec<f64> = logits.data().iter().map(|v| v - max).collect();
    // the max term contributes exactly 1; ln_1p keeps near-saturated losses accurate
    let rest: f64 = shifted
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != top)
        .map(|(_, v)| v.exp())
        .sum();
    let log_total = rest.ln_1p();
    let loss = log_total - shifted[label];
    let probs = Tensor::new(&[k], shifted.iter().map(|v| (v - log_total).exp()).collect())?;
    let mut grad_logits = probs.clone();
    grad_logits.data_mut()[label] -= 1.0;
    Ok(SoftmaxCrossEntropy {
        loss,
        probs,
        grad_logits,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(shape: &[usize], rng: &mut ChaCha8Rng) -> Tensor {
        Tensor::from_fn(shape, |_| rng.random_range(-1.0..1.0))
    }

    fn conv_oracle(x: &Tensor, k: &Tensor, b: &Tensor, (sr, sc): (usize, usize)) -> Tensor {
        let [c, h, w] = *x.shape() else { unreachable!() };
        let [f, _, kh, kw] = *k.shape() else { unreachable!() };
        let oh = (h - kh) / sr + 1;
        let ow = (w - kw) / sc + 1;
        let mut out = Tensor::zeros(&[f, oh, ow]);
        for fi in 0..f {
            for oy in 0..oh {
                for ox in 0..ow {
                    let mut acc = b.data()[fi];
                    for ci in 0..c {
                        for i in 0..kh {
                            for j in 0..kw {
                                acc += k.get(&[fi, ci, i, j]) * x.get(&[ci, oy * sr + i, ox * sc + j]);
                            }
                        }
                    }
                    out.set(&[fi, oy, ox], acc);
                }
            }
        }
        out
    }

    #[test]
    fn conv_of_ones() {
        let x = Tensor::filled(&[1, 3, 3], 1.0);
        let k = Tensor::filled(&[1, 1, 2, 2], 1.0);
        let y = conv2d_forward(&x, &k, &Tensor::zeros(&[1]), (1, 1)).unwrap();
        assert_eq!(y.shape(), &[1, 2, 2]);
        assert!(y.data().iter().all(|&v| v == 4.0));
    }

    #[test]
    fn strided_difference_kernel() {
        let x = Tensor::new(&[1, 1, 5], vec![1.0, 2.0, 3.0, 4.0, 5.0]).unwrap();
        let k = Tensor::new(&[1, 1, 1, 2], vec![1.0, -1.0]).unwrap();
        let y = conv2d_forward(&x, &k, &Tensor::zeros(&[1]), (1, 2)).unwrap();
        assert_eq!(y.data(), &[-1.0, -1.0]);
    }

    #[test]
    fn conv_matches_loop_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for stride in [(1, 1), (2, 1), (1, 3), (2, 2)] {
            let x = random(&[2, 6, 8], &mut rng);
            let k = random(&[3, 2, 3, 3], &mut rng);
            let b = random(&[3], &mut rng);
            let fast = conv2d_forward(&x, &k, &b, stride).unwrap();
            let slow = conv_oracle(&x, &k, &b, stride);
            assert_eq!(fast.shape(), slow.shape());
            for (a, e) in fast.data().iter().zip(slow.data()) {
                assert!((a - e).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn conv_rejects_oversized_kernel() {
        let x = Tensor::zeros(&[1, 3, 3]);
        let k = Tensor::zeros(&[1, 1, 4, 1]);
        assert!(conv2d_forward(&x, &k, &Tensor::zeros(&[1]), (1, 1)).is_err());
    }

    #[test]
    fn zero_upstream_gives_zero_grads() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let x = random(&[2, 5, 5], &mut rng);
        let k = random(&[2, 2, 2, 3], &mut rng);
        let g = conv2d_backward(&x, &k, (1, 1), &Tensor::zeros(&[2, 4, 3])).unwrap();
        assert!(g.input.data().iter().chain(g.weights.data()).chain(g.bias.data()).all(|&v| v == 0.0));
    }

    #[test]
    fn bias_grad_is_plane_sum() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x = random(&[1, 4, 4], &mut rng);
        let k = random(&[2, 1, 2, 2], &mut rng);
        let go = random(&[2, 3, 3], &mut rng);
        let g = conv2d_backward(&x, &k, (1, 1), &go).unwrap();
        for f in 0..2 {
            let s: f64 = go.data()[f * 9..(f + 1) * 9].iter().sum();
            assert!((g.bias.data()[f] - s).abs() < 1e-15);
        }
    }

    #[test]
    fn pool_simple_and_ties() {
        let x = Tensor::new(&[1, 2, 2], vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let (y, am) = maxpool2d_forward(&x, (2, 2)).unwrap();
        assert_eq!(y.data(), &[4.0]);
        assert_eq!(am, vec![3]);

        let c = Tensor::filled(&[1, 4, 4], 7.0);
        let (y, am) = maxpool2d_forward(&c, (2, 2)).unwrap();
        assert!(y.data().iter().all(|&v| v == 7.0));
        assert_eq!(am, vec![0, 2, 8, 10]);
    }

    #[test]
    fn pool_matches_loop_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let x = random(&[1, 10, 6], &mut rng);
        let (y, am) = maxpool2d_forward(&x, (5, 2)).unwrap();
        assert_eq!(y.shape(), &[1, 2, 3]);
        for oy in 0..2 {
            for ox in 0..3 {
                let mut best = f64::NEG_INFINITY;
                for i in 0..5 {
                    for j in 0..2 {
                        best = best.max(x.get(&[0, oy * 5 + i, ox * 2 + j]));
                    }
                }
                assert_eq!(y.get(&[0, oy, ox]), best);
                assert_eq!(x.data()[am[oy * 3 + ox]], best);
            }
        }
    }

    #[test]
    fn pool_backward_conserves_mass() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let x = random(&[2, 6, 4], &mut rng);
        let (y, am) = maxpool2d_forward(&x, (3, 2)).unwrap();
        let go = random(y.shape(), &mut rng);
        let gx = maxpool2d_backward(&am, x.shape(), &go).unwrap();
        assert!((gx.sum() - go.sum()).abs() < 1e-12);
        assert_eq!(gx.data().iter().filter(|v| **v != 0.0).count(), go.len());
    }

    #[test]
    fn dense_cases() {
        let w = Tensor::new(&[2, 2], vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let y = dense_forward(&Tensor::vector(vec![1.0, 1.0]), &w, &Tensor::vector(vec![0.0, 1.0])).unwrap();
        assert_eq!(y.data(), &[3.0, 8.0]);

        let eye = Tensor::new(&[3, 3], vec![1., 0., 0., 0., 1., 0., 0., 0., 1.]).unwrap();
        let x = Tensor::vector(vec![0.3, -2.0, 5.0]);
        assert_eq!(dense_forward(&x, &eye, &Tensor::zeros(&[3])).unwrap().data(), x.data());
    }

    #[test]
    fn dense_matches_loop_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let x = random(&[3, 2, 2], &mut rng);
        let w = random(&[5, 12], &mut rng);
        let b = random(&[5], &mut rng);
        let y = dense_forward(&x, &w, &b).unwrap();
        for i in 0..5 {
            let mut acc = b.data()[i];
            for j in 0..12 {
                acc += w.get(&[i, j]) * x.data()[j];
            }
            assert!((y.data()[i] - acc).abs() < 1e-12);
        }
        assert!(dense_forward(&Tensor::zeros(&[11]), &w, &b).is_err());
    }

    #[test]
    fn softmax_uniform_and_saturated() {
        let r = softmax_cross_entropy(&Tensor::filled(&[4], 0.7), 2).unwrap();
        assert!(r.probs.data().iter().all(|p| (p - 0.25).abs() < 1e-15));

        let r = softmax_cross_entropy(&Tensor::vector(vec![10.0, -10.0]), 0).unwrap();
        // log(1 + e^-20)
        let expected = (-20.0_f64).exp().ln_1p();
        assert!((r.loss - expected).abs() < 1e-22);
        assert!(r.loss <= (-20.0_f64).exp());
        assert!((r.probs.sum() - 1.0).abs() < 1e-9);

        assert!(softmax_cross_entropy(&Tensor::vector(vec![0.0, 1.0]), 2).is_err());
        assert!(softmax_cross_entropy(&Tensor::vector(vec![0.0]), 0).is_err());
    }

    #[test]
    fn softmax_gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let logits = random(&[5], &mut rng);
        let r = softmax_cross_entropy(&logits, 3).unwrap();
        let h = 1e-5;
        for i in 0..5 {
            let mut up = logits.clone();
            up.data_mut()[i] += h;
            let mut dn = logits.clone();
            dn.data_mut()[i] -= h;
            let fd = (softmax_cross_entropy(&up, 3).unwrap().loss
                - softmax_cross_entropy(&dn, 3).unwrap().loss)
                / (2.0 * h);
            assert!((fd - r.grad_logits.data()[i]).abs() < 1e-6);
        }
    }

    #[test]
    fn amplitude_norm_scales_to_unit_peak() {
        let x = Tensor::new(&[2, 1, 3], vec![1.0, -4.0, 2.0, 0.0, 0.0, 0.0]).unwrap();
        let (y, piv) = amplitude_norm_forward(&x).unwrap();
        assert_eq!(y.data(), &[0.25, -1.0, 0.5, 0.0, 0.0, 0.0]);
        assert_eq!(piv, vec![Some(1), None]);
    }
}
