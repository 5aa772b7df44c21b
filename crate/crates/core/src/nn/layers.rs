//! Forward and backward kernels for the fixed layer set.
//!
//! Image tensors are single examples laid out `[channels, height, width]`.

use rand::Rng;

use super::Tensor;
use crate::error::{Error, Result};

fn chw(t: &Tensor, what: &str) -> Result<(usize, usize, usize)> {
    match *t.shape() {
        [c, h, w] => Ok((c, h, w)),
        ref s => Err(Error::shape(format!("{what} of shape [C, H, W]"), format!("{s:?}"))),
    }
}

/// Valid-padding, stride-1 convolution (cross-correlation).
pub fn conv2d_forward(input: &Tensor, kernels: &Tensor, biases: &[f64]) -> Result<Tensor> {
    let (c_in, h, w) = chw(input, "conv input")?;
    let (c_out, kc, kh, kw) = match *kernels.shape() {
        [o, c, kh, kw] => (o, c, kh, kw),
        ref s => return Err(Error::shape("kernels [O, C, KH, KW]", format!("{s:?}"))),
    };
    if kc != c_in {
        return Err(Error::shape(format!("{kc} input channels"), format!("{c_in}")));
    }
    if biases.len() != c_out {
        return Err(Error::shape(format!("{c_out} biases"), format!("{}", biases.len())));
    }
    if h < kh || w < kw {
        return Err(Error::invalid(format!("conv input {h}×{w} is smaller than the {kh}×{kw} kernel")));
    }
    let (oh, ow) = (h - kh + 1, w - kw + 1);
    let x = input.data();
    let k = kernels.data();
    let mut out = vec![0.0; c_out * oh * ow];
    for (o, plane) in out.chunks_mut(oh * ow).enumerate() {
        plane.iter_mut().for_each(|v| *v = biases[o]);
        for c in 0..c_in {
            let x_c = &x[c * h * w..(c + 1) * h * w];
            for ki in 0..kh {
                for kj in 0..kw {
                    let kv = k[((o * c_in + c) * kh + ki) * kw + kj];
                    for r in 0..oh {
                        let src = &x_c[(r + ki) * w + kj..(r + ki) * w + kj + ow];
                        let dst = &mut plane[r * ow..(r + 1) * ow];
                        for (d, s) in dst.iter_mut().zip(src) {
                            *d += kv * s;
                        }
                    }
                }
            }
        }
    }
    Tensor::new(vec![c_out, oh, ow], out)
}

/// Gradients of a convolution: `(d_input, d_kernels, d_biases)`.
pub fn conv2d_backward(input: &Tensor, kernels: &Tensor, grad_out: &Tensor) -> Result<(Tensor, Tensor, Vec<f64>)> {
    let mut dk = vec![0.0; kernels.len()];
    let mut db = vec![0.0; kernels.shape().first().copied().unwrap_or(0)];
    let dx = conv2d_backward_into(input, kernels, grad_out, &mut dk, &mut db, true)?.expect("dx requested");
    Ok((dx, Tensor::new(kernels.shape().to_vec(), dk)?, db))
}

/// Adds the kernel and bias gradients into `dk` and `db`, returning the
/// input gradient only when `need_dx` is set.
pub fn conv2d_backward_into(
    input: &Tensor,
    kernels: &Tensor,
    grad_out: &Tensor,
    dk: &mut [f64],
    db: &mut [f64],
    need_dx: bool,
) -> Result<Option<Tensor>> {
    let (c_in, h, w) = chw(input, "conv input")?;
    let &[c_out, _, kh, kw] = kernels.shape() else {
        return Err(Error::shape("kernels [O, C, KH, KW]", format!("{:?}", kernels.shape())));
    };
    let (oh, ow) = (h - kh + 1, w - kw + 1);
    if grad_out.shape() != [c_out, oh, ow] {
        return Err(Error::shape(format!("{:?}", [c_out, oh, ow]), format!("{:?}", grad_out.shape())));
    }
    if dk.len() != kernels.len() || db.len() != c_out {
        return Err(Error::shape(
            format!("{} kernel and {c_out} bias gradients", kernels.len()),
            format!("{} and {}", dk.len(), db.len()),
        ));
    }
    let x = input.data();
    let k = kernels.data();
    let g = grad_out.data();
    let mut dx = if need_dx { vec![0.0; x.len()] } else { Vec::new() };
    for o in 0..c_out {
        let g_o = &g[o * oh * ow..(o + 1) * oh * ow];
        db[o] += g_o.iter().sum::<f64>();
        for c in 0..c_in {
            let x_c = &x[c * h * w..(c + 1) * h * w];
            for ki in 0..kh {
                for kj in 0..kw {
                    let ki_idx = ((o * c_in + c) * kh + ki) * kw + kj;
                    let mut acc = 0.0;
                    for r in 0..oh {
                        let row = (r + ki) * w + kj;
                        acc += dot(&g_o[r * ow..(r + 1) * ow], &x_c[row..row + ow]);
                    }
                    dk[ki_idx] += acc;
                    if need_dx {
                        let kv = k[ki_idx];
                        let dx_c = &mut dx[c * h * w..(c + 1) * h * w];
                        for r in 0..oh {
                            let row = (r + ki) * w + kj;
                            for (d, gv) in dx_c[row..row + ow].iter_mut().zip(&g_o[r * ow..(r + 1) * ow]) {
                                *d += kv * gv;
                            }
                        }
                    }
                }
            }
        }
    }
    if need_dx {
        Ok(Some(Tensor::new(input.shape().to_vec(), dx)?))
    } else {
        Ok(None)
    }
}

pub fn relu(x: &Tensor) -> Tensor {
    let data = x.data().iter().map(|&v| v.max(0.0)).collect();
    Tensor::new(x.shape().to_vec(), data).expect("same shape")
}

/// Passes the gradient where `x > 0`; the subgradient at 0 is 0.
pub fn relu_backward(grad: &Tensor, x: &Tensor) -> Result<Tensor> {
    if grad.shape() != x.shape() {
        return Err(Error::shape(format!("{:?}", x.shape()), format!("{:?}", grad.shape())));
    }
    let data = grad.data().iter().zip(x.data()).map(|(&g, &v)| if v > 0.0 { g } else { 0.0 }).collect();
    Tensor::new(x.shape().to_vec(), data)
}

/// Non-overlapping 2×2 max pooling. Odd trailing rows/columns are dropped;
/// ties go to the first cell in scan order. Returns the flat input index of
/// each output's maximum.
pub fn maxpool2x2(input: &Tensor) -> Result<(Tensor, Vec<usize>)> {
    let (c, h, w) = chw(input, "pool input")?;
    if h < 2 || w < 2 {
        return Err(Error::invalid(format!("2×2 pooling needs H, W >= 2, got {h}×{w}")));
    }
    let (oh, ow) = (h / 2, w / 2);
    let x = input.data();
    let mut out = Vec::with_capacity(c * oh * ow);
    let mut argmax = Vec::with_capacity(c * oh * ow);
    for ch in 0..c {
        for r in 0..oh {
            for col in 0..ow {
                let base = ch * h * w + 2 * r * w + 2 * col;
                let mut best = base;
                for cand in [base + 1, base + w, base + w + 1] {
                    if x[cand] > x[best] {
                        best = cand;
                    }
                }
                out.push(x[best]);
                argmax.push(best);
            }
        }
    }
    Ok((Tensor::new(vec![c, oh, ow], out)?, argmax))
}

/// Routes each output gradient back to its argmax cell.
pub fn maxpool2x2_backward(grad_out: &Tensor, argmax: &[usize], input_shape: &[usize]) -> Result<Tensor> {
    if grad_out.len() != argmax.len() {
        return Err(Error::shape(format!("{} gradients", argmax.len()), format!("{}", grad_out.len())));
    }
    let mut dx = Tensor::zeros(input_shape);
    let d = dx.data_mut();
    for (&g, &i) in grad_out.data().iter().zip(argmax) {
        d[i] += g;
    }
    Ok(dx)
}

/// Inverted dropout. In training mode each unit is zeroed with probability
/// `rate` and survivors are scaled by `1/(1−rate)`; the returned per-unit
/// scale is what the backward pass multiplies by. Inference is the identity.
pub fn dropout(input: &Tensor, rate: f64, rng: &mut impl Rng, training: bool) -> Result<(Tensor, Option<Vec<f64>>)> {
    if !(0.0..1.0).contains(&rate) {
        return Err(Error::invalid(format!("dropout rate must be in [0, 1), got {rate}")));
    }
    if !training || rate == 0.0 {
        return Ok((input.clone(), None));
    }
    let keep = 1.0 / (1.0 - rate);
    let mask: Vec<f64> = (0..input.len()).map(|_| if rng.random::<f64>() < rate { 0.0 } else { keep }).collect();
    let data = input.data().iter().zip(&mask).map(|(x, m)| x * m).collect();
    Ok((Tensor::new(input.shape().to_vec(), data)?, Some(mask)))
}

/// `y = W·x + b` with `W` shaped `[out, in]`.
pub fn dense_forward(x: &[f64], weights: &Tensor, biases: &[f64]) -> Result<Vec<f64>> {
    let &[n_out, n_in] = weights.shape() else {
        return Err(Error::shape("weights [out, in]", format!("{:?}", weights.shape())));
    };
    if x.len() != n_in {
        return Err(Error::shape(format!("input of length {n_in}"), format!("{}", x.len())));
    }
    if biases.len() != n_out {
        return Err(Error::shape(format!("{n_out} biases"), format!("{}", biases.len())));
    }
    Ok(weights.data().chunks(n_in).zip(biases).map(|(row, b)| b + dot(row, x)).collect())
}

/// Dot product over four independent partial sums, which lets the compiler
/// vectorize while keeping the summation order fixed.
fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut lanes = [0.0; 4];
    let (ca, cb) = (a.chunks_exact(4), b.chunks_exact(4));
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        for l in 0..4 {
            lanes[l] += x[l] * y[l];
        }
    }
    let tail: f64 = ra.iter().zip(rb).map(|(x, y)| x * y).sum();
    (lanes[0] + lanes[1]) + (lanes[2] + lanes[3]) + tail
}

/// Gradients of a dense layer: `(d_weights, d_biases, d_input)`.
pub fn dense_backward(x: &[f64], weights: &Tensor, grad_y: &[f64]) -> Result<(Tensor, Vec<f64>, Vec<f64>)> {
    let n_out = weights.shape().first().copied().unwrap_or(0);
    let mut dw = vec![0.0; weights.len()];
    let mut db = vec![0.0; n_out];
    let dx = dense_backward_into(x, weights, grad_y, &mut dw, &mut db)?;
    Ok((Tensor::new(weights.shape().to_vec(), dw)?, db, dx))
}

/// Adds `gy ⊗ x` into `dw` and `gy` into `db`; returns the input gradient.
pub fn dense_backward_into(
    x: &[f64],
    weights: &Tensor,
    grad_y: &[f64],
    dw: &mut [f64],
    db: &mut [f64],
) -> Result<Vec<f64>> {
    let &[n_out, n_in] = weights.shape() else {
        return Err(Error::shape("weights [out, in]", format!("{:?}", weights.shape())));
    };
    if x.len() != n_in || grad_y.len() != n_out || dw.len() != n_out * n_in || db.len() != n_out {
        return Err(Error::shape(
            format!("input {n_in}, gradient {n_out}, accumulators {}+{n_out}", n_out * n_in),
            format!("input {}, gradient {}, accumulators {}+{}", x.len(), grad_y.len(), dw.len(), db.len()),
        ));
    }
    let mut dx = vec![0.0; n_in];
    for (((row_w, row_dw), &g), b) in
        weights.data().chunks(n_in).zip(dw.chunks_mut(n_in)).zip(grad_y).zip(db.iter_mut())
    {
        *b += g;
        if g == 0.0 {
            continue;
        }
        for ((d, &xv), (dxv, &wv)) in row_dw.iter_mut().zip(x).zip(dx.iter_mut().zip(row_w)) {
            *d += g * xv;
            *dxv += g * wv;
        }
    }
    Ok(dx)
}

/// Max-subtracted softmax.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exp: Vec<f64> = logits.iter().map(|z| (z - max).exp()).collect();
    let sum: f64 = exp.iter().sum();
    exp.into_iter().map(|e| e / sum).collect()
}

/// Cross-entropy of the softmax against `true_class`, with its gradient
/// `p − onehot` over the logits.
pub fn softmax_cross_entropy(logits: &[f64], true_class: usize) -> Result<(f64, Vec<f64>)> {
    if logits.len() < 2 {
        return Err(Error::invalid(format!("need at least 2 classes, got {}", logits.len())));
    }
    if true_class >= logits.len() {
        return Err(Error::invalid(format!("class index {true_class} out of range for {} classes", logits.len())));
    }
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let log_sum = logits.iter().map(|z| (z - max).exp()).sum::<f64>().ln();
    let loss = log_sum - (logits[true_class] - max);
    let mut grad = softmax(logits);
    grad[true_class] -= 1.0;
    Ok((loss.max(0.0), grad))
}
