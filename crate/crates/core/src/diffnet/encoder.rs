//! Strided convolutional encoder: `Z = E(I_0, I_t)`.
//!
//! Each layer is a 3x3, stride-2, zero-padded convolution followed by a
//! rectifier. The last feature map is average-pooled and projected affinely to
//! the latent size.

use super::config::{BlockRole, KERNEL, STRIDE};
use super::model::InrModel;
use crate::real::{matmul, Real};
use crate::series::Image;
use crate::{Error, Result};

const PAD: isize = 1;

/// Intermediate values kept for the backward pass.
pub(crate) struct EncoderTape<T> {
    cols: Vec<Vec<T>>,
    outputs: Vec<Vec<T>>,
    pooled: Vec<T>,
}

fn im2col<T: Real>(input: &[T], channels: usize, size: usize) -> Vec<T> {
    let out = size / STRIDE;
    let positions = out * out;
    let mut cols = vec![T::ZERO; channels * KERNEL * KERNEL * positions];
    for c in 0..channels {
        let plane = &input[c * size * size..(c + 1) * size * size];
        for ky in 0..KERNEL {
            for kx in 0..KERNEL {
                let row = (c * KERNEL + ky) * KERNEL + kx;
                let dst = &mut cols[row * positions..(row + 1) * positions];
                for oy in 0..out {
                    let iy = (oy * STRIDE) as isize + ky as isize - PAD;
                    if iy < 0 || iy >= size as isize {
                        continue;
                    }
                    let src = &plane[iy as usize * size..(iy as usize + 1) * size];
                    for ox in 0..out {
                        let ix = (ox * STRIDE) as isize + kx as isize - PAD;
                        if ix >= 0 && ix < size as isize {
                            dst[oy * out + ox] = src[ix as usize];
                        }
                    }
                }
            }
        }
    }
    cols
}

fn col2im<T: Real>(cols: &[T], channels: usize, size: usize) -> Vec<T> {
    let out = size / STRIDE;
    let positions = out * out;
    let mut input = vec![T::ZERO; channels * size * size];
    for c in 0..channels {
        let plane = &mut input[c * size * size..(c + 1) * size * size];
        for ky in 0..KERNEL {
            for kx in 0..KERNEL {
                let row = (c * KERNEL + ky) * KERNEL + kx;
                let src = &cols[row * positions..(row + 1) * positions];
                for oy in 0..out {
                    let iy = (oy * STRIDE) as isize + ky as isize - PAD;
                    if iy < 0 || iy >= size as isize {
                        continue;
                    }
                    for ox in 0..out {
                        let ix = (ox * STRIDE) as isize + kx as isize - PAD;
                        if ix >= 0 && ix < size as isize {
                            plane[iy as usize * size + ix as usize] += src[oy * out + ox];
                        }
                    }
                }
            }
        }
    }
    input
}

fn stack_pair<T: Real>(size: usize, reference: &Image, target: &Image) -> Result<Vec<T>> {
    for img in [reference, target] {
        if img.size() != size {
            return Err(Error::ShapeMismatch(format!(
                "encoder expects {size}x{size} images, got {0}x{0}",
                img.size()
            )));
        }
    }
    Ok(reference
        .data()
        .iter()
        .chain(target.data())
        .map(|&v| T::lit(v as f64))
        .collect())
}

pub(crate) fn encode_with_tape<T: Real>(
    model: &InrModel<T>,
    reference: &Image,
    target: &Image,
) -> Result<(Vec<T>, EncoderTape<T>)> {
    let cfg = model.config();
    let mut input = stack_pair::<T>(cfg.image_size, reference, target)?;
    let mut cols_all = Vec::with_capacity(cfg.encoder_channels.len());
    let mut outputs = Vec::with_capacity(cfg.encoder_channels.len());

    for (l, &c_out) in cfg.encoder_channels.iter().enumerate() {
        let c_in = cfg.conv_in_channels(l);
        let size = cfg.conv_input_size(l);
        let positions = (size / STRIDE).pow(2);
        let cols = im2col(&input, c_in, size);
        let weight = model.block(BlockRole::ConvWeight(l));
        let bias = model.block(BlockRole::ConvBias(l));
        let mut out = vec![T::ZERO; c_out * positions];
        matmul(
            c_out,
            c_in * KERNEL * KERNEL,
            positions,
            weight,
            &cols,
            T::ZERO,
            &mut out,
        );
        for (row, &b) in out.chunks_exact_mut(positions).zip(bias) {
            for v in row {
                let pre = *v + b;
                *v = if pre > T::ZERO { pre } else { T::ZERO };
            }
        }
        cols_all.push(cols);
        input = out.clone();
        outputs.push(out);
    }

    let c_last = *cfg.encoder_channels.last().unwrap();
    let last = outputs.last().unwrap();
    let positions = last.len() / c_last;
    let inv = T::ONE / T::lit(positions as f64);
    let pooled: Vec<T> = last
        .chunks_exact(positions)
        .map(|row| row.iter().copied().sum::<T>() * inv)
        .collect();

    let proj = model.block(BlockRole::ProjWeight);
    let proj_bias = model.block(BlockRole::ProjBias);
    let z: Vec<T> = proj
        .chunks_exact(c_last)
        .zip(proj_bias)
        .map(|(row, &b)| row.iter().zip(&pooled).map(|(&w, &p)| w * p).sum::<T>() + b)
        .collect();

    Ok((
        z,
        EncoderTape {
            cols: cols_all,
            outputs,
            pooled,
        },
    ))
}

/// Latent code of an image pair; channel order is `(reference, target)`.
pub fn encode<T: Real>(model: &InrModel<T>, reference: &Image, target: &Image) -> Result<Vec<T>> {
    encode_with_tape(model, reference, target).map(|(z, _)| z)
}

/// Accumulates parameter gradients of the encoder given `dL/dZ`.
pub(crate) fn encoder_backward<T: Real>(
    model: &InrModel<T>,
    tape: &EncoderTape<T>,
    z_grad: &[T],
    grads: &mut [T],
) {
    let cfg = model.config();
    let layout = model.layout();
    let c_last = *cfg.encoder_channels.last().unwrap();

    {
        let wr = layout.range(BlockRole::ProjWeight);
        let gw = &mut grads[wr];
        for (row, &g) in gw.chunks_exact_mut(c_last).zip(z_grad) {
            for (w, &p) in row.iter_mut().zip(&tape.pooled) {
                *w += g * p;
            }
        }
        let br = layout.range(BlockRole::ProjBias);
        for (b, &g) in grads[br].iter_mut().zip(z_grad) {
            *b += g;
        }
    }

    let proj = model.block(BlockRole::ProjWeight);
    let mut pooled_grad = vec![T::ZERO; c_last];
    for (row, &g) in proj.chunks_exact(c_last).zip(z_grad) {
        for (pg, &w) in pooled_grad.iter_mut().zip(row) {
            *pg += g * w;
        }
    }

    let layers = cfg.encoder_channels.len();
    let last = &tape.outputs[layers - 1];
    let positions = last.len() / c_last;
    let inv = T::ONE / T::lit(positions as f64);
    let mut out_grad: Vec<T> = Vec::with_capacity(last.len());
    for (c, row) in last.chunks_exact(positions).enumerate() {
        let g = pooled_grad[c] * inv;
        out_grad.extend(row.iter().map(|&v| if v > T::ZERO { g } else { T::ZERO }));
    }

    for l in (0..layers).rev() {
        let c_out = cfg.encoder_channels[l];
        let c_in = cfg.conv_in_channels(l);
        let size = cfg.conv_input_size(l);
        let positions = (size / STRIDE).pow(2);
        let k = c_in * KERNEL * KERNEL;
        let cols = &tape.cols[l];

        let wr = layout.range(BlockRole::ConvWeight(l));
        // dW (c_out x k) += out_grad (c_out x P) * cols^T
        T::gemm(
            c_out,
            positions,
            k,
            T::ONE,
            &out_grad,
            positions as isize,
            1,
            cols,
            1,
            positions as isize,
            T::ONE,
            &mut grads[wr],
            k as isize,
            1,
        );
        let br = layout.range(BlockRole::ConvBias(l));
        for (b, row) in grads[br].iter_mut().zip(out_grad.chunks_exact(positions)) {
            *b += row.iter().copied().sum::<T>();
        }

        if l == 0 {
            break;
        }
        let weight = model.block(BlockRole::ConvWeight(l));
        let mut cols_grad = vec![T::ZERO; k * positions];
        // dcols (k x P) = W^T * out_grad
        T::gemm(
            k,
            c_out,
            positions,
            T::ONE,
            weight,
            1,
            k as isize,
            &out_grad,
            positions as isize,
            1,
            T::ZERO,
            &mut cols_grad,
            positions as isize,
            1,
        );
        let mut in_grad = col2im(&cols_grad, c_in, size);
        for (g, &v) in in_grad.iter_mut().zip(&tape.outputs[l - 1]) {
            if v <= T::ZERO {
                *g = T::ZERO;
            }
        }
        out_grad = in_grad;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Direct convolution used as an oracle for the im2col path.
    fn direct_conv(input: &[f64], c_in: usize, size: usize, w: &[f64], c_out: usize) -> Vec<f64> {
        let out = size / 2;
        let mut res = vec![0.0; c_out * out * out];
        for co in 0..c_out {
            for oy in 0..out {
                for ox in 0..out {
                    let mut acc = 0.0;
                    for ci in 0..c_in {
                        for ky in 0..3 {
                            for kx in 0..3 {
                                let iy = (2 * oy + ky) as isize - 1;
                                let ix = (2 * ox + kx) as isize - 1;
                                if iy < 0 || ix < 0 || iy >= size as isize || ix >= size as isize {
                                    continue;
                                }
                                acc += w[((co * c_in + ci) * 3 + ky) * 3 + kx]
                                    * input[(ci * size + iy as usize) * size + ix as usize];
                            }
                        }
                    }
                    res[(co * out + oy) * out + ox] = acc;
                }
            }
        }
        res
    }

    #[test]
    fn im2col_product_matches_direct_convolution() {
        let (c_in, c_out, size) = (3, 4, 8);
        let input: Vec<f64> = (0..c_in * size * size)
            .map(|i| (i as f64 * 0.13).sin())
            .collect();
        let w: Vec<f64> = (0..c_out * c_in * 9)
            .map(|i| (i as f64 * 0.71).cos())
            .collect();
        let cols = im2col(&input, c_in, size);
        let mut out = vec![0.0; c_out * 16];
        matmul(c_out, c_in * 9, 16, &w, &cols, 0.0, &mut out);
        let want = direct_conv(&input, c_in, size, &w, c_out);
        for (a, b) in out.iter().zip(&want) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn col2im_is_adjoint_of_im2col() {
        // <im2col(x), y> == <x, col2im(y)>
        let (c, size) = (2, 6);
        let x: Vec<f64> = (0..c * size * size)
            .map(|i| (i as f64 * 0.3).sin())
            .collect();
        let y: Vec<f64> = (0..c * 9 * 9).map(|i| (i as f64 * 0.17).cos()).collect();
        let lhs: f64 = im2col(&x, c, size).iter().zip(&y).map(|(a, b)| a * b).sum();
        let rhs: f64 = x.iter().zip(col2im(&y, c, size)).map(|(a, b)| a * b).sum();
        assert!((lhs - rhs).abs() < 1e-12);
    }
}
