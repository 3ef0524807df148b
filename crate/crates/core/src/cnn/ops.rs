//! Forward-only network primitives.

use super::Tensor;
use crate::error::{Error, Result};

/// Same-size 2D convolution with zero padding (`k / 2` on each side).
///
/// `kernel` is laid out `(c_out, c_in, k, k)`, `bias` has `c_out` entries.
pub fn conv2d(input: &Tensor, kernel: &[f32], bias: &[f32], c_out: usize, k: usize) -> Result<Tensor> {
    let (c_in, h, w) = input.shape();
    let taps = c_in * k * k;
    if k != 1 && k != 3 {
        return Err(Error::Contract(format!("unsupported kernel size {k}")));
    }
    if kernel.len() != c_out * taps {
        return Err(Error::Contract(format!(
            "conv2d channel mismatch: kernel has {} values, expected {c_out}x{c_in}x{k}x{k}",
            kernel.len()
        )));
    }
    if bias.len() != c_out {
        return Err(Error::Contract(format!(
            "conv2d bias has {} values, expected {c_out}",
            bias.len()
        )));
    }
    let hw = h * w;
    let cols;
    let col: &[f32] = if k == 1 {
        input.data()
    } else {
        cols = im2col3(input);
        &cols
    };

    let mut out = Tensor::zeros(c_out, h, w);
    for (o, &b) in bias.iter().enumerate() {
        out.plane_mut(o).fill(b);
    }
    // out[c_out, hw] += kernel[c_out, taps] * col[taps, hw]
    unsafe {
        matrixmultiply::sgemm(
            c_out,
            taps,
            hw,
            1.0,
            kernel.as_ptr(),
            taps as isize,
            1,
            col.as_ptr(),
            hw as isize,
            1,
            1.0,
            out.data_mut().as_mut_ptr(),
            hw as isize,
            1,
        );
    }
    Ok(out)
}

/// Unfolds 3×3 zero-padded neighbourhoods into a `(c·9, h·w)` matrix.
fn im2col3(input: &Tensor) -> Vec<f32> {
    let (c, h, w) = input.shape();
    let hw = h * w;
    let mut col = vec![0.0f32; c * 9 * hw];
    for ci in 0..c {
        let plane = input.plane(ci);
        for ky in 0..3 {
            for kx in 0..3 {
                let row = &mut col[((ci * 3 + ky) * 3 + kx) * hw..][..hw];
                for y in 0..h {
                    let sy = y as isize + ky as isize - 1;
                    if sy < 0 || sy >= h as isize {
                        continue;
                    }
                    let src = &plane[sy as usize * w..][..w];
                    let dst = &mut row[y * w..][..w];
                    match kx {
                        0 => dst[1..].copy_from_slice(&src[..w - 1]),
                        1 => dst.copy_from_slice(src),
                        _ => dst[..w - 1].copy_from_slice(&src[1..]),
                    }
                }
            }
        }
    }
    col
}

/// Converts transposed-convolution weights `(c_in, c_out, k, k)` into the
/// equivalent stride-1 convolution kernel `(c_out, c_in, k, k)`.
pub fn transpose_kernel(weights: &[f32], c_in: usize, c_out: usize, k: usize) -> Vec<f32> {
    let mut out = vec![0.0; weights.len()];
    for i in 0..c_in {
        for o in 0..c_out {
            for ky in 0..k {
                for kx in 0..k {
                    out[((o * c_in + i) * k + ky) * k + kx] =
                        weights[((i * c_out + o) * k + (k - 1 - ky)) * k + (k - 1 - kx)];
                }
            }
        }
    }
    out
}

/// Stride-1 transposed convolution with padding `k / 2` (spatial size
/// preserved). `weights` are laid out `(c_in, c_out, k, k)`.
pub fn deconv2d(input: &Tensor, weights: &[f32], bias: &[f32], c_out: usize, k: usize) -> Result<Tensor> {
    let c_in = input.channels();
    if weights.len() != c_in * c_out * k * k {
        return Err(Error::Contract(format!(
            "deconv2d channel mismatch: weights have {} values, expected {c_in}x{c_out}x{k}x{k}",
            weights.len()
        )));
    }
    conv2d(input, &transpose_kernel(weights, c_in, c_out, k), bias, c_out, k)
}

/// Inference-mode batch normalization:
/// `(x − mean) / √(var + eps) · gamma + beta` per channel.
pub fn batchnorm_infer(
    input: &Tensor,
    gamma: &[f32],
    beta: &[f32],
    running_mean: &[f32],
    running_var: &[f32],
    eps: f32,
) -> Result<Tensor> {
    let mut out = input.clone();
    batchnorm_in_place(&mut out, gamma, beta, running_mean, running_var, eps)?;
    Ok(out)
}

pub fn batchnorm_in_place(
    x: &mut Tensor,
    gamma: &[f32],
    beta: &[f32],
    running_mean: &[f32],
    running_var: &[f32],
    eps: f32,
) -> Result<()> {
    let c = x.channels();
    if [gamma.len(), beta.len(), running_mean.len(), running_var.len()]
        .iter()
        .any(|&n| n != c)
    {
        return Err(Error::Contract(format!(
            "batch norm parameters do not match {c} channels"
        )));
    }
    for ch in 0..c {
        let denom = running_var[ch] + eps;
        if !(denom > 0.0) {
            return Err(Error::Contract(format!(
                "batch norm variance + eps is not positive in channel {ch}"
            )));
        }
        let inv = 1.0 / denom.sqrt();
        let (m, g, b) = (running_mean[ch], gamma[ch], beta[ch]);
        for v in x.plane_mut(ch) {
            *v = (*v - m) * inv * g + b;
        }
    }
    Ok(())
}

pub fn leaky_relu_in_place(x: &mut Tensor, slope: f32) {
    for v in x.data_mut() {
        if *v < 0.0 {
            *v *= slope;
        }
    }
}

pub fn leaky_relu(input: &Tensor, slope: f32) -> Tensor {
    let mut out = input.clone();
    leaky_relu_in_place(&mut out, slope);
    out
}

pub fn relu_in_place(x: &mut Tensor) {
    for v in x.data_mut() {
        *v = v.max(0.0);
    }
}

/// 2×2 max pooling with stride 2.
pub fn maxpool2x2(input: &Tensor) -> Result<Tensor> {
    let (c, h, w) = input.shape();
    if h % 2 != 0 || w % 2 != 0 {
        return Err(Error::Contract(format!(
            "maxpool2x2 needs even dimensions, got {h}x{w}"
        )));
    }
    let (oh, ow) = (h / 2, w / 2);
    let mut out = Tensor::zeros(c, oh, ow);
    for ch in 0..c {
        for y in 0..oh {
            for x in 0..ow {
                let m = input
                    .at(ch, 2 * y, 2 * x)
                    .max(input.at(ch, 2 * y, 2 * x + 1))
                    .max(input.at(ch, 2 * y + 1, 2 * x))
                    .max(input.at(ch, 2 * y + 1, 2 * x + 1));
                out.set(ch, y, x, m);
            }
        }
    }
    Ok(out)
}

/// Source index pair and blend factor for 2× bilinear upsampling with
/// half-pixel centers (align-corners off).
fn upsample_taps(dst: usize, n_in: usize) -> (usize, usize, f32) {
    let src = ((dst as f32 + 0.5) * 0.5 - 0.5).max(0.0);
    let i0 = (src.floor() as usize).min(n_in - 1);
    let i1 = (i0 + 1).min(n_in - 1);
    (i0, i1, src - i0 as f32)
}

/// 2× bilinear upsampling with half-pixel centers, edges clamped.
pub fn upsample_bilinear2x2(input: &Tensor) -> Tensor {
    let (c, h, w) = input.shape();
    let (oh, ow) = (2 * h, 2 * w);
    let ys: Vec<_> = (0..oh).map(|y| upsample_taps(y, h)).collect();
    let xs: Vec<_> = (0..ow).map(|x| upsample_taps(x, w)).collect();
    let mut out = Tensor::zeros(c, oh, ow);
    for ch in 0..c {
        for (y, &(y0, y1, ly)) in ys.iter().enumerate() {
            for (x, &(x0, x1, lx)) in xs.iter().enumerate() {
                let top = input.at(ch, y0, x0) * (1.0 - lx) + input.at(ch, y0, x1) * lx;
                let bot = input.at(ch, y1, x0) * (1.0 - lx) + input.at(ch, y1, x1) * lx;
                out.set(ch, y, x, top * (1.0 - ly) + bot * ly);
            }
        }
    }
    out
}

/// Channel concatenation `[a, b]`.
pub fn concat(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    let (ca, h, w) = a.shape();
    let (cb, hb, wb) = b.shape();
    if (h, w) != (hb, wb) {
        return Err(Error::Contract(format!(
            "concat spatial mismatch: {h}x{w} vs {hb}x{wb}"
        )));
    }
    let mut data = Vec::with_capacity((ca + cb) * h * w);
    data.extend_from_slice(a.data());
    data.extend_from_slice(b.data());
    Tensor::from_vec(ca + cb, h, w, data)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn seq_tensor(c: usize, h: usize, w: usize) -> Tensor {
        let data = (0..c * h * w).map(|i| ((i * 37 % 11) as f32) - 5.0).collect();
        Tensor::from_vec(c, h, w, data).unwrap()
    }

    /// Direct 3×3 convolution, used to check the im2col path.
    fn naive_conv(input: &Tensor, kernel: &[f32], bias: &[f32], c_out: usize, k: usize) -> Tensor {
        let (c_in, h, w) = input.shape();
        let pad = (k / 2) as isize;
        let mut out = Tensor::zeros(c_out, h, w);
        for o in 0..c_out {
            for y in 0..h {
                for x in 0..w {
                    let mut acc = bias[o];
                    for i in 0..c_in {
                        for ky in 0..k {
                            for kx in 0..k {
                                let sy = y as isize + ky as isize - pad;
                                let sx = x as isize + kx as isize - pad;
                                if sy < 0 || sx < 0 || sy >= h as isize || sx >= w as isize {
                                    continue;
                                }
                                acc += kernel[((o * c_in + i) * k + ky) * k + kx]
                                    * input.at(i, sy as usize, sx as usize);
                            }
                        }
                    }
                    out.set(o, y, x, acc);
                }
            }
        }
        out
    }

    /// Scatter-form transposed convolution (stride 1, padding 1).
    fn naive_deconv(input: &Tensor, weights: &[f32], c_out: usize) -> Tensor {
        let (c_in, h, w) = input.shape();
        let mut out = Tensor::zeros(c_out, h, w);
        for i in 0..c_in {
            for y in 0..h {
                for x in 0..w {
                    let v = input.at(i, y, x);
                    for o in 0..c_out {
                        for ky in 0..3 {
                            for kx in 0..3 {
                                let oy = y as isize + ky as isize - 1;
                                let ox = x as isize + kx as isize - 1;
                                if oy < 0 || ox < 0 || oy >= h as isize || ox >= w as isize {
                                    continue;
                                }
                                let (oy, ox) = (oy as usize, ox as usize);
                                let cur = out.at(o, oy, ox);
                                out.set(o, oy, ox, cur + v * weights[((i * c_out + o) * 3 + ky) * 3 + kx]);
                            }
                        }
                    }
                }
            }
        }
        out
    }

    #[test]
    fn im2col_matches_direct_convolution() {
        let x = seq_tensor(3, 6, 5);
        let kernel: Vec<f32> = (0..4 * 3 * 9).map(|i| ((i * 13 % 7) as f32 - 3.0) * 0.1).collect();
        let bias = [0.5, -0.25, 0.0, 1.0];
        let fast = conv2d(&x, &kernel, &bias, 4, 3).unwrap();
        let slow = naive_conv(&x, &kernel, &bias, 4, 3);
        assert!(fast.max_abs_diff(&slow) < 1e-5);
    }

    #[test]
    fn deconv_matches_scatter_definition() {
        let x = seq_tensor(2, 4, 4);
        let weights: Vec<f32> = (0..2 * 3 * 9).map(|i| ((i * 5 % 9) as f32 - 4.0) * 0.25).collect();
        let out = deconv2d(&x, &weights, &[0.0; 3], 3, 3).unwrap();
        assert!(out.max_abs_diff(&naive_deconv(&x, &weights, 3)) < 1e-5);
    }

    #[test]
    fn channel_mismatch_is_error() {
        let x = seq_tensor(3, 4, 4);
        assert!(conv2d(&x, &[0.0; 2 * 9], &[0.0], 1, 3).is_err());
    }

    #[test]
    fn pool_picks_max_and_rejects_odd() {
        let x = Tensor::from_vec(1, 2, 2, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(maxpool2x2(&x).unwrap().data(), &[4.0]);
        assert!(maxpool2x2(&Tensor::zeros(1, 3, 2)).is_err());
    }

    #[test]
    fn leaky_relu_slope() {
        let x = Tensor::from_vec(1, 1, 3, vec![-2.0, 0.0, 3.0]).unwrap();
        assert_eq!(leaky_relu(&x, 0.01).data(), &[-0.02, 0.0, 3.0]);
    }

    #[test]
    fn batchnorm_rejects_nonpositive_variance() {
        let x = Tensor::zeros(1, 2, 2);
        assert!(batchnorm_infer(&x, &[1.0], &[0.0], &[0.0], &[-1.0], 1e-5).is_err());
    }
}
