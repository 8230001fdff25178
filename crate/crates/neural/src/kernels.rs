//! Convolution kernels over NCHW slices.
//!
//! Three primitives cover both convolution and transposed convolution:
//! the forward correlation, its adjoint with respect to the input, and its
//! gradient with respect to the weights. Each lowers to one matrix product
//! against the im2col matrix of the whole batch, so small feature maps at
//! the bottom of a U-Net still give reasonably sized products.

use crate::tensor::{Real, Shape, Strides};

/// Output length of a strided correlation, or `None` if the kernel does not fit.
pub fn conv_out_dim(input: usize, kernel: usize, stride: usize, pad: usize) -> Option<usize> {
    let padded = input + 2 * pad;
    (stride >= 1 && padded >= kernel).then(|| (padded - kernel) / stride + 1)
}

/// Output length of the transposed correlation: `(input - 1) * stride - 2 pad + kernel`.
pub fn conv_t_out_dim(input: usize, kernel: usize, stride: usize, pad: usize) -> Option<usize> {
    ((input.checked_sub(1)? * stride + kernel).checked_sub(2 * pad)).filter(|&d| d >= 1)
}

/// Output indices `o` in `[lo, hi)` whose tap `o * stride + k - pad` lands in `[0, n_in)`.
#[inline]
fn valid_range(n_out: usize, n_in: usize, k: usize, stride: usize, pad: usize) -> (usize, usize) {
    let lo = if pad > k { (pad - k).div_ceil(stride) } else { 0 };
    if n_in + pad < k + 1 {
        return (0, 0);
    }
    let hi = ((n_in - 1 + pad - k) / stride + 1).min(n_out);
    (lo.min(hi), hi)
}

/// Patch matrix `[c * kh * kw, n * oh * ow]`; out-of-bounds taps are zero.
#[allow(clippy::too_many_arguments)]
fn im2col<T: Real>(x: &[T], xs: Shape, kernel: (usize, usize), stride: usize, pad: usize, out_hw: (usize, usize)) -> Vec<T> {
    let [n, c, h, w] = xs;
    let (kh, kw) = kernel;
    let (oh, ow) = out_hw;
    let cols = n * oh * ow;
    let mut col = vec![T::zero(); c * kh * kw * cols];
    for ic in 0..c {
        for ky in 0..kh {
            let (ylo, yhi) = valid_range(oh, h, ky, stride, pad);
            for kx in 0..kw {
                let (xlo, xhi) = valid_range(ow, w, kx, stride, pad);
                if xlo >= xhi {
                    continue;
                }
                let row = &mut col[((ic * kh + ky) * kw + kx) * cols..][..cols];
                for b in 0..n {
                    let plane = &x[(b * c + ic) * h * w..][..h * w];
                    for oy in ylo..yhi {
                        let iy = oy * stride + ky - pad;
                        let src = &plane[iy * w..(iy + 1) * w];
                        let dst = &mut row[(b * oh + oy) * ow..][..ow];
                        for ox in xlo..xhi {
                            dst[ox] = src[ox * stride + kx - pad];
                        }
                    }
                }
            }
        }
    }
    col
}

/// Adjoint of [`im2col`]: scatter-adds a patch matrix back onto the image grid.
fn col2im<T: Real>(col: &[T], xs: Shape, kernel: (usize, usize), stride: usize, pad: usize, out_hw: (usize, usize)) -> Vec<T> {
    let [n, c, h, w] = xs;
    let (kh, kw) = kernel;
    let (oh, ow) = out_hw;
    let cols = n * oh * ow;
    let mut x = vec![T::zero(); n * c * h * w];
    for ic in 0..c {
        for ky in 0..kh {
            let (ylo, yhi) = valid_range(oh, h, ky, stride, pad);
            for kx in 0..kw {
                let (xlo, xhi) = valid_range(ow, w, kx, stride, pad);
                if xlo >= xhi {
                    continue;
                }
                let row = &col[((ic * kh + ky) * kw + kx) * cols..][..cols];
                for b in 0..n {
                    let plane = &mut x[(b * c + ic) * h * w..][..h * w];
                    for oy in ylo..yhi {
                        let iy = oy * stride + ky - pad;
                        let dst = &mut plane[iy * w..(iy + 1) * w];
                        let src = &row[(b * oh + oy) * ow..][..ow];
                        for ox in xlo..xhi {
                            dst[ox * stride + kx - pad] += src[ox];
                        }
                    }
                }
            }
        }
    }
    x
}

/// `[n, o, p]` to `[o, n * p]`.
fn batch_to_rows<T: Real>(g: &[T], n: usize, o: usize, p: usize) -> Vec<T> {
    let mut out = vec![T::zero(); n * o * p];
    for b in 0..n {
        for oc in 0..o {
            out[(oc * n + b) * p..][..p].copy_from_slice(&g[(b * o + oc) * p..][..p]);
        }
    }
    out
}

/// `out[b, o, y, x] = bias[o] + sum_{c,ky,kx} w[o, c, ky, kx] * x[b, c, y*s + ky - p, x*s + kx - p]`
#[allow(clippy::too_many_arguments)]
pub fn conv_forward<T: Real>(
    x: &[T],
    xs: Shape,
    w: &[T],
    ws: Shape,
    bias: Option<&[T]>,
    stride: usize,
    pad: usize,
    out_hw: (usize, usize),
) -> Vec<T> {
    let n = xs[0];
    let [o, c, kh, kw] = ws;
    let (oh, ow) = out_hw;
    let (k, p) = (c * kh * kw, oh * ow);
    let col = im2col(x, xs, (kh, kw), stride, pad, out_hw);
    let mut rows = vec![T::zero(); o * n * p];
    T::gemm(o, k, n * p, w, Strides::row_major(k), &col, Strides::row_major(n * p), T::zero(), &mut rows, Strides::row_major(n * p));
    let mut out = vec![T::zero(); n * o * p];
    for b in 0..n {
        for oc in 0..o {
            let dst = &mut out[(b * o + oc) * p..][..p];
            dst.copy_from_slice(&rows[(oc * n + b) * p..][..p]);
            if let Some(bias) = bias {
                dst.iter_mut().for_each(|v| *v += bias[oc]);
            }
        }
    }
    out
}

/// Adjoint of [`conv_forward`] (without bias) with respect to its input:
/// scatters `g` (shape `[n, o, oh, ow]`) back onto an `in_hw` grid with `c`
/// channels. This is also the forward pass of a transposed convolution.
#[allow(clippy::too_many_arguments)]
pub fn conv_backward_input<T: Real>(
    g: &[T],
    gs: Shape,
    w: &[T],
    ws: Shape,
    stride: usize,
    pad: usize,
    in_hw: (usize, usize),
) -> Vec<T> {
    let [n, o, oh, ow] = gs;
    let [_, c, kh, kw] = ws;
    let (k, p) = (c * kh * kw, oh * ow);
    let grows = batch_to_rows(g, n, o, p);
    let mut col = vec![T::zero(); k * n * p];
    T::gemm(k, o, n * p, w, Strides::transposed(k), &grows, Strides::row_major(n * p), T::zero(), &mut col, Strides::row_major(n * p));
    col2im(&col, [n, c, in_hw.0, in_hw.1], (kh, kw), stride, pad, (oh, ow))
}

/// Gradient of [`conv_forward`] with respect to the weights:
/// `gw[o, c, ky, kx] = sum_{b,y,x} g[b, o, y, x] * x[b, c, y*s + ky - p, x*s + kx - p]`.
pub fn conv_backward_weight<T: Real>(
    x: &[T],
    xs: Shape,
    g: &[T],
    gs: Shape,
    kernel: (usize, usize),
    stride: usize,
    pad: usize,
) -> Vec<T> {
    let c = xs[1];
    let [n, o, oh, ow] = gs;
    let (kh, kw) = kernel;
    let (k, p) = (c * kh * kw, oh * ow);
    let col = im2col(x, xs, kernel, stride, pad, (oh, ow));
    let grows = batch_to_rows(g, n, o, p);
    let mut gw = vec![T::zero(); o * k];
    T::gemm(o, n * p, k, &grows, Strides::row_major(n * p), &col, Strides::transposed(n * p), T::zero(), &mut gw, Strides::row_major(k));
    gw
}

/// Per-channel sum over batch and space.
pub fn channel_sums<T: Real>(g: &[T], gs: Shape) -> Vec<T> {
    let [n, c, h, w] = gs;
    (0..c)
        .map(|ch| {
            let mut acc = T::zero();
            for b in 0..n {
                for &v in &g[(b * c + ch) * h * w..][..h * w] {
                    acc += v;
                }
            }
            acc
        })
        .collect()
}
