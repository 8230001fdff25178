//! Small separable filters shared by the metric, fusion and degradation code.

use crate::band::Band;

/// Normalized 1-D Gaussian taps for offsets `-radius..=radius`.
pub fn gaussian_kernel(sigma: f64, radius: usize) -> Vec<f64> {
    assert!(sigma > 0.0, "gaussian sigma must be positive");
    let r = radius as i64;
    let taps: Vec<f64> = (-r..=r)
        .map(|i| (-((i * i) as f64) / (2.0 * sigma * sigma)).exp())
        .collect();
    let sum: f64 = taps.iter().sum();
    taps.into_iter().map(|t| t / sum).collect()
}

/// Gaussian taps truncated at `ceil(3 sigma)` and renormalized to unit sum.
pub fn gaussian_kernel_3sigma(sigma: f64) -> Vec<f64> {
    gaussian_kernel(sigma, (3.0 * sigma).ceil() as usize)
}

/// Separable filtering over fully-contained windows only; the output shrinks
/// by `kernel.len() - 1` in each dimension.
pub fn separable_valid(band: &Band, kernel: &[f64]) -> Band {
    let k = kernel.len();
    let (h, w) = band.dims();
    assert!(h >= k && w >= k, "band smaller than kernel");
    let (oh, ow) = (h - k + 1, w - k + 1);
    let mut rows = vec![0.0; h * ow];
    for y in 0..h {
        let src = band.row(y);
        for x in 0..ow {
            rows[y * ow + x] = kernel.iter().zip(&src[x..x + k]).map(|(a, b)| a * b).sum();
        }
    }
    Band::from_fn(oh, ow, |y, x| {
        kernel
            .iter()
            .enumerate()
            .map(|(i, t)| t * rows[(y + i) * ow + x])
            .sum()
    })
}

/// Same-size separable filtering with edge-clamped boundaries.
pub fn separable_clamped(band: &Band, kernel: &[f64]) -> Band {
    let r = (kernel.len() / 2) as isize;
    let (h, w) = band.dims();
    let horizontal = Band::from_fn(h, w, |y, x| {
        kernel
            .iter()
            .enumerate()
            .map(|(i, t)| t * band.get_clamped(y as isize, x as isize + i as isize - r))
            .sum()
    });
    Band::from_fn(h, w, |y, x| {
        kernel
            .iter()
            .enumerate()
            .map(|(i, t)| t * horizontal.get_clamped(y as isize + i as isize - r, x as isize))
            .sum()
    })
}

/// Mean over the `(2r+1)^2` window around each pixel, restricted to in-bounds
/// samples.
pub fn box_mean(band: &Band, radius: usize) -> Band {
    let (h, w) = band.dims();
    // Summed-area table with a zero first row/column.
    let mut sat = vec![0.0; (h + 1) * (w + 1)];
    for y in 0..h {
        let mut run = 0.0;
        for x in 0..w {
            run += band.get(y, x);
            sat[(y + 1) * (w + 1) + x + 1] = sat[y * (w + 1) + x + 1] + run;
        }
    }
    Band::from_fn(h, w, |y, x| {
        let y0 = y.saturating_sub(radius);
        let x0 = x.saturating_sub(radius);
        let y1 = (y + radius + 1).min(h);
        let x1 = (x + radius + 1).min(w);
        let s = sat[y1 * (w + 1) + x1] - sat[y0 * (w + 1) + x1] - sat[y1 * (w + 1) + x0]
            + sat[y0 * (w + 1) + x0];
        s / ((y1 - y0) * (x1 - x0)) as f64
    })
}

/// Binary erosion with a 3x3 structuring element; samples outside the band
/// count as 0, so the 1-pixel border is always cleared.
pub fn erode3x3(mask: &Band) -> Band {
    let (h, w) = mask.dims();
    Band::from_fn(h, w, |y, x| {
        if y == 0 || x == 0 || y + 1 == h || x + 1 == w {
            return 0.0;
        }
        let all = (y - 1..=y + 1).all(|yy| (x - 1..=x + 1).all(|xx| mask.get(yy, xx) > 0.5));
        if all {
            1.0
        } else {
            0.0
        }
    })
}
