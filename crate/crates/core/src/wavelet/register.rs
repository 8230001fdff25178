//! Global translation estimation by phase correlation, and the bilinear warp
//! that applies it.

use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::band::Band;
use crate::error::{ensure, Result};

/// Estimated translation of a moving band relative to a reference:
/// `moving(y, x) ~ reference(y - dy, x - dx)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShiftEstimate {
    pub dy: f64,
    pub dx: f64,
    /// Correlation peak over total correlation energy, in `[0, 1]`.
    pub confidence: f64,
}

impl ShiftEstimate {
    pub const ZERO: ShiftEstimate = ShiftEstimate {
        dy: 0.0,
        dx: 0.0,
        confidence: 0.0,
    };
}

/// Offsets within this distance of an integer are reported as that integer.
const INTEGER_SNAP: f64 = 1e-6;
/// Cross-power bins with magnitude below this are dropped.
const SPECTRUM_EPS: f64 = 1e-12;

pub fn estimate_shift(reference: &Band, moving: &Band) -> Result<ShiftEstimate> {
    ensure!(
        reference.dims() == moving.dims(),
        "registration needs equal band sizes, got {:?} and {:?}",
        reference.dims(),
        moving.dims()
    );
    let (h, w) = reference.dims();
    ensure!(h.min(w) >= 8, "registration needs bands of at least 8x8, got {h}x{w}");

    let mut planner = FftPlanner::<f64>::new();
    let fa = fft2(&mut planner, reference);
    let fb = fft2(&mut planner, moving);

    // Normalized cross-power spectrum, DC excluded so constant offsets
    // between frames do not matter.
    let mut cross: Vec<Complex64> = fa
        .iter()
        .zip(&fb)
        .map(|(a, b)| {
            let c = a.conj() * b;
            let mag = c.norm();
            if mag > SPECTRUM_EPS {
                c / mag
            } else {
                Complex64::new(0.0, 0.0)
            }
        })
        .collect();
    cross[0] = Complex64::new(0.0, 0.0);
    if cross.iter().all(|c| c.re == 0.0 && c.im == 0.0) {
        return Ok(ShiftEstimate::ZERO);
    }

    let corr = ifft2(&mut planner, &mut cross, h, w);
    let energy: f64 = corr.iter().map(|v| v * v).sum();
    let (peak_idx, peak) = corr
        .iter()
        .copied()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |best, (i, v)| if v > best.1 { (i, v) } else { best });
    let (py, px) = (peak_idx / w, peak_idx % w);

    // 3x3 centroid with wrap-around, negative lobes ignored.
    let (mut sum, mut sy, mut sx) = (0.0, 0.0, 0.0);
    for oy in -1i64..=1 {
        for ox in -1i64..=1 {
            let yy = (py as i64 + oy).rem_euclid(h as i64) as usize;
            let xx = (px as i64 + ox).rem_euclid(w as i64) as usize;
            let v = corr[yy * w + xx].max(0.0);
            sum += v;
            sy += v * oy as f64;
            sx += v * ox as f64;
        }
    }
    let (fy, fx) = if sum > 0.0 { (sy / sum, sx / sum) } else { (0.0, 0.0) };

    let dy = principal(py as f64 + fy, h);
    let dx = principal(px as f64 + fx, w);
    let confidence = if energy > 0.0 { (peak / energy).clamp(0.0, 1.0) } else { 0.0 };
    Ok(ShiftEstimate {
        dy: snap(dy),
        dx: snap(dx),
        confidence,
    })
}

fn principal(v: f64, n: usize) -> f64 {
    let n = n as f64;
    let mut v = v.rem_euclid(n);
    if v > n / 2.0 {
        v -= n;
    }
    v
}

fn snap(v: f64) -> f64 {
    let r = v.round();
    let out = if (v - r).abs() < INTEGER_SNAP { r } else { v };
    // Avoid -0.0 in reports.
    out + 0.0
}

fn fft2(planner: &mut FftPlanner<f64>, band: &Band) -> Vec<Complex64> {
    let (h, w) = band.dims();
    let mut data: Vec<Complex64> = band.data().iter().map(|&v| Complex64::new(v, 0.0)).collect();
    transform2(planner, &mut data, h, w, false);
    data
}

fn ifft2(planner: &mut FftPlanner<f64>, data: &mut [Complex64], h: usize, w: usize) -> Vec<f64> {
    transform2(planner, data, h, w, true);
    let scale = 1.0 / (h * w) as f64;
    data.iter().map(|c| c.re * scale).collect()
}

fn transform2(planner: &mut FftPlanner<f64>, data: &mut [Complex64], h: usize, w: usize, inverse: bool) {
    let (row_fft, col_fft) = if inverse {
        (planner.plan_fft_inverse(w), planner.plan_fft_inverse(h))
    } else {
        (planner.plan_fft_forward(w), planner.plan_fft_forward(h))
    };
    for row in data.chunks_exact_mut(w) {
        row_fft.process(row);
    }
    let mut col = vec![Complex64::new(0.0, 0.0); h];
    for x in 0..w {
        for y in 0..h {
            col[y] = data[y * w + x];
        }
        col_fft.process(&mut col);
        for y in 0..h {
            data[y * w + x] = col[y];
        }
    }
}

/// Warps `band` by `(-dy, -dx)` so a frame displaced by `(dy, dx)` lands on
/// the reference grid: `out(y, x) = band(y + dy, x + dx)`, bilinear.
///
/// The mask is 1 where every interpolation tap with nonzero weight lies
/// inside the source. Outside the mask values are edge-clamped samples.
pub fn apply_shift(band: &Band, dy: f64, dx: f64) -> Result<(Band, Band)> {
    let (h, w) = band.dims();
    let limit = h.min(w) as f64 / 2.0;
    ensure!(
        dy.is_finite() && dx.is_finite() && dy.abs() < limit && dx.abs() < limit,
        "shift ({dy}, {dx}) outside the allowed range +/-{limit}"
    );
    let (iy, fy) = split(dy);
    let (ix, fx) = split(dx);
    let mut out = Band::zeros(h, w);
    let mut mask = Band::zeros(h, w);
    for y in 0..h {
        let y0 = y as i64 + iy;
        let y_ok = y0 >= 0 && y0 < h as i64 && (fy == 0.0 || y0 + 1 < h as i64);
        for x in 0..w {
            let x0 = x as i64 + ix;
            let x_ok = x0 >= 0 && x0 < w as i64 && (fx == 0.0 || x0 + 1 < w as i64);
            let (y0c, x0c) = (y0 as isize, x0 as isize);
            let v = (1.0 - fy) * ((1.0 - fx) * band.get_clamped(y0c, x0c) + fx * band.get_clamped(y0c, x0c + 1))
                + fy * ((1.0 - fx) * band.get_clamped(y0c + 1, x0c) + fx * band.get_clamped(y0c + 1, x0c + 1));
            out.set(y, x, v);
            if y_ok && x_ok {
                mask.set(y, x, 1.0);
            }
        }
    }
    Ok((out, mask))
}

/// `(floor, fraction)` with the fraction in `[0, 1)`.
fn split(v: f64) -> (i64, f64) {
    let f = v.floor();
    (f as i64, v - f)
}
