use super::Image;
use crate::error::{ensure, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kernel {
    Nearest,
    Bilinear,
    /// Catmull-Rom (a = -0.5).
    Bicubic,
}

/// Resamples with pixel-center alignment and edge-clamped boundaries.
///
/// Output pixel `d` samples the source at `(d + 0.5) * in / out - 0.5`.
pub fn resample(img: &Image, new_h: usize, new_w: usize, kernel: Kernel) -> Result<Image> {
    ensure!(new_h >= 1 && new_w >= 1, "resample target must be at least 1x1");
    let (c, h, w) = img.shape();
    if (new_h, new_w) == (h, w) {
        return Ok(img.clone());
    }
    let ys = axis_taps(h, new_h, kernel);
    let xs = axis_taps(w, new_w, kernel);
    Ok(Image::from_fn(c, new_h, new_w, |ch, y, x| {
        let mut acc = 0.0f64;
        for &(sy, wy) in &ys[y] {
            for &(sx, wx) in &xs[x] {
                acc += wy * wx * img.get(ch, sy, sx) as f64;
            }
        }
        acc as f32
    }))
}

/// Per-output-index list of (source index, weight) along one axis.
fn axis_taps(n_in: usize, n_out: usize, kernel: Kernel) -> Vec<Vec<(usize, f64)>> {
    let scale = n_in as f64 / n_out as f64;
    let clamp = |i: i64| i.clamp(0, n_in as i64 - 1) as usize;
    (0..n_out)
        .map(|d| {
            let pos = (d as f64 + 0.5) * scale - 0.5;
            match kernel {
                Kernel::Nearest => {
                    let i = ((d as f64 + 0.5) * scale).floor() as i64;
                    vec![(clamp(i), 1.0)]
                }
                Kernel::Bilinear => {
                    let i0 = pos.floor();
                    let t = pos - i0;
                    vec![(clamp(i0 as i64), 1.0 - t), (clamp(i0 as i64 + 1), t)]
                }
                Kernel::Bicubic => {
                    let i0 = pos.floor();
                    let t = pos - i0;
                    (-1..=2)
                        .map(|k| (clamp(i0 as i64 + k), catmull_rom(k as f64 - t)))
                        .collect()
                }
            }
        })
        .collect()
}

fn catmull_rom(x: f64) -> f64 {
    const A: f64 = -0.5;
    let x = x.abs();
    if x <= 1.0 {
        ((A + 2.0) * x - (A + 3.0)) * x * x + 1.0
    } else if x < 2.0 {
        ((A * x - 5.0 * A) * x + 8.0 * A) * x - 4.0 * A
    } else {
        0.0
    }
}
