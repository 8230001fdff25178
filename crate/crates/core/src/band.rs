//! Single-channel double-precision plane.
//!
//! Wavelet coefficients, fusion maps and registration inputs are all stored as
//! `Band`s. Images keep `f32` samples; the numeric stages widen to `f64` so
//! energy and linearity identities hold to tight tolerances.

use crate::error::{ensure, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Band {
    height: usize,
    width: usize,
    data: Vec<f64>,
}

impl Band {
    pub fn new(height: usize, width: usize, data: Vec<f64>) -> Result<Self> {
        ensure!(height >= 1 && width >= 1, "band must be at least 1x1, got {height}x{width}");
        ensure!(
            data.len() == height * width,
            "band data length {} does not match {height}x{width}",
            data.len()
        );
        Ok(Band { height, width, data })
    }

    pub fn zeros(height: usize, width: usize) -> Self {
        Band::filled(height, width, 0.0)
    }

    pub fn filled(height: usize, width: usize, value: f64) -> Self {
        assert!(height >= 1 && width >= 1, "band must be at least 1x1");
        Band {
            height,
            width,
            data: vec![value; height * width],
        }
    }

    pub fn from_fn(height: usize, width: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        assert!(height >= 1 && width >= 1, "band must be at least 1x1");
        let mut data = Vec::with_capacity(height * width);
        for y in 0..height {
            for x in 0..width {
                data.push(f(y, x));
            }
        }
        Band { height, width, data }
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn dims(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    #[inline]
    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn get(&self, y: usize, x: usize) -> f64 {
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, y: usize, x: usize, value: f64) {
        self.data[y * self.width + x] = value;
    }

    /// Sample with coordinates clamped into the band.
    #[inline]
    pub fn get_clamped(&self, y: isize, x: isize) -> f64 {
        let y = y.clamp(0, self.height as isize - 1) as usize;
        let x = x.clamp(0, self.width as isize - 1) as usize;
        self.get(y, x)
    }

    pub fn row(&self, y: usize) -> &[f64] {
        &self.data[y * self.width..(y + 1) * self.width]
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Band {
        Band {
            height: self.height,
            width: self.width,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn energy(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum()
    }

    pub fn mean(&self) -> f64 {
        self.data.iter().sum::<f64>() / self.data.len() as f64
    }

    pub fn max_abs_diff(&self, other: &Band) -> f64 {
        assert_eq!(self.dims(), other.dims(), "band dimension mismatch");
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// Circular shift: `out[y][x] = self[y - dy][x - dx]` with wrap-around.
    pub fn circshift(&self, dy: isize, dx: isize) -> Band {
        let (h, w) = (self.height as isize, self.width as isize);
        Band::from_fn(self.height, self.width, |y, x| {
            let sy = (y as isize - dy).rem_euclid(h) as usize;
            let sx = (x as isize - dx).rem_euclid(w) as usize;
            self.get(sy, sx)
        })
    }

    /// Block-mean downsampling to `out_h x out_w` using `factor x factor` blocks.
    /// Partial blocks at the far edges average only the in-bounds samples.
    pub fn block_mean(&self, factor: usize, out_h: usize, out_w: usize) -> Band {
        assert!(factor >= 1);
        Band::from_fn(out_h, out_w, |by, bx| {
            let y0 = (by * factor).min(self.height - 1);
            let x0 = (bx * factor).min(self.width - 1);
            let y1 = ((by + 1) * factor).min(self.height).max(y0 + 1);
            let x1 = ((bx + 1) * factor).min(self.width).max(x0 + 1);
            let mut acc = 0.0;
            for y in y0..y1 {
                for x in x0..x1 {
                    acc += self.get(y, x);
                }
            }
            acc / ((y1 - y0) * (x1 - x0)) as f64
        })
    }
}
