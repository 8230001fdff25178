//! Planar floating-point images and frame sequences.

mod io;
mod metrics;
mod resample;

pub use io::{load_image, save_image};
pub use metrics::{psnr, ssim, PSNR_CAP_DB};
pub use resample::{resample, Kernel};

use crate::band::Band;
use crate::error::{ensure, Result};

/// Rec. 601 luma weights.
pub const LUMA_WEIGHTS: [f32; 3] = [0.299, 0.587, 0.114];

/// Planar raster, `channels x height x width`, channel-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    channels: usize,
    height: usize,
    width: usize,
    data: Vec<f32>,
}

impl Image {
    pub fn new(channels: usize, height: usize, width: usize, data: Vec<f32>) -> Result<Self> {
        ensure!(
            channels == 1 || channels == 3,
            "images have 1 or 3 channels, got {channels}"
        );
        ensure!(height >= 1 && width >= 1, "image must be at least 1x1, got {height}x{width}");
        ensure!(
            data.len() == channels * height * width,
            "image data length {} does not match {channels}x{height}x{width}",
            data.len()
        );
        ensure!(data.iter().all(|v| v.is_finite()), "image samples must be finite");
        Ok(Image {
            channels,
            height,
            width,
            data,
        })
    }

    pub fn filled(channels: usize, height: usize, width: usize, value: f32) -> Self {
        Image::new(channels, height, width, vec![value; channels * height * width])
            .expect("invalid image shape")
    }

    pub fn from_fn(
        channels: usize,
        height: usize,
        width: usize,
        mut f: impl FnMut(usize, usize, usize) -> f32,
    ) -> Self {
        let mut data = Vec::with_capacity(channels * height * width);
        for c in 0..channels {
            for y in 0..height {
                for x in 0..width {
                    data.push(f(c, y, x));
                }
            }
        }
        Image::new(channels, height, width, data).expect("invalid image")
    }

    /// Builds an image from one band per channel, narrowing to `f32`.
    pub fn from_bands(bands: &[Band]) -> Result<Self> {
        ensure!(!bands.is_empty(), "no bands");
        let (h, w) = bands[0].dims();
        ensure!(
            bands.iter().all(|b| b.dims() == (h, w)),
            "channel bands differ in size"
        );
        let data = bands
            .iter()
            .flat_map(|b| b.data().iter().map(|&v| v as f32))
            .collect();
        Image::new(bands.len(), h, w, data)
    }

    #[inline]
    pub fn channels(&self) -> usize {
        self.channels
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    /// `(channels, height, width)`
    #[inline]
    pub fn shape(&self) -> (usize, usize, usize) {
        (self.channels, self.height, self.width)
    }

    #[inline]
    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f32> {
        self.data
    }

    #[inline]
    pub fn get(&self, c: usize, y: usize, x: usize) -> f32 {
        self.data[(c * self.height + y) * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, c: usize, y: usize, x: usize, value: f32) {
        self.data[(c * self.height + y) * self.width + x] = value;
    }

    pub fn channel(&self, c: usize) -> &[f32] {
        let n = self.height * self.width;
        &self.data[c * n..(c + 1) * n]
    }

    pub fn channel_band(&self, c: usize) -> Band {
        Band::new(
            self.height,
            self.width,
            self.channel(c).iter().map(|&v| v as f64).collect(),
        )
        .expect("channel dims are valid")
    }

    pub fn bands(&self) -> Vec<Band> {
        (0..self.channels).map(|c| self.channel_band(c)).collect()
    }

    /// Luminance plane: the channel itself for gray, Rec. 601 luma for RGB.
    pub fn luminance(&self) -> Band {
        if self.channels == 1 {
            return self.channel_band(0);
        }
        let n = self.height * self.width;
        let data = (0..n)
            .map(|i| {
                (0..3)
                    .map(|c| LUMA_WEIGHTS[c] as f64 * self.data[c * n + i] as f64)
                    .sum()
            })
            .collect();
        Band::new(self.height, self.width, data).expect("luminance dims are valid")
    }

    pub fn map(&self, f: impl Fn(f32) -> f32) -> Image {
        Image::new(
            self.channels,
            self.height,
            self.width,
            self.data.iter().map(|&v| f(v)).collect(),
        )
        .expect("map produced a non-finite sample")
    }

    pub fn clamp01(&self) -> Image {
        self.map(|v| v.clamp(0.0, 1.0))
    }

    pub fn max_abs_diff(&self, other: &Image) -> f32 {
        assert_eq!(self.shape(), other.shape(), "image shape mismatch");
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f32::max)
    }

    /// Block-mean downsampling by 2; odd trailing rows/cols average what exists.
    pub fn downsample2(&self) -> Image {
        let (h, w) = (self.height.div_ceil(2), self.width.div_ceil(2));
        let bands: Vec<Band> = self
            .bands()
            .iter()
            .map(|b| b.block_mean(2, h, w))
            .collect();
        Image::from_bands(&bands).expect("downsampled bands are consistent")
    }

    /// Copy of the rectangle `[y0, y0 + h) x [x0, x0 + w)`.
    pub fn crop(&self, y0: usize, x0: usize, h: usize, w: usize) -> Result<Image> {
        ensure!(
            y0 + h <= self.height && x0 + w <= self.width && h >= 1 && w >= 1,
            "crop {h}x{w} at ({y0},{x0}) exceeds {}x{}",
            self.height,
            self.width
        );
        Ok(Image::from_fn(self.channels, h, w, |c, y, x| {
            self.get(c, y0 + y, x0 + x)
        }))
    }

    /// Mirror padding (edge sample not repeated) on the bottom and right.
    pub fn reflect_pad(&self, pad_bottom: usize, pad_right: usize) -> Result<Image> {
        ensure!(
            pad_bottom < self.height.max(2) && pad_right < self.width.max(2),
            "reflect padding ({pad_bottom},{pad_right}) too large for {}x{}",
            self.height,
            self.width
        );
        let reflect = |i: usize, n: usize| -> usize {
            if n == 1 {
                0
            } else if i < n {
                i
            } else {
                2 * (n - 1) - i
            }
        };
        Ok(Image::from_fn(
            self.channels,
            self.height + pad_bottom,
            self.width + pad_right,
            |c, y, x| self.get(c, reflect(y, self.height), reflect(x, self.width)),
        ))
    }
}

/// Ordered, dimension-consistent frames of one scene.
#[derive(Debug, Clone)]
pub struct FrameSequence {
    frames: Vec<Image>,
    source_id: String,
}

impl FrameSequence {
    pub fn new(frames: Vec<Image>, source_id: impl Into<String>) -> Result<Self> {
        ensure!(!frames.is_empty(), "a frame sequence needs at least one frame");
        let shape = frames[0].shape();
        ensure!(
            frames.iter().all(|f| f.shape() == shape),
            "all frames in a sequence must share channels and dimensions"
        );
        Ok(FrameSequence {
            frames,
            source_id: source_id.into(),
        })
    }

    pub fn frames(&self) -> &[Image] {
        &self.frames
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn source_id(&self) -> &str {
        &self.source_id
    }

    /// `(channels, height, width)` shared by every frame.
    pub fn shape(&self) -> (usize, usize, usize) {
        self.frames[0].shape()
    }

    /// Index of the temporal middle frame.
    pub fn middle_index(&self) -> usize {
        self.frames.len() / 2
    }

    pub fn middle(&self) -> &Image {
        &self.frames[self.middle_index()]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_shapes() {
        assert!(Image::new(2, 2, 2, vec![0.0; 8]).is_err());
        assert!(Image::new(1, 0, 2, vec![]).is_err());
        assert!(Image::new(1, 2, 2, vec![0.0; 3]).is_err());
        assert!(Image::new(1, 1, 1, vec![f32::NAN]).is_err());
    }

    #[test]
    fn sequence_requires_equal_frames() {
        let a = Image::filled(1, 4, 4, 0.0);
        let b = Image::filled(1, 4, 5, 0.0);
        assert!(FrameSequence::new(vec![], "x").is_err());
        assert!(FrameSequence::new(vec![a.clone(), b], "x").is_err());
        let seq = FrameSequence::new(vec![a.clone(), a.clone(), a], "x").unwrap();
        assert_eq!(seq.middle_index(), 1);
    }

    #[test]
    fn reflect_pad_mirrors_interior() {
        let img = Image::from_fn(1, 3, 3, |_, y, x| (y * 3 + x) as f32);
        let p = img.reflect_pad(2, 1).unwrap();
        assert_eq!(p.shape(), (1, 5, 4));
        assert_eq!(p.get(0, 3, 0), img.get(0, 1, 0));
        assert_eq!(p.get(0, 4, 0), img.get(0, 0, 0));
        assert_eq!(p.get(0, 0, 3), img.get(0, 0, 1));
    }

    #[test]
    fn luminance_of_gray_rgb_is_gray() {
        let img = Image::filled(3, 2, 2, 0.4);
        for &v in img.luminance().data() {
            assert!((v - 0.4).abs() < 1e-6);
        }
    }
}
