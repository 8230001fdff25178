//! Seeded turbulence degradation: smooth random tilt, Gaussian blur and
//! additive noise.
//!
//! This is a deliberately simple stand-in for a wave-propagation simulator.
//! It produces the same qualitative damage (local geometric wobble, blur,
//! sensor noise) with every frame a pure function of `(seed, frame_index)`.

mod dataset;

pub use dataset::{
    generate_dataset, load_entry, DatasetManifest, ManifestEntry, MANIFEST_FILE,
    MANIFEST_FORMAT_VERSION,
};

use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::band::Band;
use crate::error::{ensure, Result};
use crate::filter::{gaussian_kernel_3sigma, separable_clamped, separable_valid};
use crate::image::Image;
use crate::rng::{stream, Purpose};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DegradationParams {
    /// Std-dev of each displacement component, pixels.
    pub tilt_sigma: f64,
    /// Gaussian smoothing length of the tilt field, pixels.
    pub tilt_corr: f64,
    /// PSF std-dev, pixels.
    pub blur_sigma: f64,
    /// Additive noise std-dev, sample units.
    pub noise_sigma: f64,
    pub frames: usize,
    pub seed: u64,
}

impl Default for DegradationParams {
    fn default() -> Self {
        DegradationParams {
            tilt_sigma: 1.0,
            tilt_corr: 8.0,
            blur_sigma: 1.2,
            noise_sigma: 0.01,
            frames: 16,
            seed: 0,
        }
    }
}

impl DegradationParams {
    /// No degradation at all.
    pub fn identity(frames: usize, seed: u64) -> Self {
        DegradationParams {
            tilt_sigma: 0.0,
            tilt_corr: 1.0,
            blur_sigma: 0.0,
            noise_sigma: 0.0,
            frames,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("tilt_sigma", self.tilt_sigma),
            ("blur_sigma", self.blur_sigma),
            ("noise_sigma", self.noise_sigma),
        ] {
            ensure!(v.is_finite() && v >= 0.0, "{name} must be a finite value >= 0, got {v}");
        }
        ensure!(
            self.tilt_corr.is_finite() && self.tilt_corr >= 1.0,
            "tilt_corr must be >= 1, got {}",
            self.tilt_corr
        );
        ensure!(self.frames >= 1, "frames must be >= 1");
        Ok(())
    }

    /// Per-frame parameters: every sigma scaled by an independent uniform
    /// draw from `[0.5, 1.5]` keyed on `(seed, frame_index)`.
    pub fn jittered(&self, frame_index: u64) -> DegradationParams {
        let mut rng = stream(self.seed, frame_index, Purpose::Jitter);
        let mut scale = |v: f64| v * rng.random_range(0.5..1.5);
        DegradationParams {
            tilt_sigma: scale(self.tilt_sigma),
            blur_sigma: scale(self.blur_sigma),
            noise_sigma: scale(self.noise_sigma),
            ..*self
        }
    }
}

/// Smooth random displacement field `[dy, dx]` for one frame.
///
/// White Gaussian noise is smoothed with a Gaussian of std `tilt_corr` and
/// rescaled by the kernel's noise gain so each component has marginal std
/// `tilt_sigma`. Noise is drawn on a padded grid so the field is stationary
/// up to the borders.
pub fn sample_tilt_field(h: usize, w: usize, params: &DegradationParams, frame_index: u64) -> Result<[Band; 2]> {
    params.validate()?;
    ensure!(h >= 1 && w >= 1, "tilt field must be at least 1x1");
    if params.tilt_sigma == 0.0 {
        return Ok([Band::zeros(h, w), Band::zeros(h, w)]);
    }
    let kernel = gaussian_kernel_3sigma(params.tilt_corr);
    let gain: f64 = kernel.iter().map(|k| k * k).sum();
    let scale = params.tilt_sigma / gain;
    let pad = kernel.len() - 1;
    let component = |purpose: Purpose| {
        let mut rng = stream(params.seed, frame_index, purpose);
        let noise = Band::from_fn(h + pad, w + pad, |_, _| StandardNormal.sample(&mut rng));
        separable_valid(&noise, &kernel).map(|v| v * scale)
    };
    Ok([component(Purpose::TiltY), component(Purpose::TiltX)])
}

/// One degraded frame: tilt warp, PSF blur, additive noise, clamp to [0, 1].
/// Stages with zero strength are skipped entirely.
pub fn degrade_frame(clean: &Image, params: &DegradationParams, frame_index: u64) -> Result<Image> {
    params.validate()?;
    let (c, h, w) = clean.shape();
    let mut bands = clean.bands();

    if params.tilt_sigma > 0.0 {
        let [ty, tx] = sample_tilt_field(h, w, params, frame_index)?;
        bands = bands
            .iter()
            .map(|b| {
                Band::from_fn(h, w, |y, x| {
                    bilinear_clamped(b, y as f64 + ty.get(y, x), x as f64 + tx.get(y, x))
                })
            })
            .collect();
    }

    if params.blur_sigma > 0.0 {
        let kernel = gaussian_kernel_3sigma(params.blur_sigma);
        bands = bands.iter().map(|b| separable_clamped(b, &kernel)).collect();
    }

    if params.noise_sigma > 0.0 {
        let mut rng = stream(params.seed, frame_index, Purpose::Noise);
        let normal = Normal::new(0.0, params.noise_sigma).expect("sigma validated");
        for b in bands.iter_mut() {
            for v in b.data_mut() {
                *v += normal.sample(&mut rng);
            }
        }
    }

    let out = Image::from_bands(&bands)?.clamp01();
    debug_assert_eq!(out.shape(), (c, h, w));
    Ok(out)
}

pub(crate) fn bilinear_clamped(b: &Band, y: f64, x: f64) -> f64 {
    let (y0, x0) = (y.floor(), x.floor());
    let (fy, fx) = (y - y0, x - x0);
    let (y0, x0) = (y0 as isize, x0 as isize);
    (1.0 - fy) * ((1.0 - fx) * b.get_clamped(y0, x0) + fx * b.get_clamped(y0, x0 + 1))
        + fy * ((1.0 - fx) * b.get_clamped(y0 + 1, x0) + fx * b.get_clamped(y0 + 1, x0 + 1))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mid_gray(h: usize, w: usize) -> Image {
        Image::filled(1, h, w, 0.5)
    }

    fn textured(h: usize, w: usize) -> Image {
        Image::from_fn(1, h, w, |_, y, x| {
            (0.5 + 0.4 * ((y as f32 * 0.7).sin() * (x as f32 * 0.45).cos())).clamp(0.0, 1.0)
        })
    }

    #[test]
    fn zero_tilt_is_zero_field() {
        let p = DegradationParams {
            tilt_sigma: 0.0,
            ..Default::default()
        };
        let [fy, fx] = sample_tilt_field(8, 9, &p, 0).unwrap();
        assert!(fy.data().iter().chain(fx.data()).all(|&v| v == 0.0));
    }

    #[test]
    fn tilt_field_is_deterministic() {
        let p = DegradationParams::default();
        let a = sample_tilt_field(20, 30, &p, 5).unwrap();
        let b = sample_tilt_field(20, 30, &p, 5).unwrap();
        let c = sample_tilt_field(20, 30, &p, 6).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn tilt_field_marginal_std() {
        let p = DegradationParams {
            tilt_sigma: 1.0,
            ..Default::default()
        };
        let (mut sum, mut sq, mut n) = ([0.0; 2], [0.0; 2], 0.0);
        for f in 0..100 {
            let field = sample_tilt_field(256, 256, &p, f).unwrap();
            for (i, comp) in field.iter().enumerate() {
                for &v in comp.data() {
                    sum[i] += v;
                    sq[i] += v * v;
                }
            }
            n += (256 * 256) as f64;
        }
        for i in 0..2 {
            let mean = sum[i] / n;
            let std = (sq[i] / n - mean * mean).sqrt();
            assert!((0.9..=1.1).contains(&std), "component {i} std {std}");
        }
    }

    #[test]
    fn zero_strength_is_identity() {
        let img = textured(17, 23);
        let p = DegradationParams::identity(1, 3);
        assert_eq!(degrade_frame(&img, &p, 0).unwrap(), img);
    }

    #[test]
    fn blur_keeps_constants() {
        let img = Image::filled(3, 12, 12, 0.3);
        let p = DegradationParams {
            blur_sigma: 2.0,
            ..DegradationParams::identity(1, 0)
        };
        assert!(degrade_frame(&img, &p, 0).unwrap().max_abs_diff(&img) < 1e-6);
    }

    #[test]
    fn blur_of_delta_is_sampled_gaussian() {
        let mut img = Image::filled(1, 21, 21, 0.0);
        img.set(0, 10, 10, 1.0);
        let p = DegradationParams {
            blur_sigma: 1.0,
            ..DegradationParams::identity(1, 0)
        };
        let out = degrade_frame(&img, &p, 0).unwrap();
        // Direct 2-D kernel evaluation over the truncated square support.
        let r = 3i32;
        let weight = |dy: i32, dx: i32| (-((dy * dy + dx * dx) as f64) / 2.0).exp();
        let total: f64 = (-r..=r).flat_map(|dy| (-r..=r).map(move |dx| weight(dy, dx))).sum();
        for dy in -r..=r {
            for dx in -r..=r {
                let expect = weight(dy, dx) / total;
                let got = out.get(0, (10 + dy) as usize, (10 + dx) as usize) as f64;
                assert!((got - expect).abs() < 1e-6, "({dy},{dx}) {got} vs {expect}");
            }
        }
        assert_eq!(out.get(0, 10, 14), 0.0);
    }

    #[test]
    fn noise_marginals() {
        let sigma = 0.05;
        let img = mid_gray(128, 128);
        let p = DegradationParams {
            noise_sigma: sigma,
            ..DegradationParams::identity(1, 11)
        };
        let out = degrade_frame(&img, &p, 0).unwrap();
        let n = (128 * 128) as f64;
        let diffs: Vec<f64> = out.data().iter().zip(img.data()).map(|(a, b)| (a - b) as f64).collect();
        let mean = diffs.iter().sum::<f64>() / n;
        let std = (diffs.iter().map(|d| (d - mean) * (d - mean)).sum::<f64>() / n).sqrt();
        assert!(mean.abs() < 4.0 * sigma / n.sqrt(), "mean {mean}");
        assert!((std - sigma).abs() < 0.05 * sigma, "std {std}");
    }

    #[test]
    fn mean_intensity_is_preserved() {
        let img = mid_gray(64, 64);
        let p = DegradationParams {
            seed: 4,
            ..Default::default()
        };
        let out = degrade_frame(&img, &p, 2).unwrap();
        let n = (64 * 64) as f64;
        let mean_out = out.data().iter().map(|&v| v as f64).sum::<f64>() / n;
        // Mid-gray with small noise never clamps.
        assert!((mean_out - 0.5).abs() < 3.0 * p.noise_sigma / n.sqrt());
    }

    #[test]
    fn jitter_stays_in_range() {
        let p = DegradationParams::default();
        for f in 0..50 {
            let j = p.jittered(f);
            for (a, b) in [(j.tilt_sigma, p.tilt_sigma), (j.blur_sigma, p.blur_sigma), (j.noise_sigma, p.noise_sigma)] {
                assert!(a >= 0.5 * b && a < 1.5 * b);
            }
            assert_eq!(j.tilt_corr, p.tilt_corr);
        }
        assert_eq!(p.jittered(3), p.jittered(3));
    }

    #[test]
    fn invalid_params_rejected() {
        let mut p = DegradationParams {
            tilt_corr: 0.5,
            ..Default::default()
        };
        assert!(p.validate().is_err());
        p = DegradationParams::default();
        p.frames = 0;
        assert!(p.validate().is_err());
        p = DegradationParams::default();
        p.noise_sigma = -1.0;
        assert!(degrade_frame(&mid_gray(4, 4), &p, 0).is_err());
    }
}
