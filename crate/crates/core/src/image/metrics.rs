//! Full-reference quality metrics.

use super::Image;
use crate::band::Band;
use crate::error::{ensure, Result};
use crate::filter::{gaussian_kernel, separable_valid};

/// Reported PSNR when the images are (numerically) identical.
pub const PSNR_CAP_DB: f64 = 99.0;

const SSIM_WINDOW: usize = 11;
const SSIM_SIGMA: f64 = 1.5;
const SSIM_K1: f64 = 0.01;
const SSIM_K2: f64 = 0.03;

/// PSNR in dB with peak 1.0 over all channels, capped at [`PSNR_CAP_DB`].
pub fn psnr(a: &Image, b: &Image) -> Result<f64> {
    ensure!(
        a.shape() == b.shape(),
        "psnr needs equal shapes, got {:?} and {:?}",
        a.shape(),
        b.shape()
    );
    let sse: f64 = a
        .data()
        .iter()
        .zip(b.data())
        .map(|(&x, &y)| {
            let d = x as f64 - y as f64;
            d * d
        })
        .sum();
    let mse = sse / a.data().len() as f64;
    if mse < 1e-12 {
        return Ok(PSNR_CAP_DB);
    }
    Ok((10.0 * (1.0 / mse).log10()).min(PSNR_CAP_DB))
}

/// Mean SSIM over all fully-contained 11x11 Gaussian windows (sigma 1.5),
/// computed on luminance.
pub fn ssim(a: &Image, b: &Image) -> Result<f64> {
    ensure!(
        a.shape() == b.shape(),
        "ssim needs equal shapes, got {:?} and {:?}",
        a.shape(),
        b.shape()
    );
    ensure!(
        a.height().min(a.width()) >= SSIM_WINDOW,
        "ssim needs images of at least {SSIM_WINDOW}x{SSIM_WINDOW}, got {}x{}",
        a.height(),
        a.width()
    );
    Ok(ssim_bands(&a.luminance(), &b.luminance()))
}

fn ssim_bands(x: &Band, y: &Band) -> f64 {
    let kernel = gaussian_kernel(SSIM_SIGMA, SSIM_WINDOW / 2);
    let c1 = SSIM_K1 * SSIM_K1;
    let c2 = SSIM_K2 * SSIM_K2;
    let xx = x.map(|v| v * v);
    let yy = y.map(|v| v * v);
    let xy = Band::new(
        x.height(),
        x.width(),
        x.data().iter().zip(y.data()).map(|(a, b)| a * b).collect(),
    )
    .expect("same dims");

    let mu_x = separable_valid(x, &kernel);
    let mu_y = separable_valid(y, &kernel);
    let e_xx = separable_valid(&xx, &kernel);
    let e_yy = separable_valid(&yy, &kernel);
    let e_xy = separable_valid(&xy, &kernel);

    let n = mu_x.data().len();
    let mut total = 0.0;
    for i in 0..n {
        let (mx, my) = (mu_x.data()[i], mu_y.data()[i]);
        let var_x = e_xx.data()[i] - mx * mx;
        let var_y = e_yy.data()[i] - my * my;
        let cov = e_xy.data()[i] - mx * my;
        total += ((2.0 * mx * my + c1) * (2.0 * cov + c2))
            / ((mx * mx + my * my + c1) * (var_x + var_y + c2));
    }
    total / n as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    fn noise_image(c: usize, h: usize, w: usize, seed: u64) -> Image {
        let mut s = seed.wrapping_mul(0x9E3779B97F4A7C15) | 1;
        Image::from_fn(c, h, w, |_, _, _| {
            s ^= s << 13;
            s ^= s >> 7;
            s ^= s << 17;
            (s >> 40) as f32 / (1u64 << 24) as f32
        })
    }

    #[test]
    fn psnr_of_identical_is_capped() {
        let a = noise_image(3, 9, 9, 1);
        assert_eq!(psnr(&a, &a).unwrap(), PSNR_CAP_DB);
    }

    #[test]
    fn psnr_constant_offset() {
        let a = Image::filled(1, 8, 8, 0.0);
        let b = Image::filled(1, 8, 8, 0.1);
        // 0.1f32 is not exactly 0.1, so compare loosely.
        assert!((psnr(&a, &b).unwrap() - 20.0).abs() < 1e-5);
    }

    #[test]
    fn psnr_matches_two_pass_oracle_and_is_symmetric() {
        for seed in 0..20 {
            let a = noise_image(3, 13, 17, seed);
            let b = noise_image(3, 13, 17, seed + 100);
            // Two-pass oracle: differences first, then mean of squares.
            let diffs: Vec<f64> = a
                .data()
                .iter()
                .zip(b.data())
                .map(|(&x, &y)| x as f64 - y as f64)
                .collect();
            let mse = diffs.iter().map(|d| d * d).sum::<f64>() / diffs.len() as f64;
            let oracle = 10.0 * (1.0 / mse).log10();
            let got = psnr(&a, &b).unwrap();
            assert!((got - oracle).abs() < 1e-9);
            assert_eq!(got.to_bits(), psnr(&b, &a).unwrap().to_bits());
        }
    }

    #[test]
    fn psnr_rejects_mismatch() {
        let a = Image::filled(1, 8, 8, 0.0);
        let b = Image::filled(1, 8, 9, 0.0);
        assert!(psnr(&a, &b).is_err());
    }

    #[test]
    fn ssim_of_identical_is_one() {
        let a = noise_image(3, 24, 20, 3);
        assert!((ssim(&a, &a).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn ssim_constant_pair_closed_form() {
        let a = Image::filled(1, 16, 16, 0.3);
        let b = Image::filled(1, 16, 16, 0.7);
        let (x, y) = (0.3f32 as f64, 0.7f32 as f64);
        let c1 = 0.01f64 * 0.01;
        let expected = (2.0 * x * y + c1) / (x * x + y * y + c1);
        assert!((ssim(&a, &b).unwrap() - expected).abs() < 1e-9);
    }

    /// Direct per-window evaluation: for every window position, weighted
    /// moments are accumulated from scratch with the 2-D Gaussian weights.
    fn ssim_oracle(a: &Band, b: &Band) -> f64 {
        let r = 5i64;
        let mut weights = vec![];
        for dy in -r..=r {
            for dx in -r..=r {
                weights.push((-((dy * dy + dx * dx) as f64) / (2.0 * 1.5 * 1.5)).exp());
            }
        }
        let wsum: f64 = weights.iter().sum();
        let (h, w) = a.dims();
        let (c1, c2) = (1e-4, 9e-4);
        let mut total = 0.0;
        let mut count = 0;
        for cy in 5..h - 5 {
            for cx in 5..w - 5 {
                let (mut mx, mut my) = (0.0, 0.0);
                let mut k = 0;
                for dy in -r..=r {
                    for dx in -r..=r {
                        let (yy, xx) = ((cy as i64 + dy) as usize, (cx as i64 + dx) as usize);
                        mx += weights[k] * a.get(yy, xx);
                        my += weights[k] * b.get(yy, xx);
                        k += 1;
                    }
                }
                mx /= wsum;
                my /= wsum;
                let (mut vx, mut vy, mut cov) = (0.0, 0.0, 0.0);
                k = 0;
                for dy in -r..=r {
                    for dx in -r..=r {
                        let (yy, xx) = ((cy as i64 + dy) as usize, (cx as i64 + dx) as usize);
                        let (p, q) = (a.get(yy, xx) - mx, b.get(yy, xx) - my);
                        vx += weights[k] * p * p;
                        vy += weights[k] * q * q;
                        cov += weights[k] * p * q;
                        k += 1;
                    }
                }
                vx /= wsum;
                vy /= wsum;
                cov /= wsum;
                total += ((2.0 * mx * my + c1) * (2.0 * cov + c2))
                    / ((mx * mx + my * my + c1) * (vx + vy + c2));
                count += 1;
            }
        }
        total / count as f64
    }

    #[test]
    fn ssim_matches_window_loop_oracle() {
        for seed in 0..5 {
            let a = noise_image(1, 23, 29, seed);
            let b = noise_image(1, 23, 29, seed + 50).map(|v| 0.5 * v);
            let mixed = Image::from_fn(1, 23, 29, |_, y, x| 0.7 * a.get(0, y, x) + b.get(0, y, x));
            let got = ssim(&a, &mixed).unwrap();
            let oracle = ssim_oracle(&a.luminance(), &mixed.luminance());
            assert!((got - oracle).abs() < 1e-6, "{got} vs {oracle}");
        }
    }

    #[test]
    fn ssim_rgb_uses_luminance() {
        let a = noise_image(3, 16, 16, 9);
        let b = noise_image(3, 16, 16, 10);
        let la = Image::from_bands(&[a.luminance()]).unwrap();
        let lb = Image::from_bands(&[b.luminance()]).unwrap();
        let rgb = ssim(&a, &b).unwrap();
        let gray = ssim_bands(&a.luminance(), &b.luminance());
        assert_eq!(rgb, gray);
        assert!((ssim(&la, &lb).unwrap() - rgb).abs() < 1e-5);
    }

    #[test]
    fn ssim_rejects_small_images() {
        let a = Image::filled(1, 10, 30, 0.0);
        assert!(ssim(&a, &a).is_err());
    }
}
