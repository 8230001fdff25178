//! Procedural clean scenes for fixtures and toy training sets.
//!
//! Scenes mix smooth shading, flat shapes and rows of small glyph-like
//! strokes, so they contain both edges and fine text-scale detail.

use rand::Rng;

use crate::band::Band;
use crate::filter::{gaussian_kernel_3sigma, separable_clamped};
use crate::image::Image;
use crate::rng::{stream, Purpose};

pub fn synthetic_scene(height: usize, width: usize, channels: usize, seed: u64) -> Image {
    let mut rng = stream(seed, 0, Purpose::Scene);
    let (h, w) = (height as f64, width as f64);

    let base: Vec<f64> = (0..channels).map(|_| rng.random_range(0.25..0.6)).collect();
    let gy: f64 = rng.random_range(-0.25..0.25);
    let gx: f64 = rng.random_range(-0.25..0.25);
    let mut planes: Vec<Band> = base
        .iter()
        .map(|&b| Band::from_fn(height, width, |y, x| b + gy * (y as f64 / h - 0.5) + gx * (x as f64 / w - 0.5)))
        .collect();

    // Flat rectangles and ellipses.
    let shapes = 3 + (height * width / 2048).min(12);
    for _ in 0..shapes {
        let cy = rng.random_range(0.0..h);
        let cx = rng.random_range(0.0..w);
        let ry = rng.random_range(0.06..0.25) * h;
        let rx = rng.random_range(0.06..0.25) * w;
        let ellipse = rng.random_bool(0.5);
        let tone: Vec<f64> = (0..channels).map(|_| rng.random_range(0.1..0.9)).collect();
        for (plane, &t) in planes.iter_mut().zip(&tone) {
            for y in 0..height {
                for x in 0..width {
                    let (dy, dx) = ((y as f64 - cy) / ry, (x as f64 - cx) / rx);
                    let inside = if ellipse { dy * dy + dx * dx <= 1.0 } else { dy.abs() <= 1.0 && dx.abs() <= 1.0 };
                    if inside {
                        plane.set(y, x, t);
                    }
                }
            }
        }
    }

    // A block of glyph-like strokes on a light or dark backdrop.
    let line_h = (height / 10).max(4);
    let lines = rng.random_range(1..=3usize);
    let top = rng.random_range(0..height.saturating_sub(lines * line_h * 2).max(1));
    let ink = rng.random_bool(0.5);
    let (bg, fg) = if ink { (0.85, 0.12) } else { (0.1, 0.9) };
    for line in 0..lines {
        let y0 = top + line * line_h * 2;
        let mut x = rng.random_range(1..(width / 6).max(2));
        while x + line_h < width {
            let glyph_w = rng.random_range(line_h / 2..=line_h).max(2);
            for plane in planes.iter_mut() {
                fill(plane, y0.saturating_sub(1), x.saturating_sub(1), line_h + 2, glyph_w + 2, bg);
            }
            let strokes = rng.random_range(1..=3);
            for _ in 0..strokes {
                let horizontal = rng.random_bool(0.5);
                let (sy, sx, sh, sw) = if horizontal {
                    (y0 + rng.random_range(0..line_h), x, 1 + line_h / 8, glyph_w)
                } else {
                    (y0, x + rng.random_range(0..glyph_w), line_h, 1 + line_h / 8)
                };
                for plane in planes.iter_mut() {
                    fill(plane, sy, sx, sh, sw, fg);
                }
            }
            x += glyph_w + rng.random_range(1..=line_h / 2 + 1);
        }
    }

    // Mild anti-aliasing, then keep away from the clamp limits.
    let aa = gaussian_kernel_3sigma(0.6);
    let bands: Vec<Band> = planes
        .iter()
        .map(|p| separable_clamped(p, &aa).map(|v| v.clamp(0.04, 0.96)))
        .collect();
    Image::from_bands(&bands).expect("scene planes are consistent")
}

fn fill(plane: &mut Band, y0: usize, x0: usize, h: usize, w: usize, value: f64) {
    for y in y0..(y0 + h).min(plane.height()) {
        for x in x0..(x0 + w).min(plane.width()) {
            plane.set(y, x, value);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scenes_are_deterministic_and_in_range() {
        let a = synthetic_scene(64, 48, 3, 5);
        assert_eq!(a, synthetic_scene(64, 48, 3, 5));
        assert_ne!(a, synthetic_scene(64, 48, 3, 6));
        assert!(a.data().iter().all(|&v| (0.0..=1.0).contains(&v)));
        let lum = a.luminance();
        let mean = lum.mean();
        let var = lum.data().iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / lum.data().len() as f64;
        assert!(var > 1e-3, "scene should be textured, var {var}");
    }

    #[test]
    fn tiny_scenes_work() {
        let s = synthetic_scene(8, 8, 1, 0);
        assert_eq!(s.shape(), (1, 8, 8));
    }
}
