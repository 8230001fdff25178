//! Registration-aware multi-frame fusion in the wavelet domain.
//!
//! Frames are registered onto the temporal middle frame, scored per pixel by
//! three maps and combined coefficient-by-coefficient:
//!
//! * boundary: the registration validity mask eroded by one pixel,
//! * similarity: `exp(-mad / sigma_s) * sharpness`, where `mad` is the
//!   ROI-mean absolute deviation from the temporal median and sharpness is
//!   the ROI-mean level-1 detail energy, normalized by the per-pixel maximum
//!   across frames,
//! * priority: `similarity * boundary`, normalized across frames into the
//!   fusion weights.
//!
//! Weights live at full resolution; each wavelet band uses their block mean
//! at the band's resolution.

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::band::Band;
use crate::error::{ensure, CoreError, Result};
use crate::filter::{box_mean, erode3x3};
use crate::image::{save_image, FrameSequence, Image};
use crate::wavelet::{apply_shift, dwt2_forward, dwt2_inverse, estimate_shift, Family, ShiftEstimate, WaveletPyramid};

const WEIGHT_SUM_EPS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FusionOptions {
    pub levels: usize,
    pub family: Family,
    /// Odd ROI window side, pixels.
    pub roi_size: usize,
    /// Intensity-similarity scale, sample units.
    pub sigma_s: f64,
}

impl Default for FusionOptions {
    fn default() -> Self {
        FusionOptions {
            levels: 2,
            family: Family::Haar,
            roi_size: 7,
            sigma_s: 0.1,
        }
    }
}

impl FusionOptions {
    pub fn validate(&self) -> Result<()> {
        ensure!(self.levels >= 1, "fusion needs at least one wavelet level");
        ensure!(
            self.roi_size >= 3 && self.roi_size % 2 == 1,
            "roi_size must be odd and >= 3, got {}",
            self.roi_size
        );
        ensure!(self.sigma_s > 0.0 && self.sigma_s.is_finite(), "sigma_s must be positive");
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FusionMaps {
    pub priority: Vec<Band>,
    pub boundary: Vec<Band>,
    pub similarity: Vec<Band>,
    pub weights: Vec<Band>,
    pub roi_size: usize,
}

#[derive(Debug, Clone)]
pub struct FusedResult {
    /// Level-1 fused approximation divided by its DC gain (2), clamped to
    /// `[0, 1]`; half resolution.
    pub fused_approx: Image,
    /// Full inverse transform of the fused pyramid.
    pub fused_full: Image,
    pub maps: FusionMaps,
    pub shifts: Vec<ShiftEstimate>,
    pub reference_index: usize,
}

/// Per-pixel median across frames (mean of the two middle values for even
/// counts).
pub fn temporal_median(frames: &[Band]) -> Band {
    assert!(!frames.is_empty());
    let (h, w) = frames[0].dims();
    let mut scratch = vec![0.0; frames.len()];
    Band::from_fn(h, w, |y, x| {
        for (s, f) in scratch.iter_mut().zip(frames) {
            *s = f.get(y, x);
        }
        scratch.sort_by(f64::total_cmp);
        let n = scratch.len();
        if n % 2 == 1 {
            scratch[n / 2]
        } else {
            0.5 * (scratch[n / 2 - 1] + scratch[n / 2])
        }
    })
}

/// Level-1 Haar detail energy per pixel, replicated back to full resolution.
fn detail_energy(frame: &Band) -> Band {
    let (h, w) = frame.dims();
    if h < 2 || w < 2 {
        return Band::zeros(h, w);
    }
    let pyr = dwt2_forward(frame, 1, Family::Haar).expect("dims checked");
    let d = pyr.details();
    Band::from_fn(h, w, |y, x| {
        let (by, bx) = (y / 2, x / 2);
        d.iter().map(|b| b.band.get(by, bx).powi(2)).sum()
    })
}

pub fn compute_similarity(frames: &[Band], median: &Band, roi_size: usize, sigma_s: f64) -> Result<Vec<Band>> {
    ensure!(!frames.is_empty(), "no frames");
    ensure!(roi_size >= 3 && roi_size % 2 == 1, "roi_size must be odd and >= 3, got {roi_size}");
    let dims = median.dims();
    ensure!(frames.iter().all(|f| f.dims() == dims), "frames and median differ in size");
    if frames.len() < 2 {
        return Ok(frames.iter().map(|_| Band::filled(dims.0, dims.1, 1.0)).collect());
    }
    let radius = roi_size / 2;
    let energies: Vec<Band> = frames
        .par_iter()
        .map(|f| box_mean(&detail_energy(f), radius))
        .collect();
    let deviations: Vec<Band> = frames
        .par_iter()
        .map(|f| {
            let abs = Band::new(
                dims.0,
                dims.1,
                f.data().iter().zip(median.data()).map(|(a, b)| (a - b).abs()).collect(),
            )
            .expect("same dims");
            box_mean(&abs, radius)
        })
        .collect();

    let n = dims.0 * dims.1;
    let max_energy: Vec<f64> = (0..n)
        .map(|i| energies.iter().map(|e| e.data()[i]).fold(0.0, f64::max))
        .collect();
    Ok(energies
        .iter()
        .zip(&deviations)
        .map(|(e, d)| {
            let data = (0..n)
                .map(|i| {
                    let sharp = if max_energy[i] > 0.0 { e.data()[i] / max_energy[i] } else { 1.0 };
                    ((-d.data()[i] / sigma_s).exp() * sharp).clamp(0.0, 1.0)
                })
                .collect();
            Band::new(dims.0, dims.1, data).expect("same dims")
        })
        .collect())
}

/// Validity masks eroded by one pixel.
pub fn compute_boundary(masks: &[Band]) -> Vec<Band> {
    masks.iter().map(erode3x3).collect()
}

/// Returns `(priority, weights)`. Weights sum to one at every pixel.
pub fn compute_priority(similarity: &[Band], boundary: &[Band]) -> Result<(Vec<Band>, Vec<Band>)> {
    ensure!(!similarity.is_empty(), "no frames");
    ensure!(similarity.len() == boundary.len(), "map counts differ");
    let dims = similarity[0].dims();
    ensure!(
        similarity.iter().chain(boundary).all(|b| b.dims() == dims),
        "map sizes differ"
    );
    let k = similarity.len();
    let n = dims.0 * dims.1;
    let priority: Vec<Band> = similarity
        .iter()
        .zip(boundary)
        .map(|(s, b)| {
            Band::new(dims.0, dims.1, s.data().iter().zip(b.data()).map(|(s, b)| s * b).collect())
                .expect("same dims")
        })
        .collect();

    let mut weights = vec![vec![0.0; n]; k];
    for i in 0..n {
        let total: f64 = priority.iter().map(|p| p.data()[i]).sum();
        if total > WEIGHT_SUM_EPS {
            for (w, p) in weights.iter_mut().zip(&priority) {
                w[i] = p.data()[i] / total;
            }
            continue;
        }
        let valid = boundary.iter().filter(|b| b.data()[i] > 0.5).count();
        for (w, b) in weights.iter_mut().zip(boundary) {
            w[i] = if valid == 0 {
                1.0 / k as f64
            } else if b.data()[i] > 0.5 {
                1.0 / valid as f64
            } else {
                0.0
            };
        }
    }
    let weights = weights
        .into_iter()
        .map(|w| Band::new(dims.0, dims.1, w).expect("same dims"))
        .collect();
    Ok((priority, weights))
}

/// Per-coefficient weighted sum of pyramids. `weights[k]` is a full
/// resolution field, block-mean reduced to each band's resolution.
pub fn fuse_pyramids(pyramids: &[WaveletPyramid], weights: &[Band]) -> Result<WaveletPyramid> {
    ensure!(!pyramids.is_empty(), "no pyramids to fuse");
    ensure!(pyramids.len() == weights.len(), "need one weight field per pyramid");
    let first = &pyramids[0];
    ensure!(
        pyramids
            .iter()
            .all(|p| p.source_dims() == first.source_dims() && p.levels() == first.levels() && p.family() == first.family()),
        "pyramids differ in structure"
    );
    ensure!(
        weights.iter().all(|w| w.dims() == first.source_dims()),
        "weight fields must match the source dimensions"
    );
    let levels = first.band_levels();
    let mut fused = first.clone();
    for (band_idx, (out, &level)) in fused.bands_mut().zip(&levels).enumerate() {
        let (bh, bw) = out.dims();
        let reduced: Vec<Band> = weights.iter().map(|w| w.block_mean(1 << level, bh, bw)).collect();
        let coefs: Vec<&Band> = pyramids.iter().map(|p| p.bands().nth(band_idx).expect("same structure")).collect();
        for (i, v) in out.data_mut().iter_mut().enumerate() {
            *v = coefs.iter().zip(&reduced).map(|(c, w)| w.data()[i] * c.data()[i]).sum();
        }
    }
    Ok(fused)
}

/// Fuses already-registered frames with explicit weights. Returns
/// `(fused_full, fused_approx)`.
pub fn fuse_registered(frames: &[Image], weights: &[Band], opts: &FusionOptions) -> Result<(Image, Image)> {
    ensure!(!frames.is_empty(), "no frames");
    let channels = frames[0].channels();
    let mut full = Vec::with_capacity(channels);
    let mut approx = Vec::with_capacity(channels);
    for c in 0..channels {
        let pyramids = frames
            .par_iter()
            .map(|f| dwt2_forward(&f.channel_band(c), opts.levels, opts.family))
            .collect::<Result<Vec<_>>>()?;
        let fused = fuse_pyramids(&pyramids, weights)?;
        full.push(dwt2_inverse(&fused)?);
        approx.push(fused.approx_at(1)?.map(|v| (v / 2.0).clamp(0.0, 1.0)));
    }
    Ok((Image::from_bands(&full)?, Image::from_bands(&approx)?))
}

/// Registered frames, validity masks and shift estimates relative to frame
/// `reference`.
pub fn register_sequence(seq: &FrameSequence, reference: usize) -> Result<(Vec<Image>, Vec<Band>, Vec<ShiftEstimate>)> {
    ensure!(reference < seq.len(), "reference index out of range");
    let (_, h, w) = seq.shape();
    let ref_lum = seq.frames()[reference].luminance();
    let results = seq
        .frames()
        .par_iter()
        .enumerate()
        .map(|(k, frame)| {
            let mut shift = if k == reference || h.min(w) < 8 {
                ShiftEstimate::ZERO
            } else {
                estimate_shift(&ref_lum, &frame.luminance())?
            };
            let limit = h.min(w) as f64 / 2.0;
            if shift.dy.abs() >= limit || shift.dx.abs() >= limit {
                shift = ShiftEstimate::ZERO;
            }
            let mut mask = None;
            let mut bands = Vec::with_capacity(frame.channels());
            for band in frame.bands() {
                let (warped, m) = apply_shift(&band, shift.dy, shift.dx)?;
                bands.push(warped);
                mask.get_or_insert(m);
            }
            Ok((Image::from_bands(&bands)?, mask.expect("at least one channel"), shift))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut frames = Vec::with_capacity(results.len());
    let mut masks = Vec::with_capacity(results.len());
    let mut shifts = Vec::with_capacity(results.len());
    for (f, m, s) in results {
        frames.push(f);
        masks.push(m);
        shifts.push(s);
    }
    Ok((frames, masks, shifts))
}

/// Register, score, and fuse a sequence onto its middle frame.
pub fn fuse_sequence(seq: &FrameSequence, opts: &FusionOptions) -> Result<FusedResult> {
    opts.validate()?;
    let (_, h, w) = seq.shape();
    ensure!(
        h.min(w) >= 1 << opts.levels,
        "{h}x{w} frames are too small for {} wavelet levels",
        opts.levels
    );
    let reference_index = seq.middle_index();
    let (registered, masks, shifts) = register_sequence(seq, reference_index)?;

    let lum: Vec<Band> = registered.iter().map(Image::luminance).collect();
    let median = temporal_median(&lum);
    let similarity = compute_similarity(&lum, &median, opts.roi_size, opts.sigma_s)?;
    let boundary = compute_boundary(&masks);
    let (priority, weights) = compute_priority(&similarity, &boundary)?;

    let (fused_full, fused_approx) = fuse_registered(&registered, &weights, opts)?;
    Ok(FusedResult {
        fused_approx,
        fused_full,
        maps: FusionMaps {
            priority,
            boundary,
            similarity,
            weights,
            roi_size: opts.roi_size,
        },
        shifts,
        reference_index,
    })
}

/// Unregistered per-pixel temporal mean.
pub fn frame_average(seq: &FrameSequence) -> Image {
    let (c, h, w) = seq.shape();
    let n = seq.len() as f64;
    let mut acc = vec![0.0f64; c * h * w];
    for f in seq.frames() {
        for (a, &v) in acc.iter_mut().zip(f.data()) {
            *a += v as f64;
        }
    }
    Image::new(c, h, w, acc.into_iter().map(|v| (v / n) as f32).collect()).expect("mean of valid frames")
}

impl FusedResult {
    /// Writes maps and fused images as PFM files under `dir`.
    pub fn dump(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| CoreError::Io {
            path: dir.to_path_buf(),
            source: e,
        })?;
        save_image(&self.fused_full, dir.join("fused_full.pfm"))?;
        save_image(&self.fused_approx, dir.join("fused_approx.pfm"))?;
        let sets = [
            ("priority", &self.maps.priority),
            ("boundary", &self.maps.boundary),
            ("similarity", &self.maps.similarity),
            ("weight", &self.maps.weights),
        ];
        for (name, maps) in sets {
            for (k, m) in maps.iter().enumerate() {
                save_image(&Image::from_bands(std::slice::from_ref(m))?, dir.join(format!("{name}_{k:03}.pfm")))?;
            }
        }
        Ok(())
    }
}
