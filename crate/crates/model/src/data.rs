//! Training pairs and the seeded patch sampler.

use std::path::Path;

use d3net_core::fusion::{fuse_sequence, FusionOptions};
use d3net_core::rng::{stream, Purpose};
use d3net_core::turbsim::{load_entry, DatasetManifest};
use d3net_core::Image;
use d3net_neural::{Real, Tensor};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{ensure, Result};

/// An aligned (degraded, clean) pair. The target is either the input's size
/// or twice it (rounded up input side for odd targets).
#[derive(Debug, Clone, PartialEq)]
pub struct TrainPair {
    pub input: Image,
    pub target: Image,
}

impl TrainPair {
    pub fn new(input: Image, target: Image) -> Result<Self> {
        let (ci, hi, wi) = input.shape();
        let (ct, ht, wt) = target.shape();
        ensure!(ci == ct, "pair channels differ: {ci} vs {ct}");
        let same = hi == ht && wi == wt;
        let double = hi == ht.div_ceil(2) && wi == wt.div_ceil(2);
        ensure!(same || double, "pair sizes {hi}x{wi} and {ht}x{wt} are not 1:1 or 1:2");
        Ok(TrainPair { input, target })
    }

    pub fn scale(&self) -> usize {
        if self.input.height() == self.target.height() && self.input.width() == self.target.width() {
            1
        } else {
            2
        }
    }
}

/// How pairs are derived from a dataset manifest.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PairSource {
    /// Every degraded frame against its ground truth, full resolution.
    Frames,
    /// The fused half-resolution approximation of each sequence against the
    /// block-mean downsampled ground truth: what the restoration pipeline
    /// feeds the denoiser.
    Fused,
    /// Block-mean downsampled ground truth against the ground truth, for the
    /// x2 upsampler.
    Downsampled,
}

impl std::str::FromStr for PairSource {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "frames" => Ok(PairSource::Frames),
            "fused" => Ok(PairSource::Fused),
            "downsampled" => Ok(PairSource::Downsampled),
            other => Err(format!("unknown pair source {other:?} (frames, fused, downsampled)")),
        }
    }
}

pub fn build_pairs(
    base_dir: &Path,
    manifest: &DatasetManifest,
    source: PairSource,
    fusion: &FusionOptions,
) -> Result<Vec<TrainPair>> {
    ensure!(!manifest.entries.is_empty(), "manifest has no entries");
    let per_entry = manifest
        .entries
        .par_iter()
        .map(|entry| -> Result<Vec<TrainPair>> {
            let (seq, clean) = load_entry(base_dir, entry)?;
            Ok(match source {
                PairSource::Frames => seq
                    .frames()
                    .iter()
                    .map(|f| TrainPair::new(f.clone(), clean.clone()))
                    .collect::<Result<_>>()?,
                PairSource::Fused => {
                    let fused = fuse_sequence(&seq, fusion)?;
                    vec![TrainPair::new(fused.fused_approx, clean.downsample2())?]
                }
                PairSource::Downsampled => vec![TrainPair::new(clean.downsample2(), clean)?],
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(per_entry.into_iter().flatten().collect())
}

/// Draws aligned batches of square patches; batch `t` depends only on
/// `(seed, t)` and the pair list.
#[derive(Debug, Clone)]
pub struct PatchSampler<'a> {
    pairs: &'a [TrainPair],
    /// Target patch side.
    patch: usize,
    scale: usize,
    channels: usize,
    seed: u64,
}

impl<'a> PatchSampler<'a> {
    pub fn new(pairs: &'a [TrainPair], patch: usize, seed: u64) -> Result<Self> {
        ensure!(!pairs.is_empty(), "no training pairs");
        ensure!(patch >= 8 && patch.is_multiple_of(2), "patch size must be even and >= 8, got {patch}");
        let scale = pairs[0].scale();
        let channels = pairs[0].input.channels();
        for p in pairs {
            ensure!(p.scale() == scale, "training pairs mix 1:1 and 1:2 sizes");
            ensure!(p.input.channels() == channels, "training pairs mix channel counts");
            let (_, h, w) = p.target.shape();
            ensure!(h >= patch && w >= patch, "patch {patch} is larger than a {h}x{w} training image");
        }
        Ok(PatchSampler {
            pairs,
            patch,
            scale,
            channels,
            seed,
        })
    }

    pub fn scale(&self) -> usize {
        self.scale
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    /// `(input, target)` batches of shape `[n, c, patch / scale, ..]` and
    /// `[n, c, patch, ..]`.
    pub fn batch<T: Real>(&self, t: u64, n: usize) -> (Tensor<T>, Tensor<T>) {
        let mut rng = stream(self.seed, t, Purpose::Patches);
        let (p, s, c) = (self.patch, self.scale, self.channels);
        let pi = p / s;
        let mut input = Vec::with_capacity(n * c * pi * pi);
        let mut target = Vec::with_capacity(n * c * p * p);
        for _ in 0..n {
            let pair = &self.pairs[rng.random_range(0..self.pairs.len())];
            let (_, h, w) = pair.target.shape();
            let yi = rng.random_range(0..=(h - p) / s);
            let xi = rng.random_range(0..=(w - p) / s);
            for ch in 0..c {
                for y in 0..pi {
                    for x in 0..pi {
                        input.push(T::lit(pair.input.get(ch, yi + y, xi + x) as f64));
                    }
                }
            }
            for ch in 0..c {
                for y in 0..p {
                    for x in 0..p {
                        target.push(T::lit(pair.target.get(ch, yi * s + y, xi * s + x) as f64));
                    }
                }
            }
        }
        (
            Tensor::new([n, c, pi, pi], input).expect("batch layout"),
            Tensor::new([n, c, p, p], target).expect("batch layout"),
        )
    }
}
