//! Four-scale residual U-Net for denoising and deblurring.
//!
//! ```text
//! head 3x3 -> [res x n, 2x2/2 conv] x 3 -> res x n (bottleneck)
//!          -> [+skip, 2x2/2 transposed conv, res x n] x 3 -> +skip -> tail 3x3
//! ```
//!
//! Skips are identity additions of each encoder scale's features into the
//! matching decoder scale. With `global_residual` the tail output is added
//! to the input, so a zeroed tail gives the identity map.

use d3net_neural::{Graph, ParamStore, Real, Tensor, Var};
use serde::{Deserialize, Serialize};

use crate::error::{ensure, Result};
use crate::layers::{conv, conv_t, init_conv, init_conv_t, init_res_block, res_block, zero_layer};

pub const BASE_CHANNELS: [usize; 4] = [64, 128, 256, 512];
pub const SCALES: usize = 4;
const MIN_CHANNELS: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct D2NetConfig {
    pub in_channels: usize,
    /// Channel scale in `(0, 1]` applied to [`BASE_CHANNELS`].
    pub width_multiplier: f64,
    pub residual_blocks: usize,
    pub global_residual: bool,
}

impl Default for D2NetConfig {
    fn default() -> Self {
        D2NetConfig {
            in_channels: 1,
            width_multiplier: 1.0,
            residual_blocks: 2,
            global_residual: true,
        }
    }
}

impl D2NetConfig {
    pub fn validate(&self) -> Result<()> {
        ensure!(
            self.in_channels == 1 || self.in_channels == 3,
            "in_channels must be 1 or 3, got {}",
            self.in_channels
        );
        ensure!(
            self.width_multiplier > 0.0 && self.width_multiplier <= 1.0,
            "width_multiplier must lie in (0, 1], got {}",
            self.width_multiplier
        );
        Ok(())
    }

    /// `round(multiplier * base)`, at least 4.
    pub fn channels(&self) -> [usize; SCALES] {
        BASE_CHANNELS.map(|c| ((c as f64 * self.width_multiplier).round() as usize).max(MIN_CHANNELS))
    }

    /// Spatial sizes must be multiples of this.
    pub fn divisor(&self) -> usize {
        1 << (SCALES - 1)
    }
}

fn res_name(stage: &str, i: usize) -> String {
    format!("{stage}.res{i}")
}

/// Adds freshly initialized D²Net parameters to `store`.
pub fn init_params<T: Real>(cfg: &D2NetConfig, store: &mut ParamStore<T>) -> Result<()> {
    cfg.validate()?;
    let ch = cfg.channels();
    init_conv(store, "head", ch[0], cfg.in_channels, 3)?;
    for s in 0..SCALES - 1 {
        for i in 0..cfg.residual_blocks {
            init_res_block(store, &res_name(&format!("down{s}"), i), ch[s])?;
            init_res_block(store, &res_name(&format!("up{s}"), i), ch[s])?;
        }
        init_conv(store, &format!("down{s}.conv"), ch[s + 1], ch[s], 2)?;
        init_conv_t(store, &format!("up{s}.conv"), ch[s + 1], ch[s], 2)?;
    }
    for i in 0..cfg.residual_blocks {
        init_res_block(store, &res_name("body", i), ch[SCALES - 1])?;
    }
    init_conv(store, "tail", cfg.in_channels, ch[0], 3)?;
    Ok(())
}

/// Zeroes the tail so that, with the global residual, the network is the identity.
pub fn zero_tail<T: Real>(store: &mut ParamStore<T>) {
    zero_layer(store, "tail");
}

pub fn forward<T: Real>(cfg: &D2NetConfig, g: &mut Graph<T>, store: &ParamStore<T>, x: Var) -> Result<Var> {
    let [_, c, h, w] = g.shape(x);
    ensure!(c == cfg.in_channels, "d2net expects {} channels, got {c}", cfg.in_channels);
    let d = cfg.divisor();
    ensure!(
        h % d == 0 && w % d == 0 && h > 0 && w > 0,
        "d2net input {h}x{w} is not divisible by {d}"
    );

    let head = conv(g, store, "head", x, 1, 1)?;
    let mut skips = vec![head];
    let mut cur = head;
    for s in 0..SCALES - 1 {
        for i in 0..cfg.residual_blocks {
            cur = res_block(g, store, &res_name(&format!("down{s}"), i), cur)?;
        }
        cur = conv(g, store, &format!("down{s}.conv"), cur, 2, 0)?;
        skips.push(cur);
    }
    for i in 0..cfg.residual_blocks {
        cur = res_block(g, store, &res_name("body", i), cur)?;
    }
    for s in (0..SCALES - 1).rev() {
        cur = g.add(cur, skips[s + 1])?;
        cur = conv_t(g, store, &format!("up{s}.conv"), cur, 2, 0)?;
        for i in 0..cfg.residual_blocks {
            cur = res_block(g, store, &res_name(&format!("up{s}"), i), cur)?;
        }
    }
    cur = g.add(cur, skips[0])?;
    let out = conv(g, store, "tail", cur, 1, 1)?;
    Ok(if cfg.global_residual { g.add(x, out)? } else { out })
}

/// Inference on a batch tensor.
pub fn infer(cfg: &D2NetConfig, store: &ParamStore<f32>, x: &Tensor<f32>) -> Result<Tensor<f32>> {
    let mut g = Graph::new();
    let xv = g.input(x.clone());
    let y = forward(cfg, &mut g, store, xv)?;
    Ok(g.value(y).clone())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> D2NetConfig {
        D2NetConfig {
            width_multiplier: 1.0 / 16.0,
            ..Default::default()
        }
    }

    #[test]
    fn channel_widths() {
        assert_eq!(D2NetConfig::default().channels(), [64, 128, 256, 512]);
        let eighth = D2NetConfig {
            width_multiplier: 0.125,
            ..Default::default()
        };
        assert_eq!(eighth.channels(), [8, 16, 32, 64]);
        let tiny = D2NetConfig {
            width_multiplier: 0.01,
            ..Default::default()
        };
        assert_eq!(tiny.channels(), [4, 4, 4, 5]);
    }

    #[test]
    fn full_width_parameter_shapes() {
        let cfg = D2NetConfig::default();
        let mut s = ParamStore::<f32>::new(0);
        init_params(&cfg, &mut s).unwrap();
        let out = |n: &str| s.value(n).unwrap().shape()[0];
        assert_eq!(out("head.w"), 64);
        assert_eq!(out("down0.conv.w"), 128);
        assert_eq!(out("down1.conv.w"), 256);
        assert_eq!(out("down2.conv.w"), 512);
        assert_eq!(s.value("body.res0.c1.w").unwrap().shape(), [512, 512, 3, 3]);
        assert_eq!(s.value("up2.conv.w").unwrap().shape(), [512, 256, 2, 2]);
    }

    #[test]
    fn preserves_shape() {
        let cfg = small();
        let mut s = ParamStore::<f32>::new(1);
        init_params(&cfg, &mut s).unwrap();
        for (h, w) in [(8, 8), (16, 24), (32, 32)] {
            let x = Tensor::from_fn([2, 1, h, w], |i| (i % 7) as f32 / 7.0);
            assert_eq!(infer(&cfg, &s, &x).unwrap().shape(), [2, 1, h, w]);
        }
    }

    #[test]
    fn zero_tail_is_identity() {
        let cfg = D2NetConfig {
            in_channels: 3,
            ..small()
        };
        let mut s = ParamStore::<f32>::new(2);
        init_params(&cfg, &mut s).unwrap();
        zero_tail(&mut s);
        let x = Tensor::from_fn([1, 3, 16, 16], |i| ((i * 37) % 101) as f32 / 101.0);
        assert_eq!(infer(&cfg, &s, &x).unwrap(), x);
    }

    #[test]
    fn rejects_bad_input() {
        let cfg = small();
        let mut s = ParamStore::<f32>::new(1);
        init_params(&cfg, &mut s).unwrap();
        assert!(infer(&cfg, &s, &Tensor::zeros([1, 1, 12, 16])).is_err());
        assert!(infer(&cfg, &s, &Tensor::zeros([1, 3, 16, 16])).is_err());
        assert!(D2NetConfig {
            width_multiplier: 0.0,
            ..Default::default()
        }
        .validate()
        .is_err());
    }
}
