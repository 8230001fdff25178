//! Residual feedback network for x2 upsampling.
//!
//! ```text
//! f   = extract(x)                          3x3 conv
//! h_0 = 0
//! h_t = blocks(f + feedback(h_{t-1}))       1x1 conv, t = 1..T
//! y   = nearest_x2(x) + head(h_T)           2x2/2 transposed conv, relu, 3x3 conv
//! ```
//!
//! `blocks`, `feedback` and `extract` use the same tensors at every step, so
//! the parameter set does not depend on `T`.

use d3net_neural::{Graph, ParamStore, Real, Tensor, Var};
use serde::{Deserialize, Serialize};

use crate::error::{ensure, Result};
use crate::layers::{conv, conv_t, init_conv, init_conv_t, init_res_block, res_block, zero_layer};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RdfdbkConfig {
    pub in_channels: usize,
    pub time_steps: usize,
    pub feature_channels: usize,
    pub residual_blocks: usize,
}

impl Default for RdfdbkConfig {
    fn default() -> Self {
        RdfdbkConfig {
            in_channels: 1,
            time_steps: 3,
            feature_channels: 32,
            residual_blocks: 4,
        }
    }
}

impl RdfdbkConfig {
    pub fn validate(&self) -> Result<()> {
        ensure!(
            self.in_channels == 1 || self.in_channels == 3,
            "in_channels must be 1 or 3, got {}",
            self.in_channels
        );
        ensure!(self.time_steps >= 1, "time_steps must be >= 1");
        ensure!(self.feature_channels >= 1, "feature_channels must be >= 1");
        Ok(())
    }
}

fn block_name(i: usize) -> String {
    format!("blocks.res{i}")
}

pub fn init_params<T: Real>(cfg: &RdfdbkConfig, store: &mut ParamStore<T>) -> Result<()> {
    cfg.validate()?;
    let f = cfg.feature_channels;
    init_conv(store, "extract", f, cfg.in_channels, 3)?;
    init_conv(store, "feedback", f, f, 1)?;
    for i in 0..cfg.residual_blocks {
        init_res_block(store, &block_name(i), f)?;
    }
    init_conv_t(store, "head.up", f, f, 2)?;
    init_conv(store, "head.out", cfg.in_channels, f, 3)?;
    Ok(())
}

/// Zeroes the last head layer; the output becomes `nearest_x2(x)`.
pub fn zero_head<T: Real>(store: &mut ParamStore<T>) {
    zero_layer(store, "head.out");
}

pub fn forward<T: Real>(cfg: &RdfdbkConfig, g: &mut Graph<T>, store: &ParamStore<T>, x: Var) -> Result<Var> {
    let [n, c, h, w] = g.shape(x);
    ensure!(c == cfg.in_channels, "rdfdbk expects {} channels, got {c}", cfg.in_channels);
    let feat = conv(g, store, "extract", x, 1, 1)?;
    let mut hidden = g.input(Tensor::zeros([n, cfg.feature_channels, h, w]));
    for _ in 0..cfg.time_steps {
        let fb = conv(g, store, "feedback", hidden, 1, 0)?;
        let mut cur = g.add(feat, fb)?;
        for i in 0..cfg.residual_blocks {
            cur = res_block(g, store, &block_name(i), cur)?;
        }
        hidden = cur;
    }
    let up = conv_t(g, store, "head.up", hidden, 2, 0)?;
    let up = g.relu(up);
    let residual = conv(g, store, "head.out", up, 1, 1)?;
    let base = g.upsample2(x);
    Ok(g.add(base, residual)?)
}

pub fn infer(cfg: &RdfdbkConfig, store: &ParamStore<f32>, x: &Tensor<f32>) -> Result<Tensor<f32>> {
    let mut g = Graph::new();
    let xv = g.input(x.clone());
    let y = forward(cfg, &mut g, store, xv)?;
    Ok(g.value(y).clone())
}
