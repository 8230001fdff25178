//! Full-reference quality report over (restored, truth) pairs.

use d3net_core::image::{psnr, ssim};
use d3net_core::Image;
use serde::{Deserialize, Serialize};

use crate::error::{ensure, Result};

pub const REPORT_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairMetrics {
    pub id: String,
    pub psnr: f64,
    pub ssim: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub format_version: u32,
    pub pairs: Vec<PairMetrics>,
    pub mean_psnr: f64,
    pub mean_ssim: f64,
}

/// Arithmetic mean accumulated in input order.
pub fn mean(values: impl IntoIterator<Item = f64>) -> f64 {
    let (sum, n) = values.into_iter().fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

pub fn evaluate<'a>(pairs: impl IntoIterator<Item = (&'a str, &'a Image, &'a Image)>) -> Result<EvalReport> {
    let mut rows = Vec::new();
    for (id, restored, truth) in pairs {
        ensure!(
            restored.shape() == truth.shape(),
            "{id}: restored {:?} and truth {:?} differ in shape",
            restored.shape(),
            truth.shape()
        );
        rows.push(PairMetrics {
            id: id.to_owned(),
            psnr: psnr(restored, truth)?,
            ssim: ssim(restored, truth)?,
        });
    }
    ensure!(!rows.is_empty(), "nothing to evaluate");
    Ok(EvalReport {
        format_version: REPORT_FORMAT_VERSION,
        mean_psnr: mean(rows.iter().map(|r| r.psnr)),
        mean_ssim: mean(rows.iter().map(|r| r.ssim)),
        pairs: rows,
    })
}
