//! Method comparison over a dataset with ground truth.

use std::fmt::Write as _;
use std::path::Path;
use std::time::Instant;

use d3net_core::fusion::{frame_average, fuse_sequence, FusionOptions};
use d3net_core::image::{psnr, ssim};
use d3net_core::turbsim::{load_entry, DatasetManifest};
use d3net_core::Image;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::evaluate::mean;
use crate::network::Network;
use crate::restore::restore_fused;

pub const BENCH_FORMAT_VERSION: u32 = 1;
pub const METHODS: [Method; 4] = [Method::Single, Method::Average, Method::Fused, Method::Full];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    /// The temporal middle frame as is.
    Single,
    /// Unregistered per-pixel temporal mean.
    Average,
    /// Inverse transform of the fused wavelet pyramid.
    Fused,
    /// Fusion, denoiser and upsampler.
    Full,
}

impl Method {
    pub fn name(&self) -> &'static str {
        match self {
            Method::Single => "single",
            Method::Average => "average",
            Method::Fused => "fused",
            Method::Full => "full",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub source_id: String,
    pub method: Method,
    pub psnr: f64,
    pub ssim: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wall_ms: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchAggregate {
    pub method: Method,
    pub count: usize,
    pub mean_psnr: f64,
    pub mean_ssim: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub format_version: u32,
    pub tool_version: String,
    pub seed: u64,
    pub config: serde_json::Value,
    pub rows: Vec<BenchRow>,
    pub aggregates: Vec<BenchAggregate>,
}

pub struct BenchOptions<'a> {
    pub fusion: FusionOptions,
    pub d2net: &'a Network,
    pub rdfdbk: &'a Network,
    /// Record wall-clock time per row (makes reports non-reproducible).
    pub timing: bool,
}

fn row(source_id: &str, method: Method, out: &Image, truth: &Image, started: Instant, timing: bool) -> Result<BenchRow> {
    let wall_ms = timing.then(|| started.elapsed().as_secs_f64() * 1e3);
    Ok(BenchRow {
        source_id: source_id.to_owned(),
        method,
        psnr: psnr(out, truth)?,
        ssim: ssim(out, truth)?,
        wall_ms,
    })
}

fn bench_entry(base_dir: &Path, entry: &d3net_core::turbsim::ManifestEntry, opts: &BenchOptions) -> Result<Vec<BenchRow>> {
    let (seq, truth) = load_entry(base_dir, entry)?;
    let id = seq.source_id().to_owned();
    let mut rows = Vec::with_capacity(METHODS.len());

    let t = Instant::now();
    rows.push(row(&id, Method::Single, seq.middle(), &truth, t, opts.timing)?);

    let t = Instant::now();
    let avg = frame_average(&seq);
    rows.push(row(&id, Method::Average, &avg, &truth, t, opts.timing)?);

    let t = Instant::now();
    let fused = fuse_sequence(&seq, &opts.fusion)?;
    let fused_ms = t.elapsed();
    rows.push(row(&id, Method::Fused, &fused.fused_full, &truth, t, opts.timing)?);

    let t = Instant::now();
    let restored = restore_fused(fused, opts.d2net, opts.rdfdbk)?;
    let mut full = row(&id, Method::Full, &restored.image, &truth, t, opts.timing)?;
    if let Some(ms) = full.wall_ms.as_mut() {
        *ms += fused_ms.as_secs_f64() * 1e3;
    }
    rows.push(full);
    Ok(rows)
}

pub fn aggregate(rows: &[BenchRow]) -> Vec<BenchAggregate> {
    METHODS
        .iter()
        .map(|&m| {
            let sel: Vec<&BenchRow> = rows.iter().filter(|r| r.method == m).collect();
            BenchAggregate {
                method: m,
                count: sel.len(),
                mean_psnr: mean(sel.iter().map(|r| r.psnr)),
                mean_ssim: mean(sel.iter().map(|r| r.ssim)),
            }
        })
        .collect()
}

/// Evaluates every method on every manifest entry. Rows are ordered by
/// entry, then by [`METHODS`].
pub fn run_bench(
    base_dir: &Path,
    manifest: &DatasetManifest,
    opts: &BenchOptions,
    seed: u64,
    config: serde_json::Value,
) -> Result<BenchReport> {
    let per_entry = manifest
        .entries
        .par_iter()
        .map(|e| bench_entry(base_dir, e, opts))
        .collect::<Result<Vec<_>>>()?;
    let rows: Vec<BenchRow> = per_entry.into_iter().flatten().collect();
    Ok(BenchReport {
        format_version: BENCH_FORMAT_VERSION,
        tool_version: env!("CARGO_PKG_VERSION").to_owned(),
        seed,
        config,
        aggregates: aggregate(&rows),
        rows,
    })
}

impl BenchReport {
    /// Plain-text table with the same rows and aggregates as the JSON.
    pub fn to_table(&self) -> String {
        let mut out = String::new();
        let timing = self.rows.iter().any(|r| r.wall_ms.is_some());
        let _ = write!(out, "{:<32} {:<8} {:>9} {:>8}", "source", "method", "psnr_db", "ssim");
        if timing {
            let _ = write!(out, " {:>10}", "wall_ms");
        }
        out.push('\n');
        for r in &self.rows {
            let _ = write!(out, "{:<32} {:<8} {:>9.4} {:>8.5}", r.source_id, r.method.name(), r.psnr, r.ssim);
            if let Some(ms) = r.wall_ms {
                let _ = write!(out, " {ms:>10.1}");
            }
            out.push('\n');
        }
        out.push('\n');
        for a in &self.aggregates {
            let _ = writeln!(
                out,
                "{:<32} {:<8} {:>9.4} {:>8.5}",
                format!("mean (n={})", a.count),
                a.method.name(),
                a.mean_psnr,
                a.mean_ssim
            );
        }
        out
    }
}
