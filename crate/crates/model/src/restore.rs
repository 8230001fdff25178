//! End-to-end restoration: fusion, denoising at half resolution, x2 upsampling.

use d3net_core::fusion::{fuse_sequence, FusedResult, FusionOptions};
use d3net_core::{FrameSequence, Image};

use crate::convert::{image_to_tensor, tensor_to_image};
use crate::error::{ensure, ModelError, Result};
use crate::network::{ModelSpec, Network};

#[derive(Debug, Clone)]
pub struct Restored {
    pub image: Image,
    pub fused: FusedResult,
    /// Denoiser output at half resolution, before upsampling.
    pub denoised: Image,
}

fn check_networks(d2net: &Network, rdfdbk: &Network, channels: usize) -> Result<()> {
    ensure!(
        matches!(d2net.spec, ModelSpec::D2net(_)),
        "expected a d2net checkpoint, got {}",
        d2net.spec.name()
    );
    ensure!(
        matches!(rdfdbk.spec, ModelSpec::Rdfdbk(_)),
        "expected an rdfdbk checkpoint, got {}",
        rdfdbk.spec.name()
    );
    for net in [d2net, rdfdbk] {
        ensure!(
            net.spec.in_channels() == channels,
            "{} expects {}-channel images, frames have {channels}",
            net.spec.name(),
            net.spec.in_channels()
        );
    }
    Ok(())
}

pub fn restore(seq: &FrameSequence, d2net: &Network, rdfdbk: &Network, fusion: &FusionOptions) -> Result<Restored> {
    check_networks(d2net, rdfdbk, seq.shape().0)?;
    let fused = fuse_sequence(seq, fusion)
        .map_err(ModelError::from)
        .map_err(ModelError::in_stage("fusion"))?;
    restore_fused(fused, d2net, rdfdbk)
}

/// The network stages applied to an existing fusion result.
pub fn restore_fused(fused: FusedResult, d2net: &Network, rdfdbk: &Network) -> Result<Restored> {
    let (c, h, w) = fused.fused_full.shape();
    check_networks(d2net, rdfdbk, c)?;
    let approx = &fused.fused_approx;
    let (ah, aw) = (approx.height(), approx.width());

    let denoised = (|| -> Result<Image> {
        let ModelSpec::D2net(cfg) = d2net.spec else { unreachable!() };
        let d = cfg.divisor();
        let padded = approx.reflect_pad(ah.next_multiple_of(d) - ah, aw.next_multiple_of(d) - aw)?;
        let out = d2net.infer(&image_to_tensor(&padded))?;
        Ok(tensor_to_image(&out, 0)?.crop(0, 0, ah, aw)?)
    })()
    .map_err(ModelError::in_stage("d2net"))?;

    let image = (|| -> Result<Image> {
        let out = rdfdbk.infer(&image_to_tensor(&denoised))?;
        Ok(tensor_to_image(&out, 0)?.crop(0, 0, h, w)?.clamp01())
    })()
    .map_err(ModelError::in_stage("rdfdbk"))?;

    Ok(Restored {
        image,
        fused,
        denoised,
    })
}
