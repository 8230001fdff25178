//! Learned stages of the restoration pipeline and the pipeline itself.
//!
//! * [`d2net`]: four-scale residual U-Net that denoises and deblurs the fused
//!   half-resolution approximation,
//! * [`rdfdbk`]: residual feedback network that upsamples it by 2,
//! * [`train`]: seeded L1/ADAM training on patches from a dataset manifest,
//! * [`restore`]: fusion, denoising and upsampling of one frame sequence,
//! * [`evaluate`] and [`bench`]: PSNR/SSIM reports.

pub mod bench;
pub mod convert;
pub mod d2net;
pub mod data;
pub mod error;
pub mod evaluate;
mod layers;
pub mod network;
pub mod rdfdbk;
pub mod restore;
pub mod train;

pub use d2net::D2NetConfig;
pub use data::{build_pairs, PairSource, PatchSampler, TrainPair};
pub use error::{ModelError, Result};
pub use network::{ModelSpec, Network};
pub use rdfdbk::RdfdbkConfig;
pub use restore::{restore, restore_fused, Restored};
pub use train::{train, train_from, LogEntry, TrainConfig, TrainOutcome};
