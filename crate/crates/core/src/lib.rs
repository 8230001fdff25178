//! Image primitives, wavelet-domain registration and fusion, and a seeded
//! turbulence degradation generator.
//!
//! Everything in this crate is a pure function of its inputs. Stages that
//! process frames independently use rayon internally but always reduce in
//! frame order, so results do not depend on the thread count.

pub mod band;
pub mod error;
pub mod filter;
pub mod fusion;
pub mod image;
pub mod rng;
pub mod scene;
pub mod turbsim;
pub mod wavelet;

pub use band::Band;
pub use error::{CoreError, Result};
pub use image::{FrameSequence, Image};
