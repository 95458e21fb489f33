//! Cross-shutter imaging toolkit.
//!
//! Synthesizes aligned global-shutter blur, rolling-shutter and sharp
//! ground-truth data from high-speed frame sequences, and provides the
//! supporting warps, temporal encodings, distillation masks, losses,
//! robustness perturbations and evaluation metrics.

pub mod dataset;
pub mod distillation;
pub mod encoding;
pub mod error;
pub mod flowops;
pub mod metrics;
pub mod perturbation;
pub mod png_io;
mod rng;
pub mod sft;
pub mod synthesis;
pub mod tensor;

pub use error::{Error, Result};
pub use tensor::{EncodingMap, ExposureSchedule, FlowField, FrameSequence, Image, MaskMap, ScalarField};
