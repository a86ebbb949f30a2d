//! Reference implementation of a real-time ray-tracing denoiser: temporal
//! accumulation with history rectification, variance-guided à-trous
//! filtering (dense or separable, with adaptive start level and iteration
//! count), Reinhard bracketing for the specular channel, and a small
//! deterministic path tracer that produces noisy inputs and references.
//!
//! Every pass is a pure per-pixel map parallelized over rows; see [`par`].

pub mod commands;
pub mod compose;
pub mod config;
pub mod error;
pub mod frame;
pub mod image;
pub mod metrics;
pub mod par;
pub mod pfm;
pub mod pipeline;
pub mod rng;
pub mod scene;
pub mod sequence;
pub mod spatial;
pub mod temporal;
pub mod tonemap;

pub use config::{DenoiseConfig, Feedback, Preset, RectifyMode, ReinhardInverse};
pub use error::{Error, Result};
pub use frame::{ChannelKind, FrameInputs, GBufferFrame, HistoryTexel, TemporalHistory};
pub use image::{Image, Pixel};
pub use pipeline::{run_pipeline, ChannelSelection, Denoiser};
pub use sequence::{load_sequence, save_sequence, FrameSequence};
