//! Live novel-view streaming engine.
//!
//! A multi-view input stream is reduced to low-resolution keyframe renders
//! by a spatial stage (Gaussian splatting), the frame between each keyframe
//! pair is interpolated, and every emitted frame is upscaled 2x. The
//! [`scheduler`] assembles the result into a gap-free output stream and keeps
//! per-stage latency accounts.

pub mod camera;
pub mod error;
pub mod frame;
pub mod gaussian;
pub mod metrics;
pub mod scheduler;
pub mod snapshot;
pub mod stages;
pub mod synthetic;
pub mod wire;

pub use error::{Error, Result};
pub use frame::FrameBuffer;
