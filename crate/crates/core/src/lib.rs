//! Refine motion vectors taken from compressed video so they approximate
//! dense optical flow.
//!
//! The crate covers the whole loop: a block-matching codec simulator that
//! produces compressed-domain streams ([`codec`]), the MVD1 dump format that
//! carries them ([`dumpio`]), I-frame confidence maps ([`confidence`]), the
//! refinement pipeline itself ([`refine`]), a Lucas–Kanade reference flow
//! ([`oracle`]), and evaluation and rendering helpers.
//!
//! ```
//! use mvrefine::{codec, refine, synth};
//!
//! let scene = synth::synthesize(&synth::SynthSpec::new(synth::SceneKind::Translate, 64, 48, 4))?;
//! let gop = codec::encode_gop(scene.sequence.frames(), 4)?;
//! let refined = refine::refine_gop(&gop, &refine::RefineConfig::default())?;
//! assert_eq!(refined.len(), 3);
//! assert_eq!(refined[2].get(30, 20), (6.0, 3.0));
//! # Ok::<(), mvrefine::Error>(())
//! ```

pub mod bench;
pub mod codec;
pub mod confidence;
pub mod dumpio;
pub mod error;
pub mod eval;
pub mod flow;
pub mod gop;
pub mod mv;
pub mod oracle;
pub mod plane;
pub mod pnm;
pub mod refine;
pub mod synth;
pub mod viz;

pub use confidence::{ConfidenceMap, GradientField, GradientKernel};
pub use dumpio::{DumpHeader, FrameRecord, FrameType};
pub use error::{Error, Result};
pub use eval::FlowStats;
pub use flow::FlowField;
pub use gop::{GopStream, PFrame, RawSequence};
pub use mv::{MotionVector, MotionVectorField};
pub use oracle::LkConfig;
pub use plane::{LumaPlane, Plane, ResidualPlane};
pub use refine::{RefineConfig, TraceField};

/// Worker count from `MVREFINE_THREADS` (unset or unparsable means 0, i.e. all cores).
pub fn threads_from_env() -> usize {
    std::env::var("MVREFINE_THREADS").ok().and_then(|v| v.trim().parse().ok()).unwrap_or(0)
}
