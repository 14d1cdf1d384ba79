//! Raw frame sequences and decoded compressed-domain GOPs.

use crate::dumpio::FrameRecord;
use crate::error::{Error, Result};
use crate::mv::{displacement_bound, MotionVectorField};
use crate::plane::{LumaPlane, ResidualPlane};

/// Uncompressed luma frames sharing one size.
#[derive(Clone, Debug, PartialEq)]
pub struct RawSequence {
    width: usize,
    height: usize,
    frames: Vec<LumaPlane>,
}

impl RawSequence {
    pub fn new(frames: Vec<LumaPlane>) -> Result<Self> {
        let first = frames.first().ok_or_else(|| Error::validation("sequence has no frames"))?;
        let (width, height) = first.dims();
        check_frames(&frames, width, height)?;
        Ok(RawSequence { width, height, frames })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn frames(&self) -> &[LumaPlane] {
        &self.frames
    }

    pub fn into_frames(self) -> Vec<LumaPlane> {
        self.frames
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }
}

pub(crate) fn check_frames(frames: &[LumaPlane], width: usize, height: usize) -> Result<()> {
    if width == 0 || height == 0 {
        return Err(Error::validation("frames must have nonzero dimensions"));
    }
    for (i, f) in frames.iter().enumerate() {
        if f.dims() != (width, height) {
            return Err(Error::frame(
                i,
                format!("frame is {}x{}, expected {width}x{height}", f.width(), f.height()),
            ));
        }
    }
    Ok(())
}

/// One predicted frame: block motion plus per-pixel correction.
#[derive(Clone, Debug, PartialEq)]
pub struct PFrame {
    pub mv: MotionVectorField,
    pub residual: ResidualPlane,
}

/// An I-frame followed by the P-frames that depend on it.
#[derive(Clone, Debug, PartialEq)]
pub struct GopStream {
    pub iframe: LumaPlane,
    pub pframes: Vec<PFrame>,
}

impl GopStream {
    pub fn width(&self) -> usize {
        self.iframe.width()
    }

    pub fn height(&self) -> usize {
        self.iframe.height()
    }

    /// Frames in the GOP, counting the I-frame.
    pub fn len(&self) -> usize {
        1 + self.pframes.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Checks dimensions and displacement bounds. Frame indices in errors are
    /// GOP-relative (0 is the I-frame).
    pub fn validate(&self) -> Result<()> {
        let (w, h) = self.iframe.dims();
        if w == 0 || h == 0 {
            return Err(Error::frame(0, "I-frame has zero size"));
        }
        let bound = displacement_bound(w, h);
        for (i, p) in self.pframes.iter().enumerate() {
            let index = i + 1;
            if !p.mv.fits_frame(w, h) {
                return Err(Error::frame(
                    index,
                    format!("motion grid {}x{} does not tile a {w}x{h} frame", p.mv.blocks_x(), p.mv.blocks_y()),
                ));
            }
            if p.residual.dims() != (w, h) {
                return Err(Error::frame(index, "residual plane size differs from frame size"));
            }
            if p.mv.max_component() > bound {
                return Err(Error::frame(index, format!("motion vector exceeds bound of {bound} quarter-pel")));
            }
        }
        Ok(())
    }

    /// Flatten back into dump records (I first, then each P in order).
    pub fn to_records(&self) -> Vec<FrameRecord> {
        let mut out = Vec::with_capacity(self.len());
        out.push(FrameRecord::I { luma: self.iframe.clone() });
        out.extend(self.pframes.iter().map(|p| FrameRecord::P { mv: p.mv.clone(), residual: p.residual.clone() }));
        out
    }
}
