//! Synthetic sequences with exact ground-truth motion.
//!
//! Ground truth for frame `t` is the displacement from the I-frame that
//! opens `t`'s GOP, matching what refinement produces.

use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flow::FlowField;
use crate::gop::RawSequence;
use crate::plane::{LumaPlane, Plane};

pub const BACKGROUND: u8 = 96;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SceneKind {
    /// The whole frame is one texture moving at constant velocity.
    Translate,
    /// A textured disk rotating about the frame centre over a flat background.
    RotateSprite,
    /// A textured square moving over a flat background.
    NoiseFlat,
}

impl std::fmt::Display for SceneKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            SceneKind::Translate => "translate",
            SceneKind::RotateSprite => "rotate-sprite",
            SceneKind::NoiseFlat => "noise-flat",
        })
    }
}

impl FromStr for SceneKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "translate" => Ok(SceneKind::Translate),
            "rotate-sprite" => Ok(SceneKind::RotateSprite),
            "noise-flat" => Ok(SceneKind::NoiseFlat),
            _ => Err(format!("unknown scene '{s}' (expected translate, rotate-sprite or noise-flat)")),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SynthSpec {
    pub kind: SceneKind,
    pub width: usize,
    pub height: usize,
    pub frames: usize,
    pub gop_size: usize,
    pub seed: u64,
    /// Pixels per frame, for the translating scenes.
    pub velocity: (f64, f64),
    /// Degrees per frame, for the rotating sprite.
    pub angular_step: f64,
}

impl SynthSpec {
    pub fn new(kind: SceneKind, width: usize, height: usize, frames: usize) -> Self {
        SynthSpec { kind, width, height, frames, gop_size: 12, seed: 0, velocity: (2.0, 1.0), angular_step: 2.0 }
    }
}

#[derive(Clone, Debug)]
pub struct SynthSequence {
    pub sequence: RawSequence,
    pub ground_truth: Vec<FlowField>,
    /// Pixels covered by the moving object in each frame.
    pub foreground: Vec<Plane<bool>>,
}

/// Bilinear value noise on a 2-pixel lattice.
#[derive(Clone, Copy, Debug)]
pub struct Texture {
    seed: u64,
}

impl Texture {
    pub fn new(seed: u64) -> Self {
        Texture { seed }
    }

    fn lattice(&self, i: i64, j: i64) -> f64 {
        let mut z = self.seed ^ (i as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ (j as u64).wrapping_mul(0xC2B2_AE3D_27D4_EB4F);
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^= z >> 31;
        40.0 + (z % 176) as f64
    }

    pub fn sample(&self, x: f64, y: f64) -> f64 {
        let (gx, gy) = (x / 2.0, y / 2.0);
        let (i, j) = (gx.floor(), gy.floor());
        let (fx, fy) = (gx - i, gy - j);
        let (i, j) = (i as i64, j as i64);
        let top = self.lattice(i, j) * (1.0 - fx) + self.lattice(i + 1, j) * fx;
        let bottom = self.lattice(i, j + 1) * (1.0 - fx) + self.lattice(i + 1, j + 1) * fx;
        top * (1.0 - fy) + bottom * fy
    }

    fn pixel(&self, x: f64, y: f64) -> u8 {
        self.sample(x, y).round().clamp(0.0, 255.0) as u8
    }
}

pub fn synthesize(spec: &SynthSpec) -> Result<SynthSequence> {
    let (w, h) = (spec.width, spec.height);
    if w < 3 || h < 3 {
        return Err(Error::invalid("synthetic frames must be at least 3x3"));
    }
    if spec.frames == 0 || spec.gop_size == 0 {
        return Err(Error::invalid("frame count and GOP size must be positive"));
    }
    let tex = Texture::new(spec.seed);
    let (vx, vy) = spec.velocity;
    let mut frames = Vec::with_capacity(spec.frames);
    let mut truth = Vec::with_capacity(spec.frames);
    let mut masks = Vec::with_capacity(spec.frames);
    for t in 0..spec.frames {
        let since_i = (t % spec.gop_size) as f64;
        let tf = t as f64;
        let (frame, flow, mask): (LumaPlane, FlowField, Plane<bool>) = match spec.kind {
            SceneKind::Translate => (
                Plane::from_fn(w, h, |x, y| tex.pixel(x as f64 - vx * tf, y as f64 - vy * tf)),
                FlowField::uniform(w, h, vx * since_i, vy * since_i),
                Plane::new(w, h, true),
            ),
            SceneKind::NoiseFlat => {
                let side = (w.min(h) / 3).max(1) as f64;
                let (ox, oy) = ((w / 4) as f64 + vx * tf, (h / 4) as f64 + vy * tf);
                let inside = |x: usize, y: usize| {
                    let (dx, dy) = (x as f64 - ox, y as f64 - oy);
                    (0.0..side).contains(&dx) && (0.0..side).contains(&dy)
                };
                let mask = Plane::from_fn(w, h, inside);
                let frame = Plane::from_fn(w, h, |x, y| {
                    if inside(x, y) {
                        tex.pixel(x as f64 - vx * tf, y as f64 - vy * tf)
                    } else {
                        BACKGROUND
                    }
                });
                let flow = FlowField::from_fn(w, h, |x, y| {
                    if inside(x, y) {
                        (vx * since_i, vy * since_i)
                    } else {
                        (0.0, 0.0)
                    }
                });
                (frame, flow, mask)
            }
            SceneKind::RotateSprite => {
                let (cx, cy) = ((w as f64 - 1.0) / 2.0, (h as f64 - 1.0) / 2.0);
                let radius = w.min(h) as f64 / 3.0;
                let inside = |x: usize, y: usize| (x as f64 - cx).hypot(y as f64 - cy) < radius;
                // Position at angle 0 of the point that sits at (x, y) after rotating by `deg`.
                let unrotate = |x: usize, y: usize, deg: f64| {
                    let (s, c) = (-deg.to_radians()).sin_cos();
                    let (dx, dy) = (x as f64 - cx, y as f64 - cy);
                    (cx + c * dx - s * dy, cy + s * dx + c * dy)
                };
                let angle = spec.angular_step * tf;
                let mask = Plane::from_fn(w, h, inside);
                let frame = Plane::from_fn(w, h, |x, y| {
                    if inside(x, y) {
                        let (sx, sy) = unrotate(x, y, angle);
                        tex.pixel(sx, sy)
                    } else {
                        BACKGROUND
                    }
                });
                let flow = FlowField::from_fn(w, h, |x, y| {
                    if inside(x, y) {
                        let (sx, sy) = unrotate(x, y, spec.angular_step * since_i);
                        (x as f64 - sx, y as f64 - sy)
                    } else {
                        (0.0, 0.0)
                    }
                });
                (frame, flow, mask)
            }
        };
        frames.push(frame);
        truth.push(flow);
        masks.push(mask);
    }
    Ok(SynthSequence { sequence: RawSequence::new(frames)?, ground_truth: truth, foreground: masks })
}
