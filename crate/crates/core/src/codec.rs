//! A desk-scale block-matching codec: exhaustive integer-pel SAD search on
//! 16×16 blocks, lossless residuals, and the matching decoder.
//!
//! Reconstruction of a P-frame pixel `p` reads the previous frame at
//! `p - mv` (whole-pel rounded, clamped to the frame) and adds the residual.

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dumpio::{DumpHeader, FrameRecord};
use crate::error::{Error, Result};
use crate::gop::{check_frames, GopStream, PFrame, RawSequence};
use crate::mv::{displacement_bound, grid_dims, MotionVector, MotionVectorField, MV_BLOCK};
use crate::plane::{qpel_to_pel, LumaPlane, Plane, ResidualPlane};

pub const DEFAULT_SEARCH_RANGE: usize = 16;

/// Candidate displacements in tie-break order: smallest |dx|+|dy|, then dy, then dx.
fn candidates(range: i32) -> Vec<(i32, i32)> {
    let mut c: Vec<(i32, i32)> = (-range..=range).flat_map(|dy| (-range..=range).map(move |dx| (dx, dy))).collect();
    c.sort_by_key(|&(dx, dy)| (dx.abs() + dy.abs(), dy, dx));
    c
}

#[derive(Clone, Copy)]
struct Block {
    x0: usize,
    y0: usize,
    x1: usize,
    y1: usize,
}

fn block_rect(bx: usize, by: usize, width: usize, height: usize) -> Block {
    let x0 = bx * MV_BLOCK;
    let y0 = by * MV_BLOCK;
    Block { x0, y0, x1: (x0 + MV_BLOCK).min(width), y1: (y0 + MV_BLOCK).min(height) }
}

/// SAD of `cur` over `blk` against `reference` displaced by `(dx, dy)`,
/// abandoning once the running sum reaches `limit`.
fn block_sad(cur: &LumaPlane, reference: &LumaPlane, blk: Block, dx: i32, dy: i32, limit: u32) -> u32 {
    let (w, h) = (reference.width() as i32, reference.height() as i32);
    let inside = blk.x0 as i32 - dx >= 0
        && blk.x1 as i32 - 1 - dx < w
        && blk.y0 as i32 - dy >= 0
        && blk.y1 as i32 - 1 - dy < h;
    let mut sad = 0u32;
    for y in blk.y0..blk.y1 {
        let row = &cur.row(y)[blk.x0..blk.x1];
        let ry = y as i32 - dy;
        if inside {
            let start = (blk.x0 as i32 - dx) as usize;
            let rrow = &reference.row(ry as usize)[start..start + row.len()];
            sad += row.iter().zip(rrow).map(|(&a, &b)| u32::from(a.abs_diff(b))).sum::<u32>();
        } else {
            for (i, &a) in row.iter().enumerate() {
                let rx = (blk.x0 + i) as i32 - dx;
                let b = reference.get_clamped(rx as isize, ry as isize);
                sad += u32::from(a.abs_diff(b));
            }
        }
        if sad >= limit {
            return sad;
        }
    }
    sad
}

fn predict(reference: &LumaPlane, mv: &MotionVectorField) -> Plane<u8> {
    let (w, h) = reference.dims();
    let mut out = Plane::new(w, h, 0u8);
    for y in 0..h {
        let by = y / MV_BLOCK;
        for x in 0..w {
            let v = mv.get(x / MV_BLOCK, by);
            let sx = x as i64 - qpel_to_pel(i64::from(v.dx));
            let sy = y as i64 - qpel_to_pel(i64::from(v.dy));
            out.set(x, y, reference.get_clamped(sx as isize, sy as isize));
        }
    }
    out
}

/// Best integer-pel vector for every block of `cur` against `reference`.
pub fn estimate_motion(cur: &LumaPlane, reference: &LumaPlane, search_range: usize) -> MotionVectorField {
    let (w, h) = cur.dims();
    // Larger displacements would exceed the format's bound and only ever see
    // replicated edge pixels.
    let range = search_range.min(w.min(h)) as i32;
    let order = candidates(range);
    let (gx, gy) = grid_dims(w, h);
    let mut field = MotionVectorField::zeros(gx, gy);
    for by in 0..gy {
        for bx in 0..gx {
            let blk = block_rect(bx, by, w, h);
            let mut best = (0, 0);
            let mut best_sad = u32::MAX;
            for &(dx, dy) in &order {
                let sad = block_sad(cur, reference, blk, dx, dy, best_sad);
                if sad < best_sad {
                    best_sad = sad;
                    best = (dx, dy);
                    if sad == 0 {
                        break;
                    }
                }
            }
            field.set(bx, by, MotionVector::from_pel(best.0 as i16, best.1 as i16));
        }
    }
    field
}

/// Encode `frames` as one GOP: the first frame intra, every later frame predicted.
pub fn encode_gop(frames: &[LumaPlane], search_range: usize) -> Result<GopStream> {
    let first = frames.first().ok_or_else(|| Error::validation("cannot encode an empty GOP"))?;
    let (w, h) = first.dims();
    check_frames(frames, w, h)?;
    let mut pframes = Vec::with_capacity(frames.len() - 1);
    for pair in frames.windows(2) {
        // Residuals are lossless, so the reconstructed reference equals the input frame.
        let (reference, cur) = (&pair[0], &pair[1]);
        let mv = estimate_motion(cur, reference, search_range);
        let pred = predict(reference, &mv);
        let residual: Vec<i16> =
            cur.data().iter().zip(pred.data()).map(|(&a, &p)| i16::from(a) - i16::from(p)).collect();
        pframes.push(PFrame { mv, residual: Plane::from_vec(w, h, residual)? });
    }
    Ok(GopStream { iframe: first.clone(), pframes })
}

pub fn decode_gop(gop: &GopStream) -> Result<Vec<LumaPlane>> {
    gop.validate()?;
    let mut out = Vec::with_capacity(gop.len());
    out.push(gop.iframe.clone());
    for p in &gop.pframes {
        let prev = out.last().expect("I-frame pushed first");
        let mut frame = predict(prev, &p.mv);
        for (px, &r) in frame.data_mut().iter_mut().zip(p.residual.data()) {
            *px = (i32::from(*px) + i32::from(r)).clamp(0, 255) as u8;
        }
        out.push(frame);
    }
    Ok(out)
}

/// Encode a whole sequence, starting a new GOP every `gop_size` frames.
pub fn encode_sequence(seq: &RawSequence, gop_size: usize, search_range: usize) -> Result<(DumpHeader, Vec<FrameRecord>)> {
    if gop_size == 0 {
        return Err(Error::invalid("gop size must be at least 1"));
    }
    let mut records = Vec::with_capacity(seq.len());
    for chunk in seq.frames().chunks(gop_size) {
        records.extend(encode_gop(chunk, search_range)?.to_records());
    }
    let header = DumpHeader::new(seq.width() as u32, seq.height() as u32, seq.len() as u32, gop_size as u32);
    Ok((header, records))
}

/// Which motion vectors are eligible for replacement by `inject_mv_noise_in`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum NoiseRegion {
    #[default]
    All,
    /// Only blocks whose decoded pixels are all one intensity.
    FlatBlocks,
}

/// Replace a seeded random `fraction` of all motion vectors with uniform
/// random vectors whose components lie in `[-magnitude, magnitude]` quarter-pel.
/// Residuals are left alone.
pub fn inject_mv_noise(gop: &GopStream, fraction: f64, magnitude: u16, seed: u64) -> Result<GopStream> {
    inject_mv_noise_in(gop, fraction, magnitude, seed, NoiseRegion::All)
}

pub fn inject_mv_noise_in(
    gop: &GopStream,
    fraction: f64,
    magnitude: u16,
    seed: u64,
    region: NoiseRegion,
) -> Result<GopStream> {
    if !(0.0..=1.0).contains(&fraction) {
        return Err(Error::invalid(format!("noise fraction {fraction} outside [0, 1]")));
    }
    let bound = displacement_bound(gop.width(), gop.height());
    if i64::from(magnitude) > bound {
        return Err(Error::invalid(format!("noise magnitude {magnitude} exceeds bound {bound}")));
    }
    gop.validate()?;

    let decoded = match region {
        NoiseRegion::All => None,
        NoiseRegion::FlatBlocks => Some(decode_gop(gop)?),
    };
    let mut eligible = Vec::new();
    for (i, p) in gop.pframes.iter().enumerate() {
        for by in 0..p.mv.blocks_y() {
            for bx in 0..p.mv.blocks_x() {
                let ok = match &decoded {
                    None => true,
                    Some(frames) => is_flat(&frames[i + 1], block_rect(bx, by, gop.width(), gop.height())),
                };
                if ok {
                    eligible.push((i, bx, by));
                }
            }
        }
    }

    let mut out = gop.clone();
    let count = (fraction * eligible.len() as f64).round() as usize;
    if count == 0 {
        return Ok(out);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let m = i32::from(magnitude);
    for idx in sample(&mut rng, eligible.len(), count).into_vec() {
        let (i, bx, by) = eligible[idx];
        let dx = rng.gen_range(-m..=m) as i16;
        let dy = rng.gen_range(-m..=m) as i16;
        out.pframes[i].mv.set(bx, by, MotionVector::new(dx, dy));
    }
    Ok(out)
}

fn is_flat(frame: &LumaPlane, blk: Block) -> bool {
    let first = frame.get(blk.x0, blk.y0);
    (blk.y0..blk.y1).all(|y| frame.row(y)[blk.x0..blk.x1].iter().all(|&v| v == first))
}

/// Residual plane of zeros, for hand-built streams.
pub fn zero_residual(width: usize, height: usize) -> ResidualPlane {
    Plane::new(width, height, 0)
}
