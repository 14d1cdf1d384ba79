//! Independent reference implementations used to check the library.
//! These deliberately avoid the library's fast paths.
#![allow(dead_code)]

use mvrefine::{FlowField, GopStream, LumaPlane, MotionVector, Plane};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_frame(rng: &mut ChaCha8Rng, w: usize, h: usize) -> LumaPlane {
    Plane::from_fn(w, h, |_, _| rng.gen())
}

/// Frames that are mostly a drifting copy of the previous one, so the search
/// finds real motion rather than noise.
pub fn random_sequence(rng: &mut ChaCha8Rng, w: usize, h: usize, n: usize) -> Vec<LumaPlane> {
    let mut frames = vec![random_frame(rng, w, h)];
    while frames.len() < n {
        let prev = frames.last().unwrap();
        let (dx, dy) = (rng.gen_range(-3isize..=3), rng.gen_range(-3isize..=3));
        let next = Plane::from_fn(w, h, |x, y| {
            if rng.gen_bool(0.1) {
                rng.gen()
            } else {
                prev.get_clamped(x as isize - dx, y as isize - dy)
            }
        });
        frames.push(next);
    }
    frames
}

fn clamp_i(v: i64, hi: usize) -> usize {
    v.clamp(0, hi as i64 - 1) as usize
}

/// Brute-force best vector for one block: full enumeration, explicit tie-break.
pub fn brute_force_block(cur: &LumaPlane, reference: &LumaPlane, bx: usize, by: usize, range: i64) -> (i64, i64, u64) {
    let (w, h) = cur.dims();
    let mut best: Option<((u64, i64, i64, i64), (i64, i64))> = None;
    for dy in -range..=range {
        for dx in -range..=range {
            let mut sad = 0u64;
            for y in by * 16..((by + 1) * 16).min(h) {
                for x in bx * 16..((bx + 1) * 16).min(w) {
                    let r = reference.get(clamp_i(x as i64 - dx, w), clamp_i(y as i64 - dy, h));
                    sad += (i64::from(cur.get(x, y)) - i64::from(r)).unsigned_abs();
                }
            }
            let key = (sad, dx.abs() + dy.abs(), dy, dx);
            if best.is_none_or(|(k, _)| key < k) {
                best = Some((key, (dx, dy)));
            }
        }
    }
    let ((sad, ..), (dx, dy)) = best.unwrap();
    (dx, dy, sad)
}

/// Step-by-step f64 walk of one pixel back to the I-frame.
pub fn walk_pixel(gop: &GopStream, target: usize, x: usize, y: usize) -> (f64, f64) {
    let (w, h) = (gop.width() as f64, gop.height() as f64);
    let (mut px, mut py) = (x as f64, y as f64);
    for k in (0..target).rev() {
        let mv = &gop.pframes[k].mv;
        let lx = px.round().clamp(0.0, w - 1.0) as usize;
        let ly = py.round().clamp(0.0, h - 1.0) as usize;
        let v: MotionVector = mv.get(lx / 16, ly / 16);
        px = (px - f64::from(v.dx) / 4.0).clamp(0.0, w - 1.0);
        py = (py - f64::from(v.dy) / 4.0).clamp(0.0, h - 1.0);
    }
    (px, py)
}

pub fn random_gop(rng: &mut ChaCha8Rng, w: usize, h: usize, pframes: usize, max_q: i16) -> GopStream {
    use mvrefine::{MotionVectorField, PFrame};
    let iframe = random_frame(rng, w, h);
    let pframes = (0..pframes)
        .map(|_| {
            let mut mv = MotionVectorField::for_frame(w, h);
            for v in mv.vectors_mut() {
                *v = MotionVector::new(rng.gen_range(-max_q..=max_q), rng.gen_range(-max_q..=max_q));
            }
            PFrame { mv, residual: Plane::new(w, h, 0) }
        })
        .collect();
    GopStream { iframe, pframes }
}

pub fn mean_epe(a: &FlowField, b: &FlowField) -> f64 {
    let n = a.u.len() as f64;
    (0..a.u.len())
        .map(|i| (a.u.data()[i] - b.u.data()[i]).hypot(a.v.data()[i] - b.v.data()[i]))
        .sum::<f64>()
        / n
}

/// Whether a buffer satisfies every MVD1 rule, checked from raw bytes.
pub fn independently_valid(bytes: &[u8]) -> bool {
    let u32_at = |o: usize| bytes.get(o..o + 4).map(|b| u32::from_le_bytes(b.try_into().unwrap()));
    if bytes.len() < 24 || &bytes[..4] != b"MVD1" || u32_at(4) != Some(1) {
        return false;
    }
    let (w, h, n, g) = (u32_at(8).unwrap() as u64, u32_at(12).unwrap() as u64, u32_at(16).unwrap() as u64, u32_at(20).unwrap() as u64);
    if w == 0 || h == 0 || n == 0 || g == 0 {
        return false;
    }
    let (gx, gy) = (w.div_ceil(16), h.div_ceil(16));
    let bound = 4 * w.min(h) as i64;
    let mut off = 24usize;
    for i in 0..n {
        let Some(&t) = bytes.get(off) else { return false };
        off += 1;
        let want_i = i % g == 0;
        match (t, want_i) {
            (0, true) => off += (w * h) as usize,
            (1, false) => {
                let Some(b) = bytes.get(off..off + 4) else { return false };
                let (bx, by) = (u16::from_le_bytes([b[0], b[1]]) as u64, u16::from_le_bytes([b[2], b[3]]) as u64);
                if (bx, by) != (gx, gy) {
                    return false;
                }
                off += 4;
                let Some(mvs) = bytes.get(off..off + (4 * bx * by) as usize) else { return false };
                if mvs.chunks_exact(2).any(|c| i64::from(i16::from_le_bytes([c[0], c[1]])).abs() > bound) {
                    return false;
                }
                off += (4 * bx * by + 2 * w * h) as usize;
            }
            _ => return false,
        }
        if off > bytes.len() {
            return false;
        }
    }
    off == bytes.len()
}
