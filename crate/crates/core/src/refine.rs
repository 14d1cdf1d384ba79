//! Confidence-guided refinement of compressed-domain motion vectors.
//!
//! For every P-frame of a GOP:
//!
//! 1. the I-frame's normalized edge strength is the reference confidence;
//! 2. block vectors are upsampled to one vector per pixel;
//! 3. each pixel is walked back frame by frame to the I-frame, summing the
//!    vectors it passes through;
//! 4. the pixel inherits the confidence of the I-frame pixel it lands on;
//! 5. that map is median filtered and averaged over 16×16 blocks;
//! 6. vectors whose confidence falls below the threshold are zeroed.

use std::fmt;
use std::str::FromStr;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::confidence::{iframe_confidence, ConfidenceMap, GradientKernel};
use crate::error::{Error, Result};
use crate::flow::FlowField;
use crate::gop::GopStream;
use crate::mv::{MotionVectorField, MV_BLOCK};
use crate::plane::{round_half_away, Plane};

pub const DEFAULT_FIXED_THRESHOLD: f64 = 0.0075;
pub const DEFAULT_PERCENTILE_KEEP: f64 = 0.80;
pub const DEFAULT_POOL_BLOCK: usize = 16;
pub const DEFAULT_MEDIAN_WINDOW: usize = 3;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ThresholdMode {
    #[default]
    Fixed,
    /// Keep the most confident `percentile_keep` fraction of pixels.
    Percentile,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ConfidenceMode {
    /// Each P-frame pixel takes the confidence of the I-frame pixel it traces to.
    #[default]
    Traced,
    /// Every P-frame reuses the I-frame map as is.
    IframeStatic,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Pooling {
    #[default]
    Block,
    Pixel,
}

macro_rules! parse_enum {
    ($ty:ty, $($name:literal => $value:expr),+ $(,)?) => {
        impl FromStr for $ty {
            type Err = String;
            fn from_str(s: &str) -> Result<Self, String> {
                match s {
                    $($name => Ok($value),)+
                    _ => Err(format!("unknown value '{s}' (expected one of: {})", [$($name),+].join(", "))),
                }
            }
        }

        impl fmt::Display for $ty {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                $(if *self == $value {
                    return f.write_str($name);
                })+
                unreachable!()
            }
        }
    };
}

parse_enum!(ThresholdMode, "fixed" => ThresholdMode::Fixed, "percentile" => ThresholdMode::Percentile);
parse_enum!(ConfidenceMode, "traced" => ConfidenceMode::Traced, "iframe-static" => ConfidenceMode::IframeStatic);
parse_enum!(Pooling, "block" => Pooling::Block, "pixel" => Pooling::Pixel);

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RefineConfig {
    pub block: usize,
    pub median_window: usize,
    pub threshold_mode: ThresholdMode,
    pub fixed_threshold: f64,
    pub percentile_keep: f64,
    pub confidence_mode: ConfidenceMode,
    pub pooling: Pooling,
    pub kernel: GradientKernel,
}

impl Default for RefineConfig {
    fn default() -> Self {
        RefineConfig {
            block: DEFAULT_POOL_BLOCK,
            median_window: DEFAULT_MEDIAN_WINDOW,
            threshold_mode: ThresholdMode::Fixed,
            fixed_threshold: DEFAULT_FIXED_THRESHOLD,
            percentile_keep: DEFAULT_PERCENTILE_KEEP,
            confidence_mode: ConfidenceMode::Traced,
            pooling: Pooling::Block,
            kernel: GradientKernel::Scharr,
        }
    }
}

impl RefineConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.fixed_threshold) {
            return Err(Error::invalid(format!("threshold {} outside [0, 1]", self.fixed_threshold)));
        }
        if !(0.0..=1.0).contains(&self.percentile_keep) {
            return Err(Error::invalid(format!("keep fraction {} outside [0, 1]", self.percentile_keep)));
        }
        if self.block == 0 {
            return Err(Error::invalid("pooling block must be at least 1 pixel"));
        }
        if self.median_window == 0 || self.median_window % 2 == 0 {
            return Err(Error::invalid("median window must be odd"));
        }
        Ok(())
    }
}

/// For each pixel of a P-frame, the I-frame position it references.
#[derive(Clone, Debug, PartialEq)]
pub struct TraceField {
    pub src_x: Plane<f64>,
    pub src_y: Plane<f64>,
}

pub fn upsample_mv(mv: &MotionVectorField, width: usize, height: usize) -> Result<FlowField> {
    if !mv.fits_frame(width, height) {
        return Err(Error::validation(format!(
            "motion grid {}x{} does not tile a {width}x{height} frame",
            mv.blocks_x(),
            mv.blocks_y()
        )));
    }
    Ok(FlowField::from_fn(width, height, |x, y| mv.get(x / MV_BLOCK, y / MV_BLOCK).to_pel()))
}

/// Walk every pixel of frame `target` (GOP-relative; 0 is the I-frame) back to
/// the I-frame.
///
/// Positions are carried exactly in quarter-pel and clamped to the frame after
/// each step; the vector applied at each step is the one covering the position
/// rounded to the nearest pel.
pub fn accumulate_trace(gop: &GopStream, target: usize) -> Result<(FlowField, TraceField)> {
    if target > gop.pframes.len() {
        return Err(Error::invalid(format!("target frame {target} outside GOP of {} frames", gop.len())));
    }
    gop.validate()?;
    let mut tracer = Tracer::new(gop);
    for _ in 0..target {
        tracer.advance();
    }
    Ok((tracer.flow(), tracer.trace_field()))
}

/// Incremental tracer: holds the quarter-pel I-frame source of every pixel of
/// the current frame and steps forward one P-frame at a time.
///
/// A pixel whose first step lands on a whole-pel position continues exactly
/// as the pixel at that position did one frame earlier, so its source is
/// copied from the previous trace. Fractional landings are walked in full.
struct Tracer<'a> {
    gop: &'a GopStream,
    frame: usize,
    src: Vec<(i32, i32)>,
    next: Vec<(i32, i32)>,
}

impl<'a> Tracer<'a> {
    fn new(gop: &'a GopStream) -> Self {
        let w = gop.width();
        let src = (0..w * gop.height()).map(|i| (4 * (i % w) as i32, 4 * (i / w) as i32)).collect();
        Tracer { gop, frame: 0, src, next: Vec::new() }
    }

    fn advance(&mut self) {
        let (w, h) = (self.gop.width(), self.gop.height());
        let (max_qx, max_qy) = (4 * (w as i32 - 1), 4 * (h as i32 - 1));
        let t = self.frame + 1;
        let mv = &self.gop.pframes[t - 1].mv;
        let (vectors, stride) = (mv.vectors(), mv.blocks_x());
        self.next.clear();
        self.next.reserve(w * h);
        for y in 0..h {
            let vrow = &vectors[(y / MV_BLOCK) * stride..];
            for x in 0..w {
                let v = vrow[x / MV_BLOCK];
                let qx = (4 * x as i32 - i32::from(v.dx)).clamp(0, max_qx);
                let qy = (4 * y as i32 - i32::from(v.dy)).clamp(0, max_qy);
                let s = if (qx | qy) & 3 == 0 {
                    self.src[(qy >> 2) as usize * w + (qx >> 2) as usize]
                } else {
                    walk(self.gop, t - 1, qx, qy, max_qx, max_qy)
                };
                self.next.push(s);
            }
        }
        std::mem::swap(&mut self.src, &mut self.next);
        self.frame = t;
    }

    fn flow(&self) -> FlowField {
        let w = self.gop.width();
        let mut flow = FlowField::zeros(w, self.gop.height());
        let (u, v) = (flow.u.data_mut(), flow.v.data_mut());
        for (i, &(qx, qy)) in self.src.iter().enumerate() {
            u[i] = (i % w) as f64 - f64::from(qx) / 4.0;
            v[i] = (i / w) as f64 - f64::from(qy) / 4.0;
        }
        flow
    }

    fn trace_field(&self) -> TraceField {
        let (w, h) = (self.gop.width(), self.gop.height());
        let to_plane = |f: fn(&(i32, i32)) -> i32| {
            Plane::from_vec(w, h, self.src.iter().map(|s| f64::from(f(s)) / 4.0).collect()).expect("sized")
        };
        TraceField { src_x: to_plane(|s| s.0), src_y: to_plane(|s| s.1) }
    }

    /// Confidence of the I-frame pixel nearest each source.
    fn sample(&self, conf: &ConfidenceMap) -> ConfidenceMap {
        let (w, h) = conf.dims();
        let c = conf.values.data();
        // Sources are non-negative, so +2 >> 2 rounds halves away from zero.
        let data = self.src.iter().map(|&(qx, qy)| c[((qy + 2) >> 2) as usize * w + ((qx + 2) >> 2) as usize]).collect();
        ConfidenceMap::normalized(Plane::from_vec(w, h, data).expect("sized"))
    }
}

/// Follow one quarter-pel position in frame `from` back to the I-frame.
fn walk(gop: &GopStream, from: usize, mut qx: i32, mut qy: i32, max_qx: i32, max_qy: i32) -> (i32, i32) {
    for k in (0..from).rev() {
        let mv = &gop.pframes[k].mv;
        let px = ((qx + 2) >> 2) as usize;
        let py = ((qy + 2) >> 2) as usize;
        let v = mv.get(px / MV_BLOCK, py / MV_BLOCK);
        qx = (qx - i32::from(v.dx)).clamp(0, max_qx);
        qy = (qy - i32::from(v.dy)).clamp(0, max_qy);
    }
    (qx, qy)
}

pub fn propagate_confidence(iframe_conf: &ConfidenceMap, trace: &TraceField) -> Result<ConfidenceMap> {
    if !iframe_conf.normalized {
        return Err(Error::validation("I-frame confidence must be normalized"));
    }
    if !iframe_conf.values.same_dims(&trace.src_x) {
        return Err(Error::validation("trace and confidence map sizes differ"));
    }
    let (w, h) = trace.src_x.dims();
    let conf = &iframe_conf.values;
    let data = trace
        .src_x
        .data()
        .iter()
        .zip(trace.src_y.data())
        .map(|(&sx, &sy)| {
            let x = round_half_away(sx).clamp(0, w as i64 - 1) as usize;
            let y = round_half_away(sy).clamp(0, h as i64 - 1) as usize;
            conf.get(x, y)
        })
        .collect();
    Ok(ConfidenceMap::normalized(Plane::from_vec(w, h, data)?))
}

#[inline(always)]
fn sort2(a: &mut f64, b: &mut f64) {
    if *a > *b {
        std::mem::swap(a, b);
    }
}

/// Median of nine values via a 19-exchange network.
#[inline]
fn median9(mut p: [f64; 9]) -> f64 {
    let [p0, p1, p2, p3, p4, p5, p6, p7, p8] = &mut p;
    sort2(p1, p2);
    sort2(p4, p5);
    sort2(p7, p8);
    sort2(p0, p1);
    sort2(p3, p4);
    sort2(p6, p7);
    sort2(p1, p2);
    sort2(p4, p5);
    sort2(p7, p8);
    sort2(p0, p3);
    sort2(p5, p8);
    sort2(p4, p7);
    sort2(p3, p6);
    sort2(p1, p4);
    sort2(p2, p5);
    sort2(p4, p7);
    sort2(p4, p2);
    sort2(p6, p4);
    sort2(p4, p2);
    *p4
}

pub fn median3(map: &ConfidenceMap) -> Result<ConfidenceMap> {
    median_filter(map, 3)
}

/// Square median filter with edge replication.
pub fn median_filter(map: &ConfidenceMap, window: usize) -> Result<ConfidenceMap> {
    let (w, h) = map.dims();
    if window == 0 || window % 2 == 0 {
        return Err(Error::invalid(format!("median window must be odd, got {window}")));
    }
    if w < window || h < window {
        return Err(Error::validation(format!("median filter needs at least {window}x{window}, got {w}x{h}")));
    }
    let src = &map.values;
    let mut out = Plane::new(w, h, 0.0);
    if window == 3 {
        for y in 0..h {
            let rows = [src.row(y.saturating_sub(1)), src.row(y), src.row((y + 1).min(h - 1))];
            let dst = &mut out.data_mut()[y * w..(y + 1) * w];
            for (x, d) in dst.iter_mut().enumerate() {
                let xm = x.saturating_sub(1);
                let xp = (x + 1).min(w - 1);
                *d = median9([
                    rows[0][xm], rows[0][x], rows[0][xp],
                    rows[1][xm], rows[1][x], rows[1][xp],
                    rows[2][xm], rows[2][x], rows[2][xp],
                ]);
            }
        }
    } else {
        let r = (window / 2) as isize;
        let mut buf = Vec::with_capacity(window * window);
        for y in 0..h {
            for x in 0..w {
                buf.clear();
                for dy in -r..=r {
                    for dx in -r..=r {
                        buf.push(src.get_clamped(x as isize + dx, y as isize + dy));
                    }
                }
                let mid = buf.len() / 2;
                let (_, m, _) = buf.select_nth_unstable_by(mid, f64::total_cmp);
                out.set(x, y, *m);
            }
        }
    }
    Ok(ConfidenceMap { values: out, normalized: map.normalized })
}

/// Replace every pixel by the mean of its `block × block` tile. Partial tiles
/// at the right and bottom edges average over the pixels they contain.
pub fn block_pool(map: &ConfidenceMap, block: usize) -> Result<ConfidenceMap> {
    if block == 0 {
        return Err(Error::invalid("pooling block must be at least 1 pixel"));
    }
    let (w, h) = map.dims();
    let (tx, ty) = (w.div_ceil(block), h.div_ceil(block));
    let mut sums = vec![0.0f64; tx * ty];
    // Uniform tiles keep their exact value; summation would perturb the last bit.
    let mut uniform = vec![true; tx * ty];
    for y in 0..h {
        let row = map.values.row(y);
        let first = map.values.row(y - y % block);
        let tiles = (y / block) * tx..(y / block + 1) * tx;
        let (srow, urow) = (&mut sums[tiles.clone()], &mut uniform[tiles]);
        for (x, &v) in row.iter().enumerate() {
            srow[x / block] += v;
            urow[x / block] &= v == first[x - x % block];
        }
    }
    for by in 0..ty {
        let bh = block.min(h - by * block);
        for bx in 0..tx {
            let bw = block.min(w - bx * block);
            let t = by * tx + bx;
            sums[t] = if uniform[t] { map.values.get(bx * block, by * block) } else { sums[t] / (bw * bh) as f64 };
        }
    }
    let mut out = Plane::new(w, h, 0.0);
    for y in 0..h {
        let srow = &sums[(y / block) * tx..(y / block + 1) * tx];
        for (x, d) in out.data_mut()[y * w..(y + 1) * w].iter_mut().enumerate() {
            *d = srow[x / block];
        }
    }
    Ok(ConfidenceMap { values: out, normalized: map.normalized })
}

/// Confidence value at or above which a pixel is kept.
fn percentile_cut(values: &[f64], keep: f64) -> Option<f64> {
    let n = values.len();
    // Guard against 0.8 * n landing a hair above an integer.
    let k = ((keep * n as f64) - 1e-9).ceil().clamp(0.0, n as f64) as usize;
    if k == 0 {
        return None;
    }
    let mut sorted = values.to_vec();
    let (_, cut, _) = sorted.select_nth_unstable_by(n - k, f64::total_cmp);
    Some(*cut)
}

pub fn threshold_flow(flow: &FlowField, conf: &ConfidenceMap, config: &RefineConfig) -> Result<FlowField> {
    if flow.dims() != conf.dims() {
        return Err(Error::validation("flow and confidence sizes differ"));
    }
    if !conf.normalized {
        return Err(Error::validation("threshold needs a normalized confidence map"));
    }
    let cut = match config.threshold_mode {
        ThresholdMode::Fixed => Some(config.fixed_threshold),
        ThresholdMode::Percentile => percentile_cut(conf.values.data(), config.percentile_keep),
    };
    let keep = |c: f64| matches!(cut, Some(t) if c >= t);
    let c = conf.values.data();
    let mask = |p: &Plane<f64>| {
        let data = p.data().iter().zip(c).map(|(&d, &ci)| if keep(ci) { d } else { 0.0 }).collect();
        Plane::from_vec(p.width(), p.height(), data).expect("sized")
    };
    Ok(FlowField { u: mask(&flow.u), v: mask(&flow.v) })
}

/// Wall-clock time spent in each refinement stage.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct StageTimings {
    pub edge: Duration,
    pub trace: Duration,
    pub propagate: Duration,
    pub median: Duration,
    pub pool: Duration,
    pub threshold: Duration,
}

impl StageTimings {
    pub fn total(&self) -> Duration {
        self.edge + self.trace + self.propagate + self.median + self.pool + self.threshold
    }

    pub fn add(&mut self, other: &StageTimings) {
        self.edge += other.edge;
        self.trace += other.trace;
        self.propagate += other.propagate;
        self.median += other.median;
        self.pool += other.pool;
        self.threshold += other.threshold;
    }
}

/// Intermediate products for one P-frame.
#[derive(Clone, Debug, PartialEq)]
pub struct RefinedFrame {
    /// Accumulated displacement before thresholding.
    pub raw: FlowField,
    pub pixel_confidence: ConfidenceMap,
    /// After median filtering and, when enabled, block pooling.
    pub block_confidence: ConfidenceMap,
    pub refined: FlowField,
}

fn timed<T>(slot: &mut Duration, f: impl FnOnce() -> T) -> T {
    let start = Instant::now();
    let out = f();
    *slot += start.elapsed();
    out
}

/// Full pipeline keeping every intermediate map.
pub fn refine_gop_detailed(gop: &GopStream, config: &RefineConfig, timings: &mut StageTimings) -> Result<Vec<RefinedFrame>> {
    let mut out = Vec::with_capacity(gop.pframes.len());
    run_pipeline(gop, config, timings, |raw, pixel_confidence, block_confidence, refined| {
        out.push(RefinedFrame { raw: raw.clone(), pixel_confidence, block_confidence, refined })
    })?;
    Ok(out)
}

fn run_pipeline(
    gop: &GopStream,
    config: &RefineConfig,
    timings: &mut StageTimings,
    mut emit: impl FnMut(&FlowField, ConfidenceMap, ConfidenceMap, FlowField),
) -> Result<()> {
    config.validate()?;
    gop.validate()?;
    let iconf = timed(&mut timings.edge, || iframe_confidence(&gop.iframe, config.kernel))?;
    let mut tracer = Tracer::new(gop);
    for _ in 0..gop.pframes.len() {
        let raw = timed(&mut timings.trace, || {
            tracer.advance();
            tracer.flow()
        });
        let pixel_confidence = match config.confidence_mode {
            ConfidenceMode::Traced => timed(&mut timings.propagate, || tracer.sample(&iconf)),
            ConfidenceMode::IframeStatic => iconf.clone(),
        };
        let filtered = timed(&mut timings.median, || median_filter(&pixel_confidence, config.median_window))?;
        let block_confidence = match config.pooling {
            Pooling::Block => timed(&mut timings.pool, || block_pool(&filtered, config.block))?,
            Pooling::Pixel => filtered,
        };
        let refined = timed(&mut timings.threshold, || threshold_flow(&raw, &block_confidence, config))?;
        emit(&raw, pixel_confidence, block_confidence, refined);
    }
    Ok(())
}

/// One refined flow field per P-frame, each the displacement from the GOP's I-frame.
pub fn refine_gop(gop: &GopStream, config: &RefineConfig) -> Result<Vec<FlowField>> {
    refine_gop_timed(gop, config, &mut StageTimings::default())
}

pub fn refine_gop_timed(gop: &GopStream, config: &RefineConfig, timings: &mut StageTimings) -> Result<Vec<FlowField>> {
    let mut out = Vec::with_capacity(gop.pframes.len());
    run_pipeline(gop, config, timings, |_, _, _, refined| out.push(refined))?;
    Ok(out)
}

/// Refine many GOPs, spreading them over `threads` workers (0 = all cores,
/// 1 = the calling thread only).
pub fn refine_gops(gops: &[GopStream], config: &RefineConfig, threads: usize) -> Result<Vec<Vec<FlowField>>> {
    per_gop(gops, threads, |g| refine_gop(g, config))
}

/// As [`refine_gops`], keeping the intermediate maps of every P-frame.
pub fn refine_gops_detailed(gops: &[GopStream], config: &RefineConfig, threads: usize) -> Result<Vec<Vec<RefinedFrame>>> {
    per_gop(gops, threads, |g| refine_gop_detailed(g, config, &mut StageTimings::default()))
}

fn per_gop<T: Send>(
    gops: &[GopStream],
    threads: usize,
    f: impl Fn(&GopStream) -> Result<T> + Sync + Send,
) -> Result<Vec<T>> {
    if threads == 1 {
        return gops.iter().map(f).collect();
    }
    use rayon::prelude::*;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::invalid(format!("thread pool: {e}")))?;
    pool.install(|| gops.par_iter().map(f).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codec::zero_residual;
    use crate::gop::PFrame;
    use crate::mv::MotionVector;

    fn cmap(w: usize, h: usize, f: impl FnMut(usize, usize) -> f64) -> ConfidenceMap {
        ConfidenceMap::normalized(Plane::from_fn(w, h, f))
    }

    fn uniform_gop(w: usize, h: usize, mv: MotionVector, n: usize) -> GopStream {
        let (bx, by) = crate::mv::grid_dims(w, h);
        GopStream {
            iframe: Plane::from_fn(w, h, |x, y| ((x * 13 + y * 29) % 256) as u8),
            pframes: vec![PFrame { mv: MotionVectorField::uniform(bx, by, mv), residual: zero_residual(w, h) }; n],
        }
    }

    #[test]
    fn upsample_single_block() {
        let mv = MotionVectorField::uniform(1, 1, MotionVector::new(8, -4));
        let f = upsample_mv(&mv, 16, 16).unwrap();
        assert_eq!(f, FlowField::uniform(16, 16, 2.0, -1.0));
        assert!(upsample_mv(&mv, 32, 16).is_err());
    }

    #[test]
    fn upsample_quadrants_and_partial_blocks() {
        let mut mv = MotionVectorField::zeros(2, 2);
        mv.set(1, 0, MotionVector::new(4, 0));
        mv.set(0, 1, MotionVector::new(0, 8));
        mv.set(1, 1, MotionVector::new(-2, 1));
        let f = upsample_mv(&mv, 20, 17).unwrap();
        for y in 0..17 {
            for x in 0..20 {
                let (u, v) = mv.get(x / 16, y / 16).to_pel();
                assert_eq!(f.get(x, y), (u, v));
            }
        }
    }

    #[test]
    fn zero_motion_traces_to_self() {
        let gop = uniform_gop(32, 32, MotionVector::ZERO, 3);
        let (flow, trace) = accumulate_trace(&gop, 3).unwrap();
        assert_eq!(flow, FlowField::zeros(32, 32));
        assert_eq!(trace.src_x.get(5, 9), 5.0);
        assert_eq!(trace.src_y.get(5, 9), 9.0);
    }

    #[test]
    fn uniform_translation_composes() {
        let gop = uniform_gop(48, 32, MotionVector::new(4, 0), 2);
        let (flow, _) = accumulate_trace(&gop, 2).unwrap();
        for y in 0..32 {
            for x in 2..48 {
                assert_eq!(flow.get(x, y), (2.0, 0.0));
            }
        }
        // Sources left of the frame clamp to column 0.
        assert_eq!(flow.get(1, 0), (1.0, 0.0));
        assert!(accumulate_trace(&gop, 3).is_err());
    }

    #[test]
    fn propagate_cases() {
        let conf = cmap(8, 8, |x, y| (x + 8 * y) as f64 / 63.0);
        let ident = TraceField {
            src_x: Plane::from_fn(8, 8, |x, _| x as f64),
            src_y: Plane::from_fn(8, 8, |_, y| y as f64),
        };
        assert_eq!(propagate_confidence(&conf, &ident).unwrap(), conf);
        let wild = TraceField { src_x: Plane::new(8, 8, 6.5), src_y: Plane::new(8, 8, -3.0) };
        let uniform = cmap(8, 8, |_, _| 0.25);
        assert_eq!(propagate_confidence(&uniform, &wild).unwrap(), uniform);
        // 6.5 rounds away from zero to 7; -3 clamps to row 0.
        assert_eq!(propagate_confidence(&conf, &wild).unwrap().values.get(0, 0), conf.values.get(7, 0));
        assert!(propagate_confidence(&ConfidenceMap::new(Plane::new(8, 8, 2.0)), &ident).is_err());
    }

    #[test]
    fn median_cases() {
        let c = cmap(5, 5, |_, _| 0.3);
        assert_eq!(median3(&c).unwrap(), c);
        let impulse = cmap(5, 5, |x, y| if (x, y) == (2, 2) { 1.0 } else { 0.0 });
        assert!(median3(&impulse).unwrap().values.data().iter().all(|&v| v == 0.0));
        assert!(median3(&cmap(2, 5, |_, _| 0.0)).is_err());
    }

    #[test]
    fn median_network_matches_sort() {
        let mut state = 12345u64;
        for _ in 0..2000 {
            let mut vals = [0.0; 9];
            for v in &mut vals {
                state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                *v = ((state >> 33) % 7) as f64;
            }
            let mut sorted = vals;
            sorted.sort_by(f64::total_cmp);
            assert_eq!(median9(vals), sorted[4]);
        }
    }

    #[test]
    fn pool_cases() {
        let c = cmap(20, 20, |_, _| 0.4);
        assert_eq!(block_pool(&c, 16).unwrap(), c);
        let single = cmap(16, 16, |x, y| if (x, y) == (3, 7) { 1.0 } else { 0.0 });
        let pooled = block_pool(&single, 16).unwrap();
        assert!(pooled.values.data().iter().all(|&v| v == 1.0 / 256.0));
        let edge = cmap(18, 16, |x, _| if x == 17 { 1.0 } else { 0.0 });
        assert_eq!(block_pool(&edge, 16).unwrap().values.get(16, 0), 0.5);
        assert!(block_pool(&c, 0).is_err());
    }

    #[test]
    fn threshold_cases() {
        let flow = FlowField::uniform(32, 16, 1.5, -2.0);
        let cfg = RefineConfig::default();
        assert_eq!(threshold_flow(&flow, &cmap(32, 16, |_, _| 1.0), &cfg).unwrap(), flow);
        assert_eq!(threshold_flow(&flow, &cmap(32, 16, |_, _| 0.0), &cfg).unwrap(), FlowField::zeros(32, 16));
        let split = cmap(32, 16, |x, _| if x < 16 { 0.005 } else { 0.01 });
        let out = threshold_flow(&flow, &split, &cfg).unwrap();
        assert_eq!(out.get(3, 3), (0.0, 0.0));
        assert_eq!(out.get(20, 3), (1.5, -2.0));
    }

    #[test]
    fn percentile_keeps_ties_and_top_fraction() {
        let flow = FlowField::uniform(10, 1, 1.0, 1.0);
        let cfg = RefineConfig { threshold_mode: ThresholdMode::Percentile, percentile_keep: 0.8, ..Default::default() };
        let conf = cmap(10, 1, |x, _| x as f64 / 9.0);
        assert_eq!(threshold_flow(&flow, &conf, &cfg).unwrap().nonzero_count(), 8);
        let ties = cmap(10, 1, |x, _| if x < 5 { 0.1 } else { 0.9 });
        assert_eq!(threshold_flow(&flow, &ties, &cfg).unwrap().nonzero_count(), 10);
        let all = RefineConfig { percentile_keep: 1.0, ..cfg };
        assert_eq!(threshold_flow(&flow, &conf, &all).unwrap(), flow);
        let none = RefineConfig { percentile_keep: 0.0, ..cfg };
        assert_eq!(threshold_flow(&flow, &conf, &none).unwrap().nonzero_count(), 0);
    }

    #[test]
    fn static_gop_refines_to_zero() {
        let gop = uniform_gop(32, 32, MotionVector::ZERO, 4);
        for f in refine_gop(&gop, &RefineConfig::default()).unwrap() {
            assert_eq!(f, FlowField::zeros(32, 32));
        }
    }

    #[test]
    fn config_validation() {
        assert!(RefineConfig { fixed_threshold: 1.2, ..Default::default() }.validate().is_err());
        assert!(RefineConfig { percentile_keep: -0.1, ..Default::default() }.validate().is_err());
        assert!(RefineConfig { median_window: 4, ..Default::default() }.validate().is_err());
        assert_eq!("iframe-static".parse::<ConfidenceMode>(), Ok(ConfidenceMode::IframeStatic));
        assert!("bogus".parse::<Pooling>().is_err());
    }
}
