//! Refinement throughput measurement.

use std::path::Path;
use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::Serialize;

use crate::dumpio::{read_dump, split_gops, DumpHeader, FrameRecord};
use crate::error::{Error, Result};
use crate::gop::GopStream;
use crate::refine::{refine_gop_timed, RefineConfig, StageTimings};

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct StageMs {
    pub edge: f64,
    pub trace: f64,
    pub propagate: f64,
    pub median: f64,
    pub pool: f64,
    pub threshold: f64,
}

impl From<&StageTimings> for StageMs {
    fn from(t: &StageTimings) -> Self {
        let ms = |d: Duration| d.as_secs_f64() * 1e3;
        StageMs {
            edge: ms(t.edge),
            trace: ms(t.trace),
            propagate: ms(t.propagate),
            median: ms(t.median),
            pool: ms(t.pool),
            threshold: ms(t.threshold),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BenchReport {
    pub width: u32,
    pub height: u32,
    pub frames: usize,
    pub gops: usize,
    pub p_frames: usize,
    pub repetitions: usize,
    pub threads: usize,
    /// Wall-clock seconds of the fastest repetition.
    pub best_seconds: f64,
    /// P-frames refined per second in the fastest repetition.
    pub fps: f64,
    /// Per-stage time of the fastest repetition, summed over workers.
    pub stage_ms: StageMs,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

pub fn benchmark_refine(path: &Path, repetitions: usize, config: &RefineConfig, threads: usize) -> Result<BenchReport> {
    let file = std::fs::File::open(path)?;
    let (header, frames) = read_dump(std::io::BufReader::new(file))?;
    benchmark_stream(&header, &frames, repetitions, config, threads)
}

/// Time refinement of every GOP in an in-memory stream. `threads == 1` runs
/// on the calling thread; otherwise GOPs are spread over a pool (0 = all cores).
pub fn benchmark_stream(
    header: &DumpHeader,
    frames: &[FrameRecord],
    repetitions: usize,
    config: &RefineConfig,
    threads: usize,
) -> Result<BenchReport> {
    if repetitions == 0 {
        return Err(Error::invalid("repetitions must be at least 1"));
    }
    config.validate()?;
    let gops = split_gops(frames)?;
    let p_frames: usize = gops.iter().map(|g| g.pframes.len()).sum();

    let pool = if threads == 1 {
        None
    } else {
        Some(
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .map_err(|e| Error::invalid(format!("thread pool: {e}")))?,
        )
    };
    let mut best: Option<(Duration, StageTimings)> = None;
    for _ in 0..repetitions {
        let start = Instant::now();
        let timings = match &pool {
            None => run_serial(&gops, config)?,
            Some(pool) => pool.install(|| run_parallel(&gops, config))?,
        };
        let elapsed = start.elapsed();
        if best.as_ref().is_none_or(|(d, _)| elapsed < *d) {
            best = Some((elapsed, timings));
        }
    }
    let (elapsed, timings) = best.expect("at least one repetition");
    let secs = elapsed.as_secs_f64();
    let fps = if p_frames == 0 || secs == 0.0 { 0.0 } else { p_frames as f64 / secs };
    Ok(BenchReport {
        width: header.width,
        height: header.height,
        frames: frames.len(),
        gops: gops.len(),
        p_frames,
        repetitions,
        threads: pool.as_ref().map_or(1, |p| p.current_num_threads()),
        best_seconds: secs,
        fps,
        stage_ms: StageMs::from(&timings),
        note: (p_frames == 0).then(|| "stream has no P-frames; no refinement work was done".to_string()),
    })
}

fn run_serial(gops: &[GopStream], config: &RefineConfig) -> Result<StageTimings> {
    let mut timings = StageTimings::default();
    for gop in gops {
        refine_gop_timed(gop, config, &mut timings)?;
    }
    Ok(timings)
}

fn run_parallel(gops: &[GopStream], config: &RefineConfig) -> Result<StageTimings> {
    let parts: Vec<StageTimings> = gops
        .par_iter()
        .map(|gop| {
            let mut t = StageTimings::default();
            refine_gop_timed(gop, config, &mut t).map(|_| t)
        })
        .collect::<Result<_>>()?;
    let mut total = StageTimings::default();
    for p in &parts {
        total.add(p);
    }
    Ok(total)
}
