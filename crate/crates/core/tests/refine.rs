mod common;

use common::*;
use mvrefine::codec::{encode_gop, inject_mv_noise_in, NoiseRegion};
use mvrefine::confidence::iframe_confidence;
use mvrefine::refine::{
    accumulate_trace, block_pool, median3, propagate_confidence, refine_gop, refine_gop_detailed, threshold_flow,
    upsample_mv, ConfidenceMode, Pooling, RefineConfig, StageTimings, ThresholdMode,
};
use mvrefine::synth::{synthesize, SceneKind, SynthSpec};
use mvrefine::{ConfidenceMap, FlowField, GradientKernel, MotionVector, MotionVectorField, Plane, TraceField};
use proptest::prelude::*;
use rand::Rng;

fn random_map(seed: u64, w: usize, h: usize) -> ConfidenceMap {
    let mut r = rng(seed);
    ConfidenceMap::normalized(Plane::from_fn(w, h, |_, _| r.gen_range(0.0..=1.0)))
}

#[test]
fn upsample_matches_block_index() {
    let mut r = rng(1);
    let mut mv = MotionVectorField::for_frame(40, 35);
    for v in mv.vectors_mut() {
        *v = MotionVector::new(r.gen_range(-30..30), r.gen_range(-30..30));
    }
    let f = upsample_mv(&mv, 40, 35).unwrap();
    for y in 0..35 {
        for x in 0..40 {
            let v = mv.vectors()[(y / 16) * 3 + x / 16];
            assert_eq!(f.get(x, y), (f64::from(v.dx) / 4.0, f64::from(v.dy) / 4.0));
        }
    }
}

#[test]
fn trace_matches_walker_on_whole_pel_and_mixed_streams() {
    let mut r = rng(2);
    for case in 0..20 {
        let mut gop = random_gop(&mut r, 48, 48, 3, 24);
        if case % 2 == 0 {
            // Whole-pel vectors exercise the reuse path.
            for p in &mut gop.pframes {
                for v in p.mv.vectors_mut() {
                    *v = MotionVector::new(v.dx / 4 * 4, v.dy / 4 * 4);
                }
            }
        }
        for target in 0..=3 {
            let (flow, trace) = accumulate_trace(&gop, target).unwrap();
            for y in 0..48 {
                for x in 0..48 {
                    let (sx, sy) = walk_pixel(&gop, target, x, y);
                    assert_eq!((trace.src_x.get(x, y), trace.src_y.get(x, y)), (sx, sy));
                    assert_eq!(flow.get(x, y), (x as f64 - sx, y as f64 - sy));
                }
            }
        }
    }
}

#[test]
fn propagate_is_a_lookup() {
    let conf = random_map(3, 30, 20);
    let mut r = rng(4);
    let trace = TraceField {
        src_x: Plane::from_fn(30, 20, |_, _| f64::from(r.gen_range(-8..160)) / 4.0),
        src_y: Plane::from_fn(30, 20, |_, _| f64::from(r.gen_range(-8..100)) / 4.0),
    };
    let out = propagate_confidence(&conf, &trace).unwrap();
    for y in 0..20 {
        for x in 0..30 {
            let sx = trace.src_x.get(x, y).round().clamp(0.0, 29.0) as usize;
            let sy = trace.src_y.get(x, y).round().clamp(0.0, 19.0) as usize;
            assert_eq!(out.values.get(x, y), conf.values.get(sx, sy));
        }
    }
}

#[test]
fn median_matches_window_sort() {
    let map = random_map(5, 17, 13);
    let out = median3(&map).unwrap();
    for y in 0..13isize {
        for x in 0..17isize {
            let mut win: Vec<f64> =
                (-1..=1).flat_map(|dy| (-1..=1).map(move |dx| (dx, dy))).map(|(dx, dy)| map.values.get_clamped(x + dx, y + dy)).collect();
            win.sort_by(f64::total_cmp);
            assert_eq!(out.values.get(x as usize, y as usize), win[4]);
        }
    }
}

#[test]
fn pool_matches_two_pass_mean() {
    let map = random_map(6, 37, 21);
    let out = block_pool(&map, 16).unwrap();
    for by in 0..2 {
        for bx in 0..3 {
            let xs = bx * 16..((bx + 1) * 16).min(37);
            let ys = by * 16..((by + 1) * 16).min(21);
            let n = (xs.len() * ys.len()) as f64;
            let mean = ys.clone().flat_map(|y| xs.clone().map(move |x| (x, y))).map(|(x, y)| map.values.get(x, y)).sum::<f64>() / n;
            for y in ys.clone() {
                for x in xs.clone() {
                    assert!((out.values.get(x, y) - mean).abs() < 1e-12);
                }
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn pool_and_median_stay_in_range_and_pool_is_idempotent(seed in any::<u64>(), w in 3usize..40, h in 3usize..40, block in 1usize..20) {
        let map = random_map(seed, w, h);
        let med = median3(&map).unwrap();
        let pooled = block_pool(&med, block).unwrap();
        for v in med.values.data().iter().chain(pooled.values.data()) {
            prop_assert!((0.0..=1.0).contains(v));
        }
        prop_assert_eq!(block_pool(&pooled, block).unwrap(), pooled.clone());
        // A median of a block-constant map leaves block interiors alone.
        if block >= 3 {
            let again = median3(&pooled).unwrap();
            for y in 0..h {
                for x in 0..w {
                    let interior = x % block != 0 && x % block != block - 1 && y % block != 0 && y % block != block - 1
                        && x + 1 < w && y + 1 < h;
                    if interior {
                        prop_assert_eq!(again.values.get(x, y), pooled.values.get(x, y));
                    }
                }
            }
        }
    }

    #[test]
    fn keep_all_and_zero_threshold_change_nothing(seed in any::<u64>()) {
        let mut r = rng(seed);
        let flow = FlowField::from_fn(12, 9, |_, _| (r.gen_range(-3.0..3.0), r.gen_range(-3.0..3.0)));
        let conf = random_map(seed ^ 1, 12, 9);
        let keep_all = RefineConfig { threshold_mode: ThresholdMode::Percentile, percentile_keep: 1.0, ..Default::default() };
        prop_assert_eq!(threshold_flow(&flow, &conf, &keep_all).unwrap(), flow.clone());
        let zero = RefineConfig { fixed_threshold: 0.0, ..Default::default() };
        prop_assert_eq!(threshold_flow(&flow, &conf, &zero).unwrap(), flow);
    }
}

#[test]
fn translating_texture_keeps_uniform_flow() {
    let scene = synthesize(&SynthSpec::new(SceneKind::Translate, 96, 64, 6)).unwrap();
    let gop = encode_gop(scene.sequence.frames(), 6).unwrap();
    let refined = refine_gop(&gop, &RefineConfig::default()).unwrap();
    for (i, f) in refined.iter().enumerate() {
        let t = (i + 1) as f64;
        for y in 16..48 {
            for x in 16..80 {
                assert_eq!(f.get(x, y), (2.0 * t, t), "frame {} pixel ({x},{y})", i + 1);
            }
        }
    }
}

#[test]
fn flat_region_noise_is_suppressed() {
    let scene = synthesize(&SynthSpec::new(SceneKind::NoiseFlat, 96, 96, 8)).unwrap();
    let gop = encode_gop(scene.sequence.frames(), 6).unwrap();
    let noisy = inject_mv_noise_in(&gop, 0.3, 32, 9, NoiseRegion::FlatBlocks).unwrap();
    let frames = refine_gop_detailed(&noisy, &RefineConfig::default(), &mut StageTimings::default()).unwrap();
    for f in &frames {
        assert!(f.refined.nonzero_count() < f.raw.nonzero_count());
        for i in 0..f.raw.u.len() {
            assert!(f.refined.is_zero_at(i) || f.refined.get(i % 96, i / 96) == f.raw.get(i % 96, i / 96));
        }
        for v in f.pixel_confidence.values.data().iter().chain(f.block_confidence.values.data()) {
            assert!((0.0..=1.0).contains(v));
        }
    }
}

#[test]
fn static_confidence_and_pixel_pooling_variants() {
    let scene = synthesize(&SynthSpec::new(SceneKind::RotateSprite, 64, 64, 5)).unwrap();
    let gop = encode_gop(scene.sequence.frames(), 4).unwrap();
    let iconf = iframe_confidence(&gop.iframe, GradientKernel::Scharr).unwrap();
    let cfg = RefineConfig { confidence_mode: ConfidenceMode::IframeStatic, pooling: Pooling::Pixel, ..Default::default() };
    let frames = refine_gop_detailed(&gop, &cfg, &mut StageTimings::default()).unwrap();
    let expected_block = median3(&iconf).unwrap();
    for f in &frames {
        assert_eq!(f.pixel_confidence, iconf);
        assert_eq!(f.block_confidence, expected_block);
    }
    let sobel = RefineConfig { kernel: GradientKernel::Sobel, ..Default::default() };
    assert_eq!(refine_gop(&gop, &sobel).unwrap().len(), 4);
}

#[test]
fn raising_threshold_never_adds_vectors() {
    let scene = synthesize(&SynthSpec::new(SceneKind::NoiseFlat, 64, 64, 6)).unwrap();
    let gop = encode_gop(scene.sequence.frames(), 4).unwrap();
    let noisy = inject_mv_noise_in(&gop, 0.5, 24, 1, NoiseRegion::All).unwrap();
    let mut last = usize::MAX;
    for t in [0.0, 0.0075, 0.02, 0.1, 0.3, 1.0] {
        let cfg = RefineConfig { fixed_threshold: t, ..Default::default() };
        let count: usize = refine_gop(&noisy, &cfg).unwrap().iter().map(FlowField::nonzero_count).sum();
        assert!(count <= last);
        last = count;
    }
}
