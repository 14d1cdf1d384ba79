mod common;

use common::{random_frame, rng};
use mvrefine::confidence::{
    central_gradients, edge_strength, gradients, normalize, scharr_gradients, structure_tensor, structure_tensor_confidence,
    GradientKernel,
};
use mvrefine::{ConfidenceMap, Plane};
use proptest::prelude::*;
use rand::Rng;

/// Direct correlation with an explicit kernel table.
fn convolve_at(frame: &Plane<u8>, kernel: [[f64; 3]; 3], x: usize, y: usize) -> f64 {
    let mut acc = 0.0;
    for (j, row) in kernel.iter().enumerate() {
        for (i, k) in row.iter().enumerate() {
            acc += k * f64::from(frame.get_clamped(x as isize + i as isize - 1, y as isize + j as isize - 1));
        }
    }
    acc
}

#[test]
fn scharr_matches_direct_convolution() {
    let kx = [[-3.0, 0.0, 3.0], [-10.0, 0.0, 10.0], [-3.0, 0.0, 3.0]];
    let ky = [[-3.0, -10.0, -3.0], [0.0, 0.0, 0.0], [3.0, 10.0, 3.0]];
    let f = random_frame(&mut rng(1), 23, 17);
    let g = scharr_gradients(&f).unwrap();
    for y in 0..17 {
        for x in 0..23 {
            assert_eq!(g.gx.get(x, y), convolve_at(&f, kx, x, y));
            assert_eq!(g.gy.get(x, y), convolve_at(&f, ky, x, y));
        }
    }
    let sobel = gradients(&f, GradientKernel::Sobel).unwrap();
    let sx = [[-1.0, 0.0, 1.0], [-2.0, 0.0, 2.0], [-1.0, 0.0, 1.0]];
    assert_eq!(sobel.gx.get(5, 5), convolve_at(&f, sx, 5, 5));
}

#[test]
fn edge_strength_is_elementwise_norm() {
    let f = random_frame(&mut rng(2), 19, 21);
    let g = scharr_gradients(&f).unwrap();
    let e = edge_strength(&g);
    for i in 0..g.gx.len() {
        let (a, b) = (g.gx.data()[i], g.gy.data()[i]);
        assert!((e.values.data()[i] - (a * a + b * b).sqrt()).abs() <= 1e-9 * (1.0 + e.values.data()[i]));
    }
}

/// Explicit window sum followed by the characteristic-polynomial roots.
fn tensor_lambda1_direct(gx: &Plane<f64>, gy: &Plane<f64>, window: usize, x: usize, y: usize) -> f64 {
    let r = (window / 2) as isize;
    let (mut a, mut b, mut c) = (0.0, 0.0, 0.0);
    for dy in -r..=r {
        for dx in -r..=r {
            let fx = gx.get_clamped(x as isize + dx, y as isize + dy);
            let fy = gy.get_clamped(x as isize + dx, y as isize + dy);
            a += fx * fx;
            b += fx * fy;
            c += fy * fy;
        }
    }
    let tr = a + c;
    let det = a * c - b * b;
    (tr + (tr * tr - 4.0 * det).max(0.0).sqrt()) / 2.0
}

#[test]
fn tensor_matches_direct_window_sum() {
    let f = random_frame(&mut rng(3), 20, 14);
    let g = scharr_gradients(&f).unwrap();
    let conf = structure_tensor_confidence(&f, 3).unwrap();
    for y in 0..14 {
        for x in 0..20 {
            let want = tensor_lambda1_direct(&g.gx, &g.gy, 3, x, y);
            let got = conf.values.get(x, y);
            assert!((got - want).abs() <= 1e-6 * want.max(1.0), "({x},{y}): {got} vs {want}");
        }
    }
}

#[test]
fn edge_strength_ignores_brightness_offset() {
    let f = Plane::from_fn(16, 16, |x, y| ((x * 9 + y * 5) % 150) as u8);
    let brighter = f.map(|v| v + 100);
    let a = edge_strength(&scharr_gradients(&f).unwrap());
    let b = edge_strength(&scharr_gradients(&brighter).unwrap());
    assert_eq!(a, b);
}

#[test]
fn central_gradients_of_ramp() {
    let ramp = Plane::from_fn(6, 4, |x, _| x as f64 * 0.1);
    let g = central_gradients(&ramp);
    assert!((g.gx.get(3, 2) - 0.1).abs() < 1e-12);
    assert!((g.gx.get(0, 2) - 0.05).abs() < 1e-12);
    assert_eq!(g.gy.get(3, 2), 0.0);
}

proptest! {
    #[test]
    fn normalize_scale_invariant_and_idempotent(seed in any::<u64>(), scale in 1e-3f64..1e4) {
        let mut r = rng(seed);
        let values = Plane::from_fn(9, 7, |_, _| r.gen_range(0.0..500.0));
        let n = normalize(&ConfidenceMap::new(values.clone()));
        let ns = normalize(&ConfidenceMap::new(values.map(|v| v * scale)));
        for (a, b) in n.values.data().iter().zip(ns.values.data()) {
            prop_assert!((a - b).abs() < 1e-12);
        }
        prop_assert_eq!(normalize(&n), n.clone());
        prop_assert_eq!(n.max(), 1.0);
        prop_assert!(n.values.data().iter().all(|v| (0.0..=1.0).contains(v)));
    }

    #[test]
    fn eigenvalues_ordered_and_nonnegative(seed in any::<u64>(), window in prop::sample::select(vec![1usize, 3, 5, 9])) {
        let f = random_frame(&mut rng(seed), 12, 10);
        let e = structure_tensor(&scharr_gradients(&f).unwrap(), window).unwrap();
        for (l1, l2) in e.lambda1.data().iter().zip(e.lambda2.data()) {
            prop_assert!(l1 >= l2 && *l2 >= 0.0);
        }
    }
}
