//! Dense windowed Lucas–Kanade flow, used as the reference the refined
//! motion vectors are compared against.
//!
//! Intensities are rescaled to [0, 1]. Spatial gradients are central
//! differences of the first frame; the temporal gradient is `b - a`. A pixel
//! whose structure tensor has smaller eigenvalue below `min_eigen` is
//! reported as zero flow with zero confidence; otherwise the confidence is
//! that eigenvalue.
//!
//! Each pyramid level runs a few Gauss–Newton iterations: frame `b` is
//! resampled along the current estimate and the residual motion re-solved
//! against the fixed gradients of `a`.

use serde::{Deserialize, Serialize};

use crate::confidence::{box_sum, central_gradients, sym2_eigen, ConfidenceMap, GradientField};
use crate::error::{Error, Result};
use crate::flow::FlowField;
use crate::plane::{LumaPlane, Plane};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LkConfig {
    pub window: usize,
    pub min_eigen: f64,
    pub pyramid_levels: usize,
    /// Warp-and-solve passes per pyramid level.
    pub iterations: usize,
}

impl Default for LkConfig {
    fn default() -> Self {
        LkConfig { window: 5, min_eigen: 1e-4, pyramid_levels: 1, iterations: 5 }
    }
}

impl LkConfig {
    pub fn validate(&self) -> Result<()> {
        if self.window < 3 || self.window % 2 == 0 {
            return Err(Error::invalid(format!("LK window must be odd and at least 3, got {}", self.window)));
        }
        if self.pyramid_levels == 0 {
            return Err(Error::invalid("pyramid_levels must be at least 1"));
        }
        if self.iterations == 0 {
            return Err(Error::invalid("iterations must be at least 1"));
        }
        if !(self.min_eigen >= 0.0) {
            return Err(Error::invalid("min_eigen must be non-negative"));
        }
        Ok(())
    }
}

fn to_unit(frame: &LumaPlane) -> Plane<f64> {
    frame.map(|v| f64::from(v) / 255.0)
}

/// 2×2 box downsample; odd trailing rows/columns are folded in by clamping.
fn downsample(src: &Plane<f64>) -> Plane<f64> {
    let (w, h) = src.dims();
    let (nw, nh) = (w.div_ceil(2).max(1), h.div_ceil(2).max(1));
    Plane::from_fn(nw, nh, |x, y| {
        let (x0, y0) = (2 * x as isize, 2 * y as isize);
        0.25 * (src.get_clamped(x0, y0)
            + src.get_clamped(x0 + 1, y0)
            + src.get_clamped(x0, y0 + 1)
            + src.get_clamped(x0 + 1, y0 + 1))
    })
}

fn bilinear(src: &Plane<f64>, x: f64, y: f64) -> f64 {
    let (w, h) = src.dims();
    let x = x.clamp(0.0, (w - 1) as f64);
    let y = y.clamp(0.0, (h - 1) as f64);
    let (x0, y0) = (x.floor() as usize, y.floor() as usize);
    let (x1, y1) = ((x0 + 1).min(w - 1), (y0 + 1).min(h - 1));
    let (fx, fy) = (x - x0 as f64, y - y0 as f64);
    let top = src.get(x0, y0) * (1.0 - fx) + src.get(x1, y0) * fx;
    let bottom = src.get(x0, y1) * (1.0 - fx) + src.get(x1, y1) * fx;
    top * (1.0 - fy) + bottom * fy
}

/// Window sums of the structure tensor of `a`, fixed across iterations.
struct LevelSystem {
    gx: Plane<f64>,
    gy: Plane<f64>,
    sxx: Plane<f64>,
    sxy: Plane<f64>,
    syy: Plane<f64>,
    lambda2: Plane<f64>,
    radius: usize,
}

impl LevelSystem {
    fn new(a: &Plane<f64>, window: usize) -> Self {
        let radius = window / 2;
        let GradientField { gx, gy } = central_gradients(a);
        let (w, h) = a.dims();
        let prod = |f: &dyn Fn(f64, f64) -> f64| {
            let data = gx.data().iter().zip(gy.data()).map(|(&x, &y)| f(x, y)).collect();
            box_sum(&Plane::from_vec(w, h, data).expect("sized"), radius)
        };
        let (sxx, sxy, syy) = (prod(&|x, _| x * x), prod(&|x, y| x * y), prod(&|_, y| y * y));
        let lambda2 = Plane::from_vec(
            w,
            h,
            (0..w * h).map(|i| sym2_eigen(sxx.data()[i], sxy.data()[i], syy.data()[i]).1).collect(),
        )
        .expect("sized");
        LevelSystem { gx, gy, sxx, sxy, syy, lambda2, radius }
    }

    /// Flow increment per pixel between `a` and the warped `b`; `None` where
    /// the system is not solvable.
    fn solve(&self, a: &Plane<f64>, warped: &Plane<f64>, min_eigen: f64) -> Vec<Option<(f64, f64)>> {
        let (w, h) = a.dims();
        let temporal = |g: &Plane<f64>| {
            let data = g.data().iter().zip(warped.data().iter().zip(a.data())).map(|(&gi, (&b, &a))| gi * (b - a)).collect();
            box_sum(&Plane::from_vec(w, h, data).expect("sized"), self.radius)
        };
        let (sxt, syt) = (temporal(&self.gx), temporal(&self.gy));
        (0..w * h)
            .map(|i| {
                let l2 = self.lambda2.data()[i];
                if l2 < min_eigen || l2 <= 0.0 {
                    return None;
                }
                let (a11, a12, a22) = (self.sxx.data()[i], self.sxy.data()[i], self.syy.data()[i]);
                let det = a11 * a22 - a12 * a12;
                let (p, q) = (sxt.data()[i], syt.data()[i]);
                let u = (-p * a22 + q * a12) / det;
                let v = (-q * a11 + p * a12) / det;
                (u.is_finite() && v.is_finite()).then_some((u, v))
            })
            .collect()
    }
}

pub fn lk_flow(frame_a: &LumaPlane, frame_b: &LumaPlane, config: &LkConfig) -> Result<(FlowField, ConfidenceMap)> {
    config.validate()?;
    if frame_a.dims() != frame_b.dims() {
        return Err(Error::validation(format!(
            "frames differ in size: {:?} vs {:?}",
            frame_a.dims(),
            frame_b.dims()
        )));
    }
    let mut pyr_a = vec![to_unit(frame_a)];
    let mut pyr_b = vec![to_unit(frame_b)];
    for _ in 1..config.pyramid_levels {
        let (na, nb) = (downsample(pyr_a.last().unwrap()), downsample(pyr_b.last().unwrap()));
        pyr_a.push(na);
        pyr_b.push(nb);
    }

    let mut flow: Option<FlowField> = None;
    let mut confidence = Plane::new(0, 0, 0.0);
    for level in (0..config.pyramid_levels).rev() {
        let (a, b) = (&pyr_a[level], &pyr_b[level]);
        let (w, h) = a.dims();
        let mut current = match flow.take() {
            None => FlowField::zeros(w, h),
            Some(coarse) => FlowField::from_fn(w, h, |x, y| {
                let (cx, cy) = ((x / 2).min(coarse.width() - 1), (y / 2).min(coarse.height() - 1));
                let (u, v) = coarse.get(cx, cy);
                (2.0 * u, 2.0 * v)
            }),
        };
        let system = LevelSystem::new(a, config.window);
        let mut solvable = vec![false; w * h];
        let warp = |f: &FlowField| {
            Plane::from_fn(w, h, |x, y| {
                let (u, v) = f.get(x, y);
                bilinear(b, x as f64 + u, y as f64 + v)
            })
        };
        let residual = |warped: &Plane<f64>| {
            let data = warped.data().iter().zip(a.data()).map(|(&b, &a)| (b - a) * (b - a)).collect();
            box_sum(&Plane::from_vec(w, h, data).expect("sized"), system.radius)
        };
        let mut warped = warp(&current);
        for _ in 0..config.iterations {
            let mut candidate = current.clone();
            for (i, s) in system.solve(a, &warped, config.min_eigen).into_iter().enumerate() {
                if let Some((du, dv)) = s {
                    candidate.u.data_mut()[i] += du;
                    candidate.v.data_mut()[i] += dv;
                    solvable[i] = true;
                }
            }
            // Keep a step only where it lowers the windowed residual.
            let cand_warped = warp(&candidate);
            let (before, after) = (residual(&warped), residual(&cand_warped));
            let mut moved = false;
            for i in 0..w * h {
                if after.data()[i] < before.data()[i] {
                    current.u.data_mut()[i] = candidate.u.data()[i];
                    current.v.data_mut()[i] = candidate.v.data()[i];
                    warped.data_mut()[i] = cand_warped.data()[i];
                    moved = true;
                }
            }
            if !moved {
                break;
            }
        }
        if level == 0 {
            for (i, ok) in solvable.iter().enumerate() {
                if !ok {
                    current.u.data_mut()[i] = 0.0;
                    current.v.data_mut()[i] = 0.0;
                }
            }
            confidence = system.lambda2.map(|l| if l < config.min_eigen { 0.0 } else { l });
        }
        flow = Some(current);
    }
    Ok((flow.expect("at least one level"), ConfidenceMap::new(confidence)))
}
