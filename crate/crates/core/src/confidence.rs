//! Motion confidence from I-frame intensity structure.
//!
//! Two backends: the L2 edge strength of a 3×3 derivative filter (Scharr by
//! default, Sobel optional), and the largest eigenvalue of the windowed
//! structure tensor.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::plane::{LumaPlane, Plane};

/// 3×3 derivative kernel used for edge strength.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GradientKernel {
    #[default]
    Scharr,
    Sobel,
}

impl GradientKernel {
    /// Smoothing weights across the derivative direction, e.g. (3, 10, 3).
    fn weights(self) -> [f64; 3] {
        match self {
            GradientKernel::Scharr => [3.0, 10.0, 3.0],
            GradientKernel::Sobel => [1.0, 2.0, 1.0],
        }
    }
}

impl std::str::FromStr for GradientKernel {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "scharr" => Ok(GradientKernel::Scharr),
            "sobel" => Ok(GradientKernel::Sobel),
            _ => Err(format!("unknown kernel '{s}' (expected scharr or sobel)")),
        }
    }
}

impl std::fmt::Display for GradientKernel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            GradientKernel::Scharr => "scharr",
            GradientKernel::Sobel => "sobel",
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GradientField {
    pub gx: Plane<f64>,
    pub gy: Plane<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConfidenceMap {
    pub values: Plane<f64>,
    pub normalized: bool,
}

impl ConfidenceMap {
    pub fn new(values: Plane<f64>) -> Self {
        ConfidenceMap { values, normalized: false }
    }

    /// A map already known to lie in [0, 1].
    pub fn normalized(values: Plane<f64>) -> Self {
        ConfidenceMap { values, normalized: true }
    }

    pub fn dims(&self) -> (usize, usize) {
        self.values.dims()
    }

    pub fn max(&self) -> f64 {
        self.values.data().iter().copied().fold(0.0, f64::max)
    }
}

pub fn scharr_gradients(frame: &LumaPlane) -> Result<GradientField> {
    gradients(frame, GradientKernel::Scharr)
}

/// Derivative-filter response on raw 0..=255 intensities, edges replicated,
/// kernel weights unnormalized.
pub fn gradients(frame: &LumaPlane, kernel: GradientKernel) -> Result<GradientField> {
    let (w, h) = frame.dims();
    if w < 3 || h < 3 {
        return Err(Error::validation(format!("gradient needs at least 3x3 pixels, got {w}x{h}")));
    }
    let [a, b, c] = kernel.weights();
    let mut gx = Plane::new(w, h, 0.0);
    let mut gy = Plane::new(w, h, 0.0);
    for y in 0..h {
        let ym = y.saturating_sub(1);
        let yp = (y + 1).min(h - 1);
        let (r0, r1, r2) = (frame.row(ym), frame.row(y), frame.row(yp));
        for x in 0..w {
            let xm = x.saturating_sub(1);
            let xp = (x + 1).min(w - 1);
            let p = |r: &[u8], i: usize| f64::from(r[i]);
            let dx = a * (p(r0, xp) - p(r0, xm)) + b * (p(r1, xp) - p(r1, xm)) + c * (p(r2, xp) - p(r2, xm));
            let dy = a * (p(r2, xm) - p(r0, xm)) + b * (p(r2, x) - p(r0, x)) + c * (p(r2, xp) - p(r0, xp));
            gx.set(x, y, dx);
            gy.set(x, y, dy);
        }
    }
    Ok(GradientField { gx, gy })
}

/// Central differences on intensities rescaled to [0, 1], edges replicated.
pub fn central_gradients(frame: &Plane<f64>) -> GradientField {
    let (w, h) = frame.dims();
    let gx = Plane::from_fn(w, h, |x, y| {
        0.5 * (frame.get((x + 1).min(w - 1), y) - frame.get(x.saturating_sub(1), y))
    });
    let gy = Plane::from_fn(w, h, |x, y| {
        0.5 * (frame.get(x, (y + 1).min(h - 1)) - frame.get(x, y.saturating_sub(1)))
    });
    GradientField { gx, gy }
}

pub fn edge_strength(grads: &GradientField) -> ConfidenceMap {
    let data = grads.gx.data().iter().zip(grads.gy.data()).map(|(&x, &y)| x.hypot(y)).collect();
    ConfidenceMap::new(Plane::from_vec(grads.gx.width(), grads.gx.height(), data).expect("matching planes"))
}

/// Normalized edge strength of an I-frame: the default confidence source.
pub fn iframe_confidence(frame: &LumaPlane, kernel: GradientKernel) -> Result<ConfidenceMap> {
    Ok(normalize(&edge_strength(&gradients(frame, kernel)?)))
}

/// Divide by the per-map maximum. A map with no positive value becomes all zeros.
pub fn normalize(map: &ConfidenceMap) -> ConfidenceMap {
    let max = map.max();
    let values = if max > 0.0 { map.values.map(|v| v / max) } else { map.values.map(|_| 0.0) };
    ConfidenceMap::normalized(values)
}

/// Per-pixel eigenvalues of the structure tensor summed over a square window.
#[derive(Clone, Debug, PartialEq)]
pub struct TensorEigen {
    pub lambda1: Plane<f64>,
    pub lambda2: Plane<f64>,
}

/// Windowed sum with edge replication, `radius` pixels either side.
pub(crate) fn box_sum(src: &Plane<f64>, radius: usize) -> Plane<f64> {
    if radius == 0 {
        return src.clone();
    }
    let (w, h) = src.dims();
    let r = radius as isize;
    let horiz = Plane::from_fn(w, h, |x, y| (-r..=r).map(|d| src.get_clamped(x as isize + d, y as isize)).sum::<f64>());
    Plane::from_fn(w, h, |x, y| (-r..=r).map(|d| horiz.get_clamped(x as isize, y as isize + d)).sum::<f64>())
}

pub(crate) fn check_window(window: usize) -> Result<usize> {
    if window == 0 || window % 2 == 0 {
        return Err(Error::invalid(format!("window must be odd and at least 1, got {window}")));
    }
    Ok(window / 2)
}

/// Eigenvalues of a symmetric PSD 2×2 matrix [[a, b], [b, c]], largest first.
#[inline]
pub(crate) fn sym2_eigen(a: f64, b: f64, c: f64) -> (f64, f64) {
    let half_tr = 0.5 * (a + c);
    let disc = (0.25 * (a - c) * (a - c) + b * b).sqrt();
    let l1 = (half_tr + disc).max(0.0);
    // det / λ1 avoids cancellation in half_tr - disc.
    let l2 = if l1 > 0.0 { ((a * c - b * b) / l1).max(0.0) } else { 0.0 };
    (l1, l2.min(l1))
}

pub fn structure_tensor(grads: &GradientField, window: usize) -> Result<TensorEigen> {
    let radius = check_window(window)?;
    let (w, h) = grads.gx.dims();
    let (gx, gy) = (grads.gx.data(), grads.gy.data());
    let prod = |f: fn(f64, f64) -> f64| {
        Plane::from_vec(w, h, gx.iter().zip(gy).map(|(&x, &y)| f(x, y)).collect()).expect("matching planes")
    };
    let sxx = box_sum(&prod(|x, _| x * x), radius);
    let sxy = box_sum(&prod(|x, y| x * y), radius);
    let syy = box_sum(&prod(|_, y| y * y), radius);
    let mut lambda1 = Plane::new(w, h, 0.0);
    let mut lambda2 = Plane::new(w, h, 0.0);
    for i in 0..w * h {
        let (l1, l2) = sym2_eigen(sxx.data()[i], sxy.data()[i], syy.data()[i]);
        lambda1.data_mut()[i] = l1;
        lambda2.data_mut()[i] = l2;
    }
    Ok(TensorEigen { lambda1, lambda2 })
}

/// Largest structure-tensor eigenvalue over Scharr gradients (unnormalized).
pub fn structure_tensor_confidence(frame: &LumaPlane, window: usize) -> Result<ConfidenceMap> {
    check_window(window)?;
    let grads = scharr_gradients(frame)?;
    Ok(ConfidenceMap::new(structure_tensor(&grads, window)?.lambda1))
}
