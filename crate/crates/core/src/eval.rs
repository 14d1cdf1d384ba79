//! Endpoint-error statistics between flow fields.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flow::FlowField;
use crate::plane::Plane;

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct FlowStats {
    /// Mean Euclidean distance between corresponding vectors.
    pub mean_epe: f64,
    /// Share of pixels where `a` is nonzero.
    pub nonzero_fraction: f64,
    /// Share of pixels where `a` is zero but `b` is not.
    pub suppressed_fraction: f64,
    /// Mean vector length of `a`.
    pub mean_magnitude: f64,
}

/// Compare `a` against `b` over all pixels, or only where `mask` is true.
/// An empty selection yields all-zero statistics.
pub fn endpoint_error(a: &FlowField, b: &FlowField, mask: Option<&Plane<bool>>) -> Result<FlowStats> {
    if a.dims() != b.dims() {
        return Err(Error::validation(format!("flow sizes differ: {:?} vs {:?}", a.dims(), b.dims())));
    }
    if let Some(m) = mask {
        if m.dims() != a.dims() {
            return Err(Error::validation("mask size differs from flow size"));
        }
    }
    let (mut count, mut epe, mut nonzero, mut suppressed, mut magnitude) = (0usize, 0.0, 0usize, 0usize, 0.0);
    for i in 0..a.u.len() {
        if mask.is_some_and(|m| !m.data()[i]) {
            continue;
        }
        let (ua, va) = (a.u.data()[i], a.v.data()[i]);
        let (ub, vb) = (b.u.data()[i], b.v.data()[i]);
        count += 1;
        epe += (ua - ub).hypot(va - vb);
        magnitude += ua.hypot(va);
        let a_zero = a.is_zero_at(i);
        if !a_zero {
            nonzero += 1;
        } else if !b.is_zero_at(i) {
            suppressed += 1;
        }
    }
    if count == 0 {
        return Ok(FlowStats::default());
    }
    let n = count as f64;
    Ok(FlowStats {
        mean_epe: epe / n,
        nonzero_fraction: nonzero as f64 / n,
        suppressed_fraction: suppressed as f64 / n,
        mean_magnitude: magnitude / n,
    })
}
