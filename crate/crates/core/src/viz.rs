//! Flow and confidence rendering.

use crate::confidence::ConfidenceMap;
use crate::error::{Error, Result};
use crate::flow::FlowField;
use crate::plane::{round_half_away, LumaPlane};
use crate::pnm::RgbImage;

/// HSV to RGB with full value; hue in degrees.
fn hsv_full_value(hue: f64, sat: f64) -> [u8; 3] {
    let h = hue.rem_euclid(360.0) / 60.0;
    let sector = h.floor();
    let f = h - sector;
    let (p, q, t) = (1.0 - sat, 1.0 - sat * f, 1.0 - sat * (1.0 - f));
    let (r, g, b) = match sector as u8 {
        0 => (1.0, t, p),
        1 => (q, 1.0, p),
        2 => (p, 1.0, t),
        3 => (p, q, 1.0),
        4 => (t, p, 1.0),
        _ => (1.0, p, q),
    };
    [r, g, b].map(|c| (c * 255.0).round().clamp(0.0, 255.0) as u8)
}

/// Color-wheel encoding: hue is the vector direction, saturation its length
/// relative to `max_magnitude` (clamped to 1). Zero flow is white. `None`
/// scales to the field's largest vector.
pub fn render_flow(flow: &FlowField, max_magnitude: Option<f64>) -> RgbImage {
    let (w, h) = flow.dims();
    let mags: Vec<f64> = flow.u.data().iter().zip(flow.v.data()).map(|(u, v)| u.hypot(*v)).collect();
    let scale = match max_magnitude {
        Some(m) if m > 0.0 => m,
        _ => mags.iter().copied().fold(0.0, f64::max).max(f64::MIN_POSITIVE),
    };
    let pixels = (0..w * h)
        .map(|i| {
            let (u, v) = (flow.u.data()[i], flow.v.data()[i]);
            let sat = (mags[i] / scale).min(1.0);
            hsv_full_value(v.atan2(u).to_degrees(), sat)
        })
        .collect();
    RgbImage { width: w, height: h, pixels }
}

/// Hue in degrees [0, 360) of an RGB triple.
pub fn hue_of(rgb: [u8; 3]) -> Option<f64> {
    let [r, g, b] = rgb.map(f64::from);
    let max = r.max(g).max(b);
    let min = r.min(g).min(b);
    let d = max - min;
    if d == 0.0 {
        return None;
    }
    let h = if max == r {
        60.0 * ((g - b) / d)
    } else if max == g {
        60.0 * ((b - r) / d + 2.0)
    } else {
        60.0 * ((r - g) / d + 4.0)
    };
    Some(h.rem_euclid(360.0))
}

pub fn render_confidence(map: &ConfidenceMap) -> Result<LumaPlane> {
    if !map.normalized || map.values.data().iter().any(|v| !(0.0..=1.0).contains(v)) {
        return Err(Error::validation("confidence map must be normalized to [0, 1]"));
    }
    Ok(map.values.map(|v| round_half_away(v * 255.0) as u8))
}
