//! Dense per-pixel displacement fields and the `.flo` interchange format.
//!
//! `.flo` layout (little-endian): f32 magic 202021.25, i32 width, i32 height,
//! then `width*height` interleaved (u, v) f32 pairs, row-major.

use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::plane::Plane;

pub const FLO_MAGIC: f32 = 202021.25;

/// Displacement in pixels along x (`u`) and y (`v`).
#[derive(Clone, Debug, PartialEq)]
pub struct FlowField {
    pub u: Plane<f64>,
    pub v: Plane<f64>,
}

impl FlowField {
    pub fn zeros(width: usize, height: usize) -> Self {
        FlowField { u: Plane::new(width, height, 0.0), v: Plane::new(width, height, 0.0) }
    }

    pub fn uniform(width: usize, height: usize, u: f64, v: f64) -> Self {
        FlowField { u: Plane::new(width, height, u), v: Plane::new(width, height, v) }
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> (f64, f64)) -> Self {
        let mut flow = Self::zeros(width, height);
        for y in 0..height {
            for x in 0..width {
                let (u, v) = f(x, y);
                flow.u.set(x, y, u);
                flow.v.set(x, y, v);
            }
        }
        flow
    }

    pub fn width(&self) -> usize {
        self.u.width()
    }

    pub fn height(&self) -> usize {
        self.u.height()
    }

    pub fn dims(&self) -> (usize, usize) {
        self.u.dims()
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> (f64, f64) {
        (self.u.get(x, y), self.v.get(x, y))
    }

    #[inline]
    pub fn is_zero_at(&self, i: usize) -> bool {
        self.u.data()[i] == 0.0 && self.v.data()[i] == 0.0
    }

    pub fn nonzero_count(&self) -> usize {
        (0..self.u.len()).filter(|&i| !self.is_zero_at(i)).count()
    }

    pub fn is_finite(&self) -> bool {
        self.u.data().iter().chain(self.v.data()).all(|v| v.is_finite())
    }
}

pub fn write_flo<W: Write>(flow: &FlowField, mut sink: W) -> Result<()> {
    let (w, h) = flow.dims();
    let mut buf = Vec::with_capacity(12 + 8 * w * h);
    buf.extend_from_slice(&FLO_MAGIC.to_le_bytes());
    buf.extend_from_slice(&(w as i32).to_le_bytes());
    buf.extend_from_slice(&(h as i32).to_le_bytes());
    for (&u, &v) in flow.u.data().iter().zip(flow.v.data()) {
        buf.extend_from_slice(&(u as f32).to_le_bytes());
        buf.extend_from_slice(&(v as f32).to_le_bytes());
    }
    sink.write_all(&buf)?;
    Ok(())
}

pub fn read_flo<R: Read>(mut source: R) -> Result<FlowField> {
    let mut head = [0u8; 12];
    let mut got = 0;
    while got < 12 {
        let n = source.read(&mut head[got..])?;
        if n == 0 {
            return Err(Error::Truncated { offset: got as u64, expected: (12 - got) as u64 });
        }
        got += n;
    }
    let magic = f32::from_le_bytes(head[0..4].try_into().unwrap());
    if magic != FLO_MAGIC {
        return Err(Error::Format { offset: 0, reason: format!("bad .flo magic {magic}") });
    }
    let w = i32::from_le_bytes(head[4..8].try_into().unwrap());
    let h = i32::from_le_bytes(head[8..12].try_into().unwrap());
    if w <= 0 || h <= 0 {
        return Err(Error::Format { offset: 4, reason: format!("bad .flo size {w}x{h}") });
    }
    let (w, h) = (w as usize, h as usize);
    let len = 8 * w as u64 * h as u64;
    let mut body = Vec::new();
    let n = (&mut source).take(len).read_to_end(&mut body)? as u64;
    if n < len {
        return Err(Error::Truncated { offset: 12 + n, expected: len - n });
    }
    let mut flow = FlowField::zeros(w, h);
    for (i, c) in body.chunks_exact(8).enumerate() {
        flow.u.data_mut()[i] = f64::from(f32::from_le_bytes(c[0..4].try_into().unwrap()));
        flow.v.data_mut()[i] = f64::from(f32::from_le_bytes(c[4..8].try_into().unwrap()));
    }
    Ok(flow)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flo_round_trip_and_layout() {
        let flow = FlowField::from_fn(3, 2, |x, y| (x as f64 * 0.5, -(y as f64)));
        let mut buf = Vec::new();
        write_flo(&flow, &mut buf).unwrap();
        assert_eq!(buf.len(), 12 + 8 * 6);
        assert_eq!(&buf[0..4], b"PIEH");
        assert_eq!(read_flo(&buf[..]).unwrap(), flow);
    }

    #[test]
    fn flo_rejects_bad_input() {
        assert!(read_flo(&b"PIEX\x01\0\0\0\x01\0\0\0"[..]).is_err());
        let mut buf = Vec::new();
        write_flo(&FlowField::zeros(2, 2), &mut buf).unwrap();
        buf.truncate(buf.len() - 3);
        assert!(matches!(read_flo(&buf[..]), Err(Error::Truncated { .. })));
    }
}
