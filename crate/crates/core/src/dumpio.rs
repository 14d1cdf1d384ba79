//! The MVD1 container: a little-endian dump of I-frame luma, P-frame motion
//! grids and residuals.
//!
//! ```text
//! magic "MVD1" | version u32 | width u32 | height u32 | frame_count u32 | gop_size u32
//! record*: type u8 (0 = I, 1 = P)
//!   I: width*height luma u8, row-major
//!   P: blocks_x u16 | blocks_y u16 | (dx i16, dy i16)* | width*height residual i16
//! ```
//!
//! The reader rejects anything that does not satisfy the type invariants,
//! including trailing bytes after the last declared record.

use std::io::{self, Read, Write};

use crate::error::{Error, Result};
use crate::gop::{GopStream, PFrame};
use crate::mv::{displacement_bound, grid_dims, MotionVector, MotionVectorField};
use crate::plane::{LumaPlane, Plane, ResidualPlane};

pub const MAGIC: [u8; 4] = *b"MVD1";
pub const VERSION: u32 = 1;
pub const HEADER_LEN: usize = 24;
pub const DEFAULT_GOP_SIZE: u32 = 12;

const TYPE_I: u8 = 0;
const TYPE_P: u8 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct DumpHeader {
    pub version: u32,
    pub width: u32,
    pub height: u32,
    pub frame_count: u32,
    pub gop_size: u32,
}

impl DumpHeader {
    pub fn new(width: u32, height: u32, frame_count: u32, gop_size: u32) -> Self {
        DumpHeader { version: VERSION, width, height, frame_count, gop_size }
    }

    pub fn validate(&self) -> Result<()> {
        if self.version != VERSION {
            return Err(Error::validation(format!("unsupported version {}", self.version)));
        }
        if self.width == 0 || self.height == 0 {
            return Err(Error::validation("width and height must be positive"));
        }
        if self.frame_count == 0 {
            return Err(Error::validation("frame_count must be at least 1"));
        }
        if self.gop_size == 0 {
            return Err(Error::validation("gop_size must be at least 1"));
        }
        Ok(())
    }

    /// Frame type required at `index` by the GOP structure.
    pub fn expected_type(&self, index: usize) -> FrameType {
        if index % self.gop_size as usize == 0 {
            FrameType::I
        } else {
            FrameType::P
        }
    }

    fn dims(&self) -> (usize, usize) {
        (self.width as usize, self.height as usize)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FrameType {
    I,
    P,
}

/// One frame of a dump. The payload is determined by the variant.
#[derive(Clone, Debug, PartialEq)]
pub enum FrameRecord {
    I { luma: LumaPlane },
    P { mv: MotionVectorField, residual: ResidualPlane },
}

impl FrameRecord {
    pub fn frame_type(&self) -> FrameType {
        match self {
            FrameRecord::I { .. } => FrameType::I,
            FrameRecord::P { .. } => FrameType::P,
        }
    }

    fn check(&self, index: usize, header: &DumpHeader) -> Result<()> {
        let (w, h) = header.dims();
        let expected = header.expected_type(index);
        if self.frame_type() != expected {
            return Err(Error::frame(index, format!("expected {expected:?}-frame by GOP structure")));
        }
        match self {
            FrameRecord::I { luma } => {
                if luma.dims() != (w, h) {
                    return Err(Error::frame(index, "luma plane size differs from header"));
                }
            }
            FrameRecord::P { mv, residual } => {
                if !mv.fits_frame(w, h) {
                    let (bx, by) = grid_dims(w, h);
                    return Err(Error::frame(
                        index,
                        format!("motion grid {}x{} should be {bx}x{by}", mv.blocks_x(), mv.blocks_y()),
                    ));
                }
                if residual.dims() != (w, h) {
                    return Err(Error::frame(index, "residual plane size differs from header"));
                }
                let bound = displacement_bound(w, h);
                if mv.max_component() > bound {
                    return Err(Error::frame(index, format!("motion vector exceeds bound of {bound} quarter-pel")));
                }
            }
        }
        Ok(())
    }
}

/// Validate a complete stream against its header.
pub fn validate_stream(header: &DumpHeader, frames: &[FrameRecord]) -> Result<()> {
    header.validate().map_err(|e| Error::Structure(e.to_string()))?;
    if frames.is_empty() {
        return Err(Error::Structure("stream has no frames".into()));
    }
    if frames.len() != header.frame_count as usize {
        return Err(Error::Structure(format!(
            "header declares {} frames but {} were supplied",
            header.frame_count,
            frames.len()
        )));
    }
    for (i, f) in frames.iter().enumerate() {
        f.check(i, header)?;
    }
    Ok(())
}

pub fn write_dump<W: Write>(header: &DumpHeader, frames: &[FrameRecord], mut sink: W) -> Result<u64> {
    validate_stream(header, frames)?;
    let mut buf = Vec::with_capacity(encoded_len(header, frames));
    buf.extend_from_slice(&MAGIC);
    for v in [header.version, header.width, header.height, header.frame_count, header.gop_size] {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    for f in frames {
        match f {
            FrameRecord::I { luma } => {
                buf.push(TYPE_I);
                buf.extend_from_slice(luma.data());
            }
            FrameRecord::P { mv, residual } => {
                buf.push(TYPE_P);
                buf.extend_from_slice(&(mv.blocks_x() as u16).to_le_bytes());
                buf.extend_from_slice(&(mv.blocks_y() as u16).to_le_bytes());
                for v in mv.vectors() {
                    buf.extend_from_slice(&v.dx.to_le_bytes());
                    buf.extend_from_slice(&v.dy.to_le_bytes());
                }
                for r in residual.data() {
                    buf.extend_from_slice(&r.to_le_bytes());
                }
            }
        }
    }
    sink.write_all(&buf)?;
    sink.flush()?;
    Ok(buf.len() as u64)
}

pub fn write_dump_to_vec(header: &DumpHeader, frames: &[FrameRecord]) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    write_dump(header, frames, &mut out)?;
    Ok(out)
}

fn encoded_len(header: &DumpHeader, frames: &[FrameRecord]) -> usize {
    let pixels = header.width as usize * header.height as usize;
    HEADER_LEN
        + frames
            .iter()
            .map(|f| match f {
                FrameRecord::I { .. } => 1 + pixels,
                FrameRecord::P { mv, .. } => 1 + 4 + 4 * mv.vectors().len() + 2 * pixels,
            })
            .sum::<usize>()
}

/// Byte reader that tracks its offset and turns short reads into truncation errors.
struct Cursor<R> {
    inner: R,
    offset: u64,
}

impl<R: Read> Cursor<R> {
    fn exact<const N: usize>(&mut self) -> Result<[u8; N]> {
        let mut buf = [0u8; N];
        let got = read_full(&mut self.inner, &mut buf)?;
        if got < N {
            return Err(Error::Truncated { offset: self.offset + got as u64, expected: (N - got) as u64 });
        }
        self.offset += N as u64;
        Ok(buf)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.exact::<1>()?[0])
    }

    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.exact()?))
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.exact()?))
    }

    /// Read `len` bytes. The buffer grows with the data actually present, so a
    /// lying header cannot force a huge allocation.
    fn bytes(&mut self, len: u64) -> Result<Vec<u8>> {
        let mut buf = Vec::new();
        let got = (&mut self.inner).take(len).read_to_end(&mut buf)? as u64;
        if got < len {
            return Err(Error::Truncated { offset: self.offset + got, expected: len - got });
        }
        self.offset += len;
        Ok(buf)
    }

    fn at_eof(&mut self) -> Result<bool> {
        let mut probe = [0u8; 1];
        Ok(read_full(&mut self.inner, &mut probe)? == 0)
    }
}

fn read_full<R: Read>(r: &mut R, buf: &mut [u8]) -> io::Result<usize> {
    let mut filled = 0;
    while filled < buf.len() {
        match r.read(&mut buf[filled..]) {
            Ok(0) => break,
            Ok(n) => filled += n,
            Err(e) if e.kind() == io::ErrorKind::Interrupted => {}
            Err(e) => return Err(e),
        }
    }
    Ok(filled)
}

pub fn read_dump<R: Read>(source: R) -> Result<(DumpHeader, Vec<FrameRecord>)> {
    let mut cur = Cursor { inner: source, offset: 0 };
    let magic = cur.exact::<4>()?;
    if magic != MAGIC {
        return Err(Error::Format { offset: 0, reason: format!("bad magic {:?}", String::from_utf8_lossy(&magic)) });
    }
    let version = cur.u32()?;
    if version != VERSION {
        return Err(Error::Format { offset: 4, reason: format!("unsupported version {version}") });
    }
    let header = DumpHeader {
        version,
        width: cur.u32()?,
        height: cur.u32()?,
        frame_count: cur.u32()?,
        gop_size: cur.u32()?,
    };
    header.validate()?;

    let (w, h) = header.dims();
    let pixels = (w as u64)
        .checked_mul(h as u64)
        .ok_or_else(|| Error::validation("frame dimensions overflow"))?;
    let (gx, gy) = grid_dims(w, h);
    let bound = displacement_bound(w, h);

    // Cap the initial reservation; the vector grows if the frames are really there.
    let mut frames = Vec::with_capacity((header.frame_count as usize).min(1024));
    for index in 0..header.frame_count as usize {
        let tag_offset = cur.offset;
        let frame_type = match cur.u8()? {
            TYPE_I => FrameType::I,
            TYPE_P => FrameType::P,
            other => {
                return Err(Error::Format { offset: tag_offset, reason: format!("unknown frame type {other}") });
            }
        };
        let expected = header.expected_type(index);
        if frame_type != expected {
            return Err(Error::frame(index, format!("expected {expected:?}-frame by GOP structure, found {frame_type:?}")));
        }
        let record = match frame_type {
            FrameType::I => {
                let luma = cur.bytes(pixels)?;
                FrameRecord::I { luma: Plane::from_vec(w, h, luma)? }
            }
            FrameType::P => {
                let bx = cur.u16()? as usize;
                let by = cur.u16()? as usize;
                if (bx, by) != (gx, gy) {
                    return Err(Error::frame(index, format!("motion grid {bx}x{by} should be {gx}x{gy}")));
                }
                let raw = cur.bytes(4 * (bx * by) as u64)?;
                let vectors: Vec<MotionVector> = raw
                    .chunks_exact(4)
                    .map(|c| MotionVector::new(i16::from_le_bytes([c[0], c[1]]), i16::from_le_bytes([c[2], c[3]])))
                    .collect();
                let mv = MotionVectorField::from_vec(bx, by, vectors).expect("grid length checked");
                if mv.max_component() > bound {
                    return Err(Error::frame(index, format!("motion vector exceeds bound of {bound} quarter-pel")));
                }
                let raw = cur.bytes(2 * pixels)?;
                let residual: Vec<i16> = raw.chunks_exact(2).map(|c| i16::from_le_bytes([c[0], c[1]])).collect();
                FrameRecord::P { mv, residual: Plane::from_vec(w, h, residual)? }
            }
        };
        frames.push(record);
    }
    if !cur.at_eof()? {
        return Err(Error::Format { offset: cur.offset, reason: "trailing bytes after last frame".into() });
    }
    Ok((header, frames))
}

pub fn read_dump_bytes(bytes: &[u8]) -> Result<(DumpHeader, Vec<FrameRecord>)> {
    read_dump(bytes)
}

/// Group records into GOPs at each I-frame.
pub fn split_gops(frames: &[FrameRecord]) -> Result<Vec<GopStream>> {
    let mut gops: Vec<GopStream> = Vec::new();
    for (index, f) in frames.iter().enumerate() {
        match f {
            FrameRecord::I { luma } => gops.push(GopStream { iframe: luma.clone(), pframes: Vec::new() }),
            FrameRecord::P { mv, residual } => match gops.last_mut() {
                Some(gop) => gop.pframes.push(PFrame { mv: mv.clone(), residual: residual.clone() }),
                None => return Err(Error::frame(index, "stream must begin with an I-frame")),
            },
        }
    }
    Ok(gops)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn iframe(w: usize, h: usize) -> FrameRecord {
        FrameRecord::I { luma: Plane::new(w, h, 0) }
    }

    fn pframe(w: usize, h: usize) -> FrameRecord {
        FrameRecord::P { mv: MotionVectorField::for_frame(w, h), residual: Plane::new(w, h, 0) }
    }

    #[test]
    fn single_iframe_layout_size() {
        let header = DumpHeader::new(16, 16, 1, 1);
        let bytes = write_dump_to_vec(&header, &[iframe(16, 16)]).unwrap();
        assert_eq!(bytes.len(), 281);
        assert_eq!(&bytes[..4], b"MVD1");
    }

    #[test]
    fn empty_frame_list_is_structural() {
        let header = DumpHeader::new(16, 16, 0, 1);
        assert!(matches!(write_dump_to_vec(&header, &[]), Err(Error::Structure(_))));
    }

    #[test]
    fn dimension_mismatch_is_rejected_on_write() {
        let header = DumpHeader::new(16, 16, 1, 1);
        assert!(write_dump_to_vec(&header, &[iframe(32, 16)]).is_err());
    }

    #[test]
    fn bad_magic_is_format_error() {
        let header = DumpHeader::new(16, 16, 1, 1);
        let mut bytes = write_dump_to_vec(&header, &[iframe(16, 16)]).unwrap();
        bytes[3] = b'0';
        assert!(matches!(read_dump_bytes(&bytes), Err(Error::Format { offset: 0, .. })));
    }

    #[test]
    fn missing_frame_is_truncation() {
        let header = DumpHeader::new(16, 16, 1, 2);
        let mut bytes = write_dump_to_vec(&header, &[iframe(16, 16)]).unwrap();
        bytes[16..20].copy_from_slice(&2u32.to_le_bytes());
        match read_dump_bytes(&bytes) {
            Err(Error::Truncated { offset, .. }) => assert_eq!(offset, 281),
            other => panic!("expected truncation, got {other:?}"),
        }
    }

    #[test]
    fn trailing_bytes_are_rejected() {
        let header = DumpHeader::new(16, 16, 1, 1);
        let mut bytes = write_dump_to_vec(&header, &[iframe(16, 16)]).unwrap();
        bytes.push(0);
        assert!(matches!(read_dump_bytes(&bytes), Err(Error::Format { offset: 281, .. })));
    }

    #[test]
    fn wrong_gop_structure_names_frame() {
        let header = DumpHeader::new(16, 16, 2, 12);
        let frames = [iframe(16, 16), iframe(16, 16)];
        match write_dump_to_vec(&header, &frames) {
            Err(Error::Validation { frame: Some(1), .. }) => {}
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn split_gops_at_iframes() {
        let (w, h) = (16, 16);
        let frames = vec![iframe(w, h), pframe(w, h), pframe(w, h), iframe(w, h), pframe(w, h)];
        let gops = split_gops(&frames).unwrap();
        assert_eq!(gops.iter().map(GopStream::len).collect::<Vec<_>>(), vec![3, 2]);
        let rejoined: Vec<FrameRecord> = gops.iter().flat_map(GopStream::to_records).collect();
        assert_eq!(rejoined, frames);
    }

    #[test]
    fn split_gops_requires_leading_iframe() {
        assert!(matches!(split_gops(&[pframe(16, 16)]), Err(Error::Validation { frame: Some(0), .. })));
    }

    #[test]
    fn gop_size_twelve_gives_eleven_pframes() {
        let header = DumpHeader::new(16, 16, 24, DEFAULT_GOP_SIZE);
        let frames: Vec<FrameRecord> = (0..24)
            .map(|i| if header.expected_type(i) == FrameType::I { iframe(16, 16) } else { pframe(16, 16) })
            .collect();
        validate_stream(&header, &frames).unwrap();
        let gops = split_gops(&frames).unwrap();
        assert_eq!(gops.len(), 2);
        assert!(gops.iter().all(|g| g.pframes.len() == 11));
    }
}
