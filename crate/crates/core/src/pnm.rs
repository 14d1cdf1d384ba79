//! Minimal binary PGM (P5) and PPM (P6) support, 8-bit only.

use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::plane::{LumaPlane, Plane};

/// Interleaved 8-bit RGB.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RgbImage {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<[u8; 3]>,
}

impl RgbImage {
    pub fn get(&self, x: usize, y: usize) -> [u8; 3] {
        self.pixels[y * self.width + x]
    }
}

pub fn write_pgm<W: Write>(plane: &LumaPlane, mut sink: W) -> Result<()> {
    write!(sink, "P5\n{} {}\n255\n", plane.width(), plane.height())?;
    sink.write_all(plane.data())?;
    Ok(())
}

pub fn write_ppm<W: Write>(image: &RgbImage, mut sink: W) -> Result<()> {
    write!(sink, "P6\n{} {}\n255\n", image.width, image.height)?;
    let flat: Vec<u8> = image.pixels.iter().flatten().copied().collect();
    sink.write_all(&flat)?;
    Ok(())
}

pub fn read_pgm<R: Read>(mut source: R) -> Result<LumaPlane> {
    let mut bytes = Vec::new();
    source.read_to_end(&mut bytes)?;
    let mut pos = 0usize;
    let mut token = |bytes: &[u8]| -> Result<String> {
        loop {
            while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
                pos += 1;
            }
            if pos < bytes.len() && bytes[pos] == b'#' {
                while pos < bytes.len() && bytes[pos] != b'\n' {
                    pos += 1;
                }
                continue;
            }
            break;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(Error::Truncated { offset: pos as u64, expected: 1 });
        }
        Ok(String::from_utf8_lossy(&bytes[start..pos]).into_owned())
    };
    let magic = token(&bytes)?;
    if magic != "P5" {
        return Err(Error::Format { offset: 0, reason: format!("expected P5 PGM, found {magic:?}") });
    }
    let mut number = |name: &str| -> Result<usize> {
        let t = token(&bytes)?;
        t.parse().map_err(|_| Error::Format { offset: 0, reason: format!("bad {name} {t:?}") })
    };
    let (w, h, maxval) = (number("width")?, number("height")?, number("maxval")?);
    if maxval == 0 || maxval > 255 {
        return Err(Error::Format { offset: 0, reason: format!("unsupported maxval {maxval}") });
    }
    // Exactly one whitespace byte separates the header from the raster.
    let start = pos + 1;
    let len = w.checked_mul(h).ok_or_else(|| Error::validation("image too large"))?;
    if bytes.len() < start + len {
        return Err(Error::Truncated { offset: bytes.len() as u64, expected: (start + len - bytes.len()) as u64 });
    }
    Plane::from_vec(w, h, bytes[start..start + len].to_vec())
}
