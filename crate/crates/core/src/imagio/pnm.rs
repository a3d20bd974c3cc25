//! Binary PGM (P5) / PPM (P6) with maxval 255.

use std::fs;
use std::path::Path;

use super::{Image, ImagioError, Mask};

/// Quantizes a `[0,1]` sample to a byte, rounding halves up.
#[inline]
pub fn quantize(v: f64) -> u8 {
    (v * 255.0 + 0.5).floor().clamp(0.0, 255.0) as u8
}

pub fn read_pnm(path: &Path) -> Result<Image, ImagioError> {
    let bytes = fs::read(path).map_err(|e| ImagioError::io(path, e))?;
    decode_pnm(&bytes).map_err(|e| e.with_path(path))
}

pub fn write_pnm(image: &Image, path: &Path) -> Result<(), ImagioError> {
    fs::write(path, encode_pnm(image)).map_err(|e| ImagioError::io(path, e))
}

pub fn encode_pnm(image: &Image) -> Vec<u8> {
    let magic = if image.channels() == 3 { "P6" } else { "P5" };
    let mut out = format!("{magic}\n{} {}\n255\n", image.width(), image.height()).into_bytes();
    out.extend(image.samples().iter().map(|&v| quantize(v)));
    out
}

struct HeaderCursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl HeaderCursor<'_> {
    fn skip_space_and_comments(&mut self) {
        while self.pos < self.bytes.len() {
            match self.bytes[self.pos] {
                b'#' => {
                    while self.pos < self.bytes.len() && self.bytes[self.pos] != b'\n' {
                        self.pos += 1;
                    }
                }
                b if b.is_ascii_whitespace() => self.pos += 1,
                _ => break,
            }
        }
    }

    /// Returns (offset of first digit, value).
    fn number(&mut self, what: &str) -> Result<(usize, usize), ImagioError> {
        self.skip_space_and_comments();
        let start = self.pos;
        let mut value: usize = 0;
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_digit() {
            value = value
                .checked_mul(10)
                .and_then(|v| v.checked_add((self.bytes[self.pos] - b'0') as usize))
                .ok_or_else(|| ImagioError::malformed(start, format!("{what} overflows")))?;
            self.pos += 1;
        }
        if self.pos == start {
            return Err(ImagioError::malformed(start, format!("expected {what}")));
        }
        Ok((start, value))
    }
}

/// Parses a P5/P6 byte buffer. Never yields an image that violates [`Image`]'s invariants.
pub fn decode_pnm(bytes: &[u8]) -> Result<Image, ImagioError> {
    let channels = match bytes.get(..2) {
        Some(b"P5") => 1,
        Some(b"P6") => 3,
        _ => return Err(ImagioError::malformed(0, "expected magic P5 or P6")),
    };
    let mut cur = HeaderCursor { bytes, pos: 2 };
    if cur.pos < bytes.len() && !bytes[cur.pos].is_ascii_whitespace() && bytes[cur.pos] != b'#' {
        return Err(ImagioError::malformed(2, "magic number must be followed by whitespace"));
    }
    let (width_at, width) = cur.number("width")?;
    let (height_at, height) = cur.number("height")?;
    if width == 0 {
        return Err(ImagioError::malformed(width_at, "zero width"));
    }
    if height == 0 {
        return Err(ImagioError::malformed(height_at, "zero height"));
    }
    let (maxval_at, maxval) = cur.number("maxval")?;
    if maxval != 255 {
        return Err(ImagioError::UnsupportedMaxval {
            offset: maxval_at,
            maxval,
        });
    }
    match bytes.get(cur.pos) {
        Some(b) if b.is_ascii_whitespace() => cur.pos += 1,
        _ => {
            return Err(ImagioError::malformed(
                cur.pos,
                "expected single whitespace before raster",
            ))
        }
    }
    let expected = width
        .checked_mul(height)
        .and_then(|n| n.checked_mul(channels))
        .ok_or_else(|| ImagioError::malformed(width_at, "image dimensions overflow"))?;
    let payload = &bytes[cur.pos..];
    if payload.len() < expected {
        return Err(ImagioError::Truncated {
            offset: bytes.len(),
            expected,
            found: payload.len(),
        });
    }
    let samples = payload[..expected].iter().map(|&b| b as f64 / 255.0).collect();
    Image::new(width, height, channels, samples)
}

pub fn read_mask(path: &Path) -> Result<Mask, ImagioError> {
    let image = read_pnm(path)?;
    Mask::from_image(&image).map_err(|e| e.with_path(path))
}

pub fn write_mask(mask: &Mask, path: &Path) -> Result<(), ImagioError> {
    write_pnm(&mask.to_image(), path)
}
