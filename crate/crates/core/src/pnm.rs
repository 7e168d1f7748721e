//! Binary netpbm codec: 8-bit P5 (graymap) and P6 (pixmap) with maxval 255.
//!
//! P6 input is reduced to gray with the Rec. 601 luma weights. Output is
//! always P5 with the header `P5\n<w> <h>\n255\n`.

use crate::{Error, GrayImage, Result};

const LUMA: [f64; 3] = [0.299, 0.587, 0.114];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Kind {
    Gray,
    Rgb,
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn skip_separators(&mut self) {
        while let Some(&b) = self.bytes.get(self.pos) {
            if b.is_ascii_whitespace() {
                self.pos += 1;
            } else if b == b'#' {
                while let Some(&c) = self.bytes.get(self.pos) {
                    self.pos += 1;
                    if c == b'\n' {
                        break;
                    }
                }
            } else {
                break;
            }
        }
    }

    fn number(&mut self, field: &'static str) -> Result<usize> {
        self.skip_separators();
        let start = self.pos;
        while self.bytes.get(self.pos).is_some_and(u8::is_ascii_digit) {
            self.pos += 1;
        }
        if start == self.pos {
            let message = match self.bytes.get(self.pos) {
                None => "header ended before this field".to_string(),
                Some(b) => format!("expected a decimal number, found byte 0x{b:02x}"),
            };
            return Err(Error::Parse { field, message });
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::Parse {
                field,
                message: "number out of range".to_string(),
            })
    }
}

/// Decodes a binary P5 or P6 image into `[0, 1]` intensities (`v / 255`).
pub fn load_image(bytes: &[u8]) -> Result<GrayImage> {
    let kind = match bytes.get(..2) {
        Some(b"P5") => Kind::Gray,
        Some(b"P6") => Kind::Rgb,
        other => {
            return Err(Error::Parse {
                field: "magic",
                message: format!(
                    "expected P5 or P6, found {:?}",
                    other.map(String::from_utf8_lossy).unwrap_or_default()
                ),
            })
        }
    };
    let mut cur = Cursor { bytes, pos: 2 };
    let width = cur.number("width")?;
    let height = cur.number("height")?;
    let maxval = cur.number("maxval")?;
    if width == 0 || height == 0 {
        let field = if width == 0 { "width" } else { "height" };
        return Err(Error::Parse {
            field,
            message: "dimension must be positive".to_string(),
        });
    }
    if maxval != 255 {
        return Err(Error::Parse {
            field: "maxval",
            message: format!("only 8-bit maxval 255 is supported, found {maxval}"),
        });
    }
    match bytes.get(cur.pos) {
        Some(b) if b.is_ascii_whitespace() => cur.pos += 1,
        _ => {
            return Err(Error::Parse {
                field: "maxval",
                message: "maxval must be followed by a single whitespace byte".to_string(),
            })
        }
    }

    let channels = if kind == Kind::Gray { 1 } else { 3 };
    let expected = width
        .checked_mul(height)
        .and_then(|n| n.checked_mul(channels))
        .ok_or_else(|| Error::Parse {
            field: "width",
            message: "image too large".to_string(),
        })?;
    let payload = &bytes[cur.pos..];
    if payload.len() < expected {
        return Err(Error::Parse {
            field: "payload",
            message: format!("truncated: expected {expected} bytes, found {}", payload.len()),
        });
    }
    if payload.len() > expected {
        return Err(Error::Parse {
            field: "payload",
            message: format!(
                "{} unexpected trailing bytes after {expected}-byte raster",
                payload.len() - expected
            ),
        });
    }

    let pixels = match kind {
        Kind::Gray => payload.iter().map(|&v| f64::from(v) / 255.0).collect(),
        Kind::Rgb => payload
            .chunks_exact(3)
            .map(|rgb| {
                let y = LUMA[0] * f64::from(rgb[0])
                    + LUMA[1] * f64::from(rgb[1])
                    + LUMA[2] * f64::from(rgb[2]);
                y / 255.0
            })
            .collect(),
    };
    GrayImage::from_clamped(width, height, pixels)
}

/// Quantizes a pixel to 8 bits by rounding `v * 255`.
#[inline]
pub fn quantize(v: f64) -> u8 {
    (v * 255.0).round().clamp(0.0, 255.0) as u8
}

/// Encodes as binary P5 with exactly one newline after the maxval.
pub fn write_pgm(img: &GrayImage) -> Vec<u8> {
    let header = format!("P5\n{} {}\n255\n", img.width(), img.height());
    let mut out = Vec::with_capacity(header.len() + img.pixels().len());
    out.extend_from_slice(header.as_bytes());
    out.extend(img.pixels().iter().map(|&v| quantize(v)));
    out
}
