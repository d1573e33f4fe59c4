//! Image file I/O: binary PGM (P5, 8-bit) and a raw float format.
//!
//! Raw float layout: magic `IRF1`, u32-LE width, u32-LE height, then
//! `width*height` f32-LE values, row-major.

use std::path::Path;

use crate::data::IrisImage;
use crate::error::{Error, Result};

const RAW_MAGIC: &[u8; 4] = b"IRF1";

fn format_err(offset: usize, what: impl Into<String>) -> Error {
    Error::Format {
        offset,
        what: what.into(),
    }
}

/// Load an image, dispatching on the file magic (`P5` or `IRF1`).
pub fn load_image(path: &Path) -> Result<IrisImage> {
    let bytes = std::fs::read(path)?;
    if bytes.starts_with(b"P5") {
        parse_pgm(&bytes)
    } else if bytes.starts_with(RAW_MAGIC) {
        parse_raw(&bytes)
    } else {
        Err(format_err(
            0,
            format!(
                "unrecognized magic {:?} in {}",
                bytes.get(..2.min(bytes.len())).unwrap_or(&[]),
                path.display()
            ),
        ))
    }
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    /// Skip whitespace and `#` comment lines.
    fn skip_separators(&mut self) {
        while self.pos < self.bytes.len() {
            let b = self.bytes[self.pos];
            if b.is_ascii_whitespace() {
                self.pos += 1;
            } else if b == b'#' {
                while self.pos < self.bytes.len() && self.bytes[self.pos] != b'\n' {
                    self.pos += 1;
                }
            } else {
                break;
            }
        }
    }

    fn read_number(&mut self) -> Result<usize> {
        self.skip_separators();
        let start = self.pos;
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if self.pos == start {
            return Err(format_err(start, "expected an ASCII integer"));
        }
        let text = std::str::from_utf8(&self.bytes[start..self.pos])
            .map_err(|_| format_err(start, "non-UTF8 header"))?;
        text.parse()
            .map_err(|_| format_err(start, format!("bad integer {text:?}")))
    }
}

fn parse_pgm(bytes: &[u8]) -> Result<IrisImage> {
    let mut cur = Cursor { bytes, pos: 2 };
    let width = cur.read_number()?;
    let height = cur.read_number()?;
    let maxval = cur.read_number()?;
    if maxval != 255 {
        return Err(format_err(
            cur.pos,
            format!("unsupported maxval {maxval} (only 8-bit, maxval 255)"),
        ));
    }
    // exactly one whitespace byte separates the header from the raster
    if cur.pos >= bytes.len() || !bytes[cur.pos].is_ascii_whitespace() {
        return Err(format_err(cur.pos, "missing raster separator"));
    }
    cur.pos += 1;
    let need = width
        .checked_mul(height)
        .ok_or_else(|| format_err(cur.pos, "image dimensions overflow"))?;
    let raster = &bytes[cur.pos.min(bytes.len())..];
    if raster.len() < need {
        return Err(format_err(
            cur.pos + raster.len(),
            format!("truncated raster: need {need} bytes, found {}", raster.len()),
        ));
    }
    let pixels = raster[..need].iter().map(|&b| b as f32 / 255.0).collect();
    IrisImage::new(width, height, pixels)
}

fn parse_raw(bytes: &[u8]) -> Result<IrisImage> {
    if bytes.len() < 12 {
        return Err(format_err(bytes.len(), "truncated raw float header"));
    }
    let width = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
    let height = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    let need = width * height * 4;
    let payload = &bytes[12..];
    if payload.len() < need {
        return Err(format_err(
            12 + payload.len(),
            format!("truncated raw floats: need {need} bytes, found {}", payload.len()),
        ));
    }
    let pixels = payload[..need]
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
        .collect();
    IrisImage::new(width, height, pixels)
}

/// Write as binary PGM, quantizing to 8 bits (round to nearest).
pub fn save_pgm(path: &Path, img: &IrisImage) -> Result<()> {
    let mut out = format!("P5\n{} {}\n255\n", img.width, img.height).into_bytes();
    out.extend(
        img.pixels
            .iter()
            .map(|&v| (v.clamp(0.0, 1.0) * 255.0).round() as u8),
    );
    std::fs::write(path, out)?;
    Ok(())
}

/// Write in the lossless raw float format.
pub fn save_raw(path: &Path, img: &IrisImage) -> Result<()> {
    let mut out = Vec::with_capacity(12 + img.pixels.len() * 4);
    out.extend_from_slice(RAW_MAGIC);
    out.extend_from_slice(&(img.width as u32).to_le_bytes());
    out.extend_from_slice(&(img.height as u32).to_le_bytes());
    for v in &img.pixels {
        out.extend_from_slice(&v.to_le_bytes());
    }
    std::fs::write(path, out)?;
    Ok(())
}
