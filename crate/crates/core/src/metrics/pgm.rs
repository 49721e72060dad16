//! 16-bit binary PGM (`P5`, maxval 65535, big-endian samples).

use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};

pub const PGM_MAXVAL: u16 = u16::MAX;

/// Maps values in [0, 1] linearly to 0..=65535 (clamping outside).
pub fn quantize_unit(v: f64) -> u16 {
    (v.clamp(0.0, 1.0) * PGM_MAXVAL as f64).round() as u16
}

pub fn encode_pgm16(width: usize, height: usize, pixels: &[u16]) -> Result<Vec<u8>> {
    if pixels.len() != width * height || pixels.is_empty() {
        return Err(Error::ShapeMismatch {
            expected: vec![height, width],
            found: vec![pixels.len()],
        });
    }
    let mut out = format!("P5\n{width} {height}\n{PGM_MAXVAL}\n").into_bytes();
    out.reserve(2 * pixels.len());
    for p in pixels {
        out.extend_from_slice(&p.to_be_bytes());
    }
    Ok(out)
}

pub fn write_pgm16(path: &Path, width: usize, height: usize, pixels: &[u16]) -> Result<()> {
    let bytes = encode_pgm16(width, height, pixels)?;
    let mut f = std::fs::File::create(path)?;
    f.write_all(&bytes)?;
    Ok(())
}

/// Returns `(width, height, pixels)`. Accepts only the 16-bit variant.
pub fn decode_pgm16(bytes: &[u8]) -> Result<(usize, usize, Vec<u16>)> {
    let mut pos = 0usize;
    let mut token = |what: &str| -> Result<String> {
        loop {
            match bytes.get(pos) {
                Some(b'#') => {
                    while bytes.get(pos).is_some_and(|&b| b != b'\n') {
                        pos += 1;
                    }
                }
                Some(b) if b.is_ascii_whitespace() => pos += 1,
                _ => break,
            }
        }
        let start = pos;
        while bytes.get(pos).is_some_and(|b| !b.is_ascii_whitespace()) {
            pos += 1;
        }
        if start == pos {
            return Err(Error::Format {
                offset: start as u64,
                reason: format!("missing {what}"),
            });
        }
        Ok(String::from_utf8_lossy(&bytes[start..pos]).into_owned())
    };
    let bad = |offset: usize, reason: String| Error::Format {
        offset: offset as u64,
        reason,
    };
    let magic = token("magic")?;
    if magic != "P5" {
        return Err(bad(0, format!("expected P5, found {magic:?}")));
    }
    let num = |s: String, what: &str| s.parse::<usize>().map_err(|_| bad(0, format!("bad {what} {s:?}")));
    let width = num(token("width")?, "width")?;
    let height = num(token("height")?, "height")?;
    let maxval = num(token("maxval")?, "maxval")?;
    if maxval != PGM_MAXVAL as usize {
        return Err(bad(0, format!("expected maxval 65535, found {maxval}")));
    }
    // exactly one whitespace byte separates the header from the raster
    let start = pos + 1;
    let need = 2 * width * height;
    if bytes.len() != start + need {
        return Err(bad(start, format!("raster holds {} bytes, expected {need}", bytes.len().saturating_sub(start))));
    }
    let pixels = bytes[start..]
        .chunks_exact(2)
        .map(|c| u16::from_be_bytes([c[0], c[1]]))
        .collect();
    Ok((width, height, pixels))
}

pub fn read_pgm16(path: &Path) -> Result<(usize, usize, Vec<u16>)> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut bytes)?;
    decode_pgm16(&bytes)
}
