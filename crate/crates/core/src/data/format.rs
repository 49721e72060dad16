//! Split container: `EDSD` magic, u16 version, u32 height, width, classes and
//! sample count (little-endian), then per sample interleaved 8-bit RGB,
//! 8-bit labels and an LSB-first packed OOD bitmask.

use std::fs;
use std::path::Path;

use super::{Sample, Split};
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"EDSD";
pub const FORMAT_VERSION: u16 = 1;
const HEADER_LEN: usize = 4 + 2 + 4 * 4;

pub fn write_split(path: &Path, split: &Split) -> Result<()> {
    fs::write(path, encode(split))?;
    Ok(())
}

pub fn read_split(path: &Path) -> Result<Split> {
    decode(&fs::read(path)?)
}

pub(crate) fn encode(split: &Split) -> Vec<u8> {
    let hw = split.height * split.width;
    let per_sample = 3 * hw + hw + hw.div_ceil(8);
    let mut out = Vec::with_capacity(HEADER_LEN + per_sample * split.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    for v in [split.height, split.width, split.num_classes, split.len()] {
        out.extend_from_slice(&(v as u32).to_le_bytes());
    }
    for s in &split.samples {
        for px in 0..hw {
            for c in 0..3 {
                out.push(s.image[c * hw + px]);
            }
        }
        out.extend_from_slice(&s.labels);
        let mut packed = vec![0u8; hw.div_ceil(8)];
        for (i, &m) in s.ood_mask.iter().enumerate() {
            if m {
                packed[i / 8] |= 1 << (i % 8);
            }
        }
        out.extend_from_slice(&packed);
    }
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        if self.bytes.len() - self.pos < n {
            return Err(Error::Format {
                offset: self.bytes.len() as u64,
                reason: format!("truncated while reading {what} (needed {n} bytes at offset {})", self.pos),
            });
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self, what: &str) -> Result<usize> {
        let b = self.take(4, what)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]) as usize)
    }
}

pub(crate) fn decode(bytes: &[u8]) -> Result<Split> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(4, "magic")? != MAGIC {
        return Err(Error::Format {
            offset: 0,
            reason: "bad magic, expected EDSD".into(),
        });
    }
    let v = r.take(2, "version")?;
    let version = u16::from_le_bytes([v[0], v[1]]);
    if version != FORMAT_VERSION {
        return Err(Error::Version {
            found: version,
            supported: FORMAT_VERSION,
        });
    }
    let height = r.u32("height")?;
    let width = r.u32("width")?;
    let num_classes = r.u32("class count")?;
    let count = r.u32("sample count")?;
    if num_classes < 2 || num_classes > 256 {
        return Err(Error::Format {
            offset: 14,
            reason: format!("class count {num_classes} outside 2..=256"),
        });
    }
    let hw = height * width;
    let per_sample = 4 * hw + hw.div_ceil(8);
    if per_sample.checked_mul(count).is_none_or(|need| need > bytes.len()) {
        return Err(Error::Format {
            offset: bytes.len() as u64,
            reason: format!("truncated payload: {count} samples of {per_sample} bytes do not fit"),
        });
    }

    let mut samples = Vec::with_capacity(count);
    for i in 0..count {
        let rgb = r.take(3 * hw, &format!("image of sample {i}"))?;
        let mut image = vec![0u8; 3 * hw];
        for px in 0..hw {
            for c in 0..3 {
                image[c * hw + px] = rgb[3 * px + c];
            }
        }
        let label_start = r.pos;
        let labels = r.take(hw, &format!("labels of sample {i}"))?.to_vec();
        if let Some(p) = labels.iter().position(|&l| l as usize >= num_classes) {
            return Err(Error::Format {
                offset: (label_start + p) as u64,
                reason: format!("label {} out of range for {num_classes} classes", labels[p]),
            });
        }
        let packed = r.take(hw.div_ceil(8), &format!("mask of sample {i}"))?;
        let ood_mask = (0..hw).map(|k| packed[k / 8] >> (k % 8) & 1 == 1).collect();
        samples.push(Sample {
            height,
            width,
            image,
            labels,
            ood_mask,
        });
    }
    if r.pos != bytes.len() {
        return Err(Error::Format {
            offset: r.pos as u64,
            reason: format!("{} trailing bytes", bytes.len() - r.pos),
        });
    }
    Ok(Split {
        num_classes,
        height,
        width,
        samples,
    })
}
