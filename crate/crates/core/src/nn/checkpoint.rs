//! Checkpoint file: `EDLC`, u16 format version, the five [`SegNetConfig`]
//! fields as u32, then every parameter tensor in declaration order as a u32
//! rank, u32 dimensions and 32-bit floats. All integers little-endian.

use std::fs;
use std::path::Path;

use super::segnet::{SegNet, SegNetConfig};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"EDLC";
pub const CHECKPOINT_VERSION: u16 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct ParamBlob {
    pub shape: Vec<usize>,
    pub values: Vec<f32>,
}

/// Network parameters at storage precision.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub config: SegNetConfig,
    pub params: Vec<ParamBlob>,
}

impl Checkpoint {
    /// Rounds the network's parameters to 32-bit.
    pub fn from_net(net: &SegNet) -> Self {
        Self {
            config: *net.config(),
            params: net
                .params()
                .iter()
                .map(|t| ParamBlob {
                    shape: t.shape().to_vec(),
                    values: t.data().iter().map(|&v| v as f32).collect(),
                })
                .collect(),
        }
    }

    pub fn zeros(config: SegNetConfig) -> Result<Self> {
        Ok(Self::from_net(&SegNet::zeros(config)?))
    }

    pub fn to_net(&self) -> Result<SegNet> {
        let params = self
            .params
            .iter()
            .map(|b| Tensor::new(b.shape.clone(), b.values.iter().map(|&v| v as f64).collect()))
            .collect::<Result<Vec<_>>>()?;
        SegNet::from_params(self.config, params)
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(CHECKPOINT_MAGIC);
        out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
        let c = &self.config;
        for v in [c.in_channels, c.hidden_channels, c.depth, c.num_classes, c.kernel_size] {
            out.extend_from_slice(&(v as u32).to_le_bytes());
        }
        for p in &self.params {
            out.extend_from_slice(&(p.shape.len() as u32).to_le_bytes());
            for &d in &p.shape {
                out.extend_from_slice(&(d as u32).to_le_bytes());
            }
            for v in &p.values {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self> {
        let mut r = Cursor { bytes, pos: 0 };
        if r.take(4, "magic")? != CHECKPOINT_MAGIC {
            return Err(Error::Format {
                offset: 0,
                reason: "bad magic, expected EDLC".into(),
            });
        }
        let v = r.take(2, "version")?;
        let version = u16::from_le_bytes([v[0], v[1]]);
        if version != CHECKPOINT_VERSION {
            return Err(Error::Version {
                found: version,
                supported: CHECKPOINT_VERSION,
            });
        }
        let config = SegNetConfig {
            in_channels: r.u32("in_channels")?,
            hidden_channels: r.u32("hidden_channels")?,
            depth: r.u32("depth")?,
            num_classes: r.u32("num_classes")?,
            kernel_size: r.u32("kernel_size")?,
        };
        config.validate().map_err(|e| Error::Format {
            offset: 6,
            reason: e.to_string(),
        })?;
        let mut params = Vec::new();
        for expected in config.param_shapes() {
            let at = r.pos;
            let rank = r.u32("tensor rank")?;
            let shape = (0..rank).map(|_| r.u32("tensor dimension")).collect::<Result<Vec<_>>>()?;
            if shape != expected {
                return Err(Error::Format {
                    offset: at as u64,
                    reason: format!("parameter shape {shape:?} does not match {expected:?}"),
                });
            }
            let n: usize = shape.iter().product();
            let values = r
                .take(4 * n, "parameter values")?
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
                .collect();
            params.push(ParamBlob { shape, values });
        }
        if r.pos != bytes.len() {
            return Err(Error::Format {
                offset: r.pos as u64,
                reason: format!("{} trailing bytes", bytes.len() - r.pos),
            });
        }
        Ok(Self { config, params })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.encode())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::decode(&fs::read(path)?)
    }
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        if self.bytes.len() - self.pos < n {
            return Err(Error::Format {
                offset: self.bytes.len() as u64,
                reason: format!("truncated while reading {what} at offset {}", self.pos),
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

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn ckpt() -> Checkpoint {
        let cfg = SegNetConfig {
            hidden_channels: 4,
            ..Default::default()
        };
        Checkpoint::from_net(&SegNet::init(cfg, &mut ChaCha8Rng::seed_from_u64(5)).unwrap())
    }

    #[test]
    fn round_trip_and_layout() {
        let c = ckpt();
        let bytes = c.encode();
        assert_eq!(&bytes[..4], b"EDLC");
        assert_eq!(&bytes[4..6], &[1, 0]);
        assert_eq!(&bytes[6..10], &3u32.to_le_bytes());
        assert_eq!(Checkpoint::decode(&bytes).unwrap(), c);
    }

    #[test]
    fn version_mismatch_is_diagnosed() {
        let mut bytes = ckpt().encode();
        bytes[4] = 9;
        let err = Checkpoint::decode(&bytes).unwrap_err();
        assert!(matches!(err, Error::Version { found: 9, supported: 1 }));
        assert!(err.to_string().contains("version 9"));
    }

    #[test]
    fn truncation_and_garbage_rejected() {
        let bytes = ckpt().encode();
        assert!(Checkpoint::decode(&bytes[..bytes.len() - 2]).is_err());
        assert!(Checkpoint::decode(&bytes[..20]).is_err());
        let mut extra = bytes.clone();
        extra.push(1);
        assert!(Checkpoint::decode(&extra).is_err());
    }
}
