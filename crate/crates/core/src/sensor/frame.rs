use std::io::Write;
use std::path::Path;

use super::config::SensorConfig;
use crate::error::{Error, Result};

const QRF_MAGIC: &[u8; 4] = b"QRF1";

/// Quantized single-channel Bayer frame as read out by the sensor.
#[derive(Debug, Clone, PartialEq)]
pub struct RawFrame {
    pub width: usize,
    pub height: usize,
    /// Row-major counts in `[0, 2^adc_bits - 1]`.
    pub counts: Vec<u16>,
    pub config: SensorConfig,
    pub rng_seed: u64,
}

impl RawFrame {
    pub fn max_level(&self) -> u32 {
        self.config.max_level()
    }

    pub fn mean_count(&self) -> f64 {
        self.counts.iter().map(|&c| c as f64).sum::<f64>() / self.counts.len() as f64
    }

    /// Counts divided by `L`, the network input normalization.
    pub fn normalized(&self) -> Vec<f32> {
        let l = self.max_level() as f32;
        self.counts.iter().map(|&c| c as f32 / l).collect()
    }

    /// Binary PGM (P5) with `maxval = L`.
    pub fn to_pgm_bytes(&self) -> Vec<u8> {
        let l = self.max_level();
        let mut out = format!("P5\n{} {}\n{}\n", self.width, self.height, l).into_bytes();
        if l < 256 {
            out.extend(self.counts.iter().map(|&c| c as u8));
        } else {
            out.extend(self.counts.iter().flat_map(|&c| c.to_be_bytes()));
        }
        out
    }

    pub fn write_pgm(&self, path: &Path) -> Result<()> {
        write_file(path, &self.to_pgm_bytes())
    }

    /// `QRF1` container: magic, LE u32 width, LE u32 height, u8 adc_bits,
    /// LE u64 seed, `width * height` u8 counts, then the sensor config as
    /// UTF-8 JSON text.
    pub fn to_qrf_bytes(&self) -> Result<Vec<u8>> {
        if self.config.adc_bits > 8 {
            return Err(Error::Format(format!(
                "QRF1 stores u8 counts; adc_bits {} does not fit",
                self.config.adc_bits
            )));
        }
        let mut out = Vec::with_capacity(21 + self.counts.len() + 256);
        out.extend_from_slice(QRF_MAGIC);
        out.extend_from_slice(&(self.width as u32).to_le_bytes());
        out.extend_from_slice(&(self.height as u32).to_le_bytes());
        out.push(self.config.adc_bits);
        out.extend_from_slice(&self.rng_seed.to_le_bytes());
        out.extend(self.counts.iter().map(|&c| c as u8));
        let json =
            serde_json::to_string(&self.config).map_err(|e| Error::Format(format!("config serialization: {e}")))?;
        out.extend_from_slice(json.as_bytes());
        Ok(out)
    }

    pub fn from_qrf_bytes(bytes: &[u8]) -> Result<Self> {
        let fail = |m: &str| Error::Format(format!("QRF1: {m}"));
        if bytes.len() < 21 || &bytes[..4] != QRF_MAGIC {
            return Err(fail("missing magic"));
        }
        let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap());
        let width = u32_at(4) as usize;
        let height = u32_at(8) as usize;
        let adc_bits = bytes[12];
        let rng_seed = u64::from_le_bytes(bytes[13..21].try_into().unwrap());
        let n = width.checked_mul(height).ok_or_else(|| fail("dimension overflow"))?;
        if bytes.len() < 21 + n {
            return Err(fail("truncated counts"));
        }
        let counts: Vec<u16> = bytes[21..21 + n].iter().map(|&b| b as u16).collect();
        let text = std::str::from_utf8(&bytes[21 + n..]).map_err(|_| fail("trailer is not UTF-8"))?;
        let config: SensorConfig = serde_json::from_str(text).map_err(|e| fail(&format!("bad config trailer: {e}")))?;
        if config.adc_bits != adc_bits {
            return Err(fail("header adc_bits disagrees with config trailer"));
        }
        let l = config.max_level();
        if counts.iter().any(|&c| c as u32 > l) {
            return Err(fail("count exceeds 2^adc_bits - 1"));
        }
        Ok(Self {
            width,
            height,
            counts,
            config,
            rng_seed,
        })
    }

    pub fn write_qrf(&self, path: &Path) -> Result<()> {
        write_file(path, &self.to_qrf_bytes()?)
    }

    pub fn read_qrf(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_qrf_bytes(&bytes)
    }
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(bytes).map_err(|e| Error::io(path, e))
}
