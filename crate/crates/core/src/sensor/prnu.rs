use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::rng;

/// Smallest gain a PRNU pixel may take before renormalization.
const MIN_GAIN: f64 = 1e-3;

/// Fixed per-pixel multiplicative gain field, normalized to mean 1.
#[derive(Debug, Clone, PartialEq)]
pub struct PrnuMask {
    width: usize,
    height: usize,
    gains: Vec<f32>,
}

impl PrnuMask {
    pub fn unity(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            gains: vec![1.0; width * height],
        }
    }

    pub fn from_gains(width: usize, height: usize, gains: Vec<f32>) -> Result<Self> {
        if gains.len() != width * height {
            return Err(Error::Dimension(format!(
                "mask needs {} gains, got {}",
                width * height,
                gains.len()
            )));
        }
        if gains.iter().any(|g| !(g.is_finite() && *g > 0.0)) {
            return Err(Error::InvalidParameter("PRNU gains must be > 0".into()));
        }
        Ok(Self { width, height, gains })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn gains(&self) -> &[f32] {
        &self.gains
    }
}

/// Draw a PRNU mask: `max(1 + strength * z, MIN_GAIN)` with `z ~ N(0, 1)`,
/// rescaled so the sample mean is exactly 1 (to f32 precision).
pub fn generate_prnu(width: usize, height: usize, strength: f64, seed: u64) -> Result<PrnuMask> {
    if !(strength.is_finite() && strength >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "PRNU strength must be >= 0, got {strength}"
        )));
    }
    if width == 0 || height == 0 {
        return Err(Error::Dimension("PRNU mask must be non-empty".into()));
    }
    if strength == 0.0 {
        return Ok(PrnuMask::unity(width, height));
    }
    let mut g = rng::generator(seed);
    let raw: Vec<f64> = (0..width * height)
        .map(|_| {
            let z: f64 = StandardNormal.sample(&mut g);
            (1.0 + strength * z).max(MIN_GAIN)
        })
        .collect();
    let mean = raw.iter().sum::<f64>() / raw.len() as f64;
    let gains = raw.iter().map(|v| (v / mean) as f32).collect();
    Ok(PrnuMask { width, height, gains })
}
