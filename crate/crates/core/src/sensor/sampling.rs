use rand::Rng;

use super::config::{max_level, AdcMode};
use crate::error::{Error, Result};

/// Rates below this use exact inversion by sequential search.
const INVERSION_LIMIT: f64 = 10.0;

/// Draw one Poisson variate with mean `lambda` (must be finite and >= 0).
///
/// Small rates use inversion by sequential search, which is exact and only
/// needs one uniform. Larger rates use Hörmann's transformed rejection with
/// squeeze (PTRS), whose hat is built around the normal approximation.
pub fn sample_poisson<R: Rng + ?Sized>(rng: &mut R, lambda: f64) -> u64 {
    debug_assert!(lambda.is_finite() && lambda >= 0.0);
    if lambda <= 0.0 {
        // Keep stream consumption independent of the rate.
        let _: f64 = rng.random();
        return 0;
    }
    if lambda < INVERSION_LIMIT {
        poisson_inversion(rng, lambda)
    } else {
        poisson_ptrs(rng, lambda)
    }
}

fn poisson_inversion<R: Rng + ?Sized>(rng: &mut R, lambda: f64) -> u64 {
    let u: f64 = rng.random();
    let mut k = 0u64;
    let mut p = (-lambda).exp();
    let mut cdf = p;
    while u > cdf {
        k += 1;
        p *= lambda / k as f64;
        cdf += p;
        // Floating-point tail: cdf can saturate just below 1.
        if p < f64::MIN_POSITIVE || k > 1000 {
            break;
        }
    }
    k
}

fn poisson_ptrs<R: Rng + ?Sized>(rng: &mut R, lambda: f64) -> u64 {
    let slam = lambda.sqrt();
    let loglam = lambda.ln();
    let b = 0.931 + 2.53 * slam;
    let a = -0.059 + 0.024_83 * b;
    let inv_alpha = 1.1239 + 1.1328 / (b - 3.4);
    let vr = 0.9277 - 3.6224 / (b - 2.0);
    loop {
        let u: f64 = rng.random::<f64>() - 0.5;
        let v: f64 = rng.random();
        let us = 0.5 - u.abs();
        let k = ((2.0 * a / us + b) * u + lambda + 0.43).floor();
        if us >= 0.07 && v <= vr {
            return k as u64;
        }
        if k < 0.0 || (us < 0.013 && v > us) {
            continue;
        }
        let lhs = v.ln() + inv_alpha.ln() - (a / (us * us) + b).ln();
        let rhs = -lambda + k * loglam - ln_factorial(k as u64);
        if lhs <= rhs {
            return k as u64;
        }
    }
}

/// `ln(k!)`: exact summation for small `k`, Stirling series otherwise.
pub(crate) fn ln_factorial(k: u64) -> f64 {
    if k < 64 {
        (2..=k).map(|i| (i as f64).ln()).sum()
    } else {
        let n = k as f64;
        let inv = 1.0 / n;
        let inv2 = inv * inv;
        n * n.ln() - n
            + 0.5 * (2.0 * std::f64::consts::PI * n).ln()
            + inv * (1.0 / 12.0 - inv2 * (1.0 / 360.0 - inv2 / 1260.0))
    }
}

/// Truncating ADC: `floor(v)` clamped to `[0, 2^bits - 1]`.
pub fn adc_quantize(analog_value: f64, adc_bits: u8) -> Result<u32> {
    adc_quantize_with(analog_value, adc_bits, AdcMode::Floor)
}

pub fn adc_quantize_with(analog_value: f64, adc_bits: u8, mode: AdcMode) -> Result<u32> {
    if adc_bits == 0 || adc_bits > 32 {
        return Err(Error::InvalidParameter(format!(
            "adc_bits must be in 1..=32, got {adc_bits}"
        )));
    }
    if !analog_value.is_finite() {
        return Err(Error::Numeric(format!("ADC input is not finite: {analog_value}")));
    }
    let level = max_level(adc_bits) as f64;
    let v = match mode {
        AdcMode::Floor => analog_value.floor(),
        AdcMode::Round => analog_value.round(),
    };
    Ok(v.clamp(0.0, level) as u32)
}
