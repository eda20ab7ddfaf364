use rand_distr::{Distribution, StandardNormal};

use super::config::SensorConfig;
use super::frame::RawFrame;
use super::image::{apply_cfa, CfaColor, RgbImage};
use super::prnu::{generate_prnu, PrnuMask};
use super::sampling::{adc_quantize_with, sample_poisson};
use crate::error::{Error, Result};
use crate::rng;

impl SensorConfig {
    /// The PRNU mask described by `prnu_strength` and `prnu_seed`.
    pub fn prnu_mask(&self, width: usize, height: usize) -> Result<PrnuMask> {
        generate_prnu(width, height, self.prnu_strength, self.prnu_seed)
    }
}

/// Expected photo-electrons per pixel before sampling:
/// `mask(p) * alpha * CFA(img)(p) + dark_rate * exposure`.
pub fn rate_field(img: &RgbImage, cfg: &SensorConfig, mask: Option<&PrnuMask>) -> Result<Vec<f64>> {
    cfg.validate()?;
    let mosaic = apply_cfa(img)?;
    if let Some(m) = mask {
        if m.width() != img.width() || m.height() != img.height() {
            return Err(Error::Dimension(format!(
                "PRNU mask is {}x{}, image is {}x{}",
                m.width(),
                m.height(),
                img.width(),
                img.height()
            )));
        }
    }
    let dark = cfg.dark_electrons();
    Ok(mosaic
        .data()
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            let gain = mask.map_or(1.0, |m| m.gains()[i] as f64);
            gain * cfg.gain_alpha * v as f64 + dark
        })
        .collect())
}

/// Pre-ADC analog signal `Poisson(rate) + eta` for every pixel.
///
/// Consumes the random stream exactly like [`simulate_frame`], so quantizing
/// this output reproduces the frame bit for bit.
pub fn simulate_analog(img: &RgbImage, cfg: &SensorConfig, mask: Option<&PrnuMask>, seed: u64) -> Result<Vec<f64>> {
    let rates = rate_field(img, cfg, mask)?;
    let mut g = rng::generator(seed);
    let sigma = cfg.read_noise_sigma;
    Ok(rates
        .iter()
        .map(|&lambda| {
            let photons = sample_poisson(&mut g, lambda) as f64;
            let z: f64 = StandardNormal.sample(&mut g);
            photons + sigma * z
        })
        .collect())
}

/// Simulate one raw frame of `img` through the full sensor chain.
///
/// Deterministic for a fixed `seed`; pixels are independent. A missing mask
/// means unity gains.
pub fn simulate_frame(img: &RgbImage, cfg: &SensorConfig, mask: Option<&PrnuMask>, seed: u64) -> Result<RawFrame> {
    let analog = simulate_analog(img, cfg, mask, seed)?;
    let counts = analog
        .iter()
        .map(|&v| adc_quantize_with(v, cfg.adc_bits, cfg.adc_mode).map(|c| c as u16))
        .collect::<Result<Vec<u16>>>()?;
    Ok(RawFrame {
        width: img.width(),
        height: img.height(),
        counts,
        config: cfg.clone(),
        rng_seed: seed,
    })
}

/// Gain `alpha` that makes the mean expected photon count over every pixel
/// of every image equal `target_ppp` (dark current excluded).
pub fn calibrate_gain<'a, I>(images: I, target_ppp: f64) -> Result<f64>
where
    I: IntoIterator<Item = &'a RgbImage>,
{
    if !(target_ppp.is_finite() && target_ppp > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "target ppp must be > 0, got {target_ppp}"
        )));
    }
    let mut sum = 0.0f64;
    let mut count = 0usize;
    for img in images {
        let m = apply_cfa(img)?;
        sum += m.data().iter().map(|&v| v as f64).sum::<f64>();
        count += m.data().len();
    }
    if count == 0 {
        return Err(Error::InvalidParameter(
            "gain calibration needs at least one image".into(),
        ));
    }
    let mean = sum / count as f64;
    if mean <= 0.0 {
        return Err(Error::DivisionByZero(
            "mean CFA intensity is zero (all-black input); cannot calibrate gain".into(),
        ));
    }
    Ok(target_ppp / mean)
}

/// Photons-per-pixel estimate: mean count minus expected dark electrons.
///
/// ADC clipping is not corrected, so the estimate is biased low when a
/// noticeable fraction of pixels saturates at `L` (and biased high at very low
/// light when read noise is clipped at zero).
pub fn measure_ppp(frames: &[RawFrame]) -> Result<f64> {
    if frames.is_empty() {
        return Err(Error::InvalidParameter("measure_ppp needs at least one frame".into()));
    }
    let mut total = 0.0f64;
    let mut pixels = 0usize;
    for f in frames {
        let dark = f.config.dark_electrons();
        total += f.counts.iter().map(|&c| c as f64 - dark).sum::<f64>();
        pixels += f.counts.len();
    }
    Ok(total / pixels as f64)
}

/// Planar `3 x H x W` intensity estimate from a raw frame: counts are mapped
/// back to intensity units by `(count - dark) / alpha` and each 2x2 RGGB cell
/// fills its own block (greens averaged). Used to feed raw frames to a network
/// that expects RGB.
pub fn naive_demosaic(frame: &RawFrame) -> Vec<f32> {
    let (w, h) = (frame.width, frame.height);
    let plane = w * h;
    let alpha = frame.config.gain_alpha;
    let dark = frame.config.dark_electrons();
    let val = |r: usize, c: usize| ((frame.counts[r * w + c] as f64 - dark) / alpha) as f32;
    let mut out = vec![0.0f32; plane * 3];
    for r in (0..h).step_by(2) {
        for c in (0..w).step_by(2) {
            let mut rgb = [0.0f32; 3];
            let mut greens = 0.0f32;
            for (dr, dc) in [(0, 0), (0, 1), (1, 0), (1, 1)] {
                let v = val(r + dr, c + dc);
                match CfaColor::at(r + dr, c + dc) {
                    CfaColor::Green => greens += v,
                    color => rgb[color.channel()] = v,
                }
            }
            rgb[1] = greens * 0.5;
            for (dr, dc) in [(0, 0), (0, 1), (1, 0), (1, 1)] {
                let i = (r + dr) * w + c + dc;
                for ch in 0..3 {
                    out[ch * plane + i] = rgb[ch];
                }
            }
        }
    }
    out
}
