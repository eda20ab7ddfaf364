use super::student::teacher_features;
use crate::autodiff::{Graph, Tensor};
use crate::error::{Error, Result};
use crate::models::Teacher;
use crate::rng::derive_seed;
use crate::sensor::{calibrate_gain, naive_demosaic, simulate_frame, RgbImage, SensorConfig, SensorKind};

#[derive(Debug, Clone, PartialEq)]
pub struct DiagnosticRow {
    pub sensor: SensorKind,
    pub ppp: f64,
    pub mean_lp: f64,
    pub n: usize,
}

/// Per-sample perceptual loss between teacher features of two planar
/// `N x 3 x H x W` batches.
pub fn teacher_perceptual(teacher: &Teacher, a: Tensor, b: Tensor) -> Result<Vec<f64>> {
    if a.shape() != b.shape() {
        return Err(Error::Shape(format!("{:?} vs {:?}", a.shape(), b.shape())));
    }
    let n = a.shape()[0];
    let feats = |x: Tensor| -> Result<Vec<Tensor>> {
        let mut g = Graph::inference();
        let v = g.input(x);
        let (_, taps) = teacher.forward_with_taps(&mut g, v)?;
        Ok(taps.iter().map(|&t| g.value(t).clone()).collect())
    };
    let (fa, fb) = (feats(a)?, feats(b)?);
    let mut out = vec![0.0f64; n];
    for (ta, tb) in fa.iter().zip(&fb) {
        let per = ta.len() / n;
        for (i, o) in out.iter_mut().enumerate() {
            let s: f64 = ta.data()[i * per..(i + 1) * per]
                .iter()
                .zip(&tb.data()[i * per..(i + 1) * per])
                .map(|(x, y)| ((x - y) as f64).powi(2))
                .sum();
            *o += s / per as f64;
        }
    }
    Ok(out)
}

/// Mean teacher perceptual loss between clean images and their simulated raw
/// frames (naively demosaicked back to intensity units) at each photon level.
pub fn perceptual_diagnostic(
    teacher: &Teacher,
    images: &[RgbImage],
    ppp_grid: &[f64],
    sensor: &SensorConfig,
    seed: u64,
) -> Result<Vec<DiagnosticRow>> {
    if images.is_empty() {
        return Err(Error::InvalidParameter("diagnostic needs images".into()));
    }
    let taps = teacher.classifier.spec.tap_layers.clone();
    let refs: Vec<&RgbImage> = images.iter().collect();
    let clean = teacher_features(teacher, &refs, &taps)?;
    let mask = sensor.prnu_mask(images[0].width(), images[0].height())?;
    let mask = (sensor.prnu_strength > 0.0).then_some(mask);
    let (h, w) = (images[0].height(), images[0].width());
    let mut rows = Vec::with_capacity(ppp_grid.len());
    for (level, &ppp) in ppp_grid.iter().enumerate() {
        let alpha = calibrate_gain(images, ppp)?;
        let cfg = sensor.clone().with_gain(alpha);
        let mut total = 0.0f64;
        for (start, chunk) in images.chunks(64).enumerate().map(|(c, ch)| (c * 64, ch)) {
            let mut data = Vec::with_capacity(chunk.len() * 3 * h * w);
            for (k, img) in chunk.iter().enumerate() {
                let s = derive_seed(seed, &[level as u64, (start + k) as u64]);
                let frame = simulate_frame(img, &cfg, mask.as_ref(), s)?;
                data.extend(naive_demosaic(&frame));
            }
            let mut g = Graph::inference();
            let x = g.input(Tensor::new(vec![chunk.len(), 3, h, w], data)?);
            let (_, feats) = teacher.forward_with_taps(&mut g, x)?;
            for k in 0..chunk.len() {
                for (j, &f) in feats.iter().enumerate() {
                    let t = g.value(f);
                    let per = t.len() / chunk.len();
                    let want = &clean[start + k][j];
                    let s: f64 = t.data()[k * per..(k + 1) * per]
                        .iter()
                        .zip(want)
                        .map(|(a, b)| ((a - b) as f64).powi(2))
                        .sum();
                    total += s / per as f64;
                }
            }
        }
        rows.push(DiagnosticRow {
            sensor: sensor.sensor_kind,
            ppp,
            mean_lp: total / images.len() as f64,
            n: images.len(),
        });
    }
    Ok(rows)
}
