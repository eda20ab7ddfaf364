//! Procedural shape families for the bundled synthetic dataset.

use rand::Rng;

use crate::error::Result;
use crate::rng::Generator;
use crate::sensor::RgbImage;

pub const FAMILIES: [&str; 8] = [
    "disks",
    "crosses",
    "stripes",
    "checkers",
    "rings",
    "triangles",
    "dots",
    "bars",
];

const SUPERSAMPLE: usize = 3;

fn hsv(h: f32, s: f32, v: f32) -> [f32; 3] {
    let h = (h.rem_euclid(1.0)) * 6.0;
    let i = h.floor() as i32;
    let f = h - i as f32;
    let (p, q, t) = (v * (1.0 - s), v * (1.0 - s * f), v * (1.0 - s * (1.0 - f)));
    match i {
        0 => [v, t, p],
        1 => [q, v, p],
        2 => [p, v, t],
        3 => [p, q, v],
        4 => [t, p, v],
        _ => [v, p, q],
    }
}

/// Coverage test for one family in shape-local coordinates.
struct Shape {
    family: usize,
    cx: f32,
    cy: f32,
    cos: f32,
    sin: f32,
    size: f32,
    aux: f32,
}

impl Shape {
    fn random(family: usize, w: f32, rng: &mut Generator) -> Self {
        let theta: f32 = rng.random_range(0.0..std::f32::consts::PI);
        let margin = w * 0.3;
        let size = match family {
            2 | 3 => rng.random_range(w * 0.10..w * 0.16),
            6 => rng.random_range(w * 0.14..w * 0.2),
            _ => rng.random_range(w * 0.22..w * 0.36),
        };
        Self {
            family,
            cx: rng.random_range(margin..w - margin),
            cy: rng.random_range(margin..w - margin),
            cos: theta.cos(),
            sin: theta.sin(),
            size,
            aux: rng.random_range(0.25..0.4),
        }
    }

    fn covers(&self, x: f32, y: f32) -> bool {
        let (dx, dy) = (x - self.cx, y - self.cy);
        let u = dx * self.cos + dy * self.sin;
        let v = -dx * self.sin + dy * self.cos;
        let s = self.size;
        match self.family {
            0 => u * u + v * v <= s * s,
            1 => {
                let t = s * self.aux;
                (u.abs() <= s && v.abs() <= t) || (v.abs() <= s && u.abs() <= t)
            }
            2 => (u / s).rem_euclid(2.0) < 1.0,
            3 => ((u / s).floor() as i64 + (v / s).floor() as i64).rem_euclid(2) == 0,
            4 => {
                let r = (u * u + v * v).sqrt();
                r <= s && r >= s * (1.0 - 1.6 * self.aux)
            }
            5 => {
                // Equilateral triangle with circumradius s.
                let h = s * 0.5;
                v >= -h && v <= s && u.abs() <= (s - v) / 3f32.sqrt()
            }
            6 => {
                let (a, b) = ((u / s).rem_euclid(2.0) - 1.0, (v / s).rem_euclid(2.0) - 1.0);
                a * a + b * b <= 0.35
            }
            _ => u.abs() <= s && v.abs() <= s * self.aux * 0.6,
        }
    }
}

/// Render one sample of `family` at `size`x`size`.
pub fn render(family: usize, size: usize, rng: &mut Generator) -> Result<RgbImage> {
    let w = size as f32;
    let shape = Shape::random(family % FAMILIES.len(), w, rng);
    let fg_hue: f32 = rng.random();
    let bg_hue = fg_hue + rng.random_range(0.25..0.75);
    let fg = hsv(fg_hue, rng.random_range(0.4..0.9), rng.random_range(0.65..1.0));
    let bg = hsv(bg_hue, rng.random_range(0.2..0.6), rng.random_range(0.08..0.35));
    let mut data = Vec::with_capacity(size * size * 3);
    let step = 1.0 / SUPERSAMPLE as f32;
    for r in 0..size {
        for c in 0..size {
            let mut hits = 0usize;
            for sy in 0..SUPERSAMPLE {
                for sx in 0..SUPERSAMPLE {
                    let x = c as f32 + (sx as f32 + 0.5) * step;
                    let y = r as f32 + (sy as f32 + 0.5) * step;
                    hits += shape.covers(x, y) as usize;
                }
            }
            let a = hits as f32 / (SUPERSAMPLE * SUPERSAMPLE) as f32;
            for ch in 0..3 {
                data.push((a * fg[ch] + (1.0 - a) * bg[ch]).clamp(0.0, 1.0));
            }
        }
    }
    RgbImage::new(size, size, data)
}
