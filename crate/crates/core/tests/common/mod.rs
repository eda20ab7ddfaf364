//! Independent 64-bit reference implementations used as test oracles.
//!
//! Nothing here calls the crate's kernels: every forward pass is a direct
//! loop nest in `f64` so finite differences taken through it check the
//! analytic gradients of the `f32` tape.

#![allow(dead_code)]

use std::collections::HashMap;

use qis_core::autodiff::ParamStore;

pub mod gradcheck;

/// Dense `f64` array with an explicit shape.
#[derive(Debug, Clone, PartialEq)]
pub struct Arr {
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

impl Arr {
    pub fn new(shape: &[usize], data: Vec<f64>) -> Self {
        assert_eq!(shape.iter().product::<usize>(), data.len(), "shape {shape:?}");
        Self {
            shape: shape.to_vec(),
            data,
        }
    }

    pub fn from_f32(shape: &[usize], data: &[f32]) -> Self {
        Self::new(shape, data.iter().map(|&v| v as f64).collect())
    }
}

/// Data-dependent branches (ReLU signs, pooling winners).
///
/// A recording trace stores each decision; a replaying trace forces the
/// stored decisions, so a finite difference is taken on the same linear
/// piece the analytic gradient differentiates even when the step would
/// cross a kink.
#[derive(Debug, Default, Clone, PartialEq)]
pub struct Trace {
    pub decisions: Vec<u32>,
    replay: Option<Vec<u32>>,
    /// Replayed decisions that differ from what the data would choose.
    pub crossings: usize,
}

impl Trace {
    pub fn replaying(decisions: Vec<u32>) -> Self {
        Self {
            decisions: Vec::new(),
            replay: Some(decisions),
            crossings: 0,
        }
    }

    fn decide(&mut self, natural: u32) -> u32 {
        let pos = self.decisions.len();
        let d = match &self.replay {
            Some(r) => {
                if r[pos] != natural {
                    self.crossings += 1;
                }
                r[pos]
            }
            None => natural,
        };
        self.decisions.push(d);
        d
    }
}

pub fn conv2d(x: &Arr, w: &Arr, b: Option<&Arr>, stride: usize, pad: usize) -> Arr {
    let (n, c, h, wd) = (x.shape[0], x.shape[1], x.shape[2], x.shape[3]);
    let (o, kh, kw) = (w.shape[0], w.shape[2], w.shape[3]);
    assert_eq!(w.shape[1], c);
    let ho = (h + 2 * pad - kh) / stride + 1;
    let wo = (wd + 2 * pad - kw) / stride + 1;
    let mut y = vec![0.0; n * o * ho * wo];
    for s in 0..n {
        for f in 0..o {
            for r in 0..ho {
                for q in 0..wo {
                    let mut acc = b.map_or(0.0, |b| b.data[f]);
                    for ch in 0..c {
                        for i in 0..kh {
                            let rr = (r * stride + i) as isize - pad as isize;
                            if rr < 0 || rr >= h as isize {
                                continue;
                            }
                            let xrow = ((s * c + ch) * h + rr as usize) * wd;
                            let wrow = ((f * c + ch) * kh + i) * kw;
                            for j in 0..kw {
                                let cc = (q * stride + j) as isize - pad as isize;
                                if cc >= 0 && cc < wd as isize {
                                    acc += x.data[xrow + cc as usize] * w.data[wrow + j];
                                }
                            }
                        }
                    }
                    y[((s * o + f) * ho + r) * wo + q] = acc;
                }
            }
        }
    }
    Arr::new(&[n, o, ho, wo], y)
}

pub fn relu(x: &Arr, t: &mut Trace) -> Arr {
    let y = x
        .data
        .iter()
        .map(|&v| if t.decide((v > 0.0) as u32) == 1 { v } else { 0.0 })
        .collect();
    Arr::new(&x.shape, y)
}

pub fn maxpool2x2(x: &Arr, t: &mut Trace) -> Arr {
    let (n, c, h, w) = (x.shape[0], x.shape[1], x.shape[2], x.shape[3]);
    let (ho, wo) = (h / 2, w / 2);
    let mut y = Vec::with_capacity(n * c * ho * wo);
    for plane in 0..n * c {
        for r in 0..ho {
            for q in 0..wo {
                let at = |k: u32| x.data[(plane * h + 2 * r + (k / 2) as usize) * w + 2 * q + (k % 2) as usize];
                let mut best = 0u32;
                for k in 1..4 {
                    if at(k) > at(best) {
                        best = k;
                    }
                }
                y.push(at(t.decide(best)));
            }
        }
    }
    Arr::new(&[n, c, ho, wo], y)
}

pub fn upsample2x(x: &Arr) -> Arr {
    let (n, c, h, w) = (x.shape[0], x.shape[1], x.shape[2], x.shape[3]);
    let mut y = Vec::with_capacity(n * c * 4 * h * w);
    for plane in 0..n * c {
        for r in 0..2 * h {
            for q in 0..2 * w {
                y.push(x.data[(plane * h + r / 2) * w + q / 2]);
            }
        }
    }
    Arr::new(&[n, c, 2 * h, 2 * w], y)
}

pub fn dense(x: &Arr, w: &Arr, b: Option<&Arr>) -> Arr {
    let (n, inp) = (x.shape[0], x.shape[1]);
    let out = w.shape[0];
    assert_eq!(w.shape[1], inp);
    let mut y = vec![0.0; n * out];
    for s in 0..n {
        for o in 0..out {
            let mut acc = b.map_or(0.0, |b| b.data[o]);
            for i in 0..inp {
                acc += x.data[s * inp + i] * w.data[o * inp + i];
            }
            y[s * out + o] = acc;
        }
    }
    Arr::new(&[n, out], y)
}

pub fn flatten(x: &Arr) -> Arr {
    let n = x.shape[0];
    Arr::new(&[n, x.data.len() / n], x.data.clone())
}

pub fn concat_channels(a: &Arr, b: &Arr) -> Arr {
    let n = a.shape[0];
    let (la, lb) = (a.data.len() / n, b.data.len() / n);
    let mut y = Vec::with_capacity(a.data.len() + b.data.len());
    for s in 0..n {
        y.extend_from_slice(&a.data[s * la..(s + 1) * la]);
        y.extend_from_slice(&b.data[s * lb..(s + 1) * lb]);
    }
    Arr::new(&[n, a.shape[1] + b.shape[1], a.shape[2], a.shape[3]], y)
}

pub fn mse(a: &Arr, b: &Arr) -> f64 {
    assert_eq!(a.shape, b.shape);
    a.data.iter().zip(&b.data).map(|(x, y)| (x - y) * (x - y)).sum::<f64>() / a.data.len() as f64
}

pub fn cross_entropy(logits: &Arr, labels: &[usize]) -> f64 {
    let (n, k) = (logits.shape[0], logits.shape[1]);
    let mut total = 0.0;
    for (s, &label) in labels.iter().enumerate().take(n) {
        let row = &logits.data[s * k..(s + 1) * k];
        let m = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lse = m + row.iter().map(|v| (v - m).exp()).sum::<f64>().ln();
        total += lse - row[label];
    }
    total / n as f64
}

/// Named parameters as `f64` arrays.
pub type Params = HashMap<String, Arr>;

pub fn params_of(store: &ParamStore) -> Params {
    store
        .iter()
        .map(|p| (p.name.clone(), Arr::from_f32(p.value.shape(), p.value.data())))
        .collect()
}

fn conv_layer(p: &Params, name: &str, x: &Arr) -> Arr {
    let w = &p[&format!("{name}.weight")];
    let pad = w.shape[2] / 2;
    conv2d(x, w, Some(&p[&format!("{name}.bias")]), 1, pad)
}

fn dense_layer(p: &Params, name: &str, x: &Arr) -> Arr {
    dense(x, &p[&format!("{name}.weight")], Some(&p[&format!("{name}.bias")]))
}

/// Reference classifier: conv/relu/pool blocks, flatten, dense, relu, dense.
/// Layer indices match the crate's tap numbering.
pub fn classifier(p: &Params, blocks: usize, x: &Arr, taps: &[usize], t: &mut Trace) -> (Arr, Vec<Arr>) {
    let mut outs: Vec<Arr> = Vec::new();
    let mut h = x.clone();
    for i in 0..blocks {
        h = conv_layer(p, &format!("classifier.conv{}", i + 1), &h);
        outs.push(h.clone());
        h = relu(&h, t);
        outs.push(h.clone());
        h = maxpool2x2(&h, t);
        outs.push(h.clone());
    }
    h = flatten(&h);
    outs.push(h.clone());
    h = dense_layer(p, "classifier.fc1", &h);
    outs.push(h.clone());
    h = relu(&h, t);
    outs.push(h.clone());
    h = dense_layer(p, "classifier.fc2", &h);
    let tapped = taps.iter().map(|&i| flatten(&outs[i])).collect();
    (h, tapped)
}

/// Reference shallow entrance on a single-channel mosaic.
pub fn shallow_entrance(p: &Params, x: &Arr, t: &mut Trace) -> Arr {
    let h = conv_layer(p, "entrance.conv1", x);
    let h = relu(&h, t);
    conv_layer(p, "entrance.conv2", &h)
}

/// Reference encoder-decoder entrance with `levels` resolution levels.
pub fn deep_entrance(p: &Params, levels: usize, x: &Arr, t: &mut Trace) -> Arr {
    let mut skips = Vec::new();
    let mut h = x.clone();
    for lvl in 0..levels {
        if lvl > 0 {
            h = maxpool2x2(&h, t);
        }
        h = relu(&conv_layer(p, &format!("entrance.enc{lvl}.conv1"), &h), t);
        h = relu(&conv_layer(p, &format!("entrance.enc{lvl}.conv2"), &h), t);
        skips.push(h.clone());
    }
    for lvl in (0..levels - 1).rev() {
        h = upsample2x(&h);
        h = relu(&conv_layer(p, &format!("entrance.dec{lvl}.up"), &h), t);
        h = concat_channels(&skips[lvl], &h);
        h = relu(&conv_layer(p, &format!("entrance.dec{lvl}.conv1"), &h), t);
        h = relu(&conv_layer(p, &format!("entrance.dec{lvl}.conv2"), &h), t);
    }
    conv_layer(p, "entrance.head", &h)
}

/// Outcome of a finite-difference comparison over one parameter tensor.
#[derive(Debug, Clone)]
pub struct FdReport {
    pub name: String,
    pub checked: usize,
    /// Entries whose step crossed a kink (evaluated on the frozen piece).
    pub crossed: usize,
    /// `||analytic - numeric|| / ||numeric||` over checked entries.
    pub rel_error: f64,
}

/// Compare `analytic` against central differences of `loss` at step `h` for
/// the entries listed in `indices`, with branch decisions frozen at the
/// unperturbed point.
pub fn fd_check<F>(params: &Params, name: &str, analytic: &[f32], indices: &[usize], h: f64, loss: F) -> FdReport
where
    F: Fn(&Params, &mut Trace) -> f64,
{
    let mut base = Trace::default();
    loss(params, &mut base);
    let mut p = params.clone();
    let (mut diff2, mut ref2) = (0.0, 0.0);
    let (mut checked, mut crossed) = (0, 0);
    for &i in indices {
        let orig = p[name].data[i];
        let run = |v: f64, p: &mut Params| {
            p.get_mut(name).unwrap().data[i] = v;
            let mut t = Trace::replaying(base.decisions.clone());
            let l = loss(p, &mut t);
            (l, t.crossings)
        };
        let (lp, cp) = run(orig + h, &mut p);
        let (lm, cm) = run(orig - h, &mut p);
        p.get_mut(name).unwrap().data[i] = orig;
        if cp + cm > 0 {
            crossed += 1;
        }
        let num = (lp - lm) / (2.0 * h);
        let a = analytic[i] as f64;
        diff2 += (a - num) * (a - num);
        ref2 += num * num;
        checked += 1;
    }
    let rel_error = if ref2 > 0.0 {
        (diff2 / ref2).sqrt()
    } else {
        diff2.sqrt()
    };
    FdReport {
        name: name.to_string(),
        checked,
        crossed,
        rel_error,
    }
}

/// Up to `max` evenly spread indices into a tensor of `len` entries.
pub fn spread(len: usize, max: usize) -> Vec<usize> {
    if len <= max {
        (0..len).collect()
    } else {
        (0..max).map(|k| k * len / max).collect()
    }
}

/// Regularized upper incomplete gamma Q(a, x) for the chi-square survival
/// function, via series / continued fraction.
pub fn gamma_q(a: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    let ln_gamma_a = ln_gamma(a);
    if x < a + 1.0 {
        let (mut sum, mut term, mut ap) = (1.0 / a, 1.0 / a, a);
        for _ in 0..1000 {
            ap += 1.0;
            term *= x / ap;
            sum += term;
            if term.abs() < sum.abs() * 1e-15 {
                break;
            }
        }
        1.0 - sum * (-x + a * x.ln() - ln_gamma_a).exp()
    } else {
        let tiny = 1e-300;
        let mut b = x + 1.0 - a;
        let mut c = 1.0 / tiny;
        let mut d = 1.0 / b;
        let mut hh = d;
        for i in 1..1000 {
            let an = -(i as f64) * (i as f64 - a);
            b += 2.0;
            d = an * d + b;
            if d.abs() < tiny {
                d = tiny;
            }
            c = b + an / c;
            if c.abs() < tiny {
                c = tiny;
            }
            d = 1.0 / d;
            let del = d * c;
            hh *= del;
            if (del - 1.0).abs() < 1e-15 {
                break;
            }
        }
        (-x + a * x.ln() - ln_gamma_a).exp() * hh
    }
}

/// Lanczos approximation of ln Γ(x).
pub fn ln_gamma(x: f64) -> f64 {
    const G: [f64; 9] = [
        0.999_999_999_999_809_9,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_1,
        -176.615_029_162_140_6,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_572e-6,
        1.505_632_735_149_311_6e-7,
    ];
    if x < 0.5 {
        return (std::f64::consts::PI / (std::f64::consts::PI * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut a = G[0];
    let t = x + 7.5;
    for (i, g) in G.iter().enumerate().skip(1) {
        a += g / (x + i as f64);
    }
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + a.ln()
}

/// Chi-square survival P(X >= stat) with `dof` degrees of freedom.
pub fn chi2_sf(stat: f64, dof: usize) -> f64 {
    gamma_q(dof as f64 / 2.0, stat / 2.0)
}

/// Model distribution of a count for Poisson rate `lambda`, Gaussian read
/// noise `sigma`, floor-and-clamp ADC with ceiling `max`, by summing
/// n = 0..200 photons and integrating the Gaussian in closed form per bin.
pub fn count_distribution(lambda: f64, sigma: f64, max: u32) -> Vec<f64> {
    let mut p = vec![0.0; max as usize + 1];
    let mut pois = (-lambda).exp();
    for n in 0..=200u32 {
        if n > 0 {
            pois *= lambda / n as f64;
        }
        // floor(n + eta) = k  <=>  eta in [k - n, k + 1 - n)
        for (k, slot) in p.iter_mut().enumerate() {
            let lo = if k == 0 { f64::NEG_INFINITY } else { k as f64 - n as f64 };
            let hi = if k as u32 == max {
                f64::INFINITY
            } else {
                k as f64 + 1.0 - n as f64
            };
            *slot += pois * (normal_cdf(hi / sigma) - normal_cdf(lo / sigma));
        }
    }
    p
}

pub fn normal_cdf(z: f64) -> f64 {
    if z == f64::INFINITY {
        return 1.0;
    }
    if z == f64::NEG_INFINITY {
        return 0.0;
    }
    0.5 * erfc(-z / std::f64::consts::SQRT_2)
}

/// Complementary error function (Numerical Recipes erfcc, |rel err| < 1.2e-7).
pub fn erfc(x: f64) -> f64 {
    let z = x.abs();
    let t = 1.0 / (1.0 + 0.5 * z);
    let r = t
        * (-z * z - 1.265_512_23
            + t * (1.000_023_68
                + t * (0.374_091_96
                    + t * (0.096_784_18
                        + t * (-0.186_288_06
                            + t * (0.278_868_07
                                + t * (-1.135_203_98
                                    + t * (1.488_515_87 + t * (-0.822_152_23 + t * 0.170_872_77)))))))))
            .exp();
    if x >= 0.0 {
        r
    } else {
        2.0 - r
    }
}

/// Pearson chi-square over bins with expected count >= 5 (sparser bins are
/// pooled). Returns (statistic, degrees of freedom).
pub fn chi_square(observed: &[u64], probs: &[f64], total: u64) -> (f64, usize) {
    let mut stat = 0.0;
    let mut bins = 0usize;
    let (mut pool_o, mut pool_e) = (0.0, 0.0);
    for (o, p) in observed.iter().zip(probs) {
        let e = p * total as f64;
        if e >= 5.0 {
            stat += (*o as f64 - e).powi(2) / e;
            bins += 1;
        } else {
            pool_o += *o as f64;
            pool_e += e;
        }
    }
    if pool_e > 0.0 {
        stat += (pool_o - pool_e).powi(2) / pool_e;
        bins += 1;
    }
    (stat, bins.saturating_sub(1))
}
