//! Finite-difference checks of the tape against the 64-bit oracles, shared by
//! the gradient tests and the acceptance suite. Each case returns the largest
//! norm-wise relative error over its parameter tensors.

use qis_core::autodiff::{Graph, ParamStore, Tensor, Var};
use qis_core::models::{ClassifierSpec, EntranceKind, InputLayout, Student, StudentSpec};
use qis_core::rng::generator;
use rand::Rng;

use super::*;

pub const STEP: f64 = 1e-3;
pub const TOL: f64 = 1e-4;

pub type CaseResult = Result<f64, String>;
pub fn random(shape: &[usize], scale: f32, seed: u64) -> Tensor {
    let mut g = generator(seed);
    let n = shape.iter().product();
    Tensor::new(shape.to_vec(), (0..n).map(|_| g.random_range(-scale..scale)).collect()).unwrap()
}

/// Values bounded away from zero so ReLU kinks are out of reach of the step.
pub fn off_zero(shape: &[usize], seed: u64) -> Tensor {
    let mut g = generator(seed);
    let n = shape.iter().product();
    let data = (0..n)
        .map(|_| {
            let v: f32 = g.random_range(0.05..1.0);
            if g.random::<bool>() {
                v
            } else {
                -v
            }
        })
        .collect();
    Tensor::new(shape.to_vec(), data).unwrap()
}

/// Compare the tape's gradients of every parameter in `store` with central
/// differences of `oracle`, on at most `per_tensor` entries per tensor.
pub fn check_all<F>(
    store: &ParamStore,
    build: impl Fn(&mut Graph, &ParamStore) -> Var,
    oracle: F,
    per_tensor: usize,
) -> CaseResult
where
    F: Fn(&Params, &mut Trace) -> f64,
{
    let mut store = store.clone();
    let mut g = Graph::new();
    let loss = build(&mut g, &store);
    let f32_loss = g.value(loss).data()[0] as f64;
    store.zero_grad();
    g.backward(loss, &mut store).unwrap();
    let params = params_of(&store);
    let ref_loss = oracle(&params, &mut Trace::default());
    if (f32_loss - ref_loss).abs() > 1e-4 * ref_loss.abs().max(1.0) {
        return Err(format!("forward mismatch: tape {f32_loss}, oracle {ref_loss}"));
    }
    let mut worst = 0.0f64;
    for p in store.iter() {
        let idx = spread(p.value.len(), per_tensor);
        let grad = p.grad.as_ref().ok_or_else(|| format!("{}: no gradient", p.name))?;
        let r = fd_check(&params, &p.name, grad.data(), &idx, STEP, &oracle);
        if r.checked != idx.len() || !(r.rel_error < TOL) {
            return Err(format!("{}: relative error {:.3e}", p.name, r.rel_error));
        }
        worst = worst.max(r.rel_error);
    }
    Ok(worst)
}

pub fn conv2d_case() -> CaseResult {
    let mut worst = 0.0f64;
    for (stride, pad, k) in [(1, 1, 3), (2, 0, 3), (1, 0, 1), (2, 1, 3)] {
        let mut store = ParamStore::new();
        store.add("x", random(&[2, 3, 7, 6], 1.0, 1));
        store.add("w", random(&[4, 3, k, k], 0.5, 2));
        store.add("b", random(&[4], 0.5, 3));
        let ho = (7 + 2 * pad - k) / stride + 1;
        let wo = (6 + 2 * pad - k) / stride + 1;
        let target = random(&[2, 4, ho, wo], 1.0, 4);
        let tgt = Arr::from_f32(target.shape(), target.data());
        let e = check_all(
            &store,
            |g, s| {
                let x = g.param(s, s.find("x").unwrap());
                let w = g.param(s, s.find("w").unwrap());
                let b = g.param(s, s.find("b").unwrap());
                let y = g.conv2d(x, w, Some(b), stride, pad).unwrap();
                let t = g.input(target.clone());
                g.mse(y, t).unwrap()
            },
            |p, _| mse(&conv2d(&p["x"], &p["w"], Some(&p["b"]), stride, pad), &tgt),
            400,
        )?;
        worst = worst.max(e);
    }
    Ok(worst)
}

pub fn relu_pool_upsample_case() -> CaseResult {
    let mut store = ParamStore::new();
    store.add("x", off_zero(&[2, 3, 6, 8], 5));
    let target = random(&[2, 3, 6, 8], 1.0, 6);
    let tgt = Arr::from_f32(target.shape(), target.data());
    check_all(
        &store,
        |g, s| {
            let x = g.param(s, s.find("x").unwrap());
            let y = g.relu(x);
            let y = g.maxpool2x2(y).unwrap();
            let y = g.upsample2x(y).unwrap();
            let t = g.input(target.clone());
            g.mse(y, t).unwrap()
        },
        |p, tr| mse(&upsample2x(&maxpool2x2(&relu(&p["x"], tr), tr)), &tgt),
        400,
    )
}

pub fn dense_cross_entropy_case() -> CaseResult {
    let mut store = ParamStore::new();
    store.add("x", random(&[5, 2, 3, 2], 1.0, 7));
    store.add("w", random(&[4, 12], 0.7, 8));
    store.add("b", random(&[4], 0.3, 9));
    let labels = [0usize, 3, 1, 2, 3];
    check_all(
        &store,
        |g, s| {
            let x = g.param(s, s.find("x").unwrap());
            let x = g.flatten(x).unwrap();
            let w = g.param(s, s.find("w").unwrap());
            let b = g.param(s, s.find("b").unwrap());
            let y = g.dense(x, w, Some(b)).unwrap();
            g.softmax_cross_entropy(y, &labels).unwrap()
        },
        |p, _| cross_entropy(&dense(&flatten(&p["x"]), &p["w"], Some(&p["b"])), &labels),
        400,
    )
}

pub fn concat_add_scale_sum_case() -> CaseResult {
    let mut store = ParamStore::new();
    store.add("a", random(&[2, 2, 3, 3], 1.0, 10));
    store.add("b", random(&[2, 3, 3, 3], 1.0, 11));
    store.add("c", random(&[2, 5, 3, 3], 1.0, 12));
    check_all(
        &store,
        |g, s| {
            let a = g.param(s, s.find("a").unwrap());
            let b = g.param(s, s.find("b").unwrap());
            let c = g.param(s, s.find("c").unwrap());
            let y = g.concat_channels(a, b).unwrap();
            let y = g.add(y, c).unwrap();
            let t = g.input(Tensor::full(&[2, 5, 3, 3], 0.25));
            let m = g.mse(y, t).unwrap();
            let r = g.reshape(c, &[10, 9]).unwrap();
            let sc = g.scale(r, -0.3);
            let s1 = g.sum(sc);
            g.add(m, s1).unwrap()
        },
        |p, _| {
            let y = concat_channels(&p["a"], &p["b"]);
            let y = Arr::new(&y.shape, y.data.iter().zip(&p["c"].data).map(|(u, v)| u + v).collect());
            let m = mse(&y, &Arr::new(&y.shape.clone(), vec![0.25; y.data.len()]));
            m - 0.3 * p["c"].data.iter().sum::<f64>()
        },
        400,
    )
}

pub fn mse_case() -> CaseResult {
    let mut store = ParamStore::new();
    store.add("a", random(&[3, 4], 1.0, 13));
    store.add("b", random(&[3, 4], 1.0, 14));
    check_all(
        &store,
        |g, s| {
            let a = g.param(s, s.find("a").unwrap());
            let b = g.param(s, s.find("b").unwrap());
            g.mse(a, b).unwrap()
        },
        |p, _| mse(&p["a"], &p["b"]),
        400,
    )
}

fn student_loss_check(entrance: EntranceKind, spec: ClassifierSpec, size: usize, seed: u64) -> CaseResult {
    let student = Student::build(
        StudentSpec {
            entrance,
            layout: InputLayout::Mosaic,
            classifier: spec.clone(),
        },
        seed,
    )
    .unwrap();
    let n = 2;
    let input = random(&[n, 1, size, size], 0.5, seed + 100)
        .data()
        .iter()
        .map(|v| v + 0.5)
        .collect::<Vec<_>>();
    let input = Tensor::new(vec![n, 1, size, size], input).unwrap();
    let clean = random(&[n, 3, size, size], 0.5, seed + 101);
    let labels = [1usize, 0];
    let taps = spec.tap_layers.clone();
    let blocks = spec.widths.len();
    let teacher_taps: Vec<Tensor> = {
        let mut g = Graph::inference();
        let x = g.input(random(&[n, 3, size, size], 1.0, seed + 102));
        let (_, t) = student.classifier.forward(&mut g, &student.store, x).unwrap();
        t.iter().map(|&v| g.value(v).clone()).collect()
    };
    let lambda = 0.7f32;
    let oracle = {
        let input = Arr::from_f32(input.shape(), input.data());
        let clean = Arr::from_f32(clean.shape(), clean.data());
        let tt: Vec<Arr> = teacher_taps
            .iter()
            .map(|t| Arr::from_f32(t.shape(), t.data()))
            .collect();
        move |p: &Params, tr: &mut Trace| {
            let rgb = match entrance {
                EntranceKind::Shallow => shallow_entrance(p, &input, tr),
                EntranceKind::Deep => deep_entrance(p, 4, &input, tr),
            };
            let (logits, st) = classifier(p, blocks, &rgb, &taps, tr);
            let lp: f64 = st.iter().zip(&tt).map(|(a, b)| mse(a, b)).sum();
            cross_entropy(&logits, &labels) + lambda as f64 * lp + mse(&rgb, &clean)
        }
    };
    let build = |g: &mut Graph, s: &ParamStore| {
        let x = g.input(input.clone());
        let rgb = student.entrance.forward(g, s, x).unwrap();
        let (logits, taps) = student.classifier.forward(g, s, rgb).unwrap();
        let tt: Vec<Var> = teacher_taps.iter().map(|t| g.input(t.clone())).collect();
        let parts = qis_core::training::combined_loss(g, logits, &labels, &taps, &tt, lambda).unwrap();
        let target = g.input(clean.clone());
        let m = g.mse(rgb, target).unwrap();
        g.add(parts.total, m).unwrap()
    };
    check_all(&student.store, build, oracle, 48)
}

/// Full student objective (cross-entropy, perceptual and reconstruction
/// terms) through the shallow entrance and a small classifier.
pub fn shallow_student_case() -> CaseResult {
    let spec = ClassifierSpec::toy(3, (8, 8))
        .with_widths(vec![4, 6], 8)
        .with_taps(vec![2, 5, 7]);
    student_loss_check(EntranceKind::Shallow, spec, 8, 21)
}

/// The same objective through the encoder-decoder entrance.
pub fn deep_student_case() -> CaseResult {
    let spec = ClassifierSpec::toy(2, (8, 8))
        .with_widths(vec![3], 5)
        .with_taps(vec![0, 2]);
    student_loss_check(EntranceKind::Deep, spec, 8, 22)
}
