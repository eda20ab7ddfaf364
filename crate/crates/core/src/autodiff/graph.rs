use super::kernels::{self, ConvGeom};
use super::param::{ParamId, ParamStore};
use super::tensor::Tensor;
use crate::error::{Error, Result};

/// Handle to a value recorded in a [`Graph`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(usize);

#[derive(Debug)]
enum Op {
    Input,
    Param {
        store: u64,
        id: ParamId,
    },
    Conv2d {
        x: Var,
        w: Var,
        b: Option<Var>,
        geom: ConvGeom,
        cols: Vec<f32>,
    },
    Relu {
        x: Var,
    },
    MaxPool2x2 {
        x: Var,
        winners: Vec<u32>,
    },
    Upsample2x {
        x: Var,
    },
    Dense {
        x: Var,
        w: Var,
        b: Option<Var>,
    },
    Reshape {
        x: Var,
    },
    Concat {
        a: Var,
        b: Var,
    },
    Add {
        a: Var,
        b: Var,
    },
    Scale {
        x: Var,
        factor: f32,
    },
    Sum {
        x: Var,
    },
    Mse {
        a: Var,
        b: Var,
    },
    SoftmaxCrossEntropy {
        logits: Var,
        labels: Vec<usize>,
        probs: Vec<f32>,
    },
}

#[derive(Debug)]
struct Node {
    value: Tensor,
    op: Op,
    requires_grad: bool,
}

/// Tape of executed operations.
///
/// Nodes are appended in execution order, which is a topological order, so
/// the backward pass simply walks the tape in reverse. A graph can be
/// differentiated once; call [`Graph::reset`] to reuse the allocation.
#[derive(Debug, Default)]
pub struct Graph {
    nodes: Vec<Node>,
    no_grad: bool,
    consumed: bool,
}

impl Graph {
    pub fn new() -> Self {
        Self::default()
    }

    /// A graph that records values only: nothing requires a gradient and no
    /// backward buffers are kept.
    pub fn inference() -> Self {
        Self {
            no_grad: true,
            ..Self::default()
        }
    }

    pub fn reset(&mut self) {
        self.nodes.clear();
        self.consumed = false;
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        self.nodes[v.0].value.shape()
    }

    pub fn requires_grad(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    fn push(&mut self, value: Tensor, op: Op, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op,
            requires_grad: requires_grad && !self.no_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn rg(&self, vars: &[Option<Var>]) -> bool {
        vars.iter().flatten().any(|v| self.nodes[v.0].requires_grad)
    }

    /// Constant leaf.
    pub fn input(&mut self, t: Tensor) -> Var {
        self.push(t, Op::Input, false)
    }

    /// Leaf bound to a parameter; its gradient flows back into `store`.
    pub fn param(&mut self, store: &ParamStore, id: ParamId) -> Var {
        let p = store.get(id);
        let rg = p.requires_grad();
        self.push(p.value.clone(), Op::Param { store: store.uid(), id }, rg)
    }

    /// Cross-correlation of `x: N x C x H x W` with `w: O x C x kH x kW`,
    /// zero padding `pad` on every side.
    pub fn conv2d(&mut self, x: Var, w: Var, b: Option<Var>, stride: usize, pad: usize) -> Result<Var> {
        let xs = self.shape(x).to_vec();
        let ws = self.shape(w).to_vec();
        if xs.len() != 4 || ws.len() != 4 {
            return Err(Error::Shape(format!(
                "conv2d expects NCHW input and OIHW weight, got {xs:?} and {ws:?}"
            )));
        }
        if xs[1] != ws[1] {
            return Err(Error::Shape(format!(
                "conv2d channel mismatch: input {xs:?}, weight {ws:?}"
            )));
        }
        if let Some(b) = b {
            if self.shape(b) != [ws[0]] {
                return Err(Error::Shape(format!(
                    "conv2d bias {:?} for {} filters",
                    self.shape(b),
                    ws[0]
                )));
            }
        }
        let geom = ConvGeom::new(xs[1], xs[2], xs[3], ws[2], ws[3], stride, pad).ok_or_else(|| {
            Error::Shape(format!(
                "conv2d kernel {ws:?} with stride {stride}, pad {pad} does not fit input {xs:?}"
            ))
        })?;
        let rg = self.rg(&[Some(x), Some(w), b]);
        let keep = rg && self.nodes[w.0].requires_grad;
        let (y, cols) = kernels::conv2d_forward(
            self.value(x).data(),
            xs[0],
            &geom,
            self.value(w).data(),
            ws[0],
            b.map(|b| self.value(b).data()),
            keep,
        );
        let out = Tensor::new(vec![xs[0], ws[0], geom.ho, geom.wo], y)?;
        Ok(self.push(out, Op::Conv2d { x, w, b, geom, cols }, rg))
    }

    pub fn relu(&mut self, x: Var) -> Var {
        let t = self.value(x);
        let y = t.data().iter().map(|&v| v.max(0.0)).collect();
        let out = Tensor::new(t.shape().to_vec(), y).expect("same shape");
        let rg = self.rg(&[Some(x)]);
        self.push(out, Op::Relu { x }, rg)
    }

    /// 2x2 max pooling, stride 2, over the last two axes of an NCHW tensor.
    pub fn maxpool2x2(&mut self, x: Var) -> Result<Var> {
        let s = self.shape(x).to_vec();
        if s.len() != 4 || s[2] < 2 || s[3] < 2 {
            return Err(Error::Shape(format!("maxpool2x2 needs NCHW with H,W >= 2, got {s:?}")));
        }
        let (y, winners) = kernels::maxpool2x2_forward(self.value(x).data(), s[0] * s[1], s[2], s[3]);
        let out = Tensor::new(vec![s[0], s[1], s[2] / 2, s[3] / 2], y)?;
        let rg = self.rg(&[Some(x)]);
        Ok(self.push(out, Op::MaxPool2x2 { x, winners }, rg))
    }

    pub fn upsample2x(&mut self, x: Var) -> Result<Var> {
        let s = self.shape(x).to_vec();
        if s.len() != 4 {
            return Err(Error::Shape(format!("upsample2x needs NCHW, got {s:?}")));
        }
        let y = kernels::upsample2x_forward(self.value(x).data(), s[0] * s[1], s[2], s[3]);
        let out = Tensor::new(vec![s[0], s[1], 2 * s[2], 2 * s[3]], y)?;
        let rg = self.rg(&[Some(x)]);
        Ok(self.push(out, Op::Upsample2x { x }, rg))
    }

    /// `x: N x In`, `w: Out x In`, `b: Out` gives `x w^T + b`.
    pub fn dense(&mut self, x: Var, w: Var, b: Option<Var>) -> Result<Var> {
        let xs = self.shape(x).to_vec();
        let ws = self.shape(w).to_vec();
        if xs.len() != 2 || ws.len() != 2 || xs[1] != ws[1] {
            return Err(Error::Shape(format!("dense: input {xs:?}, weight {ws:?}")));
        }
        if let Some(b) = b {
            if self.shape(b) != [ws[0]] {
                return Err(Error::Shape(format!(
                    "dense bias {:?} for {} outputs",
                    self.shape(b),
                    ws[0]
                )));
            }
        }
        let (n, inp, out) = (xs[0], xs[1], ws[0]);
        let mut y = vec![0.0f32; n * out];
        if let Some(b) = b {
            let bv = self.value(b).data();
            for row in y.chunks_exact_mut(out) {
                row.copy_from_slice(bv);
            }
        }
        kernels::gemm(
            n,
            inp,
            out,
            1.0,
            self.value(x).data(),
            (inp, 1),
            self.value(w).data(),
            (1, inp),
            1.0,
            &mut y,
            (out, 1),
        );
        let rg = self.rg(&[Some(x), Some(w), b]);
        Ok(self.push(Tensor::new(vec![n, out], y)?, Op::Dense { x, w, b }, rg))
    }

    pub fn reshape(&mut self, x: Var, shape: &[usize]) -> Result<Var> {
        let t = self.value(x).clone().reshape(shape)?;
        let rg = self.rg(&[Some(x)]);
        Ok(self.push(t, Op::Reshape { x }, rg))
    }

    /// `N x ...` to `N x (product of the rest)`.
    pub fn flatten(&mut self, x: Var) -> Result<Var> {
        let s = self.shape(x);
        let n = s[0];
        let rest = s[1..].iter().product::<usize>().max(1);
        self.reshape(x, &[n, rest])
    }

    /// Concatenate two NCHW tensors along the channel axis.
    pub fn concat_channels(&mut self, a: Var, b: Var) -> Result<Var> {
        let sa = self.shape(a).to_vec();
        let sb = self.shape(b).to_vec();
        if sa.len() != 4 || sb.len() != 4 || sa[0] != sb[0] || sa[2..] != sb[2..] {
            return Err(Error::Shape(format!("concat_channels: {sa:?} and {sb:?}")));
        }
        let (n, hw) = (sa[0], sa[2] * sa[3]);
        let (la, lb) = (sa[1] * hw, sb[1] * hw);
        let mut y = Vec::with_capacity(n * (la + lb));
        let (da, db) = (self.value(a).data(), self.value(b).data());
        for s in 0..n {
            y.extend_from_slice(&da[s * la..(s + 1) * la]);
            y.extend_from_slice(&db[s * lb..(s + 1) * lb]);
        }
        let out = Tensor::new(vec![n, sa[1] + sb[1], sa[2], sa[3]], y)?;
        let rg = self.rg(&[Some(a), Some(b)]);
        Ok(self.push(out, Op::Concat { a, b }, rg))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        if self.shape(a) != self.shape(b) {
            return Err(Error::Shape(format!(
                "add: {:?} and {:?}",
                self.shape(a),
                self.shape(b)
            )));
        }
        let y = self
            .value(a)
            .data()
            .iter()
            .zip(self.value(b).data())
            .map(|(x, y)| x + y)
            .collect();
        let out = Tensor::new(self.shape(a).to_vec(), y)?;
        let rg = self.rg(&[Some(a), Some(b)]);
        Ok(self.push(out, Op::Add { a, b }, rg))
    }

    pub fn scale(&mut self, x: Var, factor: f32) -> Var {
        let t = self.value(x);
        let out = Tensor::new(t.shape().to_vec(), t.data().iter().map(|v| v * factor).collect()).expect("same shape");
        let rg = self.rg(&[Some(x)]);
        self.push(out, Op::Scale { x, factor }, rg)
    }

    pub fn sum(&mut self, x: Var) -> Var {
        let s: f64 = self.value(x).data().iter().map(|&v| v as f64).sum();
        let rg = self.rg(&[Some(x)]);
        self.push(Tensor::scalar(s as f32), Op::Sum { x }, rg)
    }

    /// Mean of squared differences over every element.
    pub fn mse(&mut self, a: Var, b: Var) -> Result<Var> {
        if self.shape(a) != self.shape(b) {
            return Err(Error::Shape(format!(
                "mse: {:?} and {:?}",
                self.shape(a),
                self.shape(b)
            )));
        }
        let (da, db) = (self.value(a).data(), self.value(b).data());
        let s: f64 = da
            .iter()
            .zip(db)
            .map(|(x, y)| {
                let d = (*x - *y) as f64;
                d * d
            })
            .sum();
        let v = (s / da.len() as f64) as f32;
        let rg = self.rg(&[Some(a), Some(b)]);
        Ok(self.push(Tensor::scalar(v), Op::Mse { a, b }, rg))
    }

    /// Batch-mean softmax cross-entropy of `logits: N x K` against labels,
    /// evaluated in log-sum-exp form.
    pub fn softmax_cross_entropy(&mut self, logits: Var, labels: &[usize]) -> Result<Var> {
        let s = self.shape(logits).to_vec();
        if s.len() != 2 || s[0] != labels.len() {
            return Err(Error::Shape(format!(
                "cross-entropy: logits {s:?} for {} labels",
                labels.len()
            )));
        }
        let (n, k) = (s[0], s[1]);
        if let Some(&bad) = labels.iter().find(|&&l| l >= k) {
            return Err(Error::InvalidParameter(format!(
                "label {bad} out of range for {k} classes"
            )));
        }
        let z = self.value(logits).data();
        let mut probs = vec![0.0f32; n * k];
        let mut total = 0.0f64;
        for i in 0..n {
            let row = &z[i * k..(i + 1) * k];
            let m = row.iter().cloned().fold(f32::NEG_INFINITY, f32::max) as f64;
            let sum: f64 = row.iter().map(|&v| (v as f64 - m).exp()).sum();
            let lse = m + sum.ln();
            total += lse - row[labels[i]] as f64;
            for j in 0..k {
                probs[i * k + j] = ((row[j] as f64 - lse).exp()) as f32;
            }
        }
        let rg = self.rg(&[Some(logits)]);
        Ok(self.push(
            Tensor::scalar((total / n as f64) as f32),
            Op::SoftmaxCrossEntropy {
                logits,
                labels: labels.to_vec(),
                probs,
            },
            rg,
        ))
    }

    /// Differentiate the scalar `loss` and accumulate every parameter
    /// gradient into `store`.
    pub fn backward(&mut self, loss: Var, store: &mut ParamStore) -> Result<()> {
        if self.consumed {
            return Err(Error::Graph(
                "backward already ran on this graph; call reset() first".into(),
            ));
        }
        if self.value(loss).len() != 1 {
            return Err(Error::Graph(format!(
                "backward needs a scalar loss, got shape {:?}",
                self.shape(loss)
            )));
        }
        self.consumed = true;
        if !self.nodes[loss.0].requires_grad {
            return Ok(());
        }
        let mut grads: Vec<Option<Vec<f32>>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[loss.0] = Some(vec![1.0]);
        for i in (0..=loss.0).rev() {
            if !self.nodes[i].requires_grad {
                continue;
            }
            let Some(g) = grads[i].take() else { continue };
            self.backprop_node(i, &g, &mut grads, store)?;
        }
        Ok(())
    }

    fn backprop_node(&self, i: usize, g: &[f32], grads: &mut [Option<Vec<f32>>], store: &mut ParamStore) -> Result<()> {
        let nodes = &self.nodes;
        let wants = |v: Var| nodes[v.0].requires_grad;
        // Lazily allocated gradient slot for an input.
        fn slot<'a>(grads: &'a mut [Option<Vec<f32>>], nodes: &[Node], v: Var) -> &'a mut [f32] {
            grads[v.0].get_or_insert_with(|| vec![0.0; nodes[v.0].value.len()])
        }
        match &nodes[i].op {
            Op::Input => {}
            Op::Param { store: uid, id } => {
                if *uid != store.uid() {
                    return Err(Error::Graph(format!(
                        "trainable parameter {:?} belongs to a different store",
                        id
                    )));
                }
                let p = store.get_mut(*id);
                if let Some(acc) = &mut p.grad {
                    for (a, d) in acc.data_mut().iter_mut().zip(g) {
                        *a += d;
                    }
                }
            }
            Op::Conv2d { x, w, b, geom, cols } => {
                let n = self.shape(*x)[0];
                let o = self.shape(*w)[0];
                let mut dw = wants(*w).then(|| vec![0.0f32; self.value(*w).len()]);
                let mut db = b.filter(|b| wants(*b)).map(|b| vec![0.0f32; self.value(b).len()]);
                let mut dx = wants(*x).then(|| vec![0.0f32; self.value(*x).len()]);
                kernels::conv2d_backward(
                    g,
                    n,
                    geom,
                    self.value(*w).data(),
                    o,
                    cols,
                    dw.as_deref_mut(),
                    db.as_deref_mut(),
                    dx.as_deref_mut(),
                );
                for (v, d) in [(Some(*x), dx), (Some(*w), dw), (*b, db)] {
                    if let (Some(v), Some(d)) = (v, d) {
                        add_into(slot(grads, nodes, v), &d);
                    }
                }
            }
            Op::Relu { x } => {
                if wants(*x) {
                    let y = nodes[i].value.data();
                    let dx = slot(grads, nodes, *x);
                    for ((d, &yv), &gv) in dx.iter_mut().zip(y).zip(g) {
                        if yv > 0.0 {
                            *d += gv;
                        }
                    }
                }
            }
            Op::MaxPool2x2 { x, winners } => {
                if wants(*x) {
                    let dx = slot(grads, nodes, *x);
                    for (&w, &gv) in winners.iter().zip(g) {
                        dx[w as usize] += gv;
                    }
                }
            }
            Op::Upsample2x { x } => {
                if wants(*x) {
                    let s = self.shape(*x).to_vec();
                    let dx = slot(grads, nodes, *x);
                    kernels::upsample2x_backward(g, s[0] * s[1], s[2], s[3], dx);
                }
            }
            Op::Dense { x, w, b } => {
                let (n, inp) = (self.shape(*x)[0], self.shape(*x)[1]);
                let out = self.shape(*w)[0];
                if wants(*w) {
                    let xv = self.value(*x).data();
                    let dw = slot(grads, nodes, *w);
                    kernels::gemm(out, n, inp, 1.0, g, (1, out), xv, (inp, 1), 1.0, dw, (inp, 1));
                }
                if let Some(b) = b.filter(|b| wants(*b)) {
                    let db = slot(grads, nodes, b);
                    for row in g.chunks_exact(out) {
                        add_into(db, row);
                    }
                }
                if wants(*x) {
                    let wv = self.value(*w).data();
                    let dx = slot(grads, nodes, *x);
                    kernels::gemm(n, out, inp, 1.0, g, (out, 1), wv, (inp, 1), 1.0, dx, (inp, 1));
                }
            }
            Op::Reshape { x } => {
                if wants(*x) {
                    add_into(slot(grads, nodes, *x), g);
                }
            }
            Op::Concat { a, b } => {
                let sa = self.shape(*a);
                let sb = self.shape(*b);
                let hw = sa[2] * sa[3];
                let (n, la, lb) = (sa[0], sa[1] * hw, sb[1] * hw);
                if wants(*a) {
                    let da = slot(grads, nodes, *a);
                    for s in 0..n {
                        add_into(&mut da[s * la..(s + 1) * la], &g[s * (la + lb)..s * (la + lb) + la]);
                    }
                }
                if wants(*b) {
                    let db = slot(grads, nodes, *b);
                    for s in 0..n {
                        add_into(
                            &mut db[s * lb..(s + 1) * lb],
                            &g[s * (la + lb) + la..(s + 1) * (la + lb)],
                        );
                    }
                }
            }
            Op::Add { a, b } => {
                for v in [*a, *b] {
                    if wants(v) {
                        add_into(slot(grads, nodes, v), g);
                    }
                }
            }
            Op::Scale { x, factor } => {
                if wants(*x) {
                    let dx = slot(grads, nodes, *x);
                    for (d, gv) in dx.iter_mut().zip(g) {
                        *d += factor * gv;
                    }
                }
            }
            Op::Sum { x } => {
                if wants(*x) {
                    let dx = slot(grads, nodes, *x);
                    for d in dx.iter_mut() {
                        *d += g[0];
                    }
                }
            }
            Op::Mse { a, b } => {
                let (da_v, db_v) = (self.value(*a).data(), self.value(*b).data());
                let k = 2.0 * g[0] / da_v.len() as f32;
                if wants(*a) {
                    let da = slot(grads, nodes, *a);
                    for ((d, x), y) in da.iter_mut().zip(da_v).zip(db_v) {
                        *d += k * (x - y);
                    }
                }
                if wants(*b) {
                    let db = slot(grads, nodes, *b);
                    for ((d, x), y) in db.iter_mut().zip(da_v).zip(db_v) {
                        *d -= k * (x - y);
                    }
                }
            }
            Op::SoftmaxCrossEntropy { logits, labels, probs } => {
                if wants(*logits) {
                    let k = self.shape(*logits)[1];
                    let n = labels.len();
                    let scale = g[0] / n as f32;
                    let dz = slot(grads, nodes, *logits);
                    for (r, &label) in labels.iter().enumerate() {
                        for j in 0..k {
                            let onehot = if j == label { 1.0 } else { 0.0 };
                            dz[r * k + j] += scale * (probs[r * k + j] - onehot);
                        }
                    }
                }
            }
        }
        Ok(())
    }
}

#[inline]
fn add_into(dst: &mut [f32], src: &[f32]) {
    for (d, s) in dst.iter_mut().zip(src) {
        *d += s;
    }
}
