use rand::Rng;

use crate::autodiff::{Graph, ParamId, ParamStore, Tensor, Var};
use crate::error::Result;
use crate::rng::Generator;

/// He-uniform: `U(-sqrt(6 / fan_in), sqrt(6 / fan_in))`.
fn he_uniform(shape: &[usize], fan_in: usize, rng: &mut Generator) -> Tensor {
    let bound = (6.0 / fan_in as f64).sqrt() as f32;
    let n: usize = shape.iter().product();
    let data = (0..n).map(|_| rng.random_range(-bound..bound)).collect();
    Tensor::new(shape.to_vec(), data).expect("consistent shape")
}

/// Square-kernel convolution with bias.
#[derive(Debug, Clone)]
pub struct Conv {
    pub weight: ParamId,
    pub bias: ParamId,
    pub stride: usize,
    pub pad: usize,
}

impl Conv {
    pub fn new(
        store: &mut ParamStore,
        name: &str,
        in_ch: usize,
        out_ch: usize,
        kernel: usize,
        rng: &mut Generator,
    ) -> Self {
        let fan_in = in_ch * kernel * kernel;
        let weight = store.add(
            format!("{name}.weight"),
            he_uniform(&[out_ch, in_ch, kernel, kernel], fan_in, rng),
        );
        let bias = store.add(format!("{name}.bias"), Tensor::zeros(&[out_ch]));
        Self {
            weight,
            bias,
            stride: 1,
            pad: kernel / 2,
        }
    }

    pub fn forward(&self, g: &mut Graph, store: &ParamStore, x: Var) -> Result<Var> {
        let w = g.param(store, self.weight);
        let b = g.param(store, self.bias);
        g.conv2d(x, w, Some(b), self.stride, self.pad)
    }
}

#[derive(Debug, Clone)]
pub struct Dense {
    pub weight: ParamId,
    pub bias: ParamId,
}

impl Dense {
    pub fn new(store: &mut ParamStore, name: &str, inp: usize, out: usize, rng: &mut Generator) -> Self {
        let weight = store.add(format!("{name}.weight"), he_uniform(&[out, inp], inp, rng));
        let bias = store.add(format!("{name}.bias"), Tensor::zeros(&[out]));
        Self { weight, bias }
    }

    pub fn forward(&self, g: &mut Graph, store: &ParamStore, x: Var) -> Result<Var> {
        let w = g.param(store, self.weight);
        let b = g.param(store, self.bias);
        g.dense(x, w, Some(b))
    }
}
