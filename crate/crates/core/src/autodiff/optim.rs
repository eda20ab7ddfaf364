use super::param::ParamStore;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OptimizerKind {
    /// `v <- mu v + g; p <- p - lr v`
    SgdMomentum { momentum: f32 },
    /// Bias-corrected Adam.
    Adam { beta1: f32, beta2: f32, eps: f32 },
}

impl OptimizerKind {
    pub fn adam() -> Self {
        OptimizerKind::Adam {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// First-order optimizer with per-parameter state buffers.
#[derive(Debug, Clone)]
pub struct Optimizer {
    pub kind: OptimizerKind,
    pub lr: f32,
    first: Vec<Vec<f32>>,
    second: Vec<Vec<f32>>,
    steps: u64,
}

impl Optimizer {
    pub fn new(kind: OptimizerKind, lr: f32) -> Self {
        Self {
            kind,
            lr,
            first: Vec::new(),
            second: Vec::new(),
            steps: 0,
        }
    }

    pub fn sgd(lr: f32, momentum: f32) -> Self {
        Self::new(OptimizerKind::SgdMomentum { momentum }, lr)
    }

    pub fn adam(lr: f32) -> Self {
        Self::new(OptimizerKind::adam(), lr)
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    /// Momentum (SGD) or first-moment (Adam) buffer of parameter `i`.
    pub fn state(&self, i: usize) -> Option<&[f32]> {
        self.first.get(i).map(|v| v.as_slice())
    }

    /// Apply one update to every trainable parameter of `store` using the
    /// accumulated gradients. Gradients are left untouched.
    pub fn step(&mut self, store: &mut ParamStore) -> Result<()> {
        for p in store.iter() {
            if let Some(g) = &p.grad {
                if let Some(pos) = g.data().iter().position(|v| !v.is_finite()) {
                    return Err(Error::Numeric(format!(
                        "non-finite gradient in {} at element {pos}",
                        p.name
                    )));
                }
            }
        }
        if self.first.len() != store.len() {
            self.first = store.iter().map(|p| vec![0.0; p.value.len()]).collect();
            self.second = match self.kind {
                OptimizerKind::Adam { .. } => store.iter().map(|p| vec![0.0; p.value.len()]).collect(),
                OptimizerKind::SgdMomentum { .. } => Vec::new(),
            };
        }
        self.steps += 1;
        let lr = self.lr;
        let t = self.steps as i32;
        for (i, p) in store.params_mut().iter_mut().enumerate() {
            let Some(grad) = &p.grad else { continue };
            if !p.requires_grad() {
                continue;
            }
            let g = grad.data();
            let m = &mut self.first[i];
            if m.len() != g.len() {
                return Err(Error::Shape(format!("optimizer state for {} has wrong size", p.name)));
            }
            let values = p.value.data_mut();
            match self.kind {
                OptimizerKind::SgdMomentum { momentum } => {
                    for ((v, m), g) in values.iter_mut().zip(m.iter_mut()).zip(g) {
                        *m = momentum * *m + g;
                        *v -= lr * *m;
                    }
                }
                OptimizerKind::Adam { beta1, beta2, eps } => {
                    let s = &mut self.second[i];
                    let c1 = 1.0 - beta1.powi(t);
                    let c2 = 1.0 - beta2.powi(t);
                    for (((v, m), s), g) in values.iter_mut().zip(m.iter_mut()).zip(s.iter_mut()).zip(g) {
                        *m = beta1 * *m + (1.0 - beta1) * g;
                        *s = beta2 * *s + (1.0 - beta2) * g * g;
                        let mhat = *m / c1;
                        let shat = *s / c2;
                        *v -= lr * mhat / (shat.sqrt() + eps);
                    }
                }
            }
        }
        Ok(())
    }
}
