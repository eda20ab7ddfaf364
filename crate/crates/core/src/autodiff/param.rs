use std::sync::atomic::{AtomicU64, Ordering};

use super::tensor::Tensor;
use crate::error::{Error, Result};

static NEXT_STORE: AtomicU64 = AtomicU64::new(1);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ParamId(pub usize);

/// A named trainable tensor with its gradient accumulator.
#[derive(Debug, Clone)]
pub struct Parameter {
    pub name: String,
    pub value: Tensor,
    /// Present iff `requires_grad`.
    pub grad: Option<Tensor>,
    requires_grad: bool,
}

impl Parameter {
    pub fn requires_grad(&self) -> bool {
        self.requires_grad
    }
}

/// Ordered collection of parameters owned by one model.
#[derive(Debug)]
pub struct ParamStore {
    uid: u64,
    params: Vec<Parameter>,
}

impl Default for ParamStore {
    fn default() -> Self {
        Self::new()
    }
}

impl Clone for ParamStore {
    fn clone(&self) -> Self {
        Self {
            uid: NEXT_STORE.fetch_add(1, Ordering::Relaxed),
            params: self.params.clone(),
        }
    }
}

impl ParamStore {
    pub fn new() -> Self {
        Self {
            uid: NEXT_STORE.fetch_add(1, Ordering::Relaxed),
            params: Vec::new(),
        }
    }

    pub(crate) fn uid(&self) -> u64 {
        self.uid
    }

    pub fn add(&mut self, name: impl Into<String>, value: Tensor) -> ParamId {
        let grad = Some(Tensor::zeros(value.shape()));
        self.params.push(Parameter {
            name: name.into(),
            value,
            grad,
            requires_grad: true,
        });
        ParamId(self.params.len() - 1)
    }

    pub fn get(&self, id: ParamId) -> &Parameter {
        &self.params[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Parameter {
        &mut self.params[id.0]
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Parameter> {
        self.params.iter()
    }

    pub(crate) fn params_mut(&mut self) -> &mut [Parameter] {
        &mut self.params
    }

    pub fn find(&self, name: &str) -> Option<ParamId> {
        self.params.iter().position(|p| p.name == name).map(ParamId)
    }

    /// Total number of scalar parameters.
    pub fn numel(&self) -> usize {
        self.params.iter().map(|p| p.value.len()).sum()
    }

    pub fn zero_grad(&mut self) {
        for p in &mut self.params {
            if let Some(g) = &mut p.grad {
                g.data_mut().fill(0.0);
            }
        }
    }

    /// Mark every parameter as constant and drop the gradient buffers.
    pub fn freeze(&mut self) {
        for p in &mut self.params {
            p.requires_grad = false;
            p.grad = None;
        }
    }

    pub fn set_requires_grad(&mut self, id: ParamId, on: bool) {
        let p = &mut self.params[id.0];
        p.requires_grad = on;
        p.grad = on.then(|| Tensor::zeros(p.value.shape()));
    }

    pub fn is_frozen(&self) -> bool {
        self.params.iter().all(|p| !p.requires_grad)
    }

    /// 64-bit FNV-1a digest over names, shapes and raw little-endian values.
    pub fn checksum(&self) -> u64 {
        let mut bytes = Vec::with_capacity(self.numel() * 4);
        for p in &self.params {
            bytes.extend_from_slice(p.name.as_bytes());
            for &d in p.value.shape() {
                bytes.extend_from_slice(&(d as u32).to_le_bytes());
            }
            for v in p.value.data() {
                bytes.extend_from_slice(&v.to_le_bytes());
            }
        }
        crate::rng::fnv1a64(&bytes)
    }

    /// `(name, value)` pairs in store order.
    pub fn named_tensors(&self) -> Vec<(String, Tensor)> {
        self.params.iter().map(|p| (p.name.clone(), p.value.clone())).collect()
    }

    /// Overwrite values from `(name, tensor)` pairs; every parameter must be
    /// present with a matching shape.
    pub fn load_named(&mut self, tensors: &[(String, Tensor)]) -> Result<()> {
        for p in &mut self.params {
            let (_, t) = tensors
                .iter()
                .find(|(n, _)| *n == p.name)
                .ok_or_else(|| Error::Format(format!("checkpoint lacks parameter {}", p.name)))?;
            if t.shape() != p.value.shape() {
                return Err(Error::Shape(format!(
                    "parameter {}: checkpoint shape {:?}, model shape {:?}",
                    p.name,
                    t.shape(),
                    p.value.shape()
                )));
            }
            p.value = t.clone();
        }
        Ok(())
    }
}
