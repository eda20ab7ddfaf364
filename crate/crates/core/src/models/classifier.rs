use super::layers::{Conv, Dense};
use crate::autodiff::{Graph, ParamStore, Var};
use crate::error::{Error, Result};
use crate::rng::Generator;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ClassifierKind {
    /// Three conv blocks: 32/64/128 filters.
    Toy,
    /// Four wider conv blocks: 48/96/192/256 filters.
    Wide,
}

impl ClassifierKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ClassifierKind::Toy => "toy",
            ClassifierKind::Wide => "wide",
        }
    }

    pub fn default_widths(self) -> Vec<usize> {
        match self {
            ClassifierKind::Toy => vec![32, 64, 128],
            ClassifierKind::Wide => vec![48, 96, 192, 256],
        }
    }
}

impl std::str::FromStr for ClassifierKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "toy" => Ok(ClassifierKind::Toy),
            "wide" => Ok(ClassifierKind::Wide),
            o => Err(Error::InvalidParameter(format!("unknown classifier {o:?}"))),
        }
    }
}

/// Architecture of the classification backbone.
///
/// Layers are numbered in execution order: each block contributes
/// `conv, relu, pool` (three indices), then `flatten, dense, relu, dense`.
/// Tap indices refer to this numbering.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClassifierSpec {
    pub kind: ClassifierKind,
    pub widths: Vec<usize>,
    pub hidden: usize,
    pub n_classes: usize,
    pub image_size: (usize, usize),
    pub tap_layers: Vec<usize>,
}

impl ClassifierSpec {
    pub fn new(kind: ClassifierKind, n_classes: usize, image_size: (usize, usize)) -> Self {
        let widths = kind.default_widths();
        Self {
            kind,
            tap_layers: Self::pool_indices(widths.len()).into_iter().take(3).collect(),
            widths,
            hidden: 256,
            n_classes,
            image_size,
        }
    }

    pub fn toy(n_classes: usize, image_size: (usize, usize)) -> Self {
        Self::new(ClassifierKind::Toy, n_classes, image_size)
    }

    /// Override the block widths and hidden size (same topology).
    pub fn with_widths(mut self, widths: Vec<usize>, hidden: usize) -> Self {
        self.tap_layers = Self::pool_indices(widths.len()).into_iter().take(3).collect();
        self.widths = widths;
        self.hidden = hidden;
        self
    }

    pub fn with_taps(mut self, taps: Vec<usize>) -> Self {
        self.tap_layers = taps;
        self
    }

    /// Indices of the post-pool outputs.
    pub fn pool_indices(blocks: usize) -> Vec<usize> {
        (0..blocks).map(|b| 3 * b + 2).collect()
    }

    pub fn layer_count(&self) -> usize {
        3 * self.widths.len() + 4
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_classes < 2 {
            return Err(Error::InvalidParameter("need at least 2 classes".into()));
        }
        if self.widths.is_empty() {
            return Err(Error::InvalidParameter("classifier needs at least one block".into()));
        }
        let div = 1usize << self.widths.len();
        let (h, w) = self.image_size;
        if h % div != 0 || w % div != 0 || h == 0 || w == 0 {
            return Err(Error::Dimension(format!(
                "{} pooling blocks need image dims divisible by {div}, got {h}x{w}",
                self.widths.len()
            )));
        }
        if let Some(&t) = self.tap_layers.iter().find(|&&t| t >= self.layer_count() - 1) {
            return Err(Error::InvalidParameter(format!(
                "tap layer {t} out of range (0..{})",
                self.layer_count() - 1
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
enum Layer {
    Conv(Conv),
    Relu,
    Pool,
    Flatten,
    Dense(Dense),
}

#[derive(Debug, Clone)]
pub struct Classifier {
    pub spec: ClassifierSpec,
    layers: Vec<Layer>,
}

impl Classifier {
    pub fn new(spec: ClassifierSpec, store: &mut ParamStore, rng: &mut Generator) -> Result<Self> {
        spec.validate()?;
        let mut layers = Vec::with_capacity(spec.layer_count());
        let mut prev = 3;
        for (i, &w) in spec.widths.iter().enumerate() {
            layers.push(Layer::Conv(Conv::new(
                store,
                &format!("classifier.conv{}", i + 1),
                prev,
                w,
                3,
                rng,
            )));
            layers.push(Layer::Relu);
            layers.push(Layer::Pool);
            prev = w;
        }
        let div = 1usize << spec.widths.len();
        let flat = prev * (spec.image_size.0 / div) * (spec.image_size.1 / div);
        layers.push(Layer::Flatten);
        layers.push(Layer::Dense(Dense::new(
            store,
            "classifier.fc1",
            flat,
            spec.hidden,
            rng,
        )));
        layers.push(Layer::Relu);
        layers.push(Layer::Dense(Dense::new(
            store,
            "classifier.fc2",
            spec.hidden,
            spec.n_classes,
            rng,
        )));
        Ok(Self { spec, layers })
    }

    /// Run `x: N x 3 x H x W`; returns logits and the flattened outputs of
    /// the tap layers, in `tap_layers` order.
    pub fn forward(&self, g: &mut Graph, store: &ParamStore, x: Var) -> Result<(Var, Vec<Var>)> {
        self.forward_at(g, store, x, &self.spec.tap_layers)
    }

    /// Like [`Classifier::forward`] with an explicit tap list.
    pub fn forward_at(
        &self,
        g: &mut Graph,
        store: &ParamStore,
        x: Var,
        tap_layers: &[usize],
    ) -> Result<(Var, Vec<Var>)> {
        let s = g.shape(x);
        if s.len() != 4 || s[1] != 3 || (s[2], s[3]) != self.spec.image_size {
            return Err(Error::Shape(format!(
                "classifier expects N x 3 x {} x {}, got {s:?}",
                self.spec.image_size.0, self.spec.image_size.1
            )));
        }
        let mut taps: Vec<Option<Var>> = vec![None; tap_layers.len()];
        let mut h = x;
        for (idx, layer) in self.layers.iter().enumerate() {
            h = match layer {
                Layer::Conv(c) => c.forward(g, store, h)?,
                Layer::Relu => g.relu(h),
                Layer::Pool => g.maxpool2x2(h)?,
                Layer::Flatten => g.flatten(h)?,
                Layer::Dense(d) => d.forward(g, store, h)?,
            };
            for (slot, _) in tap_layers.iter().enumerate().filter(|(_, &t)| t == idx) {
                taps[slot] = Some(if g.shape(h).len() == 2 { h } else { g.flatten(h)? });
            }
        }
        let taps = taps
            .into_iter()
            .zip(tap_layers)
            .map(|(t, idx)| t.ok_or_else(|| Error::InvalidParameter(format!("tap layer {idx} out of range"))))
            .collect::<Result<Vec<_>>>()?;
        Ok((h, taps))
    }
}
