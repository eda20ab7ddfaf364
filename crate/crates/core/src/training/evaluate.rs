use crate::autodiff::{Graph, Tensor};
use crate::error::{Error, Result};
use crate::models::{Student, Teacher};
use crate::sensor::{RawFrame, RgbImage};

/// Anything that maps a batch of inputs to logits.
pub trait Predictor {
    type Input;
    fn logits(&self, batch: &[&Self::Input]) -> Result<Tensor>;
    fn n_classes(&self) -> usize;
}

impl Predictor for Student {
    type Input = RawFrame;

    fn logits(&self, batch: &[&RawFrame]) -> Result<Tensor> {
        let mut g = Graph::inference();
        let x = g.input(self.input_tensor(batch)?);
        let (logits, _) = self.forward_with_taps(&mut g, x)?;
        Ok(g.value(logits).clone())
    }

    fn n_classes(&self) -> usize {
        self.classifier.spec.n_classes
    }
}

impl Predictor for Teacher {
    type Input = RgbImage;

    fn logits(&self, batch: &[&RgbImage]) -> Result<Tensor> {
        let mut g = Graph::inference();
        let x = g.input(rgb_batch(batch)?);
        let (logits, _) = self.forward_with_taps(&mut g, x)?;
        Ok(g.value(logits).clone())
    }

    fn n_classes(&self) -> usize {
        self.classifier.spec.n_classes
    }
}

/// Stack clean images into `N x 3 x H x W`.
pub(crate) fn rgb_batch(batch: &[&RgbImage]) -> Result<Tensor> {
    let first = batch
        .first()
        .ok_or_else(|| Error::InvalidParameter("empty image batch".into()))?;
    let (w, h) = (first.width(), first.height());
    let mut data = Vec::with_capacity(batch.len() * 3 * w * h);
    for img in batch {
        if (img.width(), img.height()) != (w, h) {
            return Err(Error::Dimension("images in a batch differ in size".into()));
        }
        data.extend(img.to_planar());
    }
    Tensor::new(vec![batch.len(), 3, h, w], data)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub accuracy: f64,
    /// `None` for classes absent from the evaluated set.
    pub per_class: Vec<Option<f64>>,
    /// Mean softmax probability of the predicted class.
    pub mean_confidence: f64,
    /// Mean cross-entropy against the labels.
    pub mean_loss: f64,
    pub n: usize,
}

/// Score a `N x K` logit matrix against labels (argmax prediction, first
/// index wins ties).
pub fn score_logits(logits: &Tensor, labels: &[usize]) -> Result<Evaluation> {
    let s = logits.shape();
    if s.len() != 2 || s[0] != labels.len() || labels.is_empty() {
        return Err(Error::Shape(format!("logits {s:?} for {} labels", labels.len())));
    }
    let k = s[1];
    let mut correct = vec![0usize; k];
    let mut total = vec![0usize; k];
    let mut conf = 0.0f64;
    let mut loss = 0.0f64;
    for (row, &label) in logits.data().chunks_exact(k).zip(labels) {
        if label >= k {
            return Err(Error::InvalidParameter(format!("label {label} out of range")));
        }
        let (arg, &max) = row
            .iter()
            .enumerate()
            .fold((0, &row[0]), |b, (i, v)| if *v > *b.1 { (i, v) } else { b });
        let denom: f64 = row.iter().map(|&v| ((v - max) as f64).exp()).sum();
        conf += 1.0 / denom;
        loss += denom.ln() - (row[label] - max) as f64;
        total[label] += 1;
        if arg == label {
            correct[label] += 1;
        }
    }
    let n = labels.len();
    Ok(Evaluation {
        accuracy: correct.iter().sum::<usize>() as f64 / n as f64,
        per_class: correct
            .iter()
            .zip(&total)
            .map(|(&c, &t)| (t > 0).then(|| c as f64 / t as f64))
            .collect(),
        mean_confidence: conf / n as f64,
        mean_loss: loss / n as f64,
        n,
    })
}

/// Evaluate a model over a dataset in fixed-size batches.
pub fn evaluate<P: Predictor>(model: &P, inputs: &[&P::Input], labels: &[usize]) -> Result<Evaluation> {
    if inputs.is_empty() {
        return Err(Error::InvalidParameter("cannot evaluate on an empty dataset".into()));
    }
    if inputs.len() != labels.len() {
        return Err(Error::Shape("inputs and labels differ in length".into()));
    }
    const BATCH: usize = 64;
    let k = model.n_classes();
    let mut all = Vec::with_capacity(inputs.len() * k);
    for chunk in inputs.chunks(BATCH) {
        all.extend(model.logits(chunk)?.into_data());
    }
    score_logits(&Tensor::new(vec![inputs.len(), k], all)?, labels)
}
