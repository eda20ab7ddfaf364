use std::time::Instant;

use rand::seq::SliceRandom;

use super::data::LabeledImage;
use super::evaluate::{evaluate, rgb_batch};
use super::protocol::{LossWeights, OptimizerSettings};
use super::record::{EpochStats, StepLog, TrainRecord};
use crate::autodiff::Graph;
use crate::error::{Error, Result};
use crate::models::{ClassifierSpec, Teacher};
use crate::rng::{derive_seed, generator};

const SHUFFLE_TAG: u64 = 0x5348;

#[derive(Debug, Clone, PartialEq)]
pub struct TeacherConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub optimizer: OptimizerSettings,
    pub seed: u64,
    /// Clean validation accuracy below which the run is flagged under-trained.
    pub accuracy_floor: f64,
}

impl Default for TeacherConfig {
    fn default() -> Self {
        Self {
            epochs: 30,
            batch_size: 32,
            optimizer: OptimizerSettings::default(),
            seed: 0,
            accuracy_floor: 0.90,
        }
    }
}

#[derive(Debug, Clone)]
pub struct TeacherRun {
    /// Best-validation-accuracy weights, frozen.
    pub teacher: Teacher,
    pub record: TrainRecord,
    pub val_accuracy: f64,
    pub under_trained: bool,
}

/// Train the classifier on clean images with cross-entropy.
pub fn train_teacher(
    train: &[LabeledImage],
    val: &[LabeledImage],
    spec: ClassifierSpec,
    cfg: &TeacherConfig,
) -> Result<TeacherRun> {
    if train.is_empty() || val.is_empty() {
        return Err(Error::Data(
            "teacher training needs non-empty train and val splits".into(),
        ));
    }
    if cfg.batch_size == 0 {
        return Err(Error::InvalidParameter("batch size must be positive".into()));
    }
    let mut teacher = Teacher::build(spec, cfg.seed)?;
    let mut opt = cfg.optimizer.build();
    let weights = LossWeights {
        ce: 1.0,
        lp: 0.0,
        mse: 0.0,
    };
    let mut record = TrainRecord::new(weights);
    let val_imgs: Vec<_> = val.iter().map(|s| &s.image).collect();
    let val_labels: Vec<usize> = val.iter().map(|s| s.label).collect();

    let initial = evaluate(&teacher, &val_imgs, &val_labels)?;
    let mut best = (initial.accuracy, teacher.clone());
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut g = Graph::new();
    let mut step = 0usize;
    for epoch in 1..=cfg.epochs {
        let started = Instant::now();
        order.shuffle(&mut generator(derive_seed(cfg.seed, &[SHUFFLE_TAG, epoch as u64])));
        let (mut loss_sum, mut batches) = (0.0f64, 0usize);
        for chunk in order.chunks(cfg.batch_size) {
            step += 1;
            let imgs: Vec<_> = chunk.iter().map(|&i| &train[i].image).collect();
            let labels: Vec<usize> = chunk.iter().map(|&i| train[i].label).collect();
            g.reset();
            let x = g.input(rgb_batch(&imgs)?);
            let (logits, _) = teacher.forward_with_taps(&mut g, x)?;
            let ce = g.softmax_cross_entropy(logits, &labels)?;
            let loss = g.value(ce).data()[0];
            if !loss.is_finite() {
                return Err(Error::Divergence {
                    step,
                    detail: format!("teacher loss {loss}"),
                });
            }
            teacher.store.zero_grad();
            g.backward(ce, &mut teacher.store)?;
            opt.step(&mut teacher.store).map_err(|e| Error::Divergence {
                step,
                detail: e.to_string(),
            })?;
            record.steps.push(StepLog {
                step,
                total: loss,
                ce: loss,
                lp: 0.0,
                mse: 0.0,
            });
            loss_sum += loss as f64;
            batches += 1;
        }
        let ev = evaluate(&teacher, &val_imgs, &val_labels)?;
        let mean = loss_sum / batches as f64;
        record.epochs.push(EpochStats {
            epoch,
            train_loss: mean,
            val_loss: ev.mean_loss,
            val_acc: ev.accuracy,
            ce_component: mean,
            lp_component: 0.0,
            mse_component: 0.0,
            seconds: started.elapsed().as_secs_f64(),
        });
        log::info!("teacher epoch {epoch}: loss {mean:.4}, val acc {:.3}", ev.accuracy);
        if ev.accuracy > best.0 {
            best = (ev.accuracy, teacher.clone());
        }
    }
    let (val_accuracy, mut teacher) = best;
    teacher.freeze();
    let under_trained = val_accuracy < cfg.accuracy_floor;
    if under_trained {
        log::warn!(
            "teacher is under-trained: clean validation accuracy {val_accuracy:.3} < floor {:.3}",
            cfg.accuracy_floor
        );
    }
    Ok(TeacherRun {
        teacher,
        record,
        val_accuracy,
        under_trained,
    })
}
