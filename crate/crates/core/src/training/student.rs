use std::time::Instant;

use rand::seq::SliceRandom;

use super::data::NoisyDataset;
use super::evaluate::evaluate;
use super::losses::combined_loss;
use super::protocol::ProtocolConfig;
use super::record::{EpochStats, StepLog, TrainRecord};
use crate::autodiff::{Graph, Tensor};
use crate::error::{Error, Result};
use crate::models::{ClassifierSpec, Student, StudentSpec, Teacher};
use crate::rng::{derive_seed, generator};
use crate::sensor::RgbImage;

const SHUFFLE_TAG: u64 = 0x5354;
const FEATURE_BATCH: usize = 64;

#[derive(Debug, Clone)]
pub struct StudentRun {
    /// Weights of the epoch with the best validation accuracy.
    pub best: Student,
    pub best_epoch: usize,
    /// Weights after the final epoch.
    pub last: Student,
    pub record: TrainRecord,
}

/// Teacher tap features of clean images: `[image][tap] -> values`.
pub(crate) fn teacher_features(teacher: &Teacher, images: &[&RgbImage], taps: &[usize]) -> Result<Vec<Vec<Vec<f32>>>> {
    let mut out = Vec::with_capacity(images.len());
    for chunk in images.chunks(FEATURE_BATCH) {
        let mut g = Graph::inference();
        let x = g.input(super::evaluate::rgb_batch(chunk)?);
        let (_, feats) = teacher.classifier.forward_at(&mut g, &teacher.store, x, taps)?;
        for i in 0..chunk.len() {
            out.push(
                feats
                    .iter()
                    .map(|&f| {
                        let t = g.value(f);
                        let per = t.len() / chunk.len();
                        t.data()[i * per..(i + 1) * per].to_vec()
                    })
                    .collect(),
            );
        }
    }
    Ok(out)
}

/// Train a student under one protocol.
///
/// `classifier` fixes the backbone; when a teacher is given it must share the
/// same architecture. The teacher is only read: its checksum is verified
/// before returning, as is the classifier checksum for protocols that freeze
/// it.
pub fn train_student(
    data: &NoisyDataset<'_>,
    teacher: Option<&Teacher>,
    classifier: &ClassifierSpec,
    proto: &ProtocolConfig,
) -> Result<StudentRun> {
    proto.validate()?;
    if data.train.is_empty() || data.val.is_empty() {
        return Err(Error::Data(
            "student training needs non-empty train and val splits".into(),
        ));
    }
    let weights = proto.weights();
    let teacher = match (teacher, proto.protocol.needs_teacher()) {
        (None, true) => {
            return Err(Error::InvalidParameter(format!(
                "protocol {} requires a trained teacher",
                proto.protocol
            )))
        }
        (t, _) => t,
    };
    let mut cspec = classifier.clone();
    if let Some(taps) = &proto.tap_layers {
        cspec.tap_layers = taps.clone();
    }
    cspec.validate()?;
    if let Some(t) = teacher {
        let mut tspec = t.classifier.spec.clone();
        tspec.tap_layers = cspec.tap_layers.clone();
        if tspec != cspec {
            return Err(Error::Shape("teacher and student classifiers differ".into()));
        }
    }
    let taps = cspec.tap_layers.clone();
    let mut student = Student::build(
        StudentSpec {
            entrance: proto.entrance,
            layout: proto.layout,
            classifier: cspec,
        },
        proto.seed,
    )?;
    if proto.protocol.freezes_classifier() {
        let t = teacher.expect("checked above");
        student.load_classifier_from(t)?;
        student.freeze_classifier();
    } else if let (true, Some(t)) = (proto.warm_start, teacher) {
        student.load_classifier_from(t)?;
    }
    let teacher_sum = teacher.map(|t| t.checksum());
    let classifier_sum = student.classifier_checksum();

    let train_imgs: Vec<&RgbImage> = data.train.iter().map(|s| &s.image).collect();
    let feature_cache = if weights.lp > 0.0 {
        Some(teacher_features(teacher.expect("checked above"), &train_imgs, &taps)?)
    } else {
        None
    };
    let clean_cache: Option<Vec<Vec<f32>>> =
        (weights.mse > 0.0).then(|| train_imgs.iter().map(|i| i.to_planar()).collect());

    let val_frames = data.val_frames()?;
    let val_refs: Vec<_> = val_frames.iter().collect();
    let val_labels: Vec<usize> = data.val.iter().map(|s| s.label).collect();

    let mut opt = proto.optimizer.build();
    let mut record = TrainRecord::new(weights);
    let mut order: Vec<usize> = (0..data.train.len()).collect();
    let mut best: Option<(f64, usize, Student)> = None;
    let mut g = Graph::new();
    let mut step = 0usize;
    let (h, w) = (data.train[0].image.height(), data.train[0].image.width());

    for epoch in 1..=proto.epochs {
        let started = Instant::now();
        order.shuffle(&mut generator(derive_seed(proto.seed, &[SHUFFLE_TAG, epoch as u64])));
        let mut sums = [0.0f64; 4];
        let mut batches = 0usize;
        for chunk in order.chunks(proto.batch_size) {
            step += 1;
            let frames = chunk
                .iter()
                .map(|&i| data.train_frame(i, epoch, proto.seed))
                .collect::<Result<Vec<_>>>()?;
            let frame_refs: Vec<_> = frames.iter().collect();
            let labels: Vec<usize> = chunk.iter().map(|&i| data.train[i].label).collect();

            g.reset();
            let x = g.input(student.input_tensor(&frame_refs)?);
            let out = student.forward(&mut g, x)?;
            let teacher_taps = match &feature_cache {
                Some(cache) => taps
                    .iter()
                    .enumerate()
                    .map(|(j, _)| {
                        let per = cache[chunk[0]][j].len();
                        let mut v = Vec::with_capacity(per * chunk.len());
                        for &i in chunk {
                            v.extend_from_slice(&cache[i][j]);
                        }
                        Tensor::new(vec![chunk.len(), per], v).map(|t| g.input(t))
                    })
                    .collect::<Result<Vec<_>>>()?,
                None => Vec::new(),
            };
            let parts = combined_loss(&mut g, out.logits, &labels, &out.taps, &teacher_taps, weights.lp)?;
            let mut total = if weights.ce > 0.0 { Some(parts.total) } else { None };
            let mut mse_value = 0.0f32;
            if let Some(clean) = &clean_cache {
                let mut v = Vec::with_capacity(chunk.len() * 3 * h * w);
                for &i in chunk {
                    v.extend_from_slice(&clean[i]);
                }
                let target = g.input(Tensor::new(vec![chunk.len(), 3, h, w], v)?);
                let mse = g.mse(out.rgb, target)?;
                mse_value = g.value(mse).data()[0];
                let weighted = if weights.mse == 1.0 {
                    mse
                } else {
                    g.scale(mse, weights.mse)
                };
                total = Some(match total {
                    Some(t) => g.add(t, weighted)?,
                    None => weighted,
                });
            }
            let total = total.ok_or_else(|| Error::InvalidParameter("protocol has no loss terms".into()))?;
            let log = StepLog {
                step,
                total: g.value(total).data()[0],
                ce: g.value(parts.ce).data()[0],
                lp: parts.lp.map_or(0.0, |v| g.value(v).data()[0]),
                mse: mse_value,
            };
            if !log.total.is_finite() {
                return Err(Error::Divergence {
                    step,
                    detail: format!("loss {} (ce {}, lp {}, mse {})", log.total, log.ce, log.lp, log.mse),
                });
            }
            student.store.zero_grad();
            g.backward(total, &mut student.store)?;
            opt.step(&mut student.store).map_err(|e| Error::Divergence {
                step,
                detail: e.to_string(),
            })?;
            record.steps.push(log);
            for (s, v) in sums.iter_mut().zip([log.total, log.ce, log.lp, log.mse]) {
                *s += v as f64;
            }
            batches += 1;
        }
        let ev = evaluate(&student, &val_refs, &val_labels)?;
        let nb = batches.max(1) as f64;
        record.epochs.push(EpochStats {
            epoch,
            train_loss: sums[0] / nb,
            val_loss: ev.mean_loss,
            val_acc: ev.accuracy,
            ce_component: sums[1] / nb,
            lp_component: sums[2] / nb,
            mse_component: sums[3] / nb,
            seconds: started.elapsed().as_secs_f64(),
        });
        log::info!(
            "{} epoch {epoch}: loss {:.4}, val loss {:.4}, val acc {:.3}",
            proto.protocol,
            sums[0] / nb,
            ev.mean_loss,
            ev.accuracy
        );
        if best.as_ref().is_none_or(|(acc, _, _)| ev.accuracy > *acc) {
            best = Some((ev.accuracy, epoch, student.clone()));
        }
    }

    if let (Some(t), Some(before)) = (teacher, teacher_sum) {
        if t.checksum() != before {
            return Err(Error::FrozenMutation(
                "teacher parameters changed during student training".into(),
            ));
        }
    }
    if proto.protocol.freezes_classifier() && student.classifier_checksum() != classifier_sum {
        return Err(Error::FrozenMutation(
            "frozen classifier changed during training".into(),
        ));
    }
    let (best_epoch, best_student) = match best {
        Some((_, e, s)) => (e, s),
        None => (0, student.clone()),
    };
    Ok(StudentRun {
        best: best_student,
        best_epoch,
        last: student,
        record,
    })
}
