use std::fmt::Write as _;

use super::protocol::LossWeights;

pub const TRAIN_RECORD_HEADER: &str = "epoch,train_loss,val_loss,val_acc,ce_component,lp_component,seconds";

/// Loss pieces of one optimizer step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepLog {
    pub step: usize,
    pub total: f32,
    pub ce: f32,
    pub lp: f32,
    pub mse: f32,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochStats {
    pub epoch: usize,
    pub train_loss: f64,
    /// Cross-entropy on the validation split.
    pub val_loss: f64,
    pub val_acc: f64,
    pub ce_component: f64,
    pub lp_component: f64,
    pub mse_component: f64,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainRecord {
    pub weights: LossWeights,
    pub epochs: Vec<EpochStats>,
    pub steps: Vec<StepLog>,
}

impl TrainRecord {
    pub fn new(weights: LossWeights) -> Self {
        Self {
            weights,
            epochs: Vec::new(),
            steps: Vec::new(),
        }
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from(TRAIN_RECORD_HEADER);
        s.push('\n');
        for e in &self.epochs {
            let _ = writeln!(
                s,
                "{},{:.6},{:.6},{:.6},{:.6},{:.6},{:.3}",
                e.epoch, e.train_loss, e.val_loss, e.val_acc, e.ce_component, e.lp_component, e.seconds
            );
        }
        s
    }

    /// Equality of everything except wall-clock time.
    pub fn same_trajectory(&self, other: &TrainRecord) -> bool {
        let strip = |r: &TrainRecord| -> Vec<EpochStats> {
            r.epochs.iter().map(|e| EpochStats { seconds: 0.0, ..*e }).collect()
        };
        self.weights == other.weights && self.steps == other.steps && strip(self) == strip(other)
    }

    /// Epoch (1-based) with the lowest validation loss; ties go to the
    /// earliest.
    pub fn val_loss_argmin(&self) -> Option<usize> {
        self.epochs
            .iter()
            .fold(None::<&EpochStats>, |best, e| match best {
                Some(b) if b.val_loss <= e.val_loss => Some(b),
                _ => Some(e),
            })
            .map(|e| e.epoch)
    }

    /// Largest relative gap `|total - (w_ce ce + w_lp lp + w_mse mse)|` over
    /// all logged steps.
    pub fn max_decomposition_error(&self) -> f64 {
        let w = self.weights;
        self.steps
            .iter()
            .map(|s| {
                let recomposed = w.ce as f64 * s.ce as f64 + w.lp as f64 * s.lp as f64 + w.mse as f64 * s.mse as f64;
                (s.total as f64 - recomposed).abs() / (s.total as f64).abs().max(1e-12)
            })
            .fold(0.0, f64::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn stats(epoch: usize, val_loss: f64) -> EpochStats {
        EpochStats {
            epoch,
            train_loss: 1.0,
            val_loss,
            val_acc: 0.5,
            ce_component: 1.0,
            lp_component: 0.0,
            mse_component: 0.0,
            seconds: epoch as f64,
        }
    }

    #[test]
    fn csv_header_and_rows() {
        let mut r = TrainRecord::new(LossWeights {
            ce: 1.0,
            lp: 0.0,
            mse: 0.0,
        });
        r.epochs.push(stats(1, 0.75));
        let csv = r.to_csv();
        let mut lines = csv.lines();
        assert_eq!(lines.next().unwrap(), TRAIN_RECORD_HEADER);
        assert_eq!(
            lines.next().unwrap(),
            "1,1.000000,0.750000,0.500000,1.000000,0.000000,1.000"
        );
    }

    #[test]
    fn argmin_prefers_earliest() {
        let mut r = TrainRecord::new(LossWeights {
            ce: 1.0,
            lp: 0.0,
            mse: 0.0,
        });
        for (e, v) in [(1, 0.9), (2, 0.5), (3, 0.5), (4, 0.7)] {
            r.epochs.push(stats(e, v));
        }
        assert_eq!(r.val_loss_argmin(), Some(2));
        let mut other = r.clone();
        other.epochs[0].seconds = 99.0;
        assert!(r.same_trajectory(&other));
    }
}
