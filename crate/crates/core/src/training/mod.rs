//! Teacher pre-training, the student-teacher protocol and its baselines.
//!
//! Every protocol optimizes some mix of three terms on a batch:
//!
//! ```text
//! total = w_ce * CE(logits, y) + w_lp * Lp(student taps, teacher taps) + w_mse * MSE(entrance(x_raw), x_rgb)
//! ```
//!
//! | protocol          | w_ce | w_lp   | w_mse | trainable            |
//! |-------------------|------|--------|-------|----------------------|
//! | StudentTeacher    | 1    | lambda | 0     | entrance, classifier |
//! | FineTune          | 1    | 0      | 0     | entrance, classifier |
//! | Restoration       | 1    | 1      | 1     | entrance             |
//! | VanillaPretrained | 0    | 0      | 1     | entrance             |
//!
//! Teacher features always come from clean RGB through the frozen teacher.

mod data;
mod diagnostic;
mod evaluate;
mod losses;
mod protocol;
mod record;
mod student;
mod teacher;

pub use data::{fixed_frames, LabeledImage, NoisyDataset, FRAME_TAG_TEST, FRAME_TAG_TRAIN, FRAME_TAG_VAL};
pub use diagnostic::{perceptual_diagnostic, teacher_perceptual, DiagnosticRow};
pub use evaluate::{evaluate, score_logits, Evaluation, Predictor};
pub use losses::{combined_loss, perceptual_loss, perceptual_loss_value, LossParts};
pub use protocol::{LossWeights, OptimizerSettings, Protocol, ProtocolConfig, DEFAULT_LAMBDA, DEFAULT_STUDENT_TAPS};
pub use record::{EpochStats, StepLog, TrainRecord, TRAIN_RECORD_HEADER};
pub use student::{train_student, StudentRun};
pub use teacher::{train_teacher, TeacherConfig, TeacherRun};
