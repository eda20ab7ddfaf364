use crate::autodiff::Optimizer;
use crate::error::{Error, Result};
use crate::models::{EntranceKind, InputLayout};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Protocol {
    StudentTeacher,
    FineTune,
    Restoration,
    VanillaPretrained,
}

impl Protocol {
    pub fn as_str(self) -> &'static str {
        match self {
            Protocol::StudentTeacher => "student-teacher",
            Protocol::FineTune => "fine-tune",
            Protocol::Restoration => "restoration",
            Protocol::VanillaPretrained => "vanilla",
        }
    }

    /// Whether the protocol cannot run without a trained teacher.
    pub fn needs_teacher(self) -> bool {
        !matches!(self, Protocol::FineTune)
    }

    /// Whether the classifier is copied from the teacher and kept frozen.
    pub fn freezes_classifier(self) -> bool {
        matches!(self, Protocol::Restoration | Protocol::VanillaPretrained)
    }
}

impl std::str::FromStr for Protocol {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('_', "-").as_str() {
            "student-teacher" | "st" | "ours" => Ok(Protocol::StudentTeacher),
            "fine-tune" | "finetune" | "ft" | "dirty-pixels" => Ok(Protocol::FineTune),
            "restoration" | "restore" => Ok(Protocol::Restoration),
            "vanilla" | "vanilla-pretrained" => Ok(Protocol::VanillaPretrained),
            o => Err(Error::InvalidParameter(format!("unknown protocol {o:?}"))),
        }
    }
}

impl std::fmt::Display for Protocol {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OptimizerSettings {
    Adam { lr: f32 },
    Sgd { lr: f32, momentum: f32 },
}

impl OptimizerSettings {
    pub fn build(&self) -> Optimizer {
        match *self {
            OptimizerSettings::Adam { lr } => Optimizer::adam(lr),
            OptimizerSettings::Sgd { lr, momentum } => Optimizer::sgd(lr, momentum),
        }
    }
}

impl Default for OptimizerSettings {
    fn default() -> Self {
        OptimizerSettings::Adam { lr: 1e-3 }
    }
}

/// Loss-term weights a protocol actually trains with.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossWeights {
    pub ce: f32,
    pub lp: f32,
    pub mse: f32,
}

/// Default perceptual weight, tuned at 0.25 ppp on a separate draw of the
/// synthetic set.
pub const DEFAULT_LAMBDA: f32 = 1.0;

/// Default student tap: the first block's pooled output. Deeper taps carry
/// too little spatial detail to guide a denoising entrance at desk scale.
pub const DEFAULT_STUDENT_TAPS: [usize; 1] = [2];

#[derive(Debug, Clone, PartialEq)]
pub struct ProtocolConfig {
    pub protocol: Protocol,
    pub entrance: EntranceKind,
    pub layout: InputLayout,
    /// Perceptual weight for [`Protocol::StudentTeacher`].
    pub lambda: f32,
    pub epochs: usize,
    pub batch_size: usize,
    pub optimizer: OptimizerSettings,
    pub seed: u64,
    /// Overrides the classifier's default tap layers when set.
    pub tap_layers: Option<Vec<usize>>,
    /// Start the student classifier from the teacher's clean-image weights
    /// when a teacher is supplied, instead of a fresh initialization.
    pub warm_start: bool,
}

impl Default for ProtocolConfig {
    fn default() -> Self {
        Self {
            protocol: Protocol::StudentTeacher,
            entrance: EntranceKind::Shallow,
            layout: InputLayout::Mosaic,
            lambda: DEFAULT_LAMBDA,
            epochs: 12,
            batch_size: 32,
            optimizer: OptimizerSettings::default(),
            seed: 0,
            tap_layers: Some(DEFAULT_STUDENT_TAPS.to_vec()),
            warm_start: true,
        }
    }
}

impl ProtocolConfig {
    pub fn weights(&self) -> LossWeights {
        match self.protocol {
            Protocol::StudentTeacher => LossWeights {
                ce: 1.0,
                lp: self.lambda,
                mse: 0.0,
            },
            Protocol::FineTune => LossWeights {
                ce: 1.0,
                lp: 0.0,
                mse: 0.0,
            },
            Protocol::Restoration => LossWeights {
                ce: 1.0,
                lp: 1.0,
                mse: 1.0,
            },
            Protocol::VanillaPretrained => LossWeights {
                ce: 0.0,
                lp: 0.0,
                mse: 1.0,
            },
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda.is_finite() && self.lambda >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "lambda must be >= 0, got {}",
                self.lambda
            )));
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidParameter("batch size must be positive".into()));
        }
        Ok(())
    }
}
