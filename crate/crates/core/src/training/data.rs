use crate::error::Result;
use crate::rng::derive_seed;
use crate::sensor::{simulate_frame, PrnuMask, RawFrame, RgbImage, SensorConfig};

/// Stream tags that keep training, validation and test noise independent.
pub const FRAME_TAG_TRAIN: u64 = 0x7472;
pub const FRAME_TAG_VAL: u64 = 0x7661;
pub const FRAME_TAG_TEST: u64 = 0x7465;

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledImage {
    pub name: String,
    pub image: RgbImage,
    pub label: usize,
}

/// Clean images plus the sensor that turns them into raw frames.
///
/// Training frames are re-sampled every epoch from a seed derived from the
/// run seed, image index and epoch. Validation frames are drawn once from
/// `eval_seed` so every protocol is scored on identical noise.
#[derive(Debug, Clone)]
pub struct NoisyDataset<'a> {
    pub train: &'a [LabeledImage],
    pub val: &'a [LabeledImage],
    /// Sensor with its gain already calibrated.
    pub sensor: SensorConfig,
    pub mask: Option<PrnuMask>,
    pub eval_seed: u64,
    pub n_classes: usize,
}

impl NoisyDataset<'_> {
    pub fn train_frame(&self, index: usize, epoch: usize, seed: u64) -> Result<RawFrame> {
        let s = derive_seed(seed, &[FRAME_TAG_TRAIN, index as u64, epoch as u64]);
        simulate_frame(&self.train[index].image, &self.sensor, self.mask.as_ref(), s)
    }

    pub fn val_frames(&self) -> Result<Vec<RawFrame>> {
        fixed_frames(
            self.val,
            &self.sensor,
            self.mask.as_ref(),
            self.eval_seed,
            FRAME_TAG_VAL,
        )
    }
}

/// One frame per image, seeded by `(seed, tag, index)`.
pub fn fixed_frames(
    images: &[LabeledImage],
    sensor: &SensorConfig,
    mask: Option<&PrnuMask>,
    seed: u64,
    tag: u64,
) -> Result<Vec<RawFrame>> {
    images
        .iter()
        .enumerate()
        .map(|(i, s)| simulate_frame(&s.image, sensor, mask, derive_seed(seed, &[tag, i as u64, 0])))
        .collect()
}
