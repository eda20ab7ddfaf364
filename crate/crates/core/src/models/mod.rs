//! Entrance networks, the classifier backbone shared by student and teacher,
//! and feature-tap extraction.

mod classifier;
mod entrance;
mod layers;
mod model;

pub use classifier::{Classifier, ClassifierKind, ClassifierSpec};
pub use entrance::{Entrance, EntranceKind, InputLayout};
pub use layers::{Conv, Dense};
pub use model::{load_model, pack_rggb, save_model, ModelManifest, ModelRole, Student, StudentSpec, Teacher};
