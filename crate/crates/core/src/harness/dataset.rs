use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::render::{render, FAMILIES};
use crate::error::{Error, Result};
use crate::rng::{derive_seed, fnv1a64, generator, mix64};
use crate::sensor::RgbImage;
use crate::training::LabeledImage;

pub const MANIFEST_FILE: &str = "manifest.json";
pub const DEFAULT_SPLIT_SEED: u64 = 0x5eed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
}

/// Split ratios `(train, val, test)`.
pub const SPLIT_RATIOS: (f64, f64, f64) = (0.7, 0.1, 0.2);

/// Assign a file to a split from its name alone.
pub fn assign_split(name: &str, split_seed: u64) -> Split {
    let u = (mix64(fnv1a64(name.as_bytes()) ^ mix64(split_seed)) >> 11) as f64 / (1u64 << 53) as f64;
    if u < SPLIT_RATIOS.0 {
        Split::Train
    } else if u < SPLIT_RATIOS.0 + SPLIT_RATIOS.1 {
        Split::Val
    } else {
        Split::Test
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    /// Path relative to the manifest root, `class/file.ppm`.
    pub file: String,
    pub label: usize,
    pub split: Split,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub root: PathBuf,
    pub classes: Vec<String>,
    pub split_seed: u64,
    pub entries: Vec<ManifestEntry>,
}

/// Loaded images grouped by split.
#[derive(Debug, Clone, Default)]
pub struct Splits {
    pub train: Vec<LabeledImage>,
    pub val: Vec<LabeledImage>,
    pub test: Vec<LabeledImage>,
}

impl DatasetManifest {
    fn from_files(root: &Path, classes: Vec<String>, files: Vec<(String, usize)>, split_seed: u64) -> Self {
        let entries = files
            .into_iter()
            .map(|(file, label)| ManifestEntry {
                split: assign_split(&file, split_seed),
                file,
                label,
            })
            .collect();
        Self {
            root: root.to_path_buf(),
            classes,
            split_seed,
            entries,
        }
    }

    pub fn files_of(&self, label: usize) -> impl Iterator<Item = &str> {
        self.entries
            .iter()
            .filter(move |e| e.label == label)
            .map(|e| e.file.as_str())
    }

    pub fn split(&self, split: Split) -> impl Iterator<Item = &ManifestEntry> {
        self.entries.iter().filter(move |e| e.split == split)
    }

    pub fn split_counts(&self) -> [usize; 3] {
        let mut n = [0; 3];
        for e in &self.entries {
            n[e.split as usize] += 1;
        }
        n
    }

    pub fn n_classes(&self) -> usize {
        self.classes.len()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("manifest serializes")
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_json()).map_err(|e| Error::io(path, e))
    }

    /// Load a manifest; a relative `root` resolves against the file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut m: Self = serde_json::from_str(&text).map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
        if m.root.is_relative() {
            m.root = path.parent().unwrap_or(Path::new(".")).join(&m.root);
        }
        Ok(m)
    }

    /// Load from a manifest file or a directory containing one.
    pub fn open(path: &Path) -> Result<Self> {
        if path.is_dir() {
            Self::load(&path.join(MANIFEST_FILE))
        } else {
            Self::load(path)
        }
    }

    pub fn load_images(&self) -> Result<Splits> {
        let mut out = Splits::default();
        for e in &self.entries {
            let image = RgbImage::read_ppm(&self.root.join(&e.file))?;
            let item = LabeledImage {
                name: e.file.clone(),
                image,
                label: e.label,
            };
            match e.split {
                Split::Train => out.train.push(item),
                Split::Val => out.val.push(item),
                Split::Test => out.test.push(item),
            }
        }
        if out.train.is_empty() || out.val.is_empty() || out.test.is_empty() {
            return Err(Error::Data(format!(
                "dataset at {} has an empty split ({} / {} / {})",
                self.root.display(),
                out.train.len(),
                out.val.len(),
                out.test.len()
            )));
        }
        Ok(out)
    }
}

/// Render the synthetic corpus in memory, in manifest order.
pub fn synthetic_images(
    n_classes: usize,
    per_class: usize,
    image_size: usize,
    seed: u64,
) -> Result<Vec<(String, usize, RgbImage)>> {
    if n_classes < 2 || n_classes > FAMILIES.len() {
        return Err(Error::InvalidParameter(format!(
            "n_classes must be in 2..={}, got {n_classes}",
            FAMILIES.len()
        )));
    }
    if image_size < 8 || image_size % 2 != 0 {
        return Err(Error::InvalidParameter(format!(
            "image size must be even and >= 8, got {image_size}"
        )));
    }
    let mut out = Vec::with_capacity(n_classes * per_class);
    for (label, family) in FAMILIES.iter().take(n_classes).enumerate() {
        for i in 0..per_class {
            let mut rng = generator(derive_seed(seed, &[label as u64, i as u64]));
            out.push((
                format!("{family}/{family}_{i:04}.ppm"),
                label,
                render(label, image_size, &mut rng)?,
            ));
        }
    }
    Ok(out)
}

/// Write the synthetic corpus as PPM files plus `manifest.json` under `out_dir`.
pub fn gen_synthetic_dataset(
    out_dir: &Path,
    n_classes: usize,
    per_class: usize,
    image_size: usize,
    seed: u64,
) -> Result<DatasetManifest> {
    let images = synthetic_images(n_classes, per_class, image_size, seed)?;
    for family in FAMILIES.iter().take(n_classes) {
        let dir = out_dir.join(family);
        fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    }
    let mut files = Vec::with_capacity(images.len());
    for (name, label, img) in &images {
        img.write_ppm(&out_dir.join(name))?;
        files.push((name.clone(), *label));
    }
    let classes = FAMILIES.iter().take(n_classes).map(|s| s.to_string()).collect();
    let mut manifest = DatasetManifest::from_files(Path::new("."), classes, files, DEFAULT_SPLIT_SEED);
    manifest.save(&out_dir.join(MANIFEST_FILE))?;
    manifest.root = out_dir.to_path_buf();
    Ok(manifest)
}

/// In-memory synthetic splits, identical to loading a generated corpus.
pub fn synthetic_splits(n_classes: usize, per_class: usize, image_size: usize, seed: u64) -> Result<Splits> {
    let mut out = Splits::default();
    for (name, label, image) in synthetic_images(n_classes, per_class, image_size, seed)? {
        let split = assign_split(&name, DEFAULT_SPLIT_SEED);
        // PPM storage quantizes to 8 bits; mirror that so both paths agree.
        let image = RgbImage::new(
            image.width(),
            image.height(),
            image.data().iter().map(|v| (v * 255.0).round() / 255.0).collect(),
        )?;
        let item = LabeledImage { name, image, label };
        match split {
            Split::Train => out.train.push(item),
            Split::Val => out.val.push(item),
            Split::Test => out.test.push(item),
        }
    }
    Ok(out)
}

/// Build a manifest from `root/<class>/<file>.ppm`. Class order is sorted by
/// directory name; non-PPM files are skipped with a warning.
pub fn ingest_folder(root: &Path) -> Result<DatasetManifest> {
    ingest_folder_with_seed(root, DEFAULT_SPLIT_SEED)
}

pub fn ingest_folder_with_seed(root: &Path, split_seed: u64) -> Result<DatasetManifest> {
    let mut classes: BTreeMap<String, Vec<String>> = BTreeMap::new();
    let dirs = fs::read_dir(root).map_err(|e| Error::io(root, e))?;
    for d in dirs {
        let d = d.map_err(|e| Error::io(root, e))?;
        let path = d.path();
        if !path.is_dir() {
            continue;
        }
        let class = d.file_name().to_string_lossy().into_owned();
        let mut files = Vec::new();
        for f in fs::read_dir(&path).map_err(|e| Error::io(&path, e))? {
            let f = f.map_err(|e| Error::io(&path, e))?;
            let name = f.file_name().to_string_lossy().into_owned();
            let is_ppm = Path::new(&name)
                .extension()
                .is_some_and(|x| x.eq_ignore_ascii_case("ppm"));
            if !is_ppm || !f.path().is_file() {
                log::warn!("skipping non-PPM file {}", f.path().display());
                continue;
            }
            files.push(format!("{class}/{name}"));
        }
        if files.is_empty() {
            return Err(Error::Data(format!(
                "class directory {} has no PPM images",
                path.display()
            )));
        }
        files.sort();
        classes.insert(class, files);
    }
    if classes.len() < 2 {
        return Err(Error::Data(format!(
            "{} needs at least two class directories",
            root.display()
        )));
    }
    let names: Vec<String> = classes.keys().cloned().collect();
    let files = classes
        .into_values()
        .enumerate()
        .flat_map(|(label, fs)| fs.into_iter().map(move |f| (f, label)))
        .collect();
    Ok(DatasetManifest::from_files(root, names, files, split_seed))
}
