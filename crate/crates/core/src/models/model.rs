use std::collections::BTreeMap;
use std::path::Path;

use super::classifier::{Classifier, ClassifierKind, ClassifierSpec};
use super::entrance::{Entrance, EntranceKind, InputLayout};
use crate::autodiff::{read_qck, write_qck, Graph, ParamStore, Tensor, Var};
use crate::error::{Error, Result};
use crate::rng;
use crate::sensor::RawFrame;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StudentSpec {
    pub entrance: EntranceKind,
    pub layout: InputLayout,
    pub classifier: ClassifierSpec,
}

impl StudentSpec {
    pub fn new(entrance: EntranceKind, classifier: ClassifierSpec) -> Self {
        Self {
            entrance,
            layout: InputLayout::Mosaic,
            classifier,
        }
    }
}

/// Entrance plus classifier, fed with raw frames.
#[derive(Debug, Clone)]
pub struct Student {
    pub spec: StudentSpec,
    pub store: ParamStore,
    pub entrance: Entrance,
    pub classifier: Classifier,
    pub seed: u64,
}

/// Classifier alone, fed with clean RGB.
#[derive(Debug, Clone)]
pub struct Teacher {
    pub store: ParamStore,
    pub classifier: Classifier,
    pub seed: u64,
}

/// Values produced by one student forward pass.
#[derive(Debug, Clone)]
pub struct StudentOutput {
    pub rgb: Var,
    pub logits: Var,
    pub taps: Vec<Var>,
}

fn prefixed_checksum(store: &ParamStore, prefix: &str) -> u64 {
    let mut bytes = Vec::new();
    for p in store.iter().filter(|p| p.name.starts_with(prefix)) {
        bytes.extend_from_slice(p.name.as_bytes());
        for v in p.value.data() {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
    }
    rng::fnv1a64(&bytes)
}

impl Student {
    pub fn build(spec: StudentSpec, seed: u64) -> Result<Self> {
        spec.classifier.validate()?;
        let mut store = ParamStore::new();
        let mut g = rng::generator(rng::derive_seed(seed, &[0x5757]));
        let entrance = Entrance::new(spec.entrance, spec.layout, &mut store, &mut g);
        let classifier = Classifier::new(spec.classifier.clone(), &mut store, &mut g)?;
        Ok(Self {
            spec,
            store,
            entrance,
            classifier,
            seed,
        })
    }

    /// Logits and tap features for `x` in the input layout.
    pub fn forward_with_taps(&self, g: &mut Graph, x: Var) -> Result<(Var, Vec<Var>)> {
        let out = self.forward(g, x)?;
        Ok((out.logits, out.taps))
    }

    pub fn forward(&self, g: &mut Graph, x: Var) -> Result<StudentOutput> {
        let rgb = self.entrance.forward(g, &self.store, x)?;
        let (logits, taps) = self.classifier.forward(g, &self.store, rgb)?;
        Ok(StudentOutput { rgb, logits, taps })
    }

    pub fn checksum(&self) -> u64 {
        self.store.checksum()
    }

    pub fn classifier_checksum(&self) -> u64 {
        prefixed_checksum(&self.store, "classifier.")
    }

    pub fn entrance_checksum(&self) -> u64 {
        prefixed_checksum(&self.store, "entrance.")
    }

    pub fn freeze(&mut self) {
        self.store.freeze();
    }

    /// Copy the teacher's classifier weights into this student.
    pub fn load_classifier_from(&mut self, teacher: &Teacher) -> Result<()> {
        let mut theirs = teacher.classifier.spec.clone();
        theirs.tap_layers = self.classifier.spec.tap_layers.clone();
        if theirs != self.classifier.spec {
            return Err(Error::Shape(
                "teacher and student classifiers have different architectures".into(),
            ));
        }
        for p in teacher.store.iter() {
            let id = self
                .store
                .find(&p.name)
                .ok_or_else(|| Error::Format(format!("student lacks {}", p.name)))?;
            self.store.get_mut(id).value = p.value.clone();
        }
        Ok(())
    }

    /// Stop gradients into every classifier parameter.
    pub fn freeze_classifier(&mut self) {
        let ids: Vec<_> = self
            .store
            .iter()
            .enumerate()
            .filter(|(_, p)| p.name.starts_with("classifier."))
            .map(|(i, _)| crate::autodiff::ParamId(i))
            .collect();
        for id in ids {
            self.store.set_requires_grad(id, false);
        }
    }

    /// Network input for a batch of raw frames.
    pub fn input_tensor(&self, frames: &[&RawFrame]) -> Result<Tensor> {
        frames_to_tensor(frames, self.spec.layout)
    }

    pub fn manifest(&self) -> ModelManifest {
        ModelManifest::from_parts(ModelRole::Student, Some(&self.spec), &self.classifier.spec, self.seed)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        save_model(path, &self.manifest(), &self.store)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let (manifest, tensors) = load_model(path)?;
        if manifest.role != ModelRole::Student {
            return Err(Error::Format(format!("{} is not a student checkpoint", path.display())));
        }
        let spec = manifest.student_spec()?;
        let mut s = Student::build(spec, manifest.seed)?;
        s.store.load_named(&tensors)?;
        Ok(s)
    }
}

impl Teacher {
    pub fn build(spec: ClassifierSpec, seed: u64) -> Result<Self> {
        let mut store = ParamStore::new();
        let mut g = rng::generator(rng::derive_seed(seed, &[0x7EAC]));
        let classifier = Classifier::new(spec, &mut store, &mut g)?;
        Ok(Self {
            store,
            classifier,
            seed,
        })
    }

    pub fn forward_with_taps(&self, g: &mut Graph, x: Var) -> Result<(Var, Vec<Var>)> {
        self.classifier.forward(g, &self.store, x)
    }

    pub fn freeze(&mut self) {
        self.store.freeze();
    }

    pub fn is_frozen(&self) -> bool {
        self.store.is_frozen()
    }

    pub fn checksum(&self) -> u64 {
        self.store.checksum()
    }

    pub fn manifest(&self) -> ModelManifest {
        ModelManifest::from_parts(ModelRole::Teacher, None, &self.classifier.spec, self.seed)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        save_model(path, &self.manifest(), &self.store)
    }

    /// Load a teacher checkpoint; the result is frozen.
    pub fn load(path: &Path) -> Result<Self> {
        let (manifest, tensors) = load_model(path)?;
        if manifest.role != ModelRole::Teacher {
            return Err(Error::Format(format!("{} is not a teacher checkpoint", path.display())));
        }
        let mut t = Teacher::build(manifest.classifier_spec()?, manifest.seed)?;
        t.store.load_named(&tensors)?;
        t.freeze();
        Ok(t)
    }
}

/// Pack a single-channel RGGB mosaic into four half-resolution planes
/// ordered R, G (even row), G (odd row), B.
pub fn pack_rggb(mosaic: &[f32], width: usize, height: usize) -> Vec<f32> {
    let (w2, h2) = (width / 2, height / 2);
    let plane = w2 * h2;
    let mut out = vec![0.0f32; 4 * plane];
    for r in 0..h2 {
        for c in 0..w2 {
            let i = r * w2 + c;
            out[i] = mosaic[2 * r * width + 2 * c];
            out[plane + i] = mosaic[2 * r * width + 2 * c + 1];
            out[2 * plane + i] = mosaic[(2 * r + 1) * width + 2 * c];
            out[3 * plane + i] = mosaic[(2 * r + 1) * width + 2 * c + 1];
        }
    }
    out
}

/// Counts normalized by `L`, stacked into an `N x C x H x W` tensor.
pub fn frames_to_tensor(frames: &[&RawFrame], layout: InputLayout) -> Result<Tensor> {
    let first = frames
        .first()
        .ok_or_else(|| Error::InvalidParameter("empty frame batch".into()))?;
    let (w, h) = (first.width, first.height);
    let mut data = Vec::with_capacity(frames.len() * w * h);
    for f in frames {
        if (f.width, f.height) != (w, h) {
            return Err(Error::Dimension("frames in a batch differ in size".into()));
        }
        let norm = f.normalized();
        match layout {
            InputLayout::Mosaic => data.extend_from_slice(&norm),
            InputLayout::PackedRggb => data.extend(pack_rggb(&norm, w, h)),
        }
    }
    let shape = match layout {
        InputLayout::Mosaic => vec![frames.len(), 1, h, w],
        InputLayout::PackedRggb => vec![frames.len(), 4, h / 2, w / 2],
    };
    Tensor::new(shape, data)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelRole {
    Teacher,
    Student,
}

/// Text header stored in front of a model's `QCK1` payload.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModelManifest {
    pub role: ModelRole,
    pub fields: BTreeMap<String, String>,
    pub seed: u64,
}

const MODEL_MAGIC: &str = "QISMODEL 1";

impl ModelManifest {
    fn from_parts(role: ModelRole, student: Option<&StudentSpec>, c: &ClassifierSpec, seed: u64) -> Self {
        let join = |v: &[usize]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",");
        let mut fields = BTreeMap::new();
        fields.insert("classifier".into(), c.kind.as_str().into());
        fields.insert("widths".into(), join(&c.widths));
        fields.insert("hidden".into(), c.hidden.to_string());
        fields.insert("n_classes".into(), c.n_classes.to_string());
        fields.insert("image_size".into(), format!("{}x{}", c.image_size.0, c.image_size.1));
        fields.insert("tap_layers".into(), join(&c.tap_layers));
        if let Some(s) = student {
            fields.insert("entrance".into(), s.entrance.as_str().into());
            fields.insert("input_layout".into(), s.layout.as_str().into());
        }
        Self { role, fields, seed }
    }

    fn field(&self, key: &str) -> Result<&str> {
        self.fields
            .get(key)
            .map(String::as_str)
            .ok_or_else(|| Error::Format(format!("model manifest lacks {key}")))
    }

    pub fn classifier_spec(&self) -> Result<ClassifierSpec> {
        let bad = |k: &str| Error::Format(format!("model manifest: bad {k}"));
        let list = |k: &str| -> Result<Vec<usize>> {
            let v = self.field(k)?;
            if v.is_empty() {
                return Ok(Vec::new());
            }
            v.split(',').map(|x| x.trim().parse().map_err(|_| bad(k))).collect()
        };
        let kind: ClassifierKind = self.field("classifier")?.parse()?;
        let (h, w) = self
            .field("image_size")?
            .split_once('x')
            .ok_or_else(|| bad("image_size"))?;
        let image_size = (
            h.parse().map_err(|_| bad("image_size"))?,
            w.parse().map_err(|_| bad("image_size"))?,
        );
        let n_classes = self.field("n_classes")?.parse().map_err(|_| bad("n_classes"))?;
        let hidden = self.field("hidden")?.parse().map_err(|_| bad("hidden"))?;
        let spec = ClassifierSpec::new(kind, n_classes, image_size)
            .with_widths(list("widths")?, hidden)
            .with_taps(list("tap_layers")?);
        spec.validate()?;
        Ok(spec)
    }

    pub fn student_spec(&self) -> Result<StudentSpec> {
        Ok(StudentSpec {
            entrance: self.field("entrance")?.parse()?,
            layout: self.field("input_layout")?.parse()?,
            classifier: self.classifier_spec()?,
        })
    }

    fn to_text(&self) -> String {
        let mut s = format!(
            "{MODEL_MAGIC}\nrole = {}\n",
            match self.role {
                ModelRole::Teacher => "teacher",
                ModelRole::Student => "student",
            }
        );
        for (k, v) in &self.fields {
            s.push_str(&format!("{k} = {v}\n"));
        }
        s.push_str(&format!("seed = {}\n\n", self.seed));
        s
    }
}

/// Write the manifest header, a blank line, then the `QCK1` payload.
pub fn save_model(path: &Path, manifest: &ModelManifest, store: &ParamStore) -> Result<()> {
    let mut bytes = manifest.to_text().into_bytes();
    bytes.extend(write_qck(&store.named_tensors())?);
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn load_model(path: &Path) -> Result<(ModelManifest, Vec<(String, Tensor)>)> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let split = bytes
        .windows(2)
        .position(|w| w == b"\n\n")
        .ok_or_else(|| Error::Format(format!("{}: no manifest header", path.display())))?;
    let text = std::str::from_utf8(&bytes[..split]).map_err(|_| Error::Format("model manifest is not UTF-8".into()))?;
    let mut lines = text.lines();
    if lines.next() != Some(MODEL_MAGIC) {
        return Err(Error::Format(format!("{}: not a model checkpoint", path.display())));
    }
    let mut fields = BTreeMap::new();
    for line in lines {
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Format(format!("bad manifest line {line:?}")))?;
        fields.insert(k.trim().to_string(), v.trim().to_string());
    }
    let role = match fields.remove("role").as_deref() {
        Some("teacher") => ModelRole::Teacher,
        Some("student") => ModelRole::Student,
        other => return Err(Error::Format(format!("bad model role {other:?}"))),
    };
    let seed = fields
        .remove("seed")
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| Error::Format("manifest lacks seed".into()))?;
    let tensors = read_qck(&bytes[split + 2..])?;
    Ok((ModelManifest { role, fields, seed }, tensors))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::Tensor;

    fn small_spec() -> ClassifierSpec {
        ClassifierSpec::toy(4, (8, 8)).with_widths(vec![4, 6, 8], 16)
    }

    #[test]
    fn taps_have_constant_matching_shapes() {
        let student = Student::build(StudentSpec::new(EntranceKind::Shallow, small_spec()), 1).unwrap();
        let teacher = Teacher::build(small_spec(), 2).unwrap();
        let mut g = Graph::inference();
        let x = g.input(Tensor::full(&[2, 1, 8, 8], 0.1));
        let (logits, taps) = student.forward_with_taps(&mut g, x).unwrap();
        assert_eq!(g.shape(logits), &[2, 4]);
        assert_eq!(taps.len(), 3);
        let xr = g.input(Tensor::full(&[2, 3, 8, 8], 0.1));
        let (_, ttaps) = teacher.forward_with_taps(&mut g, xr).unwrap();
        let shapes: Vec<_> = taps.iter().map(|&t| g.shape(t).to_vec()).collect();
        let tshapes: Vec<_> = ttaps.iter().map(|&t| g.shape(t).to_vec()).collect();
        assert_eq!(shapes, tshapes);
        assert_eq!(shapes, vec![vec![2, 4 * 16], vec![2, 6 * 4], vec![2, 8]]);
    }

    #[test]
    fn tap_out_of_range() {
        let spec = small_spec().with_taps(vec![2, 40]);
        assert!(Teacher::build(spec, 0).is_err());
    }

    #[test]
    fn zero_input_is_deterministic() {
        let t = Teacher::build(small_spec(), 3).unwrap();
        let run = || {
            let mut g = Graph::inference();
            let x = g.input(Tensor::zeros(&[1, 3, 8, 8]));
            let (l, _) = t.forward_with_taps(&mut g, x).unwrap();
            g.value(l).clone()
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn checksum_tracks_seed() {
        let a = Teacher::build(small_spec(), 5).unwrap();
        let b = Teacher::build(small_spec(), 5).unwrap();
        assert_eq!(a.checksum(), b.checksum());
        let seen: std::collections::HashSet<u64> = (0..100)
            .map(|s| Teacher::build(small_spec(), s).unwrap().checksum())
            .collect();
        assert_eq!(seen.len(), 100);
    }

    #[test]
    fn entrance_preserves_spatial_dims() {
        for kind in [EntranceKind::Shallow, EntranceKind::Deep] {
            for layout in [InputLayout::Mosaic, InputLayout::PackedRggb] {
                let mut spec = StudentSpec::new(kind, ClassifierSpec::toy(3, (16, 16)).with_widths(vec![4, 4, 4], 8));
                spec.layout = layout;
                let s = Student::build(spec, 0).unwrap();
                let mut g = Graph::inference();
                let shape = match layout {
                    InputLayout::Mosaic => [1, 1, 16, 16],
                    InputLayout::PackedRggb => [1, 4, 8, 8],
                };
                let x = g.input(Tensor::zeros(&shape));
                let out = s.forward(&mut g, x).unwrap();
                assert_eq!(g.shape(out.rgb), &[1, 3, 16, 16], "{kind:?} {layout:?}");
            }
        }
    }

    #[test]
    fn deep_entrance_layer_count() {
        let s = Student::build(StudentSpec::new(EntranceKind::Deep, small_spec()), 0).unwrap();
        assert_eq!(s.entrance.depth(), 18);
    }

    #[test]
    fn pack_rggb_layout() {
        let m: Vec<f32> = (0..16).map(|v| v as f32).collect();
        let p = pack_rggb(&m, 4, 4);
        assert_eq!(&p[0..4], &[0.0, 2.0, 8.0, 10.0]);
        assert_eq!(&p[4..8], &[1.0, 3.0, 9.0, 11.0]);
        assert_eq!(&p[8..12], &[4.0, 6.0, 12.0, 14.0]);
        assert_eq!(&p[12..16], &[5.0, 7.0, 13.0, 15.0]);
    }

    #[test]
    fn save_load_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let s = Student::build(
            StudentSpec::new(EntranceKind::Shallow, small_spec().with_taps(vec![5, 2])),
            9,
        )
        .unwrap();
        let path = dir.path().join("s.qck");
        s.save(&path).unwrap();
        let back = Student::load(&path).unwrap();
        assert_eq!(back.checksum(), s.checksum());
        assert_eq!(back.spec, s.spec);
        assert!(Teacher::load(&path).is_err());

        let t = Teacher::build(small_spec(), 4).unwrap();
        let tp = dir.path().join("t.qck");
        t.save(&tp).unwrap();
        let tb = Teacher::load(&tp).unwrap();
        assert!(tb.is_frozen());
        assert_eq!(tb.checksum(), t.checksum());
    }

    #[test]
    fn teacher_weights_transfer_to_student() {
        let t = Teacher::build(small_spec(), 4).unwrap();
        let mut s = Student::build(StudentSpec::new(EntranceKind::Shallow, small_spec()), 1).unwrap();
        s.load_classifier_from(&t).unwrap();
        assert_eq!(s.classifier_checksum(), prefixed_checksum(&t.store, "classifier."));
    }
}
