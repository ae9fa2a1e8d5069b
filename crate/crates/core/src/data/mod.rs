//! Datasets and their quantum encodings.
//!
//! Iris (Setosa vs Versicolour) is angle-encoded into 2 qubits. MNIST 3 vs 6
//! and Fashion-MNIST dress vs shirt are reduced to 16 pixels and
//! amplitude-encoded into 4 qubits. Either way the encoded state is followed
//! by a ring of CNOTs before the searched circuit runs. Both steps are fixed,
//! so they are applied once per sample to produce the trainer's input states.

pub mod fetch;
pub mod idx;

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use num_complex::Complex64;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::simulator::{run_circuit, Circuit, GateKind, StateVector};
use crate::trainer::{DatasetSplit, LabeledDataset};

const IRIS_CSV: &str = include_str!("../../resources/iris.csv");

pub const IMAGE_SIDE: usize = 28;
pub const CROP_SIDE: usize = 24;
pub const POOL: usize = 6;
pub const POOLED_LEN: usize = (CROP_SIDE / POOL) * (CROP_SIDE / POOL);

/// Bundled desk-scale IDX cache shipped with the crate.
pub fn default_cache_dir() -> PathBuf {
    PathBuf::from(concat!(env!("CARGO_MANIFEST_DIR"), "/resources/desk-cache"))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Source {
    Iris,
    Mnist,
    Fashion,
}

impl Source {
    pub const ALL: [Source; 3] = [Source::Iris, Source::Mnist, Source::Fashion];

    pub fn name(self) -> &'static str {
        match self {
            Source::Iris => "iris",
            Source::Mnist => "mnist",
            Source::Fashion => "fashion",
        }
    }

    /// Original class ids mapped to +1 and -1.
    pub fn classes(self) -> (u8, u8) {
        match self {
            Source::Iris => (0, 1),
            Source::Mnist | Source::Fashion => (3, 6),
        }
    }

    pub fn mode(self) -> EncodingMode {
        match self {
            Source::Iris => EncodingMode::Angle,
            Source::Mnist | Source::Fashion => EncodingMode::Amplitude,
        }
    }

    pub fn n_qubits(self) -> usize {
        match self.mode() {
            EncodingMode::Angle => 2,
            EncodingMode::Amplitude => 4,
        }
    }
}

impl fmt::Display for Source {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Source {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "iris" => Ok(Source::Iris),
            "mnist" => Ok(Source::Mnist),
            "fashion" | "fashion-mnist" | "fashion_mnist" => Ok(Source::Fashion),
            other => Err(Error::Config(format!(
                "unknown dataset `{other}` (expected iris, mnist or fashion)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Samples {
    Features(Vec<Vec<f64>>),
    Images(Vec<Vec<u8>>),
}

impl Samples {
    pub fn len(&self) -> usize {
        match self {
            Samples::Features(v) => v.len(),
            Samples::Images(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn select(&self, idx: &[usize]) -> Samples {
        match self {
            Samples::Features(v) => Samples::Features(idx.iter().map(|&i| v[i].clone()).collect()),
            Samples::Images(v) => Samples::Images(idx.iter().map(|&i| v[i].clone()).collect()),
        }
    }
}

/// Samples of the two target classes with their original class ids and ±1
/// labels.
#[derive(Debug, Clone, PartialEq)]
pub struct RawDataset {
    pub source: Source,
    pub samples: Samples,
    pub class_ids: Vec<u8>,
    pub labels: Vec<i8>,
}

impl RawDataset {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn select(&self, idx: &[usize]) -> RawDataset {
        RawDataset {
            source: self.source,
            samples: self.samples.select(idx),
            class_ids: idx.iter().map(|&i| self.class_ids[i]).collect(),
            labels: idx.iter().map(|&i| self.labels[i]).collect(),
        }
    }
}

fn label_for(source: Source, class_id: u8) -> Option<i8> {
    let (pos, neg) = source.classes();
    if class_id == pos {
        Some(1)
    } else if class_id == neg {
        Some(-1)
    } else {
        None
    }
}

pub fn load_iris() -> Result<RawDataset> {
    parse_iris_csv(IRIS_CSV)
}

/// Parses a 5-column Iris table with a header row, keeping Setosa (+1) and
/// Versicolour (-1).
pub fn parse_iris_csv(text: &str) -> Result<RawDataset> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header = lines.next().ok_or(Error::Empty("iris table"))?;
    if header.split(',').count() != 5 {
        return Err(Error::Parse(format!("iris header has the wrong width: `{header}`")));
    }
    let mut features = Vec::new();
    let mut class_ids = Vec::new();
    let mut labels = Vec::new();
    for (n, line) in lines.enumerate() {
        let cols: Vec<&str> = line.split(',').map(str::trim).collect();
        if cols.len() != 5 {
            return Err(Error::Parse(format!(
                "iris row {}: expected 5 columns, got {}",
                n + 1,
                cols.len()
            )));
        }
        let class = match cols[4].trim_start_matches("Iris-").to_ascii_lowercase().as_str() {
            "setosa" => 0u8,
            "versicolor" | "versicolour" => 1,
            "virginica" => 2,
            other => return Err(Error::Parse(format!("iris row {}: unknown class `{other}`", n + 1))),
        };
        let Some(label) = label_for(Source::Iris, class) else {
            continue;
        };
        let row = cols[..4]
            .iter()
            .map(|c| {
                c.parse::<f64>()
                    .map_err(|e| Error::Parse(format!("iris row {}: `{c}`: {e}", n + 1)))
            })
            .collect::<Result<Vec<f64>>>()?;
        features.push(row);
        class_ids.push(class);
        labels.push(label);
    }
    if labels.is_empty() {
        return Err(Error::Empty("iris table"));
    }
    Ok(RawDataset {
        source: Source::Iris,
        samples: Samples::Features(features),
        class_ids,
        labels,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Split {
    Train,
    Test,
}

impl Split {
    fn prefix(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Test => "t10k",
        }
    }
}

/// Loads one split of an IDX dataset from `<cache_dir>/<source>/`, fetching
/// missing files first, and keeps the two target classes.
pub fn load_idx(source: Source, cache_dir: &Path, split: Split) -> Result<RawDataset> {
    if source == Source::Iris {
        return Err(Error::Config("iris is bundled, not an IDX dataset".into()));
    }
    let dir = fetch::source_dir(cache_dir, source);
    let images_path = dir.join(format!("{}-images-idx3-ubyte.gz", split.prefix()));
    let labels_path = dir.join(format!("{}-labels-idx1-ubyte.gz", split.prefix()));
    if !images_path.exists() || !labels_path.exists() {
        fetch::fetch(source, cache_dir)?;
    }
    fetch::verify_cache(cache_dir, source)?;
    let images = idx::read_idx_gz(&images_path, idx::IMAGES_MAGIC)?;
    let labels = idx::read_idx_gz(&labels_path, idx::LABELS_MAGIC)?;
    if images.count() != labels.count() {
        return Err(Error::Data(format!(
            "{}: {} images but {} labels",
            dir.display(),
            images.count(),
            labels.count()
        )));
    }
    if images.dims[1..] != [IMAGE_SIDE, IMAGE_SIDE] {
        return Err(Error::Data(format!(
            "{}: images are {:?}, expected {IMAGE_SIDE}x{IMAGE_SIDE}",
            images_path.display(),
            &images.dims[1..]
        )));
    }
    let mut samples = Vec::new();
    let mut class_ids = Vec::new();
    let mut out_labels = Vec::new();
    for (i, &class) in labels.data.iter().enumerate() {
        if let Some(label) = label_for(source, class) {
            samples.push(images.record(i).to_vec());
            class_ids.push(class);
            out_labels.push(label);
        }
    }
    Ok(RawDataset {
        source,
        samples: Samples::Images(samples),
        class_ids,
        labels: out_labels,
    })
}

/// Center-crops a 28x28 image to 24x24, averages 6x6 blocks and scales to
/// [0, 1], giving 16 values in row-major order.
pub fn preprocess_image(image: &[u8]) -> Result<Vec<f64>> {
    if image.len() != IMAGE_SIDE * IMAGE_SIDE {
        return Err(Error::Dimension {
            expected: IMAGE_SIDE * IMAGE_SIDE,
            actual: image.len(),
        });
    }
    let offset = (IMAGE_SIDE - CROP_SIDE) / 2;
    let cells = CROP_SIDE / POOL;
    let mut out = vec![0.0; POOLED_LEN];
    for r in 0..CROP_SIDE {
        for c in 0..CROP_SIDE {
            let px = image[(r + offset) * IMAGE_SIDE + c + offset];
            out[(r / POOL) * cells + c / POOL] += f64::from(px);
        }
    }
    let scale = 1.0 / (255.0 * (POOL * POOL) as f64);
    out.iter_mut().for_each(|v| *v *= scale);
    Ok(out)
}

/// Per-feature min-max map onto [0, π], fitted on training rows only.
#[derive(Debug, Clone, PartialEq)]
pub struct AngleScaler {
    min: Vec<f64>,
    max: Vec<f64>,
}

impl AngleScaler {
    pub fn fit(rows: &[Vec<f64>]) -> Result<Self> {
        let first = rows.first().ok_or(Error::Empty("scaler training rows"))?;
        let mut min = first.clone();
        let mut max = first.clone();
        for row in rows {
            if row.len() != min.len() {
                return Err(Error::Dimension {
                    expected: min.len(),
                    actual: row.len(),
                });
            }
            for (j, &x) in row.iter().enumerate() {
                min[j] = min[j].min(x);
                max[j] = max[j].max(x);
            }
        }
        Ok(AngleScaler { min, max })
    }

    pub fn n_features(&self) -> usize {
        self.min.len()
    }

    /// Values outside the fitted range clamp to the nearest endpoint. A
    /// constant feature maps to 0.
    pub fn transform(&self, row: &[f64]) -> Result<Vec<f64>> {
        if row.len() != self.min.len() {
            return Err(Error::Dimension {
                expected: self.min.len(),
                actual: row.len(),
            });
        }
        Ok(row
            .iter()
            .enumerate()
            .map(|(j, &x)| {
                let span = self.max[j] - self.min[j];
                if span <= 0.0 {
                    0.0
                } else {
                    (std::f64::consts::PI * (x - self.min[j]) / span).clamp(0.0, std::f64::consts::PI)
                }
            })
            .collect())
    }
}

/// RY(x0) q0, RY(x1) q1, RZ(x2) q0, RZ(x3) q1; parameter slots in that order.
pub fn angle_encoding_circuit() -> Circuit {
    let mut c = Circuit::new(2).expect("2 qubits is valid");
    c.single(GateKind::Ry, 0).expect("valid");
    c.single(GateKind::Ry, 1).expect("valid");
    c.single(GateKind::Rz, 0).expect("valid");
    c.single(GateKind::Rz, 1).expect("valid");
    c
}

/// State after the angle-encoding gates (before the CNOT ring).
pub fn angle_encode(angles: &[f64]) -> Result<StateVector> {
    if angles.len() != 4 {
        return Err(Error::Dimension {
            expected: 4,
            actual: angles.len(),
        });
    }
    run_circuit(&angle_encoding_circuit(), angles, &StateVector::zero(2)?)
}

/// CNOT from each qubit to the next, wrapping around.
pub fn cnot_ring(n_qubits: usize) -> Result<Circuit> {
    let mut c = Circuit::new(n_qubits)?;
    for q in 0..n_qubits {
        c.controlled(GateKind::Cnot, q, (q + 1) % n_qubits)?;
    }
    Ok(c)
}

/// Normalized amplitudes; the zero vector maps to the uniform state.
pub fn amplitude_encode(values: &[f64]) -> Result<StateVector> {
    if values.len() != POOLED_LEN {
        return Err(Error::Dimension {
            expected: POOLED_LEN,
            actual: values.len(),
        });
    }
    if let Some(v) = values.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
        return Err(Error::Data(format!("amplitude input {v} is not a nonnegative number")));
    }
    let norm = values.iter().map(|v| v * v).sum::<f64>().sqrt();
    let amps = if norm == 0.0 {
        let u = 1.0 / (values.len() as f64).sqrt();
        vec![Complex64::new(u, 0.0); values.len()]
    } else {
        values.iter().map(|v| Complex64::new(v / norm, 0.0)).collect()
    };
    StateVector::from_amplitudes(amps)
}

/// Applies the CNOT ring to an encoded state.
pub fn apply_prelude(state: &StateVector) -> Result<StateVector> {
    run_circuit(&cnot_ring(state.n_qubits())?, &[], state)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EncodingMode {
    Angle,
    Amplitude,
}

#[derive(Debug, Clone, PartialEq)]
pub enum EncodedInputs {
    Angles(Vec<Vec<f64>>),
    States(Vec<StateVector>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct EncodedDataset {
    pub mode: EncodingMode,
    pub n_qubits: usize,
    pub inputs: EncodedInputs,
    pub labels: Vec<i8>,
}

impl EncodedDataset {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Encoded states with the CNOT ring applied, ready for training.
    pub fn prepared(&self) -> Result<LabeledDataset> {
        let states = match &self.inputs {
            EncodedInputs::Angles(rows) => rows
                .iter()
                .map(|a| apply_prelude(&angle_encode(a)?))
                .collect::<Result<Vec<_>>>()?,
            EncodedInputs::States(states) => states.iter().map(apply_prelude).collect::<Result<Vec<_>>>()?,
        };
        LabeledDataset::new(states, self.labels.clone())
    }
}

/// Indices split per class: `round(test_fraction * class_size)` go to test.
/// Both outputs are sorted.
pub fn stratified_split(labels: &[i8], test_fraction: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut train = Vec::new();
    let mut test = Vec::new();
    for class in [1i8, -1] {
        let mut idx: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        idx.shuffle(&mut rng);
        let n_test = (test_fraction * idx.len() as f64).round() as usize;
        test.extend_from_slice(&idx[..n_test]);
        train.extend_from_slice(&idx[n_test..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    (train, test)
}

/// Up to `total / 2` indices of each class, drawn without replacement.
/// Sorted.
pub fn stratified_subsample(labels: &[i8], total: usize, seed: u64) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let per_class = [total - total / 2, total / 2];
    let mut out = Vec::new();
    for (class, &k) in [1i8, -1].iter().zip(&per_class) {
        let mut idx: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == *class).collect();
        idx.shuffle(&mut rng);
        idx.truncate(k);
        out.extend(idx);
    }
    out.sort_unstable();
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct DataConfig {
    pub source: Source,
    pub cache_dir: PathBuf,
    /// Image datasets only.
    pub train_size: usize,
    /// Image datasets only.
    pub test_size: usize,
    /// Iris only.
    pub test_fraction: f64,
    pub seed: u64,
}

impl DataConfig {
    pub fn new(source: Source) -> Self {
        DataConfig {
            source,
            cache_dir: default_cache_dir(),
            train_size: 400,
            test_size: 100,
            test_fraction: 0.2,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PreparedData {
    pub train: EncodedDataset,
    pub test: EncodedDataset,
    /// Training-ready states (encoding and CNOT ring applied).
    pub split: DatasetSplit,
}

impl PreparedData {
    pub fn n_qubits(&self) -> usize {
        self.train.n_qubits
    }
}

fn encode_images(raw: &RawDataset) -> Result<EncodedDataset> {
    let Samples::Images(images) = &raw.samples else {
        return Err(Error::Data("expected image samples".into()));
    };
    let states = images
        .iter()
        .map(|img| amplitude_encode(&preprocess_image(img)?))
        .collect::<Result<Vec<_>>>()?;
    Ok(EncodedDataset {
        mode: EncodingMode::Amplitude,
        n_qubits: 4,
        inputs: EncodedInputs::States(states),
        labels: raw.labels.clone(),
    })
}

/// Loads, splits, encodes and prepares a dataset.
pub fn prepare_dataset(cfg: &DataConfig) -> Result<PreparedData> {
    let (train, test) = match cfg.source {
        Source::Iris => {
            let raw = load_iris()?;
            let Samples::Features(rows) = &raw.samples else {
                unreachable!("iris yields feature rows")
            };
            let (train_idx, test_idx) = stratified_split(&raw.labels, cfg.test_fraction, cfg.seed);
            let train_rows: Vec<Vec<f64>> = train_idx.iter().map(|&i| rows[i].clone()).collect();
            let scaler = AngleScaler::fit(&train_rows)?;
            let encode = |idx: &[usize]| -> Result<EncodedDataset> {
                Ok(EncodedDataset {
                    mode: EncodingMode::Angle,
                    n_qubits: 2,
                    inputs: EncodedInputs::Angles(
                        idx.iter().map(|&i| scaler.transform(&rows[i])).collect::<Result<_>>()?,
                    ),
                    labels: idx.iter().map(|&i| raw.labels[i]).collect(),
                })
            };
            (encode(&train_idx)?, encode(&test_idx)?)
        }
        source => {
            let train_raw = load_idx(source, &cfg.cache_dir, Split::Train)?;
            let test_raw = load_idx(source, &cfg.cache_dir, Split::Test)?;
            let train_idx = stratified_subsample(&train_raw.labels, cfg.train_size, cfg.seed);
            let test_idx = stratified_subsample(&test_raw.labels, cfg.test_size, cfg.seed ^ 0x5eed);
            (
                encode_images(&train_raw.select(&train_idx))?,
                encode_images(&test_raw.select(&test_idx))?,
            )
        }
    };
    if train.is_empty() || test.is_empty() {
        return Err(Error::Empty("dataset split"));
    }
    let split = DatasetSplit {
        train: train.prepared()?,
        test: test.prepared()?,
    };
    Ok(PreparedData { train, test, split })
}
