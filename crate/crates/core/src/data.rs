//! Dataset loading, splitting and batching.
//!
//! MNIST comes from a Kaggle-style CSV (`label,p0,…,p783`, optional header,
//! optionally gzip-compressed) and is scaled to `[0, 1]`. CIFAR-10 comes from
//! the standard binary batches (3073-byte records: label byte, then 1024 R,
//! 1024 G, 1024 B bytes) and is mapped to `[−1, 1]` by `(x/255 − 0.5)/0.5`.

use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::{Path, PathBuf};

use flate2::read::GzDecoder;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::tensor::Tensor;

pub const NUM_CLASSES: usize = 10;
pub const MNIST_SHAPE: [usize; 3] = [1, 28, 28];
pub const CIFAR_SHAPE: [usize; 3] = [3, 32, 32];
const CIFAR_RECORD: usize = 1 + 3 * 32 * 32;

/// The canonical CIFAR-10 binary batch files, train batches first.
pub const CIFAR_FILES: [&str; 6] = [
    "data_batch_1.bin",
    "data_batch_2.bin",
    "data_batch_3.bin",
    "data_batch_4.bin",
    "data_batch_5.bin",
    "test_batch.bin",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DatasetKind {
    Mnist,
    Cifar10,
    Synthetic,
}

impl fmt::Display for DatasetKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DatasetKind::Mnist => "mnist",
            DatasetKind::Cifar10 => "cifar10",
            DatasetKind::Synthetic => "synthetic",
        })
    }
}

/// Normalized images `N×C×H×W` with integer labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub kind: DatasetKind,
    images: Tensor<f32>,
    labels: Vec<usize>,
}

impl Dataset {
    pub fn new(kind: DatasetKind, images: Tensor<f32>, labels: Vec<usize>) -> Result<Self> {
        if images.ndim() != 4 || images.shape()[0] != labels.len() {
            return Err(Error::Shape {
                op: "dataset",
                detail: format!("{} labels for images of shape {:?}", labels.len(), images.shape()),
            });
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= NUM_CLASSES) {
            return Err(Error::Index {
                op: "dataset",
                index: bad,
                bound: NUM_CLASSES,
            });
        }
        Ok(Self { kind, images, labels })
    }

    fn empty(kind: DatasetKind, sample_shape: [usize; 3]) -> Self {
        let [c, h, w] = sample_shape;
        Self {
            kind,
            images: Tensor::zeros([0, c, h, w]),
            labels: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn images(&self) -> &Tensor<f32> {
        &self.images
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    /// `[C, H, W]` of one sample.
    pub fn sample_shape(&self) -> [usize; 3] {
        let s = self.images.shape();
        [s[1], s[2], s[3]]
    }

    fn sample_len(&self) -> usize {
        self.sample_shape().iter().product()
    }

    /// Copies the given samples, in order, into a new dataset.
    pub fn select(&self, indices: &[usize]) -> Dataset {
        let (images, labels) = self.gather(indices);
        Dataset {
            kind: self.kind,
            images,
            labels,
        }
    }

    fn gather(&self, indices: &[usize]) -> (Tensor<f32>, Vec<usize>) {
        let len = self.sample_len();
        let src = self.images.data();
        let mut data = Vec::with_capacity(indices.len() * len);
        let mut labels = Vec::with_capacity(indices.len());
        for &i in indices {
            data.extend_from_slice(&src[i * len..(i + 1) * len]);
            labels.push(self.labels[i]);
        }
        let [c, h, w] = self.sample_shape();
        let images = Tensor::new([indices.len(), c, h, w], data).expect("gathered sizes agree");
        (images, labels)
    }

    /// A seeded random subset of `n` samples (all of them if `n ≥ len`).
    pub fn subset(&self, n: usize, seed: u64) -> Dataset {
        if n >= self.len() {
            return self.clone();
        }
        let mut idx: Vec<usize> = (0..self.len()).collect();
        idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        idx.truncate(n);
        self.select(&idx)
    }
}

/// Train fraction and permutation seed for a train/validation split.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitSpec {
    pub train_fraction: f64,
    pub seed: u64,
}

impl SplitSpec {
    pub fn new(train_fraction: f64, seed: u64) -> Result<Self> {
        if !(train_fraction > 0.0 && train_fraction < 1.0) {
            return Err(Error::Config(format!("train fraction {train_fraction} not in (0, 1)")));
        }
        Ok(Self { train_fraction, seed })
    }

    /// Train indices then validation indices of a seeded permutation of `0..n`.
    pub fn partition(&self, n: usize) -> (Vec<usize>, Vec<usize>) {
        let mut idx: Vec<usize> = (0..n).collect();
        idx.shuffle(&mut ChaCha8Rng::seed_from_u64(self.seed));
        let cut = (n as f64 * self.train_fraction).floor() as usize;
        let val = idx.split_off(cut);
        (idx, val)
    }
}

pub fn split(d: &Dataset, spec: &SplitSpec) -> (Dataset, Dataset) {
    let (train, val) = spec.partition(d.len());
    (d.select(&train), d.select(&val))
}

fn open_maybe_gz(path: &Path) -> Result<Box<dyn Read>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    if path.extension().is_some_and(|e| e == "gz") {
        Ok(Box::new(GzDecoder::new(BufReader::new(file))))
    } else {
        Ok(Box::new(file))
    }
}

/// Loads a Kaggle-style MNIST CSV (`.csv` or `.csv.gz`).
pub fn load_mnist_csv(path: impl AsRef<Path>) -> Result<Dataset> {
    let path = path.as_ref();
    let reader = BufReader::new(open_maybe_gz(path)?);
    let pixels = MNIST_SHAPE.iter().product::<usize>();
    let mut data: Vec<f32> = Vec::new();
    let mut labels = Vec::new();
    let parse_err = |line: usize, msg: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        msg,
    };
    let range_err = |line: usize, msg: String| Error::Range {
        path: path.to_path_buf(),
        line,
        msg,
    };

    for (i, line) in reader.lines().enumerate() {
        let lineno = i + 1;
        let line = line.map_err(|e| Error::io(path, e))?;
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        let mut fields = line.split(',');
        let first = fields.next().unwrap_or_default().trim();
        let label: i64 = match first.parse() {
            Ok(v) => v,
            Err(_) if lineno == 1 => continue, // header row
            Err(_) => return Err(parse_err(lineno, format!("label {first:?} is not an integer"))),
        };
        if !(0..NUM_CLASSES as i64).contains(&label) {
            return Err(range_err(lineno, format!("label {label} outside 0..{NUM_CLASSES}")));
        }
        let start = data.len();
        for (j, field) in fields.enumerate() {
            let v: i64 = field
                .trim()
                .parse()
                .map_err(|_| parse_err(lineno, format!("pixel {j} {field:?} is not an integer")))?;
            if !(0..=255).contains(&v) {
                return Err(range_err(lineno, format!("pixel {j} value {v} outside 0..=255")));
            }
            data.push(v as f32 / 255.0);
        }
        let got = data.len() - start;
        if got != pixels {
            return Err(parse_err(
                lineno,
                format!("expected {} fields, found {}", pixels + 1, got + 1),
            ));
        }
        labels.push(label as usize);
    }
    let n = labels.len();
    let images = Tensor::new([n, 1, 28, 28], data)?;
    Dataset::new(DatasetKind::Mnist, images, labels)
}

/// Maps a CIFAR byte to `[−1, 1]`.
#[inline]
pub fn cifar_normalize(byte: u8) -> f32 {
    (byte as f32 / 255.0 - 0.5) / 0.5
}

/// Loads one CIFAR-10 binary batch file.
pub fn load_cifar10_file(path: impl AsRef<Path>) -> Result<Dataset> {
    let path = path.as_ref();
    let mut bytes = Vec::new();
    open_maybe_gz(path)?
        .read_to_end(&mut bytes)
        .map_err(|e| Error::io(path, e))?;
    if bytes.is_empty() || bytes.len() % CIFAR_RECORD != 0 {
        return Err(Error::Format {
            path: path.to_path_buf(),
            msg: format!(
                "size {} is not a positive multiple of the {CIFAR_RECORD}-byte record",
                bytes.len()
            ),
        });
    }
    let n = bytes.len() / CIFAR_RECORD;
    let mut data = Vec::with_capacity(n * (CIFAR_RECORD - 1));
    let mut labels = Vec::with_capacity(n);
    for (r, rec) in bytes.chunks_exact(CIFAR_RECORD).enumerate() {
        let label = rec[0] as usize;
        if label >= NUM_CLASSES {
            return Err(Error::Format {
                path: path.to_path_buf(),
                msg: format!("record {r} has label byte {label}"),
            });
        }
        labels.push(label);
        data.extend(rec[1..].iter().map(|&b| cifar_normalize(b)));
    }
    Dataset::new(DatasetKind::Cifar10, Tensor::new([n, 3, 32, 32], data)?, labels)
}

/// Loads and pools every CIFAR-10 batch file present in `dir` (or in its
/// `cifar-10-batches-bin` subdirectory), in canonical order.
pub fn load_cifar10_binary(dir: impl AsRef<Path>) -> Result<Dataset> {
    let mut dir = dir.as_ref().to_path_buf();
    let nested = dir.join("cifar-10-batches-bin");
    if nested.is_dir() {
        dir = nested;
    }
    let files: Vec<PathBuf> = CIFAR_FILES
        .iter()
        .map(|f| dir.join(f))
        .filter(|p| p.is_file())
        .collect();
    if files.is_empty() {
        return Err(Error::Format {
            path: dir,
            msg: format!("no CIFAR-10 batch files found (expected {})", CIFAR_FILES.join(", ")),
        });
    }
    let parts = files.iter().map(load_cifar10_file).collect::<Result<Vec<_>>>()?;
    Ok(concat(DatasetKind::Cifar10, &parts))
}

fn concat(kind: DatasetKind, parts: &[Dataset]) -> Dataset {
    let Some(first) = parts.first() else {
        return Dataset::empty(kind, CIFAR_SHAPE);
    };
    let [c, h, w] = first.sample_shape();
    let n: usize = parts.iter().map(Dataset::len).sum();
    let mut data = Vec::with_capacity(n * c * h * w);
    let mut labels = Vec::with_capacity(n);
    for p in parts {
        data.extend_from_slice(p.images.data());
        labels.extend_from_slice(&p.labels);
    }
    Dataset {
        kind,
        images: Tensor::new([n, c, h, w], data).expect("parts share a sample shape"),
        labels,
    }
}

/// Writes a dataset whose values lie in `[0, 1]` as an MNIST CSV with header.
pub fn write_mnist_csv(d: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = std::io::BufWriter::new(file);
    let len = d.sample_len();
    let io = |e| Error::io(path, e);
    let header: Vec<String> = (0..len).map(|i| format!("pixel{i}")).collect();
    writeln!(out, "label,{}", header.join(",")).map_err(io)?;
    for (i, label) in d.labels.iter().enumerate() {
        let px: Vec<String> = d.images.data()[i * len..(i + 1) * len]
            .iter()
            .map(|&v| ((v.clamp(0.0, 1.0) * 255.0).round() as u8).to_string())
            .collect();
        writeln!(out, "{label},{}", px.join(",")).map_err(io)?;
    }
    out.flush().map_err(io)
}

/// Writes a dataset whose values lie in `[−1, 1]` as one CIFAR-10 binary batch.
pub fn write_cifar10_binary(d: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    if d.sample_shape() != CIFAR_SHAPE {
        return Err(Error::Shape {
            op: "write_cifar10_binary",
            detail: format!("sample shape {:?} is not 3×32×32", d.sample_shape()),
        });
    }
    let len = d.sample_len();
    let mut bytes = Vec::with_capacity(d.len() * CIFAR_RECORD);
    for (i, &label) in d.labels.iter().enumerate() {
        bytes.push(label as u8);
        bytes.extend(
            d.images.data()[i * len..(i + 1) * len]
                .iter()
                .map(|&v| ((v.clamp(-1.0, 1.0) * 0.5 + 0.5) * 255.0).round() as u8),
        );
    }
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

/// One mini-batch.
#[derive(Debug, Clone)]
pub struct Batch {
    pub images: Tensor<f32>,
    pub labels: Vec<usize>,
}

/// Iterator over the batches of one epoch.
pub struct Batches<'a> {
    data: &'a Dataset,
    order: Vec<usize>,
    batch_size: usize,
    pos: usize,
}

impl Batches<'_> {
    pub fn num_batches(&self) -> usize {
        self.order.len().div_ceil(self.batch_size)
    }
}

impl Iterator for Batches<'_> {
    type Item = Batch;

    fn next(&mut self) -> Option<Batch> {
        if self.pos >= self.order.len() {
            return None;
        }
        let end = (self.pos + self.batch_size).min(self.order.len());
        let (images, labels) = self.data.gather(&self.order[self.pos..end]);
        self.pos = end;
        Some(Batch { images, labels })
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let left = (self.order.len() - self.pos).div_ceil(self.batch_size);
        (left, Some(left))
    }
}

impl ExactSizeIterator for Batches<'_> {}

/// Batches covering every sample once. With `shuffle`, the order is a
/// permutation seeded by `seed ^ epoch`; the last batch may be short.
pub fn batches(d: &Dataset, batch_size: usize, shuffle: bool, seed: u64, epoch: usize) -> Result<Batches<'_>> {
    if batch_size == 0 {
        return Err(Error::Config("batch size must be at least 1".into()));
    }
    let mut order: Vec<usize> = (0..d.len()).collect();
    if shuffle {
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed ^ epoch as u64));
    }
    Ok(Batches {
        data: d,
        order,
        batch_size,
        pos: 0,
    })
}

/// Image geometry of a synthetic dataset.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SyntheticShape {
    /// `1×28×28`, values in `[0, 1]`.
    MnistLike,
    /// `3×32×32`, values in `[−1, 1]`.
    CifarLike,
}

impl SyntheticShape {
    pub fn sample_shape(self) -> [usize; 3] {
        match self {
            SyntheticShape::MnistLike => MNIST_SHAPE,
            SyntheticShape::CifarLike => CIFAR_SHAPE,
        }
    }
}

struct Blob {
    cy: f32,
    cx: f32,
    sigma: f32,
    amplitude: [f32; 3],
}

/// Class-separable images: each class is a fixed arrangement of three
/// Gaussian blobs; samples jitter the blob positions and intensity and add
/// pixel noise. Labels cycle through the classes.
pub fn synthetic_dataset(n: usize, classes: usize, seed: u64, shape: SyntheticShape) -> Dataset {
    let [c, h, w] = shape.sample_shape();
    let classes = classes.clamp(1, NUM_CLASSES);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let prototypes: Vec<Vec<Blob>> = (0..classes)
        .map(|_| {
            (0..3)
                .map(|_| Blob {
                    cy: rng.random_range(0.2..0.8) * h as f32,
                    cx: rng.random_range(0.2..0.8) * w as f32,
                    sigma: rng.random_range(0.07..0.14) * w as f32,
                    amplitude: [
                        rng.random_range(0.4..1.0),
                        rng.random_range(0.4..1.0),
                        rng.random_range(0.4..1.0),
                    ],
                })
                .collect()
        })
        .collect();

    let jitter = Normal::new(0.0f32, 1.0).expect("valid normal");
    let noise = Normal::new(0.0f32, 0.05).expect("valid normal");
    let mut data = Vec::with_capacity(n * c * h * w);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let label = i % classes;
        let scale = rng.random_range(0.8f32..1.2);
        let blobs: Vec<(f32, f32, &Blob)> = prototypes[label]
            .iter()
            .map(|b| (b.cy + jitter.sample(&mut rng), b.cx + jitter.sample(&mut rng), b))
            .collect();
        for ch in 0..c {
            for y in 0..h {
                for x in 0..w {
                    let mut v = 0.0f32;
                    for &(cy, cx, b) in &blobs {
                        let d2 = (y as f32 - cy).powi(2) + (x as f32 - cx).powi(2);
                        v += b.amplitude[ch] * (-d2 / (2.0 * b.sigma * b.sigma)).exp();
                    }
                    let v = (v * scale + noise.sample(&mut rng)).clamp(0.0, 1.0);
                    data.push(match shape {
                        SyntheticShape::MnistLike => v,
                        SyntheticShape::CifarLike => 2.0 * v - 1.0,
                    });
                }
            }
        }
        labels.push(label);
    }
    Dataset {
        kind: DatasetKind::Synthetic,
        images: Tensor::new([n, c, h, w], data).expect("sizes agree"),
        labels,
    }
}
