//! Datasets: MNIST IDX files, synthetic point sets, and corruption models.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use rand::distr::{Distribution, Uniform};
use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Normal;
use thiserror::Error;

use crate::linalg::{dist2, norm2};

pub const IDX_IMAGES_MAGIC: u32 = 0x0000_0803;
pub const IDX_LABELS_MAGIC: u32 = 0x0000_0801;
pub const RING_RADIUS: f64 = 0.8;
/// Generated 2D points are at least this far apart.
pub const MIN_SEPARATION: f64 = 1e-3;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: bad magic {found:#010x}, expected {expected:#010x}")]
    BadMagic { path: PathBuf, found: u32, expected: u32 },
    #[error("{path}: truncated, need {expected} bytes, have {got}")]
    Truncated { path: PathBuf, expected: usize, got: usize },
    #[error("{images} images but {labels} labels")]
    CountMismatch { images: usize, labels: usize },
    #[error("subset of {requested} requested, only {available} available")]
    SubsetTooLarge { requested: usize, available: usize },
    #[error("example {index} is the zero vector")]
    ZeroVector { index: usize },
    #[error("occlusion needs an image shape")]
    MissingShape,
    #[error("image shape {shape:?} does not match dim {dim}")]
    ShapeMismatch { shape: (usize, usize, usize), dim: usize },
    #[error("bad corruption spec: {0}")]
    BadSpec(String),
    #[error("examples have inconsistent dims")]
    Ragged,
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> DataError + '_ {
    move |source| DataError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// A set of equal-length real vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    examples: Vec<Vec<f64>>,
    dim: usize,
    labels: Option<Vec<u8>>,
    /// `(height, width, channels)` when the vectors are images.
    image_shape: Option<(usize, usize, usize)>,
    unit_norm: bool,
}

impl Dataset {
    pub fn new(examples: Vec<Vec<f64>>) -> Result<Self, DataError> {
        let dim = examples.first().map_or(0, |x| x.len());
        if examples.iter().any(|x| x.len() != dim) {
            return Err(DataError::Ragged);
        }
        Ok(Self {
            examples,
            dim,
            labels: None,
            image_shape: None,
            unit_norm: false,
        })
    }

    pub fn with_image_shape(mut self, shape: (usize, usize, usize)) -> Result<Self, DataError> {
        if !self.examples.is_empty() && shape.0 * shape.1 * shape.2 != self.dim {
            return Err(DataError::ShapeMismatch { shape, dim: self.dim });
        }
        self.image_shape = Some(shape);
        Ok(self)
    }

    pub fn with_labels(mut self, labels: Vec<u8>) -> Result<Self, DataError> {
        if labels.len() != self.examples.len() {
            return Err(DataError::CountMismatch {
                images: self.examples.len(),
                labels: labels.len(),
            });
        }
        self.labels = Some(labels);
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn examples(&self) -> &[Vec<f64>] {
        &self.examples
    }

    pub fn into_examples(self) -> Vec<Vec<f64>> {
        self.examples
    }

    pub fn labels(&self) -> Option<&[u8]> {
        self.labels.as_deref()
    }

    pub fn image_shape(&self) -> Option<(usize, usize, usize)> {
        self.image_shape
    }

    pub fn is_unit_norm(&self) -> bool {
        self.unit_norm
    }

    /// All entries within `[0, 1]`.
    pub fn in_unit_range(&self) -> bool {
        self.examples.iter().flatten().all(|v| (0.0..=1.0).contains(v))
    }

    /// The first `n` examples.
    pub fn take(&self, n: usize) -> Self {
        let mut out = self.clone();
        out.examples.truncate(n);
        if let Some(l) = out.labels.as_mut() {
            l.truncate(n);
        }
        out
    }
}

fn read_u32(bytes: &[u8], at: usize) -> u32 {
    u32::from_be_bytes(bytes[at..at + 4].try_into().expect("4 bytes"))
}

fn read_file(path: &Path) -> Result<Vec<u8>, DataError> {
    fs::read(path).map_err(io_err(path))
}

fn check_len(path: &Path, bytes: &[u8], expected: usize) -> Result<(), DataError> {
    if bytes.len() < expected {
        return Err(DataError::Truncated {
            path: path.to_path_buf(),
            expected,
            got: bytes.len(),
        });
    }
    Ok(())
}

fn check_magic(path: &Path, bytes: &[u8], expected: u32) -> Result<(), DataError> {
    check_len(path, bytes, 4)?;
    let found = read_u32(bytes, 0);
    if found != expected {
        return Err(DataError::BadMagic {
            path: path.to_path_buf(),
            found,
            expected,
        });
    }
    Ok(())
}

/// Raw IDX image file: `(count, rows, cols, pixel bytes)`.
pub fn read_idx_images(path: &Path) -> Result<(usize, usize, usize, Vec<u8>), DataError> {
    let bytes = read_file(path)?;
    check_magic(path, &bytes, IDX_IMAGES_MAGIC)?;
    check_len(path, &bytes, 16)?;
    let n = read_u32(&bytes, 4) as usize;
    let rows = read_u32(&bytes, 8) as usize;
    let cols = read_u32(&bytes, 12) as usize;
    let expected = 16 + n * rows * cols;
    check_len(path, &bytes, expected)?;
    Ok((n, rows, cols, bytes[16..expected].to_vec()))
}

pub fn read_idx_labels(path: &Path) -> Result<Vec<u8>, DataError> {
    let bytes = read_file(path)?;
    check_magic(path, &bytes, IDX_LABELS_MAGIC)?;
    check_len(path, &bytes, 8)?;
    let n = read_u32(&bytes, 4) as usize;
    check_len(path, &bytes, 8 + n)?;
    Ok(bytes[8..8 + n].to_vec())
}

/// Loads a seeded subset (without replacement, in file order) of an MNIST
/// IDX pair with pixels scaled to `[0, 1]`.
pub fn load_mnist_idx(images: &Path, labels: &Path, subset: usize, seed: u64) -> Result<Dataset, DataError> {
    let (n, rows, cols, pixels) = read_idx_images(images)?;
    let lab = read_idx_labels(labels)?;
    if lab.len() != n {
        return Err(DataError::CountMismatch {
            images: n,
            labels: lab.len(),
        });
    }
    if subset > n {
        return Err(DataError::SubsetTooLarge {
            requested: subset,
            available: n,
        });
    }
    let dim = rows * cols;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picked = index::sample(&mut rng, n, subset).into_vec();
    picked.sort_unstable();
    let examples = picked
        .iter()
        .map(|&i| pixels[i * dim..(i + 1) * dim].iter().map(|&p| p as f64 / 255.0).collect())
        .collect();
    let labels = picked.iter().map(|&i| lab[i]).collect();
    Dataset::new(examples)?
        .with_image_shape((rows, cols, 1))?
        .with_labels(labels)
}

/// Writes an IDX image/label pair. Pixels are rounded from `[0, 1]` to bytes,
/// so values that came from an IDX file survive exactly.
pub fn write_mnist_idx(data: &Dataset, images: &Path, labels: &Path) -> Result<(), DataError> {
    let (rows, cols, ch) = data.image_shape().unwrap_or((1, data.dim(), 1));
    if ch != 1 {
        return Err(DataError::ShapeMismatch {
            shape: (rows, cols, ch),
            dim: data.dim(),
        });
    }
    let mut img = Vec::with_capacity(16 + data.len() * data.dim());
    img.extend_from_slice(&IDX_IMAGES_MAGIC.to_be_bytes());
    for v in [data.len(), rows, cols] {
        img.extend_from_slice(&(v as u32).to_be_bytes());
    }
    for x in data.examples() {
        img.extend(x.iter().map(|v| (v.clamp(0.0, 1.0) * 255.0).round() as u8));
    }
    let mut lab = Vec::with_capacity(8 + data.len());
    lab.extend_from_slice(&IDX_LABELS_MAGIC.to_be_bytes());
    lab.extend_from_slice(&(data.len() as u32).to_be_bytes());
    match data.labels() {
        Some(l) => lab.extend_from_slice(l),
        None => lab.extend(std::iter::repeat(0u8).take(data.len())),
    }
    fs::File::create(images)
        .and_then(|mut f| f.write_all(&img))
        .map_err(io_err(images))?;
    fs::File::create(labels)
        .and_then(|mut f| f.write_all(&lab))
        .map_err(io_err(labels))?;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Layout2d {
    /// Evenly spaced on the circle of radius 0.8.
    Ring,
    /// Uniform in `[−1, 1]²`, resampled until well separated.
    UniformBox,
}

pub fn synth_2d(n: usize, layout: Layout2d, seed: u64) -> Dataset {
    let pts: Vec<Vec<f64>> = match layout {
        Layout2d::Ring => (0..n)
            .map(|i| {
                let t = 2.0 * std::f64::consts::PI * i as f64 / n as f64;
                vec![RING_RADIUS * t.cos(), RING_RADIUS * t.sin()]
            })
            .collect(),
        Layout2d::UniformBox => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let dist = Uniform::new_inclusive(-1.0, 1.0).expect("valid range");
            let mut pts: Vec<Vec<f64>> = Vec::with_capacity(n);
            while pts.len() < n {
                let p = vec![dist.sample(&mut rng), dist.sample(&mut rng)];
                if pts.iter().all(|q| dist2(q, &p) > MIN_SEPARATION) {
                    pts.push(p);
                }
            }
            pts
        }
    };
    Dataset::new(pts).expect("all points are 2D")
}

/// `n` random unit vectors in `R^dim` (Gaussian directions).
pub fn random_unit_vectors(n: usize, dim: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    (0..n)
        .map(|_| loop {
            let v: Vec<f64> = (0..dim).map(|_| normal.sample(&mut rng)).collect();
            let len = norm2(&v);
            if len > 1e-8 {
                break v.into_iter().map(|e| e / len).collect();
            }
        })
        .collect()
}

/// Each example divided by its L2 norm.
pub fn normalize_unit(data: &Dataset) -> Result<Dataset, DataError> {
    let mut out = data.clone();
    for (i, x) in out.examples.iter_mut().enumerate() {
        let n = norm2(x);
        if n == 0.0 {
            return Err(DataError::ZeroVector { index: i });
        }
        if n != 1.0 {
            x.iter_mut().for_each(|v| *v /= n);
        }
    }
    out.unit_norm = true;
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OcclusionColor {
    Value(f64),
    /// One `U[0, 1]` value for the whole square.
    Uniform,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Corruption {
    /// Replace a `fraction` of coordinates with `U[0, 1]` noise.
    UniformPixels { fraction: f64 },
    /// Overwrite a square of side `⌈side_fraction·h⌉ × ⌈side_fraction·w⌉`
    /// at a uniformly random position.
    OcclusionSquare { side_fraction: f64, color: OcclusionColor },
    /// Add `N(0, variance)` noise to every coordinate, unclipped.
    Gaussian { variance: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CorruptionSpec {
    pub kind: Corruption,
    pub seed: u64,
}

impl CorruptionSpec {
    pub fn new(kind: Corruption, seed: u64) -> Self {
        Self { kind, seed }
    }

    pub fn with_seed(self, seed: u64) -> Self {
        Self { seed, ..self }
    }

    pub fn validate(&self) -> Result<(), DataError> {
        match self.kind {
            Corruption::UniformPixels { fraction } if !(0.0..=1.0).contains(&fraction) => {
                Err(DataError::BadSpec(format!("fraction {fraction} outside [0, 1]")))
            }
            Corruption::OcclusionSquare { side_fraction, .. } if !(side_fraction > 0.0 && side_fraction <= 1.0) => {
                Err(DataError::BadSpec(format!("side fraction {side_fraction} outside (0, 1]")))
            }
            Corruption::Gaussian { variance } if !(variance >= 0.0 && variance.is_finite()) => {
                Err(DataError::BadSpec(format!("variance {variance} must be non-negative")))
            }
            _ => Ok(()),
        }
    }
}

/// Applies `spec` to `x`. Deterministic in `(x, spec)`.
pub fn corrupt(x: &[f64], spec: &CorruptionSpec, image_shape: Option<(usize, usize, usize)>) -> Result<Vec<f64>, DataError> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut out = x.to_vec();
    match spec.kind {
        Corruption::UniformPixels { fraction } => {
            let count = ((fraction * x.len() as f64).round() as usize).min(x.len());
            for i in index::sample(&mut rng, x.len(), count) {
                out[i] = rng.random::<f64>();
            }
        }
        Corruption::OcclusionSquare { side_fraction, color } => {
            let (h, w, c) = image_shape.ok_or(DataError::MissingShape)?;
            if h * w * c != x.len() {
                return Err(DataError::ShapeMismatch {
                    shape: (h, w, c),
                    dim: x.len(),
                });
            }
            let sh = ((side_fraction * h as f64).ceil() as usize).clamp(1, h);
            let sw = ((side_fraction * w as f64).ceil() as usize).clamp(1, w);
            let top = rng.random_range(0..=h - sh);
            let left = rng.random_range(0..=w - sw);
            let value = match color {
                OcclusionColor::Value(v) => v,
                OcclusionColor::Uniform => rng.random::<f64>(),
            };
            for r in top..top + sh {
                for col in left..left + sw {
                    for ch in 0..c {
                        out[(r * w + col) * c + ch] = value;
                    }
                }
            }
        }
        Corruption::Gaussian { variance } => {
            if variance > 0.0 {
                let normal = Normal::new(0.0, variance.sqrt()).expect("positive sd");
                for v in out.iter_mut() {
                    *v += normal.sample(&mut rng);
                }
            }
        }
    }
    Ok(out)
}

/// Stream `salt` of `seed`, decorrelated with a splitmix64 finalizer.
pub fn mix_seed(seed: u64, salt: u64) -> u64 {
    let mut z = seed ^ salt.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Probe pools for spurious-attractor searches.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ProbeKind {
    /// i.i.d. `U[0, 1]` coordinates.
    Uniform,
    /// i.i.d. `N(0, variance)` coordinates.
    Gaussian { variance: f64 },
}

pub fn probe_pool(n: usize, dim: usize, kind: ProbeKind, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    match kind {
        ProbeKind::Uniform => (0..n).map(|_| (0..dim).map(|_| rng.random::<f64>()).collect()).collect(),
        ProbeKind::Gaussian { variance } => {
            let normal = Normal::new(0.0, variance.max(0.0).sqrt()).expect("finite sd");
            (0..n)
                .map(|_| (0..dim).map(|_| normal.sample(&mut rng)).collect())
                .collect()
        }
    }
}
