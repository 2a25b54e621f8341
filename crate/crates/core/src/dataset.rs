//! Labelled sample sets: MNIST IDX files and seeded Gaussian clusters.

use std::fs::File;
use std::io::Read;
use std::path::Path;

use flate2::read::GzDecoder;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub const IDX_IMAGES_MAGIC: u32 = 2051;
pub const IDX_LABELS_MAGIC: u32 = 2049;

/// `count` samples of `sample_shape`, stored contiguously, with class labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset<T> {
    sample_shape: Vec<usize>,
    features: Vec<T>,
    labels: Vec<usize>,
    classes: usize,
}

impl<T: Scalar> Dataset<T> {
    pub fn new(sample_shape: Vec<usize>, features: Vec<T>, labels: Vec<usize>, classes: usize) -> Result<Self> {
        let per: usize = sample_shape.iter().product();
        if per == 0 || features.len() != per * labels.len() {
            return Err(Error::InvalidShape(format!(
                "{} values for {} samples of {sample_shape:?}",
                features.len(),
                labels.len()
            )));
        }
        if let Some(&label) = labels.iter().find(|&&l| l >= classes) {
            return Err(Error::LabelOutOfRange { label, classes });
        }
        Ok(Self { sample_shape, features, labels, classes })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn sample_shape(&self) -> &[usize] {
        &self.sample_shape
    }

    pub fn sample_len(&self) -> usize {
        self.sample_shape.iter().product()
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn sample(&self, i: usize) -> &[T] {
        let n = self.sample_len();
        &self.features[i * n..(i + 1) * n]
    }

    pub fn label(&self, i: usize) -> usize {
        self.labels[i]
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn features(&self) -> &[T] {
        &self.features
    }

    /// First `n` samples (or all, if fewer).
    pub fn take(&self, n: usize) -> Self {
        let n = n.min(self.len());
        Self {
            sample_shape: self.sample_shape.clone(),
            features: self.features[..n * self.sample_len()].to_vec(),
            labels: self.labels[..n].to_vec(),
            classes: self.classes,
        }
    }

    pub fn with_labels(&self, labels: Vec<usize>) -> Result<Self> {
        Self::new(self.sample_shape.clone(), self.features.clone(), labels, self.classes)
    }

    /// Same samples viewed with another shape of equal size.
    pub fn reshaped(&self, sample_shape: Vec<usize>) -> Result<Self> {
        Self::new(sample_shape, self.features.clone(), self.labels.clone(), self.classes)
    }

    pub fn cast<U: Scalar>(&self) -> Dataset<U> {
        Dataset {
            sample_shape: self.sample_shape.clone(),
            features: self.features.iter().map(|&v| U::of(v.widen())).collect(),
            labels: self.labels.clone(),
            classes: self.classes,
        }
    }
}

/// Gaussian clusters with unit variance; class `c` is centred at
/// `(separation/√2)·e_c`, so any two means are `separation` apart.
pub fn synth_dataset<T: Scalar>(seed: u64, n_per_class: usize, classes: usize, dim: usize, separation: f64) -> Result<Dataset<T>> {
    if classes < 2 {
        return Err(Error::InvalidShape(format!("{classes} classes")));
    }
    if dim < classes {
        return Err(Error::InvalidShape(format!("dimension {dim} cannot hold {classes} orthogonal means")));
    }
    if n_per_class == 0 {
        return Err(Error::InvalidShape("no samples requested".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let offset = separation / std::f64::consts::SQRT_2;
    let mut features = Vec::with_capacity(n_per_class * classes * dim);
    let mut labels = Vec::with_capacity(n_per_class * classes);
    // Interleave classes so any prefix is balanced.
    for _ in 0..n_per_class {
        for c in 0..classes {
            for d in 0..dim {
                let noise: f64 = StandardNormal.sample(&mut rng);
                features.push(T::of(noise + if d == c { offset } else { 0.0 }));
            }
            labels.push(c);
        }
    }
    Dataset::new(vec![dim], features, labels, classes)
}

fn read_maybe_gz(path: &Path) -> Result<Vec<u8>> {
    let mut raw = Vec::new();
    File::open(path)?.read_to_end(&mut raw)?;
    if raw.starts_with(&[0x1f, 0x8b]) {
        let mut out = Vec::new();
        GzDecoder::new(raw.as_slice())
            .read_to_end(&mut out)
            .map_err(|e| Error::TruncatedFile(format!("{}: {e}", path.display())))?;
        Ok(out)
    } else {
        Ok(raw)
    }
}

fn be_u32(bytes: &[u8], at: usize, what: &str) -> Result<u32> {
    bytes
        .get(at..at + 4)
        .map(|b| u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
        .ok_or_else(|| Error::TruncatedFile(format!("{what} header")))
}

/// Parses IDX image bytes into `(count, rows, cols, pixels)`.
pub fn parse_idx_images(bytes: &[u8]) -> Result<(usize, usize, usize, &[u8])> {
    let magic = be_u32(bytes, 0, "image")?;
    if magic != IDX_IMAGES_MAGIC {
        return Err(Error::BadMagic { expected: IDX_IMAGES_MAGIC, found: magic });
    }
    let count = be_u32(bytes, 4, "image")? as usize;
    let rows = be_u32(bytes, 8, "image")? as usize;
    let cols = be_u32(bytes, 12, "image")? as usize;
    let need = count * rows * cols;
    let pixels = bytes
        .get(16..16 + need)
        .ok_or_else(|| Error::TruncatedFile(format!("{} of {need} pixel bytes", bytes.len().saturating_sub(16))))?;
    Ok((count, rows, cols, pixels))
}

pub fn parse_idx_labels(bytes: &[u8]) -> Result<&[u8]> {
    let magic = be_u32(bytes, 0, "label")?;
    if magic != IDX_LABELS_MAGIC {
        return Err(Error::BadMagic { expected: IDX_LABELS_MAGIC, found: magic });
    }
    let count = be_u32(bytes, 4, "label")? as usize;
    bytes
        .get(8..8 + count)
        .ok_or_else(|| Error::TruncatedFile(format!("{} of {count} label bytes", bytes.len().saturating_sub(8))))
}

/// Reads an IDX image/label pair (plain or gzip). Samples are `rows×cols×1`
/// with pixels scaled by 1/255; ten classes.
pub fn load_mnist<T: Scalar>(images_path: &Path, labels_path: &Path) -> Result<Dataset<T>> {
    let image_bytes = read_maybe_gz(images_path)?;
    let label_bytes = read_maybe_gz(labels_path)?;
    let (count, rows, cols, pixels) = parse_idx_images(&image_bytes)?;
    let labels = parse_idx_labels(&label_bytes)?;
    if labels.len() != count {
        return Err(Error::CountMismatch { images: count, labels: labels.len() });
    }
    let features = pixels.iter().map(|&p| T::of(f64::from(p) / 255.0)).collect();
    Dataset::new(vec![rows, cols, 1], features, labels.iter().map(|&l| l as usize).collect(), 10)
}

/// MNIST training and test sets from a directory holding the four
/// standard files, with or without a `.gz` suffix.
pub fn load_mnist_dir<T: Scalar>(dir: &Path) -> Result<(Dataset<T>, Dataset<T>)> {
    let find = |stem: &str| {
        let plain = dir.join(stem);
        if plain.exists() {
            plain
        } else {
            dir.join(format!("{stem}.gz"))
        }
    };
    let train = load_mnist(&find("train-images-idx3-ubyte"), &find("train-labels-idx1-ubyte"))?;
    let test = load_mnist(&find("t10k-images-idx3-ubyte"), &find("t10k-labels-idx1-ubyte"))?;
    Ok((train, test))
}

/// Encodes images as IDX bytes; the inverse of [`parse_idx_images`].
pub fn encode_idx_images(rows: usize, cols: usize, pixels: &[u8]) -> Vec<u8> {
    let count = pixels.len() / (rows * cols);
    let mut out = Vec::with_capacity(16 + pixels.len());
    for v in [IDX_IMAGES_MAGIC, count as u32, rows as u32, cols as u32] {
        out.extend_from_slice(&v.to_be_bytes());
    }
    out.extend_from_slice(pixels);
    out
}

pub fn encode_idx_labels(labels: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(8 + labels.len());
    out.extend_from_slice(&IDX_LABELS_MAGIC.to_be_bytes());
    out.extend_from_slice(&(labels.len() as u32).to_be_bytes());
    out.extend_from_slice(labels);
    out
}
