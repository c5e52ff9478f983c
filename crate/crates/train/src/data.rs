//! Datasets: IDX ingestion, synthetic Gaussian blobs and the validation split.

use std::fs;
use std::path::Path;

use annealscape_core::seed::{stream_rng, Stream};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::error::{invalid, Result, TrainError};

pub const IMAGE_MAGIC: u32 = 0x0000_0803;
pub const LABEL_MAGIC: u32 = 0x0000_0801;
/// Share of samples held out for validation.
pub const VALIDATION_FRACTION: f64 = 0.12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Validation,
}

/// Row-major `len × dim` features in [−1, 1] with class labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    features: Vec<f64>,
    labels: Vec<usize>,
    split: Vec<Split>,
    dim: usize,
    classes: usize,
}

impl Dataset {
    pub fn new(features: Vec<f64>, labels: Vec<usize>, dim: usize, classes: usize) -> Result<Self> {
        if dim == 0 || features.len() != labels.len() * dim {
            return Err(invalid(format!(
                "{} features do not form {} rows of dimension {dim}",
                features.len(),
                labels.len()
            )));
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= classes) {
            return Err(invalid(format!("label {bad} outside [0, {classes})")));
        }
        if features.iter().any(|x| !(-1.0..=1.0).contains(x)) {
            return Err(invalid("features must lie in [-1, 1]"));
        }
        let split = vec![Split::Train; labels.len()];
        Ok(Self {
            features,
            labels,
            split,
            dim,
            classes,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn features(&self) -> &[f64] {
        &self.features
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn split(&self) -> &[Split] {
        &self.split
    }

    pub fn sample(&self, i: usize) -> &[f64] {
        &self.features[i * self.dim..(i + 1) * self.dim]
    }

    pub fn indices(&self, which: Split) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.split[i] == which).collect()
    }

    /// Shuffles the samples under `seed` and tags the last `fraction` of the
    /// shuffled order (rounded to the nearest sample) as validation.
    pub fn with_validation_split(mut self, fraction: f64, seed: u64) -> Result<Self> {
        if !(0.0..1.0).contains(&fraction) {
            return Err(invalid(format!("validation fraction must lie in [0, 1), got {fraction}")));
        }
        let mut order: Vec<usize> = (0..self.len()).collect();
        order.shuffle(&mut stream_rng(seed, Stream::Data, &[1]));
        let mut features = Vec::with_capacity(self.features.len());
        for &i in &order {
            features.extend_from_slice(self.sample(i));
        }
        self.labels = order.iter().map(|&i| self.labels[i]).collect();
        self.features = features;
        let held = (self.len() as f64 * fraction).round() as usize;
        let cut = self.len() - held;
        self.split = (0..self.len())
            .map(|i| if i < cut { Split::Train } else { Split::Validation })
            .collect();
        Ok(self)
    }
}

fn read_file(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|source| TrainError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn header(bytes: &[u8], words: usize, what: &str) -> Result<Vec<usize>> {
    if bytes.len() < 4 * words {
        return Err(TrainError::Format(format!("{what}: truncated header")));
    }
    Ok(bytes[..4 * words]
        .chunks_exact(4)
        .map(|c| u32::from_be_bytes([c[0], c[1], c[2], c[3]]) as usize)
        .collect())
}

fn check_magic(found: usize, expected: u32, what: &str) -> Result<()> {
    if found != expected as usize {
        return Err(TrainError::Format(format!(
            "{what}: bad magic {found:#010x}, expected {expected:#010x}"
        )));
    }
    Ok(())
}

fn check_body(body: usize, expected: usize, what: &str) -> Result<()> {
    if body < expected {
        return Err(TrainError::Format(format!(
            "{what}: truncated, {body} data bytes for {expected} expected"
        )));
    }
    if body > expected {
        return Err(TrainError::Format(format!(
            "{what}: {} trailing bytes",
            body - expected
        )));
    }
    Ok(())
}

/// Parses an IDX image/label pair. Pixels map to x/127.5 − 1.
pub fn load_idx(images_path: impl AsRef<Path>, labels_path: impl AsRef<Path>) -> Result<Dataset> {
    let images = read_file(images_path.as_ref())?;
    let labels = read_file(labels_path.as_ref())?;
    parse_idx(&images, &labels)
}

pub fn parse_idx(images: &[u8], labels: &[u8]) -> Result<Dataset> {
    let ih = header(images, 4, "images")?;
    check_magic(ih[0], IMAGE_MAGIC, "images")?;
    let (count, rows, cols) = (ih[1], ih[2], ih[3]);
    let dim = rows * cols;
    check_body(images.len() - 16, count * dim, "images")?;

    let lh = header(labels, 2, "labels")?;
    check_magic(lh[0], LABEL_MAGIC, "labels")?;
    check_body(labels.len() - 8, lh[1], "labels")?;
    if lh[1] != count {
        return Err(TrainError::Format(format!(
            "{count} images but {} labels",
            lh[1]
        )));
    }
    let features = images[16..].iter().map(|&b| b as f64 / 127.5 - 1.0).collect();
    let labels: Vec<usize> = labels[8..].iter().map(|&b| b as usize).collect();
    let classes = labels.iter().max().map_or(1, |m| m + 1);
    Dataset::new(features, labels, dim.max(1), classes)
}

/// `per_class` Gaussian samples around each of `classes` random centers on
/// the unit sphere of ℝ^dim, clipped to [−1, 1]. Samples are class-major.
pub fn synth_blobs(classes: usize, dim: usize, per_class: usize, spread: f64, seed: u64) -> Result<Dataset> {
    if classes < 2 {
        return Err(invalid(format!("need at least 2 classes, got {classes}")));
    }
    if dim == 0 {
        return Err(invalid("dim must be ≥ 1"));
    }
    if !(spread >= 0.0 && spread.is_finite()) {
        return Err(invalid(format!("spread must be finite and ≥ 0, got {spread}")));
    }
    let mut rng = stream_rng(seed, Stream::Data, &[0]);
    let centers: Vec<Vec<f64>> = (0..classes)
        .map(|_| loop {
            let v: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm > 0.0 {
                break v.into_iter().map(|x| x / norm).collect();
            }
        })
        .collect();
    let mut features = Vec::with_capacity(classes * per_class * dim);
    let mut labels = Vec::with_capacity(classes * per_class);
    for (c, center) in centers.iter().enumerate() {
        for _ in 0..per_class {
            features.extend(center.iter().map(|&m| {
                let noise: f64 = rng.sample(StandardNormal);
                (m + spread * noise).clamp(-1.0, 1.0)
            }));
            labels.push(c);
        }
    }
    Dataset::new(features, labels, dim, classes)
}
