//! Datasets: IDX (MNIST) files, synthetic Gaussian blobs and holdout splits.

use std::f64::consts::TAU;
use std::fmt;
use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand_distr::{Distribution, StandardNormal};
use thiserror::Error;

use crate::rng;

pub const IDX_IMAGES_MAGIC: u32 = 0x0000_0803;
pub const IDX_LABELS_MAGIC: u32 = 0x0000_0801;

/// Radius of the circle that synthetic blob centers sit on.
pub const BLOB_RADIUS: f64 = 5.0;

/// Which half of an IDX pair an error refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IdxFile {
    Images,
    Labels,
}

impl fmt::Display for IdxFile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            IdxFile::Images => f.write_str("images"),
            IdxFile::Labels => f.write_str("labels"),
        }
    }
}

#[derive(Debug, Error)]
pub enum DataError {
    #[error("failed to read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{file} file has magic number {found:#010x}, expected {expected:#010x}")]
    BadMagic {
        file: IdxFile,
        expected: u32,
        found: u32,
    },
    #[error("{file} file is truncated: need {expected} bytes, found {actual}")]
    Truncated {
        file: IdxFile,
        expected: usize,
        actual: usize,
    },
    #[error("image count {images} does not match label count {labels}")]
    CountMismatch { images: usize, labels: usize },
    #[error("label {label} at index {index} is outside [0, {num_classes})")]
    LabelOutOfRange {
        index: usize,
        label: usize,
        num_classes: usize,
    },
    #[error("feature matrix has {rows} rows but there are {labels} labels")]
    ShapeMismatch { rows: usize, labels: usize },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

/// A labelled feature matrix stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    name: String,
    features: Vec<f64>,
    n_features: usize,
    labels: Vec<usize>,
    num_classes: usize,
}

impl Dataset {
    pub fn new(
        name: impl Into<String>,
        features: Vec<f64>,
        n_features: usize,
        labels: Vec<usize>,
        num_classes: usize,
    ) -> Result<Self, DataError> {
        if num_classes < 2 {
            return Err(DataError::InvalidArgument(format!(
                "num_classes must be at least 2, got {num_classes}"
            )));
        }
        if n_features == 0 {
            return Err(DataError::InvalidArgument(
                "n_features must be positive".into(),
            ));
        }
        if features.len() != labels.len() * n_features {
            return Err(DataError::ShapeMismatch {
                rows: features.len() / n_features,
                labels: labels.len(),
            });
        }
        if let Some((index, &label)) = labels.iter().enumerate().find(|(_, &l)| l >= num_classes) {
            return Err(DataError::LabelOutOfRange {
                index,
                label,
                num_classes,
            });
        }
        Ok(Self {
            name: name.into(),
            features,
            n_features,
            labels,
            num_classes,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn label(&self, i: usize) -> usize {
        self.labels[i]
    }

    pub fn features(&self) -> &[f64] {
        &self.features
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.features[i * self.n_features..(i + 1) * self.n_features]
    }

    /// Number of samples carrying each class label.
    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.num_classes];
        for &l in &self.labels {
            counts[l] += 1;
        }
        counts
    }

    /// A new dataset holding the given rows, in the given order.
    pub fn subset(&self, indices: &[usize], name: impl Into<String>) -> Dataset {
        let mut features = Vec::with_capacity(indices.len() * self.n_features);
        let mut labels = Vec::with_capacity(indices.len());
        for &i in indices {
            features.extend_from_slice(self.row(i));
            labels.push(self.labels[i]);
        }
        Dataset {
            name: name.into(),
            features,
            n_features: self.n_features,
            labels,
            num_classes: self.num_classes,
        }
    }

    /// Keeps only the first `n` samples.
    pub fn truncated(&self, n: usize) -> Dataset {
        let n = n.min(self.len());
        let idx: Vec<usize> = (0..n).collect();
        self.subset(&idx, self.name.clone())
    }
}

fn read_u32_be(bytes: &[u8], offset: usize) -> u32 {
    u32::from_be_bytes([
        bytes[offset],
        bytes[offset + 1],
        bytes[offset + 2],
        bytes[offset + 3],
    ])
}

fn check_len(file: IdxFile, bytes: &[u8], expected: usize) -> Result<(), DataError> {
    if bytes.len() < expected {
        return Err(DataError::Truncated {
            file,
            expected,
            actual: bytes.len(),
        });
    }
    Ok(())
}

fn check_magic(file: IdxFile, bytes: &[u8], expected: u32) -> Result<(), DataError> {
    check_len(file, bytes, 4)?;
    let found = read_u32_be(bytes, 0);
    if found != expected {
        return Err(DataError::BadMagic {
            file,
            expected,
            found,
        });
    }
    Ok(())
}

/// Parses an in-memory IDX image/label pair. Pixels are scaled by 1/255 and
/// MNIST's ten classes are assumed.
pub fn parse_idx_pair(
    images: &[u8],
    labels: &[u8],
    name: impl Into<String>,
) -> Result<Dataset, DataError> {
    const NUM_CLASSES: usize = 10;

    check_magic(IdxFile::Images, images, IDX_IMAGES_MAGIC)?;
    check_len(IdxFile::Images, images, 16)?;
    let n_images = read_u32_be(images, 4) as usize;
    let rows = read_u32_be(images, 8) as usize;
    let cols = read_u32_be(images, 12) as usize;
    let pixels = rows * cols;
    check_len(IdxFile::Images, images, 16 + n_images * pixels)?;

    check_magic(IdxFile::Labels, labels, IDX_LABELS_MAGIC)?;
    check_len(IdxFile::Labels, labels, 8)?;
    let n_labels = read_u32_be(labels, 4) as usize;
    check_len(IdxFile::Labels, labels, 8 + n_labels)?;

    if n_images != n_labels {
        return Err(DataError::CountMismatch {
            images: n_images,
            labels: n_labels,
        });
    }

    let features = images[16..16 + n_images * pixels]
        .iter()
        .map(|&b| f64::from(b) / 255.0)
        .collect();
    let labels = labels[8..8 + n_labels]
        .iter()
        .map(|&b| usize::from(b))
        .collect();
    Dataset::new(name, features, pixels, labels, NUM_CLASSES)
}

fn read_file(path: &Path) -> Result<Vec<u8>, DataError> {
    fs::read(path).map_err(|source| DataError::Io {
        path: path.display().to_string(),
        source,
    })
}

/// Loads an MNIST-style IDX pair from disk.
pub fn load_mnist_idx(
    images_path: impl AsRef<Path>,
    labels_path: impl AsRef<Path>,
) -> Result<Dataset, DataError> {
    let images_path = images_path.as_ref();
    let images = read_file(images_path)?;
    let labels = read_file(labels_path.as_ref())?;
    let name = images_path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "mnist".into());
    parse_idx_pair(&images, &labels, name)
}

/// Encodes a dataset back into IDX bytes. Features are mapped to bytes with
/// `round(x * 255)`, the inverse of the loader's scaling.
pub fn encode_idx_pair(
    dataset: &Dataset,
    rows: usize,
    cols: usize,
) -> Result<(Vec<u8>, Vec<u8>), DataError> {
    if rows * cols != dataset.n_features() {
        return Err(DataError::InvalidArgument(format!(
            "{rows}x{cols} images do not match {} features",
            dataset.n_features()
        )));
    }
    if dataset.num_classes() > 256 {
        return Err(DataError::InvalidArgument(
            "labels must fit in a byte".into(),
        ));
    }
    let n = dataset.len() as u32;
    let mut images = Vec::with_capacity(16 + dataset.features().len());
    images.extend_from_slice(&IDX_IMAGES_MAGIC.to_be_bytes());
    images.extend_from_slice(&n.to_be_bytes());
    images.extend_from_slice(&(rows as u32).to_be_bytes());
    images.extend_from_slice(&(cols as u32).to_be_bytes());
    images.extend(
        dataset
            .features()
            .iter()
            .map(|&x| (x.clamp(0.0, 1.0) * 255.0).round() as u8),
    );
    let mut labels = Vec::with_capacity(8 + dataset.len());
    labels.extend_from_slice(&IDX_LABELS_MAGIC.to_be_bytes());
    labels.extend_from_slice(&n.to_be_bytes());
    labels.extend(dataset.labels().iter().map(|&l| l as u8));
    Ok((images, labels))
}

/// 2-D Gaussian clusters, one per class, centered on a circle of radius 5.
///
/// Samples are interleaved round-robin by class: sample `i` has label
/// `i % num_classes`.
pub fn synth_blobs(
    num_classes: usize,
    samples_per_class: usize,
    spread: f64,
    seed: u64,
) -> Result<Dataset, DataError> {
    if num_classes < 2 {
        return Err(DataError::InvalidArgument(format!(
            "num_classes must be at least 2, got {num_classes}"
        )));
    }
    if samples_per_class == 0 {
        return Err(DataError::InvalidArgument(
            "samples_per_class must be positive".into(),
        ));
    }
    if !(spread > 0.0 && spread.is_finite()) {
        return Err(DataError::InvalidArgument(format!(
            "spread must be positive and finite, got {spread}"
        )));
    }
    let centers: Vec<(f64, f64)> = (0..num_classes)
        .map(|c| {
            let angle = TAU * c as f64 / num_classes as f64;
            (BLOB_RADIUS * angle.cos(), BLOB_RADIUS * angle.sin())
        })
        .collect();
    let mut rng = rng::seeded(seed);
    let n = num_classes * samples_per_class;
    let mut features = Vec::with_capacity(2 * n);
    let mut labels = Vec::with_capacity(n);
    for _ in 0..samples_per_class {
        for (class, &(cx, cy)) in centers.iter().enumerate() {
            let dx: f64 = StandardNormal.sample(&mut rng);
            let dy: f64 = StandardNormal.sample(&mut rng);
            features.push(cx + spread * dx);
            features.push(cy + spread * dy);
            labels.push(class);
        }
    }
    Dataset::new(
        format!("blobs-{num_classes}x{samples_per_class}"),
        features,
        2,
        labels,
        num_classes,
    )
}

/// Number of held-out samples for a split of `n` samples.
pub fn holdout_size(n: usize, test_fraction: f64) -> usize {
    (n as f64 * test_fraction).round() as usize
}

/// Shuffled (train, test) index lists. Both are sorted ascending.
pub fn holdout_split_indices(
    n: usize,
    test_fraction: f64,
    seed: u64,
) -> Result<(Vec<usize>, Vec<usize>), DataError> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(DataError::InvalidArgument(format!(
            "test_fraction must lie in (0, 1), got {test_fraction}"
        )));
    }
    let n_test = holdout_size(n, test_fraction);
    if n_test == 0 || n_test >= n {
        return Err(DataError::InvalidArgument(format!(
            "test_fraction {test_fraction} leaves an empty split of {n} samples"
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng::seeded(seed));
    let mut test = order[..n_test].to_vec();
    let mut train = order[n_test..].to_vec();
    test.sort_unstable();
    train.sort_unstable();
    Ok((train, test))
}

pub fn holdout_split(
    dataset: &Dataset,
    test_fraction: f64,
    seed: u64,
) -> Result<(Dataset, Dataset), DataError> {
    let (train, test) = holdout_split_indices(dataset.len(), test_fraction, seed)?;
    Ok((
        dataset.subset(&train, format!("{}-train", dataset.name())),
        dataset.subset(&test, format!("{}-test", dataset.name())),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn idx_pair(pixels: &[&[u8]], labels: &[u8], rows: u32, cols: u32) -> (Vec<u8>, Vec<u8>) {
        let mut img = Vec::new();
        img.extend_from_slice(&2051u32.to_be_bytes());
        img.extend_from_slice(&(pixels.len() as u32).to_be_bytes());
        img.extend_from_slice(&rows.to_be_bytes());
        img.extend_from_slice(&cols.to_be_bytes());
        for p in pixels {
            img.extend_from_slice(p);
        }
        let mut lab = Vec::new();
        lab.extend_from_slice(&2049u32.to_be_bytes());
        lab.extend_from_slice(&(labels.len() as u32).to_be_bytes());
        lab.extend_from_slice(labels);
        (img, lab)
    }

    #[test]
    fn two_image_pair_scales_bytes() {
        let (img, lab) = idx_pair(&[&[0, 0, 0, 0], &[255, 255, 255, 255]], &[3, 7], 2, 2);
        let ds = parse_idx_pair(&img, &lab, "tiny").unwrap();
        assert_eq!(ds.len(), 2);
        assert_eq!(ds.n_features(), 4);
        assert_eq!(ds.row(0), &[0.0; 4]);
        assert_eq!(ds.row(1), &[1.0; 4]);
        assert_eq!(ds.labels(), &[3, 7]);
        assert_eq!(ds.num_classes(), 10);
    }

    #[test]
    fn labels_file_as_images_is_a_magic_error() {
        let (_, lab) = idx_pair(&[&[0]], &[1], 1, 1);
        let err = parse_idx_pair(&lab, &lab, "x").unwrap_err();
        assert!(matches!(
            err,
            DataError::BadMagic {
                file: IdxFile::Images,
                found: 2049,
                ..
            }
        ));
    }

    #[test]
    fn truncated_and_mismatched_pairs() {
        let (mut img, lab) = idx_pair(&[&[1, 2], &[3, 4]], &[0, 1], 1, 2);
        img.pop();
        assert!(matches!(
            parse_idx_pair(&img, &lab, "x"),
            Err(DataError::Truncated {
                file: IdxFile::Images,
                ..
            })
        ));
        let (img, _) = idx_pair(&[&[1, 2], &[3, 4]], &[0, 1], 1, 2);
        let (_, lab1) = idx_pair(&[&[1, 2]], &[0], 1, 2);
        assert!(matches!(
            parse_idx_pair(&img, &lab1, "x"),
            Err(DataError::CountMismatch {
                images: 2,
                labels: 1
            })
        ));
        assert!(matches!(
            parse_idx_pair(&img[..10], &lab1, "x"),
            Err(DataError::Truncated { .. })
        ));
    }

    #[test]
    fn out_of_range_label_is_rejected() {
        let (img, lab) = idx_pair(&[&[1]], &[12], 1, 1);
        assert!(matches!(
            parse_idx_pair(&img, &lab, "x"),
            Err(DataError::LabelOutOfRange { label: 12, .. })
        ));
    }

    #[test]
    fn blobs_counts_and_determinism() {
        let a = synth_blobs(10, 100, 0.5, 7).unwrap();
        let b = synth_blobs(10, 100, 0.5, 7).unwrap();
        assert_eq!(a.len(), 1000);
        assert_eq!(a.n_features(), 2);
        assert_eq!(a.class_counts(), vec![100; 10]);
        assert_eq!(a.features(), b.features());
        assert_eq!(a.label(13), 3);
    }

    #[test]
    fn blobs_reject_bad_arguments() {
        assert!(synth_blobs(1, 10, 0.5, 0).is_err());
        assert!(synth_blobs(3, 0, 0.5, 0).is_err());
        assert!(synth_blobs(3, 10, 0.0, 0).is_err());
    }

    #[test]
    fn holdout_is_a_deterministic_partition() {
        let (train, test) = holdout_split_indices(1000, 0.2, 1).unwrap();
        assert_eq!((train.len(), test.len()), (800, 200));
        let again = holdout_split_indices(1000, 0.2, 1).unwrap();
        assert_eq!((train.clone(), test.clone()), again);
        let mut all: Vec<usize> = train.iter().chain(&test).copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..1000).collect::<Vec<_>>());
    }

    #[test]
    fn holdout_rejects_degenerate_fractions() {
        assert!(holdout_split_indices(100, 0.0, 0).is_err());
        assert!(holdout_split_indices(100, 1.0, 0).is_err());
        assert!(holdout_split_indices(3, 0.01, 0).is_err());
    }
}
