//! Dataset loading and preparation: IDX image/label parsing, deterministic
//! synthetic classification data, one-hot label encoding.
//!
//! Datasets are fetched out of band; nothing here touches the network.

use std::fs;
use std::io::Cursor;
use std::path::Path;

use byteorder::{BigEndian, ReadBytesExt};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

use crate::matrix::Matrix;

const IDX_IMAGE_MAGIC: u32 = 0x0000_0803;
const IDX_LABEL_MAGIC: u32 = 0x0000_0801;

/// How far apart synthetic class centers are drawn; large enough that a
/// desk-scale model separates the clusters comfortably.
const SYNTH_SEPARATION: f64 = 5.0;

#[derive(Debug, Error)]
pub enum DataError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("bad magic number {found:#010x}, expected {expected:#010x}")]
    BadMagic { expected: u32, found: u32 },
    #[error("truncated file: header promises {needed} bytes, found {got}")]
    Truncated { needed: usize, got: usize },
    #[error("{images} images but {labels} labels")]
    CountMismatch { images: usize, labels: usize },
    #[error("label {label} out of range for {classes} classes")]
    LabelOutOfRange { label: usize, classes: usize },
}

/// Inputs in `[0, 1]` paired with integer class labels.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub x: Matrix,
    pub labels: Vec<usize>,
    pub classes: usize,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.x.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.x.rows() == 0
    }

    /// One-hot matrix of this dataset's labels.
    pub fn one_hot_labels(&self) -> Matrix {
        one_hot(&self.labels, self.classes).expect("labels validated on construction")
    }

    /// Copy of the sample range `[start, end)`.
    pub fn slice(&self, start: usize, end: usize) -> Dataset {
        Dataset {
            x: self.x.rows_range(start..end),
            labels: self.labels[start..end].to_vec(),
            classes: self.classes,
        }
    }
}

/// Parses an IDX image/label file pair (the layout used by MNIST): big-endian
/// magic and dimension header, then raw bytes. Pixels are scaled by 1/255.
pub fn load_idx(
    images_path: impl AsRef<Path>,
    labels_path: impl AsRef<Path>,
) -> Result<Dataset, DataError> {
    let images = fs::read(images_path)?;
    let labels = fs::read(labels_path)?;

    let mut cur = Cursor::new(&images);
    let magic = cur.read_u32::<BigEndian>()?;
    if magic != IDX_IMAGE_MAGIC {
        return Err(DataError::BadMagic {
            expected: IDX_IMAGE_MAGIC,
            found: magic,
        });
    }
    let count = cur.read_u32::<BigEndian>()? as usize;
    let rows = cur.read_u32::<BigEndian>()? as usize;
    let cols = cur.read_u32::<BigEndian>()? as usize;
    let pixels = count * rows * cols;
    if images.len() < 16 + pixels {
        return Err(DataError::Truncated {
            needed: 16 + pixels,
            got: images.len(),
        });
    }
    let data = images[16..16 + pixels]
        .iter()
        .map(|&b| f64::from(b) / 255.0)
        .collect();
    let x = Matrix::from_vec(count, rows * cols, data);

    let mut cur = Cursor::new(&labels);
    let magic = cur.read_u32::<BigEndian>()?;
    if magic != IDX_LABEL_MAGIC {
        return Err(DataError::BadMagic {
            expected: IDX_LABEL_MAGIC,
            found: magic,
        });
    }
    let label_count = cur.read_u32::<BigEndian>()? as usize;
    if labels.len() < 8 + label_count {
        return Err(DataError::Truncated {
            needed: 8 + label_count,
            got: labels.len(),
        });
    }
    if label_count != count {
        return Err(DataError::CountMismatch {
            images: count,
            labels: label_count,
        });
    }
    let labels: Vec<usize> = labels[8..8 + label_count]
        .iter()
        .map(|&b| b as usize)
        .collect();
    let classes = labels.iter().copied().max().map_or(0, |m| m + 1);

    Ok(Dataset { x, labels, classes })
}

/// Deterministic synthetic classification data: Gaussian clusters around
/// per-class centers, squashed into `[0, 1]` by a sigmoid. Classes are
/// balanced round-robin; the same seed reproduces the dataset exactly.
pub fn synth_classification(seed: u64, samples: usize, dim: usize, classes: usize) -> Dataset {
    assert!(classes >= 2, "need at least two classes");
    assert!(samples >= classes, "need at least one sample per class");
    assert!(dim >= 1, "need at least one input dimension");

    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let centers: Vec<Vec<f64>> = (0..classes)
        .map(|_| {
            (0..dim)
                .map(|_| rng.random_range(-SYNTH_SEPARATION..SYNTH_SEPARATION))
                .collect()
        })
        .collect();

    let mut data = Vec::with_capacity(samples * dim);
    let mut labels = Vec::with_capacity(samples);
    for i in 0..samples {
        let class = i % classes;
        labels.push(class);
        for j in 0..dim {
            let noise: f64 = rng.sample(StandardNormal);
            let v = centers[class][j] + noise;
            data.push(1.0 / (1.0 + (-v).exp()));
        }
    }

    Dataset {
        x: Matrix::from_vec(samples, dim, data),
        labels,
        classes,
    }
}

/// One-hot encoding: one row per label, exactly one `1.0` per row.
pub fn one_hot(labels: &[usize], classes: usize) -> Result<Matrix, DataError> {
    let mut m = Matrix::zeros(labels.len(), classes);
    for (i, &label) in labels.iter().enumerate() {
        if label >= classes {
            return Err(DataError::LabelOutOfRange { label, classes });
        }
        m[(i, label)] = 1.0;
    }
    Ok(m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write_idx_pair(
        dir: &std::path::Path,
        pixels: &[u8],
        count: u32,
        side: u32,
        labels: &[u8],
    ) -> (std::path::PathBuf, std::path::PathBuf) {
        let images_path = dir.join("images.idx");
        let labels_path = dir.join("labels.idx");

        let mut f = std::fs::File::create(&images_path).unwrap();
        f.write_all(&IDX_IMAGE_MAGIC.to_be_bytes()).unwrap();
        f.write_all(&count.to_be_bytes()).unwrap();
        f.write_all(&side.to_be_bytes()).unwrap();
        f.write_all(&side.to_be_bytes()).unwrap();
        f.write_all(pixels).unwrap();

        let mut f = std::fs::File::create(&labels_path).unwrap();
        f.write_all(&IDX_LABEL_MAGIC.to_be_bytes()).unwrap();
        f.write_all(&(labels.len() as u32).to_be_bytes()).unwrap();
        f.write_all(labels).unwrap();

        (images_path, labels_path)
    }

    #[test]
    fn idx_fixture_scales_pixel_endpoints() {
        let dir = tempfile::tempdir().unwrap();
        let pixels = [0u8, 255, 255, 0, 255, 0, 0, 255];
        let (images, labels) = write_idx_pair(dir.path(), &pixels, 2, 2, &[0, 1]);
        let ds = load_idx(&images, &labels).unwrap();
        assert_eq!(ds.len(), 2);
        assert_eq!(ds.x.cols(), 4);
        assert_eq!(ds.x.row(0), &[0.0, 1.0, 1.0, 0.0]);
        assert_eq!(ds.x.row(1), &[1.0, 0.0, 0.0, 1.0]);
        assert_eq!(ds.labels, vec![0, 1]);
        assert_eq!(ds.classes, 2);
    }

    #[test]
    fn idx_truncated_file_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let pixels = [0u8, 255, 255]; // one byte short of a single 2x2 image
        let (images, labels) = write_idx_pair(dir.path(), &pixels, 1, 2, &[0, 1]);
        assert!(matches!(
            load_idx(&images, &labels),
            Err(DataError::Truncated { .. })
        ));
    }

    #[test]
    fn idx_bad_magic_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let images = dir.path().join("bad.idx");
        std::fs::write(&images, 0xdeadbeefu32.to_be_bytes()).unwrap();
        let labels = dir.path().join("labels.idx");
        std::fs::write(&labels, IDX_LABEL_MAGIC.to_be_bytes()).unwrap();
        assert!(matches!(
            load_idx(&images, &labels),
            Err(DataError::BadMagic { .. })
        ));
    }

    #[test]
    fn idx_count_mismatch_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let pixels = [0u8; 8];
        let (images, labels) = write_idx_pair(dir.path(), &pixels, 2, 2, &[0, 1, 2]);
        assert!(matches!(
            load_idx(&images, &labels),
            Err(DataError::CountMismatch { images: 2, labels: 3 })
        ));
    }

    #[test]
    fn synth_is_deterministic_and_balanced() {
        let a = synth_classification(7, 100, 10, 4);
        let b = synth_classification(7, 100, 10, 4);
        assert_eq!(a.x.data(), b.x.data());
        assert_eq!(a.labels, b.labels);
        for class in 0..4 {
            assert_eq!(a.labels.iter().filter(|&&l| l == class).count(), 25);
        }
        assert!(a.x.data().iter().all(|&v| (0.0..=1.0).contains(&v)));

        let c = synth_classification(8, 100, 10, 4);
        assert_ne!(a.x.data(), c.x.data());
    }

    #[test]
    fn synth_minimal_case_has_one_sample_per_class() {
        let ds = synth_classification(1, 2, 3, 2);
        assert_eq!(ds.len(), 2);
        assert_eq!(ds.labels, vec![0, 1]);
    }

    #[test]
    fn one_hot_basics() {
        let m = one_hot(&[0, 2], 3).unwrap();
        assert_eq!(m.row(0), &[1.0, 0.0, 0.0]);
        assert_eq!(m.row(1), &[0.0, 0.0, 1.0]);

        let empty = one_hot(&[], 4).unwrap();
        assert_eq!(empty.rows(), 0);
        assert_eq!(empty.cols(), 4);

        assert!(matches!(
            one_hot(&[3], 3),
            Err(DataError::LabelOutOfRange { label: 3, classes: 3 })
        ));
    }

    #[test]
    fn one_hot_rows_sum_to_one_and_round_trip() {
        let labels: Vec<usize> = (0..50).map(|i| (i * 7) % 6).collect();
        let m = one_hot(&labels, 6).unwrap();
        for i in 0..m.rows() {
            assert_eq!(m.row(i).iter().sum::<f64>(), 1.0);
            let argmax = m.row(i).iter().position(|&v| v == 1.0).unwrap();
            assert_eq!(argmax, labels[i]);
        }
    }

    #[test]
    fn dataset_slicing_preserves_alignment() {
        let ds = synth_classification(3, 30, 5, 3);
        let part = ds.slice(10, 20);
        assert_eq!(part.len(), 10);
        assert_eq!(part.labels, &ds.labels[10..20]);
        assert_eq!(part.x.row(0), ds.x.row(10));
    }
}
