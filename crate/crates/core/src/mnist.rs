//! MNIST IDX ingestion.
//!
//! Images are IDX3 (`0x00000803`, then count, rows, cols as big-endian `u32`,
//! then one unsigned byte per pixel). Labels are IDX1 (`0x00000801`, then
//! count, then one byte per label). Pixels are scaled by `1/255` on load.

use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::tensor::Tensor;

pub const IMAGE_MAGIC: u32 = 0x0000_0803;
pub const LABEL_MAGIC: u32 = 0x0000_0801;
pub const MNIST_SIDE: usize = 28;

pub const TRAIN_IMAGES: &str = "train-images-idx3-ubyte";
pub const TRAIN_LABELS: &str = "train-labels-idx1-ubyte";
pub const TEST_IMAGES: &str = "t10k-images-idx3-ubyte";
pub const TEST_LABELS: &str = "t10k-labels-idx1-ubyte";

#[derive(Debug, Error)]
pub enum IdxError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("wrong IDX magic: expected {expected:#010x}, found {found:#010x}")]
    WrongMagic { expected: u32, found: u32 },
    #[error("truncated IDX data: header promises {expected} bytes, found {found}")]
    Truncated { expected: usize, found: usize },
    #[error("expected 28x28 images, found {rows}x{cols}")]
    DimensionMismatch { rows: usize, cols: usize },
    #[error("label {value} at index {index} is outside 0..=9")]
    LabelOutOfRange { index: usize, value: u8 },
    #[error("requested {requested} samples but only {available} are available")]
    CountTooLarge { requested: usize, available: usize },
    #[error("a subset must contain at least one sample")]
    EmptySubset,
    #[error("{images} images but {labels} labels")]
    LengthMismatch { images: usize, labels: usize },
}

/// Images with shape `[N, rows, cols]` in `[0, 1]` and their digit labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    images: Tensor,
    labels: Vec<u8>,
}

impl Dataset {
    pub fn new(images: Tensor, labels: Vec<u8>) -> Result<Self, IdxError> {
        let n = images.shape().first().copied().unwrap_or(0);
        if n != labels.len() {
            return Err(IdxError::LengthMismatch {
                images: n,
                labels: labels.len(),
            });
        }
        if let Some((index, &value)) = labels.iter().enumerate().find(|(_, &l)| l > 9) {
            return Err(IdxError::LabelOutOfRange { index, value });
        }
        Ok(Self { images, labels })
    }

    /// Loads an image/label file pair.
    pub fn load(images: &Path, labels: &Path, strict: bool) -> Result<Self, IdxError> {
        Self::new(load_idx_images(images, strict)?, load_idx_labels(labels)?)
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn images(&self) -> &Tensor {
        &self.images
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    /// Shape of a single image, e.g. `[28, 28]`.
    pub fn image_shape(&self) -> &[usize] {
        &self.images.shape()[1..]
    }

    pub fn image_len(&self) -> usize {
        self.image_shape().iter().product()
    }

    /// Flat pixel slice of image `i`.
    pub fn image(&self, i: usize) -> &[f64] {
        let len = self.image_len();
        &self.images.data()[i * len..(i + 1) * len]
    }

    /// The first `count` samples (or all of them if fewer exist).
    pub fn take(&self, count: usize) -> Dataset {
        let count = count.min(self.len());
        self.select(&(0..count).collect::<Vec<_>>())
    }

    /// Samples at the given indices, in that order.
    pub fn select(&self, indices: &[usize]) -> Dataset {
        let len = self.image_len();
        let mut data = Vec::with_capacity(indices.len() * len);
        let mut labels = Vec::with_capacity(indices.len());
        for &i in indices {
            data.extend_from_slice(self.image(i));
            labels.push(self.labels[i]);
        }
        let mut shape = vec![indices.len()];
        shape.extend_from_slice(self.image_shape());
        Dataset {
            images: Tensor::new(shape, data),
            labels,
        }
    }

    /// Seeded sample of `count` distinct items; the same seed always picks the
    /// same items in the same order.
    pub fn subset(&self, count: usize, seed: u64) -> Result<Dataset, IdxError> {
        if count == 0 {
            return Err(IdxError::EmptySubset);
        }
        if count > self.len() {
            return Err(IdxError::CountTooLarge {
                requested: count,
                available: self.len(),
            });
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let picked = index::sample(&mut rng, self.len(), count).into_vec();
        Ok(self.select(&picked))
    }
}

/// The four standard MNIST files from one directory.
#[derive(Debug, Clone)]
pub struct Mnist {
    pub train: Dataset,
    pub test: Dataset,
}

impl Mnist {
    pub fn load(dir: &Path) -> Result<Self, IdxError> {
        Ok(Self {
            train: Dataset::load(&dir.join(TRAIN_IMAGES), &dir.join(TRAIN_LABELS), true)?,
            test: Dataset::load(&dir.join(TEST_IMAGES), &dir.join(TEST_LABELS), true)?,
        })
    }
}

fn read_file(path: &Path) -> Result<Vec<u8>, IdxError> {
    fs::read(path).map_err(|source| IdxError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn header_word(bytes: &[u8], word: usize, header_len: usize) -> Result<u32, IdxError> {
    let start = word * 4;
    match bytes.get(start..start + 4) {
        Some(b) => Ok(u32::from_be_bytes([b[0], b[1], b[2], b[3]])),
        None => Err(IdxError::Truncated {
            expected: header_len,
            found: bytes.len(),
        }),
    }
}

pub fn load_idx_images(path: &Path, strict: bool) -> Result<Tensor, IdxError> {
    parse_idx_images(&read_file(path)?, strict)
}

pub fn load_idx_labels(path: &Path) -> Result<Vec<u8>, IdxError> {
    parse_idx_labels(&read_file(path)?)
}

/// Parses IDX3 image bytes. With `strict`, anything other than 28x28 is rejected.
pub fn parse_idx_images(bytes: &[u8], strict: bool) -> Result<Tensor, IdxError> {
    let magic = header_word(bytes, 0, 16)?;
    if magic != IMAGE_MAGIC {
        return Err(IdxError::WrongMagic {
            expected: IMAGE_MAGIC,
            found: magic,
        });
    }
    let n = header_word(bytes, 1, 16)? as usize;
    let rows = header_word(bytes, 2, 16)? as usize;
    let cols = header_word(bytes, 3, 16)? as usize;
    if strict && (rows != MNIST_SIDE || cols != MNIST_SIDE) {
        return Err(IdxError::DimensionMismatch { rows, cols });
    }
    let payload = n * rows * cols;
    let body = &bytes[16..];
    if body.len() < payload {
        return Err(IdxError::Truncated {
            expected: 16 + payload,
            found: bytes.len(),
        });
    }
    let data = body[..payload].iter().map(|&b| f64::from(b) / 255.0).collect();
    Ok(Tensor::new(vec![n, rows, cols], data))
}

pub fn parse_idx_labels(bytes: &[u8]) -> Result<Vec<u8>, IdxError> {
    let magic = header_word(bytes, 0, 8)?;
    if magic != LABEL_MAGIC {
        return Err(IdxError::WrongMagic {
            expected: LABEL_MAGIC,
            found: magic,
        });
    }
    let n = header_word(bytes, 1, 8)? as usize;
    let body = &bytes[8..];
    if body.len() < n {
        return Err(IdxError::Truncated {
            expected: 8 + n,
            found: bytes.len(),
        });
    }
    let labels = body[..n].to_vec();
    if let Some((index, &value)) = labels.iter().enumerate().find(|(_, &l)| l > 9) {
        return Err(IdxError::LabelOutOfRange { index, value });
    }
    Ok(labels)
}

/// Serializes `[N, rows, cols]` images in `[0, 1]` back to IDX3 bytes.
pub fn encode_idx_images(images: &Tensor) -> Vec<u8> {
    let shape = images.shape();
    assert_eq!(shape.len(), 3, "IDX3 images must be [N, rows, cols]");
    let mut out = Vec::with_capacity(16 + images.len());
    out.extend_from_slice(&IMAGE_MAGIC.to_be_bytes());
    for &d in shape {
        out.extend_from_slice(&(d as u32).to_be_bytes());
    }
    out.extend(
        images
            .data()
            .iter()
            .map(|&x| (x.clamp(0.0, 1.0) * 255.0).round() as u8),
    );
    out
}

pub fn encode_idx_labels(labels: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(8 + labels.len());
    out.extend_from_slice(&LABEL_MAGIC.to_be_bytes());
    out.extend_from_slice(&(labels.len() as u32).to_be_bytes());
    out.extend_from_slice(labels);
    out
}

/// Writes `ds` as an image/label IDX pair.
pub fn write_dataset(ds: &Dataset, images: &Path, labels: &Path) -> std::io::Result<()> {
    fs::write(images, encode_idx_images(ds.images()))?;
    fs::write(labels, encode_idx_labels(ds.labels()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn image_fixture(magic: u32, n: u32, rows: u32, cols: u32, payload: &[u8]) -> Vec<u8> {
        let mut b = Vec::new();
        for w in [magic, n, rows, cols] {
            b.extend_from_slice(&w.to_be_bytes());
        }
        b.extend_from_slice(payload);
        b
    }

    #[test]
    fn all_white_images_load_as_ones() {
        let bytes = image_fixture(IMAGE_MAGIC, 2, 28, 28, &[0xFF; 2 * 784]);
        let t = parse_idx_images(&bytes, true).unwrap();
        assert_eq!(t.shape(), &[2, 28, 28]);
        assert!(t.data().iter().all(|&x| x == 1.0));
    }

    #[test]
    fn image_errors() {
        let bytes = image_fixture(LABEL_MAGIC, 2, 28, 28, &[0; 2 * 784]);
        assert!(matches!(
            parse_idx_images(&bytes, true),
            Err(IdxError::WrongMagic { found: 0x801, .. })
        ));

        let bytes = image_fixture(IMAGE_MAGIC, 2, 28, 28, &[0; 784]);
        assert!(matches!(
            parse_idx_images(&bytes, true),
            Err(IdxError::Truncated { .. })
        ));

        let bytes = image_fixture(IMAGE_MAGIC, 1, 3, 2, &[0; 6]);
        assert!(matches!(
            parse_idx_images(&bytes, true),
            Err(IdxError::DimensionMismatch { rows: 3, cols: 2 })
        ));
        assert_eq!(parse_idx_images(&bytes, false).unwrap().shape(), &[1, 3, 2]);

        assert!(matches!(
            parse_idx_images(&[0, 0, 8], false),
            Err(IdxError::Truncated { .. })
        ));
    }

    #[test]
    fn labels() {
        let mut bytes = encode_idx_labels(&[7, 0, 4]);
        assert_eq!(parse_idx_labels(&bytes).unwrap(), vec![7, 0, 4]);

        bytes[9] = 12;
        assert!(matches!(
            parse_idx_labels(&bytes),
            Err(IdxError::LabelOutOfRange { index: 1, value: 12 })
        ));

        assert!(parse_idx_labels(&encode_idx_labels(&[])).unwrap().is_empty());

        let short = &encode_idx_labels(&[1, 2, 3])[..10];
        assert!(matches!(parse_idx_labels(short), Err(IdxError::Truncated { .. })));
    }

    fn small_dataset(n: usize) -> Dataset {
        let data = (0..n * 4).map(|i| (i % 256) as f64 / 255.0).collect();
        let labels = (0..n).map(|i| (i % 10) as u8).collect();
        Dataset::new(Tensor::new(vec![n, 2, 2], data), labels).unwrap()
    }

    #[test]
    fn full_subset_is_a_permutation() {
        let ds = small_dataset(10);
        let sub = ds.subset(10, 99).unwrap();
        let mut a: Vec<_> = (0..10).map(|i| (ds.labels()[i], ds.image(i).to_vec())).collect();
        let mut b: Vec<_> = (0..10).map(|i| (sub.labels()[i], sub.image(i).to_vec())).collect();
        a.sort_by(|x, y| x.partial_cmp(y).unwrap());
        b.sort_by(|x, y| x.partial_cmp(y).unwrap());
        assert_eq!(a, b);
    }

    #[test]
    fn subset_is_deterministic() {
        let ds = small_dataset(10);
        assert_eq!(ds.subset(5, 1).unwrap(), ds.subset(5, 1).unwrap());
    }

    #[test]
    fn subset_bounds() {
        let ds = small_dataset(4);
        assert!(matches!(
            ds.subset(5, 0),
            Err(IdxError::CountTooLarge { requested: 5, available: 4 })
        ));
        assert!(matches!(ds.subset(0, 0), Err(IdxError::EmptySubset)));
    }

    #[test]
    fn missing_file_names_the_path() {
        let err = load_idx_labels(Path::new("/nonexistent/labels")).unwrap_err();
        assert!(err.to_string().contains("/nonexistent/labels"));
    }
}
