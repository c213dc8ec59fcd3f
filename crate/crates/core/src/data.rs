//! MNIST IDX ingestion, parity filtering, seeded subsetting and batching.
//!
//! Pixels are kept as the raw bytes from the IDX payload and converted to
//! `byte / 255` on access, which keeps 60k digits in ~47 MB and makes
//! re-serialization byte-exact.

use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::seed;
use crate::tensor::{ImageShape, ImageTensor};
use crate::{Error, Result};

pub const IMAGES_MAGIC: u32 = 0x0000_0803;
pub const LABELS_MAGIC: u32 = 0x0000_0801;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Parity {
    Even,
    Odd,
}

impl Parity {
    pub fn matches(self, label: u8) -> bool {
        match self {
            Parity::Even => label.is_multiple_of(2),
            Parity::Odd => label % 2 == 1,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Parity::Even => "even",
            Parity::Odd => "odd",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    shape: ImageShape,
    pixels: Vec<u8>,
    labels: Vec<u8>,
    provenance: String,
}

/// One mini-batch: dataset indices plus their pixels stacked row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Batch {
    pub indices: Vec<usize>,
    pub pixels: Vec<f64>,
}

impl Batch {
    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }
}

fn read_u32(bytes: &[u8], at: usize, what: &str) -> Result<u32> {
    bytes
        .get(at..at + 4)
        .map(|b| u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
        .ok_or_else(|| Error::Length(format!("{what} header")))
}

impl LabeledDataset {
    pub fn new(shape: ImageShape, pixels: Vec<u8>, labels: Vec<u8>, provenance: impl Into<String>) -> Result<Self> {
        if pixels.len() != labels.len() * shape.len() {
            return Err(Error::Consistency(format!(
                "{} pixel bytes for {} images of {} values",
                pixels.len(),
                labels.len(),
                shape.len()
            )));
        }
        if let Some(l) = labels.iter().find(|&&l| l > 9) {
            return Err(Error::Format { what: "labels", detail: format!("label {l} outside 0..=9") });
        }
        Ok(Self { shape, pixels, labels, provenance: provenance.into() })
    }

    /// Parse an IDX image/label pair.
    pub fn from_idx_bytes(images: &[u8], labels: &[u8], provenance: impl Into<String>) -> Result<Self> {
        let magic = read_u32(images, 0, "image file")?;
        if magic != IMAGES_MAGIC {
            return Err(Error::Format {
                what: "image file",
                detail: format!("magic {magic:#010x}, expected {IMAGES_MAGIC:#010x}"),
            });
        }
        let count = read_u32(images, 4, "image file")? as usize;
        let rows = read_u32(images, 8, "image file")? as usize;
        let cols = read_u32(images, 12, "image file")? as usize;
        let shape = ImageShape::gray(cols, rows);
        let payload = &images[16..];
        if payload.len() < count * shape.len() {
            return Err(Error::Length("image file".into()));
        }
        if payload.len() > count * shape.len() {
            return Err(Error::Format { what: "image file", detail: "trailing bytes after payload".into() });
        }

        let magic = read_u32(labels, 0, "label file")?;
        if magic != LABELS_MAGIC {
            return Err(Error::Format {
                what: "label file",
                detail: format!("magic {magic:#010x}, expected {LABELS_MAGIC:#010x}"),
            });
        }
        let label_count = read_u32(labels, 4, "label file")? as usize;
        let label_payload = &labels[8..];
        if label_payload.len() < label_count {
            return Err(Error::Length("label file".into()));
        }
        if label_payload.len() > label_count {
            return Err(Error::Format { what: "label file", detail: "trailing bytes after payload".into() });
        }
        if label_count != count {
            return Err(Error::Consistency(format!("{count} images but {label_count} labels")));
        }
        Self::new(shape, payload.to_vec(), label_payload.to_vec(), provenance)
    }

    /// Serialize back to an IDX image/label pair.
    pub fn to_idx_bytes(&self) -> (Vec<u8>, Vec<u8>) {
        let mut images = Vec::with_capacity(16 + self.pixels.len());
        images.extend_from_slice(&IMAGES_MAGIC.to_be_bytes());
        images.extend_from_slice(&(self.len() as u32).to_be_bytes());
        images.extend_from_slice(&(self.shape.height as u32).to_be_bytes());
        images.extend_from_slice(&(self.shape.width as u32).to_be_bytes());
        images.extend_from_slice(&self.pixels);
        let mut labels = Vec::with_capacity(8 + self.labels.len());
        labels.extend_from_slice(&LABELS_MAGIC.to_be_bytes());
        labels.extend_from_slice(&(self.len() as u32).to_be_bytes());
        labels.extend_from_slice(&self.labels);
        (images, labels)
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn shape(&self) -> ImageShape {
        self.shape
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    /// Where the data came from and which filters were applied.
    pub fn provenance(&self) -> &str {
        &self.provenance
    }

    pub fn image_bytes(&self, index: usize) -> &[u8] {
        let n = self.shape.len();
        &self.pixels[index * n..(index + 1) * n]
    }

    pub fn image(&self, index: usize) -> ImageTensor {
        ImageTensor::from_bytes(self.shape, self.image_bytes(index)).expect("bytes always map into [0, 1]")
    }

    /// Pixels of `indices` stacked row-major as `byte / 255`.
    pub fn pixel_rows(&self, indices: &[usize]) -> Vec<f64> {
        let mut out = Vec::with_capacity(indices.len() * self.shape.len());
        for &i in indices {
            out.extend(self.image_bytes(i).iter().map(|&b| b as f64 / 255.0));
        }
        out
    }

    /// Items at `indices`, in that order.
    pub fn select(&self, indices: &[usize], description: &str) -> Self {
        let mut pixels = Vec::with_capacity(indices.len() * self.shape.len());
        let mut labels = Vec::with_capacity(indices.len());
        for &i in indices {
            pixels.extend_from_slice(self.image_bytes(i));
            labels.push(self.labels[i]);
        }
        Self { shape: self.shape, pixels, labels, provenance: format!("{} | {description}", self.provenance) }
    }

    /// Items whose label has the given parity, order preserved.
    pub fn filter_parity(&self, parity: Parity) -> Self {
        let keep: Vec<usize> = (0..self.len()).filter(|&i| parity.matches(self.labels[i])).collect();
        self.select(&keep, &format!("parity={}", parity.name()))
    }

    /// Seeded permutation of the dataset, truncated to `count` items.
    pub fn shuffle_take(&self, seed: u64, count: usize) -> Result<Self> {
        if count > self.len() {
            return Err(Error::Usage(format!("cannot take {count} items from {}", self.len())));
        }
        let mut order: Vec<usize> = (0..self.len()).collect();
        order.shuffle(&mut seed::rng(seed));
        order.truncate(count);
        Ok(self.select(&order, &format!("shuffle_take(seed={seed}, count={count})")))
    }

    /// Index order of epoch `epoch` for a given `epoch_seed`.
    pub fn epoch_order(&self, epoch_seed: u64, epoch: u64) -> Vec<usize> {
        let mut order: Vec<usize> = (0..self.len()).collect();
        order.shuffle(&mut seed::rng(seed::derive(epoch_seed, &[epoch])));
        order
    }

    /// Mini-batches of one epoch; the last batch may be short.
    pub fn batches(&self, batch_size: usize, epoch_seed: u64, epoch: u64) -> Result<Batches<'_>> {
        if batch_size == 0 {
            return Err(Error::Usage("batch size must be at least 1".into()));
        }
        Ok(Batches { ds: self, order: self.epoch_order(epoch_seed, epoch), pos: 0, batch_size })
    }
}

pub struct Batches<'a> {
    ds: &'a LabeledDataset,
    order: Vec<usize>,
    pos: usize,
    batch_size: usize,
}

impl Iterator for Batches<'_> {
    type Item = Batch;

    fn next(&mut self) -> Option<Batch> {
        if self.pos >= self.order.len() {
            return None;
        }
        let end = (self.pos + self.batch_size).min(self.order.len());
        let indices = self.order[self.pos..end].to_vec();
        self.pos = end;
        let pixels = self.ds.pixel_rows(&indices);
        Some(Batch { indices, pixels })
    }
}

/// Read an IDX image file and its label file.
pub fn load_idx(images_path: impl AsRef<Path>, labels_path: impl AsRef<Path>) -> Result<LabeledDataset> {
    let (ip, lp) = (images_path.as_ref(), labels_path.as_ref());
    let images = fs::read(ip)?;
    let labels = fs::read(lp)?;
    LabeledDataset::from_idx_bytes(&images, &labels, format!("{} + {}", ip.display(), lp.display()))
}

/// The official train and test splits.
#[derive(Debug, Clone)]
pub struct Mnist {
    pub train: LabeledDataset,
    pub test: LabeledDataset,
}

impl Mnist {
    /// Load `train-*` and `t10k-*` IDX files (uncompressed) from `dir`.
    pub fn load(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        let missing: Vec<_> =
            ["train-images-idx3-ubyte", "train-labels-idx1-ubyte", "t10k-images-idx3-ubyte", "t10k-labels-idx1-ubyte"]
                .into_iter()
                .filter(|f| !dir.join(f).is_file())
                .collect();
        if !missing.is_empty() {
            return Err(Error::Io(std::io::Error::new(
                std::io::ErrorKind::NotFound,
                format!("MNIST files missing from {}: {}", dir.display(), missing.join(", ")),
            )));
        }
        Ok(Self {
            train: load_idx(dir.join("train-images-idx3-ubyte"), dir.join("train-labels-idx1-ubyte"))?,
            test: load_idx(dir.join("t10k-images-idx3-ubyte"), dir.join("t10k-labels-idx1-ubyte"))?,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny(labels: &[u8]) -> LabeledDataset {
        let shape = ImageShape::gray(2, 2);
        let pixels = labels.iter().flat_map(|&l| [l, l, l, l]).collect();
        LabeledDataset::new(shape, pixels, labels.to_vec(), "tiny").unwrap()
    }

    #[test]
    fn parity_filter() {
        let ds = tiny(&[0, 1, 2, 3]);
        let even = ds.filter_parity(Parity::Even);
        assert_eq!(even.labels(), &[0, 2]);
        assert_eq!(even.image_bytes(1), &[2, 2, 2, 2]);
        assert!(tiny(&[1, 3, 5]).filter_parity(Parity::Even).is_empty());
    }

    #[test]
    fn batch_sizes_and_partition() {
        let ds = tiny(&[0, 1, 2, 3, 4, 5, 6, 7, 8, 9]);
        let sizes: Vec<_> = ds.batches(4, 1, 0).unwrap().map(|b| b.len()).collect();
        assert_eq!(sizes, vec![4, 4, 2]);
        let mut all: Vec<_> = ds.batches(4, 1, 0).unwrap().flat_map(|b| b.indices).collect();
        all.sort();
        assert_eq!(all, (0..10).collect::<Vec<_>>());
        let singles: Vec<_> = ds.batches(1, 1, 0).unwrap().flat_map(|b| b.indices).collect();
        assert_eq!(singles, ds.epoch_order(1, 0));
        assert_ne!(ds.epoch_order(1, 0), ds.epoch_order(1, 1));
        assert!(ds.batches(0, 1, 0).is_err());
    }

    #[test]
    fn shuffle_take_rules() {
        let ds = tiny(&[0, 1, 2, 3, 4, 5, 6, 7, 8, 9]);
        assert!(matches!(ds.shuffle_take(1, 11), Err(Error::Usage(_))));
        let all = ds.shuffle_take(4, 10).unwrap();
        let mut labels = all.labels().to_vec();
        labels.sort();
        assert_eq!(labels, ds.labels());
        assert_eq!(ds.shuffle_take(4, 3).unwrap(), ds.shuffle_take(4, 3).unwrap());
    }

    #[test]
    fn idx_header_errors() {
        assert!(matches!(LabeledDataset::from_idx_bytes(&[], &[], "x"), Err(Error::Length(_))));
        let ds = tiny(&[3, 7]);
        let (img, lab) = ds.to_idx_bytes();
        let mut wrong = img.clone();
        wrong[3] = 0x01;
        assert!(matches!(LabeledDataset::from_idx_bytes(&wrong, &lab, "x"), Err(Error::Format { .. })));
        assert!(matches!(LabeledDataset::from_idx_bytes(&img[..img.len() - 1], &lab, "x"), Err(Error::Length(_))));
        let (_, lab3) = tiny(&[3, 7, 1]).to_idx_bytes();
        assert!(matches!(LabeledDataset::from_idx_bytes(&img, &lab3, "x"), Err(Error::Consistency(_))));
    }
}
