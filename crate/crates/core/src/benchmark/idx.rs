//! IDX (MNIST-family) file reader.

use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};

pub const IMAGE_MAGIC: u32 = 0x0000_0803;
pub const LABEL_MAGIC: u32 = 0x0000_0801;

/// Grayscale images in `[0, 1]` with their class labels.
#[derive(Debug, Clone, PartialEq)]
pub struct IdxDataset {
    pub rows: usize,
    pub cols: usize,
    pixels: Vec<f32>,
    pub labels: Vec<u8>,
}

impl IdxDataset {
    pub fn new(rows: usize, cols: usize, pixels: Vec<f32>, labels: Vec<u8>) -> Result<Self> {
        let dim = rows * cols;
        if dim == 0 || pixels.len() != dim * labels.len() {
            return Err(Error::IdxCountMismatch { images: pixels.len() / dim.max(1), labels: labels.len() });
        }
        Ok(Self { rows, cols, pixels, labels })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.rows * self.cols
    }

    pub fn image(&self, i: usize) -> &[f32] {
        let d = self.dim();
        &self.pixels[i * d..(i + 1) * d]
    }
}

fn read_file(path: &Path, kind: &'static str) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => Error::NotFound { kind, path: path.to_path_buf() },
        _ => Error::io(format!("reading {}", path.display()), e),
    })
}

fn header(bytes: &[u8], path: &Path, words: usize, magic: u32) -> Result<Vec<u32>> {
    let need = 4 * words;
    if bytes.len() < need {
        return Err(Error::IdxTruncated {
            path: path.to_path_buf(),
            expected: need as u64,
            actual: bytes.len() as u64,
        });
    }
    let h: Vec<u32> = bytes[..need]
        .chunks_exact(4)
        .map(|c| u32::from_be_bytes([c[0], c[1], c[2], c[3]]))
        .collect();
    if h[0] != magic {
        return Err(Error::IdxMagic { path: path.to_path_buf(), expected: magic, found: h[0] });
    }
    Ok(h)
}

fn check_len(bytes: &[u8], path: &Path, expected: u64) -> Result<()> {
    if (bytes.len() as u64) < expected {
        return Err(Error::IdxTruncated { path: path.to_path_buf(), expected, actual: bytes.len() as u64 });
    }
    Ok(())
}

/// Parses an image file into `(count, rows, cols, normalized pixels)`.
pub fn parse_images(bytes: &[u8], path: &Path) -> Result<(usize, usize, usize, Vec<f32>)> {
    let h = header(bytes, path, 4, IMAGE_MAGIC)?;
    let (n, rows, cols) = (h[1] as usize, h[2] as usize, h[3] as usize);
    check_len(bytes, path, 16 + (n * rows * cols) as u64)?;
    let pixels = bytes[16..16 + n * rows * cols].iter().map(|&b| b as f32 / 255.0).collect();
    Ok((n, rows, cols, pixels))
}

pub fn parse_labels(bytes: &[u8], path: &Path) -> Result<Vec<u8>> {
    let h = header(bytes, path, 2, LABEL_MAGIC)?;
    let n = h[1] as usize;
    check_len(bytes, path, 8 + n as u64)?;
    let labels = bytes[8..8 + n].to_vec();
    if let Some(index) = labels.iter().position(|&l| l > 9) {
        return Err(Error::IdxLabel { path: path.to_path_buf(), index, label: labels[index] });
    }
    Ok(labels)
}

/// Loads a matching pair of IDX image and label files.
pub fn load_idx(images_path: &Path, labels_path: &Path) -> Result<IdxDataset> {
    let labels = parse_labels(&read_file(labels_path, "labels")?, labels_path)?;
    let (n, rows, cols, pixels) = parse_images(&read_file(images_path, "images")?, images_path)?;
    if n != labels.len() {
        return Err(Error::IdxCountMismatch { images: n, labels: labels.len() });
    }
    IdxDataset::new(rows, cols, pixels, labels)
}

/// Standard file names of a train/test split inside one directory.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IdxPaths {
    pub train_images: PathBuf,
    pub train_labels: PathBuf,
    pub test_images: PathBuf,
    pub test_labels: PathBuf,
}

impl IdxPaths {
    pub fn in_dir(dir: &Path) -> Self {
        Self {
            train_images: dir.join("train-images-idx3-ubyte"),
            train_labels: dir.join("train-labels-idx1-ubyte"),
            test_images: dir.join("t10k-images-idx3-ubyte"),
            test_labels: dir.join("t10k-labels-idx1-ubyte"),
        }
    }

    pub fn load(&self) -> Result<(IdxDataset, IdxDataset)> {
        Ok((load_idx(&self.train_images, &self.train_labels)?, load_idx(&self.test_images, &self.test_labels)?))
    }
}
