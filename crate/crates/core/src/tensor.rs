use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Width, height and channel count of an image.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ImageShape {
    pub width: usize,
    pub height: usize,
    pub channels: usize,
}

impl ImageShape {
    pub const MNIST: ImageShape = ImageShape::gray(28, 28);

    pub const fn gray(width: usize, height: usize) -> Self {
        Self { width, height, channels: 1 }
    }

    /// Total number of stored values, `N * M`.
    pub const fn len(&self) -> usize {
        self.width * self.height * self.channels
    }

    pub const fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Shape a generator with `len` outputs is assumed to draw when nothing
    /// better is known: square grayscale if possible, otherwise one row.
    pub fn infer(len: usize) -> Self {
        let side = (len as f64).sqrt().round() as usize;
        if side * side == len {
            Self::gray(side, side)
        } else {
            Self::gray(len, 1)
        }
    }
}

/// Probe or generated image: row-major, channel-interleaved intensities in
/// `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageTensor {
    shape: ImageShape,
    data: Vec<f64>,
}

impl ImageTensor {
    pub fn new(shape: ImageShape, data: Vec<f64>) -> Result<Self> {
        if data.len() != shape.len() {
            return Err(Error::Shape { context: "image data", expected: shape.len(), actual: data.len() });
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("image pixel {i}")));
        }
        if let Some(i) = data.iter().position(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::Usage(format!("image pixel {i} = {} outside [0, 1]", data[i])));
        }
        Ok(Self { shape, data })
    }

    pub fn filled(shape: ImageShape, value: f64) -> Result<Self> {
        Self::new(shape, vec![value; shape.len()])
    }

    /// Build an image from 8-bit samples, mapping each byte `b` to `b / 255`.
    pub fn from_bytes(shape: ImageShape, bytes: &[u8]) -> Result<Self> {
        Self::new(shape, bytes.iter().map(|&b| b as f64 / 255.0).collect())
    }

    /// 8-bit samples, `round(v * 255)` with halves rounded away from zero.
    pub fn to_bytes(&self) -> Vec<u8> {
        self.data.iter().map(|v| (v * 255.0).round() as u8).collect()
    }

    pub fn shape(&self) -> ImageShape {
        self.shape
    }

    pub fn width(&self) -> usize {
        self.shape.width
    }

    pub fn height(&self) -> usize {
        self.shape.height
    }

    pub fn channels(&self) -> usize {
        self.shape.channels
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn mean_squared_error(&self, other: &ImageTensor) -> Result<f64> {
        if self.shape != other.shape {
            return Err(Error::Shape { context: "image comparison", expected: self.len(), actual: other.len() });
        }
        let sum: f64 = self.data.iter().zip(&other.data).map(|(a, b)| (a - b) * (a - b)).sum();
        Ok(sum / self.len() as f64)
    }
}

/// Generator input `z`, or an estimate of it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LatentVector(Vec<f64>);

impl LatentVector {
    pub fn new(data: Vec<f64>) -> Result<Self> {
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("latent component {i}")));
        }
        Ok(Self(data))
    }

    pub fn zeros(dim: usize) -> Self {
        Self(vec![0.0; dim])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }
}

impl AsRef<[f64]> for LatentVector {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_wrong_length_and_out_of_range() {
        let shape = ImageShape::gray(2, 2);
        assert!(matches!(ImageTensor::new(shape, vec![0.0; 3]), Err(Error::Shape { expected: 4, actual: 3, .. })));
        assert!(matches!(ImageTensor::new(shape, vec![0.0, 0.5, 1.5, 0.0]), Err(Error::Usage(_))));
        assert!(matches!(ImageTensor::new(shape, vec![0.0, f64::NAN, 0.0, 0.0]), Err(Error::NonFinite(_))));
        assert!(LatentVector::new(vec![1.0, f64::INFINITY]).is_err());
    }

    #[test]
    fn byte_mapping() {
        let img = ImageTensor::from_bytes(ImageShape::gray(3, 1), &[0, 127, 255]).unwrap();
        assert_eq!(img.data()[0], 0.0);
        assert!((img.data()[1] - 127.0 / 255.0).abs() < 1e-12);
        assert_eq!(img.data()[2], 1.0);
        assert_eq!(img.to_bytes(), vec![0, 127, 255]);
    }

    #[test]
    fn infer_shape() {
        assert_eq!(ImageShape::infer(784), ImageShape::MNIST);
        assert_eq!(ImageShape::infer(5), ImageShape::gray(5, 1));
    }
}
