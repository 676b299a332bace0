use std::fmt;

use crate::error::{Result, RivalError};
use crate::par;

/// Channel, height and width of a latent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Shape {
    pub channels: usize,
    pub height: usize,
    pub width: usize,
}

impl Shape {
    pub const fn new(channels: usize, height: usize, width: usize) -> Self {
        Shape { channels, height, width }
    }

    pub const fn spatial(&self) -> usize {
        self.height * self.width
    }

    pub const fn len(&self) -> usize {
        self.channels * self.height * self.width
    }

    pub const fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

impl fmt::Display for Shape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}x{}", self.channels, self.height, self.width)
    }
}

/// A `C x H x W` array of finite reals stored row-major as (channel, row, col).
#[derive(Debug, Clone, PartialEq)]
pub struct LatentTensor {
    shape: Shape,
    data: Vec<f64>,
}

impl LatentTensor {
    /// Builds a tensor, rejecting length mismatches and non-finite values.
    pub fn new(shape: Shape, data: Vec<f64>) -> Result<Self> {
        if data.len() != shape.len() {
            return Err(RivalError::invalid(format!(
                "latent of shape {shape} needs {} values, got {}",
                shape.len(),
                data.len()
            )));
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(RivalError::invalid(format!("non-finite value at index {i}")));
        }
        Ok(LatentTensor { shape, data })
    }

    /// Wraps data without the finiteness scan. Length is still checked in debug builds.
    pub(crate) fn from_raw(shape: Shape, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), shape.len());
        LatentTensor { shape, data }
    }

    pub fn zeros(shape: Shape) -> Self {
        Self::filled(shape, 0.0)
    }

    pub fn filled(shape: Shape, value: f64) -> Self {
        LatentTensor { shape, data: vec![value; shape.len()] }
    }

    pub fn from_fn(shape: Shape, f: impl Fn(usize, usize, usize) -> f64 + Sync + Send) -> Result<Self> {
        let (h, w) = (shape.height, shape.width);
        let data = par::map_indexed(shape.len(), |i| {
            let c = i / (h * w);
            let rem = i % (h * w);
            f(c, rem / w, rem % w)
        });
        Self::new(shape, data)
    }

    pub fn shape(&self) -> Shape {
        self.shape
    }

    pub fn channels(&self) -> usize {
        self.shape.channels
    }

    pub fn height(&self) -> usize {
        self.shape.height
    }

    pub fn width(&self) -> usize {
        self.shape.width
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn index(&self, c: usize, y: usize, x: usize) -> usize {
        (c * self.shape.height + y) * self.shape.width + x
    }

    pub fn get(&self, c: usize, y: usize, x: usize) -> f64 {
        self.data[self.index(c, y, x)]
    }

    /// All spatial values of channel `c`.
    pub fn channel(&self, c: usize) -> &[f64] {
        let n = self.shape.spatial();
        &self.data[c * n..(c + 1) * n]
    }

    /// The channel vector at flat spatial position `pos`.
    pub fn channel_vector(&self, pos: usize) -> Vec<f64> {
        let n = self.shape.spatial();
        (0..self.shape.channels).map(|c| self.data[c * n + pos]).collect()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn map(&self, f: impl Fn(f64) -> f64 + Sync + Send) -> LatentTensor {
        LatentTensor::from_raw(self.shape, par::map_slice(&self.data, f))
    }

    /// Elementwise combination of two same-shaped tensors.
    pub fn zip_map(&self, other: &LatentTensor, f: impl Fn(f64, f64) -> f64 + Sync + Send) -> Result<LatentTensor> {
        self.expect_shape(other.shape)?;
        Ok(LatentTensor::from_raw(self.shape, par::zip_map(&self.data, &other.data, f)))
    }

    /// `a * self + b * other`.
    pub fn axpby(&self, a: f64, other: &LatentTensor, b: f64) -> Result<LatentTensor> {
        self.zip_map(other, |x, y| a * x + b * y)
    }

    pub fn expect_shape(&self, shape: Shape) -> Result<()> {
        if self.shape != shape {
            return Err(RivalError::invalid(format!("shape mismatch: expected {shape}, got {}", self.shape)));
        }
        Ok(())
    }

    pub fn max_abs_diff(&self, other: &LatentTensor) -> Result<f64> {
        self.expect_shape(other.shape)?;
        Ok(self.data.iter().zip(&other.data).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
    }

    pub fn mse(&self, other: &LatentTensor) -> Result<f64> {
        self.expect_shape(other.shape)?;
        if self.is_empty() {
            return Ok(0.0);
        }
        let sq = self.data.iter().zip(&other.data).map(|(a, b)| (a - b) * (a - b));
        Ok(super::sum::exact_sum(sq) / self.len() as f64)
    }
}
