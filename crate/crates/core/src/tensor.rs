//! Dense 3-D and 1-D containers of `f32`.
//!
//! [`Tensor3D`] stores its values channel-major, then row-major within a
//! channel: element `(c, r, k)` lives at `c * rows * cols + r * cols + k`.
//! Every other module relies on this layout, including the flatten ordering
//! and the serialized trace format.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `(channels, rows, cols)`.
pub type Shape3 = (usize, usize, usize);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "TensorRepr", into = "TensorRepr")]
pub struct Tensor3D {
    channels: usize,
    rows: usize,
    cols: usize,
    data: Vec<f32>,
}

#[derive(Serialize, Deserialize)]
struct TensorRepr {
    shape: [usize; 3],
    data: Vec<f32>,
}

impl TryFrom<TensorRepr> for Tensor3D {
    type Error = Error;

    fn try_from(repr: TensorRepr) -> Result<Self> {
        let [c, r, k] = repr.shape;
        Tensor3D::new(c, r, k, repr.data)
    }
}

impl From<Tensor3D> for TensorRepr {
    fn from(t: Tensor3D) -> Self {
        TensorRepr {
            shape: [t.channels, t.rows, t.cols],
            data: t.data,
        }
    }
}

fn check_finite(data: &[f32]) -> Result<()> {
    match data.iter().position(|v| !v.is_finite()) {
        Some(i) => Err(Error::Construction(format!(
            "non-finite value {} at flat index {i}",
            data[i]
        ))),
        None => Ok(()),
    }
}

impl Tensor3D {
    pub fn new(channels: usize, rows: usize, cols: usize, data: Vec<f32>) -> Result<Self> {
        if channels == 0 || rows == 0 || cols == 0 {
            return Err(Error::Construction(format!(
                "dimensions must be positive, got {channels}x{rows}x{cols}"
            )));
        }
        let expected = channels * rows * cols;
        if data.len() != expected {
            return Err(Error::Construction(format!(
                "length mismatch: {channels}x{rows}x{cols} needs {expected} values, got {}",
                data.len()
            )));
        }
        check_finite(&data)?;
        Ok(Tensor3D {
            channels,
            rows,
            cols,
            data,
        })
    }

    pub fn zeros(channels: usize, rows: usize, cols: usize) -> Result<Self> {
        Self::new(channels, rows, cols, vec![0.0; channels * rows * cols])
    }

    /// Builds a tensor from a generator called once per `(c, r, k)` in layout order.
    pub fn from_fn(
        channels: usize,
        rows: usize,
        cols: usize,
        mut f: impl FnMut(usize, usize, usize) -> f32,
    ) -> Result<Self> {
        let mut data = Vec::with_capacity(channels * rows * cols);
        for c in 0..channels {
            for r in 0..rows {
                for k in 0..cols {
                    data.push(f(c, r, k));
                }
            }
        }
        Self::new(channels, rows, cols, data)
    }

    /// Wraps data produced by a layer kernel. The layer operations only
    /// combine finite inputs with finite weights, so overflow is the one way
    /// a non-finite value can appear here; it is reported rather than stored.
    pub(crate) fn from_layer(shape: Shape3, data: Vec<f32>) -> Result<Self> {
        Self::new(shape.0, shape.1, shape.2, data)
            .map_err(|e| Error::config(format!("layer produced an invalid tensor: {e}")))
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> Shape3 {
        (self.channels, self.rows, self.cols)
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f32> {
        self.data
    }

    #[inline]
    pub fn offset(&self, c: usize, r: usize, k: usize) -> usize {
        (c * self.rows + r) * self.cols + k
    }

    pub fn get(&self, c: usize, r: usize, k: usize) -> Result<f32> {
        if c >= self.channels || r >= self.rows || k >= self.cols {
            return Err(Error::Index {
                index: (c, r, k),
                shape: self.shape(),
            });
        }
        Ok(self.data[self.offset(c, r, k)])
    }

    /// One channel as a row-major `rows * cols` slice.
    pub fn channel(&self, c: usize) -> &[f32] {
        let plane = self.rows * self.cols;
        &self.data[c * plane..(c + 1) * plane]
    }

    pub fn max_abs_diff(&self, other: &Tensor3D) -> Option<f32> {
        if self.shape() != other.shape() {
            return None;
        }
        Some(max_abs_diff(&self.data, &other.data))
    }

    /// True iff shapes match and every elementwise difference is at most `tol`.
    pub fn approx_equal(&self, other: &Tensor3D, tol: f32) -> bool {
        self.max_abs_diff(other).is_some_and(|d| d <= tol)
    }
}

pub(crate) fn max_abs_diff(a: &[f32], b: &[f32]) -> f32 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f32::max)
}

/// Free-function form of [`Tensor3D::approx_equal`].
pub fn approx_equal(a: &Tensor3D, b: &Tensor3D, tol: f32) -> bool {
    a.approx_equal(b, tol)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "VectorRepr", into = "VectorRepr")]
pub struct Vector1D {
    data: Vec<f32>,
}

#[derive(Serialize, Deserialize)]
struct VectorRepr {
    length: usize,
    data: Vec<f32>,
}

impl TryFrom<VectorRepr> for Vector1D {
    type Error = Error;

    fn try_from(repr: VectorRepr) -> Result<Self> {
        if repr.length != repr.data.len() {
            return Err(Error::Construction(format!(
                "declared length {} but {} values",
                repr.length,
                repr.data.len()
            )));
        }
        Vector1D::new(repr.data)
    }
}

impl From<Vector1D> for VectorRepr {
    fn from(v: Vector1D) -> Self {
        VectorRepr {
            length: v.data.len(),
            data: v.data,
        }
    }
}

impl Vector1D {
    pub fn new(data: Vec<f32>) -> Result<Self> {
        if data.is_empty() {
            return Err(Error::Construction("vector length must be positive".into()));
        }
        check_finite(&data)?;
        Ok(Vector1D { data })
    }

    pub(crate) fn from_layer(data: Vec<f32>) -> Result<Self> {
        Self::new(data).map_err(|e| Error::config(format!("layer produced an invalid vector: {e}")))
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn get(&self, i: usize) -> Option<f32> {
        self.data.get(i).copied()
    }

    /// Index of the largest entry; ties go to the lowest index.
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (i, &v) in self.data.iter().enumerate() {
            if v > self.data[best] {
                best = i;
            }
        }
        best
    }

    pub fn max_abs_diff(&self, other: &Vector1D) -> Option<f32> {
        (self.len() == other.len()).then(|| max_abs_diff(&self.data, &other.data))
    }

    pub fn approx_equal(&self, other: &Vector1D, tol: f32) -> bool {
        self.max_abs_diff(other).is_some_and(|d| d <= tol)
    }
}
