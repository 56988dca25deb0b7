use std::fmt;

use super::error::NumError;
use super::scalar::Scalar;

/// Dense row-major tensor: a shape plus a flat data buffer.
///
/// Only rank 1 and rank 2 are used in this crate; a rank-1 tensor of length
/// `n` behaves as a `1×n` row in every two-dimensional operation.
#[derive(Clone, PartialEq)]
pub struct Tensor<S> {
    shape: Vec<usize>,
    data: Vec<S>,
}

impl<S: Scalar> Tensor<S> {
    pub fn zeros(shape: &[usize]) -> Self {
        let len = shape.iter().product();
        Tensor {
            shape: shape.to_vec(),
            data: vec![S::zero(); len],
        }
    }

    pub fn from_vec(shape: &[usize], data: Vec<S>) -> Result<Self, NumError> {
        let expect: usize = shape.iter().product();
        if data.len() != expect {
            return Err(NumError::BadShape {
                op: "from_vec",
                expected: "data length equal to the product of the shape",
                got: shape.to_vec(),
            });
        }
        Ok(Tensor {
            shape: shape.to_vec(),
            data,
        })
    }

    /// 1×1 tensor holding `x`.
    pub fn scalar(x: S) -> Self {
        Tensor {
            shape: vec![1],
            data: vec![x],
        }
    }

    /// Rank-2 tensor from nested rows (test and fixture helper).
    pub fn from_rows(rows: &[Vec<S>]) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        assert!(rows.iter().all(|row| row.len() == c), "ragged rows");
        Tensor {
            shape: vec![r, c],
            data: rows.iter().flatten().copied().collect(),
        }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[S] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [S] {
        &mut self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// View as (rows, cols); rank-1 tensors count as a single row.
    pub fn dims2(&self) -> (usize, usize) {
        match self.shape.len() {
            1 => (1, self.shape[0]),
            2 => (self.shape[0], self.shape[1]),
            _ => panic!("tensor of rank {} used as a matrix", self.shape.len()),
        }
    }

    pub fn row(&self, r: usize) -> &[S] {
        let (rows, cols) = self.dims2();
        assert!(r < rows);
        &self.data[r * cols..(r + 1) * cols]
    }

    pub fn at(&self, r: usize, c: usize) -> S {
        let (_, cols) = self.dims2();
        self.data[r * cols + c]
    }

    /// The single element of a 1-element tensor.
    pub fn item(&self) -> S {
        assert_eq!(
            self.data.len(),
            1,
            "item() on a tensor of len {}",
            self.data.len()
        );
        self.data[0]
    }

    /// Error if any element is NaN or infinite.
    pub fn check_finite(&self, context: &str) -> Result<(), NumError> {
        if self.data.iter().all(|x| x.is_finite()) {
            Ok(())
        } else {
            Err(NumError::NonFinite {
                context: context.to_string(),
            })
        }
    }
}

impl<S: fmt::Debug> fmt::Debug for Tensor<S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Tensor{:?} {:?}", self.shape, self.data)
    }
}
