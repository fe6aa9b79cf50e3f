//! Height-width-channel tensors and sparse network inputs.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Dimensions of an activation: height, width, channels. Flat vectors are
/// `1 x 1 x n`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Shape {
    pub h: usize,
    pub w: usize,
    pub c: usize,
}

impl Shape {
    pub const fn new(h: usize, w: usize, c: usize) -> Self {
        Self { h, w, c }
    }

    pub const fn flat(n: usize) -> Self {
        Self { h: 1, w: 1, c: n }
    }

    pub const fn len(&self) -> usize {
        self.h * self.w * self.c
    }

    pub const fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub const fn index(&self, y: usize, x: usize, c: usize) -> usize {
        (y * self.w + x) * self.c + c
    }
}

impl core::fmt::Display for Shape {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        if self.h == 1 && self.w == 1 {
            write!(f, "{}x1", self.c)
        } else {
            write!(f, "{}x{}x{}", self.h, self.w, self.c)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tensor {
    pub shape: Shape,
    pub data: Vec<f64>,
}

impl Tensor {
    pub fn zeros(shape: Shape) -> Self {
        Self { shape, data: alloc::vec![0.0; shape.len()] }
    }

    pub fn from_vec(shape: Shape, data: Vec<f64>) -> Result<Self> {
        if data.len() != shape.len() {
            return Err(Error::Shape(alloc::format!("{} values for shape {shape}", data.len())));
        }
        Ok(Self { shape, data })
    }

    pub fn get(&self, y: usize, x: usize, c: usize) -> f64 {
        self.data[self.shape.index(y, x, c)]
    }

    pub fn set(&mut self, y: usize, x: usize, c: usize, v: f64) {
        let i = self.shape.index(y, x, c);
        self.data[i] = v;
    }
}

/// Network input: dense, or a list of nonzero entries for mostly-empty
/// state images.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Input {
    Dense(Tensor),
    Sparse { shape: Shape, entries: Vec<(u32, f64)> },
}

impl Input {
    pub fn shape(&self) -> Shape {
        match self {
            Input::Dense(t) => t.shape,
            Input::Sparse { shape, .. } => *shape,
        }
    }

    /// Sparse input from a dense tensor, keeping nonzero entries in index order.
    pub fn sparse_from(t: &Tensor) -> Self {
        let entries = t.data.iter().enumerate().filter(|(_, v)| **v != 0.0).map(|(i, v)| (i as u32, *v)).collect();
        Input::Sparse { shape: t.shape, entries }
    }

    pub fn to_dense(&self) -> Tensor {
        match self {
            Input::Dense(t) => t.clone(),
            Input::Sparse { shape, entries } => {
                let mut t = Tensor::zeros(*shape);
                for &(i, v) in entries {
                    t.data[i as usize] = v;
                }
                t
            }
        }
    }

    /// Nonzero entries as `(flat index, value)` in index order.
    pub fn nonzeros(&self) -> Vec<(u32, f64)> {
        match self {
            Input::Dense(t) => t.data.iter().enumerate().filter(|(_, v)| **v != 0.0).map(|(i, v)| (i as u32, *v)).collect(),
            Input::Sparse { entries, .. } => entries.clone(),
        }
    }
}
