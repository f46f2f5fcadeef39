//! Shared domain types: images in [-1, 1] tagged with a modality, and
//! per-pixel label maps.

use serde::{Deserialize, Serialize};

use crate::elem::Elem;
use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Number of classes: background + body, liver, stomach, left/right kidney,
/// spleen.
pub const NUM_CLASSES: usize = 7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Modality {
    A,
    B,
}

impl Modality {
    pub fn flipped(self) -> Modality {
        match self {
            Modality::A => Modality::B,
            Modality::B => Modality::A,
        }
    }
}

/// Single-channel real-valued image, row-major, values in [-1, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    pub height: usize,
    pub width: usize,
    pub modality: Modality,
    pub data: Vec<f32>,
}

impl Image {
    pub fn new(height: usize, width: usize, modality: Modality) -> Self {
        Image { height, width, modality, data: vec![0.0; height * width] }
    }

    pub fn validate(&self) -> Result<()> {
        if self.data.len() != self.height * self.width {
            return Err(Error::Shape {
                expected: format!("{} pixels", self.height * self.width),
                got: format!("{}", self.data.len()),
            });
        }
        if self.data.iter().any(|v| !v.is_finite() || *v < -1.0 || *v > 1.0) {
            return Err(Error::Config("image values must be finite and in [-1, 1]".into()));
        }
        Ok(())
    }

    /// (1, H, W) tensor for network input.
    pub fn to_tensor<T: Elem>(&self) -> Tensor<T> {
        Tensor::from_vec(
            &[1, self.height, self.width],
            self.data.iter().map(|v| T::from_f64(*v as f64)).collect(),
        )
    }

    pub fn from_tensor<T: Elem>(t: &Tensor<T>, modality: Modality) -> Image {
        let (c, h, w) = t.chw();
        assert_eq!(c, 1, "expected single-channel tensor");
        Image {
            height: h,
            width: w,
            modality,
            data: t.data.iter().map(|v| v.as_f64() as f32).collect(),
        }
    }
}

/// Per-pixel class IDs in 0..classes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelMap {
    pub height: usize,
    pub width: usize,
    pub classes: usize,
    pub data: Vec<u8>,
}

impl LabelMap {
    pub fn new(height: usize, width: usize, classes: usize) -> Self {
        LabelMap { height, width, classes, data: vec![0; height * width] }
    }

    pub fn validate(&self) -> Result<()> {
        if self.data.len() != self.height * self.width {
            return Err(Error::Shape {
                expected: format!("{} pixels", self.height * self.width),
                got: format!("{}", self.data.len()),
            });
        }
        for v in &self.data {
            if *v as usize >= self.classes {
                return Err(Error::ClassOutOfRange { id: *v as usize, classes: self.classes });
            }
        }
        Ok(())
    }

    pub fn class_histogram(&self) -> Vec<usize> {
        let mut h = vec![0usize; self.classes];
        for v in &self.data {
            h[*v as usize] += 1;
        }
        h
    }
}
