//! Unpaired cross-modality synthesis + segmentation: CycleGAN-style
//! synthesis subnet with a grafted segmentation branch, trained end-to-end
//! on a synthetic two-modality phantom benchmark, plus the evaluation
//! harness (Dice, Wilcoxon, four-method comparison).

pub mod data;
pub mod elem;
pub mod error;
pub mod rng;
pub mod tensor;
pub mod types;

pub mod nn;

pub mod gradcheck;
pub mod losses;
pub mod networks;

pub use error::{Error, Result};
pub use tensor::Tensor;
pub use types::{Image, LabelMap, Modality, NUM_CLASSES};
