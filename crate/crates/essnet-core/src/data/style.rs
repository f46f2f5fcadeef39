//! Modality appearance: per-class intensities plus noise, a smooth
//! multiplicative bias field, and a monotone contrast exponent.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::phantom::AnatomyLayout;
use crate::error::{Error, Result};
use crate::rng::{rng_from, sample_normal};
use crate::types::{Image, Modality, NUM_CLASSES};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModalityStyle {
    pub modality: Modality,
    /// class ID -> mean intensity in [-1, 1]
    pub class_means: [f32; NUM_CLASSES],
    /// additive Gaussian noise sigma (intensity units)
    pub noise_sigma: f64,
    /// amplitude of the smooth multiplicative bias field
    pub bias_amplitude: f64,
    /// monotone contrast exponent applied in [0, 1] space
    pub gamma: f64,
}

impl ModalityStyle {
    /// MRI-T2w-like appearance: fluid-rich organs bright.
    pub fn a_like() -> Self {
        ModalityStyle {
            modality: Modality::A,
            class_means: [-0.90, -0.30, 0.10, 0.45, 0.22, 0.28, 0.70],
            noise_sigma: 0.05,
            bias_amplitude: 0.08,
            gamma: 1.0,
        }
    }

    /// CT-like appearance: a different per-class intensity ordering, so
    /// cross-modality transfer is non-trivial.
    pub fn b_like() -> Self {
        ModalityStyle {
            modality: Modality::B,
            class_means: [-0.85, 0.35, 0.65, -0.15, 0.05, 0.10, -0.45],
            noise_sigma: 0.05,
            bias_amplitude: 0.08,
            gamma: 1.2,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.class_means.iter().any(|m| !m.is_finite() || m.abs() > 1.0) {
            return Err(Error::Config("class means must be finite and in [-1, 1]".into()));
        }
        if !(self.noise_sigma >= 0.0) || !(self.bias_amplitude >= 0.0) || !(self.gamma > 0.0) {
            return Err(Error::Config(
                "style requires sigma >= 0, bias amplitude >= 0, gamma > 0".into(),
            ));
        }
        Ok(())
    }

    /// Ranking of classes by mean intensity (ascending).
    pub fn intensity_order(&self) -> [usize; NUM_CLASSES] {
        let mut order = [0usize; NUM_CLASSES];
        let mut idx: Vec<usize> = (0..NUM_CLASSES).collect();
        idx.sort_by(|&i, &j| self.class_means[i].partial_cmp(&self.class_means[j]).unwrap());
        order.copy_from_slice(&idx);
        order
    }
}

/// Deterministic per (layout, style, seed). Pixel value = class mean, scaled
/// by the bias field, contrast-mapped by gamma, plus Gaussian noise, clamped
/// to [-1, 1].
pub fn render_modality(layout: &AnatomyLayout, style: &ModalityStyle, seed: u64) -> Result<Image> {
    style.validate()?;
    let (h, w) = (layout.height, layout.width);
    let mut rng = rng_from(seed);
    // low-order bias field coefficients, drawn before the per-pixel noise so
    // the stream layout is fixed
    let coef: [f64; 4] = std::array::from_fn(|_| rng.random_range(-1.0..1.0));

    let mut img = Image::new(h, w, style.modality);
    for y in 0..h {
        for x in 0..w {
            let class = layout.labels.data[y * w + x] as usize;
            let mut v = style.class_means[class] as f64;
            if style.bias_amplitude > 0.0 {
                let u = 2.0 * (x as f64 + 0.5) / w as f64 - 1.0;
                let t = 2.0 * (y as f64 + 0.5) / h as f64 - 1.0;
                let field = coef[0] * u + coef[1] * t + coef[2] * u * t
                    + coef[3] * (u * u - t * t) / 2.0;
                v *= 1.0 + style.bias_amplitude * field;
            }
            if style.gamma != 1.0 {
                let v01 = ((v + 1.0) / 2.0).clamp(0.0, 1.0);
                v = 2.0 * v01.powf(style.gamma) - 1.0;
            }
            if style.noise_sigma > 0.0 {
                v += style.noise_sigma * sample_normal(&mut rng);
            }
            img.data[y * w + x] = v.clamp(-1.0, 1.0) as f32;
        }
    }
    Ok(img)
}
