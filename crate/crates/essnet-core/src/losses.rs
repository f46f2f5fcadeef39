//! The five training objectives: two adversarial losses, two cycle losses,
//! the segmentation loss, and their weighted total. Discriminator scores are
//! raw; the logistic/log lives here in log-sum-exp-safe form.

use serde::{Deserialize, Serialize};

use crate::elem::{sigmoid, softplus, Elem};
use crate::error::{Error, Result};
use crate::types::LabelMap;
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossWeights {
    pub lambda_gan_ab: f64,
    pub lambda_gan_ba: f64,
    pub lambda_cycle_a: f64,
    pub lambda_cycle_b: f64,
    pub lambda_seg: f64,
}

impl LossWeights {
    /// lambda = (1, 1, 10, 10, 1)
    pub fn paper() -> Self {
        LossWeights {
            lambda_gan_ab: 1.0,
            lambda_gan_ba: 1.0,
            lambda_cycle_a: 10.0,
            lambda_cycle_b: 10.0,
            lambda_seg: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let all = [
            self.lambda_gan_ab,
            self.lambda_gan_ba,
            self.lambda_cycle_a,
            self.lambda_cycle_b,
            self.lambda_seg,
        ];
        if all.iter().any(|l| *l < 0.0 || !l.is_finite()) {
            return Err(Error::Config(format!("loss weights must be finite and >= 0: {all:?}")));
        }
        Ok(())
    }
}

impl Default for LossWeights {
    fn default() -> Self {
        Self::paper()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum GanMode {
    /// -mean log sigma(fake scores) for G (default; stronger early gradients)
    NonSaturating,
    /// +mean log(1 - sigma(fake scores)) for G (the literal objective)
    Minimax,
    /// least-squares GAN
    LeastSquares,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum SegReduction {
    Mean,
    Sum,
}

/// Realized per-term values for one step (or one epoch aggregate).
/// `total` honors the weighted-sum identity over the five generator-side
/// terms; d1/d2 are the separately-minimized discriminator objectives.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossReport {
    pub gan_g1: f64,
    pub gan_g2: f64,
    pub cycle_a: f64,
    pub cycle_b: f64,
    pub seg: f64,
    pub d1: f64,
    pub d2: f64,
    pub total: f64,
}

impl LossReport {
    pub fn is_finite(&self) -> bool {
        [self.gan_g1, self.gan_g2, self.cycle_a, self.cycle_b, self.seg, self.d1, self.d2, self.total]
            .iter()
            .all(|v| v.is_finite())
    }
}

pub fn total_loss(gan_g1: f64, gan_g2: f64, cycle_a: f64, cycle_b: f64, seg: f64, w: &LossWeights) -> f64 {
    w.lambda_gan_ab * gan_g1
        + w.lambda_gan_ba * gan_g2
        + w.lambda_cycle_a * cycle_a
        + w.lambda_cycle_b * cycle_b
        + w.lambda_seg * seg
}

/// Discriminator objective (minimized): -[mean log sigma(real) + mean log(1 - sigma(fake))],
/// or the least-squares form. Returns (loss, d/d real, d/d fake).
pub fn adversarial_loss_d<T: Elem>(
    real: &Tensor<T>,
    fake: &Tensor<T>,
    mode: GanMode,
) -> (f64, Tensor<T>, Tensor<T>) {
    let nr = real.numel() as f64;
    let nf = fake.numel() as f64;
    let mut d_real = real.zeros_like();
    let mut d_fake = fake.zeros_like();
    let mut loss = 0.0;
    match mode {
        GanMode::NonSaturating | GanMode::Minimax => {
            for (i, v) in real.data.iter().enumerate() {
                let s = v.as_f64();
                loss += softplus(-s) / nr;
                d_real.data[i] = T::from_f64(-sigmoid(-s) / nr);
            }
            for (i, v) in fake.data.iter().enumerate() {
                let s = v.as_f64();
                loss += softplus(s) / nf;
                d_fake.data[i] = T::from_f64(sigmoid(s) / nf);
            }
        }
        GanMode::LeastSquares => {
            for (i, v) in real.data.iter().enumerate() {
                let s = v.as_f64();
                loss += 0.5 * (s - 1.0) * (s - 1.0) / nr;
                d_real.data[i] = T::from_f64((s - 1.0) / nr);
            }
            for (i, v) in fake.data.iter().enumerate() {
                let s = v.as_f64();
                loss += 0.5 * s * s / nf;
                d_fake.data[i] = T::from_f64(s / nf);
            }
        }
    }
    (loss, d_real, d_fake)
}

/// Generator-side adversarial term. Returns (loss, d/d fake scores).
pub fn adversarial_loss_g<T: Elem>(fake: &Tensor<T>, mode: GanMode) -> (f64, Tensor<T>) {
    let n = fake.numel() as f64;
    let mut grad = fake.zeros_like();
    let mut loss = 0.0;
    match mode {
        GanMode::NonSaturating => {
            for (i, v) in fake.data.iter().enumerate() {
                let s = v.as_f64();
                loss += softplus(-s) / n;
                grad.data[i] = T::from_f64(-sigmoid(-s) / n);
            }
        }
        GanMode::Minimax => {
            // mean log(1 - sigma(s)) = mean -softplus(s)
            for (i, v) in fake.data.iter().enumerate() {
                let s = v.as_f64();
                loss += -softplus(s) / n;
                grad.data[i] = T::from_f64(-sigmoid(s) / n);
            }
        }
        GanMode::LeastSquares => {
            for (i, v) in fake.data.iter().enumerate() {
                let s = v.as_f64();
                loss += (s - 1.0) * (s - 1.0) / n;
                grad.data[i] = T::from_f64(2.0 * (s - 1.0) / n);
            }
        }
    }
    (loss, grad)
}

/// Mean absolute per-pixel reconstruction error.
/// Returns (loss, d/d reconstructed).
pub fn cycle_loss<T: Elem>(original: &Tensor<T>, reconstructed: &Tensor<T>) -> Result<(f64, Tensor<T>)> {
    if original.shape != reconstructed.shape {
        return Err(Error::Shape {
            expected: format!("{:?}", original.shape),
            got: format!("{:?}", reconstructed.shape),
        });
    }
    let n = original.numel() as f64;
    let inv = 1.0 / n;
    let mut grad = reconstructed.zeros_like();
    let mut loss = 0.0;
    for i in 0..original.numel() {
        let d = reconstructed.data[i].as_f64() - original.data[i].as_f64();
        loss += d.abs() * inv;
        grad.data[i] = T::from_f64(d.signum() * inv * if d == 0.0 { 0.0 } else { 1.0 });
    }
    Ok((loss, grad))
}

const PROB_FLOOR: f64 = 1e-12;

/// Cross-entropy against hard labels on a (C,H,W) probability map.
/// Returns (loss, d/d probs).
pub fn seg_loss<T: Elem>(
    probs: &Tensor<T>,
    labels: &LabelMap,
    reduction: SegReduction,
) -> Result<(f64, Tensor<T>)> {
    let (c, h, w) = probs.chw();
    if labels.height != h || labels.width != w {
        return Err(Error::Shape {
            expected: format!("{}x{} labels", h, w),
            got: format!("{}x{}", labels.height, labels.width),
        });
    }
    let n = h * w;
    let scale = match reduction {
        SegReduction::Mean => 1.0 / n as f64,
        SegReduction::Sum => 1.0,
    };
    let mut grad = probs.zeros_like();
    let mut loss = 0.0;
    for i in 0..n {
        let m = labels.data[i] as usize;
        if m >= c {
            return Err(Error::ClassOutOfRange { id: m, classes: c });
        }
        let p = probs.data[m * n + i].as_f64().max(PROB_FLOOR);
        loss += -p.ln() * scale;
        grad.data[m * n + i] = T::from_f64(-scale / p);
    }
    Ok((loss, grad))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(shape: &[usize], v: Vec<f64>) -> Tensor<f64> {
        Tensor::from_vec(shape, v)
    }

    #[test]
    fn d_loss_at_raw_zero_is_2_ln2() {
        let real = t(&[1, 2, 2], vec![0.0; 4]);
        let fake = t(&[1, 2, 2], vec![0.0; 4]);
        let (l, _, _) = adversarial_loss_d(&real, &fake, GanMode::NonSaturating);
        assert!((l - 2.0 * std::f64::consts::LN_2).abs() < 1e-12);
    }

    #[test]
    fn d_loss_perfect_discriminator_vanishes() {
        let real = t(&[1, 1, 2], vec![30.0, 30.0]);
        let fake = t(&[1, 1, 2], vec![-30.0, -30.0]);
        let (l, _, _) = adversarial_loss_d(&real, &fake, GanMode::NonSaturating);
        assert!(l < 1e-9);
    }

    #[test]
    fn g_loss_at_half_is_ln2_and_fooled_vanishes() {
        let fake = t(&[1, 1, 3], vec![0.0; 3]);
        let (l, _) = adversarial_loss_g(&fake, GanMode::NonSaturating);
        assert!((l - std::f64::consts::LN_2).abs() < 1e-12);
        let fooled = t(&[1, 1, 3], vec![30.0; 3]);
        let (l, _) = adversarial_loss_g(&fooled, GanMode::NonSaturating);
        assert!(l < 1e-9);
    }

    #[test]
    fn g_loss_modes_agree_on_fooled_fixed_point() {
        let fooled = t(&[1, 1, 2], vec![40.0; 2]);
        let (non_sat, _) = adversarial_loss_g(&fooled, GanMode::NonSaturating);
        let (minimax, _) = adversarial_loss_g(&fooled, GanMode::Minimax);
        // non-saturating reaches its minimum 0; minimax reaches its infimum
        assert!(non_sat.abs() < 1e-9);
        assert!(minimax < -30.0);
    }

    #[test]
    fn cycle_identical_zero_offset_point_one() {
        let a = t(&[1, 2, 2], vec![0.1, -0.2, 0.3, 0.4]);
        let (l, _) = cycle_loss(&a, &a).unwrap();
        assert_eq!(l, 0.0);
        let b = t(&[1, 2, 2], vec![0.2, -0.1, 0.4, 0.5]);
        let (l, _) = cycle_loss(&a, &b).unwrap();
        assert!((l - 0.1).abs() < 1e-12);
    }

    #[test]
    fn cycle_is_symmetric() {
        let a = t(&[1, 2, 2], vec![0.3, -0.9, 0.0, 0.7]);
        let b = t(&[1, 2, 2], vec![-0.4, 0.2, 0.5, -0.1]);
        let (lab, _) = cycle_loss(&a, &b).unwrap();
        let (lba, _) = cycle_loss(&b, &a).unwrap();
        assert_eq!(lab, lba);
    }

    #[test]
    fn seg_uniform_is_ln_c() {
        let c = 7;
        let probs = Tensor::full(&[c, 2, 2], 1.0 / c as f64);
        let labels = LabelMap { height: 2, width: 2, classes: c, data: vec![0, 3, 6, 1] };
        let (l, _) = seg_loss(&probs, &labels, SegReduction::Mean).unwrap();
        assert!((l - (c as f64).ln()).abs() < 1e-12);
    }

    #[test]
    fn seg_perfect_prediction_is_zero() {
        let mut probs = Tensor::zeros(&[3, 1, 2]);
        probs.data[2] = 1.0; // class 1 at pixel 0
        probs.data[2 * 2 + 1] = 1.0; // class 2 at pixel 1
        let labels = LabelMap { height: 1, width: 2, classes: 3, data: vec![1, 2] };
        let (l, _) = seg_loss(&probs, &labels, SegReduction::Mean).unwrap();
        assert_eq!(l, 0.0);
    }

    #[test]
    fn seg_rejects_out_of_range_class() {
        let probs = Tensor::full(&[3, 1, 1], 1.0 / 3.0);
        let labels = LabelMap { height: 1, width: 1, classes: 4, data: vec![3] };
        assert!(matches!(
            seg_loss(&probs, &labels, SegReduction::Mean),
            Err(Error::ClassOutOfRange { .. })
        ));
    }

    #[test]
    fn total_is_weighted_sum_and_linear_in_lambda() {
        let w = LossWeights::paper();
        assert_eq!(total_loss(1.0, 1.0, 1.0, 1.0, 1.0, &w), 23.0);
        assert_eq!(total_loss(0.0, 0.0, 0.0, 0.0, 0.0, &w), 0.0);
        let mut w2 = w;
        w2.lambda_seg *= 2.0;
        let s = 0.37;
        let base = total_loss(0.1, 0.2, 0.3, 0.4, s, &w);
        assert!((total_loss(0.1, 0.2, 0.3, 0.4, s, &w2) - base - s).abs() < 1e-12);
    }
}
