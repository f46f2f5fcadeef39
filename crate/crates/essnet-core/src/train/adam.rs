//! Adam optimizer over a ParamStore, with per-tensor moment buffers.

use serde::{Deserialize, Serialize};

use crate::elem::Elem;
use crate::nn::{Grads, ParamStore};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamConfig {
    pub fn new(lr: f64) -> Self {
        AdamConfig { lr, beta1: 0.5, beta2: 0.999, eps: 1e-8 }
    }
}

#[derive(Debug, Clone)]
pub struct Adam<T> {
    pub config: AdamConfig,
    pub t: u64,
    pub m: Grads<T>,
    pub v: Grads<T>,
}

impl<T: Elem> Adam<T> {
    pub fn new(config: AdamConfig, params: &ParamStore<T>) -> Self {
        Adam { config, t: 0, m: params.zeros_like(), v: params.zeros_like() }
    }

    pub fn step(&mut self, params: &mut ParamStore<T>, grads: &Grads<T>) {
        self.t += 1;
        let c = self.config;
        let bc1 = 1.0 - c.beta1.powi(self.t as i32);
        let bc2 = 1.0 - c.beta2.powi(self.t as i32);
        let (b1, b2) = (T::from_f64(c.beta1), T::from_f64(c.beta2));
        let (ob1, ob2) = (T::from_f64(1.0 - c.beta1), T::from_f64(1.0 - c.beta2));
        let lr = T::from_f64(c.lr);
        let eps = T::from_f64(c.eps);
        let (s1, s2) = (T::from_f64(1.0 / bc1), T::from_f64(1.0 / bc2));
        for ((p, g), (m, v)) in params
            .tensors
            .iter_mut()
            .zip(&grads.tensors)
            .zip(self.m.tensors.iter_mut().zip(self.v.tensors.iter_mut()))
        {
            for ((pe, ge), (me, ve)) in p
                .data
                .iter_mut()
                .zip(&g.data)
                .zip(m.data.iter_mut().zip(v.data.iter_mut()))
            {
                *me = b1 * *me + ob1 * *ge;
                *ve = b2 * *ve + ob2 * *ge * *ge;
                let mhat = *me * s1;
                let vhat = *ve * s2;
                *pe = *pe - lr * mhat / (vhat.sqrt() + eps);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::Tensor;

    fn single_param(v: f64) -> ParamStore<f64> {
        let mut p = ParamStore::new();
        p.add("w", Tensor::full(&[1], v));
        p
    }

    #[test]
    fn first_step_has_magnitude_lr() {
        // bias correction makes |step 1| = lr up to eps for any nonzero grad
        let mut params = single_param(3.0);
        let mut adam = Adam::new(AdamConfig::new(0.01), &params);
        let mut grads = params.zeros_like();
        grads.tensors[0].data[0] = 42.0;
        adam.step(&mut params, &grads);
        assert!((params.tensors[0].data[0] - (3.0 - 0.01)).abs() < 1e-6);
    }

    #[test]
    fn converges_on_quadratic() {
        // minimize (w - 5)^2 / 2
        let mut params = single_param(0.0);
        let mut adam = Adam::new(AdamConfig::new(0.1), &params);
        let mut grads = params.zeros_like();
        for _ in 0..2000 {
            grads.tensors[0].data[0] = params.tensors[0].data[0] - 5.0;
            adam.step(&mut params, &grads);
        }
        assert!((params.tensors[0].data[0] - 5.0).abs() < 1e-3);
    }
}
