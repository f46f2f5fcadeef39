//! Instance normalization over each channel's spatial extent, with affine
//! gain/bias.

use crate::elem::Elem;
use crate::tensor::Tensor;

pub const EPS: f64 = 1e-5;

pub struct NormCache<T> {
    /// normalized activations (x - mu) * inv_std
    pub xhat: Vec<T>,
    pub inv_std: Vec<T>,
}

pub fn instance_norm_forward<T: Elem>(
    x: &Tensor<T>,
    gain: &Tensor<T>,
    bias: &Tensor<T>,
) -> (Tensor<T>, NormCache<T>) {
    let (c, h, w) = x.chw();
    let n = h * w;
    let nf = T::from_f64(n as f64);
    let eps = T::from_f64(EPS);
    let mut out = x.zeros_like();
    let mut xhat = vec![T::zero(); c * n];
    let mut inv_std = vec![T::zero(); c];
    for ci in 0..c {
        let xs = &x.data[ci * n..(ci + 1) * n];
        let mut mu = T::zero();
        for v in xs {
            mu += *v;
        }
        mu = mu / nf;
        let mut var = T::zero();
        for v in xs {
            let d = *v - mu;
            var += d * d;
        }
        var = var / nf;
        let inv = (var + eps).sqrt().recip();
        inv_std[ci] = inv;
        let (g, b) = (gain.data[ci], bias.data[ci]);
        for i in 0..n {
            let xh = (xs[i] - mu) * inv;
            xhat[ci * n + i] = xh;
            out.data[ci * n + i] = g * xh + b;
        }
    }
    (out, NormCache { xhat, inv_std })
}

pub fn instance_norm_backward<T: Elem>(
    dy: &Tensor<T>,
    cache: &NormCache<T>,
    gain: &Tensor<T>,
    dgain: Option<(&mut Tensor<T>, &mut Tensor<T>)>,
) -> Tensor<T> {
    let (c, h, w) = dy.chw();
    let n = h * w;
    let nf = T::from_f64(n as f64);
    let mut dx = dy.zeros_like();
    let mut dgb = dgain;
    for ci in 0..c {
        let dys = &dy.data[ci * n..(ci + 1) * n];
        let xh = &cache.xhat[ci * n..(ci + 1) * n];
        let g = gain.data[ci];
        let mut sum_dy = T::zero();
        let mut sum_dy_xh = T::zero();
        for i in 0..n {
            sum_dy += dys[i];
            sum_dy_xh += dys[i] * xh[i];
        }
        if let Some((dg, db)) = dgb.as_mut() {
            dg.data[ci] += sum_dy_xh;
            db.data[ci] += sum_dy;
        }
        let inv = cache.inv_std[ci];
        let mean_dy = sum_dy / nf;
        let mean_dy_xh = sum_dy_xh / nf;
        for i in 0..n {
            dx.data[ci * n + i] = g * inv * (dys[i] - mean_dy - xh[i] * mean_dy_xh);
        }
    }
    dx
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{rng_from, sample_normal};

    #[test]
    fn normalizes_to_zero_mean_unit_var() {
        let mut rng = rng_from(2);
        let x = Tensor::from_vec(&[2, 4, 4], (0..32).map(|_| sample_normal(&mut rng) * 3.0 + 1.0).collect());
        let g = Tensor::full(&[2], 1.0f64);
        let b = Tensor::zeros(&[2]);
        let (y, _) = instance_norm_forward(&x, &g, &b);
        for ci in 0..2 {
            let ys = &y.data[ci * 16..(ci + 1) * 16];
            let mu: f64 = ys.iter().sum::<f64>() / 16.0;
            let var: f64 = ys.iter().map(|v| (v - mu) * (v - mu)).sum::<f64>() / 16.0;
            assert!(mu.abs() < 1e-10);
            assert!((var - 1.0).abs() < 1e-3);
        }
    }
}
