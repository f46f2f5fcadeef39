use crate::elem::Elem;
use crate::tensor::Tensor;

pub fn relu_forward<T: Elem>(x: &Tensor<T>) -> Tensor<T> {
    let mut y = x.clone();
    for v in &mut y.data {
        if *v < T::zero() {
            *v = T::zero();
        }
    }
    y
}

pub fn relu_backward<T: Elem>(dy: &Tensor<T>, x: &Tensor<T>) -> Tensor<T> {
    let mut dx = dy.clone();
    for (d, v) in dx.data.iter_mut().zip(&x.data) {
        if *v <= T::zero() {
            *d = T::zero();
        }
    }
    dx
}

pub fn leaky_relu_forward<T: Elem>(x: &Tensor<T>, slope: f64) -> Tensor<T> {
    let a = T::from_f64(slope);
    let mut y = x.clone();
    for v in &mut y.data {
        if *v < T::zero() {
            *v = *v * a;
        }
    }
    y
}

pub fn leaky_relu_backward<T: Elem>(dy: &Tensor<T>, x: &Tensor<T>, slope: f64) -> Tensor<T> {
    let a = T::from_f64(slope);
    let mut dx = dy.clone();
    for (d, v) in dx.data.iter_mut().zip(&x.data) {
        if *v <= T::zero() {
            *d = *d * a;
        }
    }
    dx
}

pub fn tanh_forward<T: Elem>(x: &Tensor<T>) -> Tensor<T> {
    let mut y = x.clone();
    for v in &mut y.data {
        *v = v.tanh();
    }
    y
}

/// Uses the cached output: d/dx tanh = 1 - y^2.
pub fn tanh_backward<T: Elem>(dy: &Tensor<T>, y: &Tensor<T>) -> Tensor<T> {
    let mut dx = dy.clone();
    for (d, v) in dx.data.iter_mut().zip(&y.data) {
        *d = *d * (T::one() - *v * *v);
    }
    dx
}

/// Per-pixel softmax over the channel axis of a CHW tensor.
pub fn softmax_channels_forward<T: Elem>(x: &Tensor<T>) -> Tensor<T> {
    let (c, h, w) = x.chw();
    let n = h * w;
    let mut y = x.zeros_like();
    for i in 0..n {
        let mut mx = x.data[i];
        for ci in 1..c {
            let v = x.data[ci * n + i];
            if v > mx {
                mx = v;
            }
        }
        let mut z = T::zero();
        for ci in 0..c {
            let e = (x.data[ci * n + i] - mx).exp();
            y.data[ci * n + i] = e;
            z += e;
        }
        let inv = z.recip();
        for ci in 0..c {
            y.data[ci * n + i] *= inv;
        }
    }
    y
}

/// dx = y * (dy - sum_c(dy * y)) per pixel, using the cached output.
pub fn softmax_channels_backward<T: Elem>(dy: &Tensor<T>, y: &Tensor<T>) -> Tensor<T> {
    let (c, h, w) = y.chw();
    let n = h * w;
    let mut dx = dy.zeros_like();
    for i in 0..n {
        let mut dot = T::zero();
        for ci in 0..c {
            dot += dy.data[ci * n + i] * y.data[ci * n + i];
        }
        for ci in 0..c {
            dx.data[ci * n + i] = y.data[ci * n + i] * (dy.data[ci * n + i] - dot);
        }
    }
    dx
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn softmax_sums_to_one() {
        let x = Tensor::from_vec(&[3, 1, 2], vec![0.5, -1.0, 2.0, 0.0, -0.3, 1.5]);
        let y = softmax_channels_forward(&x);
        for i in 0..2 {
            let s: f64 = (0..3).map(|c| y.data[c * 2 + i]).sum();
            assert!((s - 1.0).abs() < 1e-12);
        }
    }
}
