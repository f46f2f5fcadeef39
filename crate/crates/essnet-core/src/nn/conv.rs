//! 2-D convolution on single-image CHW tensors via im2col + gemm, plus the
//! transposed variant (expressed as zero-stuffing followed by a stride-1
//! convolution with the flipped, channel-swapped kernel).

use crate::elem::{gemm, Elem};
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PadMode {
    Zero,
    Reflect,
}

pub fn conv_out_size(n: usize, k: usize, s: usize, p: usize) -> usize {
    (n + 2 * p - k) / s + 1
}

/// Pad a CHW tensor spatially by `p` on each side.
pub fn pad2d<T: Elem>(x: &Tensor<T>, p: usize, mode: PadMode) -> Tensor<T> {
    if p == 0 {
        return x.clone();
    }
    let (c, h, w) = x.chw();
    let (hp, wp) = (h + 2 * p, w + 2 * p);
    let mut out = Tensor::zeros(&[c, hp, wp]);
    for ci in 0..c {
        for y in 0..hp {
            let sy = src_index(y, p, h, mode);
            for xp in 0..wp {
                let sx = src_index(xp, p, w, mode);
                if let (Some(sy), Some(sx)) = (sy, sx) {
                    out.data[(ci * hp + y) * wp + xp] = x.data[(ci * h + sy) * w + sx];
                }
            }
        }
    }
    out
}

/// Fold a padded-space gradient back onto the unpadded input.
pub fn pad2d_backward<T: Elem>(g: &Tensor<T>, p: usize, mode: PadMode) -> Tensor<T> {
    if p == 0 {
        return g.clone();
    }
    let (c, hp, wp) = g.chw();
    let (h, w) = (hp - 2 * p, wp - 2 * p);
    let mut out = Tensor::zeros(&[c, h, w]);
    for ci in 0..c {
        for y in 0..hp {
            let sy = src_index(y, p, h, mode);
            for xp in 0..wp {
                let sx = src_index(xp, p, w, mode);
                if let (Some(sy), Some(sx)) = (sy, sx) {
                    out.data[(ci * h + sy) * w + sx] += g.data[(ci * hp + y) * wp + xp];
                }
            }
        }
    }
    out
}

fn src_index(padded: usize, p: usize, n: usize, mode: PadMode) -> Option<usize> {
    let i = padded as isize - p as isize;
    if i >= 0 && (i as usize) < n {
        return Some(i as usize);
    }
    match mode {
        PadMode::Zero => None,
        // reflect without repeating the edge pixel (PyTorch ReflectionPad2d)
        PadMode::Reflect => {
            let i = if i < 0 { -i } else { 2 * (n as isize - 1) - i };
            debug_assert!(i >= 0 && (i as usize) < n, "reflect pad wider than input");
            Some(i as usize)
        }
    }
}

/// Build the (cin*k*k) x (hout*wout) patch matrix from an already-padded input.
pub fn im2col<T: Elem>(xp: &Tensor<T>, k: usize, s: usize, hout: usize, wout: usize) -> Vec<T> {
    let (c, hp, wp) = xp.chw();
    let mut cols = vec![T::zero(); c * k * k * hout * wout];
    let l = hout * wout;
    for ci in 0..c {
        for ky in 0..k {
            for kx in 0..k {
                let row = ((ci * k + ky) * k + kx) * l;
                for oy in 0..hout {
                    let iy = oy * s + ky;
                    let src = (ci * hp + iy) * wp + kx;
                    let dst = row + oy * wout;
                    for ox in 0..wout {
                        cols[dst + ox] = xp.data[src + ox * s];
                    }
                }
            }
        }
    }
    debug_assert!(hout == 0 || (hout - 1) * s + k <= hp && (wout - 1) * s + k <= wp);
    cols
}

/// Scatter-add a patch-matrix gradient back into padded-input space.
pub fn col2im<T: Elem>(
    cols: &[T],
    c: usize,
    hp: usize,
    wp: usize,
    k: usize,
    s: usize,
    hout: usize,
    wout: usize,
) -> Tensor<T> {
    let mut out = Tensor::zeros(&[c, hp, wp]);
    let l = hout * wout;
    for ci in 0..c {
        for ky in 0..k {
            for kx in 0..k {
                let row = ((ci * k + ky) * k + kx) * l;
                for oy in 0..hout {
                    let iy = oy * s + ky;
                    let dst = (ci * hp + iy) * wp + kx;
                    let src = row + oy * wout;
                    for ox in 0..wout {
                        out.data[dst + ox * s] += cols[src + ox];
                    }
                }
            }
        }
    }
    out
}

pub struct ConvCache<T> {
    /// im2col matrix of the padded input, kept for the weight gradient.
    pub cols: Vec<T>,
    pub hout: usize,
    pub wout: usize,
    pub hp: usize,
    pub wp: usize,
}

/// Forward conv. `w` is (cout, cin, k, k), `b` is (cout).
pub fn conv_forward<T: Elem>(
    x: &Tensor<T>,
    w: &Tensor<T>,
    b: &Tensor<T>,
    stride: usize,
    pad: usize,
    mode: PadMode,
) -> (Tensor<T>, ConvCache<T>) {
    let (cin, h, wd) = x.chw();
    let (cout, k) = (w.shape[0], w.shape[2]);
    debug_assert_eq!(w.shape[1], cin);
    let hout = conv_out_size(h, k, stride, pad);
    let wout = conv_out_size(wd, k, stride, pad);
    let xp = pad2d(x, pad, mode);
    let cols = im2col(&xp, k, stride, hout, wout);
    let l = hout * wout;
    let mut out = Tensor::zeros(&[cout, hout, wout]);
    gemm(cout, cin * k * k, l, T::one(), &w.data, false, &cols, false, T::zero(), &mut out.data);
    for co in 0..cout {
        let bv = b.data[co];
        for v in &mut out.data[co * l..(co + 1) * l] {
            *v += bv;
        }
    }
    (out, ConvCache { cols, hout, wout, hp: h + 2 * pad, wp: wd + 2 * pad })
}

/// Backward conv: returns grad w.r.t. input; accumulates dW/dB when given.
pub fn conv_backward<T: Elem>(
    dy: &Tensor<T>,
    cache: &ConvCache<T>,
    w: &Tensor<T>,
    stride: usize,
    pad: usize,
    mode: PadMode,
    dw: Option<(&mut Tensor<T>, &mut Tensor<T>)>,
) -> Tensor<T> {
    let (cout, cin, k) = (w.shape[0], w.shape[1], w.shape[2]);
    let l = cache.hout * cache.wout;
    debug_assert_eq!(dy.numel(), cout * l);

    if let Some((dw, db)) = dw {
        // dW += dY (cout x L) * cols^T (L x cin*k*k)
        gemm(
            cout,
            l,
            cin * k * k,
            T::one(),
            &dy.data,
            false,
            &cache.cols,
            true,
            T::one(),
            &mut dw.data,
        );
        for co in 0..cout {
            let mut s = T::zero();
            for v in &dy.data[co * l..(co + 1) * l] {
                s += *v;
            }
            db.data[co] += s;
        }
    }

    // dCols = W^T (cin*k*k x cout) * dY (cout x L)
    let mut dcols = vec![T::zero(); cin * k * k * l];
    gemm(cin * k * k, cout, l, T::one(), &w.data, true, &dy.data, false, T::zero(), &mut dcols);
    let dpad = col2im(&dcols, cin, cache.hp, cache.wp, k, stride, cache.hout, cache.wout);
    pad2d_backward(&dpad, pad, mode)
}

/// Insert (s-1) zeros between pixels and crop/pad so a stride-1 conv with the
/// flipped kernel realizes the transposed convolution
/// out = (in-1)*s - 2p + k + op.
pub fn zero_stuff<T: Elem>(
    x: &Tensor<T>,
    stride: usize,
    k: usize,
    pad: usize,
    out_pad: usize,
) -> Tensor<T> {
    let (c, h, w) = x.chw();
    let border = k - 1 - pad;
    let hs = (h - 1) * stride + 1 + 2 * border + out_pad;
    let ws = (w - 1) * stride + 1 + 2 * border + out_pad;
    let mut out = Tensor::zeros(&[c, hs, ws]);
    for ci in 0..c {
        for y in 0..h {
            for xx in 0..w {
                out.data[(ci * hs + y * stride + border) * ws + xx * stride + border] =
                    x.data[(ci * h + y) * w + xx];
            }
        }
    }
    out
}

pub fn zero_stuff_backward<T: Elem>(
    g: &Tensor<T>,
    c: usize,
    h: usize,
    w: usize,
    stride: usize,
    k: usize,
    pad: usize,
) -> Tensor<T> {
    let border = k - 1 - pad;
    let (_, hs, ws) = g.chw();
    let mut out = Tensor::zeros(&[c, h, w]);
    for ci in 0..c {
        for y in 0..h {
            for xx in 0..w {
                out.data[(ci * h + y) * w + xx] =
                    g.data[(ci * hs + y * stride + border) * ws + xx * stride + border];
            }
        }
    }
    out
}

/// (cin, cout, k, k) -> (cout, cin, k, k) with both kernel axes flipped.
pub fn flip_transpose_kernel<T: Elem>(w: &Tensor<T>) -> Tensor<T> {
    let (cin, cout, k) = (w.shape[0], w.shape[1], w.shape[2]);
    let mut out = Tensor::zeros(&[cout, cin, k, k]);
    for ci in 0..cin {
        for co in 0..cout {
            for ky in 0..k {
                for kx in 0..k {
                    out.data[((co * cin + ci) * k + (k - 1 - ky)) * k + (k - 1 - kx)] =
                        w.data[((ci * cout + co) * k + ky) * k + kx];
                }
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(shape: &[usize], v: Vec<f64>) -> Tensor<f64> {
        Tensor::from_vec(shape, v)
    }

    #[test]
    fn conv_identity_kernel() {
        let x = t(&[1, 3, 3], (1..=9).map(|v| v as f64).collect());
        // 1x1 kernel = 1, bias 0: output equals input
        let w = t(&[1, 1, 1, 1], vec![1.0]);
        let b = t(&[1], vec![0.0]);
        let (y, _) = conv_forward(&x, &w, &b, 1, 0, PadMode::Zero);
        assert_eq!(y.data, x.data);
    }

    #[test]
    fn conv_matches_naive_loop() {
        let mut rng = crate::rng::rng_from(5);
        let (cin, cout, h, w, k, s, p) = (3, 4, 7, 6, 3, 2, 1);
        let x = t(&[cin, h, w], (0..cin * h * w).map(|_| crate::rng::sample_normal(&mut rng)).collect());
        let wt = t(
            &[cout, cin, k, k],
            (0..cout * cin * k * k).map(|_| crate::rng::sample_normal(&mut rng)).collect(),
        );
        let b = t(&[cout], (0..cout).map(|_| crate::rng::sample_normal(&mut rng)).collect());
        let (y, _) = conv_forward(&x, &wt, &b, s, p, PadMode::Zero);
        let (ho, wo) = (conv_out_size(h, k, s, p), conv_out_size(w, k, s, p));
        for co in 0..cout {
            for oy in 0..ho {
                for ox in 0..wo {
                    let mut acc = b.data[co];
                    for ci in 0..cin {
                        for ky in 0..k {
                            for kx in 0..k {
                                let iy = (oy * s + ky) as isize - p as isize;
                                let ix = (ox * s + kx) as isize - p as isize;
                                if iy >= 0 && ix >= 0 && (iy as usize) < h && (ix as usize) < w {
                                    acc += x.data[(ci * h + iy as usize) * w + ix as usize]
                                        * wt.data[((co * cin + ci) * k + ky) * k + kx];
                                }
                            }
                        }
                    }
                    let got = y.data[(co * ho + oy) * wo + ox];
                    assert!((got - acc).abs() < 1e-9, "mismatch at {co},{oy},{ox}");
                }
            }
        }
    }

    #[test]
    fn reflect_pad_mirrors_without_edge_repeat() {
        let x = t(&[1, 3, 4], (1..=12).map(|v| v as f64).collect());
        let p = pad2d(&x, 2, PadMode::Reflect);
        // padded row 4 is source row 2 = [9, 10, 11, 12]
        assert_eq!(p.data[4 * 8..5 * 8], [11.0, 10.0, 9.0, 10.0, 11.0, 12.0, 11.0, 10.0]);
        // padded row 0 reflects to source row 2 as well
        assert_eq!(p.data[0..8], [11.0, 10.0, 9.0, 10.0, 11.0, 12.0, 11.0, 10.0]);
    }

    #[test]
    fn pad_backward_is_adjoint_of_pad() {
        // <pad(x), g> == <x, pad_backward(g)> for both modes
        let mut rng = crate::rng::rng_from(9);
        for mode in [PadMode::Zero, PadMode::Reflect] {
            let x = t(&[2, 5, 5], (0..50).map(|_| crate::rng::sample_normal(&mut rng)).collect());
            let px = pad2d(&x, 2, mode);
            let g = t(&[2, 9, 9], (0..162).map(|_| crate::rng::sample_normal(&mut rng)).collect());
            let bg = pad2d_backward(&g, 2, mode);
            let lhs: f64 = px.data.iter().zip(&g.data).map(|(a, b)| a * b).sum();
            let rhs: f64 = x.data.iter().zip(&bg.data).map(|(a, b)| a * b).sum();
            assert!((lhs - rhs).abs() < 1e-9, "{mode:?}: {lhs} vs {rhs}");
        }
    }
}
