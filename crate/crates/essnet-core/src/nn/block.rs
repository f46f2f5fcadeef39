//! Layer / block tree with explicit forward caches and hand-rolled backward.
//! Networks are small static graphs; a full tape autodiff would be overkill
//! and harder to keep bitwise deterministic.

use crate::elem::Elem;
use crate::error::{Error, Result};
use crate::nn::act;
use crate::nn::conv::{self, ConvCache, PadMode};
use crate::nn::norm::{self, NormCache};
use crate::tensor::Tensor;

pub type ParamId = usize;

#[derive(Debug, Clone)]
pub struct ParamStore<T> {
    pub names: Vec<String>,
    pub tensors: Vec<Tensor<T>>,
}

impl<T: Elem> ParamStore<T> {
    pub fn new() -> Self {
        ParamStore { names: Vec::new(), tensors: Vec::new() }
    }

    pub fn add(&mut self, name: impl Into<String>, t: Tensor<T>) -> ParamId {
        self.names.push(name.into());
        self.tensors.push(t);
        self.tensors.len() - 1
    }

    pub fn numel(&self) -> usize {
        self.tensors.iter().map(|t| t.numel()).sum()
    }

    pub fn zeros_like(&self) -> Grads<T> {
        Grads { tensors: self.tensors.iter().map(|t| t.zeros_like()).collect() }
    }

    pub fn cast<U: Elem>(&self) -> ParamStore<U> {
        ParamStore {
            names: self.names.clone(),
            tensors: self.tensors.iter().map(|t| t.cast()).collect(),
        }
    }
}

impl<T: Elem> Default for ParamStore<T> {
    fn default() -> Self {
        Self::new()
    }
}

/// Per-parameter gradient accumulator aligned with a ParamStore.
#[derive(Debug, Clone)]
pub struct Grads<T> {
    pub tensors: Vec<Tensor<T>>,
}

impl<T: Elem> Grads<T> {
    pub fn zero(&mut self) {
        self.tensors.iter_mut().for_each(|t| t.fill(T::zero()));
    }
}

#[derive(Debug, Clone)]
pub enum Layer {
    Conv {
        w: ParamId,
        b: ParamId,
        stride: usize,
        pad: usize,
        pad_mode: PadMode,
    },
    /// Transposed conv; weight stored (cin, cout, k, k).
    ConvT {
        w: ParamId,
        b: ParamId,
        stride: usize,
        pad: usize,
        out_pad: usize,
    },
    InstanceNorm {
        gain: ParamId,
        bias: ParamId,
    },
    Relu,
    LeakyRelu(f64),
    Tanh,
    SoftmaxChannels,
}

#[derive(Debug, Clone)]
pub enum Block {
    Seq(Vec<Block>),
    One(Layer),
    /// out = in + inner(in); shapes must match.
    Residual(Box<Block>),
}

impl Block {
    pub fn seq(layers: Vec<Layer>) -> Block {
        Block::Seq(layers.into_iter().map(Block::One).collect())
    }

    pub fn layers(&self) -> Vec<&Layer> {
        let mut out = Vec::new();
        self.collect_layers(&mut out);
        out
    }

    fn collect_layers<'a>(&'a self, out: &mut Vec<&'a Layer>) {
        match self {
            Block::Seq(bs) => bs.iter().for_each(|b| b.collect_layers(out)),
            Block::One(l) => out.push(l),
            Block::Residual(b) => b.collect_layers(out),
        }
    }
}

pub enum LayerCache<T> {
    Conv(ConvCache<T>),
    ConvT {
        cache: ConvCache<T>,
        /// flipped/transposed kernel used by the equivalent stride-1 conv
        wf: Tensor<T>,
        in_shape: (usize, usize, usize),
    },
    Norm(NormCache<T>),
    /// pre-activation input (relu / leaky-relu)
    Input(Tensor<T>),
    /// activation output (tanh / softmax)
    Output(Tensor<T>),
}

pub enum Cache<T> {
    Seq(Vec<Cache<T>>),
    One(LayerCache<T>),
    Residual(Box<Cache<T>>),
}

/// Forward through a block, caching what backward needs.
pub fn forward<T: Elem>(
    block: &Block,
    params: &ParamStore<T>,
    x: &Tensor<T>,
) -> Result<(Tensor<T>, Cache<T>)> {
    match block {
        Block::Seq(bs) => {
            let mut cur = x.clone();
            let mut caches = Vec::with_capacity(bs.len());
            for b in bs {
                let (y, c) = forward(b, params, &cur)?;
                cur = y;
                caches.push(c);
            }
            Ok((cur, Cache::Seq(caches)))
        }
        Block::Residual(inner) => {
            let (y, c) = forward(inner, params, x)?;
            if y.shape != x.shape {
                return Err(Error::Shape {
                    expected: format!("{:?}", x.shape),
                    got: format!("{:?}", y.shape),
                });
            }
            let mut out = y;
            out.add_assign(x);
            Ok((out, Cache::Residual(Box::new(c))))
        }
        Block::One(layer) => {
            let (y, c) = layer_forward(layer, params, x)?;
            Ok((y, Cache::One(c)))
        }
    }
}

fn layer_forward<T: Elem>(
    layer: &Layer,
    params: &ParamStore<T>,
    x: &Tensor<T>,
) -> Result<(Tensor<T>, LayerCache<T>)> {
    match layer {
        Layer::Conv { w, b, stride, pad, pad_mode } => {
            let wt = &params.tensors[*w];
            let (_, h, wd) = x.chw();
            let k = wt.shape[2];
            if wt.shape[1] != x.shape[0] {
                return Err(Error::Shape {
                    expected: format!("{} input channels", wt.shape[1]),
                    got: format!("{}", x.shape[0]),
                });
            }
            if h + 2 * pad < k || wd + 2 * pad < k {
                return Err(Error::Shape {
                    expected: format!(">= {}x{} (k={k}, p={pad})", k, k),
                    got: format!("{h}x{wd}"),
                });
            }
            let (y, c) = conv::conv_forward(x, wt, &params.tensors[*b], *stride, *pad, *pad_mode);
            Ok((y, LayerCache::Conv(c)))
        }
        Layer::ConvT { w, b, stride, pad, out_pad } => {
            let wt = &params.tensors[*w];
            let k = wt.shape[2];
            if wt.shape[0] != x.shape[0] {
                return Err(Error::Shape {
                    expected: format!("{} input channels", wt.shape[0]),
                    got: format!("{}", x.shape[0]),
                });
            }
            let wf = conv::flip_transpose_kernel(wt);
            let stuffed = conv::zero_stuff(x, *stride, k, *pad, *out_pad);
            let (y, c) =
                conv::conv_forward(&stuffed, &wf, &params.tensors[*b], 1, 0, PadMode::Zero);
            Ok((y, LayerCache::ConvT { cache: c, wf, in_shape: x.chw() }))
        }
        Layer::InstanceNorm { gain, bias } => {
            let (y, c) =
                norm::instance_norm_forward(x, &params.tensors[*gain], &params.tensors[*bias]);
            Ok((y, LayerCache::Norm(c)))
        }
        Layer::Relu => Ok((act::relu_forward(x), LayerCache::Input(x.clone()))),
        Layer::LeakyRelu(a) => Ok((act::leaky_relu_forward(x, *a), LayerCache::Input(x.clone()))),
        Layer::Tanh => {
            let y = act::tanh_forward(x);
            Ok((y.clone(), LayerCache::Output(y)))
        }
        Layer::SoftmaxChannels => {
            let y = act::softmax_channels_forward(x);
            Ok((y.clone(), LayerCache::Output(y)))
        }
    }
}

/// Backward through a block. Parameter gradients accumulate into `grads`
/// when provided; pass `None` to propagate only the input gradient (used
/// when generators receive adversarial gradients through a frozen D).
pub fn backward<T: Elem>(
    block: &Block,
    params: &ParamStore<T>,
    cache: &Cache<T>,
    dy: &Tensor<T>,
    grads: &mut Option<&mut Grads<T>>,
) -> Tensor<T> {
    match (block, cache) {
        (Block::Seq(bs), Cache::Seq(cs)) => {
            let mut cur = dy.clone();
            for (b, c) in bs.iter().zip(cs.iter()).rev() {
                cur = backward(b, params, c, &cur, grads);
            }
            cur
        }
        (Block::Residual(inner), Cache::Residual(c)) => {
            let mut dx = backward(inner, params, c, dy, grads);
            dx.add_assign(dy);
            dx
        }
        (Block::One(layer), Cache::One(c)) => layer_backward(layer, params, c, dy, grads),
        _ => unreachable!("cache/block structure mismatch"),
    }
}

fn layer_backward<T: Elem>(
    layer: &Layer,
    params: &ParamStore<T>,
    cache: &LayerCache<T>,
    dy: &Tensor<T>,
    grads: &mut Option<&mut Grads<T>>,
) -> Tensor<T> {
    match (layer, cache) {
        (Layer::Conv { w, b, stride, pad, pad_mode }, LayerCache::Conv(c)) => {
            let wt = &params.tensors[*w];
            match grads {
                Some(g) => {
                    // split-borrow dW and dB out of the grad store
                    let (wi, bi) = (*w, *b);
                    let (a, rest) = g.tensors.split_at_mut(wi.max(bi));
                    let (dwt, dbt) = if wi < bi {
                        (&mut a[wi], &mut rest[0])
                    } else {
                        (&mut rest[0], &mut a[bi])
                    };
                    conv::conv_backward(dy, c, wt, *stride, *pad, *pad_mode, Some((dwt, dbt)))
                }
                None => conv::conv_backward(dy, c, wt, *stride, *pad, *pad_mode, None),
            }
        }
        (Layer::ConvT { w, b, stride, pad, .. }, LayerCache::ConvT { cache: c, wf, in_shape }) => {
            let k = wf.shape[2];
            let dstuffed = match grads {
                Some(g) => {
                    let (wi, bi) = (*w, *b);
                    let (a, rest) = g.tensors.split_at_mut(wi.max(bi));
                    let (dwt_store, dbt) = if wi < bi {
                        (&mut a[wi], &mut rest[0])
                    } else {
                        (&mut rest[0], &mut a[bi])
                    };
                    // accumulate into a flipped-layout scratch, then fold back
                    let mut dwf = wf.zeros_like();
                    let mut db_scratch = Tensor::zeros(&[wf.shape[0]]);
                    let d = conv::conv_backward(
                        dy,
                        c,
                        wf,
                        1,
                        0,
                        PadMode::Zero,
                        Some((&mut dwf, &mut db_scratch)),
                    );
                    let (cin, cout) = (dwt_store.shape[0], dwt_store.shape[1]);
                    for ci in 0..cin {
                        for co in 0..cout {
                            for ky in 0..k {
                                for kx in 0..k {
                                    dwt_store.data[((ci * cout + co) * k + ky) * k + kx] += dwf
                                        .data
                                        [((co * cin + ci) * k + (k - 1 - ky)) * k + (k - 1 - kx)];
                                }
                            }
                        }
                    }
                    dbt.add_assign(&db_scratch);
                    d
                }
                None => conv::conv_backward(dy, c, wf, 1, 0, PadMode::Zero, None),
            };
            let (ci, h, wd) = *in_shape;
            conv::zero_stuff_backward(&dstuffed, ci, h, wd, *stride, k, *pad)
        }
        (Layer::InstanceNorm { gain, bias }, LayerCache::Norm(c)) => {
            let gt = &params.tensors[*gain];
            match grads {
                Some(g) => {
                    let (gi, bi) = (*gain, *bias);
                    let (a, rest) = g.tensors.split_at_mut(gi.max(bi));
                    let (dg, db) = if gi < bi {
                        (&mut a[gi], &mut rest[0])
                    } else {
                        (&mut rest[0], &mut a[bi])
                    };
                    norm::instance_norm_backward(dy, c, gt, Some((dg, db)))
                }
                None => norm::instance_norm_backward(dy, c, gt, None),
            }
        }
        (Layer::Relu, LayerCache::Input(x)) => act::relu_backward(dy, x),
        (Layer::LeakyRelu(a), LayerCache::Input(x)) => act::leaky_relu_backward(dy, x, *a),
        (Layer::Tanh, LayerCache::Output(y)) => act::tanh_backward(dy, y),
        (Layer::SoftmaxChannels, LayerCache::Output(y)) => act::softmax_channels_backward(dy, y),
        _ => unreachable!("cache/layer kind mismatch"),
    }
}
