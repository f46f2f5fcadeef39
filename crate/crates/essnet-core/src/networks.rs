//! The three network families: ResNet-style generators (G1, G2), PatchGAN
//! discriminators (D1, D2), and the segmenter S (generator topology with a
//! C-channel softmax head).

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::elem::Elem;
use crate::error::{Error, Result};
use crate::nn::conv::conv_out_size;
use crate::nn::{block, Block, Cache, Grads, Layer, PadMode, ParamStore};
use crate::rng::{rng_from, sample_normal};
use crate::tensor::Tensor;

pub const WEIGHT_INIT_STD: f64 = 0.02;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Role {
    G1,
    G2,
    D1,
    D2,
    S,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Head {
    Tanh,
    Softmax,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GeneratorConfig {
    pub width: usize,
    pub blocks: usize,
    pub in_channels: usize,
    pub out_channels: usize,
    pub head: Head,
}

impl GeneratorConfig {
    pub fn desk(out_channels: usize, head: Head) -> Self {
        GeneratorConfig { width: 16, blocks: 3, in_channels: 1, out_channels, head }
    }

    pub fn paper_parity(out_channels: usize, head: Head) -> Self {
        GeneratorConfig { width: 64, blocks: 9, in_channels: 1, out_channels, head }
    }

    pub fn validate(&self) -> Result<()> {
        if self.blocks < 1 || self.width < 2 {
            return Err(Error::Config(format!(
                "generator needs blocks >= 1 and width >= 2, got blocks={} width={}",
                self.blocks, self.width
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DiscriminatorConfig {
    pub width: usize,
    pub in_channels: usize,
    /// number of stride-2 stages before the stride-1 stage and the head
    pub stages: usize,
}

impl DiscriminatorConfig {
    pub fn desk() -> Self {
        DiscriminatorConfig { width: 16, in_channels: 1, stages: 3 }
    }

    pub fn paper_parity() -> Self {
        DiscriminatorConfig { width: 64, in_channels: 1, stages: 3 }
    }

    /// stride sequence of all conv layers including the head
    pub fn strides(&self) -> Vec<usize> {
        let mut s = vec![2; self.stages];
        s.push(1);
        s.push(1);
        s
    }

    pub fn validate(&self) -> Result<()> {
        if self.width < 2 || self.stages < 1 {
            return Err(Error::Config(format!(
                "discriminator needs width >= 2 and stages >= 1, got width={} stages={}",
                self.width, self.stages
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum NetConfig {
    Generator(GeneratorConfig),
    Discriminator(DiscriminatorConfig),
}

pub struct Network<T> {
    pub role: Role,
    pub config: NetConfig,
    pub arch: Block,
    pub params: ParamStore<T>,
    forward_calls: Arc<AtomicU64>,
}

impl<T: Elem> Network<T> {
    pub fn forward_calls(&self) -> u64 {
        self.forward_calls.load(Ordering::Relaxed)
    }

    /// Inference forward (cache discarded).
    pub fn forward(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        self.forward_train(x).map(|(y, _)| y)
    }

    /// Training forward; the cache feeds `backward`.
    pub fn forward_train(&self, x: &Tensor<T>) -> Result<(Tensor<T>, Cache<T>)> {
        self.forward_calls.fetch_add(1, Ordering::Relaxed);
        self.check_input(x)?;
        block::forward(&self.arch, &self.params, x)
    }

    pub fn backward(
        &self,
        cache: &Cache<T>,
        dy: &Tensor<T>,
        mut grads: Option<&mut Grads<T>>,
    ) -> Tensor<T> {
        block::backward(&self.arch, &self.params, cache, dy, &mut grads)
    }

    pub fn zero_grads(&self) -> Grads<T> {
        self.params.zeros_like()
    }

    fn check_input(&self, x: &Tensor<T>) -> Result<()> {
        let (_, h, w) = x.chw();
        match &self.config {
            NetConfig::Generator(_) => {
                if h % 4 != 0 || w % 4 != 0 {
                    return Err(Error::SizeNotDivisible { h, w });
                }
            }
            NetConfig::Discriminator(dc) => {
                let (mut sh, mut sw) = (h, w);
                for (stage, stride) in dc.strides().into_iter().enumerate() {
                    // stride-2 stages need >= 4 px; stride-1 convs (k=4, p=1)
                    // still produce output down to 2 px
                    let min = if stride == 2 { 4 } else { 2 };
                    if sh < min || sw < min {
                        return Err(Error::DiscriminatorInputTooSmall {
                            stage,
                            size: sh.min(sw),
                        });
                    }
                    sh = conv_out_size(sh, 4, stride, 1);
                    sw = conv_out_size(sw, 4, stride, 1);
                }
            }
        }
        Ok(())
    }

    /// Per-layer (name, shape) list, for architecture-equality assertions.
    pub fn layer_shapes(&self) -> Vec<(String, Vec<usize>)> {
        self.params
            .names
            .iter()
            .zip(&self.params.tensors)
            .map(|(n, t)| (n.clone(), t.shape.clone()))
            .collect()
    }

    pub fn cast<U: Elem>(&self) -> Network<U> {
        Network {
            role: self.role,
            config: self.config.clone(),
            arch: self.arch.clone(),
            params: self.params.cast(),
            forward_calls: Arc::new(AtomicU64::new(0)),
        }
    }
}

struct Builder<T> {
    params: ParamStore<T>,
    rng: rand_chacha::ChaCha8Rng,
    idx: usize,
}

impl<T: Elem> Builder<T> {
    fn new(seed: u64) -> Self {
        Builder { params: ParamStore::new(), rng: rng_from(seed), idx: 0 }
    }

    fn conv(&mut self, cin: usize, cout: usize, k: usize, stride: usize, pad: usize, pad_mode: PadMode) -> Layer {
        let i = self.idx;
        self.idx += 1;
        let mut w = Tensor::zeros(&[cout, cin, k, k]);
        for v in &mut w.data {
            *v = T::from_f64(sample_normal(&mut self.rng) * WEIGHT_INIT_STD);
        }
        let wid = self.params.add(format!("conv{i}.w"), w);
        let bid = self.params.add(format!("conv{i}.b"), Tensor::zeros(&[cout]));
        Layer::Conv { w: wid, b: bid, stride, pad, pad_mode }
    }

    fn conv_t(&mut self, cin: usize, cout: usize, k: usize, stride: usize, pad: usize, out_pad: usize) -> Layer {
        let i = self.idx;
        self.idx += 1;
        let mut w = Tensor::zeros(&[cin, cout, k, k]);
        for v in &mut w.data {
            *v = T::from_f64(sample_normal(&mut self.rng) * WEIGHT_INIT_STD);
        }
        let wid = self.params.add(format!("convt{i}.w"), w);
        let bid = self.params.add(format!("convt{i}.b"), Tensor::zeros(&[cout]));
        Layer::ConvT { w: wid, b: bid, stride, pad, out_pad }
    }

    fn norm(&mut self, ch: usize) -> Layer {
        let i = self.idx;
        self.idx += 1;
        let g = self.params.add(format!("in{i}.gain"), Tensor::full(&[ch], T::one()));
        let b = self.params.add(format!("in{i}.bias"), Tensor::zeros(&[ch]));
        Layer::InstanceNorm { gain: g, bias: b }
    }
}

/// c7s1-w, d2w, d4w, N residual blocks, u2w, uw, c7s1-out.
pub fn build_generator<T: Elem>(role: Role, config: GeneratorConfig, seed: u64) -> Result<Network<T>> {
    config.validate()?;
    let w = config.width;
    let mut b = Builder::<T>::new(seed);
    let mut seq: Vec<Block> = Vec::new();

    seq.push(Block::One(b.conv(config.in_channels, w, 7, 1, 3, PadMode::Reflect)));
    seq.push(Block::One(b.norm(w)));
    seq.push(Block::One(Layer::Relu));

    seq.push(Block::One(b.conv(w, 2 * w, 3, 2, 1, PadMode::Zero)));
    seq.push(Block::One(b.norm(2 * w)));
    seq.push(Block::One(Layer::Relu));
    seq.push(Block::One(b.conv(2 * w, 4 * w, 3, 2, 1, PadMode::Zero)));
    seq.push(Block::One(b.norm(4 * w)));
    seq.push(Block::One(Layer::Relu));

    for _ in 0..config.blocks {
        let inner = Block::Seq(vec![
            Block::One(b.conv(4 * w, 4 * w, 3, 1, 1, PadMode::Reflect)),
            Block::One(b.norm(4 * w)),
            Block::One(Layer::Relu),
            Block::One(b.conv(4 * w, 4 * w, 3, 1, 1, PadMode::Reflect)),
            Block::One(b.norm(4 * w)),
        ]);
        seq.push(Block::Residual(Box::new(inner)));
    }

    seq.push(Block::One(b.conv_t(4 * w, 2 * w, 3, 2, 1, 1)));
    seq.push(Block::One(b.norm(2 * w)));
    seq.push(Block::One(Layer::Relu));
    seq.push(Block::One(b.conv_t(2 * w, w, 3, 2, 1, 1)));
    seq.push(Block::One(b.norm(w)));
    seq.push(Block::One(Layer::Relu));

    seq.push(Block::One(b.conv(w, config.out_channels, 7, 1, 3, PadMode::Reflect)));
    seq.push(Block::One(match config.head {
        Head::Tanh => Layer::Tanh,
        Head::Softmax => Layer::SoftmaxChannels,
    }));

    Ok(Network {
        role,
        config: NetConfig::Generator(config),
        arch: Block::Seq(seq),
        params: b.params,
        forward_calls: Arc::new(AtomicU64::new(0)),
    })
}

/// PatchGAN: three stride-2 stages, one stride-1 stage, 1-channel head;
/// kernel 4, pad 1; raw scores (no sigmoid).
pub fn build_discriminator<T: Elem>(role: Role, config: DiscriminatorConfig, seed: u64) -> Result<Network<T>> {
    config.validate()?;
    let w = config.width;
    let mult = |i: usize| w * (1usize << i).min(8);
    let mut b = Builder::<T>::new(seed);
    let mut seq: Vec<Block> = Vec::new();

    seq.push(Block::One(b.conv(config.in_channels, w, 4, 2, 1, PadMode::Zero)));
    seq.push(Block::One(Layer::LeakyRelu(0.2)));
    let mut cin = w;
    for i in 1..config.stages {
        let cout = mult(i);
        seq.push(Block::One(b.conv(cin, cout, 4, 2, 1, PadMode::Zero)));
        seq.push(Block::One(b.norm(cout)));
        seq.push(Block::One(Layer::LeakyRelu(0.2)));
        cin = cout;
    }
    let cout = mult(config.stages);
    seq.push(Block::One(b.conv(cin, cout, 4, 1, 1, PadMode::Zero)));
    seq.push(Block::One(b.norm(cout)));
    seq.push(Block::One(Layer::LeakyRelu(0.2)));
    seq.push(Block::One(b.conv(cout, 1, 4, 1, 1, PadMode::Zero)));

    Ok(Network {
        role,
        config: NetConfig::Discriminator(config),
        arch: Block::Seq(seq),
        params: b.params,
        forward_calls: Arc::new(AtomicU64::new(0)),
    })
}

pub fn build_segmenter<T: Elem>(config: GeneratorConfig, seed: u64) -> Result<Network<T>> {
    build_generator(Role::S, GeneratorConfig { head: Head::Softmax, ..config }, seed)
}

/// Spatial size of the default (3-stage) PatchGAN score map for a square input.
pub fn patchgan_output_size(n: usize) -> usize {
    let mut s = n;
    for stride in DiscriminatorConfig::desk().strides() {
        s = conv_out_size(s, 4, stride, 1);
    }
    s
}
