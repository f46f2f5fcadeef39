//! Finite-difference audit of the analytic gradients through the full
//! two-path training graph. Runs in f64; central differences with h = 1e-3.

use serde::{Deserialize, Serialize};

use crate::elem::Elem;
use crate::error::Result;
use crate::losses::{
    adversarial_loss_d, adversarial_loss_g, cycle_loss, seg_loss, total_loss, GanMode,
    LossWeights, SegReduction,
};
use crate::networks::{
    build_discriminator, build_generator, build_segmenter, DiscriminatorConfig, GeneratorConfig,
    Head, Network, Role,
};
use crate::rng::{derive_seed, rng_from};
use crate::types::LabelMap;
use crate::tensor::Tensor;
use rand::Rng;

pub const FD_STEP: f64 = 1e-3;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GradCheckConfig {
    pub image_size: usize,
    pub width: usize,
    pub blocks: usize,
    pub classes: usize,
    pub samples: usize,
    pub seed: u64,
    /// multiplier applied to all conv weights after init
    pub init_scale: f64,
    pub weights: LossWeights,
    pub gan_mode: GanMode,
}

impl Default for GradCheckConfig {
    fn default() -> Self {
        GradCheckConfig {
            image_size: 8,
            width: 4,
            blocks: 1,
            classes: 7,
            samples: 200,
            seed: 17,
            init_scale: 1.0,
            weights: LossWeights::paper(),
            gan_mode: GanMode::NonSaturating,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GradCheckReport {
    pub samples: usize,
    pub within_tolerance: usize,
    pub tolerance: f64,
    pub max_rel_error: f64,
    pub median_rel_error: f64,
    /// (network, parameter name, flat index, analytic, finite-difference)
    pub worst: Vec<(String, String, usize, f64, f64)>,
}

impl GradCheckReport {
    pub fn pass_fraction(&self) -> f64 {
        self.within_tolerance as f64 / self.samples as f64
    }
}

struct Graph {
    g1: Network<f64>,
    g2: Network<f64>,
    s: Network<f64>,
    d1: Network<f64>,
    d2: Network<f64>,
    x: Tensor<f64>,
    y: Tensor<f64>,
    m: LabelMap,
}

impl Graph {
    fn build(cfg: &GradCheckConfig) -> Result<Graph> {
        let gc = GeneratorConfig {
            width: cfg.width,
            blocks: cfg.blocks,
            in_channels: 1,
            out_channels: 1,
            head: Head::Tanh,
        };
        let sc = GeneratorConfig { out_channels: cfg.classes, head: Head::Softmax, ..gc };
        // tiny images only survive one stride-2 stage
        let stages = if cfg.image_size >= 40 { 3 } else { 1 };
        let dc = DiscriminatorConfig { width: cfg.width, in_channels: 1, stages };
        let g1 = build_generator(Role::G1, gc, derive_seed(cfg.seed, "g1"))?;
        let g2 = build_generator(Role::G2, gc, derive_seed(cfg.seed, "g2"))?;
        let s = build_segmenter(sc, derive_seed(cfg.seed, "s"))?;
        let mut d1 = build_discriminator(Role::D1, dc, derive_seed(cfg.seed, "d1"))?;
        let mut d2 = build_discriminator(Role::D2, dc, derive_seed(cfg.seed, "d2"))?;
        let mut g1 = g1;
        let mut g2 = g2;
        let mut s = s;
        // The total objective is only piecewise smooth: L1 cycle residuals and
        // (leaky) ReLU pre-activations are kinks, and a central difference at
        // the fixed step lies whenever the +/-h evaluations straddle one.
        // Condition the evaluation point so no kink sits inside the stencil:
        // small instance-norm gains with a unit bias keep pre-ReLU activations
        // bounded away from zero, and positive conv biases do the same for the
        // un-normalized first discriminator stage and the generator heads.
        // Jitter keeps parameters non-degenerate so sampled gradients differ.
        let mut crng = rng_from(derive_seed(cfg.seed, "condition"));
        for net in [&mut g1, &mut g2, &mut s, &mut d1, &mut d2] {
            for (name, t) in net.params.names.clone().iter().zip(net.params.tensors.iter_mut()) {
                let (base, spread) = if name.ends_with(".w") {
                    t.scale(cfg.init_scale);
                    continue;
                } else if name.ends_with(".gain") {
                    (0.2, 0.05)
                } else if name.ends_with(".bias") {
                    (1.0, 0.05)
                } else {
                    (0.3, 0.05) // conv .b
                };
                for v in t.data.iter_mut() {
                    *v = base + crng.random_range(-spread..spread);
                }
            }
        }

        let n = cfg.image_size;
        let mut rng = rng_from(derive_seed(cfg.seed, "inputs"));
        // The cycle terms are L1 in (rec - orig), non-differentiable at zero
        // residual, and central differences lie whenever the +/-h evaluations
        // straddle such a kink. Keep input pixels away from the small-init
        // reconstruction range so every residual clears the kink by a margin.
        let mk = |rng: &mut rand_chacha::ChaCha8Rng| {
            Tensor::from_vec(
                &[1, n, n],
                (0..n * n)
                    .map(|_| {
                        let mag = rng.random_range(0.5..0.9);
                        if rng.random_range(0..2) == 0 { mag } else { -mag }
                    })
                    .collect(),
            )
        };
        let m = LabelMap {
            height: n,
            width: n,
            classes: cfg.classes,
            data: (0..n * n).map(|_| rng.random_range(0..cfg.classes) as u8).collect(),
        };

        // Of the candidate draws keep the pair with the largest worst-case
        // margin, so the residual sign pattern is constant within the FD stencil.
        let margin = |g1: &Network<f64>, g2: &Network<f64>, x: &Tensor<f64>, y: &Tensor<f64>| -> f64 {
            let rec_a = g2.forward(&g1.forward(x).unwrap()).unwrap();
            let rec_b = g1.forward(&g2.forward(y).unwrap()).unwrap();
            let ma = rec_a
                .data
                .iter()
                .zip(&x.data)
                .map(|(r, o)| (r - o).abs())
                .fold(f64::INFINITY, f64::min);
            let mb = rec_b
                .data
                .iter()
                .zip(&y.data)
                .map(|(r, o)| (r - o).abs())
                .fold(f64::INFINITY, f64::min);
            ma.min(mb)
        };
        let mut best: Option<(f64, Tensor<f64>, Tensor<f64>)> = None;
        for _ in 0..64 {
            let x = mk(&mut rng);
            let y = mk(&mut rng);
            let m = margin(&g1, &g2, &x, &y);
            if best.as_ref().map(|(bm, _, _)| m > *bm).unwrap_or(true) {
                best = Some((m, x, y));
            }
            if m > 0.25 {
                break;
            }
        }
        let (_, x, y) = best.unwrap();
        Ok(Graph { g1, g2, s, d1, d2, x, y, m })
    }

    /// Generator-side total of the weighted five-term objective.
    fn generator_total(&self, cfg: &GradCheckConfig) -> Result<f64> {
        let fake_b = self.g1.forward(&self.x)?;
        let rec_a = self.g2.forward(&fake_b)?;
        let fake_a = self.g2.forward(&self.y)?;
        let rec_b = self.g1.forward(&fake_a)?;
        let probs = self.s.forward(&fake_b)?;
        let (gan_g1, _) = adversarial_loss_g(&self.d1.forward(&fake_b)?, cfg.gan_mode);
        let (gan_g2, _) = adversarial_loss_g(&self.d2.forward(&fake_a)?, cfg.gan_mode);
        let (cyc_a, _) = cycle_loss(&self.x, &rec_a)?;
        let (cyc_b, _) = cycle_loss(&self.y, &rec_b)?;
        let (seg, _) = seg_loss(&probs, &self.m, SegReduction::Mean)?;
        Ok(total_loss(gan_g1, gan_g2, cyc_a, cyc_b, seg, &cfg.weights))
    }

    /// Discriminator objective for d1 (real y vs fake_b) or d2 (real x vs fake_a).
    fn discriminator_loss(&self, which: Role, mode: GanMode) -> Result<f64> {
        let (d, real, fake_src) = match which {
            Role::D1 => (&self.d1, &self.y, self.g1.forward(&self.x)?),
            Role::D2 => (&self.d2, &self.x, self.g2.forward(&self.y)?),
            _ => unreachable!(),
        };
        let sr = d.forward(real)?;
        let sf = d.forward(&fake_src)?;
        let (l, _, _) = adversarial_loss_d(&sr, &sf, mode);
        Ok(l)
    }

    /// Analytic gradients of the generator-side total w.r.t. g1/g2/s params.
    fn analytic_generator_grads(
        &self,
        cfg: &GradCheckConfig,
    ) -> Result<(crate::nn::Grads<f64>, crate::nn::Grads<f64>, crate::nn::Grads<f64>)> {
        let w = &cfg.weights;
        let (fake_b, c_g1a) = self.g1.forward_train(&self.x)?;
        let (rec_a, c_g2a) = self.g2.forward_train(&fake_b)?;
        let (fake_a, c_g2b) = self.g2.forward_train(&self.y)?;
        let (rec_b, c_g1b) = self.g1.forward_train(&fake_a)?;
        let (probs, c_s) = self.s.forward_train(&fake_b)?;
        let (sf_b, c_d1) = self.d1.forward_train(&fake_b)?;
        let (sf_a, c_d2) = self.d2.forward_train(&fake_a)?;

        let (_, mut d_sfb) = adversarial_loss_g(&sf_b, cfg.gan_mode);
        let (_, mut d_sfa) = adversarial_loss_g(&sf_a, cfg.gan_mode);
        let (_, mut d_rec_a) = cycle_loss(&self.x, &rec_a)?;
        let (_, mut d_rec_b) = cycle_loss(&self.y, &rec_b)?;
        let (_, mut d_probs) = seg_loss(&probs, &self.m, SegReduction::Mean)?;
        d_sfb.scale(w.lambda_gan_ab);
        d_sfa.scale(w.lambda_gan_ba);
        d_rec_a.scale(w.lambda_cycle_a);
        d_rec_b.scale(w.lambda_cycle_b);
        d_probs.scale(w.lambda_seg);

        let mut g_g1 = self.g1.zero_grads();
        let mut g_g2 = self.g2.zero_grads();
        let mut g_s = self.s.zero_grads();

        let mut d_fake_b = self.s.backward(&c_s, &d_probs, Some(&mut g_s));
        d_fake_b.add_assign(&self.g2.backward(&c_g2a, &d_rec_a, Some(&mut g_g2)));
        d_fake_b.add_assign(&self.d1.backward(&c_d1, &d_sfb, None));
        self.g1.backward(&c_g1a, &d_fake_b, Some(&mut g_g1));

        let mut d_fake_a = self.g1.backward(&c_g1b, &d_rec_b, Some(&mut g_g1));
        d_fake_a.add_assign(&self.d2.backward(&c_d2, &d_sfa, None));
        self.g2.backward(&c_g2b, &d_fake_a, Some(&mut g_g2));

        Ok((g_g1, g_g2, g_s))
    }

    fn analytic_discriminator_grads(&self, which: Role, mode: GanMode) -> Result<crate::nn::Grads<f64>> {
        let (d, real, fake_src) = match which {
            Role::D1 => (&self.d1, &self.y, self.g1.forward(&self.x)?),
            Role::D2 => (&self.d2, &self.x, self.g2.forward(&self.y)?),
            _ => unreachable!(),
        };
        let (sr, cr) = d.forward_train(real)?;
        let (sf, cf) = d.forward_train(&fake_src)?;
        let (_, d_real, d_fake) = adversarial_loss_d(&sr, &sf, mode);
        let mut g = d.zero_grads();
        d.backward(&cr, &d_real, Some(&mut g));
        d.backward(&cf, &d_fake, Some(&mut g));
        Ok(g)
    }
}

/// Relative error with an absolute floor folded into the denominator:
/// err < rtol is equivalent to |a - b| < rtol * max(|a|,|b|) + rtol * 1e-4,
/// so true-zero gradients are not failed on finite-difference roundoff noise.
fn rel_error(a: f64, b: f64) -> f64 {
    (a - b).abs() / (a.abs().max(b.abs()) + 1e-4)
}

/// Compare analytic gradients with central finite differences on `samples`
/// randomly chosen parameters across all five networks. Reports, never throws,
/// on out-of-tolerance parameters.
pub fn grad_check(cfg: &GradCheckConfig, tolerance: f64) -> Result<GradCheckReport> {
    let mut graph = Graph::build(cfg)?;
    let (g_g1, g_g2, g_s) = graph.analytic_generator_grads(cfg)?;
    let g_d1 = graph.analytic_discriminator_grads(Role::D1, cfg.gan_mode)?;
    let g_d2 = graph.analytic_discriminator_grads(Role::D2, cfg.gan_mode)?;

    // (net tag, param grads, objective kind)
    enum Obj {
        Gen,
        Disc(Role),
    }
    let nets: Vec<(&str, crate::nn::Grads<f64>, Obj)> = vec![
        ("g1", g_g1, Obj::Gen),
        ("g2", g_g2, Obj::Gen),
        ("s", g_s, Obj::Gen),
        ("d1", g_d1, Obj::Disc(Role::D1)),
        ("d2", g_d2, Obj::Disc(Role::D2)),
    ];

    let mut rng = rng_from(derive_seed(cfg.seed, "sampling"));
    let mut errs: Vec<(f64, String, String, usize, f64, f64)> = Vec::with_capacity(cfg.samples);
    for _ in 0..cfg.samples {
        let ni = rng.random_range(0..nets.len());
        let (tag, grads, obj) = &nets[ni];
        let store_len = grads.tensors.len();
        let pi = rng.random_range(0..store_len);
        let len = grads.tensors[pi].numel();
        let ei = rng.random_range(0..len);
        let analytic = grads.tensors[pi].data[ei];

        let net = match *tag {
            "g1" => &mut graph.g1,
            "g2" => &mut graph.g2,
            "s" => &mut graph.s,
            "d1" => &mut graph.d1,
            _ => &mut graph.d2,
        };
        let orig = net.params.tensors[pi].data[ei];
        let name = net.params.names[pi].clone();

        let eval = |graph: &Graph| -> Result<f64> {
            match obj {
                Obj::Gen => graph.generator_total(cfg),
                Obj::Disc(r) => graph.discriminator_loss(*r, cfg.gan_mode),
            }
        };
        set_param(&mut graph, tag, pi, ei, orig + FD_STEP);
        let lp = eval(&graph)?;
        set_param(&mut graph, tag, pi, ei, orig - FD_STEP);
        let lm = eval(&graph)?;
        set_param(&mut graph, tag, pi, ei, orig);
        let fd = (lp - lm) / (2.0 * FD_STEP);

        errs.push((rel_error(analytic, fd), tag.to_string(), name, ei, analytic, fd));
    }

    errs.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap());
    let within = errs.iter().filter(|e| e.0 < tolerance).count();
    let max_rel = errs.first().map(|e| e.0).unwrap_or(0.0);
    let median = errs[errs.len() / 2].0;
    let worst = errs
        .iter()
        .take(5)
        .map(|e| (e.1.clone(), e.2.clone(), e.3, e.4, e.5))
        .collect();
    Ok(GradCheckReport {
        samples: cfg.samples,
        within_tolerance: within,
        tolerance,
        max_rel_error: max_rel,
        median_rel_error: median,
        worst,
    })
}

fn set_param(graph: &mut Graph, tag: &str, pi: usize, ei: usize, v: f64) {
    let net = match tag {
        "g1" => &mut graph.g1,
        "g2" => &mut graph.g2,
        "s" => &mut graph.s,
        "d1" => &mut graph.d1,
        _ => &mut graph.d2,
    };
    net.params.tensors[pi].data[ei] = v;
}

/// Sanity probe: for L = ||theta||^2 / 2 the analytic gradient is theta and
/// central differences are exact up to O(h^2).
pub fn quadratic_probe(n: usize, seed: u64) -> (f64, f64) {
    let mut rng = rng_from(seed);
    let theta: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
    let loss = |t: &[f64]| t.iter().map(|v| v * v).sum::<f64>() / 2.0;
    let mut max_abs = 0.0f64;
    let mut max_rel = 0.0f64;
    for i in 0..n {
        let mut tp = theta.clone();
        tp[i] += FD_STEP;
        let mut tm = theta.clone();
        tm[i] -= FD_STEP;
        let fd = (loss(&tp) - loss(&tm)) / (2.0 * FD_STEP);
        max_abs = max_abs.max((fd - theta[i]).abs());
        max_rel = max_rel.max(rel_error(fd, theta[i]));
    }
    (max_abs, max_rel)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_probe_is_exact_to_h_squared() {
        let (max_abs, _) = quadratic_probe(50, 3);
        assert!(max_abs < FD_STEP * FD_STEP, "max abs err {max_abs}");
    }

    #[test]
    fn full_tiny_graph_matches_finite_differences() {
        let cfg = GradCheckConfig::default();
        let rep = grad_check(&cfg, 1e-3).unwrap();
        assert!(
            rep.pass_fraction() >= 0.95,
            "only {}/{} within tolerance, worst {:?}",
            rep.within_tolerance,
            rep.samples,
            rep.worst
        );
    }

    #[test]
    fn zero_seg_weight_zeroes_segmenter_gradient() {
        let mut cfg = GradCheckConfig { samples: 1, ..Default::default() };
        cfg.weights.lambda_seg = 0.0;
        let graph = Graph::build(&cfg).unwrap();
        let (_, _, g_s) = graph.analytic_generator_grads(&cfg).unwrap();
        let max = g_s
            .tensors
            .iter()
            .flat_map(|t| t.data.iter())
            .fold(0.0f64, |m, v| m.max(v.abs()));
        assert_eq!(max, 0.0);
    }
}
