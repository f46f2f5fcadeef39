//! Synthetic abdominal phantom: six elliptical organs rasterized into a body
//! ellipse in a fixed z-order so every pixel has exactly one class.

use std::f64::consts::TAU;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::rng_from;
use crate::types::{LabelMap, NUM_CLASSES};

pub const CLASS_BACKGROUND: u8 = 0;
pub const CLASS_BODY: u8 = 1;
pub const CLASS_LIVER: u8 = 2;
pub const CLASS_STOMACH: u8 = 3;
pub const CLASS_LEFT_KIDNEY: u8 = 4;
pub const CLASS_RIGHT_KIDNEY: u8 = 5;
pub const CLASS_SPLEEN: u8 = 6;

pub const CLASS_NAMES: [&str; NUM_CLASSES] =
    ["background", "body", "liver", "stomach", "left_kidney", "right_kidney", "spleen"];

/// Axis-aligned-then-rotated ellipse in pixel coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Ellipse {
    pub cx: f64,
    pub cy: f64,
    /// semi-axis along the (rotated) x direction
    pub a: f64,
    /// semi-axis along the (rotated) y direction
    pub b: f64,
    /// rotation in radians
    pub rot: f64,
}

impl Ellipse {
    /// Quadratic form value; <= 1 means inside.
    pub fn level(&self, x: f64, y: f64) -> f64 {
        let (dx, dy) = (x - self.cx, y - self.cy);
        let (s, c) = self.rot.sin_cos();
        let u = c * dx + s * dy;
        let v = -s * dx + c * dy;
        (u / self.a) * (u / self.a) + (v / self.b) * (v / self.b)
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        self.level(x, y) <= 1.0
    }

    /// Every boundary point lies inside `outer` at the given level margin.
    pub fn inside(&self, outer: &Ellipse, margin: f64) -> bool {
        (0..64).all(|i| {
            let t = i as f64 / 64.0 * TAU;
            let (s, c) = self.rot.sin_cos();
            let (u, v) = (self.a * t.cos(), self.b * t.sin());
            let x = self.cx + c * u - s * v;
            let y = self.cy + s * u + c * v;
            outer.level(x, y) <= margin
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnatomyConfig {
    pub height: usize,
    pub width: usize,
    /// splenomegaly factor range; > 1 enlarges the spleen
    pub spleen_scale_min: f64,
    pub spleen_scale_max: f64,
}

impl AnatomyConfig {
    pub fn desk() -> Self {
        AnatomyConfig { height: 64, width: 64, spleen_scale_min: 1.0, spleen_scale_max: 1.8 }
    }

    pub fn paper_parity() -> Self {
        AnatomyConfig { height: 256, width: 256, ..Self::desk() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.height % 4 != 0 || self.width % 4 != 0 {
            return Err(Error::SizeNotDivisible { h: self.height, w: self.width });
        }
        if self.height < 32 || self.width < 32 {
            return Err(Error::Config(format!(
                "anatomy size {}x{} below minimum 32x32",
                self.height, self.width
            )));
        }
        if !(self.spleen_scale_min >= 1.0 && self.spleen_scale_max >= self.spleen_scale_min) {
            return Err(Error::Config("spleen scale range must satisfy 1 <= min <= max".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnatomyLayout {
    pub height: usize,
    pub width: usize,
    pub body: Ellipse,
    pub liver: Ellipse,
    pub stomach: Ellipse,
    pub left_kidney: Ellipse,
    pub right_kidney: Ellipse,
    pub spleen: Ellipse,
    pub spleen_scale: f64,
    pub labels: LabelMap,
}

impl AnatomyLayout {
    /// Organs in render order; later entries overwrite earlier ones.
    pub fn zorder(&self) -> [(u8, &Ellipse); 6] {
        [
            (CLASS_BODY, &self.body),
            (CLASS_LIVER, &self.liver),
            (CLASS_STOMACH, &self.stomach),
            (CLASS_LEFT_KIDNEY, &self.left_kidney),
            (CLASS_RIGHT_KIDNEY, &self.right_kidney),
            (CLASS_SPLEEN, &self.spleen),
        ]
    }
}

/// Nominal organ placements as fractions of the body's semi-axes:
/// (class, center x, center y, semi-axis a, semi-axis b).
const ORGAN_FRACTIONS: [(u8, f64, f64, f64, f64); 5] = [
    (CLASS_LIVER, -0.38, -0.22, 0.38, 0.30),
    (CLASS_STOMACH, 0.22, -0.32, 0.24, 0.20),
    (CLASS_LEFT_KIDNEY, 0.34, 0.38, 0.16, 0.22),
    (CLASS_RIGHT_KIDNEY, -0.36, 0.38, 0.16, 0.22),
    (CLASS_SPLEEN, 0.52, -0.02, 0.17, 0.26),
];

fn jittered_organ(
    rng: &mut ChaCha8Rng,
    body: &Ellipse,
    fractions: (f64, f64, f64, f64),
    scale: f64,
) -> Result<Ellipse> {
    let (fx, fy, fa, fb) = fractions;
    let cx = body.cx + body.a * (fx + rng.random_range(-0.05..0.05));
    let cy = body.cy + body.b * (fy + rng.random_range(-0.05..0.05));
    let a = body.a * fa * scale * rng.random_range(0.85..1.15);
    let b = body.b * fb * scale * rng.random_range(0.85..1.15);
    let rot = rng.random_range(-0.35..0.35);
    let mut e = Ellipse { cx, cy, a, b, rot };
    // shrink toward the body center until the organ fits with margin
    for _ in 0..40 {
        if e.inside(body, 0.92) {
            return Ok(e);
        }
        e.cx = body.cx + (e.cx - body.cx) * 0.95;
        e.cy = body.cy + (e.cy - body.cy) * 0.95;
        e.a *= 0.93;
        e.b *= 0.93;
    }
    Err(Error::Config("could not place organ inside body ellipse".into()))
}

/// Deterministic per (seed, config). Later organs overwrite earlier ones, so
/// overlaps resolve by z-order and every pixel has exactly one class.
pub fn sample_anatomy(seed: u64, config: &AnatomyConfig) -> Result<AnatomyLayout> {
    config.validate()?;
    let (h, w) = (config.height, config.width);
    let mut rng = rng_from(seed);

    let body = Ellipse {
        cx: w as f64 * rng.random_range(0.48..0.52),
        cy: h as f64 * rng.random_range(0.48..0.52),
        a: w as f64 * rng.random_range(0.40..0.46),
        b: h as f64 * rng.random_range(0.40..0.46),
        rot: rng.random_range(-0.1..0.1),
    };
    let spleen_scale = if config.spleen_scale_max > config.spleen_scale_min {
        rng.random_range(config.spleen_scale_min..config.spleen_scale_max)
    } else {
        config.spleen_scale_min
    };

    let mut organs = Vec::with_capacity(5);
    for (class, fx, fy, fa, fb) in ORGAN_FRACTIONS {
        let scale = if class == CLASS_SPLEEN { spleen_scale } else { 1.0 };
        organs.push(jittered_organ(&mut rng, &body, (fx, fy, fa, fb), scale)?);
    }

    let mut layout = AnatomyLayout {
        height: h,
        width: w,
        body,
        liver: organs[0],
        stomach: organs[1],
        left_kidney: organs[2],
        right_kidney: organs[3],
        spleen: organs[4],
        spleen_scale,
        labels: LabelMap::new(h, w, NUM_CLASSES),
    };

    let mut labels = LabelMap::new(h, w, NUM_CLASSES);
    for y in 0..h {
        for x in 0..w {
            let (px, py) = (x as f64 + 0.5, y as f64 + 0.5);
            let mut class = CLASS_BACKGROUND;
            for (c, e) in layout.zorder() {
                if e.contains(px, py) {
                    class = c;
                }
            }
            labels.data[y * w + x] = class;
        }
    }
    layout.labels = labels;
    Ok(layout)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_is_bitwise_identical() {
        let cfg = AnatomyConfig::desk();
        let a = sample_anatomy(7, &cfg).unwrap();
        let b = sample_anatomy(7, &cfg).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn different_seeds_differ() {
        let cfg = AnatomyConfig::desk();
        let a = sample_anatomy(7, &cfg).unwrap();
        let b = sample_anatomy(8, &cfg).unwrap();
        assert_ne!(a.labels, b.labels);
    }

    #[test]
    fn every_class_present_across_100_seeds() {
        let cfg = AnatomyConfig::desk();
        for seed in 0..100 {
            let layout = sample_anatomy(seed, &cfg).unwrap();
            let hist = layout.labels.class_histogram();
            for (c, count) in hist.iter().enumerate() {
                assert!(*count > 0, "seed {seed}: class {c} has no pixels");
            }
        }
    }

    #[test]
    fn organs_lie_inside_body() {
        let cfg = AnatomyConfig::desk();
        for seed in 0..50 {
            let layout = sample_anatomy(seed, &cfg).unwrap();
            for (c, e) in layout.zorder().iter().skip(1) {
                assert!(e.inside(&layout.body, 1.0), "seed {seed}: class {c} escapes body");
            }
        }
    }

    #[test]
    fn rejects_bad_sizes() {
        let mut cfg = AnatomyConfig::desk();
        cfg.height = 63;
        assert!(matches!(
            sample_anatomy(1, &cfg),
            Err(Error::SizeNotDivisible { .. })
        ));
        cfg.height = 16;
        cfg.width = 16;
        assert!(matches!(sample_anatomy(1, &cfg), Err(Error::Config(_))));
    }
}
