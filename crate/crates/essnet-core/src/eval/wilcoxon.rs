//! Two-sided Wilcoxon signed-rank test: exact enumeration for small n, normal
//! approximation with tie and continuity corrections otherwise.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};

pub const ALPHA: f64 = 0.05;
/// Largest n for which the exact 2^n enumeration is used.
pub const EXACT_LIMIT: usize = 12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WilcoxonOutcome {
    /// sum of ranks of positive differences
    pub w: f64,
    /// pairs used after dropping zero differences
    pub n: usize,
    /// two-sided p-value
    pub p: f64,
    pub significant: bool,
}

/// Ranks of |d| ascending, average ranks for ties. Returns (signed flag, rank).
fn signed_ranks(diffs: &[f64]) -> Vec<(bool, f64)> {
    let mut order: Vec<usize> = (0..diffs.len()).collect();
    order.sort_by(|&i, &j| diffs[i].abs().partial_cmp(&diffs[j].abs()).unwrap());
    let mut ranks = vec![0.0; diffs.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len()
            && diffs[order[j + 1]].abs() == diffs[order[i]].abs()
        {
            j += 1;
        }
        // average rank for the tie group [i, j]
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for k in i..=j {
            ranks[order[k]] = avg;
        }
        i = j + 1;
    }
    diffs.iter().zip(ranks).map(|(d, r)| (*d > 0.0, r)).collect()
}

/// Exact two-sided p by enumerating all 2^n sign assignments: the fraction of
/// assignments whose W deviates from the null mean at least as much as the
/// observed W. Valid with ties (average ranks enumerate exactly).
fn exact_p(ranks: &[(bool, f64)]) -> f64 {
    let n = ranks.len();
    let total: f64 = ranks.iter().map(|(_, r)| r).sum();
    let mean = total / 2.0;
    let w_obs: f64 = ranks.iter().filter(|(pos, _)| *pos).map(|(_, r)| r).sum();
    let dev_obs = (w_obs - mean).abs();
    let mut count = 0u64;
    for mask in 0u64..(1u64 << n) {
        let w: f64 = (0..n)
            .filter(|i| mask >> i & 1 == 1)
            .map(|i| ranks[i].1)
            .sum();
        // tolerance absorbs float accumulation differences across orders
        if (w - mean).abs() >= dev_obs - 1e-9 {
            count += 1;
        }
    }
    count as f64 / (1u64 << n) as f64
}

/// Normal approximation with tie correction (variance reduced by
/// sum(t^3 - t)/48) and a continuity correction of 0.5 toward the mean.
fn approx_p(ranks: &[(bool, f64)]) -> f64 {
    let n = ranks.len() as f64;
    let w: f64 = ranks.iter().filter(|(pos, _)| *pos).map(|(_, r)| r).sum();
    let mean = n * (n + 1.0) / 4.0;
    let mut var = n * (n + 1.0) * (2.0 * n + 1.0) / 24.0;
    // tie groups by rank value
    let mut sorted: Vec<f64> = ranks.iter().map(|(_, r)| *r).collect();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut i = 0;
    while i < sorted.len() {
        let mut j = i;
        while j + 1 < sorted.len() && sorted[j + 1] == sorted[i] {
            j += 1;
        }
        let t = (j - i + 1) as f64;
        var -= (t * t * t - t) / 48.0;
        i = j + 1;
    }
    let dev = (w - mean).abs();
    let z = (dev - 0.5).max(0.0) / var.sqrt();
    let normal = Normal::new(0.0, 1.0).unwrap();
    (2.0 * (1.0 - normal.cdf(z))).clamp(f64::MIN_POSITIVE, 1.0)
}

pub fn wilcoxon_signed_rank(a: &[f64], b: &[f64]) -> Result<WilcoxonOutcome> {
    if a.len() != b.len() {
        return Err(Error::Shape {
            expected: format!("{} pairs", a.len()),
            got: format!("{}", b.len()),
        });
    }
    let diffs: Vec<f64> = a
        .iter()
        .zip(b)
        .map(|(x, y)| x - y)
        .filter(|d| *d != 0.0)
        .collect();
    let n = diffs.len();
    if n < 5 {
        return Err(Error::TooFewPairs { n });
    }
    let ranks = signed_ranks(&diffs);
    let w: f64 = ranks.iter().filter(|(pos, _)| *pos).map(|(_, r)| r).sum();
    let p = if n <= EXACT_LIMIT { exact_p(&ranks) } else { approx_p(&ranks) };
    Ok(WilcoxonOutcome { w, n, p, significant: p < ALPHA })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn all_positive_unit_differences() {
        let a = [1.0, 2.0, 3.0, 4.0, 5.0];
        let b = [0.0; 5];
        let out = wilcoxon_signed_rank(&a, &b).unwrap();
        assert_eq!(out.w, 15.0);
        assert_eq!(out.n, 5);
        assert_eq!(out.p, 0.0625);
        assert!(!out.significant);
    }

    #[test]
    fn identical_samples_error() {
        let a = [0.3, 0.5, 0.7, 0.9, 0.2];
        assert!(matches!(
            wilcoxon_signed_rank(&a, &a),
            Err(Error::TooFewPairs { n: 0 })
        ));
    }

    #[test]
    fn w_bounded_by_rank_sum() {
        let mut rng = crate::rng::rng_from(21);
        for _ in 0..50 {
            let n = rng.random_range(5..20);
            let a: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
            let b: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
            let out = wilcoxon_signed_rank(&a, &b).unwrap();
            let max = out.n as f64 * (out.n as f64 + 1.0) / 2.0;
            assert!(out.w >= 0.0 && out.w <= max);
            assert!(out.p > 0.0 && out.p <= 1.0);
        }
    }

    #[test]
    fn exact_and_approx_agree_at_n_12() {
        let mut rng = crate::rng::rng_from(33);
        for _ in 0..20 {
            let diffs: Vec<f64> = (0..12).map(|_| rng.random_range(-1.0..1.0)).collect();
            let ranks = signed_ranks(&diffs);
            let e = exact_p(&ranks);
            let ap = approx_p(&ranks);
            assert!((e - ap).abs() < 0.02, "exact {e} vs approx {ap}");
        }
    }

    #[test]
    fn tied_differences_use_average_ranks() {
        let ranks = signed_ranks(&[0.5, -0.5, 1.0]);
        assert_eq!(ranks[0], (true, 1.5));
        assert_eq!(ranks[1], (false, 1.5));
        assert_eq!(ranks[2], (true, 3.0));
    }
}
