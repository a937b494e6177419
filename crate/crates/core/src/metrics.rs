//! Clipped KL divergence, the uniform no-training baseline, and bootstrap
//! median statistics.

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frontier::TargetDistribution;

/// Default clip for model probabilities inside the divergence.
pub const DEFAULT_EPS: f64 = 1e-8;

/// Bootstrap summary of a sample of scores.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BootstrapSummary {
    pub median: f64,
    pub p5: f64,
    pub p95: f64,
    pub resamples: usize,
}

/// Clipped KL divergence sum_x p ln p - sum_x p ln max(eps, q).
/// Terms with p(x) = 0 contribute nothing to either sum.
pub fn kl_divergence(p: &[f64], q: &[f64], eps: f64) -> Result<f64> {
    if p.len() != q.len() {
        return Err(Error::Size(format!(
            "distribution lengths differ: {} vs {}",
            p.len(),
            q.len()
        )));
    }
    if !(eps > 0.0) {
        return Err(Error::Config("eps must be positive".into()));
    }
    let mut acc = 0.0;
    for (&pi, &qi) in p.iter().zip(q) {
        if pi > 0.0 {
            acc += pi * (pi.ln() - qi.max(eps).ln());
        }
    }
    Ok(acc)
}

/// KL from the target to the uniform distribution over all 2^n outcomes;
/// the no-training reference score.
pub fn uniform_baseline(target: &TargetDistribution) -> f64 {
    let size = target.probs.len();
    let uniform = vec![1.0 / size as f64; size];
    kl_divergence(&target.probs, &uniform, DEFAULT_EPS).expect("same length by construction")
}

/// Median with the even-length convention: mean of the two central order
/// statistics. `values` must be non-empty.
pub fn median(values: &[f64]) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    }
}

/// Nearest-rank percentile on sorted data: the element at 1-based rank
/// ceil(p/100 * n).
fn percentile_sorted(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    let rank = ((p / 100.0) * n as f64).ceil().max(1.0) as usize;
    sorted[rank.min(n) - 1]
}

/// Bootstrap of the median: resample the values with replacement `resamples`
/// times, take each resample's median, and report the median of those
/// medians with the nearest-rank 5th and 95th percentiles. Deterministic per
/// seed.
pub fn bootstrap_median(values: &[f64], resamples: usize, seed: u64) -> Result<BootstrapSummary> {
    if values.is_empty() {
        return Err(Error::Empty("bootstrap needs at least one value".into()));
    }
    if resamples == 0 {
        return Err(Error::Config("resamples must be positive".into()));
    }
    let n = values.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut medians = Vec::with_capacity(resamples);
    let mut scratch = vec![0.0; n];
    for _ in 0..resamples {
        for slot in scratch.iter_mut() {
            let idx = (rng.next_u64() % n as u64) as usize;
            *slot = values[idx];
        }
        medians.push(median(&scratch));
    }
    medians.sort_by(f64::total_cmp);
    Ok(BootstrapSummary {
        median: median(&medians),
        p5: percentile_sorted(&medians, 5.0),
        p95: percentile_sorted(&medians, 95.0),
        resamples,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kl_of_identical_distributions_is_zero() {
        let p = [0.2, 0.3, 0.5];
        assert!(kl_divergence(&p, &p, 1e-8).unwrap().abs() < 1e-12);
    }

    #[test]
    fn kl_one_hot_against_uniform() {
        let v = kl_divergence(&[1.0, 0.0], &[0.5, 0.5], 1e-8).unwrap();
        assert!((v - 2f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn kl_clip_kicks_in_for_zero_model_mass() {
        let v = kl_divergence(&[0.5, 0.5], &[1.0, 0.0], 1e-8).unwrap();
        let want = -(2f64.ln()) - 0.5 * (1e-8f64).ln();
        assert!((v - want).abs() < 1e-10, "{v} vs {want}");
    }

    #[test]
    fn kl_length_mismatch_is_size_error() {
        assert!(matches!(
            kl_divergence(&[1.0], &[0.5, 0.5], 1e-8),
            Err(Error::Size(_))
        ));
    }

    #[test]
    fn kl_nonnegative_for_normalized_model() {
        // Gibbs' inequality applies when the clip never fires.
        let p = [0.1, 0.2, 0.3, 0.4];
        let q = [0.25, 0.25, 0.25, 0.25];
        assert!(kl_divergence(&p, &q, 1e-8).unwrap() >= 0.0);
    }

    #[test]
    fn kl_permutation_invariance() {
        let p = [0.1, 0.2, 0.3, 0.4];
        let q = [0.4, 0.3, 0.2, 0.1];
        let a = kl_divergence(&p, &q, 1e-8).unwrap();
        let pp = [0.4, 0.3, 0.2, 0.1];
        let qq = [0.1, 0.2, 0.3, 0.4];
        let b = kl_divergence(&pp, &qq, 1e-8).unwrap();
        assert_eq!(a, b);
    }

    fn target_with(probs: Vec<f64>, kappa: usize) -> TargetDistribution {
        let n = probs.len().trailing_zeros() as usize;
        TargetDistribution {
            n,
            kappa,
            rho: 0.0,
            temperature: 1.0,
            probs,
        }
    }

    #[test]
    fn baseline_of_uniform_target_is_zero() {
        let t = target_with(vec![0.25; 4], 1);
        assert!(uniform_baseline(&t).abs() < 1e-12);
    }

    #[test]
    fn baseline_of_partial_uniform_support() {
        // Uniform over 6 of 16 strings: ln(16/6).
        let mut probs = vec![0.0; 16];
        for m in [3usize, 5, 6, 9, 10, 12] {
            probs[m] = 1.0 / 6.0;
        }
        let t = target_with(probs, 2);
        assert!((uniform_baseline(&t) - (16f64 / 6.0).ln()).abs() < 1e-12);
    }

    #[test]
    fn baseline_of_one_hot_target() {
        let mut probs = vec![0.0; 16];
        probs[3] = 1.0;
        let t = target_with(probs, 2);
        assert!((uniform_baseline(&t) - 4.0 * 2f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn bootstrap_constant_list() {
        let s = bootstrap_median(&[2.5; 7], 1000, 3).unwrap();
        assert_eq!(s.median, 2.5);
        assert_eq!(s.p5, 2.5);
        assert_eq!(s.p95, 2.5);
    }

    #[test]
    fn bootstrap_range_sanity() {
        let s = bootstrap_median(&[1.0, 2.0, 3.0], 10_000, 1).unwrap();
        assert!(s.median >= 1.0 && s.median <= 3.0);
        assert!(s.p5 <= s.median && s.median <= s.p95);
    }

    #[test]
    fn bootstrap_is_deterministic() {
        let values = [0.4, 1.7, 0.9, 2.2, 1.1];
        let a = bootstrap_median(&values, 5000, 17).unwrap();
        let b = bootstrap_median(&values, 5000, 17).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn bootstrap_rejects_empty_input() {
        assert!(matches!(
            bootstrap_median(&[], 100, 0),
            Err(Error::Empty(_))
        ));
    }

    #[test]
    fn median_even_length_convention() {
        assert_eq!(median(&[4.0, 1.0, 3.0, 2.0]), 2.5);
        assert_eq!(median(&[5.0, 1.0, 3.0]), 3.0);
    }
}
