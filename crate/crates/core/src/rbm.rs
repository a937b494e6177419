//! Restricted Boltzmann machine with exact scoring and PCD-k training.
//!
//! The energy is E(h, v) = vb.v + hb.h + v' W h with P(h, v) proportional to
//! exp(-E); the plus signs inside E flip the usual logistic arguments, so
//! P(h_j = 1 | v) = logistic(-(hb_j + sum_i W_ij v_i)) and likewise for the
//! visible conditionals. All conditionals below follow that convention.
//!
//! Training is persistent contrastive divergence: the model expectation is
//! estimated from persistent chains advanced `k_gibbs` full Gibbs sweeps per
//! update; the data expectation uses exact conditional hidden means.

use nalgebra::{DMatrix, DVector};
use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};

/// Biases and couplings. `weights` is visible-by-hidden.
#[derive(Debug, Clone, PartialEq)]
pub struct RbmParams {
    pub vbias: DVector<f64>,
    pub hbias: DVector<f64>,
    pub weights: DMatrix<f64>,
}

/// PCD training settings.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub k_gibbs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub n_chains: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            k_gibbs: 1,
            learning_rate: 0.05,
            batch_size: 64,
            epochs: 200,
            n_chains: 64,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k_gibbs == 0
            || self.batch_size == 0
            || self.epochs == 0
            || self.n_chains == 0
            || !(self.learning_rate > 0.0)
        {
            return Err(Error::Config(format!("invalid train config: {self:?}")));
        }
        Ok(())
    }
}

/// Training input: either samples drawn from the target, or the exact target
/// distribution over all `2^{n_v}` visible states.
#[derive(Debug, Clone)]
pub enum TrainData {
    /// Rows of 0/1 values, one visible vector per sample.
    Samples(DMatrix<f64>),
    /// Probability vector indexed with visible unit 0 as the most
    /// significant bit.
    Exact(Vec<f64>),
}

/// Gradient with the same shape as the parameters (ascent direction on the
/// log-likelihood).
#[derive(Debug, Clone, PartialEq)]
pub struct RbmGrad {
    pub vbias: DVector<f64>,
    pub hbias: DVector<f64>,
    pub weights: DMatrix<f64>,
}

fn logistic(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// ln(1 + e^x) without overflow.
fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

impl RbmParams {
    pub fn n_visible(&self) -> usize {
        self.vbias.len()
    }

    pub fn n_hidden(&self) -> usize {
        self.hbias.len()
    }

    /// Total number of trainable parameters: n_v + n_h + n_v * n_h.
    pub fn param_count(&self) -> usize {
        self.n_visible() + self.n_hidden() + self.n_visible() * self.n_hidden()
    }

    pub fn zeros(n_v: usize, n_h: usize) -> Self {
        Self {
            vbias: DVector::zeros(n_v),
            hbias: DVector::zeros(n_h),
            weights: DMatrix::zeros(n_v, n_h),
        }
    }

    /// Standard initialization: weights from Normal(0, 0.01), biases zero.
    pub fn init(n_v: usize, n_h: usize, rng: &mut ChaCha8Rng) -> Self {
        let mut p = Self::zeros(n_v, n_h);
        for i in 0..n_v {
            for j in 0..n_h {
                let z: f64 = StandardNormal.sample(rng);
                p.weights[(i, j)] = 0.01 * z;
            }
        }
        p
    }

    /// Flat layout: vbias, hbias, then row-major weights.
    pub fn to_flat(&self) -> Vec<f64> {
        let mut flat: Vec<f64> = self.vbias.iter().cloned().collect();
        flat.extend(self.hbias.iter());
        for i in 0..self.n_visible() {
            for j in 0..self.n_hidden() {
                flat.push(self.weights[(i, j)]);
            }
        }
        flat
    }

    fn check_finite(&self) -> Result<()> {
        let ok = self.vbias.iter().all(|v| v.is_finite())
            && self.hbias.iter().all(|v| v.is_finite())
            && self.weights.iter().all(|v| v.is_finite());
        if ok {
            Ok(())
        } else {
            Err(Error::Numerical("RBM parameters are not finite".into()))
        }
    }
}

/// Energy E(h, v) = vb.v + hb.h + v' W h, exactly as the model defines it.
pub fn energy(params: &RbmParams, v: &[f64], h: &[f64]) -> Result<f64> {
    if v.len() != params.n_visible() || h.len() != params.n_hidden() {
        return Err(Error::Size(format!(
            "expected v/h of lengths {}/{}, got {}/{}",
            params.n_visible(),
            params.n_hidden(),
            v.len(),
            h.len()
        )));
    }
    let mut e = 0.0;
    for (i, vi) in v.iter().enumerate() {
        e += params.vbias[i] * vi;
    }
    for (j, hj) in h.iter().enumerate() {
        e += params.hbias[j] * hj;
    }
    for (i, vi) in v.iter().enumerate() {
        if *vi != 0.0 {
            for (j, hj) in h.iter().enumerate() {
                e += params.weights[(i, j)] * vi * hj;
            }
        }
    }
    Ok(e)
}

/// Visible vector for a state index; unit 0 is the most significant bit.
pub fn index_to_visible(idx: usize, n_v: usize) -> Vec<f64> {
    (0..n_v)
        .map(|i| {
            if idx & (1 << (n_v - 1 - i)) != 0 {
                1.0
            } else {
                0.0
            }
        })
        .collect()
}

/// Exact marginal P(v) over all visible states, via the analytic hidden
/// marginalization P(v) prop exp(-vb.v) prod_j (1 + exp(-(hb_j + (v'W)_j))).
/// Computed in log space, normalized by summation over all v.
pub fn exact_visible_probs(params: &RbmParams) -> Result<Vec<f64>> {
    let n_v = params.n_visible();
    if n_v > 20 {
        return Err(Error::Size(format!(
            "exact evaluation limited to 20 visible units, got {n_v}"
        )));
    }
    params.check_finite()?;
    let n_h = params.n_hidden();
    let size = 1usize << n_v;
    let mut logp = vec![0.0f64; size];
    let mut max_lp = f64::MIN;
    for (idx, lp) in logp.iter_mut().enumerate() {
        let v = index_to_visible(idx, n_v);
        let mut acc = 0.0;
        for i in 0..n_v {
            acc -= params.vbias[i] * v[i];
        }
        for j in 0..n_h {
            let mut act = params.hbias[j];
            for i in 0..n_v {
                if v[i] != 0.0 {
                    act += params.weights[(i, j)];
                }
            }
            acc += softplus(-act);
        }
        *lp = acc;
        max_lp = max_lp.max(acc);
    }
    let mut probs: Vec<f64> = logp.iter().map(|lp| (lp - max_lp).exp()).collect();
    let z: f64 = probs.iter().sum();
    for p in &mut probs {
        *p /= z;
    }
    Ok(probs)
}

fn bernoulli(rng: &mut ChaCha8Rng, p: f64) -> f64 {
    let u = (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64);
    if u < p {
        1.0
    } else {
        0.0
    }
}

/// Scratch matrices for repeated Gibbs sweeps with one parameter set.
struct SweepScratch {
    hidden: DMatrix<f64>,
    weights_t: DMatrix<f64>,
}

impl SweepScratch {
    fn new(params: &RbmParams, n_chains: usize) -> Self {
        Self {
            hidden: DMatrix::zeros(n_chains, params.n_hidden()),
            weights_t: params.weights.transpose(),
        }
    }
}

/// One full Gibbs sweep over a matrix of chains (rows are chains): sample
/// h ~ P(h|v) then v ~ P(v|h), in place. Unit-then-chain draw order keeps
/// the stream deterministic.
fn gibbs_sweep_with(
    params: &RbmParams,
    chains: &mut DMatrix<f64>,
    scratch: &mut SweepScratch,
    rng: &mut ChaCha8Rng,
) {
    scratch.hidden.gemm(1.0, chains, &params.weights, 0.0);
    for j in 0..params.n_hidden() {
        let bias = params.hbias[j];
        for slot in scratch.hidden.column_mut(j).iter_mut() {
            let p = logistic(-(bias + *slot));
            *slot = bernoulli(rng, p);
        }
    }
    chains.gemm(1.0, &scratch.hidden, &scratch.weights_t, 0.0);
    for i in 0..params.n_visible() {
        let bias = params.vbias[i];
        for slot in chains.column_mut(i).iter_mut() {
            let p = logistic(-(bias + *slot));
            *slot = bernoulli(rng, p);
        }
    }
}

fn gibbs_sweep(params: &RbmParams, chains: &mut DMatrix<f64>, rng: &mut ChaCha8Rng) {
    let mut scratch = SweepScratch::new(params, chains.nrows());
    gibbs_sweep_with(params, chains, &mut scratch, rng);
}

fn uniform01(rng: &mut ChaCha8Rng) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Joint-pattern Gibbs kernel: per update, tabulate the conditional CDF of
/// the whole hidden (resp. visible) layer for every opposite-layer bit
/// pattern, then advance each chain with one uniform draw per half-sweep.
/// Samples the same product-Bernoulli conditionals as the direct kernel.
struct PatternTables {
    /// cdf over hidden patterns given a visible pattern; 2^{n_v} x 2^{n_h}.
    h_given_v: Vec<Vec<f64>>,
    /// cdf over visible patterns given a hidden pattern; 2^{n_h} x 2^{n_v}.
    v_given_h: Vec<Vec<f64>>,
}

fn layer_cdfs(unit_probs: impl Fn(usize, usize) -> f64, n_cond: usize, n_units: usize) -> Vec<Vec<f64>> {
    let patterns = 1usize << n_units;
    (0..n_cond)
        .map(|cond| {
            let p1: Vec<f64> = (0..n_units).map(|u| unit_probs(cond, u)).collect();
            let mut cdf = Vec::with_capacity(patterns);
            let mut acc = 0.0;
            for pat in 0..patterns {
                let mut prob = 1.0;
                for (u, p) in p1.iter().enumerate() {
                    let bit = pat & (1 << (n_units - 1 - u)) != 0;
                    prob *= if bit { *p } else { 1.0 - p };
                }
                acc += prob;
                cdf.push(acc);
            }
            cdf
        })
        .collect()
}

impl PatternTables {
    fn build(params: &RbmParams) -> Self {
        let n_v = params.n_visible();
        let n_h = params.n_hidden();
        let h_given_v = layer_cdfs(
            |v_pat, j| {
                let mut act = params.hbias[j];
                for i in 0..n_v {
                    if v_pat & (1 << (n_v - 1 - i)) != 0 {
                        act += params.weights[(i, j)];
                    }
                }
                logistic(-act)
            },
            1 << n_v,
            n_h,
        );
        let v_given_h = layer_cdfs(
            |h_pat, i| {
                let mut act = params.vbias[i];
                for j in 0..n_h {
                    if h_pat & (1 << (n_h - 1 - j)) != 0 {
                        act += params.weights[(i, j)];
                    }
                }
                logistic(-act)
            },
            1 << n_h,
            n_v,
        );
        Self { h_given_v, v_given_h }
    }

    fn sample(cdf: &[f64], rng: &mut ChaCha8Rng) -> usize {
        let total = *cdf.last().expect("non-empty cdf");
        let u = uniform01(rng) * total;
        cdf.partition_point(|&c| c <= u).min(cdf.len() - 1)
    }
}

fn pack_row(chains: &DMatrix<f64>, row: usize, n_v: usize) -> usize {
    let mut pat = 0usize;
    for i in 0..n_v {
        if chains[(row, i)] != 0.0 {
            pat |= 1 << (n_v - 1 - i);
        }
    }
    pat
}

/// Advance chains by `k` full sweeps, choosing the cheaper kernel: the
/// direct per-unit sampler, or the pattern tables when the state spaces are
/// small relative to k.
fn advance_chains(params: &RbmParams, chains: &mut DMatrix<f64>, k: usize, rng: &mut ChaCha8Rng) {
    let n_v = params.n_visible();
    let n_h = params.n_hidden();
    let n_chains = chains.nrows();
    let direct_cost = k * n_chains * (n_v + n_h) * 2;
    let table_cost = (1usize << n_v) * (n_h + (1 << n_h)) + k * n_chains * 4;
    if n_v <= 12 && table_cost < direct_cost {
        let tables = PatternTables::build(params);
        let mut pats: Vec<usize> = (0..n_chains).map(|c| pack_row(chains, c, n_v)).collect();
        for _ in 0..k {
            for pat in pats.iter_mut() {
                let h = PatternTables::sample(&tables.h_given_v[*pat], rng);
                *pat = PatternTables::sample(&tables.v_given_h[h], rng);
            }
        }
        for (c, pat) in pats.iter().enumerate() {
            for i in 0..n_v {
                chains[(c, i)] = if pat & (1 << (n_v - 1 - i)) != 0 { 1.0 } else { 0.0 };
            }
        }
    } else {
        let mut scratch = SweepScratch::new(params, n_chains);
        for _ in 0..k {
            gibbs_sweep_with(params, chains, &mut scratch, rng);
        }
    }
}

/// One full Gibbs step from a single visible vector.
pub fn gibbs_step(params: &RbmParams, v: &[f64], rng: &mut ChaCha8Rng) -> Result<Vec<f64>> {
    if v.len() != params.n_visible() {
        return Err(Error::Size(format!(
            "visible length {} does not match {}",
            v.len(),
            params.n_visible()
        )));
    }
    let mut chains = DMatrix::from_fn(1, v.len(), |_, i| v[i]);
    gibbs_sweep(params, &mut chains, rng);
    Ok((0..v.len()).map(|i| chains[(0, i)]).collect())
}

/// Conditional probability P(v_i = 1 | h) under the model convention.
pub fn visible_conditional(params: &RbmParams, h: &[f64], i: usize) -> f64 {
    let mut act = params.vbias[i];
    for (j, hj) in h.iter().enumerate() {
        act += params.weights[(i, j)] * hj;
    }
    logistic(-act)
}

/// Conditional probability P(h_j = 1 | v) under the model convention.
pub fn hidden_conditional(params: &RbmParams, v: &[f64], j: usize) -> f64 {
    let mut act = params.hbias[j];
    for (i, vi) in v.iter().enumerate() {
        act += params.weights[(i, j)] * vi;
    }
    logistic(-act)
}

/// Sufficient statistics (v, h-mean, v h-mean') accumulated over rows.
pub struct Moments {
    pub v: DVector<f64>,
    pub h: DVector<f64>,
    pub vh: DMatrix<f64>,
}

fn moments_from_rows(params: &RbmParams, rows: &DMatrix<f64>) -> Moments {
    let n_v = params.n_visible();
    let n_h = params.n_hidden();
    let b = rows.nrows();
    let scale = 1.0 / b as f64;
    let mut hbar = rows * &params.weights;
    for j in 0..n_h {
        let bias = params.hbias[j];
        for slot in hbar.column_mut(j).iter_mut() {
            *slot = logistic(-(bias + *slot));
        }
    }
    let mut vh = DMatrix::zeros(n_v, n_h);
    vh.gemm_tr(scale, rows, &hbar, 0.0);
    Moments {
        v: rows.row_sum().transpose() * scale,
        h: hbar.row_sum().transpose() * scale,
        vh,
    }
}

fn moments_from_distribution(params: &RbmParams, probs: &[f64]) -> Result<Moments> {
    let n_v = params.n_visible();
    if probs.len() != 1 << n_v {
        return Err(Error::Size(format!(
            "distribution length {} does not match 2^{n_v}",
            probs.len()
        )));
    }
    let n_h = params.n_hidden();
    let mut m = Moments {
        v: DVector::zeros(n_v),
        h: DVector::zeros(n_h),
        vh: DMatrix::zeros(n_v, n_h),
    };
    for (idx, &p) in probs.iter().enumerate() {
        if p == 0.0 {
            continue;
        }
        let v = index_to_visible(idx, n_v);
        for j in 0..n_h {
            let mut act = params.hbias[j];
            for i in 0..n_v {
                if v[i] != 0.0 {
                    act += params.weights[(i, j)];
                }
            }
            let hbar = logistic(-act);
            m.h[j] += p * hbar;
            for i in 0..n_v {
                if v[i] != 0.0 {
                    m.vh[(i, j)] += p * hbar;
                }
            }
        }
        for i in 0..n_v {
            m.v[i] += p * v[i];
        }
    }
    Ok(m)
}

/// PCD gradient: the data expectation uses exact conditional hidden means;
/// the model expectation uses the persistent chains advanced `k` full Gibbs
/// sweeps (chains are updated in place). Returned as an ascent direction on
/// the log-likelihood, which under the exp(-E) convention is
/// (model moment) - (data moment) for every parameter.
pub fn pcd_gradient(
    params: &RbmParams,
    positive: &Moments,
    chains: &mut DMatrix<f64>,
    k: usize,
    rng: &mut ChaCha8Rng,
) -> RbmGrad {
    advance_chains(params, chains, k, rng);
    let negative = moments_from_rows(params, chains);
    RbmGrad {
        vbias: &negative.v - &positive.v,
        hbias: &negative.h - &positive.h,
        weights: &negative.vh - &positive.vh,
    }
}

/// PCD gradient from an explicit batch of visible rows.
pub fn pcd_gradient_batch(
    params: &RbmParams,
    batch: &DMatrix<f64>,
    chains: &mut DMatrix<f64>,
    k: usize,
    rng: &mut ChaCha8Rng,
) -> Result<RbmGrad> {
    if batch.ncols() != params.n_visible() || chains.ncols() != params.n_visible() {
        return Err(Error::Size(format!(
            "batch/chains width {}/{} does not match {} visible units",
            batch.ncols(),
            chains.ncols(),
            params.n_visible()
        )));
    }
    let positive = moments_from_rows(params, batch);
    Ok(pcd_gradient(params, &positive, chains, k, rng))
}

/// Train by PCD-k. Deterministic for a fixed config seed. `epoch_hook` runs
/// after every epoch with the current parameters.
pub fn train_pcd_with<F>(
    data: &TrainData,
    cfg: &TrainConfig,
    n_v: usize,
    n_h: usize,
    mut epoch_hook: F,
) -> Result<RbmParams>
where
    F: FnMut(usize, &RbmParams),
{
    cfg.validate()?;
    if n_v == 0 || n_h == 0 {
        return Err(Error::Config("unit counts must be positive".into()));
    }
    if let TrainData::Samples(rows) = data {
        if rows.ncols() != n_v {
            return Err(Error::Config(format!(
                "training rows have {} columns, expected {n_v}",
                rows.ncols()
            )));
        }
        if rows.nrows() == 0 {
            return Err(Error::Config("no training samples".into()));
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut params = RbmParams::init(n_v, n_h, &mut rng);
    let mut chains = DMatrix::from_fn(cfg.n_chains, n_v, |_, _| bernoulli(&mut rng, 0.5));
    let lr = cfg.learning_rate;

    match data {
        TrainData::Exact(probs) => {
            for epoch in 0..cfg.epochs {
                let positive = moments_from_distribution(&params, probs)?;
                let g = pcd_gradient(&params, &positive, &mut chains, cfg.k_gibbs, &mut rng);
                params.vbias += lr * &g.vbias;
                params.hbias += lr * &g.hbias;
                params.weights += lr * &g.weights;
                epoch_hook(epoch, &params);
            }
        }
        TrainData::Samples(rows) => {
            let n = rows.nrows();
            let mut order: Vec<usize> = (0..n).collect();
            for epoch in 0..cfg.epochs {
                // Fisher-Yates reshuffle per epoch.
                for k in (1..n).rev() {
                    let j = (rng.next_u64() % (k as u64 + 1)) as usize;
                    order.swap(k, j);
                }
                for block in order.chunks(cfg.batch_size) {
                    let batch =
                        DMatrix::from_fn(block.len(), n_v, |r, c| rows[(block[r], c)]);
                    let positive = moments_from_rows(&params, &batch);
                    let g =
                        pcd_gradient(&params, &positive, &mut chains, cfg.k_gibbs, &mut rng);
                    params.vbias += lr * &g.vbias;
                    params.hbias += lr * &g.hbias;
                    params.weights += lr * &g.weights;
                }
                epoch_hook(epoch, &params);
            }
        }
    }
    params.check_finite()?;
    Ok(params)
}

/// Train by PCD-k without per-epoch observation.
pub fn train_pcd(data: &TrainData, cfg: &TrainConfig, n_v: usize, n_h: usize) -> Result<RbmParams> {
    train_pcd_with(data, cfg, n_v, n_h, |_, _| {})
}

/// Draw visible samples from a distribution over `2^{n_v}` states.
pub fn sample_visible_from(probs: &[f64], n_v: usize, count: usize, seed: u64) -> DMatrix<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // Cumulative inverse transform; ties broken toward the lower index.
    let mut cdf = Vec::with_capacity(probs.len());
    let mut acc = 0.0;
    for &p in probs {
        acc += p;
        cdf.push(acc);
    }
    let mut rows = DMatrix::zeros(count, n_v);
    for r in 0..count {
        let u = (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64) * acc;
        let idx = cdf.partition_point(|&c| c <= u).min(probs.len() - 1);
        let v = index_to_visible(idx, n_v);
        for (i, vi) in v.iter().enumerate() {
            rows[(r, i)] = *vi;
        }
    }
    rows
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::kl_divergence;

    fn brute_force_visible_probs(params: &RbmParams) -> Vec<f64> {
        let n_v = params.n_visible();
        let n_h = params.n_hidden();
        let mut un = vec![0.0f64; 1 << n_v];
        for (idx, u) in un.iter_mut().enumerate() {
            let v = index_to_visible(idx, n_v);
            for hidx in 0..(1usize << n_h) {
                let h = index_to_visible(hidx, n_h);
                *u += (-energy(params, &v, &h).unwrap()).exp();
            }
        }
        let z: f64 = un.iter().sum();
        un.into_iter().map(|u| u / z).collect()
    }

    fn random_params(n_v: usize, n_h: usize, seed: u64, scale: f64) -> RbmParams {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut p = RbmParams::zeros(n_v, n_h);
        for i in 0..n_v {
            let z: f64 = StandardNormal.sample(&mut rng);
            p.vbias[i] = scale * z;
        }
        for j in 0..n_h {
            let z: f64 = StandardNormal.sample(&mut rng);
            p.hbias[j] = scale * z;
        }
        for i in 0..n_v {
            for j in 0..n_h {
                let z: f64 = StandardNormal.sample(&mut rng);
                p.weights[(i, j)] = scale * z;
            }
        }
        p
    }

    #[test]
    fn energy_zero_params() {
        let p = RbmParams::zeros(3, 2);
        assert_eq!(energy(&p, &[1.0, 0.0, 1.0], &[1.0, 1.0]).unwrap(), 0.0);
    }

    #[test]
    fn energy_bias_only() {
        let mut p = RbmParams::zeros(2, 1);
        p.vbias[0] = 1.0;
        assert_eq!(energy(&p, &[1.0, 0.0], &[0.0]).unwrap(), 1.0);
    }

    #[test]
    fn energy_single_weight() {
        let mut p = RbmParams::zeros(2, 2);
        p.weights[(0, 0)] = 2.0;
        assert_eq!(energy(&p, &[1.0, 1.0], &[1.0, 1.0]).unwrap(), 2.0);
    }

    #[test]
    fn energy_checks_sizes() {
        let p = RbmParams::zeros(2, 1);
        assert!(matches!(
            energy(&p, &[1.0], &[0.0]),
            Err(Error::Size(_))
        ));
    }

    #[test]
    fn zero_params_are_uniform() {
        let p = RbmParams::zeros(4, 2);
        let probs = exact_visible_probs(&p).unwrap();
        for v in probs {
            assert!((v - 1.0 / 16.0).abs() < 1e-15);
        }
    }

    #[test]
    fn visible_bias_log3_gives_quarter() {
        let mut p = RbmParams::zeros(1, 1);
        p.vbias[0] = 3.0f64.ln();
        let probs = exact_visible_probs(&p).unwrap();
        assert!((probs[0] - 0.75).abs() < 1e-12);
        assert!((probs[1] - 0.25).abs() < 1e-12);
    }

    #[test]
    fn exact_probs_match_brute_force() {
        for seed in 0..5 {
            let p = random_params(2, 1, seed, 0.8);
            let fast = exact_visible_probs(&p).unwrap();
            let slow = brute_force_visible_probs(&p);
            for (a, b) in fast.iter().zip(&slow) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn exact_probs_sum_to_one() {
        let p = random_params(6, 3, 99, 1.5);
        let probs = exact_visible_probs(&p).unwrap();
        assert!((probs.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn hidden_permutation_leaves_marginal() {
        let p = random_params(4, 2, 3, 0.7);
        let mut q = p.clone();
        q.hbias.swap_rows(0, 1);
        q.weights.swap_columns(0, 1);
        let a = exact_visible_probs(&p).unwrap();
        let b = exact_visible_probs(&q).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn gibbs_zero_params_is_fair_coin() {
        let p = RbmParams::zeros(3, 1);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut ones = 0usize;
        let trials = 4000;
        for _ in 0..trials {
            let v = gibbs_step(&p, &[0.0, 0.0, 0.0], &mut rng).unwrap();
            ones += v.iter().filter(|&&b| b == 1.0).count();
        }
        let frac = ones as f64 / (3 * trials) as f64;
        assert!((frac - 0.5).abs() < 0.02, "frac = {frac}");
    }

    #[test]
    fn strong_negative_bias_saturates_conditional() {
        let mut p = RbmParams::zeros(2, 1);
        p.vbias[0] = -30.0;
        let prob = visible_conditional(&p, &[0.0], 0);
        assert!((prob - 1.0).abs() < 1e-12);
    }

    #[test]
    fn gibbs_is_deterministic_per_seed() {
        let p = random_params(4, 2, 8, 0.5);
        let mut r1 = ChaCha8Rng::seed_from_u64(21);
        let mut r2 = ChaCha8Rng::seed_from_u64(21);
        let a = gibbs_step(&p, &[1.0, 0.0, 1.0, 0.0], &mut r1).unwrap();
        let b = gibbs_step(&p, &[1.0, 0.0, 1.0, 0.0], &mut r2).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn matched_phases_give_zero_gradient() {
        let p = random_params(4, 2, 13, 0.6);
        let batch = DMatrix::from_row_slice(
            3,
            4,
            &[1.0, 0.0, 1.0, 0.0, 0.0, 1.0, 0.0, 1.0, 1.0, 1.0, 0.0, 0.0],
        );
        let mut chains = batch.clone();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        // k = 0 leaves the chains equal to the batch, so both phases use the
        // same rows and the same exact hidden means.
        let g = pcd_gradient_batch(&p, &batch, &mut chains, 0, &mut rng).unwrap();
        assert!(g.vbias.amax() < 1e-15);
        assert!(g.hbias.amax() < 1e-15);
        assert!(g.weights.amax() < 1e-15);
    }

    #[test]
    fn positive_phase_hand_value_at_zero_params() {
        // Single data point, params all zero: the full gradient is
        // E_model[v] - v with E_model[v] = 0.5 per unit in expectation.
        let p = RbmParams::zeros(2, 1);
        let batch = DMatrix::from_row_slice(1, 2, &[1.0, 0.0]);
        let n_chains = 20_000;
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut chains = DMatrix::from_fn(n_chains, 2, |_, _| bernoulli(&mut rng, 0.5));
        let g = pcd_gradient_batch(&p, &batch, &mut chains, 1, &mut rng).unwrap();
        assert!((g.vbias[0] - (0.5 - 1.0)).abs() < 0.02);
        assert!((g.vbias[1] - (0.5 - 0.0)).abs() < 0.02);
    }

    #[test]
    fn trains_single_spike_target() {
        let n_v = 4;
        let mut target = vec![0.0; 16];
        target[0] = 1.0;
        let cfg = TrainConfig {
            epochs: 1500,
            seed: 3,
            ..TrainConfig::default()
        };
        let params = train_pcd(&TrainData::Exact(target), &cfg, n_v, 2).unwrap();
        let probs = exact_visible_probs(&params).unwrap();
        assert!(probs[0] >= 0.9, "P(0000) = {}", probs[0]);
    }

    #[test]
    fn uniform_target_keeps_params_near_zero() {
        let n_v = 4;
        let uniform = vec![1.0 / 16.0; 16];
        let mut params = RbmParams::zeros(n_v, 2);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut chains = DMatrix::from_fn(256, n_v, |_, _| bernoulli(&mut rng, 0.5));
        for _ in 0..500 {
            let positive = moments_from_distribution(&params, &uniform).unwrap();
            let g = pcd_gradient(&params, &positive, &mut chains, 1, &mut rng);
            params.vbias += 0.05 * &g.vbias;
            params.hbias += 0.05 * &g.hbias;
            params.weights += 0.05 * &g.weights;
        }
        let probs = exact_visible_probs(&params).unwrap();
        let kl = kl_divergence(&uniform, &probs, 1e-8).unwrap();
        assert!(kl < 0.01, "kl = {kl}");
    }

    #[test]
    fn training_is_deterministic() {
        let mut target = vec![0.0; 16];
        target[3] = 0.5;
        target[12] = 0.5;
        let cfg = TrainConfig {
            epochs: 50,
            seed: 42,
            ..TrainConfig::default()
        };
        let a = train_pcd(&TrainData::Exact(target.clone()), &cfg, 4, 2).unwrap();
        let b = train_pcd(&TrainData::Exact(target), &cfg, 4, 2).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn parity_with_circuit_budget() {
        for n in [4usize, 6, 8, 10] {
            let p = RbmParams::zeros(n, n / 2);
            assert_eq!(p.param_count(), crate::qcbm::param_count(n));
        }
    }

    #[test]
    fn sampling_respects_distribution() {
        let probs = vec![0.0, 0.25, 0.0, 0.75];
        let rows = sample_visible_from(&probs, 2, 8000, 5);
        let mut count3 = 0;
        for r in 0..rows.nrows() {
            let idx = (rows[(r, 0)] as usize) * 2 + rows[(r, 1)] as usize;
            assert!(idx == 1 || idx == 3);
            if idx == 3 {
                count3 += 1;
            }
        }
        let frac = count3 as f64 / 8000.0;
        assert!((frac - 0.75).abs() < 0.02, "frac = {frac}");
    }
}
