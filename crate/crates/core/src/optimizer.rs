//! Gradient-free (mu/mu_w, lambda)-CMA-ES minimizer.
//!
//! Standard algorithm with rank-one and rank-mu covariance updates and
//! cumulative step-size adaptation, using the published default
//! hyperparameters as functions of the dimension. Fully deterministic for a
//! fixed seed; candidate evaluation order is reduced in rank order.

use nalgebra::{DMatrix, DVector};
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Adaptation state carried across generations.
#[derive(Debug, Clone)]
pub struct CmaState {
    pub mean: DVector<f64>,
    pub step_size: f64,
    pub cov: DMatrix<f64>,
    pub path_sigma: DVector<f64>,
    pub path_cov: DVector<f64>,
    pub generation: usize,
    pub rng_seed: u64,
}

/// Per-generation loss statistics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GenStats {
    pub generation: usize,
    pub best: f64,
    pub median: f64,
}

/// Outcome of a minimization run.
#[derive(Debug, Clone, PartialEq)]
pub struct OptResult {
    pub best_params: Vec<f64>,
    pub best_loss: f64,
    pub history: Vec<GenStats>,
    pub evaluations: usize,
}

/// Population size for dimension `d`: 4 + floor(3 ln d).
pub fn population_size(d: usize) -> usize {
    4 + (3.0 * (d as f64).ln()).floor() as usize
}

/// Positive recombination weights for the top `mu` ranks, normalized to sum
/// to one and non-increasing.
pub fn recombination_weights(lambda: usize) -> Vec<f64> {
    let mu = lambda / 2;
    let mut w: Vec<f64> = (1..=mu)
        .map(|i| ((mu as f64) + 0.5).ln() - (i as f64).ln())
        .collect();
    let total: f64 = w.iter().sum();
    for v in &mut w {
        *v /= total;
    }
    w
}

struct Constants {
    lambda: usize,
    weights: Vec<f64>,
    mu_eff: f64,
    c_sigma: f64,
    d_sigma: f64,
    c_c: f64,
    c_1: f64,
    c_mu: f64,
    chi_n: f64,
}

impl Constants {
    fn for_dim(d: usize) -> Self {
        let dd = d as f64;
        let lambda = population_size(d);
        let weights = recombination_weights(lambda);
        let mu_eff = 1.0 / weights.iter().map(|w| w * w).sum::<f64>();
        let c_sigma = (mu_eff + 2.0) / (dd + mu_eff + 5.0);
        let d_sigma = 1.0 + 2.0 * (((mu_eff - 1.0) / (dd + 1.0)).sqrt() - 1.0).max(0.0) + c_sigma;
        let c_c = (4.0 + mu_eff / dd) / (dd + 4.0 + 2.0 * mu_eff / dd);
        let c_1 = 2.0 / ((dd + 1.3).powi(2) + mu_eff);
        let c_mu = (1.0 - c_1)
            .min(2.0 * (mu_eff - 2.0 + 1.0 / mu_eff) / ((dd + 2.0).powi(2) + mu_eff));
        let chi_n = dd.sqrt() * (1.0 - 1.0 / (4.0 * dd) + 1.0 / (21.0 * dd * dd));
        Self {
            lambda,
            weights,
            mu_eff,
            c_sigma,
            d_sigma,
            c_c,
            c_1,
            c_mu,
            chi_n,
        }
    }
}

const SIGMA_FLOOR: f64 = 1e-12;
const EIG_FLOOR: f64 = 1e-14;

/// Minimize `loss` over `d` dimensions within an evaluation budget.
///
/// Runs whole generations until the next one would exceed `budget` or the
/// step size falls below 1e-12. `history` holds one (best, median) entry per
/// generation; `best_loss`/`best_params` track the best individual ever
/// evaluated.
pub fn minimize<F>(
    loss: F,
    d: usize,
    budget: usize,
    seed: u64,
    init_mean: &[f64],
    init_step: f64,
) -> Result<OptResult>
where
    F: Fn(&[f64]) -> f64,
{
    if d == 0 {
        return Err(Error::Size("dimension must be positive".into()));
    }
    if init_mean.len() != d {
        return Err(Error::Size(format!(
            "init_mean length {} does not match d = {d}",
            init_mean.len()
        )));
    }
    if !(init_step > 0.0) {
        return Err(Error::Config("init_step must be positive".into()));
    }
    let consts = Constants::for_dim(d);
    if budget < consts.lambda {
        return Err(Error::Budget(format!(
            "budget {budget} below one generation (lambda = {})",
            consts.lambda
        )));
    }

    let mut state = CmaState {
        mean: DVector::from_column_slice(init_mean),
        step_size: init_step,
        cov: DMatrix::identity(d, d),
        path_sigma: DVector::zeros(d),
        path_cov: DVector::zeros(d),
        generation: 0,
        rng_seed: seed,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut best_loss = f64::INFINITY;
    let mut best_params = init_mean.to_vec();
    let mut history = Vec::new();
    let mut evaluations = 0usize;

    while evaluations + consts.lambda <= budget && state.step_size >= SIGMA_FLOOR {
        // Re-symmetrize before decomposing; floor eigenvalues to keep the
        // sampling distribution proper.
        let sym = DMatrix::from_fn(d, d, |i, j| 0.5 * (state.cov[(i, j)] + state.cov[(j, i)]));
        let eig = sym.symmetric_eigen();
        if eig.eigenvalues.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical(
                "covariance eigenvalues are not finite".into(),
            ));
        }
        let mut d_sqrt = DVector::zeros(d);
        let mut d_inv = DVector::zeros(d);
        for i in 0..d {
            let ev = eig.eigenvalues[i].max(EIG_FLOOR);
            d_sqrt[i] = ev.sqrt();
            d_inv[i] = 1.0 / ev.sqrt();
        }
        let b = eig.eigenvectors;

        // Sample lambda candidates: x = m + sigma * B D z.
        let mut ys: Vec<DVector<f64>> = Vec::with_capacity(consts.lambda);
        let mut losses: Vec<f64> = Vec::with_capacity(consts.lambda);
        for _ in 0..consts.lambda {
            let z = DVector::from_fn(d, |_, _| StandardNormal.sample(&mut rng));
            let y = &b * z.component_mul(&d_sqrt);
            let x = &state.mean + state.step_size * &y;
            let value = loss(x.as_slice());
            if value.is_nan() {
                return Err(Error::Numerical("loss returned NaN".into()));
            }
            if value < best_loss {
                best_loss = value;
                best_params = x.as_slice().to_vec();
            }
            ys.push(y);
            losses.push(value);
        }
        evaluations += consts.lambda;

        let mut order: Vec<usize> = (0..consts.lambda).collect();
        order.sort_by(|&a, &c| losses[a].total_cmp(&losses[c]).then(a.cmp(&c)));

        let gen_best = losses[order[0]];
        let mid = consts.lambda / 2;
        let gen_median = if consts.lambda % 2 == 1 {
            losses[order[mid]]
        } else {
            0.5 * (losses[order[mid - 1]] + losses[order[mid]])
        };
        state.generation += 1;
        history.push(GenStats {
            generation: state.generation,
            best: gen_best,
            median: gen_median,
        });

        // Recombination.
        let mut y_w = DVector::zeros(d);
        for (rank, &w) in consts.weights.iter().enumerate() {
            y_w += w * &ys[order[rank]];
        }
        state.mean += state.step_size * &y_w;

        // Step-size path uses C^{-1/2} y_w.
        let c_inv_half_yw = &b * (b.transpose() * &y_w).component_mul(&d_inv);
        state.path_sigma = (1.0 - consts.c_sigma) * &state.path_sigma
            + (consts.c_sigma * (2.0 - consts.c_sigma) * consts.mu_eff).sqrt() * c_inv_half_yw;

        let ps_norm = state.path_sigma.norm();
        let expected_decay =
            (1.0 - (1.0 - consts.c_sigma).powi(2 * state.generation as i32)).sqrt();
        let h_sigma = if ps_norm / expected_decay
            < (1.4 + 2.0 / (d as f64 + 1.0)) * consts.chi_n
        {
            1.0
        } else {
            0.0
        };

        state.path_cov = (1.0 - consts.c_c) * &state.path_cov
            + h_sigma * (consts.c_c * (2.0 - consts.c_c) * consts.mu_eff).sqrt() * &y_w;

        // Rank-one plus rank-mu covariance update.
        let delta_h = (1.0 - h_sigma) * consts.c_c * (2.0 - consts.c_c);
        let mut rank_mu = DMatrix::zeros(d, d);
        for (rank, &w) in consts.weights.iter().enumerate() {
            let y = &ys[order[rank]];
            rank_mu += w * y * y.transpose();
        }
        state.cov = (1.0 - consts.c_1 - consts.c_mu) * &state.cov
            + consts.c_1
                * (&state.path_cov * state.path_cov.transpose() + delta_h * &state.cov)
            + consts.c_mu * rank_mu;
        if state.cov.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical("covariance update diverged".into()));
        }

        state.step_size *=
            ((consts.c_sigma / consts.d_sigma) * (ps_norm / consts.chi_n - 1.0)).exp();
        if !state.step_size.is_finite() {
            return Err(Error::Numerical("step size diverged".into()));
        }
    }

    Ok(OptResult {
        best_params,
        best_loss,
        history,
        evaluations,
    })
}
