//! Markowitz frontier points under cardinality constraints, and the
//! Boltzmann target distribution built from per-subset risks.
//!
//! The quadratic program per subset is
//!
//! ```text
//!     minimize   w' S w
//!     subject to mu' w = rho,  sum(w) = 1,  l <= w <= u
//! ```
//!
//! solved with a primal active-set method on the bound constraints over the
//! two-equality KKT system. Risk is the standard deviation `sqrt(w' S w)`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::market_data::ReturnStats;

/// Equality/box-constrained minimum-variance problem for one asset subset.
#[derive(Debug, Clone)]
pub struct QpProblem {
    pub sigma: DMatrix<f64>,
    pub mu: DVector<f64>,
    pub rho: f64,
    pub lower: DVector<f64>,
    pub upper: DVector<f64>,
}

/// One point on an efficient frontier.
#[derive(Debug, Clone, PartialEq)]
pub struct FrontierPoint {
    pub rho: f64,
    /// Standard deviation of portfolio return at the optimum.
    pub risk: f64,
    pub weights: DVector<f64>,
}

/// Result of a subset QP: either the optimal frontier point or proof that
/// the constraint set is empty at this return level.
#[derive(Debug, Clone, PartialEq)]
pub enum QpOutcome {
    Optimal(FrontierPoint),
    Infeasible,
}

/// Probability vector over all `2^n` bitstrings with support restricted to
/// cardinality-`kappa` strings. Bit conventions: asset 0 is the leftmost
/// character of the printed bitstring and the most significant bit of the
/// integer index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetDistribution {
    pub n: usize,
    pub kappa: usize,
    pub rho: f64,
    pub temperature: f64,
    pub probs: Vec<f64>,
}

const PSD_TOL: f64 = 1e-10;
const KKT_REG: f64 = 1e-12;

impl QpProblem {
    pub fn new(
        sigma: DMatrix<f64>,
        mu: DVector<f64>,
        rho: f64,
        lower: DVector<f64>,
        upper: DVector<f64>,
    ) -> Result<Self> {
        let k = mu.len();
        if sigma.nrows() != k || sigma.ncols() != k || lower.len() != k || upper.len() != k {
            return Err(Error::Size(format!(
                "dimension mismatch: sigma {}x{}, mu {}, bounds {}/{}",
                sigma.nrows(),
                sigma.ncols(),
                k,
                lower.len(),
                upper.len()
            )));
        }
        if k == 0 {
            return Err(Error::Size("empty problem".into()));
        }
        let scale = sigma.amax().max(1.0);
        for i in 0..k {
            for j in (i + 1)..k {
                if (sigma[(i, j)] - sigma[(j, i)]).abs() > 1e-8 * scale {
                    return Err(Error::Validation(format!(
                        "sigma not symmetric at ({i},{j})"
                    )));
                }
            }
        }
        let eig = sigma.clone().symmetric_eigen();
        if eig.eigenvalues.min() < -PSD_TOL * scale {
            return Err(Error::Validation(format!(
                "sigma not positive semidefinite: min eigenvalue {}",
                eig.eigenvalues.min()
            )));
        }
        for i in 0..k {
            if lower[i] > upper[i] {
                return Err(Error::Validation(format!(
                    "lower[{i}] = {} exceeds upper[{i}] = {}",
                    lower[i], upper[i]
                )));
            }
        }
        if lower.sum() > 1.0 + 1e-12 || upper.sum() < 1.0 - 1e-12 {
            return Err(Error::Validation(
                "budget constraint infeasible: need sum(lower) <= 1 <= sum(upper)".into(),
            ));
        }
        Ok(Self {
            sigma,
            mu,
            rho,
            lower,
            upper,
        })
    }

    fn objective(&self, w: &DVector<f64>) -> f64 {
        (w.transpose() * &self.sigma * w)[(0, 0)]
    }

    /// Extreme achievable return under the budget and box constraints,
    /// with the weight vector attaining it. Greedy fill in mu order.
    fn extreme_return(&self, maximize: bool) -> (DVector<f64>, f64) {
        let k = self.mu.len();
        let mut order: Vec<usize> = (0..k).collect();
        if maximize {
            order.sort_by(|&a, &b| self.mu[b].total_cmp(&self.mu[a]).then(a.cmp(&b)));
        } else {
            order.sort_by(|&a, &b| self.mu[a].total_cmp(&self.mu[b]).then(a.cmp(&b)));
        }
        let mut w = self.lower.clone();
        let mut leftover = 1.0 - self.lower.sum();
        for &i in &order {
            if leftover <= 0.0 {
                break;
            }
            let add = (self.upper[i] - self.lower[i]).min(leftover);
            w[i] += add;
            leftover -= add;
        }
        let ret = self.mu.dot(&w);
        (w, ret)
    }
}

/// Step direction restricted to free coordinates, plus the equality
/// multipliers when the free rows pin them.
type EqpDirection = (DVector<f64>, Option<(f64, f64)>);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum VarStatus {
    Free,
    Lower,
    Upper,
}

/// Direction subproblem on the current working set: minimize the quadratic
/// model over steps that keep active bounds fixed and both equality
/// constraints satisfied. Returns the step restricted to free coordinates
/// and, when the equality rows have full rank on the free set, the pair of
/// equality multipliers.
fn eqp_direction(
    prob: &QpProblem,
    grad: &DVector<f64>,
    free: &[usize],
) -> Result<EqpDirection> {
    let k = prob.mu.len();
    let m = free.len();
    let mut dir = DVector::zeros(k);
    if m == 0 {
        return Ok((dir, None));
    }
    let mu_f: Vec<f64> = free.iter().map(|&i| prob.mu[i]).collect();
    let spread = mu_f.iter().cloned().fold(f64::MIN, f64::max)
        - mu_f.iter().cloned().fold(f64::MAX, f64::min);
    let mu_scale = 1.0 + mu_f.iter().fold(0.0f64, |a, &v| a.max(v.abs()));
    let full_rank = m >= 2 && spread > 1e-12 * mu_scale;

    let n_con = if full_rank { 2 } else { 1 };
    if m < n_con + 1 && !full_rank && m == 1 {
        // One free variable pinned by the budget row: no motion possible.
        return Ok((dir, None));
    }

    let dim = m + n_con;
    let mut a = DMatrix::zeros(dim, dim);
    let mut rhs = DVector::zeros(dim);
    for (r, &i) in free.iter().enumerate() {
        for (c, &j) in free.iter().enumerate() {
            a[(r, c)] = 2.0 * prob.sigma[(i, j)];
        }
        rhs[r] = -grad[i];
    }
    if full_rank {
        for (r, &i) in free.iter().enumerate() {
            a[(r, m)] = -prob.mu[i];
            a[(r, m + 1)] = -1.0;
            a[(m, r)] = prob.mu[i];
            a[(m + 1, r)] = 1.0;
        }
    } else {
        for (r, _) in free.iter().enumerate() {
            a[(r, m)] = -1.0;
            a[(m, r)] = 1.0;
        }
    }

    let solve = |a: &DMatrix<f64>| -> Option<DVector<f64>> {
        let lu = a.clone().lu();
        lu.solve(&rhs).filter(|x| x.iter().all(|v| v.is_finite()))
    };
    let x = match solve(&a) {
        Some(x) => x,
        None => {
            // Regularize the Hessian block and retry.
            let mut a2 = a.clone();
            for r in 0..m {
                a2[(r, r)] += 2.0 * KKT_REG;
            }
            solve(&a2).ok_or_else(|| {
                Error::Numerical("KKT system singular beyond regularization".into())
            })?
        }
    };
    for (r, &i) in free.iter().enumerate() {
        dir[i] = x[r];
    }
    let lambda = if full_rank {
        Some((x[m], x[m + 1]))
    } else {
        None
    };
    Ok((dir, lambda))
}

/// Longest feasible step along `dir` from `w`, with the blocking variable.
fn max_step(prob: &QpProblem, w: &DVector<f64>, dir: &DVector<f64>) -> (f64, Option<usize>) {
    let mut alpha = 1.0f64;
    let mut blocking = None;
    for i in 0..w.len() {
        let d = dir[i];
        if d.abs() < 1e-15 {
            continue;
        }
        let room = if d > 0.0 {
            (prob.upper[i] - w[i]) / d
        } else {
            (prob.lower[i] - w[i]) / d
        };
        if room < alpha {
            alpha = room.max(0.0);
            blocking = Some(i);
        }
    }
    (alpha, blocking)
}

/// Quadratic model value of a candidate step: dir' S dir + grad' dir.
fn model_decrease(prob: &QpProblem, grad: &DVector<f64>, dir: &DVector<f64>) -> f64 {
    (dir.transpose() * &prob.sigma * dir)[(0, 0)] + grad.dot(dir)
}

/// Solve the subset QP. Returns `Infeasible` exactly when the requested
/// return level lies outside the interval attainable under the budget and
/// box constraints.
pub fn solve_qp(prob: &QpProblem) -> Result<QpOutcome> {
    let k = prob.mu.len();
    let (w_lo, rho_lo) = prob.extreme_return(false);
    let (w_hi, rho_hi) = prob.extreme_return(true);
    let ftol = 1e-10 * (1.0 + prob.rho.abs().max(rho_lo.abs()).max(rho_hi.abs()));
    if prob.rho < rho_lo - ftol || prob.rho > rho_hi + ftol {
        return Ok(QpOutcome::Infeasible);
    }

    // Feasible start: the segment between the two greedy extremes satisfies
    // budget and bounds, and return is linear along it.
    let mut w = if rho_hi - rho_lo > ftol {
        let t = ((prob.rho - rho_lo) / (rho_hi - rho_lo)).clamp(0.0, 1.0);
        &w_lo * (1.0 - t) + &w_hi * t
    } else {
        w_lo
    };

    let atol = 1e-12;
    let mut status = vec![VarStatus::Free; k];
    for i in 0..k {
        if prob.upper[i] - prob.lower[i] < atol || w[i] - prob.lower[i] <= atol {
            status[i] = VarStatus::Lower;
            w[i] = prob.lower[i];
        } else if prob.upper[i] - w[i] <= atol {
            status[i] = VarStatus::Upper;
            w[i] = prob.upper[i];
        }
    }

    let scale = prob.sigma.amax().max(1e-30);
    let step_tol = 1e-13;
    let mult_tol = 1e-10 * scale.max(1.0);
    let dec_tol = 1e-14 * scale;
    let max_iter = 100 * (k + 3);

    for _ in 0..max_iter {
        let free: Vec<usize> = (0..k)
            .filter(|&i| status[i] == VarStatus::Free)
            .collect();
        let grad = 2.0 * &prob.sigma * &w;
        let (dir, lambda) = eqp_direction(prob, &grad, &free)?;

        if dir.amax() > step_tol {
            let (alpha, blocking) = max_step(prob, &w, &dir);
            if alpha > 0.0 {
                w += alpha * &dir;
            }
            if let Some(j) = blocking {
                if alpha < 1.0 {
                    status[j] = if dir[j] > 0.0 {
                        w[j] = prob.upper[j];
                        VarStatus::Upper
                    } else {
                        w[j] = prob.lower[j];
                        VarStatus::Lower
                    };
                }
            }
            continue;
        }

        // Stationary on the working set: test optimality.
        if let Some((l1, l2)) = lambda {
            let mut worst: Option<(usize, f64)> = None;
            for i in 0..k {
                if status[i] == VarStatus::Free || prob.upper[i] - prob.lower[i] < atol {
                    continue;
                }
                let r = grad[i] - l1 * prob.mu[i] - l2;
                let violation = match status[i] {
                    VarStatus::Lower => -r,
                    VarStatus::Upper => r,
                    VarStatus::Free => unreachable!(),
                };
                if violation > mult_tol && worst.is_none_or(|(_, v)| violation > v) {
                    worst = Some((i, violation));
                }
            }
            match worst {
                Some((i, _)) => {
                    status[i] = VarStatus::Free;
                    continue;
                }
                None => return Ok(finish(prob, w)),
            }
        }

        // Equality multipliers are not pinned by the free set. Probe release
        // sets of up to three active bounds; with two equality constraints a
        // violated optimality certificate involves at most three bounds.
        match find_release(prob, &grad, &free, &status, dec_tol)? {
            Some(set) => {
                for i in set {
                    status[i] = VarStatus::Free;
                }
            }
            None => return Ok(finish(prob, w)),
        }
    }
    Err(Error::Numerical(
        "active-set iteration limit exceeded".into(),
    ))
}

fn finish(prob: &QpProblem, w: DVector<f64>) -> QpOutcome {
    let obj = prob.objective(&w).max(0.0);
    QpOutcome::Optimal(FrontierPoint {
        rho: prob.rho,
        risk: obj.sqrt(),
        weights: w,
    })
}

/// Search for a set of at most three active bounds whose release yields a
/// sign-valid descent direction. Deterministic lexicographic order.
fn find_release(
    prob: &QpProblem,
    grad: &DVector<f64>,
    free: &[usize],
    status: &[VarStatus],
    dec_tol: f64,
) -> Result<Option<Vec<usize>>> {
    let k = status.len();
    let releasable: Vec<usize> = (0..k)
        .filter(|&i| status[i] != VarStatus::Free && prob.upper[i] - prob.lower[i] > 1e-12)
        .collect();
    let mut candidates: Vec<Vec<usize>> = Vec::new();
    for (a, &i) in releasable.iter().enumerate() {
        candidates.push(vec![i]);
        for (b, &j) in releasable.iter().enumerate().skip(a + 1) {
            candidates.push(vec![i, j]);
            for &l in releasable.iter().skip(b + 1) {
                candidates.push(vec![i, j, l]);
            }
        }
    }
    candidates.sort_by(|x, y| x.len().cmp(&y.len()).then_with(|| x.cmp(y)));

    for set in candidates {
        let mut trial: Vec<usize> = free.to_vec();
        trial.extend_from_slice(&set);
        trial.sort_unstable();
        let (dir, _) = eqp_direction(prob, grad, &trial)?;
        if dir.amax() < 1e-13 {
            continue;
        }
        let signs_ok = set.iter().all(|&i| match status[i] {
            VarStatus::Lower => dir[i] >= -1e-12,
            VarStatus::Upper => dir[i] <= 1e-12,
            VarStatus::Free => true,
        });
        if !signs_ok {
            continue;
        }
        if model_decrease(prob, grad, &dir) < -dec_tol {
            return Ok(Some(set));
        }
    }
    Ok(None)
}

/// All length-`n` bitstrings with exactly `kappa` ones, ascending as
/// integers. Bit `n-1-i` of the integer corresponds to asset `i`.
pub fn enumerate_subsets(n: usize, kappa: usize) -> Result<Vec<u32>> {
    if n == 0 || n > 25 {
        return Err(Error::Range(format!("n = {n} out of supported range 1..=25")));
    }
    if kappa == 0 || kappa > n {
        return Err(Error::Range(format!("kappa = {kappa} must be in 1..={n}")));
    }
    let mut out = Vec::new();
    let limit: u32 = 1 << n;
    let mut x: u32 = (1 << kappa) - 1;
    while x < limit {
        out.push(x);
        // Gosper's hack: next integer with the same popcount.
        let c = x & x.wrapping_neg();
        let r = x + c;
        x = (((r ^ x) >> 2) / c) | r;
        if c == 0 {
            break;
        }
    }
    Ok(out)
}

/// Asset indices selected by a bitmask under the MSB-first convention.
pub fn subset_indices(mask: u32, n: usize) -> Vec<usize> {
    (0..n).filter(|&i| mask & (1 << (n - 1 - i)) != 0).collect()
}

/// Printed form of a bitmask, asset 0 leftmost.
pub fn format_bitstring(mask: u32, n: usize) -> String {
    (0..n)
        .map(|i| {
            if mask & (1 << (n - 1 - i)) != 0 {
                '1'
            } else {
                '0'
            }
        })
        .collect()
}

/// Market temperature: square root of the mean covariance entry.
pub fn market_temperature(stats: &ReturnStats) -> Result<f64> {
    let n = stats.n_assets();
    let mean = stats.sigma.sum() / (n * n) as f64;
    if mean <= 0.0 {
        return Err(Error::Degenerate(format!(
            "mean covariance entry {mean} is not positive"
        )));
    }
    Ok(mean.sqrt())
}

/// Boltzmann weights exp(-risk/T) over subsets, normalized over the feasible
/// ones; infeasible entries (None) get probability exactly zero.
pub fn boltzmann_weights(risks: &[Option<f64>], temperature: f64) -> Result<Vec<f64>> {
    if temperature <= 0.0 {
        return Err(Error::Degenerate("temperature must be positive".into()));
    }
    let min_risk = risks
        .iter()
        .flatten()
        .cloned()
        .fold(f64::INFINITY, f64::min);
    if !min_risk.is_finite() {
        return Err(Error::NoFeasibleSubset(
            "no feasible subset supplied".into(),
        ));
    }
    let mut weights: Vec<f64> = risks
        .iter()
        .map(|r| match r {
            Some(risk) => (-(risk - min_risk) / temperature).exp(),
            None => 0.0,
        })
        .collect();
    let total: f64 = weights.iter().sum();
    for w in &mut weights {
        *w /= total;
    }
    Ok(weights)
}

/// Build the target distribution over all `2^n` bitstrings at return level
/// `rho`, with per-asset bounds `(l, u)` applied to each selected asset.
pub fn build_target(
    stats: &ReturnStats,
    kappa: usize,
    rho: f64,
    bounds: (f64, f64),
) -> Result<TargetDistribution> {
    let n = stats.n_assets();
    if n > 25 {
        return Err(Error::Range(format!("n = {n} too large for 2^n support")));
    }
    let temperature = market_temperature(stats)?;
    let masks = enumerate_subsets(n, kappa)?;
    let mut risks: Vec<Option<f64>> = Vec::with_capacity(masks.len());
    for &mask in &masks {
        let idx = subset_indices(mask, n);
        let sub = stats.select(&idx)?;
        let kk = idx.len();
        let prob = QpProblem::new(
            sub.sigma,
            sub.mu,
            rho,
            DVector::from_element(kk, bounds.0),
            DVector::from_element(kk, bounds.1),
        )?;
        match solve_qp(&prob)? {
            QpOutcome::Optimal(pt) => risks.push(Some(pt.risk)),
            QpOutcome::Infeasible => risks.push(None),
        }
    }
    if risks.iter().all(Option::is_none) {
        return Err(Error::NoFeasibleSubset(format!(
            "all {} subsets infeasible at rho = {rho}",
            masks.len()
        )));
    }
    let weights = boltzmann_weights(&risks, temperature)?;
    let mut probs = vec![0.0; 1usize << n];
    for (w, &mask) in weights.iter().zip(&masks) {
        probs[mask as usize] = *w;
    }
    Ok(TargetDistribution {
        n,
        kappa,
        rho,
        temperature,
        probs,
    })
}

impl TargetDistribution {
    /// Number of strictly positive probabilities.
    pub fn support_size(&self) -> usize {
        self.probs.iter().filter(|&&p| p > 0.0).count()
    }

    pub fn save(&self, path: &std::path::Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(path, text)?;
        Ok(())
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let td: Self = serde_json::from_str(&text)?;
        td.validate()?;
        Ok(td)
    }

    pub fn validate(&self) -> Result<()> {
        if self.probs.len() != 1usize << self.n {
            return Err(Error::Size(format!(
                "probs length {} does not match 2^{}",
                self.probs.len(),
                self.n
            )));
        }
        let sum: f64 = self.probs.iter().sum();
        if (sum - 1.0).abs() > 1e-12 {
            return Err(Error::Validation(format!("probs sum to {sum}, not 1")));
        }
        for (x, &p) in self.probs.iter().enumerate() {
            if p < 0.0 {
                return Err(Error::Validation(format!("negative probability at {x}")));
            }
            if p > 0.0 && (x as u32).count_ones() as usize != self.kappa {
                return Err(Error::Validation(format!(
                    "support outside cardinality {} at index {x}",
                    self.kappa
                )));
            }
        }
        Ok(())
    }
}
