//! Price time-series ingestion, return statistics, and seeded synthetic data.
//!
//! The input format is a wide CSV: header `date,<T1>,<T2>,...`, one row per
//! trading day, ISO-8601 dates in the first column, strictly positive prices
//! everywhere else. Rows containing a missing or non-positive price fail
//! validation with a diagnostic listing the offending data rows.

use std::fmt::Write as _;
use std::path::Path;

use chrono::NaiveDate;
use nalgebra::{DMatrix, DVector};
use rand::RngCore;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};

/// Daily closing prices: `T` dates by `N` assets.
#[derive(Debug, Clone, PartialEq)]
pub struct PriceMatrix {
    dates: Vec<NaiveDate>,
    tickers: Vec<String>,
    prices: DMatrix<f64>,
}

/// Mean daily return and sample covariance of the return series.
#[derive(Debug, Clone, PartialEq)]
pub struct ReturnStats {
    pub mu: DVector<f64>,
    pub sigma: DMatrix<f64>,
}

impl PriceMatrix {
    /// Builds a matrix from parts, enforcing the type invariants:
    /// strictly increasing dates, strictly positive prices, at least two rows.
    pub fn new(dates: Vec<NaiveDate>, tickers: Vec<String>, prices: DMatrix<f64>) -> Result<Self> {
        if tickers.is_empty() {
            return Err(Error::Validation("no tickers".into()));
        }
        if dates.len() != prices.nrows() || tickers.len() != prices.ncols() {
            return Err(Error::Validation(format!(
                "shape mismatch: {} dates, {} tickers, {}x{} price matrix",
                dates.len(),
                tickers.len(),
                prices.nrows(),
                prices.ncols()
            )));
        }
        if dates.len() < 2 {
            return Err(Error::Validation(
                "need at least 2 rows to form one return".into(),
            ));
        }
        for w in dates.windows(2) {
            if w[1] <= w[0] {
                return Err(Error::Validation(format!(
                    "dates not strictly increasing: {} then {}",
                    w[0], w[1]
                )));
            }
        }
        let mut bad_rows = Vec::new();
        for t in 0..prices.nrows() {
            if (0..prices.ncols()).any(|i| !(prices[(t, i)] > 0.0) || !prices[(t, i)].is_finite()) {
                bad_rows.push(t + 1);
            }
        }
        if !bad_rows.is_empty() {
            return Err(Error::Validation(format!(
                "non-positive or non-finite price in data row(s) {}",
                join_usize(&bad_rows)
            )));
        }
        Ok(Self {
            dates,
            tickers,
            prices,
        })
    }

    pub fn dates(&self) -> &[NaiveDate] {
        &self.dates
    }

    pub fn tickers(&self) -> &[String] {
        &self.tickers
    }

    pub fn prices(&self) -> &DMatrix<f64> {
        &self.prices
    }

    /// Number of dates (rows).
    pub fn n_days(&self) -> usize {
        self.prices.nrows()
    }

    /// Number of assets (columns).
    pub fn n_assets(&self) -> usize {
        self.prices.ncols()
    }

    /// New matrix restricted to the given asset columns, in the given order.
    pub fn select_columns(&self, indices: &[usize]) -> Result<Self> {
        for &i in indices {
            if i >= self.n_assets() {
                return Err(Error::Range(format!(
                    "asset index {i} out of range 0..{}",
                    self.n_assets()
                )));
            }
        }
        let tickers = indices.iter().map(|&i| self.tickers[i].clone()).collect();
        let prices = self.prices.select_columns(indices);
        Self::new(self.dates.clone(), tickers, prices)
    }

    /// Serializes to the wide CSV format. Floats are written with the
    /// shortest representation that round-trips, so `save` then `load`
    /// reproduces the matrix exactly.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        out.push_str("date");
        for t in &self.tickers {
            out.push(',');
            out.push_str(t);
        }
        out.push('\n');
        for (t, date) in self.dates.iter().enumerate() {
            let _ = write!(out, "{}", date.format("%Y-%m-%d"));
            for i in 0..self.n_assets() {
                let _ = write!(out, ",{}", self.prices[(t, i)]);
            }
            out.push('\n');
        }
        out
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv())?;
        Ok(())
    }
}

fn join_usize(values: &[usize]) -> String {
    values
        .iter()
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join(", ")
}

/// Load prices from a wide CSV file.
pub fn load_prices(path: &Path) -> Result<PriceMatrix> {
    let text = std::fs::read_to_string(path)?;
    parse_wide_csv(&text)
}

/// Parse the wide CSV format from a string.
///
/// Malformed cells are `Parse` errors carrying the 1-based file line and
/// column; structural problems (missing or non-positive prices, dates out of
/// order) are `Validation` errors naming the 1-based data rows involved.
pub fn parse_wide_csv(text: &str) -> Result<PriceMatrix> {
    let mut lines = text.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| Error::Validation("empty file".into()))?;
    let mut fields = header.split(',');
    match fields.next() {
        Some("date") => {}
        other => {
            return Err(Error::Parse {
                line: 1,
                column: 1,
                message: format!("expected header to start with 'date', got {other:?}"),
            })
        }
    }
    let tickers: Vec<String> = fields.map(|s| s.trim().to_string()).collect();
    if tickers.is_empty() || tickers.iter().any(String::is_empty) {
        return Err(Error::Parse {
            line: 1,
            column: 2,
            message: "header must name at least one non-empty ticker".into(),
        });
    }

    let n = tickers.len();
    let mut dates = Vec::new();
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut bad_rows: Vec<usize> = Vec::new();
    for (line_idx, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let line_no = line_idx + 1;
        let data_row = rows.len() + 1;
        let cells: Vec<&str> = line.split(',').collect();
        if cells.len() != n + 1 {
            return Err(Error::Parse {
                line: line_no,
                column: cells.len(),
                message: format!("expected {} fields, found {}", n + 1, cells.len()),
            });
        }
        let date = NaiveDate::parse_from_str(cells[0].trim(), "%Y-%m-%d").map_err(|e| {
            Error::Parse {
                line: line_no,
                column: 1,
                message: format!("bad date {:?}: {e}", cells[0]),
            }
        })?;
        let mut row = Vec::with_capacity(n);
        let mut row_ok = true;
        for (i, cell) in cells[1..].iter().enumerate() {
            let cell = cell.trim();
            if cell.is_empty() {
                // Missing price: the whole row is rejected below.
                row_ok = false;
                row.push(f64::NAN);
                continue;
            }
            let value: f64 = cell.parse().map_err(|e| Error::Parse {
                line: line_no,
                column: i + 2,
                message: format!("bad price {cell:?}: {e}"),
            })?;
            if !(value > 0.0) || !value.is_finite() {
                row_ok = false;
            }
            row.push(value);
        }
        if !row_ok {
            bad_rows.push(data_row);
        }
        dates.push(date);
        rows.push(row);
    }

    if !bad_rows.is_empty() {
        return Err(Error::Validation(format!(
            "missing or non-positive price in data row(s) {}",
            join_usize(&bad_rows)
        )));
    }
    if rows.len() < 2 {
        return Err(Error::Validation(format!(
            "need at least 2 data rows, found {}",
            rows.len()
        )));
    }
    let prices = DMatrix::from_fn(rows.len(), n, |t, i| rows[t][i]);
    PriceMatrix::new(dates, tickers, prices)
}

/// Daily arithmetic returns, entry (t, i) = (p[t+1][i] - p[t][i]) / p[t][i].
pub fn compute_returns(pm: &PriceMatrix) -> DMatrix<f64> {
    let p = pm.prices();
    DMatrix::from_fn(p.nrows() - 1, p.ncols(), |t, i| {
        (p[(t + 1, i)] - p[(t, i)]) / p[(t, i)]
    })
}

/// Per-column mean and sample covariance (unbiased, T-1 denominator).
pub fn compute_stats(returns: &DMatrix<f64>) -> Result<ReturnStats> {
    let t = returns.nrows();
    let n = returns.ncols();
    if t < 2 {
        return Err(Error::Degenerate(format!(
            "need at least 2 return rows for a covariance, found {t}"
        )));
    }
    let mu = DVector::from_fn(n, |i, _| returns.column(i).sum() / t as f64);
    let centered = DMatrix::from_fn(t, n, |r, c| returns[(r, c)] - mu[c]);
    let mut sigma = centered.transpose() * &centered / (t as f64 - 1.0);
    // Enforce exact symmetry against accumulation-order noise.
    for i in 0..n {
        for j in (i + 1)..n {
            let v = 0.5 * (sigma[(i, j)] + sigma[(j, i)]);
            sigma[(i, j)] = v;
            sigma[(j, i)] = v;
        }
    }
    Ok(ReturnStats { mu, sigma })
}

impl ReturnStats {
    pub fn n_assets(&self) -> usize {
        self.mu.len()
    }

    /// Restriction of the statistics to the given asset indices.
    pub fn select(&self, indices: &[usize]) -> Result<ReturnStats> {
        for &i in indices {
            if i >= self.n_assets() {
                return Err(Error::Range(format!(
                    "asset index {i} out of range 0..{}",
                    self.n_assets()
                )));
            }
        }
        let mu = DVector::from_fn(indices.len(), |k, _| self.mu[indices[k]]);
        let sigma = DMatrix::from_fn(indices.len(), indices.len(), |a, b| {
            self.sigma[(indices[a], indices[b])]
        });
        Ok(ReturnStats { mu, sigma })
    }
}

fn uniform_in(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    // 53-bit uniform in [0, 1); stable across rand crate versions.
    let u = (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64);
    lo + (hi - lo) * u
}

/// Seeded geometric random-walk prices.
///
/// Each asset draws a log-drift from `drift_range` and a daily volatility
/// from `vol_range`, then follows `p[t+1] = p[t] * exp(drift + vol * z)`.
/// Identical seeds give identical matrices.
pub fn synth_prices(
    n_assets: usize,
    n_days: usize,
    seed: u64,
    drift_range: (f64, f64),
    vol_range: (f64, f64),
) -> Result<PriceMatrix> {
    if n_assets == 0 {
        return Err(Error::Range("n_assets must be positive".into()));
    }
    if n_days < 2 {
        return Err(Error::Range("n_days must be at least 2".into()));
    }
    if drift_range.0 > drift_range.1 || vol_range.0 > vol_range.1 {
        return Err(Error::Range("empty drift or vol range".into()));
    }
    if vol_range.0 < 0.0 {
        return Err(Error::Range("volatility cannot be negative".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut prices = DMatrix::zeros(n_days, n_assets);
    for i in 0..n_assets {
        let drift = uniform_in(&mut rng, drift_range.0, drift_range.1);
        let vol = uniform_in(&mut rng, vol_range.0, vol_range.1);
        let mut p = uniform_in(&mut rng, 20.0, 180.0);
        prices[(0, i)] = p;
        for t in 1..n_days {
            let z: f64 = StandardNormal.sample(&mut rng);
            p *= (drift + vol * z).exp();
            prices[(t, i)] = p;
        }
    }
    let start = NaiveDate::from_ymd_opt(2020, 1, 1).expect("valid date");
    let dates = (0..n_days)
        .map(|t| start + chrono::Duration::days(t as i64))
        .collect();
    let tickers = (0..n_assets).map(|i| format!("S{i:03}")).collect();
    PriceMatrix::new(dates, tickers, prices)
}

/// `n` distinct asset indices drawn uniformly without replacement,
/// returned in ascending order. Deterministic per seed.
pub fn select_subset(pm: &PriceMatrix, n: usize, seed: u64) -> Result<Vec<usize>> {
    let total = pm.n_assets();
    if n > total {
        return Err(Error::Range(format!(
            "cannot select {n} assets out of {total}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // Partial Fisher-Yates; owned here so the draw sequence never shifts
    // under rand crate upgrades.
    let mut pool: Vec<usize> = (0..total).collect();
    for k in 0..n {
        let j = k + (rng.next_u64() % (total - k) as u64) as usize;
        pool.swap(k, j);
    }
    let mut chosen = pool[..n].to_vec();
    chosen.sort_unstable();
    Ok(chosen)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn matrix_from_cols(cols: &[&[f64]]) -> DMatrix<f64> {
        let rows = cols[0].len();
        DMatrix::from_fn(rows, cols.len(), |r, c| cols[c][r])
    }

    #[test]
    fn parses_well_formed_file() {
        let text = "date,AA,BB\n2020-01-01,100,50\n2020-01-02,110,55\n2020-01-03,99,60\n";
        let pm = parse_wide_csv(text).unwrap();
        assert_eq!(pm.n_days(), 3);
        assert_eq!(pm.n_assets(), 2);
        assert_eq!(pm.tickers(), &["AA".to_string(), "BB".to_string()]);
        assert_eq!(pm.prices()[(2, 1)], 60.0);
    }

    #[test]
    fn rejects_zero_price_naming_row() {
        let text = "date,AA\n2020-01-01,100\n2020-01-02,0.0\n2020-01-03,99\n";
        let err = parse_wide_csv(text).unwrap_err();
        match err {
            Error::Validation(msg) => assert!(msg.contains('2'), "message was: {msg}"),
            other => panic!("expected Validation, got {other:?}"),
        }
    }

    #[test]
    fn rejects_missing_cell_naming_rows() {
        let text = "date,AA,BB\n2020-01-01,100,50\n2020-01-02,,55\n2020-01-03,99,\n";
        let err = parse_wide_csv(text).unwrap_err();
        match err {
            Error::Validation(msg) => {
                assert!(msg.contains("2, 3"), "message was: {msg}");
            }
            other => panic!("expected Validation, got {other:?}"),
        }
    }

    #[test]
    fn rejects_out_of_order_dates() {
        let text = "date,AA\n2020-01-02,100\n2020-01-01,110\n";
        assert!(matches!(
            parse_wide_csv(text),
            Err(Error::Validation(_))
        ));
    }

    #[test]
    fn rejects_malformed_cell_with_position() {
        let text = "date,AA\n2020-01-01,100\n2020-01-02,abc\n";
        match parse_wide_csv(text) {
            Err(Error::Parse { line, column, .. }) => {
                assert_eq!(line, 3);
                assert_eq!(column, 2);
            }
            other => panic!("expected Parse, got {other:?}"),
        }
    }

    #[test]
    fn returns_match_hand_evaluation() {
        let pm = PriceMatrix::new(
            vec![
                NaiveDate::from_ymd_opt(2020, 1, 1).unwrap(),
                NaiveDate::from_ymd_opt(2020, 1, 2).unwrap(),
                NaiveDate::from_ymd_opt(2020, 1, 3).unwrap(),
            ],
            vec!["A".into()],
            matrix_from_cols(&[&[100.0, 110.0, 99.0]]),
        )
        .unwrap();
        let r = compute_returns(&pm);
        assert_eq!(r.nrows(), 2);
        assert!((r[(0, 0)] - 0.10).abs() < 1e-15);
        assert!((r[(1, 0)] + 0.10).abs() < 1e-15);
    }

    #[test]
    fn constant_prices_give_zero_returns() {
        let pm = PriceMatrix::new(
            vec![
                NaiveDate::from_ymd_opt(2020, 1, 1).unwrap(),
                NaiveDate::from_ymd_opt(2020, 1, 2).unwrap(),
                NaiveDate::from_ymd_opt(2020, 1, 3).unwrap(),
            ],
            vec!["A".into()],
            matrix_from_cols(&[&[5.0, 5.0, 5.0]]),
        )
        .unwrap();
        let r = compute_returns(&pm);
        assert_eq!(r[(0, 0)], 0.0);
        assert_eq!(r[(1, 0)], 0.0);
    }

    #[test]
    fn two_rows_give_single_return() {
        let pm = PriceMatrix::new(
            vec![
                NaiveDate::from_ymd_opt(2020, 1, 1).unwrap(),
                NaiveDate::from_ymd_opt(2020, 1, 2).unwrap(),
            ],
            vec!["A".into()],
            matrix_from_cols(&[&[1.0, 2.0]]),
        )
        .unwrap();
        let r = compute_returns(&pm);
        assert_eq!(r.nrows(), 1);
        assert_eq!(r[(0, 0)], 1.0);
    }

    #[test]
    fn stats_use_unbiased_denominator() {
        let returns = matrix_from_cols(&[&[0.1, -0.1]]);
        let stats = compute_stats(&returns).unwrap();
        assert!(stats.mu[0].abs() < 1e-16);
        assert!((stats.sigma[(0, 0)] - 0.02).abs() < 1e-15);
    }

    #[test]
    fn identical_columns_fully_correlated() {
        let returns = matrix_from_cols(&[&[0.1, -0.2, 0.05], &[0.1, -0.2, 0.05]]);
        let stats = compute_stats(&returns).unwrap();
        assert!((stats.sigma[(0, 1)] - stats.sigma[(0, 0)]).abs() < 1e-15);
    }

    #[test]
    fn constant_column_has_zero_variance() {
        let returns = matrix_from_cols(&[&[0.03, 0.03, 0.03]]);
        let stats = compute_stats(&returns).unwrap();
        assert!(stats.sigma[(0, 0)].abs() < 1e-18);
    }

    #[test]
    fn stats_require_two_rows() {
        let returns = matrix_from_cols(&[&[0.1]]);
        assert!(matches!(compute_stats(&returns), Err(Error::Degenerate(_))));
    }

    #[test]
    fn synth_is_deterministic_per_seed() {
        let a = synth_prices(10, 45, 7, (-0.002, 0.005), (0.005, 0.03)).unwrap();
        let b = synth_prices(10, 45, 7, (-0.002, 0.005), (0.005, 0.03)).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.n_days(), 45);
        assert_eq!(a.n_assets(), 10);
        let c = synth_prices(10, 45, 8, (-0.002, 0.005), (0.005, 0.03)).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn synth_zero_ranges_give_constant_prices() {
        let pm = synth_prices(3, 5, 1, (0.0, 0.0), (0.0, 0.0)).unwrap();
        for i in 0..3 {
            for t in 1..5 {
                assert!((pm.prices()[(t, i)] - pm.prices()[(0, i)]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn subset_selection_is_deterministic_and_in_range() {
        let pm = synth_prices(500, 3, 1, (0.0, 0.0), (0.01, 0.01)).unwrap();
        let a = select_subset(&pm, 4, 42).unwrap();
        let b = select_subset(&pm, 4, 42).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 4);
        assert!(a.windows(2).all(|w| w[0] < w[1]));
        assert!(a.iter().all(|&i| i < 500));
    }

    #[test]
    fn full_subset_is_all_indices() {
        let pm = synth_prices(6, 3, 1, (0.0, 0.0), (0.01, 0.01)).unwrap();
        let s = select_subset(&pm, 6, 9).unwrap();
        assert_eq!(s, vec![0, 1, 2, 3, 4, 5]);
    }

    #[test]
    fn oversized_subset_is_range_error() {
        let pm = synth_prices(4, 3, 1, (0.0, 0.0), (0.01, 0.01)).unwrap();
        assert!(matches!(select_subset(&pm, 5, 0), Err(Error::Range(_))));
    }

    #[test]
    fn csv_round_trip_is_identity() {
        let pm = synth_prices(5, 12, 3, (-0.01, 0.01), (0.0, 0.05)).unwrap();
        let back = parse_wide_csv(&pm.to_csv()).unwrap();
        assert_eq!(pm, back);
    }

    #[test]
    fn price_rescaling_leaves_stats_unchanged() {
        let pm = synth_prices(3, 30, 11, (-0.01, 0.01), (0.01, 0.04)).unwrap();
        let mut scaled = pm.prices().clone();
        for t in 0..scaled.nrows() {
            scaled[(t, 1)] *= 17.5;
        }
        let pm2 = PriceMatrix::new(pm.dates().to_vec(), pm.tickers().to_vec(), scaled).unwrap();
        let s1 = compute_stats(&compute_returns(&pm)).unwrap();
        let s2 = compute_stats(&compute_returns(&pm2)).unwrap();
        for i in 0..3 {
            assert!((s1.mu[i] - s2.mu[i]).abs() < 1e-12);
            for j in 0..3 {
                assert!((s1.sigma[(i, j)] - s2.sigma[(i, j)]).abs() < 1e-12);
            }
        }
    }
}
