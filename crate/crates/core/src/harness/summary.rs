//! Grouped bootstrap summaries of run records.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::{bootstrap_median, median, BootstrapSummary};

use super::config::ModelKind;
use super::records::RunRecord;

/// One summary row: a (size, model, gibbs depth) group or a baseline row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub n: usize,
    /// "qcbm", "rbm", or "uniform" for the no-training baseline.
    pub model: String,
    pub k_gibbs: Option<usize>,
    /// Scenario count feeding the bootstrap (group size).
    pub scenarios: usize,
    /// Raw record count behind the row.
    pub records: usize,
    pub stats: BootstrapSummary,
}

type GroupKey = (usize, ModelKind, Option<usize>);

/// Per-scenario medians over repetitions, grouped by (n, model, k).
fn scenario_medians(records: &[RunRecord]) -> BTreeMap<GroupKey, BTreeMap<String, Vec<f64>>> {
    let mut groups: BTreeMap<_, BTreeMap<String, Vec<f64>>> = BTreeMap::new();
    for r in records {
        groups
            .entry((r.scenario.n, r.model, r.k_gibbs))
            .or_default()
            .entry(r.scenario.id.clone())
            .or_default()
            .push(r.final_kl);
    }
    groups
}

/// Summarize: per scenario the median over repetitions, then a bootstrap of
/// those medians per (n, model, k) group, plus one uniform-baseline row per
/// problem size.
pub fn summarize(records: &[RunRecord], resamples: usize, seed: u64) -> Result<Vec<SummaryRow>> {
    if records.is_empty() {
        return Err(Error::Empty("no records to summarize".into()));
    }
    let mut rows = Vec::new();
    for ((n, model, k), per_scenario) in scenario_medians(records) {
        let medians: Vec<f64> = per_scenario.values().map(|v| median(v)).collect();
        let record_count: usize = per_scenario.values().map(Vec::len).sum();
        let stats = bootstrap_median(&medians, resamples, seed)?;
        rows.push(SummaryRow {
            n,
            model: model.to_string(),
            k_gibbs: k,
            scenarios: medians.len(),
            records: record_count,
            stats,
        });
    }

    // Baseline rows: one uniform_baseline value per scenario.
    let mut baselines: BTreeMap<usize, BTreeMap<String, f64>> = BTreeMap::new();
    for r in records {
        baselines
            .entry(r.scenario.n)
            .or_default()
            .insert(r.scenario.id.clone(), r.scenario.uniform_baseline);
    }
    for (n, per_scenario) in baselines {
        let values: Vec<f64> = per_scenario.values().cloned().collect();
        let stats = bootstrap_median(&values, resamples, seed)?;
        rows.push(SummaryRow {
            n,
            model: "uniform".into(),
            k_gibbs: None,
            scenarios: values.len(),
            records: values.len(),
            stats,
        });
    }
    rows.sort_by(|a, b| {
        (a.n, &a.model, a.k_gibbs)
            .partial_cmp(&(b.n, &b.model, b.k_gibbs))
            .expect("total order")
    });
    Ok(rows)
}

/// Directional comparison of the scaling claim: per problem size, the
/// bootstrapped QCBM median against the RBM median (at the smallest Gibbs
/// depth present), plus the uniform-baseline gap trend. When a comparison
/// fails, `flags` names it and `scatter` carries the per-scenario median
/// pairs so the report can show the case-by-case picture.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingReport {
    pub rows: Vec<SummaryRow>,
    /// One line per violated comparison; empty when the direction holds.
    pub flags: Vec<String>,
    /// Per size: (scenario id, rbm median, qcbm median) for every scenario
    /// with both models present.
    pub scatter: BTreeMap<usize, Vec<(String, f64, f64)>>,
    pub directional_holds: bool,
}

/// Evaluate the qualitative scaling claim on a set of records.
pub fn scaling_report(records: &[RunRecord], resamples: usize, seed: u64) -> Result<ScalingReport> {
    let rows = summarize(records, resamples, seed)?;
    let median_of = |n: usize, model: &str| -> Option<f64> {
        rows.iter()
            .filter(|r| r.n == n && r.model == model)
            .map(|r| r.stats.median)
            .next()
    };
    let sizes: Vec<usize> = {
        let mut s: Vec<usize> = rows.iter().map(|r| r.n).collect();
        s.sort_unstable();
        s.dedup();
        s
    };

    let mut flags = Vec::new();
    for &n in &sizes {
        if let (Some(q), Some(r)) = (median_of(n, "qcbm"), median_of(n, "rbm")) {
            if q > r {
                flags.push(format!(
                    "n={n}: qcbm median {q:.6} above rbm median {r:.6}"
                ));
            }
        }
    }
    let gaps: Vec<(usize, f64)> = sizes
        .iter()
        .filter(|&&n| n >= 6)
        .filter_map(|&n| {
            match (median_of(n, "uniform"), median_of(n, "rbm")) {
                (Some(u), Some(r)) => Some((n, u - r)),
                _ => None,
            }
        })
        .collect();
    for pair in gaps.windows(2) {
        if pair[1].1 > pair[0].1 {
            flags.push(format!(
                "uniform-rbm gap grew from n={} ({:.6}) to n={} ({:.6})",
                pair[0].0, pair[0].1, pair[1].0, pair[1].1
            ));
        }
    }

    let mut pairs: BTreeMap<(usize, String), (Vec<f64>, Vec<f64>)> = BTreeMap::new();
    for r in records {
        let entry = pairs
            .entry((r.scenario.n, r.scenario.id.clone()))
            .or_default();
        match r.model {
            ModelKind::Rbm => entry.0.push(r.final_kl),
            ModelKind::Qcbm => entry.1.push(r.final_kl),
        }
    }
    let mut scatter: BTreeMap<usize, Vec<(String, f64, f64)>> = BTreeMap::new();
    for ((n, id), (rbm, qcbm)) in pairs {
        if !rbm.is_empty() && !qcbm.is_empty() {
            scatter
                .entry(n)
                .or_default()
                .push((id, median(&rbm), median(&qcbm)));
        }
    }

    Ok(ScalingReport {
        rows,
        directional_holds: flags.is_empty(),
        flags,
        scatter,
    })
}

/// Aligned text table of the summary rows.
pub fn render_table(rows: &[SummaryRow]) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:>3}  {:<8} {:>7}  {:>9}  {:>8}  {:>12}  {:>12}  {:>12}",
        "n", "model", "k_gibbs", "scenarios", "records", "median", "p5", "p95"
    );
    for r in rows {
        let k = r.k_gibbs.map_or_else(|| "-".into(), |k| k.to_string());
        let _ = writeln!(
            out,
            "{:>3}  {:<8} {:>7}  {:>9}  {:>8}  {:>12.6}  {:>12.6}  {:>12.6}",
            r.n, r.model, k, r.scenarios, r.records, r.stats.median, r.stats.p5, r.stats.p95
        );
    }
    out
}

/// CSV form of the summary rows; header documents the columns.
pub fn to_csv(rows: &[SummaryRow]) -> String {
    let mut out = String::from("n,model,k_gibbs,scenarios,records,median,p5,p95,resamples\n");
    for r in rows {
        let k = r.k_gibbs.map_or_else(String::new, |k| k.to_string());
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            r.n,
            r.model,
            k,
            r.scenarios,
            r.records,
            r.stats.median,
            r.stats.p5,
            r.stats.p95,
            r.stats.resamples
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::records::params_hash;
    use crate::harness::scenario::ScenarioInfo;

    fn record(n: usize, id: &str, model: ModelKind, k: Option<usize>, rep: usize, kl: f64) -> RunRecord {
        RunRecord {
            scenario: ScenarioInfo {
                id: id.into(),
                n,
                kappa: n / 2,
                rho: 0.002,
                subset: (0..n).collect(),
                subset_seed: 1,
                temperature: 0.01,
                uniform_baseline: 1.5,
            },
            model,
            k_gibbs: k,
            repetition: rep,
            seed: 0,
            final_kl: kl,
            wall_ms: 1,
            history: vec![],
            params: vec![0.0],
            params_sha256: params_hash(&[0.0]),
        }
    }

    #[test]
    fn constant_records_give_constant_summary() {
        let mut records = Vec::new();
        for rep in 0..3 {
            records.push(record(4, "s1", ModelKind::Qcbm, None, rep, 0.25));
            records.push(record(4, "s2", ModelKind::Qcbm, None, rep, 0.25));
        }
        let rows = summarize(&records, 500, 1).unwrap();
        let qcbm_row = rows.iter().find(|r| r.model == "qcbm").unwrap();
        assert_eq!(qcbm_row.stats.median, 0.25);
        assert_eq!(qcbm_row.stats.p5, 0.25);
        assert_eq!(qcbm_row.stats.p95, 0.25);
        assert_eq!(qcbm_row.scenarios, 2);
        assert_eq!(qcbm_row.records, 6);
        // Plus the baseline row.
        let base = rows.iter().find(|r| r.model == "uniform").unwrap();
        assert_eq!(base.stats.median, 1.5);
    }

    #[test]
    fn k_sweep_yields_one_row_per_depth() {
        let mut records = Vec::new();
        for &k in &[1usize, 10, 100] {
            for rep in 0..2 {
                records.push(record(4, "s1", ModelKind::Rbm, Some(k), rep, 0.1 * k as f64));
            }
        }
        let rows = summarize(&records, 200, 3).unwrap();
        let rbm_rows: Vec<_> = rows.iter().filter(|r| r.model == "rbm").collect();
        assert_eq!(rbm_rows.len(), 3);
        assert_eq!(rbm_rows[0].k_gibbs, Some(1));
        assert_eq!(rbm_rows[2].k_gibbs, Some(100));
    }

    #[test]
    fn empty_records_error() {
        assert!(matches!(summarize(&[], 100, 0), Err(Error::Empty(_))));
    }

    #[test]
    fn csv_has_documented_header() {
        let records = vec![record(4, "s1", ModelKind::Qcbm, None, 0, 0.5)];
        let rows = summarize(&records, 100, 0).unwrap();
        let csv = to_csv(&rows);
        assert!(csv.starts_with("n,model,k_gibbs,"));
        assert_eq!(csv.lines().count(), 1 + rows.len());
    }
}
