//! Plot-ready CSV emission: scaling curves, per-size scatter pairs, and
//! per-scenario target bars. Column layouts are documented in a README
//! written next to the files.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::frontier::format_bitstring;
use crate::metrics::median;

use super::config::ModelKind;
use super::records::RunRecord;
use super::scenario::Scenario;
use super::summary::{summarize, SummaryRow};

const PLOTS_README: &str = "\
# Plot data files

## scaling.csv
One row per (n, model, k_gibbs) group and one `uniform` baseline row per n.
Columns: n, model, k_gibbs (empty for qcbm/uniform), scenarios, records,
median, p5, p95. The median is the bootstrapped median of per-scenario
medians; p5/p95 are its nearest-rank 5th/95th percentiles (90% interval).

## scatter_n<N>_k<K>.csv
One row per scenario with both models present: scenario_id, rho, kl_rbm,
kl_qcbm, where each kl is the scenario's median over repetitions (RBM at
Gibbs depth K). Plot kl_rbm on the x axis and kl_qcbm on the y axis with the
identity line y = x as reference: points below the line are scenarios where
the QCBM scored a lower divergence than the RBM.

## target_<scenario_id>.csv
Bar data for one target distribution: index, bitstring, probability, one row
per basis state (2^n rows).
";

/// Emitted file set plus warnings for groups that had no data.
#[derive(Debug, Default)]
pub struct PlotOutput {
    pub files: Vec<String>,
    pub warnings: Vec<String>,
}

/// Write scaling, scatter, and target-bar CSVs into `out_dir`.
pub fn emit_plots(
    records: &[RunRecord],
    targets: &[Scenario],
    resamples: usize,
    seed: u64,
    out_dir: &Path,
) -> Result<PlotOutput> {
    if records.is_empty() {
        return Err(Error::Empty("no records to plot".into()));
    }
    std::fs::create_dir_all(out_dir)?;
    let mut out = PlotOutput::default();

    let rows = summarize(records, resamples, seed)?;
    write_scaling(&rows, out_dir, &mut out)?;
    write_scatter(records, out_dir, &mut out)?;
    write_targets(targets, out_dir, &mut out)?;

    std::fs::write(out_dir.join("plots_README.md"), PLOTS_README)?;
    out.files.push("plots_README.md".into());
    Ok(out)
}

fn write_scaling(rows: &[SummaryRow], out_dir: &Path, out: &mut PlotOutput) -> Result<()> {
    let mut csv = String::from("n,model,k_gibbs,scenarios,records,median,p5,p95\n");
    for r in rows {
        let k = r.k_gibbs.map_or_else(String::new, |k| k.to_string());
        let _ = writeln!(
            csv,
            "{},{},{},{},{},{},{},{}",
            r.n, r.model, k, r.scenarios, r.records, r.stats.median, r.stats.p5, r.stats.p95
        );
    }
    std::fs::write(out_dir.join("scaling.csv"), csv)?;
    out.files.push("scaling.csv".into());
    Ok(())
}

fn write_scatter(records: &[RunRecord], out_dir: &Path, out: &mut PlotOutput) -> Result<()> {
    // scenario medians per (n, id): qcbm and rbm-per-k.
    let mut qcbm: BTreeMap<(usize, String), Vec<f64>> = BTreeMap::new();
    let mut rbm: BTreeMap<(usize, usize, String), Vec<f64>> = BTreeMap::new();
    let mut rho: BTreeMap<String, f64> = BTreeMap::new();
    let mut sizes: std::collections::BTreeSet<usize> = Default::default();
    let mut depths: std::collections::BTreeSet<usize> = Default::default();
    for r in records {
        sizes.insert(r.scenario.n);
        rho.insert(r.scenario.id.clone(), r.scenario.rho);
        match r.model {
            ModelKind::Qcbm => qcbm
                .entry((r.scenario.n, r.scenario.id.clone()))
                .or_default()
                .push(r.final_kl),
            ModelKind::Rbm => {
                let k = r.k_gibbs.unwrap_or(1);
                depths.insert(k);
                rbm.entry((r.scenario.n, k, r.scenario.id.clone()))
                    .or_default()
                    .push(r.final_kl);
            }
        }
    }

    for &n in &sizes {
        for &k in &depths {
            let mut csv = String::from("scenario_id,rho,kl_rbm,kl_qcbm\n");
            let mut count = 0;
            for ((rn, id), q_vals) in &qcbm {
                if *rn != n {
                    continue;
                }
                if let Some(r_vals) = rbm.get(&(n, k, id.clone())) {
                    let _ = writeln!(
                        csv,
                        "{},{},{},{}",
                        id,
                        rho.get(id).copied().unwrap_or(f64::NAN),
                        median(r_vals),
                        median(q_vals)
                    );
                    count += 1;
                }
            }
            if count == 0 {
                out.warnings
                    .push(format!("no paired scenarios for n={n}, k_gibbs={k}; scatter omitted"));
                continue;
            }
            let name = format!("scatter_n{n}_k{k}.csv");
            std::fs::write(out_dir.join(&name), csv)?;
            out.files.push(name);
        }
        if depths.is_empty() {
            out.warnings
                .push(format!("no rbm records for n={n}; scatter omitted"));
        }
    }
    Ok(())
}

fn write_targets(targets: &[Scenario], out_dir: &Path, out: &mut PlotOutput) -> Result<()> {
    for scenario in targets {
        let td = &scenario.target;
        let mut csv = String::from("index,bitstring,probability\n");
        for (idx, &p) in td.probs.iter().enumerate() {
            let _ = writeln!(
                csv,
                "{},{},{}",
                idx,
                format_bitstring(idx as u32, td.n),
                p
            );
        }
        let name = format!("target_{}.csv", scenario.info.id);
        std::fs::write(out_dir.join(&name), csv)?;
        out.files.push(name);
    }
    Ok(())
}
