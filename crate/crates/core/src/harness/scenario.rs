//! Scenario generation: one target distribution per (size, subset, return
//! level) cell of the benchmark grid.

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::frontier::{self, TargetDistribution};
use crate::market_data::{self, PriceMatrix};
use crate::metrics;

use super::config::BenchConfig;

/// Identifying data of one benchmark scenario.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ScenarioInfo {
    pub id: String,
    pub n: usize,
    pub kappa: usize,
    pub rho: f64,
    /// Asset column indices in the source price matrix, ascending.
    pub subset: Vec<usize>,
    pub subset_seed: u64,
    pub temperature: f64,
    pub uniform_baseline: f64,
}

/// A scenario with its target distribution.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub info: ScenarioInfo,
    pub target: TargetDistribution,
}

/// Output of scenario generation: the feasible scenarios plus one diagnostic
/// line per skipped (all-subsets-infeasible) grid cell.
#[derive(Debug, Clone, Default)]
pub struct ScenarioSet {
    pub scenarios: Vec<Scenario>,
    pub skipped: Vec<String>,
}

/// Stable 64-bit stream seed derived from the master seed and a context key.
pub fn derive_seed(master: u64, parts: &[&str]) -> u64 {
    let mut hasher = Sha256::new();
    hasher.update(master.to_le_bytes());
    for p in parts {
        hasher.update([0u8]);
        hasher.update(p.as_bytes());
    }
    let digest = hasher.finalize();
    u64::from_le_bytes(digest[..8].try_into().expect("8 bytes"))
}

/// Content hash of the price data, so scenario ids change when the data does.
pub fn data_hash(pm: &PriceMatrix) -> String {
    let digest = Sha256::digest(pm.to_csv().as_bytes());
    hex_prefix(&digest, 16)
}

fn hex_prefix(bytes: &[u8], chars: usize) -> String {
    let mut s = String::with_capacity(chars);
    for b in bytes {
        use std::fmt::Write;
        let _ = write!(s, "{b:02x}");
        if s.len() >= chars {
            break;
        }
    }
    s.truncate(chars);
    s
}

/// Stable content id of a scenario.
pub fn scenario_id(n: usize, kappa: usize, rho: f64, subset: &[usize], data_hash: &str) -> String {
    let subset_key = subset
        .iter()
        .map(|i| i.to_string())
        .collect::<Vec<_>>()
        .join(",");
    let key = format!("n={n};kappa={kappa};rho={rho};subset={subset_key};data={data_hash}");
    let digest = Sha256::digest(key.as_bytes());
    hex_prefix(&digest, 16)
}

/// Build every scenario on the configured grid. Cells where all subsets are
/// infeasible at the requested return level are skipped with a diagnostic;
/// any other failure aborts.
pub fn generate_scenarios(cfg: &BenchConfig, pm: &PriceMatrix) -> Result<ScenarioSet> {
    cfg.validate()?;
    let max_n = *cfg.sizes.iter().max().expect("non-empty sizes");
    if pm.n_assets() < max_n {
        return Err(Error::Config(format!(
            "price data has {} assets but sizes require {max_n}",
            pm.n_assets()
        )));
    }
    let levels = cfg.return_levels.resolve()?;
    let stats_full = market_data::compute_stats(&market_data::compute_returns(pm))?;
    let dhash = data_hash(pm);

    let mut out = ScenarioSet::default();
    for &n in &cfg.sizes {
        let kappa = cfg.kappa.resolve(n)?;
        for s_idx in 0..cfg.subsets_per_size {
            let subset_seed = derive_seed(
                cfg.seed,
                &["subset", &n.to_string(), &s_idx.to_string()],
            );
            let subset = market_data::select_subset(pm, n, subset_seed)?;
            let sub_stats = stats_full.select(&subset)?;
            for &rho in &levels {
                match frontier::build_target(&sub_stats, kappa, rho, cfg.bounds) {
                    Ok(target) => {
                        let id = scenario_id(n, kappa, rho, &subset, &dhash);
                        let baseline = metrics::uniform_baseline(&target);
                        out.scenarios.push(Scenario {
                            info: ScenarioInfo {
                                id,
                                n,
                                kappa,
                                rho,
                                subset: subset.clone(),
                                subset_seed,
                                temperature: target.temperature,
                                uniform_baseline: baseline,
                            },
                            target,
                        });
                    }
                    Err(Error::NoFeasibleSubset(msg)) => {
                        out.skipped.push(format!(
                            "skipped n={n} kappa={kappa} rho={rho} subset#{s_idx}: {msg}"
                        ));
                    }
                    Err(other) => return Err(other),
                }
            }
        }
    }
    Ok(out)
}
