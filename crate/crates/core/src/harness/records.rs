//! Run records and their line-delimited JSON persistence.

use std::collections::BTreeSet;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::Result;

use super::config::ModelKind;
use super::scenario::ScenarioInfo;

/// One trained-model outcome. `wall_ms` is the only field allowed to differ
/// between identically-configured runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub scenario: ScenarioInfo,
    pub model: ModelKind,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub k_gibbs: Option<usize>,
    pub repetition: usize,
    pub seed: u64,
    pub final_kl: f64,
    pub wall_ms: u64,
    /// Training trace as (step, best loss, median loss) triples; for the RBM
    /// both loss entries carry the epoch-end divergence.
    pub history: Vec<(usize, f64, f64)>,
    /// Final trained parameters, flat layout fixed per model.
    pub params: Vec<f64>,
    pub params_sha256: String,
}

/// Resumability key: one record per (scenario, model, gibbs depth, repetition).
pub type RunKey = (String, ModelKind, Option<usize>, usize);

impl RunRecord {
    pub fn key(&self) -> RunKey {
        (
            self.scenario.id.clone(),
            self.model,
            self.k_gibbs,
            self.repetition,
        )
    }
}

/// Hex SHA-256 of a flat parameter vector, hashing the exact float bits.
pub fn params_hash(params: &[f64]) -> String {
    let mut hasher = Sha256::new();
    for p in params {
        hasher.update(p.to_le_bytes());
    }
    let digest = hasher.finalize();
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

/// Thin a trace to at most `cap` points, always keeping the last one.
pub fn thin_trace(trace: &[(usize, f64, f64)], cap: usize) -> Vec<(usize, f64, f64)> {
    if cap == 0 || trace.len() <= cap {
        return trace.to_vec();
    }
    let stride = trace.len().div_ceil(cap);
    let mut out: Vec<_> = trace.iter().step_by(stride).cloned().collect();
    if out.last() != trace.last() {
        out.push(*trace.last().expect("non-empty"));
    }
    out
}

/// Append one record as a JSON line, flushing so interrupted runs resume.
pub fn append_record(file: &mut std::fs::File, record: &RunRecord) -> Result<()> {
    let line = serde_json::to_string(record)?;
    writeln!(file, "{line}")?;
    file.flush()?;
    Ok(())
}

/// Load all records from a results file; missing file means no records.
pub fn load_records(path: &Path) -> Result<Vec<RunRecord>> {
    if !path.exists() {
        return Ok(Vec::new());
    }
    let text = std::fs::read_to_string(path)?;
    let mut records = Vec::new();
    for line in text.lines() {
        if line.trim().is_empty() {
            continue;
        }
        records.push(serde_json::from_str(line)?);
    }
    Ok(records)
}

/// Keys already present in a results file.
pub fn existing_keys(records: &[RunRecord]) -> BTreeSet<RunKey> {
    records.iter().map(RunRecord::key).collect()
}

/// Canonical record order for comparisons and summaries.
pub fn sort_records(records: &mut [RunRecord]) {
    records.sort_by_key(RunRecord::key);
}
