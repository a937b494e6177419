//! Benchmark execution: every scenario x model x repetition trained, scored,
//! and persisted. Jobs are independent and run on a bounded worker pool; the
//! results file is appended under a lock. Reruns skip records already
//! present, so interrupted benchmarks resume.

use std::path::Path;
use std::sync::Mutex;
use std::time::Instant;

use rayon::prelude::*;

use crate::error::Result;
use crate::frontier::TargetDistribution;
use crate::metrics::kl_divergence;
use crate::optimizer;
use crate::qcbm;
use crate::rbm::{self, TrainConfig, TrainData};

use super::config::{BenchConfig, ModelKind};
use super::records::{
    append_record, existing_keys, load_records, params_hash, sort_records, thin_trace, RunRecord,
};
use super::scenario::{derive_seed, generate_scenarios, Scenario};

/// Result of one `run` invocation.
#[derive(Debug)]
pub struct BenchOutcome {
    /// All records on disk after the run, canonically sorted.
    pub records: Vec<RunRecord>,
    pub new_records: usize,
    pub skipped_scenarios: Vec<String>,
    pub failures: Vec<String>,
}

#[derive(Clone)]
struct Job {
    scenario: Scenario,
    model: ModelKind,
    k_gibbs: Option<usize>,
    repetition: usize,
}

impl Job {
    fn seed(&self, master: u64) -> u64 {
        derive_seed(
            master,
            &[
                "run",
                &self.scenario.info.id,
                &self.model.to_string(),
                &self.k_gibbs.map_or_else(|| "-".into(), |k| k.to_string()),
                &self.repetition.to_string(),
            ],
        )
    }
}

/// Train a QCBM against the target by CMA-ES over the clipped divergence.
pub fn train_qcbm(
    target: &TargetDistribution,
    budget: Option<usize>,
    init_step: f64,
    eps: f64,
    seed: u64,
) -> Result<optimizer::OptResult> {
    let n = target.n;
    let d = qcbm::param_count(n);
    let budget = budget.unwrap_or(20 * d * d);
    let probs = target.probs.clone();
    let loss = move |flat: &[f64]| -> f64 {
        let model = qcbm::born_probs_flat(n, flat).expect("flat length fixed by d");
        kl_divergence(&probs, &model, eps).expect("lengths match")
    };
    optimizer::minimize(loss, d, budget, seed, &vec![0.0; d], init_step)
}

/// Per-epoch divergence trace entries as stored in run records.
pub type Trace = Vec<(usize, f64, f64)>;

/// Train an RBM against the target by PCD-k and score it with the exact
/// visible marginal. Returns the final parameters, per-epoch divergence
/// trace, and final divergence.
pub fn train_rbm(
    target: &TargetDistribution,
    cfg: &BenchConfig,
    k_gibbs: usize,
    seed: u64,
) -> Result<(rbm::RbmParams, Trace, f64)> {
    let n_v = target.n;
    let n_h = cfg.kappa.resolve(n_v)?;
    let tc = TrainConfig {
        k_gibbs,
        learning_rate: cfg.rbm.learning_rate,
        batch_size: cfg.rbm.batch_size,
        epochs: cfg.rbm.epochs,
        n_chains: cfg.rbm.n_chains,
        seed,
    };
    let data = if cfg.rbm.exact_expectations {
        TrainData::Exact(target.probs.clone())
    } else {
        let sample_seed = derive_seed(seed, &["train-samples"]);
        TrainData::Samples(rbm::sample_visible_from(
            &target.probs,
            n_v,
            cfg.rbm.train_samples,
            sample_seed,
        ))
    };
    let eps = cfg.eps;
    let mut trace = Vec::with_capacity(tc.epochs);
    let params = rbm::train_pcd_with(&data, &tc, n_v, n_h, |epoch, p| {
        if let Ok(probs) = rbm::exact_visible_probs(p) {
            if let Ok(kl) = kl_divergence(&target.probs, &probs, eps) {
                trace.push((epoch + 1, kl, kl));
            }
        }
    })?;
    let probs = rbm::exact_visible_probs(&params)?;
    let final_kl = kl_divergence(&target.probs, &probs, eps)?;
    Ok((params, trace, final_kl))
}

fn execute_job(cfg: &BenchConfig, job: &Job) -> Result<RunRecord> {
    let seed = job.seed(cfg.seed);
    let start = Instant::now();
    let (final_kl, history, params) = match job.model {
        ModelKind::Qcbm => {
            let r = train_qcbm(
                &job.scenario.target,
                cfg.qcbm.budget,
                cfg.qcbm.init_step,
                cfg.eps,
                seed,
            )?;
            let trace: Vec<(usize, f64, f64)> = r
                .history
                .iter()
                .map(|g| (g.generation, g.best, g.median))
                .collect();
            (r.best_loss, trace, r.best_params)
        }
        ModelKind::Rbm => {
            let k = job.k_gibbs.expect("rbm jobs carry a gibbs depth");
            let (params, trace, final_kl) = train_rbm(&job.scenario.target, cfg, k, seed)?;
            (final_kl, trace, params.to_flat())
        }
    };
    Ok(RunRecord {
        scenario: job.scenario.info.clone(),
        model: job.model,
        k_gibbs: job.k_gibbs,
        repetition: job.repetition,
        seed,
        final_kl,
        wall_ms: start.elapsed().as_millis() as u64,
        history: thin_trace(&history, cfg.trace_points),
        params_sha256: params_hash(&params),
        params,
    })
}

/// Run the configured benchmark, appending records to `results_path`.
pub fn run_benchmark(cfg: &BenchConfig, results_path: &Path) -> Result<BenchOutcome> {
    cfg.validate()?;
    let pm = cfg.data.load()?;
    let set = generate_scenarios(cfg, &pm)?;

    let existing = load_records(results_path)?;
    let have = existing_keys(&existing);

    let mut jobs = Vec::new();
    for scenario in &set.scenarios {
        for &model in &cfg.models {
            let k_values: Vec<Option<usize>> = match model {
                ModelKind::Qcbm => vec![None],
                ModelKind::Rbm => cfg.k_gibbs.iter().map(|&k| Some(k)).collect(),
            };
            for k_gibbs in k_values {
                for repetition in 0..cfg.repetitions {
                    let key = (scenario.info.id.clone(), model, k_gibbs, repetition);
                    if have.contains(&key) {
                        continue;
                    }
                    jobs.push(Job {
                        scenario: scenario.clone(),
                        model,
                        k_gibbs,
                        repetition,
                    });
                }
            }
        }
    }

    if let Some(parent) = results_path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)?;
        }
    }
    let file = std::fs::OpenOptions::new()
        .create(true)
        .append(true)
        .open(results_path)?;
    let sink = Mutex::new(file);
    let failures = Mutex::new(Vec::new());
    let fresh = Mutex::new(Vec::new());

    jobs.par_iter().for_each(|job| {
        match execute_job(cfg, job) {
            Ok(record) => {
                let mut file = sink.lock().expect("results lock");
                if let Err(e) = append_record(&mut file, &record) {
                    failures
                        .lock()
                        .expect("failure lock")
                        .push(format!("persisting {:?}: {e}", record.key()));
                } else {
                    fresh.lock().expect("records lock").push(record);
                }
            }
            Err(e) => {
                failures.lock().expect("failure lock").push(format!(
                    "{} {} k={:?} rep={}: {e}",
                    job.scenario.info.id, job.model, job.k_gibbs, job.repetition
                ));
            }
        }
    });

    let fresh = fresh.into_inner().expect("records lock");
    let new_records = fresh.len();
    let mut records = existing;
    records.extend(fresh);
    sort_records(&mut records);
    Ok(BenchOutcome {
        records,
        new_records,
        skipped_scenarios: set.skipped,
        failures: failures.into_inner().expect("failure lock"),
    })
}

/// Records with wall time zeroed, for determinism comparisons.
pub fn strip_wall_time(records: &[RunRecord]) -> Vec<RunRecord> {
    records
        .iter()
        .map(|r| {
            let mut r = r.clone();
            r.wall_ms = 0;
            r
        })
        .collect()
}
