//! Benchmark CLI: ingest or synthesize price data, emit target
//! distributions, run the model comparison, and summarize results.
//!
//! Exit codes: 0 success, 1 configuration error, 2 data error, 3 run
//! completed with partial failures.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use bornbench_core::error::Error;
use bornbench_core::harness::{
    self, config::QcbmConfig, config::RbmConfig, BenchConfig, DataConfig, KappaRule, ModelKind,
    ReturnLevels,
};
use bornbench_core::market_data;

#[derive(Parser)]
#[command(name = "bornbench", version, about = "Portfolio-derived generative-model benchmark")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Validate a wide-CSV price file and optionally rewrite it.
    Ingest {
        /// Input price CSV (header: date,<T1>,<T2>,...).
        #[arg(long)]
        input: PathBuf,
        /// Rewrite the validated data here (round-trip format).
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Generate synthetic geometric random-walk prices.
    Synth {
        #[arg(long, default_value_t = 60)]
        assets: usize,
        #[arg(long, default_value_t = 45)]
        days: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value_t = -0.002)]
        drift_lo: f64,
        #[arg(long, default_value_t = 0.005)]
        drift_hi: f64,
        #[arg(long, default_value_t = 0.005)]
        vol_lo: f64,
        #[arg(long, default_value_t = 0.03)]
        vol_hi: f64,
        /// Output CSV path.
        #[arg(long)]
        output: PathBuf,
    },
    /// Build target distributions and write one .target.json per scenario.
    Targets {
        #[command(flatten)]
        config: ConfigArgs,
        /// Directory for the .target.json files.
        #[arg(long, default_value = "targets")]
        out_dir: PathBuf,
    },
    /// Execute the benchmark, appending run records to the results file.
    Run {
        #[command(flatten)]
        config: ConfigArgs,
        /// Directory for results.jsonl.
        #[arg(long, default_value = "results")]
        out_dir: PathBuf,
    },
    /// Bootstrap summaries of a results file.
    Summarize {
        /// Results file written by `run`.
        #[arg(long)]
        records: PathBuf,
        #[arg(long, default_value_t = 10_000)]
        resamples: usize,
        /// Seed of the bootstrap resampler.
        #[arg(long, default_value_t = 0)]
        bootstrap_seed: u64,
        /// Write the summary table CSV here as well.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Emit plot-ready CSV files (scaling, scatter, target bars).
    PlotData {
        #[command(flatten)]
        config: ConfigArgs,
        /// Results file written by `run`.
        #[arg(long)]
        records: PathBuf,
        #[arg(long, default_value = "plots")]
        out_dir: PathBuf,
    },
}

/// Benchmark configuration: a TOML file plus per-field flag overrides.
#[derive(Args)]
struct ConfigArgs {
    /// TOML config file; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Problem sizes, comma separated (e.g. 4,6,8,10).
    #[arg(long, value_delimiter = ',')]
    sizes: Option<Vec<usize>>,
    /// Cardinality rule: "half" or a fixed integer.
    #[arg(long)]
    kappa: Option<String>,
    /// Return levels: "preset-a", "preset-b", or comma-separated values.
    #[arg(long)]
    levels: Option<String>,
    #[arg(long)]
    subsets_per_size: Option<usize>,
    #[arg(long)]
    repetitions: Option<usize>,
    /// Models to run, comma separated (qcbm,rbm).
    #[arg(long, value_delimiter = ',')]
    models: Option<Vec<String>>,
    /// Gibbs depths for the RBM, comma separated (e.g. 1,10,100).
    #[arg(long, value_delimiter = ',')]
    k_gibbs: Option<Vec<usize>>,
    /// Appendix preset: shorthand for --k-gibbs 1,10,100.
    #[arg(long, default_value_t = false)]
    k_sweep: bool,
    /// Divergence clip.
    #[arg(long)]
    eps: Option<f64>,
    /// Input price CSV; mutually exclusive with synthetic flags.
    #[arg(long)]
    csv: Option<PathBuf>,
    #[arg(long)]
    synth_assets: Option<usize>,
    #[arg(long)]
    synth_days: Option<usize>,
    #[arg(long)]
    synth_seed: Option<u64>,
    /// CMA-ES evaluation budget (default 20 d^2).
    #[arg(long)]
    budget: Option<usize>,
    #[arg(long)]
    init_step: Option<f64>,
    #[arg(long)]
    learning_rate: Option<f64>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    n_chains: Option<usize>,
    #[arg(long)]
    train_samples: Option<usize>,
    /// Train the RBM on exact target expectations instead of samples.
    #[arg(long, default_value_t = false)]
    exact_expectations: bool,
    #[arg(long)]
    resamples: Option<usize>,
}

impl ConfigArgs {
    fn resolve(self) -> Result<BenchConfig, Error> {
        let mut cfg = match &self.config {
            Some(path) => {
                let text = std::fs::read_to_string(path).map_err(|e| {
                    Error::Config(format!("cannot read config {}: {e}", path.display()))
                })?;
                BenchConfig::from_toml(&text)?
            }
            None => BenchConfig::default(),
        };
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        if let Some(sizes) = self.sizes {
            cfg.sizes = sizes;
        }
        if let Some(kappa) = self.kappa {
            cfg.kappa = match kappa.parse::<usize>() {
                Ok(k) => KappaRule::Fixed(k),
                Err(_) => KappaRule::Named(kappa),
            };
        }
        if let Some(levels) = self.levels {
            cfg.return_levels = if levels.contains(',') || levels.parse::<f64>().is_ok() {
                let values: Result<Vec<f64>, _> =
                    levels.split(',').map(|s| s.trim().parse::<f64>()).collect();
                ReturnLevels::Explicit(values.map_err(|e| {
                    Error::Config(format!("bad return levels {levels:?}: {e}"))
                })?)
            } else {
                ReturnLevels::Preset(levels)
            };
        }
        if let Some(v) = self.subsets_per_size {
            cfg.subsets_per_size = v;
        }
        if let Some(v) = self.repetitions {
            cfg.repetitions = v;
        }
        if let Some(models) = self.models {
            cfg.models = models
                .iter()
                .map(|m| m.parse::<ModelKind>())
                .collect::<Result<Vec<_>, _>>()?;
        }
        if let Some(ks) = self.k_gibbs {
            cfg.k_gibbs = ks;
        }
        if self.k_sweep {
            cfg.k_gibbs = vec![1, 10, 100];
        }
        if let Some(eps) = self.eps {
            cfg.eps = eps;
        }
        if let Some(csv) = self.csv {
            cfg.data = DataConfig {
                csv: Some(csv),
                synthetic: None,
            };
        }
        if self.synth_assets.is_some() || self.synth_days.is_some() || self.synth_seed.is_some() {
            let mut spec = cfg.data.synthetic.clone().unwrap_or_default();
            if let Some(a) = self.synth_assets {
                spec.assets = a;
            }
            if let Some(d) = self.synth_days {
                spec.days = d;
            }
            if let Some(s) = self.synth_seed {
                spec.seed = s;
            }
            cfg.data = DataConfig {
                csv: None,
                synthetic: Some(spec),
            };
        }
        let qcbm = QcbmConfig {
            budget: self.budget.or(cfg.qcbm.budget),
            init_step: self.init_step.unwrap_or(cfg.qcbm.init_step),
        };
        cfg.qcbm = qcbm;
        let rbm = RbmConfig {
            learning_rate: self.learning_rate.unwrap_or(cfg.rbm.learning_rate),
            batch_size: self.batch_size.unwrap_or(cfg.rbm.batch_size),
            epochs: self.epochs.unwrap_or(cfg.rbm.epochs),
            n_chains: self.n_chains.unwrap_or(cfg.rbm.n_chains),
            train_samples: self.train_samples.unwrap_or(cfg.rbm.train_samples),
            exact_expectations: self.exact_expectations || cfg.rbm.exact_expectations,
        };
        cfg.rbm = rbm;
        if let Some(r) = self.resamples {
            cfg.resamples = r;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

const EXIT_CONFIG: u8 = 1;
const EXIT_DATA: u8 = 2;
const EXIT_PARTIAL: u8 = 3;

fn classify(err: &Error) -> u8 {
    match err {
        Error::Config(_) | Error::Budget(_) => EXIT_CONFIG,
        _ => EXIT_DATA,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // clap help/version output is not an error.
            let code = if e.use_stderr() { EXIT_CONFIG } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match dispatch(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(classify(&e))
        }
    }
}

fn dispatch(cli: Cli) -> Result<u8, Error> {
    match cli.command {
        Command::Ingest { input, output } => {
            let pm = market_data::load_prices(&input)?;
            println!(
                "ok: {} dates x {} assets, {} .. {}",
                pm.n_days(),
                pm.n_assets(),
                pm.dates().first().expect("non-empty"),
                pm.dates().last().expect("non-empty"),
            );
            if let Some(path) = output {
                pm.save(&path)?;
                println!("wrote {}", path.display());
            }
            Ok(0)
        }
        Command::Synth {
            assets,
            days,
            seed,
            drift_lo,
            drift_hi,
            vol_lo,
            vol_hi,
            output,
        } => {
            let pm = market_data::synth_prices(
                assets,
                days,
                seed,
                (drift_lo, drift_hi),
                (vol_lo, vol_hi),
            )?;
            pm.save(&output)?;
            println!(
                "wrote {} ({} dates x {} assets, seed {seed})",
                output.display(),
                pm.n_days(),
                pm.n_assets()
            );
            Ok(0)
        }
        Command::Targets { config, out_dir } => {
            let cfg = config.resolve()?;
            let pm = cfg.data.load()?;
            let set = harness::generate_scenarios(&cfg, &pm)?;
            std::fs::create_dir_all(&out_dir)?;
            for s in &set.scenarios {
                let path = out_dir.join(format!("{}.target.json", s.info.id));
                s.target.save(&path)?;
            }
            for skip in &set.skipped {
                eprintln!("{skip}");
            }
            println!(
                "wrote {} targets to {} ({} scenarios skipped)",
                set.scenarios.len(),
                out_dir.display(),
                set.skipped.len()
            );
            Ok(0)
        }
        Command::Run { config, out_dir } => {
            let cfg = config.resolve()?;
            std::fs::create_dir_all(&out_dir)?;
            let results = out_dir.join("results.jsonl");
            let outcome = harness::run_benchmark(&cfg, &results)?;
            for skip in &outcome.skipped_scenarios {
                eprintln!("{skip}");
            }
            for failure in &outcome.failures {
                eprintln!("failed: {failure}");
            }
            println!(
                "{} new records ({} total) in {}",
                outcome.new_records,
                outcome.records.len(),
                results.display()
            );
            if outcome.failures.is_empty() {
                Ok(0)
            } else {
                Ok(EXIT_PARTIAL)
            }
        }
        Command::Summarize {
            records,
            resamples,
            bootstrap_seed,
            output,
        } => {
            let records = harness::load_records(&records)?;
            let report = harness::scaling_report(&records, resamples, bootstrap_seed)?;
            print!("{}", harness::render_table(&report.rows));
            if !report.directional_holds {
                for flag in &report.flags {
                    println!("flagged: {flag}");
                }
                println!("per-scenario scatter (id, rbm median, qcbm median):");
                for (n, points) in &report.scatter {
                    for (id, rbm_kl, qcbm_kl) in points {
                        println!("  n={n} {id} {rbm_kl:.6} {qcbm_kl:.6}");
                    }
                }
            }
            if let Some(path) = output {
                std::fs::write(&path, harness::to_csv(&report.rows))?;
                println!("wrote {}", path.display());
            }
            Ok(0)
        }
        Command::PlotData {
            config,
            records,
            out_dir,
        } => {
            let cfg = config.resolve()?;
            let records = harness::load_records(&records)?;
            let pm = cfg.data.load()?;
            let set = harness::generate_scenarios(&cfg, &pm)?;
            let out = harness::emit_plots(&records, &set.scenarios, cfg.resamples, cfg.seed, &out_dir)?;
            for w in &out.warnings {
                eprintln!("warning: {w}");
            }
            println!("wrote {} files to {}", out.files.len(), out_dir.display());
            Ok(0)
        }
    }
}
