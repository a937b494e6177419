//! Benchmark orchestration: configuration, scenario generation, execution,
//! persistence, summaries, and plot-ready data.

pub mod config;
pub mod plots;
pub mod records;
pub mod runner;
pub mod scenario;
pub mod summary;

pub use config::{BenchConfig, DataConfig, KappaRule, ModelKind, ReturnLevels, SynthSpec};
pub use plots::{emit_plots, PlotOutput};
pub use records::{load_records, sort_records, RunRecord};
pub use runner::{run_benchmark, strip_wall_time, train_qcbm, train_rbm, BenchOutcome};
pub use scenario::{generate_scenarios, Scenario, ScenarioInfo, ScenarioSet};
pub use summary::{render_table, scaling_report, summarize, to_csv, ScalingReport, SummaryRow};
