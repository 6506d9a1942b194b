//! Config-driven simulation grid and single-dataset analysis.

pub mod analyze;
pub mod config;
pub mod methods;
pub mod simulate;

pub use analyze::{analyze_dataset, export_lp, import_external, load_experiment, run_analysis, AnalysisReport};
pub use config::{
    DataConfig, DesignConfig, Effect, EffectGrid, EffectPreset, EstimatorConfig, Method, OutputConfig, ResidualConfig,
    SimulationConfig, SolverConfig,
};
pub use methods::{conservative_variance, run_methods, MethodContext, MethodResult};
pub use simulate::{
    ground_truth, inject_effect, run_simulation, simulate_population, summarize, write_quantile_dump, SimulationReport,
    SummaryRow,
};
