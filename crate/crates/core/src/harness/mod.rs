//! Seeded random-network experiments, their CSV outputs and the validation suite.

mod bars;
mod csv_out;
mod experiment;
mod random;
mod validation;

pub use bars::{bars_learning_rate, run_learning, LearningConfig, NOISY_OR_INITIAL_BIAS};
pub use csv_out::{write_histograms, write_history, write_raw, write_summary};
pub use experiment::{
    evaluate_network, histogram, random_layered, run_experiment, run_noisyor_table,
    run_sigmoid_table, ClampLabel, ClampPolicy, ErrorStats, ExperimentConfig, HistogramBin,
    RunRecord, SchemeStats, SolveStatus, HISTOGRAM_BINS,
};
pub use random::{random_clamp_and_means, random_dag, RandomNetSpec};
pub use validation::{
    gradient_deviation, relative_error, run_validation_suite, PropertyReport, ValidationConfig,
    ValidationReport,
};
