//! Experiment harness: datasets, configuration, execution and result files.

pub mod config;
pub mod dataset;
pub mod experiment;
pub mod results;
pub mod synthetic;

pub use config::{apply_override, parse_override, DatasetConfig, ExperimentConfig, MethodConfig};
pub use dataset::{
    load_dataset, load_graph, read_coordinates, read_edge_list, read_signals_csv, write_edge_list, write_signals_csv,
    Dataset, GraphSource,
};
pub use experiment::{
    choose_sampling_set, make_observations, median, mse_at, run_experiment, run_experiment_with, ExperimentSpec,
    MethodKind, MethodResult, MethodSpec, MethodSummary, ResultTable, RunOutcome,
};
pub use results::{read_results, write_results};
pub use synthetic::SyntheticSpec;
