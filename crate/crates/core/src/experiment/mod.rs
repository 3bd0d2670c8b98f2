//! Experiment orchestration: configs, splits, training pipeline, evaluation
//! protocols, random search and report export.

mod config;
mod pipeline;
mod protocols;
mod report;
mod search;
mod split;

pub use config::{
    AutoencoderSection, BaselineSection, DataSection, ExperimentConfig, OperatorSection,
    ProtocolSection, SplitSection, TrainSection,
};
pub use pipeline::{generate, Dataset, Pipeline};
pub use protocols::{
    coldstart_check, linear_slope, run_experiment, run_protocols, ColdstartCheck, Protocol,
};
pub use report::{
    export_report, AeEntry, LossSummary, ProbeSeries, ReportEntry, RolloutTiming, RunReport,
};
pub use search::{random_search, SearchPoint, SearchResult, SearchSpace, SearchTarget, Trial};
pub use split::{all_r, check_split, slice_set, split_dataset, test_days, SplitData};
