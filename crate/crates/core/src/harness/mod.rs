//! Experiment orchestration: configuration, trials, persistence and validation studies.

mod config;
mod experiment;
mod io;
mod selfcheck;
mod trial;
mod validate;

pub use config::{
    ExperimentConfig, ExplicitModel, ModelConfig, ParamSource, RandomParams, TrueModelConfig, ValidationConfig,
};
pub use experiment::{
    criterion_rows, fit_records, histogram_rows, run_experiment, selection_labels, tally, write_csv, write_json,
    CriterionTally, ExperimentOutput, ExperimentSummary, HistogramRow, OutputFiles, TrialFailure,
};
pub use io::{read_fit_records, read_outcomes_file, recompute_criteria, RescoredTrial};
pub use selfcheck::{selfcheck, Check, SelfcheckReport};
pub use trial::{
    first_term_label, outcomes_digest, run_trial, score_model, selections, ExperimentContext, FittedParams, Selection,
    TrialRecord,
};
pub use validate::{
    median, validate_bias, validate_consistency, validate_normality, BiasPoint, BiasReport, ConsistencyPoint,
    ConsistencyReport, MeanEstimate, NormalityEstimate, NormalityReport,
};
