//! Experiment harness: method dispatch, multi-seed runs, RMSE statistics,
//! comparison tables and persistence of models and reports.

mod experiment;
mod method;
mod metrics;
mod persist;
mod table;

pub use experiment::{
    persistence_rmse, read_reports, run_ablation, run_experiment, write_reports, AblationReport,
    AblationRun, EvalReport, RunResult,
};
pub use method::{fit_method, Method, MethodConfig, TrainedModel};
pub use metrics::{median, rmse};
pub use persist::{
    decode_model, encode_model, load_model, save_model, SavedModel, MODEL_FORMAT_VERSION,
};
pub use table::{
    compare_methods, render_comparison, render_reports, ComparisonRow, ComparisonTable, Table,
    TableFormat,
};
