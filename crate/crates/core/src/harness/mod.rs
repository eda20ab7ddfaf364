//! Dataset generation, the experiment sweep and result reporting.

mod config;
mod dataset;
mod lambda;
mod render;
mod report;
mod sweep;

pub use config::{parse_config, read_config};
pub use dataset::{
    assign_split, gen_synthetic_dataset, ingest_folder, ingest_folder_with_seed, synthetic_images, synthetic_splits,
    DatasetManifest, ManifestEntry, Split, Splits, DEFAULT_SPLIT_SEED, MANIFEST_FILE, SPLIT_RATIOS,
};
pub use lambda::{lambda_grid, LambdaGrid, LambdaRow, DEFAULT_LAMBDAS};
pub use render::FAMILIES;
pub use report::{report, AggregateRow, Report, ResultRow, ResultTable, RESULT_HEADER};
pub use sweep::{
    run_cell, run_sweep, Cell, CellOutcome, SweepContext, SweepFailure, SweepOutcome, SweepSpec, DEFAULT_PPP,
    FAILURES_FILE, PROGRESS_FILE, RECORDS_DIR, RESULTS_FILE,
};
