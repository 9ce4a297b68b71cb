//! Configuration and orchestration behind the command-line tool.

mod config;
mod run;

pub use config::{parse_layers, parse_window, BackendKind, LayerPolicy, NonDivisible, PipelineConfig};
pub use run::{
    batch, make_backend, run_file, run_image, write_artifacts, BatchEntry, BatchReport, MaskAreas, RunOutput, RunReport,
    Timings,
};
