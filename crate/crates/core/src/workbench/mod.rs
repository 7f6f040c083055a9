//! Experiment orchestration: configuration, transcript persistence,
//! resumable collection, analysis and reporting.

mod analyze;
mod config;
mod pipeline;
mod records;

pub use analyze::*;
pub use config::*;
pub use pipeline::{
    backend_factory, collect, run_pipeline, run_pipeline_with, BackendFactory, PipelineOutcome,
    CATALOG_SNAPSHOT,
};
pub use records::*;
