//! Configuration, orchestration and reporting behind the `texsync` binary.

pub mod config;
pub mod eval;
pub mod manifest;
pub mod pipeline;

pub use config::PipelineConfig;
pub use eval::{run_eval, EvalReport};
pub use pipeline::{run_pipeline, Artifacts};
