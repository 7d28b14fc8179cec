//! Configuration, synthetic benchmark, method registry, stage functions and
//! the command-line front end.

pub mod cli;
pub mod config;
pub mod experiment;
pub mod methods;
pub mod synth;

pub use cli::run_command;
pub use config::ExperimentConfig;
pub use experiment::{
    evaluate_methods, run_experiment, Evaluation, ExperimentOutcome, ImpressionBuilder,
};
pub use methods::{build_method_pipelines, MethodSpec, BASE, CLICK, OURS};
pub use synth::{synth_generate, GroundTruth, SynthConfig, SynthOutput};
