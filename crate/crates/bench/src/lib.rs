//! Synthetic benchmarks, baselines and the command-line front end for `mfbo`.

pub mod baselines;
pub mod catalog;
pub mod cli;
pub mod functions;
pub mod regret;
pub mod runner;

pub use catalog::{benchmark, Benchmark};
pub use runner::{run_method, Method, MethodSpec};

#[derive(Debug, thiserror::Error)]
pub enum BenchError {
    #[error("unknown benchmark `{0}`")]
    UnknownBenchmark(String),
    #[error(transparent)]
    Core(#[from] mfbo::Error),
}
