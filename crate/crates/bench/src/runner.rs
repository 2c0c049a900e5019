//! Runs one method on one problem and returns its trace.

use std::sync::Arc;

use mfbo::acquisition::AcqKind;
use mfbo::orchestrator::{
    init_run, run, Objective, RunOptions, SimulatedHarness, StopCondition, ThreadHarness, TraceRecord,
};
use mfbo::{Domain, FidelitySpace};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::baselines::{ea_search, random_search};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Bo,
    Random,
    Ea,
}

impl Method {
    pub fn parse(s: &str) -> Option<Method> {
        match s.to_ascii_lowercase().as_str() {
            "bo" => Some(Method::Bo),
            "random" => Some(Method::Random),
            "ea" => Some(Method::Ea),
            _ => None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct MethodSpec {
    pub method: Method,
    /// Evaluations for single-fidelity problems, capital (sum of costs) otherwise.
    pub budget: f64,
    pub workers: usize,
    pub seed: u64,
    pub acquisitions: Option<Vec<AcqKind>>,
    pub options: RunOptions,
    /// Use the deterministic simulated-clock harness instead of threads.
    pub simulate: bool,
    pub time_limit_s: Option<f64>,
}

impl MethodSpec {
    pub fn new(method: Method, budget: f64, seed: u64) -> Self {
        MethodSpec {
            method,
            budget,
            workers: 1,
            seed,
            acquisitions: None,
            options: RunOptions::default(),
            simulate: true,
            time_limit_s: None,
        }
    }
}

/// Runs `spec` against `objective` on the given domain.
pub fn run_method(
    domain: &Domain,
    fidelity: Option<&FidelitySpace>,
    objective: Arc<Objective>,
    spec: &MethodSpec,
) -> mfbo::Result<Vec<TraceRecord>> {
    let evals = match fidelity {
        None => spec.budget.floor() as usize,
        Some(s) => (spec.budget / s.cost(s.z_hf())).floor() as usize,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    match spec.method {
        Method::Random => random_search(domain, fidelity, &*objective, evals, &mut rng),
        Method::Ea => ea_search(domain, fidelity, &*objective, evals, &mut rng),
        Method::Bo => {
            let mut options = spec.options.clone();
            if spec.acquisitions.is_some() {
                options.acquisitions = spec.acquisitions.clone();
            }
            let mut state = init_run(
                domain.clone(),
                fidelity.cloned(),
                spec.budget,
                spec.workers,
                options,
                spec.seed,
            )?;
            let stop = StopCondition {
                wall_time_s: spec.time_limit_s,
            };
            let report = if spec.simulate {
                let mut h = if spec.workers == 1 {
                    SimulatedHarness::fixed_delay(objective, 1, 1.0)
                } else {
                    SimulatedHarness::random_delay(objective, spec.workers, 0.5, 1.5, spec.seed ^ 0x9e37_79b9)
                };
                run(&mut state, &mut h, stop)?
            } else {
                let mut h = ThreadHarness::new(objective, spec.workers);
                run(&mut state, &mut h, stop)?
            };
            Ok(report.trace)
        }
    }
}
