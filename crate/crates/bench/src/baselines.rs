//! Model-free baselines producing traces in the orchestrator's format.

use std::time::Instant;

use mfbo::optimize::{maximize_acq_ea, EaConfig};
use mfbo::orchestrator::{Objective, TraceRecord};
use mfbo::{Domain, FidelitySpace, Point};
use rand::Rng;

const SAMPLE_ATTEMPTS: usize = 100_000;

struct Recorder<'a> {
    objective: &'a Objective,
    fidelity: Option<Vec<f64>>,
    cost: f64,
    label: &'static str,
    start: Instant,
    trace: Vec<TraceRecord>,
    best: f64,
}

impl<'a> Recorder<'a> {
    fn new(objective: &'a Objective, fidelity: Option<&FidelitySpace>, label: &'static str) -> Self {
        Recorder {
            objective,
            fidelity: fidelity.map(|s| s.z_hf().to_vec()),
            cost: fidelity.map_or(1.0, |s| s.cost(s.z_hf())),
            label,
            start: Instant::now(),
            trace: Vec::new(),
            best: f64::NEG_INFINITY,
        }
    }

    fn eval(&mut self, p: &Point) -> f64 {
        let y = (self.objective)(p, self.fidelity.as_deref())
            .ok()
            .filter(|v| v.is_finite());
        if let Some(v) = y {
            self.best = self.best.max(v);
        }
        let step = self.trace.len() + 1;
        self.trace.push(TraceRecord {
            step,
            wall_time_s: self.start.elapsed().as_secs_f64(),
            z: self.fidelity.clone(),
            x: p.clone(),
            y,
            acq_label: self.label.to_string(),
            hp_label: "none".to_string(),
            incumbent: self.best.is_finite().then_some(self.best),
            capital_spent: step as f64 * self.cost,
        });
        y.unwrap_or(f64::NEG_INFINITY)
    }
}

/// `budget` feasible points drawn uniformly (constraints by rejection),
/// evaluated at the top fidelity.
pub fn random_search<R: Rng + ?Sized>(
    domain: &Domain,
    fidelity: Option<&FidelitySpace>,
    objective: &Objective,
    budget: usize,
    rng: &mut R,
) -> mfbo::Result<Vec<TraceRecord>> {
    let mut rec = Recorder::new(objective, fidelity, "random");
    for _ in 0..budget {
        let p = domain.sample_feasible(rng, SAMPLE_ATTEMPTS)?;
        rec.eval(&p);
    }
    Ok(rec.trace)
}

/// The evolutionary acquisition optimiser applied directly to the
/// objective, stopped after exactly `budget` evaluations.
pub fn ea_search<R: Rng + ?Sized>(
    domain: &Domain,
    fidelity: Option<&FidelitySpace>,
    objective: &Objective,
    budget: usize,
    rng: &mut R,
) -> mfbo::Result<Vec<TraceRecord>> {
    let mut config = EaConfig::for_budget(budget);
    config.initial_pool = config.initial_pool.min(budget);
    config.generations = budget.saturating_sub(config.initial_pool).div_ceil(config.mutations);
    let mut rec = Recorder::new(objective, fidelity, "EA");
    maximize_acq_ea(
        |p| {
            if rec.trace.len() < budget {
                rec.eval(p)
            } else {
                f64::NEG_INFINITY
            }
        },
        domain,
        &config,
        rng,
    )?;
    Ok(rec.trace)
}
