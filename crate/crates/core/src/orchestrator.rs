//! The asynchronous optimisation loop.
//!
//! A [`RunState`] owns the history, the in-flight queries and the adaptive
//! acquisition and hyperparameter state. [`run`] drives it against a
//! [`WorkerHarness`], which evaluates queries and reports completions in
//! completion order.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, VecDeque};
use std::sync::mpsc;
use std::sync::Arc;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::acquisition::{maximize_acquisition, AcqKind, AcqState};
use crate::domain::{default_n_init, Domain, FidelityPoint, FidelitySpace, Point};
use crate::error::{Error, Result};
use crate::fidelity::{candidate_fidelities, select_fidelity, FidelityFilter};
use crate::gp::{GpModel, Observation};
use crate::hyper::{
    GibbsSchedule, HpLabel, HyperBounds, HyperProblem, HyperState, Hyperparameters, MllOptions, RefreshOptions,
};
use crate::kernel::{AdditiveSettings, FidelityKernelKind, KernelFamily, Stationary};
use crate::optimize::AcqOptimizer;

/// One dispatched evaluation request.
#[derive(Debug, Clone, PartialEq)]
pub struct Query {
    pub id: u64,
    pub point: Point,
    /// Fidelity, present exactly in multi-fidelity runs.
    pub fidelity: Option<FidelityPoint>,
    /// Acquisition that produced the point; `None` for the initial design.
    pub acq: Option<AcqKind>,
    pub hp: Option<HpLabel>,
    /// Dispatch index, starting at 1.
    pub step: usize,
}

impl Query {
    pub fn acq_label(&self) -> &'static str {
        self.acq.map_or("init", |a| a.as_str())
    }

    pub fn hp_label(&self) -> &'static str {
        self.hp.map_or("init", |h| h.as_str())
    }
}

/// A worker's answer; `Err` marks a failed evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalResult {
    pub query: Query,
    pub outcome: std::result::Result<f64, String>,
    pub wall_time_s: f64,
}

/// One line of the trace. Field order is the serialisation order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub step: usize,
    pub wall_time_s: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub z: Option<Vec<f64>>,
    pub x: Point,
    /// `null` for failed evaluations.
    pub y: Option<f64>,
    pub acq_label: String,
    pub hp_label: String,
    /// Best top-fidelity value so far; `null` before the first one.
    pub incumbent: Option<f64>,
    pub capital_spent: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOptions {
    /// Enabled acquisitions; `None` uses [`AcqKind::defaults_for`].
    pub acquisitions: Option<Vec<AcqKind>>,
    /// Initial design size; `None` uses [`default_n_init`].
    pub n_init: Option<usize>,
    /// Initial acquisition and hyperparameter-strategy weight `γ₀`.
    pub initial_weight: f64,
    /// Completed evaluations between hyperparameter refreshes.
    pub n_cyc: usize,
    pub stationary: Stationary,
    pub fidelity_kernel: FidelityKernelKind,
    /// Decomposition search used when Add-GP-UCB is enabled on a numeric domain.
    pub additive: AdditiveSettings,
    pub refresh: RefreshOptions,
    pub optimizer: AcqOptimizer,
    /// Fidelity grid points per fidelity dimension.
    pub fidelity_grid: usize,
    /// Condition on pending queries before choosing a point.
    pub hallucinate: bool,
    /// Overrides the data-scaled hyperparameter bounds.
    pub hyper_bounds: Option<HyperBounds>,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            acquisitions: None,
            n_init: None,
            initial_weight: 1.0,
            n_cyc: 17,
            stationary: Stationary::Matern52,
            fidelity_kernel: FidelityKernelKind::ExpDecay,
            additive: AdditiveSettings { p_max: 6, k: 25 },
            refresh: RefreshOptions {
                mll: MllOptions {
                    direct_budget: 120,
                    polish_budget: 60,
                    candidate_budget: 2,
                    fixed_decomposition: None,
                },
                schedule: GibbsSchedule { burn_in: 5, thin: 1 },
            },
            optimizer: AcqOptimizer::default(),
            fidelity_grid: 10,
            hallucinate: true,
            hyper_bounds: None,
        }
    }
}

#[derive(Debug, Clone)]
struct Completed {
    query: Query,
    y: Option<f64>,
    wall_time_s: f64,
    capital_after: f64,
    incumbent_after: f64,
}

/// Everything the optimisation loop knows.
#[derive(Debug, Clone)]
pub struct RunState {
    domain: Domain,
    fidelity: Option<FidelitySpace>,
    options: RunOptions,
    family: KernelFamily,
    ranges: Vec<f64>,
    grid: Vec<FidelityPoint>,
    budget: f64,
    workers: usize,
    n_init: usize,
    init_queue: VecDeque<(Point, Option<FidelityPoint>)>,
    history: Vec<Completed>,
    observations: Vec<Observation>,
    pending: Vec<Query>,
    acq: AcqState,
    hyper: HyperState,
    incumbent: f64,
    incumbent_point: Option<Point>,
    capital_spent: f64,
    capital_committed: f64,
    dispatched: usize,
    next_id: u64,
    credited_improvements: usize,
    refreshes: usize,
    max_pending: usize,
    rng: ChaCha8Rng,
}

/// Prepares a run: the initial design, weights at `γ₀` and an empty
/// history. `budget` is an evaluation count for single-fidelity runs and a
/// capital (sum of costs) for multi-fidelity runs.
pub fn init_run(
    domain: Domain,
    fidelity: Option<FidelitySpace>,
    budget: f64,
    workers: usize,
    options: RunOptions,
    seed: u64,
) -> Result<RunState> {
    if !(budget > 0.0) {
        return Err(Error::MalformedConfig("budget must be positive".into()));
    }
    if workers == 0 {
        return Err(Error::MalformedConfig("at least one worker is required".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let labels = options
        .acquisitions
        .clone()
        .unwrap_or_else(|| AcqKind::defaults_for(&domain));
    let mut family = KernelFamily::for_domain(&domain, options.stationary);
    let mut ranges = Vec::new();
    let mut grid = Vec::new();
    if let Some(space) = &fidelity {
        family = family.with_fidelity(space, options.fidelity_kernel);
        ranges.extend(std::iter::repeat_n(1.0, space.dim()));
        grid = space.grid(options.fidelity_grid.max(2));
    }
    ranges.extend(domain.variables().iter().map(|v| v.range()));
    if labels.contains(&AcqKind::AddUcb) {
        family = family.with_additive(options.additive);
    }

    // in multi-fidelity runs the budget is capital, so size the design by
    // the number of top-fidelity evaluations it buys
    let evals = match &fidelity {
        None => budget.floor() as usize,
        Some(space) => (budget / space.cost(space.z_hf())).floor() as usize,
    };
    let n_init = options
        .n_init
        .unwrap_or_else(|| default_n_init(domain.dim(), evals))
        .max(1);
    let points = domain.sample_init(n_init, &mut rng)?;
    let ladder = fidelity.as_ref().map(|s| fidelity_ladder(s, &grid));
    let init_queue = points
        .into_iter()
        .enumerate()
        .map(|(i, p)| (p, ladder.as_ref().map(|l| l[i % l.len()].clone())))
        .collect();
    let acq = AcqState::new(labels, options.initial_weight, domain.dim())?;
    let hyper = HyperState::new(options.initial_weight, options.n_cyc);
    Ok(RunState {
        domain,
        fidelity,
        family,
        ranges,
        grid,
        budget,
        workers,
        n_init,
        init_queue,
        history: Vec::new(),
        observations: Vec::new(),
        pending: Vec::new(),
        acq,
        hyper,
        incumbent: f64::NEG_INFINITY,
        incumbent_point: None,
        capital_spent: 0.0,
        capital_committed: 0.0,
        dispatched: 0,
        next_id: 0,
        credited_improvements: 0,
        refreshes: 0,
        max_pending: 0,
        rng,
        options,
    })
}

/// `[z_hf, cheapest, midway]`: the order initial queries cycle through.
fn fidelity_ladder(space: &FidelitySpace, grid: &[FidelityPoint]) -> Vec<FidelityPoint> {
    let top = space.z_hf().to_vec();
    let cheapest = grid
        .iter()
        .min_by(|a, b| space.cost(a).total_cmp(&space.cost(b)))
        .cloned()
        .unwrap_or_else(|| top.clone());
    if cheapest == top {
        return vec![top];
    }
    let lo = space.normalize(&cheapest);
    let hi = space.normalized_z_hf();
    let target: Vec<f64> = lo.iter().zip(&hi).map(|(a, b)| 0.5 * (a + b)).collect();
    let mid = grid
        .iter()
        .filter(|z| **z != top && **z != cheapest)
        .min_by(|a, b| {
            let da: f64 = space
                .normalize(a)
                .iter()
                .zip(&target)
                .map(|(x, t)| (x - t).powi(2))
                .sum();
            let db: f64 = space
                .normalize(b)
                .iter()
                .zip(&target)
                .map(|(x, t)| (x - t).powi(2))
                .sum();
            da.total_cmp(&db)
        })
        .cloned();
    match mid {
        Some(m) => vec![top, cheapest, m],
        None => vec![top, cheapest],
    }
}

impl RunState {
    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn fidelity_space(&self) -> Option<&FidelitySpace> {
        self.fidelity.as_ref()
    }

    pub fn kernel_family(&self) -> &KernelFamily {
        &self.family
    }

    pub fn n_init(&self) -> usize {
        self.n_init
    }

    pub fn budget(&self) -> f64 {
        self.budget
    }

    pub fn workers(&self) -> usize {
        self.workers
    }

    pub fn pending(&self) -> &[Query] {
        &self.pending
    }

    /// Largest pending-set size seen so far.
    pub fn max_pending(&self) -> usize {
        self.max_pending
    }

    pub fn acq_state(&self) -> &AcqState {
        &self.acq
    }

    pub fn acq_state_mut(&mut self) -> &mut AcqState {
        &mut self.acq
    }

    pub fn hyper_state(&self) -> &HyperState {
        &self.hyper
    }

    pub fn hyper_state_mut(&mut self) -> &mut HyperState {
        &mut self.hyper
    }

    /// Best top-fidelity observation, `-∞` before any.
    pub fn incumbent(&self) -> f64 {
        self.incumbent
    }

    pub fn incumbent_point(&self) -> Option<&Point> {
        self.incumbent_point.as_ref()
    }

    pub fn capital_spent(&self) -> f64 {
        self.capital_spent
    }

    /// Capital of completed plus in-flight queries.
    pub fn capital_committed(&self) -> f64 {
        self.capital_committed
    }

    pub fn completed(&self) -> usize {
        self.history.len()
    }

    pub fn refreshes(&self) -> usize {
        self.refreshes
    }

    /// Improvements credited to an acquisition and a strategy label.
    pub fn credited_improvements(&self) -> usize {
        self.credited_improvements
    }

    /// Observations as (query, y) pairs in the GP's query layout.
    pub fn observations(&self) -> &[Observation] {
        &self.observations
    }

    /// True while more capital may be committed.
    pub fn can_dispatch(&self) -> bool {
        self.capital_committed < self.budget
    }

    fn cost(&self, z: Option<&FidelityPoint>) -> f64 {
        match (&self.fidelity, z) {
            (Some(space), Some(z)) => space.cost(z),
            _ => 1.0,
        }
    }

    fn is_top(&self, z: Option<&FidelityPoint>) -> bool {
        match (&self.fidelity, z) {
            (Some(space), Some(z)) => z.as_slice() == space.z_hf(),
            _ => true,
        }
    }

    /// Query vector in the GP layout: normalised fidelity, then the encoded point.
    pub fn gp_query(&self, point: &Point, z: Option<&FidelityPoint>) -> Vec<f64> {
        let mut q = match (&self.fidelity, z) {
            (Some(space), Some(z)) => space.normalize(z),
            _ => Vec::new(),
        };
        q.extend(self.domain.encode(point));
        q
    }

    fn data_mean(&self) -> f64 {
        if self.observations.is_empty() {
            0.0
        } else {
            self.observations.iter().map(|o| o.1).sum::<f64>() / self.observations.len() as f64
        }
    }

    fn bounds(&self) -> HyperBounds {
        match &self.options.hyper_bounds {
            Some(b) => b.clone(),
            None => {
                let ys: Vec<f64> = self.observations.iter().map(|o| o.1).collect();
                HyperBounds::default_for(&self.family, &self.ranges, &ys)
            }
        }
    }

    /// Re-selects hyperparameters from the current observations.
    pub fn refresh_hyperparameters(&mut self) -> Result<()> {
        if self.observations.is_empty() {
            return Err(Error::EmptyData);
        }
        let bounds = self.bounds();
        let mean = self.data_mean();
        let problem = HyperProblem::new(&self.family, &self.observations, &bounds).with_mean(mean);
        self.hyper.refresh(&problem, &self.options.refresh, &mut self.rng)?;
        self.refreshes += 1;
        Ok(())
    }

    /// Records a completed evaluation: moves it out of the pending set,
    /// charges its cost, updates the incumbent and (for model-based
    /// queries that improved it) the weights, and refreshes the
    /// hyperparameters every `n_cyc` completions.
    pub fn receive_result(&mut self, result: EvalResult) -> Result<()> {
        let pos = self
            .pending
            .iter()
            .position(|q| q.id == result.query.id)
            .ok_or(Error::UnknownQuery)?;
        let query = self.pending.remove(pos);
        let cost = self.cost(query.fidelity.as_ref());
        self.capital_spent += cost;
        let y = result.outcome.ok().filter(|y| y.is_finite());
        if let Some(y) = y {
            let q = self.gp_query(&query.point, query.fidelity.as_ref());
            self.observations.push((q, y));
            if self.is_top(query.fidelity.as_ref()) && y > self.incumbent {
                self.incumbent = y;
                self.incumbent_point = Some(query.point.clone());
                if let (Some(a), Some(h)) = (query.acq, query.hp) {
                    self.acq.update_weights(a, true)?;
                    self.hyper.reward(h);
                    self.credited_improvements += 1;
                }
            }
        }
        self.history.push(Completed {
            query,
            y,
            wall_time_s: result.wall_time_s,
            capital_after: self.capital_spent,
            incumbent_after: self.incumbent,
        });
        let n_cyc = self.hyper.n_cyc.max(1);
        if self.history.len().is_multiple_of(n_cyc) && self.observations.len() >= 2 {
            self.refresh_hyperparameters()?;
        }
        Ok(())
    }

    /// Produces the next query and registers it as pending. Initial-design
    /// points come first; afterwards a hyperparameter value and an
    /// acquisition are drawn, the GP is conditioned on the pending queries
    /// (except for Thompson sampling) and the acquisition is maximised.
    pub fn next_query(&mut self) -> Result<Query> {
        let (point, fidelity, acq, hp) = match self.init_queue.pop_front() {
            Some((p, z)) => (p, z, None, None),
            None => {
                let (p, z, a, h) = self.model_query()?;
                (p, z, Some(a), Some(h))
            }
        };
        if !self.domain.validate_point(&point)? {
            return Err(Error::OutOfSpace);
        }
        if let (Some(space), Some(z)) = (&self.fidelity, &fidelity) {
            if !space.contains(z) {
                return Err(Error::OutOfSpace);
            }
        }
        self.dispatched += 1;
        self.next_id += 1;
        let q = Query {
            id: self.next_id,
            point,
            fidelity,
            acq,
            hp,
            step: self.dispatched,
        };
        self.capital_committed += self.cost(q.fidelity.as_ref());
        self.pending.push(q.clone());
        self.max_pending = self.max_pending.max(self.pending.len());
        Ok(q)
    }

    fn model_query(&mut self) -> Result<(Point, Option<FidelityPoint>, AcqKind, HpLabel)> {
        if !self.hyper.is_initialized() {
            if self.observations.is_empty() {
                // nothing to model yet (e.g. every initial evaluation failed
                // or is still running): fall back to a feasible random point
                let p = self.domain.sample_feasible(&mut self.rng, 10_000)?;
                let z = self.fidelity.as_ref().map(|s| s.z_hf().to_vec());
                return Ok((p, z, self.acq.labels()[0], HpLabel::Mml));
            }
            self.refresh_hyperparameters()?;
        }
        let (hp_label, hp) = self
            .hyper
            .choose_hp(&mut self.rng)
            .expect("hyperparameters initialised above");
        let kind = self.acq.choose_acquisition(&mut self.rng);
        let gp = self.fit(&hp).or_else(|e| {
            let mml = self.hyper.theta_mml.clone().ok_or(e)?;
            self.fit(&mml)
        })?;
        let pending: Vec<Vec<f64>> = self
            .pending
            .iter()
            .map(|q| self.gp_query(&q.point, q.fidelity.as_ref()))
            .collect();
        let conditioned = if self.options.hallucinate && !pending.is_empty() {
            gp.hallucinate(&pending).unwrap_or_else(|_| gp.clone())
        } else {
            gp.clone()
        };
        let point_gp = if kind == AcqKind::Ts { &gp } else { &conditioned };

        self.acq.t = self.dispatched + 1;
        self.acq.incumbent = if self.incumbent.is_finite() {
            self.incumbent
        } else {
            self.observations.iter().map(|o| o.1).fold(f64::NEG_INFINITY, f64::max)
        };
        let effective = if kind == AcqKind::AddUcb && !point_gp.kernel().is_additive() {
            AcqKind::Ucb
        } else {
            kind
        };
        let prefix = self.fidelity.as_ref().map(|s| s.normalized_z_hf()).unwrap_or_default();
        let point = maximize_acquisition(
            effective,
            point_gp,
            &self.domain,
            &prefix,
            &self.acq,
            &self.options.optimizer,
            &mut self.rng,
        )?;
        let z = match &self.fidelity {
            None => None,
            Some(space) => {
                let filter = FidelityFilter::new(hp.kernel.scale);
                let x = self.domain.encode(&point);
                let cands = candidate_fidelities(&conditioned, &x, space, &filter, &self.grid)?;
                Some(select_fidelity(&cands, space)?)
            }
        };
        self.acq.incumbent = self.incumbent;
        Ok((point, z, kind, hp_label))
    }

    fn fit(&self, hp: &Hyperparameters) -> Result<GpModel> {
        let spec = self.family.spec(hp.decomposition.as_ref());
        GpModel::fit_with_mean(spec, hp.kernel.clone(), &self.observations, self.data_mean())
    }

    /// Trace of completed evaluations in completion order.
    pub fn trace(&self) -> Vec<TraceRecord> {
        self.history
            .iter()
            .map(|c| TraceRecord {
                step: c.query.step,
                wall_time_s: c.wall_time_s,
                z: c.query.fidelity.clone(),
                x: c.query.point.clone(),
                y: c.y,
                acq_label: c.query.acq_label().to_string(),
                hp_label: c.query.hp_label().to_string(),
                incumbent: c.incumbent_after.is_finite().then_some(c.incumbent_after),
                capital_spent: c.capital_after,
            })
            .collect()
    }

    pub fn report(&self) -> Report {
        Report {
            trace: self.trace(),
            incumbent: self.incumbent.is_finite().then_some(self.incumbent),
            best_point: self.incumbent_point.clone(),
            capital_spent: self.capital_spent,
            evaluations: self.history.len(),
            failures: self.history.iter().filter(|c| c.y.is_none()).count(),
        }
    }
}

/// Outcome of [`run`].
#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub trace: Vec<TraceRecord>,
    pub incumbent: Option<f64>,
    pub best_point: Option<Point>,
    pub capital_spent: f64,
    pub evaluations: usize,
    pub failures: usize,
}

impl Report {
    /// Running best top-fidelity value after each completion (`-∞` before any).
    pub fn incumbent_curve(&self) -> Vec<f64> {
        self.trace
            .iter()
            .map(|r| r.incumbent.unwrap_or(f64::NEG_INFINITY))
            .collect()
    }

    /// `f_opt − incumbent` after each completion, using observed values.
    pub fn simple_regret(&self, f_opt: f64) -> Vec<f64> {
        self.incumbent_curve()
            .into_iter()
            .map(|b| {
                if b.is_finite() {
                    (f_opt - b).max(0.0)
                } else {
                    f64::INFINITY
                }
            })
            .collect()
    }

    /// The trace as JSON lines.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for r in &self.trace {
            out.push_str(&serde_json::to_string(r).expect("trace records serialise"));
            out.push('\n');
        }
        out
    }
}

/// Evaluates queries, possibly concurrently, and hands back completions.
pub trait WorkerHarness {
    fn workers(&self) -> usize;
    fn submit(&mut self, query: Query);
    /// Blocks until the next evaluation completes; `None` when nothing is in flight.
    fn next_completed(&mut self) -> Option<EvalResult>;
    /// Seconds since the harness started (simulated or real).
    fn elapsed(&self) -> f64;
}

/// When to stop dispatching new queries.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct StopCondition {
    /// Stop dispatching after this many seconds on the harness clock.
    pub wall_time_s: Option<f64>,
}

/// Runs the loop until the budget (or time limit) is exhausted and every
/// in-flight query has completed.
pub fn run<H: WorkerHarness>(state: &mut RunState, harness: &mut H, stop: StopCondition) -> Result<Report> {
    let slots = harness.workers().min(state.workers).max(1);
    loop {
        let out_of_time = stop.wall_time_s.is_some_and(|t| harness.elapsed() >= t);
        while !out_of_time && state.pending.len() < slots && state.can_dispatch() {
            let q = state.next_query()?;
            harness.submit(q);
        }
        if state.pending.is_empty() {
            break;
        }
        let res = harness
            .next_completed()
            .ok_or_else(|| Error::WorkerFailure("harness lost an in-flight query".into()))?;
        state.receive_result(res)?;
    }
    Ok(state.report())
}

/// Objective evaluated by a harness: point and optional fidelity to a value.
pub type Objective = dyn Fn(&Point, Option<&[f64]>) -> std::result::Result<f64, String> + Send + Sync;

#[derive(Debug)]
struct Event {
    finish: f64,
    seq: u64,
    result: EvalResult,
}

impl PartialEq for Event {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Event {}
impl PartialOrd for Event {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Event {
    // min-heap on (finish, seq)
    fn cmp(&self, other: &Self) -> Ordering {
        other.finish.total_cmp(&self.finish).then(other.seq.cmp(&self.seq))
    }
}

/// Deterministic discrete-event harness: evaluations run instantly in real
/// time but occupy a worker for a simulated duration.
pub struct SimulatedHarness {
    objective: Arc<Objective>,
    duration: Box<dyn FnMut(&Query) -> f64 + Send>,
    workers: usize,
    clock: f64,
    seq: u64,
    events: BinaryHeap<Event>,
}

impl SimulatedHarness {
    /// `duration` gives each query's simulated evaluation time in seconds.
    pub fn new<D>(objective: Arc<Objective>, workers: usize, duration: D) -> Self
    where
        D: FnMut(&Query) -> f64 + Send + 'static,
    {
        SimulatedHarness {
            objective,
            duration: Box::new(duration),
            workers: workers.max(1),
            clock: 0.0,
            seq: 0,
            events: BinaryHeap::new(),
        }
    }

    /// Every evaluation takes `delay` seconds.
    pub fn fixed_delay(objective: Arc<Objective>, workers: usize, delay: f64) -> Self {
        Self::new(objective, workers, move |_| delay)
    }

    /// Durations drawn uniformly from `[lo, hi]` with a seeded stream.
    pub fn random_delay(objective: Arc<Objective>, workers: usize, lo: f64, hi: f64, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Self::new(objective, workers, move |_| lo + (hi - lo) * rng.random::<f64>())
    }
}

impl WorkerHarness for SimulatedHarness {
    fn workers(&self) -> usize {
        self.workers
    }

    fn submit(&mut self, query: Query) {
        let outcome = (self.objective)(&query.point, query.fidelity.as_deref());
        let finish = self.clock + (self.duration)(&query).max(0.0);
        self.seq += 1;
        self.events.push(Event {
            finish,
            seq: self.seq,
            result: EvalResult {
                query,
                outcome,
                wall_time_s: finish,
            },
        });
    }

    fn next_completed(&mut self) -> Option<EvalResult> {
        let ev = self.events.pop()?;
        self.clock = ev.finish;
        Some(ev.result)
    }

    fn elapsed(&self) -> f64 {
        self.clock
    }
}

/// Evaluates each query on its own OS thread (at most `workers` at a time,
/// enforced by [`run`]) and reports completions as they arrive.
pub struct ThreadHarness {
    objective: Arc<Objective>,
    workers: usize,
    start: Instant,
    in_flight: usize,
    tx: mpsc::Sender<EvalResult>,
    rx: mpsc::Receiver<EvalResult>,
}

impl ThreadHarness {
    pub fn new(objective: Arc<Objective>, workers: usize) -> Self {
        let (tx, rx) = mpsc::channel();
        ThreadHarness {
            objective,
            workers: workers.max(1),
            start: Instant::now(),
            in_flight: 0,
            tx,
            rx,
        }
    }
}

impl WorkerHarness for ThreadHarness {
    fn workers(&self) -> usize {
        self.workers
    }

    fn submit(&mut self, query: Query) {
        let f = Arc::clone(&self.objective);
        let tx = self.tx.clone();
        let start = self.start;
        self.in_flight += 1;
        std::thread::spawn(move || {
            let outcome = std::panic::catch_unwind(std::panic::AssertUnwindSafe(|| {
                f(&query.point, query.fidelity.as_deref())
            }))
            .unwrap_or_else(|_| Err("objective panicked".to_string()));
            let _ = tx.send(EvalResult {
                query,
                outcome,
                wall_time_s: start.elapsed().as_secs_f64(),
            });
        });
    }

    fn next_completed(&mut self) -> Option<EvalResult> {
        if self.in_flight == 0 {
            return None;
        }
        let r = self.rx.recv().ok()?;
        self.in_flight -= 1;
        Some(r)
    }

    fn elapsed(&self) -> f64 {
        self.start.elapsed().as_secs_f64()
    }
}
