//! GP hyperparameter selection: marginal-likelihood maximisation (MML) and
//! sampling from the hyperparameter posterior (SFP).
//!
//! Every continuous hyperparameter is searched and sampled in log space
//! under a uniform prior on its log-bounds. Additive families additionally
//! carry a decomposition, encoded for sampling as a group size `p` and a
//! coordinate ordering.

use std::collections::{HashSet, VecDeque};

use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{Error, Result};
use crate::gp::{GpModel, Observation};
use crate::kernel::{decomposition_from_ordering, Decomposition, FidelityKernelKind, KernelFamily, KernelHyperparams};
use crate::optimize::direct::maximize_direct;
use crate::optimize::local::compass_search;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum HyperKind {
    Scale,
    Noise,
    Lengthscale(usize),
    Decay(usize),
    Hamming(usize),
}

/// Bounds of one hyperparameter in natural units. `lo == hi` fixes it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HyperBound {
    pub kind: HyperKind,
    pub lo: f64,
    pub hi: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HyperBounds {
    entries: Vec<HyperBound>,
    dim: usize,
}

/// Variance floor used when scaling bounds from data.
const VARIANCE_FLOOR: f64 = 1e-4;

impl HyperBounds {
    /// `dim` is the query length of the kernel the bounds are for.
    pub fn new(entries: Vec<HyperBound>, dim: usize) -> Result<Self> {
        for e in &entries {
            let name = format!("{:?}", e.kind);
            let ok = if e.lo == e.hi {
                e.lo.is_finite() && e.lo >= 0.0
            } else {
                e.lo > 0.0 && e.hi.is_finite() && e.lo < e.hi
            };
            if !ok {
                return Err(Error::InvalidBounds {
                    name,
                    reason: "hyperparameter bounds must satisfy 0 < lo < hi or lo == hi".into(),
                });
            }
            let coord = match e.kind {
                HyperKind::Lengthscale(c) | HyperKind::Decay(c) | HyperKind::Hamming(c) => Some(c),
                _ => None,
            };
            if coord.is_some_and(|c| c >= dim) {
                return Err(Error::InvalidBounds {
                    name,
                    reason: "coordinate outside the query".into(),
                });
            }
        }
        Ok(HyperBounds { entries, dim })
    }

    /// Data-scaled defaults. `ranges[c]` is the width of query coordinate
    /// `c`; `ys` are the observations.
    ///
    /// * lengthscales log-uniform in `[0.01·w, 10·w]`
    /// * `κ0` log-uniform in `[0.1·v̂, 10·v̂]`, `v̂` the sample variance (floored)
    /// * `η²` log-uniform in `[1e-5·v̂, v̂]`
    /// * exp-decay exponents in `[0.1, 10]`, Hamming weights in `[0.1, 1]`
    pub fn default_for(family: &KernelFamily, ranges: &[f64], ys: &[f64]) -> Self {
        let v = sample_variance(ys).max(VARIANCE_FLOOR);
        let mut entries = vec![
            HyperBound {
                kind: HyperKind::Scale,
                lo: 0.1 * v,
                hi: 10.0 * v,
            },
            HyperBound {
                kind: HyperKind::Noise,
                lo: 1e-5 * v,
                hi: v,
            },
        ];
        let width = |c: usize| ranges.get(c).copied().filter(|w| *w > 0.0).unwrap_or(1.0);
        for &c in &family.numeric {
            entries.push(HyperBound {
                kind: HyperKind::Lengthscale(c),
                lo: 0.01 * width(c),
                hi: 10.0 * width(c),
            });
        }
        if family.categorical.len() > 1 {
            for &c in &family.categorical {
                entries.push(HyperBound {
                    kind: HyperKind::Hamming(c),
                    lo: 0.1,
                    hi: 1.0,
                });
            }
        }
        if let Some(f) = &family.fidelity {
            for &c in &f.coords {
                entries.push(match f.kind {
                    FidelityKernelKind::ExpDecay => HyperBound {
                        kind: HyperKind::Decay(c),
                        lo: 0.1,
                        hi: 10.0,
                    },
                    FidelityKernelKind::SquaredExp => HyperBound {
                        kind: HyperKind::Lengthscale(c),
                        lo: 0.01,
                        hi: 10.0,
                    },
                });
            }
        }
        HyperBounds {
            entries,
            dim: family.dim,
        }
    }

    pub fn entries(&self) -> &[HyperBound] {
        &self.entries
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Replaces the bounds of one hyperparameter.
    pub fn set(&mut self, kind: HyperKind, lo: f64, hi: f64) -> Result<()> {
        let mut entries = self.entries.clone();
        match entries.iter_mut().find(|e| e.kind == kind) {
            Some(e) => {
                e.lo = lo;
                e.hi = hi;
            }
            None => entries.push(HyperBound { kind, lo, hi }),
        }
        *self = HyperBounds::new(entries, self.dim)?;
        Ok(())
    }

    fn free(&self) -> impl Iterator<Item = &HyperBound> {
        self.entries.iter().filter(|e| e.lo < e.hi)
    }

    /// Number of free (searched) hyperparameters.
    pub fn n_free(&self) -> usize {
        self.free().count()
    }

    /// Kinds of the free hyperparameters, in search-vector order.
    pub fn free_kinds(&self) -> Vec<HyperKind> {
        self.free().map(|e| e.kind).collect()
    }

    /// Log-space box of the free hyperparameters.
    pub fn log_box(&self) -> Vec<(f64, f64)> {
        self.free().map(|e| (e.lo.ln(), e.hi.ln())).collect()
    }

    /// Builds hyperparameters from a log-space search vector.
    pub fn to_hyperparams(&self, theta: &[f64]) -> KernelHyperparams {
        let mut hp = KernelHyperparams::unit(self.dim, 0.0);
        let mut free = theta.iter();
        for e in &self.entries {
            let v = if e.lo < e.hi {
                free.next().map_or(e.lo, |t| t.exp().clamp(e.lo, e.hi))
            } else {
                e.lo
            };
            match e.kind {
                HyperKind::Scale => hp.scale = v,
                HyperKind::Noise => hp.noise = v,
                HyperKind::Lengthscale(c) => hp.lengthscales[c] = v,
                HyperKind::Decay(c) => hp.decay[c] = v,
                HyperKind::Hamming(c) => hp.hamming[c] = v,
            }
        }
        hp
    }

    /// Inverse of [`to_hyperparams`](Self::to_hyperparams), clamped into the box.
    pub fn to_theta(&self, hp: &KernelHyperparams) -> Vec<f64> {
        self.free()
            .map(|e| {
                let v = match e.kind {
                    HyperKind::Scale => hp.scale,
                    HyperKind::Noise => hp.noise,
                    HyperKind::Lengthscale(c) => hp.lengthscales[c],
                    HyperKind::Decay(c) => hp.decay[c],
                    HyperKind::Hamming(c) => hp.hamming[c],
                };
                v.clamp(e.lo, e.hi).ln()
            })
            .collect()
    }

    /// True when every bounded hyperparameter lies within its bounds.
    pub fn contains(&self, hp: &KernelHyperparams) -> bool {
        let tol = |x: f64| 1e-12 * x.abs().max(1e-300);
        self.entries.iter().all(|e| {
            let v = match e.kind {
                HyperKind::Scale => hp.scale,
                HyperKind::Noise => hp.noise,
                HyperKind::Lengthscale(c) => hp.lengthscales[c],
                HyperKind::Decay(c) => hp.decay[c],
                HyperKind::Hamming(c) => hp.hamming[c],
            };
            v >= e.lo - tol(e.lo) && v <= e.hi + tol(e.hi)
        })
    }
}

fn sample_variance(ys: &[f64]) -> f64 {
    if ys.len() < 2 {
        return 0.0;
    }
    let n = ys.len() as f64;
    let m = ys.iter().sum::<f64>() / n;
    ys.iter().map(|y| (y - m).powi(2)).sum::<f64>() / (n - 1.0)
}

/// Kernel hyperparameters plus the decomposition of an additive family.
#[derive(Debug, Clone, PartialEq)]
pub struct Hyperparameters {
    pub kernel: KernelHyperparams,
    pub decomposition: Option<Decomposition>,
}

/// Data, kernel family and prior box of a selection problem.
#[derive(Debug, Clone, Copy)]
pub struct HyperProblem<'a> {
    pub family: &'a KernelFamily,
    pub data: &'a [Observation],
    pub bounds: &'a HyperBounds,
    /// Constant prior mean used when fitting.
    pub mean: f64,
}

impl<'a> HyperProblem<'a> {
    pub fn new(family: &'a KernelFamily, data: &'a [Observation], bounds: &'a HyperBounds) -> Self {
        HyperProblem {
            family,
            data,
            bounds,
            mean: 0.0,
        }
    }

    pub fn with_mean(mut self, mean: f64) -> Self {
        self.mean = mean;
        self
    }

    /// Log marginal likelihood; `-∞` when the Gram matrix cannot be factored
    /// and 0 on empty data.
    pub fn log_likelihood(&self, hp: &KernelHyperparams, decomposition: Option<&Decomposition>) -> f64 {
        if self.data.is_empty() {
            return 0.0;
        }
        let spec = self.family.spec(decomposition);
        match GpModel::fit_with_mean(spec, hp.clone(), self.data, self.mean) {
            Ok(gp) => gp.log_marginal_likelihood_or_zero(),
            Err(_) => f64::NEG_INFINITY,
        }
    }

    fn theta_ll(&self, theta: &[f64], decomposition: Option<&Decomposition>) -> f64 {
        let v = self.log_likelihood(&self.bounds.to_hyperparams(theta), decomposition);
        if v.is_nan() {
            f64::NEG_INFINITY
        } else {
            v
        }
    }
}

/// Budgets of the likelihood maximiser.
#[derive(Debug, Clone, PartialEq)]
pub struct MllOptions {
    /// DIRECT evaluations for the global search over the continuous box.
    pub direct_budget: usize,
    /// Compass-search evaluations used to polish the final optimum.
    pub polish_budget: usize,
    /// Compass-search evaluations per candidate decomposition; only the
    /// scale and noise are re-tuned per candidate.
    pub candidate_budget: usize,
    /// Use this decomposition instead of searching over random ones.
    pub fixed_decomposition: Option<Decomposition>,
}

impl Default for MllOptions {
    fn default() -> Self {
        MllOptions {
            direct_budget: 200,
            polish_budget: 100,
            candidate_budget: 8,
            fixed_decomposition: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MllReport {
    pub best: Hyperparameters,
    pub log_likelihood: f64,
    /// Distinct decompositions tried and their likelihood after per-candidate
    /// tuning (empty for non-additive families).
    pub candidates: Vec<(Decomposition, f64)>,
}

/// Maximises the marginal likelihood over the bounds. For additive families
/// without a fixed decomposition, `k` random decompositions are drawn for
/// each group size `1..=p_max` and the best is kept. `warm` seeds the search.
pub fn maximize_mll<R: Rng + ?Sized>(
    problem: &HyperProblem<'_>,
    options: &MllOptions,
    warm: Option<&Hyperparameters>,
    rng: &mut R,
) -> Result<MllReport> {
    if problem.data.is_empty() {
        return Err(Error::EmptyData);
    }
    let bounds = problem.bounds;
    let boxed = bounds.log_box();
    let fixed = options.fixed_decomposition.as_ref();
    let additive = problem.family.additive.filter(|_| fixed.is_none());

    // global search with the joint (or fixed-decomposition) kernel
    let base_dec = fixed;
    let (mut theta, mut value) = if boxed.is_empty() {
        (Vec::new(), problem.theta_ll(&[], base_dec))
    } else {
        maximize_direct(|t| problem.theta_ll(t, base_dec), &boxed, options.direct_budget.max(3))
    };
    if let Some(w) = warm {
        let wt = bounds.to_theta(&w.kernel);
        let wv = problem.theta_ll(&wt, base_dec);
        if wv > value {
            theta = wt;
            value = wv;
        }
    }
    if !boxed.is_empty() {
        let (t, v) = compass_search(
            |t| problem.theta_ll(t, base_dec),
            &boxed,
            &theta,
            Some(value),
            0.05,
            options.polish_budget,
        );
        theta = t;
        value = v;
    }

    let Some(settings) = additive else {
        let decomposition = fixed.cloned();
        return Ok(MllReport {
            best: Hyperparameters {
                kernel: bounds.to_hyperparams(&theta),
                decomposition,
            },
            log_likelihood: value,
            candidates: Vec::new(),
        });
    };

    let d = problem.family.decomposable_dim();
    let mut seen = HashSet::new();
    let mut pool = Vec::new();
    if let Some(dec) = warm.and_then(|w| w.decomposition.as_ref()) {
        if dec.is_valid_for(d) && seen.insert(canonical(dec)) {
            pool.push(dec.clone());
        }
    }
    for p in 1..=settings.p_max {
        for _ in 0..settings.k.max(1) {
            let dec = random_decomposition(d, p, rng);
            if seen.insert(canonical(&dec)) {
                pool.push(dec);
            }
        }
    }

    // per-candidate tuning of scale and noise only
    let kinds = bounds.free_kinds();
    let sub: Vec<usize> = (0..kinds.len())
        .filter(|&i| matches!(kinds[i], HyperKind::Scale | HyperKind::Noise))
        .collect();
    let sub_box: Vec<(f64, f64)> = sub.iter().map(|&i| boxed[i]).collect();
    let mut candidates = Vec::with_capacity(pool.len());
    let mut best: Option<(usize, Vec<f64>, f64)> = None;
    for (ci, dec) in pool.iter().enumerate() {
        let start: Vec<f64> = sub.iter().map(|&i| theta[i]).collect();
        let embed = |s: &[f64]| {
            let mut t = theta.clone();
            for (j, &i) in sub.iter().enumerate() {
                t[i] = s[j];
            }
            t
        };
        let (s, v) = if sub.is_empty() || options.candidate_budget == 0 {
            (start.clone(), problem.theta_ll(&theta, Some(dec)))
        } else {
            let f0 = problem.theta_ll(&theta, Some(dec));
            compass_search(
                |s| problem.theta_ll(&embed(s), Some(dec)),
                &sub_box,
                &start,
                Some(f0),
                0.1,
                options.candidate_budget,
            )
        };
        candidates.push((dec.clone(), v));
        if best.as_ref().is_none_or(|b| v > b.2) {
            best = Some((ci, embed(&s), v));
        }
    }
    let (ci, t, v) = best.expect("at least one candidate decomposition");
    let dec = pool[ci].clone();
    let (t, v) = if boxed.is_empty() {
        (t, v)
    } else {
        compass_search(
            |t| problem.theta_ll(t, Some(&dec)),
            &boxed,
            &t,
            Some(v),
            0.05,
            options.polish_budget,
        )
    };
    Ok(MllReport {
        best: Hyperparameters {
            kernel: bounds.to_hyperparams(&t),
            decomposition: Some(dec),
        },
        log_likelihood: v,
        candidates,
    })
}

/// Groups sorted by their first coordinate, for de-duplication.
fn canonical(dec: &Decomposition) -> Vec<Vec<usize>> {
    let mut g = dec.groups.clone();
    g.sort();
    g
}

fn random_ordering<R: Rng + ?Sized>(d: usize, rng: &mut R) -> Vec<usize> {
    let mut o: Vec<usize> = (0..d).collect();
    o.shuffle(rng);
    o
}

fn random_decomposition<R: Rng + ?Sized>(d: usize, p: usize, rng: &mut R) -> Decomposition {
    decomposition_from_ordering(&random_ordering(d, rng), p).expect("shuffle is a permutation")
}

/// `k` decompositions of `d` coordinates, each from a uniform group size in
/// `1..=p_max` and a uniform random ordering.
pub fn sample_decompositions<R: Rng + ?Sized>(d: usize, p_max: usize, k: usize, rng: &mut R) -> Vec<Decomposition> {
    let p_max = p_max.clamp(1, d.max(1));
    (0..k)
        .map(|_| {
            let p = rng.random_range(1..=p_max);
            random_decomposition(d, p, rng)
        })
        .collect()
}

/// Markov-chain schedule: chain states are full Gibbs sweeps.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GibbsSchedule {
    pub burn_in: usize,
    pub thin: usize,
}

impl Default for GibbsSchedule {
    fn default() -> Self {
        GibbsSchedule {
            burn_in: 1000,
            thin: 100,
        }
    }
}

/// Maximum number of slice step-outs per side.
const MAX_STEP_OUT: usize = 20;

/// Draws `count` samples from the posterior `∝ exp(MLL)` under the uniform
/// log-space prior. Each sweep visits the continuous coordinates (slice
/// sampling) and, for additive families, the group size and ordering
/// (Metropolis-Hastings with uniform proposals) in random order. Empty data
/// gives the prior.
pub fn gibbs_sample_posterior<R: Rng + ?Sized>(
    problem: &HyperProblem<'_>,
    count: usize,
    schedule: GibbsSchedule,
    start: Option<&Hyperparameters>,
    fixed_decomposition: Option<&Decomposition>,
    rng: &mut R,
) -> Result<Vec<Hyperparameters>> {
    let bounds = problem.bounds;
    let boxed = bounds.log_box();
    let additive = problem.family.additive.filter(|_| fixed_decomposition.is_none());
    let d = problem.family.decomposable_dim();

    let mut theta: Vec<f64> = match start {
        Some(s) => bounds.to_theta(&s.kernel),
        None => boxed.iter().map(|&(lo, hi)| rng.random_range(lo..=hi)).collect(),
    };
    let mut group_size = 0usize;
    let mut ordering = Vec::new();
    if let Some(settings) = additive {
        match start
            .and_then(|s| s.decomposition.as_ref())
            .filter(|dec| dec.is_valid_for(d))
        {
            Some(dec) => {
                group_size = dec.max_group_size.clamp(1, settings.p_max);
                ordering = dec.groups.concat();
            }
            None => {
                group_size = rng.random_range(1..=settings.p_max);
                ordering = random_ordering(d, rng);
            }
        }
    }
    let decomposition = |p: usize, o: &[usize]| -> Option<Decomposition> {
        if additive.is_some() {
            Some(decomposition_from_ordering(o, p).expect("ordering is a permutation"))
        } else {
            fixed_decomposition.cloned()
        }
    };
    let mut dec = decomposition(group_size, &ordering);
    let mut current = problem.theta_ll(&theta, dec.as_ref());

    #[derive(Clone, Copy)]
    enum Slot {
        Cont(usize),
        GroupSize,
        Ordering,
    }
    let mut slots: Vec<Slot> = (0..boxed.len()).map(Slot::Cont).collect();
    if additive.is_some() {
        slots.push(Slot::GroupSize);
        slots.push(Slot::Ordering);
    }

    let thin = schedule.thin.max(1);
    let total = schedule.burn_in + thin * count;
    let mut out = Vec::with_capacity(count);
    for sweep in 1..=total {
        slots.shuffle(rng);
        for &slot in &slots {
            match slot {
                Slot::Cont(i) => {
                    let (x, v) = slice_update(
                        |x| {
                            let mut t = theta.clone();
                            t[i] = x;
                            problem.theta_ll(&t, dec.as_ref())
                        },
                        theta[i],
                        current,
                        boxed[i],
                        rng,
                    );
                    theta[i] = x;
                    current = v;
                }
                Slot::GroupSize => {
                    let p_max = additive.map_or(1, |s| s.p_max);
                    let proposal = rng.random_range(1..=p_max);
                    if proposal != group_size {
                        let cand = decomposition(proposal, &ordering);
                        let v = problem.theta_ll(&theta, cand.as_ref());
                        if accept(v - current, rng) {
                            group_size = proposal;
                            dec = cand;
                            current = v;
                        }
                    }
                }
                Slot::Ordering => {
                    let proposal = random_ordering(d, rng);
                    let cand = decomposition(group_size, &proposal);
                    let v = problem.theta_ll(&theta, cand.as_ref());
                    if accept(v - current, rng) {
                        ordering = proposal;
                        dec = cand;
                        current = v;
                    }
                }
            }
        }
        if sweep > schedule.burn_in && (sweep - schedule.burn_in).is_multiple_of(thin) {
            out.push(Hyperparameters {
                kernel: bounds.to_hyperparams(&theta),
                decomposition: dec.clone(),
            });
        }
    }
    Ok(out)
}

fn accept<R: Rng + ?Sized>(log_ratio: f64, rng: &mut R) -> bool {
    if log_ratio.is_nan() {
        return false;
    }
    log_ratio >= 0.0 || rng.random::<f64>().ln() < log_ratio
}

/// One univariate slice-sampling update on `[lo, hi]` with stepping out
/// (width ¼ of the interval) and shrinkage.
fn slice_update<F, R>(mut logf: F, x0: f64, f0: f64, (lo, hi): (f64, f64), rng: &mut R) -> (f64, f64)
where
    F: FnMut(f64) -> f64,
    R: Rng + ?Sized,
{
    if !(hi > lo) {
        return (x0, f0);
    }
    // a state outside the support (e.g. a failed factorisation) moves uniformly
    let level = if f0.is_finite() {
        f0 + (1.0 - rng.random::<f64>()).ln()
    } else {
        f64::NEG_INFINITY
    };
    let w = 0.25 * (hi - lo);
    let mut left = x0 - w * rng.random::<f64>();
    let mut right = left + w;
    let mut j = (MAX_STEP_OUT as f64 * rng.random::<f64>()).floor() as usize;
    let mut k = MAX_STEP_OUT - 1 - j;
    while j > 0 && left > lo && logf(left) > level {
        left -= w;
        j -= 1;
    }
    while k > 0 && right < hi && logf(right) > level {
        right += w;
        k -= 1;
    }
    left = left.max(lo);
    right = right.min(hi);
    for _ in 0..200 {
        let x = rng.random_range(left..=right);
        let v = logf(x);
        if v > level || (level == f64::NEG_INFINITY && v.is_finite()) {
            return (x, v);
        }
        if x < x0 {
            left = x;
        } else {
            right = x;
        }
        if right - left <= 1e-12 * (hi - lo) {
            break;
        }
    }
    (x0, f0)
}

/// Which strategy produced a hyperparameter value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum HpLabel {
    Mml,
    Sfp,
    /// SFP was drawn but the sample queue was empty.
    MmlFallback,
}

impl HpLabel {
    pub fn as_str(&self) -> &'static str {
        match self {
            HpLabel::Mml => "MML",
            HpLabel::Sfp => "SFP",
            HpLabel::MmlFallback => "MML-fallback",
        }
    }

    pub fn parse(s: &str) -> Result<HpLabel> {
        match s {
            "MML" => Ok(HpLabel::Mml),
            "SFP" => Ok(HpLabel::Sfp),
            "MML-fallback" => Ok(HpLabel::MmlFallback),
            other => Err(Error::UnknownLabel(other.to_string())),
        }
    }

    /// Index into the weight pair; the fallback credits MML, whose value it used.
    pub fn weight_index(&self) -> usize {
        match self {
            HpLabel::Mml | HpLabel::MmlFallback => 0,
            HpLabel::Sfp => 1,
        }
    }
}

/// Budgets for [`HyperState::refresh`].
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RefreshOptions {
    pub mll: MllOptions,
    pub schedule: GibbsSchedule,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HyperState {
    pub theta_mml: Option<Hyperparameters>,
    pub queue: VecDeque<Hyperparameters>,
    /// Weights of (MML, SFP).
    pub weights: [f64; 2],
    pub n_cyc: usize,
    /// Candidate decompositions from the most recent refresh.
    pub last_candidates: Vec<(Decomposition, f64)>,
}

impl HyperState {
    pub fn new(initial_weight: f64, n_cyc: usize) -> Self {
        HyperState {
            theta_mml: None,
            queue: VecDeque::new(),
            weights: [initial_weight; 2],
            n_cyc,
            last_candidates: Vec::new(),
        }
    }

    pub fn is_initialized(&self) -> bool {
        self.theta_mml.is_some()
    }

    /// Picks MML with probability `w_MML / (w_MML + w_SFP)`, otherwise pops
    /// the next posterior sample (falling back to MML when none is left).
    /// `None` until the first refresh.
    pub fn choose_hp<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Option<(HpLabel, Hyperparameters)> {
        let mml = self.theta_mml.clone()?;
        let p_mml = self.weights[0] / (self.weights[0] + self.weights[1]);
        if rng.random::<f64>() < p_mml {
            return Some((HpLabel::Mml, mml));
        }
        match self.queue.pop_front() {
            Some(h) => Some((HpLabel::Sfp, h)),
            None => Some((HpLabel::MmlFallback, mml)),
        }
    }

    /// Adds one to the weight of the strategy that produced an improvement.
    pub fn reward(&mut self, label: HpLabel) {
        self.weights[label.weight_index()] += 1.0;
    }

    /// Re-maximises the likelihood (warm-started from the previous optimum)
    /// and refills the queue with `n_cyc` posterior samples started there.
    /// Weights are kept.
    pub fn refresh<R: Rng + ?Sized>(
        &mut self,
        problem: &HyperProblem<'_>,
        options: &RefreshOptions,
        rng: &mut R,
    ) -> Result<()> {
        let report = maximize_mll(problem, &options.mll, self.theta_mml.as_ref(), rng)?;
        let samples = gibbs_sample_posterior(
            problem,
            self.n_cyc,
            options.schedule,
            Some(&report.best),
            options.mll.fixed_decomposition.as_ref(),
            rng,
        )?;
        self.theta_mml = Some(report.best);
        self.queue = samples.into();
        self.last_candidates = report.candidates;
        Ok(())
    }
}
