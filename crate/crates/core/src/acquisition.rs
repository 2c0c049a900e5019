//! Acquisition functions and the adaptive choice between them.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::function::erf::erfc;

use crate::domain::{Domain, Point};
use crate::error::{Error, Result};
use crate::gp::{GpModel, LazyPathSample};
use crate::optimize::AcqOptimizer;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AcqKind {
    Ucb,
    Ei,
    Pi,
    Ts,
    Ttei,
    AddUcb,
}

impl AcqKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            AcqKind::Ucb => "UCB",
            AcqKind::Ei => "EI",
            AcqKind::Pi => "PI",
            AcqKind::Ts => "TS",
            AcqKind::Ttei => "TTEI",
            AcqKind::AddUcb => "Add-GP-UCB",
        }
    }

    /// Case-insensitive; accepts `add-gp-ucb`, `add-ucb` and `addgpucb`.
    pub fn parse(s: &str) -> Result<AcqKind> {
        match s.trim().to_ascii_lowercase().as_str() {
            "ucb" | "gp-ucb" => Ok(AcqKind::Ucb),
            "ei" => Ok(AcqKind::Ei),
            "pi" => Ok(AcqKind::Pi),
            "ts" => Ok(AcqKind::Ts),
            "ttei" => Ok(AcqKind::Ttei),
            "add-gp-ucb" | "add-ucb" | "addgpucb" | "adducb" => Ok(AcqKind::AddUcb),
            _ => Err(Error::UnknownAcquisition(s.to_string())),
        }
    }

    /// UCB, EI, TS and TTEI, plus Add-GP-UCB on all-euclidean domains.
    pub fn defaults_for(domain: &Domain) -> Vec<AcqKind> {
        let mut v = vec![AcqKind::Ucb, AcqKind::Ei, AcqKind::Ts, AcqKind::Ttei];
        if domain.is_all_euclidean() {
            v.push(AcqKind::AddUcb);
        }
        v
    }
}

/// Exploration weight `β_t = 0.5·d·log(2t + 1)`.
pub fn ucb_beta(t: usize, d: usize) -> f64 {
    0.5 * d as f64 * (2.0 * t as f64 + 1.0).ln()
}

pub fn normal_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / std::f64::consts::SQRT_2)
}

pub fn normal_pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

pub fn ucb(mu: f64, sigma: f64, beta: f64) -> f64 {
    mu + beta.max(0.0).sqrt() * sigma
}

/// Expected improvement over `best`; `max(μ − best, 0)` when `σ = 0`.
pub fn expected_improvement(mu: f64, sigma: f64, best: f64) -> f64 {
    if !best.is_finite() {
        return mu;
    }
    if sigma <= 0.0 {
        return (mu - best).max(0.0);
    }
    let g = (mu - best) / sigma;
    ((mu - best) * normal_cdf(g) + sigma * normal_pdf(g)).max(0.0)
}

/// Probability of improvement `Φ((μ − best)/σ)`; a step function at `σ = 0`
/// (½ on a tie).
pub fn probability_of_improvement(mu: f64, sigma: f64, best: f64) -> f64 {
    if !best.is_finite() {
        return 1.0;
    }
    if sigma <= 0.0 {
        return if mu > best {
            1.0
        } else if mu == best {
            0.5
        } else {
            0.0
        };
    }
    normal_cdf((mu - best) / sigma)
}

/// Enabled acquisitions, their selection weights, the step counter and
/// the incumbent.
#[derive(Debug, Clone, PartialEq)]
pub struct AcqState {
    labels: Vec<AcqKind>,
    weights: Vec<f64>,
    initial_weight: f64,
    /// Number of model-based steps taken so far.
    pub t: usize,
    /// Dimension used in `β_t`.
    pub dim: usize,
    /// Best observed value (at the top fidelity), `-∞` before any.
    pub incumbent: f64,
}

impl AcqState {
    pub fn new(labels: Vec<AcqKind>, initial_weight: f64, dim: usize) -> Result<Self> {
        if labels.is_empty() {
            return Err(Error::UnknownAcquisition("empty acquisition list".into()));
        }
        for (i, l) in labels.iter().enumerate() {
            if labels[..i].contains(l) {
                return Err(Error::UnknownAcquisition(format!("duplicate {}", l.as_str())));
            }
        }
        let n = labels.len();
        Ok(AcqState {
            labels,
            weights: vec![initial_weight; n],
            initial_weight,
            t: 0,
            dim,
            incumbent: f64::NEG_INFINITY,
        })
    }

    pub fn labels(&self) -> &[AcqKind] {
        &self.labels
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn initial_weight(&self) -> f64 {
        self.initial_weight
    }

    pub fn weight(&self, kind: AcqKind) -> Option<f64> {
        self.labels.iter().position(|&l| l == kind).map(|i| self.weights[i])
    }

    /// `β_t` at the current step (at least step 1).
    pub fn beta(&self) -> f64 {
        ucb_beta(self.t.max(1), self.dim.max(1))
    }

    /// Draws a label with probability proportional to its weight.
    pub fn choose_acquisition<R: Rng + ?Sized>(&self, rng: &mut R) -> AcqKind {
        let total: f64 = self.weights.iter().sum();
        let mut u = rng.random::<f64>() * total;
        for (l, w) in self.labels.iter().zip(&self.weights) {
            if u < *w {
                return *l;
            }
            u -= w;
        }
        *self.labels.last().expect("non-empty label list")
    }

    /// Adds one to the weight of `label` when `improved`.
    pub fn update_weights(&mut self, label: AcqKind, improved: bool) -> Result<()> {
        let i = self
            .labels
            .iter()
            .position(|&l| l == label)
            .ok_or_else(|| Error::UnknownLabel(label.as_str().to_string()))?;
        if improved {
            self.weights[i] += 1.0;
        }
        Ok(())
    }
}

/// Pointwise acquisition value. TS and TTEI depend on a whole optimisation
/// call and are only available through [`maximize_acquisition`];
/// Add-GP-UCB is valued as UCB on the joint posterior.
pub fn acq_value(kind: AcqKind, gp: &GpModel, x: &[f64], state: &AcqState) -> Result<f64> {
    let (mu, sigma) = gp.posterior(x)?;
    match kind {
        AcqKind::Ucb | AcqKind::AddUcb => Ok(ucb(mu, sigma, state.beta())),
        AcqKind::Ei => Ok(expected_improvement(mu, sigma, state.incumbent)),
        AcqKind::Pi => Ok(probability_of_improvement(mu, sigma, state.incumbent)),
        AcqKind::Ts | AcqKind::Ttei => Err(Error::NeedsContext(kind.as_str().to_string())),
    }
}

/// Maps a domain point to a GP query by prepending a fixed prefix (the
/// normalised top fidelity in multi-fidelity runs).
fn query(prefix: &[f64], domain: &Domain, p: &Point) -> Vec<f64> {
    let mut q = prefix.to_vec();
    q.extend(domain.encode(p));
    q
}

/// Maximises acquisition `kind` over `domain` on the slice of queries
/// `prefix ++ encode(x)`.
pub fn maximize_acquisition<R: Rng + ?Sized>(
    kind: AcqKind,
    gp: &GpModel,
    domain: &Domain,
    prefix: &[f64],
    state: &AcqState,
    optimizer: &AcqOptimizer,
    rng: &mut R,
) -> Result<Point> {
    let beta = state.beta();
    let best = state.incumbent;
    let score = |v: Result<f64>| v.ok().filter(|v| !v.is_nan()).unwrap_or(f64::NEG_INFINITY);
    match kind {
        AcqKind::Ucb | AcqKind::Ei | AcqKind::Pi => {
            let f = |p: &Point| {
                score(gp.posterior(&query(prefix, domain, p)).map(|(m, s)| match kind {
                    AcqKind::Ucb => ucb(m, s, beta),
                    AcqKind::Ei => expected_improvement(m, s, best),
                    _ => probability_of_improvement(m, s, best),
                }))
            };
            Ok(optimizer.maximize(f, domain, rng)?.0)
        }
        AcqKind::Ts => {
            let mut sample = LazyPathSample::new(gp, ChaCha8Rng::seed_from_u64(rng.random()));
            let f = |p: &Point| score(sample.value(&query(prefix, domain, p)));
            Ok(optimizer.maximize(f, domain, rng)?.0)
        }
        AcqKind::Ttei => {
            let ei = |p: &Point| {
                score(
                    gp.posterior(&query(prefix, domain, p))
                        .map(|(m, s)| expected_improvement(m, s, best)),
                )
            };
            let (x1, _) = optimizer.maximize(ei, domain, rng)?;
            if rng.random::<bool>() {
                return Ok(x1);
            }
            let q1 = query(prefix, domain, &x1);
            let (m1, v1) = gp.posterior_raw(&q1)?;
            let w1 = gp.whitened(&q1);
            let prior1 = |q: &[f64]| gp.kernel().eval(gp.hyperparams(), q, &q1);
            let challenger = |p: &Point| {
                let q = query(prefix, domain, p);
                let Ok((m, v)) = gp.posterior_raw(&q) else {
                    return f64::NEG_INFINITY;
                };
                let cov = prior1(&q) - gp.whitened(&q).dot(&w1);
                let var = (v + v1 - 2.0 * cov).max(0.0);
                expected_improvement(m - m1, var.sqrt(), 0.0)
            };
            Ok(optimizer.maximize(challenger, domain, rng)?.0)
        }
        AcqKind::AddUcb => addgpucb_next(gp, domain, prefix, state, optimizer, rng),
    }
}

/// Add-GP-UCB: maximises `μ⁽ʲ⁾ + β^{1/2} σ⁽ʲ⁾` separately over each group's
/// coordinates and concatenates the maximisers. On constrained domains an
/// infeasible assembly is replaced by a joint maximisation of the summed
/// component bounds.
pub fn addgpucb_next<R: Rng + ?Sized>(
    gp: &GpModel,
    domain: &Domain,
    prefix: &[f64],
    state: &AcqState,
    optimizer: &AcqOptimizer,
    rng: &mut R,
) -> Result<Point> {
    let kernel = gp.kernel();
    if !kernel.is_additive() {
        return Err(Error::NotAdditive);
    }
    let beta = state.beta();
    let offset = prefix.len();
    let m = kernel.n_components();
    let mut groups = Vec::with_capacity(m);
    for j in 0..m {
        let coords: Vec<usize> = kernel.component_coords(j)?.into_iter().map(|c| c - offset).collect();
        groups.push(coords);
    }
    let component_ucb = |j: usize, q: &[f64]| {
        gp.posterior_component(j, q)
            .map(|(mu, s)| ucb(mu, s, beta))
            .ok()
            .filter(|v| !v.is_nan())
            .unwrap_or(f64::NEG_INFINITY)
    };

    let mut base = query(prefix, domain, &domain.sample_uniform(rng));
    let mut point = domain.decode(&base[offset..]);
    for (j, coords) in groups.iter().enumerate() {
        let vars = coords.iter().map(|&c| domain.variables()[c].clone()).collect();
        let sub = Domain::new(vars)?;
        let f = |p: &Point| {
            let mut q = base.clone();
            for (k, &c) in coords.iter().enumerate() {
                q[offset + c] = sub.variables()[k].encode(&p.coords[k]);
            }
            component_ucb(j, &q)
        };
        let (best, _) = optimizer.maximize(f, &sub, rng)?;
        for (k, &c) in coords.iter().enumerate() {
            base[offset + c] = sub.variables()[k].encode(&best.coords[k]);
            point.coords[c] = best.coords[k].clone();
        }
    }
    if domain.validate_point(&point)? {
        return Ok(point);
    }
    let f = |p: &Point| {
        let q = query(prefix, domain, p);
        (0..m).map(|j| component_ucb(j, &q)).sum::<f64>()
    };
    Ok(optimizer.maximize(f, domain, rng)?.0)
}
