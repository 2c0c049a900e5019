//! Named benchmark problems, all posed as maximisation.

use std::sync::{Arc, Mutex};

use mfbo::orchestrator::Objective;
use mfbo::{Domain, FidelitySpace, Point, VariableSpec};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::functions::*;
use crate::BenchError;

type Func = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

/// Default noise level as a fraction of the empirical range.
pub const DEFAULT_NOISE_FRACTION: f64 = 0.05;
/// Low-fidelity bias amplitude as a fraction of the empirical range.
pub const MF_BIAS_FRACTION: f64 = 0.1;
const RANGE_SAMPLES: usize = 100_000;

/// Base problems; stacks `hartmann3xK` / `hartmann6xK` accept any `K ≥ 1`.
pub const BASE_NAMES: &[&str] = &[
    "branin",
    "hartmann3",
    "park1",
    "park2",
    "hartmann6",
    "borehole",
    "hartmann3x6",
    "hartmann6x3",
    "hartmann3x4",
    "hartmann6x2",
    "hartmann3-constrained",
    "park1-constrained",
    "borehole-constrained",
];

#[derive(Clone)]
pub struct Benchmark {
    pub name: String,
    pub domain: Domain,
    /// Present for multi-fidelity variants: `z ∈ [0, 1]`, `z_hf = 1`, cost `z + 0.1`.
    pub fidelity: Option<FidelitySpace>,
    /// Best attainable value of the noise-free objective, when known.
    pub optimum: Option<f64>,
    /// Standard deviation of the additive Gaussian observation noise.
    pub noise_sd: f64,
    f: Func,
    // (amplitude, lower bounds, widths) of the low-fidelity bias
    bias: Option<(f64, Vec<f64>, Vec<f64>)>,
}

impl std::fmt::Debug for Benchmark {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Benchmark")
            .field("name", &self.name)
            .field("dim", &self.domain.dim())
            .field("multi_fidelity", &self.fidelity.is_some())
            .field("optimum", &self.optimum)
            .field("noise_sd", &self.noise_sd)
            .finish()
    }
}

fn unit_box(prefix: &str, d: usize) -> Vec<VariableSpec> {
    (0..d)
        .map(|i| VariableSpec::euclidean(format!("{prefix}{}", i + 1), 0.0, 1.0).expect("valid bounds"))
        .collect()
}

fn stack(base: fn(&[f64]) -> f64, width: usize, copies: usize) -> Func {
    Arc::new(move |x: &[f64]| x.chunks(width).take(copies).map(base).sum())
}

fn base(name: &str) -> Result<(Domain, Func, f64), BenchError> {
    let unknown = || BenchError::UnknownBenchmark(name.to_string());
    let out = match name {
        "branin" => {
            let dom = Domain::new(vec![
                VariableSpec::euclidean("x1", -5.0, 10.0)?,
                VariableSpec::euclidean("x2", 0.0, 15.0)?,
            ])?;
            let f: Func = Arc::new(|x: &[f64]| -branin(x));
            (dom, f, -0.397887357729738)
        }
        "park1" => (
            Domain::new(unit_box("x", 4))?,
            Arc::new(park1) as Func,
            25.589254158606547,
        ),
        "park2" => (
            Domain::new(unit_box("x", 4))?,
            Arc::new(park2) as Func,
            2.0 / 3.0 * 2f64.exp() + 1.0,
        ),
        "borehole" => {
            let vars = BOREHOLE_BOUNDS
                .iter()
                .map(|&(n, lo, hi)| VariableSpec::euclidean(n, lo, hi))
                .collect::<mfbo::Result<Vec<_>>>()?;
            (Domain::new(vars)?, Arc::new(borehole) as Func, 309.5755876604079)
        }
        "hartmann3-constrained" => {
            let (dom, f, opt) = base("hartmann3")?;
            (dom.with_constraint_expr("x1^2 + x2^2 <= 0.5")?, f, opt)
        }
        "park1-constrained" => {
            let (dom, f, _) = base("park1")?;
            (
                dom.with_constraint_expr("x1 + x2 + x3 + x4 <= 3")?,
                f,
                25.430335536008673,
            )
        }
        "borehole-constrained" => {
            let (dom, f, _) = base("borehole")?;
            (dom.with_constraint_expr("rw * Kw <= 1500")?, f, 257.3104185048929)
        }
        _ => {
            let rest = name.strip_prefix("hartmann").ok_or_else(unknown)?;
            let (width, copies) = match rest.split_once('x') {
                None => (rest.parse::<usize>().map_err(|_| unknown())?, 1),
                Some((w, k)) => (
                    w.parse::<usize>().map_err(|_| unknown())?,
                    k.parse::<usize>().map_err(|_| unknown())?,
                ),
            };
            let (f, opt): (fn(&[f64]) -> f64, f64) = match width {
                3 => (hartmann3, 3.862782147820756),
                6 => (hartmann6, 3.322368011415515),
                _ => return Err(unknown()),
            };
            if copies == 0 {
                return Err(unknown());
            }
            let dom = Domain::new(unit_box("x", width * copies))?;
            (dom, stack(f, width, copies), opt * copies as f64)
        }
    };
    Ok(out)
}

/// Looks up a benchmark. Names may carry the suffixes `-noisy` (Gaussian
/// noise at 5% of the empirical range) and `-mf` (multi-fidelity variant),
/// in either order.
pub fn benchmark(name: &str) -> Result<Benchmark, BenchError> {
    let mut stem = name.trim().to_ascii_lowercase();
    let mut noisy = false;
    let mut mf = false;
    loop {
        if let Some(s) = stem.strip_suffix("-noisy") {
            noisy = true;
            stem = s.to_string();
        } else if let Some(s) = stem.strip_suffix("-mf") {
            mf = true;
            stem = s.to_string();
        } else {
            break;
        }
    }
    let (domain, f, optimum) = base(&stem).map_err(|e| match e {
        BenchError::UnknownBenchmark(_) => BenchError::UnknownBenchmark(name.to_string()),
        e => e,
    })?;
    let mut b = Benchmark {
        name: stem,
        domain,
        fidelity: None,
        optimum: Some(optimum),
        noise_sd: 0.0,
        f,
        bias: None,
    };
    if mf {
        b = b.multi_fidelity()?;
    }
    if noisy {
        let sd = DEFAULT_NOISE_FRACTION * b.empirical_range();
        b = b.with_noise(sd);
    }
    Ok(b)
}

impl Benchmark {
    /// Full name including variant suffixes.
    pub fn full_name(&self) -> String {
        let mut n = self.name.clone();
        if self.fidelity.is_some() {
            n.push_str("-mf");
        }
        if self.noise_sd > 0.0 {
            n.push_str("-noisy");
        }
        n
    }

    /// Noise-free objective at the top fidelity.
    pub fn value(&self, p: &Point) -> f64 {
        (self.f)(&self.domain.encode(p))
    }

    /// Noise-free objective at fidelity `z` (ignored for single-fidelity problems):
    /// `g(z, x) = f(x) − a (1 − z) h(x)` with `h(x)` the mean squared
    /// normalised coordinate.
    pub fn value_at(&self, z: Option<&[f64]>, p: &Point) -> f64 {
        let x = self.domain.encode(p);
        let fx = (self.f)(&x);
        match (&self.bias, z) {
            (Some((a, lo, w)), Some(z)) => {
                let h = x
                    .iter()
                    .zip(lo.iter().zip(w))
                    .map(|(v, (l, w))| ((v - l) / w).powi(2))
                    .sum::<f64>()
                    / x.len() as f64;
                fx - a * (1.0 - z[0]) * h
            }
            _ => fx,
        }
    }

    /// `max − min` of the objective over uniform samples of the bounding box
    /// (fixed seed, so the result is deterministic).
    pub fn empirical_range(&self) -> f64 {
        let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for _ in 0..RANGE_SAMPLES {
            let p = self.domain.sample_uniform(&mut rng);
            let v = self.value(&p);
            lo = lo.min(v);
            hi = hi.max(v);
        }
        hi - lo
    }

    pub fn with_noise(mut self, sd: f64) -> Self {
        self.noise_sd = sd.max(0.0);
        self
    }

    /// Adds the fidelity dimension `z ∈ [0, 1]` with `z_hf = 1` and cost `z + 0.1`.
    pub fn multi_fidelity(mut self) -> Result<Self, BenchError> {
        if self.fidelity.is_some() {
            return Ok(self);
        }
        let space = FidelitySpace::with_cost_expr(vec![VariableSpec::euclidean("z", 0.0, 1.0)?], vec![1.0], "z + 0.1")?;
        let (lo, w): (Vec<f64>, Vec<f64>) = self
            .domain
            .encoded_bounds()
            .into_iter()
            .map(|(l, h)| (l, h - l))
            .unzip();
        self.bias = Some((MF_BIAS_FRACTION * self.empirical_range(), lo, w));
        self.fidelity = Some(space);
        Ok(self)
    }

    /// Objective handed to a worker harness: the fidelity-dependent value
    /// plus Gaussian noise drawn from a stream seeded with `seed`.
    pub fn objective(&self, seed: u64) -> Arc<Objective> {
        let b = self.clone();
        let noise = (self.noise_sd > 0.0).then(|| {
            (
                Normal::new(0.0, self.noise_sd).expect("positive sd"),
                Mutex::new(ChaCha8Rng::seed_from_u64(seed)),
            )
        });
        Arc::new(move |p: &Point, z: Option<&[f64]>| {
            let mut v = b.value_at(z, p);
            if let Some((dist, rng)) = &noise {
                let mut rng = rng.lock().map_err(|_| "noise stream poisoned".to_string())?;
                v += dist.sample(&mut *rng);
            }
            Ok(v)
        })
    }
}

/// Names accepted by [`benchmark`], without variant suffixes.
pub fn catalog() -> &'static [&'static str] {
    BASE_NAMES
}
