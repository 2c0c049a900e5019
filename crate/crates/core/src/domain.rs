//! Optimisation domains, fidelity spaces, points and initial designs.

use std::fmt;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expr::{Expr, Value};

/// Kind and bounds of a single variable.
#[derive(Debug, Clone, PartialEq)]
pub enum VariableKind {
    Euclidean { lo: f64, hi: f64 },
    Integer { lo: f64, hi: f64 },
    Discrete { items: Vec<String> },
    DiscreteNumeric { items: Vec<f64> },
}

impl VariableKind {
    pub fn name(&self) -> &'static str {
        match self {
            VariableKind::Euclidean { .. } => "euclidean",
            VariableKind::Integer { .. } => "integer",
            VariableKind::Discrete { .. } => "discrete",
            VariableKind::DiscreteNumeric { .. } => "discrete_numeric",
        }
    }

    /// True for kinds embedded as reals in stationary kernels.
    pub fn is_numeric(&self) -> bool {
        !matches!(self, VariableKind::Discrete { .. })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VariableSpec {
    pub name: String,
    pub kind: VariableKind,
}

impl VariableSpec {
    pub fn new(name: impl Into<String>, kind: VariableKind) -> Result<Self> {
        let spec = VariableSpec {
            name: name.into(),
            kind,
        };
        spec.check()?;
        Ok(spec)
    }

    pub fn euclidean(name: impl Into<String>, lo: f64, hi: f64) -> Result<Self> {
        Self::new(name, VariableKind::Euclidean { lo, hi })
    }

    pub fn integer(name: impl Into<String>, lo: f64, hi: f64) -> Result<Self> {
        Self::new(name, VariableKind::Integer { lo, hi })
    }

    pub fn discrete<S: Into<String>>(name: impl Into<String>, items: impl IntoIterator<Item = S>) -> Result<Self> {
        Self::new(
            name,
            VariableKind::Discrete {
                items: items.into_iter().map(Into::into).collect(),
            },
        )
    }

    pub fn discrete_numeric(name: impl Into<String>, items: Vec<f64>) -> Result<Self> {
        Self::new(name, VariableKind::DiscreteNumeric { items })
    }

    fn check(&self) -> Result<()> {
        let bad = |reason: &str| Error::InvalidBounds {
            name: self.name.clone(),
            reason: reason.to_string(),
        };
        match &self.kind {
            VariableKind::Euclidean { lo, hi } | VariableKind::Integer { lo, hi } => {
                if !lo.is_finite() || !hi.is_finite() {
                    return Err(bad("bounds must be finite"));
                }
                if lo >= hi {
                    return Err(bad("lower bound must be below upper bound"));
                }
                if matches!(self.kind, VariableKind::Integer { .. }) && lo.ceil() > hi.floor() {
                    return Err(bad("interval contains no integer"));
                }
            }
            VariableKind::Discrete { items } => {
                if items.is_empty() {
                    return Err(bad("item list is empty"));
                }
                for (i, a) in items.iter().enumerate() {
                    if items[..i].contains(a) {
                        return Err(bad("duplicate item"));
                    }
                }
            }
            VariableKind::DiscreteNumeric { items } => {
                if items.is_empty() {
                    return Err(bad("item list is empty"));
                }
                if items.iter().any(|v| !v.is_finite()) {
                    return Err(bad("items must be finite"));
                }
                for (i, a) in items.iter().enumerate() {
                    if items[..i].contains(a) {
                        return Err(bad("duplicate item"));
                    }
                }
            }
        }
        Ok(())
    }

    /// Numeric extent used to scale lengthscales and mutations.
    pub fn range(&self) -> f64 {
        match &self.kind {
            VariableKind::Euclidean { lo, hi } | VariableKind::Integer { lo, hi } => hi - lo,
            VariableKind::Discrete { items } => items.len().max(2) as f64 - 1.0,
            VariableKind::DiscreteNumeric { items } => {
                let (mn, mx) = min_max(items);
                if mx > mn {
                    mx - mn
                } else {
                    1.0
                }
            }
        }
    }

    /// Numeric box `[lo, hi]` of the encoded coordinate.
    pub fn encoded_bounds(&self) -> (f64, f64) {
        match &self.kind {
            VariableKind::Euclidean { lo, hi } => (*lo, *hi),
            VariableKind::Integer { lo, hi } => (lo.ceil(), hi.floor()),
            VariableKind::Discrete { items } => (0.0, (items.len() - 1) as f64),
            VariableKind::DiscreteNumeric { items } => min_max(items),
        }
    }

    pub fn contains(&self, c: &Coord) -> bool {
        match (&self.kind, c) {
            (VariableKind::Euclidean { lo, hi }, Coord::Real(v)) => *v >= *lo && *v <= *hi,
            (VariableKind::Integer { lo, hi }, Coord::Int(v)) => (*v as f64) >= *lo && (*v as f64) <= *hi,
            (VariableKind::Discrete { items }, Coord::Label(s)) => items.contains(s),
            (VariableKind::DiscreteNumeric { items }, Coord::Real(v)) => items.contains(v),
            _ => false,
        }
    }

    /// Numeric embedding of a coordinate (discrete labels map to their item index).
    pub fn encode(&self, c: &Coord) -> f64 {
        match (&self.kind, c) {
            (VariableKind::Discrete { items }, Coord::Label(s)) => {
                items.iter().position(|i| i == s).map_or(f64::NAN, |i| i as f64)
            }
            (_, Coord::Real(v)) => *v,
            (_, Coord::Int(v)) => *v as f64,
            (_, Coord::Label(_)) => f64::NAN,
        }
    }

    /// Inverse of [`encode`](Self::encode), snapping to the nearest legal value.
    pub fn decode(&self, v: f64) -> Coord {
        match &self.kind {
            VariableKind::Euclidean { lo, hi } => Coord::Real(v.clamp(*lo, *hi)),
            VariableKind::Integer { .. } => {
                let (lo, hi) = self.encoded_bounds();
                Coord::Int(round_half_down(v).clamp(lo, hi) as i64)
            }
            VariableKind::Discrete { items } => {
                let idx = (v.round().max(0.0) as usize).min(items.len() - 1);
                Coord::Label(items[idx].clone())
            }
            VariableKind::DiscreteNumeric { items } => Coord::Real(nearest(items, v)),
        }
    }

    pub fn sample_uniform<R: Rng + ?Sized>(&self, rng: &mut R) -> Coord {
        match &self.kind {
            VariableKind::Euclidean { lo, hi } => Coord::Real(lo + rng.random::<f64>() * (hi - lo)),
            VariableKind::Integer { .. } => {
                let (lo, hi) = self.encoded_bounds();
                Coord::Int(rng.random_range(lo as i64..=hi as i64))
            }
            VariableKind::Discrete { items } => Coord::Label(items[rng.random_range(0..items.len())].clone()),
            VariableKind::DiscreteNumeric { items } => Coord::Real(items[rng.random_range(0..items.len())]),
        }
    }
}

fn min_max(items: &[f64]) -> (f64, f64) {
    items
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)))
}

fn nearest(items: &[f64], v: f64) -> f64 {
    let mut best = items[0];
    for &it in items {
        if (it - v).abs() < (best - v).abs() {
            best = it;
        }
    }
    best
}

/// Rounds to the nearest integer, sending exact halves down.
pub(crate) fn round_half_down(v: f64) -> f64 {
    let r = v.round();
    if (r - v).abs() == 0.5 {
        v.floor()
    } else {
        r
    }
}

/// One coordinate of a [`Point`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Coord {
    Int(i64),
    Real(f64),
    Label(String),
}

impl Coord {
    pub fn to_value(&self) -> Value {
        match self {
            Coord::Int(v) => Value::Num(*v as f64),
            Coord::Real(v) => Value::Num(*v),
            Coord::Label(s) => Value::Str(s.clone()),
        }
    }
}

impl fmt::Display for Coord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Coord::Int(v) => write!(f, "{v}"),
            Coord::Real(v) => write!(f, "{v}"),
            Coord::Label(s) => write!(f, "{s}"),
        }
    }
}

/// A candidate configuration: one coordinate per domain variable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Point {
    pub coords: Vec<Coord>,
}

impl Point {
    pub fn new(coords: Vec<Coord>) -> Self {
        Point { coords }
    }

    pub fn reals(values: &[f64]) -> Self {
        Point {
            coords: values.iter().map(|&v| Coord::Real(v)).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.coords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }
}

pub type ConstraintFn = dyn Fn(&Point) -> bool + Send + Sync;

/// Feasibility predicate attached to a [`Domain`].
#[derive(Clone)]
pub enum Constraint {
    Expr(Expr),
    Func(Arc<ConstraintFn>),
}

impl fmt::Debug for Constraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Constraint::Expr(e) => write!(f, "Constraint({:?})", e.source()),
            Constraint::Func(_) => write!(f, "Constraint(<fn>)"),
        }
    }
}

/// Ordered variable list plus an optional constraint.
#[derive(Debug, Clone)]
pub struct Domain {
    variables: Vec<VariableSpec>,
    constraint: Option<Constraint>,
}

impl Domain {
    pub fn new(variables: Vec<VariableSpec>) -> Result<Self> {
        if variables.is_empty() {
            return Err(Error::MalformedConfig("domain has no variables".into()));
        }
        for (i, v) in variables.iter().enumerate() {
            v.check()?;
            if variables[..i].iter().any(|w| w.name == v.name) {
                return Err(Error::MalformedConfig(format!("duplicate variable name `{}`", v.name)));
            }
        }
        Ok(Domain {
            variables,
            constraint: None,
        })
    }

    /// Attaches an expression constraint over the variable names.
    pub fn with_constraint_expr(mut self, source: &str) -> Result<Self> {
        let names = self.names();
        self.constraint = Some(Constraint::Expr(Expr::compile(source, &names)?));
        Ok(self)
    }

    pub fn with_constraint_fn<F>(mut self, f: F) -> Self
    where
        F: Fn(&Point) -> bool + Send + Sync + 'static,
    {
        self.constraint = Some(Constraint::Func(Arc::new(f)));
        self
    }

    pub fn variables(&self) -> &[VariableSpec] {
        &self.variables
    }

    pub fn constraint(&self) -> Option<&Constraint> {
        self.constraint.as_ref()
    }

    pub fn dim(&self) -> usize {
        self.variables.len()
    }

    pub fn names(&self) -> Vec<String> {
        self.variables.iter().map(|v| v.name.clone()).collect()
    }

    pub fn is_all_euclidean(&self) -> bool {
        self.variables
            .iter()
            .all(|v| matches!(v.kind, VariableKind::Euclidean { .. }))
    }

    pub fn is_constrained(&self) -> bool {
        self.constraint.is_some()
    }

    /// Indices of coordinates embedded as reals (euclidean, integer, discrete numeric).
    pub fn numeric_coords(&self) -> Vec<usize> {
        (0..self.dim())
            .filter(|&i| self.variables[i].kind.is_numeric())
            .collect()
    }

    pub fn discrete_coords(&self) -> Vec<usize> {
        (0..self.dim())
            .filter(|&i| !self.variables[i].kind.is_numeric())
            .collect()
    }

    /// Box bounds of every encoded coordinate.
    pub fn encoded_bounds(&self) -> Vec<(f64, f64)> {
        self.variables.iter().map(|v| v.encoded_bounds()).collect()
    }

    pub fn check_arity(&self, p: &Point) -> Result<()> {
        if p.len() != self.dim() {
            return Err(Error::ArityMismatch {
                expected: self.dim(),
                got: p.len(),
            });
        }
        Ok(())
    }

    /// True iff every coordinate is legal and the constraint (if any) holds.
    pub fn validate_point(&self, p: &Point) -> Result<bool> {
        self.check_arity(p)?;
        if !self.variables.iter().zip(&p.coords).all(|(v, c)| v.contains(c)) {
            return Ok(false);
        }
        self.satisfies_constraint(p)
    }

    fn satisfies_constraint(&self, p: &Point) -> Result<bool> {
        match &self.constraint {
            None => Ok(true),
            Some(Constraint::Func(f)) => Ok(f(p)),
            Some(Constraint::Expr(e)) => {
                let vars: Vec<Value> = p.coords.iter().map(Coord::to_value).collect();
                e.eval_bool(&vars)
            }
        }
    }

    pub fn encode(&self, p: &Point) -> Vec<f64> {
        self.variables.iter().zip(&p.coords).map(|(v, c)| v.encode(c)).collect()
    }

    pub fn decode(&self, x: &[f64]) -> Point {
        Point::new(self.variables.iter().zip(x).map(|(v, &c)| v.decode(c)).collect())
    }

    /// Uniform draw ignoring the constraint.
    pub fn sample_uniform<R: Rng + ?Sized>(&self, rng: &mut R) -> Point {
        Point::new(self.variables.iter().map(|v| v.sample_uniform(rng)).collect())
    }

    /// Uniform draw from the feasible set by rejection.
    pub fn sample_feasible<R: Rng + ?Sized>(&self, rng: &mut R, max_attempts: usize) -> Result<Point> {
        for _ in 0..max_attempts.max(1) {
            let p = self.sample_uniform(rng);
            if self.satisfies_constraint(&p)? {
                return Ok(p);
            }
        }
        Err(Error::InfeasibleSampling { attempts: max_attempts })
    }

    /// Initial design: latin hypercube over euclidean and integer
    /// coordinates, uniform draws for discrete ones, constraint rejection.
    pub fn sample_init<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Result<Vec<Point>> {
        if n == 0 {
            return Ok(Vec::new());
        }
        let cap = 100 * n;
        let lhs_dims: Vec<usize> = (0..self.dim())
            .filter(|&i| {
                matches!(
                    self.variables[i].kind,
                    VariableKind::Euclidean { .. } | VariableKind::Integer { .. }
                )
            })
            .collect();
        let perms: Vec<Vec<usize>> = lhs_dims
            .iter()
            .map(|_| {
                let mut p: Vec<usize> = (0..n).collect();
                p.shuffle(rng);
                p
            })
            .collect();
        let mut out = Vec::with_capacity(n);
        let mut consecutive = 0usize;
        for k in 0..n {
            let mut attempt = 0usize;
            loop {
                // stay inside the latin-hypercube cell for a few tries before
                // giving up on the cell and drawing uniformly
                let p = if attempt < 10 {
                    let mut p = self.sample_uniform(rng);
                    for (slot, &dim) in lhs_dims.iter().enumerate() {
                        let bin = perms[slot][k] as f64;
                        let u = (bin + rng.random::<f64>()) / n as f64;
                        p.coords[dim] = self.lhs_coord(dim, u);
                    }
                    p
                } else {
                    self.sample_uniform(rng)
                };
                if self.satisfies_constraint(&p)? {
                    out.push(p);
                    consecutive = 0;
                    break;
                }
                consecutive += 1;
                attempt += 1;
                if consecutive > cap {
                    return Err(Error::InfeasibleSampling { attempts: consecutive });
                }
            }
        }
        Ok(out)
    }

    fn lhs_coord(&self, dim: usize, u: f64) -> Coord {
        match &self.variables[dim].kind {
            VariableKind::Euclidean { lo, hi } => Coord::Real(lo + u * (hi - lo)),
            VariableKind::Integer { lo, hi } => {
                let v = lo + u * (hi - lo);
                let (ilo, ihi) = self.variables[dim].encoded_bounds();
                Coord::Int(round_half_down(v).clamp(ilo, ihi) as i64)
            }
            _ => unreachable!("latin hypercube only covers euclidean and integer coordinates"),
        }
    }
}

/// Default number of initial evaluations: `min(5d, floor(0.075 * budget))`, at least 2.
pub fn default_n_init(d: usize, budget: usize) -> usize {
    let capped = (0.075 * budget as f64).floor() as usize;
    (5 * d).min(capped).max(2)
}

pub type CostFn = dyn Fn(&[f64]) -> f64 + Send + Sync;

#[derive(Clone)]
pub enum Cost {
    Expr(Expr),
    Func(Arc<CostFn>),
}

impl fmt::Debug for Cost {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Cost::Expr(e) => write!(f, "Cost({:?})", e.source()),
            Cost::Func(_) => write!(f, "Cost(<fn>)"),
        }
    }
}

/// A fidelity point: one real per fidelity variable.
pub type FidelityPoint = Vec<f64>;

/// Fidelity variables, the target fidelity and a known evaluation cost.
#[derive(Debug, Clone)]
pub struct FidelitySpace {
    variables: Vec<VariableSpec>,
    z_hf: FidelityPoint,
    cost: Cost,
}

impl FidelitySpace {
    pub fn new(variables: Vec<VariableSpec>, z_hf: FidelityPoint, cost: Cost) -> Result<Self> {
        if variables.is_empty() {
            return Err(Error::MalformedConfig("fidelity space has no variables".into()));
        }
        for v in &variables {
            v.check()?;
            if !v.kind.is_numeric() {
                return Err(Error::MalformedConfig(format!(
                    "fidelity variable `{}` must be numeric",
                    v.name
                )));
            }
        }
        let space = FidelitySpace { variables, z_hf, cost };
        if !space.contains(&space.z_hf) {
            return Err(Error::ZHfOutOfSpace);
        }
        Ok(space)
    }

    pub fn with_cost_expr(variables: Vec<VariableSpec>, z_hf: FidelityPoint, source: &str) -> Result<Self> {
        let names: Vec<String> = variables.iter().map(|v| v.name.clone()).collect();
        let expr = Expr::compile(source, &names)?;
        Self::new(variables, z_hf, Cost::Expr(expr))
    }

    pub fn with_cost_fn<F>(variables: Vec<VariableSpec>, z_hf: FidelityPoint, f: F) -> Result<Self>
    where
        F: Fn(&[f64]) -> f64 + Send + Sync + 'static,
    {
        Self::new(variables, z_hf, Cost::Func(Arc::new(f)))
    }

    pub fn variables(&self) -> &[VariableSpec] {
        &self.variables
    }

    pub fn dim(&self) -> usize {
        self.variables.len()
    }

    pub fn z_hf(&self) -> &[f64] {
        &self.z_hf
    }

    pub fn cost_spec(&self) -> &Cost {
        &self.cost
    }

    pub fn contains(&self, z: &[f64]) -> bool {
        z.len() == self.dim()
            && self.variables.iter().zip(z).all(|(v, &c)| match &v.kind {
                VariableKind::Integer { .. } => c.fract() == 0.0 && v.contains(&Coord::Int(c as i64)),
                _ => v.contains(&Coord::Real(c)),
            })
    }

    /// Evaluation cost at `z`; non-positive or non-finite costs are clamped to a tiny positive value.
    pub fn cost(&self, z: &[f64]) -> f64 {
        let c = match &self.cost {
            Cost::Func(f) => f(z),
            Cost::Expr(e) => {
                let vars: Vec<Value> = z.iter().map(|&v| Value::Num(v)).collect();
                e.eval_num(&vars).unwrap_or(f64::NAN)
            }
        };
        if c.is_finite() && c > 0.0 {
            c
        } else {
            f64::MIN_POSITIVE
        }
    }

    /// Affine map of each coordinate onto `[0, 1]`.
    pub fn normalize(&self, z: &[f64]) -> Vec<f64> {
        self.variables
            .iter()
            .zip(z)
            .map(|(v, &c)| {
                let (lo, hi) = v.encoded_bounds();
                if hi > lo {
                    (c - lo) / (hi - lo)
                } else {
                    1.0
                }
            })
            .collect()
    }

    pub fn normalized_z_hf(&self) -> Vec<f64> {
        self.normalize(&self.z_hf)
    }

    /// Per-dimension grid of `per_dim` points (all items for small
    /// discrete-numeric sets) plus the top fidelity.
    pub fn grid(&self, per_dim: usize) -> Vec<FidelityPoint> {
        let axes: Vec<Vec<f64>> = self
            .variables
            .iter()
            .map(|v| {
                let mut axis: Vec<f64> = match &v.kind {
                    VariableKind::Euclidean { lo, hi } => linspace(*lo, *hi, per_dim),
                    VariableKind::Integer { .. } => {
                        let (lo, hi) = v.encoded_bounds();
                        linspace(lo, hi, per_dim).into_iter().map(f64::round).collect()
                    }
                    VariableKind::DiscreteNumeric { items } => {
                        let mut s = items.clone();
                        s.sort_by(f64::total_cmp);
                        if s.len() <= per_dim {
                            s
                        } else {
                            (0..per_dim)
                                .map(|k| s[k * (s.len() - 1) / (per_dim - 1).max(1)])
                                .collect()
                        }
                    }
                    VariableKind::Discrete { .. } => unreachable!(),
                };
                axis.dedup();
                axis
            })
            .collect();
        let mut grid: Vec<FidelityPoint> = vec![Vec::new()];
        for axis in &axes {
            grid = grid
                .into_iter()
                .flat_map(|prefix| {
                    axis.iter().map(move |&v| {
                        let mut p = prefix.clone();
                        p.push(v);
                        p
                    })
                })
                .collect();
        }
        if !grid.iter().any(|z| z == &self.z_hf) {
            grid.push(self.z_hf.clone());
        }
        grid
    }
}

fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n <= 1 {
        return vec![hi];
    }
    (0..n).map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64).collect()
}
