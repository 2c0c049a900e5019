//! Evolutionary maximiser for mixed, constrained domains.

use rand::Rng;
use rand_distr::{Distribution, Geometric, Normal};

use crate::domain::{Coord, Domain, Point, VariableKind, VariableSpec};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EaConfig {
    /// Size of the random initial pool.
    pub initial_pool: usize,
    /// Mutants evaluated per generation.
    pub mutations: usize,
    pub generations: usize,
    /// Softmax temperature for parent selection among the best
    /// `initial_pool` members; `None` uses their standard deviation.
    pub temperature: Option<f64>,
}

impl Default for EaConfig {
    fn default() -> Self {
        EaConfig::for_budget(500)
    }
}

impl EaConfig {
    /// `n₀ = 20`, `N_mut = 10` and as many generations as fit in `total`.
    pub fn for_budget(total: usize) -> Self {
        let initial_pool = 20;
        let mutations = 10;
        EaConfig {
            initial_pool,
            mutations,
            generations: total.saturating_sub(initial_pool) / mutations,
            temperature: None,
        }
    }

    pub fn evaluations(&self) -> usize {
        self.initial_pool + self.generations * self.mutations
    }
}

const REJECTION_CAP: usize = 100;

/// Maximises `f` over the feasible part of `domain`. Every point passed to
/// `f` satisfies the domain constraint.
pub fn maximize_acq_ea<F, R>(mut f: F, domain: &Domain, config: &EaConfig, rng: &mut R) -> Result<(Point, f64)>
where
    F: FnMut(&Point) -> f64,
    R: Rng + ?Sized,
{
    let n0 = config.initial_pool.max(1);
    let mut pool: Vec<(Point, f64)> = Vec::with_capacity(config.evaluations());
    let mut best = 0usize;
    let mut push = |pool: &mut Vec<(Point, f64)>, p: Point, v: f64| {
        pool.push((p, v));
        let i = pool.len() - 1;
        if pool[i].1 > pool[best].1 || pool[best].1.is_nan() {
            best = i;
        }
    };
    for _ in 0..n0 {
        let p = domain.sample_feasible(rng, REJECTION_CAP * n0)?;
        let v = f(&p);
        push(&mut pool, p, v);
    }
    let count = Geometric::new(0.8).expect("valid probability");
    for _ in 0..config.generations {
        let elite = elite_indices(&pool, n0);
        let weights = selection_weights(&pool, &elite, config.temperature);
        let total: f64 = weights.iter().sum();
        let mut children = Vec::with_capacity(config.mutations);
        for _ in 0..config.mutations {
            let parent = &pool[elite[pick(&weights, total, rng)]].0;
            let child = mutate_feasible(domain, parent, &count, rng)?;
            children.push(child);
        }
        for c in children {
            let v = f(&c);
            push(&mut pool, c, v);
        }
    }
    Ok(pool.swap_remove(best))
}

/// Indices of the `n` best pool members (ties keep insertion order).
fn elite_indices(pool: &[(Point, f64)], n: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..pool.len()).collect();
    let key = |v: f64| if v.is_nan() { f64::NEG_INFINITY } else { v };
    idx.sort_by(|&a, &b| key(pool[b].1).total_cmp(&key(pool[a].1)).then(a.cmp(&b)));
    idx.truncate(n);
    idx
}

/// Softmax weights over the selected members.
fn selection_weights(pool: &[(Point, f64)], members: &[usize], temperature: Option<f64>) -> Vec<f64> {
    let vals: Vec<f64> = members
        .iter()
        .map(|&i| pool[i].1)
        .map(|v| if v.is_finite() { v } else { f64::NEG_INFINITY })
        .collect();
    let finite: Vec<f64> = vals.iter().copied().filter(|v| v.is_finite()).collect();
    if finite.is_empty() {
        return vec![1.0; vals.len()];
    }
    let n = finite.len() as f64;
    let mean = finite.iter().sum::<f64>() / n;
    let sd = (finite.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
    let temp = temperature.unwrap_or(sd);
    if !(temp > 0.0) {
        return vals.iter().map(|v| if v.is_finite() { 1.0 } else { 0.0 }).collect();
    }
    let top = finite.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    vals.iter().map(|v| ((v - top) / temp).exp()).collect()
}

fn pick<R: Rng + ?Sized>(weights: &[f64], total: f64, rng: &mut R) -> usize {
    let mut u = rng.random::<f64>() * total;
    for (i, w) in weights.iter().enumerate() {
        if u < *w {
            return i;
        }
        u -= w;
    }
    weights.len() - 1
}

fn mutate_feasible<R: Rng + ?Sized>(domain: &Domain, parent: &Point, count: &Geometric, rng: &mut R) -> Result<Point> {
    for _ in 0..REJECTION_CAP {
        let child = mutate(domain, parent, count, rng);
        if domain.validate_point(&child)? {
            return Ok(child);
        }
    }
    // the parent's neighbourhood looks infeasible; restart from a fresh draw
    domain
        .sample_feasible(rng, REJECTION_CAP * REJECTION_CAP)
        .map_err(|_| Error::InfeasibleSampling {
            attempts: REJECTION_CAP * REJECTION_CAP,
        })
}

fn mutate<R: Rng + ?Sized>(domain: &Domain, parent: &Point, count: &Geometric, rng: &mut R) -> Point {
    let d = domain.dim();
    let mut child = parent.clone();
    if d == 0 {
        return child;
    }
    let k = (1 + count.sample(rng) as usize).min(d);
    let mut dims: Vec<usize> = (0..d).collect();
    for i in 0..k {
        let j = rng.random_range(i..d);
        dims.swap(i, j);
    }
    for &i in &dims[..k] {
        child.coords[i] = mutate_coord(&domain.variables()[i], &parent.coords[i], rng);
    }
    child
}

fn mutate_coord<R: Rng + ?Sized>(var: &VariableSpec, c: &Coord, rng: &mut R) -> Coord {
    match (&var.kind, c) {
        (VariableKind::Euclidean { lo, hi }, Coord::Real(v)) => {
            let noise = Normal::new(0.0, 0.1 * (hi - lo)).expect("positive width");
            Coord::Real((v + noise.sample(rng)).clamp(*lo, *hi))
        }
        (VariableKind::Integer { .. }, Coord::Int(v)) => {
            let (lo, hi) = var.encoded_bounds();
            let step = rng.random_range(1..=3i64) * if rng.random::<bool>() { 1 } else { -1 };
            Coord::Int((v + step).clamp(lo as i64, hi as i64))
        }
        (VariableKind::Discrete { items }, Coord::Label(s)) if items.len() > 1 => {
            let cur = items.iter().position(|i| i == s).unwrap_or(0);
            Coord::Label(items[discrete_step(cur, items.len(), rng)].clone())
        }
        (VariableKind::DiscreteNumeric { items }, Coord::Real(v)) if items.len() > 1 => {
            // neighbours are taken in sorted order
            let mut order: Vec<usize> = (0..items.len()).collect();
            order.sort_by(|&a, &b| items[a].total_cmp(&items[b]));
            let cur = order.iter().position(|&i| items[i] == *v).unwrap_or(0);
            Coord::Real(items[order[discrete_step(cur, items.len(), rng)]])
        }
        _ => c.clone(),
    }
}

/// Half the time a uniform draw among the other items, otherwise a move to
/// an adjacent item.
fn discrete_step<R: Rng + ?Sized>(cur: usize, n: usize, rng: &mut R) -> usize {
    if rng.random::<bool>() {
        let r = rng.random_range(0..n - 1);
        if r >= cur {
            r + 1
        } else {
            r
        }
    } else if cur == 0 {
        1
    } else if cur + 1 == n || rng.random::<bool>() {
        cur - 1
    } else {
        cur + 1
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::VariableSpec;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn quadratic_bowl() {
        let domain = Domain::new(
            (0..3)
                .map(|i| VariableSpec::euclidean(format!("x{i}"), 0.0, 1.0).unwrap())
                .collect(),
        )
        .unwrap();
        let cfg = EaConfig {
            initial_pool: 20,
            mutations: 10,
            generations: 30,
            temperature: None,
        };
        let mut hits = 0;
        for seed in 0..10 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let f = |p: &Point| -> f64 { domain.encode(p).iter().map(|v| -(v - 0.5).powi(2)).sum() };
            let (p, _) = maximize_acq_ea(f, &domain, &cfg, &mut rng).unwrap();
            let x = domain.encode(&p);
            if x.iter().map(|v| (v - 0.5).powi(2)).sum::<f64>().sqrt() <= 0.05 {
                hits += 1;
            }
        }
        assert!(hits >= 9, "{hits}/10");
    }

    #[test]
    fn single_point_domain() {
        let domain = Domain::new(vec![VariableSpec::discrete("k", ["only"]).unwrap()]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let (p, v) = maximize_acq_ea(|_| 1.0, &domain, &EaConfig::default(), &mut rng).unwrap();
        assert_eq!(p.coords, vec![Coord::Label("only".into())]);
        assert_eq!(v, 1.0);
    }

    #[test]
    fn counts_and_feasibility() {
        let domain = Domain::new(vec![
            VariableSpec::euclidean("x", -1.0, 1.0).unwrap(),
            VariableSpec::euclidean("y", -1.0, 1.0).unwrap(),
            VariableSpec::integer("n", 0.0, 9.0).unwrap(),
            VariableSpec::discrete_numeric("r", vec![0.5, 0.1, 0.9]).unwrap(),
        ])
        .unwrap()
        .with_constraint_expr("x^2 + y^2 <= 1")
        .unwrap();
        let cfg = EaConfig::for_budget(220);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut calls = 0;
        let mut running = f64::NEG_INFINITY;
        let (_, best) = maximize_acq_ea(
            |p| {
                calls += 1;
                assert!(domain.validate_point(p).unwrap());
                let v = domain.encode(p).iter().sum::<f64>();
                running = running.max(v);
                v
            },
            &domain,
            &cfg,
            &mut rng,
        )
        .unwrap();
        assert_eq!(calls, 220);
        assert_eq!(best, running);
    }
}
