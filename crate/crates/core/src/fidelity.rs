//! Two-step multi-fidelity query rule: choose the point on the top-fidelity
//! slice, then the cheapest fidelity whose posterior uncertainty still
//! exceeds its information-gap threshold.

use rand::Rng;

use crate::acquisition::{maximize_acquisition, AcqKind, AcqState};
use crate::domain::{Domain, FidelityPoint, FidelitySpace, Point};
use crate::error::{Error, Result};
use crate::gp::GpModel;
use crate::optimize::AcqOptimizer;

/// `‖z̃ − z̃_hf‖₂ / √p` on fidelities normalised to `[0, 1]` per dimension.
pub fn information_gap(space: &FidelitySpace, z: &[f64]) -> Result<f64> {
    if z.len() != space.dim() || !space.contains(z) {
        return Err(Error::OutOfSpace);
    }
    Ok(normalized_gap(space, z))
}

fn normalized_gap(space: &FidelitySpace, z: &[f64]) -> f64 {
    let p = space.dim().max(1) as f64;
    let zt = space.normalize(z);
    let top = space.normalized_z_hf();
    let sq: f64 = zt.iter().zip(&top).map(|(a, b)| (a - b).powi(2)).sum();
    sq.sqrt() / p.sqrt()
}

/// Threshold parameters of the fidelity rule.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FidelityFilter {
    /// Kernel scale `κ0` of the hyperparameters in use.
    pub kappa0: f64,
    /// Exponent `γ` in `ξ(z) = gap(z)^γ`; 1 for the exponential-decay kernel.
    pub exponent: f64,
}

impl FidelityFilter {
    pub fn new(kappa0: f64) -> Self {
        FidelityFilter { kappa0, exponent: 1.0 }
    }

    pub fn xi(&self, space: &FidelitySpace, z: &[f64]) -> f64 {
        normalized_gap(space, z).powf(self.exponent)
    }

    /// Right-hand side `√κ0 · ξ(z) · √(cost(z)/cost(z_hf))`.
    pub fn threshold(&self, space: &FidelitySpace, z: &[f64]) -> f64 {
        let ratio = space.cost(z) / space.cost(space.z_hf());
        self.kappa0.sqrt() * self.xi(space, z) * ratio.sqrt()
    }
}

fn joint_query(space: &FidelitySpace, z: &[f64], x: &[f64]) -> Vec<f64> {
    let mut q = space.normalize(z);
    q.extend_from_slice(x);
    q
}

/// `{z_hf} ∪ {z ∈ grid : cost(z) < cost(z_hf) ∧ τ(z, x) > threshold(z)}`,
/// where `τ` is the posterior standard deviation of the joint GP and `x`
/// the encoded domain point. `z_hf` comes first, the rest in grid order.
pub fn candidate_fidelities(
    gp: &GpModel,
    x: &[f64],
    space: &FidelitySpace,
    filter: &FidelityFilter,
    grid: &[FidelityPoint],
) -> Result<Vec<FidelityPoint>> {
    let top = space.z_hf();
    if !grid.iter().any(|z| z.as_slice() == top) {
        return Err(Error::GridMissingZhf);
    }
    let top_cost = space.cost(top);
    let mut out = vec![top.to_vec()];
    for z in grid {
        if z.as_slice() == top || !space.contains(z) || space.cost(z) >= top_cost {
            continue;
        }
        let (_, tau) = gp.posterior(&joint_query(space, z, x))?;
        if tau > filter.threshold(space, z) {
            out.push(z.clone());
        }
    }
    Ok(out)
}

/// The cheapest candidate; ties go to the larger information gap, then to
/// the lexicographically smaller fidelity.
pub fn select_fidelity(candidates: &[FidelityPoint], space: &FidelitySpace) -> Result<FidelityPoint> {
    let key = |z: &FidelityPoint| (space.cost(z), normalized_gap(space, z));
    candidates
        .iter()
        .min_by(|a, b| {
            let (ca, ga) = key(a);
            let (cb, gb) = key(b);
            ca.total_cmp(&cb)
                .then(gb.total_cmp(&ga))
                .then_with(|| lexicographic(a, b))
        })
        .cloned()
        .ok_or(Error::EmptySet)
}

fn lexicographic(a: &[f64], b: &[f64]) -> std::cmp::Ordering {
    for (x, y) in a.iter().zip(b) {
        match x.total_cmp(y) {
            std::cmp::Ordering::Equal => continue,
            o => return o,
        }
    }
    a.len().cmp(&b.len())
}

/// Point selection on the `z_hf` slice followed by fidelity selection.
/// Add-GP-UCB is maximised group by group on the slice.
#[allow(clippy::too_many_arguments)]
pub fn mf_point_and_fidelity<R: Rng + ?Sized>(
    gp: &GpModel,
    domain: &Domain,
    space: &FidelitySpace,
    kind: AcqKind,
    state: &AcqState,
    optimizer: &AcqOptimizer,
    filter: &FidelityFilter,
    grid: &[FidelityPoint],
    rng: &mut R,
) -> Result<(FidelityPoint, Point)> {
    if !gp.kernel().is_product() {
        return Err(Error::NotProductKernel);
    }
    let prefix = space.normalized_z_hf();
    let x = maximize_acquisition(kind, gp, domain, &prefix, state, optimizer, rng)?;
    let cands = candidate_fidelities(gp, &domain.encode(&x), space, filter, grid)?;
    Ok((select_fidelity(&cands, space)?, x))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::VariableSpec;

    fn space_2d() -> FidelitySpace {
        FidelitySpace::with_cost_expr(
            vec![
                VariableSpec::euclidean("a", 0.0, 10.0).unwrap(),
                VariableSpec::euclidean("b", 0.0, 1.0).unwrap(),
            ],
            vec![10.0, 1.0],
            "a / 10 + b + 0.1",
        )
        .unwrap()
    }

    #[test]
    fn gap_values() {
        let s = space_2d();
        assert_eq!(information_gap(&s, &[10.0, 1.0]).unwrap(), 0.0);
        let g = information_gap(&s, &[7.0, 0.6]).unwrap();
        assert!((g - 0.5 / 2f64.sqrt()).abs() < 1e-12);
        assert_eq!(information_gap(&s, &[11.0, 1.0]), Err(Error::OutOfSpace));
        let line = FidelitySpace::with_cost_expr(
            vec![VariableSpec::euclidean("z", 0.0, 1.0).unwrap()],
            vec![1.0],
            "z + 0.1",
        )
        .unwrap();
        assert_eq!(information_gap(&line, &[0.0]).unwrap(), 1.0);
    }

    #[test]
    fn selection_rules() {
        let s = space_2d();
        let top = s.z_hf().to_vec();
        assert_eq!(select_fidelity(std::slice::from_ref(&top), &s).unwrap(), top);
        let cheap = vec![2.0, 0.5];
        assert_eq!(select_fidelity(&[top.clone(), cheap.clone()], &s).unwrap(), cheap);
        // same cost 0.9; (8, 0) is farther from the top fidelity
        let far = vec![8.0, 0.0];
        let near = vec![5.0, 0.3];
        assert_eq!(s.cost(&far), s.cost(&near));
        assert_eq!(select_fidelity(&[near, far.clone()], &s).unwrap(), far);
        assert_eq!(select_fidelity(&[], &s), Err(Error::EmptySet));
    }
}
