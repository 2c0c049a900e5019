//! Inner optimisers used to maximise acquisitions and likelihoods.

pub mod direct;
pub mod evolution;
pub mod local;

use rand::Rng;

use crate::domain::{Domain, Point};
use crate::error::Result;

pub use direct::maximize_direct;
pub use evolution::{maximize_acq_ea, EaConfig};

/// Chooses between DIRECT and the evolutionary optimiser by domain shape.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AcqOptimizer {
    /// Minimum number of acquisition evaluations per call.
    pub min_budget: usize,
    /// Additional evaluations per dimension; the budget is `max(min, per_dim·d)`.
    pub per_dim_budget: usize,
    /// Largest dimension handed to DIRECT.
    pub direct_max_dim: usize,
}

impl Default for AcqOptimizer {
    fn default() -> Self {
        AcqOptimizer {
            min_budget: 500,
            per_dim_budget: 50,
            direct_max_dim: 60,
        }
    }
}

impl AcqOptimizer {
    pub fn budget(&self, d: usize) -> usize {
        self.min_budget.max(self.per_dim_budget * d)
    }

    pub fn uses_direct(&self, domain: &Domain) -> bool {
        domain.is_all_euclidean() && !domain.is_constrained() && domain.dim() <= self.direct_max_dim
    }

    /// Maximises `f` over `domain`.
    pub fn maximize<F, R>(&self, mut f: F, domain: &Domain, rng: &mut R) -> Result<(Point, f64)>
    where
        F: FnMut(&Point) -> f64,
        R: Rng + ?Sized,
    {
        let budget = self.budget(domain.dim());
        if self.uses_direct(domain) {
            let bounds = domain.encoded_bounds();
            let (x, v) = maximize_direct(|x| f(&domain.decode(x)), &bounds, budget);
            Ok((domain.decode(&x), v))
        } else {
            maximize_acq_ea(f, domain, &EaConfig::for_budget(budget), rng)
        }
    }
}
