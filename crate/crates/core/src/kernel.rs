//! Covariance functions over encoded queries.
//!
//! Every leaf kernel is unit-normalised (its supremum is 1) and the overall
//! scale `κ0` is applied once at the top, so a fidelity-domain product has
//! the form `κ0 · k_Z(z, z') · k_X(x, x')`. Queries are flat `f64` slices:
//! in multi-fidelity mode the normalised fidelity coordinates come first,
//! followed by the encoded domain point.

use nalgebra::DMatrix;

use crate::domain::{Domain, FidelitySpace};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stationary {
    SquaredExp,
    Matern52,
}

#[derive(Debug, Clone, PartialEq)]
pub enum KernelSpec {
    /// `exp(-r²/2)` with ARD lengthscales.
    Se { coords: Vec<usize> },
    /// `(1 + √5 r + 5r²/3) exp(-√5 r)` with ARD lengthscales.
    Matern52 { coords: Vec<usize> },
    /// `Σ α_i 1(x_i = x'_i)` with α on the simplex.
    Hamming { coords: Vec<usize> },
    /// `Π 1/(u_i + u'_i + 1)^{a_i}` where `u_i = |x_i - top_i|`.
    ExpDecay { coords: Vec<usize>, top: Vec<f64> },
    /// Mean of the group kernels over disjoint coordinate groups.
    Additive { groups: Vec<KernelSpec> },
    /// Product of kernels on disjoint coordinate blocks.
    Tensor { factors: Vec<KernelSpec> },
    /// Fidelity kernel times domain kernel.
    Product {
        fidelity: Box<KernelSpec>,
        domain: Box<KernelSpec>,
    },
}

impl KernelSpec {
    pub fn stationary(kind: Stationary, coords: Vec<usize>) -> Self {
        match kind {
            Stationary::SquaredExp => KernelSpec::Se { coords },
            Stationary::Matern52 => KernelSpec::Matern52 { coords },
        }
    }

    /// Smallest query length the kernel can read.
    pub fn arity(&self) -> usize {
        match self {
            KernelSpec::Se { coords }
            | KernelSpec::Matern52 { coords }
            | KernelSpec::Hamming { coords }
            | KernelSpec::ExpDecay { coords, .. } => coords.iter().map(|&c| c + 1).max().unwrap_or(0),
            KernelSpec::Additive { groups } => groups.iter().map(Self::arity).max().unwrap_or(0),
            KernelSpec::Tensor { factors } => factors.iter().map(Self::arity).max().unwrap_or(0),
            KernelSpec::Product { fidelity, domain } => fidelity.arity().max(domain.arity()),
        }
    }

    pub fn is_additive(&self) -> bool {
        self.additive_groups().is_some()
    }

    pub fn is_product(&self) -> bool {
        matches!(self, KernelSpec::Product { .. })
    }

    fn additive_groups(&self) -> Option<&[KernelSpec]> {
        match self {
            KernelSpec::Additive { groups } => Some(groups),
            KernelSpec::Product { domain, .. } => match domain.as_ref() {
                KernelSpec::Additive { groups } => Some(groups),
                _ => None,
            },
            _ => None,
        }
    }

    /// Number of additive components (1 for non-additive kernels).
    pub fn n_components(&self) -> usize {
        self.additive_groups().map_or(1, <[KernelSpec]>::len)
    }

    /// Coordinates read by additive component `j`.
    pub fn component_coords(&self, j: usize) -> Result<Vec<usize>> {
        let groups = self.additive_groups().ok_or(Error::NotAdditive)?;
        let g = groups.get(j).ok_or(Error::BadGroupIndex(j))?;
        Ok(g.coords())
    }

    /// All coordinates read by the kernel, in first-seen order.
    pub fn coords(&self) -> Vec<usize> {
        match self {
            KernelSpec::Se { coords }
            | KernelSpec::Matern52 { coords }
            | KernelSpec::Hamming { coords }
            | KernelSpec::ExpDecay { coords, .. } => coords.clone(),
            KernelSpec::Additive { groups } => groups.iter().flat_map(Self::coords).collect(),
            KernelSpec::Tensor { factors } => factors.iter().flat_map(Self::coords).collect(),
            KernelSpec::Product { fidelity, domain } => {
                let mut c = fidelity.coords();
                c.extend(domain.coords());
                c
            }
        }
    }

    /// Kernel value without the overall scale.
    pub fn unit(&self, hp: &KernelHyperparams, p: &[f64], q: &[f64]) -> f64 {
        match self {
            KernelSpec::Se { coords } => (-0.5 * scaled_sq_dist(coords, hp, p, q)).exp(),
            KernelSpec::Matern52 { coords } => matern52(scaled_sq_dist(coords, hp, p, q).sqrt()),
            KernelSpec::Hamming { coords } => {
                let total: f64 = coords.iter().map(|&c| hp.hamming[c]).sum();
                if total <= 0.0 {
                    return 0.0;
                }
                coords
                    .iter()
                    .filter(|&&c| p[c] == q[c])
                    .map(|&c| hp.hamming[c])
                    .sum::<f64>()
                    / total
            }
            KernelSpec::ExpDecay { coords, top } => coords
                .iter()
                .zip(top)
                .map(|(&c, &t)| {
                    let u = (p[c] - t).abs();
                    let v = (q[c] - t).abs();
                    (u + v + 1.0).powf(-hp.decay[c])
                })
                .product(),
            KernelSpec::Additive { groups } => {
                groups.iter().map(|g| g.unit(hp, p, q)).sum::<f64>() / groups.len() as f64
            }
            KernelSpec::Tensor { factors } => factors.iter().map(|f| f.unit(hp, p, q)).product(),
            KernelSpec::Product { fidelity, domain } => fidelity.unit(hp, p, q) * domain.unit(hp, p, q),
        }
    }

    /// Kernel value including the scale, without argument checks.
    #[inline]
    pub fn eval(&self, hp: &KernelHyperparams, p: &[f64], q: &[f64]) -> f64 {
        hp.scale * self.unit(hp, p, q)
    }

    /// Value of additive component `j`; the component kernels sum to the full kernel.
    pub fn component_eval(&self, hp: &KernelHyperparams, j: usize, p: &[f64], q: &[f64]) -> Result<f64> {
        let groups = self.additive_groups().ok_or(Error::NotAdditive)?;
        let g = groups.get(j).ok_or(Error::BadGroupIndex(j))?;
        let base = hp.scale * g.unit(hp, p, q) / groups.len() as f64;
        Ok(match self {
            KernelSpec::Product { fidelity, .. } => base * fidelity.unit(hp, p, q),
            _ => base,
        })
    }
}

#[inline]
fn scaled_sq_dist(coords: &[usize], hp: &KernelHyperparams, p: &[f64], q: &[f64]) -> f64 {
    coords
        .iter()
        .map(|&c| {
            let d = (p[c] - q[c]) / hp.lengthscales[c];
            d * d
        })
        .sum()
}

#[inline]
fn matern52(r: f64) -> f64 {
    let s = 5f64.sqrt() * r;
    (1.0 + s + s * s / 3.0) * (-s).exp()
}

/// Hyperparameters of a kernel. Per-coordinate vectors are indexed by query
/// coordinate; entries for coordinates a kernel does not read are ignored.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelHyperparams {
    /// Overall scale `κ0 > 0`.
    pub scale: f64,
    pub lengthscales: Vec<f64>,
    /// Raw Hamming weights; normalised onto the simplex inside each Hamming kernel.
    pub hamming: Vec<f64>,
    /// Exponent of the exponential-decay kernel per fidelity coordinate.
    pub decay: Vec<f64>,
    /// Observation noise variance `η² ≥ 0`.
    pub noise: f64,
}

impl KernelHyperparams {
    /// Unit scale, unit lengthscales, equal Hamming weights, unit decay.
    pub fn unit(dim: usize, noise: f64) -> Self {
        KernelHyperparams {
            scale: 1.0,
            lengthscales: vec![1.0; dim],
            hamming: vec![1.0; dim],
            decay: vec![1.0; dim],
            noise,
        }
    }

    pub fn dim(&self) -> usize {
        self.lengthscales.len()
    }

    pub fn is_valid(&self) -> bool {
        self.scale > 0.0
            && self.noise >= 0.0
            && self.lengthscales.iter().all(|&l| l > 0.0)
            && self.hamming.iter().all(|&a| a >= 0.0)
            && self.decay.iter().all(|&a| a > 0.0)
    }
}

fn check_query(spec: &KernelSpec, hp: &KernelHyperparams, p: &[f64]) -> Result<()> {
    let need = spec.arity();
    if p.len() < need || hp.dim() < need {
        return Err(Error::ArityMismatch {
            expected: need,
            got: p.len().min(hp.dim()),
        });
    }
    if let Some(index) = spec.coords().into_iter().find(|&c| !p[c].is_finite()) {
        return Err(Error::KindMismatch { index });
    }
    Ok(())
}

/// Checked kernel evaluation.
pub fn kernel_eval(spec: &KernelSpec, hp: &KernelHyperparams, p: &[f64], q: &[f64]) -> Result<f64> {
    check_query(spec, hp, p)?;
    check_query(spec, hp, q)?;
    Ok(spec.eval(hp, p, q))
}

/// Gram matrix `K_ij = κ(p_i, p_j)` (noise not included).
pub fn gram_matrix(spec: &KernelSpec, hp: &KernelHyperparams, points: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    for p in points {
        check_query(spec, hp, p)?;
    }
    Ok(gram_unchecked(spec, hp, points))
}

pub(crate) fn gram_unchecked(spec: &KernelSpec, hp: &KernelHyperparams, points: &[Vec<f64>]) -> DMatrix<f64> {
    let n = points.len();
    let mut k = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let v = spec.eval(hp, &points[i], &points[j]);
            k[(i, j)] = v;
            k[(j, i)] = v;
        }
    }
    k
}

/// Disjoint coordinate groups of an additive kernel.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Decomposition {
    pub groups: Vec<Vec<usize>>,
    /// Maximum group size used to build the decomposition.
    pub max_group_size: usize,
}

impl Decomposition {
    pub fn single_group(d: usize) -> Self {
        Decomposition {
            groups: vec![(0..d).collect()],
            max_group_size: d,
        }
    }

    pub fn dim(&self) -> usize {
        self.groups.iter().map(Vec::len).sum()
    }

    /// Groups partition `0..d` and none exceeds `max_group_size`.
    pub fn is_valid_for(&self, d: usize) -> bool {
        let mut seen = vec![false; d];
        for g in &self.groups {
            if g.is_empty() || g.len() > self.max_group_size {
                return false;
            }
            for &c in g {
                if c >= d || seen[c] {
                    return false;
                }
                seen[c] = true;
            }
        }
        seen.into_iter().all(|s| s)
    }
}

/// Chunks a permutation of `0..d` into consecutive groups of at most `p`,
/// sorting the indices inside each group.
pub fn decomposition_from_ordering(ordering: &[usize], p: usize) -> Result<Decomposition> {
    let d = ordering.len();
    let mut seen = vec![false; d];
    for &c in ordering {
        if c >= d || seen[c] {
            return Err(Error::NotAPermutation);
        }
        seen[c] = true;
    }
    let p = p.clamp(1, d.max(1));
    let groups = ordering
        .chunks(p)
        .map(|chunk| {
            let mut g = chunk.to_vec();
            g.sort_unstable();
            g
        })
        .collect();
    Ok(Decomposition {
        groups,
        max_group_size: p,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FidelityKernelKind {
    ExpDecay,
    SquaredExp,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FidelityKernel {
    pub kind: FidelityKernelKind,
    /// Query coordinates holding the normalised fidelity.
    pub coords: Vec<usize>,
    /// Normalised top fidelity.
    pub top: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AdditiveSettings {
    /// Largest group size considered.
    pub p_max: usize,
    /// Random decompositions drawn per group size during likelihood maximisation.
    pub k: usize,
}

/// A kernel structure whose hyperparameters (and optionally additive
/// decomposition) are selected from data.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelFamily {
    pub stationary: Stationary,
    /// Query coordinates of numeric domain variables.
    pub numeric: Vec<usize>,
    /// Query coordinates of discrete (Hamming) domain variables.
    pub categorical: Vec<usize>,
    pub fidelity: Option<FidelityKernel>,
    pub additive: Option<AdditiveSettings>,
    /// Total query length.
    pub dim: usize,
}

impl KernelFamily {
    pub fn for_domain(domain: &Domain, stationary: Stationary) -> Self {
        KernelFamily {
            stationary,
            numeric: domain.numeric_coords(),
            categorical: domain.discrete_coords(),
            fidelity: None,
            additive: None,
            dim: domain.dim(),
        }
    }

    /// Prepends the fidelity coordinates to the query layout.
    pub fn with_fidelity(mut self, space: &FidelitySpace, kind: FidelityKernelKind) -> Self {
        let p = space.dim();
        for c in self.numeric.iter_mut().chain(self.categorical.iter_mut()) {
            *c += p;
        }
        self.fidelity = Some(FidelityKernel {
            kind,
            coords: (0..p).collect(),
            top: space.normalized_z_hf(),
        });
        self.dim += p;
        self
    }

    /// Makes the domain kernel additive over the numeric coordinates.
    /// Ignored when the domain has discrete coordinates.
    pub fn with_additive(mut self, settings: AdditiveSettings) -> Self {
        if self.categorical.is_empty() && !self.numeric.is_empty() {
            let p_max = settings.p_max.clamp(1, self.numeric.len());
            self.additive = Some(AdditiveSettings { p_max, ..settings });
        }
        self
    }

    pub fn is_additive(&self) -> bool {
        self.additive.is_some()
    }

    /// Number of coordinates a decomposition partitions.
    pub fn decomposable_dim(&self) -> usize {
        self.numeric.len()
    }

    /// Offset of the domain point inside a query.
    pub fn domain_offset(&self) -> usize {
        self.fidelity.as_ref().map_or(0, |f| f.coords.len())
    }

    pub fn spec(&self, decomposition: Option<&Decomposition>) -> KernelSpec {
        let numeric = if self.numeric.is_empty() {
            None
        } else {
            match (&self.additive, decomposition) {
                (Some(_), Some(dec)) => Some(KernelSpec::Additive {
                    groups: dec
                        .groups
                        .iter()
                        .map(|g| KernelSpec::stationary(self.stationary, g.iter().map(|&i| self.numeric[i]).collect()))
                        .collect(),
                }),
                _ => Some(KernelSpec::stationary(self.stationary, self.numeric.clone())),
            }
        };
        let categorical = (!self.categorical.is_empty()).then(|| KernelSpec::Hamming {
            coords: self.categorical.clone(),
        });
        let domain = match (numeric, categorical) {
            (Some(a), Some(b)) => KernelSpec::Tensor { factors: vec![a, b] },
            (Some(a), None) => a,
            (None, Some(b)) => b,
            (None, None) => KernelSpec::Tensor { factors: vec![] },
        };
        match &self.fidelity {
            None => domain,
            Some(f) => {
                let fidelity = match f.kind {
                    FidelityKernelKind::ExpDecay => KernelSpec::ExpDecay {
                        coords: f.coords.clone(),
                        top: f.top.clone(),
                    },
                    FidelityKernelKind::SquaredExp => KernelSpec::Se {
                        coords: f.coords.clone(),
                    },
                };
                KernelSpec::Product {
                    fidelity: Box::new(fidelity),
                    domain: Box::new(domain),
                }
            }
        }
    }
}
