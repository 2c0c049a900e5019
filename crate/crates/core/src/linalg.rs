//! Cholesky factors with jitter escalation and row appends.

use nalgebra::{Cholesky, DMatrix, DVector};

use crate::error::{Error, Result};

const JITTER_START: f64 = 1e-9;
const JITTER_STOP: f64 = 1e-3;

/// Lower-triangular factor `L` with `L Lᵀ = A + jitter·I`.
#[derive(Debug, Clone)]
pub struct Factor {
    l: DMatrix<f64>,
    jitter: f64,
}

impl Factor {
    /// Factors a symmetric matrix, escalating diagonal jitter from
    /// `1e-9·tr(A)/n` by ×10 up to `1e-3·tr(A)/n` when needed.
    pub fn new(a: &DMatrix<f64>) -> Option<Factor> {
        let n = a.nrows();
        if n == 0 {
            return Some(Factor {
                l: DMatrix::zeros(0, 0),
                jitter: 0.0,
            });
        }
        if let Some(ch) = Cholesky::new(a.clone()) {
            return Some(Factor {
                l: ch.unpack(),
                jitter: 0.0,
            });
        }
        let mean_diag = (a.trace() / n as f64).abs().max(f64::MIN_POSITIVE);
        let mut rel = JITTER_START;
        while rel <= JITTER_STOP * (1.0 + 1e-9) {
            let jitter = rel * mean_diag;
            let mut m = a.clone();
            for i in 0..n {
                m[(i, i)] += jitter;
            }
            if let Some(ch) = Cholesky::new(m) {
                return Some(Factor { l: ch.unpack(), jitter });
            }
            rel *= 10.0;
        }
        None
    }

    pub fn dim(&self) -> usize {
        self.l.nrows()
    }

    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    pub fn lower(&self) -> &DMatrix<f64> {
        &self.l
    }

    /// `L⁻¹ b`.
    pub fn solve_lower(&self, b: &DVector<f64>) -> DVector<f64> {
        let mut x = b.clone();
        if self.dim() > 0 {
            self.l.solve_lower_triangular_mut(&mut x);
        }
        x
    }

    /// `(L Lᵀ)⁻¹ b`.
    pub fn solve(&self, b: &DVector<f64>) -> DVector<f64> {
        let mut x = self.solve_lower(b);
        if self.dim() > 0 {
            self.l.tr_solve_lower_triangular_mut(&mut x);
        }
        x
    }

    pub fn log_det(&self) -> f64 {
        2.0 * self.l.diagonal().iter().map(|v| v.ln()).sum::<f64>()
    }

    /// Factor of `[[A, c], [cᵀ, diag]]` from the factor of `A`. Fails when
    /// the new pivot is not safely positive.
    pub fn append(&self, cross: &DVector<f64>, diag: f64) -> Result<Factor> {
        let n = self.dim();
        let row = self.solve_lower(cross);
        let pivot_sq = diag + self.jitter - row.norm_squared();
        if !(pivot_sq > 1e-12 * diag.abs().max(f64::MIN_POSITIVE)) {
            return Err(Error::SingularGram);
        }
        let mut l = self.l.clone().resize(n + 1, n + 1, 0.0);
        for j in 0..n {
            l[(n, j)] = row[j];
        }
        l[(n, n)] = pivot_sq.sqrt();
        Ok(Factor { l, jitter: self.jitter })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spd(n: usize) -> DMatrix<f64> {
        let b = DMatrix::from_fn(n, n, |i, j| {
            ((i * 7 + j * 3) % 5) as f64 - 2.0 + if i == j { 0.5 } else { 0.0 }
        });
        &b * b.transpose() + DMatrix::identity(n, n)
    }

    #[test]
    fn reconstructs_and_solves() {
        let a = spd(6);
        let f = Factor::new(&a).unwrap();
        let rec = f.lower() * f.lower().transpose();
        assert!((rec - &a).norm() / a.norm() < 1e-12);
        let b = DVector::from_fn(6, |i, _| i as f64 - 2.0);
        let x = f.solve(&b);
        assert!((&a * x - b).norm() < 1e-10);
    }

    #[test]
    fn rank_deficient_needs_jitter() {
        let a = DMatrix::from_element(2, 2, 1.0);
        let f = Factor::new(&a).unwrap();
        assert!(f.jitter() > 0.0);
    }

    #[test]
    fn append_matches_full() {
        let a = spd(5);
        let head = a.view((0, 0), (4, 4)).into_owned();
        let f = Factor::new(&head).unwrap();
        let cross = a.view((0, 4), (4, 1)).column(0).into_owned();
        let g = f.append(&cross, a[(4, 4)]).unwrap();
        let full = Factor::new(&a).unwrap();
        assert!((g.lower() - full.lower()).norm() < 1e-10);
    }
}
