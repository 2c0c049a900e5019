//! Dividing-rectangles (DIRECT) global search over a box.

use std::collections::BTreeMap;

struct Rect {
    center: Vec<f64>,
    levels: Vec<u32>,
    // negated objective; DIRECT is formulated for minimisation
    value: f64,
}

impl Rect {
    fn size(&self) -> f64 {
        0.5 * self.levels.iter().map(|&k| 9f64.powi(-(k as i32))).sum::<f64>().sqrt()
    }

    fn size_key(&self) -> Vec<u32> {
        let mut k = self.levels.clone();
        k.sort_unstable();
        k
    }
}

/// Maximises `f` over `bounds` with at most `budget` evaluations.
/// Deterministic; returns the best evaluated centre and its value.
pub fn maximize_direct<F>(mut f: F, bounds: &[(f64, f64)], budget: usize) -> (Vec<f64>, f64)
where
    F: FnMut(&[f64]) -> f64,
{
    let d = bounds.len();
    let to_box = |u: &[f64]| -> Vec<f64> { u.iter().zip(bounds).map(|(&v, &(lo, hi))| lo + v * (hi - lo)).collect() };
    let mut evals = 0usize;
    let mut eval = |u: &[f64], evals: &mut usize| -> f64 {
        *evals += 1;
        let v = f(&to_box(u));
        if v.is_nan() {
            f64::INFINITY
        } else {
            -v
        }
    };

    let centre = vec![0.5; d];
    let v0 = eval(&centre, &mut evals);
    let mut rects = vec![Rect {
        center: centre,
        levels: vec![0; d],
        value: v0,
    }];
    let mut best = 0usize;
    if d == 0 {
        return (to_box(&rects[0].center), -v0);
    }

    while evals + 2 <= budget {
        let chosen = potentially_optimal(&rects, rects[best].value);
        if chosen.is_empty() {
            break;
        }
        let mut progressed = false;
        for idx in chosen {
            if evals + 2 > budget {
                break;
            }
            let min_level = *rects[idx].levels.iter().min().unwrap();
            let long: Vec<usize> = (0..d).filter(|&i| rects[idx].levels[i] == min_level).collect();
            let affordable = ((budget - evals) / 2).min(long.len());
            let dims = &long[..affordable];
            let delta = 3f64.powi(-(min_level as i32 + 1));
            let mut samples = Vec::with_capacity(dims.len());
            for &i in dims {
                let mut lo = rects[idx].center.clone();
                lo[i] -= delta;
                let mut hi = rects[idx].center.clone();
                hi[i] += delta;
                let vlo = eval(&lo, &mut evals);
                let vhi = eval(&hi, &mut evals);
                samples.push((i, lo, vlo, hi, vhi));
            }
            samples.sort_by(|a, b| a.2.min(a.4).total_cmp(&b.2.min(b.4)).then(a.0.cmp(&b.0)));
            // the best direction is split first so its children keep the largest boxes
            for (i, lo, vlo, hi, vhi) in samples {
                rects[idx].levels[i] += 1;
                let levels = rects[idx].levels.clone();
                for (c, v) in [(lo, vlo), (hi, vhi)] {
                    rects.push(Rect {
                        center: c,
                        levels: levels.clone(),
                        value: v,
                    });
                    if v < rects[best].value {
                        best = rects.len() - 1;
                    }
                }
            }
            progressed = true;
        }
        if !progressed {
            break;
        }
    }
    (to_box(&rects[best].center), -rects[best].value)
}

/// Indices of potentially optimal rectangles: the best rectangle of each
/// size class lying on the lower-right convex hull of (size, value),
/// subject to the usual ε-improvement test.
fn potentially_optimal(rects: &[Rect], fmin: f64) -> Vec<usize> {
    let mut by_size: BTreeMap<Vec<u32>, usize> = BTreeMap::new();
    for (i, r) in rects.iter().enumerate() {
        by_size
            .entry(r.size_key())
            .and_modify(|j| {
                if r.value < rects[*j].value {
                    *j = i;
                }
            })
            .or_insert(i);
    }
    let mut groups: Vec<(f64, f64, usize)> = by_size
        .values()
        .map(|&i| (rects[i].size(), rects[i].value, i))
        .collect();
    groups.sort_by(|a, b| a.0.total_cmp(&b.0));
    let eps = 1e-4 * fmin.abs();
    let mut out = Vec::new();
    for (j, &(dj, vj, idx)) in groups.iter().enumerate() {
        let mut k_lo = 0.0f64;
        let mut k_hi = f64::INFINITY;
        for (i, &(di, vi, _)) in groups.iter().enumerate() {
            if i == j {
                continue;
            }
            if di < dj {
                k_lo = k_lo.max((vj - vi) / (dj - di));
            } else if di > dj {
                k_hi = k_hi.min((vi - vj) / (di - dj));
            }
        }
        if k_lo > k_hi || k_hi <= 0.0 && j + 1 < groups.len() {
            continue;
        }
        if k_hi.is_finite() && vj - k_hi * dj > fmin - eps {
            continue;
        }
        out.push(idx);
    }
    // largest rectangles first
    out.reverse();
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn finds_1d_quadratic_peak() {
        let (x, v) = maximize_direct(|x| -(x[0] - 0.3).powi(2), &[(0.0, 1.0)], 200);
        assert!((x[0] - 0.3).abs() <= 0.01, "{x:?}");
        assert!(v <= 0.0);
    }

    #[test]
    fn constant_returns_centre() {
        let (x, v) = maximize_direct(|_| 4.0, &[(0.0, 2.0), (-1.0, 1.0)], 100);
        assert_eq!(x, vec![1.0, 0.0]);
        assert_eq!(v, 4.0);
    }

    #[test]
    fn deterministic_and_within_budget() {
        let mut calls = 0;
        let f = |x: &[f64]| -(x[0] - 0.2).powi(2) - (x[1] + 0.4).powi(2) + (5.0 * x[0]).sin();
        let a = maximize_direct(
            |x| {
                calls += 1;
                f(x)
            },
            &[(-1.0, 1.0), (-1.0, 1.0)],
            150,
        );
        assert!(calls <= 150);
        let b = maximize_direct(f, &[(-1.0, 1.0), (-1.0, 1.0)], 150);
        assert_eq!(a, b);
    }

    #[test]
    fn multimodal_2d() {
        // global max of a two-bump function at (0.8, 0.2)
        let f = |x: &[f64]| {
            (-(30.0 * ((x[0] - 0.8).powi(2) + (x[1] - 0.2).powi(2)))).exp()
                + 0.6 * (-(10.0 * ((x[0] - 0.2).powi(2) + (x[1] - 0.7).powi(2)))).exp()
        };
        let (x, _) = maximize_direct(f, &[(0.0, 1.0), (0.0, 1.0)], 400);
        assert!((x[0] - 0.8).abs() < 0.03 && (x[1] - 0.2).abs() < 0.03, "{x:?}");
    }
}
