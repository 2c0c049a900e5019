//! Derivative-free compass search inside a box.

/// Coordinate pattern search started at `x0`. Steps begin at `initial_step`
/// of each box width and halve whenever no coordinate move improves.
/// Stops after `budget` evaluations or when every step is below `1e-4` of
/// its width. Returns the best point and value (including `x0`).
pub fn compass_search<F>(
    mut f: F,
    bounds: &[(f64, f64)],
    x0: &[f64],
    f0: Option<f64>,
    initial_step: f64,
    budget: usize,
) -> (Vec<f64>, f64)
where
    F: FnMut(&[f64]) -> f64,
{
    let mut x: Vec<f64> = x0.iter().zip(bounds).map(|(&v, &(lo, hi))| v.clamp(lo, hi)).collect();
    let mut evals = 0usize;
    let mut fx = match f0 {
        Some(v) => v,
        None => {
            evals += 1;
            f(&x)
        }
    };
    let mut step: Vec<f64> = bounds.iter().map(|(lo, hi)| initial_step * (hi - lo)).collect();
    let floor: Vec<f64> = bounds.iter().map(|(lo, hi)| 1e-4 * (hi - lo)).collect();
    'outer: while evals < budget {
        if step.iter().zip(&floor).all(|(s, fl)| s <= fl) {
            break;
        }
        let mut improved = false;
        for i in 0..x.len() {
            if step[i] <= floor[i] {
                continue;
            }
            for dir in [1.0, -1.0] {
                if evals >= budget {
                    break 'outer;
                }
                let mut y = x.clone();
                y[i] = (x[i] + dir * step[i]).clamp(bounds[i].0, bounds[i].1);
                if y[i] == x[i] {
                    continue;
                }
                evals += 1;
                let fy = f(&y);
                if fy > fx {
                    x = y;
                    fx = fy;
                    improved = true;
                    break;
                }
            }
        }
        if !improved {
            for s in &mut step {
                *s *= 0.5;
            }
        }
    }
    (x, fx)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn converges_on_quadratic() {
        let (x, v) = compass_search(
            |x| -(x[0] - 0.3).powi(2) - 2.0 * (x[1] + 0.1).powi(2),
            &[(-1.0, 1.0), (-1.0, 1.0)],
            &[0.9, 0.9],
            None,
            0.25,
            400,
        );
        assert!((x[0] - 0.3).abs() < 1e-3 && (x[1] + 0.1).abs() < 1e-3, "{x:?}");
        assert!(v > -1e-5);
    }

    #[test]
    fn never_worse_than_start() {
        let (x, v) = compass_search(|x| -x[0].abs(), &[(-1.0, 1.0)], &[0.0], None, 0.25, 10);
        assert_eq!(x, vec![0.0]);
        assert_eq!(v, 0.0);
    }
}
