//! Simple regret from traces, scored on noise-free values.

use mfbo::orchestrator::TraceRecord;
use mfbo::Point;

use crate::catalog::Benchmark;

/// Running best noise-free value over successful top-fidelity queries;
/// `None` until the first one.
pub fn best_true_values(trace: &[TraceRecord], bench: &Benchmark) -> Vec<Option<f64>> {
    let top = bench.fidelity.as_ref().map(|s| s.z_hf());
    best_values_by(trace, top, |p| bench.value(p))
}

/// Running best of `truth` over successful queries at fidelity `top`
/// (every query when `top` is `None`).
pub fn best_values_by<F: Fn(&Point) -> f64>(trace: &[TraceRecord], top: Option<&[f64]>, truth: F) -> Vec<Option<f64>> {
    let mut best: Option<f64> = None;
    trace
        .iter()
        .map(|r| {
            let at_top = match (top, &r.z) {
                (Some(t), Some(z)) => z.as_slice() == t,
                (Some(_), None) => false,
                (None, _) => true,
            };
            if at_top && r.y.is_some() {
                let v = truth(&r.x);
                best = Some(best.map_or(v, |b| b.max(v)));
            }
            best
        })
        .collect()
}

/// `S_n = f(x*) − max_{t ≤ n} f(x_t)`, `∞` before the first top-fidelity query.
pub fn regret_curve(best: &[Option<f64>], f_opt: f64) -> Vec<f64> {
    best.iter()
        .map(|b| b.map_or(f64::INFINITY, |v| (f_opt - v).max(0.0)))
        .collect()
}

/// Regret curve of a trace against the benchmark's known optimum.
pub fn simple_regret(trace: &[TraceRecord], bench: &Benchmark) -> Option<Vec<f64>> {
    let f_opt = bench.optimum?;
    Some(regret_curve(&best_true_values(trace, bench), f_opt))
}

/// Median; the mean of the middle pair for even counts.
pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    match n {
        0 => f64::NAN,
        _ if n % 2 == 1 => v[n / 2],
        _ => 0.5 * (v[n / 2 - 1] + v[n / 2]),
    }
}
