//! Standard synthetic test functions on raw coordinates.

use std::f64::consts::PI;

/// Branin on `[-5, 10] × [0, 15]`; global minimum ≈ 0.397887.
pub fn branin(x: &[f64]) -> f64 {
    let (x1, x2) = (x[0], x[1]);
    let b = 5.1 / (4.0 * PI * PI);
    let c = 5.0 / PI;
    let t = 1.0 / (8.0 * PI);
    (x2 - b * x1 * x1 + c * x1 - 6.0).powi(2) + 10.0 * (1.0 - t) * x1.cos() + 10.0
}

const HARTMANN_C: [f64; 4] = [1.0, 1.2, 3.0, 3.2];

const HARTMANN3_A: [[f64; 3]; 4] = [
    [3.0, 10.0, 30.0],
    [0.1, 10.0, 35.0],
    [3.0, 10.0, 30.0],
    [0.1, 10.0, 35.0],
];
const HARTMANN3_P: [[f64; 3]; 4] = [
    [0.3689, 0.1170, 0.2673],
    [0.4699, 0.4387, 0.7470],
    [0.1091, 0.8732, 0.5547],
    [0.03815, 0.5743, 0.8828],
];

const HARTMANN6_A: [[f64; 6]; 4] = [
    [10.0, 3.0, 17.0, 3.5, 1.7, 8.0],
    [0.05, 10.0, 17.0, 0.1, 8.0, 14.0],
    [3.0, 3.5, 1.7, 10.0, 17.0, 8.0],
    [17.0, 8.0, 0.05, 10.0, 0.1, 14.0],
];
const HARTMANN6_P: [[f64; 6]; 4] = [
    [0.1312, 0.1696, 0.5569, 0.0124, 0.8283, 0.5886],
    [0.2329, 0.4135, 0.8307, 0.3736, 0.1004, 0.9991],
    [0.2348, 0.1451, 0.3522, 0.2883, 0.3047, 0.6650],
    [0.4047, 0.8828, 0.8732, 0.5743, 0.1091, 0.0381],
];

fn hartmann<const D: usize>(a: &[[f64; D]; 4], p: &[[f64; D]; 4], x: &[f64]) -> f64 {
    (0..4)
        .map(|i| {
            let r: f64 = (0..D).map(|j| a[i][j] * (x[j] - p[i][j]).powi(2)).sum();
            HARTMANN_C[i] * (-r).exp()
        })
        .sum()
}

/// Hartmann3 on `[0, 1]³`, in its maximisation form; maximum ≈ 3.86278.
pub fn hartmann3(x: &[f64]) -> f64 {
    hartmann(&HARTMANN3_A, &HARTMANN3_P, x)
}

/// Hartmann6 on `[0, 1]⁶`, in its maximisation form; maximum ≈ 3.32237.
pub fn hartmann6(x: &[f64]) -> f64 {
    hartmann(&HARTMANN6_A, &HARTMANN6_P, x)
}

/// Park1 on `[0, 1]⁴`. The first term is written as
/// `(√(x1² + c) − x1) / 2`, which equals `x1/2 (√(1 + c/x1²) − 1)` for
/// `x1 > 0` and stays finite at `x1 = 0`.
pub fn park1(x: &[f64]) -> f64 {
    let (x1, x2, x3, x4) = (x[0], x[1], x[2], x[3]);
    let c = (x2 + x3 * x3) * x4;
    0.5 * ((x1 * x1 + c).sqrt() - x1) + (x1 + 3.0 * x4) * (1.0 + x3.sin()).exp()
}

/// Park2 on `[0, 1]⁴`.
pub fn park2(x: &[f64]) -> f64 {
    let (x1, x2, x3, x4) = (x[0], x[1], x[2], x[3]);
    2.0 / 3.0 * (x1 + x2).exp() - x4 * x3.sin() + x3
}

/// Borehole water flow rate. Coordinates are
/// `(rw, r, Tu, Hu, Tl, Hl, L, Kw)`.
pub fn borehole(x: &[f64]) -> f64 {
    let (rw, r, tu, hu, tl, hl, l, kw) = (x[0], x[1], x[2], x[3], x[4], x[5], x[6], x[7]);
    let lr = (r / rw).ln();
    2.0 * PI * tu * (hu - hl) / (lr * (1.0 + 2.0 * l * tu / (lr * rw * rw * kw) + tu / tl))
}

pub const BOREHOLE_BOUNDS: [(&str, f64, f64); 8] = [
    ("rw", 0.05, 0.15),
    ("r", 100.0, 50000.0),
    ("Tu", 63070.0, 115600.0),
    ("Hu", 990.0, 1110.0),
    ("Tl", 63.1, 116.0),
    ("Hl", 700.0, 820.0),
    ("L", 1120.0, 1680.0),
    ("Kw", 9855.0, 12045.0),
];
