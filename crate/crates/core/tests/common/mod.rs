#![allow(dead_code)]

use kabc_core::spectral::{Field, Grid};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn max_diff(a: &Field, b: &Field) -> f64 {
    a.values().iter().zip(b.values()).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

/// Random real trigonometric polynomial with modes `1..=max_mode` plus a
/// mean, coefficients damped like `1/(1+m)^2`.
pub fn band_limited(grid: Grid, max_mode: usize, seed: u64, scale: f64) -> Field {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let k0 = 2.0 * std::f64::consts::PI / grid.length();
    let mean: f64 = rng.random_range(-0.5..0.5);
    let terms: Vec<(f64, f64, f64)> = (1..=max_mode)
        .map(|m| {
            let damp = 1.0 / (1.0 + m as f64).powi(2);
            (m as f64 * k0, damp * rng.random_range(-1.0..1.0), damp * rng.random_range(-1.0..1.0))
        })
        .collect();
    Field::from_fn(grid, |x| {
        scale * (mean + terms.iter().map(|&(w, a, b)| a * (w * x).cos() + b * (w * x).sin()).sum::<f64>())
    })
}

/// Composite Simpson rule on `[a, b]` with `m` (even) intervals.
pub fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, m: usize) -> f64 {
    let h = (b - a) / m as f64;
    let mut s = f(a) + f(b);
    for i in 1..m {
        s += f(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    s * h / 3.0
}
