#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use zklab::{Grid2D, RealField};

/// Random real trigonometric polynomial with modes `|m|, |n| <= max_mode`.
pub fn band_limited(grid: Grid2D, max_mode: i32, terms: usize, seed: u64) -> RealField {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let modes: Vec<(f64, f64, f64, f64)> = (0..terms)
        .map(|_| {
            let m = rng.gen_range(-max_mode..=max_mode) as f64;
            let n = rng.gen_range(-max_mode..=max_mode) as f64;
            let xi = 2.0 * std::f64::consts::PI * m / grid.lx;
            let eta = 2.0 * std::f64::consts::PI * n / grid.ly;
            (xi, eta, rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
        })
        .collect();
    RealField::from_fn(grid, |x, y| {
        modes
            .iter()
            .map(|&(xi, eta, a, b)| {
                let ph = xi * x + eta * y;
                a * ph.cos() + b * ph.sin()
            })
            .sum()
    })
}

pub fn max_abs_diff(a: &RealField, b: &RealField) -> f64 {
    a.values
        .iter()
        .zip(&b.values)
        .fold(0.0_f64, |m, (x, y)| m.max((x - y).abs()))
}

/// Composite Simpson rule on `[a, b]` with `n` (even) panels.
pub fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let n = n + n % 2;
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for k in 1..n {
        let w = if k % 2 == 1 { 4.0 } else { 2.0 };
        s += w * f(a + k as f64 * h);
    }
    s * h / 3.0
}
