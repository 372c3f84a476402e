//! Test-side oracles, independent of the library's numerics.
#![allow(dead_code)]

use std::f64::consts::{PI, SQRT_2};

pub fn phi_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / SQRT_2)
}

pub fn phi_inv(p: f64) -> f64 {
    let (mut lo, mut hi) = (-40.0, 40.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if phi_cdf(mid) < p {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Composite Simpson rule with `n` (even) panels.
pub fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for k in 1..n {
        s += f(a + k as f64 * h) * if k % 2 == 1 { 4.0 } else { 2.0 };
    }
    s * h / 3.0
}

pub fn gamma1(r2: f64) -> f64 {
    (-0.5 * r2).exp() / (2.0 * PI).sqrt()
}

/// Volume vector with entries at least `floor`, built from raw weights.
pub fn volumes_from(raw: &[f64], floor: f64) -> Vec<f64> {
    let m = raw.len();
    let s: f64 = raw.iter().sum();
    let scale = 1.0 - floor * m as f64;
    let mut a: Vec<f64> = raw.iter().map(|x| floor + scale * x / s).collect();
    let fix = 1.0 - a.iter().sum::<f64>();
    a[m - 1] += fix;
    a
}

/// Zero-sum direction from raw entries.
pub fn zero_sum(raw: &[f64]) -> Vec<f64> {
    let mean = raw.iter().sum::<f64>() / raw.len() as f64;
    raw.iter().map(|x| x - mean).collect()
}
