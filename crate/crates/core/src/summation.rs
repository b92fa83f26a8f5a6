//! Pairwise summation and exact-argument roots of unity.

use num_complex::Complex64;
use std::f64::consts::TAU;

const LEAF: usize = 16;

/// Tree summation; error grows like log(n) rather than n.
pub fn pairwise_sum(xs: &[Complex64]) -> Complex64 {
    if xs.len() <= LEAF {
        return xs.iter().sum();
    }
    let (a, b) = xs.split_at(xs.len() / 2);
    pairwise_sum(a) + pairwise_sum(b)
}

pub fn pairwise_sum_real(xs: &[f64]) -> f64 {
    if xs.len() <= LEAF {
        return xs.iter().sum();
    }
    let (a, b) = xs.split_at(xs.len() / 2);
    pairwise_sum_real(a) + pairwise_sum_real(b)
}

/// e(num/den) = exp(2 pi i num/den), reducing the argument to [-1/2, 1/2) exactly first.
pub fn e_frac(num: i128, den: u64) -> Complex64 {
    let d = den as i128;
    let mut r = num.rem_euclid(d);
    if 2 * r >= d {
        r -= d;
    }
    let (s, c) = (TAU * r as f64 / den as f64).sin_cos();
    Complex64::new(c, s)
}

/// exp(2 pi i t) for real t.
pub fn e_real(t: f64) -> Complex64 {
    let r = t - t.round();
    let (s, c) = (TAU * r).sin_cos();
    Complex64::new(c, s)
}

/// The m-th roots of unity e(k/m), k = 0..m.
#[derive(Debug, Clone)]
pub struct RootTable {
    pub m: u64,
    roots: Vec<Complex64>,
}

impl RootTable {
    pub fn new(m: u64) -> Self {
        RootTable { m, roots: (0..m).map(|k| e_frac(k as i128, m)).collect() }
    }

    pub fn get(&self, k: i128) -> Complex64 {
        self.roots[k.rem_euclid(self.m as i128) as usize]
    }
}

/// Gauss-Legendre nodes and weights on [-1, 1], by Newton iteration on P_n.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let nf = n as f64;
    for i in 0..n.div_ceil(2) {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let kf = k as f64;
                (p0, p1) = (p1, ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf);
            }
            let p = if n == 0 { 1.0 } else if n == 1 { x } else { p1 };
            let pm = if n == 1 { 1.0 } else { p0 };
            dp = nf * (x * p - pm) / (x * x - 1.0);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}
