//! Quadrature, small linear-algebra kernels and polynomial helpers.

pub mod gauss;
pub mod poly;
pub mod sphere;
pub mod tridiag;

/// Binomial coefficient as f64 (zero outside the usual range).
pub fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Critical Sobolev exponent 2N/(N-2).
pub fn two_star(n: usize) -> f64 {
    2.0 * n as f64 / (n as f64 - 2.0)
}
