//! Product quadrature on S^{m-1} and closed-form monomial moments.

use super::gauss::{gauss_jacobi, ln_gamma_fn};

/// |S^{m-1}|, surface area of the unit sphere in R^m.
pub fn sphere_area(m: usize) -> f64 {
    let h = m as f64 / 2.0;
    2.0 * std::f64::consts::PI.powf(h) / super::gauss::gamma_fn(h)
}

/// Volume of the unit ball in R^m.
pub fn ball_volume(m: usize) -> f64 {
    sphere_area(m) / m as f64
}

/// ∫_{S^{m-1}} x^e dS for a multi-exponent e (closed form, zero if any entry is odd).
pub fn monomial_moment(e: &[u32]) -> f64 {
    if e.iter().any(|&k| k % 2 == 1) {
        return 0.0;
    }
    let m = e.len() as f64;
    let total: f64 = e.iter().map(|&k| k as f64).sum();
    let mut lg = -ln_gamma_fn((total + m) / 2.0);
    for &k in e {
        lg += ln_gamma_fn((k as f64 + 1.0) / 2.0);
    }
    2.0 * lg.exp()
}

/// Points on S^{m-1} (flattened, m per point) with weights.
#[derive(Debug, Clone)]
pub struct SphereRule {
    pub dim: usize,
    pub points: Vec<f64>,
    pub weights: Vec<f64>,
}

impl SphereRule {
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i * self.dim..(i + 1) * self.dim]
    }

    pub fn integrate(&self, mut f: impl FnMut(&[f64]) -> f64) -> f64 {
        (0..self.len()).map(|i| self.weights[i] * f(self.point(i))).sum()
    }

    /// Rule exact for polynomials of degree <= `degree` on S^{dim-1}.
    pub fn new(dim: usize, degree: usize) -> Self {
        assert!(dim >= 1);
        if dim == 1 {
            return SphereRule { dim: 1, points: vec![1.0, -1.0], weights: vec![1.0, 1.0] };
        }
        let inner = SphereRule::new(dim - 1, degree);
        let n = degree / 2 + 1;
        let e = (dim as f64 - 3.0) / 2.0;
        let g = gauss_jacobi(n, e, e);
        let mut points = Vec::with_capacity(g.len() * inner.len() * dim);
        let mut weights = Vec::with_capacity(g.len() * inner.len());
        for (t, wt) in g.nodes.iter().zip(&g.weights) {
            let s = (1.0 - t * t).max(0.0).sqrt();
            for j in 0..inner.len() {
                points.push(*t);
                points.extend(inner.point(j).iter().map(|v| s * v));
                weights.push(wt * inner.weights[j]);
            }
        }
        SphereRule { dim, points, weights }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn areas() {
        assert!((sphere_area(2) - 2.0 * std::f64::consts::PI).abs() < 1e-14);
        assert!((sphere_area(3) - 4.0 * std::f64::consts::PI).abs() < 1e-13);
        assert!((monomial_moment(&[0, 0, 0]) - sphere_area(3)).abs() < 1e-13);
    }

    #[test]
    fn rule_matches_moments() {
        for dim in 1..=5 {
            let rule = SphereRule::new(dim, 8);
            let exps: Vec<Vec<u32>> = match dim {
                1 => vec![vec![2], vec![0]],
                2 => vec![vec![2, 4], vec![8, 0]],
                3 => vec![vec![2, 2, 2], vec![4, 0, 2]],
                4 => vec![vec![2, 2, 2, 2], vec![0, 6, 0, 2]],
                _ => vec![vec![2, 0, 2, 2, 2], vec![4, 2, 0, 0, 2], vec![1, 1, 0, 0, 0]],
            };
            for e in exps {
                let v = rule.integrate(|x| {
                    x.iter().zip(&e).map(|(xi, &k)| xi.powi(k as i32)).product()
                });
                assert!((v - monomial_moment(&e)).abs() < 1e-13, "dim {dim} {e:?}");
            }
        }
    }

    #[test]
    fn points_are_unit() {
        let r = SphereRule::new(4, 6);
        for i in 0..r.len() {
            let n: f64 = r.point(i).iter().map(|v| v * v).sum();
            assert!((n - 1.0).abs() < 1e-14);
        }
    }
}
