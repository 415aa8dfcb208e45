//! Sparse multivariate polynomials, harmonic projection and orthonormal
//! spherical-harmonic bases in any dimension.

use std::collections::BTreeMap;

use super::sphere::monomial_moment;

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Poly {
    pub vars: usize,
    pub terms: BTreeMap<Vec<u32>, f64>,
}

impl Poly {
    pub fn zero(vars: usize) -> Self {
        Self { vars, terms: BTreeMap::new() }
    }

    pub fn monomial(exps: Vec<u32>, coef: f64) -> Self {
        let vars = exps.len();
        let mut terms = BTreeMap::new();
        terms.insert(exps, coef);
        Self { vars, terms }
    }

    fn add_term(&mut self, e: Vec<u32>, c: f64) {
        let v = self.terms.entry(e).or_insert(0.0);
        *v += c;
    }

    pub fn prune(mut self) -> Self {
        self.terms.retain(|_, c| *c != 0.0);
        self
    }

    pub fn scaled(&self, s: f64) -> Self {
        let mut out = self.clone();
        out.terms.values_mut().for_each(|c| *c *= s);
        out
    }

    pub fn add(&self, other: &Poly) -> Self {
        let mut out = self.clone();
        for (e, c) in &other.terms {
            out.add_term(e.clone(), *c);
        }
        out.prune()
    }

    pub fn mul(&self, other: &Poly) -> Self {
        let mut out = Poly::zero(self.vars);
        for (e1, c1) in &self.terms {
            for (e2, c2) in &other.terms {
                let e: Vec<u32> = e1.iter().zip(e2).map(|(a, b)| a + b).collect();
                out.add_term(e, c1 * c2);
            }
        }
        out.prune()
    }

    /// Multiply by |x|^2.
    pub fn times_r2(&self) -> Self {
        let mut out = Poly::zero(self.vars);
        for (e, c) in &self.terms {
            for i in 0..self.vars {
                let mut f = e.clone();
                f[i] += 2;
                out.add_term(f, *c);
            }
        }
        out.prune()
    }

    pub fn laplacian(&self) -> Self {
        let mut out = Poly::zero(self.vars);
        for (e, c) in &self.terms {
            for i in 0..self.vars {
                if e[i] >= 2 {
                    let mut f = e.clone();
                    f[i] -= 2;
                    out.add_term(f, c * (e[i] * (e[i] - 1)) as f64);
                }
            }
        }
        out.prune()
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.terms
            .iter()
            .map(|(e, c)| c * e.iter().zip(x).map(|(k, v)| v.powi(*k as i32)).product::<f64>())
            .sum()
    }

    pub fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; self.vars];
        for (e, c) in &self.terms {
            for i in 0..self.vars {
                if e[i] == 0 {
                    continue;
                }
                let mut t = c * e[i] as f64;
                for (j, (k, v)) in e.iter().zip(x).enumerate() {
                    let p = if j == i { *k as i32 - 1 } else { *k as i32 };
                    t *= v.powi(p);
                }
                g[i] += t;
            }
        }
        g
    }

    /// ∫_{S^{vars-1}} self dS, exact.
    pub fn sphere_integral(&self) -> f64 {
        self.terms.iter().map(|(e, c)| c * monomial_moment(e)).sum()
    }

    pub fn degree(&self) -> u32 {
        self.terms.keys().map(|e| e.iter().sum()).max().unwrap_or(0)
    }
}

/// Harmonic part of a homogeneous polynomial of degree l.
pub fn harmonic_projection(p: &Poly, l: u32) -> Poly {
    let m = p.vars as f64;
    let mut out = p.clone();
    let mut c = 1.0;
    let mut lap = p.clone();
    let mut j = 0u32;
    while 2 * (j + 1) <= l {
        lap = lap.laplacian();
        c = -c / (2.0 * (j + 1) as f64 * (2.0 * l as f64 + m - 4.0 - 2.0 * j as f64));
        let mut term = lap.clone();
        for _ in 0..=j {
            term = term.times_r2();
        }
        out = out.add(&term.scaled(c));
        j += 1;
    }
    out
}

fn exponents_of_degree(vars: usize, deg: u32, out: &mut Vec<Vec<u32>>, cur: &mut Vec<u32>) {
    if cur.len() + 1 == vars {
        cur.push(deg);
        out.push(cur.clone());
        cur.pop();
        return;
    }
    for k in (0..=deg).rev() {
        cur.push(k);
        exponents_of_degree(vars, deg - k, out, cur);
        cur.pop();
    }
}

/// All exponent vectors in `vars` variables with total degree `deg`.
pub fn exponents(vars: usize, deg: u32) -> Vec<Vec<u32>> {
    let mut out = Vec::new();
    if vars == 0 {
        return out;
    }
    exponents_of_degree(vars, deg, &mut out, &mut Vec::new());
    out
}

/// dim of degree-l harmonics in R^m.
pub fn harmonic_dim(m: usize, l: u32) -> usize {
    fn binom(n: i64, k: i64) -> i64 {
        if n < 0 || k < 0 || k > n {
            return 0;
        }
        let mut r: i64 = 1;
        for i in 0..k {
            r = r * (n - i) / (i + 1);
        }
        r
    }
    let (m, l) = (m as i64, l as i64);
    (binom(l + m - 1, m - 1) - binom(l + m - 3, m - 1)) as usize
}

/// L^2(S^{m-1})-orthonormal basis of degree-l harmonic polynomials.
pub fn harmonic_basis(m: usize, l: u32) -> Vec<Poly> {
    if m == 1 {
        // S^0 = {±1}: even function 1/√2 and odd function x/√2
        return match l {
            0 => vec![Poly::monomial(vec![0], 1.0 / 2f64.sqrt())],
            1 => vec![Poly::monomial(vec![1], 1.0 / 2f64.sqrt())],
            _ => vec![],
        };
    }
    let mut basis: Vec<Poly> = Vec::new();
    for e in exponents(m, l) {
        if e[m - 1] > 1 {
            continue;
        }
        let mut h = harmonic_projection(&Poly::monomial(e, 1.0), l);
        for b in &basis {
            let ip = h.mul(b).sphere_integral();
            h = h.add(&b.scaled(-ip));
        }
        let nrm = h.mul(&h).sphere_integral().sqrt();
        if nrm > 1e-12 {
            basis.push(h.scaled(1.0 / nrm));
        }
    }
    debug_assert_eq!(basis.len(), harmonic_dim(m, l));
    basis
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn projection_is_harmonic() {
        for m in 2..=5 {
            for l in 0..=5u32 {
                for e in exponents(m, l) {
                    let h = harmonic_projection(&Poly::monomial(e.clone(), 1.0), l);
                    let lap = h.laplacian();
                    assert!(lap.terms.values().all(|c| c.abs() < 1e-10), "m={m} l={l} {e:?}");
                }
            }
        }
    }

    #[test]
    fn basis_sizes_and_orthonormality() {
        for m in 1..=5 {
            for l in 0..=4u32 {
                let b = harmonic_basis(m, l);
                assert_eq!(b.len(), harmonic_dim(m, l), "m={m} l={l}");
                for i in 0..b.len() {
                    for j in 0..b.len() {
                        let ip = if m == 1 {
                            b[i].eval(&[1.0]) * b[j].eval(&[1.0]) + b[i].eval(&[-1.0]) * b[j].eval(&[-1.0])
                        } else {
                            b[i].mul(&b[j]).sphere_integral()
                        };
                        let expect = if i == j { 1.0 } else { 0.0 };
                        assert!((ip - expect).abs() < 1e-10);
                    }
                }
            }
        }
    }

    #[test]
    fn harmonic_dims() {
        assert_eq!(harmonic_dim(3, 2), 5);
        assert_eq!(harmonic_dim(5, 1), 5);
        assert_eq!(harmonic_dim(1, 2), 0);
        assert_eq!(harmonic_dim(2, 3), 2);
    }
}
