//! Symmetric tridiagonal eigenvalues by Sturm bisection, eigenvectors by
//! shifted inverse iteration.

#[derive(Debug, Clone)]
pub struct SymTridiag {
    pub diag: Vec<f64>,
    /// off-diagonal, `off[i]` couples i and i+1
    pub off: Vec<f64>,
}

impl SymTridiag {
    pub fn new(diag: Vec<f64>, off: Vec<f64>) -> Self {
        assert_eq!(off.len() + 1, diag.len());
        Self { diag, off }
    }

    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }

    /// Number of eigenvalues strictly below x.
    pub fn count_below(&self, x: f64) -> usize {
        let mut count = 0;
        let mut q = self.diag[0] - x;
        if q < 0.0 {
            count += 1;
        }
        for i in 1..self.len() {
            let prev = if q == 0.0 { f64::EPSILON * (self.off[i - 1].abs() + 1e-300) } else { q };
            q = self.diag[i] - x - self.off[i - 1] * self.off[i - 1] / prev;
            if q < 0.0 {
                count += 1;
            }
        }
        count
    }

    pub fn gershgorin(&self) -> (f64, f64) {
        let n = self.len();
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for i in 0..n {
            let r = if i > 0 { self.off[i - 1].abs() } else { 0.0 }
                + if i + 1 < n { self.off[i].abs() } else { 0.0 };
            lo = lo.min(self.diag[i] - r);
            hi = hi.max(self.diag[i] + r);
        }
        (lo, hi)
    }

    /// j-th smallest eigenvalue (0-based) to absolute tolerance `tol`.
    pub fn eigenvalue(&self, j: usize, tol: f64) -> f64 {
        let (mut lo, mut hi) = self.gershgorin();
        let pad = 1e-12 * (hi.abs().max(lo.abs()) + 1.0);
        lo -= pad;
        hi += pad;
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if self.count_below(mid) > j {
                hi = mid;
            } else {
                lo = mid;
            }
            if hi - lo <= tol.max(4.0 * f64::EPSILON * mid.abs()) {
                break;
            }
        }
        0.5 * (lo + hi)
    }

    /// Solve (T - shift) x = rhs by Gaussian elimination with partial pivoting.
    pub fn solve_shifted(&self, shift: f64, rhs: &[f64]) -> Vec<f64> {
        let n = self.len();
        // banded LU with one extra super-diagonal from pivoting
        let mut a: Vec<[f64; 4]> = vec![[0.0; 4]; n]; // sub, diag, sup1, sup2
        let mut b = rhs.to_vec();
        for i in 0..n {
            a[i][0] = if i > 0 { self.off[i - 1] } else { 0.0 };
            a[i][1] = self.diag[i] - shift;
            a[i][2] = if i + 1 < n { self.off[i] } else { 0.0 };
        }
        let tiny = 1e-300;
        for i in 0..n.saturating_sub(1) {
            if a[i + 1][0].abs() > a[i][1].abs() {
                // swap rows i and i+1 (row i+1 has entries at cols i, i+1, i+2)
                let r_i = [a[i][1], a[i][2], a[i][3]];
                let r_n = [a[i + 1][0], a[i + 1][1], a[i + 1][2]];
                a[i][1] = r_n[0];
                a[i][2] = r_n[1];
                a[i][3] = r_n[2];
                a[i + 1][0] = r_i[0];
                a[i + 1][1] = r_i[1];
                a[i + 1][2] = r_i[2];
                b.swap(i, i + 1);
            }
            let piv = if a[i][1].abs() < tiny { tiny } else { a[i][1] };
            a[i][1] = piv;
            let m = a[i + 1][0] / piv;
            a[i + 1][0] = 0.0;
            a[i + 1][1] -= m * a[i][2];
            a[i + 1][2] -= m * a[i][3];
            b[i + 1] -= m * b[i];
        }
        if a[n - 1][1].abs() < tiny {
            a[n - 1][1] = tiny;
        }
        let mut x = vec![0.0; n];
        for i in (0..n).rev() {
            let mut s = b[i];
            if i + 1 < n {
                s -= a[i][2] * x[i + 1];
            }
            if i + 2 < n {
                s -= a[i][3] * x[i + 2];
            }
            x[i] = s / a[i][1];
        }
        x
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let n = self.len();
        (0..n)
            .map(|i| {
                let mut s = self.diag[i] * x[i];
                if i > 0 {
                    s += self.off[i - 1] * x[i - 1];
                }
                if i + 1 < n {
                    s += self.off[i] * x[i + 1];
                }
                s
            })
            .collect()
    }

    /// Unit eigenvector for an (accurately known) eigenvalue, plus the
    /// Rayleigh residual ||T v - lambda v||.
    pub fn eigenvector(&self, lambda: f64) -> (Vec<f64>, f64) {
        let n = self.len();
        let scale = self.gershgorin().1.abs().max(self.gershgorin().0.abs()).max(1.0);
        let shift = lambda + 1e-13 * scale;
        let mut v: Vec<f64> = (0..n).map(|i| 1.0 + 0.1 * ((i * 7919) % 13) as f64 / 13.0).collect();
        let mut res = f64::INFINITY;
        for it in 0..8 {
            let mut w = self.solve_shifted(shift, &v);
            let nrm = w.iter().map(|t| t * t).sum::<f64>().sqrt();
            w.iter_mut().for_each(|t| *t /= nrm);
            v = w;
            let tv = self.apply(&v);
            let rq: f64 = tv.iter().zip(&v).map(|(a, b)| a * b).sum();
            res = tv.iter().zip(&v).map(|(a, b)| (a - rq * b).powi(2)).sum::<f64>().sqrt();
            if it >= 2 && res < 1e-13 * scale {
                break;
            }
        }
        (v, res)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn laplacian(n: usize) -> SymTridiag {
        SymTridiag::new(vec![2.0; n], vec![-1.0; n - 1])
    }

    #[test]
    fn dirichlet_laplacian_spectrum() {
        let n = 50;
        let t = laplacian(n);
        for j in 0..5 {
            let exact = 2.0 - 2.0 * (((j + 1) as f64) * std::f64::consts::PI / (n as f64 + 1.0)).cos();
            let got = t.eigenvalue(j, 1e-14);
            assert!((got - exact).abs() < 1e-12);
            let (v, res) = t.eigenvector(got);
            assert!(res < 1e-9);
            assert!((v.iter().map(|x| x * x).sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn shifted_solve() {
        let t = laplacian(10);
        let x: Vec<f64> = (0..10).map(|i| i as f64).collect();
        let b = t.apply(&x);
        let y = t.solve_shifted(0.0, &b);
        for (a, c) in x.iter().zip(&y) {
            assert!((a - c).abs() < 1e-10);
        }
    }
}
