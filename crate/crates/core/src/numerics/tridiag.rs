//! Symmetric tridiagonal matrices: products, solves, Sturm counts and eigenpairs.

use crate::error::{Error, Result};

/// A symmetric tridiagonal matrix stored by its diagonal and first off-diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct SymTridiag {
    pub diag: Vec<f64>,
    /// `off[i]` couples rows `i` and `i + 1`.
    pub off: Vec<f64>,
}

impl SymTridiag {
    pub fn zeros(n: usize) -> Self {
        SymTridiag {
            diag: vec![0.0; n],
            off: vec![0.0; n.saturating_sub(1)],
        }
    }

    pub fn identity(n: usize) -> Self {
        SymTridiag {
            diag: vec![1.0; n],
            off: vec![0.0; n.saturating_sub(1)],
        }
    }

    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let n = self.len();
        assert_eq!(x.len(), n);
        let mut y: Vec<f64> = self.diag.iter().zip(x).map(|(d, v)| d * v).collect();
        for i in 0..n.saturating_sub(1) {
            y[i] += self.off[i] * x[i + 1];
            y[i + 1] += self.off[i] * x[i];
        }
        y
    }

    /// Bilinear form `x^T A y`.
    pub fn bilinear(&self, x: &[f64], y: &[f64]) -> f64 {
        dot(x, &self.matvec(y))
    }

    /// `self + sigma * diag(d)`.
    pub fn shifted(&self, d: &[f64], sigma: f64) -> Self {
        let mut out = self.clone();
        for (a, b) in out.diag.iter_mut().zip(d) {
            *a += sigma * b;
        }
        out
    }

    /// Solves `A x = b` by symmetric `LDL^T` elimination without pivoting.
    ///
    /// Suitable for positive definite or diagonally dominant systems; a zero
    /// pivot is reported as [`Error::Singular`].
    pub fn solve_ldl(&self, b: &[f64]) -> Result<Vec<f64>> {
        let n = self.len();
        assert_eq!(b.len(), n);
        let mut d = vec![0.0; n];
        let mut l = vec![0.0; n.saturating_sub(1)];
        let mut y = b.to_vec();
        for i in 0..n {
            let mut di = self.diag[i];
            if i > 0 {
                di -= l[i - 1] * l[i - 1] * d[i - 1];
                y[i] -= l[i - 1] * y[i - 1];
            }
            if di == 0.0 || !di.is_finite() {
                return Err(Error::Singular(format!("zero pivot at row {i}")));
            }
            d[i] = di;
            if i + 1 < n {
                l[i] = self.off[i] / di;
            }
        }
        for i in 0..n {
            y[i] /= d[i];
        }
        for i in (0..n.saturating_sub(1)).rev() {
            y[i] -= l[i] * y[i + 1];
        }
        Ok(y)
    }

    /// Solves `A x = b` by Gaussian elimination with partial pivoting.
    ///
    /// Robust for symmetric indefinite systems.
    pub fn solve_pivoted(&self, b: &[f64]) -> Result<Vec<f64>> {
        let n = self.len();
        assert_eq!(b.len(), n);
        if n == 0 {
            return Ok(vec![]);
        }
        // Upper factor rows: entries in columns i, i+1, i+2.
        let mut u0 = vec![0.0; n];
        let mut u1 = vec![0.0; n];
        let mut u2 = vec![0.0; n];
        let mut y = vec![0.0; n];
        // The not-yet-pivoted row carries entries in columns i and i+1.
        let (mut cur0, mut cur1, mut cur_rhs) =
            (self.diag[0], if n > 1 { self.off[0] } else { 0.0 }, b[0]);
        for i in 0..n - 1 {
            let a = self.off[i];
            let bb = self.diag[i + 1];
            let c = if i + 2 < n { self.off[i + 1] } else { 0.0 };
            let rhs = b[i + 1];
            if cur0.abs() >= a.abs() {
                if cur0 == 0.0 {
                    return Err(Error::Singular(format!("zero column at {i}")));
                }
                u0[i] = cur0;
                u1[i] = cur1;
                u2[i] = 0.0;
                y[i] = cur_rhs;
                let f = a / cur0;
                cur0 = bb - f * cur1;
                cur1 = c;
                cur_rhs = rhs - f * cur_rhs;
            } else {
                u0[i] = a;
                u1[i] = bb;
                u2[i] = c;
                y[i] = rhs;
                let f = cur0 / a;
                cur0 = cur1 - f * bb;
                cur1 = -f * c;
                cur_rhs -= f * rhs;
            }
        }
        if cur0 == 0.0 {
            return Err(Error::Singular("zero final pivot".into()));
        }
        u0[n - 1] = cur0;
        y[n - 1] = cur_rhs;
        let mut x = vec![0.0; n];
        for i in (0..n).rev() {
            let mut s = y[i];
            if i + 1 < n {
                s -= u1[i] * x[i + 1];
            }
            if i + 2 < n {
                s -= u2[i] * x[i + 2];
            }
            x[i] = s / u0[i];
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::Singular("non-finite solution".into()));
        }
        Ok(x)
    }

    /// Number of eigenvalues strictly below `x` (Sturm sequence count).
    pub fn count_below(&self, x: f64) -> usize {
        let n = self.len();
        let mut count = 0;
        let mut q = 1.0;
        let tiny = f64::MIN_POSITIVE.sqrt();
        for i in 0..n {
            let b2 = if i == 0 {
                0.0
            } else {
                self.off[i - 1] * self.off[i - 1]
            };
            q = self.diag[i] - x - if i == 0 { 0.0 } else { b2 / q };
            if q == 0.0 {
                q = -tiny;
            }
            if q < 0.0 {
                count += 1;
            }
        }
        count
    }

    /// Gershgorin interval containing the spectrum.
    pub fn gershgorin(&self) -> (f64, f64) {
        let n = self.len();
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for i in 0..n {
            let mut r = 0.0;
            if i > 0 {
                r += self.off[i - 1].abs();
            }
            if i + 1 < n {
                r += self.off[i].abs();
            }
            lo = lo.min(self.diag[i] - r);
            hi = hi.max(self.diag[i] + r);
        }
        (lo, hi)
    }

    /// The `k`-th smallest eigenvalue (0-based) by Sturm bisection to
    /// relative width `rtol`.
    pub fn eigenvalue(&self, k: usize, rtol: f64) -> f64 {
        let (mut lo, mut hi) = self.gershgorin();
        for _ in 0..2000 {
            let mid = 0.5 * (lo + hi);
            if hi - lo <= rtol * mid.abs().max(f64::MIN_POSITIVE) || mid <= lo || mid >= hi {
                break;
            }
            if self.count_below(mid) > k {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        0.5 * (lo + hi)
    }

    /// Eigenvector for an accurate eigenvalue estimate `mu` by inverse iteration.
    pub fn eigenvector(&self, mu: f64) -> Result<Vec<f64>> {
        let n = self.len();
        let scale = self
            .diag
            .iter()
            .fold(0.0f64, |m, v| m.max(v.abs()))
            .max(1e-300);
        let shifted = self.shifted(&vec![1.0; n], -(mu + 1e-13 * scale));
        let mut x: Vec<f64> = (0..n)
            .map(|i| 1.0 + 0.1 * ((i * 7919 % 13) as f64))
            .collect();
        normalize(&mut x);
        for _ in 0..4 {
            let mut y = match shifted.solve_pivoted(&x) {
                Ok(y) => y,
                Err(_) => shifted
                    .shifted(&vec![1.0; n], 1e-12 * scale)
                    .solve_pivoted(&x)?,
            };
            normalize(&mut y);
            x = y;
        }
        Ok(x)
    }
}

/// Standard form `D^{-1/2} S D^{-1/2}` of the pencil `(S, diag(d))` together
/// with the scaling `D^{-1/2}`, so that `S x = mu D x` iff `A y = mu y` with
/// `x = D^{-1/2} y`.
pub fn pencil_standard_form(s: &SymTridiag, d: &[f64]) -> Result<(SymTridiag, Vec<f64>)> {
    if d.len() != s.len() {
        return Err(Error::InvalidArgument("pencil dimensions differ".into()));
    }
    if d.iter().any(|&v| !(v > 0.0) || !v.is_finite()) {
        return Err(Error::Singular(
            "pencil mass has a nonpositive entry".into(),
        ));
    }
    let scale: Vec<f64> = d.iter().map(|v| 1.0 / v.sqrt()).collect();
    let n = s.len();
    let a = SymTridiag {
        diag: s.diag.iter().zip(&scale).map(|(v, c)| v * c * c).collect(),
        off: (0..n.saturating_sub(1))
            .map(|i| s.off[i] * scale[i] * scale[i + 1])
            .collect(),
    };
    Ok((a, scale))
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn normalize(x: &mut [f64]) {
    let n = norm2(x);
    if n > 0.0 {
        x.iter_mut().for_each(|v| *v /= n);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn laplacian(n: usize) -> SymTridiag {
        SymTridiag {
            diag: vec![2.0; n],
            off: vec![-1.0; n - 1],
        }
    }

    #[test]
    fn ldl_and_pivoted_agree() {
        let a = laplacian(50);
        let b: Vec<f64> = (0..50).map(|i| (i as f64 * 0.37).sin()).collect();
        let x1 = a.solve_ldl(&b).unwrap();
        let x2 = a.solve_pivoted(&b).unwrap();
        let r = a.matvec(&x1);
        for i in 0..50 {
            assert!((r[i] - b[i]).abs() < 1e-11);
            assert!((x1[i] - x2[i]).abs() < 1e-10);
        }
    }

    #[test]
    fn pivoted_solves_indefinite() {
        let mut a = laplacian(30);
        a.diag[0] = 0.0;
        a.diag[10] = -3.0;
        let b: Vec<f64> = (0..30).map(|i| 1.0 + i as f64).collect();
        let x = a.solve_pivoted(&b).unwrap();
        let r = a.matvec(&x);
        for i in 0..30 {
            assert!((r[i] - b[i]).abs() < 1e-9 * (1.0 + b[i].abs()));
        }
    }

    #[test]
    fn laplacian_spectrum() {
        let n = 40;
        let a = laplacian(n);
        for k in 0..5 {
            let exact =
                2.0 - 2.0 * ((k + 1) as f64 * std::f64::consts::PI / (n as f64 + 1.0)).cos();
            let got = a.eigenvalue(k, 1e-15);
            assert!((got - exact).abs() < 1e-13, "k = {k}");
            let v = a.eigenvector(got).unwrap();
            let av = a.matvec(&v);
            let res: f64 = av
                .iter()
                .zip(&v)
                .map(|(x, y)| (x - got * y).powi(2))
                .sum::<f64>()
                .sqrt();
            assert!(res < 1e-10);
        }
        assert_eq!(a.count_below(0.0), 0);
        assert_eq!(a.count_below(4.0), n);
    }
}
