//! Problem parameters: the exponent `p` and the space dimension `N`.

use serde::Serialize;

use crate::error::{Error, Result};

/// Qualitative regime of the exponent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Regime {
    /// `1 < p < 2`
    Singular,
    /// `p = 2`
    Linear,
    /// `2 < p < N`
    Degenerate,
    /// `p >= N` (and `p > 2`, or `p = N = 2`): only weight classification is supported.
    Supercritical,
}

/// Exponent `p > 1` and integer dimension `N >= 2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Params {
    pub p: f64,
    pub n: usize,
    pub regime: Regime,
}

impl Params {
    pub fn new(p: f64, n: usize) -> Result<Self> {
        if !(p.is_finite() && p > 1.0) {
            return Err(Error::invalid(format!("exponent p must exceed 1, got {p}")));
        }
        if n < 2 {
            return Err(Error::invalid(format!(
                "dimension N must be at least 2, got {n}"
            )));
        }
        let nf = n as f64;
        let regime = if p >= nf {
            Regime::Supercritical
        } else if p < 2.0 {
            Regime::Singular
        } else if p == 2.0 {
            Regime::Linear
        } else {
            Regime::Degenerate
        };
        Ok(Params { p, n, regime })
    }

    /// Dimension as a float.
    pub fn nf(&self) -> f64 {
        self.n as f64
    }

    /// Surface area of the unit sphere in `R^N`.
    pub fn omega(&self) -> f64 {
        sphere_area(self.n)
    }

    /// Decay exponent `m = (N - p)/(p - 1)` of the first eigenfunction.
    pub fn decay_exponent(&self) -> f64 {
        (self.nf() - self.p) / (self.p - 1.0)
    }

    /// Limit `C_{N,p} = m^{p-1}` of the Riccati variable.
    pub fn c_np(&self) -> f64 {
        self.decay_exponent().powf(self.p - 1.0)
    }

    /// Conjugate exponent `p/(p-1)`.
    pub fn conjugate(&self) -> f64 {
        self.p / (self.p - 1.0)
    }

    /// Rejects `p >= N`, where the eigenfunction does not decay.
    pub fn require_subcritical(&self) -> Result<()> {
        if self.regime == Regime::Supercritical {
            return Err(Error::invalid(format!(
                "operation requires p < N (p = {}, N = {})",
                self.p, self.n
            )));
        }
        Ok(())
    }

    /// Rejects regimes other than `p = 2` and `2 < p < N`.
    pub fn require_at_least_quadratic(&self) -> Result<()> {
        match self.regime {
            Regime::Linear | Regime::Degenerate => Ok(()),
            _ => Err(Error::invalid(format!(
                "operation requires 2 <= p < N (p = {}, N = {})",
                self.p, self.n
            ))),
        }
    }
}

/// `omega_N = 2 pi^{N/2} / Gamma(N/2)` for integer `N >= 1`.
pub fn sphere_area(n: usize) -> f64 {
    use std::f64::consts::PI;
    // omega_1 = 2, omega_2 = 2 pi, omega_{N+2} = 2 pi omega_N / N.
    let (mut k, mut w) = if n.is_multiple_of(2) {
        (2, 2.0 * PI)
    } else {
        (1, 2.0)
    };
    while k < n {
        w *= 2.0 * PI / k as f64;
        k += 2;
    }
    w
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn sphere_areas() {
        assert!((sphere_area(2) - 2.0 * PI).abs() < 1e-14);
        assert!((sphere_area(3) - 4.0 * PI).abs() < 1e-13);
        assert!((sphere_area(4) - 2.0 * PI * PI).abs() < 1e-13);
        assert!((sphere_area(5) - 8.0 * PI * PI / 3.0).abs() < 1e-12);
    }

    #[test]
    fn regimes() {
        assert_eq!(Params::new(1.5, 3).unwrap().regime, Regime::Singular);
        assert_eq!(Params::new(2.0, 3).unwrap().regime, Regime::Linear);
        assert_eq!(Params::new(2.5, 4).unwrap().regime, Regime::Degenerate);
        assert_eq!(Params::new(3.0, 3).unwrap().regime, Regime::Supercritical);
        assert!(Params::new(1.0, 3).is_err());
        assert!(Params::new(2.0, 1).is_err());
    }

    #[test]
    fn riccati_limit() {
        assert!((Params::new(2.0, 3).unwrap().c_np() - 1.0).abs() < 1e-15);
        assert!((Params::new(3.0, 4).unwrap().c_np() - 0.25).abs() < 1e-15);
    }
}
