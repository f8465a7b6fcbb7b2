//! General numerical building blocks used by the problem-specific modules.

pub mod ode;
pub mod quadrature;
pub mod tridiag;

/// `sign(x) |x|^e`, with `0` mapped to `0`.
pub fn signed_pow(x: f64, e: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        x.signum() * x.abs().powf(e)
    }
}
