//! Linearization of the p-energy at the first eigenfunction: the operator
//! `A(a) = |a|^{p-2} (I + (p-2) a a^T / |a|^2)`, the quadratic form `Q_0`, the
//! degenerate pencil, the improved Poincare inequality and the weighted
//! embedding inequalities.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::eigensolver::EigenPair;
use crate::error::{Error, Result};
use crate::numerics::quadrature::gauss;
use crate::numerics::tridiag::{dot, pencil_standard_form, SymTridiag};
use crate::params::{Params, Regime};
use crate::radial::{GridEigenPair, RadialFunction, RadialGrid};

/// `<A(a) v, v>` with `A(0) = 0`.
pub fn a_quadratic(a: &[f64], v: &[f64], p: f64) -> f64 {
    assert_eq!(a.len(), v.len());
    let na2 = dot(a, a);
    if na2 == 0.0 {
        return 0.0;
    }
    let av = dot(a, v);
    na2.powf(0.5 * (p - 2.0)) * (dot(v, v) + (p - 2.0) * av * av / na2)
}

/// `int_0^1 <A(a + s b) v, v> (1 - s) ds` by 64-point Gauss quadrature.
pub fn taylor_integral(a: &[f64], b: &[f64], v: &[f64], p: f64) -> f64 {
    let mut x = vec![0.0; a.len()];
    gauss(64).integrate(0.0, 1.0, |s| {
        for i in 0..a.len() {
            x[i] = a[i] + s * b[i];
        }
        a_quadratic(&x, v, p) * (1.0 - s)
    })
}

/// `taylor_integral / ((max_s |a + s b|)^{p-2} |v|^2)`.
pub fn sandwich_ratio(a: &[f64], b: &[f64], v: &[f64], p: f64) -> f64 {
    let ab: Vec<f64> = a.iter().zip(b).map(|(x, y)| x + y).collect();
    // |a + s b| is convex in s, so its maximum sits at an endpoint.
    let mx = dot(a, a).sqrt().max(dot(&ab, &ab).sqrt());
    taylor_integral(a, b, v, p) / (mx.powf(p - 2.0) * dot(v, v))
}

/// Sampled bounds of the operator `A`.
#[derive(Debug, Clone, Serialize)]
pub struct AOperatorReport {
    pub p: f64,
    pub dim: usize,
    pub samples: usize,
    /// Extremes of `<A(a)v,v> / (|a|^{p-2}|v|^2)`.
    pub ratio_min: f64,
    pub ratio_max: f64,
    pub bound_lower: f64,
    pub bound_upper: f64,
    pub ratio_violations: usize,
    /// Extremes of the Taylor-integral ratio.
    pub sandwich_min: f64,
    pub sandwich_max: f64,
    /// The explicit side of the sandwich: `(p-1)/2`, an upper bound for
    /// `p >= 2` and a lower bound for `p < 2`.
    pub sandwich_known: f64,
    pub sandwich_violations: usize,
}

/// Samples `samples` random triples `(a, b, v)` in `R^dim`.
pub fn check_a_operator(p: f64, dim: usize, samples: usize, seed: u64) -> AOperatorReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let lower = 1f64.min(p - 1.0);
    let upper = 1f64.max(p - 1.0);
    let known = 0.5 * (p - 1.0);
    let tol = 1e-12;
    let mut rep = AOperatorReport {
        p,
        dim,
        samples,
        ratio_min: f64::INFINITY,
        ratio_max: f64::NEG_INFINITY,
        bound_lower: lower,
        bound_upper: upper,
        ratio_violations: 0,
        sandwich_min: f64::INFINITY,
        sandwich_max: f64::NEG_INFINITY,
        sandwich_known: known,
        sandwich_violations: 0,
    };
    let vector = |rng: &mut ChaCha8Rng| -> Vec<f64> {
        let scale = 10f64.powf(rng.gen_range(-3.0..3.0));
        (0..dim).map(|_| scale * rng.gen_range(-1.0..1.0)).collect()
    };
    for i in 0..samples {
        let a = vector(&mut rng);
        // Every fourth sample tests the extremal directions v = a and v ⟂ a.
        let v = match i % 4 {
            0 => a.clone(),
            1 if dim > 1 => {
                let mut v = vector(&mut rng);
                let c = dot(&v, &a) / dot(&a, &a);
                v.iter_mut().zip(&a).for_each(|(x, y)| *x -= c * y);
                v
            }
            _ => vector(&mut rng),
        };
        let b = vector(&mut rng);
        let ratio = a_quadratic(&a, &v, p) / (dot(&a, &a).powf(0.5 * (p - 2.0)) * dot(&v, &v));
        rep.ratio_min = rep.ratio_min.min(ratio);
        rep.ratio_max = rep.ratio_max.max(ratio);
        if ratio < lower - tol || ratio > upper + tol {
            rep.ratio_violations += 1;
        }
        let s = sandwich_ratio(&a, &b, &v, p);
        rep.sandwich_min = rep.sandwich_min.min(s);
        rep.sandwich_max = rep.sandwich_max.max(s);
        let bad = if p >= 2.0 {
            s > known * (1.0 + tol) || !(s > 0.0)
        } else {
            s < known * (1.0 - tol)
        };
        if bad {
            rep.sandwich_violations += 1;
        }
    }
    rep
}

/// Pencil of the linearized operator at the discrete eigenfunction.
///
/// For the free nodal values `v`,
/// `v^T S v = omega int (p-1)|phi_1'|^{p-2} |v'|^2 r^{N-1}` and
/// `v^T Mass v = (p-1) omega int K phi_1^{p-2} v^2 r^{N-1}` (lumped), both
/// including the exterior tail when the last node is free. The factor `p-1`
/// sits in both matrices, so `S phi_1 = lambda_1 Mass phi_1`.
#[derive(Debug, Clone)]
pub struct DiscreteForms {
    pub lambda1: f64,
    pub p: f64,
    pub stiffness: SymTridiag,
    pub mass: Vec<f64>,
    /// Consistent matrix of `omega int |phi_1'|^p phi_1^{-2} v^2 r^{N-1}`.
    pub mdeg: SymTridiag,
    pub eig: Arc<GridEigenPair>,
}

/// Assembles `S`, `Mass` and `Mdeg` at the discrete eigenfunction.
pub fn assemble_discrete(eig: Arc<GridEigenPair>) -> Result<DiscreteForms> {
    let model = &eig.model;
    let params = model.params;
    params.require_at_least_quadratic()?;
    let n = model.n_free();
    if n < 2 {
        return Err(Error::invalid("the pencil needs at least two free nodes"));
    }
    let phi = eig.phi.values();
    let (stiffness, mass) = model.hessians(phi);
    if mass.iter().any(|&m| !(m > 0.0)) {
        return Err(Error::Singular(
            "lumped mass has a nonpositive entry".into(),
        ));
    }
    let mdeg = degenerate_mass(model.grid(), phi, &params, model.tail_coefficients().0, n);
    Ok(DiscreteForms {
        lambda1: eig.lambda,
        p: params.p,
        stiffness,
        mass,
        mdeg,
        eig,
    })
}

fn degenerate_mass(
    grid: &RadialGrid,
    phi: &[f64],
    params: &Params,
    tail: f64,
    n: usize,
) -> SymTridiag {
    let p = params.p;
    let nf = params.nf();
    let omega = params.omega();
    let nodes = grid.nodes();
    let mut full = SymTridiag::zeros(grid.cells() + 1);
    let rule = gauss(8);
    for c in 0..grid.cells() {
        let (x0, x1) = (nodes[c], nodes[c + 1]);
        let h = x1 - x0;
        let d = ((phi[c + 1] - phi[c]) / h).abs().powf(p);
        let lin = |r: f64| phi[c] + (r - x0) / h * (phi[c + 1] - phi[c]);
        // l0^2 / phi^2 is not integrable on the first cell; node 0 is not free.
        let m00 = if c == 0 {
            0.0
        } else {
            rule.integrate(x0, x1, |r| {
                ((x1 - r) / h / lin(r)).powi(2) * r.powf(nf - 1.0)
            })
        };
        let m01 = if c == 0 {
            0.0
        } else {
            rule.integrate(x0, x1, |r| {
                (x1 - r) * (r - x0) / (h * h * lin(r) * lin(r)) * r.powf(nf - 1.0)
            })
        };
        let m11 = rule.integrate(x0, x1, |r| {
            ((r - x0) / h / lin(r)).powi(2) * r.powf(nf - 1.0)
        });
        full.diag[c] += omega * d * m00;
        full.diag[c + 1] += omega * d * m11;
        full.off[c] += omega * d * m01;
    }
    let m = grid.cells();
    if n == m {
        // exterior tail: |phi'|^p phi^{-2} v^2 for profiles (R/r)^m integrates to
        // the coefficient of |u_M|^p in the p-energy times phi_M^{p-2}
        full.diag[m] += tail * phi[m].powf(p - 2.0);
    }
    SymTridiag {
        diag: full.diag[1..=n].to_vec(),
        off: full.off[1..n].to_vec(),
    }
}

impl DiscreteForms {
    /// `Q_0(v, w) = (v^T S w - lambda_1 v^T Mass w) / 2` on free nodal vectors.
    pub fn q0(&self, v: &[f64], w: &[f64]) -> f64 {
        let mw: f64 = v
            .iter()
            .zip(w)
            .zip(&self.mass)
            .map(|((a, b), m)| a * b * m)
            .sum();
        0.5 * (self.stiffness.bilinear(v, w) - self.lambda1 * mw)
    }

    pub fn dim(&self) -> usize {
        self.mass.len()
    }
}

/// `Q_0(v, w)` for nodal functions on the pencil's grid.
pub fn q0_form(v: &RadialFunction, w: &RadialFunction, forms: &DiscreteForms) -> Result<f64> {
    let model = &forms.eig.model;
    if !v.same_grid(&forms.eig.phi) || !w.same_grid(&forms.eig.phi) {
        return Err(Error::invalid("functions live on a different grid"));
    }
    if v.values()[0] != 0.0 || w.values()[0] != 0.0 {
        return Err(Error::invalid("Q_0 needs functions vanishing at r = 1"));
    }
    Ok(forms.q0(model.free(v.values()), model.free(w.values())))
}

/// Generalized eigenpair `S x = mu Mass x`, with `x^T Mass x = 1`.
#[derive(Debug, Clone)]
pub struct PencilEigen {
    pub mu: f64,
    pub vector: Vec<f64>,
}

/// The `k` smallest eigenpairs of the pencil by Sturm bisection and inverse iteration.
pub fn generalized_eigs(forms: &DiscreteForms, k: usize) -> Result<Vec<PencilEigen>> {
    if k == 0 || k > forms.dim() {
        return Err(Error::invalid(format!("k must lie in 1..={}", forms.dim())));
    }
    let (a, scale) = pencil_standard_form(&forms.stiffness, &forms.mass)?;
    (0..k)
        .map(|j| {
            let mu = a.eigenvalue(j, 1e-15);
            let y = a.eigenvector(mu)?;
            let mut x: Vec<f64> = y.iter().zip(&scale).map(|(v, s)| v * s).collect();
            let norm: f64 = x
                .iter()
                .zip(&forms.mass)
                .map(|(v, m)| v * v * m)
                .sum::<f64>()
                .sqrt();
            let sign = if x.iter().sum::<f64>() < 0.0 {
                -1.0
            } else {
                1.0
            };
            x.iter_mut().for_each(|v| *v *= sign / norm);
            Ok(PencilEigen { mu, vector: x })
        })
        .collect()
}

/// Lowest two pencil eigenvalues and their gap.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct SimplicityGap {
    pub mu1: f64,
    pub mu2: f64,
    pub gap: f64,
}

pub fn simplicity_gap(forms: &DiscreteForms) -> Result<SimplicityGap> {
    let (a, _) = pencil_standard_form(&forms.stiffness, &forms.mass)?;
    let mu1 = a.eigenvalue(0, 1e-15);
    let mu2 = a.eigenvalue(1, 1e-15);
    Ok(SimplicityGap {
        mu1,
        mu2,
        gap: mu2 - mu1,
    })
}

/// Improved Poincare constant.
#[derive(Debug, Clone, Serialize)]
pub struct PoincareReport {
    pub p: f64,
    pub mu1: f64,
    pub mu2: f64,
    /// `(mu2 - mu1)/mu2` for `p = 2`; the smallest sampled ratio for `p > 2`.
    pub constant: f64,
    pub samples: usize,
    pub min_ratio: f64,
    pub max_ratio: f64,
    /// Samples whose ratio is not positive (or, for `p = 2`, falls below the
    /// spectral constant by more than `1e-8`).
    pub violations: usize,
}

/// Values `[tau]` cycled through by the Poincare sampling.
pub const POINCARE_TAUS: [f64; 7] = [0.0, 0.1, -0.1, 1.0, -1.0, 10.0, -10.0];

/// Ratio `LHS / RHS` of the improved Poincare inequality for `tau phi_1 + u_perp`.
pub fn poincare_ratio(forms: &DiscreteForms, tau: f64, u_perp: &RadialFunction) -> Result<f64> {
    let eig = &forms.eig;
    let model = &eig.model;
    let p = forms.p;
    let w = eig.phi.combine(tau, u_perp, 1.0)?;
    let (a_w, b_w) = model.integrals(w.values());
    let lhs = a_w - eig.lambda * b_w;
    let (a_u, _) = model.integrals(u_perp.values());
    let rhs = if p == 2.0 {
        a_u
    } else {
        let x = model.free(u_perp.values());
        // S / (p-1) is the matrix of omega int |phi_1'|^{p-2} |v'|^2 r^{N-1}.
        tau.abs().powf(p - 2.0) * forms.stiffness.bilinear(x, x) / (p - 1.0) + a_u
    };
    Ok(lhs / rhs)
}

/// Spectral constant (`p = 2`) and sampled ratios over `samples` random `u_perp`.
pub fn poincare_constant(
    forms: &DiscreteForms,
    samples: usize,
    seed: u64,
) -> Result<PoincareReport> {
    let gap = simplicity_gap(forms)?;
    let eig = &forms.eig;
    let p = forms.p;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let spectral = gap.gap / gap.mu2;
    let vanish = model_vanishes_at_end(eig);
    let mut min_ratio = f64::INFINITY;
    let mut max_ratio = f64::NEG_INFINITY;
    let mut violations = 0;
    let mut taken = 0;
    let mut i = 0;
    while taken < samples {
        let tau = POINCARE_TAUS[i % POINCARE_TAUS.len()];
        i += 1;
        let modes = 1 + (i % 12);
        let noise = if i % 5 == 0 { 1e-3 } else { 0.0 };
        let u = RadialFunction::random(eig.phi.grid().clone(), &mut rng, modes, noise, vanish);
        let (_, perp) = eig.project_perp(&u)?;
        // Samples nearly parallel to phi_1 leave only rounding noise in u_perp.
        if eig.model.integrals(perp.values()).0 < 1e-8 * eig.model.integrals(u.values()).0 {
            continue;
        }
        let ratio = poincare_ratio(forms, tau, &perp)?;
        taken += 1;
        min_ratio = min_ratio.min(ratio);
        max_ratio = max_ratio.max(ratio);
        let bad = if p == 2.0 {
            ratio < spectral - 1e-8
        } else {
            !(ratio > 0.0)
        };
        if bad {
            violations += 1;
        }
    }
    Ok(PoincareReport {
        p,
        mu1: gap.mu1,
        mu2: gap.mu2,
        constant: if p == 2.0 { spectral } else { min_ratio },
        samples,
        min_ratio,
        max_ratio,
        violations,
    })
}

fn model_vanishes_at_end(eig: &GridEigenPair) -> bool {
    eig.model.n_free() < eig.model.grid().cells()
}

/// Outcome of the weighted embedding inequalities.
#[derive(Debug, Clone, Serialize)]
pub struct EmbeddingReport {
    pub p: f64,
    pub trials: usize,
    /// Largest `LHS / RHS` of
    /// `2 lambda int K phi^{p-2} u^2 + int |phi'|^p phi^{-2} u^2 <= 4 int |phi'|^{p-2} |u'|^2`.
    pub first_max_ratio: f64,
    pub first_violations: usize,
    /// Largest `LHS / RHS` of the annulus inequality with the factor
    /// `9 log(phi(r0)^2 / (phi(R) phi(R')))`.
    pub second_max_ratio: f64,
    pub second_violations: usize,
}

/// Cell moments `(m00, m01, m11)` of `w` against the hat functions of the cell.
fn hat_moments(w: &impl Fn(f64) -> f64, x0: f64, x1: f64, cuts: &[f64]) -> (f64, f64, f64) {
    let h = x1 - x0;
    let rule = gauss(10);
    let mut pts = vec![x0];
    pts.extend(cuts.iter().copied().filter(|&c| c > x0 && c < x1));
    pts.push(x1);
    let (mut m00, mut m01, mut m11) = (0.0, 0.0, 0.0);
    for s in pts.windows(2) {
        m00 += rule.integrate(s[0], s[1], |r| w(r) * ((x1 - r) / h).powi(2));
        m01 += rule.integrate(s[0], s[1], |r| w(r) * (x1 - r) * (r - x0) / (h * h));
        m11 += rule.integrate(s[0], s[1], |r| w(r) * ((r - x0) / h).powi(2));
    }
    (m00, m01, m11)
}

/// Tests both embedding inequalities on `trials` random piecewise-linear `u`
/// vanishing at both ends of `grid`, with all integrals taken against the
/// continuous eigenfunction of `eig`.
pub fn test_embedding_inequalities(
    eig: &EigenPair,
    grid: &Arc<RadialGrid>,
    trials: usize,
    seed: u64,
) -> Result<EmbeddingReport> {
    let params = eig.params;
    if params.regime != Regime::Degenerate {
        return Err(Error::invalid("the embedding inequalities need 2 < p < N"));
    }
    if grid.dim() != params.n {
        return Err(Error::invalid("grid dimension differs from N"));
    }
    let p = params.p;
    let nf = params.nf();
    let omega = params.omega();
    let w = &eig.weight;
    let lambda = eig.lambda1;
    let nodes = grid.nodes();
    let m = grid.cells();
    let r0 = eig.r0;
    let mut cuts = w.effective_breakpoints(1.0, grid.r_max());
    cuts.push(r0);
    let stiff = |r: f64| omega * eig.dphi(r).abs().powf(p - 2.0) * r.powf(nf - 1.0);
    let kmass = |r: f64| omega * w.effective(r) * eig.phi(r).powf(p - 2.0) * r.powf(nf - 1.0);
    let dmass = |r: f64| {
        let f = eig.phi(r);
        omega * eig.dphi(r).abs().powf(p) / (f * f) * r.powf(nf - 1.0)
    };
    let rule = gauss(10);
    let mut s_cell = vec![0.0; m];
    let mut k_cell = vec![(0.0, 0.0, 0.0); m];
    let mut d_cell = vec![(0.0, 0.0, 0.0); m];
    for c in 0..m {
        let (x0, x1) = (nodes[c], nodes[c + 1]);
        let mut pts = vec![x0];
        pts.extend(cuts.iter().copied().filter(|&t| t > x0 && t < x1));
        pts.push(x1);
        s_cell[c] = pts
            .windows(2)
            .map(|s| rule.integrate(s[0], s[1], stiff))
            .sum();
        k_cell[c] = hat_moments(&kmass, x0, x1, &cuts);
        d_cell[c] = hat_moments(&dmass, x0, x1, &cuts);
    }
    let quad =
        |mo: (f64, f64, f64), a: f64, b: f64| mo.0 * a * a + 2.0 * mo.1 * a * b + mo.2 * b * b;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rep = EmbeddingReport {
        p,
        trials,
        first_max_ratio: 0.0,
        first_violations: 0,
        second_max_ratio: 0.0,
        second_violations: 0,
    };
    let tol = 1e-10;
    let r_hi = grid.r_max();
    for i in 0..trials {
        let modes = 1 + i % 16;
        let noise = if i % 3 == 0 { 0.05 } else { 0.0 };
        let u = RadialFunction::random(grid.clone(), &mut rng, modes, noise, true);
        let v = u.values();
        let mut dnorm = 0.0;
        let mut kterm = 0.0;
        let mut dterm = 0.0;
        for c in 0..m {
            let sl = u.slope(c);
            dnorm += s_cell[c] * sl * sl;
            kterm += quad(k_cell[c], v[c], v[c + 1]);
            // The first cell carries no m00/m01 contribution since v_0 = 0.
            dterm += if c == 0 {
                d_cell[c].2 * v[1] * v[1]
            } else {
                quad(d_cell[c], v[c], v[c + 1])
            };
        }
        let lhs1 = 2.0 * lambda * kterm + dterm;
        let ratio1 = lhs1 / (4.0 * dnorm);
        rep.first_max_ratio = rep.first_max_ratio.max(ratio1);
        if ratio1 > 1.0 + tol {
            rep.first_violations += 1;
        }
        // Annulus inequality for a random 1 < R < r0 < R'.
        let big_r = 1.0 + (r0 - 1.0) * rng.gen_range(0.02..0.98);
        let big_r2 = r0 + (r_hi - r0) * rng.gen_range(0.02..0.98);
        let mut pts = vec![big_r];
        pts.extend(nodes.iter().copied().filter(|&x| x > big_r && x < big_r2));
        pts.extend(cuts.iter().copied().filter(|&x| x > big_r && x < big_r2));
        pts.push(big_r2);
        pts.sort_by(f64::total_cmp);
        let annulus: f64 = pts
            .windows(2)
            .map(|s| rule.integrate(s[0], s[1], |r| dmass(r) * u.eval(r).powi(2)))
            .sum();
        let factor = 9.0 * (eig.phi(r0).powi(2) / (eig.phi(big_r) * eig.phi(big_r2))).ln();
        let ratio2 = annulus / (factor * dnorm);
        rep.second_max_ratio = rep.second_max_ratio.max(ratio2);
        if ratio2 > 1.0 + tol {
            rep.second_violations += 1;
        }
    }
    Ok(rep)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::radial::{build_grid, DiscreteModel, Grading, OuterBoundary};
    use crate::weights::RadialWeight;
    use std::f64::consts::PI;

    fn oracle_forms(m: usize, r_max: f64) -> DiscreteForms {
        let params = Params::new(2.0, 3).unwrap();
        let grid = build_grid(r_max, m, Grading::Geometric, 3).unwrap();
        let model = Arc::new(
            DiscreteModel::new(grid, RadialWeight::LinearR4, params, OuterBoundary::Tail).unwrap(),
        );
        let eig = Arc::new(GridEigenPair::compute(model, None).unwrap());
        assemble_discrete(eig).unwrap()
    }

    #[test]
    fn a_operator_examples() {
        let a = [0.3, -1.2, 0.5];
        let na: f64 = dot(&a, &a).sqrt();
        for p in [1.5, 2.0, 3.0] {
            let par = a_quadratic(&a, &a, p);
            assert!((par - (p - 1.0) * na.powf(p - 2.0) * na * na).abs() < 1e-12);
            let v = [1.2, 0.3, 0.0];
            assert!(dot(&a, &v).abs() < 1e-15);
            let perp = a_quadratic(&a, &v, p);
            assert!((perp - na.powf(p - 2.0) * dot(&v, &v)).abs() < 1e-12);
            assert_eq!(a_quadratic(&[0.0; 3], &v, p), 0.0);
        }
    }

    #[test]
    fn a_operator_bounds_hold() {
        for p in [1.5, 2.0, 2.5, 3.0] {
            let rep = check_a_operator(p, 3, 500, 7);
            assert_eq!(rep.ratio_violations, 0, "{rep:?}");
            assert_eq!(rep.sandwich_violations, 0, "{rep:?}");
            assert!(rep.sandwich_min > 0.0);
        }
    }

    #[test]
    fn oracle_pencil() {
        let forms = oracle_forms(1024, 200.0);
        let eigs = generalized_eigs(&forms, 2).unwrap();
        assert!((eigs[0].mu - PI * PI).abs() < 1e-3 * PI * PI);
        assert!((eigs[1].mu - 4.0 * PI * PI).abs() < 1e-3 * 4.0 * PI * PI);
        // First eigenvector equals the discrete eigenfunction up to scaling.
        let phi = forms.eig.model.free(forms.eig.phi.values()).to_vec();
        let mass_dot = |x: &[f64], y: &[f64]| -> f64 {
            x.iter()
                .zip(y)
                .zip(&forms.mass)
                .map(|((a, b), m)| a * b * m)
                .sum()
        };
        let cos = mass_dot(&eigs[0].vector, &phi) / (mass_dot(&phi, &phi).sqrt());
        assert!(cos > 1.0 - 1e-10);
        let gap = simplicity_gap(&forms).unwrap();
        assert!((gap.gap - 3.0 * PI * PI).abs() < 3e-3 * 3.0 * PI * PI);
        assert!(generalized_eigs(&forms, 0).is_err());
        assert!(generalized_eigs(&forms, forms.dim() + 1).is_err());
    }

    #[test]
    fn q0_examples() {
        let forms = oracle_forms(512, 100.0);
        let phi = forms.eig.phi.clone();
        let q = q0_form(&phi, &phi, &forms).unwrap();
        let x = forms.eig.model.free(phi.values());
        let half = 0.5 * forms.stiffness.bilinear(x, x);
        assert!(q.abs() < 1e-12 * half);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mu1 = simplicity_gap(&forms).unwrap().mu1;
        for _ in 0..200 {
            let v = RadialFunction::random(phi.grid().clone(), &mut rng, 6, 1e-3, false);
            let w = RadialFunction::random(phi.grid().clone(), &mut rng, 6, 1e-3, false);
            assert!(q0_form(&v, &v, &forms).unwrap() >= -1e-8);
            let xv = forms.eig.model.free(v.values());
            let mv: f64 = xv.iter().zip(&forms.mass).map(|(a, m)| a * a * m).sum();
            assert!(forms.stiffness.bilinear(xv, xv) / mv >= mu1 * (1.0 - 1e-12));
            let (vw, wv) = (
                q0_form(&v, &w, &forms).unwrap(),
                q0_form(&w, &v, &forms).unwrap(),
            );
            let (xv, xw) = (
                forms.eig.model.free(v.values()),
                forms.eig.model.free(w.values()),
            );
            let scale =
                forms.stiffness.bilinear(xv, xv).sqrt() * forms.stiffness.bilinear(xw, xw).sqrt();
            assert!((vw - wv).abs() < 1e-11 * scale, "{vw} {wv}");
        }
    }

    #[test]
    fn degenerate_case_forms() {
        let params = Params::new(3.0, 4).unwrap();
        let w = RadialWeight::LinearR4;
        let eig = crate::eigensolver::find_lambda1(&w, &params, &Default::default()).unwrap();
        let grid = build_grid(200.0, 1024, Grading::Geometric, 4).unwrap();
        let model = Arc::new(DiscreteModel::new(grid, w, params, OuterBoundary::Tail).unwrap());
        let ge = Arc::new(GridEigenPair::compute(model, Some(&|r| eig.phi(r))).unwrap());
        let forms = assemble_discrete(ge).unwrap();
        let gap = simplicity_gap(&forms).unwrap();
        assert!(
            (gap.mu1 - eig.lambda1).abs() < 1e-4 * eig.lambda1,
            "{gap:?}"
        );
        assert!(gap.gap > 0.0);
        let rep = poincare_constant(&forms, 100, 5).unwrap();
        assert_eq!(rep.violations, 0, "{rep:?}");
        assert!(rep.constant > 0.0);
        let g2 = build_grid(100.0, 512, Grading::Geometric, 4).unwrap();
        let em = test_embedding_inequalities(&eig, &g2, 100, 9).unwrap();
        assert_eq!(em.first_violations + em.second_violations, 0, "{em:?}");
    }

    #[test]
    fn pencil_rejects_singular_regime() {
        let params = Params::new(1.5, 3).unwrap();
        let grid = build_grid(50.0, 64, Grading::Geometric, 3).unwrap();
        let model = Arc::new(
            DiscreteModel::new(grid, RadialWeight::LinearR4, params, OuterBoundary::Tail).unwrap(),
        );
        let ge =
            Arc::new(GridEigenPair::compute(model, Some(&|r: f64| (1.0 - 1.0 / r) / r)).unwrap());
        assert!(assemble_discrete(ge).is_err());
    }

    #[test]
    fn linear_poincare_constant() {
        let forms = oracle_forms(1024, 200.0);
        let rep = poincare_constant(&forms, 100, 11).unwrap();
        assert!((rep.constant - 0.75).abs() < 1e-3, "{rep:?}");
        assert_eq!(rep.violations, 0, "{rep:?}");
    }
}
