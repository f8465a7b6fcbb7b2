//! Discrete energy `J_h`, slice minimization defining the reduced profile
//! `j(tau; h)`, the saddle construction for `1 < p < 2`, the resonant solvers
//! and a path-deformation mountain-pass search.

use std::str::FromStr;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::numerics::tridiag::{dot, norm2, SymTridiag};
use crate::params::{Params, Regime};
use crate::radial::{DiscreteModel, DualDensity, GridEigenPair, RadialFunction};

/// Everything needed to evaluate
/// `J_h(u) = (1/p) int |u'|^p - (lambda/p) int K |u|^p - <h, u>` on a grid.
#[derive(Debug, Clone)]
pub struct EnergyContext {
    eig: Arc<GridEigenPair>,
    lambda: f64,
    h: DualDensity,
    /// Free-node pairing coefficients of `h`.
    l: Vec<f64>,
    /// Free-node coefficients of `K phi_1^{p-1}`.
    c: Vec<f64>,
    cc: f64,
    phi: Vec<f64>,
}

impl EnergyContext {
    /// Context at the resonant value `lambda = lambda_1` of the grid eigenpair.
    pub fn new(eig: Arc<GridEigenPair>, h: DualDensity) -> Result<Self> {
        let l = eig.model.pairing(&h)?;
        let c = eig.constraint();
        let cc = dot(&c, &c);
        let phi = eig.model.free(eig.phi.values()).to_vec();
        Ok(EnergyContext {
            lambda: eig.lambda,
            eig,
            h,
            l,
            c,
            cc,
            phi,
        })
    }

    pub fn with_lambda(mut self, lambda: f64) -> Self {
        self.lambda = lambda;
        self
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn eig(&self) -> &Arc<GridEigenPair> {
        &self.eig
    }

    pub fn model(&self) -> &DiscreteModel {
        &self.eig.model
    }

    pub fn params(&self) -> &Params {
        &self.eig.model.params
    }

    pub fn h(&self) -> &DualDensity {
        &self.h
    }

    pub fn n_free(&self) -> usize {
        self.l.len()
    }

    /// Free nodal values of `phi_1`.
    pub fn phi_free(&self) -> &[f64] {
        &self.phi
    }

    /// `<h, phi_1>`.
    pub fn pairing_phi(&self) -> f64 {
        dot(&self.l, &self.phi)
    }

    /// `<h, u>` for free nodal values.
    pub fn pairing(&self, x: &[f64]) -> f64 {
        dot(&self.l, x)
    }

    pub fn function(&self, x: &[f64]) -> RadialFunction {
        self.model().function(x)
    }

    pub fn energy_free(&self, x: &[f64]) -> f64 {
        let (a, b) = self.model().integrals(&self.model().full(x));
        (a - self.lambda * b) / self.params().p - dot(&self.l, x)
    }

    pub fn gradient_free(&self, x: &[f64]) -> Vec<f64> {
        self.model()
            .defect(&self.model().full(x), self.lambda, &self.l)
    }

    /// Sum of the magnitudes of the three energy terms, the size that sets
    /// the rounding level of [`EnergyContext::energy_free`].
    fn energy_scale(&self, x: &[f64]) -> f64 {
        let (a, b) = self.model().integrals(&self.model().full(x));
        (a + self.lambda * b) / self.params().p + dot(&self.l, x).abs()
    }

    /// Hessian of `J_h` (regularized as in [`DiscreteModel::hessians`]).
    pub fn hessian_free(&self, x: &[f64]) -> SymTridiag {
        let (ha, hb) = self.model().hessians(&self.model().full(x));
        SymTridiag {
            diag: ha
                .diag
                .iter()
                .zip(&hb)
                .map(|(a, b)| a - self.lambda * b)
                .collect(),
            off: ha.off,
        }
    }

    /// Weak-form residual of the Euler-Lagrange equation.
    pub fn residual_free(&self, x: &[f64]) -> f64 {
        self.model()
            .residual_norm(&self.model().full(x), self.lambda, &self.l)
    }

    /// `(omega int |u'|^p r^{N-1})^{1/p}` including the exterior tail.
    pub fn norm_free(&self, x: &[f64]) -> f64 {
        self.model()
            .integrals(&self.model().full(x))
            .0
            .powf(1.0 / self.params().p)
    }

    /// Dual norm of `h` in the discrete solution space, from the exact
    /// p-Poisson solve `A'(v) = h`: `||h||_* = ||v||^{p-1}`.
    pub fn dual_norm(&self) -> Result<f64> {
        if self.l.iter().all(|&v| v == 0.0) {
            return Ok(0.0);
        }
        let v = self.model().solve_poisson(&self.l)?;
        let p = self.params().p;
        Ok(self.norm_free(&v).powf(p - 1.0))
    }

    /// Removes the `K phi_1^{p-1}` component: `v - (c.v / c.c) c`.
    fn project(&self, v: &mut [f64]) {
        let s = dot(&self.c, v) / self.cc;
        v.iter_mut().zip(&self.c).for_each(|(x, c)| *x -= s * c);
    }

    /// Removes the `phi_1` component along the decomposition `u = tau phi_1 + u_perp`.
    fn split(&self, x: &[f64]) -> (f64, Vec<f64>) {
        let tau = dot(&self.c, x) / dot(&self.c, &self.phi);
        (
            tau,
            x.iter().zip(&self.phi).map(|(v, f)| v - tau * f).collect(),
        )
    }

    fn check_grid(&self, u: &RadialFunction) -> Result<()> {
        if !u.same_grid(&self.eig.phi) {
            return Err(Error::invalid("function lives on a different grid"));
        }
        if u.values()[0] != 0.0 {
            return Err(Error::invalid(
                "functions of the solution space vanish at r = 1",
            ));
        }
        let n = self.n_free();
        if n < u.values().len() - 1 && u.values()[n + 1] != 0.0 {
            return Err(Error::invalid("the Dirichlet model needs u(R_max) = 0"));
        }
        Ok(())
    }
}

/// `J_h(u)`.
pub fn energy(u: &RadialFunction, ctx: &EnergyContext) -> Result<f64> {
    ctx.check_grid(u)?;
    Ok(ctx.energy_free(ctx.model().free(u.values())))
}

/// Nodal covector `G` of `J_h'(u)`, zero on constrained nodes, so that
/// `G . v` is the directional derivative along every nodal `v`.
pub fn energy_gradient(u: &RadialFunction, ctx: &EnergyContext) -> Result<Vec<f64>> {
    ctx.check_grid(u)?;
    let g = ctx.gradient_free(ctx.model().free(u.values()));
    let mut full = vec![0.0; u.values().len()];
    full[1..=g.len()].copy_from_slice(&g);
    Ok(full)
}

/// `g - (<g, phi_1> / <K phi_1^{p-1}, phi_1>) K phi_1^{p-1}`, so that the
/// result pairs to zero with `phi_1` in discrete arithmetic.
pub fn orthogonalize(g: &DualDensity, eig: &GridEigenPair) -> Result<DualDensity> {
    let kphi = eig.kphi_density();
    let params = &eig.model.params;
    let num = crate::radial::dual_pair(g, &eig.phi, params)?;
    let den = crate::radial::dual_pair(&kphi, &eig.phi, params)?;
    g.combine(1.0, &kphi, -num / den)
}

/// Source term specification: `zero`, `bump?center=3&width=0.5&amp=1&orthogonalize=true`
/// or `kphi?xi=0.01` (the orthogonalized default bump plus `xi K phi_1^{p-1}`).
/// A `xi` key is accepted by both forms.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HSpec {
    pub center: f64,
    pub width: f64,
    pub amp: f64,
    pub orthogonalize: bool,
    pub xi: f64,
    pub zero: bool,
}

impl Default for HSpec {
    fn default() -> Self {
        HSpec {
            center: 3.0,
            width: 0.5,
            amp: 1.0,
            orthogonalize: true,
            xi: 0.0,
            zero: false,
        }
    }
}

impl FromStr for HSpec {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let (kind, query) = s.split_once('?').unwrap_or((s, ""));
        let mut spec = HSpec::default();
        match kind {
            "zero" => spec.zero = true,
            "bump" => spec.orthogonalize = false,
            "kphi" => {}
            _ => return Err(Error::invalid(format!("unknown source kind `{kind}`"))),
        }
        for pair in query.split('&').filter(|p| !p.is_empty()) {
            let (k, v) = pair
                .split_once('=')
                .ok_or_else(|| Error::invalid(format!("malformed source parameter `{pair}`")))?;
            let num = || {
                v.parse::<f64>()
                    .map_err(|_| Error::invalid(format!("`{k}` needs a number, got `{v}`")))
            };
            match k {
                "center" => spec.center = num()?,
                "width" => spec.width = num()?,
                "amp" => spec.amp = num()?,
                "xi" => spec.xi = num()?,
                "orthogonalize" => {
                    spec.orthogonalize = v.parse().map_err(|_| {
                        Error::invalid(format!("`orthogonalize` needs true or false, got `{v}`"))
                    })?
                }
                _ => return Err(Error::invalid(format!("unknown source parameter `{k}`"))),
            }
        }
        if spec.zero && !query.is_empty() {
            return Err(Error::invalid("`zero` takes no parameters"));
        }
        Ok(spec)
    }
}

impl std::fmt::Display for HSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.zero {
            return write!(f, "zero");
        }
        write!(
            f,
            "bump?center={}&width={}&amp={}&orthogonalize={}&xi={}",
            self.center, self.width, self.amp, self.orthogonalize, self.xi
        )
    }
}

impl HSpec {
    pub fn build(&self, eig: &GridEigenPair) -> Result<DualDensity> {
        let grid = eig.phi.grid().clone();
        if self.zero {
            return Ok(DualDensity::zero(grid));
        }
        let mut h = DualDensity::bump(grid, self.center, self.width, self.amp)?;
        if self.orthogonalize {
            h = orthogonalize(&h, eig)?;
        }
        if self.xi != 0.0 {
            h = h.combine(1.0, &eig.kphi_density(), self.xi)?;
        }
        Ok(h)
    }
}

/// Stopping rules of the descent solvers.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct SliceOptions {
    pub max_iter: usize,
    /// Convergence when the projected gradient norm is below `gtol (1 + |J|)`.
    pub gtol: f64,
}

impl Default for SliceOptions {
    fn default() -> Self {
        SliceOptions {
            max_iter: 10_000,
            gtol: 1e-8,
        }
    }
}

struct Descent {
    y: Vec<f64>,
    value: f64,
    gradient: Vec<f64>,
    grad_norm: f64,
    iterations: usize,
    converged: bool,
}

/// Euclidean norm over the square root of the length, the scaling of
/// [`DiscreteModel::residual_norm`].
fn scaled_norm(v: &[f64]) -> f64 {
    norm2(v) / (v.len() as f64).sqrt()
}

/// Solves `H d = -g`, restricted to `c.d = 0` when `constrained`.
fn bordered_direction(h: &SymTridiag, g: &[f64], c: Option<&[f64]>) -> Option<Vec<f64>> {
    let z1 = h.solve_pivoted(g).ok()?;
    let d: Vec<f64> = match c {
        None => z1.iter().map(|v| -v).collect(),
        Some(c) => {
            let z2 = h.solve_pivoted(c).ok()?;
            let den = dot(c, &z2);
            if den == 0.0 || !den.is_finite() {
                return None;
            }
            let alpha = dot(c, &z1) / den;
            z1.iter().zip(&z2).map(|(a, b)| -(a - alpha * b)).collect()
        }
    };
    d.iter().all(|v| v.is_finite()).then_some(d)
}

impl EnergyContext {
    /// Minimizes `y -> J_h(base + y)` from `y0`, over `c.y = 0` when `constrained`.
    ///
    /// Each step tries the (shifted) Newton direction and falls back to the
    /// gradient preconditioned by the Hessian of the `|u'|^p` term, followed
    /// by an Armijo backtracking search.
    fn descend(
        &self,
        base: &[f64],
        mut y: Vec<f64>,
        constrained: bool,
        opts: &SliceOptions,
    ) -> Descent {
        let n = self.n_free();
        let at = |y: &[f64]| -> Vec<f64> { base.iter().zip(y).map(|(b, v)| b + v).collect() };
        if constrained {
            self.project(&mut y);
        }
        let c = constrained.then_some(self.c.as_slice());
        let mut value = self.energy_free(&at(&y));
        let mut iterations = 0;
        loop {
            let x = at(&y);
            let gradient = self.gradient_free(&x);
            let mut pg = gradient.clone();
            if constrained {
                self.project(&mut pg);
            }
            let grad_norm = scaled_norm(&pg);
            let done = grad_norm < opts.gtol * (1.0 + value.abs());
            if done || iterations >= opts.max_iter {
                return Descent {
                    y,
                    value,
                    gradient,
                    grad_norm,
                    iterations,
                    converged: done,
                };
            }
            iterations += 1;
            let scale = self.energy_scale(&x);
            let (ha, hb) = self.model().hessians(&self.model().full(&x));
            let shift = 1e-9 * self.lambda;
            let newton = SymTridiag {
                diag: ha
                    .diag
                    .iter()
                    .zip(&hb)
                    .map(|(a, b)| a - (self.lambda - shift) * b)
                    .collect(),
                off: ha.off.clone(),
            };
            // For p < 2 the lagged-diffusion weights |u'|^{p-2} majorize the
            // gradient term, which avoids the sign flips of full Newton steps
            // on cells with nearly vanishing slope.
            let p = self.params().p;
            let metric = if p < 2.0 {
                let s = 1.0 / (p - 1.0);
                SymTridiag {
                    diag: ha.diag.iter().map(|v| v * s).collect(),
                    off: ha.off.iter().map(|v| v * s).collect(),
                }
            } else {
                ha
            };
            // Adding a multiple of c leaves the constrained step unchanged; this
            // one removes the phi_1 component, which the near-singular Hessian
            // would otherwise amplify.
            let rhs: Vec<f64> = if constrained {
                let beta = dot(&gradient, &self.phi) / dot(&self.c, &self.phi);
                gradient
                    .iter()
                    .zip(&self.c)
                    .map(|(g, c)| g - beta * c)
                    .collect()
            } else {
                gradient.clone()
            };
            let mut best: Option<(Vec<f64>, f64)> = None;
            let mut full = false;
            for (k, h) in [newton, metric, self.model().laplacian()]
                .iter()
                .enumerate()
            {
                // For p < 2 the fixed metric is a fallback only: its long
                // steps pull the iterates away from the kinks of the energy.
                if k == 2 && p < 2.0 && best.is_some() {
                    break;
                }
                let Some(d) = bordered_direction(h, &rhs, c) else {
                    continue;
                };
                let slope = dot(&gradient, &d);
                if !(slope < 0.0) {
                    continue;
                }
                let trial_at =
                    |t: f64| -> Vec<f64> { y.iter().zip(&d).map(|(a, b)| a + t * b).collect() };
                let mut t = 1.0;
                for _ in 0..64 {
                    let trial = trial_at(t);
                    let ft = self.energy_free(&at(&trial));
                    let armijo = ft <= value + 1e-4 * t * slope;
                    // Once energy differences reach the rounding level of its
                    // terms, a step is accepted when it lowers the projected
                    // gradient instead.
                    let flat = ft - value <= 1e-13 * (1.0 + scale);
                    let accept = armijo
                        || (flat && {
                            let mut pt = self.gradient_free(&at(&trial));
                            if constrained {
                                self.project(&mut pt);
                            }
                            scaled_norm(&pt) < (1.0 - 1e-4 * t) * grad_norm
                        });
                    if accept && ft.is_finite() {
                        let (mut trial, mut ft) = (trial, ft);
                        // The fixed metric carries no scale information, so
                        // its step is also allowed to grow.
                        if k == 2 && armijo && t == 1.0 {
                            for _ in 0..60 {
                                let next = trial_at(2.0 * t);
                                let fnext = self.energy_free(&at(&next));
                                if !(fnext < ft) {
                                    break;
                                }
                                t *= 2.0;
                                trial = next;
                                ft = fnext;
                            }
                        }
                        if best.as_ref().is_none_or(|b| ft < b.1) {
                            best = Some((trial, ft));
                        }
                        full = armijo && t >= 1.0;
                        break;
                    }
                    t *= 0.5;
                }
                // Full steps are taken as they come, except that for p < 2 the
                // Newton step is always compared with the majorizing one.
                if full && (p >= 2.0 || k >= 1) {
                    break;
                }
            }
            let moved = best.is_some();
            if let Some((trial, ft)) = best {
                y = trial;
                value = ft;
            }
            if !moved {
                debug_assert_eq!(y.len(), n);
                return Descent {
                    y,
                    value,
                    gradient,
                    grad_norm,
                    iterations,
                    converged: false,
                };
            }
        }
    }

    /// Newton iteration on `J_h'(u) = 0` with backtracking on the residual.
    fn polish(&self, mut x: Vec<f64>, tol: f64) -> (Vec<f64>, f64) {
        let mut r = self.residual_free(&x);
        for _ in 0..60 {
            if r < 1e-3 * tol {
                break;
            }
            let g = self.gradient_free(&x);
            let Some(dx) = bordered_direction(&self.hessian_free(&x), &g, None) else {
                break;
            };
            let mut t = 1.0;
            let mut improved = false;
            while t > 1e-6 {
                let trial: Vec<f64> = x.iter().zip(&dx).map(|(a, b)| a + t * b).collect();
                let rt = self.residual_free(&trial);
                if rt < (1.0 - 1e-4 * t) * r {
                    x = trial;
                    r = rt;
                    improved = true;
                    break;
                }
                t *= 0.5;
            }
            if !improved {
                break;
            }
        }
        (x, r)
    }
}

/// Minimizer of `u_perp -> J_h(tau phi_1 + u_perp)` over the orthogonal complement.
#[derive(Debug, Clone)]
pub struct SliceMinimum {
    pub tau: f64,
    pub uperp: RadialFunction,
    pub j: f64,
    /// `d j / d tau = <J_h'(u), phi_1>` at the minimizer (envelope formula).
    pub dj_dtau: f64,
    pub grad_norm: f64,
    pub iterations: usize,
    pub converged: bool,
}

impl SliceMinimum {
    /// Free nodal values of `tau phi_1 + u_perp`.
    pub fn point(&self, ctx: &EnergyContext) -> Vec<f64> {
        let y = ctx.model().free(self.uperp.values());
        y.iter()
            .zip(ctx.phi_free())
            .map(|(v, f)| v + self.tau * f)
            .collect()
    }
}

/// Slice minimization from zero and, when given, a warm start (the lower of
/// the two starting values is used).
pub fn minimize_on_slice(
    tau: f64,
    ctx: &EnergyContext,
    warm: Option<&RadialFunction>,
    opts: &SliceOptions,
) -> Result<SliceMinimum> {
    let base: Vec<f64> = ctx.phi_free().iter().map(|f| tau * f).collect();
    let zero = vec![0.0; ctx.n_free()];
    let mut start = zero.clone();
    if let Some(w) = warm {
        ctx.check_grid(w)?;
        let mut y = ctx.model().free(w.values()).to_vec();
        ctx.project(&mut y);
        let at = |y: &[f64]| -> Vec<f64> { base.iter().zip(y).map(|(b, v)| b + v).collect() };
        if ctx.energy_free(&at(&y)) < ctx.energy_free(&at(&zero)) {
            start = y;
        }
    }
    let d = ctx.descend(&base, start, true, opts);
    Ok(SliceMinimum {
        tau,
        uperp: ctx.function(&d.y),
        j: d.value,
        dj_dtau: dot(&d.gradient, ctx.phi_free()),
        grad_norm: d.grad_norm,
        iterations: d.iterations,
        converged: d.converged,
    })
}

fn require_converged(s: SliceMinimum) -> Result<SliceMinimum> {
    if s.converged {
        Ok(s)
    } else {
        Err(Error::no_convergence(
            format!("slice minimization at tau = {}", s.tau),
            s.iterations,
            s.grad_norm,
        ))
    }
}

/// Local extremum of the reduced profile, refined on the envelope derivative.
#[derive(Debug, Clone)]
pub struct Extremum {
    pub tau: f64,
    pub j: f64,
    pub slice: SliceMinimum,
}

/// Behaviour of `j` at the ends of the sampled range.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct ProfileTrend {
    /// `j` decreases towards the left end.
    pub left_decreasing: bool,
    /// `j` decreases towards the right end.
    pub right_decreasing: bool,
    /// Both end values lie strictly below `j` at the sample closest to `tau = 0`.
    pub ends_below_center: bool,
}

impl ProfileTrend {
    /// The `1 < p < 2` signature.
    pub fn is_saddle(&self) -> bool {
        self.left_decreasing && self.right_decreasing && self.ends_below_center
    }

    /// Growth towards both ends, the minimizer signature.
    pub fn is_minimum(&self) -> bool {
        !self.left_decreasing && !self.right_decreasing
    }
}

/// Sampled `j(tau; h)` with its slice minimizers.
#[derive(Debug, Clone)]
pub struct ReducedProfile {
    pub tau: Vec<f64>,
    pub j: Vec<f64>,
    pub slices: Vec<SliceMinimum>,
    pub uperp_norm: Vec<f64>,
    pub local_maxima: Vec<Extremum>,
    pub local_minima: Vec<Extremum>,
    pub trend: ProfileTrend,
    /// Largest `|j_warm - j_cold|` over the cold-start cross-checks.
    pub cold_start_discrepancy: f64,
}

/// JSON-friendly summary of a [`ReducedProfile`].
#[derive(Debug, Clone, Serialize)]
pub struct ProfileSummary {
    pub tau_min: f64,
    pub tau_max: f64,
    pub points: usize,
    pub j_center: f64,
    pub j_left: f64,
    pub j_right: f64,
    pub local_maxima: Vec<(f64, f64)>,
    pub local_minima: Vec<(f64, f64)>,
    pub trend: ProfileTrend,
    pub saddle: bool,
    pub cold_start_discrepancy: f64,
}

impl ReducedProfile {
    pub fn center_index(&self) -> usize {
        (0..self.tau.len())
            .min_by(|&a, &b| self.tau[a].abs().total_cmp(&self.tau[b].abs()))
            .expect("nonempty profile")
    }

    pub fn summary(&self) -> ProfileSummary {
        let n = self.tau.len();
        ProfileSummary {
            tau_min: self.tau[0],
            tau_max: self.tau[n - 1],
            points: n,
            j_center: self.j[self.center_index()],
            j_left: self.j[0],
            j_right: self.j[n - 1],
            local_maxima: self.local_maxima.iter().map(|e| (e.tau, e.j)).collect(),
            local_minima: self.local_minima.iter().map(|e| (e.tau, e.j)).collect(),
            trend: self.trend,
            saddle: self.trend.is_saddle(),
            cold_start_discrepancy: self.cold_start_discrepancy,
        }
    }

    /// CSV with columns `tau,j,uperp_norm`.
    pub fn write_csv(&self, path: &std::path::Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["tau", "j", "uperp_norm"])?;
        for i in 0..self.tau.len() {
            w.write_record([
                self.tau[i].to_string(),
                self.j[i].to_string(),
                self.uperp_norm[i].to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Refines a sign change of `dj/dtau` in `[lo.tau, hi.tau]` by bisection with warm starts.
fn refine_extremum(
    ctx: &EnergyContext,
    mut lo: SliceMinimum,
    mut hi: SliceMinimum,
    opts: &SliceOptions,
) -> Result<Extremum> {
    let sign_lo = lo.dj_dtau.signum();
    for _ in 0..80 {
        if (hi.tau - lo.tau).abs() <= 1e-13 * (1.0 + lo.tau.abs()) {
            break;
        }
        let mid = 0.5 * (lo.tau + hi.tau);
        let warm = if lo.j > hi.j { &lo.uperp } else { &hi.uperp };
        let s = require_converged(minimize_on_slice(mid, ctx, Some(warm), opts)?)?;
        if s.dj_dtau == 0.0 {
            lo = s.clone();
            hi = s;
            break;
        }
        if s.dj_dtau.signum() == sign_lo {
            lo = s;
        } else {
            hi = s;
        }
    }
    let best = if lo.dj_dtau.abs() <= hi.dj_dtau.abs() {
        lo
    } else {
        hi
    };
    Ok(Extremum {
        tau: best.tau,
        j: best.j,
        slice: best,
    })
}

/// Reduced profile on the sorted `tau_grid` (at least 9 points), sweeping
/// outwards from the point closest to zero with warm starts.
pub fn reduced_profile(
    ctx: &EnergyContext,
    tau_grid: &[f64],
    opts: &SliceOptions,
) -> Result<ReducedProfile> {
    let n = tau_grid.len();
    if n < 9 {
        return Err(Error::invalid(
            "the reduced profile needs at least 9 values of tau",
        ));
    }
    if tau_grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::invalid("tau values must be strictly increasing"));
    }
    let i0 = (0..n)
        .min_by(|&a, &b| tau_grid[a].abs().total_cmp(&tau_grid[b].abs()))
        .expect("nonempty");
    let mut slices: Vec<Option<SliceMinimum>> = vec![None; n];
    slices[i0] = Some(require_converged(minimize_on_slice(
        tau_grid[i0],
        ctx,
        None,
        opts,
    )?)?);
    for i in i0 + 1..n {
        let warm = slices[i - 1].as_ref().map(|s| s.uperp.clone());
        slices[i] = Some(require_converged(minimize_on_slice(
            tau_grid[i],
            ctx,
            warm.as_ref(),
            opts,
        )?)?);
    }
    for i in (0..i0).rev() {
        let warm = slices[i + 1].as_ref().map(|s| s.uperp.clone());
        slices[i] = Some(require_converged(minimize_on_slice(
            tau_grid[i],
            ctx,
            warm.as_ref(),
            opts,
        )?)?);
    }
    let mut slices: Vec<SliceMinimum> = slices.into_iter().map(|s| s.expect("filled")).collect();
    // Cold-start cross-check on every fourth sample; the lower value is kept.
    let mut discrepancy: f64 = 0.0;
    for i in (0..n).step_by(4) {
        let cold = require_converged(minimize_on_slice(tau_grid[i], ctx, None, opts)?)?;
        discrepancy = discrepancy.max((cold.j - slices[i].j).abs());
        if cold.j < slices[i].j {
            slices[i] = cold;
        }
    }
    let j: Vec<f64> = slices.iter().map(|s| s.j).collect();
    let uperp_norm = slices
        .iter()
        .map(|s| ctx.norm_free(ctx.model().free(s.uperp.values())))
        .collect();
    let mut local_maxima = Vec::new();
    let mut local_minima = Vec::new();
    for i in 1..n - 1 {
        let is_max = j[i] > j[i - 1] && j[i] >= j[i + 1];
        let is_min = j[i] < j[i - 1] && j[i] <= j[i + 1];
        if !(is_max || is_min) {
            continue;
        }
        let want = |s: &SliceMinimum| {
            if is_max {
                s.dj_dtau > 0.0
            } else {
                s.dj_dtau < 0.0
            }
        };
        // The derivative changes sign on one side of the sampled extremum.
        let (lo, hi) = if want(&slices[i]) {
            (slices[i].clone(), slices[i + 1].clone())
        } else {
            (slices[i - 1].clone(), slices[i].clone())
        };
        let e = if want(&lo) && !want(&hi) {
            refine_extremum(ctx, lo, hi, opts)?
        } else {
            Extremum {
                tau: slices[i].tau,
                j: j[i],
                slice: slices[i].clone(),
            }
        };
        if is_max {
            local_maxima.push(e);
        } else {
            local_minima.push(e);
        }
    }
    let trend = ProfileTrend {
        left_decreasing: j[0] < j[1],
        right_decreasing: j[n - 1] < j[n - 2],
        ends_below_center: j[0] < j[i0] && j[n - 1] < j[i0],
    };
    Ok(ReducedProfile {
        tau: tau_grid.to_vec(),
        j,
        slices,
        uperp_norm,
        local_maxima,
        local_minima,
        trend,
        cold_start_discrepancy: discrepancy,
    })
}

/// Adaptive range selection for [`reduced_profile`].
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ProfileOptions {
    pub points: usize,
    pub tau_max: f64,
    pub max_doublings: usize,
}

impl Default for ProfileOptions {
    fn default() -> Self {
        ProfileOptions {
            points: 41,
            tau_max: 1.0,
            max_doublings: 12,
        }
    }
}

/// Symmetric `points`-point grid on `[-tau_max, tau_max]`.
pub fn symmetric_tau_grid(tau_max: f64, points: usize) -> Vec<f64> {
    (0..points)
        .map(|i| tau_max * (2.0 * i as f64 / (points - 1) as f64 - 1.0))
        .collect()
}

/// Doubles `tau_max` until the trend flags agree on two consecutive ranges
/// and show either growth at both ends or a saddle with an interior local
/// maximum. The initial range is `tau_max` times `max(1, ||u_perp(0)|| / ||phi_1||)`.
/// After `max_doublings` the last profile is returned as is.
pub fn adaptive_profile(
    ctx: &EnergyContext,
    popts: &ProfileOptions,
    opts: &SliceOptions,
) -> Result<ReducedProfile> {
    let center = require_converged(minimize_on_slice(0.0, ctx, None, opts)?)?;
    let ratio =
        ctx.norm_free(ctx.model().free(center.uperp.values())) / ctx.norm_free(ctx.phi_free());
    let mut tau_max = popts.tau_max * ratio.max(1.0);
    let mut last: Option<ReducedProfile> = None;
    for _ in 0..=popts.max_doublings {
        let prof = reduced_profile(ctx, &symmetric_tau_grid(tau_max, popts.points), opts)?;
        if let Some(prev) = &last {
            let stable = prev.trend == prof.trend;
            let settled = prof.trend.is_minimum()
                || (prof.trend.is_saddle() && !prof.local_maxima.is_empty());
            if stable && settled {
                return Ok(prof);
            }
        }
        last = Some(prof);
        tau_max *= 2.0;
    }
    Ok(last.expect("at least one profile"))
}

/// Sampled coercivity constants of the slice energy.
#[derive(Debug, Clone, Serialize)]
pub struct Coercivity {
    pub t: f64,
    pub samples: usize,
    /// `LHS >= alpha int |u_perp'|^p - beta` on every sample.
    pub alpha: f64,
    pub beta: f64,
    /// Smallest `LHS` over the `tau = 0` samples.
    pub min_lhs_tau0: f64,
    /// Slope of the last edge of the lower hull (growth rate at large norms).
    pub alpha_asymptotic: f64,
}

/// Lower convex hull of points sorted by abscissa.
fn lower_hull(pts: &[(f64, f64)]) -> Vec<(f64, f64)> {
    let mut hull: Vec<(f64, f64)> = Vec::new();
    for &p in pts {
        while hull.len() >= 2 {
            let (a, b) = (hull[hull.len() - 2], hull[hull.len() - 1]);
            let cross = (b.0 - a.0) * (p.1 - a.1) - (b.1 - a.1) * (p.0 - a.0);
            if cross <= 0.0 {
                hull.pop();
            } else {
                break;
            }
        }
        hull.push(p);
    }
    hull
}

/// Fits `LHS >= alpha X - beta`, `X = int |u_perp'|^p`, over samples with
/// `|tau| <= t` and `||u_perp||` log-uniform in `[1e-2, 1e2]`.
///
/// The cloud is joined with the origin (`u_perp = 0` gives `LHS = 0`); the
/// minorant is the first edge of its lower hull with positive slope, which
/// has the smallest `beta` among minorants with `alpha > 0`.
pub fn coercivity_constants(
    ctx: &EnergyContext,
    t: f64,
    trials: usize,
    seed: u64,
) -> Result<Coercivity> {
    if !(t > 0.0) {
        return Err(Error::invalid("T must be positive"));
    }
    let lambda = ctx.lambda();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let vanish = ctx.n_free() < ctx.eig().model.grid().cells();
    let mut pts = vec![(0.0, 0.0)];
    let mut min_lhs_tau0 = f64::INFINITY;
    for i in 0..trials {
        let tau = if i % 5 == 0 {
            0.0
        } else {
            rng.gen_range(-t..t)
        };
        let u = RadialFunction::random(
            ctx.eig().phi.grid().clone(),
            &mut rng,
            1 + i % 10,
            0.0,
            vanish,
        );
        let mut y = ctx.model().free(u.values()).to_vec();
        ctx.split_in_place(&mut y);
        let ny = ctx.norm_free(&y);
        if !(ny > 0.0) {
            continue;
        }
        let target = 10f64.powf(rng.gen_range(-2.0..2.0));
        y.iter_mut().for_each(|v| *v *= target / ny);
        let x: Vec<f64> = y
            .iter()
            .zip(ctx.phi_free())
            .map(|(v, f)| v + tau * f)
            .collect();
        let (a, b) = ctx.model().integrals(&ctx.model().full(&x));
        let lhs = a - lambda * b;
        let xval = ctx.model().integrals(&ctx.model().full(&y)).0;
        if tau == 0.0 {
            min_lhs_tau0 = min_lhs_tau0.min(lhs);
        }
        pts.push((xval, lhs));
    }
    pts.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    let hull = lower_hull(&pts);
    let edges: Vec<(f64, f64)> = hull
        .windows(2)
        .map(|w| {
            let slope = (w[1].1 - w[0].1) / (w[1].0 - w[0].0);
            (slope, w[0].1 - slope * w[0].0)
        })
        .collect();
    let (alpha, intercept) = edges
        .iter()
        .copied()
        .find(|e| e.0 > 0.0)
        .ok_or_else(|| Error::no_convergence("positive coercivity slope", trials, 0.0))?;
    let beta = (-intercept).max(0.0);
    let scale = pts.iter().map(|q| q.1.abs()).fold(1.0, f64::max);
    if pts.iter().any(|q| q.1 < alpha * q.0 - beta - 1e-12 * scale) {
        return Err(Error::no_convergence(
            "affine minorant of the coercivity cloud",
            trials,
            alpha,
        ));
    }
    Ok(Coercivity {
        t,
        samples: pts.len() - 1,
        alpha,
        beta,
        min_lhs_tau0,
        alpha_asymptotic: edges.last().map_or(alpha, |e| e.0),
    })
}

impl EnergyContext {
    fn split_in_place(&self, y: &mut [f64]) {
        let (_, perp) = self.split(y);
        y.copy_from_slice(&perp);
    }
}

/// `[p beta / ((p-1) alpha) + alpha^{-p/(p-1)} ||h||_*^{p/(p-1)}]^{1/p}`, the
/// a priori bound on slice minimizer norms.
pub fn minimizer_norm_bound(coerc: &Coercivity, dual_norm: f64, p: f64) -> f64 {
    let q = p / (p - 1.0);
    (p * coerc.beta / ((p - 1.0) * coerc.alpha) + coerc.alpha.powf(-q) * dual_norm.powf(q))
        .powf(1.0 / p)
}

/// Outcome of the ring search.
#[derive(Debug, Clone, Serialize)]
pub struct NonnegRing {
    pub r: f64,
    pub sampled_min: f64,
    /// Sampled minimum at `2R`.
    pub sampled_min_2r: f64,
    pub doublings: usize,
}

/// Smallest sampled `J_h(tau phi_1 + u_perp)` over `tau in [-m, m]` and
/// `directions` random `u_perp` with `||u_perp|| = r`.
fn ring_minimum(ctx: &EnergyContext, m: f64, r: f64, directions: &[Vec<f64>]) -> f64 {
    let mut best = f64::INFINITY;
    for k in 0..=10 {
        let tau = m * (k as f64 / 5.0 - 1.0);
        for d in directions {
            let x: Vec<f64> = d
                .iter()
                .zip(ctx.phi_free())
                .map(|(v, f)| r * v + tau * f)
                .collect();
            best = best.min(ctx.energy_free(&x));
        }
    }
    best
}

/// Finds `R > C` with `J_h >= 0` on the sampled ring `||u_perp|| = R`,
/// `|tau| <= M`, doubling `R` from `2C` until two consecutive radii pass.
pub fn nonneg_ring(
    ctx: &EnergyContext,
    m: f64,
    c: f64,
    directions: usize,
    seed: u64,
) -> Result<NonnegRing> {
    if !(m > 0.0 && c > 0.0) {
        return Err(Error::invalid("M and C must be positive"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let vanish = ctx.n_free() < ctx.eig().model.grid().cells();
    let dirs: Vec<Vec<f64>> = (0..directions)
        .filter_map(|i| {
            let u = RadialFunction::random(
                ctx.eig().phi.grid().clone(),
                &mut rng,
                1 + i % 10,
                0.0,
                vanish,
            );
            let mut y = ctx.model().free(u.values()).to_vec();
            ctx.split_in_place(&mut y);
            let ny = ctx.norm_free(&y);
            (ny > 0.0).then(|| y.iter().map(|v| v / ny).collect())
        })
        .collect();
    let mut r = 2.0 * c;
    let mut prev = ring_minimum(ctx, m, r, &dirs);
    for doublings in 0..10 {
        let next = ring_minimum(ctx, m, 2.0 * r, &dirs);
        if prev >= 0.0 && next >= 0.0 {
            return Ok(NonnegRing {
                r,
                sampled_min: prev,
                sampled_min_2r: next,
                doublings,
            });
        }
        r *= 2.0;
        prev = next;
    }
    Err(Error::no_convergence(
        "nonnegative ring radius up to 2^10 C",
        10,
        prev,
    ))
}

/// Checks that `phi` is compactly supported in `(1, R_max)` and constant on
/// the cell containing `r0` and its two neighbours.
pub fn check_in_y(phi: &RadialFunction, r0: f64) -> Result<()> {
    let v = phi.values();
    let m = v.len() - 1;
    if v[0] != 0.0 || v[m] != 0.0 || v[m - 1] != 0.0 {
        return Err(Error::invalid(
            "functions of Y vanish at r = 1 and near R_max",
        ));
    }
    let c = phi.grid().locate(r0);
    if c == 0 || c + 2 > m {
        return Err(Error::invalid("r0 lies too close to the grid ends"));
    }
    let k = v[c];
    if v[c - 1..=c + 2].iter().any(|&x| x != k) {
        return Err(Error::invalid(
            "functions of Y are constant on a neighbourhood of r0",
        ));
    }
    Ok(())
}

/// Algebraic check of `J_h(u_pm) = t^p f(pm t^{-p/2}) - t^{(2-p)/2}` for
/// `u_pm = pm t phi_1 + t^{(2-p)/2} phi`.
#[derive(Debug, Clone, Serialize)]
pub struct SaddleReport {
    /// Factor applied to `phi` so that `<h, phi> = 1`.
    pub pairing_scale: f64,
    /// `t` below which the positivity margin `t^{-p/2} ||phi||_inf < inf phi_1 / 2` fails.
    pub t_min: f64,
    pub f0: f64,
    pub t: Vec<f64>,
    pub j_plus: Vec<f64>,
    pub j_minus: Vec<f64>,
    pub residuals: Vec<f64>,
    pub max_residual: f64,
    /// Smallest sampled `t` from which on both `J_h(u_pm) < level`.
    pub t1: Option<f64>,
    pub level: f64,
}

/// Saddle construction at the sampled values `ts` (each at least `t_min`).
pub fn saddle_construction(
    ctx: &EnergyContext,
    phi: &RadialFunction,
    ts: &[f64],
    level: f64,
) -> Result<SaddleReport> {
    let params = *ctx.params();
    if params.regime != Regime::Singular {
        return Err(Error::invalid("the saddle construction needs 1 < p < 2"));
    }
    ctx.check_grid(phi)?;
    let nodes = ctx.eig().phi.grid().nodes();
    let phi1 = ctx.eig().phi.values();
    let i0 = (1..phi1.len())
        .max_by(|&a, &b| phi1[a].total_cmp(&phi1[b]))
        .expect("nodes");
    check_in_y(phi, nodes[i0])?;
    let p = params.p;
    let hnorm = ctx.dual_norm()?;
    let pair = ctx.pairing(ctx.model().free(phi.values()));
    if pair.abs() <= 1e-12 * hnorm * ctx.norm_free(ctx.model().free(phi.values())) {
        return Err(Error::invalid("<h, phi> vanishes; phi cannot be rescaled"));
    }
    let scale = 1.0 / pair;
    let y: Vec<f64> = ctx
        .model()
        .free(phi.values())
        .iter()
        .map(|v| v * scale)
        .collect();
    let sup = y.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let inf_phi1 = ctx
        .phi_free()
        .iter()
        .zip(&y)
        .filter(|(_, v)| **v != 0.0)
        .map(|(f, _)| *f)
        .fold(f64::INFINITY, f64::min);
    let t_min = (2.0 * sup / inf_phi1).powf(2.0 / p);
    let lambda = ctx.lambda();
    let f = |xi: f64| -> (f64, f64) {
        let x: Vec<f64> = ctx
            .phi_free()
            .iter()
            .zip(&y)
            .map(|(a, b)| a + xi * b)
            .collect();
        let (a, b) = ctx.model().integrals(&ctx.model().full(&x));
        ((a - lambda * b) / p, (a + lambda * b) / p)
    };
    let mut rep = SaddleReport {
        pairing_scale: scale,
        t_min,
        f0: f(0.0).0,
        t: Vec::new(),
        j_plus: Vec::new(),
        j_minus: Vec::new(),
        residuals: Vec::new(),
        max_residual: 0.0,
        t1: None,
        level,
    };
    for &t in ts {
        if t < t_min {
            return Err(Error::invalid(format!(
                "t = {t} is below the positivity threshold {t_min}"
            )));
        }
        let xi = t.powf(-p / 2.0);
        let s = t.powf((2.0 - p) / 2.0);
        let mut res: f64 = 0.0;
        let mut vals = [0.0; 2];
        for (k, sign) in [1.0, -1.0].into_iter().enumerate() {
            let x: Vec<f64> = ctx
                .phi_free()
                .iter()
                .zip(&y)
                .map(|(a, b)| sign * t * a + s * b)
                .collect();
            let j = ctx.energy_free(&x);
            let (fv, size) = f(sign * xi);
            let predicted = t.powf(p) * fv - s;
            res = res.max((j - predicted).abs() / (1.0 + t.powf(p) * size + s));
            vals[k] = j;
        }
        rep.t.push(t);
        rep.j_plus.push(vals[0]);
        rep.j_minus.push(vals[1]);
        rep.residuals.push(res);
        rep.max_residual = rep.max_residual.max(res);
    }
    let below: Vec<bool> = rep
        .j_plus
        .iter()
        .zip(&rep.j_minus)
        .map(|(a, b)| *a < level && *b < level)
        .collect();
    let first = (0..below.len()).find(|&i| below[i..].iter().all(|&b| b));
    rep.t1 = first.map(|i| rep.t[i]);
    Ok(rep)
}

/// Energy, gradient and metric of a smooth functional on `R^n`.
pub trait Functional {
    fn dim(&self) -> usize;
    fn value(&self, x: &[f64]) -> f64;
    fn gradient(&self, x: &[f64]) -> Vec<f64>;
    /// Measure of criticality used by the stopping rule.
    fn residual(&self, x: &[f64]) -> f64 {
        norm2(&self.gradient(x))
    }
    /// Applies the inverse of a positive definite metric at `x` to `g`.
    fn precondition(&self, _x: &[f64], g: &[f64]) -> Vec<f64> {
        g.to_vec()
    }
    /// Newton correction `-H(x)^{-1} g(x)`, when a Hessian is available.
    fn newton_step(&self, _x: &[f64]) -> Option<Vec<f64>> {
        None
    }
}

impl Functional for EnergyContext {
    fn dim(&self) -> usize {
        self.n_free()
    }
    fn value(&self, x: &[f64]) -> f64 {
        self.energy_free(x)
    }
    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        self.gradient_free(x)
    }
    fn residual(&self, x: &[f64]) -> f64 {
        self.residual_free(x)
    }
    fn precondition(&self, x: &[f64], g: &[f64]) -> Vec<f64> {
        let (ha, _) = self.model().hessians(&self.model().full(x));
        ha.solve_ldl(g).unwrap_or_else(|_| g.to_vec())
    }
    fn newton_step(&self, x: &[f64]) -> Option<Vec<f64>> {
        bordered_direction(&self.hessian_free(x), &self.gradient_free(x), None)
    }
}

/// Parameters of the path-deformation search.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct MountainPassOptions {
    pub beads: usize,
    pub max_iter: usize,
    pub tol: f64,
    pub step: f64,
    pub max_restarts: usize,
    /// Iterations after which the path is narrowed to the two segments
    /// around the highest bead.
    pub zoom_every: usize,
}

impl Default for MountainPassOptions {
    fn default() -> Self {
        MountainPassOptions {
            beads: 32,
            max_iter: 5000,
            tol: 1e-5,
            step: 0.5,
            max_restarts: 3,
            zoom_every: 200,
        }
    }
}

#[derive(Debug, Clone)]
pub struct MountainPassResult {
    pub x: Vec<f64>,
    pub value: f64,
    pub residual: f64,
    pub iterations: usize,
    pub beads: usize,
    pub restarts: usize,
}

/// Resamples a polygonal path to `n` beads equally spaced in arc length.
fn resample(path: &[Vec<f64>], n: usize) -> Vec<Vec<f64>> {
    let mut s = vec![0.0];
    for w in path.windows(2) {
        let d: Vec<f64> = w[1].iter().zip(&w[0]).map(|(a, b)| a - b).collect();
        s.push(s.last().unwrap() + norm2(&d));
    }
    let total = *s.last().unwrap();
    let mut out = Vec::with_capacity(n);
    let mut k = 0;
    for i in 0..n {
        let target = total * i as f64 / (n - 1) as f64;
        while k + 2 < s.len() && s[k + 1] < target {
            k += 1;
        }
        let span = s[k + 1] - s[k];
        let a = if span > 0.0 {
            ((target - s[k]) / span).clamp(0.0, 1.0)
        } else {
            0.0
        };
        out.push(
            path[k]
                .iter()
                .zip(&path[k + 1])
                .map(|(x, y)| x + a * (y - x))
                .collect(),
        );
    }
    out[0] = path[0].clone();
    out[n - 1] = path[path.len() - 1].clone();
    out
}

fn unit_tangent(prev: &[f64], next: &[f64]) -> Vec<f64> {
    let d: Vec<f64> = next.iter().zip(prev).map(|(a, b)| a - b).collect();
    let n = norm2(&d);
    d.iter().map(|v| v / n).collect()
}

/// Newton iteration with backtracking on the residual.
fn newton_refine<F: Functional>(f: &F, mut x: Vec<f64>, tol: f64) -> Option<(Vec<f64>, f64)> {
    let mut r = f.residual(&x);
    for _ in 0..40 {
        if r < tol {
            return Some((x, r));
        }
        let dx = f.newton_step(&x)?;
        let mut t = 1.0;
        loop {
            let trial: Vec<f64> = x.iter().zip(&dx).map(|(a, b)| a + t * b).collect();
            let rt = f.residual(&trial);
            if rt < (1.0 - 1e-4 * t) * r {
                x = trial;
                r = rt;
                break;
            }
            t *= 0.5;
            if t < 1e-6 {
                return None;
            }
        }
    }
    (r < tol).then_some((x, r))
}

/// String method with a climbing bead: interior beads follow the
/// preconditioned descent direction with the tangential part removed, the
/// highest bead ascends along the tangent, and the two sub-paths on either
/// side of it are reparameterized by arc length. Every `zoom_every`
/// iterations the path is replaced by the two segments adjacent to the
/// highest bead, whose endpoints lie below the path maximum, so long paths
/// still resolve the saddle. Once the climbing bead is close to criticality
/// a Newton iteration finishes the search.
pub fn mountain_pass_path<F: Functional>(
    f: &F,
    init: &[Vec<f64>],
    opts: &MountainPassOptions,
) -> Result<MountainPassResult> {
    if init.len() < 2 || opts.beads < 3 {
        return Err(Error::invalid(
            "a mountain-pass path needs two endpoints and at least three beads",
        ));
    }
    let mut beads = resample(init, opts.beads);
    let mut n = opts.beads;
    let mut iterations = 0;
    let mut e_end = f.value(&beads[0]).max(f.value(&beads[n - 1]));
    let mut last_res = f64::INFINITY;
    for restart in 0..=opts.max_restarts {
        let mut eta = opts.step;
        let mut res0: Option<f64> = None;
        let mut collapsed = false;
        for it in 0..opts.max_iter {
            iterations += 1;
            let values: Vec<f64> = beads.iter().map(|b| f.value(b)).collect();
            let imax = (1..n - 1)
                .max_by(|&a, &b| values[a].total_cmp(&values[b]))
                .expect("interior bead");
            if !(values[imax] > e_end) {
                return Err(Error::invalid(format!(
                    "the path has no interior maximum above its endpoints (iteration {iterations})"
                )));
            }
            let res = f.residual(&beads[imax]);
            let first = *res0.get_or_insert(res);
            if res < opts.tol {
                return Ok(MountainPassResult {
                    x: beads[imax].clone(),
                    value: values[imax],
                    residual: res,
                    iterations,
                    beads: n,
                    restarts: restart,
                });
            }
            if it > 0 && it % opts.zoom_every.max(1) == 0 {
                e_end = values[imax - 1].max(values[imax + 1]);
                beads = resample(&beads[imax - 1..=imax + 1], n);
                res0 = None;
                continue;
            }
            if res < 1e-2 * first && it % 10 == 0 {
                if let Some((x, r)) = newton_refine(f, beads[imax].clone(), opts.tol) {
                    let v = f.value(&x);
                    if v > e_end {
                        return Ok(MountainPassResult {
                            x,
                            value: v,
                            residual: r,
                            iterations,
                            beads: n,
                            restarts: restart,
                        });
                    }
                }
            }
            eta = if res > last_res {
                (0.5 * eta).max(1e-4)
            } else {
                (1.1 * eta).min(opts.step)
            };
            last_res = res;
            let old = beads.clone();
            for i in 1..n - 1 {
                let t = unit_tangent(&old[i - 1], &old[i + 1]);
                let g = f.gradient(&old[i]);
                let mut d: Vec<f64> = f.precondition(&old[i], &g).iter().map(|v| -v).collect();
                let par = dot(&d, &t);
                let k = if i == imax { 2.0 } else { 1.0 };
                d.iter_mut().zip(&t).for_each(|(v, w)| *v -= k * par * w);
                beads[i].iter_mut().zip(&d).for_each(|(b, v)| *b += eta * v);
            }
            let left = resample(&beads[..=imax], imax + 1);
            let right = resample(&beads[imax..], n - imax);
            beads = left;
            beads.extend_from_slice(&right[1..]);
            let total: f64 = beads
                .windows(2)
                .map(|w| {
                    norm2(
                        &w[1]
                            .iter()
                            .zip(&w[0])
                            .map(|(a, b)| a - b)
                            .collect::<Vec<_>>(),
                    )
                })
                .sum();
            let gap = beads
                .windows(2)
                .map(|w| {
                    norm2(
                        &w[1]
                            .iter()
                            .zip(&w[0])
                            .map(|(a, b)| a - b)
                            .collect::<Vec<_>>(),
                    )
                })
                .fold(f64::INFINITY, f64::min);
            if !(gap > 1e-14 * total) {
                collapsed = true;
                break;
            }
        }
        if !collapsed && restart == opts.max_restarts {
            break;
        }
        n *= 2;
        beads = resample(&beads, n);
    }
    Err(Error::no_convergence(
        "mountain-pass path deformation",
        iterations,
        last_res,
    ))
}

/// Mountain-pass critical point between `u_low` and `u_ref`, see [`slice_mountain_pass`].
pub fn mountain_pass(
    ctx: &EnergyContext,
    u_low: &RadialFunction,
    u_ref: &RadialFunction,
    opts: &MountainPassOptions,
) -> Result<(RadialFunction, f64)> {
    ctx.check_grid(u_low)?;
    ctx.check_grid(u_ref)?;
    let a = ctx.model().free(u_low.values());
    let b = ctx.model().free(u_ref.values());
    let r = slice_mountain_pass(ctx, a, b, opts, &SliceOptions::default())?;
    Ok((ctx.function(&r.x), r.residual))
}

/// How a reported solution was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolutionKind {
    SliceLocalMax,
    InteriorMin,
    MountainPass,
    LinearSolve,
    DirectMin,
}

#[derive(Debug, Clone, Serialize)]
pub struct Solution {
    #[serde(skip)]
    pub u: RadialFunction,
    pub kind: SolutionKind,
    pub residual: f64,
    pub energy: f64,
    /// Coefficient of `phi_1` in `u = tau phi_1 + u_perp`.
    pub tau: f64,
    pub norm: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Solved,
    /// `p = 2` and `<h, phi_1> != 0`: no solution exists.
    NoSolution,
}

/// Outcome of [`solve_resonant`].
#[derive(Debug, Clone, Serialize)]
pub struct SolveReport {
    pub regime: Regime,
    pub pairing_value: f64,
    pub dual_norm: f64,
    pub verdict: Verdict,
    pub solutions: Vec<Solution>,
    /// For `p = 2`: every `tau phi_1 + u_perp` solves the problem.
    pub family: bool,
    /// For `p = 2`: norm distance between the `u_perp` reached from two starts.
    pub uniqueness_gap: Option<f64>,
    /// For `p = 2`: distance between the slice minimizer and the direct linear solve.
    pub linear_check: Option<f64>,
    /// Smallest norm distance between distinct solutions.
    pub min_separation: Option<f64>,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct SolveOptions {
    pub residual_tol: f64,
    /// `<h, phi_1>` counts as zero below `orth_tol ||h||_* ||phi_1||`.
    pub orth_tol: f64,
    pub slice: SliceOptions,
    pub profile: ProfileOptions,
    pub mountain: MountainPassOptions,
    pub seed: u64,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            residual_tol: 1e-6,
            orth_tol: 1e-10,
            slice: SliceOptions::default(),
            profile: ProfileOptions::default(),
            mountain: MountainPassOptions::default(),
            seed: 1,
        }
    }
}

impl EnergyContext {
    fn solution(&self, x: &[f64], kind: SolutionKind) -> Solution {
        let (tau, _) = self.split(x);
        Solution {
            u: self.function(x),
            kind,
            residual: self.residual_free(x),
            energy: self.energy_free(x),
            tau,
            norm: self.norm_free(x),
        }
    }

    fn distance(&self, a: &[f64], b: &[f64]) -> f64 {
        let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
        self.norm_free(&d)
    }

    /// Solution of `(S - lambda M) y = l` with `c.y = 0` by shifted
    /// iterative refinement (`p = 2`).
    fn linear_solve(&self) -> Result<Vec<f64>> {
        let x0 = vec![0.0; self.n_free()];
        let h = self.hessian_free(&x0);
        let (_, hb) = self.model().hessians(&self.model().full(&x0));
        let sigma = 1e-8 * self.lambda;
        let shifted = h.shifted(&hb, sigma);
        let mut y = vec![0.0; self.n_free()];
        for _ in 0..20 {
            let hy = h.matvec(&y);
            let r: Vec<f64> = self.l.iter().zip(&hy).map(|(a, b)| a - b).collect();
            let dy = shifted.solve_ldl(&r)?;
            y.iter_mut().zip(&dy).for_each(|(a, b)| *a += b);
            self.split_in_place(&mut y);
            if norm2(&dy) <= 1e-15 * norm2(&y) {
                break;
            }
        }
        Ok(y)
    }

    /// Marches `tau = side tau0 2^k` until `stop(prev, cur)` holds; returns the
    /// visited slices.
    fn march(
        &self,
        side: f64,
        tau0: f64,
        opts: &SliceOptions,
        stop: impl Fn(&SliceMinimum, &SliceMinimum) -> bool,
    ) -> Result<Vec<SliceMinimum>> {
        let mut out = vec![require_converged(minimize_on_slice(
            0.0, self, None, opts,
        )?)?];
        let mut tau = tau0;
        for _ in 0..48 {
            let warm = out.last().map(|s| s.uperp.clone());
            let s = require_converged(minimize_on_slice(side * tau, self, warm.as_ref(), opts)?)?;
            let halt = stop(out.last().unwrap(), &s);
            out.push(s);
            if halt {
                return Ok(out);
            }
            tau *= 2.0;
        }
        Err(Error::no_convergence(
            "reduced-profile march",
            out.len(),
            out.last().unwrap().j,
        ))
    }

    /// Mountain-pass solution from `low` towards side `side`.
    fn mountain_pass_from(&self, low: &[f64], side: f64, opts: &SolveOptions) -> Result<Vec<f64>> {
        let e_low = self.energy_free(low);
        let (tau_low, _) = self.split(low);
        let tau0 = opts.profile.tau_max.max(tau_low.abs());
        let visited = self.march(side, tau0, &opts.slice, |_, cur| {
            cur.j < e_low - 1e-3 * (1.0 + e_low.abs())
        })?;
        let reference = visited.last().unwrap();
        let mopts = MountainPassOptions {
            tol: opts.residual_tol,
            ..opts.mountain
        };
        let r = slice_mountain_pass(self, low, &reference.point(self), &mopts, &opts.slice)?;
        Ok(r.x)
    }
}

/// Path deformation restricted to slices. Every path from `u_low` to `u_ref`
/// crosses each slice `tau = const`, where `J_h >= j(tau; h)`, so the path of
/// slice minimizers attains the mountain-pass level `max j` over
/// `[tau_low, tau_ref]`. Beads are slice minimizers at equally spaced `tau`;
/// after each relaxation the path is narrowed to the two segments around the
/// highest bead, until the highest bead (or its Newton polish) is critical.
pub fn slice_mountain_pass(
    ctx: &EnergyContext,
    u_low: &[f64],
    u_ref: &[f64],
    opts: &MountainPassOptions,
    slice: &SliceOptions,
) -> Result<MountainPassResult> {
    let n = opts.beads;
    if n < 3 {
        return Err(Error::invalid(
            "a mountain-pass path needs at least three beads",
        ));
    }
    let (mut lo, y_lo) = ctx.split(u_low);
    let (mut hi, y_hi) = ctx.split(u_ref);
    if lo == hi {
        return Err(Error::invalid(
            "mountain-pass endpoints lie on the same slice",
        ));
    }
    let mut e_end = ctx.energy_free(u_low).max(ctx.energy_free(u_ref));
    let mut warm_lo = ctx.function(&y_lo);
    let mut warm_hi = ctx.function(&y_hi);
    let mut best: Option<MountainPassResult> = None;
    for level in 0..80 {
        let taus: Vec<f64> = (0..n)
            .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
            .collect();
        let mut beads: Vec<SliceMinimum> = Vec::with_capacity(n);
        for (i, &tau) in taus.iter().enumerate() {
            let warm = if i == 0 {
                &warm_lo
            } else {
                &beads[i - 1].uperp
            };
            beads.push(require_converged(minimize_on_slice(
                tau,
                ctx,
                Some(warm),
                slice,
            )?)?);
        }
        // A second sweep from the other end keeps the lower of the two branches.
        for i in (0..n).rev() {
            let warm = if i == n - 1 {
                warm_hi.clone()
            } else {
                beads[i + 1].uperp.clone()
            };
            let s = require_converged(minimize_on_slice(taus[i], ctx, Some(&warm), slice)?)?;
            if s.j < beads[i].j {
                beads[i] = s;
            }
        }
        let imax = (1..n - 1)
            .max_by(|&a, &b| beads[a].j.total_cmp(&beads[b].j))
            .expect("interior bead");
        if !(beads[imax].j > e_end) {
            // Deep levels can flatten the profile to rounding; an earlier
            // critical bead is then the answer.
            return best.filter(|b| b.residual < opts.tol).ok_or_else(|| {
                Error::invalid(format!(
                    "the path has no interior maximum above its endpoints (level {level})"
                ))
            });
        }
        let x = beads[imax].point(ctx);
        let res = ctx.residual_free(&x);
        let (xp, rp) = ctx.polish(x.clone(), opts.tol);
        let (tp, _) = ctx.split(&xp);
        let inside = (tp - taus[imax - 1]) * (tp - taus[imax + 1]) <= 0.0;
        let vp = ctx.energy_free(&xp);
        let (x, value, residual) = if rp < res && inside && vp > e_end {
            (xp, vp, rp)
        } else {
            (x, beads[imax].j, res)
        };
        let previous = best.as_ref().map_or(f64::INFINITY, |b| b.residual);
        if residual < previous {
            best = Some(MountainPassResult {
                x,
                value,
                residual,
                iterations: level + 1,
                beads: n,
                restarts: 0,
            });
        }
        // Narrowing continues while it still pays off: until the residual is
        // well below the tolerance or stops decreasing.
        let current = best.as_ref().map_or(f64::INFINITY, |b| b.residual);
        if current < 1e-3 * opts.tol || (current < opts.tol && current > 0.5 * previous) {
            return Ok(best.expect("recorded"));
        }
        e_end = beads[imax - 1].j.max(beads[imax + 1].j);
        lo = taus[imax - 1];
        hi = taus[imax + 1];
        warm_lo = beads[imax - 1].uperp.clone();
        warm_hi = beads[imax + 1].uperp.clone();
    }
    let last = best.as_ref().map_or(f64::INFINITY, |b| b.residual);
    best.filter(|b| b.residual < opts.tol)
        .ok_or_else(|| Error::no_convergence("slice path deformation", 80, last))
}

/// Resonant problem `-Delta_p u = lambda_1 K |u|^{p-2} u + h` at the grid eigenvalue.
pub fn solve_resonant(ctx: &EnergyContext, opts: &SolveOptions) -> Result<SolveReport> {
    let params = *ctx.params();
    let pairing = ctx.pairing_phi();
    let dual_norm = ctx.dual_norm()?;
    let orthogonal = pairing.abs() <= opts.orth_tol * dual_norm * ctx.norm_free(ctx.phi_free());
    let mut report = SolveReport {
        regime: params.regime,
        pairing_value: pairing,
        dual_norm,
        verdict: Verdict::Solved,
        solutions: Vec::new(),
        family: false,
        uniqueness_gap: None,
        linear_check: None,
        min_separation: None,
    };
    let tol = opts.residual_tol;
    let base = vec![0.0; ctx.n_free()];
    match params.regime {
        Regime::Linear => {
            if !orthogonal {
                report.verdict = Verdict::NoSolution;
                return Ok(report);
            }
            let sopts = SliceOptions {
                gtol: opts.slice.gtol.min(1e-12),
                ..opts.slice
            };
            let cold = minimize_on_slice(0.0, ctx, None, &sopts)?;
            let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
            let vanish = ctx.n_free() < ctx.eig().model.grid().cells();
            let start =
                RadialFunction::random(ctx.eig().phi.grid().clone(), &mut rng, 8, 0.0, vanish)
                    .scaled(10.0);
            let y0 = ctx.model().free(start.values()).to_vec();
            let warm = ctx.descend(&base, y0, true, &sopts);
            let a = ctx.model().free(cold.uperp.values()).to_vec();
            report.uniqueness_gap = Some(ctx.distance(&a, &warm.y));
            report.linear_check = Some(ctx.distance(&a, &ctx.linear_solve()?));
            report.family = true;
            report
                .solutions
                .push(ctx.solution(&a, SolutionKind::LinearSolve));
        }
        Regime::Singular => {
            if orthogonal {
                let prof = adaptive_profile(ctx, &opts.profile, &opts.slice)?;
                let top = prof
                    .local_maxima
                    .iter()
                    .max_by(|a, b| a.j.total_cmp(&b.j))
                    .ok_or_else(|| {
                        Error::no_convergence(
                            "interior local maximum of the reduced profile",
                            prof.tau.len(),
                            0.0,
                        )
                    })?;
                let (x, _) = ctx.polish(top.slice.point(ctx), tol);
                report
                    .solutions
                    .push(ctx.solution(&x, SolutionKind::SliceLocalMax));
            } else {
                // j grows without bound on the side where -tau <h, phi_1> > 0,
                // so its first increase there brackets an interior minimum.
                let side = -pairing.signum();
                let visited = ctx.march(side, opts.profile.tau_max, &opts.slice, |prev, cur| {
                    cur.j > prev.j
                })?;
                let k = visited.len();
                let (lo, hi) = if k >= 3 {
                    (&visited[k - 3], &visited[k - 1])
                } else {
                    (&visited[0], &visited[k - 1])
                };
                let mut start = if lo.j <= visited[k - 2].j {
                    lo.point(ctx)
                } else {
                    visited[k - 2].point(ctx)
                };
                if k >= 3 && lo.dj_dtau * side < 0.0 && hi.dj_dtau * side > 0.0 {
                    start = refine_extremum(ctx, lo.clone(), hi.clone(), &opts.slice)?
                        .slice
                        .point(ctx);
                }
                let d = ctx.descend(&base, start, false, &opts.slice);
                let (low, _) = ctx.polish(d.y, tol);
                report
                    .solutions
                    .push(ctx.solution(&low, SolutionKind::InteriorMin));
                let mp = ctx.mountain_pass_from(&low, -side, opts)?;
                report
                    .solutions
                    .push(ctx.solution(&mp, SolutionKind::MountainPass));
            }
        }
        Regime::Degenerate => {
            let d = ctx.descend(&base, base.clone(), false, &opts.slice);
            if !d.converged {
                return Err(Error::no_convergence(
                    "direct minimization",
                    d.iterations,
                    d.grad_norm,
                ));
            }
            let (low, _) = ctx.polish(d.y, tol);
            report
                .solutions
                .push(ctx.solution(&low, SolutionKind::DirectMin));
            if !orthogonal {
                let mp = ctx.mountain_pass_from(&low, pairing.signum(), opts)?;
                report
                    .solutions
                    .push(ctx.solution(&mp, SolutionKind::MountainPass));
            }
        }
        Regime::Supercritical => {
            return Err(Error::invalid("the resonant solver needs 1 < p < N"));
        }
    }
    if let Some(bad) = report.solutions.iter().find(|s| !(s.residual < tol)) {
        return Err(Error::no_convergence(
            format!("{:?} solution", bad.kind),
            0,
            bad.residual,
        ));
    }
    let xs: Vec<&[f64]> = report
        .solutions
        .iter()
        .map(|s| ctx.model().free(s.u.values()))
        .collect();
    let mut sep = f64::INFINITY;
    for i in 0..xs.len() {
        for k in i + 1..xs.len() {
            sep = sep.min(ctx.distance(xs[i], xs[k]));
        }
    }
    if sep.is_finite() {
        report.min_separation = Some(sep);
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::radial::{build_grid, Grading, OuterBoundary};
    use crate::weights::RadialWeight;

    fn context(p: f64, n: usize, m: usize, r_max: f64, spec: &str) -> EnergyContext {
        let params = Params::new(p, n).unwrap();
        let grid = build_grid(r_max, m, Grading::Geometric, n).unwrap();
        let model = Arc::new(
            DiscreteModel::new(grid, RadialWeight::LinearR4, params, OuterBoundary::Tail).unwrap(),
        );
        let m_exp = params.decay_exponent();
        let guess = move |r: f64| (1.0 - 1.0 / r) * r.powf(-m_exp);
        let eig = Arc::new(GridEigenPair::compute(model, Some(&guess)).unwrap());
        let h = spec.parse::<HSpec>().unwrap().build(&eig).unwrap();
        EnergyContext::new(eig, h).unwrap()
    }

    #[test]
    fn energy_examples() {
        for p in [1.5, 2.0, 2.5] {
            let ctx = context(p, 3, 200, 40.0, "zero");
            let zero = RadialFunction::zeros(ctx.eig().phi.grid().clone());
            assert_eq!(energy(&zero, &ctx).unwrap(), 0.0);
            for t in [1.0, -2.0, 7.5] {
                let j = energy(&ctx.eig().phi.scaled(t), &ctx).unwrap();
                assert!(j.abs() < 1e-12 * t.abs().powf(p) * ctx.lambda());
            }
            let g = energy_gradient(&ctx.eig().phi, &ctx).unwrap();
            assert!(norm2(&g) < 1e-10);
        }
    }

    #[test]
    fn homogeneity_without_source() {
        let ctx = context(1.5, 3, 200, 40.0, "zero");
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let u = RadialFunction::random(ctx.eig().phi.grid().clone(), &mut rng, 5, 0.0, false);
        let j = energy(&u, &ctx).unwrap();
        for t in [0.5, -3.0] {
            let jt = energy(&u.scaled(t), &ctx).unwrap();
            assert!((jt - t.abs().powf(1.5) * j).abs() < 1e-12 * jt.abs());
        }
    }

    #[test]
    fn gradient_matches_finite_differences() {
        for p in [1.5, 2.0, 2.5, 3.0] {
            let n = if p == 3.0 { 4 } else { 3 };
            let ctx = context(p, n, 150, 30.0, "bump?amp=2");
            let mut rng = ChaCha8Rng::seed_from_u64(8);
            let mut worst: f64 = 0.0;
            for _ in 0..50 {
                let u =
                    RadialFunction::random(ctx.eig().phi.grid().clone(), &mut rng, 8, 1e-3, false);
                let v =
                    RadialFunction::random(ctx.eig().phi.grid().clone(), &mut rng, 8, 1e-3, false);
                let g = energy_gradient(&u, &ctx).unwrap();
                let exact = dot(&g, v.values());
                let eps = 1e-6 * x_norm_of(&u, &ctx) / x_norm_of(&v, &ctx);
                let jp = energy(&u.combine(1.0, &v, eps).unwrap(), &ctx).unwrap();
                let jm = energy(&u.combine(1.0, &v, -eps).unwrap(), &ctx).unwrap();
                let fd = (jp - jm) / (2.0 * eps);
                worst = worst.max((fd - exact).abs() / exact.abs().max(1e-3));
            }
            assert!(worst < 1e-5, "p = {p}: {worst}");
        }
    }

    fn x_norm_of(u: &RadialFunction, ctx: &EnergyContext) -> f64 {
        ctx.norm_free(ctx.model().free(u.values()))
    }

    #[test]
    fn linear_gradient_is_matrix_action() {
        let ctx = context(2.0, 3, 100, 30.0, "bump?amp=1");
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let u = RadialFunction::random(ctx.eig().phi.grid().clone(), &mut rng, 6, 1e-2, false);
        let x = ctx.model().free(u.values());
        let h = ctx.hessian_free(x);
        let g = ctx.gradient_free(x);
        let hx = h.matvec(x);
        for i in 0..g.len() {
            assert!((g[i] - (hx[i] - ctx.l[i])).abs() < 1e-10 * (1.0 + hx[i].abs()));
        }
    }

    #[test]
    fn slice_examples() {
        let opts = SliceOptions::default();
        let ctx = context(1.5, 3, 200, 40.0, "zero");
        let s = minimize_on_slice(0.0, &ctx, None, &opts).unwrap();
        assert!(s.converged && s.j == 0.0);
        assert!(s.uperp.values().iter().all(|&v| v == 0.0));
        let ctx = context(2.0, 3, 200, 40.0, "kphi");
        let direct = ctx.linear_solve().unwrap();
        for tau in [-1.0, 0.0, 2.0] {
            let s = minimize_on_slice(tau, &ctx, None, &opts).unwrap();
            assert!(s.converged);
            let y = ctx.model().free(s.uperp.values());
            assert!(ctx.distance(y, &direct) < 1e-8 * (1.0 + ctx.norm_free(&direct)));
            assert!(s.j <= 1e-12);
            assert!(dot(&ctx.c, y).abs() < 1e-10 * norm2(&ctx.c) * norm2(y));
        }
    }

    #[test]
    fn source_spec_roundtrip() {
        let s: HSpec = "bump?center=3&width=0.5&amp=1&orthogonalize=true"
            .parse()
            .unwrap();
        assert!(s.orthogonalize && s.xi == 0.0);
        let k: HSpec = "kphi?xi=0.01".parse().unwrap();
        assert_eq!(k.xi, 0.01);
        assert!(k.orthogonalize);
        assert_eq!(k.to_string().parse::<HSpec>().unwrap(), k);
        assert!("bump?foo=1".parse::<HSpec>().is_err());
        assert!("ring".parse::<HSpec>().is_err());
        let ctx = context(1.5, 3, 200, 40.0, "bump?amp=3&orthogonalize=true");
        assert!(ctx.pairing_phi().abs() < 1e-14 * ctx.dual_norm().unwrap());
    }

    /// `E(x, y) = x^2/2 - x^3/3 + (y - x^2/2)^2`: local minimum at the origin,
    /// mountain-pass saddle at `(1, 1/2)`.
    struct Cubic;

    impl Functional for Cubic {
        fn dim(&self) -> usize {
            2
        }
        fn value(&self, x: &[f64]) -> f64 {
            0.5 * x[0] * x[0] - x[0].powi(3) / 3.0 + (x[1] - 0.5 * x[0] * x[0]).powi(2)
        }
        fn gradient(&self, x: &[f64]) -> Vec<f64> {
            let w = x[1] - 0.5 * x[0] * x[0];
            vec![x[0] - x[0] * x[0] - 2.0 * w * x[0], 2.0 * w]
        }
    }

    #[test]
    fn mountain_pass_on_synthetic_saddle() {
        let opts = MountainPassOptions {
            tol: 1e-8,
            step: 0.1,
            ..Default::default()
        };
        let r = mountain_pass_path(&Cubic, &[vec![0.0, 0.0], vec![2.0, 2.0]], &opts).unwrap();
        assert!(
            (r.x[0] - 1.0).abs() < 1e-6 && (r.x[1] - 0.5).abs() < 1e-6,
            "{r:?}"
        );
        assert!((r.value - 1.0 / 6.0).abs() < 1e-10);
        assert!(mountain_pass_path(&Cubic, &[vec![0.5, 0.0], vec![0.0, 0.0]], &opts).is_err());
    }

    #[test]
    fn linear_resonance_alternative() {
        let opts = SolveOptions::default();
        let ctx = context(2.0, 3, 400, 60.0, "bump?orthogonalize=false");
        let rep = solve_resonant(&ctx, &opts).unwrap();
        assert_eq!(rep.verdict, Verdict::NoSolution);
        let ctx = context(2.0, 3, 400, 60.0, "kphi");
        let rep = solve_resonant(&ctx, &opts).unwrap();
        assert_eq!(rep.verdict, Verdict::Solved);
        assert!(rep.family);
        assert!(rep.uniqueness_gap.unwrap() < 1e-8, "{rep:?}");
        assert!(rep.linear_check.unwrap() < 1e-8, "{rep:?}");
        assert!(rep.solutions[0].residual < 1e-10);
    }

    #[test]
    fn p2_coercivity_is_spectral() {
        let ctx = context(2.0, 3, 400, 60.0, "zero");
        let co = coercivity_constants(&ctx, 5.0, 300, 3).unwrap();
        let mu2 = ctx.eig().mu2.unwrap();
        assert!(
            co.alpha >= (1.0 - ctx.lambda() / mu2) * (1.0 - 1e-9),
            "{co:?}"
        );
        assert_eq!(co.beta, 0.0);
        assert!(co.min_lhs_tau0 >= 0.0);
        let ring = nonneg_ring(&ctx, 3.0, 1.0, 10, 1).unwrap();
        assert_eq!(ring.r, 2.0);
        assert!(ring.sampled_min_2r >= 0.0);
    }
}
