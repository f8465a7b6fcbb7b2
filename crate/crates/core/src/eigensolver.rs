//! First eigenpair of the radial p-Laplacian by shooting, and the Riccati
//! identities along the eigenfunction.
//!
//! The radial equation is integrated in flux form `(phi, q)` with
//! `q = r^{N-1} |phi'|^{p-2} phi'`. Beyond a matching radius the eigenfunction is
//! carried by the decaying solution of the Riccati equation for
//! `U = r^{p-1} (-phi'/phi)^{p-1}`, integrated inward in `t = ln r` from a far
//! radius where it is pinned to its asymptotic value.

use std::path::Path;
use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::numerics::ode::{integrate_piecewise, OdeOptions, Trajectory};
use crate::numerics::quadrature::{composite_log, gauss};
use crate::numerics::signed_pow;
use crate::params::Params;
use crate::radial::{RadialFunction, RadialGrid};
use crate::weights::{check_admissible, RadialWeight};

/// Dead band of the end-point classification.
pub const DEAD_BAND: f64 = 0.2;

/// Smallest far radius of the inward Riccati integration.
const R_FAR_MIN: f64 = 1e8;

/// Settings of the shooting solver.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ShootingOptions {
    /// Relative width of the final eigenvalue bracket.
    pub tol: f64,
    /// End of the forward integration used to order trial eigenvalues.
    pub r_end: f64,
    /// Largest radius used for the asymptotic constants.
    pub r_asym: f64,
    /// Relative tolerance of the Runge-Kutta integrations.
    pub ode_rtol: f64,
}

impl Default for ShootingOptions {
    fn default() -> Self {
        ShootingOptions {
            tol: 1e-12,
            r_end: 1e2,
            r_asym: 1e3,
            ode_rtol: 1e-12,
        }
    }
}

fn ode_options(rtol: f64) -> OdeOptions {
    OdeOptions {
        rtol,
        atol: rtol * 1e-4,
        ..Default::default()
    }
}

fn radial_rhs<'a>(
    lambda: f64,
    w: &'a RadialWeight,
    params: &Params,
) -> impl Fn(f64, &[f64; 2]) -> [f64; 2] + 'a {
    let p = params.p;
    let nf = params.nf();
    move |r: f64, y: &[f64; 2]| {
        let rn = r.powf(nf - 1.0);
        let dphi = signed_pow(y[1] / rn, 1.0 / (p - 1.0));
        let dq = -lambda * rn * w.effective(r) * signed_pow(y[0], p - 1.0);
        [dphi, dq]
    }
}

/// Forward solution of the radial equation from `(phi, q)(1) = (0, 1)`.
#[derive(Debug, Clone)]
pub struct RadialTrajectory {
    pub lambda: f64,
    pub params: Params,
    pub r_end: f64,
    /// Radius where `phi` returns to zero, if it does before `r_end`.
    pub crossing: Option<f64>,
    traj: Trajectory<2>,
}

impl RadialTrajectory {
    /// `(phi, q)` at `r` (clamped to the integrated range).
    pub fn state(&self, r: f64) -> [f64; 2] {
        self.traj.eval(r)
    }

    pub fn r_final(&self) -> f64 {
        self.traj.t_final
    }

    pub fn phi(&self, r: f64) -> f64 {
        self.state(r)[0]
    }

    pub fn dphi(&self, r: f64) -> f64 {
        let q = self.state(r)[1];
        signed_pow(
            q / r.powf(self.params.nf() - 1.0),
            1.0 / (self.params.p - 1.0),
        )
    }

    /// Signed Riccati variable `U = -q r^{p-N} / phi^{p-1}`.
    pub fn riccati(&self, r: f64) -> f64 {
        let [phi, q] = self.state(r);
        -q * r.powf(self.params.p - self.params.nf()) / phi.powf(self.params.p - 1.0)
    }

    /// Unique zero of `q` (equivalently of `phi'`), if reached.
    pub fn turning_point(&self) -> Option<f64> {
        let steps = &self.traj.steps;
        let k = steps.iter().position(|s| s.eval(s.t1())[1] <= 0.0)?;
        let s = &steps[k];
        let (mut lo, mut hi) = (s.t0, s.t1());
        if s.eval(lo)[1] <= 0.0 {
            return Some(lo);
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if s.eval(mid)[1] > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Some(0.5 * (lo + hi))
    }
}

/// Integrates the flux-form radial equation on `[1, r_end]`, stopping when
/// `phi` returns to zero.
pub fn integrate_radial(
    lambda: f64,
    w: &RadialWeight,
    params: &Params,
    r_end: f64,
) -> Result<RadialTrajectory> {
    integrate_radial_with(lambda, w, params, r_end, 1e-10)
}

pub fn integrate_radial_with(
    lambda: f64,
    w: &RadialWeight,
    params: &Params,
    r_end: f64,
    rtol: f64,
) -> Result<RadialTrajectory> {
    if !(lambda >= 0.0) {
        return Err(Error::invalid("lambda must be nonnegative"));
    }
    if !(r_end > 1.0) {
        return Err(Error::invalid("r_end must exceed 1"));
    }
    let mut knots = vec![1.0];
    knots.extend(w.effective_breakpoints(1.0, r_end));
    knots.push(r_end);
    // While q > 0 the solution is increasing and cannot vanish, so the event
    // is only armed on the decreasing branch.
    let event = |_r: f64, y: &[f64; 2]| if y[1] > 0.0 { 1.0 } else { y[0] };
    let traj = integrate_piecewise(
        radial_rhs(lambda, w, params),
        &knots,
        [0.0, 1.0],
        &ode_options(rtol),
        Some(event),
    )?;
    Ok(RadialTrajectory {
        lambda,
        params: *params,
        r_end,
        crossing: traj.event,
        traj,
    })
}

/// Qualitative behaviour of a forward trajectory at its end point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Classification {
    Crossing {
        r_cross: f64,
    },
    Subcritical,
    Decaying,
    /// `U(r_end)` above the dead band with no crossing yet.
    Ambiguous {
        u_end: f64,
    },
}

/// End-point classification with dead band [`DEAD_BAND`] around `C_{N,p}`.
pub fn classify_trajectory(tr: &RadialTrajectory) -> Classification {
    if let Some(r_cross) = tr.crossing {
        return Classification::Crossing { r_cross };
    }
    let c = tr.params.c_np();
    let r = tr.r_final();
    if tr.state(r)[1] >= 0.0 {
        return Classification::Subcritical;
    }
    let u = tr.riccati(r);
    if u < c * (1.0 - DEAD_BAND) {
        Classification::Subcritical
    } else if (u - c).abs() <= c * DEAD_BAND {
        Classification::Decaying
    } else {
        Classification::Ambiguous { u_end: u }
    }
}

/// Classifies the trajectory for `lambda`, doubling `r_end` while ambiguous.
pub fn classify_lambda(
    lambda: f64,
    w: &RadialWeight,
    params: &Params,
    r_end: f64,
) -> Result<Classification> {
    let mut r = r_end;
    let mut last = f64::NAN;
    for _ in 0..6 {
        let tr = integrate_radial(lambda, w, params, r)?;
        match classify_trajectory(&tr) {
            Classification::Ambiguous { u_end } => last = u_end,
            c => return Ok(c),
        }
        r *= 2.0;
    }
    Err(Error::no_convergence(
        "unambiguous end-point classification",
        6,
        last,
    ))
}

/// Inward solution `(U, L, J)` in `t = ln r`, where `L = ln phi` up to a
/// constant and `J(t) = omega int_{e^t}^inf K phi^p r^{N-1}` with the same scale.
#[derive(Debug, Clone)]
struct FarField {
    traj: Trajectory<3>,
    t_far: f64,
}

enum FarOutcome {
    Regular(FarField),
    /// The decaying solution vanishes at a radius outside the matching radius.
    Pole,
}

fn far_radius(params: &Params, r_eval: f64) -> f64 {
    let m = params.decay_exponent();
    let t = (R_FAR_MIN.ln()).max(r_eval.ln() + 12.0 * 10f64.ln() / m);
    t.exp()
}

fn far_field(
    lambda: f64,
    w: &RadialWeight,
    params: &Params,
    r_match: f64,
    r_far: f64,
    rtol: f64,
) -> Result<FarOutcome> {
    let p = params.p;
    let nf = params.nf();
    let m = params.decay_exponent();
    let c = params.c_np();
    let omega = params.omega();
    let t_far = r_far.ln();
    let rhs = |t: f64, y: &[f64; 3]| {
        let r = t.exp();
        let k = w.effective(r);
        let s = signed_pow(y[0], 1.0 / (p - 1.0));
        [
            (p - 1.0) * y[0] * (s - m) + lambda * r.powf(p) * k,
            -s,
            -omega * k * (nf * t + p * y[1]).exp(),
        ]
    };
    let u0 = c - lambda * r_far.powf(p) * w.effective(r_far) / m;
    let l0 = -m * t_far;
    // int_{r_far}^inf K (r_far/r)^{mp} r^{N-1} dr, the tail of J per unit phi(r_far)^p
    let tail_factor = omega
        * composite_log(
            |r: f64| w.effective(r) * (r / r_far).powf(-m * p) * r.powf(nf - 1.0),
            r_far,
            r_far * 1e8,
            &[],
            2,
            1e-10,
        );
    let j0 = tail_factor * (p * l0).exp();
    let mut knots = vec![t_far];
    let mut inner: Vec<f64> = w
        .effective_breakpoints(r_match, r_far)
        .iter()
        .map(|r| r.ln())
        .collect();
    inner.reverse();
    knots.extend(inner);
    knots.push(r_match.ln());
    let blow = 1e8 * (1.0 + c);
    let event = |_t: f64, y: &[f64; 3]| y[0] + blow;
    let traj = integrate_piecewise(rhs, &knots, [u0, l0, j0], &ode_options(rtol), Some(event))?;
    if traj.event.is_some() {
        return Ok(FarOutcome::Pole);
    }
    Ok(FarOutcome::Regular(FarField { traj, t_far }))
}

/// Position of a trial eigenvalue relative to `lambda_1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Side {
    Below,
    Above,
}

struct Trial {
    side: Side,
    forward: RadialTrajectory,
    far: Option<FarField>,
    r_match: f64,
    mismatch: f64,
}

fn trial(
    lambda: f64,
    w: &RadialWeight,
    params: &Params,
    opts: &ShootingOptions,
    r_far: f64,
) -> Result<Trial> {
    let forward = integrate_radial_with(lambda, w, params, opts.r_end, opts.ode_rtol)?;
    let below = |forward| Trial {
        side: Side::Below,
        forward,
        far: None,
        r_match: f64::NAN,
        mismatch: f64::NEG_INFINITY,
    };
    let above = |forward, r_match| Trial {
        side: Side::Above,
        forward,
        far: None,
        r_match,
        mismatch: f64::INFINITY,
    };
    if forward.crossing.is_some() {
        return Ok(above(forward, f64::NAN));
    }
    let Some(r_turn) = forward.turning_point() else {
        return Ok(below(forward));
    };
    let r_match = (2.0 * r_turn).min(opts.r_end);
    let u_f = forward.riccati(r_match);
    match far_field(lambda, w, params, r_match, r_far, opts.ode_rtol)? {
        FarOutcome::Pole => Ok(above(forward, r_match)),
        FarOutcome::Regular(far) => {
            let u_b = far.traj.y_final[0];
            let mismatch = u_f - u_b;
            Ok(Trial {
                side: if mismatch > 0.0 {
                    Side::Above
                } else {
                    Side::Below
                },
                forward,
                far: Some(far),
                r_match,
                mismatch,
            })
        }
    }
}

/// First eigenpair with its continuous representation.
#[derive(Debug, Clone)]
pub struct EigenPair {
    pub params: Params,
    pub weight: RadialWeight,
    pub lambda1: f64,
    /// Zero of `phi_1'`.
    pub r0: f64,
    /// Limit of `r^{(N-p)/(p-1)} phi_1(r)`.
    pub c_asym: f64,
    /// Limit of `r^{(N-1)/(p-1)} phi_1'(r)`.
    pub d_asym: f64,
    /// Final bisection bracket.
    pub bracket: (f64, f64),
    pub iterations: usize,
    /// Riccati mismatch at the matching radius for the returned eigenvalue.
    pub mismatch: f64,
    /// Radius where the inner and far representations are joined.
    pub r_match: f64,
    pub options: ShootingOptions,
    /// Dead-band classification of the forward trajectory at `r_end`.
    pub end_classification: Classification,
    scale: f64,
    log_shift: f64,
    inner: RadialTrajectory,
    far: FarField,
}

/// Computes `(lambda_1, phi_1)` by bisection on the shooting mismatch.
pub fn find_lambda1(
    w: &RadialWeight,
    params: &Params,
    opts: &ShootingOptions,
) -> Result<EigenPair> {
    params.require_subcritical()?;
    w.validate()?;
    if !(opts.tol > 0.0) || !(opts.r_end > 1.0) || !(opts.r_asym > 1.0) {
        return Err(Error::invalid(
            "shooting options must be positive with radii above 1",
        ));
    }
    let adm = check_admissible(w, params, 1e6);
    if !adm.pass {
        return Err(Error::invalid(format!(
            "weight {} is not admissible",
            w.id()
        )));
    }
    let r_far = far_radius(params, opts.r_asym.max(opts.r_end));
    let mut lo = 0.0;
    let mut hi = 1.0;
    let mut doublings = 0;
    let mut hi_trial = trial(hi, w, params, opts, r_far)?;
    while hi_trial.side == Side::Below {
        lo = hi;
        hi *= 2.0;
        doublings += 1;
        if doublings > 60 {
            return Err(Error::Bracket { lambda_hi: hi });
        }
        hi_trial = trial(hi, w, params, opts, r_far)?;
    }
    let mut iterations = 0;
    while hi - lo > opts.tol * hi {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        match trial(mid, w, params, opts, r_far)?.side {
            Side::Below => lo = mid,
            Side::Above => hi = mid,
        }
        iterations += 1;
        if iterations > 200 {
            return Err(Error::no_convergence(
                "eigenvalue bisection",
                iterations,
                hi - lo,
            ));
        }
    }
    let lambda1 = 0.5 * (lo + hi);
    let t = trial(lambda1, w, params, opts, r_far)?;
    let far = t.far.ok_or_else(|| {
        Error::no_convergence(
            "matched eigenfunction at the final eigenvalue",
            iterations,
            hi - lo,
        )
    })?;
    let inner = t.forward;
    let r0 = inner
        .turning_point()
        .expect("turning point exists for a matched trial");
    let end_classification = classify_trajectory(&inner);
    let p = params.p;
    let nf = params.nf();
    let omega = params.omega();
    let r_match = t.r_match;
    // phi_far(r) = exp(L + log_shift) continues phi_inner across r_match.
    let log_shift = inner.phi(r_match).ln() - far.traj.y_final[1];

    // Normalization with the unscaled inner solution.
    let mut b_inner = 0.0;
    let rule = gauss(8);
    for s in &inner.traj.steps {
        let (a, b) = (s.t0, s.t1().min(r_match));
        if b <= a {
            continue;
        }
        // The inner steps already restart at every breakpoint of K.
        b_inner += rule.integrate(a, b, |r| {
            w.effective(r.clamp(a + 4.0 * f64::EPSILON * a, b - 4.0 * f64::EPSILON * b))
                * s.eval(r)[0].abs().powf(p)
                * r.powf(nf - 1.0)
        });
    }
    b_inner *= omega;
    let b_outer = far.traj.y_final[2] * (p * log_shift).exp();
    let scale = (b_inner + b_outer).powf(-1.0 / p);

    let mut eig = EigenPair {
        params: *params,
        weight: w.clone(),
        lambda1,
        r0,
        c_asym: f64::NAN,
        d_asym: f64::NAN,
        bracket: (lo, hi),
        iterations,
        mismatch: t.mismatch,
        r_match,
        options: *opts,
        end_classification,
        scale,
        log_shift,
        inner,
        far,
    };
    let ac = asymptotic_constants(&eig)?;
    eig.c_asym = ac.c;
    eig.d_asym = ac.d;
    Ok(eig)
}

impl EigenPair {
    pub(crate) fn far_radius(&self) -> f64 {
        self.far.t_far.exp()
    }

    /// Normalized `phi_1(r)` for `r >= 1`.
    pub fn phi(&self, r: f64) -> f64 {
        if r <= self.r_match {
            self.scale * self.inner.phi(r)
        } else if r <= self.far_radius() {
            let l = self.far.traj.eval(r.ln())[1];
            self.scale * (l + self.log_shift).exp()
        } else {
            let m = self.params.decay_exponent();
            self.phi(self.far_radius()) * (self.far_radius() / r).powf(m)
        }
    }

    /// Signed Riccati variable `U(r)`.
    pub fn riccati(&self, r: f64) -> f64 {
        if r <= self.r_match {
            self.inner.riccati(r)
        } else if r <= self.far_radius() {
            self.far.traj.eval(r.ln())[0]
        } else {
            self.params.c_np()
        }
    }

    /// Normalized `phi_1'(r)`.
    pub fn dphi(&self, r: f64) -> f64 {
        if r <= self.r_match {
            self.scale * self.inner.dphi(r)
        } else {
            let p = self.params.p;
            -self.phi(r) * signed_pow(self.riccati(r), 1.0 / (p - 1.0)) / r
        }
    }

    /// `omega int K phi_1^p r^{N-1}` recomputed by quadrature on `[1, r_max]`
    /// plus the far-field tail beyond `r_max`.
    pub fn normalization(&self, r_max: f64) -> f64 {
        let p = self.params.p;
        let nf = self.params.nf();
        let w = &self.weight;
        let inner = composite_log(
            |r| w.effective(r) * self.phi(r).abs().powf(p) * r.powf(nf - 1.0),
            1.0,
            r_max,
            &w.effective_breakpoints(1.0, r_max),
            40,
            1e-12,
        );
        let tail = if r_max >= self.far_radius() {
            0.0
        } else {
            let j = self.far.traj.eval(r_max.ln())[2];
            j * (p * (self.log_shift + self.scale.ln())).exp()
        };
        self.params.omega() * inner + tail
    }

    /// Nodal restriction to `grid` (zero at `r = 1`).
    pub fn restrict(&self, grid: &Arc<RadialGrid>) -> RadialFunction {
        let mut f = RadialFunction::from_fn(grid.clone(), |r| self.phi(r));
        let mut v = f.clone().into_values();
        v[0] = 0.0;
        f = RadialFunction::new(grid.clone(), v).expect("finite eigenfunction values");
        f
    }

    /// Writes `r, phi, phi', U` at `samples` log-spaced radii in `[1, r_max]`.
    pub fn write_csv(&self, path: &Path, r_max: f64, samples: usize) -> Result<()> {
        let mut wtr = csv::Writer::from_path(path)?;
        wtr.write_record(["r", "phi", "dphi", "U"])?;
        let n = samples.max(2);
        for i in 0..n {
            let r = r_max.powf(i as f64 / (n - 1) as f64);
            wtr.write_record(&[
                format!("{r:.17e}"),
                format!("{:.17e}", self.phi(r)),
                format!("{:.17e}", self.dphi(r)),
                format!("{:.17e}", if i == 0 { f64::NAN } else { self.riccati(r) }),
            ])?;
        }
        wtr.flush()?;
        Ok(())
    }
}

/// Asymptotic constants `C` and `D` of the eigenfunction.
#[derive(Debug, Clone, Serialize)]
pub struct AsymptoticConstants {
    pub c: f64,
    pub d: f64,
    /// `D / C`, expected to equal `-(N-p)/(p-1)`.
    pub ratio: f64,
    pub expected_ratio: f64,
    /// Relative change of `r^{m} phi_1` between the two largest dyadic radii.
    pub c_change: f64,
    pub d_change: f64,
    /// Set when the dyadic estimates differ by more than 1%.
    pub warning: Option<String>,
}

fn aitken(x0: f64, x1: f64, x2: f64) -> f64 {
    let d1 = x1 - x0;
    let d2 = x2 - x1;
    let den = d2 - d1;
    if den.abs() <= 1e-14 * x2.abs() || d2.abs() >= d1.abs() {
        x2
    } else {
        x2 - d2 * d2 / den
    }
}

/// Extracts `C = lim r^{(N-p)/(p-1)} phi_1` and `D = lim r^{(N-1)/(p-1)} phi_1'`
/// from the dyadic radii `r_asym/4, r_asym/2, r_asym` with Aitken extrapolation.
pub fn asymptotic_constants(eig: &EigenPair) -> Result<AsymptoticConstants> {
    let params = &eig.params;
    params.require_subcritical()?;
    let m = params.decay_exponent();
    let k = (params.nf() - 1.0) / (params.p - 1.0);
    let r = eig.options.r_asym;
    let radii = [r / 4.0, r / 2.0, r];
    let cs: Vec<f64> = radii.iter().map(|&x| x.powf(m) * eig.phi(x)).collect();
    let ds: Vec<f64> = radii.iter().map(|&x| x.powf(k) * eig.dphi(x)).collect();
    let c = aitken(cs[0], cs[1], cs[2]);
    let d = aitken(ds[0], ds[1], ds[2]);
    let c_change = ((cs[2] - cs[1]) / cs[2]).abs();
    let d_change = ((ds[2] - ds[1]) / ds[2]).abs();
    let warning = (c_change > 0.01 || d_change > 0.01)
        .then(|| format!("asymptotic estimates not converged at r = {r}; increase r_asym"));
    Ok(AsymptoticConstants {
        c,
        d,
        ratio: d / c,
        expected_ratio: -m,
        c_change,
        d_change,
        warning,
    })
}

/// `U`, `a` and `A_{r_0}` sampled along the eigenfunction.
#[derive(Debug, Clone, Serialize)]
pub struct RiccatiTrace {
    pub r: Vec<f64>,
    pub u: Vec<f64>,
    pub a: Vec<f64>,
    pub big_a: Vec<f64>,
    pub c_np: f64,
    pub r0: f64,
    pub r_end: f64,
}

fn a_coefficient(eig: &EigenPair, r: f64) -> f64 {
    let p = eig.params.p;
    let m = eig.params.decay_exponent();
    (p - 1.0) / r * (m - signed_pow(eig.riccati(r), 1.0 / (p - 1.0)))
}

/// `int_a^b a(s) ds`, graded towards `r_0` where `a` is only Hoelder for `p > 2`.
fn integrate_a(eig: &EigenPair, a: f64, b: f64) -> f64 {
    let rule = gauss(10);
    if (a - eig.r0).abs() <= 1e-12 * eig.r0 {
        // r = a + (b - a) y^3 removes the endpoint singularity of the integrand.
        rule.integrate(0.0, 1.0, |y| {
            let r = a + (b - a) * y * y * y;
            a_coefficient(eig, r) * 3.0 * y * y * (b - a)
        })
    } else {
        rule.integrate(a, b, |r| a_coefficient(eig, r))
    }
}

/// Samples `U`, `a` and `A_{r_0}` at `samples` log-spaced radii in `[r_0, r_end]`.
pub fn riccati_trace(eig: &EigenPair, samples: usize, r_end: f64) -> Result<RiccatiTrace> {
    if samples < 3 {
        return Err(Error::invalid("a Riccati trace needs at least 3 samples"));
    }
    if !(r_end > eig.r0) {
        return Err(Error::invalid("r_end must exceed r0"));
    }
    let n = samples;
    let ratio = r_end / eig.r0;
    let r: Vec<f64> = (0..n)
        .map(|i| {
            if i == n - 1 {
                r_end
            } else {
                eig.r0 * ratio.powf(i as f64 / (n - 1) as f64)
            }
        })
        .collect();
    let mut u: Vec<f64> = r.iter().map(|&x| eig.riccati(x)).collect();
    u[0] = 0.0;
    let a: Vec<f64> = r.iter().map(|&x| a_coefficient(eig, x)).collect();
    let mut big_a = vec![0.0; n];
    for i in 1..n {
        big_a[i] = big_a[i - 1] + integrate_a(eig, r[i - 1], r[i]);
    }
    Ok(RiccatiTrace {
        r,
        u,
        a,
        big_a,
        c_np: eig.params.c_np(),
        r0: eig.r0,
        r_end,
    })
}

/// Residuals of the Riccati equation on the trace.
#[derive(Debug, Clone, Serialize)]
pub struct OdeResidual {
    pub max: f64,
    pub rms: f64,
    /// Largest residual over stencils without a breakpoint of `K`, on which
    /// the solution is `C^2` and the stencil is second-order accurate.
    pub max_smooth: f64,
    /// Residual of the equation at `r_0`, where `U'(r_0) = lambda r_0^{p-1} K(r_0)`.
    pub at_r0: f64,
}

/// Compares the central difference of `U` (in `ln r`) with the right-hand side
/// `(p-1)/r U (U^{1/(p-1)} - m) + lambda r^{p-1} K`, the `K`-term being averaged
/// exactly over each stencil.
pub fn verify_riccati_ode(trace: &RiccatiTrace, eig: &EigenPair) -> OdeResidual {
    let p = eig.params.p;
    let m = eig.params.decay_exponent();
    let w = &eig.weight;
    let lambda = eig.lambda1;
    let n = trace.r.len();
    let mut max: f64 = 0.0;
    let mut max_smooth: f64 = 0.0;
    let mut sum2 = 0.0;
    for i in 1..n - 1 {
        let (rl, rc, rr) = (trace.r[i - 1], trace.r[i], trace.r[i + 1]);
        let dt = rr.ln() - rl.ln();
        let du = (trace.u[i + 1] - trace.u[i - 1]) / dt;
        let uc = trace.u[i];
        let forcing =
            lambda * integrate_breaks(|s| s.powf(p - 1.0) * w.effective(s), rl, rr, w) / dt;
        let res = (du - (p - 1.0) * uc * (signed_pow(uc, 1.0 / (p - 1.0)) - m) - forcing) / rc;
        max = max.max(res.abs());
        if w.effective_breakpoints(rl, rr).is_empty() {
            max_smooth = max_smooth.max(res.abs());
        }
        sum2 += res * res;
    }
    // At r0: U(r0) = 0, so U'(r0) must equal lambda r0^{p-1} K(r0).
    let h = 1e-5 * eig.r0;
    let du0 = (eig.riccati(eig.r0 + h) - eig.riccati(eig.r0 - h)) / (2.0 * h);
    let at_r0 = du0 - lambda * eig.r0.powf(p - 1.0) * w.effective(eig.r0);
    OdeResidual {
        max,
        rms: (sum2 / (n - 2) as f64).sqrt(),
        max_smooth,
        at_r0,
    }
}

/// Gauss quadrature of `f` over `[a, b]` split at the breakpoints of `w`.
fn integrate_breaks(f: impl Fn(f64) -> f64, a: f64, b: f64, w: &RadialWeight) -> f64 {
    let rule = gauss(8);
    let mut cuts = vec![a];
    cuts.extend(w.effective_breakpoints(a, b));
    cuts.push(b);
    cuts.windows(2)
        .map(|c| rule.integrate(c[0], c[1], &f))
        .sum()
}

/// Maximum residual of
/// `U(r) - U(t) e^{-(A(r)-A(t))} = lambda int_t^r s^{p-1} K(s) e^{-(A(r)-A(s))} ds`
/// over the trace samples `r >= t`.
pub fn verify_integral_identity(trace: &RiccatiTrace, eig: &EigenPair, t: f64) -> Result<f64> {
    if t < eig.r0 * (1.0 - 1e-14) || t > trace.r_end {
        return Err(Error::invalid("t must lie in [r0, r_end]"));
    }
    let p = eig.params.p;
    let w = &eig.weight;
    let lambda = eig.lambda1;
    let n = trace.r.len();
    let start = trace.r.partition_point(|&x| x < t);
    // A at t by quadrature from the preceding sample.
    let a_t = if start == 0 {
        0.0
    } else {
        trace.big_a[start - 1] + integrate_a(eig, trace.r[start - 1], t)
    };
    let u_t = if t == eig.r0 { 0.0 } else { eig.riccati(t) };
    let rule = gauss(8);
    // Running value of int_t^{r_i} s^{p-1} K(s) e^{A(s)} ds.
    let mut acc = 0.0;
    let mut prev = t;
    let mut prev_a = a_t;
    let mut worst: f64 = 0.0;
    for i in start..n {
        let ri = trace.r[i];
        if ri > prev {
            let mut cuts = vec![prev];
            cuts.extend(w.effective_breakpoints(prev, ri));
            cuts.push(ri);
            let mut a_left = prev_a;
            for c in cuts.windows(2) {
                let (x0, x1) = (c[0], c[1]);
                acc += rule.integrate(x0, x1, |s| {
                    let a_s = a_left + integrate_a(eig, x0, s);
                    s.powf(p - 1.0) * w.effective(s) * a_s.exp()
                });
                a_left += integrate_a(eig, x0, x1);
            }
        }
        let a_r = trace.big_a[i];
        let lhs = trace.u[i] - u_t * (-(a_r - a_t)).exp();
        let rhs = lambda * acc * (-a_r).exp();
        worst = worst.max((lhs - rhs).abs());
        prev = ri;
        prev_a = a_r;
    }
    Ok(worst)
}

/// Result of the logarithmic identity check.
#[derive(Debug, Clone, Serialize)]
pub struct LogIdentity {
    pub max_residual: f64,
    /// `A_{r_0}(r_end)`.
    pub a_end: f64,
}

/// Checks `A_t(r) = (p-1) log(r^m phi_1(r) / (t^m phi_1(t)))` for `t` in
/// a set of trace samples and every later sample `r`.
pub fn verify_log_identity(trace: &RiccatiTrace, eig: &EigenPair) -> LogIdentity {
    let p = eig.params.p;
    let m = eig.params.decay_exponent();
    let n = trace.r.len();
    let g: Vec<f64> = trace
        .r
        .iter()
        .map(|&r| m * r.ln() + eig.phi(r).ln())
        .collect();
    let mut worst: f64 = 0.0;
    let stride = (n / 10).max(1);
    for j in (0..n).step_by(stride) {
        for i in j..n {
            let lhs = trace.big_a[i] - trace.big_a[j];
            let rhs = (p - 1.0) * (g[i] - g[j]);
            worst = worst.max((lhs - rhs).abs());
        }
    }
    LogIdentity {
        max_residual: worst,
        a_end: trace.big_a[n - 1],
    }
}

/// Summary of the identity checks reported alongside an eigenpair.
#[derive(Debug, Clone, Serialize)]
pub struct IdentityResiduals {
    pub samples: usize,
    pub u_at_r0: f64,
    pub u_min: f64,
    pub u_max: f64,
    pub c_np: f64,
    pub ode: OdeResidual,
    pub integral: f64,
    pub log: LogIdentity,
}

/// Runs the trace-based checks with `samples` points on `[r_0, r_end]`.
pub fn identity_residuals(
    eig: &EigenPair,
    samples: usize,
    r_end: f64,
) -> Result<IdentityResiduals> {
    let trace = riccati_trace(eig, samples, r_end)?;
    let u_min = trace.u.iter().copied().fold(f64::INFINITY, f64::min);
    let u_max = trace.u.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(IdentityResiduals {
        samples,
        u_at_r0: eig.riccati(eig.r0),
        u_min,
        u_max,
        c_np: trace.c_np,
        ode: verify_riccati_ode(&trace, eig),
        integral: verify_integral_identity(&trace, eig, eig.r0)?,
        log: verify_log_identity(&trace, eig),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn oracle() -> (RadialWeight, Params) {
        (RadialWeight::LinearR4, Params::new(2.0, 3).unwrap())
    }

    #[test]
    fn zero_lambda_is_explicit() {
        let (w, params) = oracle();
        let tr = integrate_radial(0.0, &w, &params, 50.0).unwrap();
        for r in [1.5, 3.0, 10.0, 50.0] {
            // phi = int_1^r s^{-2} ds = 1 - 1/r
            assert!((tr.phi(r) - (1.0 - 1.0 / r)).abs() < 1e-9);
            assert!((tr.state(r)[1] - 1.0).abs() < 1e-15);
        }
        assert_eq!(classify_trajectory(&tr), Classification::Subcritical);
    }

    #[test]
    fn closed_form_trajectory_shape() {
        let (w, params) = oracle();
        let tr = integrate_radial(PI * PI, &w, &params, 100.0).unwrap();
        let ratio = tr.phi(2.0) / tr.phi(4.0);
        assert!((ratio - 2f64.sqrt()).abs() < 1e-8);
        assert!(matches!(classify_trajectory(&tr), Classification::Decaying));
        let big = integrate_radial(10.0 * PI * PI, &w, &params, 100.0).unwrap();
        assert!(matches!(
            classify_trajectory(&big),
            Classification::Crossing { .. }
        ));
        assert!(integrate_radial(-1.0, &w, &params, 10.0).is_err());
    }

    #[test]
    fn closed_form_eigenpair() {
        let (w, params) = oracle();
        let eig = find_lambda1(&w, &params, &ShootingOptions::default()).unwrap();
        assert!(
            (eig.lambda1 - PI * PI).abs() < 1e-9 * PI * PI,
            "{}",
            eig.lambda1
        );
        assert!((eig.r0 - 2.0).abs() < 1e-8);
        let c = (2.0 / params.omega()).sqrt();
        for r in [1.0, 1.3, 2.0, 5.0, 20.0, 150.0, 1e4] {
            assert!((eig.phi(r) - c * (PI / r).sin()).abs() < 1e-8, "r = {r}");
        }
        assert!((eig.normalization(1e3) - 1.0).abs() < 1e-9);
        assert!((eig.c_asym - c * PI).abs() < 1e-8);
        assert!((eig.d_asym / eig.c_asym + 1.0).abs() < 1e-6);
    }

    #[test]
    fn closed_form_riccati_identities() {
        let (w, params) = oracle();
        let eig = find_lambda1(&w, &params, &ShootingOptions::default()).unwrap();
        let res = identity_residuals(&eig, 10_000, 100.0).unwrap();
        assert!(res.u_at_r0.abs() < 1e-8);
        assert!(res.u_min >= 0.0 && res.u_max <= 1.0 + 1e-8);
        assert!(res.ode.max < 1e-6, "{:?}", res.ode);
        assert!(res.ode.at_r0.abs() < 1e-4);
        assert!(res.integral < 1e-8, "{}", res.integral);
        assert!(res.log.max_residual < 1e-9);
        // A_{r0}(r) = log(r sin(pi/r) / 2) for the closed form.
        let exact = (100.0 * (PI / 100.0).sin() / 2.0).ln();
        assert!((res.log.a_end - exact).abs() < 1e-9);
    }

    #[test]
    fn aitken_handles_flat_sequences() {
        assert_eq!(aitken(1.0, 1.0, 1.0), 1.0);
        let e = aitken(1.0 + 1.0 / 16.0, 1.0 + 1.0 / 64.0, 1.0 + 1.0 / 256.0);
        assert!((e - 1.0).abs() < 1e-14);
    }
}
