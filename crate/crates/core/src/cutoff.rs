//! Compactly supported C^1 approximations of `phi_1` that are constant near
//! the critical sphere `r = r0`, built in three cut-off steps.
//!
//! Step 1 cuts `phi_1` to zero on `[n1, 2 n1]`, Step 2 cuts it to zero on
//! `[1, 1 + 1/n2]`, and Step 3 flattens it on `[r0 - delta/n3, r0 + delta/n3]`.
//! Every stage is an analytic function of `r` over the continuous
//! eigenfunction, so norms of differences are computed by adaptive
//! quadrature rather than on a grid.

use std::sync::Arc;

use serde::Serialize;

use crate::eigensolver::{asymptotic_constants, EigenPair};
use crate::error::{Error, Result};
use crate::numerics::quadrature::composite_log;
use crate::radial::{RadialFunction, RadialGrid};

/// Panels per decade of the difference-norm quadrature.
const PANELS_PER_DECADE: usize = 24;

/// Relative tolerance of the difference-norm quadrature.
const QUAD_RTOL: f64 = 1e-10;

/// Parameters of the three cut-offs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CutoffSpec {
    /// Step 1: support ends at `2 n1`.
    pub n1: u64,
    /// Step 2: zero on `[1, 1 + 1/n2]`.
    pub n2: u64,
    /// Step 3: plateau `[r0 - delta/n3, r0 + delta/n3]`.
    pub n3: u64,
    pub delta: f64,
}

/// Cubic Hermite interpolant on `[x0, x1]` and its derivative at `x`.
fn hermite(x: f64, x0: f64, x1: f64, y0: f64, d0: f64, y1: f64, d1: f64) -> (f64, f64) {
    let h = x1 - x0;
    let s = (x - x0) / h;
    let (s2, s3) = (s * s, s * s * s);
    let v = (2.0 * s3 - 3.0 * s2 + 1.0) * y0
        + (s3 - 2.0 * s2 + s) * h * d0
        + (-2.0 * s3 + 3.0 * s2) * y1
        + (s3 - s2) * h * d1;
    let dv = ((6.0 * s2 - 6.0 * s) * y0
        + (3.0 * s2 - 4.0 * s + 1.0) * h * d0
        + (-6.0 * s2 + 6.0 * s) * y1
        + (3.0 * s2 - 2.0 * s) * h * d1)
        / h;
    (v, dv)
}

/// Quintic step from 1 at `s = 0` to 0 at `s = 1` with vanishing first and
/// second derivatives at both ends, and its derivative in `s`.
fn quintic_down(s: f64) -> (f64, f64) {
    let s = s.clamp(0.0, 1.0);
    let up = s * s * s * (10.0 - 15.0 * s + 6.0 * s * s);
    let dup = 30.0 * s * s * (1.0 - s) * (1.0 - s);
    (1.0 - up, -dup)
}

#[derive(Debug, Clone, Copy)]
enum Step {
    /// `phi_1(n) q((r - n)/n) alpha(r)` on `[n, 2n]`, zero beyond.
    Infinity { n: f64, phi_n: f64, rate: f64 },
    /// Zero on `[1, a]`, Hermite bridge on `[a, b]` to the previous stage.
    Boundary { a: f64, b: f64, yb: f64, db: f64 },
    /// Hermite flanks on `[a, b]` and `[c, d]` around the constant `level` on `[b, c]`.
    Plateau {
        a: f64,
        b: f64,
        c: f64,
        d: f64,
        ya: f64,
        da: f64,
        yd: f64,
        dd: f64,
        level: f64,
    },
}

impl Step {
    /// Whether `r` lies in the modified region; `right` selects the
    /// one-sided limit used at the region ends.
    fn covers(&self, r: f64, right: bool) -> bool {
        let inside = |lo: f64, hi: f64| {
            if right {
                lo <= r && r < hi
            } else {
                lo < r && r <= hi
            }
        };
        match *self {
            Step::Infinity { n, .. } => inside(n, f64::INFINITY),
            Step::Boundary { b, .. } => inside(f64::NEG_INFINITY, b),
            Step::Plateau { a, d, .. } => inside(a, d),
        }
    }

    fn eval(&self, r: f64, right: bool) -> (f64, f64) {
        match *self {
            Step::Infinity { n, phi_n, rate } => {
                if r >= 2.0 * n {
                    return (0.0, 0.0);
                }
                let (q, dq) = quintic_down((r - n) / n);
                let alpha = rate * (r - n) + 1.0;
                (phi_n * q * alpha, phi_n * (dq / n * alpha + q * rate))
            }
            Step::Boundary { a, b, yb, db } => {
                if r < a || (!right && r == a) {
                    (0.0, 0.0)
                } else {
                    hermite(r, a, b, 0.0, 0.0, yb, db)
                }
            }
            Step::Plateau {
                a,
                b,
                c,
                d,
                ya,
                da,
                yd,
                dd,
                level,
            } => {
                let flat = if right {
                    b <= r && r < c
                } else {
                    b < r && r <= c
                };
                if flat {
                    (level, 0.0)
                } else if r < b || (!right && r == b) {
                    hermite(r, a, b, ya, da, level, 0.0)
                } else {
                    hermite(r, c, d, level, 0.0, yd, dd)
                }
            }
        }
    }

    fn junctions(&self) -> Vec<f64> {
        match *self {
            Step::Infinity { n, .. } => vec![n, 2.0 * n],
            Step::Boundary { a, b, .. } => vec![a, b],
            Step::Plateau { a, b, c, d, .. } => vec![a, b, c, d],
        }
    }
}

/// `phi_1` after a sequence of cut-off steps.
#[derive(Debug, Clone)]
pub struct CutoffFunction<'a> {
    eig: &'a EigenPair,
    steps: Vec<Step>,
}

impl<'a> CutoffFunction<'a> {
    /// The eigenfunction itself, before any cut-off.
    pub fn identity(eig: &'a EigenPair) -> Self {
        CutoffFunction {
            eig,
            steps: Vec::new(),
        }
    }

    pub fn eig(&self) -> &'a EigenPair {
        self.eig
    }

    fn eval_stage(&self, stage: usize, r: f64, right: bool) -> (f64, f64) {
        match self.steps[..stage].iter().rposition(|s| s.covers(r, right)) {
            Some(k) => self.steps[k].eval(r, right),
            None => (self.eig.phi(r), self.eig.dphi(r)),
        }
    }

    /// Value and derivative at `r` (right-sided at junctions).
    pub fn eval(&self, r: f64) -> (f64, f64) {
        self.eval_stage(self.steps.len(), r, true)
    }

    pub fn value(&self, r: f64) -> f64 {
        self.eval(r).0
    }

    pub fn derivative(&self, r: f64) -> f64 {
        self.eval(r).1
    }

    fn with_step(&self, step: Step) -> Self {
        let mut steps = self.steps.clone();
        steps.push(step);
        CutoffFunction {
            eig: self.eig,
            steps,
        }
    }

    /// Radius beyond which the function vanishes, if a Step 1 cut-off was applied.
    pub fn support_end(&self) -> Option<f64> {
        self.steps.iter().find_map(|s| match *s {
            Step::Infinity { n, .. } => Some(2.0 * n),
            _ => None,
        })
    }

    /// Radius up to which the function vanishes, if a Step 2 cut-off was applied.
    pub fn support_start(&self) -> Option<f64> {
        self.steps.iter().find_map(|s| match *s {
            Step::Boundary { a, .. } => Some(a),
            _ => None,
        })
    }

    /// Plateau interval and value, if a Step 3 cut-off was applied.
    pub fn plateau(&self) -> Option<(f64, f64, f64)> {
        self.steps.iter().find_map(|s| match *s {
            Step::Plateau { b, c, level, .. } => Some((b, c, level)),
            _ => None,
        })
    }

    /// Junction radii of all steps, sorted.
    pub fn junctions(&self) -> Vec<f64> {
        let mut j: Vec<f64> = self.steps.iter().flat_map(Step::junctions).collect();
        j.sort_by(f64::total_cmp);
        j
    }

    /// Largest jump of value and of derivative across the junctions.
    pub fn junction_jumps(&self) -> (f64, f64) {
        let stage = self.steps.len();
        self.junctions()
            .into_iter()
            .fold((0.0f64, 0.0f64), |(jv, jd), r| {
                let (vl, dl) = self.eval_stage(stage, r, false);
                let (vr, dr) = self.eval_stage(stage, r, true);
                (jv.max((vl - vr).abs()), jd.max((dl - dr).abs()))
            })
    }

    /// Largest `|w'|` sampled on the Step 3 flanks.
    pub fn flank_slope(&self) -> Option<f64> {
        self.steps.iter().find_map(|s| match *s {
            Step::Plateau { a, b, c, d, .. } => {
                let sup = |lo: f64, hi: f64| {
                    (0..=64)
                        .map(|i| s.eval(lo + (hi - lo) * i as f64 / 64.0, true).1.abs())
                        .fold(0.0f64, f64::max)
                };
                Some(sup(a, b).max(sup(c, d)))
            }
            _ => None,
        })
    }

    /// Structural membership in `Y`: compact support in `(1, inf)` and a
    /// plateau around `r0`.
    pub fn is_in_y(&self) -> bool {
        let r0 = self.eig.r0;
        let support = self.support_start().is_some() && self.support_end().is_some();
        support && self.plateau().is_some_and(|(b, c, _)| b < r0 && r0 < c)
    }

    /// Nodal values on `grid`; the value at `r = 1` is set to zero.
    pub fn restrict(&self, grid: &Arc<RadialGrid>) -> RadialFunction {
        let mut v: Vec<f64> = grid.nodes().iter().map(|&r| self.value(r)).collect();
        v[0] = 0.0;
        RadialFunction::new(grid.clone(), v).expect("finite cut-off values")
    }

    /// Writes `r, w, w'` at `samples` log-spaced radii up to the support end.
    pub fn write_csv(&self, path: &std::path::Path, samples: usize) -> Result<()> {
        let end = self.support_end().unwrap_or(1e3);
        let mut wtr = csv::Writer::from_path(path)?;
        wtr.write_record(["r", "w", "dw"])?;
        for i in 0..samples {
            let r = end.powf(i as f64 / (samples - 1).max(1) as f64);
            let (v, d) = self.eval(r);
            wtr.write_record(&[r.to_string(), v.to_string(), d.to_string()])?;
        }
        wtr.flush()?;
        Ok(())
    }
}

/// `omega int_x^inf |phi_1'|^p r^{N-1} dr`, closed form beyond the far radius
/// where `phi_1` is an exact power law.
pub fn tail_energy(eig: &EigenPair, x: f64) -> f64 {
    let params = &eig.params;
    let (p, nf, m) = (params.p, params.nf(), params.decay_exponent());
    let far = eig.far_radius();
    let amp = eig.phi(far) * far.powf(m);
    let closed = |x: f64| (m * amp).abs().powf(p) * x.powf(-m) / m;
    let tail = if x >= far {
        closed(x)
    } else {
        composite_log(
            |r| eig.dphi(r).abs().powf(p) * r.powf(nf - 1.0),
            x,
            far,
            &[],
            PANELS_PER_DECADE,
            QUAD_RTOL,
        ) + closed(far)
    };
    params.omega() * tail
}

/// `omega int_lo^hi |f' - g'|^p r^{N-1} dr` with the radii in `breaks` as panel ends.
fn gradient_gap_pow(
    f: &CutoffFunction,
    g: &CutoffFunction,
    lo: f64,
    hi: f64,
    breaks: &[f64],
) -> f64 {
    let params = &f.eig.params;
    let (p, nf) = (params.p, params.nf());
    params.omega()
        * composite_log(
            |r| (f.derivative(r) - g.derivative(r)).abs().powf(p) * r.powf(nf - 1.0),
            lo,
            hi,
            breaks,
            PANELS_PER_DECADE,
            QUAD_RTOL,
        )
}

/// Norm `||f - g||` of the difference, with `f` and `g` sharing an eigenpair.
///
/// Beyond the support of both functions the difference vanishes; beyond the
/// support of only one of them the tail of `phi_1` is added in closed form.
pub fn distance(f: &CutoffFunction, g: &CutoffFunction) -> f64 {
    let p = f.eig.params.p;
    let mut breaks: Vec<f64> = f.junctions();
    breaks.extend(g.junctions());
    breaks.push(f.eig.r0);
    let (ef, eg) = (f.support_end(), g.support_end());
    let total = match (ef, eg) {
        (Some(a), Some(b)) => gradient_gap_pow(f, g, 1.0, a.max(b), &breaks),
        (Some(a), None) | (None, Some(a)) => {
            gradient_gap_pow(f, g, 1.0, a, &breaks) + tail_energy(f.eig, a)
        }
        (None, None) => {
            let far = f.eig.far_radius();
            gradient_gap_pow(f, g, 1.0, far, &breaks)
        }
    };
    total.max(0.0).powf(1.0 / p)
}

/// `||phi_1||` with the tail beyond the far radius in closed form.
pub fn phi_norm(eig: &EigenPair) -> f64 {
    let params = &eig.params;
    let (p, nf) = (params.p, params.nf());
    let inner = composite_log(
        |r| eig.dphi(r).abs().powf(p) * r.powf(nf - 1.0),
        1.0,
        4.0 * eig.r0,
        &[eig.r0],
        PANELS_PER_DECADE,
        QUAD_RTOL,
    );
    (params.omega() * inner + tail_energy(eig, 4.0 * eig.r0)).powf(1.0 / p)
}

/// Radius `r1 > r0` from which on `|r^m phi_1 / C - 1| < 0.1` at every
/// sampled radius up to the asymptotic radius.
pub fn asymptotic_radius(eig: &EigenPair) -> Result<f64> {
    let c = asymptotic_constants(eig)?.c;
    let m = eig.params.decay_exponent();
    let (lo, hi) = (eig.r0, eig.options.r_asym);
    let samples = 400;
    let radii: Vec<f64> = (0..=samples)
        .map(|i| lo * (hi / lo).powf(i as f64 / samples as f64))
        .collect();
    let ok = |r: f64| (r.powf(m) * eig.phi(r) / c - 1.0).abs() < 0.1;
    match radii.iter().rposition(|&r| !ok(r)) {
        None => Ok(lo),
        Some(i) if i + 1 < radii.len() => Ok(radii[i + 1]),
        Some(_) => Err(Error::invalid(format!(
            "phi_1 is not in its asymptotic regime by r = {hi}; increase r_asym"
        ))),
    }
}

/// Step 1: `phi_1` on `[1, n1]`, blended to zero on `[n1, 2 n1]`.
pub fn cutoff_infinity(eig: &EigenPair, n1: u64) -> Result<CutoffFunction<'_>> {
    let r1 = asymptotic_radius(eig)?;
    let n = n1 as f64;
    if !(n > r1) {
        return Err(Error::invalid(format!(
            "n1 = {n1} must exceed the asymptotic radius r1 = {r1:.4}"
        )));
    }
    let phi_n = eig.phi(n);
    let step = Step::Infinity {
        n,
        phi_n,
        rate: eig.dphi(n) / phi_n,
    };
    Ok(CutoffFunction::identity(eig).with_step(step))
}

/// Largest plateau half-width `delta` with `1 < r0 - 2 delta` and
/// `r0 + 2 delta < n1`, halved.
pub fn default_delta(eig: &EigenPair, n1: u64) -> f64 {
    let r0 = eig.r0;
    0.5 * ((r0 - 1.0) / 2.0).min((n1 as f64 - r0) / 2.0)
}

fn check_delta(u: &CutoffFunction, delta: f64) -> Result<()> {
    let r0 = u.eig.r0;
    let end = u.support_end().unwrap_or(f64::INFINITY);
    if !(delta > 0.0 && 1.0 < r0 - 2.0 * delta && r0 + 2.0 * delta < end / 2.0) {
        return Err(Error::invalid(format!(
            "delta = {delta} must satisfy 1 < r0 - 2 delta and r0 + 2 delta < n1 (r0 = {r0:.4})"
        )));
    }
    Ok(())
}

/// Step 2: zero on `[1, 1 + 1/n2]`, Hermite bridge on `[1 + 1/n2, 1 + 2/n2]`.
pub fn cutoff_boundary<'a>(
    u: &CutoffFunction<'a>,
    n2: u64,
    delta: f64,
) -> Result<CutoffFunction<'a>> {
    check_delta(u, delta)?;
    let r0 = u.eig.r0;
    let n = n2 as f64;
    let (a, b) = (1.0 + 1.0 / n, 1.0 + 2.0 / n);
    if !(n2 > 0 && b < r0 - 2.0 * delta) {
        return Err(Error::invalid(format!(
            "the Step 2 interval [1, {b:.4}] collides with the Step 3 region starting at {:.4}",
            r0 - 2.0 * delta
        )));
    }
    let (yb, db) = u.eval(b);
    Ok(u.with_step(Step::Boundary { a, b, yb, db }))
}

/// Step 3: constant `v(r0 - delta/n3)` on `[r0 - delta/n3, r0 + delta/n3]`
/// with Hermite flanks reaching `v` at `r0 -+ 2 delta/n3`.
pub fn cutoff_plateau<'a>(
    v: &CutoffFunction<'a>,
    n3: u64,
    delta: f64,
) -> Result<CutoffFunction<'a>> {
    check_delta(v, delta)?;
    if n3 == 0 {
        return Err(Error::invalid("n3 must be positive"));
    }
    let r0 = v.eig.r0;
    let w = delta / n3 as f64;
    let (a, b, c, d) = (r0 - 2.0 * w, r0 - w, r0 + w, r0 + 2.0 * w);
    if let Some(s) = v.steps.iter().find_map(|s| match *s {
        Step::Boundary { b, .. } => Some(b),
        _ => None,
    }) {
        if !(s < a) {
            return Err(Error::invalid(
                "the plateau region overlaps the Step 2 bridge",
            ));
        }
    }
    let (ya, da) = v.eval(a);
    let (yd, dd) = v.eval(d);
    let level = v.value(b);
    Ok(v.with_step(Step::Plateau {
        a,
        b,
        c,
        d,
        ya,
        da,
        yd,
        dd,
        level,
    }))
}

/// All three steps for `spec`.
pub fn build_cutoff<'a>(eig: &'a EigenPair, spec: &CutoffSpec) -> Result<CutoffFunction<'a>> {
    let u = cutoff_infinity(eig, spec.n1)?;
    let v = cutoff_boundary(&u, spec.n2, spec.delta)?;
    cutoff_plateau(&v, spec.n3, spec.delta)
}

/// Bounds `C2 <= phi_1(r)/(r - 1) <= C3` sampled on `[lo, hi]`.
pub fn linear_bounds(eig: &EigenPair, lo: f64, hi: f64) -> (f64, f64) {
    (0..=200)
        .map(|i| {
            let r = lo + (hi - lo) * i as f64 / 200.0;
            eig.phi(r) / (r - 1.0)
        })
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), q| {
            (a.min(q), b.max(q))
        })
}

/// Outcome of [`approximate_in_y`].
#[derive(Debug, Clone, Serialize)]
pub struct YApproximation {
    pub spec: CutoffSpec,
    pub epsilon: f64,
    /// `||w - phi_1||`.
    pub achieved: f64,
    /// `||u - phi_1||`, `||v - u||` and `||w - v||`.
    pub step_increments: [f64; 3],
    /// Doublings used by each step past its predicted starting level.
    pub doublings: [u32; 3],
    pub r1: f64,
    pub phi_norm: f64,
    /// Largest value and derivative jumps at the junctions.
    pub junction_jumps: (f64, f64),
    pub flank_slope: f64,
}

/// Doubling budget of each step.
pub const MAX_DOUBLINGS: u32 = 12;

/// Doubles `n` from a starting level until `increment(n) < budget`.
///
/// The starting level is the smallest admissible `n_min` advanced by the
/// number of doublings that the decay rate measured between `n_min` and
/// `2 n_min` predicts, less one; the doubling count is taken from there.
fn dyadic_search(
    what: &str,
    n_min: u64,
    budget: f64,
    mut increment: impl FnMut(u64) -> Result<f64>,
) -> Result<(u64, u32)> {
    let i0 = increment(n_min)?;
    if i0 < budget {
        return Ok((n_min, 0));
    }
    let i1 = increment(2 * n_min)?;
    let rate = (i0 / i1).log2();
    let mut n = n_min;
    if rate > 0.0 {
        let predicted = ((i0 / budget).log2() / rate).floor() as i64 - 1;
        n <<= predicted.clamp(0, 40) as u32;
    }
    for doublings in 0..=MAX_DOUBLINGS {
        let inc = increment(n)?;
        if inc < budget {
            return Ok((n, doublings));
        }
        if doublings == MAX_DOUBLINGS {
            return Err(Error::no_convergence(
                format!("{what} cut-off within the epsilon / 3 budget"),
                MAX_DOUBLINGS as usize,
                inc,
            ));
        }
        n *= 2;
    }
    unreachable!("the loop returns at the last doubling")
}

/// Chooses `(n1, n2, n3)` by doubling each until its increment is below
/// `epsilon / 3`, so that `||w - phi_1|| < epsilon` by the triangle inequality.
pub fn approximate_in_y(
    eig: &EigenPair,
    epsilon: f64,
) -> Result<(CutoffFunction<'_>, YApproximation)> {
    if !(epsilon > 0.0) {
        return Err(Error::invalid("epsilon must be positive"));
    }
    let budget = epsilon / 3.0;
    let phi = CutoffFunction::identity(eig);
    let r1 = asymptotic_radius(eig)?;
    let r0 = eig.r0;
    // Step 1 starts at the first power of two beyond r1 that leaves room for
    // a plateau around r0.
    let n1_min = (r1.max(r0 + 1.0).floor() as u64 + 1).next_power_of_two();
    let (n1, d1) = dyadic_search("Step 1", n1_min, budget, |n| {
        Ok(distance(&cutoff_infinity(eig, n)?, &phi))
    })?;
    let u = cutoff_infinity(eig, n1)?;
    let delta = default_delta(eig, n1);
    let n2_min = ((2.0 / (r0 - 2.0 * delta - 1.0)).floor() as u64 + 1).next_power_of_two();
    let (n2, d2) = dyadic_search("Step 2", n2_min, budget, |n| {
        Ok(distance(&cutoff_boundary(&u, n, delta)?, &u))
    })?;
    let v = cutoff_boundary(&u, n2, delta)?;
    let (n3, d3) = dyadic_search("Step 3", 1, budget, |n| {
        Ok(distance(&cutoff_plateau(&v, n, delta)?, &v))
    })?;
    let w = cutoff_plateau(&v, n3, delta)?;
    let doublings = [d1, d2, d3];
    let report = YApproximation {
        spec: CutoffSpec { n1, n2, n3, delta },
        epsilon,
        achieved: distance(&w, &phi),
        step_increments: [distance(&u, &phi), distance(&v, &u), distance(&w, &v)],
        doublings,
        r1,
        phi_norm: phi_norm(eig),
        junction_jumps: w.junction_jumps(),
        flank_slope: w.flank_slope().unwrap_or(0.0),
    };
    Ok((w, report))
}

/// Decay of the Step 1 increment over dyadic `n1`.
#[derive(Debug, Clone, Serialize)]
pub struct StepOneRate {
    pub n1: Vec<u64>,
    pub increments: Vec<f64>,
    /// Least-squares slope of `ln(increment^p)` against `ln n1`.
    pub slope: f64,
    /// `-(N-p)/(p-1)`.
    pub expected: f64,
}

impl StepOneRate {
    /// `|slope / expected - 1|`.
    pub fn relative_deviation(&self) -> f64 {
        (self.slope / self.expected - 1.0).abs()
    }
}

/// Step 1 increments for `levels` doublings of `n1` starting at `n1_start`.
pub fn step_one_rate(eig: &EigenPair, n1_start: u64, levels: usize) -> Result<StepOneRate> {
    if levels < 2 {
        return Err(Error::invalid("the rate needs at least two levels"));
    }
    let p = eig.params.p;
    let phi = CutoffFunction::identity(eig);
    let n1: Vec<u64> = (0..levels).map(|k| n1_start << k).collect();
    let increments = n1
        .iter()
        .map(|&n| Ok(distance(&cutoff_infinity(eig, n)?, &phi)))
        .collect::<Result<Vec<f64>>>()?;
    let xs: Vec<f64> = n1.iter().map(|&n| (n as f64).ln()).collect();
    let ys: Vec<f64> = increments.iter().map(|d| p * d.ln()).collect();
    let k = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / k, ys.iter().sum::<f64>() / k);
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    Ok(StepOneRate {
        n1,
        increments,
        slope: sxy / sxx,
        expected: -eig.params.decay_exponent(),
    })
}

/// Nodal `C^1` bump: zero outside `[a, d]`, one on `[b, c]`, cubic Hermite
/// flanks in between. With `b < r0 < c` it lies in `Y`.
pub fn plateau_bump(
    grid: &Arc<RadialGrid>,
    a: f64,
    b: f64,
    c: f64,
    d: f64,
) -> Result<RadialFunction> {
    if !(1.0 < a && a < b && b < c && c < d && d < grid.r_max()) {
        return Err(Error::invalid(
            "plateau bump needs 1 < a < b < c < d < R_max",
        ));
    }
    let f = |r: f64| {
        if r <= a || r >= d {
            0.0
        } else if r < b {
            hermite(r, a, b, 0.0, 0.0, 1.0, 0.0).0
        } else if r <= c {
            1.0
        } else {
            hermite(r, c, d, 1.0, 0.0, 0.0, 0.0).0
        }
    };
    RadialFunction::new(grid.clone(), grid.nodes().iter().map(|&r| f(r)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eigensolver::{find_lambda1, ShootingOptions};
    use crate::params::Params;
    use crate::radial::{build_grid, Grading};
    use crate::weights::RadialWeight;
    use std::f64::consts::PI;

    fn oracle() -> EigenPair {
        let params = Params::new(2.0, 3).unwrap();
        find_lambda1(
            &RadialWeight::LinearR4,
            &params,
            &ShootingOptions::default(),
        )
        .unwrap()
    }

    #[test]
    fn hermite_matches_endpoint_data() {
        let (v0, d0) = hermite(1.0, 1.0, 3.0, 0.5, -2.0, 4.0, 7.0);
        let (v1, d1) = hermite(3.0, 1.0, 3.0, 0.5, -2.0, 4.0, 7.0);
        assert!((v0 - 0.5).abs() < 1e-15 && (d0 + 2.0).abs() < 1e-14);
        assert!((v1 - 4.0).abs() < 1e-15 && (d1 - 7.0).abs() < 1e-14);
        let (q0, dq0) = quintic_down(0.0);
        let (q1, dq1) = quintic_down(1.0);
        assert_eq!((q0, dq0, q1, dq1), (1.0, 0.0, 0.0, 0.0));
    }

    #[test]
    fn phi_norm_matches_closed_form() {
        // ||sin(pi/r)||^2 = 4 pi (pi^2 / 2) before normalization.
        let eig = oracle();
        let s = eig.phi(3.0) / (PI / 3.0).sin();
        let expected = (4.0 * PI * PI * PI / 2.0).sqrt() * s.abs();
        let got = phi_norm(&eig);
        assert!(
            (got - expected).abs() < 1e-6 * expected,
            "{got} vs {expected}"
        );
    }

    #[test]
    fn step_one_is_exact_below_n1_and_c1() {
        let eig = oracle();
        let u = cutoff_infinity(&eig, 16).unwrap();
        for r in [1.0, 1.5, 2.0, 7.0, 15.9] {
            assert_eq!(u.value(r), eig.phi(r));
        }
        assert_eq!(u.value(32.0), 0.0);
        assert_eq!(u.value(100.0), 0.0);
        let (jv, jd) = u.junction_jumps();
        assert!(jv < 1e-10 && jd < 1e-10, "{jv} {jd}");
        // The increment stays within the tail bound of the construction.
        let phi = CutoffFunction::identity(&eig);
        let inc_p = distance(&u, &phi).powi(2);
        let tail = tail_energy(&eig, 16.0);
        assert!(inc_p > tail && inc_p < 8.0 * tail, "{inc_p} vs tail {tail}");
    }

    #[test]
    fn full_construction_lies_in_y() {
        let eig = oracle();
        let delta = default_delta(&eig, 16);
        let spec = CutoffSpec {
            n1: 16,
            n2: 8,
            n3: 2,
            delta,
        };
        let w = build_cutoff(&eig, &spec).unwrap();
        assert!(w.is_in_y());
        assert_eq!(w.junctions().len(), 8);
        let (jv, jd) = w.junction_jumps();
        assert!(jv < 1e-10 && jd < 1e-10, "{jv} {jd}");
        let (b, c, level) = w.plateau().unwrap();
        assert_eq!(w.value(0.5 * (b + c)), level);
        assert_eq!(w.value(1.0 + 1.0 / 16.0), 0.0);
        let x = 1.0 + 2.0 / 8.0 + 0.1;
        assert_eq!(w.value(x), eig.phi(x));
        // Colliding intervals are rejected.
        assert!(cutoff_boundary(&cutoff_infinity(&eig, 16).unwrap(), 1, delta).is_err());
        assert!(cutoff_infinity(&eig, 2).is_err());
    }

    #[test]
    fn later_steps_vanish_under_refinement() {
        let eig = oracle();
        let u = cutoff_infinity(&eig, 16).unwrap();
        let delta = default_delta(&eig, 16);
        let incs: Vec<f64> = [8, 16, 32, 64]
            .iter()
            .map(|&n2| distance(&cutoff_boundary(&u, n2, delta).unwrap(), &u))
            .collect();
        assert!(incs.windows(2).all(|w| w[1] < w[0]), "{incs:?}");
        let v = cutoff_boundary(&u, 8, delta).unwrap();
        let incs: Vec<f64> = [1, 2, 4, 8]
            .iter()
            .map(|&n3| distance(&cutoff_plateau(&v, n3, delta).unwrap(), &v))
            .collect();
        assert!(incs.windows(2).all(|w| w[1] < w[0]), "{incs:?}");
        let (c2, c3) = linear_bounds(&eig, 1.0 + 1.0 / 8.0, eig.r0 - 2.0 * delta);
        assert!(c2 > 0.0 && c3 >= c2);
    }

    #[test]
    fn approximation_meets_budget() {
        let eig = oracle();
        let norm = phi_norm(&eig);
        let (w, rep) = approximate_in_y(&eig, 0.1 * norm).unwrap();
        assert!(w.is_in_y());
        assert!(rep.achieved < rep.epsilon, "{rep:?}");
        assert!(rep.achieved <= rep.step_increments.iter().sum::<f64>() * (1.0 + 1e-9));
    }

    #[test]
    fn plateau_bump_is_in_y() {
        let grid = build_grid(50.0, 512, Grading::Geometric, 3).unwrap();
        let f = plateau_bump(&grid, 1.5, 1.8, 2.2, 2.6).unwrap();
        crate::variational::check_in_y(&f, 2.0).unwrap();
        assert!(plateau_bump(&grid, 1.5, 1.4, 2.2, 2.6).is_err());
    }
}
