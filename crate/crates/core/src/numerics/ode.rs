//! Dormand–Prince 5(4) integrator with continuous output and terminal events.

use crate::error::{Error, Result};

/// Step-size control settings.
#[derive(Debug, Clone, Copy)]
pub struct OdeOptions {
    pub rtol: f64,
    pub atol: f64,
    /// Largest allowed step magnitude (`f64::INFINITY` for none).
    pub h_max: f64,
    pub max_steps: usize,
}

impl Default for OdeOptions {
    fn default() -> Self {
        OdeOptions {
            rtol: 1e-10,
            atol: 1e-14,
            h_max: f64::INFINITY,
            max_steps: 2_000_000,
        }
    }
}

/// One accepted step with the coefficients of its quartic continuous extension.
#[derive(Debug, Clone)]
pub struct DenseStep<const D: usize> {
    pub t0: f64,
    pub h: f64,
    rcont: [[f64; D]; 5],
}

impl<const D: usize> DenseStep<D> {
    pub fn t1(&self) -> f64 {
        self.t0 + self.h
    }

    /// State at `t` (meaningful for `t` inside the step).
    pub fn eval(&self, t: f64) -> [f64; D] {
        let th = (t - self.t0) / self.h;
        let th1 = 1.0 - th;
        let r = &self.rcont;
        let mut y = [0.0; D];
        for i in 0..D {
            y[i] = r[0][i] + th * (r[1][i] + th1 * (r[2][i] + th * (r[3][i] + th1 * r[4][i])));
        }
        y
    }
}

/// Continuous trajectory produced by [`integrate`].
#[derive(Debug, Clone)]
pub struct Trajectory<const D: usize> {
    pub steps: Vec<DenseStep<D>>,
    pub t_start: f64,
    pub t_final: f64,
    pub y_final: [f64; D],
    /// Location of a terminal event, if one fired.
    pub event: Option<f64>,
}

impl<const D: usize> Trajectory<D> {
    /// Interpolated state at `t`, clamped to the integrated range.
    pub fn eval(&self, t: f64) -> [f64; D] {
        let forward = self.t_final >= self.t_start;
        let idx = if forward {
            self.steps.partition_point(|s| s.t1() < t)
        } else {
            self.steps.partition_point(|s| s.t1() > t)
        };
        let idx = idx.min(self.steps.len() - 1);
        self.steps[idx].eval(t)
    }

    pub fn contains(&self, t: f64) -> bool {
        let (a, b) = if self.t_start <= self.t_final {
            (self.t_start, self.t_final)
        } else {
            (self.t_final, self.t_start)
        };
        t >= a && t <= b
    }

    /// Appends a trajectory that starts where this one ends.
    pub fn extend(&mut self, other: Trajectory<D>) {
        self.steps.extend(other.steps);
        self.t_final = other.t_final;
        self.y_final = other.y_final;
        self.event = other.event;
    }
}

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

fn axpy<const D: usize>(y: &[f64; D], h: f64, terms: &[(f64, &[f64; D])]) -> [f64; D] {
    let mut out = *y;
    for (c, k) in terms {
        for i in 0..D {
            out[i] += h * c * k[i];
        }
    }
    out
}

/// Integrates `y' = f(t, y)` from `t0` to `t1` (either direction).
///
/// If `event` is supplied, integration stops at the first sign change of
/// `event(t, y)` from its initial sign, located to near machine precision on
/// the continuous extension.
pub fn integrate<const D: usize, F, G>(
    mut f: F,
    t0: f64,
    y0: [f64; D],
    t1: f64,
    opts: &OdeOptions,
    mut event: Option<G>,
) -> Result<Trajectory<D>>
where
    F: FnMut(f64, &[f64; D]) -> [f64; D],
    G: FnMut(f64, &[f64; D]) -> f64,
{
    let dir = if t1 >= t0 { 1.0 } else { -1.0 };
    let span = (t1 - t0).abs();
    let mut traj = Trajectory {
        steps: Vec::new(),
        t_start: t0,
        t_final: t0,
        y_final: y0,
        event: None,
    };
    if span == 0.0 {
        traj.steps.push(DenseStep {
            t0,
            h: 1.0,
            rcont: [y0, [0.0; D], [0.0; D], [0.0; D], [0.0; D]],
        });
        return Ok(traj);
    }
    let mut t = t0;
    let mut y = y0;
    let mut k1 = f(t, &y);
    let mut g_prev = event.as_mut().map(|g| g(t, &y));
    let mut h = initial_step(&mut f, t, &y, &k1, dir, opts).min(span);
    let mut fac_old: f64 = 1e-4;
    let mut steps = 0usize;
    loop {
        if steps >= opts.max_steps {
            return Err(Error::no_convergence("ODE step budget", steps, t));
        }
        steps += 1;
        let remaining = (t1 - t).abs();
        let mut last = false;
        if h >= remaining * (1.0 - 1e-12) {
            h = remaining;
            last = true;
        }
        if h < 1e-15 * t.abs().max(1.0) {
            return Err(Error::Stiffness {
                r: t,
                state: format!("{y:?}"),
            });
        }
        let hs = dir * h;
        let k2 = f(t + C2 * hs, &axpy(&y, hs, &[(A21, &k1)]));
        let k3 = f(t + C3 * hs, &axpy(&y, hs, &[(A31, &k1), (A32, &k2)]));
        let k4 = f(
            t + C4 * hs,
            &axpy(&y, hs, &[(A41, &k1), (A42, &k2), (A43, &k3)]),
        );
        let k5 = f(
            t + C5 * hs,
            &axpy(&y, hs, &[(A51, &k1), (A52, &k2), (A53, &k3), (A54, &k4)]),
        );
        let k6 = f(
            t + hs,
            &axpy(
                &y,
                hs,
                &[(A61, &k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)],
            ),
        );
        let y_new = axpy(
            &y,
            hs,
            &[(A71, &k1), (A73, &k3), (A74, &k4), (A75, &k5), (A76, &k6)],
        );
        let t_new = if last { t1 } else { t + hs };
        let k7 = f(t_new, &y_new);
        let mut err = 0.0;
        for i in 0..D {
            let e =
                hs * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
            let sc = opts.atol + opts.rtol * y[i].abs().max(y_new[i].abs());
            err += (e / sc).powi(2);
        }
        let err = (err / D as f64).sqrt();
        if !err.is_finite() {
            h *= 0.1;
            continue;
        }
        if err <= 1.0 {
            // Lund stabilization of the step-size controller.
            let fac = (err.powf(0.17) / fac_old.powf(0.04) / 0.9).clamp(0.1, 5.0);
            let h_next = (h / fac).min(opts.h_max);
            fac_old = err.max(1e-4);
            let mut rcont = [[0.0; D]; 5];
            for i in 0..D {
                let ydiff = y_new[i] - y[i];
                let bspl = hs * k1[i] - ydiff;
                rcont[0][i] = y[i];
                rcont[1][i] = ydiff;
                rcont[2][i] = bspl;
                rcont[3][i] = ydiff - hs * k7[i] - bspl;
                rcont[4][i] = hs
                    * (D1 * k1[i] + D3 * k3[i] + D4 * k4[i] + D5 * k5[i] + D6 * k6[i] + D7 * k7[i]);
            }
            let step = DenseStep {
                t0: t,
                h: t_new - t,
                rcont,
            };
            if let (Some(g), Some(gp)) = (event.as_mut(), g_prev) {
                let g_new = g(t_new, &y_new);
                if gp != 0.0 && g_new.signum() != gp.signum() {
                    let te = locate_event(&step, g, gp);
                    let ye = step.eval(te);
                    let mut cut = step.clone();
                    cut.h = step.h;
                    traj.steps.push(cut);
                    traj.t_final = te;
                    traj.y_final = ye;
                    traj.event = Some(te);
                    return Ok(traj);
                }
                g_prev = Some(g_new);
            }
            traj.steps.push(step);
            t = t_new;
            y = y_new;
            k1 = k7;
            if last {
                traj.t_final = t;
                traj.y_final = y;
                return Ok(traj);
            }
            h = h_next;
        } else {
            let fac = (err.powf(0.2) / 0.9).min(10.0);
            h /= fac;
        }
    }
}

fn locate_event<const D: usize, G>(step: &DenseStep<D>, g: &mut G, g0: f64) -> f64
where
    G: FnMut(f64, &[f64; D]) -> f64,
{
    // Illinois variant of regula falsi on the continuous extension.
    let (mut a, mut b) = (step.t0, step.t1());
    let mut ga = g0;
    let mut gb = g(b, &step.eval(b));
    let mut side = 0;
    for _ in 0..200 {
        let c = (a * gb - b * ga) / (gb - ga);
        let c = if c.is_finite() && (c - a) * (c - b) <= 0.0 {
            c
        } else {
            0.5 * (a + b)
        };
        let gc = g(c, &step.eval(c));
        if gc == 0.0 || (b - a).abs() <= 4.0 * f64::EPSILON * c.abs().max(1.0) {
            return c;
        }
        if gc.signum() == gb.signum() {
            b = c;
            gb = gc;
            if side == -1 {
                ga *= 0.5;
            }
            side = -1;
        } else {
            a = c;
            ga = gc;
            if side == 1 {
                gb *= 0.5;
            }
            side = 1;
        }
    }
    0.5 * (a + b)
}

fn initial_step<const D: usize, F>(
    f: &mut F,
    t: f64,
    y: &[f64; D],
    k1: &[f64; D],
    dir: f64,
    opts: &OdeOptions,
) -> f64
where
    F: FnMut(f64, &[f64; D]) -> [f64; D],
{
    let mut d0 = 0.0;
    let mut d1 = 0.0;
    for i in 0..D {
        let sc = opts.atol + opts.rtol * y[i].abs();
        d0 += (y[i] / sc).powi(2);
        d1 += (k1[i] / sc).powi(2);
    }
    let (d0, d1) = ((d0 / D as f64).sqrt(), (d1 / D as f64).sqrt());
    let h0 = if d0 < 1e-5 || d1 < 1e-5 {
        1e-6
    } else {
        0.01 * d0 / d1
    };
    let y1 = axpy(y, dir * h0, &[(1.0, k1)]);
    let k2 = f(t + dir * h0, &y1);
    let mut d2 = 0.0;
    for i in 0..D {
        let sc = opts.atol + opts.rtol * y[i].abs();
        d2 += ((k2[i] - k1[i]) / sc).powi(2);
    }
    let d2 = (d2 / D as f64).sqrt() / h0;
    let h1 = if d1.max(d2) <= 1e-15 {
        (h0 * 1e-3).max(1e-6)
    } else {
        (0.01 / d1.max(d2)).powf(0.2)
    };
    (100.0 * h0).min(h1).min(opts.h_max)
}

/// Integrates across a sorted list of points where `f` may be discontinuous,
/// restarting the integrator at each of them.
pub fn integrate_piecewise<const D: usize, F, G>(
    mut f: F,
    knots: &[f64],
    y0: [f64; D],
    opts: &OdeOptions,
    mut event: Option<G>,
) -> Result<Trajectory<D>>
where
    F: FnMut(f64, &[f64; D]) -> [f64; D],
    G: FnMut(f64, &[f64; D]) -> f64,
{
    assert!(knots.len() >= 2);
    let mut traj: Option<Trajectory<D>> = None;
    let mut y = y0;
    for w in knots.windows(2) {
        // Keep every right-hand-side evaluation strictly inside the open
        // segment so that one-sided limits are used at the knots.
        let (lo, hi) = if w[0] <= w[1] {
            (w[0], w[1])
        } else {
            (w[1], w[0])
        };
        let pad = 4.0 * f64::EPSILON * lo.abs().max(hi.abs()).max(1e-300);
        let (lo, hi) = (lo + pad, hi - pad);
        let mut g = |t: f64, y: &[f64; D]| f(t.clamp(lo, hi.max(lo)), y);
        let seg = integrate(
            &mut g,
            w[0],
            y,
            w[1],
            opts,
            event.as_mut().map(|g| |t: f64, y: &[f64; D]| g(t, y)),
        )?;
        y = seg.y_final;
        let fired = seg.event.is_some();
        match traj.as_mut() {
            None => traj = Some(seg),
            Some(tr) => tr.extend(seg),
        }
        if fired {
            break;
        }
    }
    Ok(traj.expect("at least one segment"))
}

#[cfg(test)]
mod tests {
    use super::*;

    type NoEvent = fn(f64, &[f64; 2]) -> f64;

    #[test]
    fn harmonic_oscillator_endpoint_and_dense_output() {
        let opts = OdeOptions {
            rtol: 1e-11,
            atol: 1e-13,
            ..Default::default()
        };
        let tr = integrate(
            |_t, y: &[f64; 2]| [y[1], -y[0]],
            0.0,
            [0.0, 1.0],
            10.0,
            &opts,
            None::<NoEvent>,
        )
        .unwrap();
        assert!((tr.y_final[0] - 10f64.sin()).abs() < 1e-9);
        for i in 0..200 {
            let t = i as f64 * 0.05;
            let y = tr.eval(t);
            assert!((y[0] - t.sin()).abs() < 1e-9, "t = {t}");
            assert!((y[1] - t.cos()).abs() < 1e-9, "t = {t}");
        }
    }

    #[test]
    fn dense_output_is_fourth_order() {
        // Single fixed steps of y' = y: interpolation error must scale like h^5.
        let errs: Vec<f64> = [0.2, 0.1]
            .iter()
            .map(|&h| {
                let opts = OdeOptions {
                    rtol: 1.0,
                    atol: 1.0,
                    h_max: h,
                    ..Default::default()
                };
                let tr = integrate(
                    |_t, y: &[f64; 1]| [y[0]],
                    0.0,
                    [1.0],
                    h,
                    &opts,
                    None::<fn(f64, &[f64; 1]) -> f64>,
                )
                .unwrap();
                let t = 0.37 * h;
                (tr.eval(t)[0] - t.exp()).abs()
            })
            .collect();
        let order = (errs[0] / errs[1]).log2();
        assert!(order > 4.5, "observed local interpolation order {order}");
    }

    #[test]
    fn backward_integration() {
        let opts = OdeOptions::default();
        let tr = integrate(
            |_t, y: &[f64; 1]| [-y[0]],
            5.0,
            [1.0],
            0.0,
            &opts,
            None::<fn(f64, &[f64; 1]) -> f64>,
        )
        .unwrap();
        assert!((tr.y_final[0] - 5f64.exp()).abs() < 1e-7 * 5f64.exp());
        assert!((tr.eval(2.5)[0] - 2.5f64.exp()).abs() < 1e-7 * 2.5f64.exp());
    }

    #[test]
    fn terminal_event() {
        let opts = OdeOptions::default();
        let tr = integrate(
            |_t, y: &[f64; 2]| [y[1], -y[0]],
            0.0,
            [1.0, 0.0],
            10.0,
            &opts,
            Some(|_t: f64, y: &[f64; 2]| y[0]),
        )
        .unwrap();
        let te = tr.event.unwrap();
        assert!((te - std::f64::consts::FRAC_PI_2).abs() < 1e-10);
    }

    #[test]
    fn piecewise_restart() {
        let opts = OdeOptions::default();
        let f = |t: f64, _y: &[f64; 1]| [if t < 1.0 { 1.0 } else { 3.0 }];
        let tr = integrate_piecewise(
            f,
            &[0.0, 1.0, 2.0],
            [0.0],
            &opts,
            None::<fn(f64, &[f64; 1]) -> f64>,
        )
        .unwrap();
        assert!((tr.y_final[0] - 4.0).abs() < 1e-12);
        assert!((tr.eval(0.5)[0] - 0.5).abs() < 1e-12);
        assert!((tr.eval(1.5)[0] - 2.5).abs() < 1e-12);
    }
}
