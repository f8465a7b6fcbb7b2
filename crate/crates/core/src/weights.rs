//! Closed-form radial weights and numerical checks of their hypotheses.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::numerics::quadrature::{self, composite_log};
use crate::params::Params;

/// Radius beyond which plateau weights are replaced by their cell average
/// when an infinitely long integration range is needed.
pub const HOMOGENIZE_FROM: f64 = 1.0e3;

/// Radial weight `K(r)` on `(1, inf)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RadialWeight {
    /// `r^{-alpha}`
    Power { alpha: f64 },
    /// `r^{-4}`, the weight of the closed-form test case.
    LinearR4,
    /// `1/(r^p (1 + ln r))` on the plateaus `[n, n + n^{-zeta}]`, `r^{-p-iota}` elsewhere.
    K1 { zeta: f64, iota: f64, p: f64 },
    /// `r^{-p}` on the plateaus, `r^{-p-iota}` elsewhere.
    K2 { zeta: f64, iota: f64, p: f64 },
    /// `(2 - r)^eta` on `[1, 2)`, `K1` on `[2, inf)`.
    K3 {
        zeta: f64,
        iota: f64,
        p: f64,
        eta: f64,
    },
}

impl RadialWeight {
    /// Parses a catalog id such as `k1?zeta=2&iota=1`, `linear_r4`,
    /// `power?alpha=4` or `k3?eta=0.5`. Plateau weights take their exponent from `p`.
    pub fn from_id(id: &str, p: f64) -> Result<Self> {
        let (name, query) = match id.split_once('?') {
            Some((n, q)) => (n.trim(), q.trim()),
            None => (id.trim(), ""),
        };
        let mut args: Vec<(String, f64)> = Vec::new();
        for pair in query.split('&').filter(|s| !s.is_empty()) {
            let (k, v) = pair
                .split_once('=')
                .ok_or_else(|| Error::invalid(format!("malformed weight parameter `{pair}`")))?;
            let v: f64 = v
                .trim()
                .parse()
                .map_err(|_| Error::invalid(format!("weight parameter `{k}` is not a number")))?;
            args.push((k.trim().to_string(), v));
        }
        let allowed: &[&str] = match name {
            "power" => &["alpha"],
            "linear_r4" => &[],
            "k1" | "k2" => &["zeta", "iota"],
            "k3" => &["zeta", "iota", "eta"],
            _ => return Err(Error::invalid(format!("unknown weight id `{name}`"))),
        };
        if let Some((k, _)) = args.iter().find(|(k, _)| !allowed.contains(&k.as_str())) {
            return Err(Error::invalid(format!(
                "weight `{name}` has no parameter `{k}`"
            )));
        }
        let get = |key: &str, default: f64| {
            args.iter()
                .rev()
                .find(|(k, _)| k == key)
                .map(|(_, v)| *v)
                .unwrap_or(default)
        };
        let w = match name {
            "power" => RadialWeight::Power {
                alpha: get("alpha", 4.0),
            },
            "linear_r4" => RadialWeight::LinearR4,
            "k1" => RadialWeight::K1 {
                zeta: get("zeta", 2.0),
                iota: get("iota", 1.0),
                p,
            },
            "k2" => RadialWeight::K2 {
                zeta: get("zeta", 2.0),
                iota: get("iota", 1.0),
                p,
            },
            _ => RadialWeight::K3 {
                zeta: get("zeta", 2.0),
                iota: get("iota", 1.0),
                p,
                eta: get("eta", 0.5),
            },
        };
        w.validate()?;
        Ok(w)
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            RadialWeight::Power { alpha } if !alpha.is_finite() => {
                Err(Error::invalid("power exponent must be finite"))
            }
            RadialWeight::K1 { zeta, iota, p }
            | RadialWeight::K2 { zeta, iota, p }
            | RadialWeight::K3 { zeta, iota, p, .. }
                if !(zeta > 1.0 && iota > 0.0 && p > 1.0) =>
            {
                Err(Error::invalid(
                    "plateau weights need zeta > 1, iota > 0 and p > 1",
                ))
            }
            RadialWeight::K3 { eta, .. } if !(eta > 0.0) => Err(Error::invalid("K3 needs eta > 0")),
            _ => Ok(()),
        }
    }

    /// Canonical catalog id.
    pub fn id(&self) -> String {
        match *self {
            RadialWeight::Power { alpha } => format!("power?alpha={alpha}"),
            RadialWeight::LinearR4 => "linear_r4".into(),
            RadialWeight::K1 { zeta, iota, .. } => format!("k1?zeta={zeta}&iota={iota}"),
            RadialWeight::K2 { zeta, iota, .. } => format!("k2?zeta={zeta}&iota={iota}"),
            RadialWeight::K3 {
                zeta, iota, eta, ..
            } => format!("k3?zeta={zeta}&iota={iota}&eta={eta}"),
        }
    }

    /// `K(r)`, rejecting `r < 1`.
    pub fn eval(&self, r: f64) -> Result<f64> {
        if !(r >= 1.0) {
            return Err(Error::invalid(format!(
                "weights are defined for r >= 1, got {r}"
            )));
        }
        Ok(self.value(r))
    }

    /// `K(r)` for `r >= 1` without argument checking.
    pub fn value(&self, r: f64) -> f64 {
        match *self {
            RadialWeight::Power { alpha } => r.powf(-alpha),
            RadialWeight::LinearR4 => {
                let r2 = r * r;
                1.0 / (r2 * r2)
            }
            RadialWeight::K1 { zeta, iota, p } => {
                if on_plateau(r, zeta) {
                    1.0 / (r.powf(p) * (1.0 + r.ln()))
                } else {
                    r.powf(-p - iota)
                }
            }
            RadialWeight::K2 { zeta, iota, p } => {
                if on_plateau(r, zeta) {
                    r.powf(-p)
                } else {
                    r.powf(-p - iota)
                }
            }
            RadialWeight::K3 { zeta, iota, p, eta } => {
                if r < 2.0 {
                    (2.0 - r).powf(eta)
                } else {
                    RadialWeight::K1 { zeta, iota, p }.value(r)
                }
            }
        }
    }

    /// True if the weight has infinitely many discontinuities.
    pub fn has_plateaus(&self) -> bool {
        matches!(
            self,
            RadialWeight::K1 { .. } | RadialWeight::K2 { .. } | RadialWeight::K3 { .. }
        )
    }

    /// Points in the open interval `(a, b)` where `K` is not smooth.
    pub fn breakpoints(&self, a: f64, b: f64) -> Vec<f64> {
        let mut out = Vec::new();
        let zeta = match *self {
            RadialWeight::Power { .. } | RadialWeight::LinearR4 => return out,
            RadialWeight::K1 { zeta, .. } | RadialWeight::K2 { zeta, .. } => zeta,
            RadialWeight::K3 { zeta, .. } => {
                if a < 2.0 && b > 2.0 {
                    out.push(2.0);
                }
                zeta
            }
        };
        let first = (a.floor() as i64).max(1);
        let last = b.floor() as i64;
        for n in first..=last {
            let nf = n as f64;
            for x in [nf, nf + nf.powf(-zeta)] {
                if x > a && x < b {
                    out.push(x);
                }
            }
        }
        out.sort_by(f64::total_cmp);
        out.dedup();
        out
    }

    /// Smooth surrogate used beyond `HOMOGENIZE_FROM`: the plateau branch
    /// weighted by the plateau density `r^{-zeta}` plus the off-plateau branch.
    /// Equal to `value` for weights without plateaus or for `r < HOMOGENIZE_FROM`.
    pub fn effective(&self, r: f64) -> f64 {
        if r < HOMOGENIZE_FROM {
            return self.value(r);
        }
        match *self {
            RadialWeight::K1 { zeta, iota, p } | RadialWeight::K3 { zeta, iota, p, .. } => {
                let frac = r.powf(-zeta);
                frac / (r.powf(p) * (1.0 + r.ln())) + (1.0 - frac) * r.powf(-p - iota)
            }
            RadialWeight::K2 { zeta, iota, p } => {
                let frac = r.powf(-zeta);
                frac * r.powf(-p) + (1.0 - frac) * r.powf(-p - iota)
            }
            _ => self.value(r),
        }
    }

    /// Breakpoints of `effective` in `(a, b)`.
    pub fn effective_breakpoints(&self, a: f64, b: f64) -> Vec<f64> {
        let mut out = self.breakpoints(a, b.min(HOMOGENIZE_FROM));
        if self.has_plateaus() && a < HOMOGENIZE_FROM && b > HOMOGENIZE_FROM {
            out.push(HOMOGENIZE_FROM);
        }
        out
    }

    /// One-sided order `eta` of a zero of `K` at `t`, i.e. `K(r) ~ c |r - t|^eta`
    /// as `r -> t` from the left (`left = true`) or right. Zero where `K(t±) > 0`.
    pub fn local_zero_order(&self, t: f64, left: bool) -> f64 {
        match *self {
            RadialWeight::K3 { eta, .. } if left && (t - 2.0).abs() < 1e-14 => eta,
            _ => 0.0,
        }
    }

    /// Points where `K` vanishes.
    pub fn zeros(&self) -> Vec<f64> {
        match self {
            RadialWeight::K3 { .. } => vec![2.0],
            _ => vec![],
        }
    }

    /// Upper bound of `int_R^inf K(s) s^k (ln s)^j ds` read from the outermost
    /// branch structure (exact for pure powers). `+inf` if the bound diverges.
    pub fn tail_bound(&self, r_big: f64, k: f64, j: u32) -> f64 {
        match *self {
            RadialWeight::Power { alpha } => power_log_tail(r_big, k - alpha, j, 1.0),
            RadialWeight::LinearR4 => power_log_tail(r_big, k - 4.0, j, 1.0),
            RadialWeight::K1 { zeta, iota, p }
            | RadialWeight::K2 { zeta, iota, p }
            | RadialWeight::K3 { zeta, iota, p, .. } => {
                let r_big = r_big.max(3.0);
                // Off-plateau branch: K <= s^{-p-iota} everywhere outside the plateaus.
                let off = power_log_tail(r_big, k - p - iota, j, 1.0);
                // Plateau n contributes at most n^{-zeta} * max_{[n,n+1]} s^{k-p} (ln s)^j,
                // bounded by (3/2)^{max(k-p,0)} n^{k-p-zeta} (ln 2n)^j for n >= 2;
                // the sum over n >= floor(R) is dominated by the integral from floor(R) - 1.
                let n0 = r_big.floor();
                let c = 1.5f64.powf((k - p).max(0.0));
                let plateaus = c * power_log_tail(n0 - 1.0, k - p - zeta, j, 2.0);
                off + plateaus
            }
        }
    }
}

fn on_plateau(r: f64, zeta: f64) -> bool {
    let n = r.floor();
    r <= n + n.powf(-zeta)
}

/// `int_R^inf x^gamma (ln(c x))^j dx` in closed form; `+inf` unless `gamma < -1`.
pub fn power_log_tail(r_big: f64, gamma: f64, j: u32, c: f64) -> f64 {
    if gamma >= -1.0 {
        return f64::INFINITY;
    }
    let beta = -gamma - 1.0;
    // Substituting u = ln(c x): c^{-gamma-1} int_{u0}^inf e^{-beta u} u^j du.
    let u0 = (c * r_big).ln();
    let scale = c.powf(-gamma - 1.0);
    if j == 0 {
        return scale * (-beta * u0).exp() / beta;
    }
    // Upper incomplete gamma for integer order: e^{-x} sum_k j!/k! x^k / beta^{j+1}.
    let x = beta * u0.max(0.0);
    let mut term = 1.0;
    let mut sum = 1.0;
    for m in 1..=j {
        term *= x / m as f64;
        sum += term;
    }
    let fact: f64 = (1..=j).map(|v| v as f64).product();
    scale * (-x).exp() * fact * sum / beta.powi(j as i32 + 1)
}

/// Result of one truncated-plus-tail integral.
#[derive(Debug, Clone, Serialize)]
pub struct IntegralCheck {
    /// Power `k` in `int K(s) s^k (ln s)^j ds`.
    pub exponent: f64,
    pub log_power: u32,
    pub r_quad: f64,
    pub truncated: f64,
    pub tail_bound: f64,
    pub total: f64,
    pub pass: bool,
}

/// Values above this are treated as divergent.
pub const OVERFLOW_THRESHOLD: f64 = 1e300;

fn integral_check(w: &RadialWeight, k: f64, j: u32, r_quad: f64) -> IntegralCheck {
    let breaks = w.breakpoints(1.0, r_quad);
    let truncated = composite_log(
        |s| w.value(s) * s.powf(k) * if j == 0 { 1.0 } else { s.ln().powi(j as i32) },
        1.0,
        r_quad,
        &breaks,
        8,
        1e-11,
    );
    let tail_bound = w.tail_bound(r_quad, k, j);
    let total = truncated + tail_bound;
    IntegralCheck {
        exponent: k,
        log_power: j,
        r_quad,
        truncated,
        tail_bound,
        total,
        pass: total.is_finite() && total < OVERFLOW_THRESHOLD,
    }
}

/// Admissibility: `int K s^{p-1}` finite for `p != N`, `int K (s ln s)^{N-1}` for `p = N`.
pub fn check_admissible(w: &RadialWeight, params: &Params, r_quad: f64) -> IntegralCheck {
    if params.p == params.nf() {
        let j = (params.n - 1) as u32;
        integral_check(w, params.nf() - 1.0, j, r_quad)
    } else {
        integral_check(w, params.p - 1.0, 0, r_quad)
    }
}

/// Report of the integrability hypothesis `K in L^1(r^delta)` plus boundedness.
#[derive(Debug, Clone, Serialize)]
pub struct HCheck {
    pub delta: f64,
    pub integral: IntegralCheck,
    /// Largest sampled `K` on a log grid over `[1, r_quad]`.
    pub sup_sampled: f64,
    pub pass: bool,
}

/// Default exponent for the integrability check: `p - 1 + iota_0/2`-style
/// choices inside `(p - 1, N - 1)`.
pub fn default_delta(w: &RadialWeight, params: &Params) -> f64 {
    let (p, nf) = (params.p, params.nf());
    match *w {
        RadialWeight::K1 { iota, .. }
        | RadialWeight::K2 { iota, .. }
        | RadialWeight::K3 { iota, .. } => p - 1.0 + 0.5 * iota.min(1.0).min(nf - p),
        _ => 0.5 * (p - 1.0 + nf - 1.0),
    }
}

pub fn check_h(w: &RadialWeight, params: &Params, delta: f64, r_quad: f64) -> Result<HCheck> {
    let (lo, hi) = (params.p - 1.0, params.nf() - 1.0);
    if !(delta > lo && delta < hi) {
        return Err(Error::invalid(format!(
            "delta must lie in ({lo}, {hi}), got {delta}"
        )));
    }
    let integral = integral_check(w, delta, 0, r_quad);
    let n = 4000;
    let sup_sampled = (0..=n)
        .map(|i| w.value(r_quad.powf(i as f64 / n as f64)))
        .fold(0.0f64, f64::max);
    let pass = integral.pass && sup_sampled.is_finite();
    Ok(HCheck {
        delta,
        integral,
        sup_sampled,
        pass,
    })
}

/// One local integrability probe near a point `t`.
#[derive(Debug, Clone, Serialize)]
pub struct LocalProbe {
    pub t: f64,
    pub side: &'static str,
    /// Order of the zero of `K` at `t` from this side.
    pub zero_order: f64,
    /// Exponent of the leading singular power `|r - t|^beta`.
    pub beta: f64,
    /// Integral over the probe window (`+inf` if divergent).
    pub value: f64,
    pub finite: bool,
}

/// Report of the local integrability hypothesis.
#[derive(Debug, Clone, Serialize)]
pub struct WCheck {
    pub window: f64,
    /// Probes of `|int_t^r K|^{(2-p)/(p-1)}` near each lattice point `t`.
    pub flux_probes: Vec<LocalProbe>,
    /// Probes of `1/K` near zeros of `K`.
    pub inverse_probes: Vec<LocalProbe>,
    pub pass: bool,
}

/// Lattice of points used by `check_w`.
fn w_lattice(w: &RadialWeight, r_quad: f64) -> Vec<f64> {
    let mut ts = vec![1.25, 1.5, 1.75, 2.0, 2.5, 3.0, 5.0, 10.0];
    ts.extend(w.zeros());
    ts.extend(w.breakpoints(1.0, 6.0));
    ts.retain(|&t| t > 1.0 && t < r_quad);
    ts.sort_by(f64::total_cmp);
    ts.dedup();
    ts
}

/// `int_0^delta x^beta g(x) dx` for bounded `g`, via `x = y^{1/(beta+1)}`.
fn singular_integral(beta: f64, delta: f64, mut g: impl FnMut(f64) -> f64) -> f64 {
    if beta <= -1.0 {
        return f64::INFINITY;
    }
    let a = beta + 1.0;
    let ymax = delta.powf(a);
    let mut h = |y: f64| g(y.powf(1.0 / a));
    quadrature::adaptive(&mut h, 0.0, ymax, 1e-10, 1e-300) / a
}

pub fn check_w(w: &RadialWeight, params: &Params, r_quad: f64) -> WCheck {
    let p = params.p;
    let e = (2.0 - p) / (p - 1.0);
    let window: f64 = 0.1;
    let kint = |a: f64, b: f64| {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        let mut cuts = vec![lo];
        cuts.extend(w.breakpoints(lo, hi));
        cuts.push(hi);
        let mut s = 0.0;
        for c in cuts.windows(2) {
            let mut f = |x: f64| w.value(x);
            s += quadrature::adaptive(&mut f, c[0], c[1], 1e-12, 1e-300);
        }
        s
    };
    let mut flux_probes = Vec::new();
    for &t in &w_lattice(w, r_quad) {
        for left in [true, false] {
            let delta = if left {
                window.min(0.5 * (t - 1.0))
            } else {
                window
            };
            let eta = w.local_zero_order(t, left);
            let beta = (1.0 + eta) * e;
            let sgn = if left { -1.0 } else { 1.0 };
            let value = singular_integral(beta, delta, |x| {
                if x <= 0.0 {
                    // Limit of |int_t^r K| / x^{1+eta}.
                    let x1 = 1e-9 * delta;
                    return (kint(t, t + sgn * x1) / x1.powf(1.0 + eta)).powf(e);
                }
                (kint(t, t + sgn * x) / x.powf(1.0 + eta)).powf(e)
            });
            flux_probes.push(LocalProbe {
                t,
                side: if left { "left" } else { "right" },
                zero_order: eta,
                beta,
                value,
                finite: value.is_finite(),
            });
        }
    }
    let mut inverse_probes = Vec::new();
    for t in w.zeros() {
        for left in [true, false] {
            let eta = w.local_zero_order(t, left);
            let delta = if left {
                window.min(0.5 * (t - 1.0))
            } else {
                window
            };
            let sgn = if left { -1.0 } else { 1.0 };
            let beta = -eta;
            let value = singular_integral(beta, delta, |x| {
                let x = x.max(1e-12 * delta);
                x.powf(eta) / w.value(t + sgn * x)
            });
            inverse_probes.push(LocalProbe {
                t,
                side: if left { "left" } else { "right" },
                zero_order: eta,
                beta,
                value,
                finite: value.is_finite(),
            });
        }
    }
    let pass = flux_probes.iter().chain(&inverse_probes).all(|p| p.finite);
    WCheck {
        window,
        flux_probes,
        inverse_probes,
        pass,
    }
}

/// Sampled `ess sup_{r >= rho} r^p K(r)` at increasing `rho`.
#[derive(Debug, Clone, Serialize)]
pub struct DecayCheck {
    pub rho: Vec<f64>,
    pub sup: Vec<f64>,
    /// Pass iff the sampled sups are nonincreasing and the last one is at most
    /// this fraction of the first.
    pub ratio_threshold: f64,
    pub pass: bool,
}

/// Sampled supremum of `r^p K(r)` over `[rho, inf)`.
///
/// Every catalog branch of `r^p K` is nonincreasing beyond `r = 2`, so the
/// samples are `rho`, the first breakpoints after it and a log grid.
pub fn decay_sup(w: &RadialWeight, params: &Params, rho: f64) -> f64 {
    let p = params.p;
    let f = |r: f64| r.powf(p) * w.value(r);
    let mut best = f(rho);
    for b in w.breakpoints(rho, rho + 60.0) {
        best = best.max(f(b));
    }
    for i in 0..=400 {
        best = best.max(f(rho * 1e3f64.powf(i as f64 / 400.0)));
    }
    best
}

pub fn check_decay(w: &RadialWeight, params: &Params) -> DecayCheck {
    let rho: Vec<f64> = (1..=6).map(|k| 10f64.powi(k)).collect();
    let sup: Vec<f64> = rho.iter().map(|&r| decay_sup(w, params, r)).collect();
    let ratio_threshold = 0.5;
    let monotone = sup.windows(2).all(|s| s[1] <= s[0] * (1.0 + 1e-12));
    let pass = monotone && sup[sup.len() - 1] <= ratio_threshold * sup[0];
    DecayCheck {
        rho,
        sup,
        ratio_threshold,
        pass,
    }
}

/// All hypothesis checks for one weight.
#[derive(Debug, Clone, Serialize)]
pub struct HypothesisReport {
    pub weight: String,
    pub p: f64,
    pub n: usize,
    pub admissible: IntegralCheck,
    pub h_check: Option<HCheck>,
    /// Present for `p > 2`.
    pub w_check: Option<WCheck>,
    pub decay: DecayCheck,
}

pub fn hypothesis_report(w: &RadialWeight, params: &Params, r_quad: f64) -> HypothesisReport {
    let delta = default_delta(w, params);
    HypothesisReport {
        weight: w.id(),
        p: params.p,
        n: params.n,
        admissible: check_admissible(w, params, r_quad),
        h_check: check_h(w, params, delta, r_quad).ok(),
        w_check: (params.p > 2.0).then(|| check_w(w, params, r_quad)),
        decay: check_decay(w, params),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn k1(p: f64) -> RadialWeight {
        RadialWeight::K1 {
            zeta: 2.0,
            iota: 1.0,
            p,
        }
    }

    #[test]
    fn catalog_values() {
        let w = k1(2.0);
        let v = w.eval(1.5).unwrap();
        assert!((v - 1.0 / (1.5f64.powi(2) * (1.0 + 1.5f64.ln()))).abs() < 1e-15);
        let v = w.eval(2.5).unwrap();
        assert!((v - 2.5f64.powi(-3)).abs() < 1e-15);
        assert_eq!(RadialWeight::LinearR4.eval(2.0).unwrap(), 1.0 / 16.0);
        assert!(w.eval(0.5).is_err());
    }

    #[test]
    fn ids_round_trip() {
        for id in [
            "k1?zeta=2&iota=1",
            "linear_r4",
            "power?alpha=4",
            "k3?zeta=2&iota=1&eta=0.5",
        ] {
            let w = RadialWeight::from_id(id, 2.5).unwrap();
            assert_eq!(w.id(), id);
        }
        let w = RadialWeight::from_id("k3?eta=0.5", 2.5).unwrap();
        assert_eq!(
            w,
            RadialWeight::K3 {
                zeta: 2.0,
                iota: 1.0,
                p: 2.5,
                eta: 0.5
            }
        );
        assert!(RadialWeight::from_id("nope", 2.0).is_err());
        assert!(RadialWeight::from_id("k1?zeta=0.5", 2.0).is_err());
        assert!(RadialWeight::from_id("power?beta=1", 2.0).is_err());
    }

    #[test]
    fn k3_pieces() {
        let w = RadialWeight::K3 {
            zeta: 2.0,
            iota: 1.0,
            p: 2.5,
            eta: 0.5,
        };
        assert!((w.value(1.75) - 0.25f64.sqrt()).abs() < 1e-15);
        assert_eq!(w.value(3.5), k1(2.5).value(3.5));
        assert!(w.breakpoints(1.0, 3.0).contains(&2.0));
    }

    #[test]
    fn k1_below_k2_and_positive() {
        let a = k1(2.5);
        let b = RadialWeight::K2 {
            zeta: 2.0,
            iota: 1.0,
            p: 2.5,
        };
        for i in 1..5000 {
            let r = 1.0 + i as f64 * 0.0137;
            assert!(a.value(r) > 0.0);
            assert!(a.value(r) <= b.value(r));
        }
    }

    #[test]
    fn pure_power_tails_are_exact() {
        let params = Params::new(2.0, 3).unwrap();
        let c = check_admissible(&RadialWeight::LinearR4, &params, 1e4);
        assert!((c.total - 0.5).abs() < 1e-8 * 0.5, "{c:?}");
        let d = check_h(&RadialWeight::Power { alpha: 3.7 }, &params, 1.5, 1e3).unwrap();
        let exact = 1.0 / (3.7 - 1.5 - 1.0);
        assert!((d.integral.total - exact).abs() < 1e-8 * exact);
    }

    #[test]
    fn log_tail_matches_quadrature() {
        // int_10^inf x^{-3} (ln x)^2 dx compared with direct quadrature.
        let exact = power_log_tail(10.0, -3.0, 2, 1.0);
        let num = composite_log(|x| x.powi(-3) * x.ln().powi(2), 10.0, 1e8, &[], 8, 1e-13);
        assert!((exact - num).abs() < 1e-9, "{exact} vs {num}");
        let exact2 = power_log_tail(5.0, -2.5, 1, 2.0);
        let num2 = composite_log(|x| x.powf(-2.5) * (2.0 * x).ln(), 5.0, 1e12, &[], 8, 1e-13);
        assert!((exact2 - num2).abs() < 1e-8, "{exact2} vs {num2}");
    }

    #[test]
    fn plateau_tail_bound_dominates() {
        // Compare the bound at R = 50 against the numerically integrated tail from 50 to 5e4.
        let w = k1(2.5);
        let k = 1.5 + 0.25;
        let bound = w.tail_bound(50.0, k, 0);
        let num = composite_log(
            |s| w.value(s) * s.powf(k),
            50.0,
            5e4,
            &w.breakpoints(50.0, 5e4),
            4,
            1e-10,
        );
        assert!(bound >= num, "{bound} < {num}");
        assert!(bound < 20.0 * num);
    }

    #[test]
    fn admissibility_examples() {
        let p2 = Params::new(2.0, 3).unwrap();
        assert!(check_admissible(&RadialWeight::LinearR4, &p2, 1e4).pass);
        assert!(!check_admissible(&RadialWeight::Power { alpha: 2.0 }, &p2, 1e4).pass);
        let p15 = Params::new(1.5, 3).unwrap();
        assert!(check_admissible(&k1(1.5), &p15, 1e4).pass);
        let pn = Params::new(3.0, 3).unwrap();
        assert!(check_admissible(&RadialWeight::LinearR4, &pn, 1e4).pass);
        assert!(!check_admissible(&RadialWeight::Power { alpha: 3.0 }, &pn, 1e4).pass);
    }

    #[test]
    fn decay_classification() {
        let params = Params::new(2.5, 4).unwrap();
        assert!(check_decay(&k1(2.5), &params).pass);
        let k2 = check_decay(
            &RadialWeight::K2 {
                zeta: 2.0,
                iota: 1.0,
                p: 2.5,
            },
            &params,
        );
        assert!(!k2.pass);
        assert!(k2.sup.iter().all(|s| (s - 1.0).abs() < 1e-12));
    }

    #[test]
    fn local_integrability() {
        let params = Params::new(2.5, 4).unwrap();
        let ok = RadialWeight::K3 {
            zeta: 2.0,
            iota: 1.0,
            p: 2.5,
            eta: 0.5,
        };
        assert!(check_w(&ok, &params, 1e4).pass);
        let bad = RadialWeight::K3 {
            zeta: 2.0,
            iota: 1.0,
            p: 2.5,
            eta: 2.0,
        };
        let rep = check_w(&bad, &params, 1e4);
        assert!(!rep.pass);
        assert!(rep.inverse_probes.iter().any(|p| !p.finite));
        let p3 = Params::new(3.0, 4).unwrap();
        let rep = check_w(&RadialWeight::LinearR4, &p3, 1e4);
        assert!(rep.pass);
        assert!(rep.flux_probes.iter().all(|p| (p.beta + 0.5).abs() < 1e-15));
        // The flux condition alone fails when eta (p - 2) >= 1 even though 1/K is integrable.
        let p35 = Params::new(3.5, 5).unwrap();
        let k3 = RadialWeight::K3 {
            zeta: 2.0,
            iota: 1.0,
            p: 3.5,
            eta: 0.8,
        };
        let rep = check_w(&k3, &p35, 1e4);
        assert!(rep.inverse_probes.iter().all(|p| p.finite));
        assert!(!rep.pass);
    }
}
