//! Gauss–Legendre rules and adaptive composite quadrature.

use std::sync::OnceLock;

/// A Gauss–Legendre rule mapped to the reference interval `[0, 1]`.
#[derive(Debug, Clone)]
pub struct GaussRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussRule {
    /// Computes the `n`-point rule by Newton iteration on the Legendre recurrence.
    pub fn compute(n: usize) -> Self {
        assert!(n >= 1, "a quadrature rule needs at least one node");
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let nf = n as f64;
        for i in 0..n.div_ceil(2) {
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre(n, x);
            if d != 0.0 {
                dp = d;
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            // Map from [-1, 1] to [0, 1].
            nodes[i] = 0.5 * (1.0 - x);
            nodes[n - 1 - i] = 0.5 * (1.0 + x);
            weights[i] = 0.5 * w;
            weights[n - 1 - i] = 0.5 * w;
        }
        GaussRule { nodes, weights }
    }

    /// Integrates `f` over `[a, b]`.
    pub fn integrate(&self, a: f64, b: f64, mut f: impl FnMut(f64) -> f64) -> f64 {
        let h = b - a;
        let mut s = 0.0;
        for (x, w) in self.nodes.iter().zip(&self.weights) {
            s += w * f(a + h * x);
        }
        s * h
    }
}

/// Legendre polynomial `P_n(x)` and its derivative.
fn legendre(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

const MAX_CACHED: usize = 64;

/// Cached `n`-point rule for `1 <= n <= 64`.
pub fn gauss(n: usize) -> &'static GaussRule {
    static RULES: OnceLock<Vec<GaussRule>> = OnceLock::new();
    assert!(
        (1..=MAX_CACHED).contains(&n),
        "cached rules cover 1..=64 points"
    );
    let rules = RULES.get_or_init(|| (1..=MAX_CACHED).map(GaussRule::compute).collect());
    &rules[n - 1]
}

/// Adaptive bisection with a 10-point rule checked against its two halves.
///
/// Returns the integral estimate; the error control is
/// `|I_whole - I_halves| <= max(rtol |I|, atol)` per panel.
pub fn adaptive(f: &mut impl FnMut(f64) -> f64, a: f64, b: f64, rtol: f64, atol: f64) -> f64 {
    let rule = gauss(10);
    let whole = rule.integrate(a, b, &mut *f);
    adaptive_panel(f, rule, a, b, whole, rtol, atol)
}

/// Panel budget per call of the adaptive scheme.
const MAX_PANELS: usize = 20_000;

fn adaptive_panel(
    f: &mut impl FnMut(f64) -> f64,
    rule: &GaussRule,
    a: f64,
    b: f64,
    whole: f64,
    rtol: f64,
    atol: f64,
) -> f64 {
    let mut stack = vec![(a, b, whole, atol, 0usize)];
    let mut total = 0.0;
    let mut splits = 0usize;
    while let Some((a, b, whole, tol, depth)) = stack.pop() {
        let m = 0.5 * (a + b);
        let left = rule.integrate(a, m, &mut *f);
        let right = rule.integrate(m, b, &mut *f);
        let halves = left + right;
        let done = (halves - whole).abs() <= (rtol * halves.abs()).max(tol);
        if done || depth >= 50 || splits >= MAX_PANELS || m <= a || m >= b {
            total += halves;
            continue;
        }
        splits += 1;
        stack.push((a, m, left, 0.5 * tol, depth + 1));
        stack.push((m, b, right, 0.5 * tol, depth + 1));
    }
    total
}

/// Adaptive composite quadrature over `[a, b]` on log-spaced panels, with
/// the panel boundaries refined at every supplied breakpoint.
///
/// Requires `0 < a < b`. `panels_per_decade` log panels are laid out first;
/// each is then split at the breakpoints falling inside it.
pub fn composite_log(
    mut f: impl FnMut(f64) -> f64,
    a: f64,
    b: f64,
    breakpoints: &[f64],
    panels_per_decade: usize,
    rtol: f64,
) -> f64 {
    assert!(a > 0.0 && b > a);
    let decades = (b / a).log10();
    let n = ((decades * panels_per_decade as f64).ceil() as usize).max(1);
    let mut cuts: Vec<f64> = (0..=n)
        .map(|i| a * (b / a).powf(i as f64 / n as f64))
        .collect();
    cuts[n] = b;
    cuts.extend(breakpoints.iter().copied().filter(|&x| x > a && x < b));
    cuts.sort_by(f64::total_cmp);
    cuts.dedup_by(|x, y| (*x - *y).abs() <= 1e-15 * y.abs());
    let mut total = 0.0;
    let mut panel_values = Vec::with_capacity(cuts.len());
    for w in cuts.windows(2) {
        panel_values.push(gauss(10).integrate(w[0], w[1], &mut f));
    }
    let scale: f64 = panel_values.iter().map(|v| v.abs()).sum();
    let atol = rtol * scale / cuts.len() as f64;
    for (w, &whole) in cuts.windows(2).zip(&panel_values) {
        total += adaptive_panel(&mut f, gauss(10), w[0], w[1], whole, rtol, atol);
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rule_is_exact_for_polynomials() {
        for n in 1..=20 {
            let rule = gauss(n);
            let wsum: f64 = rule.weights.iter().sum();
            assert!((wsum - 1.0).abs() < 1e-14, "n = {n}");
            // Degree 2n - 1 is integrated exactly.
            let deg = 2 * n - 1;
            let got = rule.integrate(0.0, 2.0, |x| x.powi(deg as i32));
            let exact = 2f64.powi(deg as i32 + 1) / (deg as f64 + 1.0);
            assert!((got - exact).abs() < 1e-12 * exact, "n = {n}");
        }
    }

    #[test]
    fn sixty_four_points() {
        let got = gauss(64).integrate(0.0, std::f64::consts::PI, f64::sin);
        assert!((got - 2.0).abs() < 1e-14);
    }

    #[test]
    fn adaptive_handles_kinks() {
        let mut f = |x: f64| (x - 0.3).abs().sqrt();
        let got = adaptive(&mut f, 0.0, 1.0, 1e-12, 1e-14);
        let exact = 2.0 / 3.0 * (0.3f64.powf(1.5) + 0.7f64.powf(1.5));
        assert!((got - exact).abs() < 1e-9);
    }

    #[test]
    fn composite_with_breakpoints() {
        // Step function with a jump at 2.5.
        let f = |x: f64| if x < 2.5 { 1.0 / x } else { 2.0 / x };
        let got = composite_log(f, 1.0, 100.0, &[2.5], 4, 1e-12);
        let exact = 2.5f64.ln() + 2.0 * (100.0f64 / 2.5).ln();
        assert!((got - exact).abs() < 1e-10);
    }
}
