//! Radial meshes on `[1, R_max]`, piecewise-linear radial functions, dual
//! densities, norms and pairings.
//!
//! Every volume integral carries the sphere area `omega_N`, so discrete
//! quantities are truncations of integrals over the exterior of the unit ball.

mod discrete;

pub use discrete::{residual, DiscreteModel, GridEigenPair, OuterBoundary};

use std::path::Path;
use std::sync::Arc;

use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::numerics::quadrature::gauss;
use crate::params::Params;

/// Node distribution of a [`RadialGrid`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Grading {
    Uniform,
    Geometric,
}

impl std::str::FromStr for Grading {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "uniform" => Ok(Grading::Uniform),
            "geometric" => Ok(Grading::Geometric),
            _ => Err(Error::invalid(format!("unknown grading `{s}`"))),
        }
    }
}

/// Mesh `1 = r_0 < r_1 < ... < r_M = R_max` with exact cell moments of `r^{N-1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct RadialGrid {
    nodes: Vec<f64>,
    grading: Grading,
    dim: usize,
    /// `int_cell (1 - s) r^{N-1} dr` with `s` the local coordinate in `[0, 1]`.
    w_left: Vec<f64>,
    /// `int_cell s r^{N-1} dr`.
    w_right: Vec<f64>,
}

/// Smallest admissible number of cells.
pub const MIN_CELLS: usize = 16;

/// Builds a grid with `m` cells on `[1, r_max]` for dimension `dim`.
pub fn build_grid(r_max: f64, m: usize, grading: Grading, dim: usize) -> Result<Arc<RadialGrid>> {
    if !(r_max > 1.0 && r_max.is_finite()) {
        return Err(Error::invalid(format!("R_max must exceed 1, got {r_max}")));
    }
    if m < MIN_CELLS {
        return Err(Error::invalid(format!(
            "need at least {MIN_CELLS} cells, got {m}"
        )));
    }
    let mut nodes: Vec<f64> = (0..=m)
        .map(|i| {
            let x = i as f64 / m as f64;
            match grading {
                Grading::Uniform => 1.0 + (r_max - 1.0) * x,
                Grading::Geometric => r_max.powf(x),
            }
        })
        .collect();
    nodes[0] = 1.0;
    nodes[m] = r_max;
    RadialGrid::from_nodes(nodes, grading, dim).map(Arc::new)
}

impl RadialGrid {
    /// Grid from explicit nodes (must start at 1 and increase strictly).
    pub fn from_nodes(nodes: Vec<f64>, grading: Grading, dim: usize) -> Result<Self> {
        if nodes.len() < MIN_CELLS + 1 {
            return Err(Error::invalid("grid needs at least 17 nodes"));
        }
        if nodes[0] != 1.0 {
            return Err(Error::invalid("first grid node must be exactly 1"));
        }
        if nodes
            .windows(2)
            .any(|w| !(w[1] > w[0]) || !w[1].is_finite())
        {
            return Err(Error::invalid("grid nodes must increase strictly"));
        }
        let rule = gauss(dim / 2 + 2);
        let k = dim as i32 - 1;
        let mut w_left = Vec::with_capacity(nodes.len() - 1);
        let mut w_right = Vec::with_capacity(nodes.len() - 1);
        for w in nodes.windows(2) {
            let h = w[1] - w[0];
            w_left.push(rule.integrate(0.0, 1.0, |s| (1.0 - s) * (w[0] + h * s).powi(k)) * h);
            w_right.push(rule.integrate(0.0, 1.0, |s| s * (w[0] + h * s).powi(k)) * h);
        }
        Ok(RadialGrid {
            nodes,
            grading,
            dim,
            w_left,
            w_right,
        })
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn grading(&self) -> Grading {
        self.grading
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of cells `M`.
    pub fn cells(&self) -> usize {
        self.nodes.len() - 1
    }

    pub fn r_max(&self) -> f64 {
        self.nodes[self.cells()]
    }

    pub fn width(&self, c: usize) -> f64 {
        self.nodes[c + 1] - self.nodes[c]
    }

    /// `int_cell r^{N-1} dr`.
    pub fn cell_volume(&self, c: usize) -> f64 {
        self.w_left[c] + self.w_right[c]
    }

    /// Moments `(int (1-s) r^{N-1}, int s r^{N-1})` of cell `c`.
    pub fn cell_moments(&self, c: usize) -> (f64, f64) {
        (self.w_left[c], self.w_right[c])
    }

    /// `int r^{N-1} hat_i dr` for the nodal hat function of node `i`.
    pub fn node_volume(&self, i: usize) -> f64 {
        let mut v = 0.0;
        if i > 0 {
            v += self.w_right[i - 1];
        }
        if i < self.cells() {
            v += self.w_left[i];
        }
        v
    }

    /// `int_1^{R_max} f r^{N-1} dr` for the piecewise-linear interpolant of nodal values.
    pub fn integrate_nodal(&self, values: &[f64]) -> f64 {
        assert_eq!(values.len(), self.nodes.len());
        (0..self.cells())
            .map(|c| self.w_left[c] * values[c] + self.w_right[c] * values[c + 1])
            .sum()
    }

    /// Index of the cell containing `r` (clamped to the grid).
    pub fn locate(&self, r: f64) -> usize {
        let i = self.nodes.partition_point(|&x| x <= r);
        i.saturating_sub(1).min(self.cells() - 1)
    }

    /// Writes the one-column node CSV.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["r"])?;
        for r in &self.nodes {
            w.write_record([format!("{r:.17e}")])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Boundary information of a nodal function.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct BoundaryTags {
    /// `v_0 = 0`
    pub inner_dirichlet: bool,
    /// `v_M = 0`
    pub outer_dirichlet: bool,
}

/// Continuous piecewise-linear function given by nodal values.
#[derive(Debug, Clone, PartialEq)]
pub struct RadialFunction {
    grid: Arc<RadialGrid>,
    values: Vec<f64>,
}

impl RadialFunction {
    pub fn new(grid: Arc<RadialGrid>, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.nodes.len() {
            return Err(Error::invalid(format!(
                "expected {} nodal values, got {}",
                grid.nodes.len(),
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("nodal values must be finite"));
        }
        Ok(RadialFunction { grid, values })
    }

    pub fn zeros(grid: Arc<RadialGrid>) -> Self {
        let n = grid.nodes.len();
        RadialFunction {
            grid,
            values: vec![0.0; n],
        }
    }

    /// Nodal interpolant of `f`.
    pub fn from_fn(grid: Arc<RadialGrid>, f: impl Fn(f64) -> f64) -> Self {
        let values = grid.nodes.iter().map(|&r| f(r)).collect();
        RadialFunction { grid, values }
    }

    pub fn grid(&self) -> &Arc<RadialGrid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn bc(&self) -> BoundaryTags {
        BoundaryTags {
            inner_dirichlet: self.values[0] == 0.0,
            outer_dirichlet: self.values[self.values.len() - 1] == 0.0,
        }
    }

    /// Constant derivative on cell `c`.
    pub fn slope(&self, c: usize) -> f64 {
        (self.values[c + 1] - self.values[c]) / self.grid.width(c)
    }

    /// Value at `r` by linear interpolation.
    pub fn eval(&self, r: f64) -> f64 {
        let c = self.grid.locate(r);
        let s = (r - self.grid.nodes[c]) / self.grid.width(c);
        self.values[c] + s * (self.values[c + 1] - self.values[c])
    }

    pub fn same_grid(&self, other: &RadialFunction) -> bool {
        Arc::ptr_eq(&self.grid, &other.grid) || self.grid == other.grid
    }

    /// `a self + b other` on a shared grid.
    pub fn combine(&self, a: f64, other: &RadialFunction, b: f64) -> Result<RadialFunction> {
        if !self.same_grid(other) {
            return Err(Error::invalid("functions live on different grids"));
        }
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(x, y)| a * x + b * y)
            .collect();
        Ok(RadialFunction {
            grid: self.grid.clone(),
            values,
        })
    }

    pub fn scaled(&self, a: f64) -> RadialFunction {
        RadialFunction {
            grid: self.grid.clone(),
            values: self.values.iter().map(|v| a * v).collect(),
        }
    }

    /// Random profile `sum_k c_k sin(k pi s(r)) / k` plus nodal noise of size
    /// `noise`, vanishing at `r = 1`. With `vanish_at_end` the map is
    /// `s = (1 - 1/r) / (1 - 1/R_max)` so the profile also vanishes at `R_max`;
    /// otherwise `s = 1 - 1/r`.
    pub fn random(
        grid: Arc<RadialGrid>,
        rng: &mut impl Rng,
        modes: usize,
        noise: f64,
        vanish_at_end: bool,
    ) -> Self {
        let coeffs: Vec<f64> = (0..modes).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let r_max = grid.r_max();
        let m = grid.cells();
        let mut values: Vec<f64> = grid
            .nodes
            .iter()
            .map(|&r| {
                let s = if vanish_at_end {
                    (1.0 - 1.0 / r) / (1.0 - 1.0 / r_max)
                } else {
                    1.0 - 1.0 / r
                };
                coeffs
                    .iter()
                    .enumerate()
                    .map(|(k, c)| {
                        c * ((k + 1) as f64 * std::f64::consts::PI * s).sin() / (k + 1) as f64
                    })
                    .sum::<f64>()
            })
            .collect();
        if noise > 0.0 {
            for v in values.iter_mut().take(m).skip(1) {
                *v += noise * rng.gen_range(-1.0..1.0);
            }
        }
        values[0] = 0.0;
        if vanish_at_end {
            values[m] = 0.0;
        }
        RadialFunction { grid, values }
    }

    /// Writes the two-column `r,value` CSV.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["r", "value"])?;
        for (r, v) in self.grid.nodes.iter().zip(&self.values) {
            w.write_record([format!("{r:.17e}"), format!("{v:.17e}")])?;
        }
        w.flush()?;
        Ok(())
    }

    /// Reads an `r,value` CSV; the nodes define a new grid for dimension `dim`.
    pub fn read_csv(path: &Path, dim: usize) -> Result<RadialFunction> {
        let mut rd = csv::Reader::from_path(path)?;
        let mut nodes = Vec::new();
        let mut values = Vec::new();
        for rec in rd.records() {
            let rec = rec?;
            let parse = |i: usize| -> Result<f64> {
                rec.get(i)
                    .and_then(|s| s.trim().parse().ok())
                    .ok_or_else(|| Error::invalid("malformed CSV row"))
            };
            nodes.push(parse(0)?);
            values.push(parse(1)?);
        }
        let grid = Arc::new(RadialGrid::from_nodes(nodes, Grading::Geometric, dim)?);
        RadialFunction::new(grid, values)
    }
}

/// `(omega_N int_1^{R_max} |u'|^p r^{N-1} dr)^{1/p}`.
pub fn x_norm(u: &RadialFunction, params: &Params) -> Result<f64> {
    if u.values[0] != 0.0 {
        return Err(Error::invalid("the solution-space norm needs u(1) = 0"));
    }
    Ok(x_norm_pow(u, params.p, params.omega()).powf(1.0 / params.p))
}

/// `omega int |u'|^p r^{N-1}` without the Dirichlet check.
pub(crate) fn x_norm_pow(u: &RadialFunction, p: f64, omega: f64) -> f64 {
    let g = &u.grid;
    (0..g.cells())
        .map(|c| g.cell_volume(c) * u.slope(c).abs().powf(p))
        .sum::<f64>()
        * omega
}

/// Norm of the element represented by `u`: the integral over `[1, R_max]`
/// plus the energy of the decaying p-harmonic extension `u_M (R/r)^m` beyond `R_max`.
pub fn x_norm_extended(u: &RadialFunction, params: &Params) -> Result<f64> {
    params.require_subcritical()?;
    let base = x_norm(u, params)?.powf(params.p);
    let g = &u.grid;
    let um = u.values[g.cells()];
    let tail = params.omega()
        * params.c_np()
        * g.r_max().powf(params.nf() - params.p)
        * um.abs().powf(params.p);
    Ok((base + tail).powf(1.0 / params.p))
}

/// Function-type dual element `<h, u> = omega_N int g u r^{N-1} dr`.
#[derive(Debug, Clone, PartialEq)]
pub struct DualDensity {
    g: RadialFunction,
}

impl DualDensity {
    /// Requires `g(1) = 0`.
    pub fn new(g: RadialFunction) -> Result<Self> {
        if g.values[0] != 0.0 {
            return Err(Error::invalid("dual densities must vanish at r = 1"));
        }
        Ok(DualDensity { g })
    }

    pub fn zero(grid: Arc<RadialGrid>) -> Self {
        DualDensity {
            g: RadialFunction::zeros(grid),
        }
    }

    /// Smooth bump `amp (1 - x^2)^2`, `x = (r - center)/width`, supported in
    /// `[center - width, center + width]`.
    pub fn bump(grid: Arc<RadialGrid>, center: f64, width: f64, amp: f64) -> Result<Self> {
        if !(width > 0.0) || center - width <= 1.0 || center + width >= grid.r_max() {
            return Err(Error::invalid(
                "bump support must lie strictly inside (1, R_max)",
            ));
        }
        let g = RadialFunction::from_fn(grid, |r| {
            let x = (r - center) / width;
            if x.abs() < 1.0 {
                amp * (1.0 - x * x).powi(2)
            } else {
                0.0
            }
        });
        Ok(DualDensity { g })
    }

    pub fn density(&self) -> &RadialFunction {
        &self.g
    }

    pub fn grid(&self) -> &Arc<RadialGrid> {
        &self.g.grid
    }

    /// Coefficients `l_i` with `<h, u> = sum_i l_i u_i`.
    pub fn pairing_vector(&self, params: &Params) -> Vec<f64> {
        let g = &self.g.grid;
        let omega = params.omega();
        (0..g.nodes.len())
            .map(|i| omega * g.node_volume(i) * self.g.values[i])
            .collect()
    }

    /// `a self + b other`.
    pub fn combine(&self, a: f64, other: &DualDensity, b: f64) -> Result<DualDensity> {
        Ok(DualDensity {
            g: self.g.combine(a, &other.g, b)?,
        })
    }
}

/// `<h, u>` with node-lumped quadrature of `g u r^{N-1}`.
pub fn dual_pair(h: &DualDensity, u: &RadialFunction, params: &Params) -> Result<f64> {
    if !h.g.same_grid(u) {
        return Err(Error::invalid(
            "density and function live on different grids",
        ));
    }
    let l = h.pairing_vector(params);
    Ok(l.iter().zip(&u.values).map(|(a, b)| a * b).sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    #[test]
    fn uniform_and_geometric_nodes() {
        let g = build_grid(2.0, 16, Grading::Uniform, 3).unwrap();
        for (i, r) in g.nodes().iter().enumerate() {
            assert!((r - (1.0 + i as f64 / 16.0)).abs() < 1e-15);
        }
        let g = build_grid(40.0, 4096, Grading::Geometric, 3).unwrap();
        for i in [0, 1, 100, 2048, 4095, 4096] {
            assert!((g.nodes()[i] - 40f64.powf(i as f64 / 4096.0)).abs() < 1e-13 * g.nodes()[i]);
        }
        assert!(build_grid(1.0, 32, Grading::Uniform, 3).is_err());
        assert!(build_grid(3.0, 8, Grading::Uniform, 3).is_err());
    }

    #[test]
    fn quadrature_exactness() {
        let g = build_grid(2.0, 64, Grading::Uniform, 3).unwrap();
        let one = vec![1.0; 65];
        assert!((g.integrate_nodal(&one) - 7.0 / 3.0).abs() < 1e-12 * 7.0 / 3.0);
        for dim in [2, 3, 4, 5] {
            let g = build_grid(37.0, 300, Grading::Geometric, dim).unwrap();
            let nf = dim as f64;
            let exact0 = (37f64.powf(nf) - 1.0) / nf;
            assert!((g.integrate_nodal(&vec![1.0; 301]) - exact0).abs() < 1e-12 * exact0);
            let lin: Vec<f64> = g.nodes().to_vec();
            let exact1 = (37f64.powf(nf + 1.0) - 1.0) / (nf + 1.0);
            assert!((g.integrate_nodal(&lin) - exact1).abs() < 1e-10 * exact1);
        }
    }

    #[test]
    fn norm_examples() {
        let params = Params::new(2.0, 3).unwrap();
        let g = build_grid(2.0, 16, Grading::Uniform, 3).unwrap();
        assert_eq!(
            x_norm(&RadialFunction::zeros(g.clone()), &params).unwrap(),
            0.0
        );
        // u = r - 1 on [1, 2]: the last cell ends at R_max, so use a longer grid.
        let g = RadialGrid::from_nodes(
            (0..=32).map(|i| 1.0 + i as f64 / 16.0).collect(),
            Grading::Uniform,
            3,
        )
        .map(Arc::new)
        .unwrap();
        let u = RadialFunction::from_fn(g, |r| (r - 1.0).min(1.0));
        let got = x_norm(&u, &params).unwrap();
        assert!((got - (4.0 * PI * 7.0 / 3.0).sqrt()).abs() < 1e-12);
        let bad = RadialFunction::from_fn(u.grid().clone(), |_| 1.0);
        assert!(x_norm(&bad, &params).is_err());
    }

    #[test]
    fn pairing_examples() {
        let params = Params::new(2.0, 3).unwrap();
        let g = build_grid(6.0, 200, Grading::Uniform, 3).unwrap();
        let h = DualDensity::bump(g.clone(), 2.5, 0.5, 1.0).unwrap();
        let u = RadialFunction::from_fn(g.clone(), |r| {
            if (2.0..=3.0).contains(&r) {
                0.0
            } else {
                r - 1.0
            }
        });
        assert_eq!(dual_pair(&h, &u, &params).unwrap(), 0.0);
        assert_eq!(
            dual_pair(&DualDensity::zero(g.clone()), &u, &params).unwrap(),
            0.0
        );
        // Bump against u = 1 approximates omega int (1-x^2)^2 r^2 dr.
        let one = RadialFunction::from_fn(g.clone(), |_| 1.0);
        let got = dual_pair(&h, &one, &params).unwrap();
        let exact = 4.0
            * PI
            * crate::numerics::quadrature::gauss(20).integrate(2.0, 3.0, |r| {
                let x = (r - 2.5) / 0.5;
                (1.0 - x * x).powi(2) * r * r
            });
        assert!((got - exact).abs() < 1e-3 * exact);
        let other = build_grid(6.0, 100, Grading::Uniform, 3).unwrap();
        assert!(dual_pair(&h, &RadialFunction::zeros(other), &params).is_err());
    }

    fn random_function(grid: &Arc<RadialGrid>, coeffs: &[f64]) -> RadialFunction {
        RadialFunction::from_fn(grid.clone(), |r| {
            let t = r.ln();
            coeffs
                .iter()
                .enumerate()
                .map(|(k, c)| c * ((k + 1) as f64 * t).sin())
                .sum()
        })
    }

    proptest! {
        #[test]
        fn norm_homogeneity(c in -50.0f64..50.0, coeffs in proptest::collection::vec(-1.0f64..1.0, 4), p in 1.2f64..3.5) {
            let params = Params::new(p, 4).unwrap();
            let g = build_grid(20.0, 64, Grading::Geometric, 4).unwrap();
            let u = random_function(&g, &coeffs);
            let a = x_norm(&u.scaled(c), &params).unwrap();
            let b = c.abs() * x_norm(&u, &params).unwrap();
            prop_assert!((a - b).abs() <= 1e-12 * b.max(1e-300));
        }

        #[test]
        fn pairing_bilinearity(a in -5.0f64..5.0, b in -5.0f64..5.0,
                               c1 in proptest::collection::vec(-1.0f64..1.0, 3),
                               c2 in proptest::collection::vec(-1.0f64..1.0, 3)) {
            let params = Params::new(1.7, 3).unwrap();
            let g = build_grid(10.0, 80, Grading::Geometric, 3).unwrap();
            let h = DualDensity::bump(g.clone(), 3.0, 1.0, 2.0).unwrap();
            let u = random_function(&g, &c1);
            let v = random_function(&g, &c2);
            let lhs = dual_pair(&h, &u.combine(a, &v, b).unwrap(), &params).unwrap();
            let pu = dual_pair(&h, &u, &params).unwrap();
            let pv = dual_pair(&h, &v, &params).unwrap();
            let rhs = a * pu + b * pv;
            let scale = (a * pu).abs() + (b * pv).abs();
            prop_assert!((lhs - rhs).abs() <= 1e-12 * scale.max(1e-300));
        }
    }

    #[test]
    fn csv_round_trip() {
        let dir = std::env::temp_dir().join(format!("plap-csv-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let g = build_grid(5.0, 20, Grading::Geometric, 3).unwrap();
        let u = RadialFunction::from_fn(g, |r| (r - 1.0) / r);
        let path = dir.join("u.csv");
        u.write_csv(&path).unwrap();
        let back = RadialFunction::read_csv(&path, 3).unwrap();
        assert_eq!(back.values(), u.values());
        std::fs::remove_dir_all(&dir).ok();
    }
}
