//! Flat `key = value` experiment configuration with a canonical echo.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use plap_core::eigensolver::ShootingOptions;
use plap_core::radial::{Grading, OuterBoundary};
use plap_core::variational::{HSpec, ProfileOptions, SliceOptions, SolveOptions};
use plap_core::weights::RadialWeight;
use plap_core::Params;

/// Error in the configuration or on the command line; mapped to exit code 2.
#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

macro_rules! usage {
    ($($arg:tt)*) => {
        anyhow::Error::new(UsageError(format!($($arg)*)))
    };
}

/// Every setting of a run. Keys of the text form match the field names.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub weight: Option<String>,
    pub p: f64,
    pub n: usize,
    pub r_max: f64,
    pub m: usize,
    pub grading: Grading,
    pub outer: OuterBoundary,
    pub tol: f64,
    pub r_end: f64,
    pub r_asym: f64,
    pub ode_rtol: f64,
    pub samples: usize,
    pub h: HSpec,
    pub tau_max: f64,
    pub tau_points: usize,
    pub tau_adaptive: bool,
    pub gtol: f64,
    pub max_iter: usize,
    pub residual_tol: f64,
    pub k: usize,
    pub poincare_samples: usize,
    pub eps: f64,
    pub seed: u64,
    pub out: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let shoot = ShootingOptions::default();
        let slice = SliceOptions::default();
        let profile = ProfileOptions::default();
        let solve = SolveOptions::default();
        ExperimentConfig {
            weight: None,
            p: 2.0,
            n: 3,
            r_max: 200.0,
            m: 2048,
            grading: Grading::Geometric,
            outer: OuterBoundary::Tail,
            tol: shoot.tol,
            r_end: shoot.r_end,
            r_asym: shoot.r_asym,
            ode_rtol: shoot.ode_rtol,
            samples: 10_000,
            h: HSpec::default(),
            tau_max: profile.tau_max,
            tau_points: profile.points,
            tau_adaptive: true,
            gtol: slice.gtol,
            max_iter: slice.max_iter,
            residual_tol: solve.residual_tol,
            k: 10,
            poincare_samples: 200,
            eps: 0.1,
            seed: solve.seed,
            out: PathBuf::from("out"),
        }
    }
}

/// Keys in canonical order.
pub const KEYS: [&str; 24] = [
    "weight",
    "p",
    "N",
    "r_max",
    "m",
    "grading",
    "outer",
    "tol",
    "r_end",
    "r_asym",
    "ode_rtol",
    "samples",
    "h",
    "tau_max",
    "tau_points",
    "tau_adaptive",
    "gtol",
    "max_iter",
    "residual_tol",
    "k",
    "poincare_samples",
    "eps",
    "seed",
    "out",
];

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| usage!("invalid value `{value}` for `{key}`"))
}

fn positive(key: &str, value: &str) -> Result<f64> {
    let x: f64 = parse(key, value)?;
    if !(x > 0.0 && x.is_finite()) {
        return Err(usage!("`{key}` must be a positive number, got `{value}`"));
    }
    Ok(x)
}

fn grading_name(g: Grading) -> &'static str {
    match g {
        Grading::Uniform => "uniform",
        Grading::Geometric => "geometric",
    }
}

fn outer_name(o: OuterBoundary) -> &'static str {
    match o {
        OuterBoundary::Tail => "tail",
        OuterBoundary::Dirichlet => "dirichlet",
    }
}

impl ExperimentConfig {
    /// Sets one key from its text form.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let value = value.trim();
        match key {
            "weight" => {
                // Validated against the catalog once `p` is known.
                self.weight = Some(value.to_string());
            }
            "p" => self.p = positive(key, value)?,
            "N" => self.n = parse(key, value)?,
            "r_max" => self.r_max = positive(key, value)?,
            "m" => self.m = parse(key, value)?,
            "grading" => self.grading = value.parse().map_err(|e| usage!("{e}"))?,
            "outer" => self.outer = value.parse().map_err(|e| usage!("{e}"))?,
            "tol" => self.tol = positive(key, value)?,
            "r_end" => self.r_end = positive(key, value)?,
            "r_asym" => self.r_asym = positive(key, value)?,
            "ode_rtol" => self.ode_rtol = positive(key, value)?,
            "samples" => self.samples = parse(key, value)?,
            "h" => self.h = value.parse().map_err(|e| usage!("{e}"))?,
            "tau_max" => self.tau_max = positive(key, value)?,
            "tau_points" => self.tau_points = parse(key, value)?,
            "tau_adaptive" => self.tau_adaptive = parse(key, value)?,
            "gtol" => self.gtol = positive(key, value)?,
            "max_iter" => self.max_iter = parse(key, value)?,
            "residual_tol" => self.residual_tol = positive(key, value)?,
            "k" => self.k = parse(key, value)?,
            "poincare_samples" => self.poincare_samples = parse(key, value)?,
            "eps" => self.eps = positive(key, value)?,
            "seed" => self.seed = parse(key, value)?,
            "out" => self.out = PathBuf::from(value),
            _ => return Err(usage!("unknown configuration key `{key}`")),
        }
        Ok(())
    }

    /// Applies a `key = value` text; blank lines and `#` comments are skipped.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| usage!("line {}: expected `key = value`, got `{raw}`", i + 1))?;
            self.set(k.trim(), v)
                .with_context(|| format!("line {}", i + 1))?;
        }
        Ok(())
    }

    pub fn apply_file(&mut self, path: &Path) -> Result<()> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| usage!("cannot read config {}: {e}", path.display()))?;
        self.apply_text(&text)
    }

    fn value(&self, key: &str) -> Option<String> {
        Some(match key {
            "weight" => return self.weight.clone(),
            "p" => self.p.to_string(),
            "N" => self.n.to_string(),
            "r_max" => self.r_max.to_string(),
            "m" => self.m.to_string(),
            "grading" => grading_name(self.grading).to_string(),
            "outer" => outer_name(self.outer).to_string(),
            "tol" => format!("{:e}", self.tol),
            "r_end" => self.r_end.to_string(),
            "r_asym" => self.r_asym.to_string(),
            "ode_rtol" => format!("{:e}", self.ode_rtol),
            "samples" => self.samples.to_string(),
            "h" => self.h.to_string(),
            "tau_max" => self.tau_max.to_string(),
            "tau_points" => self.tau_points.to_string(),
            "tau_adaptive" => self.tau_adaptive.to_string(),
            "gtol" => format!("{:e}", self.gtol),
            "max_iter" => self.max_iter.to_string(),
            "residual_tol" => format!("{:e}", self.residual_tol),
            "k" => self.k.to_string(),
            "poincare_samples" => self.poincare_samples.to_string(),
            "eps" => self.eps.to_string(),
            "seed" => self.seed.to_string(),
            "out" => self.out.display().to_string(),
            _ => unreachable!("key list and match agree"),
        })
    }

    /// Canonical text: every key in fixed order with its effective value.
    /// Parsing the echo reproduces the configuration and the same echo.
    pub fn echo(&self) -> String {
        let mut s = String::new();
        for key in KEYS {
            if let Some(v) = self.value(key) {
                writeln!(s, "{key} = {v}").expect("writing to a string");
            }
        }
        s
    }

    pub fn params(&self) -> Result<Params> {
        Params::new(self.p, self.n).map_err(|e| usage!("{e}"))
    }

    pub fn weight(&self) -> Result<RadialWeight> {
        let id = self
            .weight
            .as_deref()
            .ok_or_else(|| usage!("no weight given; set `weight` or pass --weight"))?;
        RadialWeight::from_id(id, self.p).map_err(|e| usage!("weight `{id}`: {e}"))
    }

    pub fn shooting(&self) -> ShootingOptions {
        ShootingOptions {
            tol: self.tol,
            r_end: self.r_end,
            r_asym: self.r_asym,
            ode_rtol: self.ode_rtol,
        }
    }

    pub fn slice(&self) -> SliceOptions {
        SliceOptions {
            max_iter: self.max_iter,
            gtol: self.gtol,
        }
    }

    pub fn profile(&self) -> ProfileOptions {
        ProfileOptions {
            points: self.tau_points,
            tau_max: self.tau_max,
            ..ProfileOptions::default()
        }
    }

    pub fn solve(&self) -> SolveOptions {
        SolveOptions {
            residual_tol: self.residual_tol,
            slice: self.slice(),
            profile: self.profile(),
            seed: self.seed,
            ..SolveOptions::default()
        }
    }
}

/// Fails on settings that violate ranges not caught key by key.
pub fn require(cond: bool, msg: &str) -> Result<()> {
    if !cond {
        bail!(UsageError(msg.to_string()));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn echo_round_trips() {
        let mut c = ExperimentConfig::default();
        c.apply_text("weight = k1?zeta=2&iota=1\np = 2.5 # degenerate\nN=4\nh = kphi?xi=0.01\n")
            .unwrap();
        let echo = c.echo();
        let mut d = ExperimentConfig::default();
        d.apply_text(&echo).unwrap();
        assert_eq!(c, d);
        assert_eq!(echo, d.echo());
        assert!(echo.contains("tol = 1e-12\n"));
        assert!(echo.starts_with("weight = k1?zeta=2&iota=1\np = 2.5\nN = 4\n"));
    }

    #[test]
    fn defaults_are_all_explicit() {
        let echo = ExperimentConfig::default().echo();
        assert_eq!(echo.lines().count(), KEYS.len() - 1);
    }

    #[test]
    fn bad_input_is_a_usage_error() {
        let mut c = ExperimentConfig::default();
        for text in ["colour = red", "p = -1", "m = many", "just words"] {
            let err = c.apply_text(text).unwrap_err();
            assert!(
                err.root_cause().downcast_ref::<UsageError>().is_some(),
                "{text}"
            );
        }
        assert!(c.weight().is_err());
    }
}
