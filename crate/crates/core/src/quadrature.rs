//! Deterministic quadrature for Følner averages.
//!
//! One-dimensional averages use 5-point Gauss–Legendre on every subinterval
//! of a fixed panel partition, doubling the subintervals per panel until two
//! successive refinements agree. Panels are cut at the breakpoints of the
//! integrand, so one-sided limits are never needed. Multi-dimensional
//! averages use the seeded quasi-random stream with a doubling point count.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qmc::QuasiRandom;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    UniformDoubling1d,
    McQuasirandom3d,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuadratureSpec {
    #[serde(default = "default_scheme")]
    pub scheme: Scheme,
    #[serde(default = "default_target")]
    pub target_rel_err: f64,
    #[serde(default = "default_max_nodes")]
    pub max_nodes: usize,
    #[serde(default)]
    pub seed: u64,
}

fn default_scheme() -> Scheme {
    Scheme::UniformDoubling1d
}

fn default_target() -> f64 {
    1e-6
}

fn default_max_nodes() -> usize {
    1 << 26
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        QuadratureSpec {
            scheme: default_scheme(),
            target_rel_err: default_target(),
            max_nodes: default_max_nodes(),
            seed: 0,
        }
    }
}

impl QuadratureSpec {
    pub fn with_target(target_rel_err: f64) -> Self {
        QuadratureSpec {
            target_rel_err,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.target_rel_err > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "target_rel_err must be positive, got {}",
                self.target_rel_err
            )));
        }
        if self.max_nodes == 0 {
            return Err(Error::InvalidParameter("max_nodes must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuadResult {
    pub value: Complex64,
    /// Last refinement minus the previous one.
    pub change: f64,
    pub nodes: usize,
}

fn gauss_legendre_5() -> ([f64; 5], [f64; 5]) {
    let a = (5.0 - 2.0 * (10.0f64 / 7.0).sqrt()).sqrt() / 3.0;
    let b = (5.0 + 2.0 * (10.0f64 / 7.0).sqrt()).sqrt() / 3.0;
    let wa = (322.0 + 13.0 * 70f64.sqrt()) / 900.0;
    let wb = (322.0 - 13.0 * 70f64.sqrt()) / 900.0;
    ([-b, -a, 0.0, a, b], [wb, wa, 128.0 / 225.0, wa, wb])
}

/// Sorted, deduplicated panel edges covering `[lo, hi]`: the endpoints, the
/// interior breakpoints, and unit-spaced cuts so no panel is longer than
/// `max_panel`.
pub fn panel_edges(lo: f64, hi: f64, breakpoints: &[f64], max_panel: f64) -> Vec<f64> {
    let mut edges: Vec<f64> = breakpoints
        .iter()
        .cloned()
        .filter(|t| *t > lo && *t < hi)
        .collect();
    edges.push(lo);
    edges.push(hi);
    edges.sort_by(f64::total_cmp);
    edges.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * (1.0 + b.abs()));
    let mut out = Vec::with_capacity(edges.len());
    for w in edges.windows(2) {
        let pieces = ((w[1] - w[0]) / max_panel).ceil().max(1.0) as usize;
        for j in 0..pieces {
            out.push(w[0] + (w[1] - w[0]) * j as f64 / pieces as f64);
        }
    }
    out.push(hi);
    out
}

/// `(1/(hi − lo)) ∫_lo^hi f`, refined by doubling until successive values
/// differ by less than `target_rel_err·(1 + |value|)`.
pub fn average_1d(
    f: impl Fn(f64) -> Complex64,
    lo: f64,
    hi: f64,
    breakpoints: &[f64],
    spec: &QuadratureSpec,
) -> Result<QuadResult> {
    spec.validate()?;
    if !(hi > lo) {
        return Err(Error::InvalidParameter(format!(
            "empty interval [{lo}, {hi}]"
        )));
    }
    let edges = panel_edges(lo, hi, breakpoints, 1.0);
    let (xs, ws) = gauss_legendre_5();
    let rule = |sub: usize| -> Complex64 {
        let mut total = Complex64::new(0.0, 0.0);
        for p in edges.windows(2) {
            let h = (p[1] - p[0]) / sub as f64;
            let mut panel = Complex64::new(0.0, 0.0);
            for j in 0..sub {
                let mid = p[0] + (j as f64 + 0.5) * h;
                for (x, w) in xs.iter().zip(&ws) {
                    panel += f(mid + 0.5 * h * x) * *w;
                }
            }
            total += panel * (0.5 * h);
        }
        total / (hi - lo)
    };
    let panels = edges.len() - 1;
    let mut sub = 1usize;
    let mut nodes = 5 * panels;
    let mut older = Complex64::new(f64::NAN, f64::NAN);
    let mut prev = rule(sub);
    loop {
        sub *= 2;
        let next_nodes = 5 * panels * sub;
        if nodes + next_nodes > spec.max_nodes {
            return Err(Error::QuadratureNonConvergence {
                nodes,
                previous: older,
                last: prev,
            });
        }
        nodes += next_nodes;
        let cur = rule(sub);
        let change = (cur - prev).norm();
        if change < spec.target_rel_err * (1.0 + cur.norm()) {
            return Ok(QuadResult {
                value: cur,
                change,
                nodes,
            });
        }
        older = prev;
        prev = cur;
    }
}

/// Quasi-Monte Carlo mean of `f` over `[0,1)^dim`, doubling the point count
/// from 4096 until successive means agree.
pub fn average_qmc(
    f: impl Fn(&[f64]) -> Complex64,
    dim: usize,
    spec: &QuadratureSpec,
) -> Result<QuadResult> {
    spec.validate()?;
    let stream = QuasiRandom::new(dim, spec.seed);
    let mut point = vec![0.0; dim];
    let mut sum = Complex64::new(0.0, 0.0);
    let mut n = 0usize;
    let mut target = 4096usize.min(spec.max_nodes);
    let mut prev: Option<Complex64> = None;
    loop {
        while n < target {
            stream.point_into(n as u64, &mut point);
            sum += f(&point);
            n += 1;
        }
        let cur = sum / n as f64;
        if let Some(p) = prev {
            let change = (cur - p).norm();
            if change < spec.target_rel_err * (1.0 + cur.norm()) {
                return Ok(QuadResult {
                    value: cur,
                    change,
                    nodes: n,
                });
            }
            if 2 * n > spec.max_nodes {
                return Err(Error::QuadratureNonConvergence {
                    nodes: n,
                    previous: p,
                    last: cur,
                });
            }
        }
        prev = Some(cur);
        target = 2 * n;
    }
}
