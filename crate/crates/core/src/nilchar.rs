//! The Heisenberg nilcharacter `F(x, y, z) = e(y − x⌊z⌋)` on `N/N(Z)`, its
//! samplings along the orbit `t ↦ exp(√α·t·(E12 + E23))·y₀`, and discrete
//! differentiation of sampled sequences.

use std::f64::consts::PI;
use std::fmt::Write as _;

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::homspace::HeisenbergPoint;
use crate::qmc::rng_from_seed;

/// Header line of every CSV artifact.
pub const CSV_VERSION_LINE: &str = "# horolab-csv-v1";

/// `e(θ) = exp(2πiθ)`, reducing `θ` mod 1 first.
pub fn e(phase: f64) -> Complex64 {
    let r = phase.rem_euclid(1.0);
    Complex64::from_polar(1.0, 2.0 * PI * r)
}

pub fn heis_char_phase(p: &HeisenbergPoint) -> f64 {
    (p.y - p.x * p.z.floor()).rem_euclid(1.0)
}

/// `F(p) = e(y − x⌊z⌋)`. The value only depends on the coset `p·N(Z)`.
pub fn heis_char_eval(p: &HeisenbergPoint) -> Complex64 {
    e(heis_char_phase(p))
}

/// Bracket character sampled along an `H`-orbit in the Heisenberg nilmanifold.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NilCharacter {
    pub alpha: f64,
    pub origin: HeisenbergPoint,
}

impl NilCharacter {
    /// Dimension of the ambient nilpotent group, the degree bound of the
    /// sequences it produces.
    pub const DEGREE: u32 = 3;

    pub fn new(alpha: f64, origin: HeisenbergPoint) -> Result<Self> {
        if !(alpha >= 0.0) || !alpha.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "α must be ≥ 0, got {alpha}"
            )));
        }
        Ok(NilCharacter { alpha, origin })
    }

    pub fn at_identity(alpha: f64) -> Result<Self> {
        NilCharacter::new(alpha, HeisenbergPoint::IDENTITY)
    }

    pub fn orbit_point(&self, t: f64) -> HeisenbergPoint {
        let s = self.alpha.sqrt() * t;
        HeisenbergPoint::new(s, s * s / 2.0, s).mul(&self.origin)
    }

    /// Phase of `F(orbit(t))` mod 1, computed without forming `s²/2` for
    /// large `s = √α·t`.
    pub fn phase(&self, t: f64) -> f64 {
        let (x0, y0, z0) = (self.origin.x, self.origin.y, self.origin.z);
        let s = self.alpha.sqrt() * t;
        // orbit point (s + x0, s²/2 + y0 + s·z0, s + z0); write s + z0 = m + g
        let m = (s + z0).floor();
        let h = s - m;
        let half_m2 = if (m.rem_euclid(2.0)) == 0.0 { 0.0 } else { 0.5 };
        let cross = (m * (z0 - x0).rem_euclid(1.0)).rem_euclid(1.0);
        (-half_m2 + h * h / 2.0 + y0 + h * z0 + cross).rem_euclid(1.0)
    }

    pub fn eval(&self, t: f64) -> Complex64 {
        e(self.phase(t))
    }

    /// Times in `[lo, hi]` where `⌊√α·t + z0⌋` jumps.
    pub fn kinks(&self, lo: f64, hi: f64) -> Vec<f64> {
        let ra = self.alpha.sqrt();
        if ra == 0.0 {
            return Vec::new();
        }
        let z0 = self.origin.z;
        let first = (ra * lo + z0).ceil() as i64;
        let last = (ra * hi + z0).floor() as i64;
        (first..=last).map(|m| (m as f64 - z0) / ra).collect()
    }
}

/// A sequence `t ↦ value` that can be evaluated anywhere; used both as the
/// twist of Følner averages and as the source behind sampled sequences.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Twist {
    Trivial,
    Character(NilCharacter),
    /// `e(αt²/2)`.
    Quadratic {
        alpha: f64,
    },
    /// `e(βt)`.
    Linear {
        beta: f64,
    },
    /// `t ↦ inner(t + shift)·conj(inner(t))`.
    Differenced {
        inner: Box<Twist>,
        shift: f64,
    },
}

impl Twist {
    pub fn eval(&self, t: f64) -> Complex64 {
        match self {
            Twist::Trivial => Complex64::new(1.0, 0.0),
            Twist::Character(c) => c.eval(t),
            Twist::Quadratic { alpha } => e(alpha * t * t / 2.0),
            Twist::Linear { beta } => e(beta * t),
            Twist::Differenced { inner, shift } => inner.eval(t + shift) * inner.eval(t).conj(),
        }
    }

    pub fn is_trivial(&self) -> bool {
        matches!(self, Twist::Trivial)
    }

    /// Points of `[lo, hi]` where the sequence may fail to be smooth.
    pub fn breakpoints(&self, lo: f64, hi: f64) -> Vec<f64> {
        match self {
            Twist::Character(c) => c.kinks(lo, hi),
            Twist::Differenced { inner, shift } => {
                let mut v = inner.breakpoints(lo, hi);
                v.extend(
                    inner
                        .breakpoints(lo + shift, hi + shift)
                        .into_iter()
                        .map(|t| t - shift),
                );
                v.sort_by(f64::total_cmp);
                v
            }
            _ => Vec::new(),
        }
    }

    pub fn differenced(&self, shift: f64) -> Twist {
        Twist::Differenced {
            inner: Box::new(self.clone()),
            shift,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampledSequence {
    pub t_grid: Vec<f64>,
    pub values: Vec<Complex64>,
    pub origin: HeisenbergPoint,
    pub source: Twist,
}

impl SampledSequence {
    pub fn sample(source: Twist, t_grid: Vec<f64>) -> Self {
        let values = t_grid.iter().map(|t| source.eval(*t)).collect();
        let origin = match &source {
            Twist::Character(c) => c.origin,
            _ => HeisenbergPoint::IDENTITY,
        };
        SampledSequence {
            t_grid,
            values,
            origin,
            source,
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn mean(&self) -> Complex64 {
        if self.values.is_empty() {
            return Complex64::new(0.0, 0.0);
        }
        self.values.iter().sum::<Complex64>() / self.values.len() as f64
    }

    pub fn max_unimodularity_defect(&self) -> f64 {
        self.values
            .iter()
            .map(|v| (v.norm() - 1.0).abs())
            .fold(0.0, f64::max)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        writeln!(out, "{CSV_VERSION_LINE}").unwrap();
        writeln!(out, "t,re,im").unwrap();
        for (t, v) in self.t_grid.iter().zip(&self.values) {
            writeln!(out, "{t},{},{}", v.re, v.im).unwrap();
        }
        out
    }
}

/// `∆_k s (t) = s(t + k)·conj(s(t))` on the grid of `s`. Values at `t + k`
/// are resampled from the source.
pub fn differentiate_sequence(s: &SampledSequence, k: f64) -> SampledSequence {
    let source = s.source.differenced(k);
    let values = s
        .t_grid
        .iter()
        .zip(&s.values)
        .map(|(t, v)| s.source.eval(t + k) * v.conj())
        .collect();
    SampledSequence {
        t_grid: s.t_grid.clone(),
        values,
        origin: s.origin,
        source,
    }
}

/// `orbit_character(α, grid, y₀)`: the bracket character along the orbit.
pub fn orbit_character(
    alpha: f64,
    t_grid: Vec<f64>,
    origin: HeisenbergPoint,
) -> Result<SampledSequence> {
    Ok(SampledSequence::sample(
        Twist::Character(NilCharacter::new(alpha, origin)?),
        t_grid,
    ))
}

pub fn uniform_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    let step = (hi - lo) / (n - 1) as f64;
    (0..n).map(|i| lo + i as f64 * step).collect()
}

/// Best affine phase `t ↦ c + b·t` for a unimodular sequence on a uniform
/// grid; returns `(b, c, max residual in turns)`.
pub fn affine_phase_fit(s: &SampledSequence) -> (f64, f64, f64) {
    if s.len() < 2 {
        return (0.0, 0.0, 0.0);
    }
    let step = s.t_grid[1] - s.t_grid[0];
    let ratio: Complex64 = s.values.windows(2).map(|w| w[1] * w[0].conj()).sum();
    let b = ratio.arg() / (2.0 * PI * step);
    let detrended: Vec<Complex64> = s
        .t_grid
        .iter()
        .zip(&s.values)
        .map(|(t, v)| v * e(-b * t))
        .collect();
    let c = detrended.iter().sum::<Complex64>().arg() / (2.0 * PI);
    let residual = detrended
        .iter()
        .map(|v| (v * e(-c)).arg().abs() / (2.0 * PI))
        .fold(0.0, f64::max);
    (b, c, residual)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DegreeProbe {
    pub shifts: Vec<f64>,
    /// `|grid mean|` after 0, 1, …, `max_order` differentiations.
    pub mean_magnitudes: Vec<f64>,
    /// Max deviation (in turns) of the last sequence from its best affine phase.
    pub affine_residual: f64,
}

/// Differentiate `max_order` times with shifts drawn uniformly from
/// `[0.1, 1]`, recording the mean magnitude after each step.
pub fn degree_probe(s: &SampledSequence, max_order: usize, seed: u64) -> Result<DegreeProbe> {
    if max_order > 3 {
        return Err(Error::InvalidParameter(format!(
            "max_order must be ≤ 3, got {max_order}"
        )));
    }
    let mut rng = rng_from_seed(seed);
    let mut cur = s.clone();
    let mut shifts = Vec::with_capacity(max_order);
    let mut mean_magnitudes = vec![cur.mean().norm()];
    for _ in 0..max_order {
        let k = rng.gen_range(0.1..1.0);
        shifts.push(k);
        cur = differentiate_sequence(&cur, k);
        mean_magnitudes.push(cur.mean().norm());
    }
    Ok(DegreeProbe {
        shifts,
        mean_magnitudes,
        affine_residual: affine_phase_fit(&cur).2,
    })
}
