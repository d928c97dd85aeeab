//! Closed-form decay exponents for twisted and untwisted horospherical averages.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Bound quoted for the horocycle instance with `Re(s₁) = 1`: `6³/(5⁶·7)`.
pub const STATED_HOROCYCLE_GAMMA: f64 = 216.0 / (15_625.0 * 7.0);

fn positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "{name} must be positive, got {v}"
        )))
    }
}

/// `2s / (dim G + 2)`.
pub fn gamma_equi_uniform(s: f64, dim_g: usize) -> Result<f64> {
    positive("s", s)?;
    Ok(2.0 * s / (dim_g as f64 + 2.0))
}

/// Upper bound `2s·d_H / (k·dim G)` for the diophantine exponent.
pub fn default_d(s: f64, d_h: f64, k: usize, dim_g: usize) -> Result<f64> {
    positive("s", s)?;
    positive("d_H", d_h)?;
    if k == 0 || dim_g == 0 {
        return Err(Error::InvalidParameter(
            "k and dim G must be positive".into(),
        ));
    }
    Ok(2.0 * s * d_h / (k as f64 * dim_g as f64))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RateParams {
    /// Equidistribution exponent of the untwisted averages.
    pub gamma_equi: f64,
    /// Decay exponent of matrix coefficients along `H`.
    pub s: f64,
    /// Volume growth exponent of the Følner balls.
    pub d_h: f64,
    pub dim_h: usize,
    /// Dimension of the nilpotent group carrying the character.
    pub dim_n: usize,
    /// Largest Sobolev order in play.
    #[serde(rename = "M")]
    pub m: f64,
    #[serde(default = "default_dim_g")]
    pub dim_g: usize,
}

fn default_dim_g() -> usize {
    3
}

impl RateParams {
    /// The horocycle instance: `d_H = dim H = 1`, `dim N = 3`, `M = 12`,
    /// `s = 1` and `γ_equi = 2s/(dim G + 2)` with `dim G = 3`.
    pub fn horocycle_instance() -> Self {
        RateParams {
            gamma_equi: 0.4,
            s: 1.0,
            d_h: 1.0,
            dim_h: 1,
            dim_n: 3,
            m: 12.0,
            dim_g: 3,
        }
    }

    pub fn validate(&self) -> Result<()> {
        positive("gamma_equi", self.gamma_equi)?;
        positive("s", self.s)?;
        positive("d_H", self.d_h)?;
        if self.dim_h == 0 {
            return Err(Error::InvalidParameter("dim H must be positive".into()));
        }
        if !(self.m >= 1.0) || !self.m.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "M must be ≥ 1, got {}",
                self.m
            )));
        }
        Ok(())
    }

    /// `min{γ_equi, s/(d_H·(2d_H + 3s))}`.
    pub fn base_rate(&self) -> f64 {
        let spectral = self.s / (self.d_h * (2.0 * self.d_h + 3.0 * self.s));
        self.gamma_equi.min(spectral)
    }

    /// Factor lost per degree of the character: `(1/(2·dim H + 2))·(2M/(2M + 1))`.
    pub fn step_factor(&self) -> f64 {
        (1.0 / (2.0 * self.dim_h as f64 + 2.0)) * (2.0 * self.m / (2.0 * self.m + 1.0))
    }
}

/// The exponent for characters of degree `≤ dim N`.
pub fn gamma_disjointness(p: &RateParams) -> Result<f64> {
    Ok(*gamma_chain(p)?.last().expect("chain is never empty"))
}

/// `γ_0, …, γ_{dim N}`.
pub fn gamma_chain(p: &RateParams) -> Result<Vec<f64>> {
    p.validate()?;
    let step = p.step_factor();
    // repeated multiplication keeps every entry bit-reproducible
    let mut chain = vec![p.base_rate()];
    for _ in 0..p.dim_n {
        chain.push(chain.last().unwrap() * step);
    }
    Ok(chain)
}

/// `(6³/5³)·Re(s₁)/(2 + 3·Re(s₁))`.
pub fn horocycle_closed_form_gamma(re_s1: f64) -> Result<f64> {
    if !(re_s1 > 0.0 && re_s1 <= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "Re(s₁) must lie in (0, 1], got {re_s1}"
        )));
    }
    Ok(216.0 / 125.0 * re_s1 / (2.0 + 3.0 * re_s1))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RatesReport {
    pub inputs: RateParams,
    pub re_s1: f64,
    pub gamma_def_value: f64,
    pub gamma_chain: Vec<f64>,
    pub closed_form_value: f64,
    pub stated_value: f64,
    pub discrepancy_flag: bool,
}

/// The three available values for the horocycle exponent side by side. The
/// general formula is the reference; the flag records any disagreement.
pub fn rates_report(p: &RateParams, re_s1: f64) -> Result<RatesReport> {
    let gamma_def_value = gamma_disjointness(p)?;
    let closed_form_value = horocycle_closed_form_gamma(re_s1)?;
    let close = |a: f64, b: f64| (a - b).abs() <= 1e-12 * a.abs().max(b.abs());
    let discrepancy_flag = !(close(gamma_def_value, closed_form_value)
        && close(gamma_def_value, STATED_HOROCYCLE_GAMMA));
    Ok(RatesReport {
        inputs: p.clone(),
        re_s1,
        gamma_def_value,
        gamma_chain: gamma_chain(p)?,
        closed_form_value,
        stated_value: STATED_HOROCYCLE_GAMMA,
        discrepancy_flag,
    })
}
