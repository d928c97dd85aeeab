//! Følner averages along horocycles in `SL2(R)/SL2(Z)`, optionally twisted by
//! a sequence, plus the estimators built on them: decay fits, the Van der
//! Corput check, matrix coefficients, the mean ergodic and perturbation
//! checks, and discrete sums.

use std::cell::RefCell;

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::diophantine::certified_alpha;
use crate::error::{Error, Result};
use crate::group::{nil_exp, split_by_weights, DiagonalFlow, FolnerBall, SquareMatrix};
use crate::homspace::{haar_sample_modular, inj_rad_lower_bound, ModularPoint, TestFunction};
use crate::nilchar::Twist;
use crate::qmc::rng_from_seed;
use crate::quadrature::{average_1d, average_qmc, QuadratureSpec};

/// Grid spacing of the Van der Corput sums.
pub const VDC_GRID_STEP: f64 = 1.0 / 16.0;
/// Constant of the perturbation bound `|difference| ≤ C·δ` for the default
/// observable and base point: about twice the largest ratio (1.87) seen over
/// 300 random traceless directions (seed 1234), `R ∈ [4, 1024]` and
/// `δ/inj ∈ {10⁻³/R, 10⁻²/R, 0.09}`.
pub const PERTURBATION_C_F: f64 = 4.0;
/// Constant of the mean ergodic bound `C·vol^{2δ − 2s}`: the largest
/// `vol·mean|avg|²` over `R ∈ {4, 16, 64}` (300 Haar points, seed 3) for the
/// default observable, rounded up. Calibrated with `s = 1/2`.
pub const MEAN_ERGODIC_C_F: f64 = 0.06;

/// `[[1, 0], [√2, 1]]`, a non-periodic badly approximable base point.
pub fn default_base_point() -> SquareMatrix {
    SquareMatrix::from_2x2([[1.0, 0.0], [2f64.sqrt(), 1.0]])
}

/// `u_t = [[1, t], [0, 1]]`.
pub fn horocycle(t: f64) -> SquareMatrix {
    SquareMatrix::from_2x2([[1.0, t], [0.0, 1.0]])
}

/// Real observable on `X = SL2(R)/SL2(Z)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Observable {
    Test(TestFunction),
    Constant { value: f64 },
}

impl Observable {
    pub fn zero() -> Self {
        Observable::Constant { value: 0.0 }
    }

    /// Value at `gΓ`.
    pub fn at(&self, g: &SquareMatrix) -> Result<f64> {
        match self {
            Observable::Test(f) => f.eval_rep(g),
            Observable::Constant { value } => Ok(*value),
        }
    }

    /// `f(u_t·x)`.
    pub fn along(&self, x: &SquareMatrix, t: f64) -> Result<f64> {
        match self {
            Observable::Constant { value } => Ok(*value),
            _ => self.at(&(horocycle(t) * *x)),
        }
    }

    /// Haar integral, exact for both kinds.
    pub fn haar_mean(&self) -> f64 {
        match self {
            Observable::Test(f) => f.haar_mean_of_raw() - f.mean_offset,
            Observable::Constant { value } => *value,
        }
    }

    pub fn is_mean_zero(&self) -> bool {
        self.haar_mean().abs() <= 1e-12
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Observable::Test(f) => f.validate(),
            Observable::Constant { value } if !value.is_finite() => {
                Err(Error::InvalidParameter("constant must be finite".into()))
            }
            _ => Ok(()),
        }
    }
}

/// Collects the first error raised inside an infallible closure.
struct ErrorSlot(RefCell<Option<Error>>);

impl ErrorSlot {
    fn new() -> Self {
        ErrorSlot(RefCell::new(None))
    }

    fn take<T>(&self, r: Result<T>, fallback: T) -> T {
        match r {
            Ok(v) => v,
            Err(e) => {
                self.0.borrow_mut().get_or_insert(e);
                fallback
            }
        }
    }

    fn check(self) -> Result<()> {
        match self.0.into_inner() {
            Some(e) => Err(e),
            None => Ok(()),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AverageResult {
    pub value: Complex64,
    pub nodes: usize,
    pub change: f64,
}

/// `(1/2R) ∫_{−R}^{R} ψ(t)·f(u_t·x) dt`.
pub fn twisted_average(
    f: &Observable,
    twist: &Twist,
    x: &ModularPoint,
    r: f64,
    q: &QuadratureSpec,
) -> Result<AverageResult> {
    if !(r >= 1.0) || !r.is_finite() {
        return Err(Error::InvalidParameter(format!("R must be ≥ 1, got {r}")));
    }
    f.validate()?;
    if let Observable::Constant { value } = f {
        if twist.is_trivial() {
            return Ok(AverageResult {
                value: Complex64::new(*value, 0.0),
                nodes: 0,
                change: 0.0,
            });
        }
    }
    let rep = *x.rep();
    let slot = ErrorSlot::new();
    let res = average_1d(
        |t| twist.eval(t) * slot.take(f.along(&rep, t), f64::NAN),
        -r,
        r,
        &twist.breakpoints(-r, r),
        q,
    );
    slot.check()?;
    let res = res?;
    Ok(AverageResult {
        value: res.value,
        nodes: res.nodes,
        change: res.change,
    })
}

/// `∫_{B_R} F(h) dh / vol(B_R)` over a Følner ball of a unipotent subgroup,
/// by quasi-Monte Carlo in Lie coordinates.
pub fn folner_average(
    ball: &FolnerBall,
    f: impl Fn(&SquareMatrix) -> Complex64,
    q: &QuadratureSpec,
) -> Result<AverageResult> {
    let widths = ball.half_widths();
    let sub = ball.subgroup();
    let res = average_qmc(
        |u| {
            let point: Vec<f64> = u
                .iter()
                .zip(&widths)
                .map(|(v, w)| (2.0 * v - 1.0) * w)
                .collect();
            f(&nil_exp(&sub.from_coords(&point)))
        },
        widths.len(),
        q,
    )?;
    Ok(AverageResult {
        value: res.value,
        nodes: res.nodes,
        change: res.change,
    })
}

pub fn geometric_grid(r_min: f64, r_max: f64, ratio: f64) -> Result<Vec<f64>> {
    if !(r_min > 0.0) || !(r_max >= r_min) || !(ratio > 1.0) {
        return Err(Error::InvalidParameter(format!(
            "invalid grid R_min = {r_min}, R_max = {r_max}, ratio = {ratio}"
        )));
    }
    let mut out = Vec::new();
    let mut r = r_min;
    while r <= r_max * (1.0 + 1e-12) {
        out.push(r);
        r *= ratio;
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecayReport {
    #[serde(rename = "R_grid")]
    pub r_grid: Vec<f64>,
    pub volumes: Vec<f64>,
    pub magnitudes: Vec<f64>,
    pub fitted_eta: f64,
    pub std_err: f64,
    /// Indices of grid points left out because the average vanished.
    pub excluded: Vec<usize>,
}

impl DecayReport {
    /// `η̂ / σ`.
    pub fn significance(&self) -> f64 {
        if self.std_err == 0.0 {
            if self.fitted_eta == 0.0 {
                0.0
            } else {
                self.fitted_eta.signum() * f64::INFINITY
            }
        } else {
            self.fitted_eta / self.std_err
        }
    }
}

/// Least-squares slope `b` of `y = a + b·x` and its standard error.
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> (f64, f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ssr: f64 = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| (y - intercept - slope * x).powi(2))
        .sum();
    let se = if xs.len() > 2 {
        (ssr / (n - 2.0) / sxx).sqrt()
    } else {
        f64::INFINITY
    };
    (slope, intercept, se)
}

/// Fit `|avg| ≈ C·vol^{−η}`.
pub fn decay_fit(r_grid: &[f64], volumes: &[f64], magnitudes: &[f64]) -> Result<DecayReport> {
    if r_grid.len() != volumes.len() || r_grid.len() != magnitudes.len() {
        return Err(Error::DimensionMismatch {
            expected: r_grid.len(),
            got: magnitudes.len().min(volumes.len()),
        });
    }
    if r_grid.len() < 4 {
        return Err(Error::Precondition(format!(
            "decay fit needs at least 4 grid points, got {}",
            r_grid.len()
        )));
    }
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    let mut excluded = Vec::new();
    for (i, (v, m)) in volumes.iter().zip(magnitudes).enumerate() {
        if *m == 0.0 {
            excluded.push(i);
        } else {
            xs.push(v.ln());
            ys.push(m.ln());
        }
    }
    if xs.len() < 3 {
        return Err(Error::Precondition(
            "fewer than 3 nonzero averages left to fit".into(),
        ));
    }
    let (slope, _, se) = linear_fit(&xs, &ys);
    Ok(DecayReport {
        r_grid: r_grid.to_vec(),
        volumes: volumes.to_vec(),
        magnitudes: magnitudes.to_vec(),
        fitted_eta: -slope,
        std_err: se,
        excluded,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecayScan {
    pub averages: Vec<Complex64>,
    pub report: DecayReport,
}

impl DecayScan {
    /// Rows `R, vol, re, im, abs` under the versioned header.
    pub fn to_csv(&self) -> String {
        use std::fmt::Write as _;
        let mut out = String::new();
        writeln!(out, "{}", crate::nilchar::CSV_VERSION_LINE).unwrap();
        writeln!(out, "R,vol,re,im,abs").unwrap();
        for ((r, v), a) in self
            .report
            .r_grid
            .iter()
            .zip(&self.report.volumes)
            .zip(&self.averages)
        {
            writeln!(out, "{r},{v},{},{},{}", a.re, a.im, a.norm()).unwrap();
        }
        out
    }
}

/// Averages over a grid of radii and their decay fit against `vol(B_R) = 2R`.
pub fn decay_scan(
    f: &Observable,
    twist: &Twist,
    x: &ModularPoint,
    r_grid: &[f64],
    q: &QuadratureSpec,
) -> Result<DecayScan> {
    let mut averages = Vec::with_capacity(r_grid.len());
    for &r in r_grid {
        averages.push(twisted_average(f, twist, x, r, q)?.value);
    }
    let volumes: Vec<f64> = r_grid.iter().map(|r| 2.0 * r).collect();
    let magnitudes: Vec<f64> = averages.iter().map(|a| a.norm()).collect();
    let report = decay_fit(r_grid, &volumes, &magnitudes)?;
    Ok(DecayScan { averages, report })
}

/// Discrete sums along the grid, fitted against the lattice point count.
pub fn discrete_decay_scan(
    f: &Observable,
    twist: &Twist,
    x: &ModularPoint,
    r_grid: &[f64],
) -> Result<DecayScan> {
    let mut averages = Vec::with_capacity(r_grid.len());
    let mut counts = Vec::with_capacity(r_grid.len());
    for &r in r_grid {
        let d = discrete_average(f, twist, x, r)?;
        averages.push(d.value);
        counts.push(d.count as f64);
    }
    let magnitudes: Vec<f64> = averages.iter().map(|a| a.norm()).collect();
    let report = decay_fit(r_grid, &counts, &magnitudes)?;
    Ok(DecayScan { averages, report })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VdcReport {
    #[serde(rename = "A")]
    pub a: f64,
    /// `|average|` from adaptive quadrature, for comparison with `A`.
    pub a_quadrature: f64,
    #[serde(rename = "D")]
    pub d: f64,
    pub beta: f64,
    pub sup_norm: f64,
    pub bound: f64,
    pub tol: f64,
    pub holds: bool,
    pub shifts: Vec<f64>,
    pub grid_step: f64,
}

/// Van der Corput check `A ≤ √D + 2‖f‖_∞·β` on `F = [−R, R]`, `B ⊂ [−r, r]`.
///
/// `Φ(t) = ψ(t)·f(u_t x)` is sampled on a grid of step about
/// [`VDC_GRID_STEP`] aligned with `±R`; `n_b` shifts are drawn (seeded) from
/// the grid points of `[−r, r]`. With the grid counting measure on `F` the
/// inequality holds exactly, so only rounding is tolerated:
/// `tol = 10·target_rel_err·‖f‖_∞`.
#[allow(clippy::too_many_arguments)]
pub fn vdc_check(
    f: &Observable,
    twist: &Twist,
    x: &ModularPoint,
    big_r: f64,
    r: f64,
    q: &QuadratureSpec,
    n_b: usize,
    seed: u64,
) -> Result<VdcReport> {
    if !(r > 0.0 && r < big_r) {
        return Err(Error::Precondition(format!(
            "need 0 < r < R, got r = {r}, R = {big_r}"
        )));
    }
    if n_b == 0 {
        return Err(Error::InvalidParameter("n_b must be positive".into()));
    }
    let j = (big_r / VDC_GRID_STEP).ceil() as i64;
    let h = big_r / j as f64;
    let k = (r / h).floor().max(1.0) as i64;
    let mut rng = rng_from_seed(seed);
    let shifts_idx: Vec<i64> = (0..n_b).map(|_| rng.gen_range(-k..=k)).collect();
    let total = j + k;
    let rep = *x.rep();
    let mut phi = Vec::with_capacity((2 * total + 1) as usize);
    for i in -total..=total {
        let t = i as f64 * h;
        phi.push(twist.eval(t) * f.along(&rep, t)?);
    }
    let at = |i: i64| phi[(i + total) as usize];
    let n_f = (2 * j + 1) as f64;
    let sum: Complex64 = (-j..=j).map(at).sum();
    let a = sum.norm() / n_f;
    let sup_norm = phi.iter().map(|v| v.norm()).fold(0.0, f64::max);
    // |γ(b2, b1)| = |γ(b1, b2)|, so sum the upper triangle and mirror it
    let mut off = 0.0;
    let mut diag = 0.0;
    for (p, &b1) in shifts_idx.iter().enumerate() {
        for (p2, &b2) in shifts_idx.iter().enumerate().skip(p) {
            let g: Complex64 = (-j..=j).map(|i| at(i + b1) * at(i + b2).conj()).sum();
            if p2 == p {
                diag += g.norm() / n_f;
            } else {
                off += g.norm() / n_f;
            }
        }
    }
    let d = (2.0 * off + diag) / (n_b * n_b) as f64;
    let max_shift = shifts_idx.iter().map(|b| b.abs()).max().unwrap_or(0);
    let beta = 2.0 * max_shift as f64 / n_f;
    let bound = d.sqrt() + 2.0 * sup_norm * beta;
    let tol = 10.0 * q.target_rel_err * sup_norm;
    let a_quadrature = twisted_average(f, twist, x, big_r, q)?.value.norm();
    Ok(VdcReport {
        a,
        a_quadrature,
        d,
        beta,
        sup_norm,
        bound,
        tol,
        holds: a <= bound + tol,
        shifts: shifts_idx.iter().map(|b| *b as f64 * h).collect(),
        grid_step: h,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VdcSuite {
    pub reports: Vec<VdcReport>,
    pub violations: usize,
}

/// `n_configs` seeded random configurations: incomplete Eisenstein profiles,
/// bracket characters with `α ∈ [0.5, 3]`, base points `a_s·v·Γ` with lower
/// unipotent `v`, `R = 2^U` for `U` uniform in `[log₂ R_min, log₂ R_max]` and
/// `r ∈ [R/32, R/4]`.
pub fn vdc_suite(
    n_configs: usize,
    r_min: f64,
    r_max: f64,
    n_b: usize,
    q: &QuadratureSpec,
    seed: u64,
) -> Result<VdcSuite> {
    if !(r_min >= 1.0 && r_max >= r_min) {
        return Err(Error::InvalidParameter(format!(
            "invalid radius range [{r_min}, {r_max}]"
        )));
    }
    let mut rng = rng_from_seed(seed);
    let mut reports = Vec::with_capacity(n_configs);
    for i in 0..n_configs {
        let lo = rng.gen_range(1.1..2.0);
        let width = rng.gen_range(0.5..2.0);
        let f = Observable::Test(TestFunction::incomplete_eisenstein(
            crate::homspace::BumpProfile::new(lo, lo + width, 1.0)?,
        )?);
        let alpha = rng.gen_range(0.5..3.0);
        let twist = Twist::Character(crate::nilchar::NilCharacter::at_identity(alpha)?);
        let s = rng.gen_range(-1.0..1.0);
        let v = rng.gen_range(0.0..1.0);
        let x = ModularPoint::new(DiagonalFlow::sl2().at(s) * horocycle(v).transpose())?;
        let big_r = 2f64.powf(rng.gen_range(r_min.log2()..=r_max.log2()));
        let r = big_r * rng.gen_range(1.0 / 32.0..0.25);
        reports.push(vdc_check(
            &f,
            &twist,
            &x,
            big_r,
            r,
            q,
            n_b,
            seed.wrapping_add(i as u64),
        )?);
    }
    let violations = reports.iter().filter(|r| !r.holds).count();
    Ok(VdcSuite {
        reports,
        violations,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MatrixCoefficientEstimate {
    pub value: Complex64,
    pub n_samples: usize,
    pub std_err: f64,
    pub low_signal: bool,
}

/// Monte Carlo `ρ_{f1,f2}(g) = ∫ f1(g·x)·f2(x) dμ(x)` over Haar samples.
pub fn matrix_coefficient(
    f1: &Observable,
    f2: &Observable,
    g: &SquareMatrix,
    n: usize,
    seed: u64,
) -> Result<MatrixCoefficientEstimate> {
    let points = haar_sample_modular(n, seed);
    matrix_coefficient_on(f1, f2, g, &points)
}

fn matrix_coefficient_on(
    f1: &Observable,
    f2: &Observable,
    g: &SquareMatrix,
    points: &[ModularPoint],
) -> Result<MatrixCoefficientEstimate> {
    for f in [f1, f2] {
        f.validate()?;
        if !f.is_mean_zero() {
            return Err(Error::Precondition(format!(
                "observable has nonvanishing integral {}",
                f.haar_mean()
            )));
        }
    }
    if points.len() < 2 {
        return Err(Error::InvalidParameter("need at least 2 samples".into()));
    }
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    for p in points {
        let v = f1.at(&(*g * *p.rep()))? * f2.at(p.rep())?;
        sum += v;
        sum_sq += v * v;
    }
    let n = points.len() as f64;
    let mean = sum / n;
    let var = ((sum_sq / n - mean * mean) * n / (n - 1.0)).max(0.0);
    let std_err = (var / n).sqrt();
    Ok(MatrixCoefficientEstimate {
        value: Complex64::new(mean, 0.0),
        n_samples: points.len(),
        std_err,
        low_signal: std_err > mean.abs(),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoefficientDecay {
    pub t_grid: Vec<f64>,
    pub norms: Vec<f64>,
    pub estimates: Vec<MatrixCoefficientEstimate>,
    pub s_hat: f64,
    pub std_err: f64,
    /// Indices left out of the fit as low-signal.
    pub excluded: Vec<usize>,
}

/// Fit `|ρ_{f,f}(a_t)| ≈ C·‖a_t‖^{−s}` with `‖·‖` the operator norm; one
/// common Haar sample is used for every `t`.
pub fn coefficient_decay_fit(
    f: &Observable,
    flow: &DiagonalFlow,
    t_grid: &[f64],
    n: usize,
    seed: u64,
) -> Result<CoefficientDecay> {
    if flow.dim() != 2 {
        return Err(Error::UnsupportedDimension(flow.dim()));
    }
    let points = haar_sample_modular(n, seed);
    let mut estimates = Vec::with_capacity(t_grid.len());
    let mut norms = Vec::with_capacity(t_grid.len());
    for &t in t_grid {
        let g = flow.at(t);
        norms.push(g.op_norm_2());
        estimates.push(matrix_coefficient_on(f, f, &g, &points)?);
    }
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    let mut excluded = Vec::new();
    for (i, (nrm, e)) in norms.iter().zip(&estimates).enumerate() {
        if e.low_signal || e.value.norm() == 0.0 {
            excluded.push(i);
        } else {
            xs.push(nrm.ln());
            ys.push(e.value.norm().ln());
        }
    }
    if xs.len() < 3 {
        return Err(Error::LowSignal(
            "fewer than 3 matrix coefficients above the noise".into(),
        ));
    }
    let (slope, _, se) = linear_fit(&xs, &ys);
    Ok(CoefficientDecay {
        t_grid: t_grid.to_vec(),
        norms,
        estimates,
        s_hat: -slope,
        std_err: se,
        excluded,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeanErgodicReport {
    #[serde(rename = "R")]
    pub r: f64,
    pub delta: f64,
    pub s_hat: f64,
    pub volume: f64,
    pub threshold: f64,
    pub fraction: f64,
    pub mean_square: f64,
    /// `vol^{2δ}·mean |avg|²`, which dominates the fraction (Chebyshev).
    pub chebyshev_bound: f64,
    pub bound: f64,
}

/// Fraction of Haar-random base points whose horocycle average exceeds
/// `vol^{−δ}` in modulus.
pub fn mean_ergodic_check(
    f: &Observable,
    r: f64,
    delta: f64,
    s_hat: f64,
    n_points: usize,
    seed: u64,
    q: &QuadratureSpec,
) -> Result<MeanErgodicReport> {
    if !(delta >= 0.0 && delta < s_hat) {
        return Err(Error::Precondition(format!(
            "need 0 ≤ δ < s, got δ = {delta}, s = {s_hat}"
        )));
    }
    if n_points == 0 {
        return Err(Error::InvalidParameter("n_points must be positive".into()));
    }
    let volume = 2.0 * r;
    let threshold = volume.powf(-delta);
    let mut above = 0usize;
    let mut mean_square = 0.0;
    for p in haar_sample_modular(n_points, seed) {
        let a = twisted_average(f, &Twist::Trivial, &p, r, q)?.value.norm();
        if a >= threshold {
            above += 1;
        }
        mean_square += a * a;
    }
    mean_square /= n_points as f64;
    Ok(MeanErgodicReport {
        r,
        delta,
        s_hat,
        volume,
        threshold,
        fraction: above as f64 / n_points as f64,
        mean_square,
        chebyshev_bound: volume.powf(2.0 * delta) * mean_square,
        bound: MEAN_ERGODIC_C_F * volume.powf(2.0 * delta - 2.0 * s_hat),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PerturbationReport {
    #[serde(rename = "R")]
    pub r: f64,
    pub delta: f64,
    pub injectivity_bound: f64,
    pub difference: f64,
    pub bound: f64,
    pub holds: bool,
    /// `‖·‖_∞` of the contracted, neutral and expanded parts of the perturbation.
    pub split_norms: [f64; 3],
}

/// Compare the averages over `B_R` at `x` and at
/// `y = a_{log R}·exp(ε)·a_{−log R}·x`, where `δ = ‖ε‖_∞` must stay below a
/// tenth of the injectivity radius bound at `a_{−log R}·x`.
pub fn perturbation_check(
    x: &ModularPoint,
    perturbation: &SquareMatrix,
    r: f64,
    f: &Observable,
    q: &QuadratureSpec,
) -> Result<PerturbationReport> {
    if perturbation.dim() != 2 || perturbation.trace().abs() > 1e-12 {
        return Err(Error::InvalidParameter(
            "perturbation must be a traceless 2×2 matrix".into(),
        ));
    }
    if !(r >= 1.0) {
        return Err(Error::InvalidParameter(format!("R must be ≥ 1, got {r}")));
    }
    let flow = DiagonalFlow::sl2();
    let delta = perturbation.max_abs();
    let pushed = ModularPoint::new(flow.at(-r.ln()) * *x.rep())?;
    let alpha = certified_alpha(pushed.reduced(), 1)?.value;
    let eps = (1.0 / alpha).min(1.0);
    let inj = inj_rad_lower_bound(&pushed, eps, 2)?;
    if delta >= 0.1 * inj {
        return Err(Error::Precondition(format!(
            "δ = {delta} exceeds a tenth of the injectivity bound {inj}"
        )));
    }
    let split = split_by_weights(&flow, perturbation);
    let y_rep = flow.at(r.ln()) * exp_2x2(perturbation) * flow.at(-r.ln()) * *x.rep();
    let x_rep = *x.rep();
    let slot = ErrorSlot::new();
    let res = average_1d(
        |t| {
            let a = slot.take(f.along(&x_rep, t), f64::NAN);
            let b = slot.take(f.along(&y_rep, t), f64::NAN);
            Complex64::new(a - b, 0.0)
        },
        -r,
        r,
        &[],
        q,
    );
    slot.check()?;
    let difference = res?.value.norm();
    let bound = PERTURBATION_C_F * delta;
    Ok(PerturbationReport {
        r,
        delta,
        injectivity_bound: inj,
        difference,
        bound,
        holds: difference <= bound,
        split_norms: [
            split.minus.max_abs(),
            split.zero.max_abs(),
            split.plus.max_abs(),
        ],
    })
}

/// Matrix exponential of a traceless `2×2` matrix in closed form.
pub fn exp_2x2(m: &SquareMatrix) -> SquareMatrix {
    // m² = −det(m)·I for traceless m
    let q = -m.det();
    let (c, s) = if q > 0.0 {
        let r = q.sqrt();
        (r.cosh(), r.sinh() / r)
    } else if q < 0.0 {
        let r = (-q).sqrt();
        (r.cos(), r.sin() / r)
    } else {
        (1.0, 1.0)
    };
    SquareMatrix::identity(2).scale(c) + m.scale(s)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiscreteAverage {
    pub value: Complex64,
    pub count: usize,
    pub volume: f64,
}

impl DiscreteAverage {
    pub fn count_ratio(&self) -> f64 {
        self.count as f64 / self.volume
    }
}

/// `(1/#{Z ∩ [−R, R]}) Σ_{|n| ≤ R} ψ(n)·f(u_n·x)`.
pub fn discrete_average(
    f: &Observable,
    twist: &Twist,
    x: &ModularPoint,
    r: f64,
) -> Result<DiscreteAverage> {
    if !(r >= 2.0) || !r.is_finite() {
        return Err(Error::InvalidParameter(format!("R must be ≥ 2, got {r}")));
    }
    f.validate()?;
    let n = r.floor() as i64;
    let rep = *x.rep();
    let mut sum = Complex64::new(0.0, 0.0);
    for i in -n..=n {
        let t = i as f64;
        sum += twist.eval(t) * f.along(&rep, t)?;
    }
    let count = (2 * n + 1) as usize;
    Ok(DiscreteAverage {
        value: sum / count as f64,
        count,
        volume: 2.0 * r,
    })
}
