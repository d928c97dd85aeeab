//! Points of `X = SL2(R)/SL2(Z)` and `Y = N(R)/N(Z)` (Heisenberg nilmanifold).
//!
//! A point `x = gΓ` of `X` is tracked through its frame `w = g⁻¹`, whose
//! upper half plane image `z = w·i` transforms by `z(gγ) = γ⁻¹·z(g)` and is
//! therefore reducible to the standard fundamental domain. Left translation
//! `x ↦ hx` becomes `w ↦ w h⁻¹`; for the horocycle `u_t` this is
//! `z ↦ w·(i − t)`.

use std::f64::consts::PI;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::diophantine::{self, Membership};
use crate::error::{Error, Result};
use crate::group::{nil_exp, nil_log, NilAlgebraElement, SquareMatrix};
use crate::qmc::rng_from_seed;

/// Step cap for the fundamental-domain reduction.
pub const MAX_REDUCTION_STEPS: usize = 10_000;
/// Cusp truncation height for Haar sampling.
pub const HAAR_Y_MAX: f64 = 1.0e4;
/// Normalized Haar mass above `HAAR_Y_MAX`, excluded by the sampler.
pub const HAAR_TRUNCATED_MASS: f64 = 3.0 / (PI * HAAR_Y_MAX);
/// Constant `C` in `InjRad(x) ≥ C·ε^k` for `SL2(R)/SL2(Z)` with the Frobenius
/// distance below; calibrated on Haar samples (see tests).
pub const INJ_RAD_CONSTANT: f64 = 0.25;
/// Coefficient bound of the integer ball used by [`modular_distance`].
pub const DISTANCE_SEARCH_RADIUS: i64 = 5;

pub type IntMatrix2 = [[i64; 2]; 2];

const SQRT3_2: f64 = 0.866_025_403_784_438_6;

/// Iwasawa coordinates `w = n_x a_y k_θ` of a frame.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Iwasawa {
    pub x: f64,
    pub y: f64,
    pub theta: f64,
}

impl Iwasawa {
    pub fn of_frame(w: &SquareMatrix) -> Self {
        let (p, q, r, s) = (w.get(0, 0), w.get(0, 1), w.get(1, 0), w.get(1, 1));
        let n2 = r * r + s * s;
        Iwasawa {
            x: (p * r + q * s) / n2,
            y: w.det() / n2,
            theta: r.atan2(s),
        }
    }

    /// `n_x a_y k_θ` with `a_y = diag(√y, 1/√y)` and `k_θ` the rotation by θ.
    pub fn frame(&self) -> SquareMatrix {
        let sy = self.y.sqrt();
        let (sn, cs) = self.theta.sin_cos();
        let n = SquareMatrix::from_2x2([[1.0, self.x], [0.0, 1.0]]);
        let a = SquareMatrix::from_2x2([[sy, 0.0], [0.0, 1.0 / sy]]);
        let k = SquareMatrix::from_2x2([[cs, -sn], [sn, cs]]);
        n * a * k
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(into = "PointRecord", try_from = "PointRecord")]
pub struct ModularPoint {
    rep: SquareMatrix,
    reduced: SquareMatrix,
    gamma: IntMatrix2,
    iwasawa: Iwasawa,
}

/// Serialized form `{rep, reduced}`; the reduction is recomputed on load.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PointRecord {
    pub rep: SquareMatrix,
    pub reduced: SquareMatrix,
}

impl From<ModularPoint> for PointRecord {
    fn from(p: ModularPoint) -> Self {
        PointRecord {
            rep: p.rep,
            reduced: p.reduced,
        }
    }
}

impl TryFrom<PointRecord> for ModularPoint {
    type Error = Error;
    fn try_from(r: PointRecord) -> Result<Self> {
        ModularPoint::new(r.rep)
    }
}

impl ModularPoint {
    pub fn new(rep: SquareMatrix) -> Result<Self> {
        reduce_modular(&rep).map(|(p, _)| p)
    }

    pub fn rep(&self) -> &SquareMatrix {
        &self.rep
    }

    /// Canonical representative `rep·γ`.
    pub fn reduced(&self) -> &SquareMatrix {
        &self.reduced
    }

    /// The element `γ ∈ SL2(Z)` with `reduced = rep·γ`.
    pub fn gamma(&self) -> IntMatrix2 {
        self.gamma
    }

    /// Iwasawa coordinates of the reduced frame `reduced⁻¹`; `x + iy` lies in
    /// the standard fundamental domain.
    pub fn iwasawa(&self) -> Iwasawa {
        self.iwasawa
    }

    pub fn frame(&self) -> SquareMatrix {
        self.iwasawa.frame()
    }
}

fn int_to_matrix(m: &IntMatrix2) -> SquareMatrix {
    SquareMatrix::from_2x2([
        [m[0][0] as f64, m[0][1] as f64],
        [m[1][0] as f64, m[1][1] as f64],
    ])
}

fn int_mul(a: &IntMatrix2, b: &IntMatrix2) -> IntMatrix2 {
    let mut out = [[0i64; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            out[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
        }
    }
    out
}

fn int_inverse(m: &IntMatrix2) -> IntMatrix2 {
    [[m[1][1], -m[0][1]], [-m[1][0], m[0][0]]]
}

/// Reduce `gΓ` to the representative whose frame lies over the standard
/// fundamental domain `|Re z| ≤ 1/2, |z| ≥ 1`. Returns the point and the
/// `γ ∈ SL2(Z)` with `reduced = g·γ`.
pub fn reduce_modular(g: &SquareMatrix) -> Result<(ModularPoint, IntMatrix2)> {
    if g.dim() != 2 {
        return Err(Error::DimensionMismatch {
            expected: 2,
            got: g.dim(),
        });
    }
    if (g.det() - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidParameter(format!(
            "representative must have det 1, got {}",
            g.det()
        )));
    }
    let mut w = g.inverse()?;
    // delta accumulates the left action on the frame: w_reduced = delta · g⁻¹
    let mut delta: IntMatrix2 = [[1, 0], [0, 1]];
    let mut steps = 0;
    loop {
        steps += 1;
        if steps > MAX_REDUCTION_STEPS {
            return Err(Error::ReductionDiverged(MAX_REDUCTION_STEPS));
        }
        let iw = Iwasawa::of_frame(&w);
        let n = iw.x.round();
        if n != 0.0 {
            let t: IntMatrix2 = [[1, -(n as i64)], [0, 1]];
            w = int_to_matrix(&t) * w;
            delta = int_mul(&t, &delta);
        }
        let iw = Iwasawa::of_frame(&w);
        if iw.x * iw.x + iw.y * iw.y < 1.0 - 1e-14 {
            let s: IntMatrix2 = [[0, -1], [1, 0]];
            w = int_to_matrix(&s) * w;
            delta = int_mul(&s, &delta);
        } else {
            break;
        }
    }
    let gamma = int_inverse(&delta);
    let reduced = *g * int_to_matrix(&gamma);
    let point = ModularPoint {
        rep: *g,
        reduced,
        gamma,
        iwasawa: Iwasawa::of_frame(&w),
    };
    Ok((point, gamma))
}

/// Reduce a bare upper half plane point `z = x + iy` (no frame tracking).
pub fn reduce_upper_half_plane(mut x: f64, mut y: f64) -> Result<(f64, f64)> {
    for _ in 0..MAX_REDUCTION_STEPS {
        x -= x.round();
        let n2 = x * x + y * y;
        if n2 < 1.0 - 1e-14 {
            x = -x / n2;
            y /= n2;
        } else {
            return Ok((x, y));
        }
    }
    Err(Error::ReductionDiverged(MAX_REDUCTION_STEPS))
}

/// Left translation `x ↦ h·x`.
pub fn flow_point(x: &ModularPoint, h: &SquareMatrix) -> Result<ModularPoint> {
    ModularPoint::new(*h * *x.rep())
}

/// Heuristic distance on `X`: minimum Frobenius distance `‖g_x γ − g_y‖`
/// over `γ ∈ SL2(Z)` with entries bounded by [`DISTANCE_SEARCH_RADIUS`].
pub fn modular_distance(gx: &SquareMatrix, gy: &SquareMatrix) -> f64 {
    let r = DISTANCE_SEARCH_RADIUS;
    let mut best = f64::INFINITY;
    for a in -r..=r {
        for b in -r..=r {
            for c in -r..=r {
                for d in -r..=r {
                    if a * d - b * c != 1 {
                        continue;
                    }
                    let gamma = int_to_matrix(&[[a, b], [c, d]]);
                    best = best.min((*gx * gamma - *gy).frobenius());
                }
            }
        }
    }
    best
}

/// Smallest Frobenius displacement `‖gγ − g‖` over nontrivial `γ` in the
/// search ball; half of it is the injectivity radius under [`modular_distance`].
pub fn displacement(g: &SquareMatrix) -> f64 {
    let r = DISTANCE_SEARCH_RADIUS;
    let mut best = f64::INFINITY;
    for a in -r..=r {
        for b in -r..=r {
            for c in -r..=r {
                for d in -r..=r {
                    if a * d - b * c != 1 || (a == 1 && b == 0 && c == 0 && d == 1) {
                        continue;
                    }
                    let gamma = int_to_matrix(&[[a, b], [c, d]]);
                    best = best.min((*g * gamma - *g).frobenius());
                }
            }
        }
    }
    best
}

/// `InjRad(x) ≥ C·ε^k` for `x ∈ X¹_{≥ε}`.
pub fn inj_rad_lower_bound(x: &ModularPoint, eps: f64, k: u32) -> Result<f64> {
    match diophantine::in_x1_geq(x.reduced(), eps)? {
        Membership::Inside => Ok(INJ_RAD_CONSTANT * eps.powi(k as i32)),
        Membership::Outside => Err(Error::Precondition(format!("point is not in X¹_(≥{eps})"))),
        Membership::Inconclusive => Err(Error::Precondition(format!(
            "membership in X¹_(≥{eps}) could not be certified"
        ))),
    }
}

/// Seed-deterministic Haar sample of `X`, truncated at height [`HAAR_Y_MAX`].
///
/// `(x, y)` is drawn under `dx dy / y²` on the fundamental domain by rejection
/// from the strip `|x| ≤ 1/2, y ≥ √3/2`, and `θ` uniformly.
pub fn haar_sample_modular(n: usize, seed: u64) -> Vec<ModularPoint> {
    let mut rng = rng_from_seed(seed);
    let inv_lo = 1.0 / SQRT3_2;
    let inv_hi = 1.0 / HAAR_Y_MAX;
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let x: f64 = rng.gen_range(-0.5..0.5);
        let u: f64 = rng.gen();
        let y = 1.0 / (inv_lo - u * (inv_lo - inv_hi));
        let theta: f64 = rng.gen_range(0.0..2.0 * PI);
        if x * x + y * y < 1.0 {
            continue;
        }
        let frame = Iwasawa { x, y, theta }.frame();
        let rep = frame.inverse().expect("frames are unimodular");
        out.push(ModularPoint {
            rep,
            reduced: rep,
            gamma: [[1, 0], [0, 1]],
            iwasawa: Iwasawa { x, y, theta },
        });
    }
    out
}

/// Smooth bump `amplitude · exp(1 − 1/(1 − u²))` on `(lo, hi)`, where `u`
/// maps `(lo, hi)` affinely onto `(−1, 1)`; its peak value is `amplitude`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BumpProfile {
    pub lo: f64,
    pub hi: f64,
    pub amplitude: f64,
}

impl BumpProfile {
    pub fn new(lo: f64, hi: f64, amplitude: f64) -> Result<Self> {
        let p = BumpProfile { lo, hi, amplitude };
        p.validate()?;
        Ok(p)
    }

    fn validate(&self) -> Result<()> {
        if !(self.lo > 0.0) || !(self.hi > self.lo) || !self.hi.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "profile must be compactly supported in (0, ∞), got ({}, {})",
                self.lo, self.hi
            )));
        }
        if !self.amplitude.is_finite() {
            return Err(Error::InvalidParameter("non-finite amplitude".into()));
        }
        Ok(())
    }

    #[inline]
    pub fn eval(&self, y: f64) -> f64 {
        if y <= self.lo || y >= self.hi {
            return 0.0;
        }
        let u = (2.0 * y - self.lo - self.hi) / (self.hi - self.lo);
        let d = 1.0 - u * u;
        if d <= 0.0 {
            0.0
        } else {
            self.amplitude * (1.0 - 1.0 / d).exp()
        }
    }

    /// `(3/π) ∫ h(y) y⁻² dy`, the Haar mean of the incomplete Eisenstein series.
    pub fn unfolded_mean(&self) -> f64 {
        let n = 20_000;
        let step = (self.hi - self.lo) / n as f64;
        // composite Simpson; the integrand vanishes to all orders at both ends
        let f = |y: f64| self.eval(y) / (y * y);
        let mut s = f(self.lo) + f(self.hi);
        for i in 1..n {
            let y = self.lo + i as f64 * step;
            s += if i % 2 == 1 { 4.0 } else { 2.0 } * f(y);
        }
        3.0 / PI * s * step / 3.0
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TestFunctionKind {
    IncompleteEisenstein,
    AngularTwist,
}

/// Incomplete Eisenstein series `Σ_{γ ∈ Γ_∞\Γ} h(Im γz)`, optionally twisted
/// by `cos(nθ)` of the translated frame, minus `mean_offset`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TestFunction {
    pub kind: TestFunctionKind,
    pub profile: BumpProfile,
    pub fourier_index: i32,
    pub mean_offset: f64,
}

impl TestFunction {
    /// Mean-subtracted incomplete Eisenstein series.
    pub fn incomplete_eisenstein(profile: BumpProfile) -> Result<Self> {
        profile.validate()?;
        Ok(TestFunction {
            kind: TestFunctionKind::IncompleteEisenstein,
            profile,
            fourier_index: 0,
            mean_offset: profile.unfolded_mean(),
        })
    }

    /// Angular twist by `cos(nθ)`; `n` must be even and nonzero (`−I ∈ Γ`),
    /// and the Haar mean is zero.
    pub fn angular_twist(profile: BumpProfile, n: i32) -> Result<Self> {
        profile.validate()?;
        if n == 0 || n % 2 != 0 {
            return Err(Error::InvalidParameter(format!(
                "angular index must be even and nonzero, got {n}"
            )));
        }
        Ok(TestFunction {
            kind: TestFunctionKind::AngularTwist,
            profile,
            fourier_index: n,
            mean_offset: 0.0,
        })
    }

    /// The same series without mean subtraction.
    pub fn raw(&self) -> Self {
        TestFunction {
            mean_offset: 0.0,
            ..*self
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.profile.validate()?;
        match self.kind {
            TestFunctionKind::IncompleteEisenstein if self.fourier_index != 0 => Err(
                Error::InvalidParameter("incomplete Eisenstein series has index 0".into()),
            ),
            TestFunctionKind::AngularTwist
                if self.fourier_index == 0 || self.fourier_index % 2 != 0 =>
            {
                Err(Error::InvalidParameter(
                    "angular index must be even and nonzero".into(),
                ))
            }
            _ => Ok(()),
        }
    }

    /// Haar mean of the raw series.
    pub fn haar_mean_of_raw(&self) -> f64 {
        match self.kind {
            TestFunctionKind::IncompleteEisenstein => self.profile.unfolded_mean(),
            TestFunctionKind::AngularTwist => 0.0,
        }
    }

    pub fn eval(&self, x: &ModularPoint) -> f64 {
        self.eval_frame(&x.frame())
    }

    /// Value at `g·Γ`. For untwisted series only the height of `g⁻¹·i` is used.
    pub fn eval_rep(&self, g: &SquareMatrix) -> Result<f64> {
        match self.kind {
            TestFunctionKind::IncompleteEisenstein => {
                let w = g.inverse()?;
                let iw = Iwasawa::of_frame(&w);
                let (x, y) = reduce_upper_half_plane(iw.x, iw.y)?;
                Ok(self.eval_z(x, y))
            }
            TestFunctionKind::AngularTwist => Ok(self.eval(&ModularPoint::new(*g)?)),
        }
    }

    /// Value at the point whose upper half plane image is `x + iy`
    /// (untwisted series only). Exact for any `z`, reduced or not.
    pub fn eval_z(&self, x: f64, y: f64) -> f64 {
        debug_assert_eq!(self.kind, TestFunctionKind::IncompleteEisenstein);
        let mut sum = 0.0;
        for_each_coset(x, y, self.profile.lo, |c, d| {
            let q = (c * x + d).powi(2) + (c * y).powi(2);
            sum += self.profile.eval(y / q);
        });
        sum - self.mean_offset
    }

    /// Brute-force coset sum at an arbitrary (unreduced) frame `w = g⁻¹`.
    pub fn eval_frame(&self, w: &SquareMatrix) -> f64 {
        let iw = Iwasawa::of_frame(w);
        let n = self.fourier_index as f64;
        let mut sum = 0.0;
        for_each_coset(iw.x, iw.y, self.profile.lo, |c, d| {
            let (r, s) = (
                c * w.get(0, 0) + d * w.get(1, 0),
                c * w.get(0, 1) + d * w.get(1, 1),
            );
            let y = 1.0 / (r * r + s * s);
            let h = self.profile.eval(y);
            if h != 0.0 {
                sum += if n == 0.0 {
                    h
                } else {
                    h * (n * r.atan2(s)).cos()
                };
            }
        });
        sum - self.mean_offset
    }
}

/// Visit coprime pairs `(c, d)` (one per coset of `Γ_∞\Γ`, `c ≥ 0`) with
/// `Im γz = y/|cz + d|² ≥ y_min`.
fn for_each_coset(x: f64, y: f64, y_min: f64, mut visit: impl FnMut(f64, f64)) {
    visit(0.0, 1.0);
    let c_max = (1.0 / (y * y_min)).sqrt().floor() as i64;
    for c in 1..=c_max {
        let cf = c as f64;
        let slack = y / y_min - cf * cf * y * y;
        if slack < 0.0 {
            continue;
        }
        let half = slack.sqrt();
        let d_lo = (-cf * x - half).ceil() as i64;
        let d_hi = (-cf * x + half).floor() as i64;
        for d in d_lo..=d_hi {
            if gcd(c, d) == 1 {
                visit(cf, d as f64);
            }
        }
    }
}

pub(crate) fn gcd(a: i64, b: i64) -> i64 {
    let (mut a, mut b) = (a.abs(), b.abs());
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

/// `[[1, x, y], [0, 1, z], [0, 0, 1]]` modulo right multiplication by `N(Z)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HeisenbergPoint {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl HeisenbergPoint {
    pub const IDENTITY: HeisenbergPoint = HeisenbergPoint {
        x: 0.0,
        y: 0.0,
        z: 0.0,
    };

    pub fn new(x: f64, y: f64, z: f64) -> Self {
        HeisenbergPoint { x, y, z }
    }

    pub fn from_matrix(m: &SquareMatrix) -> Result<Self> {
        if m.dim() != 3 || !m.is_upper_unipotent(1e-12) {
            return Err(Error::NotUnipotent);
        }
        Ok(HeisenbergPoint {
            x: m.get(0, 1),
            y: m.get(0, 2),
            z: m.get(1, 2),
        })
    }

    pub fn matrix(&self) -> SquareMatrix {
        SquareMatrix::from_3x3([[1.0, self.x, self.y], [0.0, 1.0, self.z], [0.0, 0.0, 1.0]])
    }

    /// Group law `(x,y,z)·(a,b,c) = (x+a, y+b+xc, z+c)`.
    pub fn mul(&self, other: &HeisenbergPoint) -> HeisenbergPoint {
        HeisenbergPoint {
            x: self.x + other.x,
            y: self.y + other.y + self.x * other.z,
            z: self.z + other.z,
        }
    }

    pub fn mul_int(&self, g: [i64; 3]) -> HeisenbergPoint {
        self.mul(&HeisenbergPoint::new(g[0] as f64, g[1] as f64, g[2] as f64))
    }

    pub fn log(&self) -> NilAlgebraElement {
        nil_log(&self.matrix()).expect("Heisenberg matrices are unipotent")
    }

    pub fn exp(x: &NilAlgebraElement) -> Result<HeisenbergPoint> {
        HeisenbergPoint::from_matrix(&nil_exp(x))
    }
}

/// Canonical representative in `[0,1)³`: right multiplication by
/// `γ = (a, b, c)` with `c = −⌊z⌋`, `a = −⌊x⌋`, then `b` fixing `y`.
pub fn reduce_heisenberg(p: &HeisenbergPoint) -> (HeisenbergPoint, [i64; 3]) {
    let c = -p.z.floor();
    let a = -p.x.floor();
    let y_shifted = p.y + p.x * c;
    let b = -y_shifted.floor();
    let gamma = [a as i64, b as i64, c as i64];
    let mut q = p.mul(&HeisenbergPoint::new(a, b, c));
    // floating point can land exactly on 1.0
    for v in [&mut q.x, &mut q.y, &mut q.z] {
        if *v >= 1.0 {
            *v -= 1.0;
        }
        if *v < 0.0 {
            *v = 0.0;
        }
    }
    (q, gamma)
}
