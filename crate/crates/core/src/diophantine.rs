//! Lattice diophantine quantities on `SL_k(R)/SL_k(Z)`, `k ≤ 3`.
//!
//! `α_i(x) = 1 / min ‖∧^i(g)·w‖_∞` over nonzero integer wedges `w`, found by
//! exhaustive search in a coefficient box. For `k ≤ 3` every integer vector of
//! `∧^i Z^k` is decomposable, so searching the compound-matrix coordinates is
//! the same as searching wedges of primitive subgroups.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::group::{invert_small, nil_exp, DiagonalFlow, FolnerBall, HoroSubgroup, SquareMatrix};
use crate::qmc::{rng_from_seed, QuasiRandom};

/// Largest box used when `α` is certified by doubling the search bound.
pub const MAX_SEARCH_BOUND: i64 = 2048;
/// Largest box in dimension 3, where the search is cubic in the bound.
pub const MAX_SEARCH_BOUND_3D: i64 = 128;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlphaValue {
    pub value: f64,
    pub certified: bool,
    pub search_bound: i64,
    /// Integer coordinates (in the compound basis) of the minimizing wedge.
    pub minimizer: Vec<i64>,
}

/// Matrix of `∧^i g` in the basis `e_I = e_{i_1} ∧ … ∧ e_{i_r}`, `I` increasing.
pub fn compound(g: &SquareMatrix, i: usize) -> Result<Vec<Vec<f64>>> {
    let k = g.dim();
    if i == 0 || i > k {
        return Err(Error::InvalidParameter(format!(
            "wedge degree {i} out of range 1..={k}"
        )));
    }
    let subsets = increasing_subsets(k, i);
    Ok(subsets
        .iter()
        .map(|rows| subsets.iter().map(|cols| minor(g, rows, cols)).collect())
        .collect())
}

fn increasing_subsets(k: usize, r: usize) -> Vec<Vec<usize>> {
    fn go(start: usize, k: usize, r: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == r {
            out.push(cur.clone());
            return;
        }
        for s in start..k {
            cur.push(s);
            go(s + 1, k, r, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    go(0, k, r, &mut Vec::new(), &mut out);
    out
}

fn minor(g: &SquareMatrix, rows: &[usize], cols: &[usize]) -> f64 {
    match rows.len() {
        1 => g.get(rows[0], cols[0]),
        2 => {
            g.get(rows[0], cols[0]) * g.get(rows[1], cols[1])
                - g.get(rows[0], cols[1]) * g.get(rows[1], cols[0])
        }
        _ => g.det(),
    }
}

fn mat_vec_inf(m: &[Vec<f64>], v: &[i64]) -> f64 {
    let mut best: f64 = 0.0;
    for row in m {
        let s: f64 = row.iter().zip(v).map(|(a, b)| a * *b as f64).sum();
        best = best.max(s.abs());
    }
    best
}

fn op_norm_inf(m: &[Vec<f64>]) -> f64 {
    m.iter()
        .map(|r| r.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Visit every nonzero integer vector of the box `[-b, b]^m` up to sign.
fn for_each_box_vector(m: usize, b: i64, mut visit: impl FnMut(&[i64])) {
    let mut v = vec![-b; m];
    loop {
        // first nonzero coordinate positive: one representative of ±v
        if let Some(first) = v.iter().find(|c| **c != 0) {
            if *first > 0 {
                visit(&v);
            }
        }
        let mut idx = 0;
        loop {
            if idx == m {
                return;
            }
            if v[idx] < b {
                v[idx] += 1;
                break;
            }
            v[idx] = -b;
            idx += 1;
        }
    }
}

/// Brute-force `α_i(g)` over the coefficient box `[-search_bound, search_bound]`.
///
/// `certified` is set when `‖(∧^i g)⁻¹‖_{op,∞} · min ≤ search_bound`, which
/// places every vector at least as short as the minimum inside the box.
pub fn alpha_i(g: &SquareMatrix, i: usize, search_bound: i64) -> Result<AlphaValue> {
    if search_bound < 1 {
        return Err(Error::InvalidParameter("search bound must be ≥ 1".into()));
    }
    let c = compound(g, i)?;
    let m = c.len();
    let mut best = f64::INFINITY;
    let mut arg = vec![0; m];
    for_each_box_vector(m, search_bound, |v| {
        let n = mat_vec_inf(&c, v);
        if n < best {
            best = n;
            arg.copy_from_slice(v);
        }
    });
    let inv_norm = invert_small(&c)
        .map(|inv| op_norm_inf(&inv))
        .ok_or_else(|| Error::InvalidParameter("degenerate lattice".into()))?;
    Ok(AlphaValue {
        value: 1.0 / best,
        certified: inv_norm * best <= search_bound as f64,
        search_bound,
        minimizer: arg,
    })
}

/// `α_i` with the search box doubled until the minimum is certified.
pub fn certified_alpha(g: &SquareMatrix, i: usize) -> Result<AlphaValue> {
    let cap = if g.dim() == 3 && i == 2 || g.dim() == 3 && i == 1 {
        MAX_SEARCH_BOUND_3D
    } else {
        MAX_SEARCH_BOUND
    };
    let mut bound = 4;
    loop {
        let a = alpha_i(g, i, bound)?;
        if a.certified || bound >= cap {
            return Ok(a);
        }
        // jump straight to a bound that would certify the current minimum
        let c = compound(g, i)?;
        let need = invert_small(&c)
            .map(|inv| op_norm_inf(&inv))
            .unwrap_or(f64::INFINITY)
            / a.value;
        bound = (need.ceil() as i64).clamp(bound * 2, cap);
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlphaProfile {
    pub values: Vec<f64>,
    pub search_bound: i64,
    pub certified: bool,
}

impl AlphaProfile {
    /// `α(x) = max_i α_i(x)`.
    pub fn alpha(&self) -> f64 {
        self.values
            .iter()
            .cloned()
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

pub fn alpha_profile(g: &SquareMatrix) -> Result<AlphaProfile> {
    let mut values = Vec::with_capacity(g.dim());
    let mut bound = 0;
    let mut certified = true;
    for i in 1..=g.dim() {
        let a = certified_alpha(g, i)?;
        values.push(a.value);
        bound = bound.max(a.search_bound);
        certified &= a.certified;
    }
    Ok(AlphaProfile {
        values,
        search_bound: bound,
        certified,
    })
}

/// Outcome of a membership test whose `α` may not have been certified.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Membership {
    Inside,
    Outside,
    Inconclusive,
}

fn classify(alpha: &AlphaValue, threshold: f64) -> Membership {
    // a box minimum bounds the true minimum from above, so an uncertified α
    // is a lower bound for the true α
    if alpha.value > threshold {
        Membership::Outside
    } else if alpha.certified {
        Membership::Inside
    } else {
        Membership::Inconclusive
    }
}

fn check_eps(eps: f64) -> Result<()> {
    if eps > 0.0 && eps <= 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "ε must lie in (0, 1], got {eps}"
        )))
    }
}

/// `x ∈ X_{≥ε}`, i.e. `α(x) ≤ 1/ε`.
pub fn in_x_geq(g: &SquareMatrix, eps: f64) -> Result<Membership> {
    check_eps(eps)?;
    let mut result = Membership::Inside;
    for i in 1..=g.dim() {
        match classify(&certified_alpha(g, i)?, 1.0 / eps) {
            Membership::Outside => return Ok(Membership::Outside),
            Membership::Inconclusive => result = Membership::Inconclusive,
            Membership::Inside => {}
        }
    }
    Ok(result)
}

/// `x ∈ X¹_{≥ε}`, i.e. `α₁(x) ≤ 1/ε`.
pub fn in_x1_geq(g: &SquareMatrix, eps: f64) -> Result<Membership> {
    check_eps(eps)?;
    Ok(classify(&certified_alpha(g, 1)?, 1.0 / eps))
}

/// Polynomially bounded radius function `Θ(T) = max{1, Σ c_j T^j}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolyBound {
    pub coefficients: Vec<f64>,
}

impl PolyBound {
    pub fn constant_one() -> Self {
        PolyBound {
            coefficients: vec![1.0],
        }
    }

    pub fn degree(&self) -> usize {
        self.coefficients.len().saturating_sub(1)
    }

    pub fn eval(&self, t: f64) -> f64 {
        let p = self
            .coefficients
            .iter()
            .rev()
            .fold(0.0, |acc, c| acc * t + c);
        p.max(1.0)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiophSpec {
    pub d: f64,
    pub theta: PolyBound,
    pub subgroup: HoroSubgroup,
}

impl DiophSpec {
    pub fn new(d: f64, theta: PolyBound, subgroup: HoroSubgroup) -> Result<Self> {
        if !(d > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "D must be positive, got {d}"
            )));
        }
        Ok(DiophSpec { d, theta, subgroup })
    }

    pub fn flow(&self) -> &DiagonalFlow {
        self.subgroup.flow()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiophRecord {
    #[serde(rename = "R")]
    pub r: f64,
    pub witness_h: Option<SquareMatrix>,
    pub alpha_values: Vec<f64>,
    pub certified: bool,
}

impl DiophRecord {
    pub fn witnessed(&self) -> bool {
        self.witness_h.is_some()
    }
}

/// Search `B^H_{Θ(R)}·a_{−log R}·x` for a point of `X_{≥R^{−D}}`, for each `R`.
/// The identity is tried first, then `n_samples` quasi-uniform points of the
/// ball. A witness certifies the condition at that `R`; a miss proves nothing.
pub fn theta_diophantine_check(
    x: &SquareMatrix,
    spec: &DiophSpec,
    r_grid: &[f64],
    n_samples: usize,
    seed: u64,
) -> Result<Vec<DiophRecord>> {
    let mut out = Vec::with_capacity(r_grid.len());
    for (idx, &r) in r_grid.iter().enumerate() {
        if !(r >= 1.0) {
            return Err(Error::InvalidParameter(format!("R must be ≥ 1, got {r}")));
        }
        let pushed = spec.flow().at(-r.ln()) * *x;
        let ball = FolnerBall::new(spec.subgroup.clone(), spec.theta.eval(r))?;
        let threshold = r.powf(spec.d);
        let mut candidates = vec![SquareMatrix::identity(x.dim())];
        candidates.extend(ball.sample(n_samples, seed.wrapping_add(idx as u64)));
        let mut record = DiophRecord {
            r,
            witness_h: None,
            alpha_values: Vec::new(),
            certified: false,
        };
        for h in candidates {
            let profile = alpha_profile(&(h * pushed))?;
            let ok = profile.certified && profile.alpha() <= threshold * (1.0 + 1e-12);
            if record.alpha_values.is_empty() || ok {
                record.alpha_values = profile.values.clone();
                record.certified = profile.certified;
            }
            if ok {
                record.witness_h = Some(h);
                break;
            }
        }
        out.push(record);
    }
    Ok(out)
}

/// Sparse real polynomial in `n_vars` variables.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Polynomial {
    pub n_vars: usize,
    pub terms: Vec<(f64, Vec<u32>)>,
}

impl Polynomial {
    pub fn new(n_vars: usize, terms: Vec<(f64, Vec<u32>)>) -> Result<Self> {
        if terms.iter().any(|(_, e)| e.len() != n_vars) {
            return Err(Error::InvalidParameter("monomial arity mismatch".into()));
        }
        Ok(Polynomial { n_vars, terms })
    }

    pub fn monomial(n_vars: usize, coeff: f64, exps: Vec<u32>) -> Self {
        Polynomial::new(n_vars, vec![(coeff, exps)]).expect("arity given")
    }

    pub fn degree(&self) -> u32 {
        self.terms
            .iter()
            .filter(|(c, _)| *c != 0.0)
            .map(|(_, e)| e.iter().sum())
            .max()
            .unwrap_or(0)
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.terms
            .iter()
            .map(|(c, e)| {
                c * e
                    .iter()
                    .zip(x)
                    .map(|(k, v)| v.powi(*k as i32))
                    .product::<f64>()
            })
            .sum()
    }

    /// Random dense polynomial of total degree exactly `degree` with
    /// coefficients uniform in `[−1, 1]`.
    pub fn random(n_vars: usize, degree: u32, rng: &mut impl Rng) -> Self {
        let mut terms = Vec::new();
        let mut exps = vec![0u32; n_vars];
        loop {
            let total: u32 = exps.iter().sum();
            if total <= degree {
                terms.push((rng.gen_range(-1.0..1.0), exps.clone()));
            }
            let mut idx = 0;
            loop {
                if idx == n_vars {
                    // force exact degree on the first variable
                    let mut top = vec![0u32; n_vars];
                    top[0] = degree;
                    if let Some(t) = terms.iter_mut().find(|(_, e)| *e == top) {
                        t.0 = if t.0 >= 0.0 { t.0 + 0.5 } else { t.0 - 0.5 };
                    }
                    return Polynomial { n_vars, terms };
                }
                if exps[idx] < degree {
                    exps[idx] += 1;
                    break;
                }
                exps[idx] = 0;
                idx += 1;
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RemezEntry {
    pub eps: f64,
    pub fraction: f64,
    pub sigma: f64,
    pub bound: f64,
    pub holds: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RemezReport {
    pub n_vars: usize,
    pub degree: u32,
    pub sup: f64,
    pub entries: Vec<RemezEntry>,
}

impl RemezReport {
    pub fn violations(&self) -> usize {
        self.entries.iter().filter(|e| !e.holds).count()
    }
}

/// Sampled check of `|{t ∈ B : |f(t)| ≤ ε}| ≤ 4n (ε / sup_B |f|)^{1/d} |B|`.
///
/// `f` must be (the absolute value of) a polynomial map of degree `≤ degree`
/// on the box. The sublevel fraction is estimated from quasi-uniform points,
/// and `sup |f|` is the sampled maximum (never above the true supremum, so the
/// bound used is never tighter than the true one). An entry holds when the
/// fraction is within `3σ` of the bound.
pub fn remez_check(
    f: impl Fn(&[f64]) -> f64,
    degree: u32,
    bbox: &[(f64, f64)],
    eps_grid: &[f64],
    n_samples: usize,
    seed: u64,
) -> Result<RemezReport> {
    if bbox.is_empty() || bbox.iter().any(|(lo, hi)| !(hi > lo)) {
        return Err(Error::InvalidParameter("degenerate box".into()));
    }
    if degree == 0 {
        return Err(Error::InvalidParameter(
            "polynomial degree must be ≥ 1".into(),
        ));
    }
    if n_samples == 0 {
        return Err(Error::InvalidParameter("n_samples must be positive".into()));
    }
    let n = bbox.len();
    let stream = QuasiRandom::new(n, seed);
    let mut values = Vec::with_capacity(n_samples);
    let mut point = vec![0.0; n];
    let mut unit = vec![0.0; n];
    for s in 0..n_samples {
        stream.point_into(s as u64, &mut unit);
        for ((p, u), (lo, hi)) in point.iter_mut().zip(&unit).zip(bbox) {
            *p = lo + u * (hi - lo);
        }
        values.push(f(&point).abs());
    }
    let mut sup = values.iter().cloned().fold(0.0, f64::max);
    // corners often carry the maximum of a polynomial
    for mask in 0..(1usize << n) {
        for (j, p) in point.iter_mut().enumerate() {
            *p = if mask >> j & 1 == 1 {
                bbox[j].1
            } else {
                bbox[j].0
            };
        }
        sup = sup.max(f(&point).abs());
    }
    let entries = eps_grid
        .iter()
        .map(|&eps| {
            let count = values.iter().filter(|v| **v <= eps).count();
            let fraction = count as f64 / n_samples as f64;
            let p = fraction.clamp(1.0 / n_samples as f64, 1.0 - 1.0 / n_samples as f64);
            let sigma = (p * (1.0 - p) / n_samples as f64).sqrt();
            let bound = 4.0 * n as f64 * (eps / sup).powf(1.0 / degree as f64);
            RemezEntry {
                eps,
                fraction,
                sigma,
                bound,
                holds: fraction <= bound + 3.0 * sigma,
            }
        })
        .collect();
    Ok(RemezReport {
        n_vars: n,
        degree,
        sup,
        entries,
    })
}

pub fn remez_check_poly(
    poly: &Polynomial,
    bbox: &[(f64, f64)],
    eps_grid: &[f64],
    n_samples: usize,
    seed: u64,
) -> Result<RemezReport> {
    if bbox.len() != poly.n_vars {
        return Err(Error::DimensionMismatch {
            expected: poly.n_vars,
            got: bbox.len(),
        });
    }
    remez_check(
        |x| poly.eval(x),
        poly.degree().max(1),
        bbox,
        eps_grid,
        n_samples,
        seed,
    )
}

/// `ψ_{R,Δ,x₀}(h) = ‖∧^r(exp(h)·x₀)·(v_1 ∧ … ∧ v_r)‖_∞` on Lie coordinates
/// of `H`, for a subgroup `Δ` spanned by the integer vectors `delta`.
pub fn subgroup_norm_fn<'a>(
    subgroup: &'a HoroSubgroup,
    x0: &'a SquareMatrix,
    delta: &'a [Vec<i64>],
) -> Result<impl Fn(&[f64]) -> f64 + 'a> {
    let k = x0.dim();
    let r = delta.len();
    if r == 0 || r > k || delta.iter().any(|v| v.len() != k) {
        return Err(Error::InvalidParameter("invalid subgroup basis".into()));
    }
    let wedge = wedge_coords(delta);
    Ok(move |h: &[f64]| {
        let g = nil_exp(&subgroup.from_coords(h)) * *x0;
        let c = compound(&g, r).expect("rank checked");
        c.iter()
            .map(|row| {
                row.iter()
                    .zip(&wedge)
                    .map(|(a, b)| a * b)
                    .sum::<f64>()
                    .abs()
            })
            .fold(0.0, f64::max)
    })
}

/// Coordinates of `v_1 ∧ … ∧ v_r` in the basis `e_I`.
fn wedge_coords(vs: &[Vec<i64>]) -> Vec<f64> {
    let k = vs[0].len();
    let r = vs.len();
    let m = SquareMatrix::from_rows(
        &(0..k)
            .map(|i| {
                (0..k)
                    .map(|j| if j < r { vs[j][i] as f64 } else { 0.0 })
                    .collect::<Vec<_>>()
            })
            .collect::<Vec<_>>(),
    );
    let cols: Vec<usize> = (0..r).collect();
    match m {
        Ok(m) => increasing_subsets(k, r)
            .iter()
            .map(|rows| minor(&m, rows, &cols))
            .collect(),
        Err(_) => unreachable!("k is 2 or 3"),
    }
}

/// Constants `(C', α)` for the non-divergence bound `C'·r^{−α ε}`: the Remez
/// constants `C' = 4·dim H` and `α = 1/d`, with `d = (k−1)²` bounding the
/// degree of `h ↦ ∧^i(exp(h)·g)` in Lie coordinates of `H`.
pub fn remez_constants(subgroup: &HoroSubgroup) -> (f64, f64) {
    let k = subgroup.dim() as f64;
    let d = ((k - 1.0) * (k - 1.0)).max(1.0);
    (4.0 * subgroup.dim_h() as f64, 1.0 / d)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NondivergenceReport {
    #[serde(rename = "R")]
    pub big_r: f64,
    pub r: f64,
    pub eps: f64,
    pub fraction: f64,
    pub inconclusive: usize,
    pub bound: f64,
    pub c_prime: f64,
    pub alpha: f64,
}

/// Sampled fraction of `h ∈ B_R^H` with `h·a_{−log r}·x ∉ X¹_{≥ r^{−D−ε}}`.
/// Samples whose membership cannot be certified are counted as excluded.
pub fn nondivergence_fraction(
    x: &SquareMatrix,
    spec: &DiophSpec,
    big_r: f64,
    r: f64,
    eps: f64,
    n_samples: usize,
    seed: u64,
) -> Result<NondivergenceReport> {
    if !(r >= 1.0) {
        return Err(Error::InvalidParameter(format!("r must be ≥ 1, got {r}")));
    }
    if big_r < spec.theta.eval(r) {
        return Err(Error::Precondition(format!(
            "R = {big_r} is below Θ(r) = {}",
            spec.theta.eval(r)
        )));
    }
    let pushed = spec.flow().at(-r.ln()) * *x;
    let ball = FolnerBall::new(spec.subgroup.clone(), big_r)?;
    let threshold = r.powf(spec.d + eps);
    let mut excluded = 0usize;
    let mut inconclusive = 0usize;
    for h in ball.sample(n_samples, seed) {
        match classify(&certified_alpha(&(h * pushed), 1)?, threshold) {
            Membership::Inside => {}
            Membership::Outside => excluded += 1,
            Membership::Inconclusive => {
                excluded += 1;
                inconclusive += 1;
            }
        }
    }
    let (c_prime, alpha) = remez_constants(&spec.subgroup);
    Ok(NondivergenceReport {
        big_r,
        r,
        eps,
        fraction: excluded as f64 / n_samples.max(1) as f64,
        inconclusive,
        bound: c_prime * r.powf(-alpha * eps),
        c_prime,
        alpha,
    })
}

/// `Nm(y) = ∏ |y_i|`.
pub fn norm_form(y: &[f64]) -> f64 {
    y.iter().map(|v| v.abs()).product()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum NormFormMin {
    Found { value: f64, vector: Vec<f64> },
    NoVector,
}

impl NormFormMin {
    pub fn value(&self) -> Option<f64> {
        match self {
            NormFormMin::Found { value, .. } => Some(*value),
            NormFormMin::NoVector => None,
        }
    }
}

/// `v(gZ^k, ρ) = min{|Nm(y)| : y ∈ gZ^k, 0 < ‖y‖_∞ < ρ}` by exhaustive search.
/// The coefficient box is widened to `‖g⁻¹‖_{op,∞}·ρ` when needed, so every
/// lattice vector of the ρ-ball is visited.
pub fn norm_form_min(g: &SquareMatrix, rho: f64, search_bound: i64) -> Result<NormFormMin> {
    if !(rho > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "ρ must be positive, got {rho}"
        )));
    }
    let needed = (g.inverse()?.op_norm_inf() * rho).ceil() as i64;
    let bound = search_bound.max(needed).max(1);
    let k = g.dim();
    let mut best: Option<(f64, Vec<f64>)> = None;
    for_each_box_vector(k, bound, |v| {
        let vf: Vec<f64> = v.iter().map(|c| *c as f64).collect();
        let y = g.mul_vec(&vf);
        let n = y.iter().fold(0.0f64, |m, c| m.max(c.abs()));
        if n > 0.0 && n < rho {
            let nm = norm_form(&y);
            if best.as_ref().is_none_or(|(b, _)| nm < *b) {
                best = Some((nm, y));
            }
        }
    });
    Ok(match best {
        Some((value, vector)) => NormFormMin::Found { value, vector },
        None => NormFormMin::NoVector,
    })
}

/// Deterministic random integer subgroup basis of rank `r` in `Z^k`
/// (rejecting degenerate draws).
pub fn random_subgroup(k: usize, r: usize, seed: u64) -> Vec<Vec<i64>> {
    let mut rng = rng_from_seed(seed);
    loop {
        let vs: Vec<Vec<i64>> = (0..r)
            .map(|_| (0..k).map(|_| rng.gen_range(-3..=3)).collect())
            .collect();
        if wedge_coords(&vs).iter().any(|c| *c != 0.0) {
            return vs;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn sqrt2_point() -> SquareMatrix {
        SquareMatrix::from_2x2([[1.0, 0.0], [2f64.sqrt(), 1.0]])
    }

    #[test]
    fn alpha_of_identity() {
        for k in [2, 3] {
            let e = SquareMatrix::identity(k);
            for i in 1..=k {
                let a = alpha_i(&e, i, 3).unwrap();
                assert_eq!(a.value, 1.0);
                assert!(a.certified);
            }
        }
        assert!(alpha_i(&SquareMatrix::identity(2), 3, 3).is_err());
        assert!(alpha_i(&SquareMatrix::identity(2), 0, 3).is_err());
    }

    #[test]
    fn alpha_of_diagonal_flow() {
        for t in [0.0f64, 0.5, 2.0, 5.0] {
            let g = DiagonalFlow::sl2().at(t);
            let a = certified_alpha(&g, 1).unwrap();
            assert!(a.certified);
            assert!((a.value - (t / 2.0).exp()).abs() < 1e-12);
        }
        let a = certified_alpha(&SquareMatrix::diagonal(&[10.0, 0.1]).unwrap(), 1).unwrap();
        assert!((a.value - 10.0).abs() < 1e-12);
    }

    #[test]
    fn top_wedge_is_determinant() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let t: f64 = rng.gen_range(-2.0..2.0);
            let s: f64 = rng.gen_range(-2.0..2.0);
            let g = DiagonalFlow::sl3().at(t)
                * nil_exp(&crate::group::NilAlgebraElement::unit(3, 0, 2).scale(s));
            let a = alpha_i(&g, 3, 2).unwrap();
            assert!((a.value - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn compound_search_matches_pair_enumeration() {
        // oracle: enumerate decomposable wedges v1 ∧ v2 directly
        let g = SquareMatrix::from_3x3([[1.2, 0.3, -0.4], [0.1, 0.9, 0.5], [0.0, -0.2, 1.1]]);
        let g = g.scale(1.0 / g.det().cbrt());
        let b = 2i64;
        let mut best = f64::INFINITY;
        let mut vecs = Vec::new();
        for a in -b..=b {
            for c in -b..=b {
                for d in -b..=b {
                    vecs.push(vec![a, c, d]);
                }
            }
        }
        let c2 = compound(&g, 2).unwrap();
        for v in &vecs {
            for w in &vecs {
                let wc = wedge_coords(&[v.clone(), w.clone()]);
                if wc.iter().all(|x| *x == 0.0) {
                    continue;
                }
                let n = c2
                    .iter()
                    .map(|row| row.iter().zip(&wc).map(|(a, b)| a * b).sum::<f64>().abs())
                    .fold(0.0, f64::max);
                best = best.min(n);
            }
        }
        let a = alpha_i(&g, 2, 1).unwrap();
        // wedges of vectors in [-2,2]³ cover every wedge coordinate in [-1,1]³
        assert!(1.0 / a.value >= best - 1e-12);
        let wide = alpha_i(&g, 2, 4).unwrap();
        assert!((1.0 / wide.value - best).abs() < 1e-12 || 1.0 / wide.value <= best);
    }

    #[test]
    fn alpha_is_flow_covariant() {
        let x = sqrt2_point();
        let a = DiagonalFlow::sl2();
        for t in [0.5, 1.5, 3.0] {
            let moved = a.at(t) * x;
            let direct = certified_alpha(&moved, 1).unwrap();
            // the minimizer of the moved lattice, pulled back and pushed again
            let v: Vec<f64> = direct.minimizer.iter().map(|c| *c as f64).collect();
            let again = a.at(t).mul_vec(&x.mul_vec(&v));
            let n = again.iter().fold(0.0f64, |m, c| m.max(c.abs()));
            assert!((1.0 / n - direct.value).abs() < 1e-9);
        }
    }

    #[test]
    fn membership_sets() {
        let e = SquareMatrix::identity(2);
        assert_eq!(in_x_geq(&e, 1.0).unwrap(), Membership::Inside);
        let d = SquareMatrix::diagonal(&[10.0, 0.1]).unwrap();
        assert_eq!(in_x1_geq(&d, 0.1).unwrap(), Membership::Inside);
        assert_eq!(in_x1_geq(&d, 0.05).unwrap(), Membership::Inside);
        assert_eq!(in_x1_geq(&d, 0.2).unwrap(), Membership::Outside);
        assert!(in_x_geq(&e, 0.0).is_err());
        assert!(in_x_geq(&e, 1.5).is_err());

        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..50 {
            let g = DiagonalFlow::sl3().at(rng.gen_range(-1.5..1.5))
                * nil_exp(
                    &crate::group::NilAlgebraElement::from_upper(
                        3,
                        &[
                            rng.gen_range(-1.0..1.0),
                            rng.gen_range(-1.0..1.0),
                            rng.gen_range(-1.0..1.0),
                        ],
                    )
                    .unwrap(),
                );
            let eps = rng.gen_range(0.05..1.0);
            if in_x_geq(&g, eps).unwrap() == Membership::Inside {
                assert_eq!(in_x1_geq(&g, eps).unwrap(), Membership::Inside);
            }
        }
    }

    #[test]
    fn sqrt2_point_is_diophantine_with_constant_theta() {
        let spec = DiophSpec::new(
            1.0 / 3.0,
            PolyBound::constant_one(),
            HoroSubgroup::sl2_upper(),
        )
        .unwrap();
        let grid: Vec<f64> = (1..=12).map(|j| 2f64.powi(j)).collect();
        let report = theta_diophantine_check(&sqrt2_point(), &spec, &grid, 64, 1).unwrap();
        assert!(
            report.iter().all(|r| r.witnessed() && r.certified),
            "{report:?}"
        );
    }

    #[test]
    fn identity_is_witnessed_at_the_identity_element() {
        let spec =
            DiophSpec::new(0.5, PolyBound::constant_one(), HoroSubgroup::sl2_upper()).unwrap();
        let grid = [1.0, 4.0, 64.0, 1024.0];
        let report =
            theta_diophantine_check(&SquareMatrix::identity(2), &spec, &grid, 8, 0).unwrap();
        for rec in &report {
            assert_eq!(rec.witness_h, Some(SquareMatrix::identity(2)));
            assert!((rec.alpha_values[0] - rec.r.sqrt()).abs() < 1e-9 * rec.r.sqrt());
        }
    }

    #[test]
    fn remez_linear_and_quadratic() {
        let eps = [1e-3, 1e-2, 0.1, 0.5];
        let lin = Polynomial::monomial(1, 1.0, vec![1]);
        let rep = remez_check_poly(&lin, &[(0.0, 1.0)], &eps, 20_000, 0).unwrap();
        for e in &rep.entries {
            assert!((e.fraction - e.eps).abs() < 1e-3);
            assert!((e.bound - 4.0 * e.eps).abs() < 1e-9);
            assert!(e.holds);
        }
        let quad = Polynomial::monomial(1, 1.0, vec![2]);
        let rep = remez_check_poly(&quad, &[(0.0, 1.0)], &eps, 20_000, 0).unwrap();
        for e in &rep.entries {
            assert!((e.fraction - e.eps.sqrt()).abs() < 1e-3);
            assert!((e.bound - 4.0 * e.eps.sqrt()).abs() < 1e-9);
            assert!(e.holds);
        }
        assert!(remez_check_poly(&lin, &[(1.0, 1.0)], &eps, 10, 0).is_err());
    }

    #[test]
    fn remez_on_heisenberg_subgroup_norms() {
        let h = HoroSubgroup::heisenberg_sl3();
        let x0 = DiagonalFlow::sl3().at(0.7);
        let bbox = [(-1.0, 1.0); 3];
        for seed in 0..5 {
            let delta = random_subgroup(3, 1, seed);
            let f = subgroup_norm_fn(&h, &x0, &delta).unwrap();
            let rep = remez_check(f, 2, &bbox, &[1e-3, 1e-2, 0.1, 1.0], 5000, seed).unwrap();
            assert_eq!(rep.violations(), 0, "{rep:?}");
        }
    }

    #[test]
    fn norm_form_examples() {
        assert_eq!(norm_form(&[2.0, 3.0]), 6.0);
        assert_eq!(
            norm_form_min(&SquareMatrix::identity(2), 2.0, 3)
                .unwrap()
                .value(),
            Some(0.0)
        );
        assert_eq!(
            norm_form_min(&SquareMatrix::identity(2), 0.5, 3).unwrap(),
            NormFormMin::NoVector
        );
        assert!(norm_form_min(&SquareMatrix::identity(2), 0.0, 3).is_err());
    }

    #[test]
    fn norm_form_invariance_and_domination() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for _ in 0..100 {
            let y: Vec<f64> = (0..3).map(|_| rng.gen_range(-4.0..4.0)).collect();
            let a = DiagonalFlow::sl3().at(rng.gen_range(-3.0..3.0));
            let ay = a.mul_vec(&y);
            assert!((norm_form(&ay) - norm_form(&y)).abs() <= 1e-12 * (1.0 + norm_form(&y)));
            let sup = y.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            assert!(sup.powi(3) >= norm_form(&y));
        }
    }

    #[test]
    fn random_polynomial_has_requested_degree() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for d in 1..=6 {
            let p = Polynomial::random(2, d, &mut rng);
            assert_eq!(p.degree(), d);
        }
    }
}
