//! Small real matrix groups: unipotent exponentials, diagonal flows and the
//! renormalized Følner balls `B_R = a_{log R} B_1 a_{-log R}` of a horospherical
//! subgroup.
//!
//! Everything here works on 2×2 and 3×3 matrices stored inline, so values are
//! `Copy` and cheap to pass around.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qmc::QuasiRandom;

pub const MAX_DIM: usize = 3;

/// Entries below this are treated as zero when checking triangular shape.
const SHAPE_TOL: f64 = 1e-12;
/// Slack on the unit-ball membership test.
const MEMBERSHIP_TOL: f64 = 1e-10;

#[derive(Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(into = "Vec<Vec<f64>>", try_from = "Vec<Vec<f64>>")]
pub struct SquareMatrix {
    dim: usize,
    entries: [[f64; MAX_DIM]; MAX_DIM],
}

impl fmt::Debug for SquareMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.rows()).finish()
    }
}

impl SquareMatrix {
    pub fn zeros(dim: usize) -> Self {
        assert!((2..=MAX_DIM).contains(&dim), "dimension {dim} unsupported");
        SquareMatrix {
            dim,
            entries: [[0.0; MAX_DIM]; MAX_DIM],
        }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m.entries[i][i] = 1.0;
        }
        m
    }

    /// Matrix unit with a single one at `(row, col)` (zero based).
    pub fn unit(dim: usize, row: usize, col: usize) -> Self {
        let mut m = Self::zeros(dim);
        m.entries[row][col] = 1.0;
        m
    }

    pub fn diagonal(diag: &[f64]) -> Result<Self> {
        check_dim(diag.len())?;
        let mut m = Self::zeros(diag.len());
        for (i, &d) in diag.iter().enumerate() {
            m.entries[i][i] = d;
        }
        Ok(m)
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let dim = rows.len();
        check_dim(dim)?;
        let mut m = Self::zeros(dim);
        for (i, row) in rows.iter().enumerate() {
            let row = row.as_ref();
            if row.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: row.len(),
                });
            }
            m.entries[i][..dim].copy_from_slice(row);
        }
        Ok(m)
    }

    pub fn from_2x2(rows: [[f64; 2]; 2]) -> Self {
        Self::from_rows(&rows).expect("2x2 is a valid shape")
    }

    pub fn from_3x3(rows: [[f64; 3]; 3]) -> Self {
        Self::from_rows(&rows).expect("3x3 is a valid shape")
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        debug_assert!(row < self.dim && col < self.dim);
        self.entries[row][col]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, value: f64) {
        debug_assert!(row < self.dim && col < self.dim);
        self.entries[row][col] = value;
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        (0..self.dim)
            .map(|i| self.entries[i][..self.dim].to_vec())
            .collect()
    }

    pub fn map(&self, f: impl Fn(usize, usize, f64) -> f64) -> Self {
        let mut out = Self::zeros(self.dim);
        for i in 0..self.dim {
            for j in 0..self.dim {
                out.entries[i][j] = f(i, j, self.entries[i][j]);
            }
        }
        out
    }

    pub fn scale(&self, s: f64) -> Self {
        self.map(|_, _, v| v * s)
    }

    pub fn transpose(&self) -> Self {
        self.map(|i, j, _| self.entries[j][i])
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim).map(|i| self.entries[i][i]).sum()
    }

    pub fn det(&self) -> f64 {
        let e = &self.entries;
        match self.dim {
            2 => e[0][0] * e[1][1] - e[0][1] * e[1][0],
            _ => {
                e[0][0] * (e[1][1] * e[2][2] - e[1][2] * e[2][1])
                    - e[0][1] * (e[1][0] * e[2][2] - e[1][2] * e[2][0])
                    + e[0][2] * (e[1][0] * e[2][1] - e[1][1] * e[2][0])
            }
        }
    }

    /// Transposed cofactor matrix, so that `m * m.adjugate() = det(m) I`.
    pub fn adjugate(&self) -> Self {
        let e = &self.entries;
        match self.dim {
            2 => Self::from_2x2([[e[1][1], -e[0][1]], [-e[1][0], e[0][0]]]),
            _ => {
                let mut out = Self::zeros(3);
                for i in 0..3 {
                    for j in 0..3 {
                        let (r0, r1) = ((j + 1) % 3, (j + 2) % 3);
                        let (c0, c1) = ((i + 1) % 3, (i + 2) % 3);
                        out.entries[i][j] = e[r0][c0] * e[r1][c1] - e[r0][c1] * e[r1][c0];
                    }
                }
                out
            }
        }
    }

    pub fn inverse(&self) -> Result<Self> {
        let d = self.det();
        if d == 0.0 || !d.is_finite() {
            return Err(Error::InvalidParameter("singular matrix".into()));
        }
        Ok(self.adjugate().scale(1.0 / d))
    }

    pub fn mul_vec(&self, v: &[f64]) -> Vec<f64> {
        debug_assert_eq!(v.len(), self.dim);
        (0..self.dim)
            .map(|i| (0..self.dim).map(|j| self.entries[i][j] * v[j]).sum())
            .collect()
    }

    /// Largest absolute entry.
    pub fn max_abs(&self) -> f64 {
        let mut m: f64 = 0.0;
        for i in 0..self.dim {
            for j in 0..self.dim {
                m = m.max(self.entries[i][j].abs());
            }
        }
        m
    }

    pub fn frobenius(&self) -> f64 {
        let mut s = 0.0;
        for i in 0..self.dim {
            for j in 0..self.dim {
                s += self.entries[i][j] * self.entries[i][j];
            }
        }
        s.sqrt()
    }

    /// Operator norm induced by the sup-norm on vectors (max row sum).
    pub fn op_norm_inf(&self) -> f64 {
        (0..self.dim)
            .map(|i| (0..self.dim).map(|j| self.entries[i][j].abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    /// Spectral norm, from the largest eigenvalue of `mᵀm`.
    pub fn op_norm_2(&self) -> f64 {
        let g = self.transpose() * *self;
        match self.dim {
            2 => {
                let (a, b, d) = (g.get(0, 0), g.get(0, 1), g.get(1, 1));
                let half_tr = 0.5 * (a + d);
                let disc = (0.25 * (a - d) * (a - d) + b * b).sqrt();
                (half_tr + disc).sqrt()
            }
            _ => {
                // power iteration on a 3x3 symmetric PSD matrix
                let mut v = vec![1.0, 0.7, 0.3];
                let mut lambda = 0.0;
                for _ in 0..200 {
                    let w = g.mul_vec(&v);
                    let n = w.iter().map(|x| x * x).sum::<f64>().sqrt();
                    if n == 0.0 {
                        return 0.0;
                    }
                    let next: Vec<f64> = w.iter().map(|x| x / n).collect();
                    let converged = (n - lambda).abs() <= 1e-15 * n;
                    lambda = n;
                    v = next;
                    if converged {
                        break;
                    }
                }
                lambda.sqrt()
            }
        }
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        (*self - *other).max_abs()
    }

    pub fn is_upper_unipotent(&self, tol: f64) -> bool {
        for i in 0..self.dim {
            if (self.entries[i][i] - 1.0).abs() > tol {
                return false;
            }
            for j in 0..i {
                if self.entries[i][j].abs() > tol {
                    return false;
                }
            }
        }
        true
    }
}

fn check_dim(dim: usize) -> Result<()> {
    if (2..=MAX_DIM).contains(&dim) {
        Ok(())
    } else {
        Err(Error::UnsupportedDimension(dim))
    }
}

impl From<SquareMatrix> for Vec<Vec<f64>> {
    fn from(m: SquareMatrix) -> Self {
        m.rows()
    }
}

impl TryFrom<Vec<Vec<f64>>> for SquareMatrix {
    type Error = Error;

    fn try_from(rows: Vec<Vec<f64>>) -> Result<Self> {
        SquareMatrix::from_rows(&rows)
    }
}

impl Add for SquareMatrix {
    type Output = SquareMatrix;
    fn add(self, rhs: Self) -> Self {
        assert_eq!(self.dim, rhs.dim);
        self.map(|i, j, v| v + rhs.entries[i][j])
    }
}

impl Sub for SquareMatrix {
    type Output = SquareMatrix;
    fn sub(self, rhs: Self) -> Self {
        assert_eq!(self.dim, rhs.dim);
        self.map(|i, j, v| v - rhs.entries[i][j])
    }
}

impl Neg for SquareMatrix {
    type Output = SquareMatrix;
    fn neg(self) -> Self {
        self.scale(-1.0)
    }
}

impl Mul for SquareMatrix {
    type Output = SquareMatrix;
    fn mul(self, rhs: Self) -> Self {
        assert_eq!(self.dim, rhs.dim);
        let n = self.dim;
        let mut out = SquareMatrix::zeros(n);
        for i in 0..n {
            for j in 0..n {
                let mut s = 0.0;
                for k in 0..n {
                    s += self.entries[i][k] * rhs.entries[k][j];
                }
                out.entries[i][j] = s;
            }
        }
        out
    }
}

/// Element of the Lie algebra of upper unipotent matrices.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SquareMatrix", into = "SquareMatrix")]
pub struct NilAlgebraElement(SquareMatrix);

impl NilAlgebraElement {
    pub fn new(m: SquareMatrix) -> Result<Self> {
        for i in 0..m.dim {
            for j in 0..=i {
                if m.entries[i][j] != 0.0 {
                    return Err(Error::NotNilpotent);
                }
            }
        }
        Ok(NilAlgebraElement(m))
    }

    pub fn zero(dim: usize) -> Self {
        NilAlgebraElement(SquareMatrix::zeros(dim))
    }

    /// `E_{row,col}` for `row < col` (zero based).
    pub fn unit(dim: usize, row: usize, col: usize) -> Self {
        assert!(row < col, "E_{row}{col} is not strictly upper triangular");
        NilAlgebraElement(SquareMatrix::unit(dim, row, col))
    }

    pub fn from_upper(dim: usize, upper: &[f64]) -> Result<Self> {
        check_dim(dim)?;
        let expected = dim * (dim - 1) / 2;
        if upper.len() != expected {
            return Err(Error::DimensionMismatch {
                expected,
                got: upper.len(),
            });
        }
        let mut m = SquareMatrix::zeros(dim);
        let mut it = upper.iter();
        for i in 0..dim {
            for j in (i + 1)..dim {
                m.entries[i][j] = *it.next().unwrap();
            }
        }
        Ok(NilAlgebraElement(m))
    }

    /// Strictly-upper entries in row-major order.
    pub fn upper(&self) -> Vec<f64> {
        let d = self.0.dim;
        let mut out = Vec::with_capacity(d * (d - 1) / 2);
        for i in 0..d {
            for j in (i + 1)..d {
                out.push(self.0.entries[i][j]);
            }
        }
        out
    }

    #[inline]
    pub fn matrix(&self) -> &SquareMatrix {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.dim
    }

    pub fn scale(&self, s: f64) -> Self {
        NilAlgebraElement(self.0.scale(s))
    }

    pub fn bracket(&self, other: &Self) -> Self {
        NilAlgebraElement(self.0 * other.0 - other.0 * self.0)
    }

    pub fn norm_inf(&self) -> f64 {
        self.0.max_abs()
    }

    fn strip_lower(m: SquareMatrix) -> Self {
        NilAlgebraElement(m.map(|i, j, v| if i < j { v } else { 0.0 }))
    }
}

impl From<NilAlgebraElement> for SquareMatrix {
    fn from(x: NilAlgebraElement) -> Self {
        x.0
    }
}

impl TryFrom<SquareMatrix> for NilAlgebraElement {
    type Error = Error;
    fn try_from(m: SquareMatrix) -> Result<Self> {
        NilAlgebraElement::new(m)
    }
}

impl Add for NilAlgebraElement {
    type Output = NilAlgebraElement;
    fn add(self, rhs: Self) -> Self {
        NilAlgebraElement(self.0 + rhs.0)
    }
}

impl Sub for NilAlgebraElement {
    type Output = NilAlgebraElement;
    fn sub(self, rhs: Self) -> Self {
        NilAlgebraElement(self.0 - rhs.0)
    }
}

impl Neg for NilAlgebraElement {
    type Output = NilAlgebraElement;
    fn neg(self) -> Self {
        NilAlgebraElement(-self.0)
    }
}

/// Terminating exponential series `I + X + X²/2 + … + X^{k-1}/(k-1)!`.
pub fn nil_exp(x: &NilAlgebraElement) -> SquareMatrix {
    let k = x.dim();
    let mut out = SquareMatrix::identity(k);
    let mut power = SquareMatrix::identity(k);
    let mut factorial = 1.0;
    for n in 1..k {
        power = power * x.0;
        factorial *= n as f64;
        out = out + power.scale(1.0 / factorial);
    }
    out.map(|i, j, v| {
        if i == j {
            1.0
        } else if i > j {
            0.0
        } else {
            v
        }
    })
}

/// Terminating Mercator series `log(I + N) = N − N²/2 + …` for unipotent `g`.
pub fn nil_log(g: &SquareMatrix) -> Result<NilAlgebraElement> {
    if !g.is_upper_unipotent(SHAPE_TOL) {
        return Err(Error::NotUnipotent);
    }
    let k = g.dim();
    let n = NilAlgebraElement::strip_lower(*g).0;
    let mut out = SquareMatrix::zeros(k);
    let mut power = SquareMatrix::identity(k);
    for m in 1..k {
        power = power * n;
        let sign = if m % 2 == 1 { 1.0 } else { -1.0 };
        out = out + power.scale(sign / m as f64);
    }
    Ok(NilAlgebraElement::strip_lower(out))
}

/// Baker–Campbell–Hausdorff product `log(exp X · exp Y)`. The series
/// terminates in a nilpotent algebra, so the product route is exact.
pub fn bch(x: &NilAlgebraElement, y: &NilAlgebraElement) -> Result<NilAlgebraElement> {
    if x.dim() != y.dim() {
        return Err(Error::DimensionMismatch {
            expected: x.dim(),
            got: y.dim(),
        });
    }
    nil_log(&(nil_exp(x) * nil_exp(y)))
}

/// One-parameter diagonal semigroup `a_t = diag(e^{w_1 t}, …, e^{w_k t})`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiagonalFlow {
    weights: Vec<f64>,
}

impl DiagonalFlow {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        check_dim(weights.len())?;
        let sum: f64 = weights.iter().sum();
        if sum.abs() > 1e-12 {
            return Err(Error::InvalidParameter(format!(
                "flow weights must sum to zero, got {sum:e}"
            )));
        }
        Ok(DiagonalFlow { weights })
    }

    /// `diag(e^{t/2}, e^{-t/2})`, normalized so that `a_{log R} u_s a_{-log R} = u_{Rs}`.
    pub fn sl2() -> Self {
        DiagonalFlow {
            weights: vec![0.5, -0.5],
        }
    }

    /// `diag(e^t, 1, e^{-t})`.
    pub fn sl3() -> Self {
        DiagonalFlow {
            weights: vec![1.0, 0.0, -1.0],
        }
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn dim(&self) -> usize {
        self.weights.len()
    }

    /// Eigenvalue of `ad(log a_1)` on the matrix unit `E_{ij}`.
    #[inline]
    pub fn root(&self, i: usize, j: usize) -> f64 {
        self.weights[i] - self.weights[j]
    }

    pub fn at(&self, t: f64) -> SquareMatrix {
        let d: Vec<f64> = self.weights.iter().map(|w| (w * t).exp()).collect();
        SquareMatrix::diagonal(&d).expect("flow dimension already checked")
    }

    /// `a_t h a_{-t}`, computed entrywise as `h_ij e^{(w_i - w_j) t}`.
    pub fn conjugate(&self, t: f64, h: &SquareMatrix) -> SquareMatrix {
        assert_eq!(h.dim(), self.dim());
        h.map(|i, j, v| {
            if i == j {
                v
            } else {
                v * (self.root(i, j) * t).exp()
            }
        })
    }

    pub fn conjugate_algebra(&self, t: f64, x: &NilAlgebraElement) -> NilAlgebraElement {
        NilAlgebraElement(self.conjugate(t, &x.0))
    }

    /// `ad(log a_1) X = [D, X]` with `D = diag(weights)`.
    pub fn ad(&self, x: &SquareMatrix) -> SquareMatrix {
        x.map(|i, j, v| self.root(i, j) * v)
    }
}

/// Decomposition `X = X⁻ + X⁰ + X⁺` into contracted, neutral and expanded parts.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LieSplitting {
    pub minus: SquareMatrix,
    pub zero: SquareMatrix,
    pub plus: SquareMatrix,
}

impl LieSplitting {
    pub fn reconstruct(&self) -> SquareMatrix {
        self.minus + self.zero + self.plus
    }
}

pub fn split_by_weights(flow: &DiagonalFlow, x: &SquareMatrix) -> LieSplitting {
    assert_eq!(flow.dim(), x.dim());
    let pick = |keep: fn(f64) -> bool| x.map(|i, j, v| if keep(flow.root(i, j)) { v } else { 0.0 });
    LieSplitting {
        minus: pick(|w| w < 0.0),
        zero: pick(|w| w == 0.0),
        plus: pick(|w| w > 0.0),
    }
}

/// A unipotent subgroup expanded by the flow, given by a basis of
/// `ad(log a_1)`-eigenvectors of its Lie algebra.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HoroSubgroup {
    flow: DiagonalFlow,
    basis: Vec<NilAlgebraElement>,
    eigenvalues: Vec<f64>,
    d_h: f64,
    /// Inverse Gram matrix of the basis, for coordinate extraction.
    gram_inv: Vec<Vec<f64>>,
}

impl HoroSubgroup {
    pub fn new(flow: DiagonalFlow, basis: Vec<NilAlgebraElement>) -> Result<Self> {
        if basis.is_empty() {
            return Err(Error::InvalidParameter("empty basis".into()));
        }
        let mut eigenvalues = Vec::with_capacity(basis.len());
        for b in &basis {
            if b.dim() != flow.dim() {
                return Err(Error::DimensionMismatch {
                    expected: flow.dim(),
                    got: b.dim(),
                });
            }
            eigenvalues.push(eigenvalue_of(&flow, b)?);
        }
        let gram: Vec<Vec<f64>> = basis
            .iter()
            .map(|u| {
                basis
                    .iter()
                    .map(|v| frob_inner(u.matrix(), v.matrix()))
                    .collect()
            })
            .collect();
        let gram_inv = invert_small(&gram)
            .ok_or_else(|| Error::InvalidParameter("basis is linearly dependent".into()))?;
        let mut h = HoroSubgroup {
            flow,
            basis,
            eigenvalues,
            d_h: 0.0,
            gram_inv,
        };
        h.d_h = compute_d_h(&h);
        Ok(h)
    }

    /// Upper unipotent subgroup of SL2 with the `sl2` flow.
    pub fn sl2_upper() -> Self {
        Self::new(DiagonalFlow::sl2(), vec![NilAlgebraElement::unit(2, 0, 1)])
            .expect("standard basis is valid")
    }

    /// Full upper unipotent (Heisenberg) subgroup of SL3 with the `sl3` flow.
    pub fn heisenberg_sl3() -> Self {
        Self::new(
            DiagonalFlow::sl3(),
            vec![
                NilAlgebraElement::unit(3, 0, 1),
                NilAlgebraElement::unit(3, 0, 2),
                NilAlgebraElement::unit(3, 1, 2),
            ],
        )
        .expect("standard basis is valid")
    }

    /// The one-dimensional corner subgroup `exp(span E13)` of SL3.
    pub fn corner_sl3() -> Self {
        Self::new(DiagonalFlow::sl3(), vec![NilAlgebraElement::unit(3, 0, 2)])
            .expect("standard basis is valid")
    }

    pub fn flow(&self) -> &DiagonalFlow {
        &self.flow
    }

    pub fn basis(&self) -> &[NilAlgebraElement] {
        &self.basis
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn dim_h(&self) -> usize {
        self.basis.len()
    }

    pub fn dim(&self) -> usize {
        self.flow.dim()
    }

    pub fn d_h(&self) -> f64 {
        self.d_h
    }

    /// Trace of `ad(log a_1)` restricted to `Lie(H)`, computed from the matrix
    /// of the restricted operator in the basis rather than from the stored
    /// eigenvalues.
    pub fn restricted_ad_trace(&self) -> f64 {
        let mut tr = 0.0;
        for (j, b) in self.basis.iter().enumerate() {
            let image = NilAlgebraElement::strip_lower(self.flow.ad(b.matrix()));
            let c = self
                .coords(&image)
                .expect("Lie(H) is ad-invariant for a valid subgroup");
            tr += c[j];
        }
        tr
    }

    pub fn from_coords(&self, coords: &[f64]) -> NilAlgebraElement {
        assert_eq!(coords.len(), self.basis.len());
        let mut m = SquareMatrix::zeros(self.dim());
        for (c, b) in coords.iter().zip(&self.basis) {
            m = m + b.matrix().scale(*c);
        }
        NilAlgebraElement(m)
    }

    /// Coordinates of `x` in the basis; fails when `x ∉ Lie(H)`.
    pub fn coords(&self, x: &NilAlgebraElement) -> Result<Vec<f64>> {
        let rhs: Vec<f64> = self
            .basis
            .iter()
            .map(|b| frob_inner(b.matrix(), x.matrix()))
            .collect();
        let c: Vec<f64> = self
            .gram_inv
            .iter()
            .map(|row| row.iter().zip(&rhs).map(|(a, b)| a * b).sum())
            .collect();
        let residual = (self.from_coords(&c).0 - x.0).max_abs();
        if residual > 1e-9 * (1.0 + x.norm_inf()) {
            return Err(Error::NotInSubgroup(residual));
        }
        Ok(c)
    }

    /// Lie coordinates of a group element of `H`.
    pub fn log_coords(&self, h: &SquareMatrix) -> Result<Vec<f64>> {
        self.coords(&nil_log(h)?)
    }
}

fn eigenvalue_of(flow: &DiagonalFlow, x: &NilAlgebraElement) -> Result<f64> {
    let m = x.matrix();
    let mut value: Option<f64> = None;
    for i in 0..m.dim() {
        for j in (i + 1)..m.dim() {
            if m.get(i, j) == 0.0 {
                continue;
            }
            let w = flow.root(i, j);
            match value {
                None => value = Some(w),
                Some(v) if (v - w).abs() <= 1e-12 => {}
                Some(_) => {
                    return Err(Error::InvalidParameter(
                        "basis element is not an ad-eigenvector".into(),
                    ))
                }
            }
        }
    }
    match value {
        Some(v) if v > 0.0 => Ok(v),
        Some(_) => Err(Error::InvalidParameter(
            "basis element is not expanded by the flow".into(),
        )),
        None => Err(Error::InvalidParameter("zero basis element".into())),
    }
}

/// `d_H`: sum of the expansion rates over a basis of `Lie(H)`.
pub fn compute_d_h(h: &HoroSubgroup) -> f64 {
    h.eigenvalues.iter().sum()
}

fn frob_inner(a: &SquareMatrix, b: &SquareMatrix) -> f64 {
    let mut s = 0.0;
    for i in 0..a.dim() {
        for j in 0..a.dim() {
            s += a.get(i, j) * b.get(i, j);
        }
    }
    s
}

/// Gauss–Jordan inverse for the tiny Gram matrices used here.
pub(crate) fn invert_small(m: &[Vec<f64>]) -> Option<Vec<Vec<f64>>> {
    let n = m.len();
    let mut a: Vec<Vec<f64>> = m
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let mut r = row.clone();
            r.extend((0..n).map(|j| if i == j { 1.0 } else { 0.0 }));
            r
        })
        .collect();
    for col in 0..n {
        let pivot = (col..n).max_by(|&x, &y| a[x][col].abs().total_cmp(&a[y][col].abs()))?;
        if a[pivot][col].abs() < 1e-14 {
            return None;
        }
        a.swap(col, pivot);
        let p = a[col][col];
        for v in a[col].iter_mut() {
            *v /= p;
        }
        let pivot = a[col].clone();
        for (row, r) in a.iter_mut().enumerate() {
            let f = r[col];
            if row != col && f != 0.0 {
                for (v, p) in r.iter_mut().zip(&pivot) {
                    *v -= f * p;
                }
            }
        }
    }
    Some(a.into_iter().map(|r| r[n..].to_vec()).collect())
}

/// `B_R^H = a_{log R} B_1^H a_{-log R}` where `B_1^H` is the exponential of
/// the unit sup-norm cube in the basis coordinates of `Lie(H)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FolnerBall {
    subgroup: HoroSubgroup,
    radius: f64,
}

impl FolnerBall {
    pub fn new(subgroup: HoroSubgroup, radius: f64) -> Result<Self> {
        if !(radius > 0.0) || !radius.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "Følner radius must be positive, got {radius}"
            )));
        }
        Ok(FolnerBall { subgroup, radius })
    }

    pub fn subgroup(&self) -> &HoroSubgroup {
        &self.subgroup
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    /// Volume of the unit ball in Lie coordinates.
    pub fn unit_volume(&self) -> f64 {
        2f64.powi(self.subgroup.dim_h() as i32)
    }

    /// `R^{d_H} · vol(B_1)`.
    pub fn volume(&self) -> f64 {
        self.radius.powf(self.subgroup.d_h()) * self.unit_volume()
    }

    /// Half side lengths `R^{λ_i}` of the coordinate box `log B_R`.
    pub fn half_widths(&self) -> Vec<f64> {
        self.subgroup
            .eigenvalues()
            .iter()
            .map(|l| self.radius.powf(*l))
            .collect()
    }

    pub fn contains(&self, h: &SquareMatrix) -> bool {
        if h.dim() != self.subgroup.dim() {
            return false;
        }
        let back = self.subgroup.flow().conjugate(-self.radius.ln(), h);
        match self.subgroup.log_coords(&back) {
            Ok(c) => c.iter().all(|v| v.abs() <= 1.0 + MEMBERSHIP_TOL),
            Err(_) => false,
        }
    }

    /// Quasi-uniform Lie coordinates of points of `B_R` (Haar-uniform, since
    /// Haar measure is Lebesgue in exponential coordinates).
    pub fn sample_coords(&self, n: usize, seed: u64) -> Vec<Vec<f64>> {
        let widths = self.half_widths();
        let stream = QuasiRandom::new(widths.len(), seed);
        (0..n)
            .map(|i| {
                stream
                    .point(i as u64)
                    .iter()
                    .zip(&widths)
                    .map(|(u, w)| (2.0 * u - 1.0) * w)
                    .collect()
            })
            .collect()
    }

    /// Quasi-uniform points of `B_1`, conjugated into `B_R` by `a_{log R}`.
    pub fn sample(&self, n: usize, seed: u64) -> Vec<SquareMatrix> {
        let stream = QuasiRandom::new(self.subgroup.dim_h(), seed);
        let log_r = self.radius.ln();
        (0..n)
            .map(|i| {
                let c: Vec<f64> = stream
                    .point(i as u64)
                    .iter()
                    .map(|u| 2.0 * u - 1.0)
                    .collect();
                let unit = nil_exp(&self.subgroup.from_coords(&c));
                self.subgroup.flow().conjugate(log_r, &unit)
            })
            .collect()
    }

    /// Monte Carlo estimate of `vol(b·B_R △ B_R) / vol(B_R)`.
    ///
    /// By left invariance, `vol(bB \ B) = vol{h ∈ B : bh ∉ B}` and
    /// `vol(B \ bB) = vol{h ∈ B : b⁻¹h ∉ B}`, so both halves are estimated
    /// from the same sample of `B_R`.
    pub fn boundary_ratio(&self, b: &SquareMatrix, n_samples: usize, seed: u64) -> Result<f64> {
        if n_samples == 0 {
            return Err(Error::InvalidParameter("n_samples must be positive".into()));
        }
        self.subgroup.log_coords(b)?;
        let b_inv = b.inverse()?;
        let mut outside = 0usize;
        for h in self.sample(n_samples, seed) {
            if !self.contains(&(*b * h)) {
                outside += 1;
            }
            if !self.contains(&(b_inv * h)) {
                outside += 1;
            }
        }
        Ok(outside as f64 / n_samples as f64)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_nil(rng: &mut ChaCha8Rng, dim: usize) -> NilAlgebraElement {
        let n = dim * (dim - 1) / 2;
        let v: Vec<f64> = (0..n).map(|_| rng.gen_range(-5.0..5.0)).collect();
        NilAlgebraElement::from_upper(dim, &v).unwrap()
    }

    #[test]
    fn exp_of_corner_is_linear() {
        let x = NilAlgebraElement::unit(3, 0, 2).scale(2.5);
        let g = nil_exp(&x);
        let expected = SquareMatrix::identity(3) + x.matrix().to_owned();
        assert_eq!(g, expected);
    }

    #[test]
    fn exp_of_regular_nilpotent_matches_orbit() {
        let alpha: f64 = 0.618;
        let t = 3.7;
        let u = alpha.sqrt() * t;
        let x = (NilAlgebraElement::unit(3, 0, 1) + NilAlgebraElement::unit(3, 1, 2)).scale(u);
        let g = nil_exp(&x);
        let expected = SquareMatrix::from_3x3([
            [1.0, u, alpha * t * t / 2.0],
            [0.0, 1.0, u],
            [0.0, 0.0, 1.0],
        ]);
        assert!(g.max_abs_diff(&expected) < 1e-12);
        assert_eq!(
            nil_exp(&NilAlgebraElement::zero(3)),
            SquareMatrix::identity(3)
        );
    }

    #[test]
    fn log_inverts_exp() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for dim in [2, 3] {
            for _ in 0..100 {
                let x = random_nil(&mut rng, dim);
                let back = nil_log(&nil_exp(&x)).unwrap();
                assert!((back - x).norm_inf() < 1e-12);
            }
        }
        let g = SquareMatrix::from_3x3([[1.0, 1.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]);
        assert_eq!(nil_log(&g).unwrap(), NilAlgebraElement::unit(3, 0, 1));
        assert_eq!(
            nil_log(&SquareMatrix::identity(3)).unwrap(),
            NilAlgebraElement::zero(3)
        );
    }

    #[test]
    fn log_rejects_non_unipotent() {
        let g = SquareMatrix::from_2x2([[2.0, 0.0], [0.0, 0.5]]);
        assert_eq!(nil_log(&g), Err(Error::NotUnipotent));
        let g = SquareMatrix::from_2x2([[1.0, 0.0], [1.0, 1.0]]);
        assert_eq!(nil_log(&g), Err(Error::NotUnipotent));
    }

    #[test]
    fn nil_element_rejects_diagonal() {
        let m = SquareMatrix::identity(2);
        assert_eq!(NilAlgebraElement::new(m), Err(Error::NotNilpotent));
    }

    #[test]
    fn bch_of_heisenberg_generators() {
        let e12 = NilAlgebraElement::unit(3, 0, 1);
        let e23 = NilAlgebraElement::unit(3, 1, 2);
        let e13 = NilAlgebraElement::unit(3, 0, 2);
        // log(exp E12 exp E23) from the explicit product [[1,1,1],[0,1,1],[0,0,1]]
        let product = SquareMatrix::from_3x3([[1.0, 1.0, 1.0], [0.0, 1.0, 1.0], [0.0, 0.0, 1.0]]);
        assert_eq!(nil_exp(&e12) * nil_exp(&e23), product);
        let z = bch(&e12, &e23).unwrap();
        assert!((z - (e12 + e23 + e13.scale(0.5))).norm_inf() < 1e-15);
        let x = e12.scale(1.3) + e13.scale(-0.2);
        assert_eq!(bch(&x, &NilAlgebraElement::zero(3)).unwrap(), x);
        assert!(bch(&x, &-x).unwrap().norm_inf() < 1e-15);
        assert!(matches!(
            bch(&x, &NilAlgebraElement::zero(2)),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn flow_conjugation_scales_by_root() {
        let a = DiagonalFlow::sl2();
        let s = 0.75;
        let r: f64 = 40.0;
        let u = SquareMatrix::from_2x2([[1.0, s], [0.0, 1.0]]);
        let direct = a.at(r.ln()) * u * a.at(-r.ln());
        let conj = a.conjugate(r.ln(), &u);
        assert!(direct.max_abs_diff(&conj) < 1e-12);
        assert!(conj.max_abs_diff(&SquareMatrix::from_2x2([[1.0, r * s], [0.0, 1.0]])) < 1e-12);
        assert_eq!(a.conjugate(0.0, &u), u);

        let b = DiagonalFlow::sl3();
        let c = 0.3;
        let t: f64 = 1.1;
        let h = nil_exp(&NilAlgebraElement::unit(3, 0, 2).scale(c));
        let expected = nil_exp(&NilAlgebraElement::unit(3, 0, 2).scale(c * (2.0 * t).exp()));
        assert!(b.conjugate(t, &h).max_abs_diff(&expected) < 1e-12);
    }

    #[test]
    fn flow_rejects_nonunimodular_weights() {
        assert!(DiagonalFlow::new(vec![1.0, 0.5]).is_err());
    }

    #[test]
    fn d_h_values() {
        assert_eq!(HoroSubgroup::sl2_upper().d_h(), 1.0);
        assert_eq!(HoroSubgroup::heisenberg_sl3().d_h(), 4.0);
        assert_eq!(HoroSubgroup::corner_sl3().d_h(), 2.0);
        for h in [
            HoroSubgroup::sl2_upper(),
            HoroSubgroup::heisenberg_sl3(),
            HoroSubgroup::corner_sl3(),
        ] {
            assert!((h.restricted_ad_trace() - h.d_h()).abs() < 1e-12);
        }
    }

    #[test]
    fn subgroup_rejects_contracted_directions() {
        let basis = vec![NilAlgebraElement::unit(2, 0, 1)];
        let flipped = DiagonalFlow::new(vec![-0.5, 0.5]).unwrap();
        assert!(HoroSubgroup::new(flipped, basis).is_err());
        let mixed = NilAlgebraElement::unit(3, 0, 1) + NilAlgebraElement::unit(3, 0, 2);
        assert!(HoroSubgroup::new(DiagonalFlow::sl3(), vec![mixed]).is_err());
    }

    #[test]
    fn folner_interval_volume_and_membership() {
        let ball = FolnerBall::new(HoroSubgroup::sl2_upper(), 8.0).unwrap();
        assert!((ball.volume() - 16.0).abs() < 1e-12);
        let inside = SquareMatrix::from_2x2([[1.0, 7.9], [0.0, 1.0]]);
        let outside = SquareMatrix::from_2x2([[1.0, 8.1], [0.0, 1.0]]);
        assert!(ball.contains(&inside));
        assert!(!ball.contains(&outside));
        for seed in 0..10 {
            let p = ball.sample(1, seed)[0];
            assert!(ball.contains(&p));
        }
        assert!(FolnerBall::new(HoroSubgroup::sl2_upper(), 0.0).is_err());
        assert!(FolnerBall::new(HoroSubgroup::sl2_upper(), -1.0).is_err());
    }

    #[test]
    fn federer_ratio_is_power_of_three() {
        for h in [HoroSubgroup::sl2_upper(), HoroSubgroup::heisenberg_sl3()] {
            for r in [1.0, 10.0, 123.4] {
                let small = FolnerBall::new(h.clone(), r).unwrap();
                let big = FolnerBall::new(h.clone(), 3.0 * r).unwrap();
                let ratio = big.volume() / small.volume();
                assert!((ratio / 3f64.powf(h.d_h()) - 1.0).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn boundary_ratio_of_interval_shift() {
        let r = 50.0;
        let ball = FolnerBall::new(HoroSubgroup::sl2_upper(), r).unwrap();
        for s in [0.5, 2.0, 10.0] {
            let b = SquareMatrix::from_2x2([[1.0, s], [0.0, 1.0]]);
            let est = ball.boundary_ratio(&b, 20_000, 3).unwrap();
            assert!((est - s / r).abs() < 2e-3, "s={s}: {est} vs {}", s / r);
        }
        let e = SquareMatrix::identity(2);
        assert_eq!(ball.boundary_ratio(&e, 1000, 3).unwrap(), 0.0);
        let not_in_h = SquareMatrix::from_2x2([[1.0, 0.0], [1.0, 1.0]]);
        assert!(ball.boundary_ratio(&not_in_h, 10, 0).is_err());
    }

    #[test]
    fn split_examples() {
        let a = DiagonalFlow::sl2();
        let x = SquareMatrix::from_2x2([[0.3, 1.5], [-2.0, -0.3]]);
        let s = split_by_weights(&a, &x);
        assert_eq!(s.plus, SquareMatrix::unit(2, 0, 1).scale(1.5));
        assert_eq!(s.minus, SquareMatrix::unit(2, 1, 0).scale(-2.0));
        assert_eq!(s.zero, SquareMatrix::diagonal(&[0.3, -0.3]).unwrap());
        let z = split_by_weights(&a, &SquareMatrix::zeros(2));
        assert_eq!(z.reconstruct(), SquareMatrix::zeros(2));
        assert_eq!(z.plus, SquareMatrix::zeros(2));
    }

    #[test]
    fn inverse_and_det() {
        let g = SquareMatrix::from_3x3([[2.0, 1.0, 0.5], [0.0, 1.0, 3.0], [1.0, -1.0, 1.0]]);
        let inv = g.inverse().unwrap();
        assert!((g * inv).max_abs_diff(&SquareMatrix::identity(3)) < 1e-12);
        let h = SquareMatrix::from_2x2([[2.0, 3.0], [1.0, 2.0]]);
        assert_eq!(h.det(), 1.0);
        assert!((h * h.inverse().unwrap()).max_abs_diff(&SquareMatrix::identity(2)) < 1e-15);
    }

    #[test]
    fn spectral_norm_of_diagonal() {
        let d = SquareMatrix::diagonal(&[3.0, 0.5, 1.0]).unwrap();
        assert!((d.op_norm_2() - 3.0).abs() < 1e-9);
        let d2 = SquareMatrix::diagonal(&[0.25, 4.0]).unwrap();
        assert!((d2.op_norm_2() - 4.0).abs() < 1e-12);
    }
}
