//! Small dense matrix algebra for the Hilbert-Schmidt geometry of `SL(n)`.
//!
//! [`SquareMatrix`] is the carrier for every matrix quantity in the crate
//! (points `A`, velocities `A'`, the reduced variables `beta`, `omega`,
//! `zeta`, nilpotent generators, ...). Storage is delegated to
//! [`nalgebra::DMatrix`]; LU factorisation with partial pivoting backs
//! determinants, inverses and solves. Polar decomposition and the matrix
//! exponential are implemented here because the exponential needs exact
//! special cases for nilpotent and planar-rotation generators.

use std::fmt;
use std::ops::{Add, AddAssign, Mul, Neg, Sub, SubAssign};

use nalgebra::DMatrix;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{GeoError, Result};

/// Default tolerance on `|det - 1|` for [`GroupPoint`].
pub const DEFAULT_DET_TOLERANCE: f64 = 1e-10;
/// Default relative tolerance for [`nilpotency_index`].
pub const DEFAULT_NILPOTENCY_TOLERANCE: f64 = 1e-9;

const POLAR_THRESHOLD: f64 = 1e-13;
const POLAR_MAX_ITER: usize = 100;

fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    (p, a.mul_add(b, -p))
}

/// Dense `n x n` real matrix with finite entries.
#[derive(Clone, PartialEq)]
pub struct SquareMatrix {
    data: DMatrix<f64>,
}

impl fmt::Debug for SquareMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "SquareMatrix{:?}", self.to_rows())
    }
}

impl SquareMatrix {
    pub(crate) fn from_dmatrix(data: DMatrix<f64>) -> Self {
        debug_assert_eq!(data.nrows(), data.ncols());
        SquareMatrix { data }
    }

    /// Row-major construction without validation, for integrator internals.
    pub(crate) fn from_row_slice_unchecked(n: usize, entries: &[f64]) -> Self {
        Self::from_dmatrix(DMatrix::from_row_slice(n, n, entries))
    }

    pub fn zeros(n: usize) -> Self {
        Self::from_dmatrix(DMatrix::zeros(n, n))
    }

    pub fn identity(n: usize) -> Self {
        Self::from_dmatrix(DMatrix::identity(n, n))
    }

    pub fn from_fn(n: usize, f: impl FnMut(usize, usize) -> f64) -> Self {
        Self::from_dmatrix(DMatrix::from_fn(n, n, f))
    }

    /// Diagonal matrix with the given entries.
    pub fn diag(entries: &[f64]) -> Self {
        let n = entries.len();
        Self::from_fn(n, |i, j| if i == j { entries[i] } else { 0.0 })
    }

    /// Builds a matrix from row-major entries, rejecting non-finite values.
    pub fn from_row_slice(n: usize, entries: &[f64]) -> Result<Self> {
        if n == 0 {
            return Err(GeoError::InvalidMatrix("dimension must be at least 1".into()));
        }
        if entries.len() != n * n {
            return Err(GeoError::InvalidMatrix(format!(
                "expected {} entries, got {}",
                n * n,
                entries.len()
            )));
        }
        if let Some(bad) = entries.iter().find(|v| !v.is_finite()) {
            return Err(GeoError::InvalidMatrix(format!("non-finite entry {bad}")));
        }
        Ok(Self::from_dmatrix(DMatrix::from_row_slice(n, n, entries)))
    }

    /// Builds a matrix from a list of rows (the JSON array-of-arrays layout).
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(GeoError::InvalidMatrix("rows must all have length n".into()));
        }
        let flat: Vec<f64> = rows.iter().flatten().copied().collect();
        Self::from_row_slice(n, &flat)
    }

    pub fn dim(&self) -> usize {
        self.data.nrows()
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[(i, j)]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[(i, j)] = v;
    }

    pub fn as_dmatrix(&self) -> &DMatrix<f64> {
        &self.data
    }

    /// Row-major flattening.
    pub fn to_row_vec(&self) -> Vec<f64> {
        let n = self.dim();
        let mut out = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                out.push(self.data[(i, j)]);
            }
        }
        out
    }

    /// Appends the row-major entries to `out`.
    pub fn extend_row_major(&self, out: &mut Vec<f64>) {
        let n = self.dim();
        for i in 0..n {
            for j in 0..n {
                out.push(self.data[(i, j)]);
            }
        }
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        let n = self.dim();
        (0..n).map(|i| (0..n).map(|j| self.data[(i, j)]).collect()).collect()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn transpose(&self) -> Self {
        Self::from_dmatrix(self.data.transpose())
    }

    pub fn trace(&self) -> f64 {
        self.data.trace()
    }

    pub fn scale(&self, s: f64) -> Self {
        Self::from_dmatrix(&self.data * s)
    }

    /// `<self, other> = tr(self * other^T)`; panics on dimension mismatch.
    pub fn inner(&self, other: &Self) -> f64 {
        assert_eq!(self.dim(), other.dim(), "dimension mismatch in HS inner product");
        self.data.dot(&other.data)
    }

    /// `tr(self * other)` without forming the product.
    pub fn trace_product(&self, other: &Self) -> f64 {
        let n = self.dim();
        assert_eq!(n, other.dim(), "dimension mismatch in trace product");
        let mut s = 0.0;
        for i in 0..n {
            for j in 0..n {
                s += self.data[(i, j)] * other.data[(j, i)];
            }
        }
        s
    }

    pub fn hs_norm_sq(&self) -> f64 {
        self.data.norm_squared()
    }

    pub fn hs_norm(&self) -> f64 {
        self.data.norm()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.amax()
    }

    /// Determinant via LU with partial pivoting.
    /// Determinant from an LU factorisation, corrected to first order by the
    /// factorisation residual (computed with compensated sums). The result is
    /// accurate to a few ulps well beyond the conditioning where plain LU
    /// loses digits.
    pub fn det(&self) -> f64 {
        let n = self.dim();
        let lu = self.data.clone().lu();
        let det = lu.determinant();
        if n == 0 || det == 0.0 || !det.is_finite() {
            return det;
        }
        let (l, u) = (lu.l(), lu.u());
        let mut pa = self.data.clone();
        lu.p().permute_rows(&mut pa);
        let mut r = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                let mut sum = pa[(i, j)];
                let mut comp = 0.0;
                for k in 0..=i.min(j) {
                    let (prod, perr) = two_prod(-l[(i, k)], u[(k, j)]);
                    let (s2, serr) = two_sum(sum, prod);
                    sum = s2;
                    comp += serr + perr;
                }
                r[(i, j)] = sum + comp;
            }
        }
        let ok = l.solve_lower_triangular_mut(&mut r) && u.solve_upper_triangular_mut(&mut r);
        if !ok {
            return det;
        }
        det * (1.0 + r.trace())
    }

    pub fn inverse(&self) -> Option<Self> {
        let inv = self.data.clone().lu().try_inverse()?;
        let m = Self::from_dmatrix(inv);
        m.is_finite().then_some(m)
    }

    /// Solves `self * X = rhs`.
    pub fn solve(&self, rhs: &Self) -> Option<Self> {
        let x = self.data.clone().lu().solve(&rhs.data)?;
        let m = Self::from_dmatrix(x);
        m.is_finite().then_some(m)
    }

    pub fn symmetric_part(&self) -> Self {
        Self::from_dmatrix((&self.data + self.data.transpose()) * 0.5)
    }

    pub fn skew_part(&self) -> Self {
        Self::from_dmatrix((&self.data - self.data.transpose()) * 0.5)
    }

    /// `||A - A^T|| <= tol * max(1, ||A||)`.
    pub fn is_symmetric(&self, tol: f64) -> bool {
        (&self.data - self.data.transpose()).norm() <= tol * self.hs_norm().max(1.0)
    }

    /// `||A + A^T|| <= tol * max(1, ||A||)`.
    pub fn is_antisymmetric(&self, tol: f64) -> bool {
        (&self.data + self.data.transpose()).norm() <= tol * self.hs_norm().max(1.0)
    }

    pub fn powi(&self, k: u32) -> Self {
        let mut out = Self::identity(self.dim());
        for _ in 0..k {
            out = &out * self;
        }
        out
    }

    /// Block-diagonal assembly `blocks[0] (+) blocks[1] (+) ...`.
    pub fn direct_sum(blocks: &[SquareMatrix]) -> Self {
        let n: usize = blocks.iter().map(|b| b.dim()).sum();
        let mut out = DMatrix::zeros(n, n);
        let mut off = 0;
        for b in blocks {
            let k = b.dim();
            out.view_mut((off, off), (k, k)).copy_from(&b.data);
            off += k;
        }
        Self::from_dmatrix(out)
    }

    /// Cholesky test for positive definiteness (symmetric part only).
    pub fn is_positive_definite(&self) -> bool {
        self.symmetric_part().data.cholesky().is_some()
    }

    /// Eigenvalues of the symmetric part, ascending.
    pub fn symmetric_eigenvalues(&self) -> Vec<f64> {
        let mut ev: Vec<f64> = self
            .symmetric_part()
            .data
            .symmetric_eigenvalues()
            .iter()
            .copied()
            .collect();
        ev.sort_by(|a, b| a.total_cmp(b));
        ev
    }
}

/// The 2x2 block `diag(1, -1)`.
pub fn k2() -> SquareMatrix {
    SquareMatrix::diag(&[1.0, -1.0])
}

/// The 2x2 block `[[0, 1], [1, 0]]`.
pub fn s2() -> SquareMatrix {
    SquareMatrix::from_fn(2, |i, j| if i != j { 1.0 } else { 0.0 })
}

/// The 2x2 rotation generator `[[0, -1], [1, 0]]`.
pub fn z2() -> SquareMatrix {
    SquareMatrix::from_fn(2, |i, j| match (i, j) {
        (0, 1) => -1.0,
        (1, 0) => 1.0,
        _ => 0.0,
    })
}

/// Planar rotation by angle `theta`.
pub fn rotation2(theta: f64) -> SquareMatrix {
    let (s, c) = theta.sin_cos();
    SquareMatrix::from_fn(2, |i, j| match (i, j) {
        (0, 0) | (1, 1) => c,
        (0, 1) => -s,
        _ => s,
    })
}

macro_rules! binop {
    ($tr:ident, $m:ident, $op:tt) => {
        impl $tr<&SquareMatrix> for &SquareMatrix {
            type Output = SquareMatrix;
            fn $m(self, rhs: &SquareMatrix) -> SquareMatrix {
                SquareMatrix::from_dmatrix(&self.data $op &rhs.data)
            }
        }
        impl $tr<SquareMatrix> for SquareMatrix {
            type Output = SquareMatrix;
            fn $m(self, rhs: SquareMatrix) -> SquareMatrix {
                SquareMatrix::from_dmatrix(self.data $op rhs.data)
            }
        }
        impl $tr<&SquareMatrix> for SquareMatrix {
            type Output = SquareMatrix;
            fn $m(self, rhs: &SquareMatrix) -> SquareMatrix {
                SquareMatrix::from_dmatrix(self.data $op &rhs.data)
            }
        }
        impl $tr<SquareMatrix> for &SquareMatrix {
            type Output = SquareMatrix;
            fn $m(self, rhs: SquareMatrix) -> SquareMatrix {
                SquareMatrix::from_dmatrix(&self.data $op rhs.data)
            }
        }
    };
}

binop!(Add, add, +);
binop!(Sub, sub, -);
binop!(Mul, mul, *);

impl Mul<f64> for &SquareMatrix {
    type Output = SquareMatrix;
    fn mul(self, rhs: f64) -> SquareMatrix {
        self.scale(rhs)
    }
}

impl Mul<f64> for SquareMatrix {
    type Output = SquareMatrix;
    fn mul(self, rhs: f64) -> SquareMatrix {
        SquareMatrix::from_dmatrix(self.data * rhs)
    }
}

impl Neg for &SquareMatrix {
    type Output = SquareMatrix;
    fn neg(self) -> SquareMatrix {
        self.scale(-1.0)
    }
}

impl Neg for SquareMatrix {
    type Output = SquareMatrix;
    fn neg(self) -> SquareMatrix {
        SquareMatrix::from_dmatrix(-self.data)
    }
}

impl AddAssign<&SquareMatrix> for SquareMatrix {
    fn add_assign(&mut self, rhs: &SquareMatrix) {
        self.data += &rhs.data;
    }
}

impl SubAssign<&SquareMatrix> for SquareMatrix {
    fn sub_assign(&mut self, rhs: &SquareMatrix) {
        self.data -= &rhs.data;
    }
}

impl Serialize for SquareMatrix {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_rows().serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for SquareMatrix {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let rows = Vec::<Vec<f64>>::deserialize(deserializer)?;
        SquareMatrix::from_rows(&rows).map_err(serde::de::Error::custom)
    }
}

/// Checked Hilbert-Schmidt inner product `tr(A B^T)`.
pub fn hs_inner(a: &SquareMatrix, b: &SquareMatrix) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(GeoError::DimensionMismatch {
            left: a.dim(),
            right: b.dim(),
        });
    }
    Ok(a.inner(b))
}

pub fn hs_norm(a: &SquareMatrix) -> f64 {
    a.hs_norm()
}

/// Splits `V` into its symmetric and antisymmetric parts.
pub fn sym_skew_split(v: &SquareMatrix) -> (SquareMatrix, SquareMatrix) {
    (v.symmetric_part(), v.skew_part())
}

/// A point of `SL(n)`, with its inverse cached.
#[derive(Clone, Debug, PartialEq)]
pub struct GroupPoint {
    mat: SquareMatrix,
    inv: SquareMatrix,
    det_tolerance: f64,
}

impl GroupPoint {
    pub fn new(mat: SquareMatrix) -> Result<Self> {
        Self::with_tolerance(mat, DEFAULT_DET_TOLERANCE)
    }

    pub fn with_tolerance(mat: SquareMatrix, det_tolerance: f64) -> Result<Self> {
        if !mat.is_finite() {
            return Err(GeoError::InvalidMatrix("non-finite entries".into()));
        }
        let det = mat.det();
        let deviation = (det - 1.0).abs();
        if !(deviation <= det_tolerance) {
            return Err(GeoError::NotInGroup {
                deviation,
                tolerance: det_tolerance,
            });
        }
        let n = mat.dim() as f64;
        // AM-GM on the squared singular values: ||A||^2 >= n.
        debug_assert!(mat.hs_norm_sq() >= n * (1.0 - 1e-8));
        let inv = mat
            .inverse()
            .ok_or(GeoError::NotPositiveDeterminant { det })?;
        Ok(GroupPoint {
            mat,
            inv,
            det_tolerance,
        })
    }

    /// Rescales a matrix with positive determinant onto `SL(n)`.
    pub fn normalized(mat: SquareMatrix) -> Result<Self> {
        let det = mat.det();
        if !(det > 0.0) || !det.is_finite() {
            return Err(GeoError::NotPositiveDeterminant { det });
        }
        let s = det.powf(-1.0 / mat.dim() as f64);
        Self::new(mat.scale(s))
    }

    pub fn identity(n: usize) -> Self {
        GroupPoint {
            mat: SquareMatrix::identity(n),
            inv: SquareMatrix::identity(n),
            det_tolerance: DEFAULT_DET_TOLERANCE,
        }
    }

    pub fn matrix(&self) -> &SquareMatrix {
        &self.mat
    }

    pub fn inverse(&self) -> &SquareMatrix {
        &self.inv
    }

    pub fn dim(&self) -> usize {
        self.mat.dim()
    }

    pub fn det_tolerance(&self) -> f64 {
        self.det_tolerance
    }

    pub fn into_matrix(self) -> SquareMatrix {
        self.mat
    }
}

/// `A = rotation * stretch` with `rotation` in `SO(n)` and `stretch` SPD.
#[derive(Clone, Debug, PartialEq)]
pub struct PolarFactors {
    pub rotation: SquareMatrix,
    pub stretch: SquareMatrix,
}

/// Polar decomposition by the scaled Newton iteration `X <- (X + X^-T)/2`.
pub fn polar_decompose(a: &SquareMatrix) -> Result<PolarFactors> {
    let det = a.det();
    if !(det > 0.0) || !det.is_finite() {
        return Err(GeoError::NotPositiveDeterminant { det });
    }
    let mut x = a.clone();
    let mut residual = f64::INFINITY;
    let mut converged = false;
    for _ in 0..POLAR_MAX_ITER {
        let xinv = x
            .inverse()
            .ok_or(GeoError::NotPositiveDeterminant { det })?;
        // Frobenius scaling while far from convergence.
        let gamma = if residual > 1e-2 {
            (xinv.hs_norm() / x.hs_norm()).sqrt()
        } else {
            1.0
        };
        let next = (x.scale(gamma) + xinv.transpose().scale(1.0 / gamma)).scale(0.5);
        residual = (&next - &x).hs_norm() / next.hs_norm();
        x = next;
        if residual <= POLAR_THRESHOLD {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(GeoError::PolarNoConvergence {
            iterations: POLAR_MAX_ITER,
            residual,
        });
    }
    let stretch = (x.transpose() * a).symmetric_part();
    Ok(PolarFactors {
        rotation: x,
        stretch,
    })
}

/// Smallest `k <= n` with `||M^k|| <= tol * max(1, ||M||)^k`, or `None`.
///
/// The power test is cross-checked against the trace test
/// (`tr M^j ~ 0` for `j = 1..n`, which characterises nilpotency through the
/// characteristic polynomial). Disagreement means the input is too close to
/// the nilpotent cone to decide and is reported as an error.
pub fn nilpotency_index(m: &SquareMatrix, tol: f64) -> Result<Option<usize>> {
    let n = m.dim();
    let scale = m.hs_norm().max(1.0);
    let mut power = SquareMatrix::identity(n);
    let mut power_index = None;
    let mut traces_vanish = true;
    for k in 1..=n {
        power = &power * m;
        let s = scale.powi(k as i32);
        if power_index.is_none() && power.hs_norm() <= tol * s {
            power_index = Some(k);
        }
        if power.trace().abs() > tol * s {
            traces_vanish = false;
        }
    }
    if power_index.is_some() != traces_vanish {
        return Err(GeoError::NilpotencyInconsistent {
            power_index,
            traces_vanish,
        });
    }
    Ok(power_index)
}

fn is_planar_rotation_generator(c: &SquareMatrix) -> bool {
    let n = c.dim();
    let tol = 1e-15 * c.max_abs().max(f64::MIN_POSITIVE);
    for i in 0..n {
        for j in 0..n {
            let v = c.get(i, j);
            let in_block = i / 2 == j / 2 && i != j && (i.max(j) < n - n % 2 || n % 2 == 0);
            if in_block {
                if (v + c.get(j, i)).abs() > tol {
                    return false;
                }
            } else if v.abs() > tol {
                return false;
            }
        }
    }
    true
}

/// Matrix exponential `e^C`.
///
/// Nilpotent generators give the finite series; antisymmetric generators
/// made of 2x2 diagonal blocks give exact cos/sin blocks; anything else uses
/// scaling and squaring on the truncated Taylor series.
pub fn matrix_exp(c: &SquareMatrix) -> SquareMatrix {
    let n = c.dim();
    if c.max_abs() == 0.0 {
        return SquareMatrix::identity(n);
    }
    if let Ok(Some(k)) = nilpotency_index(c, 1e-14) {
        let mut sum = SquareMatrix::identity(n);
        let mut term = SquareMatrix::identity(n);
        for j in 1..k {
            term = (&term * c).scale(1.0 / j as f64);
            sum += &term;
        }
        return sum;
    }
    if is_planar_rotation_generator(c) {
        let mut out = SquareMatrix::identity(n);
        for b in 0..n / 2 {
            let theta = c.get(2 * b + 1, 2 * b);
            let (s, co) = theta.sin_cos();
            out.set(2 * b, 2 * b, co);
            out.set(2 * b + 1, 2 * b + 1, co);
            out.set(2 * b, 2 * b + 1, -s);
            out.set(2 * b + 1, 2 * b, s);
        }
        return out;
    }
    let norm = c.hs_norm();
    let squarings = if norm > 0.5 {
        (norm / 0.5).log2().ceil() as i32
    } else {
        0
    };
    let a = c.scale(0.5f64.powi(squarings));
    let mut sum = SquareMatrix::identity(n);
    let mut term = SquareMatrix::identity(n);
    for k in 1..40 {
        term = (&term * &a).scale(1.0 / k as f64);
        sum += &term;
        if term.hs_norm() <= f64::EPSILON * 1e-2 * sum.hs_norm() {
            break;
        }
    }
    for _ in 0..squarings {
        sum = &sum * &sum;
    }
    sum
}

/// Residual `||U^T U - I||` plus a determinant-sign check.
pub fn check_special_orthogonal(u: &SquareMatrix, tol: f64) -> Result<()> {
    let n = u.dim();
    let residual = (u.transpose() * u - SquareMatrix::identity(n)).hs_norm();
    if !(residual <= tol) || u.det() <= 0.0 {
        return Err(GeoError::NotSpecialOrthogonal { residual });
    }
    Ok(())
}

/// `U A U^T` for `U` in `SO(n)`.
pub fn orthogonal_conjugate(a: &SquareMatrix, u: &SquareMatrix) -> Result<SquareMatrix> {
    if a.dim() != u.dim() {
        return Err(GeoError::DimensionMismatch {
            left: a.dim(),
            right: u.dim(),
        });
    }
    check_special_orthogonal(u, 1e-10)?;
    Ok(u * a * u.transpose())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn close(a: &SquareMatrix, b: &SquareMatrix, tol: f64) -> bool {
        (a - b).hs_norm() <= tol
    }

    #[test]
    fn hs_inner_examples() {
        let i2 = SquareMatrix::identity(2);
        assert_eq!(hs_inner(&i2, &i2).unwrap(), 2.0);
        assert_eq!(hs_inner(&k2(), &s2()).unwrap(), 0.0);
        assert_eq!(hs_inner(&z2(), &z2()).unwrap(), 2.0);
        assert!(matches!(
            hs_inner(&i2, &SquareMatrix::identity(3)),
            Err(GeoError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn basis_2x2_is_orthogonal() {
        let basis = [SquareMatrix::identity(2), k2(), s2(), z2()];
        for (i, a) in basis.iter().enumerate() {
            for (j, b) in basis.iter().enumerate() {
                let ip = a.inner(b);
                if i == j {
                    assert_eq!(ip, 2.0);
                } else {
                    assert_eq!(ip, 0.0);
                }
            }
        }
    }

    #[test]
    fn split_examples() {
        let (s, k) = sym_skew_split(&k2());
        assert_eq!(s, k2());
        assert_eq!(k, SquareMatrix::zeros(2));
        let (s, k) = sym_skew_split(&z2());
        assert_eq!(s, SquareMatrix::zeros(2));
        assert_eq!(k, z2());
        let shear = SquareMatrix::from_rows(&[vec![0.0, 1.0], vec![0.0, 0.0]]).unwrap();
        let (s, k) = sym_skew_split(&shear);
        assert_eq!(s.to_rows(), vec![vec![0.0, 0.5], vec![0.5, 0.0]]);
        assert_eq!(k.to_rows(), vec![vec![0.0, 0.5], vec![-0.5, 0.0]]);
        assert_eq!(&s + &k, shear);
    }

    #[test]
    fn polar_of_spd_and_rotation() {
        let p = SquareMatrix::diag(&[2.0, 0.5]);
        let f = polar_decompose(&p).unwrap();
        assert!(close(&f.rotation, &SquareMatrix::identity(2), 1e-12));
        assert!(close(&f.stretch, &p, 1e-12));

        let r = rotation2(0.7);
        let f = polar_decompose(&r).unwrap();
        assert!(close(&f.rotation, &r, 1e-12));
        assert!(close(&f.stretch, &SquareMatrix::identity(2), 1e-12));
    }

    #[test]
    fn polar_rejects_bad_determinants() {
        let sing = SquareMatrix::from_rows(&[vec![1.0, 2.0], vec![2.0, 4.0]]).unwrap();
        assert!(polar_decompose(&sing).is_err());
        let neg = SquareMatrix::diag(&[-1.0, 1.0]);
        assert!(matches!(
            polar_decompose(&neg),
            Err(GeoError::NotPositiveDeterminant { .. })
        ));
    }

    #[test]
    fn nilpotency_examples() {
        let shear = SquareMatrix::from_rows(&[vec![0.0, 1.0], vec![0.0, 0.0]]).unwrap();
        assert_eq!(nilpotency_index(&shear, 1e-9).unwrap(), Some(2));
        assert_eq!(
            nilpotency_index(&SquareMatrix::identity(3), 1e-9).unwrap(),
            None
        );
        let flag = SquareMatrix::from_fn(3, |i, j| if j > i { 1.0 } else { 0.0 });
        assert_eq!(nilpotency_index(&flag, 1e-9).unwrap(), Some(3));
        assert_eq!(nilpotency_index(&SquareMatrix::zeros(3), 1e-9).unwrap(), Some(1));
    }

    #[test]
    fn nilpotency_disagreement_is_reported() {
        // M^3 = 1e-6 I: the power test accepts index 3, tr M^3 = 3e-6 fails.
        let m = SquareMatrix::from_rows(&[
            vec![0.0, 1.0, 0.0],
            vec![0.0, 0.0, 1.0],
            vec![1e-6, 0.0, 0.0],
        ])
        .unwrap();
        let r = nilpotency_index(&m, 0.8e-6);
        assert!(matches!(r, Err(GeoError::NilpotencyInconsistent { .. })));
    }

    #[test]
    fn exp_examples() {
        assert_eq!(matrix_exp(&SquareMatrix::zeros(3)), SquareMatrix::identity(3));
        let t = 1.3;
        let e = matrix_exp(&z2().scale(t));
        assert_eq!(e, rotation2(t));
        let shear = SquareMatrix::from_rows(&[vec![0.0, 2.5], vec![0.0, 0.0]]).unwrap();
        assert_eq!(matrix_exp(&shear), &SquareMatrix::identity(2) + &shear);
    }

    #[test]
    fn exp_general_path_matches_diagonal() {
        let c = SquareMatrix::from_rows(&[vec![0.3, 0.1], vec![0.2, -0.3]]).unwrap();
        // exp(C) for traceless 2x2: cosh(r) I + sinh(r)/r C with r^2 = -det C.
        let r = (-c.det()).sqrt();
        let expected = &SquareMatrix::identity(2).scale(r.cosh()) + &c.scale(r.sinh() / r);
        let e = matrix_exp(&c);
        assert!(close(&e, &expected, 1e-14));
        let big = c.scale(20.0);
        let r = r * 20.0;
        let expected = &SquareMatrix::identity(2).scale(r.cosh()) + &big.scale(r.sinh() / r);
        let e = matrix_exp(&big);
        assert!((&e - &expected).hs_norm() <= 1e-12 * expected.hs_norm());
    }

    #[test]
    fn conjugate_examples() {
        let a = SquareMatrix::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap();
        assert_eq!(
            orthogonal_conjugate(&a, &SquareMatrix::identity(2)).unwrap(),
            a
        );
        let u = rotation2(std::f64::consts::FRAC_PI_4);
        let c = orthogonal_conjugate(&k2(), &u).unwrap();
        assert!(close(&c, &s2().scale(-1.0), 1e-15) || close(&c, &s2(), 1e-15));
        assert!(orthogonal_conjugate(&a, &SquareMatrix::diag(&[2.0, 0.5])).is_err());
    }

    #[test]
    fn direct_sum_places_blocks() {
        let m = SquareMatrix::direct_sum(&[z2(), SquareMatrix::identity(1)]);
        assert_eq!(m.dim(), 3);
        assert_eq!(m.get(1, 0), 1.0);
        assert_eq!(m.get(2, 2), 1.0);
        assert_abs_diff_eq!(m.det(), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn group_point_validation() {
        assert!(GroupPoint::new(SquareMatrix::diag(&[2.0, 0.5])).is_ok());
        assert!(matches!(
            GroupPoint::new(SquareMatrix::diag(&[2.0, 1.0])),
            Err(GeoError::NotInGroup { .. })
        ));
        let g = GroupPoint::normalized(SquareMatrix::diag(&[2.0, 2.0])).unwrap();
        assert_abs_diff_eq!(g.matrix().det(), 1.0, epsilon = 1e-14);
        assert!(SquareMatrix::from_row_slice(2, &[1.0, f64::NAN, 0.0, 1.0]).is_err());
    }

    #[test]
    fn json_layout_is_rows() {
        let a = SquareMatrix::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap();
        let s = serde_json::to_string(&a).unwrap();
        assert_eq!(s, "[[1.0,2.0],[3.0,4.0]]");
        let b: SquareMatrix = serde_json::from_str(&s).unwrap();
        assert_eq!(a, b);
        assert!(serde_json::from_str::<SquareMatrix>("[[1.0,2.0]]").is_err());
    }
}
