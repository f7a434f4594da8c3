//! Extrinsic geometry of `SL(n)` as a hypersurface of `M(n)` with the
//! Hilbert-Schmidt metric.
//!
//! Tangent vectors are ambient matrices `X` with `tr(A^-1 X) = 0`.

use serde::{Deserialize, Serialize};

use crate::error::{GeoError, Result};
use crate::integrate::ReducedState;
use crate::linalg::{GroupPoint, SquareMatrix};

/// Default relative tolerance for the tangency test.
pub const DEFAULT_TANGENCY_TOLERANCE: f64 = 1e-9;
/// Relative Gram determinant below which two tangent vectors count as parallel.
pub const PARALLEL_TOLERANCE: f64 = 1e-12;

const BASE_MATCH_TOLERANCE: f64 = 1e-12;

/// Scaled tangency residual `|tr(A^-1 X)| / (||X|| ||A^-1||)`.
pub fn tangency_residual(base: &GroupPoint, vec: &SquareMatrix) -> f64 {
    let raw = base.inverse().trace_product(vec).abs();
    let scale = vec.hs_norm() * base.inverse().hs_norm();
    if scale == 0.0 {
        0.0
    } else {
        raw / scale
    }
}

/// Orthogonal projection of an ambient matrix onto `T_A SL(n)`.
pub fn project_tangent(base: &GroupPoint, vec: &SquareMatrix) -> SquareMatrix {
    let inv = base.inverse();
    let c = inv.trace_product(vec) / inv.hs_norm_sq();
    vec - &inv.transpose().scale(c)
}

#[derive(Clone, Debug, PartialEq)]
pub struct TangentVector {
    base: GroupPoint,
    vec: SquareMatrix,
    tangency_tolerance: f64,
}

impl TangentVector {
    pub fn new(base: GroupPoint, vec: SquareMatrix) -> Result<Self> {
        Self::with_tolerance(base, vec, DEFAULT_TANGENCY_TOLERANCE)
    }

    pub fn with_tolerance(base: GroupPoint, vec: SquareMatrix, tolerance: f64) -> Result<Self> {
        if base.dim() != vec.dim() {
            return Err(GeoError::DimensionMismatch {
                left: base.dim(),
                right: vec.dim(),
            });
        }
        let residual = tangency_residual(&base, &vec);
        if !(residual <= tolerance) {
            return Err(GeoError::NotTangent { residual });
        }
        Ok(TangentVector {
            base,
            vec,
            tangency_tolerance: tolerance,
        })
    }

    /// Projects `vec` onto the tangent space first.
    pub fn projected(base: GroupPoint, vec: &SquareMatrix) -> Result<Self> {
        let v = project_tangent(&base, vec);
        Self::new(base, v)
    }

    /// Tangent vector `X A` for `X` in `sl(n)`.
    pub fn right_translated(base: GroupPoint, x: &SquareMatrix) -> Result<Self> {
        let v = x * base.matrix();
        Self::new(base, v)
    }

    pub fn base(&self) -> &GroupPoint {
        &self.base
    }

    pub fn vec(&self) -> &SquareMatrix {
        &self.vec
    }

    pub fn tangency_tolerance(&self) -> f64 {
        self.tangency_tolerance
    }
}

fn check_base(a: &GroupPoint, v: &TangentVector) -> Result<()> {
    if a.dim() != v.base.dim() {
        return Err(GeoError::DimensionMismatch {
            left: a.dim(),
            right: v.base.dim(),
        });
    }
    let diff = (a.matrix() - v.base.matrix()).hs_norm();
    if diff > BASE_MATCH_TOLERANCE * a.matrix().hs_norm() {
        return Err(GeoError::BaseMismatch);
    }
    Ok(())
}

/// `N(A) = A^-T / ||A^-T||`.
pub fn unit_normal(a: &GroupPoint) -> SquareMatrix {
    let inv_t = a.inverse().transpose();
    let norm = inv_t.hs_norm();
    inv_t.scale(1.0 / norm)
}

/// Derivative of the unit normal along a curve through `A` with velocity `X`.
pub fn normal_derivative(a: &GroupPoint, x: &SquareMatrix) -> SquareMatrix {
    let inv = a.inverse();
    let inv_t = inv.transpose();
    let norm = inv.hs_norm();
    let first = (&inv_t * &x.transpose() * &inv_t).scale(-1.0 / norm);
    let coeff = inv.inner(&(inv * x * inv)) / (norm * norm);
    first + unit_normal(a).scale(coeff)
}

/// `tr(A^-1 X A^-1 Y) / ||A^-1||` on raw matrices, without tangency checks.
pub fn sff_matrices(a: &GroupPoint, x: &SquareMatrix, y: &SquareMatrix) -> f64 {
    let inv = a.inverse();
    let ax = inv * x;
    let ay = inv * y;
    ax.trace_product(&ay) / inv.hs_norm()
}

pub fn second_fundamental_form(a: &GroupPoint, x: &TangentVector, y: &TangentVector) -> Result<f64> {
    check_base(a, x)?;
    check_base(a, y)?;
    Ok(sff_matrices(a, &x.vec, &y.vec))
}

/// `II(A', A')` evaluated from reduced variables.
pub fn sff_reduced(state: &ReducedState) -> f64 {
    let g = &state.omega + &state.zeta;
    let gb = &g * &state.beta;
    gb.trace_product(&gb) / (4.0 * state.beta.trace().sqrt())
}

/// Riemann tensor `<R(X,Y)Z, W>` through the Gauss equation.
pub fn riemann(
    a: &GroupPoint,
    x: &TangentVector,
    y: &TangentVector,
    z: &TangentVector,
    w: &TangentVector,
) -> Result<f64> {
    for v in [x, y, z, w] {
        check_base(a, v)?;
    }
    Ok(riemann_matrices(a, &x.vec, &y.vec, &z.vec, &w.vec))
}

pub fn riemann_matrices(
    a: &GroupPoint,
    x: &SquareMatrix,
    y: &SquareMatrix,
    z: &SquareMatrix,
    w: &SquareMatrix,
) -> f64 {
    let inv = a.inverse();
    let (ix, iy, iz, iw) = (inv * x, inv * y, inv * z, inv * w);
    let t = |p: &SquareMatrix, q: &SquareMatrix| p.trace_product(q);
    (t(&ix, &iz) * t(&iy, &iw) - t(&iy, &iz) * t(&ix, &iw)) / inv.hs_norm_sq()
}

pub fn sectional_curvature(a: &GroupPoint, x: &TangentVector, y: &TangentVector) -> Result<f64> {
    check_base(a, x)?;
    check_base(a, y)?;
    let (xv, yv) = (&x.vec, &y.vec);
    let xx = xv.hs_norm_sq();
    let yy = yv.hs_norm_sq();
    let xy = xv.inner(yv);
    let gram = xx * yy - xy * xy;
    let relative_gram = if xx * yy > 0.0 { gram / (xx * yy) } else { 0.0 };
    if !(relative_gram > PARALLEL_TOLERANCE) {
        return Err(GeoError::Parallel { relative_gram });
    }
    Ok(riemann_matrices(a, xv, yv, xv, yv) / gram)
}

/// Coefficient of `|A^-1 y|^2` in the pressure of the affine fluid motion.
pub fn pressure_coefficient(a: &GroupPoint, adot: &TangentVector) -> Result<f64> {
    let ii = second_fundamental_form(a, adot, adot)?;
    Ok(-ii / (2.0 * a.inverse().hs_norm()))
}

/// Sign of `II(A', A')`; the Taylor sign condition excludes `Negative`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum TaylorSign {
    Positive,
    Zero,
    Negative,
}

impl TaylorSign {
    pub fn satisfies_condition(self) -> bool {
        self != TaylorSign::Negative
    }
}

/// Classifies `II(A', A')` with a zero band of relative width `tol`.
pub fn taylor_sign(a: &GroupPoint, adot: &TangentVector, tol: f64) -> Result<TaylorSign> {
    let ii = second_fundamental_form(a, adot, adot)?;
    let scale = a.inverse().hs_norm() * adot.vec.hs_norm_sq();
    Ok(if ii.abs() <= tol * scale.max(f64::MIN_POSITIVE) {
        TaylorSign::Zero
    } else if ii > 0.0 {
        TaylorSign::Positive
    } else {
        TaylorSign::Negative
    })
}
