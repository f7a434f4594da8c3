use serde::{Deserialize, Serialize};

use crate::error::{GeoError, Result};
use crate::geometry::{sff_matrices, tangency_residual, DEFAULT_TANGENCY_TOLERANCE};
use crate::linalg::{GroupPoint, SquareMatrix};

/// Relative tolerance on symmetry classes of reduced variables.
pub const SYMMETRY_TOLERANCE: f64 = 1e-12;
/// Tolerance on `det(beta) = 1` and on the compatibility condition.
pub const REDUCED_TOLERANCE: f64 = 1e-9;

/// A point of the tangent bundle: position `A` and velocity `A'`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawPhase", into = "RawPhase")]
pub struct PhaseState {
    pub a: GroupPoint,
    pub adot: SquareMatrix,
}

#[derive(Serialize, Deserialize)]
struct RawPhase {
    a: SquareMatrix,
    adot: SquareMatrix,
}

impl TryFrom<RawPhase> for PhaseState {
    type Error = GeoError;
    fn try_from(r: RawPhase) -> Result<Self> {
        PhaseState::from_matrices(r.a, r.adot)
    }
}

impl From<PhaseState> for RawPhase {
    fn from(s: PhaseState) -> Self {
        RawPhase {
            a: s.a.into_matrix(),
            adot: s.adot,
        }
    }
}

impl PhaseState {
    pub fn new(a: GroupPoint, adot: SquareMatrix) -> Result<Self> {
        if a.dim() != adot.dim() {
            return Err(GeoError::DimensionMismatch {
                left: a.dim(),
                right: adot.dim(),
            });
        }
        if !adot.is_finite() {
            return Err(GeoError::InvalidMatrix("velocity has non-finite entries".into()));
        }
        let residual = tangency_residual(&a, &adot);
        if !(residual <= DEFAULT_TANGENCY_TOLERANCE) {
            return Err(GeoError::NotTangent { residual });
        }
        Ok(PhaseState { a, adot })
    }

    pub fn from_matrices(a: SquareMatrix, adot: SquareMatrix) -> Result<Self> {
        Self::new(GroupPoint::new(a)?, adot)
    }

    pub fn dim(&self) -> usize {
        self.a.dim()
    }

    /// `<A', A'>`.
    pub fn energy(&self) -> f64 {
        self.adot.hs_norm_sq()
    }

    /// `A^T A' - A'^T A`, conserved along geodesics.
    pub fn vorticity(&self) -> SquareMatrix {
        let g = self.a.matrix().transpose() * &self.adot;
        &g - &g.transpose()
    }

    /// `A' A^T - A A'^T`, conserved along geodesics.
    pub fn angular_momentum(&self) -> SquareMatrix {
        let g = &self.adot * self.a.matrix().transpose();
        &g - &g.transpose()
    }

    pub fn sff(&self) -> f64 {
        sff_matrices(&self.a, &self.adot, &self.adot)
    }
}

/// The reduced variables `beta = A^-1 A^-T`, `omega = A^T A' + A'^T A`,
/// `zeta = A^T A' - A'^T A`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawReduced", into = "RawReduced")]
pub struct ReducedState {
    pub beta: SquareMatrix,
    pub omega: SquareMatrix,
    pub zeta: SquareMatrix,
}

#[derive(Serialize, Deserialize)]
struct RawReduced {
    beta: SquareMatrix,
    omega: SquareMatrix,
    zeta: SquareMatrix,
}

impl TryFrom<RawReduced> for ReducedState {
    type Error = GeoError;
    fn try_from(r: RawReduced) -> Result<Self> {
        ReducedState::new(r.beta, r.omega, r.zeta)
    }
}

impl From<ReducedState> for RawReduced {
    fn from(s: ReducedState) -> Self {
        RawReduced {
            beta: s.beta,
            omega: s.omega,
            zeta: s.zeta,
        }
    }
}

impl ReducedState {
    /// Validates every invariant and names the first one that fails.
    pub fn new(beta: SquareMatrix, omega: SquareMatrix, zeta: SquareMatrix) -> Result<Self> {
        Self::with_det_tolerance(beta, omega, zeta, REDUCED_TOLERANCE)
    }

    /// As [`ReducedState::new`] with a custom tolerance on `|det(beta) - 1|`.
    pub fn with_det_tolerance(
        beta: SquareMatrix,
        omega: SquareMatrix,
        zeta: SquareMatrix,
        det_tolerance: f64,
    ) -> Result<Self> {
        let n = beta.dim();
        for m in [&omega, &zeta] {
            if m.dim() != n {
                return Err(GeoError::DimensionMismatch {
                    left: n,
                    right: m.dim(),
                });
            }
        }
        let s = ReducedState { beta, omega, zeta };
        s.check(det_tolerance)?;
        Ok(s)
    }

    pub(crate) fn from_parts_unchecked(
        beta: SquareMatrix,
        omega: SquareMatrix,
        zeta: SquareMatrix,
    ) -> Self {
        ReducedState { beta, omega, zeta }
    }

    fn check(&self, det_tolerance: f64) -> Result<()> {
        if !(self.beta.is_finite() && self.omega.is_finite() && self.zeta.is_finite()) {
            return Err(GeoError::InvalidState("entries must be finite".into()));
        }
        if !self.beta.is_symmetric(SYMMETRY_TOLERANCE) {
            return Err(GeoError::InvalidState("beta must be symmetric".into()));
        }
        if !self.beta.is_positive_definite() {
            return Err(GeoError::InvalidState("beta must be positive definite".into()));
        }
        let det = self.beta.det();
        if !((det - 1.0).abs() <= det_tolerance) {
            return Err(GeoError::InvalidState(format!(
                "det(beta) = 1 violated (det = {det})"
            )));
        }
        if !self.omega.is_symmetric(SYMMETRY_TOLERANCE) {
            return Err(GeoError::InvalidState("omega must be symmetric".into()));
        }
        if !self.zeta.is_antisymmetric(SYMMETRY_TOLERANCE) {
            return Err(GeoError::InvalidState("zeta must be antisymmetric".into()));
        }
        let compat = self.beta.trace_product(&self.omega);
        let scale = (self.beta.hs_norm() * self.omega.hs_norm()).max(1.0);
        if !(compat.abs() <= REDUCED_TOLERANCE * scale) {
            return Err(GeoError::InvalidState(format!(
                "compatibility tr(beta omega) = 0 violated (value {compat:e})"
            )));
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.beta.dim()
    }

    /// `<A', A'>` expressed through reduced variables.
    pub fn energy(&self) -> f64 {
        let g = &self.omega + &self.zeta;
        0.25 * (g.transpose() * &self.beta).trace_product(&g)
    }

    /// The conserved energy with the normalisation used for the block figures.
    pub fn paper_energy(&self) -> f64 {
        2.0 * self.energy()
    }

    /// `||A||^2 = tr(beta^-1)`.
    pub fn position_norm_sq(&self) -> f64 {
        self.beta.inverse().map(|b| b.trace()).unwrap_or(f64::INFINITY)
    }

    /// HS norm of the angular momentum `A' A^T - A A'^T`. The matrix itself
    /// depends on the rotational factor of `A`, its norm does not.
    pub fn angular_momentum_norm(&self) -> f64 {
        let g = (&self.omega + &self.zeta).scale(0.5);
        let x = &self.beta * &g - g.transpose() * &self.beta;
        match self.beta.inverse() {
            Some(binv) => {
                let y = &binv * &x;
                y.trace_product(&(&binv * x.transpose()))
                    .max(0.0)
                    .sqrt()
            }
            None => f64::INFINITY,
        }
    }
}

/// Jacobi field `J` with its coordinate derivative `J'` along a geodesic.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JacobiState {
    pub along: PhaseState,
    pub j: SquareMatrix,
    pub jdot: SquareMatrix,
}

impl JacobiState {
    pub fn new(along: PhaseState, j: SquareMatrix, jdot: SquareMatrix) -> Result<Self> {
        let n = along.dim();
        for m in [&j, &jdot] {
            if m.dim() != n {
                return Err(GeoError::DimensionMismatch {
                    left: n,
                    right: m.dim(),
                });
            }
        }
        let residual = tangency_residual(&along.a, &j);
        if !(residual <= DEFAULT_TANGENCY_TOLERANCE) {
            return Err(GeoError::NotTangent { residual });
        }
        Ok(JacobiState { along, j, jdot })
    }

    /// Fixes `J'` so that `J` stays tangent: `tr(A^-1 J') = tr(A^-1 A' A^-1 J)`.
    pub fn with_consistent_velocity(along: PhaseState, j: SquareMatrix, jdot: &SquareMatrix) -> Result<Self> {
        let jdot = consistent_jdot(along.a.inverse(), &along.adot, &j, jdot);
        Self::new(along, j, jdot)
    }

    /// Covariant derivative `J' - <J', N> N`.
    pub fn covariant_derivative(&self) -> SquareMatrix {
        let nrm = crate::geometry::unit_normal(&self.along.a);
        let c = self.jdot.inner(&nrm);
        &self.jdot - &nrm.scale(c)
    }
}

pub(crate) fn consistent_jdot(
    inv: &SquareMatrix,
    adot: &SquareMatrix,
    j: &SquareMatrix,
    jdot: &SquareMatrix,
) -> SquareMatrix {
    let target = (inv * adot * inv).trace_product(j);
    let c = (inv.trace_product(jdot) - target) / inv.hs_norm_sq();
    jdot - &inv.transpose().scale(c)
}

/// `A'' = [tr(A' A^-1 A' A^-1) / tr(A^-1 A^-T)] A^-T`.
pub fn geodesic_rhs(state: &PhaseState) -> SquareMatrix {
    geodesic_accel(state.a.inverse(), &state.adot)
}

pub(crate) fn geodesic_accel(inv: &SquareMatrix, adot: &SquareMatrix) -> SquareMatrix {
    let p = adot * inv;
    let c = p.trace_product(&p) / inv.hs_norm_sq();
    inv.transpose().scale(c)
}

/// `(beta', omega')`; `zeta' = 0`.
pub fn reduced_rhs(state: &ReducedState) -> (SquareMatrix, SquareMatrix) {
    reduced_rates(&state.beta, &state.omega, &state.zeta)
}

pub(crate) fn reduced_rates(
    beta: &SquareMatrix,
    omega: &SquareMatrix,
    zeta: &SquareMatrix,
) -> (SquareMatrix, SquareMatrix) {
    let n = beta.dim();
    let bw = beta * omega;
    let dbeta = -(&bw * beta);
    let g = omega + zeta;
    let wb = omega * beta;
    let zb = zeta * beta;
    let global = 0.5 * (wb.trace_product(&wb) + zb.trace_product(&zb)) / beta.trace();
    let domega = (g.transpose() * beta * &g).scale(0.5) + SquareMatrix::identity(n).scale(global);
    (dbeta, domega)
}

pub fn to_reduced(state: &PhaseState) -> ReducedState {
    let a = state.a.matrix();
    let inv = state.a.inverse();
    let beta = (inv * inv.transpose()).symmetric_part();
    let g = a.transpose() * &state.adot;
    let omega = (&g + &g.transpose()).symmetric_part();
    let zeta = (&g - &g.transpose()).skew_part();
    ReducedState::from_parts_unchecked(beta, omega, zeta)
}

/// Linearisation of the geodesic equation: `J''` given `(A, A', J, J')`.
pub fn jacobi_rhs(state: &JacobiState) -> SquareMatrix {
    jacobi_accel(
        state.along.a.inverse(),
        &state.along.adot,
        &state.j,
        &state.jdot,
    )
}

pub(crate) fn jacobi_accel(
    inv: &SquareMatrix,
    adot: &SquareMatrix,
    j: &SquareMatrix,
    jdot: &SquareMatrix,
) -> SquareMatrix {
    let inv_t = inv.transpose();
    let d = inv.hs_norm_sq();
    let p = adot * inv;
    let t = p.trace_product(&p);
    let q = j * inv;
    let dt = 2.0 * (jdot * inv).trace_product(&p) - 2.0 * (&p * &q).trace_product(&p);
    let dd = -2.0 * (inv * j * inv).trace_product(&inv_t);
    let dc = dt / d - t * dd / (d * d);
    let c = t / d;
    inv_t.scale(dc) - (&inv_t * j.transpose() * &inv_t).scale(c)
}
