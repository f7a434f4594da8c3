//! Explicit geodesic families: linear geodesics `B(I + tM)` with `M`
//! nilpotent, exponential geodesics `B e^{tC}`, closed-form Jacobi fields
//! along index-2 linear geodesics, and unboundedness certificates.

use serde::{Deserialize, Serialize};

use crate::error::{GeoError, Result};
use crate::integrate::{sampled_trajectory, JacobiState, PhaseState, Trajectory};
use crate::linalg::{
    check_special_orthogonal, matrix_exp, nilpotency_index, polar_decompose, GroupPoint,
    SquareMatrix, DEFAULT_NILPOTENCY_TOLERANCE,
};

/// Relative tolerance of the exponential classifier.
pub const CLASSIFY_TOLERANCE: f64 = 1e-10;

/// The linear geodesic `t -> B(I + tM)`.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearGeodesicSpec {
    b: GroupPoint,
    m: SquareMatrix,
    index: usize,
}

impl LinearGeodesicSpec {
    pub fn new(b: GroupPoint, m: SquareMatrix) -> Result<Self> {
        if b.dim() != m.dim() {
            return Err(GeoError::DimensionMismatch {
                left: b.dim(),
                right: m.dim(),
            });
        }
        let index = nilpotency_index(&m, DEFAULT_NILPOTENCY_TOLERANCE)?.ok_or(GeoError::NotNilpotent)?;
        let spec = LinearGeodesicSpec { b, m, index };
        for t in [-10.0, 1.0, 10.0] {
            let deviation = (spec.position(t).det() - 1.0).abs();
            if !(deviation <= 1e-10) {
                return Err(GeoError::NotInGroup {
                    deviation,
                    tolerance: 1e-10,
                });
            }
        }
        Ok(spec)
    }

    /// The same line written as `(I + tM) B`.
    pub fn from_left(m: &SquareMatrix, b: GroupPoint) -> Result<Self> {
        let mt = b.inverse() * m * b.matrix();
        Self::new(b, mt)
    }

    pub fn dim(&self) -> usize {
        self.b.dim()
    }

    pub fn base(&self) -> &GroupPoint {
        &self.b
    }

    pub fn generator(&self) -> &SquareMatrix {
        &self.m
    }

    pub fn index(&self) -> usize {
        self.index
    }

    pub fn position(&self, t: f64) -> SquareMatrix {
        let n = self.dim();
        self.b.matrix() * (SquareMatrix::identity(n) + self.m.scale(t))
    }

    pub fn velocity(&self) -> SquareMatrix {
        self.b.matrix() * &self.m
    }

    /// Phase state at time `t`, with `A` renormalised onto `det = 1`.
    pub fn phase_state(&self, t: f64) -> Result<PhaseState> {
        let a = GroupPoint::normalized(self.position(t))?;
        PhaseState::new(a, self.velocity())
    }
}

/// True iff `A0 + t A1` is a line in `SL(n)`, i.e. `A0` is in `SL(n)` and
/// `A0^-1 A1` is nilpotent.
pub fn classify_line(a0: &SquareMatrix, a1: &SquareMatrix) -> Result<bool> {
    if a0.dim() != a1.dim() {
        return Err(GeoError::DimensionMismatch {
            left: a0.dim(),
            right: a1.dim(),
        });
    }
    let Ok(g) = GroupPoint::new(a0.clone()) else {
        return Ok(false);
    };
    let m = g.inverse() * a1;
    Ok(matches!(
        nilpotency_index(&m, DEFAULT_NILPOTENCY_TOLERANCE),
        Ok(Some(_))
    ))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum ExponentialClass {
    LinearNilpotent,
    Rotational(f64),
    NotGeodesic,
}

impl std::fmt::Display for ExponentialClass {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ExponentialClass::LinearNilpotent => write!(f, "LinearNilpotent"),
            ExponentialClass::Rotational(k) => write!(f, "Rotational, kappa = {k}"),
            ExponentialClass::NotGeodesic => write!(f, "NotGeodesic"),
        }
    }
}

/// Decides whether `t -> B e^{tC}` is a geodesic.
pub fn classify_exponential(b: &SquareMatrix, c: &SquareMatrix) -> Result<ExponentialClass> {
    if b.dim() != c.dim() {
        return Err(GeoError::DimensionMismatch {
            left: b.dim(),
            right: c.dim(),
        });
    }
    let g = GroupPoint::new(b.clone())?;
    let trace = c.trace();
    if trace.abs() > CLASSIFY_TOLERANCE * c.hs_norm().max(1.0) {
        return Err(GeoError::NotTraceless { trace });
    }
    let c2 = c * c;
    let cn = c.hs_norm_sq().max(f64::MIN_POSITIVE);
    if c2.hs_norm() <= CLASSIFY_TOLERANCE * cn {
        return Ok(ExponentialClass::LinearNilpotent);
    }
    if g.dim() % 2 == 1 || !c.is_antisymmetric(CLASSIFY_TOLERANCE) {
        return Ok(ExponentialClass::NotGeodesic);
    }
    let inv = g.inverse();
    let d = inv * inv.transpose();
    let kappa = c2.trace() / d.trace();
    let residual = (&c2 - &d.scale(kappa)).hs_norm();
    if kappa < 0.0 && residual <= CLASSIFY_TOLERANCE * c2.hs_norm() {
        Ok(ExponentialClass::Rotational(kappa))
    } else {
        Ok(ExponentialClass::NotGeodesic)
    }
}

/// Parameters of a rotational exponential geodesic in dimension `2m`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RotationalSpec {
    pub lambdas: Vec<f64>,
    pub kappa: f64,
    pub signs: Vec<i8>,
    pub conjugators: Option<(SquareMatrix, SquareMatrix)>,
}

impl RotationalSpec {
    pub fn new(
        lambdas: Vec<f64>,
        kappa: f64,
        signs: Vec<i8>,
        conjugators: Option<(SquareMatrix, SquareMatrix)>,
    ) -> Result<Self> {
        let spec = RotationalSpec {
            lambdas,
            kappa,
            signs,
            conjugators,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Builds a spec from the full list of singular values
    /// `(l1, l1, l2, l2, ...)`, which must have even length and come in pairs.
    pub fn from_singular_values(values: &[f64], kappa: f64) -> Result<Self> {
        if values.len() % 2 == 1 {
            return Err(GeoError::InvalidParameters(
                "rotational geodesics need an even dimension".into(),
            ));
        }
        let mut lambdas = Vec::with_capacity(values.len() / 2);
        for pair in values.chunks(2) {
            if (pair[0] - pair[1]).abs() > 1e-12 * pair[0].abs().max(1.0) {
                return Err(GeoError::InvalidParameters(
                    "singular values must come in equal pairs".into(),
                ));
            }
            lambdas.push(pair[0]);
        }
        let m = lambdas.len();
        Self::new(lambdas, kappa, vec![1; m], None)
    }

    pub fn dim(&self) -> usize {
        2 * self.lambdas.len()
    }

    fn validate(&self) -> Result<()> {
        let m = self.lambdas.len();
        if m == 0 {
            return Err(GeoError::InvalidParameters("lambdas must be non-empty".into()));
        }
        if self.lambdas.iter().any(|&l| !(l > 0.0) || !l.is_finite()) {
            return Err(GeoError::InvalidParameters("lambdas must be positive".into()));
        }
        let prod: f64 = self.lambdas.iter().map(|l| l * l).product();
        if (prod - 1.0).abs() > 1e-10 {
            return Err(GeoError::InvalidParameters(format!(
                "product of squared lambdas must be 1 (got {prod})"
            )));
        }
        if !(self.kappa < 0.0) || !self.kappa.is_finite() {
            return Err(GeoError::InvalidParameters("kappa must be negative".into()));
        }
        if self.signs.len() != m || self.signs.iter().any(|&s| s != 1 && s != -1) {
            return Err(GeoError::InvalidParameters(
                "signs must have one entry +1 or -1 per lambda".into(),
            ));
        }
        if let Some((u, v)) = &self.conjugators {
            for w in [u, v] {
                if w.dim() != self.dim() {
                    return Err(GeoError::DimensionMismatch {
                        left: self.dim(),
                        right: w.dim(),
                    });
                }
                check_special_orthogonal(w, 1e-10)?;
            }
        }
        Ok(())
    }

    /// Angular speeds `sign_i sqrt|kappa| / lambda_i`.
    pub fn speeds(&self) -> Vec<f64> {
        let r = self.kappa.abs().sqrt();
        self.lambdas
            .iter()
            .zip(&self.signs)
            .map(|(l, &s)| s as f64 * r / l)
            .collect()
    }
}

/// `(U Lambda V, V, core)` with `core = (+) omega_i Z2`.
fn rotational_parts(spec: &RotationalSpec) -> Result<(SquareMatrix, SquareMatrix, SquareMatrix)> {
    spec.validate()?;
    let n = spec.dim();
    let mut diag = Vec::with_capacity(n);
    for l in &spec.lambdas {
        diag.extend([*l, *l]);
    }
    let lambda = SquareMatrix::diag(&diag);
    let mut core = SquareMatrix::zeros(n);
    for (i, w) in spec.speeds().into_iter().enumerate() {
        core.set(2 * i, 2 * i + 1, -w);
        core.set(2 * i + 1, 2 * i, w);
    }
    Ok(match &spec.conjugators {
        Some((u, v)) => (u * &lambda * v, v.clone(), core),
        None => (lambda, SquareMatrix::identity(n), core),
    })
}

/// Assembles `(B, C)` with `B = U Lambda V` and `V C V^T = (+) omega_i Z2`.
pub fn build_rotational(spec: &RotationalSpec) -> Result<(GroupPoint, SquareMatrix)> {
    let (b, v, core) = rotational_parts(spec)?;
    Ok((GroupPoint::normalized(b)?, v.transpose() * &core * &v))
}

/// The exponential geodesic `t -> B e^{tC}` of a rotational pair, evaluated
/// in closed form.
#[derive(Clone, Debug, PartialEq)]
pub struct RotationalGeodesic {
    b: GroupPoint,
    c: SquareMatrix,
    kappa: f64,
    /// `(V, V C V^T)` when `V C V^T` is known to be block diagonal, so that
    /// `e^{tC}` is assembled from exact rotations.
    frame: Option<(SquareMatrix, SquareMatrix)>,
}

impl RotationalGeodesic {
    /// Errors with [`GeoError::NotRotational`] unless `(B, C)` classifies as
    /// rotational.
    pub fn new(b: GroupPoint, c: SquareMatrix) -> Result<Self> {
        match classify_exponential(b.matrix(), &c)? {
            ExponentialClass::Rotational(kappa) => Ok(RotationalGeodesic {
                b,
                c,
                kappa,
                frame: None,
            }),
            _ => Err(GeoError::NotRotational),
        }
    }

    pub fn from_spec(spec: &RotationalSpec) -> Result<Self> {
        let (b, v, core) = rotational_parts(spec)?;
        let b = GroupPoint::normalized(b)?;
        let c = v.transpose() * &core * &v;
        let mut g = Self::new(b, c)?;
        g.frame = Some((v, core));
        Ok(g)
    }

    pub fn base(&self) -> &GroupPoint {
        &self.b
    }

    pub fn generator(&self) -> &SquareMatrix {
        &self.c
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    /// `e^{tC}`.
    pub fn rotation(&self, t: f64) -> SquareMatrix {
        match &self.frame {
            Some((v, core)) => v.transpose() * matrix_exp(&core.scale(t)) * v,
            None => matrix_exp(&self.c.scale(t)),
        }
    }

    pub fn position(&self, t: f64) -> SquareMatrix {
        self.b.matrix() * &self.rotation(t)
    }

    pub fn velocity(&self, t: f64) -> SquareMatrix {
        self.position(t) * &self.c
    }

    pub fn phase_state(&self, t: f64) -> Result<PhaseState> {
        let a = self.position(t);
        let v = &a * &self.c;
        PhaseState::from_matrices(a, v)
    }

    /// Closed-form samples every `dt` on `[0, t_end]` (and at `t_end`),
    /// with invariant reports.
    pub fn trajectory(&self, t_end: f64, dt: f64) -> Result<Trajectory<PhaseState>> {
        if !(t_end > 0.0 && t_end.is_finite() && dt > 0.0) {
            return Err(GeoError::InvalidParameters(
                "need t_end > 0 and dt > 0".into(),
            ));
        }
        let steps = (t_end / dt * (1.0 + 1e-12)).floor() as usize;
        let mut times: Vec<f64> = (0..=steps).map(|k| k as f64 * dt).collect();
        if t_end - times[steps] > 1e-9 * dt {
            times.push(t_end);
        } else {
            times[steps] = t_end;
        }
        let states = times
            .iter()
            .map(|&t| self.phase_state(t))
            .collect::<Result<Vec<_>>>()?;
        sampled_trajectory(&times, states)
    }
}

/// `C' = B C B^-1`, the generator of the same curve written as `e^{tC'} B`.
pub fn left_right_transport(b: &GroupPoint, c: &SquareMatrix) -> Result<SquareMatrix> {
    match classify_exponential(b.matrix(), c)? {
        ExponentialClass::Rotational(_) => {}
        _ => return Err(GeoError::NotRotational),
    }
    let cp = b.matrix() * c * b.inverse();
    if !cp.is_antisymmetric(CLASSIFY_TOLERANCE) {
        return Err(GeoError::NotRotational);
    }
    for t in [0.1, 1.0] {
        let left = matrix_exp(&cp.scale(t)) * b.matrix();
        let right = b.matrix() * matrix_exp(&c.scale(t));
        if (&left - &right).hs_norm() > CLASSIFY_TOLERANCE * right.hs_norm() {
            return Err(GeoError::NotRotational);
        }
    }
    Ok(cp)
}

/// Orthonormal basis of the complement `{Y : Y _|_ B^-T (M^T)^k, 0 <= k < n}`.
#[derive(Clone, Debug, PartialEq)]
pub struct PerpBasis {
    pub b: GroupPoint,
    pub m: SquareMatrix,
    pub index: usize,
    pub basis: Vec<SquareMatrix>,
}

fn orthogonalize(v: &SquareMatrix, against: &[SquareMatrix]) -> SquareMatrix {
    let mut r = v.clone();
    for _ in 0..2 {
        for q in against {
            r -= &q.scale(r.inner(q));
        }
    }
    r
}

pub fn perp_basis(b: &GroupPoint, m: &SquareMatrix) -> Result<PerpBasis> {
    let n = b.dim();
    if m.dim() != n {
        return Err(GeoError::DimensionMismatch {
            left: n,
            right: m.dim(),
        });
    }
    let index = nilpotency_index(m, DEFAULT_NILPOTENCY_TOLERANCE)?.ok_or(GeoError::NotNilpotent)?;
    let inv_t = b.inverse().transpose();
    let mt = m.transpose();
    let mut spanning: Vec<SquareMatrix> = Vec::with_capacity(index);
    let mut power = SquareMatrix::identity(n);
    for _ in 0..index {
        let v = orthogonalize(&(&inv_t * &power), &spanning);
        let norm = v.hs_norm();
        spanning.push(v.scale(1.0 / norm));
        power = &power * &mt;
    }
    let mut basis: Vec<SquareMatrix> = Vec::with_capacity(n * n - index);
    let mut all = spanning.clone();
    for i in 0..n {
        for j in 0..n {
            if basis.len() == n * n - index {
                break;
            }
            let mut e = SquareMatrix::zeros(n);
            e.set(i, j, 1.0);
            let r = orthogonalize(&e, &all);
            let norm = r.hs_norm();
            if norm > 1e-6 {
                let q = r.scale(1.0 / norm);
                all.push(q.clone());
                basis.push(q);
            }
        }
    }
    Ok(PerpBasis {
        b: b.clone(),
        m: m.clone(),
        index,
        basis,
    })
}

/// Closed-form Jacobi field along `A(t) = I + tM` with `M^2 = 0`:
/// `J = (|M|^2 t/n I + M^T) b(t) + K0 + t K1`.
#[derive(Clone, Debug, PartialEq)]
pub struct JacobiClosedForm {
    m: SquareMatrix,
    norm_m: f64,
    b0: f64,
    b1: f64,
    k0: SquareMatrix,
    k1: SquareMatrix,
}

pub fn jacobi_closed_form(
    m: &SquareMatrix,
    b0: f64,
    b1: f64,
    k0: &SquareMatrix,
    k1: &SquareMatrix,
) -> Result<JacobiClosedForm> {
    let n = m.dim();
    for k in [k0, k1] {
        if k.dim() != n {
            return Err(GeoError::DimensionMismatch {
                left: n,
                right: k.dim(),
            });
        }
    }
    let norm_m = m.hs_norm();
    if norm_m == 0.0 || (m * m).hs_norm() > 1e-12 * norm_m * norm_m {
        return Err(GeoError::InvalidParameters(
            "closed-form Jacobi fields need a nilpotent M of index 2".into(),
        ));
    }
    let mt = m.transpose();
    let id = SquareMatrix::identity(n);
    for k in [k0, k1] {
        let scale = k.hs_norm().max(1.0);
        if k.inner(&id).abs() > 1e-10 * scale * (n as f64).sqrt()
            || k.inner(&mt).abs() > 1e-10 * scale * norm_m
        {
            return Err(GeoError::InvalidParameters(
                "K0 and K1 must be orthogonal to I and M^T".into(),
            ));
        }
    }
    Ok(JacobiClosedForm {
        m: m.clone(),
        norm_m,
        b0,
        b1,
        k0: k0.clone(),
        k1: k1.clone(),
    })
}

impl JacobiClosedForm {
    fn n(&self) -> f64 {
        self.m.dim() as f64
    }

    pub fn b(&self, t: f64) -> f64 {
        let rn = self.n().sqrt();
        rn * self.b1 / self.norm_m * (self.norm_m * t / rn).atan() + self.b0
    }

    pub fn b_rate(&self, t: f64) -> f64 {
        self.b1 / (1.0 + self.norm_m * self.norm_m * t * t / self.n())
    }

    pub fn value(&self, t: f64) -> SquareMatrix {
        let n = self.m.dim();
        let shape = SquareMatrix::identity(n).scale(self.norm_m * self.norm_m * t / self.n())
            + self.m.transpose();
        shape.scale(self.b(t)) + &self.k0 + self.k1.scale(t)
    }

    pub fn velocity(&self, t: f64) -> SquareMatrix {
        let n = self.m.dim();
        let c = self.norm_m * self.norm_m / self.n();
        let shape = SquareMatrix::identity(n).scale(c * t) + self.m.transpose();
        SquareMatrix::identity(n).scale(c * self.b(t)) + shape.scale(self.b_rate(t)) + &self.k1
    }

    /// The geodesic `I + tM` the field lives on.
    pub fn geodesic(&self, t: f64) -> Result<PhaseState> {
        let n = self.m.dim();
        PhaseState::from_matrices(SquareMatrix::identity(n) + self.m.scale(t), self.m.clone())
    }

    pub fn state(&self, t: f64) -> Result<JacobiState> {
        JacobiState::new(self.geodesic(t)?, self.value(t), self.velocity(t))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Certificate {
    SymmetricLeaf,
    ZeroVorticity,
    ZeroAngularMomentum,
}

impl std::fmt::Display for Certificate {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Certificate::SymmetricLeaf => "SymmetricLeaf",
            Certificate::ZeroVorticity => "ZeroVorticity",
            Certificate::ZeroAngularMomentum => "ZeroAngularMomentum",
        };
        f.write_str(s)
    }
}

/// Which sufficient conditions for unbounded growth hold at the initial data.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CertificateReport {
    pub first: Option<Certificate>,
    pub matches: Vec<Certificate>,
}

const CERTIFICATE_TOLERANCE: f64 = 1e-10;

fn nearly_symmetric(x: &SquareMatrix) -> bool {
    x.skew_part().hs_norm() <= CERTIFICATE_TOLERANCE * x.hs_norm()
}

pub fn unbounded_certificate(state: &PhaseState) -> Result<CertificateReport> {
    let a0 = state.a.matrix();
    let a1 = &state.adot;
    let mut matches = Vec::new();
    if a1.hs_norm() > 0.0 {
        let o = polar_decompose(a0)?.rotation;
        if nearly_symmetric(&(o.transpose() * a1)) {
            matches.push(Certificate::SymmetricLeaf);
        }
        if nearly_symmetric(&(a0.transpose() * a1)) {
            matches.push(Certificate::ZeroVorticity);
        }
        if nearly_symmetric(&(a1 * a0.transpose())) {
            matches.push(Certificate::ZeroAngularMomentum);
        }
    }
    Ok(CertificateReport {
        first: matches.first().copied(),
        matches,
    })
}
