//! Pulsating block-diagonal solutions: two groups of identical blocks,
//! reduced to a planar Hamiltonian system in `(lambda, v)`.

use serde::{Deserialize, Serialize};

use super::planar::{integrate_planar, section_crossings, Hamiltonian2DState, PlanarTrajectory};
use super::BlockState;
use crate::error::{GeoError, Result};
use crate::integrate::IntegratorOptions;

/// Blocks `1..=m0` share `(b0, w0, |z| = z1)`, blocks `m0+1..=m` share
/// `(b0, w0, |z| = zm)`; `b0_1 = e^{lambda/m0}`, `w0_1 = v e^{-lambda/m0} / m0`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PulseSystem {
    pub m0: usize,
    pub m: usize,
    pub z1: f64,
    pub zm: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PeriodReport {
    pub period: f64,
    /// `|lambda|` mismatch between consecutive returns to the section.
    pub return_residual: f64,
    pub energy: f64,
}

impl PulseSystem {
    pub fn new(m0: usize, m: usize, z1: f64, zm: f64) -> Result<Self> {
        if !(1 <= m0 && m0 < m) {
            return Err(GeoError::InvalidParameters(format!(
                "pulse system needs 1 <= m0 < m, got m0 = {m0}, m = {m}"
            )));
        }
        if !(z1.is_finite() && zm.is_finite()) || z1 == 0.0 || zm == 0.0 {
            return Err(GeoError::InvalidParameters(
                "pulse system needs nonzero finite z1 and zm".into(),
            ));
        }
        Ok(PulseSystem { m0, m, z1, zm })
    }

    fn k0(&self) -> f64 {
        self.m0 as f64
    }

    fn k1(&self) -> f64 {
        (self.m - self.m0) as f64
    }

    /// Coefficient of `v^2` in the Hamiltonian.
    pub fn kinetic_coefficient(&self, lambda: f64) -> f64 {
        let (k0, k1) = (self.k0(), self.k1());
        (-lambda / k0).exp() / k0 + (lambda / k1).exp() / k1
    }

    pub fn hamiltonian(&self, lambda: f64, v: f64) -> f64 {
        let (k0, k1) = (self.k0(), self.k1());
        k0 * (lambda / k0).exp() * self.z1 * self.z1
            + k1 * (-lambda / k1).exp() * self.zm * self.zm
            + self.kinetic_coefficient(lambda) * v * v
    }

    fn dh_dlambda(&self, lambda: f64, v: f64) -> f64 {
        let (k0, k1) = (self.k0(), self.k1());
        let dg = -(-lambda / k0).exp() / (k0 * k0) + (lambda / k1).exp() / (k1 * k1);
        (lambda / k0).exp() * self.z1 * self.z1 - (-lambda / k1).exp() * self.zm * self.zm
            + dg * v * v
    }

    /// `(lambda', v')`. `lambda' = -v` comes from `beta' = -beta omega beta`;
    /// `v'` then follows from conservation of `H`.
    pub fn rhs(&self, lambda: f64, v: f64) -> (f64, f64) {
        (-v, self.dh_dlambda(lambda, v) / (2.0 * self.kinetic_coefficient(lambda)))
    }

    /// The unique critical point `(lambda0, 0)`.
    pub fn critical_lambda(&self) -> f64 {
        let ratio = (self.zm * self.zm / (self.z1 * self.z1)).ln();
        ratio / (1.0 / self.k0() + 1.0 / self.k1())
    }

    /// Range of `lambda` allowed on the level set `H = h`.
    pub fn lambda_bounds(&self, h: f64) -> (f64, f64) {
        let (k0, k1) = (self.k0(), self.k1());
        (
            -k1 * (h / (k1 * self.zm * self.zm)).ln(),
            k0 * (h / (k0 * self.z1 * self.z1)).ln(),
        )
    }

    /// Bound on `v^2` on the level set `H = h`.
    pub fn v_sq_bound(&self, h: f64) -> f64 {
        self.k0().max(self.k1()) * h
    }

    /// Reads the grouped structure off a pure-diagonal even block state, with
    /// `m0` the length of the leading run of blocks equal to the first.
    pub fn from_block(state: &BlockState, tol: f64) -> Result<(Self, Hamiltonian2DState)> {
        if state.tail.is_some() || state.off_diagonal_size() > tol {
            return Err(GeoError::InvalidState(
                "pulse ansatz needs an even pure-diagonal state".into(),
            ));
        }
        let m = state.blocks();
        let same = |i: usize, j: usize| {
            (state.b0[i] - state.b0[j]).abs() <= tol
                && (state.w0[i] - state.w0[j]).abs() <= tol
                && (state.z[i].abs() - state.z[j].abs()).abs() <= tol
        };
        let m0 = (1..m).find(|&i| !same(0, i)).unwrap_or(m);
        if m0 == m || !(m0..m).all(|i| same(m0, i)) {
            return Err(GeoError::InvalidState(
                "blocks do not split into two groups of identical blocks".into(),
            ));
        }
        let sys = Self::new(m0, m, state.z[0].abs(), state.z[m0].abs())?;
        let lambda = m0 as f64 * state.b0[0].ln();
        let v = m0 as f64 * state.w0[0] * state.b0[0];
        Ok((sys, Hamiltonian2DState::new(lambda, v)?))
    }

    /// Pure-diagonal block state for `(lambda, v)`.
    pub fn to_block(&self, s: Hamiltonian2DState) -> Result<BlockState> {
        let (k0, k1) = (self.k0(), self.k1());
        let mut b0 = vec![(s.q / k0).exp(); self.m0];
        b0.resize(self.m, (-s.q / k1).exp());
        let mut w0 = vec![s.p * (-s.q / k0).exp() / k0; self.m0];
        w0.resize(self.m, -s.p * (s.q / k1).exp() / k1);
        let mut z = vec![self.z1; self.m0];
        z.resize(self.m, self.zm);
        BlockState::pure_diagonal(b0, w0, z, None)
    }

    pub fn flow(
        &self,
        init: Hamiltonian2DState,
        t0: f64,
        t1: f64,
        opts: &IntegratorOptions,
    ) -> Result<PlanarTrajectory> {
        integrate_planar(|q, p| self.rhs(q, p), init, t0, t1, opts)
    }

    /// Period from two consecutive upward crossings of `v = 0`, refined by
    /// bisection to `1e-10` in time.
    pub fn period(
        &self,
        init: Hamiltonian2DState,
        t_max: f64,
        opts: &IntegratorOptions,
    ) -> Result<PeriodReport> {
        let c = section_crossings(|q, p| self.rhs(q, p), init, t_max, 2, 1e-10, opts)?;
        if c.len() < 2 {
            return Err(GeoError::InvalidState(format!(
                "fewer than two section crossings before t = {t_max}"
            )));
        }
        Ok(PeriodReport {
            period: c[1].t - c[0].t,
            return_residual: (c[1].state.q - c[0].state.q).abs(),
            energy: self.hamiltonian(init.q, init.p),
        })
    }
}
