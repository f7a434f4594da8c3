//! Swirling and shear flows: `m0` rotating blocks against a static remainder,
//! reduced to a planar Hamiltonian system in `(b, v)`.

use serde::{Deserialize, Serialize};

use super::planar::{integrate_planar, Hamiltonian2DState, PlanarTrajectory};
use super::{BlockState, OddTail};
use crate::error::{GeoError, Result};
use crate::integrate::IntegratorOptions;

/// Fraction of the run used for the late-time slope fit.
const FIT_FRACTION: f64 = 0.2;

/// `beta = e^{b/2m0} I_{2m0} + e^{-b/(n-2m0)} I_{n-2m0}`, with `zeta = z0 Z` on
/// the leading `m0` blocks.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SwirlSystem {
    pub n: usize,
    pub m0: usize,
    pub z0: f64,
}

/// Least-squares slope fit of a late-time window against a predicted slope.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SwirlAsymptotics {
    pub energy: f64,
    pub fit_start: f64,
    pub fit_end: f64,
    pub fitted_slope: f64,
    pub predicted_slope: f64,
    pub relative_error: f64,
}

/// Behaviour of `b` for `z0 = 0`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShearReport {
    pub strictly_monotone: bool,
    pub b_min: f64,
    pub b_max: f64,
    /// Growth of `e^{-b/(4 m0)}` on the side where `b -> -infinity`.
    pub minus: SwirlAsymptotics,
    /// Growth of `e^{b/(2n - 4 m0)}` on the side where `b -> +infinity`.
    pub plus: SwirlAsymptotics,
}

/// `(slope, intercept)` of the least-squares line through the points.
pub fn fit_line(t: &[f64], y: &[f64]) -> (f64, f64) {
    let n = t.len() as f64;
    let tm = t.iter().sum::<f64>() / n;
    let ym = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (ti, yi) in t.iter().zip(y) {
        sxy += (ti - tm) * (yi - ym);
        sxx += (ti - tm) * (ti - tm);
    }
    let slope = sxy / sxx;
    (slope, ym - slope * tm)
}

impl SwirlSystem {
    pub fn new(n: usize, m0: usize, z0: f64) -> Result<Self> {
        if !(m0 >= 1 && 2 * m0 < n) {
            return Err(GeoError::InvalidParameters(format!(
                "swirl system needs 1 <= 2 m0 < n, got n = {n}, m0 = {m0}"
            )));
        }
        if !z0.is_finite() {
            return Err(GeoError::InvalidParameters("z0 must be finite".into()));
        }
        Ok(SwirlSystem { n, m0, z0 })
    }

    fn k(&self) -> f64 {
        self.m0 as f64
    }

    fn r(&self) -> f64 {
        (self.n - 2 * self.m0) as f64
    }

    /// Coefficient of `v^2` in the Hamiltonian.
    pub fn kinetic_coefficient(&self, b: f64) -> f64 {
        let (k, r) = (self.k(), self.r());
        (-b / (2.0 * k)).exp() / (4.0 * k) + (b / r).exp() / (2.0 * r)
    }

    pub fn hamiltonian(&self, b: f64, v: f64) -> f64 {
        self.k() * self.z0 * self.z0 * (b / (2.0 * self.k())).exp()
            + self.kinetic_coefficient(b) * v * v
    }

    fn dh_db(&self, b: f64, v: f64) -> f64 {
        let (k, r) = (self.k(), self.r());
        let dg = -(-b / (2.0 * k)).exp() / (8.0 * k * k) + (b / r).exp() / (2.0 * r * r);
        0.5 * self.z0 * self.z0 * (b / (2.0 * k)).exp() + dg * v * v
    }

    /// `(b', v')` with `b' = -v`; `v'` follows from conservation of `H`.
    pub fn rhs(&self, b: f64, v: f64) -> (f64, f64) {
        (-v, self.dh_db(b, v) / (2.0 * self.kinetic_coefficient(b)))
    }

    /// The block state carrying `(b, v)`.
    pub fn to_block(&self, s: Hamiltonian2DState) -> Result<BlockState> {
        let (k, r) = (self.k(), self.r());
        let rest = (self.n - 2 * self.m0) / 2;
        let lead_b = (s.q / (2.0 * k)).exp();
        let lead_w = s.p / (2.0 * k) * (-s.q / (2.0 * k)).exp();
        let rest_b = (-s.q / r).exp();
        let rest_w = -s.p / r * (s.q / r).exp();
        let mut b0 = vec![lead_b; self.m0];
        b0.resize(self.m0 + rest, rest_b);
        let mut w0 = vec![lead_w; self.m0];
        w0.resize(self.m0 + rest, rest_w);
        let mut z = vec![self.z0; self.m0];
        z.resize(self.m0 + rest, 0.0);
        let tail = (self.n % 2 == 1).then_some(OddTail {
            b_inf: rest_b,
            w_inf: rest_w,
        });
        BlockState::pure_diagonal(b0, w0, z, tail)
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

    fn fit(
        &self,
        tr: &PlanarTrajectory,
        window: (f64, f64),
        f: impl Fn(f64) -> f64,
        predicted: f64,
        energy: f64,
    ) -> SwirlAsymptotics {
        let (lo, hi) = (window.0.min(window.1), window.0.max(window.1));
        let (t, y): (Vec<f64>, Vec<f64>) = tr
            .t
            .iter()
            .zip(&tr.states)
            .filter(|(t, _)| **t >= lo && **t <= hi)
            .map(|(t, s)| (*t, f(s.q)))
            .unzip();
        let fitted = fit_line(&t, &y).0.abs();
        SwirlAsymptotics {
            energy,
            fit_start: window.0,
            fit_end: window.1,
            fitted_slope: fitted,
            predicted_slope: predicted,
            relative_error: (fitted - predicted).abs() / predicted,
        }
    }

    /// For `z0 != 0`: fits `B = e^{-b/(4 m0)}` over the last fifth of
    /// `[0, t_end]` and compares with `sqrt(H / m0) / 2`.
    pub fn asymptotic_slope(
        &self,
        init: Hamiltonian2DState,
        t_end: f64,
        opts: &IntegratorOptions,
    ) -> Result<SwirlAsymptotics> {
        if self.z0 == 0.0 {
            return Err(GeoError::InvalidParameters(
                "the slope of B applies to z0 != 0; use shear_report".into(),
            ));
        }
        let tr = self.flow(init, 0.0, t_end, opts)?;
        if let Some(trunc) = &tr.truncation {
            return Err(GeoError::InvalidState(format!("swirl flow stopped: {trunc}")));
        }
        let h = self.hamiltonian(init.q, init.p);
        let k = self.k();
        Ok(self.fit(
            &tr,
            ((1.0 - FIT_FRACTION) * t_end, t_end),
            |b| (-b / (4.0 * k)).exp(),
            0.5 * (h / k).sqrt(),
            h,
        ))
    }

    /// For `z0 = 0`: integrates over `[-t_end, t_end]`, checks that `b` is
    /// strictly monotone and fits both growth rates.
    pub fn shear_report(
        &self,
        init: Hamiltonian2DState,
        t_end: f64,
        opts: &IntegratorOptions,
    ) -> Result<ShearReport> {
        if self.z0 != 0.0 {
            return Err(GeoError::InvalidParameters("shear flows have z0 = 0".into()));
        }
        if init.p == 0.0 {
            return Err(GeoError::InvalidParameters(
                "v = 0 with z0 = 0 is a static solution".into(),
            ));
        }
        let back = self.flow(init, 0.0, -t_end, opts)?;
        let fwd = self.flow(init, 0.0, t_end, opts)?;
        if let Some(trunc) = back.truncation.as_ref().or(fwd.truncation.as_ref()) {
            return Err(GeoError::InvalidState(format!("shear flow stopped: {trunc}")));
        }
        let mut tr = back;
        tr.t.pop();
        tr.states.pop();
        tr.t.extend(fwd.t);
        tr.states.extend(fwd.states);

        let b = tr.q();
        let increasing = b.windows(2).all(|w| w[1] > w[0]);
        let decreasing = b.windows(2).all(|w| w[1] < w[0]);
        let b_min = b.iter().cloned().fold(f64::INFINITY, f64::min);
        let b_max = b.iter().cloned().fold(f64::NEG_INFINITY, f64::max);

        let h = self.hamiltonian(init.q, init.p);
        let (k, r) = (self.k(), self.r());
        // b' = -v > 0 sends b to -infinity in the past.
        let s = if init.p < 0.0 { 1.0 } else { -1.0 };
        let late = ((1.0 - FIT_FRACTION) * t_end, t_end);
        let early = (-s * late.0, -s * late.1);
        let later = (s * late.0, s * late.1);
        let minus = self.fit(&tr, early, |b| (-b / (4.0 * k)).exp(), (h / (4.0 * k)).sqrt(), h);
        let plus = self.fit(&tr, later, |b| (b / (2.0 * r)).exp(), (h / (2.0 * r)).sqrt(), h);
        Ok(ShearReport {
            strictly_monotone: increasing || decreasing,
            b_min,
            b_max,
            minus,
            plus,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn energy_at_origin() {
        let s = SwirlSystem::new(3, 1, 1.0).unwrap();
        assert_eq!(s.hamiltonian(0.0, 0.0), 1.0);
        assert!(SwirlSystem::new(2, 1, 1.0).is_err());
        assert!(SwirlSystem::new(5, 0, 1.0).is_err());
    }

    #[test]
    fn energy_matches_block_energy() {
        for (n, m0) in [(3, 1), (4, 1), (5, 2), (7, 2)] {
            let s = SwirlSystem::new(n, m0, 0.8).unwrap();
            let st = Hamiltonian2DState { q: 0.4, p: -0.7 };
            let block = s.to_block(st).unwrap();
            assert_eq!(block.dim(), n);
            assert_abs_diff_eq!(s.hamiltonian(st.q, st.p), block.energy(), epsilon = 1e-12);
            let d = block.rhs();
            let (db, _) = s.rhs(st.q, st.p);
            // b = 2 m0 ln b0_1.
            assert_abs_diff_eq!(db, 2.0 * m0 as f64 * d.b0[0] / block.b0[0], epsilon = 1e-12);
        }
    }

    #[test]
    fn line_fit_is_exact_on_lines() {
        let t = [0.0, 1.0, 2.0, 3.0];
        let y = [1.0, 3.0, 5.0, 7.0];
        assert_eq!(fit_line(&t, &y), (2.0, 1.0));
    }
}
