//! Two-dimensional reduced Hamiltonian flows `(q, p)`.

use serde::{Deserialize, Serialize};

use crate::error::{GeoError, Result};
use crate::integrate::dopri::{solve, FnSystem, IntegratorOptions};
use crate::integrate::Truncation;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Hamiltonian2DState {
    pub q: f64,
    pub p: f64,
}

impl Hamiltonian2DState {
    pub fn new(q: f64, p: f64) -> Result<Self> {
        if !(q.is_finite() && p.is_finite()) {
            return Err(GeoError::InvalidState("planar state must be finite".into()));
        }
        Ok(Hamiltonian2DState { q, p })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlanarTrajectory {
    pub t: Vec<f64>,
    pub states: Vec<Hamiltonian2DState>,
    pub truncation: Option<Truncation>,
}

impl PlanarTrajectory {
    pub fn q(&self) -> Vec<f64> {
        self.states.iter().map(|s| s.q).collect()
    }

    pub fn p(&self) -> Vec<f64> {
        self.states.iter().map(|s| s.p).collect()
    }
}

/// Samples the flow of `rhs` every `dt_out` from `t0` towards `t1`, and at `t1`.
/// Samples are returned in increasing time.
pub fn integrate_planar<F>(
    rhs: F,
    init: Hamiltonian2DState,
    t0: f64,
    t1: f64,
    opts: &IntegratorOptions,
) -> Result<PlanarTrajectory>
where
    F: Fn(f64, f64) -> (f64, f64),
{
    opts.validate()?;
    let sys = FnSystem(|_t: f64, y: &[f64], dy: &mut [f64]| {
        let (dq, dp) = rhs(y[0], y[1]);
        dy[0] = dq;
        dy[1] = dp;
    });
    let dir = (t1 - t0).signum();
    let n_grid = ((t1 - t0).abs() / opts.dt_out * (1.0 + 1e-12)).floor() as usize;
    let mut grid: Vec<f64> = (1..=n_grid).map(|k| t0 + dir * k as f64 * opts.dt_out).collect();
    if grid.last().map_or(t1 != t0, |&g| (t1 - g).abs() > 1e-9 * opts.dt_out) {
        grid.push(t1);
    } else if let Some(g) = grid.last_mut() {
        *g = t1;
    }
    let mut t = vec![t0];
    let mut states = vec![init];
    let mut next = 0;
    let outcome = solve(&sys, t0, &[init.q, init.p], t1, opts, |step, _| {
        while next < grid.len() && step.contains(grid[next]) {
            let y = step.eval(grid[next]);
            t.push(grid[next]);
            states.push(Hamiltonian2DState { q: y[0], p: y[1] });
            next += 1;
        }
        true
    });
    if dir < 0.0 {
        t.reverse();
        states.reverse();
    }
    Ok(PlanarTrajectory {
        t,
        states,
        truncation: outcome.truncation,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SectionCrossing {
    pub t: f64,
    pub state: Hamiltonian2DState,
}

/// Times at which `p` crosses zero from below, located by bisection on the
/// dense output to `time_tol`. Integration stops after `count` crossings or
/// at `t_max`. A start exactly on the section is not counted.
pub fn section_crossings<F>(
    rhs: F,
    init: Hamiltonian2DState,
    t_max: f64,
    count: usize,
    time_tol: f64,
    opts: &IntegratorOptions,
) -> Result<Vec<SectionCrossing>>
where
    F: Fn(f64, f64) -> (f64, f64),
{
    opts.validate()?;
    if !(t_max > 0.0) {
        return Err(GeoError::InvalidParameters("t_max must be positive".into()));
    }
    let sys = FnSystem(|_t: f64, y: &[f64], dy: &mut [f64]| {
        let (dq, dp) = rhs(y[0], y[1]);
        dy[0] = dq;
        dy[1] = dp;
    });
    let mut found = Vec::new();
    let mut p_old = init.p;
    solve(&sys, 0.0, &[init.q, init.p], t_max, opts, |step, y_new| {
        let p_new = y_new[1];
        if p_old < 0.0 && p_new >= 0.0 {
            let (mut lo, mut hi) = (step.t_old, step.t_new);
            while hi - lo > time_tol {
                let mid = 0.5 * (lo + hi);
                if step.eval_component(mid, 1) < 0.0 {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            let tc = 0.5 * (lo + hi);
            let y = step.eval(tc);
            found.push(SectionCrossing {
                t: tc,
                state: Hamiltonian2DState { q: y[0], p: y[1] },
            });
        }
        p_old = p_new;
        found.len() < count
    });
    Ok(found)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn oscillator_period() {
        let rhs = |q: f64, p: f64| (p, -q);
        let opts = IntegratorOptions::default();
        let c = section_crossings(rhs, Hamiltonian2DState { q: 1.0, p: 0.0 }, 20.0, 2, 1e-12, &opts)
            .unwrap();
        assert_eq!(c.len(), 2);
        assert_abs_diff_eq!(c[1].t - c[0].t, 2.0 * std::f64::consts::PI, epsilon = 1e-9);
        assert_abs_diff_eq!(c[0].state.q, -1.0, epsilon = 1e-9);
    }

    #[test]
    fn backward_samples_increase() {
        let opts = IntegratorOptions {
            dt_out: 0.5,
            ..Default::default()
        };
        let tr = integrate_planar(|q, p| (p, -q), Hamiltonian2DState { q: 1.0, p: 0.0 }, 0.0, -2.0, &opts)
            .unwrap();
        assert_eq!(tr.t, vec![-2.0, -1.5, -1.0, -0.5, 0.0]);
        assert_abs_diff_eq!(tr.states[0].q, 2f64.cos(), epsilon = 1e-9);
    }
}
