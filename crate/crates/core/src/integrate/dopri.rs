//! Dormand-Prince 5(4) with dense output and PI step-size control.
//!
//! The driver calls a user projection after every accepted step and then
//! restarts the stage sequence from the projected point, so the first-same-as-
//! last stage is not reused across a projection.

use serde::{Deserialize, Serialize};

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;

const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

const SAFETY: f64 = 0.9;
const BETA: f64 = 0.04;
const FAC1: f64 = 0.2;
const FAC2: f64 = 10.0;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IntegratorOptions {
    pub rel_tol: f64,
    pub abs_tol: f64,
    /// Output stride for sampled trajectories.
    pub dt_out: f64,
    pub max_steps: usize,
    /// Absolute lower bound on the step size before giving up.
    pub min_step: f64,
    /// Upper bound on the step size (0 means unbounded).
    pub max_step: f64,
}

impl Default for IntegratorOptions {
    fn default() -> Self {
        IntegratorOptions {
            rel_tol: 1e-10,
            abs_tol: 1e-12,
            dt_out: 0.01,
            max_steps: 20_000_000,
            min_step: 1e-14,
            max_step: 0.0,
        }
    }
}

impl IntegratorOptions {
    pub fn validate(&self) -> crate::Result<()> {
        let ok = self.rel_tol > 0.0
            && self.abs_tol >= 0.0
            && self.dt_out > 0.0
            && self.dt_out.is_finite()
            && self.max_steps > 0
            && self.min_step >= 0.0
            && self.max_step >= 0.0;
        if ok {
            Ok(())
        } else {
            Err(crate::GeoError::InvalidParameters(format!(
                "integrator options out of range: {self:?}"
            )))
        }
    }
}

/// Why an integration stopped before reaching its end time.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum TruncationReason {
    StepUnderflow,
    MaxSteps,
    NonFinite,
    InvalidState(String),
    Stopped,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Truncation {
    pub t: f64,
    pub reason: TruncationReason,
    pub last_step: f64,
}

impl std::fmt::Display for Truncation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let what = match &self.reason {
            TruncationReason::StepUnderflow => "step size underflow".to_string(),
            TruncationReason::MaxSteps => "maximum number of steps reached".to_string(),
            TruncationReason::NonFinite => "state became non-finite".to_string(),
            TruncationReason::InvalidState(s) => format!("state left its constraint set ({s})"),
            TruncationReason::Stopped => "stopped by observer".to_string(),
        };
        write!(f, "integration truncated at t = {} (last step {:e}): {}", self.t, self.last_step, what)
    }
}

/// One accepted step together with its continuous extension.
pub struct DenseStep<'a> {
    pub t_old: f64,
    pub t_new: f64,
    pub h: f64,
    rcont: &'a [Vec<f64>; 5],
}

impl DenseStep<'_> {
    /// Interpolated state at `t` (meant for `t` between `t_old` and `t_new`).
    pub fn eval(&self, t: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.rcont[0].len()];
        self.eval_into(t, &mut out);
        out
    }

    pub fn eval_into(&self, t: f64, out: &mut [f64]) {
        let th = (t - self.t_old) / self.h;
        let th1 = 1.0 - th;
        let [r1, r2, r3, r4, r5] = self.rcont;
        for i in 0..out.len() {
            out[i] = r1[i] + th * (r2[i] + th1 * (r3[i] + th * (r4[i] + th1 * r5[i])));
        }
    }

    /// Interpolated value of component `i` at `t`.
    pub fn eval_component(&self, t: f64, i: usize) -> f64 {
        let th = (t - self.t_old) / self.h;
        let th1 = 1.0 - th;
        let [r1, r2, r3, r4, r5] = self.rcont;
        r1[i] + th * (r2[i] + th1 * (r3[i] + th * (r4[i] + th1 * r5[i])))
    }

    pub fn contains(&self, t: f64) -> bool {
        let (lo, hi) = if self.h > 0.0 {
            (self.t_old, self.t_new)
        } else {
            (self.t_new, self.t_old)
        };
        t >= lo && t <= hi
    }
}

/// Final state of a call to [`solve`].
#[derive(Clone, Debug)]
pub struct Outcome {
    pub t: f64,
    pub y: Vec<f64>,
    pub accepted: usize,
    pub rejected: usize,
    pub evaluations: usize,
    pub truncation: Option<Truncation>,
}

/// Right-hand side and constraint projection of an autonomous-or-not ODE.
pub trait OdeSystem {
    fn rhs(&self, t: f64, y: &[f64], dy: &mut [f64]);

    fn project(&self, _y: &mut [f64]) {}
}

/// Closure adapter for systems without a projection.
pub struct FnSystem<F>(pub F);

impl<F: Fn(f64, &[f64], &mut [f64])> OdeSystem for FnSystem<F> {
    fn rhs(&self, t: f64, y: &[f64], dy: &mut [f64]) {
        (self.0)(t, y, dy)
    }
}

fn all_finite(y: &[f64]) -> bool {
    y.iter().all(|v| v.is_finite())
}

fn initial_step<S: OdeSystem>(
    sys: &S,
    t0: f64,
    y0: &[f64],
    f0: &[f64],
    dir: f64,
    opts: &IntegratorOptions,
    hmax: f64,
) -> f64 {
    let n = y0.len();
    let mut dnf = 0.0;
    let mut dny = 0.0;
    for i in 0..n {
        let sk = opts.abs_tol + opts.rel_tol * y0[i].abs();
        dnf += (f0[i] / sk).powi(2);
        dny += (y0[i] / sk).powi(2);
    }
    let mut h = if dnf <= 1e-10 || dny <= 1e-10 {
        1e-6
    } else {
        (dny / dnf).sqrt() * 0.01
    };
    h = h.min(hmax);
    let y1: Vec<f64> = (0..n).map(|i| y0[i] + dir * h * f0[i]).collect();
    let mut f1 = vec![0.0; n];
    sys.rhs(t0 + dir * h, &y1, &mut f1);
    let mut der2 = 0.0;
    for i in 0..n {
        let sk = opts.abs_tol + opts.rel_tol * y0[i].abs();
        der2 += ((f1[i] - f0[i]) / sk).powi(2);
    }
    let der2 = der2.sqrt() / h;
    let der12 = der2.abs().max(dnf.sqrt());
    let h1 = if der12 <= 1e-15 || !der12.is_finite() {
        (h * 1e-3).max(1e-6)
    } else {
        (0.01 / der12).powf(0.2)
    };
    (100.0 * h).min(h1).min(hmax)
}

/// Integrates `sys` from `(t0, y0)` to `t1`, calling `observer` on every
/// accepted step. The observer returns `false` to stop early.
pub fn solve<S, O>(
    sys: &S,
    t0: f64,
    y0: &[f64],
    t1: f64,
    opts: &IntegratorOptions,
    mut observer: O,
) -> Outcome
where
    S: OdeSystem,
    O: FnMut(&DenseStep<'_>, &[f64]) -> bool,
{
    let n = y0.len();
    let mut y = y0.to_vec();
    sys.project(&mut y);
    let mut t = t0;
    let mut out = Outcome {
        t,
        y: y.clone(),
        accepted: 0,
        rejected: 0,
        evaluations: 0,
        truncation: None,
    };
    if t1 == t0 {
        return out;
    }
    let dir = (t1 - t0).signum();
    let span = (t1 - t0).abs();
    let hmax = if opts.max_step > 0.0 {
        opts.max_step.min(span)
    } else {
        span
    };

    let mut k1 = vec![0.0; n];
    let mut k2 = vec![0.0; n];
    let mut k3 = vec![0.0; n];
    let mut k4 = vec![0.0; n];
    let mut k5 = vec![0.0; n];
    let mut k6 = vec![0.0; n];
    let mut k7 = vec![0.0; n];
    let mut ytmp = vec![0.0; n];
    let mut ynew = vec![0.0; n];
    let mut rcont: [Vec<f64>; 5] = std::array::from_fn(|_| vec![0.0; n]);

    sys.rhs(t, &y, &mut k1);
    out.evaluations += 1;
    if !all_finite(&k1) || !all_finite(&y) {
        out.truncation = Some(Truncation {
            t,
            reason: TruncationReason::NonFinite,
            last_step: 0.0,
        });
        return out;
    }
    let mut h = initial_step(sys, t, &y, &k1, dir, opts, hmax);
    out.evaluations += 1;
    let mut facold: f64 = 1e-4;
    let mut last_rejected = false;
    let mut steps = 0usize;
    let expo1 = 0.2 - BETA * 0.75;

    loop {
        if steps >= opts.max_steps {
            out.truncation = Some(Truncation {
                t,
                reason: TruncationReason::MaxSteps,
                last_step: h,
            });
            break;
        }
        let remaining = (t1 - t).abs();
        let mut last = false;
        if h >= remaining * (1.0 - 1e-12) || h * 1.01 >= remaining {
            h = remaining;
            last = true;
        }
        let underflow_bound = opts.min_step.max(10.0 * f64::EPSILON * t.abs());
        if h < underflow_bound {
            out.truncation = Some(Truncation {
                t,
                reason: TruncationReason::StepUnderflow,
                last_step: h,
            });
            break;
        }
        steps += 1;
        let hs = dir * h;

        for i in 0..n {
            ytmp[i] = y[i] + hs * A21 * k1[i];
        }
        sys.rhs(t + C2 * hs, &ytmp, &mut k2);
        for i in 0..n {
            ytmp[i] = y[i] + hs * (A31 * k1[i] + A32 * k2[i]);
        }
        sys.rhs(t + C3 * hs, &ytmp, &mut k3);
        for i in 0..n {
            ytmp[i] = y[i] + hs * (A41 * k1[i] + A42 * k2[i] + A43 * k3[i]);
        }
        sys.rhs(t + C4 * hs, &ytmp, &mut k4);
        for i in 0..n {
            ytmp[i] = y[i] + hs * (A51 * k1[i] + A52 * k2[i] + A53 * k3[i] + A54 * k4[i]);
        }
        sys.rhs(t + C5 * hs, &ytmp, &mut k5);
        for i in 0..n {
            ytmp[i] = y[i]
                + hs * (A61 * k1[i] + A62 * k2[i] + A63 * k3[i] + A64 * k4[i] + A65 * k5[i]);
        }
        let tph = if last { t1 } else { t + hs };
        sys.rhs(tph, &ytmp, &mut k6);
        for i in 0..n {
            ynew[i] = y[i]
                + hs * (A71 * k1[i] + A73 * k3[i] + A74 * k4[i] + A75 * k5[i] + A76 * k6[i]);
        }
        sys.rhs(tph, &ynew, &mut k7);
        out.evaluations += 6;

        let mut err = 0.0;
        for i in 0..n {
            let sk = opts.abs_tol + opts.rel_tol * y[i].abs().max(ynew[i].abs());
            let e = hs
                * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
            err += (e / sk).powi(2);
        }
        let err = (err / n as f64).sqrt();

        if !err.is_finite() || !all_finite(&ynew) {
            out.rejected += 1;
            last_rejected = true;
            h *= 0.1;
            continue;
        }

        let fac11 = err.powf(expo1);
        let fac = fac11 / facold.powf(BETA);
        let fac = (1.0 / FAC2).max((1.0 / FAC1).min(fac / SAFETY));
        let mut hnew = h / fac;

        if err <= 1.0 {
            facold = err.max(1e-4);
            out.accepted += 1;
            for i in 0..n {
                let ydiff = ynew[i] - y[i];
                let bspl = hs * k1[i] - ydiff;
                rcont[0][i] = y[i];
                rcont[1][i] = ydiff;
                rcont[2][i] = bspl;
                rcont[3][i] = ydiff - hs * k7[i] - bspl;
                rcont[4][i] = hs
                    * (D1 * k1[i] + D3 * k3[i] + D4 * k4[i] + D5 * k5[i] + D6 * k6[i]
                        + D7 * k7[i]);
            }
            let t_old = t;
            t = tph;
            sys.project(&mut ynew);
            std::mem::swap(&mut y, &mut ynew);
            let step = DenseStep {
                t_old,
                t_new: t,
                h: hs,
                rcont: &rcont,
            };
            let keep_going = observer(&step, &y);
            if !keep_going {
                out.truncation = Some(Truncation {
                    t,
                    reason: TruncationReason::Stopped,
                    last_step: h,
                });
                break;
            }
            if last {
                break;
            }
            sys.rhs(t, &y, &mut k1);
            out.evaluations += 1;
            if !all_finite(&k1) {
                out.truncation = Some(Truncation {
                    t,
                    reason: TruncationReason::NonFinite,
                    last_step: h,
                });
                break;
            }
            if last_rejected {
                hnew = hnew.min(h);
            }
            last_rejected = false;
            h = hnew.min(hmax);
        } else {
            out.rejected += 1;
            last_rejected = true;
            hnew = h / (1.0 / FAC1).min(fac11 / SAFETY);
            h = hnew;
        }
    }
    out.t = t;
    out.y = y;
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponential_decay_is_accurate() {
        let sys = FnSystem(|_t: f64, y: &[f64], dy: &mut [f64]| dy[0] = -y[0]);
        let out = solve(&sys, 0.0, &[1.0], 5.0, &IntegratorOptions::default(), |_, _| true);
        assert!(out.truncation.is_none());
        assert!((out.y[0] - (-5.0f64).exp()).abs() < 1e-11);
    }

    #[test]
    fn harmonic_oscillator_backward_and_dense() {
        let sys = FnSystem(|_t: f64, y: &[f64], dy: &mut [f64]| {
            dy[0] = y[1];
            dy[1] = -y[0];
        });
        let mut worst: f64 = 0.0;
        let out = solve(
            &sys,
            0.0,
            &[0.0, 1.0],
            -20.0,
            &IntegratorOptions::default(),
            |step, _| {
                let tm = 0.5 * (step.t_old + step.t_new);
                worst = worst.max((step.eval(tm)[0] - tm.sin()).abs());
                true
            },
        );
        assert!(out.truncation.is_none());
        assert_eq!(out.t, -20.0);
        assert!((out.y[0] - (-20.0f64).sin()).abs() < 1e-9);
        assert!(worst < 1e-9, "dense output error {worst}");
    }

    #[test]
    fn blow_up_is_reported() {
        // y' = y^2 blows up at t = 1.
        let sys = FnSystem(|_t: f64, y: &[f64], dy: &mut [f64]| dy[0] = y[0] * y[0]);
        let out = solve(&sys, 0.0, &[1.0], 2.0, &IntegratorOptions::default(), |_, _| true);
        let tr = out.truncation.expect("must truncate");
        assert!(tr.t < 1.0 && tr.t > 0.99);
    }

    #[test]
    fn observer_can_stop() {
        let sys = FnSystem(|_t: f64, _y: &[f64], dy: &mut [f64]| dy[0] = 1.0);
        let out = solve(&sys, 0.0, &[0.0], 1e6, &IntegratorOptions::default(), |s, _| {
            s.t_new < 1.0
        });
        assert_eq!(out.truncation.unwrap().reason, TruncationReason::Stopped);
    }
}
