use serde::{Deserialize, Serialize};

use super::dopri::{solve, IntegratorOptions, OdeSystem, Truncation, TruncationReason};
use super::state::{
    consistent_jdot, geodesic_accel, jacobi_accel, reduced_rates, JacobiState, PhaseState,
    ReducedState,
};
use crate::error::{GeoError, Result};
use crate::geometry::{project_tangent, sff_reduced};
use crate::linalg::{GroupPoint, SquareMatrix};

/// Tolerance on `|det - 1|` when rebuilding states from integrator data. The
/// projection puts every sample on the constraint set up to the rounding of
/// an ill-conditioned rescaling; the actual deviation is reported as
/// `det_drift`.
pub const SAMPLE_DET_TOLERANCE: f64 = 1e-6;

/// Conserved quantities and monitors attached to every trajectory sample.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct InvariantReport {
    pub energy: f64,
    pub det_drift: f64,
    pub zeta_drift: f64,
    pub angmom_drift: f64,
    pub sff: f64,
    pub virial_residual: f64,
    pub trace_omega: f64,
    /// Norms of a co-integrated Jacobi field, when there is one.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub jacobi: Option<JacobiNorms>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct JacobiNorms {
    pub j_norm: f64,
    pub covariant_rate_norm: f64,
}

impl InvariantReport {
    pub const COLUMNS: [&'static str; 7] = [
        "energy",
        "det_drift",
        "zeta_drift",
        "angmom_drift",
        "sff",
        "virial_residual",
        "trace_omega",
    ];

    pub fn values(&self) -> [f64; 7] {
        [
            self.energy,
            self.det_drift,
            self.zeta_drift,
            self.angmom_drift,
            self.sff,
            self.virial_residual,
            self.trace_omega,
        ]
    }

    pub fn is_finite(&self) -> bool {
        self.values().iter().all(|v| v.is_finite())
    }
}

/// A state type that can be integrated by the generic driver.
///
/// The packed representation is a flat row-major vector; `self` acts as the
/// template that fixes the dimension.
pub trait FlowState: Clone + Sized {
    fn pack(&self) -> Vec<f64>;

    /// Rebuilds a validated state from packed data.
    fn unpack(&self, y: &[f64]) -> Result<Self>;

    fn derivative(&self, y: &[f64], dy: &mut [f64]);

    /// Pulls packed data back onto the constraint set.
    fn project(&self, y: &mut [f64]);

    /// Report with `virial_residual` left at zero; the driver fills it in.
    fn report(&self, reference: &Self) -> InvariantReport;

    /// Predicted `d^2/dt^2 ||A||^2`.
    fn virial_prediction(&self) -> f64;

    fn state_columns(&self) -> Vec<String>;

    fn state_values(&self) -> Vec<f64>;
}

struct Driver<'a, S>(&'a S);

impl<S: FlowState> OdeSystem for Driver<'_, S> {
    fn rhs(&self, _t: f64, y: &[f64], dy: &mut [f64]) {
        self.0.derivative(y, dy)
    }

    fn project(&self, y: &mut [f64]) {
        self.0.project(y)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Sample<S> {
    pub t: f64,
    pub state: S,
    pub report: InvariantReport,
}

/// Samples in strictly increasing time, plus an explanation if the
/// integration stopped early.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trajectory<S> {
    pub samples: Vec<Sample<S>>,
    pub truncation: Option<Truncation>,
}

impl<S> Trajectory<S> {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn times(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.t).collect()
    }

    pub fn first(&self) -> Option<&Sample<S>> {
        self.samples.first()
    }

    pub fn last(&self) -> Option<&Sample<S>> {
        self.samples.last()
    }

    pub fn is_complete(&self) -> bool {
        self.truncation.is_none()
    }

    /// Maximum of a report field over all samples.
    pub fn max_of(&self, f: impl Fn(&InvariantReport) -> f64) -> f64 {
        self.samples
            .iter()
            .map(|s| f(&s.report))
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Sample whose time is closest to `t`.
    pub fn nearest(&self, t: f64) -> Option<&Sample<S>> {
        self.samples
            .iter()
            .min_by(|a, b| (a.t - t).abs().total_cmp(&(b.t - t).abs()))
    }
}

/// Finite-difference weights (Fornberg) for derivatives `0..=m` at `z`
/// from nodes `x`. Returns `c[k][j]`.
pub fn fd_weights(z: f64, x: &[f64], m: usize) -> Vec<Vec<f64>> {
    let n = x.len();
    let mut c = vec![vec![0.0; n]; m + 1];
    if n == 0 {
        return c;
    }
    let mut c1 = 1.0;
    let mut c4 = x[0] - z;
    c[0][0] = 1.0;
    for i in 1..n {
        let mn = i.min(m);
        let mut c2 = 1.0;
        let c5 = c4;
        c4 = x[i] - z;
        for j in 0..i {
            let c3 = x[i] - x[j];
            c2 *= c3;
            if j == i - 1 {
                for k in (1..=mn).rev() {
                    c[k][i] = c1 * (k as f64 * c[k - 1][i - 1] - c5 * c[k][i - 1]) / c2;
                }
                c[0][i] = -c1 * c5 * c[0][i - 1] / c2;
            }
            for k in (1..=mn).rev() {
                c[k][j] = (c4 * c[k][j] - k as f64 * c[k - 1][j]) / c3;
            }
            c[0][j] = c4 * c[0][j] / c3;
        }
        c1 = c2;
    }
    c
}

/// Derivative of sampled data by 5-point finite differences (fewer points
/// near short series), centred where possible.
pub fn sampled_derivative(t: &[f64], v: &[f64]) -> Vec<f64> {
    let n = t.len();
    let w = n.min(5);
    (0..n)
        .map(|i| {
            if w < 2 {
                return 0.0;
            }
            let start = i.saturating_sub(w / 2).min(n - w);
            let xs = &t[start..start + w];
            let c = fd_weights(t[i], xs, 1);
            (0..w).map(|j| c[1][j] * v[start + j]).sum()
        })
        .collect()
}

fn fill_virial<S: FlowState>(samples: &mut [Sample<S>]) {
    let t: Vec<f64> = samples.iter().map(|s| s.t).collect();
    let tr: Vec<f64> = samples.iter().map(|s| s.report.trace_omega).collect();
    let d = sampled_derivative(&t, &tr);
    for (s, di) in samples.iter_mut().zip(d) {
        s.report.virial_residual = (di - s.state.virial_prediction()).abs();
    }
}

fn run_leg<S: FlowState>(
    init: &S,
    t_start: f64,
    t_end: f64,
    opts: &IntegratorOptions,
) -> (Vec<Sample<S>>, Option<Truncation>) {
    let mut samples = vec![Sample {
        t: t_start,
        state: init.clone(),
        report: init.report(init),
    }];
    if t_end == t_start {
        return (samples, None);
    }
    let dir = (t_end - t_start).signum();
    let span = (t_end - t_start).abs();
    let dt = opts.dt_out;
    let n_grid = (span / dt * (1.0 + 1e-12)).floor() as usize;
    let mut grid: Vec<f64> = (1..=n_grid).map(|k| t_start + dir * k as f64 * dt).collect();
    if grid.last().map_or(true, |&g| (t_end - g).abs() > 1e-9 * dt) {
        grid.push(t_end);
    } else if let Some(g) = grid.last_mut() {
        *g = t_end;
    }

    let sys = Driver(init);
    let mut next = 0usize;
    let mut failure: Option<(f64, String)> = None;
    let mut buf = vec![0.0; init.pack().len()];
    let outcome = solve(&sys, t_start, &init.pack(), t_end, opts, |step, y_new| {
        while next < grid.len() && step.contains(grid[next]) {
            let tg = grid[next];
            if tg == step.t_new {
                buf.copy_from_slice(y_new);
            } else {
                step.eval_into(tg, &mut buf);
                init.project(&mut buf);
            }
            match init.unpack(&buf) {
                Ok(state) => {
                    let report = state.report(init);
                    samples.push(Sample {
                        t: tg,
                        state,
                        report,
                    });
                }
                Err(e) => {
                    failure = Some((tg, e.to_string()));
                    return false;
                }
            }
            next += 1;
        }
        true
    });
    let truncation = match failure {
        Some((t, msg)) => Some(Truncation {
            t,
            reason: TruncationReason::InvalidState(msg),
            last_step: outcome.truncation.as_ref().map_or(0.0, |tr| tr.last_step),
        }),
        None => outcome.truncation,
    };
    if dir < 0.0 {
        samples.reverse();
    }
    (samples, truncation)
}

fn check_span(t_start: f64, t_end: f64, opts: &IntegratorOptions) -> Result<()> {
    opts.validate()?;
    if !t_start.is_finite() || !t_end.is_finite() {
        return Err(GeoError::InvalidParameters("time span must be finite".into()));
    }
    Ok(())
}

/// Integrates from `t_start` to `t_end` (either direction), sampling every
/// `dt_out` from `t_start` and at `t_end`.
pub fn integrate_span<S: FlowState>(
    init: &S,
    t_start: f64,
    t_end: f64,
    opts: &IntegratorOptions,
) -> Result<Trajectory<S>> {
    check_span(t_start, t_end, opts)?;
    let (mut samples, truncation) = run_leg(init, t_start, t_end, opts);
    fill_virial(&mut samples);
    Ok(Trajectory {
        samples,
        truncation,
    })
}

/// Wraps states known at the given times, for instance from a closed form,
/// as a trajectory with reports relative to the first state.
pub fn sampled_trajectory<S: FlowState>(times: &[f64], states: Vec<S>) -> Result<Trajectory<S>> {
    if times.is_empty() || times.len() != states.len() {
        return Err(GeoError::InvalidParameters(format!(
            "need one state per time, got {} times and {} states",
            times.len(),
            states.len()
        )));
    }
    if !times.windows(2).all(|w| w[1] > w[0]) {
        return Err(GeoError::InvalidParameters("times must be strictly increasing".into()));
    }
    let reference = states[0].clone();
    let mut samples: Vec<Sample<S>> = times
        .iter()
        .zip(states)
        .map(|(&t, state)| Sample {
            t,
            report: state.report(&reference),
            state,
        })
        .collect();
    fill_virial(&mut samples);
    Ok(Trajectory {
        samples,
        truncation: None,
    })
}

/// Integrates from `t = 0` to `t_end`; negative `t_end` runs backward.
pub fn integrate_geodesic<S: FlowState>(
    init: &S,
    t_end: f64,
    opts: &IntegratorOptions,
) -> Result<Trajectory<S>> {
    integrate_span(init, 0.0, t_end, opts)
}

/// Integrates both ways from `t = 0` to cover `[t_min, t_max]`.
pub fn integrate_window<S: FlowState>(
    init: &S,
    t_min: f64,
    t_max: f64,
    opts: &IntegratorOptions,
) -> Result<Trajectory<S>> {
    check_span(t_min, t_max, opts)?;
    if !(t_min <= 0.0 && t_max >= 0.0) {
        return Err(GeoError::InvalidParameters(
            "window must contain the initial time 0".into(),
        ));
    }
    let (mut back, trunc_back) = run_leg(init, 0.0, t_min, opts);
    let (fwd, trunc_fwd) = run_leg(init, 0.0, t_max, opts);
    back.pop();
    back.extend(fwd);
    fill_virial(&mut back);
    Ok(Trajectory {
        samples: back,
        truncation: trunc_fwd.or(trunc_back),
    })
}

/// Integrates a Jacobi field together with its geodesic.
pub fn integrate_jacobi(
    init: &JacobiState,
    t_end: f64,
    opts: &IntegratorOptions,
) -> Result<Trajectory<JacobiState>> {
    integrate_span(init, 0.0, t_end, opts)
}

fn mat(n: usize, y: &[f64], k: usize) -> SquareMatrix {
    let m = n * n;
    SquareMatrix::from_row_slice_unchecked(n, &y[k * m..(k + 1) * m])
}

fn put(y: &mut [f64], n: usize, k: usize, a: &SquareMatrix) {
    let m = n * n;
    let dst = &mut y[k * m..(k + 1) * m];
    for i in 0..n {
        for j in 0..n {
            dst[i * n + j] = a.get(i, j);
        }
    }
}

fn fill_nan(dy: &mut [f64]) {
    dy.iter_mut().for_each(|v| *v = f64::NAN);
}

/// Rounds of adjustments in [`polish_det`].
const POLISH_ROUNDS: usize = 8;
/// Largest number of ulps an entry may move in one round.
const POLISH_MAX_ULPS: f64 = 64.0;
/// Range of ulp moves tried for the first entry of a pair.
const POLISH_PAIR_ULPS: i32 = 8;

fn step_ulps(x: f64, k: f64) -> f64 {
    let mut x = x;
    for _ in 0..k.abs() as usize {
        x = if k > 0.0 { x.next_up() } else { x.next_down() };
    }
    x
}

/// For ill-conditioned `A` the doubles next to `A` have determinants spread
/// over `~ ||A^-1|| ulp(A)`, so rounding after a projection leaves `det`
/// visibly off 1. This picks, among matrices a few ulps per entry away, one
/// whose determinant is closer to 1, moving one or two entries per round.
fn polish_det(a: &mut SquareMatrix) {
    let n = a.dim();
    for _ in 0..POLISH_ROUNDS {
        let det = a.det();
        let r = det - 1.0;
        if !(r.abs() > 4.0 * f64::EPSILON) {
            return;
        }
        let Some(inv) = a.inverse() else { return };
        // Change of det per ulp of each entry.
        let g: Vec<(usize, usize, f64)> = (0..n)
            .flat_map(|i| (0..n).map(move |j| (i, j)))
            .filter_map(|(i, j)| {
                let x = a.get(i, j);
                let d = det * inv.get(j, i) * (x.next_up() - x);
                (d != 0.0 && d.is_finite()).then_some((i, j, d))
            })
            .collect();
        let fit = |target: f64, d: f64| (-target / d).round().clamp(-POLISH_MAX_ULPS, POLISH_MAX_ULPS);
        // (moves, residual)
        let mut best: (Vec<(usize, f64)>, f64) = (Vec::new(), r.abs());
        for (p, &(_, _, gp)) in g.iter().enumerate() {
            let k = fit(r, gp);
            let left = (r + k * gp).abs();
            if left < best.1 {
                best = (vec![(p, k)], left);
            }
        }
        if best.1 > 4.0 * f64::EPSILON {
            for (p, &(_, _, gp)) in g.iter().enumerate() {
                for kp in -POLISH_PAIR_ULPS..=POLISH_PAIR_ULPS {
                    let rp = r + kp as f64 * gp;
                    for (q, &(_, _, gq)) in g.iter().enumerate() {
                        if q == p {
                            continue;
                        }
                        let kq = fit(rp, gq);
                        let left = (rp + kq * gq).abs();
                        if left < best.1 {
                            best = (vec![(p, kp as f64), (q, kq)], left);
                        }
                    }
                }
            }
        }
        if best.0.is_empty() {
            return;
        }
        for (p, k) in best.0 {
            let (i, j, _) = g[p];
            a.set(i, j, step_ulps(a.get(i, j), k));
        }
    }
}

/// Moves `A` onto `det = 1` along the normal `A^-T` (one Newton step on the
/// determinant) and removes the normal part of `A'`.
///
/// A uniform rescaling would move every entry by `|det - 1| / n` relative,
/// which for ill-conditioned `A` is far above the rounding level at which
/// `det` itself is known; the normal step moves `A` by `|det - 1| / ||A^-1||`.
fn project_phase(n: usize, y: &mut [f64]) {
    let a = mat(n, y, 0);
    let det = a.det();
    if !(det > 0.0) || !det.is_finite() {
        return;
    }
    let Some(inv) = a.inverse() else { return };
    let mut a = &a - &inv.transpose().scale((det - 1.0) / (det * inv.hs_norm_sq()));
    polish_det(&mut a);
    let Some(inv) = a.inverse() else { return };
    let v = mat(n, y, 1);
    let c = inv.trace_product(&v) / inv.hs_norm_sq();
    let v = &v - &inv.transpose().scale(c);
    put(y, n, 0, &a);
    put(y, n, 1, &v);
}

fn column_names(prefix: &str, n: usize) -> Vec<String> {
    let mut out = Vec::with_capacity(n * n);
    for i in 1..=n {
        for j in 1..=n {
            if n >= 10 {
                out.push(format!("{prefix}_{i}_{j}"));
            } else {
                out.push(format!("{prefix}_{i}{j}"));
            }
        }
    }
    out
}

fn phase_report(s: &PhaseState, reference: &PhaseState) -> InvariantReport {
    InvariantReport {
        energy: s.energy(),
        det_drift: (s.a.matrix().det() - 1.0).abs(),
        zeta_drift: (s.vorticity() - reference.vorticity()).hs_norm(),
        angmom_drift: (s.angular_momentum() - reference.angular_momentum()).hs_norm(),
        sff: s.sff(),
        virial_residual: 0.0,
        trace_omega: 2.0 * s.a.matrix().inner(&s.adot),
        jacobi: None,
    }
}

fn phase_virial(s: &PhaseState) -> f64 {
    let n = s.dim() as f64;
    2.0 * s.energy() + 2.0 * n * s.sff() / s.a.inverse().hs_norm()
}

impl FlowState for PhaseState {
    fn pack(&self) -> Vec<f64> {
        let mut y = self.a.matrix().to_row_vec();
        self.adot.extend_row_major(&mut y);
        y
    }

    fn unpack(&self, y: &[f64]) -> Result<Self> {
        let n = self.dim();
        let a = GroupPoint::with_tolerance(mat(n, y, 0), SAMPLE_DET_TOLERANCE)?;
        PhaseState::new(a, mat(n, y, 1))
    }

    fn derivative(&self, y: &[f64], dy: &mut [f64]) {
        let n = self.dim();
        let a = mat(n, y, 0);
        let Some(inv) = a.inverse() else {
            return fill_nan(dy);
        };
        let v = mat(n, y, 1);
        put(dy, n, 0, &v);
        put(dy, n, 1, &geodesic_accel(&inv, &v));
    }

    fn project(&self, y: &mut [f64]) {
        project_phase(self.dim(), y);
    }

    fn report(&self, reference: &Self) -> InvariantReport {
        phase_report(self, reference)
    }

    fn virial_prediction(&self) -> f64 {
        phase_virial(self)
    }

    fn state_columns(&self) -> Vec<String> {
        let n = self.dim();
        let mut c = column_names("A", n);
        c.extend(column_names("Adot", n));
        c
    }

    fn state_values(&self) -> Vec<f64> {
        self.pack()
    }
}

impl FlowState for ReducedState {
    fn pack(&self) -> Vec<f64> {
        let mut y = self.beta.to_row_vec();
        self.omega.extend_row_major(&mut y);
        self.zeta.extend_row_major(&mut y);
        y
    }

    fn unpack(&self, y: &[f64]) -> Result<Self> {
        let n = self.dim();
        ReducedState::with_det_tolerance(mat(n, y, 0), mat(n, y, 1), mat(n, y, 2), SAMPLE_DET_TOLERANCE)
    }

    fn derivative(&self, y: &[f64], dy: &mut [f64]) {
        let n = self.dim();
        let (db, dw) = reduced_rates(&mat(n, y, 0), &mat(n, y, 1), &mat(n, y, 2));
        put(dy, n, 0, &db);
        put(dy, n, 1, &dw);
        put(dy, n, 2, &SquareMatrix::zeros(n));
    }

    fn project(&self, y: &mut [f64]) {
        let n = self.dim();
        let beta = mat(n, y, 0).symmetric_part();
        let det = beta.det();
        if !(det > 0.0) || !det.is_finite() {
            return;
        }
        // Normal step onto det = 1, as for the phase formulation.
        let Some(binv) = beta.inverse() else { return };
        let beta = (&beta - &binv.scale((det - 1.0) / (det * binv.hs_norm_sq()))).symmetric_part();
        let omega = mat(n, y, 1).symmetric_part();
        let c = beta.trace_product(&omega) / beta.trace();
        let omega = &omega - &SquareMatrix::identity(n).scale(c);
        let zeta = mat(n, y, 2).skew_part();
        put(y, n, 0, &beta);
        put(y, n, 1, &omega);
        put(y, n, 2, &zeta);
    }

    fn report(&self, reference: &Self) -> InvariantReport {
        InvariantReport {
            energy: self.energy(),
            det_drift: (self.beta.det() - 1.0).abs(),
            zeta_drift: (&self.zeta - &reference.zeta).hs_norm(),
            angmom_drift: (self.angular_momentum_norm() - reference.angular_momentum_norm()).abs(),
            sff: sff_reduced(self),
            virial_residual: 0.0,
            trace_omega: self.omega.trace(),
            jacobi: None,
        }
    }

    fn virial_prediction(&self) -> f64 {
        let n = self.dim() as f64;
        2.0 * self.energy() + 2.0 * n * sff_reduced(self) / self.beta.trace().sqrt()
    }

    fn state_columns(&self) -> Vec<String> {
        let n = self.dim();
        let mut c = column_names("beta", n);
        c.extend(column_names("omega", n));
        c.extend(column_names("zeta", n));
        c
    }

    fn state_values(&self) -> Vec<f64> {
        self.pack()
    }
}

impl FlowState for JacobiState {
    fn pack(&self) -> Vec<f64> {
        let mut y = self.along.pack();
        self.j.extend_row_major(&mut y);
        self.jdot.extend_row_major(&mut y);
        y
    }

    fn unpack(&self, y: &[f64]) -> Result<Self> {
        let n = self.along.dim();
        let a = GroupPoint::with_tolerance(mat(n, y, 0), SAMPLE_DET_TOLERANCE)?;
        let along = PhaseState::new(a, mat(n, y, 1))?;
        JacobiState::new(along, mat(n, y, 2), mat(n, y, 3))
    }

    fn derivative(&self, y: &[f64], dy: &mut [f64]) {
        let n = self.along.dim();
        let a = mat(n, y, 0);
        let Some(inv) = a.inverse() else {
            return fill_nan(dy);
        };
        let v = mat(n, y, 1);
        let j = mat(n, y, 2);
        let jd = mat(n, y, 3);
        put(dy, n, 0, &v);
        put(dy, n, 1, &geodesic_accel(&inv, &v));
        put(dy, n, 2, &jd);
        put(dy, n, 3, &jacobi_accel(&inv, &v, &j, &jd));
    }

    fn project(&self, y: &mut [f64]) {
        let n = self.along.dim();
        project_phase(n, y);
        let a = mat(n, y, 0);
        let Some(inv) = a.inverse() else { return };
        let Ok(base) = GroupPoint::with_tolerance(a, f64::INFINITY) else {
            return;
        };
        let j = project_tangent(&base, &mat(n, y, 2));
        let jd = consistent_jdot(&inv, &mat(n, y, 1), &j, &mat(n, y, 3));
        put(y, n, 2, &j);
        put(y, n, 3, &jd);
    }

    fn report(&self, reference: &Self) -> InvariantReport {
        let mut r = phase_report(&self.along, &reference.along);
        r.jacobi = Some(JacobiNorms {
            j_norm: self.j.hs_norm(),
            covariant_rate_norm: self.covariant_derivative().hs_norm(),
        });
        r
    }

    fn virial_prediction(&self) -> f64 {
        phase_virial(&self.along)
    }

    fn state_columns(&self) -> Vec<String> {
        let n = self.along.dim();
        let mut c = self.along.state_columns();
        c.extend(column_names("J", n));
        c.extend(column_names("Jdot", n));
        c
    }

    fn state_values(&self) -> Vec<f64> {
        self.pack()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{k2, z2};

    #[test]
    fn five_point_weights() {
        let x = [-2.0, -1.0, 0.0, 1.0, 2.0];
        let c = fd_weights(0.0, &x, 1);
        let expected = [1.0 / 12.0, -2.0 / 3.0, 0.0, 2.0 / 3.0, -1.0 / 12.0];
        for (a, b) in c[1].iter().zip(expected) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn sampled_derivative_of_quartic_is_exact() {
        let t: Vec<f64> = (0..20).map(|k| 0.1 * k as f64).collect();
        let v: Vec<f64> = t.iter().map(|x| x.powi(4) - x).collect();
        let d = sampled_derivative(&t, &v);
        for (x, di) in t.iter().zip(d) {
            assert!((di - (4.0 * x.powi(3) - 1.0)).abs() < 1e-10);
        }
    }

    #[test]
    fn static_state_has_zero_report() {
        let s = PhaseState::from_matrices(SquareMatrix::identity(3), SquareMatrix::zeros(3)).unwrap();
        let traj = integrate_geodesic(&s, 1.0, &IntegratorOptions::default()).unwrap();
        for smp in &traj.samples {
            assert_eq!(smp.report.energy, 0.0);
            assert_eq!(smp.report.zeta_drift, 0.0);
            assert_eq!(smp.report.angmom_drift, 0.0);
        }
    }

    #[test]
    fn grid_and_backward_order() {
        let s = PhaseState::from_matrices(SquareMatrix::identity(2), k2()).unwrap();
        let opts = IntegratorOptions {
            dt_out: 0.3,
            ..Default::default()
        };
        let traj = integrate_geodesic(&s, -1.0, &opts).unwrap();
        let t = traj.times();
        assert_eq!(t.len(), 5);
        assert_eq!(t[0], -1.0);
        assert_eq!(*t.last().unwrap(), 0.0);
        assert!(t.windows(2).all(|w| w[0] < w[1]));
        let w = integrate_window(&s, -0.6, 0.6, &opts).unwrap();
        assert_eq!(w.times().len(), 5);
    }

    #[test]
    fn rotation_keeps_norm() {
        let s = PhaseState::from_matrices(SquareMatrix::identity(2), z2()).unwrap();
        let traj = integrate_geodesic(&s, 10.0, &IntegratorOptions::default()).unwrap();
        assert!(traj.is_complete());
        for smp in &traj.samples {
            assert!((smp.state.a.matrix().hs_norm() - 2f64.sqrt()).abs() < 1e-9);
            assert!(smp.report.virial_residual < 1e-6);
        }
    }
}
