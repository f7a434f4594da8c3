//! Small angular momenta on the static blocks of a swirling flow turn an
//! unbounded solution into a bounded one.

use serde::{Deserialize, Serialize};

use super::planar::Hamiltonian2DState;
use super::swirl::SwirlSystem;
use super::{boundedness_verdict, BlockState, BoundednessReport};
use crate::error::{GeoError, Result};
use crate::integrate::{integrate_span, IntegratorOptions, Truncation};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub initial: BlockState,
    /// `||A|| = sqrt(tr beta^-1)` at the start, the end, and its maximum.
    pub norm_initial: f64,
    pub norm_final: f64,
    pub norm_max: f64,
    /// Largest `b0_i` reached per block.
    pub b0_max: Vec<f64>,
    pub verdict: BoundednessReport,
    /// Whether `b0_i - sqrt(b1_i^2 + b2_i^2)` stayed at or below `E / z_i^2`.
    pub ceilings_respected: bool,
    pub truncation: Option<Truncation>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InstabilityReport {
    pub n: usize,
    pub m0: usize,
    pub eps: f64,
    pub t_end: f64,
    pub unperturbed: RunSummary,
    pub perturbed: RunSummary,
}

impl InstabilityReport {
    /// `||A(t_end)|| / ||A(0)||` along the unperturbed run.
    pub fn growth_factor(&self) -> f64 {
        self.unperturbed.norm_final / self.unperturbed.norm_initial
    }
}

fn summarize(init: BlockState, t_end: f64, opts: &IntegratorOptions) -> Result<RunSummary> {
    let tr = integrate_span(&init, 0.0, t_end, opts)?;
    let verdict = boundedness_verdict(&init);
    let norms: Vec<f64> = tr.samples.iter().map(|s| s.state.position_norm_sq().sqrt()).collect();
    let mut b0_max = init.b0.clone();
    let mut ceilings_respected = true;
    for s in &tr.samples {
        for (i, b) in s.state.b0.iter().enumerate() {
            b0_max[i] = b0_max[i].max(*b);
        }
        for (i, ceiling) in verdict.ceilings.iter().enumerate() {
            if let Some(c) = ceiling {
                ceilings_respected &= s.state.b0[i] - s.state.b1[i].hypot(s.state.b2[i]) <= *c;
            }
        }
    }
    Ok(RunSummary {
        initial: init,
        norm_initial: norms[0],
        norm_final: *norms.last().expect("trajectory has samples"),
        norm_max: norms.iter().cloned().fold(0.0, f64::max),
        b0_max,
        verdict,
        ceilings_respected,
        truncation: tr.truncation,
    })
}

/// Runs the swirling flow with `z0 = 1` on the first `m0` blocks, once as is
/// and once with every remaining block given angular momentum `eps`.
pub fn instability_demo(
    n: usize,
    m0: usize,
    eps: f64,
    t_end: f64,
    opts: &IntegratorOptions,
) -> Result<InstabilityReport> {
    if n % 2 != 0 {
        return Err(GeoError::InvalidParameters(
            "the instability demo needs even n".into(),
        ));
    }
    if !(eps >= 0.0 && eps.is_finite()) {
        return Err(GeoError::InvalidParameters("eps must be a non-negative number".into()));
    }
    let swirl = SwirlSystem::new(n, m0, 1.0)?;
    let base = swirl.to_block(Hamiltonian2DState { q: 0.0, p: 0.0 })?;
    let mut bumped = base.clone();
    for z in bumped.z.iter_mut().skip(m0) {
        *z = eps;
    }
    Ok(InstabilityReport {
        n,
        m0,
        eps,
        t_end,
        unperturbed: summarize(base, t_end, opts)?,
        perturbed: summarize(bumped, t_end, opts)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::blockdiag::Verdict;

    #[test]
    fn zero_eps_runs_coincide() {
        let opts = IntegratorOptions {
            dt_out: 0.5,
            ..Default::default()
        };
        let r = instability_demo(4, 1, 0.0, 5.0, &opts).unwrap();
        assert_eq!(r.unperturbed, r.perturbed);
        assert_eq!(r.perturbed.verdict.verdict, Verdict::Inconclusive);
        assert!(instability_demo(5, 1, 1e-3, 5.0, &opts).is_err());
    }
}
