//! Numerical integration of the geodesic flow, in phase-space and reduced
//! form, and of Jacobi fields along geodesics.

pub mod dopri;
mod flow;
mod state;

pub use dopri::{IntegratorOptions, Truncation, TruncationReason};
pub use flow::{
    fd_weights, integrate_geodesic, integrate_jacobi, integrate_span, integrate_window,
    sampled_derivative, sampled_trajectory, FlowState, InvariantReport, JacobiNorms, Sample, Trajectory,
    SAMPLE_DET_TOLERANCE,
};
pub use state::{
    geodesic_rhs, jacobi_rhs, reduced_rhs, to_reduced, JacobiState, PhaseState, ReducedState,
    REDUCED_TOLERANCE, SYMMETRY_TOLERANCE,
};
